//! Relation inventory and argument type constraints.
//!
//! A [`SchemaConfig`] is plain data: it is deserialized from the shipped
//! schema file by the `cre` crate and then checked with
//! [`SchemaConfig::validate`]. Once validated it is never mutated.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Placeholder replaced by the subject surface in question templates.
pub const SUBJECT_PLACEHOLDER: &str = "{e1}";
/// Placeholder replaced by the object surface in question templates.
pub const OBJECT_PLACEHOLDER: &str = "{e2}";

/// Named-entity type tag, compared by exact case-sensitive match.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityType(String);

impl EntityType {
    pub fn new(name: impl Into<String>) -> Self {
        EntityType(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityType {
    fn from(s: &str) -> Self {
        EntityType::new(s)
    }
}

/// One relation: its name, admissible argument types and the two QA
/// question templates.
///
/// `question_subject` mentions the subject (`{e1}`) and is answered by the
/// object surface; `question_object` mentions the object (`{e2}`) and is
/// answered by the subject surface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationSchema {
    pub relation: String,
    pub subject_types: BTreeSet<EntityType>,
    pub object_types: BTreeSet<EntityType>,
    pub question_subject: String,
    pub question_object: String,
}

impl RelationSchema {
    pub fn admits(&self, subject: &EntityType, object: &EntityType) -> bool {
        self.subject_types.contains(subject) && self.object_types.contains(object)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub no_relation_label: String,
    #[serde(default)]
    pub profiles: BTreeMap<String, Vec<String>>,
    #[serde(rename = "relation")]
    pub relations: Vec<RelationSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("schema defines no relations")]
    Empty,
    #[error("no-relation label is empty")]
    EmptyNoRelationLabel,
    #[error("relation `{0}` is defined more than once")]
    DuplicateRelation(String),
    #[error("relation `{0}` collides with the no-relation label")]
    NoRelationCollision(String),
    #[error("relation `{relation}`: {reason}")]
    Invalid { relation: String, reason: String },
    #[error("profile `{profile}` references unknown relation `{relation}`")]
    UnknownProfileRelation { profile: String, relation: String },
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
}

impl SchemaConfig {
    /// Checks every structural invariant, naming the offending relation.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.relations.is_empty() {
            return Err(SchemaError::Empty);
        }
        if self.no_relation_label.is_empty() {
            return Err(SchemaError::EmptyNoRelationLabel);
        }
        let mut seen = BTreeSet::new();
        for rel in &self.relations {
            let invalid = |reason: &str| SchemaError::Invalid {
                relation: rel.relation.clone(),
                reason: reason.to_string(),
            };
            if rel.relation.is_empty() {
                return Err(invalid("empty relation name"));
            }
            if !seen.insert(rel.relation.as_str()) {
                return Err(SchemaError::DuplicateRelation(rel.relation.clone()));
            }
            if rel.relation == self.no_relation_label {
                return Err(SchemaError::NoRelationCollision(rel.relation.clone()));
            }
            if rel.subject_types.is_empty() {
                return Err(invalid("subject_types is empty"));
            }
            if rel.object_types.is_empty() {
                return Err(invalid("object_types is empty"));
            }
            if rel
                .subject_types
                .iter()
                .chain(rel.object_types.iter())
                .any(|t| t.as_str().is_empty())
            {
                return Err(invalid("empty entity type name"));
            }
            check_template(
                &rel.question_subject,
                SUBJECT_PLACEHOLDER,
                OBJECT_PLACEHOLDER,
            )
            .map_err(|r| invalid(&alloc::format!("question_subject {r}")))?;
            check_template(
                &rel.question_object,
                OBJECT_PLACEHOLDER,
                SUBJECT_PLACEHOLDER,
            )
            .map_err(|r| invalid(&alloc::format!("question_object {r}")))?;
        }
        for (profile, names) in &self.profiles {
            for name in names {
                if !seen.contains(name.as_str()) {
                    return Err(SchemaError::UnknownProfileRelation {
                        profile: profile.clone(),
                        relation: name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn relation(&self, name: &str) -> Option<&RelationSchema> {
        self.relations.iter().find(|r| r.relation == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.relation(name).is_some()
    }

    pub fn relation_names(&self) -> impl Iterator<Item = &str> {
        self.relations.iter().map(|r| r.relation.as_str())
    }

    /// Every relation whose subject and object type sets admit the pair.
    pub fn compatible_relations(
        &self,
        subject: &EntityType,
        object: &EntityType,
    ) -> BTreeSet<&str> {
        self.relations
            .iter()
            .filter(|r| r.admits(subject, object))
            .map(|r| r.relation.as_str())
            .collect()
    }

    pub fn is_compatible(&self, relation: &str, subject: &EntityType, object: &EntityType) -> bool {
        self.relation(relation)
            .is_some_and(|r| r.admits(subject, object))
    }

    /// All entity types mentioned by any relation.
    pub fn entity_types(&self) -> BTreeSet<&EntityType> {
        self.relations
            .iter()
            .flat_map(|r| r.subject_types.iter().chain(r.object_types.iter()))
            .collect()
    }

    /// Restricts the schema to the relations listed under `profile`.
    pub fn with_profile(&self, profile: &str) -> Result<SchemaConfig, SchemaError> {
        let names = self
            .profiles
            .get(profile)
            .ok_or_else(|| SchemaError::UnknownProfile(profile.to_string()))?;
        let keep: BTreeSet<&str> = names.iter().map(String::as_str).collect();
        let restricted = SchemaConfig {
            no_relation_label: self.no_relation_label.clone(),
            profiles: BTreeMap::new(),
            relations: self
                .relations
                .iter()
                .filter(|r| keep.contains(r.relation.as_str()))
                .cloned()
                .collect(),
        };
        restricted.validate()?;
        Ok(restricted)
    }
}

/// A template must mention its own argument, must not mention the argument
/// it is asking for, and must not contain any other brace group.
fn check_template(template: &str, own: &str, other: &str) -> Result<(), &'static str> {
    if !template.contains(own) {
        return Err("is missing its argument placeholder");
    }
    if template.contains(other) {
        return Err("mentions the argument it should be asking for");
    }
    let stripped = template.replace(own, "");
    if stripped.contains('{') || stripped.contains('}') {
        return Err("contains an unknown placeholder");
    }
    Ok(())
}
