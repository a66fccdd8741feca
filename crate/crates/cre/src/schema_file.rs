//! Loading the relation schema from TOML.

use std::path::Path;

use cre_core::SchemaConfig;

use crate::error::{Error, Result};

/// Environment variable naming a schema file to use instead of the built-in one.
pub const SCHEMA_ENV: &str = "CRE_SCHEMA";

const BUILTIN: &str = include_str!("../data/schema.toml");

pub fn parse_schema(text: &str, origin: &Path) -> Result<SchemaConfig> {
    let schema: SchemaConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::record(origin, line, e.message())
    })?;
    schema.validate()?;
    Ok(schema)
}

pub fn load_schema(path: &Path) -> Result<SchemaConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schema(&text, path)
}

/// The 41-relation TACRED schema shipped with the crate.
pub fn builtin_schema() -> SchemaConfig {
    parse_schema(BUILTIN, Path::new("<builtin schema>")).expect("built-in schema is valid")
}

/// Explicit path, then `CRE_SCHEMA`, then the built-in schema; narrowed to
/// `profile` when one is given.
pub fn resolve_schema(path: Option<&Path>, profile: Option<&str>) -> Result<SchemaConfig> {
    let env = std::env::var_os(SCHEMA_ENV);
    let schema = match path.or(env.as_deref().map(Path::new)) {
        Some(p) => load_schema(p)?,
        None => builtin_schema(),
    };
    match profile {
        Some(name) => Ok(schema.with_profile(name)?),
        None => Ok(schema),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_41_relations_and_30_in_profile() {
        let s = builtin_schema();
        assert_eq!(s.relations.len(), 41);
        assert_eq!(s.with_profile("cre").unwrap().relations.len(), 30);
    }

    #[test]
    fn religion_is_only_person_religion_relation() {
        let s = builtin_schema();
        let got = s.compatible_relations(&"PERSON".into(), &"RELIGION".into());
        assert_eq!(got.into_iter().collect::<Vec<_>>(), ["per:religion"]);
    }

    #[test]
    fn parse_error_names_line() {
        let err = parse_schema(
            "no_relation_label = \"x\"\n[[relation]]\nrelation = 3\n",
            Path::new("s.toml"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Record { line: 3, .. }), "{err}");
    }

    #[test]
    fn invalid_template_names_relation() {
        let text = r#"
no_relation_label = "no_relation"
[[relation]]
relation = "per:age"
subject_types = ["PERSON"]
object_types = ["NUMBER"]
question_subject = "How old is {}?"
question_object = "Whose age is {e2}?"
"#;
        let err = parse_schema(text, Path::new("s.toml")).unwrap_err();
        assert!(err.to_string().contains("per:age"), "{err}");
    }
}
