//! Predictor specifications and the file-backed predictors.
//!
//! A relation predictor is named on the command line as one of
//!
//! - `file:PATH`: a prediction file (JSON Lines, keyed by instance id);
//! - `remote:URL`: a model adapter speaking the `/v1/predict` protocol;
//! - `oracle-event:GOLD`, `oracle-type`, `oracle-event-type:GOLD`: the
//!   heuristic oracles, with GOLD a challenge-set file.
//!
//! A QA predictor is `file:PATH` (answers keyed by query id) or `remote:URL`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use cre_core::predict::{
    reassemble, EventOracle, EventTypeOracle, GoldIndex, PredictError, Prediction, Predictor,
    RawPrediction, TypeOracle,
};
use cre_core::qa::{QaAnswer, QaPredictor, QaQuery};
use cre_core::{CandidateInstance, SchemaConfig};

use crate::error::{Error, Result};
use crate::formats::{load_cre, load_predictions, load_qa_answers};
use crate::remote::{RemoteOptions, RemotePredictor, RemoteQa};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictorSpec {
    File(PathBuf),
    Remote(String),
    OracleEvent(PathBuf),
    OracleType,
    OracleEventType(PathBuf),
}

impl FromStr for PredictorSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let need = |a: Option<&str>| match a {
            Some(a) if !a.is_empty() => Ok(a.to_string()),
            _ => Err(format!(
                "predictor `{kind}` needs an argument: `{kind}:...`"
            )),
        };
        match kind {
            "file" => Ok(PredictorSpec::File(need(arg)?.into())),
            "remote" => Ok(PredictorSpec::Remote(need(arg)?)),
            "oracle-event" => Ok(PredictorSpec::OracleEvent(need(arg)?.into())),
            "oracle-type" if arg.is_none() => Ok(PredictorSpec::OracleType),
            "oracle-event-type" => Ok(PredictorSpec::OracleEventType(need(arg)?.into())),
            _ => Err(format!(
                "unknown predictor `{s}`; expected file:PATH, remote:URL, oracle-event:GOLD, \
                 oracle-type or oracle-event-type:GOLD"
            )),
        }
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorSpec::File(p) => write!(f, "file:{}", p.display()),
            PredictorSpec::Remote(u) => write!(f, "remote:{u}"),
            PredictorSpec::OracleEvent(p) => write!(f, "oracle-event:{}", p.display()),
            PredictorSpec::OracleType => f.write_str("oracle-type"),
            PredictorSpec::OracleEventType(p) => write!(f, "oracle-event-type:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QaSpec {
    File(PathBuf),
    Remote(String),
}

impl FromStr for QaSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            Some(("file", p)) if !p.is_empty() => Ok(QaSpec::File(p.into())),
            Some(("remote", u)) if !u.is_empty() => Ok(QaSpec::Remote(u.into())),
            _ => Err(format!(
                "unknown QA predictor `{s}`; expected file:PATH or remote:URL"
            )),
        }
    }
}

/// What a predictor may need besides its spec.
pub struct PredictorContext<'a> {
    /// Relations a predictor may legitimately output.
    pub schema: &'a SchemaConfig,
    /// Sentence tokens for remote adapters, keyed by sentence id.
    pub tokens: Arc<BTreeMap<String, Vec<String>>>,
    pub remote: RemoteOptions,
}

pub fn open_predictor(
    spec: &PredictorSpec,
    ctx: &PredictorContext<'_>,
) -> Result<Box<dyn Predictor + Send>> {
    let gold = |path: &Path| -> Result<GoldIndex> {
        let cre = load_cre(path)?;
        Ok(GoldIndex::from_instances(cre.instances()))
    };
    Ok(match spec {
        PredictorSpec::File(path) => Box::new(FilePredictor::open(path, ctx.schema.clone())?),
        PredictorSpec::Remote(url) => Box::new(RemotePredictor::new(
            url,
            ctx.remote.clone(),
            ctx.tokens.clone(),
            ctx.schema.clone(),
        )),
        PredictorSpec::OracleEvent(path) => Box::new(EventOracle { gold: gold(path)? }),
        PredictorSpec::OracleType => Box::new(TypeOracle {
            schema: ctx.schema.clone(),
        }),
        PredictorSpec::OracleEventType(path) => Box::new(EventTypeOracle {
            gold: gold(path)?,
            schema: ctx.schema.clone(),
        }),
    })
}

pub fn open_qa(spec: &QaSpec, remote: RemoteOptions) -> Result<Box<dyn QaPredictor + Send>> {
    Ok(match spec {
        QaSpec::File(path) => Box::new(FileQa::open(path)?),
        QaSpec::Remote(url) => Box::new(RemoteQa::new(url, remote)),
    })
}

/// Answers from a prediction file. The file may cover more instances than a
/// batch asks for; every asked instance must be present.
pub struct FilePredictor {
    id: String,
    answers: BTreeMap<String, RawPrediction>,
    schema: SchemaConfig,
}

impl FilePredictor {
    pub fn open(path: &Path, schema: SchemaConfig) -> Result<Self> {
        let answers = load_predictions(path, &schema.no_relation_label)?;
        for raw in answers.values() {
            if let Some(rel) = &raw.predicted_relation {
                if !schema.contains(rel) {
                    return Err(Error::Predict(PredictError::UnknownRelation(rel.clone())));
                }
            }
        }
        Ok(FilePredictor {
            id: format!("file:{}", path.display()),
            answers,
            schema,
        })
    }

    pub fn from_answers(
        id: &str,
        answers: BTreeMap<String, RawPrediction>,
        schema: SchemaConfig,
    ) -> Self {
        FilePredictor {
            id: id.into(),
            answers,
            schema,
        }
    }

    /// Multi-class answers keyed by id, `None` meaning no relation.
    pub fn relations(&self) -> BTreeMap<String, Option<String>> {
        self.answers
            .iter()
            .map(|(id, raw)| (id.clone(), raw.predicted_relation.clone()))
            .collect()
    }
}

impl Predictor for FilePredictor {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict_batch(
        &self,
        instances: &[CandidateInstance],
    ) -> std::result::Result<Vec<Prediction>, PredictError> {
        let found = instances
            .iter()
            .filter_map(|i| self.answers.get(i.instance_id()).cloned());
        reassemble(instances, found, &self.schema, false)
    }
}

/// Answers from a QA answer file keyed by query id.
pub struct FileQa {
    id: String,
    answers: BTreeMap<String, QaAnswer>,
}

impl FileQa {
    pub fn open(path: &Path) -> Result<Self> {
        Ok(FileQa {
            id: format!("file:{}", path.display()),
            answers: load_qa_answers(path)?,
        })
    }
}

impl QaPredictor for FileQa {
    fn id(&self) -> &str {
        &self.id
    }

    fn answer_batch(
        &self,
        queries: &[QaQuery],
    ) -> std::result::Result<Vec<QaAnswer>, PredictError> {
        let missing: Vec<String> = queries
            .iter()
            .filter(|q| !self.answers.contains_key(&q.id))
            .map(|q| q.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(PredictError::Missing(missing));
        }
        Ok(queries
            .iter()
            .map(|q| self.answers[&q.id].clone())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!(
            "file:p.jsonl".parse(),
            Ok(PredictorSpec::File("p.jsonl".into()))
        );
        assert_eq!(
            "remote:http://h:1".parse(),
            Ok(PredictorSpec::Remote("http://h:1".into()))
        );
        assert_eq!("oracle-type".parse(), Ok(PredictorSpec::OracleType));
        assert_eq!(
            "oracle-event-type:g.jsonl".parse(),
            Ok(PredictorSpec::OracleEventType("g.jsonl".into()))
        );
        assert!("oracle-event".parse::<PredictorSpec>().is_err());
        assert!("file:".parse::<PredictorSpec>().is_err());
        assert!("gpt".parse::<PredictorSpec>().is_err());
        for s in [
            "file:a",
            "remote:http://x",
            "oracle-event:g",
            "oracle-type",
            "oracle-event-type:g",
        ] {
            assert_eq!(s.parse::<PredictorSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn qa_spec_parsing() {
        assert_eq!("file:a.jsonl".parse(), Ok(QaSpec::File("a.jsonl".into())));
        assert!("oracle-type".parse::<QaSpec>().is_err());
    }
}
