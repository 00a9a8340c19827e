//! JSON model files.
//!
//! ```json
//! {"classes": [
//!   {"p": 0.5,
//!    "alpha": [{"prob": 1.0, "batch": {"values": [1], "probs": [1.0]}}],
//!    "T": [[{"prob": 0.5, "batch": {"values": [1], "probs": [1.0]}}]],
//!    "service": {"values": [1], "probs": [1.0]}}
//! ]}
//! ```
//!
//! Moves into the idle state are never listed: the exit probability of each
//! active state is the deficit of its `T` row, and such moves carry no
//! customers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArrivalStreamSpec, ClassSpec, ServiceSpec, SystemSpec, TransitionEntry};
use crate::pmf::Pmf;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub classes: Vec<ClassDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDoc {
    pub p: f64,
    pub alpha: Vec<EntryDoc>,
    #[serde(rename = "T")]
    pub t: Vec<Vec<EntryDoc>>,
    pub service: Pmf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDoc {
    pub prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<Pmf>,
}

impl EntryDoc {
    fn into_entry(self, class: usize, place: &str) -> Result<TransitionEntry> {
        let batch = match self.batch {
            Some(b) => b,
            // a batch law is irrelevant on a move that never happens
            None if self.prob == 0.0 => Pmf::point(1),
            None => {
                return Err(Error::Shape(format!(
                    "class {class}: {place} has prob {} but no batch law",
                    self.prob
                )))
            }
        };
        Ok(TransitionEntry::new(self.prob, batch))
    }
}

impl ModelFile {
    /// Converts to a [`SystemSpec`]. Only shape is checked here; the model
    /// assumptions are checked by [`crate::validate::validate_system`].
    pub fn into_system(self) -> Result<SystemSpec> {
        let classes = self
            .classes
            .into_iter()
            .enumerate()
            .map(|(idx, doc)| {
                let class = idx + 1;
                let alpha = doc
                    .alpha
                    .into_iter()
                    .enumerate()
                    .map(|(j, e)| e.into_entry(class, &format!("alpha[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                let transitions = doc
                    .t
                    .into_iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.into_iter()
                            .enumerate()
                            .map(|(j, e)| e.into_entry(class, &format!("T[{i}][{j}]")))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                let stream = ArrivalStreamSpec::new(doc.p, alpha, transitions)
                    .map_err(|e| Error::Shape(format!("class {class}: {e}")))?;
                // service support is validated later so the report can name it
                Ok(ClassSpec {
                    stream,
                    service: ServiceSpec { pmf: doc.service },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SystemSpec { classes })
    }

    pub fn from_system(system: &SystemSpec) -> Self {
        let entry = |e: &TransitionEntry| EntryDoc {
            prob: e.prob,
            batch: Some(e.batch.clone()),
        };
        ModelFile {
            classes: system
                .classes
                .iter()
                .map(|c| ClassDoc {
                    p: c.stream.idle_self_prob,
                    alpha: c.stream.alpha.iter().map(entry).collect(),
                    t: c.stream
                        .transitions
                        .iter()
                        .map(|row| row.iter().map(entry).collect())
                        .collect(),
                    service: c.service.pmf.clone(),
                })
                .collect(),
        }
    }
}

pub fn parse_model(json: &str) -> Result<SystemSpec> {
    let file: ModelFile = serde_json::from_str(json)?;
    file.into_system()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SystemSpec> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Shape(format!("cannot read {}: {e}", path.as_ref().display())))?;
    parse_model(&text)
}

pub fn to_json(system: &SystemSpec) -> String {
    serde_json::to_string_pretty(&ModelFile::from_system(system)).expect("model serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const BURSTY: &str = r#"{"classes": [{"p": 0.5,
        "alpha": [{"prob": 1.0, "batch": {"values": [1], "probs": [1.0]}}],
        "T": [[{"prob": 0.5, "batch": {"values": [1], "probs": [1.0]}}]],
        "service": {"values": [1], "probs": [1.0]}}]}"#;

    #[test]
    fn parses_and_round_trips() {
        let sys = parse_model(BURSTY).unwrap();
        assert_eq!(sys.num_classes(), 1);
        assert_eq!(sys.classes[0].stream.exit_probs(), vec![0.5]);
        let again = parse_model(&to_json(&sys)).unwrap();
        assert_eq!(sys, again);
    }

    #[test]
    fn missing_batch_needs_zero_prob() {
        let zero = BURSTY.replace(
            r#"{"prob": 0.5, "batch": {"values": [1], "probs": [1.0]}}"#,
            r#"{"prob": 0.0}"#,
        );
        assert!(parse_model(&zero).is_ok());
        let missing = BURSTY.replace(
            r#"{"prob": 0.5, "batch": {"values": [1], "probs": [1.0]}}"#,
            r#"{"prob": 0.5}"#,
        );
        assert!(matches!(parse_model(&missing), Err(Error::Shape(_))));
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = parse_model("{\"classes\": [ {\"p\": 0.5,, } ]}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
    }
}
