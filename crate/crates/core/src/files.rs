//! Versioned JSON documents. Every file carries a top-level `"schema"` tag
//! such as `"espatial-graph/1"`; loading checks the tag before decoding the
//! body.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub const GRAPH_SCHEMA: &str = "espatial-graph/1";
pub const SCENE_SCHEMA: &str = "espatial-scene/1";
pub const LEGO_SCHEMA: &str = "espatial-lego/1";
pub const PLAN_SCHEMA: &str = "espatial-plan/1";
pub const QUERY_SCHEMA: &str = "espatial-query/1";
pub const ANSWER_SCHEMA: &str = "espatial-answer/1";
pub const TRACE_SCHEMA: &str = "espatial-trace/1";
pub const QA_SCHEMA: &str = "espatial-qa/1";
pub const REPORT_SCHEMA: &str = "espatial-report/1";

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parse error in field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("schema version mismatch: expected `{expected}`, found `{found}`")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("invalid document: {0}")]
    Invalid(String),
}

impl FileError {
    pub fn is_parse_error(&self) -> bool {
        matches!(self, FileError::Syntax { .. } | FileError::Field { .. })
    }
}

pub fn decode<T: DeserializeOwned>(text: &str, schema: &str) -> Result<T, FileError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| FileError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = value.as_object_mut().ok_or_else(|| FileError::Field {
        field: ".".into(),
        message: "expected a JSON object".into(),
    })?;
    match obj.remove("schema") {
        Some(Value::String(s)) if s == schema => {}
        Some(Value::String(s)) => {
            return Err(FileError::SchemaVersionMismatch {
                expected: schema.into(),
                found: s,
            });
        }
        Some(other) => {
            return Err(FileError::Field {
                field: "schema".into(),
                message: format!("expected a string, found {other}"),
            })
        }
        None => {
            return Err(FileError::Field {
                field: "schema".into(),
                message: "missing field".into(),
            })
        }
    }
    serde_path_to_error::deserialize(value).map_err(|e| FileError::Field {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn encode<T: Serialize>(doc: &T, schema: &str) -> String {
    let mut value = serde_json::to_value(doc).expect("document types always serialize");
    let body = value
        .as_object_mut()
        .expect("documents serialize to objects");
    let mut out = serde_json::Map::new();
    out.insert("schema".into(), Value::String(schema.into()));
    out.append(body);
    let mut s = serde_json::to_string_pretty(&Value::Object(out)).expect("values always serialize");
    s.push('\n');
    s
}

pub fn read(path: impl AsRef<Path>) -> Result<String, FileError> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write(path: impl AsRef<Path>, text: &str) -> Result<(), FileError> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load<T: DeserializeOwned>(path: impl AsRef<Path>, schema: &str) -> Result<T, FileError> {
    decode(&read(path)?, schema)
}

pub fn save<T: Serialize>(path: impl AsRef<Path>, doc: &T, schema: &str) -> Result<(), FileError> {
    write(path, &encode(doc, schema))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Doc {
        n: u32,
        xs: Vec<f64>,
    }

    #[test]
    fn round_trip_with_schema() {
        let d = Doc {
            n: 3,
            xs: vec![0.1, 1.0 / 3.0],
        };
        let text = encode(&d, "test/1");
        assert!(text.contains("\"schema\": \"test/1\""));
        assert_eq!(decode::<Doc>(&text, "test/1").unwrap(), d);
    }

    #[test]
    fn reports_schema_mismatch() {
        let text = encode(&Doc { n: 1, xs: vec![] }, "test/2");
        assert!(matches!(
            decode::<Doc>(&text, "test/1"),
            Err(FileError::SchemaVersionMismatch { .. })
        ));
        assert!(matches!(
            decode::<Doc>("{\"n\": 1, \"xs\": []}", "test/1"),
            Err(FileError::Field { .. })
        ));
    }

    #[test]
    fn reports_truncation_and_bad_fields() {
        let text = encode(
            &Doc {
                n: 1,
                xs: vec![1.0],
            },
            "test/1",
        );
        let cut = &text[..text.len() / 2];
        assert!(matches!(
            decode::<Doc>(cut, "test/1"),
            Err(FileError::Syntax { .. })
        ));
        let bad = "{\"schema\": \"test/1\", \"n\": 1, \"xs\": [1.0, \"a\"]}";
        match decode::<Doc>(bad, "test/1") {
            Err(FileError::Field { field, .. }) => assert_eq!(field, "xs[1]"),
            other => panic!("{other:?}"),
        }
    }
}
