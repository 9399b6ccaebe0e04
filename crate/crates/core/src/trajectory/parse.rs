use serde_json::{Map, Value};
use thiserror::Error;

use super::{ComponentKind, Trajectory, TrajectoryMeta};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("trajectory is not valid UTF-8: {0}")]
    InvalidUtf8(String),
    #[error("malformed trajectory JSON: {0}")]
    MalformedJson(String),
    #[error("missing field `{path}`")]
    MissingField { path: String },
    #[error("field `{path}` must be {expected}")]
    WrongType { path: String, expected: &'static str },
    #[error("unknown component kind {kind:?} at `{path}`")]
    UnknownKind { kind: String, path: String },
    #[error("target_action is empty")]
    EmptyTarget,
    #[error("component text is empty at `{path}`")]
    EmptyComponentText { path: String },
    #[error("trajectory has no context components")]
    NoComponents,
}

impl ParseError {
    /// JSON path of the offending field, when the error has one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ParseError::MissingField { path }
            | ParseError::WrongType { path, .. }
            | ParseError::UnknownKind { path, .. }
            | ParseError::EmptyComponentText { path } => Some(path),
            ParseError::EmptyTarget => Some("target_action"),
            ParseError::NoComponents => Some("components"),
            _ => None,
        }
    }
}

/// Parses and validates trajectory JSON.
pub fn parse_trajectory(raw: &[u8]) -> Result<Trajectory, ParseError> {
    let text = std::str::from_utf8(raw).map_err(|e| ParseError::InvalidUtf8(e.to_string()))?;
    let root: Value =
        serde_json::from_str(text).map_err(|e| ParseError::MalformedJson(e.to_string()))?;
    let root = as_object(&root, "$")?;

    let meta = as_object(required(root, "meta", "meta")?, "meta")?;
    let meta = TrajectoryMeta {
        id: as_str(required(meta, "id", "meta.id")?, "meta.id")?.to_owned(),
        source_model: as_str(
            required(meta, "source_model", "meta.source_model")?,
            "meta.source_model",
        )?
        .to_owned(),
        system_prompt: match meta.get("system_prompt") {
            None | Some(Value::Null) => None,
            Some(v) => Some(as_str(v, "meta.system_prompt")?.to_owned()),
        },
    };

    let raw_components = match required(root, "components", "components")? {
        Value::Array(items) => items,
        _ => {
            return Err(ParseError::WrongType {
                path: "components".into(),
                expected: "an array",
            })
        }
    };
    let mut components = Vec::with_capacity(raw_components.len());
    for (i, item) in raw_components.iter().enumerate() {
        let base = format!("components[{i}]");
        let obj = as_object(item, &base)?;
        let kind_path = format!("{base}.kind");
        let kind_name = as_str(required(obj, "kind", &kind_path)?, &kind_path)?;
        let kind = ComponentKind::from_name(kind_name).ok_or_else(|| ParseError::UnknownKind {
            kind: kind_name.to_owned(),
            path: kind_path.clone(),
        })?;
        let text_path = format!("{base}.text");
        let text = as_str(required(obj, "text", &text_path)?, &text_path)?;
        components.push((kind, text.to_owned()));
    }

    let target = as_str(
        required(root, "target_action", "target_action")?,
        "target_action",
    )?;
    Trajectory::new(meta, components, target)
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, ParseError> {
    obj.get(key).ok_or_else(|| ParseError::MissingField {
        path: path.to_owned(),
    })
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ParseError> {
    v.as_object().ok_or_else(|| ParseError::WrongType {
        path: path.to_owned(),
        expected: "an object",
    })
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, ParseError> {
    v.as_str().ok_or_else(|| ParseError::WrongType {
        path: path.to_owned(),
        expected: "a string",
    })
}
