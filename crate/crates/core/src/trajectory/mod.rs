//! Componentized agent trajectories.
//!
//! A [`Trajectory`] holds the ordered context components that precede the
//! realized target action, together with the action itself. The target action
//! is never part of the context.

mod parse;
mod render;
mod segment;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_trajectory, ParseError};
pub use render::{
    ablate_sentence, render_context, render_literal_sentence, render_masked, render_with_body, RenderError,
    RenderTemplate, Upto,
};
pub use segment::{segment_sentences, SegmentMode, SegmenterConfig};

/// Functional type of a trajectory component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    User,
    Thought,
    Tool,
    Obs,
    Memory,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 5] = [
        ComponentKind::User,
        ComponentKind::Thought,
        ComponentKind::Tool,
        ComponentKind::Obs,
        ComponentKind::Memory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::User => "user",
            ComponentKind::Thought => "thought",
            ComponentKind::Tool => "tool",
            ComponentKind::Obs => "obs",
            ComponentKind::Memory => "memory",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub index: usize,
    pub kind: ComponentKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub id: String,
    pub source_model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
}

/// The context components `C_1..C_N` plus the target action `a_T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    meta: TrajectoryMeta,
    components: Vec<Component>,
    target_action: String,
}

impl Trajectory {
    /// Builds a trajectory from `(kind, text)` pairs, assigning indices by
    /// position and enforcing the same invariants as [`parse_trajectory`].
    pub fn new(
        meta: TrajectoryMeta,
        components: Vec<(ComponentKind, String)>,
        target_action: impl Into<String>,
    ) -> Result<Self, ParseError> {
        let target_action = target_action.into();
        if components.is_empty() {
            return Err(ParseError::NoComponents);
        }
        if target_action.trim().is_empty() {
            return Err(ParseError::EmptyTarget);
        }
        let components = components
            .into_iter()
            .enumerate()
            .map(|(index, (kind, text))| {
                if text.trim().is_empty() {
                    Err(ParseError::EmptyComponentText {
                        path: format!("components[{index}].text"),
                    })
                } else {
                    Ok(Component { index, kind, text })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            meta,
            components,
            target_action,
        })
    }

    pub fn meta(&self) -> &TrajectoryMeta {
        &self.meta
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, index: usize) -> Option<&Component> {
        self.components.get(index)
    }

    /// Number of context components `N`.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn target_action(&self) -> &str {
        &self.target_action
    }

    /// Serializes to the trajectory JSON interchange format.
    pub fn to_json(&self) -> serde_json::Value {
        let components: Vec<_> = self
            .components
            .iter()
            .map(|c| serde_json::json!({ "kind": c.kind.as_str(), "text": c.text }))
            .collect();
        serde_json::json!({
            "meta": self.meta,
            "components": components,
            "target_action": self.target_action,
        })
    }
}

/// A contiguous span of one component's text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub component_index: usize,
    pub sentence_index: usize,
    /// Half-open byte range into the component text.
    pub char_span: [usize; 2],
    pub text: String,
}

impl Sentence {
    pub fn start(&self) -> usize {
        self.char_span[0]
    }

    pub fn end(&self) -> usize {
        self.char_span[1]
    }
}
