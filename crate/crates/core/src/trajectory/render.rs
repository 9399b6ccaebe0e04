use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{segment_sentences, ComponentKind, SegmenterConfig, Sentence, Trajectory};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("component index {index} out of range for trajectory with {len} components")]
    ComponentOutOfRange { index: usize, len: usize },
    #[error("sentence {sentence} out of range for component {component} with {count} sentences")]
    SentenceOutOfRange {
        component: usize,
        sentence: usize,
        count: usize,
    },
    #[error("mask has {got} bits but component {component} has {expected} sentences")]
    MaskLength {
        component: usize,
        expected: usize,
        got: usize,
    },
}

/// How components are serialized into a single scorer context string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderTemplate {
    pub user: String,
    pub thought: String,
    pub tool: String,
    pub obs: String,
    pub memory: String,
    pub separator: String,
    /// Prepended to the system prompt when the trajectory has one.
    pub system_prefix: Option<String>,
}

impl Default for RenderTemplate {
    fn default() -> Self {
        Self {
            user: "[USER] ".into(),
            thought: "[THOUGHT] ".into(),
            tool: "[TOOL] ".into(),
            obs: "[OBS] ".into(),
            memory: "[MEMORY] ".into(),
            separator: "\n".into(),
            system_prefix: None,
        }
    }
}

impl RenderTemplate {
    pub fn header(&self, kind: ComponentKind) -> &str {
        match kind {
            ComponentKind::User => &self.user,
            ComponentKind::Thought => &self.thought,
            ComponentKind::Tool => &self.tool,
            ComponentKind::Obs => &self.obs,
            ComponentKind::Memory => &self.memory,
        }
    }
}

/// End of a rendered prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upto {
    /// No components: only the system prompt, if any.
    Empty,
    /// Components `0..=i`.
    Through(usize),
}

impl Upto {
    /// The prefix holding the first `len` components.
    pub fn from_len(len: usize) -> Self {
        match len {
            0 => Upto::Empty,
            n => Upto::Through(n - 1),
        }
    }
}

fn check_index(traj: &Trajectory, index: usize) -> Result<(), RenderError> {
    if index < traj.len() {
        Ok(())
    } else {
        Err(RenderError::ComponentOutOfRange {
            index,
            len: traj.len(),
        })
    }
}

/// Renders components `0..i` verbatim, then component `i` with its text
/// replaced by `body`.
fn render_prefix(traj: &Trajectory, last: Option<(usize, &str)>, tmpl: &RenderTemplate) -> String {
    let mut parts: Vec<String> = Vec::new();
    if let Some(prompt) = &traj.meta().system_prompt {
        parts.push(format!(
            "{}{}",
            tmpl.system_prefix.as_deref().unwrap_or(""),
            prompt
        ));
    }
    if let Some((last, body)) = last {
        for c in &traj.components()[..last] {
            parts.push(format!("{}{}", tmpl.header(c.kind), c.text));
        }
        let c = &traj.components()[last];
        parts.push(format!("{}{}", tmpl.header(c.kind), body));
    }
    parts.join(&tmpl.separator)
}

/// Renders the context made of every component up to and including `upto`.
pub fn render_context(
    traj: &Trajectory,
    upto: Upto,
    tmpl: &RenderTemplate,
) -> Result<String, RenderError> {
    match upto {
        Upto::Empty => Ok(render_prefix(traj, None, tmpl)),
        Upto::Through(i) => {
            check_index(traj, i)?;
            Ok(render_prefix(traj, Some((i, &traj.components()[i].text)), tmpl))
        }
    }
}

/// Renders components `0..=i` with the text of component `i` replaced.
pub fn render_with_body(
    traj: &Trajectory,
    i: usize,
    body: &str,
    tmpl: &RenderTemplate,
) -> Result<String, RenderError> {
    check_index(traj, i)?;
    Ok(render_prefix(traj, Some((i, body)), tmpl))
}

/// Renders components `0..=i` where component `i` keeps only the sentences
/// whose mask bit is set, joined by single spaces.
pub fn render_masked(
    traj: &Trajectory,
    i: usize,
    sentences: &[Sentence],
    keep: &[bool],
    tmpl: &RenderTemplate,
) -> Result<String, RenderError> {
    if keep.len() != sentences.len() {
        return Err(RenderError::MaskLength {
            component: i,
            expected: sentences.len(),
            got: keep.len(),
        });
    }
    let body = sentences
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(s, _)| s.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    render_with_body(traj, i, &body, tmpl)
}

/// Renders the prefix ending at component `i` with sentence `j` removed.
/// Components after `i` are not part of the output.
pub fn ablate_sentence(
    traj: &Trajectory,
    i: usize,
    j: usize,
    tmpl: &RenderTemplate,
    seg: &SegmenterConfig,
) -> Result<String, RenderError> {
    check_index(traj, i)?;
    let sentences = segment_sentences(&traj.components()[i], seg);
    if j >= sentences.len() {
        return Err(RenderError::SentenceOutOfRange {
            component: i,
            sentence: j,
            count: sentences.len(),
        });
    }
    let keep: Vec<bool> = (0..sentences.len()).map(|k| k != j).collect();
    render_masked(traj, i, &sentences, &keep, tmpl)
}

/// A sentence of component `i` on its own, under that component's header.
pub fn render_literal_sentence(
    traj: &Trajectory,
    i: usize,
    sentence: &str,
    tmpl: &RenderTemplate,
) -> Result<String, RenderError> {
    check_index(traj, i)?;
    Ok(format!("{}{}", tmpl.header(traj.components()[i].kind), sentence))
}
