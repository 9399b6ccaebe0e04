use serde::{Deserialize, Serialize};

use super::{Component, Sentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMode {
    Text,
    JsonFields,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub terminators: Vec<char>,
    pub split_on_newline: bool,
    /// Treat a component whose text is a JSON object as one unit per
    /// top-level member.
    pub json_fields: bool,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            terminators: vec!['.', '!', '?'],
            split_on_newline: true,
            json_fields: true,
        }
    }
}

impl SegmenterConfig {
    pub fn mode_for(&self, text: &str) -> SegmentMode {
        if self.json_fields && json_member_spans(text).is_some() {
            SegmentMode::JsonFields
        } else {
            SegmentMode::Text
        }
    }
}

/// Splits a component into sentences.
///
/// Text mode breaks after a terminator that is followed by whitespace and at
/// every newline. JSON objects yield one unit per top-level member, without
/// the surrounding braces and separating commas. Spans never include leading
/// or trailing whitespace.
pub fn segment_sentences(component: &Component, cfg: &SegmenterConfig) -> Vec<Sentence> {
    let text = component.text.as_str();
    let spans = if cfg.json_fields {
        json_member_spans(text)
    } else {
        None
    }
    .unwrap_or_else(|| text_spans(text, cfg));

    let spans = if spans.is_empty() {
        // Only reachable for whitespace-only text, which trajectories reject.
        vec![(0, text.len())]
    } else {
        spans
    };
    spans
        .into_iter()
        .enumerate()
        .map(|(sentence_index, (start, end))| Sentence {
            component_index: component.index,
            sentence_index,
            char_span: [start, end],
            text: text[start..end].to_owned(),
        })
        .collect()
}

fn text_spans(text: &str, cfg: &SegmenterConfig) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((pos, ch)) = chars.next() {
        if ch == '\n' && cfg.split_on_newline {
            push_trimmed(text, start, pos, &mut spans);
            start = pos + 1;
        } else if cfg.terminators.contains(&ch) {
            if let Some(&(_, next)) = chars.peek() {
                if next.is_whitespace() {
                    let end = pos + ch.len_utf8();
                    push_trimmed(text, start, end, &mut spans);
                    start = end;
                }
            }
        }
    }
    push_trimmed(text, start, text.len(), &mut spans);
    spans
}

fn push_trimmed(text: &str, start: usize, end: usize, spans: &mut Vec<(usize, usize)>) {
    let piece = &text[start..end];
    let lead = piece.len() - piece.trim_start().len();
    let trail = piece.len() - piece.trim_end().len();
    if lead + trail < piece.len() {
        spans.push((start + lead, end - trail));
    }
}

/// Byte spans of the top-level members of a JSON object, or `None` when the
/// text is not a non-empty JSON object.
fn json_member_spans(text: &str) -> Option<Vec<(usize, usize)>> {
    let value: serde_json::Value = serde_json::from_str(text).ok()?;
    if value.as_object().is_none_or(|m| m.is_empty()) {
        return None;
    }

    let bytes = text.as_bytes();
    let open = text.find('{')?;
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    let mut member_start = open + 1;
    for (pos, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth -= 1;
                if depth == 0 {
                    push_trimmed(text, member_start, pos, &mut spans);
                    return Some(spans);
                }
            }
            b',' if depth == 1 => {
                push_trimmed(text, member_start, pos, &mut spans);
                member_start = pos + 1;
            }
            _ => {}
        }
    }
    None
}
