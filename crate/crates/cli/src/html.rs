//! Static HTML rendering of an attribution report.

use std::fmt::Write;

use agentattr_core::report::{AttributionReport, SentenceEntry};

const STYLE: &str = r#"
body { font-family: sans-serif; max-width: 60rem; margin: 2rem auto; color: #222; }
.component { border: 1px solid #ccc; border-radius: 4px; margin: 0.6rem 0; padding: 0.5rem 0.8rem; white-space: pre-wrap; }
.component.selected { background: #fff6e0; border-color: #e0a800; }
.kind { font-weight: bold; font-size: 0.8rem; color: #555; }
.sentence:hover { outline: 1px solid #333; }
.phi-0 { background: #fdeeee; }
.phi-1 { background: #f9c9c9; }
.phi-2 { background: #f29d9d; }
.phi-3 { background: #e86b6b; }
.phi-4 { background: #d93636; color: #fff; }
.target { border: 2px solid #2b6cb0; padding: 0.5rem 0.8rem; border-radius: 4px; }
table { border-collapse: collapse; margin: 0.5rem 0; }
td, th { border: 1px solid #ccc; padding: 0.2rem 0.6rem; text-align: left; }
"#;

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

/// Gradient class 0..=4 for `phi` relative to the component's range; the
/// maximum always maps to 4.
pub fn phi_class(phi: f64, min: f64, max: f64) -> usize {
    if max <= min {
        return 4;
    }
    ((phi - min) / (max - min) * 4.0).round().clamp(0.0, 4.0) as usize
}

fn highlighted(text: &str, sentences: &[&SentenceEntry]) -> String {
    let min = sentences.iter().map(|s| s.phi).fold(f64::INFINITY, f64::min);
    let max = sentences.iter().map(|s| s.phi).fold(f64::NEG_INFINITY, f64::max);
    let mut out = String::new();
    let mut cursor = 0;
    for s in sentences {
        let [start, end] = s.char_span;
        if start < cursor || end > text.len() || !text.is_char_boundary(start) || !text.is_char_boundary(end) {
            continue;
        }
        out.push_str(&escape(&text[cursor..start]));
        let _ = write!(
            out,
            r#"<span class="sentence phi-{}" title="sentence {}: drop={:.4} hold={:.4} phi={:.4}">{}</span>"#,
            phi_class(s.phi, min, max),
            s.sentence_index,
            s.drop,
            s.hold,
            s.phi,
            escape(&text[start..end])
        );
        cursor = end;
    }
    out.push_str(&escape(&text[cursor..]));
    out
}

fn ranking_cell(ranking: Option<&Vec<usize>>) -> String {
    match ranking {
        Some(r) => r.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
        None => "&ndash;".into(),
    }
}

fn baseline_table(report: &AttributionReport, out: &mut String) {
    let loo = report.baselines.loo.as_ref();
    let cc = report.baselines.contextcite.as_ref();
    if loo.is_none() && cc.is_none() {
        return;
    }
    out.push_str("<h2>Sentence rankings by method</h2>\n<table class=\"baselines\">\n");
    out.push_str("<tr><th>component</th><th>drop_hold</th>");
    if loo.is_some() {
        out.push_str("<th>loo</th>");
    }
    if cc.is_some() {
        out.push_str("<th>contextcite</th>");
    }
    out.push_str("</tr>\n");
    for &i in &report.selected_components {
        let _ = write!(
            out,
            "<tr><td>{i}</td><td>{}</td>",
            ranking_cell(report.ranking_of(i).map(|r| &r.ranking))
        );
        if let Some(loo) = loo {
            let r = loo.iter().find(|e| e.component_index == i).map(|e| &e.ranking);
            let _ = write!(out, "<td>{}</td>", ranking_cell(r));
        }
        if let Some(cc) = cc {
            let r = cc.weights.iter().find(|e| e.component_index == i).map(|e| &e.ranking);
            let _ = write!(out, "<td>{}</td>", ranking_cell(r));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n");
}

/// Self-contained page: components in order, selected ones tinted, sentence
/// highlights graded by `phi`, details on hover.
pub fn emit_html(report: &AttributionReport) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Attribution: {}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n",
        escape(&report.trajectory.id)
    );
    let _ = writeln!(
        out,
        "<h1>{}</h1>\n<p>scoring model <code>{}</code>, hold mode {}, selected components {:?}</p>",
        escape(&report.trajectory.id),
        escape(&report.scoring_model),
        report.hold_mode.as_str(),
        report.selected_components
    );
    for c in &report.components {
        let gain = report.gains.get(c.index).copied().unwrap_or(f64::NAN);
        let selected = report.is_selected(c.index);
        let body = if selected {
            let mut sentences: Vec<&SentenceEntry> = report.sentences_of(c.index).collect();
            sentences.sort_by_key(|s| s.char_span[0]);
            highlighted(&c.text, &sentences)
        } else {
            escape(&c.text)
        };
        let _ = writeln!(
            out,
            "<div class=\"component{}\" title=\"component {}: gain={gain:.4}\"><div class=\"kind\">{} #{} &middot; gain {gain:.4}</div>{body}</div>",
            if selected { " selected" } else { "" },
            c.index,
            c.kind.as_str().to_uppercase(),
            c.index,
        );
    }
    let _ = writeln!(
        out,
        "<div class=\"target\"><div class=\"kind\">TARGET ACTION</div>{}</div>",
        escape(&report.target_action)
    );
    baseline_table(report, &mut out);
    if !report.warnings.is_empty() {
        out.push_str("<h2>Warnings</h2>\n<ul>\n");
        for w in &report.warnings {
            let _ = writeln!(out, "<li>{}</li>", escape(w));
        }
        out.push_str("</ul>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}
