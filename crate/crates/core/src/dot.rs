//! Graphviz export in the workshop colour scheme.

use std::fmt::Write;

use crate::controllability::AnalysisReport;
use crate::decision::rank_by_stored_scores;
use crate::model::{Controllability, FcmGraph, Sign, Strength};

fn outline(level: Controllability) -> &'static str {
    match level {
        Controllability::Easy => "green",
        Controllability::Medium => "orange",
        Controllability::Hard => "red",
    }
}

fn edge_colour(sign: Sign) -> &'static str {
    match sign {
        Sign::Positive => "green",
        Sign::Negative => "red",
        Sign::Neutral => "grey",
    }
}

fn pen_width(strength: Strength) -> u8 {
    match strength {
        Strength::Weak => 1,
        Strength::Medium => 2,
        Strength::Strong => 3,
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT text. With a report, members of the best-ranked configuration are
/// filled grey and node width grows with how often a factor appears in a
/// configuration.
pub fn export_dot(graph: &FcmGraph, report: Option<&AnalysisReport>) -> String {
    let best: Vec<String> = report
        .and_then(|r| rank_by_stored_scores(r).into_iter().next())
        .map(|r| r.members)
        .unwrap_or_default();
    let total = report.map_or(0, |r| r.configurations.len());

    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(graph.title())).unwrap();
    writeln!(out, "  node [shape=ellipse, penwidth=2];").unwrap();
    for f in graph.factors() {
        let mut attrs = vec![
            format!("label={}", quote(&f.name)),
            format!("color={}", outline(f.controllability)),
        ];
        if best.contains(&f.id) {
            attrs.push("style=filled".into());
            attrs.push("fillcolor=grey".into());
        }
        if let Some(r) = report.filter(|_| total > 0) {
            let share = r.frequencies.get(&f.id).copied().unwrap_or(0) as f64 / total as f64;
            attrs.push(format!("width={:.2}", 0.75 + 0.75 * share));
        }
        writeln!(out, "  {} [{}];", quote(&f.id), attrs.join(", ")).unwrap();
    }
    for inf in graph.influences() {
        writeln!(
            out,
            "  {} -> {} [color={}, penwidth={}];",
            quote(&inf.source),
            quote(&inf.target),
            edge_colour(inf.sign),
            pen_width(inf.strength)
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
