//! Ease-of-control scoring, ranking and comparisons.
//!
//! A configuration's score is the sum of its members' controllability levels
//! on an ordinal scale (easy 1, medium 2, hard 3 by default); lower is easier.
//! Labels never influence which configurations exist, only their order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::controllability::{
    enumerate_configurations, enumerate_with_progress, AnalysisReport, Budget, ControlConfiguration,
    Progress,
};
use crate::error::{Error, Result};
use crate::model::{Controllability, FcmGraph, Perspective};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllabilityScale {
    pub easy: f64,
    pub medium: f64,
    pub hard: f64,
}

impl Default for ControllabilityScale {
    fn default() -> Self {
        Self {
            easy: 1.0,
            medium: 2.0,
            hard: 3.0,
        }
    }
}

impl ControllabilityScale {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.easy, self.medium, self.hard].iter().all(|v| v.is_finite())
            && self.easy < self.medium
            && self.medium < self.hard;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "controllability scale must be finite and strictly increasing".into(),
            ))
        }
    }

    pub fn value(&self, level: Controllability) -> f64 {
        match level {
            Controllability::Easy => self.easy,
            Controllability::Medium => self.medium,
            Controllability::Hard => self.hard,
        }
    }
}

/// Effective controllability per factor: the graph's own labels with an
/// optional perspective's overrides on top.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeling {
    pub label: Option<String>,
    defaults: BTreeMap<String, Controllability>,
    overrides: BTreeMap<String, Controllability>,
}

impl Labeling {
    pub fn new(
        defaults: BTreeMap<String, Controllability>,
        overrides: BTreeMap<String, Controllability>,
    ) -> Self {
        Self {
            label: None,
            defaults,
            overrides,
        }
    }

    pub fn from_graph(graph: &FcmGraph, perspective: Option<&Perspective>) -> Result<Self> {
        if let Some(p) = perspective {
            graph.check_perspective(p)?;
        }
        Ok(Self {
            label: perspective.map(|p| p.label.clone()),
            defaults: graph
                .factors()
                .iter()
                .map(|f| (f.id.clone(), f.controllability))
                .collect(),
            overrides: perspective.map(|p| p.overrides.clone()).unwrap_or_default(),
        })
    }

    pub fn level(&self, id: &str) -> Option<Controllability> {
        self.overrides.get(id).or_else(|| self.defaults.get(id)).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub warnings: Vec<String>,
}

/// Sum of member levels. Members without any label count as medium and are
/// reported in `warnings`.
pub fn score_configuration(
    members: &[String],
    labeling: &Labeling,
    scale: &ControllabilityScale,
) -> Result<Score> {
    if members.is_empty() {
        return Err(Error::EmptyConfig);
    }
    let mut warnings = Vec::new();
    let value = members
        .iter()
        .map(|id| {
            let level = labeling.level(id).unwrap_or_else(|| {
                warnings.push(format!("no controllability label for {id}; scored as medium"));
                Controllability::Medium
            });
            scale.value(level)
        })
        .sum();
    Ok(Score { value, warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedConfiguration {
    /// 1-based position, easiest first.
    pub rank: usize,
    pub score: f64,
    pub members: Vec<String>,
    pub warnings: Vec<String>,
}

fn by_score_then_members(a: (f64, &[String]), b: (f64, &[String])) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}

/// Configurations by ascending score, ties broken lexicographically by
/// sorted member ids.
pub fn rank_configurations(
    configurations: &[ControlConfiguration],
    labeling: &Labeling,
    scale: &ControllabilityScale,
) -> Result<Vec<RankedConfiguration>> {
    let mut scored = configurations
        .iter()
        .map(|c| {
            let mut members = c.members.clone();
            members.sort();
            let score = score_configuration(&members, labeling, scale)?;
            let mut warnings: Vec<String> = c
                .warnings
                .iter()
                .map(|id| format!("unreachable: {id}"))
                .collect();
            warnings.extend(score.warnings);
            Ok(RankedConfiguration {
                rank: 0,
                score: score.value,
                members,
                warnings,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| by_score_then_members((a.score, &a.members), (b.score, &b.members)));
    for (i, r) in scored.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(scored)
}

/// Ranks by the scores already stored in the report.
pub fn rank_by_stored_scores(report: &AnalysisReport) -> Vec<RankedConfiguration> {
    let mut ranked: Vec<RankedConfiguration> = report
        .configurations
        .iter()
        .map(|c| RankedConfiguration {
            rank: 0,
            score: c.score,
            members: c.members.clone(),
            warnings: c.warnings.iter().map(|id| format!("unreachable: {id}")).collect(),
        })
        .collect();
    ranked.sort_by(|a, b| by_score_then_members((a.score, &a.members), (b.score, &b.members)));
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    ranked
}

/// Fills every configuration's score in place.
pub fn score_report(
    report: &mut AnalysisReport,
    labeling: &Labeling,
    scale: &ControllabilityScale,
) -> Result<()> {
    for c in &mut report.configurations {
        c.score = score_configuration(&c.members, labeling, scale)?.value;
    }
    report.perspective = labeling.label.clone();
    Ok(())
}

/// Enumerates configurations and scores them under the given perspective.
pub fn analyze(
    graph: &FcmGraph,
    budget: &Budget,
    perspective: Option<&Perspective>,
    scale: &ControllabilityScale,
) -> Result<AnalysisReport> {
    analyze_with_progress(graph, budget, perspective, scale, &Progress::new())
}

/// As [`analyze`], reporting candidate counts and honouring cancellation
/// through `progress`.
pub fn analyze_with_progress(
    graph: &FcmGraph,
    budget: &Budget,
    perspective: Option<&Perspective>,
    scale: &ControllabilityScale,
    progress: &Progress,
) -> Result<AnalysisReport> {
    scale.validate()?;
    let labeling = Labeling::from_graph(graph, perspective)?;
    let mut report = enumerate_with_progress(graph, budget, progress)?;
    score_report(&mut report, &labeling, scale)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequencies {
    pub counts: BTreeMap<String, usize>,
    /// True when the report was truncated, so counts cover a prefix only.
    pub approximate: bool,
}

pub fn node_frequencies(report: &AnalysisReport) -> Frequencies {
    let mut counts: BTreeMap<String, usize> =
        report.frequencies.keys().map(|k| (k.clone(), 0)).collect();
    for c in &report.configurations {
        for m in &c.members {
            *counts.entry(m.clone()).or_default() += 1;
        }
    }
    Frequencies {
        counts,
        approximate: report.truncated,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelDisagreement {
    pub factor: String,
    pub first: Controllability,
    pub second: Controllability,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveRanking {
    pub label: String,
    pub ranked: Vec<RankedConfiguration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveDiff {
    pub disagreements: Vec<LabelDisagreement>,
    pub first: PerspectiveRanking,
    pub second: PerspectiveRanking,
    /// Both perspectives rank the same configuration first.
    pub shared_best: bool,
    pub truncated: bool,
}

pub fn compare_perspectives(
    graph: &FcmGraph,
    first: &Perspective,
    second: &Perspective,
    budget: &Budget,
    scale: &ControllabilityScale,
) -> Result<PerspectiveDiff> {
    let report = enumerate_configurations(graph, budget)?;
    compare_perspectives_on(&report, graph, first, second, scale)
}

/// Perspective comparison over an existing enumeration; the configuration
/// sets are shared, only scores differ.
pub fn compare_perspectives_on(
    report: &AnalysisReport,
    graph: &FcmGraph,
    first: &Perspective,
    second: &Perspective,
    scale: &ControllabilityScale,
) -> Result<PerspectiveDiff> {
    scale.validate()?;
    let l1 = Labeling::from_graph(graph, Some(first))?;
    let l2 = Labeling::from_graph(graph, Some(second))?;
    let disagreements = graph
        .factors()
        .iter()
        .filter_map(|f| {
            let (a, b) = (l1.level(&f.id)?, l2.level(&f.id)?);
            (a != b).then(|| LabelDisagreement {
                factor: f.id.clone(),
                first: a,
                second: b,
            })
        })
        .collect();
    let r1 = rank_configurations(&report.configurations, &l1, scale)?;
    let r2 = rank_configurations(&report.configurations, &l2, scale)?;
    let shared_best = match (r1.first(), r2.first()) {
        (Some(a), Some(b)) => a.members == b.members,
        _ => false,
    };
    Ok(PerspectiveDiff {
        disagreements,
        first: PerspectiveRanking {
            label: first.label.clone(),
            ranked: r1,
        },
        second: PerspectiveRanking {
            label: second.label.clone(),
            ranked: r2,
        },
        shared_best,
        truncated: report.truncated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub title: String,
    pub configuration_count: usize,
    pub configuration_size: usize,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDiff {
    pub first: ScenarioSummary,
    pub second: ScenarioSummary,
    /// Possible control nodes (in at least one configuration) of the first
    /// scenario only.
    pub only_first: Vec<String>,
    pub only_second: Vec<String>,
    pub shared: Vec<String>,
}

pub fn compare_scenarios(first: &AnalysisReport, second: &AnalysisReport) -> ScenarioDiff {
    let possible = |r: &AnalysisReport| -> BTreeSet<String> {
        r.configurations
            .iter()
            .flat_map(|c| c.members.iter().cloned())
            .collect()
    };
    let summary = |r: &AnalysisReport| ScenarioSummary {
        title: r.graph.title.clone(),
        configuration_count: r.configurations.len(),
        configuration_size: r.d,
        truncated: r.truncated,
    };
    let (a, b) = (possible(first), possible(second));
    ScenarioDiff {
        first: summary(first),
        second: summary(second),
        only_first: a.difference(&b).cloned().collect(),
        only_second: b.difference(&a).cloned().collect(),
        shared: a.intersection(&b).cloned().collect(),
    }
}

/// CSV with columns `rank,score,members,warnings`; list cells are
/// semicolon-joined.
pub fn ranked_csv(ranked: &[RankedConfiguration]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    writer
        .write_record(["rank", "score", "members", "warnings"])
        .map_err(io)?;
    for r in ranked {
        writer
            .write_record([
                r.rank.to_string(),
                r.score.to_string(),
                r.members.join(";"),
                r.warnings.join(";"),
            ])
            .map_err(io)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
