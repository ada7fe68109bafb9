use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use super::{
    classification_of, out_adjacency, reach, split_components, AnalysisReport, Budget, Component,
    ControlConfiguration, GraphRef, TruncationReason,
};
use crate::error::{Error, Result};
use crate::matching::Restriction;
use crate::model::{serialize_graph, FcmGraph};

/// Shared handle for observing and cancelling a running enumeration.
#[derive(Clone, Debug, Default)]
pub struct Progress {
    cancelled: Arc<AtomicBool>,
    candidates: Arc<AtomicU64>,
}

impl Progress {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::Relaxed)
    }

    /// Candidate sets tested so far.
    pub fn candidates_tested(&self) -> u64 {
        self.candidates.load(Ordering::Relaxed)
    }
}

struct Limits<'a> {
    started: Instant,
    max_time: Option<Duration>,
    max_configs: usize,
    progress: &'a Progress,
}

impl Limits<'_> {
    /// Checked between candidate tests.
    fn exhausted(&self) -> Option<TruncationReason> {
        if self.progress.is_cancelled() {
            return Some(TruncationReason::Cancelled);
        }
        match self.max_time {
            Some(t) if self.started.elapsed() >= t => Some(TruncationReason::MaxMillis),
            _ => None,
        }
    }
}

pub fn enumerate_configurations(graph: &FcmGraph, budget: &Budget) -> Result<AnalysisReport> {
    enumerate_with_progress(graph, budget, &Progress::new())
}

/// Full analysis: classification (always completes), then every minimal
/// control configuration until the budget runs out.
pub fn enumerate_with_progress(
    graph: &FcmGraph,
    budget: &Budget,
    progress: &Progress,
) -> Result<AnalysisReport> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    graph.ensure_no_self_loops()?;
    let limits = Limits {
        started: Instant::now(),
        max_time: (budget.max_millis != u64::MAX).then(|| Duration::from_millis(budget.max_millis)),
        max_configs: budget.max_configs,
        progress,
    };

    let comps = split_components(graph);
    let classification = classification_of(graph, &comps);

    let mut truncation = None;
    let mut per_component: Vec<Vec<Vec<usize>>> = Vec::with_capacity(comps.len());
    for comp in &comps {
        let (found, stop) = component_configurations(comp, &limits);
        per_component.push(found);
        match stop {
            Some(TruncationReason::MaxConfigs) => truncation = stop,
            Some(_) => {
                truncation = stop;
                break;
            }
            None => {}
        }
    }

    // A component cut short by time or cancellation leaves later components
    // unexplored; only complete component lists can be combined.
    let mut member_sets: Vec<Vec<usize>> = Vec::new();
    if per_component.len() == comps.len() {
        let (sets, capped) = cartesian(&per_component, limits.max_configs);
        member_sets = sets;
        if capped && truncation.is_none() {
            truncation = Some(TruncationReason::MaxConfigs);
        }
    }
    member_sets.sort();

    let ids = graph.ids();
    let out = out_adjacency(graph);
    let mut frequencies: BTreeMap<String, usize> = ids.iter().map(|id| (id.clone(), 0)).collect();
    let configurations = member_sets
        .into_iter()
        .map(|members| {
            let reached = reach(&out, &members);
            for &m in &members {
                *frequencies.get_mut(&ids[m]).expect("known id") += 1;
            }
            ControlConfiguration {
                members: members.iter().map(|&i| ids[i].clone()).collect(),
                score: 0.0,
                warnings: (0..ids.len())
                    .filter(|&i| !reached[i])
                    .map(|i| ids[i].clone())
                    .collect(),
            }
        })
        .collect();

    Ok(AnalysisReport {
        graph: graph_ref(graph),
        m: comps.iter().map(Component::m).sum(),
        d: comps.iter().map(Component::configuration_size).sum(),
        classification,
        configurations,
        frequencies,
        truncated: truncation.is_some(),
        truncation_reason: truncation,
        perspective: None,
        warnings: graph.warnings(),
    })
}

/// Title and digest of the canonical document, as recorded in reports.
pub fn graph_ref(graph: &FcmGraph) -> GraphRef {
    let digest = Sha256::digest(serialize_graph(graph).as_bytes());
    GraphRef {
        title: graph.title().to_owned(),
        digest: digest.iter().map(|b| format!("{b:02x}")).collect(),
    }
}

/// Configurations of one component as sorted global index lists, in
/// lexicographic candidate order. Stops early when the limits are hit.
fn component_configurations(
    comp: &Component,
    limits: &Limits<'_>,
) -> (Vec<Vec<usize>>, Option<TruncationReason>) {
    let to_global = |local: &[usize]| -> Vec<usize> {
        let mut g: Vec<usize> = local.iter().map(|&l| comp.nodes[l]).collect();
        g.sort_unstable();
        g
    };

    if comp.deficiency() == 0 {
        let found: Vec<Vec<usize>> = comp
            .nodes
            .iter()
            .take(limits.max_configs)
            .map(|&g| vec![g])
            .collect();
        let stop = (found.len() < comp.len()).then_some(TruncationReason::MaxConfigs);
        return (found, stop);
    }

    let choose = comp.deficiency() - comp.always.len();
    debug_assert!(choose <= comp.sometimes.len());
    let mut scratch = Restriction::none(comp.len());
    let mut found = Vec::new();
    let mut forced = Vec::with_capacity(choose);
    for combo in Combinations::new(comp.sometimes.len(), choose) {
        if let Some(reason) = limits.exhausted() {
            return (found, Some(reason));
        }
        limits.progress.candidates.fetch_add(1, Ordering::Relaxed);
        forced.clear();
        forced.extend(combo.iter().map(|&k| comp.sometimes[k]));
        // Always-members are unmatched in every maximum matching already.
        if comp.forced_cardinality(&forced, &mut scratch) == comp.m() {
            if found.len() >= limits.max_configs {
                return (found, Some(TruncationReason::MaxConfigs));
            }
            forced.extend_from_slice(&comp.always);
            found.push(to_global(&forced));
        }
    }
    (found, None)
}

/// Member-set unions across components, capped at `limit` entries.
fn cartesian(lists: &[Vec<Vec<usize>>], limit: usize) -> (Vec<Vec<usize>>, bool) {
    let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
    let mut capped = false;
    for options in lists {
        let mut next = Vec::with_capacity(acc.len().saturating_mul(options.len()).min(limit));
        'outer: for prefix in &acc {
            for option in options {
                if next.len() >= limit {
                    capped = true;
                    break 'outer;
                }
                let mut merged = prefix.clone();
                merged.extend_from_slice(option);
                merged.sort_unstable();
                next.push(merged);
            }
        }
        acc = next;
    }
    (acc, capped)
}

/// Lexicographic k-combinations of `0..n`.
struct Combinations {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(edges: &[(&str, &str)]) -> FcmGraph {
        FcmGraph::from_edges(&[], edges).unwrap()
    }

    fn sets(report: &AnalysisReport) -> Vec<Vec<&str>> {
        report
            .configurations
            .iter()
            .map(|c| c.members.iter().map(String::as_str).collect())
            .collect()
    }

    #[test]
    fn combinations_are_lexicographic() {
        let all: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(
            all,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(Combinations::new(3, 0).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    #[test]
    fn path_has_single_configuration() {
        let r = enumerate_configurations(&g(&[("a", "b"), ("b", "c")]), &Budget::default()).unwrap();
        assert_eq!(sets(&r), vec![vec!["a"]]);
        assert_eq!((r.m, r.d), (2, 1));
        assert!(!r.truncated);
    }

    #[test]
    fn star_frequencies() {
        let r = enumerate_configurations(&g(&[("a", "b"), ("a", "c")]), &Budget::default()).unwrap();
        assert_eq!(sets(&r), vec![vec!["a", "b"], vec!["a", "c"]]);
        assert_eq!(r.d, 2);
        assert_eq!(r.frequencies["a"], 2);
        assert_eq!(r.frequencies["b"], 1);
        assert_eq!(r.frequencies["c"], 1);
    }

    #[test]
    fn two_components_combine_by_product() {
        let r = enumerate_configurations(
            &g(&[("x", "y"), ("p", "q"), ("q", "p")]),
            &Budget::default(),
        )
        .unwrap();
        assert_eq!(sets(&r), vec![vec!["p", "x"], vec!["q", "x"]]);
        assert_eq!(r.d, 2);
        assert!(r.configurations.iter().all(|c| c.warnings.is_empty()));
    }

    #[test]
    fn cycle_singletons_carry_no_warnings() {
        let r = enumerate_configurations(&g(&[("a", "b"), ("b", "a")]), &Budget::default()).unwrap();
        assert_eq!(sets(&r), vec![vec!["a"], vec!["b"]]);
        assert_eq!(r.d, 1);
    }

    #[test]
    fn errors() {
        assert_eq!(
            enumerate_configurations(&g(&[("a", "a")]), &Budget::default()).unwrap_err(),
            Error::SelfLoopPresent(vec!["a".into()])
        );
    }

    #[test]
    fn config_budget_truncates_but_keeps_classification() {
        // Fan-out to five sinks: five configurations of size 5.
        let graph = g(&[("h", "a"), ("h", "b"), ("h", "c"), ("h", "d"), ("h", "e")]);
        let full = enumerate_configurations(&graph, &Budget::default()).unwrap();
        assert_eq!(full.configurations.len(), 5);
        let budget = Budget {
            max_configs: 2,
            ..Budget::default()
        };
        let r = enumerate_configurations(&graph, &budget).unwrap();
        assert!(r.truncated);
        assert_eq!(r.truncation_reason, Some(TruncationReason::MaxConfigs));
        assert_eq!(r.configurations.len(), 2);
        assert_eq!(r.classification, full.classification);
        assert_eq!(r.configurations[..], full.configurations[..2]);
    }

    #[test]
    fn cancellation_is_observed() {
        let graph = g(&[("h", "a"), ("h", "b"), ("h", "c")]);
        let progress = Progress::new();
        progress.cancel();
        let r = enumerate_with_progress(&graph, &Budget::default(), &progress).unwrap();
        assert_eq!(r.truncation_reason, Some(TruncationReason::Cancelled));
        assert!(r.configurations.is_empty());
    }

    #[test]
    fn reports_are_deterministic() {
        let graph = g(&[("a", "b"), ("a", "c"), ("c", "d"), ("e", "d")]);
        let one = enumerate_configurations(&graph, &Budget::default()).unwrap().to_json();
        let two = enumerate_configurations(&graph, &Budget::default()).unwrap().to_json();
        assert_eq!(one, two);
    }
}
