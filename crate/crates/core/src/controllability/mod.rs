//! Minimal control configurations of a cognitive map.
//!
//! A control configuration is a set of factors that, when driven by external
//! inputs, makes the whole map structurally controllable. Minimal ones are
//! exactly the unmatched sets of maximum matchings of the bipartite double
//! cover, so everything here reduces to matching cardinality tests:
//!
//! * forcing a node unmatched = deleting all its in-edges (bottom copy);
//! * a node is *never* a driver when forcing it unmatched loses cardinality;
//! * a node is *always* a driver when no edge into it lies on any maximum
//!   matching;
//! * a candidate set is a configuration when forcing all of it unmatched keeps
//!   the cardinality.
//!
//! Components are analysed separately and combined by Cartesian product.
//! A perfectly matched component (every node has a matched in-edge, e.g. a
//! cycle) still needs one input: each of its nodes on its own is offered as a
//! configuration, and reachability warnings say whether one attachment suffices.
//!
//! Link weights and signs play no part in any of this.

mod enumerate;
mod rank;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{maximum_matching, BipartiteGraph, MatchState, Restriction};
use crate::model::FcmGraph;

pub use enumerate::{enumerate_configurations, enumerate_with_progress, graph_ref, Progress};
pub use rank::{structural_controllability_rank, structural_controllability_rank_with_rng};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeClassification {
    pub always: Vec<String>,
    pub never: Vec<String>,
    pub sometimes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlConfiguration {
    /// Sorted factor ids.
    pub members: Vec<String>,
    #[serde(default)]
    pub score: f64,
    /// Factors with no directed path from any member.
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    #[serde(default = "Budget::default_max_configs")]
    pub max_configs: usize,
    #[serde(default = "Budget::default_max_millis")]
    pub max_millis: u64,
}

impl Budget {
    pub const DEFAULT_MAX_CONFIGS: usize = 10_000;
    pub const DEFAULT_MAX_MILLIS: u64 = 60_000;

    fn default_max_configs() -> usize {
        Self::DEFAULT_MAX_CONFIGS
    }

    fn default_max_millis() -> u64 {
        Self::DEFAULT_MAX_MILLIS
    }

    pub fn unlimited() -> Self {
        Self {
            max_configs: usize::MAX,
            max_millis: u64::MAX,
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_configs: Self::DEFAULT_MAX_CONFIGS,
            max_millis: Self::DEFAULT_MAX_MILLIS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationReason {
    MaxConfigs,
    MaxMillis,
    Cancelled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphRef {
    pub title: String,
    /// SHA-256 of the canonical graph document.
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub graph: GraphRef,
    /// Maximum matching cardinality, summed over components.
    pub m: usize,
    /// Size of every minimal control configuration.
    #[serde(rename = "D")]
    pub d: usize,
    pub classification: NodeClassification,
    pub configurations: Vec<ControlConfiguration>,
    pub frequencies: BTreeMap<String, usize>,
    pub truncated: bool,
    #[serde(default)]
    pub truncation_reason: Option<TruncationReason>,
    /// Perspective whose labels produced the scores, if any.
    #[serde(default)]
    pub perspective: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn configuration_sets(&self) -> BTreeSet<BTreeSet<String>> {
        self.configurations
            .iter()
            .map(|c| c.members.iter().cloned().collect())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One weakly-connected component with its baseline matching and the
/// polynomial-time classification of its nodes (local indices).
pub(crate) struct Component {
    /// Global factor indices, ascending.
    pub nodes: Vec<usize>,
    pub bg: BipartiteGraph,
    pub base: MatchState,
    pub always: Vec<usize>,
    pub never: Vec<usize>,
    pub sometimes: Vec<usize>,
}

impl Component {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn m(&self) -> usize {
        self.base.size
    }

    pub fn deficiency(&self) -> usize {
        self.len() - self.m()
    }

    /// Number of members this component contributes to each configuration.
    pub fn configuration_size(&self) -> usize {
        self.deficiency().max(1)
    }

    /// Matching cardinality after deleting the in-edges of `forced`.
    pub fn forced_cardinality(&self, forced: &[usize], scratch: &mut Restriction) -> usize {
        scratch.clear();
        for &v in forced {
            scratch.bottom[v] = true;
        }
        maximum_matching(&self.bg, Some(scratch), Some(&self.base)).size
    }
}

pub(crate) fn split_components(graph: &FcmGraph) -> Vec<Component> {
    let ids = graph.ids();
    let edges = graph.edge_indices();
    graph
        .component_partition()
        .into_iter()
        .map(|nodes| {
            let mut local = vec![usize::MAX; graph.len()];
            for (l, &g) in nodes.iter().enumerate() {
                local[g] = l;
            }
            let bg = BipartiteGraph::from_index_edges(
                nodes.iter().map(|&g| ids[g].clone()).collect(),
                edges
                    .iter()
                    .filter(|(s, _)| local[*s] != usize::MAX)
                    .map(|&(s, t)| (local[s], local[t])),
            );
            let base = maximum_matching(&bg, None, None);
            let mut comp = Component {
                nodes,
                bg,
                base,
                always: Vec::new(),
                never: Vec::new(),
                sometimes: Vec::new(),
            };
            classify_component(&mut comp);
            comp
        })
        .collect()
}

fn classify_component(comp: &mut Component) {
    let n = comp.len();
    if comp.deficiency() == 0 {
        comp.sometimes = (0..n).collect();
        return;
    }
    let m = comp.m();
    let mut scratch = Restriction::none(n);

    // A node already unmatched in the baseline matching can be unmatched.
    let never: Vec<bool> = (0..n)
        .map(|i| {
            comp.base.bottom_to_top[i].is_some() && comp.forced_cardinality(&[i], &mut scratch) < m
        })
        .collect();

    for (i, &is_never) in never.iter().enumerate() {
        if is_never {
            comp.never.push(i);
            continue;
        }
        // A node matched in the baseline has an in-edge on a maximum matching.
        let matchable = comp.base.bottom_to_top[i].is_some()
            || comp.bg.predecessors(i).into_iter().any(|j| {
                scratch.clear();
                scratch.top[j] = true;
                scratch.bottom[i] = true;
                maximum_matching(&comp.bg, Some(&scratch), Some(&comp.base)).size == m - 1
            });
        if matchable {
            comp.sometimes.push(i);
        } else {
            comp.always.push(i);
        }
    }
}

fn ids_of(comp: &Component, ids: &[String], local: &[usize]) -> Vec<String> {
    local.iter().map(|&l| ids[comp.nodes[l]].clone()).collect()
}

pub(crate) fn classification_of(graph: &FcmGraph, comps: &[Component]) -> NodeClassification {
    let ids = graph.ids();
    let mut out = NodeClassification::default();
    for comp in comps {
        out.always.extend(ids_of(comp, &ids, &comp.always));
        out.never.extend(ids_of(comp, &ids, &comp.never));
        out.sometimes.extend(ids_of(comp, &ids, &comp.sometimes));
    }
    out.always.sort();
    out.never.sort();
    out.sometimes.sort();
    out
}

/// Polynomial-time split of factors into those in every, no, or some minimal
/// control configuration.
pub fn classify_nodes(graph: &FcmGraph) -> Result<NodeClassification> {
    graph.ensure_no_self_loops()?;
    let comps = split_components(graph);
    Ok(classification_of(graph, &comps))
}

pub fn is_configuration(graph: &FcmGraph, candidate: &[String]) -> Result<bool> {
    graph.ensure_no_self_loops()?;
    let mut chosen = BTreeSet::new();
    for id in candidate {
        let idx = graph
            .index_of(id)
            .ok_or_else(|| Error::UnknownFactor(id.clone()))?;
        chosen.insert(idx);
    }
    for comp in split_components(graph) {
        let forced: Vec<usize> = comp
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, g)| chosen.contains(g))
            .map(|(l, _)| l)
            .collect();
        if forced.len() != comp.configuration_size() {
            return Ok(false);
        }
        if comp.deficiency() > 0 {
            let mut scratch = Restriction::none(comp.len());
            if comp.forced_cardinality(&forced, &mut scratch) != comp.m() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Factor ids with no directed path from any configuration member, sorted.
pub fn reachability_warnings(graph: &FcmGraph, config: &[String]) -> Vec<String> {
    let out = out_adjacency(graph);
    let starts: Vec<usize> = config.iter().filter_map(|id| graph.index_of(id)).collect();
    let reached = reach(&out, &starts);
    graph
        .factors()
        .iter()
        .enumerate()
        .filter(|(i, _)| !reached[*i])
        .map(|(_, f)| f.id.clone())
        .collect()
}

pub(crate) fn out_adjacency(graph: &FcmGraph) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); graph.len()];
    for (s, t) in graph.edge_indices() {
        out[s].push(t);
    }
    out
}

pub(crate) fn reach(out: &[Vec<usize>], starts: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; out.len()];
    let mut stack = Vec::with_capacity(out.len());
    for &s in starts {
        if !seen[s] {
            seen[s] = true;
            stack.push(s);
        }
    }
    while let Some(v) = stack.pop() {
        for &w in &out[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}
