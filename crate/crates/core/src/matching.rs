//! Bipartite double cover of a digraph and Hopcroft–Karp maximum matching.
//!
//! Every factor appears twice: once as a "top" (out-copy) node and once as a
//! "bottom" (in-copy) node. An influence `u -> v` becomes the edge
//! `(u_top, v_bottom)`. A bottom node left unmatched by a maximum matching has
//! no matched link pointing at it and must be driven directly.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::model::FcmGraph;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartiteGraph {
    ids: Vec<String>,
    adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Builds from index pairs `(top, bottom)` over `ids.len()` nodes per side.
    pub fn from_index_edges(ids: Vec<String>, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let n = ids.len();
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) out of range for {n} nodes");
            adj[u].push(v);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Self { ids, adj }
    }

    /// Unlabelled variant for generated graphs; node `i` is named `i`.
    pub fn with_size(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self::from_index_edges((0..n).map(|i| i.to_string()).collect(), edges)
    }

    /// Number of nodes on each side.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Sorted bottom neighbours of a top node.
    pub fn neighbors(&self, top: usize) -> &[usize] {
        &self.adj[top]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }

    pub fn has_edge(&self, top: usize, bottom: usize) -> bool {
        self.adj[top].binary_search(&bottom).is_ok()
    }

    /// Top nodes with an edge into `bottom`, ascending.
    pub fn predecessors(&self, bottom: usize) -> Vec<usize> {
        (0..self.len()).filter(|&u| self.has_edge(u, bottom)).collect()
    }
}

pub fn to_bipartite(graph: &FcmGraph) -> BipartiteGraph {
    BipartiteGraph::from_index_edges(graph.ids(), graph.edge_indices())
}

/// Maximum matching with ids resolved. `pairs` maps bottom id to top id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Matching {
    pub pairs: BTreeMap<String, String>,
    pub cardinality: usize,
    pub unmatched: Vec<String>,
}

/// Index-level matching state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchState {
    pub top_to_bottom: Vec<Option<usize>>,
    pub bottom_to_top: Vec<Option<usize>>,
    pub size: usize,
}

impl MatchState {
    pub fn empty(n: usize) -> Self {
        Self {
            top_to_bottom: vec![None; n],
            bottom_to_top: vec![None; n],
            size: 0,
        }
    }

    pub fn unmatched_bottoms(&self) -> Vec<usize> {
        self.bottom_to_top
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_none())
            .map(|(b, _)| b)
            .collect()
    }

    fn resolve(&self, ids: &[String]) -> Matching {
        let pairs = self
            .bottom_to_top
            .iter()
            .enumerate()
            .filter_map(|(b, t)| t.map(|t| (ids[b].clone(), ids[t].clone())))
            .collect();
        Matching {
            pairs,
            cardinality: self.size,
            unmatched: self
                .unmatched_bottoms()
                .into_iter()
                .map(|b| ids[b].clone())
                .collect(),
        }
    }
}

/// Nodes excluded from a matching run. Removing a bottom node deletes all
/// in-edges of that factor; removing a top node deletes all its out-edges.
#[derive(Clone, Debug)]
pub struct Restriction {
    pub top: Vec<bool>,
    pub bottom: Vec<bool>,
}

impl Restriction {
    pub fn none(n: usize) -> Self {
        Self {
            top: vec![false; n],
            bottom: vec![false; n],
        }
    }

    pub fn clear(&mut self) {
        self.top.iter_mut().for_each(|x| *x = false);
        self.bottom.iter_mut().for_each(|x| *x = false);
    }
}

pub fn hopcroft_karp(bg: &BipartiteGraph) -> Matching {
    maximum_matching(bg, None, None).resolve(&bg.ids)
}

const INF: u32 = u32::MAX;

/// Hopcroft–Karp over the restricted graph, optionally warm-started from a
/// matching of the unrestricted graph (pairs touching removed nodes are
/// dropped first). Top nodes are scanned in ascending order and adjacency
/// lists are sorted, so the result is deterministic.
pub fn maximum_matching(
    bg: &BipartiteGraph,
    restriction: Option<&Restriction>,
    warm: Option<&MatchState>,
) -> MatchState {
    let n = bg.len();
    let top_ok = |u: usize| restriction.is_none_or(|r| !r.top[u]);
    let bottom_ok = |v: usize| restriction.is_none_or(|r| !r.bottom[v]);

    let mut state = MatchState::empty(n);
    if let Some(w) = warm {
        for (u, v) in w.top_to_bottom.iter().enumerate() {
            if let Some(v) = *v {
                if top_ok(u) && bottom_ok(v) {
                    state.top_to_bottom[u] = Some(v);
                    state.bottom_to_top[v] = Some(u);
                    state.size += 1;
                }
            }
        }
    }

    let mut dist = vec![INF; n];
    let mut cursor = vec![0usize; n];
    let mut queue = VecDeque::with_capacity(n);
    loop {
        // Layer free top nodes by BFS distance along alternating paths.
        queue.clear();
        for (u, d) in dist.iter_mut().enumerate() {
            if top_ok(u) && state.top_to_bottom[u].is_none() {
                *d = 0;
                queue.push_back(u);
            } else {
                *d = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &bg.adj[u] {
                if !bottom_ok(v) {
                    continue;
                }
                match state.bottom_to_top[v] {
                    None => found = true,
                    Some(w) if dist[w] == INF => {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                    Some(_) => {}
                }
            }
        }
        if !found {
            break;
        }
        cursor.iter_mut().for_each(|c| *c = 0);
        for u in 0..n {
            if top_ok(u)
                && state.top_to_bottom[u].is_none()
                && augment(bg, u, &mut state, &mut dist, &mut cursor, &bottom_ok)
            {
                state.size += 1;
            }
        }
    }
    state
}

fn augment(
    bg: &BipartiteGraph,
    u: usize,
    state: &mut MatchState,
    dist: &mut [u32],
    cursor: &mut [usize],
    bottom_ok: &impl Fn(usize) -> bool,
) -> bool {
    while cursor[u] < bg.adj[u].len() {
        let v = bg.adj[u][cursor[u]];
        cursor[u] += 1;
        if !bottom_ok(v) {
            continue;
        }
        let next = state.bottom_to_top[v];
        let ok = match next {
            None => true,
            Some(w) => dist[w] == dist[u] + 1 && augment(bg, w, state, dist, cursor, bottom_ok),
        };
        if ok {
            state.top_to_bottom[u] = Some(v);
            state.bottom_to_top[v] = Some(u);
            return true;
        }
    }
    dist[u] = INF;
    false
}
