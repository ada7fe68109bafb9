//! Exhaustive reference implementations used to check the fast paths.
//!
//! Nothing here calls into [`crate::matching`] or [`crate::controllability`]:
//! the oracles have their own component split, their own matching search and
//! their own reachability walk, so agreement is meaningful.

use std::collections::BTreeSet;

use crate::controllability::ControlConfiguration;
use crate::error::{Error, Result};
use crate::matching::BipartiteGraph;
use crate::model::FcmGraph;

pub const MAX_MATCHING_NODES: usize = 15;
pub const MAX_CONFIGURATION_NODES: usize = 12;

/// Maximum matching cardinality by exhaustive search over injective edge
/// choices, one bottom node at a time.
pub fn max_matching_brute(bg: &BipartiteGraph) -> Result<usize> {
    if bg.len() > MAX_MATCHING_NODES {
        return Err(Error::SizeGuard {
            max: MAX_MATCHING_NODES,
            actual: bg.len(),
        });
    }
    let n = bg.len();
    let mut preds = vec![Vec::new(); n];
    for (u, v) in bg.edges() {
        preds[v].push(u);
    }
    Ok(brute_max(&preds, &vec![true; n]))
}

/// `preds[v]` lists the top nodes with an edge into bottom `v`; only bottoms
/// with `allowed[v]` may be matched.
fn brute_max(preds: &[Vec<usize>], allowed: &[bool]) -> usize {
    fn search(
        v: usize,
        preds: &[Vec<usize>],
        allowed: &[bool],
        used: &mut [bool],
        current: usize,
        remaining: usize,
        best: &mut usize,
    ) {
        if current + remaining <= *best {
            return;
        }
        if v == preds.len() {
            *best = current;
            return;
        }
        if !allowed[v] {
            search(v + 1, preds, allowed, used, current, remaining, best);
            return;
        }
        for &u in &preds[v] {
            if !used[u] {
                used[u] = true;
                search(v + 1, preds, allowed, used, current + 1, remaining - 1, best);
                used[u] = false;
            }
        }
        search(v + 1, preds, allowed, used, current, remaining - 1, best);
    }
    let remaining = allowed.iter().filter(|a| **a).count();
    let mut best = 0;
    let mut used = vec![false; preds.len()];
    search(0, preds, allowed, &mut used, 0, remaining, &mut best);
    best
}

/// All minimal control configurations by subset enumeration.
///
/// Per weakly-connected component, a set `S` can drive the component when
/// every node outside `S` can be given its own distinct predecessor. The
/// smallest such size is the configuration size; when the empty set already
/// qualifies (a perfect matching exists) every single node is a
/// configuration. Component results are combined by Cartesian product.
pub fn brute_force_configurations(graph: &FcmGraph) -> Result<Vec<ControlConfiguration>> {
    let n = graph.len();
    if n > MAX_CONFIGURATION_NODES {
        return Err(Error::SizeGuard {
            max: MAX_CONFIGURATION_NODES,
            actual: n,
        });
    }
    graph.ensure_no_self_loops()?;
    let edges = graph.edge_indices();

    let mut per_component: Vec<Vec<Vec<usize>>> = Vec::new();
    for comp in components(n, &edges) {
        let local = |g: usize| comp.iter().position(|&x| x == g);
        let k = comp.len();
        let mut preds = vec![Vec::new(); k];
        for &(s, t) in &edges {
            if let (Some(ls), Some(lt)) = (local(s), local(t)) {
                preds[lt].push(ls);
            }
        }
        let mut found: Vec<Vec<usize>> = Vec::new();
        for size in 0..=k {
            for mask in 0u32..(1 << k) {
                if mask.count_ones() as usize != size {
                    continue;
                }
                let allowed: Vec<bool> = (0..k).map(|i| mask & (1 << i) == 0).collect();
                if brute_max(&preds, &allowed) == k - size {
                    found.push((0..k).filter(|i| mask & (1 << i) != 0).map(|i| comp[i]).collect());
                }
            }
            if !found.is_empty() {
                if size == 0 {
                    found = comp.iter().map(|&v| vec![v]).collect();
                }
                break;
            }
        }
        per_component.push(found);
    }

    let mut combined: Vec<Vec<usize>> = vec![Vec::new()];
    for options in &per_component {
        let mut next = Vec::with_capacity(combined.len() * options.len());
        for prefix in &combined {
            for option in options {
                let mut merged = prefix.clone();
                merged.extend_from_slice(option);
                next.push(merged);
            }
        }
        combined = next;
    }

    let ids = graph.ids();
    let mut configs: Vec<ControlConfiguration> = combined
        .into_iter()
        .map(|members| {
            let reached = reachable(n, &edges, &members);
            let mut names: Vec<String> = members.iter().map(|&i| ids[i].clone()).collect();
            names.sort();
            ControlConfiguration {
                members: names,
                score: 0.0,
                warnings: (0..n).filter(|&i| !reached[i]).map(|i| ids[i].clone()).collect(),
            }
        })
        .collect();
    configs.sort_by(|a, b| a.members.cmp(&b.members));
    Ok(configs)
}

/// Member sets only, for set-of-sets comparison.
pub fn configuration_sets(configs: &[ControlConfiguration]) -> BTreeSet<BTreeSet<String>> {
    configs
        .iter()
        .map(|c| c.members.iter().cloned().collect())
        .collect()
}

fn components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut undirected = vec![Vec::new(); n];
    for &(s, t) in edges {
        undirected[s].push(t);
        undirected[t].push(s);
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &w in &undirected[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn reachable(n: usize, edges: &[(usize, usize)], from: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = from.to_vec();
    for &v in from {
        seen[v] = true;
    }
    while let Some(v) = stack.pop() {
        for &(s, t) in edges {
            if s == v && !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    seen
}
