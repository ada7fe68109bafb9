//! Fuzzy cognitive map domain types and the JSON graph document format.
//!
//! An [`FcmGraph`] is an immutable value: factors are kept sorted by id and
//! influences by `(source, target)`, so every index-based algorithm downstream
//! sees the same deterministic ordering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

/// Ease with which stakeholders can influence a factor (traffic-light scale).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Controllability {
    Easy,
    Medium,
    Hard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Neutral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Weak,
    Medium,
    Strong,
}

impl Controllability {
    pub const ALL: [Controllability; 3] = [Self::Easy, Self::Medium, Self::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Easy => "easy",
            Self::Medium => "medium",
            Self::Hard => "hard",
        }
    }
}

impl Sign {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
            Self::Neutral => "neutral",
        }
    }

    /// Multiplier applied to the link magnitude. Neutral links count as positive.
    pub fn factor(self) -> f64 {
        match self {
            Self::Negative => -1.0,
            Self::Positive | Self::Neutral => 1.0,
        }
    }
}

impl Strength {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Weak => "weak",
            Self::Medium => "medium",
            Self::Strong => "strong",
        }
    }

    pub fn magnitude(self) -> f64 {
        match self {
            Self::Weak => 0.2,
            Self::Medium => 0.5,
            Self::Strong => 0.7,
        }
    }
}

impl fmt::Display for Controllability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn parse_level<T: Copy>(raw: &str, options: &[(&str, T)]) -> Option<T> {
    let lowered = raw.trim().to_ascii_lowercase();
    options
        .iter()
        .find(|(name, _)| *name == lowered)
        .map(|(_, v)| *v)
}

impl std::str::FromStr for Controllability {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_level(
            s,
            &[("easy", Self::Easy), ("medium", Self::Medium), ("hard", Self::Hard)],
        )
        .ok_or_else(|| Error::InvalidParameter(format!("unknown controllability {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub id: String,
    pub name: String,
    pub controllability: Controllability,
}

impl Factor {
    pub fn new(id: impl Into<String>, name: impl Into<String>, level: Controllability) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            controllability: level,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Influence {
    pub source: String,
    pub target: String,
    pub sign: Sign,
    pub strength: Strength,
}

impl Influence {
    pub fn new(
        source: impl Into<String>,
        target: impl Into<String>,
        sign: Sign,
        strength: Strength,
    ) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            sign,
            strength,
        }
    }

    pub fn weight(&self) -> f64 {
        weight_of(self)
    }
}

/// Signed numeric weight of an influence: ±0.2 / 0.5 / 0.7.
pub fn weight_of(influence: &Influence) -> f64 {
    influence.sign.factor() * influence.strength.magnitude()
}

/// One stakeholder group's view of how controllable each factor is.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perspective {
    pub label: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, Controllability>,
}

impl Perspective {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn with(mut self, id: impl Into<String>, level: Controllability) -> Self {
        self.overrides.insert(id.into(), level);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FcmGraph {
    title: String,
    scenario: Option<String>,
    perspective: Option<String>,
    factors: Vec<Factor>,
    influences: Vec<Influence>,
    perspectives: Vec<Perspective>,
    metadata: BTreeMap<String, Value>,
}

impl FcmGraph {
    /// Validates and normalizes a graph. Factors are sorted by id, influences
    /// by `(source, target)`.
    pub fn new(mut factors: Vec<Factor>, mut influences: Vec<Influence>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::EmptyGraph);
        }
        for (i, f) in factors.iter().enumerate() {
            if f.id.is_empty() {
                return Err(Error::schema(format!("factors[{i}].id"), "empty id"));
            }
            if f.name.trim().is_empty() {
                return Err(Error::schema(format!("factors[{i}].name"), "empty name"));
            }
        }
        let mut ids: BTreeSet<&str> = BTreeSet::new();
        for (i, f) in factors.iter().enumerate() {
            if !ids.insert(f.id.as_str()) {
                return Err(Error::schema(
                    format!("factors[{i}].id"),
                    format!("duplicate factor id {:?}", f.id),
                ));
            }
        }
        for (i, inf) in influences.iter().enumerate() {
            if !ids.contains(inf.source.as_str()) {
                return Err(Error::schema(
                    format!("influences[{i}].source"),
                    format!("unknown factor id {:?}", inf.source),
                ));
            }
            if !ids.contains(inf.target.as_str()) {
                return Err(Error::schema(
                    format!("influences[{i}].target"),
                    format!("unknown factor id {:?}", inf.target),
                ));
            }
        }
        let mut pairs = BTreeSet::new();
        for (i, inf) in influences.iter().enumerate() {
            if !pairs.insert((inf.source.as_str(), inf.target.as_str())) {
                return Err(Error::schema(
                    format!("influences[{i}]"),
                    format!("duplicate influence ({:?}, {:?})", inf.source, inf.target),
                ));
            }
        }
        factors.sort_by(|a, b| a.id.cmp(&b.id));
        influences.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));
        Ok(Self {
            title: String::new(),
            scenario: None,
            perspective: None,
            factors,
            influences,
            perspectives: Vec::new(),
            metadata: BTreeMap::new(),
        })
    }

    /// Plain structural graph: every endpoint becomes a Medium factor named by
    /// its id, every edge a positive medium influence.
    pub fn from_edges(nodes: &[&str], edges: &[(&str, &str)]) -> Result<Self> {
        let mut ids: BTreeSet<&str> = nodes.iter().copied().collect();
        for (s, t) in edges {
            ids.insert(s);
            ids.insert(t);
        }
        let factors = ids
            .into_iter()
            .map(|id| Factor::new(id, id, Controllability::Medium))
            .collect();
        let influences = edges
            .iter()
            .map(|(s, t)| Influence::new(*s, *t, Sign::Positive, Strength::Medium))
            .collect();
        Self::new(factors, influences)
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn with_scenario(mut self, scenario: Option<String>) -> Self {
        self.scenario = scenario;
        self
    }

    pub fn with_perspective_label(mut self, label: Option<String>) -> Self {
        self.perspective = label;
        self
    }

    pub fn with_metadata(mut self, metadata: BTreeMap<String, Value>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn with_perspectives(mut self, perspectives: Vec<Perspective>) -> Result<Self> {
        for (i, p) in perspectives.iter().enumerate() {
            self.check_perspective(p)
                .map_err(|e| match e {
                    Error::UnknownFactor(id) => Error::schema(
                        format!("perspectives[{i}].overrides.{id}"),
                        format!("unknown factor id {id:?}"),
                    ),
                    other => other,
                })?;
        }
        self.perspectives = perspectives;
        Ok(self)
    }

    /// Every overridden id must name a factor of this graph.
    pub fn check_perspective(&self, perspective: &Perspective) -> Result<()> {
        match perspective
            .overrides
            .keys()
            .find(|id| self.index_of(id).is_none())
        {
            Some(id) => Err(Error::UnknownFactor(id.clone())),
            None => Ok(()),
        }
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn scenario(&self) -> Option<&str> {
        self.scenario.as_deref()
    }

    pub fn perspective_label(&self) -> Option<&str> {
        self.perspective.as_deref()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn influences(&self) -> &[Influence] {
        &self.influences
    }

    pub fn perspectives(&self) -> &[Perspective] {
        &self.perspectives
    }

    pub fn metadata(&self) -> &BTreeMap<String, Value> {
        &self.metadata
    }

    pub fn perspective(&self, label: &str) -> Option<&Perspective> {
        self.perspectives.iter().find(|p| p.label == label)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.factors
            .binary_search_by(|f| f.id.as_str().cmp(id))
            .ok()
    }

    pub fn factor(&self, id: &str) -> Option<&Factor> {
        self.index_of(id).map(|i| &self.factors[i])
    }

    pub fn ids(&self) -> Vec<String> {
        self.factors.iter().map(|f| f.id.clone()).collect()
    }

    /// Influences as `(source index, target index)` pairs, in sorted order.
    pub fn edge_indices(&self) -> Vec<(usize, usize)> {
        self.influences
            .iter()
            .map(|inf| {
                (
                    self.index_of(&inf.source).expect("validated endpoint"),
                    self.index_of(&inf.target).expect("validated endpoint"),
                )
            })
            .collect()
    }

    /// Non-fatal issues derivable from the graph itself.
    pub fn warnings(&self) -> Vec<String> {
        self.influences
            .iter()
            .filter(|inf| inf.sign == Sign::Neutral)
            .map(|inf| {
                format!(
                    "influence {} -> {} has neutral sign; weighted as positive",
                    inf.source, inf.target
                )
            })
            .collect()
    }

    /// Factor ids carrying an influence onto themselves, sorted.
    pub fn detect_self_loops(&self) -> Vec<String> {
        let looping: BTreeSet<&str> = self
            .influences
            .iter()
            .filter(|inf| inf.source == inf.target)
            .map(|inf| inf.source.as_str())
            .collect();
        looping.into_iter().map(str::to_owned).collect()
    }

    pub fn ensure_no_self_loops(&self) -> Result<()> {
        let loops = self.detect_self_loops();
        if loops.is_empty() {
            Ok(())
        } else {
            Err(Error::SelfLoopPresent(loops))
        }
    }

    /// Partition of factor indices into weakly-connected components, each
    /// sorted ascending, components ordered by their smallest index.
    pub fn component_partition(&self) -> Vec<Vec<usize>> {
        let n = self.factors.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (s, t) in self.edge_indices() {
            let (a, b) = (find(&mut parent, s), find(&mut parent, t));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        let mut parts: Vec<Vec<usize>> = groups.into_values().collect();
        parts.sort_by_key(|p| p[0]);
        parts
    }

    pub fn weakly_connected_components(&self) -> Vec<FcmGraph> {
        self.component_partition()
            .into_iter()
            .map(|part| self.induced(&part))
            .collect()
    }

    /// Subgraph on the given factor indices with the influences between them.
    pub fn induced(&self, indices: &[usize]) -> FcmGraph {
        let keep: BTreeSet<&str> = indices.iter().map(|&i| self.factors[i].id.as_str()).collect();
        let factors = indices.iter().map(|&i| self.factors[i].clone()).collect();
        let influences = self
            .influences
            .iter()
            .filter(|inf| keep.contains(inf.source.as_str()) && keep.contains(inf.target.as_str()))
            .cloned()
            .collect();
        let perspectives = self
            .perspectives
            .iter()
            .map(|p| Perspective {
                label: p.label.clone(),
                overrides: p
                    .overrides
                    .iter()
                    .filter(|(id, _)| keep.contains(id.as_str()))
                    .map(|(id, l)| (id.clone(), *l))
                    .collect(),
            })
            .collect();
        FcmGraph {
            title: self.title.clone(),
            scenario: self.scenario.clone(),
            perspective: self.perspective.clone(),
            factors,
            influences,
            perspectives,
            metadata: BTreeMap::new(),
        }
    }

    pub fn adjacency_matrix(&self) -> WeightMatrix {
        let n = self.factors.len();
        let mut values = DMatrix::zeros(n, n);
        for inf in &self.influences {
            let s = self.index_of(&inf.source).expect("validated endpoint");
            let t = self.index_of(&inf.target).expect("validated endpoint");
            values[(t, s)] = inf.weight();
        }
        WeightMatrix {
            ids: self.ids(),
            values,
        }
    }
}

/// Dense transposed adjacency: entry `(i, j)` holds the signed weight of the
/// influence `j -> i`. Rows and columns follow sorted factor id order.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    pub ids: Vec<String>,
    pub values: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.ids.binary_search_by(|id| id.as_str().cmp(row)).ok()?;
        let c = self.ids.binary_search_by(|id| id.as_str().cmp(col)).ok()?;
        Some(self.values[(r, c)])
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }
}

// ---------------------------------------------------------------------------
// JSON document format

#[derive(Deserialize)]
struct RawDocument {
    #[serde(default)]
    schema_version: Option<Value>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    scenario: Option<String>,
    #[serde(default)]
    perspective: Option<String>,
    factors: Vec<RawFactor>,
    #[serde(default)]
    influences: Vec<RawInfluence>,
    #[serde(default)]
    perspectives: Vec<RawPerspective>,
    #[serde(default)]
    metadata: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawFactor {
    id: Option<String>,
    name: Option<String>,
    controllability: Option<String>,
}

#[derive(Deserialize)]
struct RawInfluence {
    source: Option<String>,
    target: Option<String>,
    sign: Option<String>,
    strength: Option<String>,
}

#[derive(Deserialize)]
struct RawPerspective {
    label: Option<String>,
    #[serde(default)]
    overrides: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct DocumentOut<'a> {
    schema_version: &'static str,
    title: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perspective: Option<&'a str>,
    factors: &'a [Factor],
    influences: &'a [Influence],
    perspectives: &'a [Perspective],
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    metadata: &'a BTreeMap<String, Value>,
}

fn required(value: &Option<String>, path: impl Fn() -> String) -> Result<&str> {
    value
        .as_deref()
        .ok_or_else(|| Error::schema(path(), "missing field"))
}

fn level<T: Copy>(raw: &str, path: String, options: &[(&str, T)]) -> Result<T> {
    parse_level(raw, options).ok_or_else(|| {
        let allowed: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        Error::schema(
            path,
            format!("unknown value {raw:?}, expected one of {}", allowed.join("|")),
        )
    })
}

const CONTROLLABILITY: [(&str, Controllability); 3] = [
    ("easy", Controllability::Easy),
    ("medium", Controllability::Medium),
    ("hard", Controllability::Hard),
];
const SIGNS: [(&str, Sign); 3] = [
    ("positive", Sign::Positive),
    ("negative", Sign::Negative),
    ("neutral", Sign::Neutral),
];
const STRENGTHS: [(&str, Strength); 3] = [
    ("weak", Strength::Weak),
    ("medium", Strength::Medium),
    ("strong", Strength::Strong),
];

pub fn parse_graph(document: &str) -> Result<FcmGraph> {
    parse_graph_with_warnings(document).map(|(g, _)| g)
}

/// Parses a graph document, returning parse-time warnings (defaulted
/// controllability labels) alongside the graph.
pub fn parse_graph_with_warnings(document: &str) -> Result<(FcmGraph, Vec<String>)> {
    let raw: RawDocument =
        serde_json::from_str(document).map_err(|e| Error::schema("$", e.to_string()))?;
    from_raw(raw)
}

/// Same as [`parse_graph_with_warnings`] for an already-decoded JSON value.
pub fn graph_from_value(value: Value) -> Result<(FcmGraph, Vec<String>)> {
    let raw: RawDocument =
        serde_json::from_value(value).map_err(|e| Error::schema("$", e.to_string()))?;
    from_raw(raw)
}

fn from_raw(raw: RawDocument) -> Result<(FcmGraph, Vec<String>)> {
    let mut warnings = Vec::new();
    if let Some(v) = &raw.schema_version {
        let text = match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        if text != SCHEMA_VERSION {
            return Err(Error::schema(
                "schema_version",
                format!("unsupported schema version {text}"),
            ));
        }
    }

    let mut factors = Vec::with_capacity(raw.factors.len());
    for (i, f) in raw.factors.iter().enumerate() {
        let id = required(&f.id, || format!("factors[{i}].id"))?;
        let name = f.name.as_deref().unwrap_or(id);
        let controllability = match &f.controllability {
            Some(c) => level(c, format!("factors[{i}].controllability"), &CONTROLLABILITY)?,
            None => {
                warnings.push(format!(
                    "factor {id} has no controllability; defaulted to medium"
                ));
                Controllability::Medium
            }
        };
        factors.push(Factor::new(id, name, controllability));
    }

    let mut influences = Vec::with_capacity(raw.influences.len());
    for (i, inf) in raw.influences.iter().enumerate() {
        let source = required(&inf.source, || format!("influences[{i}].source"))?;
        let target = required(&inf.target, || format!("influences[{i}].target"))?;
        let sign = level(
            required(&inf.sign, || format!("influences[{i}].sign"))?,
            format!("influences[{i}].sign"),
            &SIGNS,
        )?;
        let strength = level(
            required(&inf.strength, || format!("influences[{i}].strength"))?,
            format!("influences[{i}].strength"),
            &STRENGTHS,
        )?;
        influences.push(Influence::new(source, target, sign, strength));
    }

    let mut perspectives = Vec::with_capacity(raw.perspectives.len());
    for (i, p) in raw.perspectives.iter().enumerate() {
        let label = required(&p.label, || format!("perspectives[{i}].label"))?;
        if perspectives.iter().any(|q: &Perspective| q.label == label) {
            return Err(Error::schema(
                format!("perspectives[{i}].label"),
                format!("duplicate perspective {label:?}"),
            ));
        }
        let mut overrides = BTreeMap::new();
        for (id, l) in &p.overrides {
            let lvl = level(
                l,
                format!("perspectives[{i}].overrides.{id}"),
                &CONTROLLABILITY,
            )?;
            overrides.insert(id.clone(), lvl);
        }
        perspectives.push(Perspective {
            label: label.to_owned(),
            overrides,
        });
    }

    let graph = FcmGraph::new(factors, influences)
        .map_err(|e| match e {
            Error::EmptyGraph => Error::schema("factors", "graph has no factors"),
            other => other,
        })?
        .with_title(raw.title.unwrap_or_default())
        .with_scenario(raw.scenario)
        .with_perspective_label(raw.perspective)
        .with_metadata(raw.metadata)
        .with_perspectives(perspectives)?;
    warnings.extend(graph.warnings());
    Ok((graph, warnings))
}

pub fn graph_to_value(graph: &FcmGraph) -> Value {
    serde_json::to_value(document_out(graph)).expect("graph document serializes")
}

pub fn serialize_graph(graph: &FcmGraph) -> String {
    serde_json::to_string_pretty(&document_out(graph)).expect("graph document serializes")
}

fn document_out(graph: &FcmGraph) -> DocumentOut<'_> {
    DocumentOut {
        schema_version: SCHEMA_VERSION,
        title: &graph.title,
        scenario: graph.scenario.as_deref(),
        perspective: graph.perspective.as_deref(),
        factors: &graph.factors,
        influences: &graph.influences,
        perspectives: &graph.perspectives,
        metadata: &graph.metadata,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(s: &str, t: &str, sign: Sign, strength: Strength) -> Influence {
        Influence::new(s, t, sign, strength)
    }

    #[test]
    fn weights_follow_strength_and_sign() {
        let w = |sign, strength| weight_of(&edge("a", "b", sign, strength));
        assert_eq!(w(Sign::Positive, Strength::Strong), 0.7);
        assert_eq!(w(Sign::Negative, Strength::Weak), -0.2);
        assert_eq!(w(Sign::Neutral, Strength::Medium), 0.5);
    }

    #[test]
    fn neutral_influence_is_flagged() {
        let g = FcmGraph::new(
            vec![
                Factor::new("a", "A", Controllability::Easy),
                Factor::new("b", "B", Controllability::Easy),
            ],
            vec![edge("a", "b", Sign::Neutral, Strength::Medium)],
        )
        .unwrap();
        let warnings = g.warnings();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("a -> b"));
    }

    #[test]
    fn adjacency_is_transposed() {
        let g = FcmGraph::new(
            vec![
                Factor::new("a", "A", Controllability::Easy),
                Factor::new("b", "B", Controllability::Easy),
            ],
            vec![edge("a", "b", Sign::Positive, Strength::Strong)],
        )
        .unwrap();
        let m = g.adjacency_matrix();
        assert_eq!(m.get("b", "a"), Some(0.7));
        assert_eq!(m.get("a", "b"), Some(0.0));
        assert_eq!(m.nonzero_count(), 1);

        let g = FcmGraph::new(
            g.factors().to_vec(),
            vec![
                edge("a", "b", Sign::Positive, Strength::Weak),
                edge("b", "a", Sign::Negative, Strength::Weak),
            ],
        )
        .unwrap();
        let m = g.adjacency_matrix();
        assert_eq!(m.get("b", "a"), Some(0.2));
        assert_eq!(m.get("a", "b"), Some(-0.2));

        let empty = FcmGraph::from_edges(&["a", "b", "c"], &[]).unwrap();
        assert_eq!(empty.adjacency_matrix().nonzero_count(), 0);
    }

    #[test]
    fn components_split_on_weak_connectivity() {
        let g = FcmGraph::from_edges(&["z"], &[("a", "b")]).unwrap();
        let comps = g.weakly_connected_components();
        let ids: Vec<Vec<String>> = comps.iter().map(|c| c.ids()).collect();
        assert_eq!(ids, vec![vec!["a", "b"], vec!["z"]]);

        let g = FcmGraph::from_edges(&[], &[("a", "b"), ("b", "c")]).unwrap();
        assert_eq!(g.weakly_connected_components().len(), 1);

        let g = FcmGraph::from_edges(&[], &[("a", "b"), ("c", "d"), ("d", "c")]).unwrap();
        let comps = g.weakly_connected_components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[1].influences().len(), 2);
    }

    #[test]
    fn self_loops_are_listed_sorted() {
        let g = FcmGraph::from_edges(&[], &[("a", "a"), ("a", "b")]).unwrap();
        assert_eq!(g.detect_self_loops(), vec!["a"]);
        let g = FcmGraph::from_edges(&[], &[("a", "b")]).unwrap();
        assert!(g.detect_self_loops().is_empty());
        let g = FcmGraph::from_edges(&[], &[("b", "b"), ("a", "a")]).unwrap();
        assert_eq!(g.detect_self_loops(), vec!["a", "b"]);
        assert_eq!(
            g.ensure_no_self_loops(),
            Err(Error::SelfLoopPresent(vec!["a".into(), "b".into()]))
        );
    }

    #[test]
    fn round_trip_three_nodes() {
        let g = FcmGraph::new(
            vec![
                Factor::new("c", "Flood Risk", Controllability::Hard),
                Factor::new("a", "Knowledge", Controllability::Easy),
                Factor::new("b", "Jobs", Controllability::Medium),
            ],
            vec![
                edge("a", "b", Sign::Positive, Strength::Strong),
                edge("c", "b", Sign::Negative, Strength::Weak),
            ],
        )
        .unwrap()
        .with_title("demo")
        .with_perspectives(vec![Perspective::new("Industry").with("a", Controllability::Hard)])
        .unwrap();
        let text = serialize_graph(&g);
        assert_eq!(parse_graph(&text).unwrap(), g);
    }

    #[test]
    fn dangling_endpoint_names_the_id() {
        let doc = r#"{"factors":[{"id":"a","name":"A","controllability":"easy"}],
            "influences":[{"source":"a","target":"X","sign":"positive","strength":"weak"}]}"#;
        let err = parse_graph(doc).unwrap_err();
        assert!(err.to_string().contains("\"X\""), "{err}");
        assert!(err.to_string().starts_with("influences[0].target"), "{err}");
    }

    #[test]
    fn duplicate_influence_is_rejected() {
        let doc = r#"{"factors":[{"id":"a","name":"A","controllability":"easy"},
                                 {"id":"b","name":"B","controllability":"easy"}],
            "influences":[{"source":"a","target":"b","sign":"positive","strength":"weak"},
                          {"source":"a","target":"b","sign":"negative","strength":"strong"}]}"#;
        let err = parse_graph(doc).unwrap_err();
        assert!(err.to_string().contains("duplicate influence"), "{err}");
        assert!(err.to_string().contains("(\"a\", \"b\")"), "{err}");
    }

    #[test]
    fn schema_errors_carry_paths() {
        let doc = r#"{"factors":[{"id":"a","name":"A","controllability":"trivial"}]}"#;
        let err = parse_graph(doc).unwrap_err();
        assert!(err.to_string().starts_with("factors[0].controllability"), "{err}");

        let doc = r#"{"factors":[{"id":"a"},{"id":"a"}]}"#;
        assert!(parse_graph(doc).unwrap_err().to_string().contains("duplicate factor"));

        let doc = r#"{"factors":[{"id":"a"}],"perspectives":[{"label":"p","overrides":{"q":"easy"}}]}"#;
        let err = parse_graph(doc).unwrap_err();
        assert!(err.to_string().contains("perspectives[0].overrides.q"), "{err}");

        assert!(matches!(parse_graph(r#"{"factors":[]}"#), Err(Error::Schema { .. })));
    }

    #[test]
    fn missing_controllability_defaults_to_medium() {
        let doc = r#"{"factors":[{"id":"a","name":"A"}]}"#;
        let (g, warnings) = parse_graph_with_warnings(doc).unwrap();
        assert_eq!(g.factors()[0].controllability, Controllability::Medium);
        assert_eq!(warnings.len(), 1);
    }
}
