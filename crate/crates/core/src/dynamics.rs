//! Iterated-map dynamics `x' = f(A x)` for sense-checking a map.
//!
//! Two mappings are offered: a logistic sigmoid with steepness `lambda`, and a
//! linear map normalized by `max(1, max |(A x)_i|)` so iterates stay in
//! [-1, 1]. Fixed points of either give an importance ordering of factors.
//! Nothing in the controllability analysis depends on this module.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FcmGraph, WeightMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingKind {
    Linear,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingSpec {
    pub kind: MappingKind,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    1.0
}

impl MappingSpec {
    pub fn sigmoid(lambda: f64) -> Self {
        Self {
            kind: MappingKind::Sigmoid,
            lambda,
        }
    }

    pub fn linear() -> Self {
        Self {
            kind: MappingKind::Linear,
            lambda: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda > 0.0 && self.lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )))
        }
    }

    /// Neutral starting activation: 0.5 for the sigmoid, 1.0 for linear.
    pub fn default_activation(&self) -> f64 {
        match self.kind {
            MappingKind::Sigmoid => 0.5,
            MappingKind::Linear => 1.0,
        }
    }

    fn apply(&self, mut v: DVector<f64>) -> DVector<f64> {
        match self.kind {
            MappingKind::Sigmoid => {
                v.apply(|x| *x = 1.0 / (1.0 + (-self.lambda * *x).exp()));
                v
            }
            MappingKind::Linear => {
                let scale = v.amax().max(1.0);
                v / scale
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub step: usize,
    pub values: BTreeMap<String, f64>,
}

impl StateVector {
    pub fn uniform(ids: &[String], value: f64) -> Self {
        Self {
            step: 0,
            values: ids.iter().map(|id| (id.clone(), value)).collect(),
        }
    }

    fn to_vector(&self, ids: &[String]) -> Result<DVector<f64>> {
        if self.values.len() != ids.len() {
            return Err(Error::InvalidParameter(format!(
                "state has {} entries, map has {} factors",
                self.values.len(),
                ids.len()
            )));
        }
        ids.iter()
            .map(|id| {
                self.values
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::UnknownFactor(id.clone()))
            })
            .collect::<Result<Vec<f64>>>()
            .map(DVector::from_vec)
    }

    fn from_vector(ids: &[String], v: &DVector<f64>, step: usize) -> Self {
        Self {
            step,
            values: ids.iter().cloned().zip(v.iter().copied()).collect(),
        }
    }

    fn max_distance(&self, other: &StateVector) -> f64 {
        self.values
            .iter()
            .map(|(id, v)| (v - other.values[id]).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<StateVector>,
    pub converged: bool,
    pub fixed_point: Option<StateVector>,
}

pub fn step(state: &StateVector, matrix: &WeightMatrix, mapping: &MappingSpec) -> Result<StateVector> {
    let x = state.to_vector(&matrix.ids)?;
    let next = mapping.apply(&matrix.values * x);
    Ok(StateVector::from_vector(&matrix.ids, &next, state.step + 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

/// Iterates until successive states differ by less than `tol` in max-norm.
/// Oscillating trajectories end unconverged at `max_iter`.
pub fn iterate_to_fixed_point(
    graph: &FcmGraph,
    mapping: &MappingSpec,
    x0: Option<StateVector>,
    options: &IterationOptions,
) -> Result<Trajectory> {
    mapping.validate()?;
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let matrix = graph.adjacency_matrix();
    let mut current = x0.unwrap_or_else(|| StateVector::uniform(&matrix.ids, mapping.default_activation()));
    current.step = 0;
    current.to_vector(&matrix.ids)?;

    let mut states = vec![current.clone()];
    for n in 1..=options.max_iter {
        let next = step(&current, &matrix, mapping)?;
        if next.values.values().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: n });
        }
        let delta = next.max_distance(&current);
        states.push(next.clone());
        if delta < options.tol {
            return Ok(Trajectory {
                states,
                converged: true,
                fixed_point: Some(next),
            });
        }
        current = next;
    }
    Ok(Trajectory {
        states,
        converged: false,
        fixed_point: None,
    })
}

/// Factor ids by descending value; ties broken by id.
pub fn rank_factors(state: &StateVector) -> Vec<String> {
    let mut entries: Vec<(&String, f64)> = state.values.iter().map(|(k, v)| (k, *v)).collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries.into_iter().map(|(k, _)| k.clone()).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub top: Vec<String>,
    pub bottom: Vec<String>,
    /// Set when a fixed point has all-equal values, so its ordering comes from
    /// the id tie-break alone.
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

/// Factors in the top-k (bottom-k) of both the linear and the sigmoid
/// fixed-point rankings.
pub fn consistency_ranking(graph: &FcmGraph, k: usize) -> Result<Consistency> {
    if k == 0 || k > graph.len() {
        return Err(Error::InvalidParameter(format!(
            "k must lie in 1..={}, got {k}",
            graph.len()
        )));
    }
    let mut out = Consistency::default();
    let mut rankings = Vec::new();
    for mapping in [MappingSpec::linear(), MappingSpec::sigmoid(1.0)] {
        let traj = iterate_to_fixed_point(graph, &mapping, None, &IterationOptions::default())?;
        match traj.fixed_point {
            Some(fp) => {
                let first = fp.values.values().next().copied().unwrap_or_default();
                if fp.values.values().all(|v| *v == first) {
                    out.degenerate = true;
                }
                rankings.push(rank_factors(&fp));
            }
            None => out
                .warnings
                .push(format!("{:?} mapping did not converge", mapping.kind).to_lowercase()),
        }
    }
    if rankings.len() == 2 {
        let n = graph.len();
        let both = |pick: &dyn Fn(&[String]) -> &[String]| -> Vec<String> {
            let mut v: Vec<String> = pick(&rankings[0])
                .iter()
                .filter(|id| pick(&rankings[1]).contains(id))
                .cloned()
                .collect();
            v.sort();
            v
        };
        out.top = both(&|r| &r[..k]);
        out.bottom = both(&|r| &r[n - k..]);
    }
    Ok(out)
}

/// CSV with factor names as header and one row per step.
pub fn trajectory_csv(graph: &FcmGraph, trajectory: &Trajectory) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    writer
        .write_record(graph.factors().iter().map(|f| f.name.as_str()))
        .map_err(io)?;
    for state in &trajectory.states {
        writer
            .write_record(graph.factors().iter().map(|f| state.values[&f.id].to_string()))
            .map_err(io)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
