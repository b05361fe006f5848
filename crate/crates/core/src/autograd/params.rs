use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::tape::{Adjoints, Tape, Var};

/// One named trainable tensor with its optimizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub shape: Vec<usize>,
    #[serde(with = "crate::serde_f64::vec")]
    pub data: Vec<f64>,
    #[serde(with = "crate::serde_f64::vec")]
    pub first_moment: Vec<f64>,
    #[serde(with = "crate::serde_f64::vec")]
    pub second_moment: Vec<f64>,
}

impl Param {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        let n = data.len();
        Self {
            shape,
            data,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
        }
    }
}

/// Named leaves keyed by path (`layer0.k1.W`) plus the shared step counter.
///
/// Iteration order is the lexicographic order of the paths, which fixes the
/// order of every reduction over parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub step: u64,
    pub params: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        self.params.insert(path.into(), Param::new(shape, data));
    }

    pub fn get(&self, path: &str) -> Result<&Param> {
        self.params
            .get(path)
            .ok_or_else(|| Error::UnknownParameter(path.to_string()))
    }

    pub fn get_mut(&mut self, path: &str) -> Result<&mut Param> {
        self.params
            .get_mut(path)
            .ok_or_else(|| Error::UnknownParameter(path.to_string()))
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|p| p.data.len()).sum()
    }

    /// Plain-float view of the current values.
    pub fn values<T: Real>(&self) -> Leaves<T> {
        Leaves {
            map: self
                .params
                .iter()
                .map(|(k, p)| (k.clone(), p.data.iter().map(|&x| T::cst(x)).collect()))
                .collect(),
        }
    }

    /// Register every scalar as a tape input.
    pub fn track(&self, tape: &Tape) -> Leaves<Var> {
        Leaves {
            map: self
                .params
                .iter()
                .map(|(k, p)| (k.clone(), p.data.iter().map(|&x| tape.var(x)).collect()))
                .collect(),
        }
    }
}

/// Parameter values lifted into a scalar type, looked up by path.
#[derive(Clone, Debug)]
pub struct Leaves<T> {
    map: BTreeMap<String, Vec<T>>,
}

impl<T: Real> Leaves<T> {
    pub fn get(&self, path: &str) -> Result<&[T]> {
        self.map
            .get(path)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownParameter(path.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[T])> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

impl Leaves<Var> {
    /// Collect per-path gradients from a finished backward sweep.
    pub fn gradients(&self, adjoints: &Adjoints) -> Gradients {
        Gradients {
            map: self
                .map
                .iter()
                .map(|(k, vars)| (k.clone(), vars.iter().map(|&v| adjoints.wrt(v)).collect()))
                .collect(),
        }
    }
}

/// Gradient tensors keyed by parameter path.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    pub map: BTreeMap<String, Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            map: store
                .params
                .iter()
                .map(|(k, p)| (k.clone(), vec![0.0; p.data.len()]))
                .collect(),
        }
    }

    pub fn get(&self, path: &str) -> Option<&[f64]> {
        self.map.get(path).map(Vec::as_slice)
    }

    /// `self += scale * other`, path by path.
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (k, g) in &other.map {
            let dst = self.map.entry(k.clone()).or_insert_with(|| vec![0.0; g.len()]);
            for (d, s) in dst.iter_mut().zip(g) {
                *d += scale * s;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.map
            .values()
            .flat_map(|g| g.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}
