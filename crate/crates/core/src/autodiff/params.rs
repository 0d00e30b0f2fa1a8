//! Named parameter collections and the `MMSB-CKPT-1` checkpoint format.
//!
//! A checkpoint is one JSON document:
//!
//! ```json
//! {"format": "MMSB-CKPT-1",
//!  "meta": {"hidden": 64, ...},
//!  "params": {"name": {"shape": [2, 3], "values": [...]}, ...}}
//! ```
//!
//! Parameters are keyed by name in sorted order; `meta` holds whatever a
//! model needs to rebuild itself (class count, dimensions, config).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "MMSB-CKPT-1";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

/// Parameters registered on one graph, in `ParamSet` order.
#[derive(Clone, Debug)]
pub struct Bound {
    names: Vec<String>,
    vars: Vec<Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Var {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("parameter '{name}' is not bound"));
        self.vars[i]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Pairs `set`'s names with nodes created elsewhere, in `set` order.
    pub fn from_vars(set: &ParamSet, vars: &[Var]) -> Result<Self> {
        if vars.len() != set.len() {
            return Err(Error::ShapeMismatch {
                op: "bind",
                detail: format!("{} nodes for {} parameters", vars.len(), set.len()),
            });
        }
        Ok(Bound {
            names: set.names.clone(),
            vars: vars.to_vec(),
        })
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        match self.names.iter().position(|n| *n == name) {
            Some(i) => self.tensors[i] = t,
            None => {
                self.names.push(name);
                self.tensors.push(t);
            }
        }
    }

    /// Uniform initialization in `[-scale, scale]`.
    pub fn insert_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        scale: f64,
        rng: &mut ChaCha8Rng,
    ) {
        let n = shape.iter().product();
        let values = (0..n).map(|_| rng.random_range(-scale..=scale)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), values).expect("shape"));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.tensors[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Registers every parameter on `g` as a trainable leaf.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        Bound {
            names: self.names.clone(),
            vars: self.tensors.iter().map(|t| g.param(t.clone())).collect(),
        }
    }

    /// Registers every parameter as a constant (inference).
    pub fn bind_frozen(&self, g: &mut Graph) -> Bound {
        Bound {
            names: self.names.clone(),
            vars: self.tensors.iter().map(|t| g.constant(t.clone())).collect(),
        }
    }

    /// Gradients for a bound set after `g.backward`; zeros where no
    /// gradient reached a parameter.
    pub fn gradients(&self, bound: &Bound, g: &Graph) -> Vec<Vec<f64>> {
        bound
            .vars
            .iter()
            .zip(&self.tensors)
            .map(|(&v, t)| {
                g.grad(v)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0; t.len()])
            })
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.values().iter().all(|x| x.is_finite()))
    }

    pub fn to_checkpoint(&self, meta: &serde_json::Value) -> Result<String> {
        let params: BTreeMap<&str, &Tensor> = self
            .names
            .iter()
            .map(String::as_str)
            .zip(&self.tensors)
            .collect();
        let doc = serde_json::json!({
            "format": CHECKPOINT_FORMAT,
            "meta": meta,
            "params": params,
        });
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_checkpoint(text: &str) -> Result<(ParamSet, serde_json::Value)> {
        #[derive(Deserialize, Serialize)]
        struct Doc {
            format: String,
            #[serde(default)]
            meta: serde_json::Value,
            params: BTreeMap<String, Tensor>,
        }
        let doc: Doc = serde_json::from_str(text)?;
        if doc.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported format '{}', expected {CHECKPOINT_FORMAT}",
                doc.format
            )));
        }
        let mut set = ParamSet::new();
        for (name, t) in doc.params {
            let t = Tensor::new(t.shape().to_vec(), t.into_values())
                .map_err(|e| Error::Checkpoint(format!("parameter '{name}': {e}")))?;
            set.insert(name, t);
        }
        Ok((set, doc.meta))
    }

    pub fn save(&self, path: impl AsRef<Path>, meta: &serde_json::Value) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint(meta)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(ParamSet, serde_json::Value)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&text)
    }
}
