use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const PARAM_FORMAT_VERSION: u32 = 1;

/// Named parameter tensors plus the seed they were initialized from.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    seed: u64,
    tensors: BTreeMap<String, Matrix>,
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ParamFile {
    format_version: u32,
    seed: u64,
    tensors: BTreeMap<String, TensorRecord>,
}

impl ParamSet {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            tensors: BTreeMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.tensors.get_mut(name)
    }

    /// Adds a tensor; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::contract(format!("duplicate parameter name `{name}`")));
        }
        self.tensors.insert(name, value);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn coordinate_count(&self) -> usize {
        self.tensors.values().map(|m| m.as_slice().len()).sum()
    }

    /// Copies every tensor of `other` into this set, prefixed names included.
    pub fn extend_from(&mut self, other: &ParamSet) -> Result<()> {
        for (name, value) in other.iter() {
            self.insert(name, value.clone())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ParamFile {
            format_version: PARAM_FORMAT_VERSION,
            seed: self.seed,
            tensors: self
                .tensors
                .iter()
                .map(|(k, m)| {
                    (
                        k.clone(),
                        TensorRecord {
                            shape: [m.rows(), m.cols()],
                            values: m.as_slice().to_vec(),
                        },
                    )
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamFile = serde_json::from_str(text)?;
        if file.format_version != PARAM_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported parameter format version {}",
                file.format_version
            )));
        }
        let mut tensors = BTreeMap::new();
        for (name, rec) in file.tensors {
            let [r, c] = rec.shape;
            if r * c != rec.values.len() {
                return Err(Error::Config(format!(
                    "tensor `{name}` declares shape {r}x{c} but holds {} values",
                    rec.values.len()
                )));
            }
            tensors.insert(name, Matrix::from_vec(r, c, rec.values));
        }
        Ok(Self {
            seed: file.seed,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Seeded Glorot-uniform initializer. Tensors are drawn in call order, so a
/// model that declares its layers in a fixed order is reproducible.
pub struct Initializer {
    rng: ChaCha8Rng,
    params: ParamSet,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            params: ParamSet::new(seed),
        }
    }

    pub fn glorot(&mut self, name: &str, rows: usize, cols: usize) -> Result<()> {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| self.rng.random_range(-a..a)).collect();
        self.params.insert(name, Matrix::from_vec(rows, cols, data))
    }

    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> Result<()> {
        self.params.insert(name, Matrix::zeros(rows, cols))
    }

    pub fn finish(self) -> ParamSet {
        self.params
    }
}
