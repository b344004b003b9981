use std::collections::BTreeMap;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const INIT_STD: f64 = 0.02;

/// Named weight matrices. The group of a parameter is its name up to the first dot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    map: BTreeMap<String, Array2<f64>>,
}

fn name_hash(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn gaussian(rows: usize, cols: usize, std: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).expect("positive std");
    Array2::from_shape_fn((rows, cols), |_| normal.sample(&mut rng))
}

impl Params {
    /// Seeded per name, so values do not depend on registration order.
    pub fn add_gaussian(&mut self, seed: u64, name: &str, rows: usize, cols: usize) {
        let value = gaussian(rows, cols, INIT_STD, seed ^ name_hash(name));
        self.map.insert(name.to_string(), value);
    }

    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) {
        self.map.insert(name.to_string(), Array2::zeros((rows, cols)));
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        self.map.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array2<f64> {
        self.map.get_mut(name).unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(|s| s.as_str())
    }

    pub fn groups(&self) -> Vec<String> {
        let mut g: Vec<String> = self.names().map(group_of).map(str::to_string).collect();
        g.dedup();
        g
    }

    pub fn count(&self) -> usize {
        self.map.values().map(|v| v.len()).sum()
    }

    /// Set every parameter whose name starts with `prefix` to zero.
    pub fn zero_prefix(&mut self, prefix: &str) -> usize {
        let mut n = 0;
        for (name, v) in self.map.iter_mut() {
            if name.starts_with(prefix) {
                v.fill(0.0);
                n += 1;
            }
        }
        n
    }

    /// Re-draw every parameter under `prefix` from the Gaussian init.
    pub fn randomize_prefix(&mut self, prefix: &str, seed: u64) {
        for (name, v) in self.map.iter_mut() {
            if name.starts_with(prefix) {
                *v = gaussian(v.nrows(), v.ncols(), INIT_STD, seed ^ name_hash(name) ^ 0x5eed);
            }
        }
    }
}

pub fn group_of(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}
