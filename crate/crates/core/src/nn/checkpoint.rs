//! Checkpoint file: named networks, optimizer states and counters.
//!
//! The body starts with a manifest (entry kinds, names, layer sizes and
//! scalar metadata), followed by every parameter array as little-endian
//! `f64` in manifest order: for each layer the weight matrix row-major,
//! then the bias. Optimizer entries store their first moments, then their
//! second moments, with the same layout.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::container::{read_file, write_file, ContainerError, Reader, Result, Writer};
use crate::Real;

use super::{AdamState, GradientSet, Mlp, OutputActivation};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ACMBCKPT";

const KIND_NETWORK: u8 = 0;
const KIND_OPTIMIZER: u8 = 1;
const KIND_COUNTER: u8 = 2;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint<T> {
    pub networks: Vec<(String, Mlp<T>)>,
    pub optimizers: Vec<(String, AdamState<T>)>,
    pub counters: Vec<(String, u64)>,
}

fn write_sizes(w: &mut Writer, sizes: &[usize]) {
    w.u32(sizes.len() as u32);
    for &s in sizes {
        w.u64(s as u64);
    }
}

fn read_sizes(r: &mut Reader<'_>) -> Result<Vec<usize>> {
    let n = r.u32()? as usize;
    if !(2..=64).contains(&n) {
        return Err(ContainerError::Corrupt(format!("implausible layer count {n}")));
    }
    let sizes = (0..n).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    if sizes.iter().any(|&s| s == 0 || s > 1 << 20) {
        return Err(ContainerError::Corrupt(format!("implausible layer sizes {sizes:?}")));
    }
    Ok(sizes)
}

fn write_set<T: Real>(w: &mut Writer, weights: &[Array2<T>], biases: &[Array1<T>]) {
    for (wm, b) in weights.iter().zip(biases) {
        w.f64s(wm.iter().map(|v| v.as_f64()));
        w.f64s(b.iter().map(|v| v.as_f64()));
    }
}

fn read_set<T: Real>(r: &mut Reader<'_>, sizes: &[usize]) -> Result<GradientSet<T>> {
    let mut set = GradientSet::zeros_for_sizes(sizes);
    for (wm, b) in set.weights.iter_mut().zip(set.biases.iter_mut()) {
        for v in wm.iter_mut() {
            *v = T::lit(r.f64()?);
        }
        for v in b.iter_mut() {
            *v = T::lit(r.f64()?);
        }
    }
    Ok(set)
}

enum Entry {
    Network { name: String, act: OutputActivation, sizes: Vec<usize> },
    Optimizer { name: String, sizes: Vec<usize>, t: u64, betas: [f64; 3] },
    Counter { name: String, value: u64 },
}

impl<T: Real> Checkpoint<T> {
    pub fn new() -> Self {
        Self { networks: Vec::new(), optimizers: Vec::new(), counters: Vec::new() }
    }

    pub fn with_network(mut self, name: &str, net: &Mlp<T>) -> Self {
        self.networks.push((name.to_string(), net.clone()));
        self
    }

    pub fn with_optimizer(mut self, name: &str, state: &AdamState<T>) -> Self {
        self.optimizers.push((name.to_string(), state.clone()));
        self
    }

    pub fn with_counter(mut self, name: &str, value: u64) -> Self {
        self.counters.push((name.to_string(), value));
        self
    }

    /// Looks up a network and, when `expected` is given, checks its layer sizes.
    pub fn network(&self, name: &str, expected: Option<&[usize]>) -> Result<&Mlp<T>> {
        let net = self
            .networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, net)| net)
            .ok_or_else(|| ContainerError::MissingEntry(name.to_string()))?;
        if let Some(exp) = expected {
            if exp != net.sizes() {
                return Err(ContainerError::ShapeMismatch {
                    name: name.to_string(),
                    expected: exp.to_vec(),
                    found: net.sizes().to_vec(),
                });
            }
        }
        Ok(net)
    }

    pub fn optimizer(&self, name: &str) -> Result<&AdamState<T>> {
        self.optimizers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| ContainerError::MissingEntry(name.to_string()))
    }

    pub fn counter(&self, name: &str) -> Result<u64> {
        self.counters
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| ContainerError::MissingEntry(name.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        let entries = self.networks.len() + self.optimizers.len() + self.counters.len();
        w.u32(entries as u32);
        for (name, net) in &self.networks {
            w.u8(KIND_NETWORK);
            w.str(name);
            w.u8(match net.output_activation() {
                OutputActivation::Linear => 0,
                OutputActivation::Tanh => 1,
            });
            write_sizes(&mut w, net.sizes());
        }
        for (name, st) in &self.optimizers {
            w.u8(KIND_OPTIMIZER);
            w.str(name);
            write_sizes(&mut w, &st.m.sizes());
            w.u64(st.t);
            w.f64s([st.beta1.as_f64(), st.beta2.as_f64(), st.eps.as_f64()]);
        }
        for (name, value) in &self.counters {
            w.u8(KIND_COUNTER);
            w.str(name);
            w.u64(*value);
        }
        for (_, net) in &self.networks {
            write_set(&mut w, net.weights(), net.biases());
        }
        for (_, st) in &self.optimizers {
            write_set(&mut w, &st.m.weights, &st.m.biases);
            write_set(&mut w, &st.v.weights, &st.v.biases);
        }
        w.finish(CHECKPOINT_MAGIC)
    }

    /// Parses a whole checkpoint; nothing is returned unless every entry decodes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, CHECKPOINT_MAGIC)?;
        let n = r.u32()? as usize;
        let mut manifest = Vec::new();
        for _ in 0..n {
            let kind = r.u8()?;
            let name = r.str()?;
            manifest.push(match kind {
                KIND_NETWORK => {
                    let act = match r.u8()? {
                        0 => OutputActivation::Linear,
                        1 => OutputActivation::Tanh,
                        a => return Err(ContainerError::Corrupt(format!("unknown activation {a}"))),
                    };
                    Entry::Network { name, act, sizes: read_sizes(&mut r)? }
                }
                KIND_OPTIMIZER => {
                    let sizes = read_sizes(&mut r)?;
                    let t = r.u64()?;
                    Entry::Optimizer { name, sizes, t, betas: [r.f64()?, r.f64()?, r.f64()?] }
                }
                KIND_COUNTER => Entry::Counter { name, value: r.u64()? },
                k => return Err(ContainerError::Corrupt(format!("unknown entry kind {k}"))),
            });
        }
        let mut ck = Self::new();
        let mut pending_opts = Vec::new();
        for e in manifest {
            match e {
                Entry::Network { name, act, sizes } => {
                    let set = read_set::<T>(&mut r, &sizes)?;
                    let net = Mlp::from_parts(set.weights, set.biases, act)
                        .map_err(|e| ContainerError::Corrupt(e.to_string()))?;
                    ck.networks.push((name, net));
                }
                Entry::Optimizer { name, sizes, t, betas } => pending_opts.push((name, sizes, t, betas)),
                Entry::Counter { name, value } => ck.counters.push((name, value)),
            }
        }
        for (name, sizes, t, [b1, b2, eps]) in pending_opts {
            let m = read_set::<T>(&mut r, &sizes)?;
            let v = read_set::<T>(&mut r, &sizes)?;
            ck.optimizers.push((
                name,
                AdamState { m, v, t, beta1: T::lit(b1), beta2: T::lit(b2), eps: T::lit(eps) },
            ));
        }
        r.finish()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_file(path.as_ref())?)
    }
}
