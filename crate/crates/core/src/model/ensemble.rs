use crate::error::{invalid, Error, Result};

/// States of `n` particles in `dim` dimensions at one time, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Snapshot {
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * dim {
            return Err(Error::Dimension { what: "snapshot data", expected: n * dim, got: data.len() });
        }
        Ok(Self { n, dim, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Sample mean per component.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, v) in m.iter_mut().zip(r) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.n as f64);
        m
    }

    /// Unbiased sample covariance, row-major `dim x dim`.
    pub fn covariance(&self) -> Vec<f64> {
        let mean = self.mean();
        let d = self.dim;
        let mut c = vec![0.0; d * d];
        for r in self.rows() {
            for i in 0..d {
                let di = r[i] - mean[i];
                for j in 0..d {
                    c[i * d + j] += di * (r[j] - mean[j]);
                }
            }
        }
        let denom = (self.n.max(2) - 1) as f64;
        c.iter_mut().for_each(|a| *a /= denom);
        c
    }
}

/// Ensemble of particle paths recorded on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTrajectory {
    times: Vec<f64>,
    states: Vec<Snapshot>,
    seed: u64,
    /// How per-particle random streams were derived.
    pub stream_layout: &'static str,
}

impl EnsembleTrajectory {
    pub fn new(times: Vec<f64>, states: Vec<Snapshot>, seed: u64, stream_layout: &'static str) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Dimension { what: "snapshots per time", expected: times.len(), got: states.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("ensemble times must be strictly increasing");
        }
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.len() != first.len() || s.dim() != first.dim()) {
                return invalid("particle count and dimension must be constant across time");
            }
        }
        for (k, s) in states.iter().enumerate() {
            if let Some(p) = s.rows().position(|r| r.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFinite { particle: p, time: times[k], step: k });
            }
        }
        Ok(Self { times, states, seed, stream_layout })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.states
    }

    pub fn snapshot(&self, k: usize) -> &Snapshot {
        &self.states[k]
    }

    pub fn last(&self) -> &Snapshot {
        self.states.last().expect("ensemble has at least one snapshot")
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_particles(&self) -> usize {
        self.states.first().map_or(0, Snapshot::len)
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Snapshot::dim)
    }

    /// Path of one particle as `(t, state)` pairs.
    pub fn path(&self, particle: usize) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().zip(&self.states).map(move |(t, s)| (*t, s.row(particle)))
    }
}
