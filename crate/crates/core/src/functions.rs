//! Smooth periodic test functions with exact derivatives.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::grid::{PeriodicGrid, MAX_DIM};

/// `f(x) = c + Σ_j a_j cos(2π k_j·x) + b_j sin(2π k_j·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    pub dim: usize,
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: Vec<i32>,
    pub cos: f64,
    pub sin: f64,
}

impl TrigPolynomial {
    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            dim,
            constant: c,
            terms: Vec::new(),
        }
    }

    /// `sin(2π x_axis)`.
    pub fn sine(dim: usize, axis: usize) -> Self {
        let mut freq = vec![0; dim];
        freq[axis] = 1;
        Self {
            dim,
            constant: 0.0,
            terms: vec![TrigTerm {
                freq,
                cos: 0.0,
                sin: 1.0,
            }],
        }
    }

    /// Random low-frequency polynomial with `count` terms, frequencies in
    /// `[-max_freq, max_freq]^n`, coefficients uniform in `[-1, 1]`.
    pub fn random(dim: usize, count: usize, max_freq: i32, rng: &mut impl Rng) -> Self {
        let terms = (0..count)
            .map(|_| {
                let mut freq: Vec<i32> = (0..dim)
                    .map(|_| rng.gen_range(-max_freq..=max_freq))
                    .collect();
                if freq.iter().all(|&f| f == 0) {
                    freq[0] = 1;
                }
                TrigTerm {
                    freq,
                    cos: rng.gen_range(-1.0..1.0),
                    sin: rng.gen_range(-1.0..1.0),
                }
            })
            .collect();
        Self {
            dim,
            constant: rng.gen_range(-1.0..1.0),
            terms,
        }
    }

    fn phase(&self, t: &TrigTerm, x: &[f64]) -> f64 {
        2.0 * PI
            * t.freq
                .iter()
                .zip(x)
                .map(|(&k, &xi)| k as f64 * xi)
                .sum::<f64>()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|t| {
                    let p = self.phase(t, x);
                    t.cos * p.cos() + t.sin * p.sin()
                })
                .sum::<f64>()
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut g = [0.0; MAX_DIM];
        for t in &self.terms {
            let p = self.phase(t, x);
            let s = -t.cos * p.sin() + t.sin * p.cos();
            for (i, &k) in t.freq.iter().enumerate() {
                g[i] += 2.0 * PI * k as f64 * s;
            }
        }
        g
    }

    /// Upper bound on the operator norm of the Hessian.
    pub fn hessian_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let k2: f64 = t.freq.iter().map(|&k| (2.0 * PI * k as f64).powi(2)).sum();
                k2 * t.cos.hypot(t.sin)
            })
            .sum()
    }

    pub fn sample(&self, grid: &PeriodicGrid) -> Vec<f64> {
        (0..grid.num_sites())
            .map(|s| self.value(&grid.position(s)[..grid.dim()]))
            .collect()
    }

    /// `max |∇f|` over the lattice refined twice per axis.
    pub fn max_gradient(&self, grid: &PeriodicGrid) -> f64 {
        let fine = PeriodicGrid::new(grid.dim(), 2 * grid.resolution()).expect("refined grid");
        (0..fine.num_sites())
            .map(|s| {
                let g = self.gradient(&fine.position(s)[..grid.dim()]);
                g.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}
