//! The periodic lattice discretizing the unit torus `R^n / Z^n`.
//!
//! Sites are indexed in row-major order with axis 0 varying fastest.
//! A degree-`k` multi-index is stored as a bitmask over the axes; the
//! components of a `k`-form are ordered lexicographically by their sorted
//! axis lists, so `(0,1) < (0,2) < (1,2)` for `n = 3, k = 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;
pub const MIN_RESOLUTION: usize = 4;

/// Increasing multi-index `I ⊂ {0, .., n-1}` as a bitmask.
pub type MultiIndex = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    dim: usize,
    resolution: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Grid(format!(
                "dimension {dim} not in [1, {MAX_DIM}]"
            )));
        }
        if resolution < MIN_RESOLUTION {
            return Err(Error::Grid(format!(
                "resolution {resolution} below minimum {MIN_RESOLUTION}"
            )));
        }
        Ok(Self { dim, resolution })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    /// Volume `h^n` of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn middle_degree(&self) -> usize {
        self.dim / 2
    }

    pub fn num_sites(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    pub fn num_components(&self, degree: usize) -> usize {
        binomial(self.dim, degree)
    }

    /// Unknowns of a degree-`k` field: `N^n · C(n,k)`.
    pub fn field_len(&self, degree: usize) -> usize {
        self.num_sites() * self.num_components(degree)
    }

    pub fn check_degree(&self, degree: usize) -> Result<()> {
        if degree > self.dim {
            return Err(Error::Degree {
                degree,
                dim: self.dim,
            });
        }
        Ok(())
    }

    pub fn coords(&self, site: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        let mut rest = site;
        for slot in c.iter_mut().take(self.dim) {
            *slot = rest % self.resolution;
            rest /= self.resolution;
        }
        c
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .take(self.dim)
            .rev()
            .fold(0, |acc, &c| acc * self.resolution + c % self.resolution)
    }

    /// Neighbour of `site` displaced by `+1` along `axis`, periodically.
    pub fn forward(&self, site: usize, axis: usize) -> usize {
        let stride = self.resolution.pow(axis as u32);
        let c = (site / stride) % self.resolution;
        if c + 1 == self.resolution {
            site + stride - self.resolution * stride
        } else {
            site + stride
        }
    }

    /// Neighbour displaced by the unit vector sum `Σ_{i∈I} e_i`.
    pub fn forward_by(&self, site: usize, shift: MultiIndex) -> usize {
        (0..self.dim)
            .filter(|&i| shift & (1 << i) != 0)
            .fold(site, |s, i| self.forward(s, i))
    }

    /// Physical position of a site on the unit torus.
    pub fn position(&self, site: usize) -> [f64; MAX_DIM] {
        let c = self.coords(site);
        let h = self.spacing();
        let mut x = [0.0; MAX_DIM];
        for i in 0..self.dim {
            x[i] = c[i] as f64 * h;
        }
        x
    }

    /// Signed integer frequency of the `c`-th DFT bin, in `[-N/2, N/2)`.
    pub fn frequency(&self, c: usize) -> i64 {
        let n = self.resolution as i64;
        let c = c as i64;
        if c < (n + 1) / 2 {
            c
        } else {
            c - n
        }
    }

    pub fn basis(&self, degree: usize) -> Vec<MultiIndex> {
        multi_indices(self.dim, degree)
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// All increasing `k`-subsets of `{0..n-1}` in lexicographic order.
pub fn multi_indices(n: usize, k: usize) -> Vec<MultiIndex> {
    fn rec(start: usize, n: usize, k: usize, cur: MultiIndex, out: &mut Vec<MultiIndex>) {
        if k == 0 {
            out.push(cur);
            return;
        }
        for i in start..n {
            rec(i + 1, n, k - 1, cur | (1 << i), out);
        }
    }
    let mut out = Vec::with_capacity(binomial(n, k));
    if k <= n {
        rec(0, n, k, 0, &mut out);
    }
    out
}

pub fn degree_of(index: MultiIndex) -> usize {
    index.count_ones() as usize
}

pub fn full_index(n: usize) -> MultiIndex {
    ((1u16 << n) - 1) as MultiIndex
}

/// Position of `index` in the lexicographic basis of its degree.
pub fn component_of(n: usize, index: MultiIndex) -> usize {
    multi_indices(n, degree_of(index))
        .iter()
        .position(|&m| m == index)
        .expect("multi-index within dimension")
}

/// Sign `(-1)^{#{j ∈ I : j < i}}` of moving `dx_i` past `dx_I`, i.e.
/// `dx_i ∧ dx_I = sign · dx_{I ∪ {i}}`. Zero if `i ∈ I`.
pub fn insertion_sign(i: usize, index: MultiIndex) -> f64 {
    if index & (1 << i) != 0 {
        return 0.0;
    }
    let below = (index & ((1u16 << i) - 1) as u8).count_ones();
    if below % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign of `dx_I ∧ dx_J = sign · dx_{I ∪ J}` for disjoint `I`, `J`.
pub fn wedge_sign(a: MultiIndex, b: MultiIndex) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    // count pairs (i ∈ a, j ∈ b) with j < i
    let mut inversions = 0u32;
    for i in 0..8 {
        if a & (1 << i) != 0 {
            inversions += (b & ((1u16 << i) - 1) as u8).count_ones();
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
