use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::spd;
use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;

/// Relative slack when checking `A(x) ⪰ B·Id`.
pub const FLOOR_TOLERANCE: f64 = 1e-5;

/// Floor used when a constructor cannot certify anything larger.
pub const DEFAULT_FLOOR: f64 = 1.0 + 1e-6;

/// A measurable field of SPD matrices `A(x)` sampled at the lattice sites,
/// with `g(x)(X, X) = ⟨A(x) X, X⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    grid: PeriodicGrid,
    matrices: Vec<f64>,
    floor: f64,
    p_int: f64,
    descriptor: String,
}

impl MetricField {
    /// Validates symmetry, positive definiteness and the declared floor at
    /// every site. `p_int` is carried as metadata (`f64::INFINITY` for
    /// bounded fields).
    pub fn new(
        grid: PeriodicGrid,
        matrices: Vec<f64>,
        floor: f64,
        p_int: f64,
        descriptor: impl Into<String>,
    ) -> Result<Self> {
        let n = grid.dim();
        if matrices.len() != grid.num_sites() * n * n {
            return Err(Error::Shape(format!(
                "metric needs {} entries, got {}",
                grid.num_sites() * n * n,
                matrices.len()
            )));
        }
        if !(floor > 0.0) || !floor.is_finite() {
            return Err(Error::MetricParams(format!(
                "floor {floor} must be positive"
            )));
        }
        if !(p_int > 0.0) {
            return Err(Error::MetricParams(format!(
                "integrability exponent {p_int} must be positive"
            )));
        }
        let field = Self {
            grid,
            matrices,
            floor,
            p_int,
            descriptor: descriptor.into(),
        };
        for site in 0..grid.num_sites() {
            let a = field.matrix(site);
            spd::check_spd(&a).map_err(|e| match e {
                Error::NotSpd { reason, .. } => Error::NotSpd { site, reason },
                other => other,
            })?;
            let lmin = spd::min_eigenvalue(&a);
            if lmin < floor * (1.0 - FLOOR_TOLERANCE) {
                return Err(Error::NotSpd {
                    site,
                    reason: format!("smallest eigenvalue {lmin} below declared floor {floor}"),
                });
            }
        }
        Ok(field)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn p_int(&self) -> f64 {
        self.p_int
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn raw(&self) -> &[f64] {
        &self.matrices
    }

    pub fn matrix(&self, site: usize) -> DMatrix<f64> {
        let n = self.grid.dim();
        DMatrix::from_row_slice(n, n, &self.matrices[site * n * n..(site + 1) * n * n])
    }

    /// True when every site carries the same matrix (translation invariant).
    pub fn is_constant(&self) -> bool {
        let nn = self.grid.dim() * self.grid.dim();
        let first = &self.matrices[..nn];
        self.matrices.chunks_exact(nn).all(|m| m == first)
    }

    /// `h^n Σ_x ‖A(x)‖^p` with the spectral norm; a diagnostic, never a gate.
    pub fn empirical_norm(&self, p: f64) -> f64 {
        let h = self.grid.cell_volume();
        (0..self.grid.num_sites())
            .map(|s| spd::max_eigenvalue(&self.matrix(s)).powf(p))
            .sum::<f64>()
            * h
    }

    /// Flat binary layout: `n`, `N` as little-endian u64, then `B`, `p_int`
    /// and the row-major per-site matrices as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.matrices.len());
        out.extend_from_slice(&(self.grid.dim() as u64).to_le_bytes());
        out.extend_from_slice(&(self.grid.resolution() as u64).to_le_bytes());
        out.extend_from_slice(&self.floor.to_le_bytes());
        out.extend_from_slice(&self.p_int.to_le_bytes());
        for x in &self.matrices {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<[u8; 8]> {
            bytes
                .get(8 * i..8 * i + 8)
                .map(|b| b.try_into().expect("8-byte slice"))
                .ok_or_else(|| Error::Shape("truncated metric file".into()))
        };
        let n = u64::from_le_bytes(word(0)?) as usize;
        let res = u64::from_le_bytes(word(1)?) as usize;
        let grid = PeriodicGrid::new(n, res)?;
        let floor = f64::from_le_bytes(word(2)?);
        let p_int = f64::from_le_bytes(word(3)?);
        let count = grid.num_sites() * n * n;
        if bytes.len() != 32 + 8 * count {
            return Err(Error::Shape(format!(
                "metric body has {} bytes, expected {}",
                bytes.len() - 32,
                8 * count
            )));
        }
        let matrices = (0..count)
            .map(|i| word(4 + i).map(f64::from_le_bytes))
            .collect::<Result<_>>()?;
        Self::new(grid, matrices, floor, p_int, "binary")
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.grid.dim();
        let doc = MetricJson {
            n,
            resolution: self.grid.resolution(),
            floor: self.floor,
            p_int: self.p_int.is_finite().then_some(self.p_int),
            descriptor: self.descriptor.clone(),
            matrices: self
                .matrices
                .chunks_exact(n * n)
                .map(<[f64]>::to_vec)
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MetricJson = serde_json::from_str(text)?;
        let grid = PeriodicGrid::new(doc.n, doc.resolution)?;
        let matrices = doc.matrices.into_iter().flatten().collect();
        Self::new(
            grid,
            matrices,
            doc.floor,
            doc.p_int.unwrap_or(f64::INFINITY),
            doc.descriptor,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct MetricJson {
    n: usize,
    #[serde(rename = "N")]
    resolution: usize,
    #[serde(rename = "B")]
    floor: f64,
    p_int: Option<f64>,
    descriptor: String,
    matrices: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_field(grid: PeriodicGrid) -> Vec<f64> {
        let n = grid.dim();
        (0..grid.num_sites())
            .flat_map(|_| (0..n * n).map(move |i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }))
            .collect()
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let grid = PeriodicGrid::new(2, 4).unwrap();
        let mut m = identity_field(grid);
        m[1] = 0.5;
        assert!(matches!(
            MetricField::new(grid, m, 1.0, 2.0, "x"),
            Err(Error::NotSpd { site: 0, .. })
        ));
        let mut m = identity_field(grid);
        m[4 * 5 + 3] = -1.0;
        assert!(matches!(
            MetricField::new(grid, m, 0.5, 2.0, "x"),
            Err(Error::NotSpd { site: 5, .. })
        ));
    }

    #[test]
    fn rejects_floor_violation() {
        let grid = PeriodicGrid::new(2, 4).unwrap();
        assert!(MetricField::new(grid, identity_field(grid), 2.0, 2.0, "x").is_err());
        assert!(MetricField::new(grid, identity_field(grid), DEFAULT_FLOOR, 2.0, "x").is_ok());
    }

    #[test]
    fn binary_layout_is_bit_exact() {
        let grid = PeriodicGrid::new(1, 4).unwrap();
        let f = MetricField::new(grid, vec![1.0, 2.0, 3.0, 4.0], 1.0, f64::INFINITY, "x").unwrap();
        let bytes = f.to_bytes();
        assert_eq!(bytes.len(), 32 + 32);
        assert_eq!(&bytes[0..8], &1u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &4u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[24..32], &f64::INFINITY.to_le_bytes());
        assert_eq!(&bytes[40..48], &2.0f64.to_le_bytes());
        let back = MetricField::from_bytes(&bytes).unwrap();
        assert_eq!(back.raw(), f.raw());
        assert!(MetricField::from_bytes(&bytes[..40]).is_err());
    }

    #[test]
    fn json_carries_infinite_exponent_as_null() {
        let grid = PeriodicGrid::new(2, 4).unwrap();
        let f = MetricField::new(grid, identity_field(grid), 1.0, f64::INFINITY, "flat").unwrap();
        let text = f.to_json().unwrap();
        assert!(text.contains("\"p_int\": null"));
        let back = MetricField::from_json(&text).unwrap();
        assert_eq!(back, f);
    }
}
