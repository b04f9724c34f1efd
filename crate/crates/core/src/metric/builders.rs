//! Constructors for metric fields, and a name-keyed registry over them.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::{MetricField, DEFAULT_FLOOR};
use super::spd;
use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;

/// Subtracted from the critical exponent `n/β` when a conformal metric is
/// built without an explicit `p_int`.
pub const P_INT_MARGIN: f64 = 1e-3;

/// `β p_int / n` for the singularities of [`random_rough_metric`].
pub const ROUGH_STRENGTH: f64 = 0.75;

fn isotropic(grid: PeriodicGrid, mut scale: impl FnMut(usize) -> f64) -> Vec<f64> {
    let n = grid.dim();
    let mut out = vec![0.0; grid.num_sites() * n * n];
    for site in 0..grid.num_sites() {
        let s = scale(site);
        for i in 0..n {
            out[site * n * n + i * (n + 1)] = s;
        }
    }
    out
}

pub fn flat_metric(grid: PeriodicGrid) -> MetricField {
    MetricField::new(grid, isotropic(grid, |_| 1.0), 1.0, f64::INFINITY, "flat")
        .expect("identity is SPD")
}

/// Constant metric `c·Id`.
pub fn scaled_metric(grid: PeriodicGrid, c: f64) -> Result<MetricField> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::MetricParams(format!("scale {c} must be positive")));
    }
    MetricField::new(
        grid,
        isotropic(grid, |_| c),
        c,
        f64::INFINITY,
        format!("scaled({c})"),
    )
}

/// Periodic distance between two points of the unit torus.
pub fn torus_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = (a - b).rem_euclid(1.0);
            let d = d.min(1.0 - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `|x − x0|^{−β}` with the distance clamped below at `h/2`.
fn clamped_profile(grid: &PeriodicGrid, x: &[f64], center: &[f64], beta: f64) -> f64 {
    torus_distance(x, center)
        .max(grid.spacing() / 2.0)
        .powf(-beta)
}

/// `A(x) = max(B, |x − x0|^{−β})·Id`. Without `p_int` the exponent
/// `n/β − P_INT_MARGIN` is declared; an explicit `p_int` must satisfy
/// `β p_int < n`. `β = 0` gives the constant metric `max(B, 1)·Id`.
pub fn conformal_singular_metric(
    grid: PeriodicGrid,
    center: &[f64],
    beta: f64,
    floor: f64,
    p_int: Option<f64>,
) -> Result<MetricField> {
    let n = grid.dim();
    if center.len() != n {
        return Err(Error::MetricParams(format!(
            "center has {} coordinates, expected {n}",
            center.len()
        )));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::MetricParams(format!(
            "β = {beta} must be non-negative"
        )));
    }
    if !(floor > 0.0) {
        return Err(Error::MetricParams(format!(
            "floor {floor} must be positive"
        )));
    }
    let nf = n as f64;
    let p_int = match p_int {
        Some(p) if beta * p >= nf => {
            return Err(Error::MetricParams(format!(
                "β·p_int = {} ≥ n = {n}: profile not in L^p_int",
                beta * p
            )))
        }
        Some(p) => p,
        None if beta == 0.0 => f64::INFINITY,
        None => nf / beta - P_INT_MARGIN,
    };
    let values = isotropic(grid, |site| {
        let x = grid.position(site);
        floor.max(clamped_profile(&grid, &x[..n], center, beta))
    });
    MetricField::new(
        grid,
        values,
        floor,
        p_int,
        format!("conformal(beta={beta})"),
    )
}

/// One transition-derivative field `ψ`: row-major `n×n` samples per site,
/// zero wherever `support` is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionField {
    pub values: Vec<f64>,
    pub support: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionData {
    fields: Vec<TransitionField>,
}

impl TransitionData {
    pub fn new(grid: &PeriodicGrid, fields: Vec<TransitionField>) -> Result<Self> {
        let n = grid.dim();
        for (j, f) in fields.iter().enumerate() {
            if f.values.len() != grid.num_sites() * n * n || f.support.len() != grid.num_sites() {
                return Err(Error::Shape(format!(
                    "transition field {j} has the wrong length"
                )));
            }
            if f.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::MetricParams(format!(
                    "transition field {j} has non-finite entries"
                )));
            }
        }
        Ok(Self { fields })
    }

    pub fn empty() -> Self {
        Self { fields: Vec::new() }
    }

    pub fn fields(&self) -> &[TransitionField] {
        &self.fields
    }

    /// `count` fields, each supported on a random box and varying inside it;
    /// the jump across the box boundary makes the resulting metric rough.
    pub fn synthetic(grid: &PeriodicGrid, count: usize, amplitude: f64, seed: u64) -> Result<Self> {
        let n = grid.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fields = Vec::with_capacity(count);
        for _ in 0..count {
            let center: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let half: Vec<f64> = (0..n).map(|_| rng.gen_range(0.15..0.35)).collect();
            let r0: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r1: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let freq: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=3) as f64).collect();
            let mut values = vec![0.0; grid.num_sites() * n * n];
            let mut support = vec![false; grid.num_sites()];
            for site in 0..grid.num_sites() {
                let x = grid.position(site);
                let inside = (0..n).all(|i| {
                    let d = (x[i] - center[i]).rem_euclid(1.0);
                    d.min(1.0 - d) <= half[i]
                });
                if !inside {
                    continue;
                }
                support[site] = true;
                let wave = (2.0 * PI * (0..n).map(|i| freq[i] * x[i]).sum::<f64>()).sin();
                for e in 0..n * n {
                    values[site * n * n + e] = amplitude * (r0[e] + 0.5 * wave * r1[e]);
                }
            }
            fields.push(TransitionField { values, support });
        }
        Self::new(grid, fields)
    }
}

/// `A(x) = Id + Σ_j ψ_j(x)ᵀ ψ_j(x)`.
pub fn metric_from_transitions(grid: PeriodicGrid, data: &TransitionData) -> Result<MetricField> {
    let n = grid.dim();
    let nn = n * n;
    let mut values = isotropic(grid, |_| 1.0);
    for field in data.fields() {
        if field.values.len() != grid.num_sites() * nn || field.support.len() != grid.num_sites() {
            return Err(Error::Shape(
                "transition data does not match the grid".into(),
            ));
        }
        for site in 0..grid.num_sites() {
            if !field.support[site] {
                continue;
            }
            let psi = &field.values[site * nn..(site + 1) * nn];
            let a = &mut values[site * nn..(site + 1) * nn];
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] += (0..n).map(|r| psi[r * n + i] * psi[r * n + j]).sum::<f64>();
                }
            }
        }
    }
    for site in 0..grid.num_sites() {
        let a = &mut values[site * nn..(site + 1) * nn];
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (a[i * n + j] + a[j * n + i]);
                a[i * n + j] = s;
                a[j * n + i] = s;
            }
        }
    }
    MetricField::new(
        grid,
        values,
        DEFAULT_FLOOR,
        f64::INFINITY,
        format!("transitions({})", data.fields().len()),
    )
}

/// Reproducible rough metric: a conformal factor with a few cut-off
/// singularities of strength `β = ROUGH_STRENGTH · n / p_int`, so `‖A‖ ∈ L^{p_int}` while
/// `‖A‖^{2 p_int}` sums blow up under refinement, times a smooth random
/// anisotropy `Id + Σ v vᵀ`.
pub fn random_rough_metric(grid: PeriodicGrid, p_int: f64, seed: u64) -> Result<MetricField> {
    if !(p_int > 1.0) || !p_int.is_finite() {
        return Err(Error::MetricParams(format!(
            "p_int = {p_int} must exceed 1"
        )));
    }
    let n = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = ROUGH_STRENGTH * n as f64 / p_int;
    // (center, cut-off radius R): each factor is max(1, (R/r)^β)
    let singularities: Vec<(Vec<f64>, f64)> = (0..3)
        .map(|_| {
            (
                (0..n).map(|_| rng.gen::<f64>()).collect(),
                rng.gen_range(0.2..0.4),
            )
        })
        .collect();
    // Smooth vector fields v_j(x) = c_j sin(2π k_j·x + φ_j).
    let waves: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..n)
        .map(|_| {
            let c = (0..n).map(|_| rng.gen_range(-0.7..0.7)).collect();
            let k = (0..n).map(|_| rng.gen_range(-2..=2) as f64).collect();
            (c, k, rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let mut values = vec![0.0; grid.num_sites() * n * n];
    for site in 0..grid.num_sites() {
        let x = grid.position(site);
        let x = &x[..n];
        let phi = DEFAULT_FLOOR
            * singularities
                .iter()
                .map(|(c, r)| (r.powf(beta) * clamped_profile(&grid, x, c, beta)).max(1.0))
                .product::<f64>();
        let mut a = DMatrix::<f64>::identity(n, n);
        for (c, k, ph) in &waves {
            let s = (2.0 * PI * k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + ph).sin();
            let v = nalgebra::DVector::from_iterator(n, c.iter().map(|ci| ci * s));
            a += &v * v.transpose();
        }
        a *= phi;
        values[site * n * n..(site + 1) * n * n].copy_from_slice(a.transpose().as_slice());
    }
    MetricField::new(
        grid,
        values,
        DEFAULT_FLOOR,
        p_int,
        format!("random(p_int={p_int}, seed={seed})"),
    )
}

/// Pointwise geometric mean path; `p_int` follows `1/p(t) = (1−t)/p₀ + t/p₁`.
pub fn interpolate_metrics(g0: &MetricField, g1: &MetricField, t: f64) -> Result<MetricField> {
    if g0.grid() != g1.grid() {
        return Err(Error::Shape("metrics live on different grids".into()));
    }
    let grid = *g0.grid();
    let n = grid.dim();
    let mut values = Vec::with_capacity(g0.raw().len());
    for site in 0..grid.num_sites() {
        let m = spd::geometric_mean(&g0.matrix(site), &g1.matrix(site), t)?;
        // row-major copy; the mean is symmetric so the layout is immaterial
        values.extend((0..n * n).map(|e| m[(e / n, e % n)]));
    }
    let p_int = 1.0 / ((1.0 - t) / g0.p_int() + t / g1.p_int());
    MetricField::new(
        grid,
        values,
        g0.floor().min(g1.floor()),
        p_int,
        format!("interp(t={t})"),
    )
}

/// Serializable description of a metric, as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSpec {
    pub kind: String,
    pub beta: Option<f64>,
    pub center: Option<Vec<f64>>,
    pub p_int: Option<f64>,
    pub seed: Option<u64>,
    #[serde(rename = "B")]
    pub floor: Option<f64>,
    pub scale: Option<f64>,
    pub count: Option<usize>,
    pub amplitude: Option<f64>,
}

impl MetricSpec {
    pub fn flat() -> Self {
        Self {
            kind: "flat".into(),
            ..Default::default()
        }
    }
}

pub trait MetricBuilder: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, grid: PeriodicGrid, spec: &MetricSpec) -> Result<MetricField>;
}

struct Flat;
struct Scaled;
struct Conformal;
struct Transitions;
struct RandomRough;

impl MetricBuilder for Flat {
    fn name(&self) -> &'static str {
        "flat"
    }
    fn build(&self, grid: PeriodicGrid, _: &MetricSpec) -> Result<MetricField> {
        Ok(flat_metric(grid))
    }
}

impl MetricBuilder for Scaled {
    fn name(&self) -> &'static str {
        "scaled"
    }
    fn build(&self, grid: PeriodicGrid, spec: &MetricSpec) -> Result<MetricField> {
        scaled_metric(grid, spec.scale.unwrap_or(1.0))
    }
}

impl MetricBuilder for Conformal {
    fn name(&self) -> &'static str {
        "conformal"
    }
    fn build(&self, grid: PeriodicGrid, spec: &MetricSpec) -> Result<MetricField> {
        let beta = spec
            .beta
            .ok_or_else(|| Error::MetricParams("conformal metric needs beta".into()))?;
        let center = spec.center.clone().unwrap_or_else(|| vec![0.5; grid.dim()]);
        conformal_singular_metric(
            grid,
            &center,
            beta,
            spec.floor.unwrap_or(DEFAULT_FLOOR),
            spec.p_int,
        )
    }
}

impl MetricBuilder for Transitions {
    fn name(&self) -> &'static str {
        "transitions"
    }
    fn build(&self, grid: PeriodicGrid, spec: &MetricSpec) -> Result<MetricField> {
        let data = TransitionData::synthetic(
            &grid,
            spec.count.unwrap_or(3),
            spec.amplitude.unwrap_or(1.0),
            spec.seed.unwrap_or(0),
        )?;
        metric_from_transitions(grid, &data)
    }
}

impl MetricBuilder for RandomRough {
    fn name(&self) -> &'static str {
        "random"
    }
    fn build(&self, grid: PeriodicGrid, spec: &MetricSpec) -> Result<MetricField> {
        let p = spec
            .p_int
            .ok_or_else(|| Error::MetricParams("random metric needs p_int".into()))?;
        random_rough_metric(grid, p, spec.seed.unwrap_or(0))
    }
}

pub struct MetricRegistry {
    builders: BTreeMap<&'static str, Box<dyn MetricBuilder>>,
}

impl MetricRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Flat));
        r.register(Box::new(Scaled));
        r.register(Box::new(Conformal));
        r.register(Box::new(Transitions));
        r.register(Box::new(RandomRough));
        r
    }

    pub fn register(&mut self, builder: Box<dyn MetricBuilder>) {
        self.builders.insert(builder.name(), builder);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }

    pub fn build(&self, grid: PeriodicGrid, spec: &MetricSpec) -> Result<MetricField> {
        let builder = self.builders.get(spec.kind.as_str()).ok_or_else(|| {
            Error::MetricParams(format!(
                "unknown metric kind `{}` (known: {})",
                spec.kind,
                self.names().join(", ")
            ))
        })?;
        builder.build(grid, spec)
    }
}

impl Default for MetricRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
