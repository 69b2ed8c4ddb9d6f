//! The chi-square field: decay rates, lattice geometry and the unit-sphere
//! functionals the tail formulas integrate.
//!
//! Each of the `m` component fields `Z_k` is a product of one-dimensional
//! Ornstein–Uhlenbeck correlations, `Cov(Z_k(s), Z_k(t)) = ∏_i exp(-ρ_ki |s_i - t_i|)`.
//! Positions are in Morgans, so the rates are per Morgan.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::NormalStream;

/// Decay rates `ρ_ki` for `m` component fields over a `p`-dimensional index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CovarianceSpec {
    m: usize,
    p: usize,
    /// row-major `m × p`
    rho: Vec<f64>,
}

impl CovarianceSpec {
    /// Builds a spec from `rho[k][i]`.
    pub fn new(rho: Vec<Vec<f64>>) -> Result<Self> {
        let m = rho.len();
        if m == 0 {
            return invalid("covariance spec needs at least one component field (m >= 1)");
        }
        let p = rho[0].len();
        if p == 0 {
            return invalid("covariance spec needs at least one index dimension (p >= 1)");
        }
        let mut flat = Vec::with_capacity(m * p);
        for (k, row) in rho.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            for (i, &r) in row.iter().enumerate() {
                if !(r > 0.0) || !r.is_finite() {
                    return invalid(format!("rho[{k}][{i}] = {r} must be positive and finite"));
                }
            }
            flat.extend_from_slice(row);
        }
        Ok(Self { m, p, rho: flat })
    }

    /// The F₂ intercross field: four components with rates
    /// (2,2), (2,4), (4,2), (4,4) per Morgan.
    pub fn f2() -> Self {
        Self::new(vec![
            vec![2.0, 2.0],
            vec![2.0, 4.0],
            vec![4.0, 2.0],
            vec![4.0, 4.0],
        ])
        .expect("valid preset")
    }

    /// The backcross field: one component with rate 2 on both axes.
    pub fn bc() -> Self {
        Self::new(vec![vec![2.0, 2.0]]).expect("valid preset")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "f2" => Ok(Self::f2()),
            "bc" => Ok(Self::bc()),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected \"f2\" or \"bc\")"
            ))),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn rho(&self, k: usize, axis: usize) -> f64 {
        self.rho[k * self.p + axis]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.rho.chunks(self.p).map(<[f64]>::to_vec).collect()
    }

    /// `ρ̄_i(u) = Σ_k u_k² ρ_ki`.
    pub fn bar_rho(&self, u: &SpherePoint, axis: usize) -> Result<f64> {
        if u.dim() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: u.dim(),
            });
        }
        if axis >= self.p {
            return invalid(format!("axis {axis} out of range for p = {}", self.p));
        }
        Ok(self.bar_rho_at(u.coords(), axis))
    }

    /// [`bar_rho`](Self::bar_rho) without validation; `u.len()` must be `m`.
    #[inline]
    pub fn bar_rho_at(&self, u: &[f64], axis: usize) -> f64 {
        u.iter()
            .enumerate()
            .map(|(k, uk)| uk * uk * self.rho(k, axis))
            .sum()
    }

    /// Closed form of `E[ρ̄_1(U) ρ̄_2(U)]` for `U` uniform on the sphere,
    /// from `E[U_k⁴] = 3/(m(m+2))` and `E[U_k² U_l²] = 1/(m(m+2))`.
    pub fn sphere_moment_prod(&self) -> Result<f64> {
        if self.p != 2 {
            return Err(Error::Unsupported(format!(
                "closed-form sphere moment needs p = 2 (got p = {}); use sphere_expectation_mc",
                self.p
            )));
        }
        let m = self.m as f64;
        let col1: f64 = (0..self.m).map(|k| self.rho(k, 0)).sum();
        let col2: f64 = (0..self.m).map(|k| self.rho(k, 1)).sum();
        let cross: f64 = (0..self.m).map(|k| self.rho(k, 0) * self.rho(k, 1)).sum();
        Ok((col1 * col2 + 2.0 * cross) / (m * (m + 2.0)))
    }
}

impl TryFrom<Vec<Vec<f64>>> for CovarianceSpec {
    type Error = Error;
    fn try_from(rho: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rho)
    }
}

impl From<CovarianceSpec> for Vec<Vec<f64>> {
    fn from(spec: CovarianceSpec) -> Self {
        spec.rows()
    }
}

/// A unit vector in `ℝ^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        if coords.is_empty() || (norm - 1.0).abs() > 1e-12 {
            return invalid(format!("sphere point must have unit norm, got {norm}"));
        }
        Ok(Self { coords })
    }

    /// Normalizes a nonzero vector onto the sphere.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return invalid("cannot normalize a zero or non-finite vector");
        }
        coords.iter_mut().for_each(|x| *x /= norm);
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Surface area of the unit sphere in `ℝ^m`, `2π^{m/2} / Γ(m/2)`.
pub fn sphere_volume(m: usize) -> f64 {
    let half = m as f64 / 2.0;
    2.0 * PI.powf(half) / libm::tgamma(half)
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereEstimate {
    pub mean: f64,
    pub std_error: f64,
}

const SPHERE_CHUNK: usize = 1 << 14;

#[derive(Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }
}

/// Estimates `E[f(U)]` for `U` uniform on the unit sphere of `ℝ^m`.
///
/// Points are normalized standard Gaussian vectors. Samples are split into
/// fixed-size chunks, chunk `c` drawing from stream `c` of `seed`, and the
/// chunk moments are merged in chunk order, so the estimate does not depend
/// on the number of worker threads. For `m = 1` the sphere is `{-1, +1}`
/// and the exact average is returned with zero standard error.
///
/// Multiply by [`sphere_volume`] to turn the mean into `∫ f du`.
pub fn sphere_expectation_mc<F>(m: usize, samples: usize, seed: u64, f: F) -> Result<SphereEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if m == 0 {
        return invalid("sphere dimension m must be >= 1");
    }
    if samples < 2 {
        return invalid(format!("sphere quadrature needs at least 2 samples, got {samples}"));
    }
    if m == 1 {
        let (a, b) = (f(&[1.0]), f(&[-1.0]));
        for (v, u) in [(a, 1.0), (b, -1.0)] {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    value: v,
                    point: vec![u],
                });
            }
        }
        return Ok(SphereEstimate {
            mean: 0.5 * (a + b),
            std_error: 0.0,
        });
    }

    let chunks = samples.div_ceil(SPHERE_CHUNK);
    let partial = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = SPHERE_CHUNK.min(samples - c * SPHERE_CHUNK);
            let mut normals = NormalStream::new(seed, c as u64);
            let mut u = vec![0.0; m];
            let mut acc = Moments {
                n: 0.0,
                mean: 0.0,
                m2: 0.0,
            };
            for _ in 0..count {
                let norm = loop {
                    normals.fill(&mut u);
                    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        break norm;
                    }
                };
                u.iter_mut().for_each(|x| *x /= norm);
                let v = f(&u);
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        value: v,
                        point: u.clone(),
                    });
                }
                acc.n += 1.0;
                let delta = v - acc.mean;
                acc.mean += delta / acc.n;
                acc.m2 += delta * (v - acc.mean);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    let total = partial.into_iter().fold(
        Moments {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
        },
        Moments::merge,
    );
    let var = total.m2 / (total.n - 1.0);
    Ok(SphereEstimate {
        mean: total.mean,
        std_error: (var / total.n).sqrt(),
    })
}

/// Lattice `T = T_1 × … × T_p`; each axis starts at 0 and is strictly
/// increasing with at least two points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Lattice {
    axes: Vec<Vec<f64>>,
}

impl Lattice {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return invalid("lattice needs at least one axis");
        }
        for (i, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return invalid(format!("axis {i} needs at least two points"));
            }
            if axis[0] != 0.0 {
                return invalid(format!("axis {i} must start at 0, starts at {}", axis[0]));
            }
            if let Some(w) = axis.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
                return invalid(format!(
                    "axis {i} must be strictly increasing ({} then {})",
                    w[0], w[1]
                ));
            }
        }
        Ok(Self { axes })
    }

    /// `p` axes of `intervals + 1` equally spaced points `0, D, …, intervals·D`.
    pub fn uniform(p: usize, intervals: usize, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return invalid(format!("spacing must be positive, got {spacing}"));
        }
        let axis: Vec<f64> = (0..=intervals).map(|j| j as f64 * spacing).collect();
        Self::new(vec![axis; p])
    }

    /// Axes built by accumulating the given spacings from 0.
    pub fn from_spacings(spacings: Vec<Vec<f64>>) -> Result<Self> {
        let axes = spacings
            .into_iter()
            .map(|gaps| {
                let mut axis = Vec::with_capacity(gaps.len() + 1);
                axis.push(0.0);
                let mut pos = 0.0;
                for g in gaps {
                    pos += g;
                    axis.push(pos);
                }
                axis
            })
            .collect();
        Self::new(axes)
    }

    /// Shifts sorted positions so the first sits at 0.
    pub fn axis_from_positions(positions: &[f64]) -> Vec<f64> {
        let origin = positions.first().copied().unwrap_or(0.0);
        positions.iter().map(|x| x - origin).collect()
    }

    pub fn p(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    /// Number of intervals `n_i` on axis `i`.
    pub fn intervals(&self, i: usize) -> usize {
        self.axes[i].len() - 1
    }

    /// `D_ij = d_ij - d_i,j-1` for `j = 1..=n_i`.
    pub fn spacings(&self, i: usize) -> Vec<f64> {
        self.axes[i].windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `d_{i,n_i}`, the length of `T̃_i`.
    pub fn extent(&self, i: usize) -> f64 {
        *self.axes[i].last().expect("axes are non-empty")
    }

    /// `|T̃| = ∏_i d_{i,n_i}`.
    pub fn volume(&self) -> f64 {
        (0..self.p()).map(|i| self.extent(i)).product()
    }

    pub fn mean_spacing(&self, i: usize) -> f64 {
        self.extent(i) / self.intervals(i) as f64
    }

    /// Largest over smallest spacing on axis `i`.
    pub fn spacing_ratio(&self, i: usize) -> f64 {
        let gaps = self.spacings(i);
        let max = gaps.iter().cloned().fold(f64::MIN, f64::max);
        let min = gaps.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    /// `Σ_j √D_ij`.
    pub fn sqrt_spacing_sum(&self, i: usize) -> f64 {
        self.spacings(i).iter().map(|d| d.sqrt()).sum()
    }

    pub fn point_count(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Lattice {
    type Error = Error;
    fn try_from(axes: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(axes)
    }
}

impl From<Lattice> for Vec<Vec<f64>> {
    fn from(l: Lattice) -> Self {
        l.axes
    }
}

/// How a configuration file describes lattice axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxesConfig {
    /// Explicit positions per axis.
    Positions(Vec<Vec<f64>>),
    /// Every axis `0, D, …, extent`.
    Uniform { extent: f64, spacing: f64 },
    /// Every axis built by cycling through `pattern` spacings until `extent`.
    Pattern { extent: f64, pattern: Vec<f64> },
}

/// Field configuration file: either a named preset or explicit `m`, `p`,
/// `rho`, plus the lattice axes.
///
/// ```json
/// {"m": 1, "p": 2, "rho": [[2, 2]], "axes": {"extent": 1.0, "spacing": 0.01}}
/// {"preset": "f2", "axes": [[0, 0.01, 0.02], [0, 0.05, 0.1]]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<Vec<f64>>>,
    pub axes: AxesConfig,
}

impl FieldConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Resolves the configuration into a validated spec and lattice.
    pub fn build(&self) -> Result<(CovarianceSpec, Lattice)> {
        let spec = match (&self.preset, &self.rho) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either \"preset\" or \"rho\", not both".into()))
            }
            (Some(name), None) => CovarianceSpec::preset(name)?,
            (None, Some(rho)) => CovarianceSpec::new(rho.clone())
                .map_err(|e| Error::Config(format!("field \"rho\": {e}")))?,
            (None, None) => return Err(Error::Config("missing \"preset\" or \"rho\"".into())),
        };
        if let Some(m) = self.m {
            if m != spec.m() {
                return Err(Error::Config(format!(
                    "field \"m\" = {m} disagrees with rho ({} rows)",
                    spec.m()
                )));
            }
        }
        if let Some(p) = self.p {
            if p != spec.p() {
                return Err(Error::Config(format!(
                    "field \"p\" = {p} disagrees with rho ({} columns)",
                    spec.p()
                )));
            }
        }
        let p = spec.p();
        let lattice = match &self.axes {
            AxesConfig::Positions(axes) => Lattice::new(axes.clone()),
            AxesConfig::Uniform { extent, spacing } => {
                if !(*spacing > 0.0) || !(*extent > 0.0) {
                    return Err(Error::Config("field \"axes\": extent and spacing must be positive".into()));
                }
                let intervals = (extent / spacing).round() as usize;
                if ((intervals as f64) * spacing - extent).abs() > 1e-9 * extent {
                    return Err(Error::Config(format!(
                        "field \"axes\": extent {extent} is not a multiple of spacing {spacing}"
                    )));
                }
                Lattice::uniform(p, intervals, *spacing)
            }
            AxesConfig::Pattern { extent, pattern } => {
                Lattice::from_spacings(vec![cycle_pattern(pattern, *extent)?; p])
            }
        }
        .map_err(|e| Error::Config(format!("field \"axes\": {e}")))?;
        if lattice.p() != p {
            return Err(Error::Config(format!(
                "field \"axes\": {} axes given but the field has p = {p}",
                lattice.p()
            )));
        }
        Ok((spec, lattice))
    }
}

/// Repeats `pattern` until the accumulated length reaches `extent`.
pub fn cycle_pattern(pattern: &[f64], extent: f64) -> Result<Vec<f64>> {
    if pattern.is_empty() || pattern.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Config("spacing pattern must be non-empty and positive".into()));
    }
    let mut gaps = Vec::new();
    let mut pos = 0.0;
    let tol = 1e-9 * extent.max(1.0);
    while pos < extent - tol {
        let d = pattern[gaps.len() % pattern.len()];
        gaps.push(d);
        pos += d;
    }
    if (pos - extent).abs() > tol {
        return Err(Error::Config(format!(
            "spacing pattern does not tile extent {extent} (overshoots to {pos})"
        )));
    }
    Ok(gaps)
}
