//! Exact simulation of the product-OU chi-square field on a lattice.
//!
//! Each component `Z_k` is generated by the spatial autoregression
//!
//! ```text
//! Z(0,0) = ε(0,0)
//! Z(i,0) = α_i Z(i-1,0) + √(1-α_i²) ε(i,0)
//! Z(0,j) = β_j Z(0,j-1) + √(1-β_j²) ε(0,j)
//! Z(i,j) = α_i Z(i-1,j) + β_j Z(i,j-1) - α_i β_j Z(i-1,j-1)
//!          + √((1-α_i²)(1-β_j²)) ε(i,j)
//! ```
//!
//! with `α_i = exp(-ρ_k1 D_1i)` and `β_j = exp(-ρ_k2 D_2j)`. The result has unit
//! variance and covariance `∏_i exp(-ρ_ki |h_i|)` exactly. Rows are produced
//! one at a time, so a replicate needs `O(m · n_2)` memory.
//!
//! The noise `ε` for replicate `r` and component `k` is stream `r·m + k` of the
//! plan seed, consumed in row-major lattice order.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field_model::{CovarianceSpec, Lattice};
use crate::rng::NormalStream;

/// Autoregressive coefficients along one axis for one component.
///
/// `alpha[0] = 0` and `sigma[0] = 1`; for `j ≥ 1`, `alpha[j] = exp(-ρ D_j)` and
/// `sigma[j] = √(1 - alpha[j]²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArCoefficients {
    pub alpha: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl ArCoefficients {
    pub fn new(rate: f64, axis: &[f64]) -> Self {
        let mut alpha = vec![0.0; axis.len()];
        let mut sigma = vec![1.0; axis.len()];
        for j in 1..axis.len() {
            let x = rate * (axis[j] - axis[j - 1]);
            alpha[j] = (-x).exp();
            sigma[j] = (-(-2.0 * x).exp_m1()).sqrt();
        }
        Self { alpha, sigma }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// One-dimensional AR(1) with unit stationary variance.
pub fn ar_recursion_1d(c: &ArCoefficients, eps: &[f64], out: &mut [f64]) {
    assert_eq!(eps.len(), c.len());
    assert_eq!(out.len(), c.len());
    out[0] = eps[0];
    for j in 1..c.len() {
        out[j] = c.alpha[j] * out[j - 1] + c.sigma[j] * eps[j];
    }
}

/// Computes row `i` of the two-dimensional recursion from row `i - 1`.
#[inline]
fn ar_row_step(i: usize, a: &ArCoefficients, b: &ArCoefficients, prev: &[f64], eps: &[f64], row: &mut [f64]) {
    if i == 0 {
        row[0] = eps[0];
        for j in 1..b.len() {
            row[j] = b.alpha[j] * row[j - 1] + b.sigma[j] * eps[j];
        }
    } else {
        let (ai, si) = (a.alpha[i], a.sigma[i]);
        row[0] = ai * prev[0] + si * eps[0];
        for j in 1..b.len() {
            let bj = b.alpha[j];
            row[j] = ai * prev[j] + bj * row[j - 1] - ai * bj * prev[j - 1] + si * b.sigma[j] * eps[j];
        }
    }
}

/// The two-dimensional recursion over a full `(n_1+1) × (n_2+1)` row-major field.
pub fn ar_recursion_2d(a: &ArCoefficients, b: &ArCoefficients, eps: &[f64], out: &mut [f64]) {
    let cols = b.len();
    assert_eq!(eps.len(), a.len() * cols);
    assert_eq!(out.len(), a.len() * cols);
    for i in 0..a.len() {
        let (done, rest) = out.split_at_mut(i * cols);
        let prev = if i == 0 { &[][..] } else { &done[(i - 1) * cols..] };
        ar_row_step(i, a, b, prev, &eps[i * cols..(i + 1) * cols], &mut rest[..cols]);
    }
}

/// Applies the one-dimensional recursion along every axis of a row-major
/// array in turn. Starting from white noise this yields the product
/// covariance for any number of axes.
pub fn separable_filter(coefs: &[ArCoefficients], values: &mut [f64]) {
    let shape: Vec<usize> = coefs.iter().map(ArCoefficients::len).collect();
    assert_eq!(values.len(), shape.iter().product::<usize>());
    for (axis, c) in coefs.iter().enumerate() {
        let stride: usize = shape[axis + 1..].iter().product();
        let n = shape[axis];
        let outer = values.len() / (stride * n);
        for o in 0..outer {
            let base = o * stride * n;
            for s in 0..stride {
                for j in 1..n {
                    let at = base + j * stride + s;
                    values[at] = c.alpha[j] * values[at - stride] + c.sigma[j] * values[at];
                }
            }
        }
    }
}

fn coefficients(spec: &CovarianceSpec, lattice: &Lattice) -> Result<Vec<Vec<ArCoefficients>>> {
    if spec.p() != lattice.p() {
        return Err(Error::DimensionMismatch {
            expected: spec.p(),
            found: lattice.p(),
        });
    }
    Ok((0..spec.m())
        .map(|k| {
            (0..spec.p())
                .map(|i| ArCoefficients::new(spec.rho(k, i), lattice.axis(i)))
                .collect()
        })
        .collect())
}

fn noise(seed: u64, replicate: u64, m: usize, k: usize) -> NormalStream {
    NormalStream::new(seed, replicate * m as u64 + k as u64)
}

/// Full component fields `Z_1 … Z_m` of one replicate, each row-major over the lattice.
pub fn simulate_components(spec: &CovarianceSpec, lattice: &Lattice, seed: u64, replicate: u64) -> Result<Vec<Vec<f64>>> {
    let coefs = coefficients(spec, lattice)?;
    let points = lattice.point_count();
    Ok(coefs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let mut eps = vec![0.0; points];
            noise(seed, replicate, spec.m(), k).fill(&mut eps);
            match c.len() {
                1 => {
                    let mut out = vec![0.0; points];
                    ar_recursion_1d(&c[0], &eps, &mut out);
                    out
                }
                2 => {
                    let mut out = vec![0.0; points];
                    ar_recursion_2d(&c[0], &c[1], &eps, &mut out);
                    out
                }
                _ => {
                    separable_filter(c, &mut eps);
                    eps
                }
            }
        })
        .collect())
}

/// Reusable per-thread buffers for [`simulate_field`].
struct Workspace {
    prev: Vec<Vec<f64>>,
    row: Vec<Vec<f64>>,
    eps: Vec<f64>,
    y2: Vec<f64>,
}

impl Workspace {
    fn new(m: usize, cols: usize) -> Self {
        Self {
            prev: vec![vec![0.0; cols]; m],
            row: vec![vec![0.0; cols]; m],
            eps: vec![0.0; cols],
            y2: vec![0.0; cols],
        }
    }
}

fn max_y2_2d(coefs: &[Vec<ArCoefficients>], seed: u64, replicate: u64, ws: &mut Workspace) -> f64 {
    let m = coefs.len();
    let rows = coefs[0][0].len();
    let mut streams: Vec<NormalStream> = (0..m).map(|k| noise(seed, replicate, m, k)).collect();
    let mut best = f64::NEG_INFINITY;
    for i in 0..rows {
        ws.y2.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..m {
            streams[k].fill(&mut ws.eps);
            ar_row_step(i, &coefs[k][0], &coefs[k][1], &ws.prev[k], &ws.eps, &mut ws.row[k]);
            for (acc, z) in ws.y2.iter_mut().zip(&ws.row[k]) {
                *acc += z * z;
            }
        }
        std::mem::swap(&mut ws.prev, &mut ws.row);
        best = ws.y2.iter().cloned().fold(best, f64::max);
    }
    best
}

fn max_y2_general(spec: &CovarianceSpec, lattice: &Lattice, seed: u64, replicate: u64) -> Result<f64> {
    let fields = simulate_components(spec, lattice, seed, replicate)?;
    let mut y2 = vec![0.0; lattice.point_count()];
    for z in &fields {
        for (acc, v) in y2.iter_mut().zip(z) {
            *acc += v * v;
        }
    }
    Ok(y2.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `max_t Σ_k Z_k(t)²` for one replicate.
pub fn simulate_field(spec: &CovarianceSpec, lattice: &Lattice, seed: u64, replicate: u64) -> Result<f64> {
    if spec.p() == 2 && lattice.p() == 2 {
        let coefs = coefficients(spec, lattice)?;
        let mut ws = Workspace::new(spec.m(), lattice.axis(1).len());
        Ok(max_y2_2d(&coefs, seed, replicate, &mut ws))
    } else {
        max_y2_general(spec, lattice, seed, replicate)
    }
}

#[derive(Debug, Clone)]
pub struct SimPlan {
    pub spec: CovarianceSpec,
    pub lattice: Lattice,
    pub replicates: usize,
    pub seed: u64,
    /// Thresholds on the chi scale, strictly increasing.
    pub b_grid: Vec<f64>,
    pub keep_maxima: bool,
}

impl SimPlan {
    pub fn new(spec: CovarianceSpec, lattice: Lattice, replicates: usize, seed: u64, b_grid: Vec<f64>) -> Self {
        Self {
            spec,
            lattice,
            replicates,
            seed,
            b_grid,
            keep_maxima: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return invalid("need at least one replicate");
        }
        if self.b_grid.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
            return invalid("thresholds must be non-negative and finite");
        }
        if self.b_grid.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("b grid must be strictly increasing");
        }
        if self.spec.p() != self.lattice.p() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.p(),
                found: self.lattice.p(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailPoint {
    pub b: f64,
    pub count: usize,
    pub prob: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalTail {
    pub replicates: usize,
    pub seed: u64,
    pub points: Vec<TailPoint>,
    /// Per-replicate maxima of `Y²` in replicate order, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maxima: Option<Vec<f64>>,
}

impl EmpiricalTail {
    /// Tail estimates on `b_grid` from per-replicate maxima of `Y²`.
    pub fn from_maxima(maxima: &[f64], b_grid: &[f64]) -> Vec<TailPoint> {
        let mut sorted = maxima.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        b_grid
            .iter()
            .map(|&b| {
                let count = sorted.len() - sorted.partition_point(|&y| y < b * b);
                let prob = count as f64 / n;
                TailPoint {
                    b,
                    count,
                    prob,
                    std_error: (prob * (1.0 - prob) / n).sqrt(),
                }
            })
            .collect()
    }
}

/// Per-replicate maxima of `Y²`, in replicate order.
pub fn simulate_maxima(spec: &CovarianceSpec, lattice: &Lattice, replicates: usize, seed: u64) -> Result<Vec<f64>> {
    if spec.p() == 2 && lattice.p() == 2 {
        let coefs = coefficients(spec, lattice)?;
        let cols = lattice.axis(1).len();
        Ok((0..replicates as u64)
            .into_par_iter()
            .map_init(
                || Workspace::new(spec.m(), cols),
                |ws, r| max_y2_2d(&coefs, seed, r, ws),
            )
            .collect())
    } else {
        (0..replicates as u64)
            .into_par_iter()
            .map(|r| max_y2_general(spec, lattice, seed, r))
            .collect()
    }
}

/// Empirical `P(max Y ≥ b)` over independent replicates.
pub fn empirical_tail(plan: &SimPlan) -> Result<EmpiricalTail> {
    plan.validate()?;
    let maxima = simulate_maxima(&plan.spec, &plan.lattice, plan.replicates, plan.seed)?;
    Ok(EmpiricalTail {
        replicates: plan.replicates,
        seed: plan.seed,
        points: EmpiricalTail::from_maxima(&maxima, &plan.b_grid),
        maxima: plan.keep_maxima.then_some(maxima),
    })
}
