//! Analytic approximations to `P(max_{t∈T} Y(t) ≥ b)`.
//!
//! Three formulas share one shape, `exp(log prefactor + log sphere integral)`:
//!
//! * **renewal**: the discrete-lattice approximation with the `ν` overshoot
//!   correction per axis;
//! * **tube**: the leading volume-of-tube term, conservative;
//! * **continuous**: the continuous-index bound (renewal with `ν ≡ 1`).
//!
//! `b` is on the chi scale; a chi-square threshold `x` corresponds to `b = √x`.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field_model::{sphere_expectation_mc, sphere_volume, CovarianceSpec, Lattice};
use crate::special_fn::{NuFunction, NuMethod};

pub const DEFAULT_SPHERE_SAMPLES: usize = 1_000_000;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMethod {
    Renewal,
    Tube,
    Continuous,
}

impl TailMethod {
    pub const ALL: [TailMethod; 3] = [TailMethod::Renewal, TailMethod::Tube, TailMethod::Continuous];

    pub fn name(self) -> &'static str {
        match self {
            TailMethod::Renewal => "renewal",
            TailMethod::Tube => "tube",
            TailMethod::Continuous => "continuous",
        }
    }
}

impl std::fmt::Display for TailMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TailMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "renewal" => Ok(TailMethod::Renewal),
            "tube" => Ok(TailMethod::Tube),
            "continuous" => Ok(TailMethod::Continuous),
            other => Err(Error::Config(format!(
                "unknown tail method {other:?} (expected renewal, tube or continuous)"
            ))),
        }
    }
}

/// Sphere quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub samples: usize,
    pub seed: u64,
    /// Use `Vol(S^{m-1}) · E[ρ̄_1 ρ̄_2]` for the continuous formula when `p = 2`.
    pub prefer_closed_form: bool,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SPHERE_SAMPLES,
            seed: 0,
            prefer_closed_form: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailWarning {
    /// Largest over smallest spacing on an axis exceeds 2; renewal used the mean spacing.
    UnequalSpacing { axis: usize, ratio: f64 },
    /// `b √(2 ρ_max D_i) > 10`: the lattice is coarse relative to `b`.
    CoarseLattice { axis: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub method: TailMethod,
    pub b: f64,
    /// The asymptotic expression itself; may exceed 1.
    pub prob_raw: f64,
    /// `1 − exp(−prob_raw)`.
    pub prob_clamped: f64,
    /// `ln prob_raw`.
    pub log_prob: f64,
    /// Standard error of `prob_raw` from sphere sampling; 0 when exact.
    pub std_error: f64,
    pub warnings: Vec<TailWarning>,
}

/// Everything a tail formula needs.
#[derive(Debug, Clone)]
pub struct TailQuery {
    pub spec: CovarianceSpec,
    pub lattice: Lattice,
    pub b: f64,
    pub method: TailMethod,
    pub quadrature: Quadrature,
    pub nu_method: NuMethod,
    /// Per-axis spacings for the renewal formula instead of the lattice means.
    pub spacing_override: Option<Vec<f64>>,
}

impl TailQuery {
    pub fn new(spec: CovarianceSpec, lattice: Lattice, b: f64, method: TailMethod) -> Self {
        Self {
            spec,
            lattice,
            b,
            method,
            quadrature: Quadrature::default(),
            nu_method: NuMethod::default(),
            spacing_override: None,
        }
    }

    pub fn with_quadrature(mut self, quadrature: Quadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn with_nu(mut self, nu_method: NuMethod) -> Self {
        self.nu_method = nu_method;
        self
    }

    pub fn with_spacings(mut self, spacings: Vec<f64>) -> Self {
        self.spacing_override = Some(spacings);
        self
    }

    pub fn with_method(mut self, method: TailMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) || !self.b.is_finite() {
            return invalid(format!("threshold b must be positive and finite, got {}", self.b));
        }
        if self.spec.p() != self.lattice.p() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.p(),
                found: self.lattice.p(),
            });
        }
        if let Some(d) = &self.spacing_override {
            if d.len() != self.spec.p() {
                return Err(Error::DimensionMismatch {
                    expected: self.spec.p(),
                    found: d.len(),
                });
            }
            if d.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return invalid("spacing override must be non-negative and finite");
            }
        }
        if self.spec.m() > 1 && self.quadrature.samples < 2 {
            return invalid("sphere quadrature needs at least 2 samples");
        }
        self.nu_method.validate()
    }

    /// The per-axis spacings the renewal formula uses.
    pub fn renewal_spacings(&self) -> Vec<f64> {
        match &self.spacing_override {
            Some(d) => d.clone(),
            None => (0..self.lattice.p()).map(|i| self.lattice.mean_spacing(i)).collect(),
        }
    }
}

/// `1 − e^{−x}`.
pub fn clamp(prob_raw: f64) -> Result<f64> {
    if !(prob_raw >= 0.0) {
        return invalid(format!("clamp needs a non-negative input, got {prob_raw}"));
    }
    Ok(-(-prob_raw).exp_m1())
}

pub fn tail(q: &TailQuery) -> Result<TailEstimate> {
    match q.method {
        TailMethod::Renewal => renewal_tail(q),
        TailMethod::Tube => tube_tail(q),
        TailMethod::Continuous => continuous_tail(q),
    }
}

/// Sphere integral `∫ f du` as (log value, relative standard error).
struct SphereIntegral {
    log: f64,
    rel_se: f64,
}

fn sphere_integral<F>(spec: &CovarianceSpec, quad: &Quadrature, f: F) -> Result<SphereIntegral>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let est = sphere_expectation_mc(spec.m(), quad.samples.max(2), quad.seed, f)?;
    if !(est.mean > 0.0) {
        return Err(Error::NonFinite {
            value: est.mean,
            point: Vec::new(),
        });
    }
    Ok(SphereIntegral {
        log: sphere_volume(spec.m()).ln() + est.mean.ln(),
        rel_se: est.std_error / est.mean,
    })
}

fn finish(
    method: TailMethod,
    b: f64,
    log_prefactor: f64,
    integral: SphereIntegral,
    warnings: Vec<TailWarning>,
) -> Result<TailEstimate> {
    let log_prob = log_prefactor + integral.log;
    let prob_raw = log_prob.exp();
    Ok(TailEstimate {
        method,
        b,
        prob_raw,
        prob_clamped: clamp(prob_raw)?,
        log_prob,
        std_error: prob_raw * integral.rel_se,
        warnings,
    })
}

/// `ln(|T̃| / (2π)^{m/2} · b^{m+2p−2} e^{−b²/2})`.
fn log_lattice_prefactor(q: &TailQuery) -> f64 {
    let (m, p) = (q.spec.m() as f64, q.spec.p() as f64);
    q.lattice.volume().ln() - 0.5 * m * LN_2PI + (m + 2.0 * p - 2.0) * q.b.ln() - 0.5 * q.b * q.b
}

/// Renewal-theory approximation for the discretely sampled maximum.
pub fn renewal_tail(q: &TailQuery) -> Result<TailEstimate> {
    q.validate()?;
    let spacings = q.renewal_spacings();
    let nu = NuFunction::new(q.nu_method)?;
    let spec = &q.spec;
    let b = q.b;
    let scale: Vec<f64> = spacings.iter().map(|d| b * (2.0 * d).sqrt()).collect();
    let integrand = |u: &[f64]| {
        scale
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let r = spec.bar_rho_at(u, i);
                r * nu.eval(s * r.sqrt())
            })
            .product::<f64>()
    };
    let integral = sphere_integral(spec, &q.quadrature, integrand)?;

    let mut warnings = Vec::new();
    if q.spacing_override.is_none() {
        for i in 0..q.lattice.p() {
            let ratio = q.lattice.spacing_ratio(i);
            if ratio > 2.0 {
                warnings.push(TailWarning::UnequalSpacing { axis: i, ratio });
            }
        }
    }
    for (i, s) in scale.iter().enumerate() {
        let rho_max = (0..spec.m()).map(|k| spec.rho(k, i)).fold(0.0, f64::max);
        let value = s * rho_max.sqrt();
        if value > 10.0 {
            warnings.push(TailWarning::CoarseLattice { axis: i, value });
        }
    }
    finish(TailMethod::Renewal, b, log_lattice_prefactor(q), integral, warnings)
}

/// Continuous-index bound: the renewal formula with every `ν` factor 1.
pub fn continuous_tail(q: &TailQuery) -> Result<TailEstimate> {
    q.validate()?;
    let spec = &q.spec;
    let integral = if spec.p() == 2 && q.quadrature.prefer_closed_form {
        SphereIntegral {
            log: sphere_volume(spec.m()).ln() + spec.sphere_moment_prod()?.ln(),
            rel_se: 0.0,
        }
    } else {
        sphere_integral(spec, &q.quadrature, |u| {
            (0..spec.p()).map(|i| spec.bar_rho_at(u, i)).product::<f64>()
        })?
    };
    finish(TailMethod::Continuous, q.b, log_lattice_prefactor(q), integral, Vec::new())
}

/// `ln V - ln ∫∏√ρ̄ du = (p/2) ln 2 + Σ_i ln Σ_j √D_ij`.
fn log_tube_geometry(lattice: &Lattice) -> f64 {
    let p = lattice.p() as f64;
    0.5 * p * LN_2 + (0..lattice.p()).map(|i| lattice.sqrt_spacing_sum(i).ln()).sum::<f64>()
}

/// The tube volume `V` for a lattice, given `E[∏√ρ̄]` on the sphere.
pub fn tube_volume(spec: &CovarianceSpec, lattice: &Lattice, mean_sqrt_prod: f64) -> f64 {
    (log_tube_geometry(lattice) + sphere_volume(spec.m()).ln() + mean_sqrt_prod.ln()).exp()
}

/// Leading volume-of-tube term; uses every segment length of the lattice.
pub fn tube_tail(q: &TailQuery) -> Result<TailEstimate> {
    q.validate()?;
    let spec = &q.spec;
    let (m, p) = (spec.m() as f64, spec.p() as f64);
    let integral = sphere_integral(spec, &q.quadrature, |u| {
        (0..spec.p()).map(|i| spec.bar_rho_at(u, i).sqrt()).product::<f64>()
    })?;
    let log_prefactor = LN_2 + log_tube_geometry(&q.lattice) - 0.5 * (m + p) * LN_2PI
        + (m + p - 2.0) * q.b.ln()
        - 0.5 * q.b * q.b;
    finish(TailMethod::Tube, q.b, log_prefactor, integral, Vec::new())
}

/// Evaluates `query` at each `b`; every point reuses the query's quadrature seed.
pub fn tail_curve(query: &TailQuery, b_grid: &[f64]) -> Result<Vec<TailEstimate>> {
    b_grid.iter().map(|&b| tail(&query.clone().with_b(b))).collect()
}
