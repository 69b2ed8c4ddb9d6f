//! Scalar special functions: the standard normal density, distribution and
//! quantile, and the overshoot correction `ν` used by the discrete-lattice
//! tail formula.
//!
//! `ν(x) = 2 x⁻² exp{-2 Σ_{n≥1} n⁻¹ Φ(-x√n / 2)}` for `x > 0`, `ν(0) = 1`.
//!
//! The series is summed directly while a Chernoff majorant of the tail is
//! above the tolerance. When that would take more than `truncation` terms
//! (small `x`), the remaining tail is replaced by its Euler–Maclaurin
//! expansion: the tail integral has the closed form `2 J(x√N / 2)` with
//! `J(y) = ∫_y^∞ Φ(-s)/s ds`, and the first neglected correction term is
//! used as the remainder estimate.

use std::f64::consts::{LN_2, PI, SQRT_2};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// `1/√(2π)`.
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub const DEFAULT_NU_TOL: f64 = 1e-10;
pub const DEFAULT_NU_TRUNCATION: usize = 512;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function, accurate in both tails.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Inverse of [`normal_cdf`] on `(0, 1)` (Wichura's AS 241, PPND16).
#[inline]
pub fn normal_quantile(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    if !(tail > 0.0) {
        return if q < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, `n ≥ 2`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "Gauss-Legendre rule needs at least two nodes");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dp) = legendre(n, x);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// `J(y) = ∫_y^∞ Φ(-s)/s ds` for `y > 0`.
fn tail_log_integral(y: f64) -> f64 {
    if y <= 1.0 {
        // Integration by parts: J(y) = -ln(y)Φ(-y) + ∫_y^∞ ln(s)φ(s) ds, and
        // ∫_0^∞ ln(s)φ(s) ds = -(γ + ln 2)/4.
        let ln_y = y.ln();
        let mut head = 0.0;
        let mut coef = 1.0; // (-1)^k / (2^k k!)
        let mut pow = y; // y^(2k+1)
        for k in 0..60 {
            let odd = (2 * k + 1) as f64;
            let term = coef * pow / odd * (ln_y - 1.0 / odd);
            head += term;
            if term.abs() < 1e-18 {
                break;
            }
            coef *= -0.5 / (k as f64 + 1.0);
            pow *= y * y;
        }
        -ln_y * normal_cdf(-y) - (EULER_GAMMA + LN_2) / 4.0 - FRAC_1_SQRT_2PI * head
    } else {
        let (nodes, weights) = gl16();
        let mut acc = 0.0;
        for panel in 0..14 {
            let lo = y + panel as f64;
            let mid = lo + 0.5;
            for (t, w) in nodes.iter().zip(weights) {
                let s = mid + 0.5 * t;
                acc += 0.5 * w * normal_cdf(-s) / s;
            }
        }
        acc
    }
}

/// How `ν` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuMethod {
    /// The defining series; `truncation` caps the directly summed terms and
    /// `tol` bounds the relative error of the result.
    Series { truncation: usize, tol: f64 },
    /// The closed-form rational approximation in `Φ` and `φ`.
    Approx,
}

impl Default for NuMethod {
    fn default() -> Self {
        NuMethod::Series {
            truncation: DEFAULT_NU_TRUNCATION,
            tol: DEFAULT_NU_TOL,
        }
    }
}

impl NuMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NuMethod::Series { truncation, tol } => {
                if truncation < 1 {
                    return invalid("nu series truncation must be at least 1");
                }
                if !(tol > 0.0) {
                    return invalid("nu series tolerance must be positive");
                }
                Ok(())
            }
            NuMethod::Approx => Ok(()),
        }
    }
}

/// `ν(x)` by its defining series with the default truncation.
pub fn nu_series(x: f64, tol: f64) -> Result<f64> {
    nu_series_with(x, DEFAULT_NU_TRUNCATION, tol)
}

/// `ν(x)` by its defining series.
pub fn nu_series_with(x: f64, truncation: usize, tol: f64) -> Result<f64> {
    NuMethod::Series { truncation, tol }.validate()?;
    if !(x >= 0.0) || !x.is_finite() {
        return invalid(format!("nu requires a finite x >= 0, got {x}"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let a = 0.5 * x;
    let a2 = a * a;
    // ν carries exp(-2S): an absolute error e in S is a relative error ~2e.
    let budget = 0.5 * tol;
    let f = |t: f64| normal_cdf(-a * t.sqrt()) / t;

    let mut sum = 0.0;
    for n in 1..=truncation {
        let nf = n as f64;
        sum += f(nf);
        let next = nf + 1.0;
        // Σ_{k>n} k⁻¹Φ(-a√k) ≤ Σ_{k>n} e^{-a²k/2} / (2k)
        let majorant = (-0.5 * a2 * next).exp() / (2.0 * next * -(-0.5 * a2).exp_m1());
        if majorant <= budget {
            return Ok(finish_nu(x, sum));
        }
    }

    let start = (truncation + 1) as f64;
    let fprime = -normal_pdf(a * start.sqrt()) * a / (2.0 * start.sqrt() * start)
        - f(start) / start;
    let tail = 2.0 * tail_log_integral(a * start.sqrt()) + 0.5 * f(start) - fprime / 12.0;
    let h = start / 8.0;
    let third = (f(start + 2.0 * h) - 2.0 * f(start + h) + 2.0 * f(start - h) - f(start - 2.0 * h))
        / (2.0 * h * h * h);
    let remainder = third.abs() / 720.0;
    if remainder > budget {
        return Err(Error::Convergence(format!(
            "nu({x}): remainder estimate {remainder:.3e} after {truncation} terms exceeds tolerance {tol:.3e}"
        )));
    }
    Ok(finish_nu(x, sum + tail))
}

fn finish_nu(x: f64, series: f64) -> f64 {
    (LN_2 - 2.0 * x.ln() - 2.0 * series).exp().min(1.0)
}

/// Rational approximation `(2/x)(Φ(x/2) - ½) / ((x/2)Φ(x/2) + φ(x/2))`.
pub fn nu_approx(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return invalid(format!("nu_approx requires a finite x > 0, got {x}"));
    }
    Ok(nu_approx_unchecked(x))
}

#[inline]
fn nu_approx_unchecked(x: f64) -> f64 {
    if x < 1e-8 {
        return 1.0;
    }
    let h = 0.5 * x;
    // Φ(h) - ½ = erf(h/√2)/2, without the cancellation near 0
    let centered = 0.5 * libm::erf(h / SQRT_2);
    (2.0 / x) * centered / (h * (0.5 + centered) + normal_pdf(h))
}

const TABLE_STEP: f64 = 1.0 / 512.0;
const TABLE_MAX: f64 = 16.0;

/// Series values of `ν` on a uniform grid, interpolated by cubic Lagrange
/// polynomials. Beyond the grid the series is summed directly (it needs
/// only a handful of terms there).
#[derive(Debug)]
struct NuTable {
    values: Vec<f64>,
    truncation: usize,
    tol: f64,
}

impl NuTable {
    fn build(truncation: usize, tol: f64) -> Result<Self> {
        let nodes = (TABLE_MAX / TABLE_STEP).round() as usize;
        let values = (0..=nodes)
            .into_par_iter()
            .map(|j| nu_series_with(j as f64 * TABLE_STEP, truncation, tol))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            values,
            truncation,
            tol,
        })
    }

    fn eval(&self, x: f64) -> f64 {
        if x >= TABLE_MAX {
            return nu_series_with(x, self.truncation, self.tol).unwrap_or(2.0 / (x * x));
        }
        let pos = x / TABLE_STEP;
        let last = self.values.len() - 1;
        let j = (pos.floor() as usize).clamp(1, last - 2);
        let t = pos - j as f64;
        let [y0, y1, y2, y3] = [
            self.values[j - 1],
            self.values[j],
            self.values[j + 1],
            self.values[j + 2],
        ];
        // nodes at -1, 0, 1, 2 relative to j
        let l0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let l2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let l3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        y0 * l0 + y1 * l1 + y2 * l2 + y3 * l3
    }
}

type TableCache = Mutex<Vec<(usize, u64, Arc<NuTable>)>>;

fn cached_table(truncation: usize, tol: f64) -> Result<Arc<NuTable>> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some((_, _, t)) = guard
        .iter()
        .find(|(n, bits, _)| *n == truncation && *bits == tol.to_bits())
    {
        return Ok(Arc::clone(t));
    }
    let table = Arc::new(NuTable::build(truncation, tol)?);
    guard.push((truncation, tol.to_bits(), Arc::clone(&table)));
    Ok(table)
}

/// A ready-to-evaluate `ν`, cheap enough for use inside sphere quadrature.
#[derive(Debug, Clone)]
pub struct NuFunction {
    method: NuMethod,
    table: Option<Arc<NuTable>>,
}

impl NuFunction {
    pub fn new(method: NuMethod) -> Result<Self> {
        method.validate()?;
        let table = match method {
            NuMethod::Series { truncation, tol } => Some(cached_table(truncation, tol)?),
            NuMethod::Approx => None,
        };
        Ok(Self { method, table })
    }

    pub fn method(&self) -> NuMethod {
        self.method
    }

    /// `ν(x)` for `x ≥ 0`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match &self.table {
            Some(t) => t.eval(x),
            None => nu_approx_unchecked(x),
        }
    }
}
