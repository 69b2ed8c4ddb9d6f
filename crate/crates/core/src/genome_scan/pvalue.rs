//! Multiplicity-adjusted p-values for the genome-wide maximum statistic.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use super::data::{Design, GenotypeDataset, MarkerBits};
use super::scan::{chromosome_pairs, pair_statistic, scan, ScanResult};
use crate::error::{invalid, Error, Result};
use crate::field_model::{CovarianceSpec, Lattice};
use crate::rng::stream_rng;
use crate::special_fn::NuMethod;
use crate::tail_approx::{tail, Quadrature, TailMethod, TailQuery, TailWarning};

/// Field parameters for a cross design: m = 4 with the intercross rates for
/// F₂, m = 1 with rate 2 for the backcross.
pub fn design_spec(design: Design) -> CovarianceSpec {
    match design {
        Design::F2 => CovarianceSpec::f2(),
        Design::Bc => CovarianceSpec::bc(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustOptions {
    pub method: TailMethod,
    pub quadrature: Quadrature,
    pub nu_method: NuMethod,
}

impl AdjustOptions {
    pub fn new(method: TailMethod) -> Self {
        Self {
            method,
            quadrature: Quadrature::default(),
            nu_method: NuMethod::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjustedPValue {
    pub method: TailMethod,
    pub statistic: f64,
    pub p_value: f64,
    /// Chromosome pairs whose renewal term used a mean spacing over strongly unequal gaps.
    pub unequal_spacing_pairs: Vec<(u32, u32)>,
}

/// `F(x) = 1 − ∏_{c1<c2} (1 − P_{c1c2}(x))` with each `P` the clamped tail of
/// the field over that pair's marker lattice at `b = √x`.
///
/// Per-pair tail values are cached by lattice geometry and `x`, so scanning
/// many thresholds or many datasets on one map stays cheap.
pub struct PValueCalculator {
    spec: CovarianceSpec,
    options: AdjustOptions,
    pairs: Vec<(u32, u32, Lattice)>,
    cache: Mutex<HashMap<(Vec<u64>, u64), (f64, bool)>>,
}

impl PValueCalculator {
    pub fn new(result: &ScanResult, preset: Design, options: AdjustOptions) -> Result<Self> {
        if preset != result.design {
            return Err(Error::Config(format!(
                "scan was built from {} data but the {} preset was requested",
                result.design, preset
            )));
        }
        if options.method == TailMethod::Continuous {
            return Err(Error::Config("adjusted p-values use the renewal or tube method".into()));
        }
        let mut pairs = Vec::with_capacity(result.pairs.len());
        for pair in &result.pairs {
            let axis = |c: u32| {
                let axis = result.map.axis(c).expect("chromosome in map");
                if axis.len() < 2 {
                    return Err(Error::Config(format!(
                        "chromosome {c} has a single marker; tail formulas need at least two"
                    )));
                }
                Ok(axis)
            };
            let lattice = Lattice::new(vec![axis(pair.chromosome1)?, axis(pair.chromosome2)?])?;
            pairs.push((pair.chromosome1, pair.chromosome2, lattice));
        }
        if pairs.is_empty() {
            return invalid("scan has no chromosome pairs");
        }
        Ok(Self {
            spec: design_spec(preset),
            options,
            pairs,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn pair_tail(&self, lattice: &Lattice, x: f64) -> Result<(f64, bool)> {
        let key = (
            lattice.axes().iter().flatten().map(|v| v.to_bits()).chain([u64::MAX]).collect::<Vec<_>>(),
            x.to_bits(),
        );
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*hit);
        }
        let q = TailQuery::new(self.spec.clone(), lattice.clone(), x.sqrt(), self.options.method)
            .with_quadrature(self.options.quadrature)
            .with_nu(self.options.nu_method);
        let est = tail(&q)?;
        let unequal = est.warnings.iter().any(|w| matches!(w, TailWarning::UnequalSpacing { .. }));
        let value = (est.prob_raw, unequal);
        self.cache.lock().expect("cache lock").insert(key, value);
        Ok(value)
    }

    /// Below this statistic the tail expression still increases with `x`
    /// and the p-value is reported as 1.
    pub fn mode(&self) -> f64 {
        let (m, p) = (self.spec.m() as f64, self.spec.p() as f64);
        match self.options.method {
            TailMethod::Tube => m + p - 2.0,
            _ => m + 2.0 * p - 2.0,
        }
    }

    /// The adjusted p-value of an observed maximum chi-square statistic `x`.
    pub fn pvalue(&self, x: f64) -> Result<AdjustedPValue> {
        if x.is_nan() {
            return invalid("statistic is NaN");
        }
        let mut unequal = Vec::new();
        let p_value = if x <= self.mode() {
            1.0
        } else {
            let mut total = 0.0;
            for (c1, c2, lattice) in &self.pairs {
                let (raw, flag) = self.pair_tail(lattice, x)?;
                total += raw;
                if flag {
                    unequal.push((*c1, *c2));
                }
            }
            // ∏(1 − clamp(raw)) = exp(−Σ raw)
            -(-total).exp_m1()
        };
        Ok(AdjustedPValue {
            method: self.options.method,
            statistic: x,
            p_value,
            unequal_spacing_pairs: unequal,
        })
    }
}

/// Adjusted p-value of the scan's global maximum.
pub fn adjusted_pvalue(result: &ScanResult, preset: Design, options: AdjustOptions) -> Result<AdjustedPValue> {
    let x = result
        .global_max()
        .ok_or_else(|| Error::Input("every table in the scan is degenerate".into()))?
        .statistic;
    PValueCalculator::new(result, preset, options)?.pvalue(x)
}

/// Which marker pairs enter the permuted maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PermutationPairs {
    /// The scan's own pairs: markers of chromosome `c1` in the original data
    /// against markers of chromosome `c2 > c1` in the permuted data.
    Matched,
    /// Every marker of the original data against every marker of the permuted data.
    All,
}

impl std::str::FromStr for PermutationPairs {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "matched" => Ok(PermutationPairs::Matched),
            "all" => Ok(PermutationPairs::All),
            other => Err(Error::Config(format!("unknown permutation pairing {other:?} (expected matched or all)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationResult {
    pub pairs: PermutationPairs,
    pub observed: f64,
    pub permutations: usize,
    /// Permutations whose maximum reached the observed one.
    pub exceedances: usize,
    /// `(1 + exceedances) / (permutations + 1)`.
    pub p_value: f64,
    /// Degenerate permuted tables left out of the maxima.
    pub skipped_tables: usize,
    /// Maximum statistic of each permutation, in permutation order.
    #[serde(skip)]
    pub maxima: Vec<f64>,
}

fn permuted_max(
    original: &[MarkerBits],
    permuted: &[MarkerBits],
    blocks: &[(std::ops::Range<usize>, std::ops::Range<usize>)],
) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut skipped = 0;
    for (r1, r2) in blocks {
        for i in r1.clone() {
            for j in r2.clone() {
                match pair_statistic(&original[i], &permuted[j]) {
                    Some(v) => best = best.max(v),
                    None => skipped += 1,
                }
            }
        }
    }
    (best, skipped)
}

/// Permutation p-value of the observed genome-wide maximum: individual labels
/// of a copy of the data are shuffled, tables are formed between the original
/// and the shuffled copy, and the maximum statistic is recorded. Permutation
/// `π` draws from stream `π` of `seed`.
pub fn permutation_pvalue(
    data: &GenotypeDataset,
    permutations: usize,
    seed: u64,
    pairs: PermutationPairs,
) -> Result<PermutationResult> {
    if permutations == 0 {
        return invalid("need at least one permutation");
    }
    let observed = scan(data)
        .global_max()
        .ok_or_else(|| Error::Input("every table in the scan is degenerate".into()))?
        .statistic;
    let original = data.bitsets();
    let blocks: Vec<_> = match pairs {
        PermutationPairs::Matched => chromosome_pairs(data.map()).into_iter().map(|(_, _, a, b)| (a, b)).collect(),
        PermutationPairs::All => vec![(0..data.map().len(), 0..data.map().len())],
    };
    let n = data.n();
    let runs: Vec<(f64, usize)> = (0..permutations as u64)
        .into_par_iter()
        .map(|pi| {
            use rand::seq::SliceRandom;
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut stream_rng(seed, pi));
            let permuted = data.permuted_bitsets(&order);
            permuted_max(&original, &permuted, &blocks)
        })
        .collect();
    let exceedances = runs.iter().filter(|(m, _)| *m >= observed).count();
    Ok(PermutationResult {
        pairs,
        observed,
        permutations,
        exceedances,
        p_value: (1 + exceedances) as f64 / (permutations + 1) as f64,
        skipped_tables: runs.iter().map(|r| r.1).sum(),
        maxima: runs.into_iter().map(|r| r.0).collect(),
    })
}
