use std::path::Path;
use std::time::Instant;

use chifield::field_model::{CovarianceSpec, FieldConfig, Lattice};
use chifield::genome_scan::{
    permutation_pvalue, scan as run_scan, AdjustOptions, AdjustedPValue, GenotypeDataset, MarkerMap,
    PValueCalculator, PermutationPairs, PermutationResult, Peak, PEAK_RADIUS_CM,
};
use chifield::mc_sim::{empirical_tail, SimPlan};
use chifield::special_fn::NuMethod;
use chifield::tail_approx::{tail as tail_estimate, Quadrature, TailEstimate, TailMethod, TailQuery};
use serde::Serialize;

use crate::grid::parse_grid;
use crate::report::{header, render, Format};
use crate::{CliError, CompareArgs, MethodArg, NuArg, PairsArg, ScanArgs, ScanMethodArg, SimulateArgs, TailArgs};

#[derive(Serialize)]
struct FieldEcho<'a, A: Serialize> {
    args: &'a A,
    field: FieldConfig,
}

fn load_field(path: &Path) -> Result<(FieldConfig, CovarianceSpec, Lattice), CliError> {
    let config =
        FieldConfig::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let (spec, lattice) = config.build()?;
    Ok((config, spec, lattice))
}

fn nu_method(nu: NuArg) -> NuMethod {
    match nu {
        NuArg::Series => NuMethod::default(),
        NuArg::Approx => NuMethod::Approx,
    }
}

fn quadrature(samples: usize, seed: u64) -> Result<Quadrature, CliError> {
    if samples == 0 {
        return Err(CliError::Config("--samples must be positive".into()));
    }
    Ok(Quadrature {
        samples,
        seed,
        prefer_closed_form: true,
    })
}

#[derive(Serialize)]
struct TailRow {
    b: f64,
    method: TailMethod,
    prob_raw: f64,
    prob_clamped: f64,
    std_error: f64,
}

pub fn tail(args: &TailArgs, seed: u64, format: Format) -> Result<String, CliError> {
    let started = Instant::now();
    let (field, spec, lattice) = load_field(&args.spec)?;
    let grid = parse_grid(&args.b)?;
    let methods: Vec<TailMethod> = match args.method {
        MethodArg::Renewal => vec![TailMethod::Renewal],
        MethodArg::Tube => vec![TailMethod::Tube],
        MethodArg::Continuous => vec![TailMethod::Continuous],
        MethodArg::All => TailMethod::ALL.to_vec(),
    };
    let base = TailQuery::new(spec, lattice, grid[0], methods[0])
        .with_quadrature(quadrature(args.samples, seed)?)
        .with_nu(nu_method(args.nu));
    let mut estimates = Vec::new();
    for &b in &grid {
        for &method in &methods {
            estimates.push(tail_estimate(&base.clone().with_b(b).with_method(method))?);
        }
    }
    let rows: Vec<TailRow> = estimates
        .iter()
        .map(|e| TailRow {
            b: e.b,
            method: e.method,
            prob_raw: e.prob_raw,
            prob_clamped: e.prob_clamped,
            std_error: e.std_error,
        })
        .collect();
    let h = header("tail", seed, FieldEcho { args, field });
    render(format, &h, started, &estimates, &rows)
}

pub fn simulate(args: &SimulateArgs, seed: u64, format: Format) -> Result<String, CliError> {
    let started = Instant::now();
    let (field, spec, lattice) = load_field(&args.spec)?;
    let grid = parse_grid(&args.b)?;
    if args.replicates == 0 {
        return Err(CliError::Config("--replicates must be positive".into()));
    }
    let mut plan = SimPlan::new(spec, lattice, args.replicates, seed, grid);
    plan.keep_maxima = args.dump_maxima.is_some();
    let mut result = empirical_tail(&plan)?;
    if let (Some(path), Some(maxima)) = (&args.dump_maxima, result.maxima.take()) {
        let mut w = csv::Writer::from_path(path).map_err(chifield::Error::from)?;
        w.write_record(["replicate", "max_y2"]).map_err(chifield::Error::from)?;
        for (r, v) in maxima.iter().enumerate() {
            w.write_record([r.to_string(), v.to_string()]).map_err(chifield::Error::from)?;
        }
        w.flush()?;
    }
    let h = header("simulate", seed, FieldEcho { args, field });
    render(format, &h, started, &result, &result.points)
}

#[derive(Serialize)]
struct CompareRow {
    b: f64,
    renewal: f64,
    tube: f64,
    continuous: f64,
    empirical: f64,
    empirical_se: f64,
    tube_ok: bool,
    continuous_ok: bool,
}

pub fn compare(args: &CompareArgs, seed: u64, format: Format) -> Result<String, CliError> {
    let started = Instant::now();
    let (field, spec, lattice) = load_field(&args.spec)?;
    let grid = parse_grid(&args.b)?;
    if args.replicates < 100 {
        return Err(CliError::Config(format!("--replicates must be at least 100, got {}", args.replicates)));
    }
    let base = TailQuery::new(spec.clone(), lattice.clone(), grid[0], TailMethod::Renewal)
        .with_quadrature(quadrature(args.samples, seed)?)
        .with_nu(nu_method(args.nu));
    let empirical = empirical_tail(&SimPlan::new(spec, lattice, args.replicates, seed, grid.clone()))?;
    let mut rows = Vec::with_capacity(grid.len());
    for (&b, point) in grid.iter().zip(&empirical.points) {
        let estimate = |method| tail_estimate(&base.clone().with_b(b).with_method(method));
        let [renewal, tube, continuous]: [TailEstimate; 3] =
            [estimate(TailMethod::Renewal)?, estimate(TailMethod::Tube)?, estimate(TailMethod::Continuous)?];
        let floor = point.prob - 2.0 * point.std_error;
        let shown = |e: &TailEstimate| if args.raw { e.prob_raw } else { e.prob_clamped };
        rows.push(CompareRow {
            b,
            renewal: shown(&renewal),
            tube: shown(&tube),
            continuous: shown(&continuous),
            empirical: point.prob,
            empirical_se: point.std_error,
            tube_ok: tube.prob_clamped >= floor,
            continuous_ok: continuous.prob_clamped >= floor,
        });
    }
    let h = header("compare", seed, FieldEcho { args, field });
    render(format, &h, started, &rows, &rows)
}

#[derive(Serialize)]
struct PeakRow {
    rank: usize,
    chromosome1: u32,
    marker1: String,
    position1_cm: f64,
    chromosome2: u32,
    marker2: String,
    position2_cm: f64,
    statistic: f64,
    p_renewal: Option<f64>,
    p_tube: Option<f64>,
    p_permutation: Option<f64>,
}

#[derive(Serialize)]
struct ScanReport<'a> {
    design: chifield::genome_scan::Design,
    markers: usize,
    individuals: usize,
    degenerate_tables: usize,
    global_max: &'a Peak,
    adjusted: Vec<AdjustedPValue>,
    permutation: Option<PermutationResult>,
    peaks: &'a [PeakRow],
}

pub fn scan(args: &ScanArgs, seed: u64, format: Format) -> Result<String, CliError> {
    let started = Instant::now();
    let map = MarkerMap::from_path(&args.map)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.map.display())))?;
    let data = GenotypeDataset::from_reader(map, args.design, std::fs::File::open(&args.genotypes)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.genotypes.display())))?;
    let result = run_scan(&data);
    let global = result
        .global_max()
        .ok_or_else(|| CliError::Degenerate("every marker-pair table is degenerate".into()))?;
    let methods: Vec<TailMethod> = match args.method {
        ScanMethodArg::Renewal => vec![TailMethod::Renewal],
        ScanMethodArg::Tube => vec![TailMethod::Tube],
        ScanMethodArg::Both => vec![TailMethod::Renewal, TailMethod::Tube],
    };
    let mut calculators = Vec::new();
    for &method in &methods {
        let options = AdjustOptions {
            method,
            quadrature: quadrature(args.samples, seed)?,
            nu_method: nu_method(args.nu),
        };
        calculators.push(PValueCalculator::new(&result, args.design, options)?);
    }
    let adjusted = calculators
        .iter()
        .map(|c| c.pvalue(global.statistic))
        .collect::<Result<Vec<_>, _>>()?;
    let permutation = match args.permutations {
        0 => None,
        n => {
            let pairs = match args.pairs {
                PairsArg::Matched => PermutationPairs::Matched,
                PairsArg::All => PermutationPairs::All,
            };
            Some(permutation_pvalue(&data, n, seed, pairs)?)
        }
    };
    let mut peaks = Vec::new();
    for (i, peak) in result.top_peaks(args.top, PEAK_RADIUS_CM).into_iter().enumerate() {
        let mut p = [None, None];
        for (c, &method) in calculators.iter().zip(&methods) {
            p[(method == TailMethod::Tube) as usize] = Some(c.pvalue(peak.statistic)?.p_value);
        }
        peaks.push(PeakRow {
            rank: i + 1,
            p_renewal: p[0],
            p_tube: p[1],
            p_permutation: permutation.as_ref().filter(|_| i == 0).map(|r| r.p_value),
            chromosome1: peak.chromosome1,
            marker1: peak.marker1,
            position1_cm: peak.position1_cm,
            chromosome2: peak.chromosome2,
            marker2: peak.marker2,
            position2_cm: peak.position2_cm,
            statistic: peak.statistic,
        });
    }
    let report = ScanReport {
        design: args.design,
        markers: data.map().len(),
        individuals: data.n(),
        degenerate_tables: result.degenerate_tables(),
        global_max: &global,
        adjusted,
        permutation,
        peaks: &peaks,
    };
    let h = header("scan", seed, args);
    render(format, &h, started, &report, &peaks)
}
