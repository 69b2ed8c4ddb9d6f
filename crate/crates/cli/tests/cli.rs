mod common;

use chifield::field_model::{CovarianceSpec, Lattice};
use chifield::genome_scan::synth::{null_dataset, planted_dataset, uniform_map};
use chifield::genome_scan::Design;
use chifield::rng::stream_rng;
use chifield::tail_approx::{tail, TailMethod, TailQuery};
use common::*;

const BC: &str = r#"{"preset": "bc", "axes": {"extent": 1, "spacing": 0.05}}"#;

#[test]
fn tail_csv_matches_library() {
    let dir = scratch("tail");
    let spec = write(&dir, "bc.json", BC);
    let text = stdout(&["tail", "--spec", &spec, "--b", "3.5:4.5:0.5", "--method", "renewal"]);
    assert!(text.lines().any(|l| l == "b,method,prob_raw,prob_clamped,std_error"));
    assert!(text.starts_with("# chifield "));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 3);
    let lattice = Lattice::uniform(2, 20, 0.05).unwrap();
    for row in rows {
        let b: f64 = row[0].parse().unwrap();
        let lib = tail(&TailQuery::new(CovarianceSpec::bc(), lattice.clone(), b, TailMethod::Renewal)).unwrap();
        assert_eq!(row[1], "renewal");
        assert_eq!(row[2].parse::<f64>().unwrap(), lib.prob_raw);
        assert_eq!(row[3].parse::<f64>().unwrap(), lib.prob_clamped);
    }
}

#[test]
fn reports_repeat_except_wall_clock() {
    let dir = scratch("repeat");
    let spec = write(&dir, "bc.json", BC);
    let commands: [&[&str]; 3] = [
        &["tail", "--spec", &spec, "--b", "4,5", "--samples", "5000", "--seed", "9"],
        &["simulate", "--spec", &spec, "--b-grid", "3:4:0.25", "--replicates", "300", "--format", "json"],
        &["compare", "--spec", &spec, "--b", "3:4:0.5", "--replicates", "200", "--samples", "2000"],
    ];
    for args in commands {
        let a = stdout(args);
        let b = stdout(args);
        assert_eq!(without_wall_clock(&a), without_wall_clock(&b));
        assert_eq!(a.lines().filter(|l| l.contains("wall_clock_s")).count(), 1);
        assert!(a.contains("\"seed\": ") || a.contains("# seed: "));
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = scratch("threads");
    let spec = write(&dir, "bc.json", BC);
    let args = |t: &'static str| {
        stdout(&["simulate", "--spec", &spec, "--b", "3:4:0.5", "--replicates", "500", "--threads", t])
    };
    let one = without_wall_clock(&args("1"));
    assert_eq!(one, without_wall_clock(&args("3")).replace("\"threads\":3", "\"threads\":1"));
}

#[test]
fn dump_maxima_lists_every_replicate() {
    let dir = scratch("dump");
    let spec = write(&dir, "bc.json", BC);
    let dump = dir.join("maxima.csv");
    let text = stdout(&[
        "simulate", "--spec", &spec, "--b", "3.5", "--replicates", "250", "--dump-maxima", dump.to_str().unwrap(),
    ]);
    let maxima: Vec<f64> = std::fs::read_to_string(&dump)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(maxima.len(), 250);
    let row = &csv_rows(&text)[0];
    let count = maxima.iter().filter(|&&m| m > 3.5 * 3.5).count();
    assert_eq!(row[1].parse::<usize>().unwrap(), count);
}

#[test]
fn compare_verdict_and_raw_columns() {
    let dir = scratch("compare");
    let spec = write(&dir, "bc.json", BC);
    let clamped = stdout(&["compare", "--spec", &spec, "--b", "2.5,4", "--replicates", "400", "--samples", "2000"]);
    let raw = stdout(&["compare", "--spec", &spec, "--b", "2.5,4", "--replicates", "400", "--samples", "2000", "--raw"]);
    assert!(clamped
        .lines()
        .any(|l| l == "b,renewal,tube,continuous,empirical,empirical_se,tube_ok,continuous_ok"));
    for (c, r) in csv_rows(&clamped).iter().zip(csv_rows(&raw)) {
        for col in 1..4 {
            let (c, r): (f64, f64) = (c[col].parse().unwrap(), r[col].parse().unwrap());
            assert!((c - (-(-r).exp_m1())).abs() < 1e-15);
        }
        assert_eq!(c[6..], r[6..]);
    }
}

#[test]
fn configuration_errors_exit_two() {
    let dir = scratch("config");
    let spec = write(&dir, "bc.json", BC);
    let broken = write(&dir, "broken.json", "{\"preset\": \"bc\",\n \"axes\": {\"extent\": 1, }}");
    let cases: [&[&str]; 5] = [
        &["tail", "--spec", &spec, "--b", ""],
        &["compare", "--spec", &spec, "--b", "4", "--replicates", "99"],
        &["simulate", "--spec", &spec, "--b", "5:4:0.1"],
        &["tail", "--spec", &broken, "--b", "4"],
        &["tail", "--spec", &spec, "--b", "4", "--method", "bogus"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let err = String::from_utf8(run(&["tail", "--spec", &broken, "--b", "4"]).stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");
}

fn write_dataset(dir: &std::path::Path, data: &chifield::genome_scan::GenotypeDataset) -> (String, String) {
    (
        write(dir, "map.csv", &data.map().to_csv().unwrap()),
        write(dir, "geno.csv", &data.to_csv().unwrap()),
    )
}

#[test]
fn scan_report_finds_planted_pair() {
    let dir = scratch("scan");
    let map = uniform_map(4, 6, 20.0).unwrap();
    let data = planted_dataset(&map, Design::F2, 2000, 3, 9, 0.8, &mut stream_rng(5, 0)).unwrap();
    let (map_path, geno_path) = write_dataset(&dir, &data);
    let args = [
        "scan", "--map", &map_path, "--genotypes", &geno_path, "--design", "f2", "--permutations", "50",
        "--samples", "20000", "--seed", "4",
    ];
    let text = stdout(&args);
    assert_eq!(without_wall_clock(&text), without_wall_clock(&stdout(&args)));
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    let results = &report["results"];
    assert_eq!(results["global_max"]["marker1"], "c1m3");
    assert_eq!(results["global_max"]["marker2"], "c2m3");
    let adjusted = results["adjusted"].as_array().unwrap();
    assert_eq!(adjusted.len(), 2);
    for a in adjusted {
        assert!(a["p_value"].as_f64().unwrap() < 0.01);
    }
    assert!(results["permutation"]["p_value"].as_f64().unwrap() < 0.05);
    let peaks = results["peaks"].as_array().unwrap();
    assert!(!peaks.is_empty() && peaks.len() <= 20);
    assert_eq!(peaks[0]["statistic"], results["global_max"]["statistic"]);

    let csv = stdout(&[&args[..], &["--format", "csv", "--top", "5"]].concat());
    let rows = csv_rows(&csv);
    assert!(rows.len() <= 5);
    assert_eq!(rows[0][2], "c1m3");
    assert!(!rows[0][10].is_empty());
    assert!(rows.iter().skip(1).all(|r| r[10].is_empty()));
}

#[test]
fn backcross_scan_with_single_method() {
    let dir = scratch("bc-scan");
    let map = uniform_map(3, 4, 10.0).unwrap();
    let data = null_dataset(&map, Design::Bc, 150, &mut stream_rng(6, 0)).unwrap();
    let (map_path, geno_path) = write_dataset(&dir, &data);
    let out = dir.join("report.json");
    stdout(&[
        "scan", "--map", &map_path, "--genotypes", &geno_path, "--design", "bc", "--method", "tube", "--samples",
        "20000", "--out", out.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let adjusted = report["results"]["adjusted"].as_array().unwrap();
    assert_eq!(adjusted.len(), 1);
    assert_eq!(adjusted[0]["method"], "tube");
    assert!(report["results"]["peaks"][0]["p_renewal"].is_null());
}

#[test]
fn degenerate_data_exits_four() {
    let dir = scratch("degenerate");
    let map = write(&dir, "map.csv", "marker_id,chromosome,position_cM\na,1,0\nb,1,10\nc,2,0\nd,2,10\n");
    let geno = write(&dir, "geno.csv", "individual_id,a,b,c,d\ni1,A,A,A,A\ni2,A,A,A,A\ni3,A,A,A,A\n");
    let out = run(&["scan", "--map", &map, "--genotypes", &geno, "--design", "f2"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_genotypes_exit_two() {
    let dir = scratch("malformed");
    let map = write(&dir, "map.csv", "marker_id,chromosome,position_cM\na,1,0\nb,1,10\nc,2,0\nd,2,10\n");
    let geno = write(&dir, "geno.csv", "individual_id,a,b,c,d\ni1,A,B,H,Q\n");
    let out = run(&["scan", "--map", &map, "--genotypes", &geno, "--design", "f2"]);
    assert_eq!(out.status.code(), Some(2));
}
