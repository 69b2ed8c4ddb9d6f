//! Pairwise chi-square scan over markers on distinct chromosomes.

use rayon::prelude::*;
use serde::Serialize;

use super::data::{Design, GenotypeDataset, MarkerBits, MarkerMap};
use super::table::chi_square_from_counts;

/// Cell counts of the cross table between two markers; individuals missing
/// at either marker drop out.
pub(crate) fn cross_counts(x: &MarkerBits, y: &MarkerBits, counts: &mut [u64]) {
    let cols = y.classes.len();
    for (a, xa) in x.classes.iter().enumerate() {
        for (b, yb) in y.classes.iter().enumerate() {
            counts[a * cols + b] = xa.iter().zip(yb).map(|(u, v)| (u & v).count_ones() as u64).sum();
        }
    }
}

/// Pearson statistic between two markers, `None` when a margin is empty.
pub(crate) fn pair_statistic(x: &MarkerBits, y: &MarkerBits) -> Option<f64> {
    let (r, c) = (x.classes.len(), y.classes.len());
    let mut counts = [0u64; 9];
    let counts = &mut counts[..r * c];
    cross_counts(x, y, counts);
    let mut rows = [0u64; 3];
    let mut cols = [0u64; 3];
    for a in 0..r {
        for b in 0..c {
            rows[a] += counts[a * c + b];
            cols[b] += counts[a * c + b];
        }
    }
    let (rows, cols) = (&rows[..r], &cols[..c]);
    if rows.contains(&0) || cols.contains(&0) {
        return None;
    }
    Some(chi_square_from_counts(counts, rows, cols))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Peak {
    pub chromosome1: u32,
    pub marker1: String,
    pub position1_cm: f64,
    pub chromosome2: u32,
    pub marker2: String,
    pub position2_cm: f64,
    pub statistic: f64,
}

/// Statistics for every marker pair on one chromosome pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScan {
    pub chromosome1: u32,
    pub chromosome2: u32,
    /// Marker index ranges (map order) on each chromosome.
    pub range1: std::ops::Range<usize>,
    pub range2: std::ops::Range<usize>,
    /// Row-major over `range1 × range2`; `None` marks a degenerate table.
    pub stats: Vec<Option<f64>>,
}

impl PairScan {
    pub fn get(&self, j1: usize, j2: usize) -> Option<f64> {
        self.stats[j1 * self.range2.len() + j2]
    }

    /// Largest statistic with its local indices.
    pub fn max(&self) -> Option<(usize, usize, f64)> {
        let cols = self.range2.len();
        self.stats
            .iter()
            .enumerate()
            .filter_map(|(t, s)| s.map(|v| (t / cols, t % cols, v)))
            .fold(None, |best, cur| match best {
                Some((_, _, b)) if b >= cur.2 => best,
                _ => Some(cur),
            })
    }

    pub fn degenerate(&self) -> usize {
        self.stats.iter().filter(|s| s.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub design: Design,
    pub map: MarkerMap,
    pub pairs: Vec<PairScan>,
}

impl ScanResult {
    fn peak(&self, pair: &PairScan, j1: usize, j2: usize, statistic: f64) -> Peak {
        let m1 = &self.map.markers()[pair.range1.start + j1];
        let m2 = &self.map.markers()[pair.range2.start + j2];
        Peak {
            chromosome1: m1.chromosome,
            marker1: m1.id.clone(),
            position1_cm: m1.position * 100.0,
            chromosome2: m2.chromosome,
            marker2: m2.id.clone(),
            position2_cm: m2.position * 100.0,
            statistic,
        }
    }

    /// Maximum statistic for each chromosome pair.
    pub fn pair_maxima(&self) -> Vec<Option<Peak>> {
        self.pairs
            .iter()
            .map(|p| p.max().map(|(j1, j2, v)| self.peak(p, j1, j2, v)))
            .collect()
    }

    pub fn global_max(&self) -> Option<Peak> {
        self.pair_maxima()
            .into_iter()
            .flatten()
            .fold(None, |best: Option<Peak>, cur| match best {
                Some(b) if b.statistic >= cur.statistic => Some(b),
                _ => Some(cur),
            })
    }

    pub fn degenerate_tables(&self) -> usize {
        self.pairs.iter().map(PairScan::degenerate).sum()
    }

    /// The `k` largest statistics, skipping any within `radius_cm` of an
    /// already listed peak on both axes of the same chromosome pair.
    pub fn top_peaks(&self, k: usize, radius_cm: f64) -> Vec<Peak> {
        let mut all: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (p, pair) in self.pairs.iter().enumerate() {
            let cols = pair.range2.len();
            all.extend(
                pair.stats
                    .iter()
                    .enumerate()
                    .filter_map(|(t, s)| s.map(|v| (p, t / cols, t % cols, v))),
            );
        }
        all.sort_by(|a, b| b.3.total_cmp(&a.3).then((a.0, a.1, a.2).cmp(&(b.0, b.1, b.2))));
        let mut kept: Vec<(usize, Peak)> = Vec::new();
        for (p, j1, j2, v) in all {
            if kept.len() == k {
                break;
            }
            let peak = self.peak(&self.pairs[p], j1, j2, v);
            let near = kept.iter().any(|(q, other)| {
                *q == p
                    && (other.position1_cm - peak.position1_cm).abs() <= radius_cm + 1e-9
                    && (other.position2_cm - peak.position2_cm).abs() <= radius_cm + 1e-9
            });
            if !near {
                kept.push((p, peak));
            }
        }
        kept.into_iter().map(|(_, peak)| peak).collect()
    }
}

/// Index ranges of every chromosome pair `c1 < c2`.
pub(crate) fn chromosome_pairs(map: &MarkerMap) -> Vec<(u32, u32, std::ops::Range<usize>, std::ops::Range<usize>)> {
    let chroms = map.chromosomes();
    let mut out = Vec::new();
    for (a, &c1) in chroms.iter().enumerate() {
        for &c2 in &chroms[a + 1..] {
            out.push((
                c1,
                c2,
                map.chromosome_range(c1).expect("listed"),
                map.chromosome_range(c2).expect("listed"),
            ));
        }
    }
    out
}

/// Statistics for all marker pairs on distinct chromosomes. Degenerate tables
/// are recorded as `None` rather than failing the scan.
pub fn scan(data: &GenotypeDataset) -> ScanResult {
    let bits = data.bitsets();
    let pairs = chromosome_pairs(data.map())
        .into_par_iter()
        .map(|(c1, c2, r1, r2)| {
            let stats = r1
                .clone()
                .flat_map(|i| r2.clone().map(move |j| (i, j)))
                .map(|(i, j)| pair_statistic(&bits[i], &bits[j]))
                .collect();
            PairScan {
                chromosome1: c1,
                chromosome2: c2,
                range1: r1,
                range2: r2,
                stats,
            }
        })
        .collect();
    ScanResult {
        design: data.design(),
        map: data.map().clone(),
        pairs,
    }
}
