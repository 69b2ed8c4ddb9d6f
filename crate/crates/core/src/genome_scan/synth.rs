//! Synthetic crosses under Haldane's no-interference model.

use rand::Rng;

use super::data::{Design, Genotype, GenotypeDataset, Marker, MarkerMap};
use crate::error::{invalid, Result};

/// `chromosomes` chromosomes of `markers` equally spaced markers each,
/// ids `c{chromosome}m{index}`.
pub fn uniform_map(chromosomes: u32, markers: usize, spacing_cm: f64) -> Result<MarkerMap> {
    if chromosomes == 0 || markers == 0 || !(spacing_cm > 0.0) {
        return invalid("synthetic map needs chromosomes, markers and a positive spacing");
    }
    MarkerMap::new(
        (1..=chromosomes)
            .flat_map(|c| {
                (0..markers).map(move |j| Marker {
                    id: format!("c{c}m{j}"),
                    chromosome: c,
                    position: j as f64 * spacing_cm / 100.0,
                })
            })
            .collect(),
    )
}

/// One gamete along every chromosome of `map`: `true` for the A-parent allele.
fn gamete<R: Rng>(map: &MarkerMap, rng: &mut R, out: &mut [bool]) {
    let markers = map.markers();
    for (j, m) in markers.iter().enumerate() {
        out[j] = if j > 0 && markers[j - 1].chromosome == m.chromosome {
            let d = m.position - markers[j - 1].position;
            let r = -0.5 * (-2.0 * d).exp_m1();
            out[j - 1] ^ rng.random_bool(r)
        } else {
            rng.random_bool(0.5)
        };
    }
}

/// Genotypes of one individual at every marker.
pub fn individual<R: Rng>(map: &MarkerMap, design: Design, rng: &mut R) -> Vec<Genotype> {
    let mut first = vec![false; map.len()];
    gamete(map, rng, &mut first);
    match design {
        Design::Bc => first.iter().map(|&a| if a { Genotype::A } else { Genotype::H }).collect(),
        Design::F2 => {
            let mut second = vec![false; map.len()];
            gamete(map, rng, &mut second);
            first
                .iter()
                .zip(&second)
                .map(|(&a, &b)| match (a, b) {
                    (true, true) => Genotype::A,
                    (false, false) => Genotype::B,
                    _ => Genotype::H,
                })
                .collect()
        }
    }
}

fn assemble(map: MarkerMap, design: Design, rows: Vec<Vec<Genotype>>) -> Result<GenotypeDataset> {
    let calls = (0..map.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let ids = (1..=rows.len()).map(|t| format!("ind{t}")).collect();
    GenotypeDataset::new(map, design, ids, calls)
}

/// `n` individuals with no interaction between loci.
pub fn null_dataset<R: Rng>(map: &MarkerMap, design: Design, n: usize, rng: &mut R) -> Result<GenotypeDataset> {
    let rows = (0..n).map(|_| individual(map, design, rng)).collect();
    assemble(map.clone(), design, rows)
}

/// Simulates `n` individuals, then removes each one carrying genotype A at
/// both `marker1` and `marker2` with probability `drop`.
pub fn planted_dataset<R: Rng>(
    map: &MarkerMap,
    design: Design,
    n: usize,
    marker1: usize,
    marker2: usize,
    drop: f64,
    rng: &mut R,
) -> Result<GenotypeDataset> {
    if marker1 >= map.len() || marker2 >= map.len() || !(0.0..=1.0).contains(&drop) {
        return invalid("planted markers must exist and the drop rate must lie in [0, 1]");
    }
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let g = individual(map, design, rng);
        let both_a = g[marker1] == Genotype::A && g[marker2] == Genotype::A;
        if !(both_a && rng.random_bool(drop)) {
            rows.push(g);
        }
    }
    assemble(map.clone(), design, rows)
}
