//! Two-locus interaction scans of genotype data.
//!
//! Every marker on one chromosome is cross-tabulated against every marker on
//! another; the genome-wide maximum Pearson statistic is converted into an
//! adjusted p-value either from the chi-square field tail formulas or by
//! permutation.

pub mod data;
pub mod pvalue;
pub mod scan;
pub mod synth;
pub mod table;

pub use data::{Design, Genotype, GenotypeDataset, Marker, MarkerMap};
pub use pvalue::{
    adjusted_pvalue, design_spec, permutation_pvalue, AdjustOptions, AdjustedPValue, PValueCalculator,
    PermutationPairs, PermutationResult,
};
pub use scan::{scan, PairScan, Peak, ScanResult};
pub use table::{decompose_3x3, pearson_chi_square, CrossTable, Decomposition};

/// Suppression radius for the peak table.
pub const PEAK_RADIUS_CM: f64 = 10.0;
pub const DEFAULT_TOP_K: usize = 20;
