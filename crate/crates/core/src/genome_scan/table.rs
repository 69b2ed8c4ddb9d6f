//! Contingency tables and the Pearson independence statistic.

use serde::Serialize;

use crate::error::{invalid, Error, Margin, Result};

/// An `r × c` table of counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl CrossTable {
    pub fn new(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return invalid(format!("cross table must be at least 2x2, got {rows}x{cols}"));
        }
        if counts.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: counts.len(),
            });
        }
        Ok(Self { rows, cols, counts })
    }

    pub fn from_2x2(c: [[u64; 2]; 2]) -> Self {
        Self::new(2, 2, c.concat()).expect("2x2")
    }

    pub fn from_3x3(c: [[u64; 3]; 3]) -> Self {
        Self::new(3, 3, c.concat()).expect("3x3")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self.get(i, j)).sum()).collect()
    }

    /// The table with rows and columns reordered.
    pub fn permuted(&self, row_order: &[usize], col_order: &[usize]) -> Self {
        let counts = row_order
            .iter()
            .flat_map(|&i| col_order.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Self::new(self.rows, self.cols, counts).expect("same shape")
    }
}

/// Pearson chi-square statistic for independence, without continuity correction.
pub fn pearson_chi_square(table: &CrossTable) -> Result<f64> {
    let rows = table.row_sums();
    let cols = table.col_sums();
    if let Some(index) = rows.iter().position(|&r| r == 0) {
        return Err(Error::DegenerateTable {
            margin: Margin::Row,
            index,
        });
    }
    if let Some(index) = cols.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateTable {
            margin: Margin::Column,
            index,
        });
    }
    Ok(chi_square_from_counts(table.counts(), &rows, &cols))
}

/// The statistic for counts with known, strictly positive margins.
pub(crate) fn chi_square_from_counts(counts: &[u64], rows: &[u64], cols: &[u64]) -> f64 {
    let n = rows.iter().sum::<u64>() as f64;
    let mut t = 0.0;
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            let expected = r as f64 * c as f64 / n;
            let d = counts[i * cols.len() + j] as f64 - expected;
            t += d * d / expected;
        }
    }
    t
}

/// The four collapsed 2×2 tables of a 3×3 table and their statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub tables: [CrossTable; 4],
    pub components: [f64; 4],
    /// `T(X)` of the full table.
    pub total: f64,
}

impl Decomposition {
    /// `T(X) − Σ T(X_i)`.
    pub fn remainder(&self) -> f64 {
        self.total - self.components.iter().sum::<f64>()
    }
}

/// Splits a 3×3 table `x` into
///
/// ```text
/// X1 = [x11, x12; x21, x22]
/// X2 = [x11+x12, x13; x21+x22, x23]
/// X3 = [x11+x21, x12+x22; x31, x32]
/// X4 = [x11+x12+x21+x22, x13+x23; x31+x32, x33]
/// ```
///
/// whose statistics are asymptotically independent `χ²_1` summing to `T(x)`
/// up to `O_p(n^{-1/2})` under independence.
pub fn decompose_3x3(table: &CrossTable) -> Result<Decomposition> {
    if table.rows() != 3 || table.cols() != 3 {
        return invalid(format!("decomposition needs a 3x3 table, got {}x{}", table.rows(), table.cols()));
    }
    let x = |i: usize, j: usize| table.get(i - 1, j - 1);
    let tables = [
        CrossTable::from_2x2([[x(1, 1), x(1, 2)], [x(2, 1), x(2, 2)]]),
        CrossTable::from_2x2([[x(1, 1) + x(1, 2), x(1, 3)], [x(2, 1) + x(2, 2), x(2, 3)]]),
        CrossTable::from_2x2([[x(1, 1) + x(2, 1), x(1, 2) + x(2, 2)], [x(3, 1), x(3, 2)]]),
        CrossTable::from_2x2([
            [x(1, 1) + x(1, 2) + x(2, 1) + x(2, 2), x(1, 3) + x(2, 3)],
            [x(3, 1) + x(3, 2), x(3, 3)],
        ]),
    ];
    let total = pearson_chi_square(table)?;
    let mut components = [0.0; 4];
    for (c, t) in components.iter_mut().zip(&tables) {
        *c = pearson_chi_square(t)?;
    }
    Ok(Decomposition {
        tables,
        components,
        total,
    })
}
