//! Marker maps, genotype calls and their CSV formats.
//!
//! Map CSV: `marker_id,chromosome,position_cM`. Genotype CSV: `individual_id`
//! followed by one column per marker, cells `A`, `B`, `H` or `NA` (an empty
//! cell or `-` also reads as missing). Positions are stored in Morgans.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// Intercross: calls A, B, H; 3×3 tables.
    F2,
    /// Backcross: calls A, H; 2×2 tables.
    Bc,
}

impl Design {
    /// Genotype classes per locus.
    pub fn classes(self) -> usize {
        match self {
            Design::F2 => 3,
            Design::Bc => 2,
        }
    }
}

impl std::str::FromStr for Design {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f2" => Ok(Design::F2),
            "bc" => Ok(Design::Bc),
            other => Err(Error::Config(format!("unknown design {other:?} (expected f2 or bc)"))),
        }
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Design::F2 => "f2",
            Design::Bc => "bc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Genotype {
    A,
    B,
    H,
    Missing,
}

impl Genotype {
    pub fn parse(cell: &str) -> Result<Self> {
        match cell.trim() {
            "A" | "a" => Ok(Genotype::A),
            "B" | "b" => Ok(Genotype::B),
            "H" | "h" => Ok(Genotype::H),
            "NA" | "na" | "" | "-" => Ok(Genotype::Missing),
            other => Err(Error::Input(format!("unknown genotype call {other:?}"))),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Genotype::A => "A",
            Genotype::B => "B",
            Genotype::H => "H",
            Genotype::Missing => "NA",
        }
    }

    /// Table row/column index under `design`, `None` when missing.
    #[inline]
    pub fn class(self, design: Design) -> Option<usize> {
        match (self, design) {
            (Genotype::A, _) => Some(0),
            (Genotype::B, Design::F2) => Some(1),
            (Genotype::H, Design::F2) => Some(2),
            (Genotype::H, Design::Bc) => Some(1),
            (Genotype::B, Design::Bc) | (Genotype::Missing, _) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marker {
    pub id: String,
    pub chromosome: u32,
    /// Morgans.
    pub position: f64,
}

/// Markers sorted by chromosome, then position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkerMap {
    markers: Vec<Marker>,
    /// `(chromosome, first index, end index)` in sorted order.
    #[serde(skip)]
    blocks: Vec<(u32, usize, usize)>,
}

#[derive(Deserialize)]
struct MapRow {
    marker_id: String,
    chromosome: u32,
    #[serde(rename = "position_cM")]
    position_cm: f64,
}

impl MarkerMap {
    pub fn new(mut markers: Vec<Marker>) -> Result<Self> {
        if markers.is_empty() {
            return Err(Error::Input("marker map is empty".into()));
        }
        let mut seen = HashMap::new();
        for m in &markers {
            if !m.position.is_finite() {
                return Err(Error::Input(format!("marker {}: position must be finite", m.id)));
            }
            if seen.insert(m.id.as_str(), ()).is_some() {
                return Err(Error::Input(format!("duplicate marker id {:?}", m.id)));
            }
        }
        markers.sort_by(|a, b| a.chromosome.cmp(&b.chromosome).then(a.position.total_cmp(&b.position)));
        let mut blocks: Vec<(u32, usize, usize)> = Vec::new();
        for (i, m) in markers.iter().enumerate() {
            match blocks.last_mut() {
                Some((c, _, end)) if *c == m.chromosome => {
                    if markers[i - 1].position == m.position {
                        return Err(Error::Input(format!(
                            "markers {} and {} share position {} cM on chromosome {}",
                            markers[i - 1].id,
                            m.id,
                            m.position * 100.0,
                            m.chromosome
                        )));
                    }
                    *end = i + 1;
                }
                _ => blocks.push((m.chromosome, i, i + 1)),
            }
        }
        Ok(Self { markers, blocks })
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut markers = Vec::new();
        for row in rdr.deserialize() {
            let row: MapRow = row?;
            markers.push(Marker {
                id: row.marker_id,
                chromosome: row.chromosome,
                position: row.position_cm / 100.0,
            });
        }
        Self::new(markers)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["marker_id", "chromosome", "position_cM"])?;
        for m in &self.markers {
            w.write_record([m.id.clone(), m.chromosome.to_string(), format!("{}", m.position * 100.0)])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf8"))
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn chromosomes(&self) -> Vec<u32> {
        self.blocks.iter().map(|b| b.0).collect()
    }

    /// Index range of a chromosome's markers in sorted order.
    pub fn chromosome_range(&self, chromosome: u32) -> Option<std::ops::Range<usize>> {
        self.blocks
            .iter()
            .find(|b| b.0 == chromosome)
            .map(|&(_, start, end)| start..end)
    }

    /// Positions on a chromosome shifted so the first marker sits at 0.
    pub fn axis(&self, chromosome: u32) -> Option<Vec<f64>> {
        let range = self.chromosome_range(chromosome)?;
        let origin = self.markers[range.start].position;
        Some(self.markers[range].iter().map(|m| m.position - origin).collect())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.markers.iter().position(|m| m.id == id)
    }
}

/// Genotype calls for one marker packed as bitsets over individuals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerBits {
    /// One bitset per genotype class, in table order.
    pub classes: Vec<Vec<u64>>,
}

impl MarkerBits {
    pub fn from_calls(calls: &[Genotype], design: Design) -> Self {
        let words = calls.len().div_ceil(64);
        let mut classes = vec![vec![0u64; words]; design.classes()];
        for (t, g) in calls.iter().enumerate() {
            if let Some(c) = g.class(design) {
                classes[c][t / 64] |= 1 << (t % 64);
            }
        }
        Self { classes }
    }
}

/// Genotype calls of `n` individuals at every marker of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeDataset {
    map: MarkerMap,
    design: Design,
    individuals: Vec<String>,
    /// `calls[marker][individual]`, markers in map order.
    calls: Vec<Vec<Genotype>>,
}

impl GenotypeDataset {
    /// `calls[marker][individual]` with markers in the map's sorted order.
    pub fn new(map: MarkerMap, design: Design, individuals: Vec<String>, calls: Vec<Vec<Genotype>>) -> Result<Self> {
        if calls.len() != map.len() {
            return Err(Error::DimensionMismatch {
                expected: map.len(),
                found: calls.len(),
            });
        }
        for (j, col) in calls.iter().enumerate() {
            if col.len() != individuals.len() {
                return Err(Error::DimensionMismatch {
                    expected: individuals.len(),
                    found: col.len(),
                });
            }
            if design == Design::Bc {
                if let Some(t) = col.iter().position(|g| *g == Genotype::B) {
                    return Err(Error::Input(format!(
                        "backcross data has a B call (individual {}, marker {})",
                        individuals[t],
                        map.markers()[j].id
                    )));
                }
            }
        }
        Ok(Self {
            map,
            design,
            individuals,
            calls,
        })
    }

    /// Reads a genotype CSV whose marker columns may come in any order.
    pub fn from_reader(map: MarkerMap, design: Design, reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::Input("genotype file needs an id column and at least one marker".into()));
        }
        let mut column_of = vec![None; map.len()];
        for (col, name) in header.iter().enumerate().skip(1) {
            let j = map
                .index_of(name)
                .ok_or_else(|| Error::Input(format!("genotype column {name:?} is not in the marker map")))?;
            if column_of[j].replace(col).is_some() {
                return Err(Error::Input(format!("marker {name:?} appears twice in the genotype header")));
            }
        }
        if let Some(j) = column_of.iter().position(Option::is_none) {
            return Err(Error::Input(format!(
                "marker {:?} has no genotype column",
                map.markers()[j].id
            )));
        }
        let mut individuals = Vec::new();
        let mut calls = vec![Vec::new(); map.len()];
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            individuals.push(record.get(0).unwrap_or_default().to_string());
            for (j, col) in column_of.iter().enumerate() {
                let cell = record.get(col.expect("checked")).unwrap_or_default();
                let g = Genotype::parse(cell).map_err(|e| Error::Input(format!("data row {}: {e}", line + 1)))?;
                calls[j].push(g);
            }
        }
        Self::new(map, design, individuals, calls)
    }

    pub fn from_paths(map: impl AsRef<Path>, genotypes: impl AsRef<Path>, design: Design) -> Result<Self> {
        let map = MarkerMap::from_path(map)?;
        Self::from_reader(map, design, std::fs::File::open(genotypes)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["individual_id".to_string()];
        header.extend(self.map.markers().iter().map(|m| m.id.clone()));
        w.write_record(&header)?;
        for (t, id) in self.individuals.iter().enumerate() {
            let mut row = vec![id.as_str()];
            row.extend(self.calls.iter().map(|c| c[t].symbol()));
            w.write_record(&row)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("utf8"))
    }

    pub fn map(&self) -> &MarkerMap {
        &self.map
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn individuals(&self) -> &[String] {
        &self.individuals
    }

    pub fn n(&self) -> usize {
        self.individuals.len()
    }

    pub fn calls(&self, marker: usize) -> &[Genotype] {
        &self.calls[marker]
    }

    pub fn bitsets(&self) -> Vec<MarkerBits> {
        self.calls.iter().map(|c| MarkerBits::from_calls(c, self.design)).collect()
    }

    /// Bitsets with individual `t` taking the calls of individual `order[t]`.
    pub fn permuted_bitsets(&self, order: &[usize]) -> Vec<MarkerBits> {
        let mut buf = vec![Genotype::Missing; self.n()];
        self.calls
            .iter()
            .map(|c| {
                for (slot, &src) in buf.iter_mut().zip(order) {
                    *slot = c[src];
                }
                MarkerBits::from_calls(&buf, self.design)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAP: &str = "marker_id,chromosome,position_cM\nm3,2,10\nm1,1,0\nm2,1,12.5\nm4,2,0\n";

    #[test]
    fn map_is_sorted_and_in_morgans() {
        let map = MarkerMap::from_reader(MAP.as_bytes()).unwrap();
        let ids: Vec<&str> = map.markers().iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, ["m1", "m2", "m4", "m3"]);
        assert_eq!(map.axis(1).unwrap(), vec![0.0, 0.125]);
        assert_eq!(map.chromosomes(), vec![1, 2]);
        let round = MarkerMap::from_reader(map.to_csv().unwrap().as_bytes()).unwrap();
        assert_eq!(round, map);
    }

    #[test]
    fn map_rejects_ties_and_duplicates() {
        assert!(MarkerMap::from_reader("marker_id,chromosome,position_cM\na,1,5\nb,1,5\n".as_bytes()).is_err());
        assert!(MarkerMap::from_reader("marker_id,chromosome,position_cM\na,1,5\na,2,5\n".as_bytes()).is_err());
    }

    #[test]
    fn genotype_columns_follow_the_map() {
        let map = MarkerMap::from_reader(MAP.as_bytes()).unwrap();
        let geno = "individual_id,m3,m4,m2,m1\ni1,A,B,H,NA\ni2,H,H,A,B\n";
        let data = GenotypeDataset::from_reader(map, Design::F2, geno.as_bytes()).unwrap();
        assert_eq!(data.calls(0), &[Genotype::Missing, Genotype::B]);
        assert_eq!(data.calls(3), &[Genotype::A, Genotype::H]);
        let bits = data.bitsets();
        assert_eq!(bits[0].classes[1][0], 0b10);
    }

    #[test]
    fn backcross_rejects_b_calls() {
        let map = MarkerMap::from_reader(MAP.as_bytes()).unwrap();
        let geno = "individual_id,m1,m2,m3,m4\ni1,A,B,H,A\n";
        let err = GenotypeDataset::from_reader(map, Design::Bc, geno.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("B call"));
    }

    #[test]
    fn unknown_columns_and_calls() {
        let map = MarkerMap::from_reader(MAP.as_bytes()).unwrap();
        assert!(GenotypeDataset::from_reader(map.clone(), Design::F2, "id,m1,zz\n".as_bytes()).is_err());
        let err = GenotypeDataset::from_reader(map, Design::F2, "id,m1,m2,m3,m4\nx,A,Q,A,A\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }
}
