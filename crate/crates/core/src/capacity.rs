//! MCS ladder: SINR thresholds, per-step capacities and the peak-rate
//! formula used to scale the ladder across carrier configurations.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::db_to_lin;

const DEFAULT_LADDER_CSV: &str = include_str!("../data/mcs_100mhz_4layers.csv");
pub const MAX_ENTRIES: usize = 28;

#[derive(Debug, Error, PartialEq)]
pub enum CapacityError {
    #[error("table is not monotone at row {index}: {reason}")]
    NonMonotoneTable { index: usize, reason: &'static str },
    #[error("bad row {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("table must hold 1 to {MAX_ENTRIES} entries, got {0}")]
    BadLength(usize),
    #[error("no carrier preset for {0} MHz")]
    UnsupportedBandwidth(f64),
    #[error("io error: {0}")]
    Io(String),
}

/// Parameters of the per-carrier peak data rate formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ts38306Params {
    pub num_carriers: u32,
    pub modulation_order: u32,
    pub scaling_factor: f64,
    pub mimo_layers: u32,
    pub max_code_rate: f64,
    pub n_prb: u32,
    pub symbol_duration_us: f64,
    pub overhead: f64,
}

/// Overhead calibrated so the 100 MHz / 4-layer / 64QAM peak matches the
/// top ladder step (1226.93 Mbps) to within 0.01%.
pub const CALIBRATED_OVERHEAD: f64 = 0.398;

impl Ts38306Params {
    /// Average OFDM symbol duration for numerology µ (14 symbols per slot).
    pub fn symbol_duration_us_for(numerology: u32) -> f64 {
        1e3 / (14.0 * f64::from(1u32 << numerology))
    }

    /// Single-carrier preset for a channel bandwidth in MHz.
    pub fn preset(bandwidth_mhz: f64, mimo_layers: u32) -> Result<Self, CapacityError> {
        // (bandwidth, numerology, PRBs)
        const PRESETS: [(f64, u32, u32); 6] = [(20.0, 1, 51), (40.0, 1, 106), (50.0, 1, 133), (100.0, 1, 273), (200.0, 3, 132), (400.0, 3, 264)];
        let &(_, mu, n_prb) = PRESETS
            .iter()
            .find(|(bw, _, _)| (bw - bandwidth_mhz).abs() < 1e-9)
            .ok_or(CapacityError::UnsupportedBandwidth(bandwidth_mhz))?;
        Ok(Self {
            num_carriers: 1,
            modulation_order: 6,
            scaling_factor: 1.0,
            mimo_layers,
            max_code_rate: 948.0 / 1024.0,
            n_prb,
            symbol_duration_us: Self::symbol_duration_us_for(mu),
            overhead: CALIBRATED_OVERHEAD,
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.overhead) {
            return Err("overhead must lie in [0, 1]".into());
        }
        if ![2, 4, 6, 8].contains(&self.modulation_order) {
            return Err(format!("modulation order {} not in {{2,4,6,8}}", self.modulation_order));
        }
        if self.mimo_layers == 0 || !(self.symbol_duration_us > 0.0) {
            return Err("layers and symbol duration must be positive".into());
        }
        Ok(())
    }
}

/// Peak rate in Mbps: 1e-6 · Σ_j Q·f·v·R·N_prb·12 / T_s · (1 − OH).
pub fn ts38306_rate(p: &Ts38306Params) -> f64 {
    let per_carrier = f64::from(p.modulation_order)
        * p.scaling_factor
        * f64::from(p.mimo_layers)
        * p.max_code_rate
        * f64::from(p.n_prb)
        * 12.0
        / (p.symbol_duration_us * 1e-6)
        * (1.0 - p.overhead);
    1e-6 * per_carrier * f64::from(p.num_carriers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: usize,
    pub sinr_threshold_db: f64,
    pub capacity_mbps: f64,
}

/// Result of a ladder lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityLevel {
    /// Position in the table (not the MCS index column), `None` below the first step.
    pub level: Option<usize>,
    pub capacity_mbps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityTable {
    entries: Vec<McsEntry>,
    thresholds_lin: Vec<f64>,
    pub bandwidth_mhz: f64,
    pub mimo_layers: u32,
}

impl CapacityTable {
    pub fn new(entries: Vec<McsEntry>, bandwidth_mhz: f64, mimo_layers: u32) -> Result<Self, CapacityError> {
        if entries.is_empty() || entries.len() > MAX_ENTRIES {
            return Err(CapacityError::BadLength(entries.len()));
        }
        for (i, e) in entries.iter().enumerate() {
            if !e.sinr_threshold_db.is_finite() || !e.capacity_mbps.is_finite() || e.capacity_mbps < 0.0 {
                return Err(CapacityError::BadRow { line: i + 2, reason: "non-finite or negative value".into() });
            }
            if i > 0 {
                let prev = &entries[i - 1];
                if e.index <= prev.index {
                    return Err(CapacityError::NonMonotoneTable { index: i, reason: "index" });
                }
                if e.sinr_threshold_db <= prev.sinr_threshold_db {
                    return Err(CapacityError::NonMonotoneTable { index: i, reason: "threshold" });
                }
                if e.capacity_mbps < prev.capacity_mbps {
                    return Err(CapacityError::NonMonotoneTable { index: i, reason: "capacity" });
                }
            }
        }
        let thresholds_lin = entries.iter().map(|e| db_to_lin(e.sinr_threshold_db)).collect();
        Ok(Self { entries, thresholds_lin, bandwidth_mhz, mimo_layers })
    }

    pub fn from_csv_reader<R: Read>(reader: R, bandwidth_mhz: f64, mimo_layers: u32) -> Result<Self, CapacityError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| CapacityError::BadRow { line: 1, reason: e.to_string() })?.clone();
        let expected = ["index", "sinr_threshold_db", "capacity_mbps"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(CapacityError::BadRow { line: 1, reason: format!("expected header {}", expected.join(",")) });
        }
        let mut entries = Vec::new();
        for (i, rec) in rdr.deserialize::<McsEntry>().enumerate() {
            let e = rec.map_err(|e| CapacityError::BadRow { line: i + 2, reason: e.to_string() })?;
            entries.push(e);
        }
        Self::new(entries, bandwidth_mhz, mimo_layers)
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn threshold_lin(&self, level: usize) -> f64 {
        self.thresholds_lin[level]
    }

    pub fn thresholds_lin(&self) -> &[f64] {
        &self.thresholds_lin
    }

    pub fn capacity(&self, level: usize) -> f64 {
        self.entries[level].capacity_mbps
    }

    pub fn top_capacity(&self) -> f64 {
        self.entries.last().expect("non-empty").capacity_mbps
    }

    pub fn capacity_of(&self, level: Option<usize>) -> f64 {
        level.map_or(0.0, |l| self.capacity(l))
    }

    /// Highest level with S ≥ th·I. I = 0 with S > 0 grants the top level;
    /// S = 0 grants nothing.
    pub fn capacity_from_sinr(&self, signal_mw: f64, interference_mw: f64) -> CapacityLevel {
        if !(signal_mw > 0.0) {
            return CapacityLevel { level: None, capacity_mbps: 0.0 };
        }
        let level = (0..self.entries.len()).rev().find(|&i| signal_mw >= self.thresholds_lin[i] * interference_mw);
        CapacityLevel { level, capacity_mbps: self.capacity_of(level) }
    }

    /// Same thresholds, capacities multiplied by `factor`.
    pub fn scaled(&self, factor: f64, bandwidth_mhz: f64, mimo_layers: u32) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|e| McsEntry { capacity_mbps: e.capacity_mbps * factor, ..e.clone() })
            .collect();
        Self { entries, thresholds_lin: self.thresholds_lin.clone(), bandwidth_mhz, mimo_layers }
    }
}

pub fn capacity_from_sinr(table: &CapacityTable, signal_mw: f64, interference_mw: f64) -> CapacityLevel {
    table.capacity_from_sinr(signal_mw, interference_mw)
}

pub fn load_table(path: impl AsRef<Path>, bandwidth_mhz: f64, mimo_layers: u32) -> Result<CapacityTable, CapacityError> {
    let f = std::fs::File::open(path.as_ref()).map_err(|e| CapacityError::Io(e.to_string()))?;
    CapacityTable::from_csv_reader(f, bandwidth_mhz, mimo_layers)
}

/// The shipped 100 MHz / 4-layer ladder, rescaled by the peak-rate ratio
/// for other bandwidths and layer counts.
pub fn default_table(bandwidth_mhz: f64, mimo_layers: u32) -> Result<CapacityTable, CapacityError> {
    let base = CapacityTable::from_csv_reader(DEFAULT_LADDER_CSV.as_bytes(), 100.0, 4)?;
    if (bandwidth_mhz - 100.0).abs() < 1e-9 && mimo_layers == 4 {
        return Ok(base);
    }
    let reference = ts38306_rate(&Ts38306Params::preset(100.0, 4)?);
    let target = ts38306_rate(&Ts38306Params::preset(bandwidth_mhz, mimo_layers)?);
    Ok(base.scaled(target / reference, bandwidth_mhz, mimo_layers))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_formula() {
        let mut p = Ts38306Params::preset(100.0, 4).unwrap();
        let top = ts38306_rate(&p);
        assert!((top - 1226.925063).abs() / 1226.925063 < 1e-3, "{top}");
        p.mimo_layers = 8;
        assert!((ts38306_rate(&p) - 2.0 * top).abs() < 1e-9);
        p.overhead = 1.0;
        assert_eq!(ts38306_rate(&p), 0.0);
    }

    #[test]
    fn uncalibrated_example_value() {
        // 256QAM, OH 0.14: independent evaluation
        let p = Ts38306Params {
            num_carriers: 1,
            modulation_order: 8,
            scaling_factor: 1.0,
            mimo_layers: 4,
            max_code_rate: 948.0 / 1024.0,
            n_prb: 273,
            symbol_duration_us: 35.68,
            overhead: 0.14,
        };
        let expected = 8.0 * 4.0 * (948.0 / 1024.0) * 273.0 * 12.0 / 35.68e-6 * 0.86 * 1e-6;
        assert!((ts38306_rate(&p) - expected).abs() < 1e-9);
        assert!((expected - 2339.2458).abs() < 1e-3, "{expected}");
        // far above the calibrated ladder plateau
        assert!(expected / 1226.925063 > 1.9);
    }

    #[test]
    fn default_ladder_endpoints() {
        let t = default_table(100.0, 4).unwrap();
        assert_eq!(t.len(), 25);
        assert_eq!(t.top_capacity(), 1226.925063);
        assert_eq!(t.capacity(0), 51.76899);
        assert!((t.entries()[0].sinr_threshold_db + 4.92).abs() < 0.01);
        assert_eq!(t.capacity_from_sinr(db_to_lin(40.0), 1.0).capacity_mbps, 1226.925063);
        assert_eq!(t.capacity_from_sinr(db_to_lin(-10.0), 1.0), CapacityLevel { level: None, capacity_mbps: 0.0 });
        assert_eq!(t.capacity_from_sinr(1.0, 0.0).level, Some(24));
        assert_eq!(t.capacity_from_sinr(0.0, 0.0).level, None);
    }

    #[test]
    fn threshold_is_inclusive() {
        let t = default_table(100.0, 4).unwrap();
        for i in 0..t.len() {
            let got = t.capacity_from_sinr(t.threshold_lin(i), 1.0);
            assert_eq!(got.level, Some(i));
        }
    }

    #[test]
    fn scaled_presets() {
        let base = default_table(100.0, 4).unwrap();
        let wide = default_table(400.0, 4).unwrap();
        let ratio = (264.0 * 8.0) / (273.0 * 2.0);
        assert!((wide.top_capacity() / base.top_capacity() - ratio).abs() < 1e-12);
        assert_eq!(wide.thresholds_lin(), base.thresholds_lin());
        let two = default_table(100.0, 2).unwrap();
        assert!((two.top_capacity() * 2.0 - base.top_capacity()).abs() < 1e-9);
        assert!(matches!(default_table(73.0, 4), Err(CapacityError::UnsupportedBandwidth(_))));
    }

    #[test]
    fn csv_errors() {
        let bad = "index,sinr_threshold_db,capacity_mbps\n0,1.0,10\n1,0.5,20\n";
        assert!(matches!(CapacityTable::from_csv_reader(bad.as_bytes(), 100.0, 4), Err(CapacityError::NonMonotoneTable { index: 1, .. })));
        let garbage = "index,sinr_threshold_db,capacity_mbps\n0,abc,10\n";
        assert!(matches!(CapacityTable::from_csv_reader(garbage.as_bytes(), 100.0, 4), Err(CapacityError::BadRow { line: 2, .. })));
        let header = "i,th,c\n0,1,1\n";
        assert!(matches!(CapacityTable::from_csv_reader(header.as_bytes(), 100.0, 4), Err(CapacityError::BadRow { line: 1, .. })));
    }
}
