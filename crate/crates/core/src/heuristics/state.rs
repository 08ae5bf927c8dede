use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iter: usize,
    pub timestamp_s: f64,
    pub objective: f64,
}

/// Incumbent of a local search and the trace of accepted objectives.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchState {
    pub curr_best_sol: BTreeMap<NodeId, f64>,
    pub curr_best_obj: f64,
    pub prev_best_obj: f64,
    pub log: Vec<LogEntry>,
    /// Powers and objective at the end of the on/off phase.
    pub phase1_powers: BTreeMap<NodeId, f64>,
    pub phase1_objective: f64,
    /// Number of model solves performed.
    pub evaluations: usize,
}

impl SearchState {
    pub fn record(&mut self, timestamp_s: f64, objective: f64) {
        let iter = self.log.len();
        self.log.push(LogEntry { iter, timestamp_s, objective });
    }

    /// True when every logged objective is at least as good as its predecessor.
    pub fn log_is_monotone(&self, maximize: bool) -> bool {
        self.log.windows(2).all(|w| if maximize { w[1].objective >= w[0].objective } else { w[1].objective <= w[0].objective })
    }

    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        write_trace_csv(&self.log, w)
    }
}

pub fn write_trace_csv<W: Write>(log: &[LogEntry], w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for e in log {
        wtr.serialize(e)?;
    }
    if log.is_empty() {
        wtr.write_record(["iter", "timestamp_s", "objective"])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<LogEntry>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip() {
        let mut s = SearchState::default();
        s.record(7.02233409881592, 253.138814113383);
        s.record(9.33160305023193, 366.912716625);
        let mut buf = Vec::new();
        s.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iter,timestamp_s,objective\n0,7.02233409881592,253.138814113383\n"), "{text}");
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), s.log);
        assert!(s.log_is_monotone(true));
        assert!(!s.log_is_monotone(false));
    }
}
