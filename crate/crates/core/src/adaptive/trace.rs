use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const TRACE_HEADER: &str = "cycle_index,throughput_ah,offline_ah,adaptive_ah,correction_ah,cluster_id";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub cycle_index: usize,
    pub throughput_ah: f64,
    pub offline_ah: f64,
    pub adaptive_ah: f64,
    pub correction_ah: f64,
    pub cluster_id: usize,
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(TRACE_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.cycle_index.to_string(),
            r.throughput_ah.to_string(),
            r.offline_ah.to_string(),
            r.adaptive_ah.to_string(),
            r.correction_ah.to_string(),
            r.cluster_id.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
