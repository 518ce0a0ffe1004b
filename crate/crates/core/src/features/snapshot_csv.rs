use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::{FeatureVector, LabeledSnapshot, FEATURE_NAMES};
use crate::error::{Error, Result};

pub const SNAPSHOT_HEADER: &str = "cell_id,cycle_index,q_initial_c20_ah,q_ah_aging_ah,e_ch_aging_wh,r0_ch_ch_low_2s_ohm,r0_dis_ch_high_2s_ohm,t_aging_c,label_q_ch_c20_ah";

pub fn write_snapshots_csv<W: Write>(snapshots: &[LabeledSnapshot], sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(SNAPSHOT_HEADER.split(','))?;
    for s in snapshots {
        let mut row = vec![s.cell_id.clone(), s.cycle_index.to_string()];
        row.extend(s.features.to_array().iter().map(|v| v.to_string()));
        row.push(s.label_q_ch_c20_ah.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_snapshots_csv<R: Read>(source: R) -> Result<Vec<LabeledSnapshot>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != SNAPSHOT_HEADER {
        return Err(Error::Schema(format!("unexpected snapshot header `{}`", header.join(","))));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |m: String| Error::MalformedRow { line, message: m };
        let num = |k: usize| -> Result<f64> {
            let raw = &record[k];
            let v: f64 = raw.parse().map_err(|_| bad(format!("cannot parse {} `{raw}`", header[k])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("non-finite {}", header[k])))
            }
        };
        let cycle_index = record[1].parse().map_err(|_| bad(format!("cannot parse cycle_index `{}`", &record[1])))?;
        let mut values = [0.0; 6];
        for (k, v) in values.iter_mut().enumerate() {
            *v = num(2 + k)?;
        }
        let label = num(2 + FEATURE_NAMES.len())?;
        if !(label > 0.0) {
            return Err(bad(format!("label {label} must be positive")));
        }
        out.push(LabeledSnapshot {
            cell_id: record[0].to_string(),
            cycle_index,
            features: FeatureVector::from_array(values),
            label_q_ch_c20_ah: label,
        });
    }
    Ok(out)
}

pub fn read_snapshots_csv(path: &Path) -> Result<Vec<LabeledSnapshot>> {
    let file = crate::fsutil::open(path)?;
    parse_snapshots_csv(BufReader::new(file))
}
