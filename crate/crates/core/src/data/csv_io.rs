use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{validate_sample, Sample, StepLabel, TimeSeries};
use crate::error::{Error, Result};

/// Header written for telemetry files; the `step` column is appended when
/// the series carries step labels.
pub const TIMESERIES_HEADER: [&str; 4] = ["time_s", "current_a", "voltage_v", "temperature_c"];

/// Parses telemetry CSV with header `time_s,current_a,voltage_v,temperature_c[,step]`.
///
/// Columns are located by name, so extra columns are ignored. Line numbers in
/// errors are 1-based file lines (the header is line 1).
pub fn parse_timeseries_csv<R: Read>(cell_id: &str, source: R) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let position = |name: &'static str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or(Error::MissingColumn(name))
    };
    let i_time = position("time_s")?;
    let i_current = position("current_a")?;
    let i_voltage = position("voltage_v")?;
    let i_temp = position("temperature_c")?;
    let i_step = headers.iter().position(|h| h == "step");

    let mut samples = Vec::new();
    let mut labels = i_step.map(|_| Vec::new());
    let mut record = csv::StringRecord::new();
    let mut prev_time = f64::NEG_INFINITY;

    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::MalformedRow {
                line,
                message: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::MalformedRow {
                line,
                message: format!("cannot parse {name} `{raw}`"),
            })
        };
        let sample = Sample {
            time_s: field(i_time, "time_s")?,
            current_a: field(i_current, "current_a")?,
            voltage_v: field(i_voltage, "voltage_v")?,
            temperature_c: field(i_temp, "temperature_c")?,
        };
        validate_sample(&sample).map_err(|message| Error::MalformedRow { line, message })?;
        if sample.time_s <= prev_time {
            return Err(Error::NonMonotoneTime {
                line,
                time_s: sample.time_s,
            });
        }
        prev_time = sample.time_s;
        if let (Some(idx), Some(labels)) = (i_step, labels.as_mut()) {
            let raw = record.get(idx).unwrap_or("");
            let label = raw
                .parse::<StepLabel>()
                .map_err(|message| Error::MalformedRow { line, message })?;
            labels.push(label);
        }
        samples.push(sample);
    }

    TimeSeries::new(cell_id, samples, labels)
}

pub fn read_timeseries_csv(cell_id: &str, path: &Path) -> Result<TimeSeries> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_timeseries_csv(cell_id, BufReader::new(file))
}

/// Writes `series` using the canonical header. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_timeseries_csv<W: Write>(series: &TimeSeries, sink: W) -> Result<()> {
    let mut out = BufWriter::new(sink);
    let labels = series.step_labels();
    write!(out, "{}", TIMESERIES_HEADER.join(","))?;
    if labels.is_some() {
        write!(out, ",step")?;
    }
    writeln!(out)?;
    for (i, s) in series.samples().iter().enumerate() {
        write!(
            out,
            "{},{},{},{}",
            s.time_s, s.current_a, s.voltage_v, s.temperature_c
        )?;
        if let Some(labels) = labels {
            write!(out, ",{}", labels[i])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
