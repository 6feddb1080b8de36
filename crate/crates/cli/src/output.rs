//! File formats: trace and sweep CSVs, JSON documents, atomic writes.

use std::io::Write;
use std::path::Path;

use switchnet_core::harness::{CellAggregate, SweepRecord};
use switchnet_core::SimulationTrace;

use crate::CliError;

/// Nine significant digits, plain decimal where reasonable, `.` separator.
/// Non-finite values become an empty field.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

/// Columns: `t, v_in, i_src, node_1 .. node_N`.
pub fn trace_csv(trace: &SimulationTrace) -> Result<Vec<u8>, CliError> {
    let mut header: Vec<String> = ["t", "v_in", "i_src"].map(String::from).to_vec();
    header.extend((1..=trace.interface_nodes.len()).map(|k| format!("node_{k}")));
    let rows = (0..trace.len()).map(|k| {
        let mut row =
            vec![fmt_num(trace.times[k]), fmt_num(trace.applied_voltage[k]), fmt_num(trace.source_current[k])];
        row.extend(trace.interface_voltages[k].iter().map(|&v| fmt_num(v)));
        row
    });
    csv_bytes(&header, rows)
}

/// Parse a trace CSV written by [`trace_csv`]. Interface node grid indices
/// are not stored in the file and come back as column positions.
pub fn read_trace_csv(path: &Path) -> Result<SimulationTrace, CliError> {
    let bad = |msg: String| CliError::Io(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < 4 || &header[0] != "t" || &header[1] != "v_in" || &header[2] != "i_src" {
        return Err(bad("not a trace file (expected t, v_in, i_src, node_* columns)".into()));
    }
    let nodes = header.len() - 3;
    let mut trace = SimulationTrace {
        dt: 0.0,
        times: Vec::new(),
        applied_voltage: Vec::new(),
        source_current: Vec::new(),
        interface_nodes: (0..nodes).collect(),
        interface_voltages: Vec::new(),
        switching_events: 0,
        max_residual: 0.0,
    };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        if vals.len() != header.len() {
            return Err(bad(format!("row {} has {} fields", line + 2, vals.len())));
        }
        trace.times.push(vals[0]);
        trace.applied_voltage.push(vals[1]);
        trace.source_current.push(vals[2]);
        trace.interface_voltages.push(vals[3..].to_vec());
    }
    if trace.len() < 2 {
        return Err(bad("trace needs at least two rows".into()));
    }
    trace.dt = trace.times[1] - trace.times[0];
    Ok(trace)
}

pub fn records_csv(records: &[SweepRecord]) -> Result<Vec<u8>, CliError> {
    let header = [
        "alpha",
        "beta",
        "xi",
        "v",
        "trial",
        "seed",
        "entropy_bits",
        "energy_joules",
        "switching_events",
        "edge_count",
        "error",
    ]
    .map(String::from);
    let rows = records.iter().map(|r| {
        vec![
            fmt_num(r.alpha),
            fmt_num(r.beta),
            r.xi.to_string(),
            fmt_num(r.v),
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_num(r.entropy_bits),
            fmt_num(r.energy_joules),
            r.switching_events.to_string(),
            r.edge_count.to_string(),
            r.error.clone().unwrap_or_default(),
        ]
    });
    csv_bytes(&header, rows)
}

pub fn aggregate_csv(aggregates: &[CellAggregate]) -> Result<Vec<u8>, CliError> {
    let header = [
        "alpha",
        "beta",
        "xi",
        "v",
        "trials",
        "failed",
        "entropy_mean",
        "entropy_std",
        "energy_mean",
        "energy_std",
        "switching_mean",
    ]
    .map(String::from);
    let rows = aggregates.iter().map(|a| {
        vec![
            fmt_num(a.alpha),
            fmt_num(a.beta),
            a.xi.to_string(),
            fmt_num(a.v),
            a.trials.to_string(),
            a.failed.to_string(),
            fmt_num(a.entropy_mean),
            fmt_num(a.entropy_std),
            fmt_num(a.energy_mean),
            fmt_num(a.energy_std),
            fmt_num(a.switching_mean),
        ]
    });
    csv_bytes(&header, rows)
}
