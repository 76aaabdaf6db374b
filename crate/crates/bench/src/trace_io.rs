//! Trace CSV files.
//!
//! Columns: `iter, f_value, grad_dual_norm, H_t, Htilde_t, inner_trials,
//! oracle_calls_cum, accept_tag`, then `x_1, …, x_n` when coordinates are
//! recorded. Reals are written as `{:.16e}` (17 significant digits), which
//! round-trips every finite `f64`.

use std::io::{Read, Write};

use nalgebra::DVector;
use thiserror::Error;

use tensormin::schemes::{AcceptTag, TraceRecord};

pub const BASE_COLUMNS: [&str; 8] = [
    "iter",
    "f_value",
    "grad_dual_norm",
    "H_t",
    "Htilde_t",
    "inner_trials",
    "oracle_calls_cum",
    "accept_tag",
];

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("bad header: {0}")]
    Header(String),
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `records`; coordinates are included only when `with_x` is set and
/// every record carries them.
pub fn write_trace_csv<W: Write>(out: W, records: &[TraceRecord], with_x: bool) -> Result<(), TraceIoError> {
    let n = if with_x && records.iter().all(|r| r.x.is_some()) {
        records.first().and_then(|r| r.x.as_ref()).map_or(0, |x| x.len())
    } else {
        0
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=n).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.iter.to_string(),
            real(r.f_value),
            real(r.grad_norm),
            real(r.h),
            r.htilde.map(real).unwrap_or_default(),
            r.inner_trials.to_string(),
            r.oracle_calls_cum.to_string(),
            r.tag.as_str().to_string(),
        ];
        if let Some(x) = r.x.as_ref().filter(|_| n > 0) {
            row.extend(x.iter().map(|v| real(*v)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T, TraceIoError> {
    let s = rec.get(i).unwrap_or("");
    s.parse().map_err(|_| TraceIoError::Parse {
        line,
        message: format!("column {} has invalid value `{s}`", i + 1),
    })
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>, TraceIoError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers()?.clone();
    if header.len() < BASE_COLUMNS.len() || header.iter().zip(BASE_COLUMNS).any(|(a, b)| a != b) {
        return Err(TraceIoError::Header(format!(
            "expected columns starting with {}",
            BASE_COLUMNS.join(",")
        )));
    }
    let n = header.len() - BASE_COLUMNS.len();
    for (j, name) in header.iter().skip(BASE_COLUMNS.len()).enumerate() {
        if name != format!("x_{}", j + 1) {
            return Err(TraceIoError::Header(format!("unexpected column `{name}`")));
        }
    }
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let htilde = match rec.get(4).unwrap_or("") {
            "" => None,
            _ => Some(field(&rec, 4, line)?),
        };
        let tag_str = rec.get(7).unwrap_or("");
        let tag: AcceptTag = tag_str
            .parse()
            .map_err(|message| TraceIoError::Parse { line, message })?;
        let x = if n > 0 {
            let v = (0..n)
                .map(|j| field::<f64>(&rec, BASE_COLUMNS.len() + j, line))
                .collect::<Result<Vec<_>, _>>()?;
            Some(DVector::from_vec(v))
        } else {
            None
        };
        out.push(TraceRecord {
            iter: field(&rec, 0, line)?,
            f_value: field(&rec, 1, line)?,
            grad_norm: field(&rec, 2, line)?,
            h: field(&rec, 3, line)?,
            htilde,
            inner_trials: field(&rec, 5, line)?,
            oracle_calls_cum: field(&rec, 6, line)?,
            tag,
            x,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: usize, x: Option<Vec<f64>>) -> TraceRecord {
        TraceRecord {
            iter: i,
            f_value: 1.0 / 3.0 + i as f64,
            grad_norm: std::f64::consts::PI * 1e-300,
            h: 2f64.powi(-40),
            htilde: if i % 2 == 0 { Some(0.1) } else { None },
            inner_trials: i + 1,
            oracle_calls_cum: 3 * i as u64,
            tag: AcceptTag::ALL[i % AcceptTag::ALL.len()],
            x: x.map(DVector::from_vec),
        }
    }

    #[test]
    fn round_trip_with_and_without_coordinates() {
        let recs: Vec<_> = (0..5).map(|i| record(i, Some(vec![-0.1 * i as f64, 7e-17]))).collect();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &recs, true).unwrap();
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), recs);

        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &recs, false).unwrap();
        let back = read_trace_csv(buf.as_slice()).unwrap();
        assert!(back.iter().all(|r| r.x.is_none()));
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,f_value,grad_dual_norm,H_t,Htilde_t,inner_trials,oracle_calls_cum,accept_tag\n"));
        assert!(text.contains("3.3333333333333331e-1"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(read_trace_csv("a,b\n1,2\n".as_bytes()), Err(TraceIoError::Header(_))));
        let bad = "iter,f_value,grad_dual_norm,H_t,Htilde_t,inner_trials,oracle_calls_cum,accept_tag\n0,1,1,1,,0,0,nope\n";
        assert!(matches!(read_trace_csv(bad.as_bytes()), Err(TraceIoError::Parse { line: 2, .. })));
    }
}
