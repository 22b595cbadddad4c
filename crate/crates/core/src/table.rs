//! CSV tables: noiseless scans (`<x>,n_h,n_v`) and count data
//! (`phi,counts_h,counts_v` with a `# shots=N` comment).

use std::fmt::Write as _;

use thiserror::Error;

use crate::estimation::{MeasuredScan, NoisyScan};

/// A malformed table, located by 1-based line and column.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{col}: {message}")]
pub struct TableError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

fn err(line: usize, col: usize, message: impl Into<String>) -> TableError {
    TableError {
        line,
        col,
        message: message.into(),
    }
}

/// `# shots=N` and `# seed=S` header comments, then the count rows.
pub fn write_counts_csv(scan: &NoisyScan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# shots={}", scan.shots);
    let _ = writeln!(out, "# seed={}", scan.seed);
    out.push_str("phi,counts_h,counts_v\n");
    for i in 0..scan.phis.len() {
        let _ = writeln!(
            out,
            "{:.16e},{},{}",
            scan.phis[i], scan.counts_h[i], scan.counts_v[i]
        );
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Counts,
    Expectations,
}

/// `# shots=N` from the leading comments, with the line it was found on.
fn shots_comment(text: &str) -> Result<Option<(u64, usize)>, TableError> {
    let mut shots = None;
    for (idx, line) in text.lines().enumerate() {
        let Some(comment) = line.trim().strip_prefix('#') else {
            continue;
        };
        if let Some(v) = comment.trim().strip_prefix("shots=") {
            let line_no = idx + 1;
            let col = line.find("shots=").unwrap_or(0) + 7;
            let n: u64 = v
                .trim()
                .parse()
                .map_err(|_| err(line_no, col, format!("bad shot count `{}`", v.trim())))?;
            if n == 0 {
                return Err(err(line_no, col, "shots must be at least 1"));
            }
            shots = Some((n, line_no));
        }
    }
    Ok(shots)
}

/// Reads either table kind into per-shot estimates.
///
/// Integer counts are divided by the `# shots=N` value, which is then
/// mandatory. Expectation tables carry no shot count.
pub fn read_measured_csv(text: &str) -> Result<MeasuredScan, TableError> {
    let shots = shots_comment(text)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut kind = None;
    let mut header_line = 0;
    let mut rows: Vec<[f64; 3]> = Vec::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(1, |p| p.line() as usize);
            err(line, 1, e.to_string())
        })?;
        let line_no = record.position().map_or(0, |p| p.line() as usize);
        if kind.is_none() {
            let names: Vec<&str> = record.iter().map(str::trim).collect();
            kind = Some(match names.as_slice() {
                ["phi", "counts_h", "counts_v"] => Kind::Counts,
                [_, "n_h", "n_v"] => Kind::Expectations,
                _ => {
                    return Err(err(
                        line_no,
                        1,
                        format!(
                            "expected header `phi,counts_h,counts_v` or `<x>,n_h,n_v`, found `{}`",
                            names.join(",")
                        ),
                    ))
                }
            });
            header_line = line_no;
            continue;
        }
        if record.len() != 3 {
            return Err(err(
                line_no,
                1,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let mut vals = [0.0; 3];
        let mut col = 1;
        for (k, f) in record.iter().enumerate() {
            let t = f.trim();
            let at = col + f.chars().count() - f.trim_start().chars().count();
            vals[k] = if kind == Some(Kind::Counts) && k > 0 {
                t.parse::<u64>().map(|c| c as f64).map_err(|_| {
                    err(
                        line_no,
                        at,
                        format!("expected a nonnegative integer count, found `{t}`"),
                    )
                })?
            } else {
                match t.parse::<f64>() {
                    Ok(x) if x.is_finite() => x,
                    _ => {
                        return Err(err(
                            line_no,
                            at,
                            format!("expected a finite number, found `{t}`"),
                        ))
                    }
                }
            };
            col += f.chars().count() + 1;
        }
        rows.push(vals);
    }

    let kind = kind.ok_or_else(|| err(1, 1, "missing header row"))?;
    if rows.is_empty() {
        return Err(err(header_line + 1, 1, "no data rows"));
    }
    let (scale, shots) = match kind {
        Kind::Counts => match shots {
            Some((n, _)) => (n as f64, Some(n)),
            None => {
                return Err(err(
                    header_line,
                    1,
                    "count table needs a `# shots=N` comment",
                ))
            }
        },
        Kind::Expectations => (1.0, None),
    };
    let phis = rows.iter().map(|r| r[0]).collect();
    let n_h = rows.iter().map(|r| r[1] / scale).collect();
    let n_v = rows.iter().map(|r| r[2] / scale).collect();
    Ok(MeasuredScan {
        phis,
        n_h,
        n_v,
        shots,
    })
}
