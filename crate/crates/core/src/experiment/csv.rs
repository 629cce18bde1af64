use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::Method;
use super::run::CurvePoint;

pub const HEADER: &str = "method,block,nmse_mean,snr_mean_linear,snr_mean_db,n_trials";
pub const GENIE_COLUMN: &str = "genie_snr_mean_linear";

fn num(v: f64) -> String {
    format!("{v:.9e}")
}

/// Curves as CSV text: `#` comment lines, the header, then one row per point
/// sorted by `(method, block)`. LF line endings throughout.
///
/// The genie column is appended when every point carries it.
pub fn format_csv(points: &[CurvePoint], comments: &[String]) -> String {
    let mut sorted: Vec<&CurvePoint> = points.iter().collect();
    sorted.sort_by(|a, b| (a.method.as_str(), a.block).cmp(&(b.method.as_str(), b.block)));
    let genie = !sorted.is_empty() && sorted.iter().all(|p| p.genie_snr_mean_linear.is_some());

    let mut out = String::new();
    for line in comments {
        for part in line.lines() {
            let _ = writeln!(out, "# {part}");
        }
    }
    out.push_str(HEADER);
    if genie {
        out.push(',');
        out.push_str(GENIE_COLUMN);
    }
    out.push('\n');
    for p in sorted {
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            p.method,
            p.block,
            num(p.nmse_mean),
            num(p.snr_mean_linear),
            num(p.snr_mean_db),
            p.n_trials
        );
        if genie {
            let _ = write!(out, ",{}", num(p.genie_snr_mean_linear.unwrap_or(f64::NAN)));
        }
        out.push('\n');
    }
    out
}

pub fn emit_csv(points: &[CurvePoint], comments: &[String], path: &Path) -> Result<()> {
    std::fs::write(path, format_csv(points, comments)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_csv_str(text: &str, path: &Path) -> Result<Vec<CurvePoint>> {
    let err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let genie = if header == HEADER {
        false
    } else if header == format!("{HEADER},{GENIE_COLUMN}") {
        true
    } else {
        return Err(err(hline, format!("unexpected header `{header}`")));
    };
    let width = if genie { 7 } else { 6 };

    let mut points = Vec::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(err(ln, format!("expected {width} fields, found {}", fields.len())));
        }
        let float = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| err(ln, format!("field {i}: {e}")))
        };
        let int = |i: usize| -> Result<usize> {
            fields[i]
                .parse::<usize>()
                .map_err(|e| err(ln, format!("field {i}: {e}")))
        };
        points.push(CurvePoint {
            method: fields[0].parse::<Method>().map_err(|e| err(ln, e))?,
            block: int(1)?,
            nmse_mean: float(2)?,
            snr_mean_linear: float(3)?,
            snr_mean_db: float(4)?,
            n_trials: int(5)?,
            genie_snr_mean_linear: if genie { Some(float(6)?) } else { None },
        });
    }
    Ok(points)
}

pub fn parse_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(method: Method, block: usize, genie: Option<f64>) -> CurvePoint {
        CurvePoint {
            method,
            block,
            nmse_mean: 0.125 + block as f64,
            snr_mean_linear: 10.0,
            snr_mean_db: 10.0,
            n_trials: 7,
            genie_snr_mean_linear: genie,
        }
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(format_csv(&[], &[]), format!("{HEADER}\n"));
    }

    #[test]
    fn rows_sorted_and_formatted() {
        let pts = [
            point(Method::SdrSnr, 1, None),
            point(Method::MseMin, 0, None),
            point(Method::SdrSnr, 0, None),
        ];
        let text = format_csv(&pts, &["seed=1".into()]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed=1");
        assert_eq!(lines[1], HEADER);
        assert_eq!(lines[2], "mse_min,0,1.250000000e-1,1.000000000e1,1.000000000e1,7");
        assert!(lines[3].starts_with("sdr_snr,0,"));
        assert!(lines[4].starts_with("sdr_snr,1,"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn round_trip_with_genie() {
        let pts = vec![point(Method::Random, 0, Some(3.5)), point(Method::Random, 1, Some(0.25))];
        let text = format_csv(&pts, &["a".into(), "b\nc".into()]);
        assert!(text.lines().next().unwrap().starts_with("# a"));
        let back = parse_csv_str(&text, Path::new("x.csv")).unwrap();
        assert_eq!(back, pts);
    }

    #[test]
    fn parse_errors_carry_line() {
        let text = format!("{HEADER}\nsdr_snr,0,1,2\n");
        let e = parse_csv_str(&text, Path::new("f.csv")).unwrap_err();
        assert!(e.to_string().contains("f.csv: line 2"), "{e}");
        let e = parse_csv_str("nope\n", Path::new("f.csv")).unwrap_err();
        assert!(e.to_string().contains("line 1"));
    }
}
