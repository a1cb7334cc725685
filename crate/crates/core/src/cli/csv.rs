//! Sample tables: header `x0,x1,...`, one row per sample, 17 significant
//! digits so every double survives a round trip.

use std::fmt::Write as _;
use std::path::Path;

use super::CliError;
use crate::autodiff::Tensor;

pub fn header(cols: usize) -> String {
    (0..cols).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",")
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_string(t: &Tensor) -> String {
    let cols = t.cols();
    let mut out = header(cols);
    out.push('\n');
    for i in 0..t.rows() {
        for (j, v) in t.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", format_value(*v)).expect("write to string");
        }
        out.push('\n');
    }
    out
}

/// Parses a sample table. An empty file is an empty table of unknown width
/// (reported as zero columns).
pub fn parse(text: &str, origin: &Path) -> Result<Tensor, CliError> {
    let bad = |line: usize, msg: String| CliError::Config(format!("{}:{line}: {msg}", origin.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((hline, head)) = lines.next() else {
        return Ok(Tensor::zeros(&[0, 0]));
    };
    let cols = head.split(',').count();
    if head.trim() != header(cols) {
        return Err(bad(hline + 1, format!("expected header `{}`", header(cols))));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(bad(idx + 1, format!("expected {cols} fields, found {}", fields.len())));
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| bad(idx + 1, format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(idx + 1, format!("`{f}` is not finite")));
            }
            data.push(v);
        }
        rows += 1;
    }
    Ok(Tensor::matrix(rows, cols, data).expect("validated rows"))
}

pub fn read(path: &Path) -> Result<Tensor, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, path)
}

pub fn write(path: &Path, t: &Tensor) -> Result<(), CliError> {
    super::write_file(path, to_string(t).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let t = Tensor::matrix(2, 3, vec![0.1, -1.0 / 3.0, 1e-300, 2.5e17, -0.0, std::f64::consts::PI]).unwrap();
        let text = to_string(&t);
        assert!(text.starts_with("x0,x1,x2\n"));
        let back = parse(&text, Path::new("t.csv")).unwrap();
        assert_eq!(back.shape(), t.shape());
        for (a, b) in t.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Tensor::zeros(&[0, 2]);
        assert_eq!(to_string(&t), "x0,x1\n");
        assert_eq!(parse("x0,x1\n", Path::new("t")).unwrap().shape(), &[0, 2]);
        assert_eq!(parse("", Path::new("t")).unwrap().rows(), 0);
    }

    #[test]
    fn malformed_rows_name_their_line() {
        let err = parse("x0,x1\n1,2\n3\n", Path::new("s.csv")).unwrap_err().to_string();
        assert!(err.contains("s.csv:3"), "{err}");
        let err = parse("x0,x1\n1,abc\n", Path::new("s.csv")).unwrap_err().to_string();
        assert!(err.contains("s.csv:2"), "{err}");
        assert!(parse("a,b\n1,2\n", Path::new("s.csv")).is_err());
    }
}
