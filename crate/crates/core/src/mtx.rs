//! Matrix Market reader/writer plus the small plain-text formats used for
//! partition and offset files.
//!
//! Supported Matrix Market variants: `matrix array|coordinate real|integer
//! general|symmetric`. Symmetric files store the lower triangle.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

/// Formats a float with 17 significant digits so it round-trips exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn parse_matrix_market(text: &str, path: &Path) -> Result<Matrix> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::malformed(path, "empty file"))?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::malformed(
            path,
            format!("bad Matrix Market header `{header}`"),
        ));
    }
    let coordinate = match tokens[2].as_str() {
        "array" => false,
        "coordinate" => true,
        other => return Err(Error::malformed(path, format!("unsupported format `{other}`"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(Error::malformed(path, format!("unsupported field `{other}`"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(Error::malformed(
                path,
                format!("unsupported symmetry `{other}`"),
            ))
        }
    };

    let mut body = lines
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size_line = body
        .next()
        .ok_or_else(|| Error::malformed(path, "missing size line"))?;
    let sizes = parse_usizes(size_line, path)?;

    let parse_value = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::malformed(path, format!("bad number `{s}`")))
    };

    if coordinate {
        if sizes.len() != 3 {
            return Err(Error::malformed(path, "coordinate size line needs 3 integers"));
        }
        let (nrows, ncols, nnz) = (sizes[0], sizes[1], sizes[2]);
        let mut m = Matrix::zeros(nrows, ncols);
        let mut count = 0;
        for line in body {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::malformed(path, format!("bad entry line `{line}`")));
            }
            let i: usize = parts[0]
                .parse()
                .map_err(|_| Error::malformed(path, format!("bad row index `{}`", parts[0])))?;
            let j: usize = parts[1]
                .parse()
                .map_err(|_| Error::malformed(path, format!("bad column index `{}`", parts[1])))?;
            if i == 0 || j == 0 || i > nrows || j > ncols {
                return Err(Error::malformed(path, format!("index ({i}, {j}) out of range")));
            }
            let v = parse_value(parts[2])?;
            m[(i - 1, j - 1)] += v;
            if symmetry == Symmetry::Symmetric && i != j {
                m[(j - 1, i - 1)] += v;
            }
            count += 1;
        }
        if count != nnz {
            return Err(Error::malformed(
                path,
                format!("expected {nnz} entries, found {count}"),
            ));
        }
        Ok(m)
    } else {
        if sizes.len() != 2 {
            return Err(Error::malformed(path, "array size line needs 2 integers"));
        }
        let (nrows, ncols) = (sizes[0], sizes[1]);
        if symmetry == Symmetry::Symmetric && nrows != ncols {
            return Err(Error::malformed(path, "symmetric array must be square"));
        }
        let values: Vec<f64> = body
            .flat_map(str::split_whitespace)
            .map(parse_value)
            .collect::<Result<_>>()?;
        let mut m = Matrix::zeros(nrows, ncols);
        let mut it = values.iter();
        let mut take = || -> Result<f64> {
            it.next()
                .copied()
                .ok_or_else(|| Error::malformed(path, "too few array entries"))
        };
        // Column-major; symmetric stores the lower triangle only.
        for j in 0..ncols {
            let start = if symmetry == Symmetry::Symmetric { j } else { 0 };
            for i in start..nrows {
                let v = take()?;
                m[(i, j)] = v;
                if symmetry == Symmetry::Symmetric {
                    m[(j, i)] = v;
                }
            }
        }
        if it.next().is_some() {
            return Err(Error::malformed(path, "too many array entries"));
        }
        Ok(m)
    }
}

fn parse_usizes(line: &str, path: &Path) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::malformed(path, format!("bad integer `{t}`")))
        })
        .collect()
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    parse_matrix_market(&read_to_string(path)?, path)
}

/// Dense `array` serialization. With [`Symmetry::Symmetric`] only the lower
/// triangle of `m` is written, so the caller is responsible for `m` being
/// symmetric.
pub fn format_matrix_market(m: &Matrix, symmetry: Symmetry) -> String {
    let mut out = String::new();
    let sym = match symmetry {
        Symmetry::General => "general",
        Symmetry::Symmetric => "symmetric",
    };
    let _ = writeln!(out, "%%MatrixMarket matrix array real {sym}");
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        let start = if symmetry == Symmetry::Symmetric { j } else { 0 };
        for i in start..m.nrows() {
            let _ = writeln!(out, "{}", fmt_f64(m[(i, j)]));
        }
    }
    out
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &Matrix, symmetry: Symmetry) -> Result<()> {
    write_string(path.as_ref(), &format_matrix_market(m, symmetry))
}

/// One value per line; blank lines and `#` comments are ignored.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vector> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let values: Vec<f64> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::malformed(path, format!("bad number `{l}`")))
        })
        .collect::<Result<_>>()?;
    Ok(Vector::from_vec(values))
}

pub fn write_vector(path: impl AsRef<Path>, v: &Vector) -> Result<()> {
    let mut out = String::new();
    for x in v.iter() {
        let _ = writeln!(out, "{}", fmt_f64(*x));
    }
    write_string(path.as_ref(), &out)
}

/// Partition file: first line `n_B <int>`, then the boundary DOF indices
/// (0-based), one per line.
pub fn read_partition(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let first = lines
        .next()
        .ok_or_else(|| Error::malformed(path, "empty partition file"))?;
    let mut parts = first.split_whitespace();
    let count = match (parts.next(), parts.next(), parts.next()) {
        (Some(key), Some(n), None) if key.eq_ignore_ascii_case("n_b") => n
            .parse::<usize>()
            .map_err(|_| Error::malformed(path, format!("bad count `{n}`")))?,
        _ => {
            return Err(Error::malformed(
                path,
                format!("first line must be `n_B <int>`, found `{first}`"),
            ))
        }
    };
    let indices: Vec<usize> = lines
        .flat_map(str::split_whitespace)
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::malformed(path, format!("bad index `{t}`")))
        })
        .collect::<Result<_>>()?;
    if indices.len() != count {
        return Err(Error::malformed(
            path,
            format!("header declares {count} boundary DOFs, found {}", indices.len()),
        ));
    }
    Ok(indices)
}

pub fn write_partition(path: impl AsRef<Path>, boundary: &[usize]) -> Result<()> {
    let mut out = format!("n_B {}\n", boundary.len());
    for i in boundary {
        let _ = writeln!(out, "{i}");
    }
    write_string(path.as_ref(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("<mem>")
    }

    #[test]
    fn reads_symmetric_coordinate() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 2.0\n2 1 -1.0\n";
        let m = parse_matrix_market(text, p()).unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 0.0]));
    }

    #[test]
    fn reads_general_array_column_major() {
        let text = "%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n4\n5\n6\n";
        let m = parse_matrix_market(text, p()).unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 3, &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]));
    }

    #[test]
    fn symmetric_array_round_trip_is_exact() {
        let m = Matrix::from_row_slice(3, 3, &[1.0 / 3.0, 0.1, -2.5e-7, 0.1, 7.0, 1e300, -2.5e-7, 1e300, 0.0]);
        let text = format_matrix_market(&m, Symmetry::Symmetric);
        assert_eq!(parse_matrix_market(&text, p()).unwrap(), m);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(parse_matrix_market("", p()).is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate complex general\n1 1 0\n", p()).is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n1 1 1\n2 1 1.0\n", p()).is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n", p()).is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix array real general\n1 1\nabc\n", p()).is_err());
    }

    #[test]
    fn partition_and_vector_files() {
        let dir = tempfile::tempdir().unwrap();
        let part = dir.path().join("partition.txt");
        write_partition(&part, &[4, 0, 2]).unwrap();
        assert_eq!(read_partition(&part).unwrap(), vec![4, 0, 2]);
        std::fs::write(&part, "n_B 2\n1\n").unwrap();
        assert!(read_partition(&part).is_err());

        let vec_path = dir.path().join("b.txt");
        let v = Vector::from_vec(vec![1.0, 0.1, -3.25]);
        write_vector(&vec_path, &v).unwrap();
        assert_eq!(read_vector(&vec_path).unwrap(), v);
    }
}
