//! Matrix Market exchange format.
//!
//! Reads `coordinate` and `array` files with `real`, `integer` or `pattern`
//! fields and `general`, `symmetric` or `skew-symmetric` symmetry. Writes
//! sparse matrices as coordinate files and dense ones as array files, with
//! shortest round-trip decimal values.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::matrix::{Matrix, MatrixError};

#[derive(Debug, Error)]
pub enum MtxError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unsupported Matrix Market field or layout: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

fn parse_err(line: usize, reason: impl Into<String>) -> MtxError {
    MtxError::Parse {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Skew,
}

struct Header {
    format: Format,
    field: Field,
    symmetry: Symmetry,
}

fn parse_header(line: &str) -> Result<Header, MtxError> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let format = match tokens[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(MtxError::Unsupported(format!("format '{other}'"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(MtxError::Unsupported(format!("field '{other}'"))),
    };
    if format == Format::Array && field == Field::Pattern {
        return Err(MtxError::Unsupported("pattern field in array format".into()));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::Skew,
        other => return Err(MtxError::Unsupported(format!("symmetry '{other}'"))),
    };
    Ok(Header {
        format,
        field,
        symmetry,
    })
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize, MtxError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{tok}'")))
}

fn parse_value(tok: &str, field: Field, line: usize) -> Result<f64, MtxError> {
    match field {
        Field::Integer => tok
            .parse::<i64>()
            .map(|v| v as f64)
            .map_err(|_| parse_err(line, format!("invalid integer '{tok}'"))),
        _ => tok
            .parse::<f64>()
            .map_err(|_| parse_err(line, format!("invalid value '{tok}'"))),
    }
}

/// Parses a Matrix Market stream.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<Matrix, MtxError> {
    let io_err = |source| MtxError::Io {
        path: "<stream>".into(),
        source,
    };
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => parse_header(&l.map_err(io_err)?)?,
        None => return Err(parse_err(1, "empty input")),
    };

    // Data lines, skipping comments and blanks, with 1-based line numbers.
    let mut data = lines.filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('%') => None,
        other => Some((i + 1, other)),
    });
    let (size_line, size) = match data.next() {
        Some((i, l)) => (i, l.map_err(io_err)?),
        None => return Err(parse_err(2, "missing size line")),
    };
    let dims: Vec<&str> = size.split_whitespace().collect();
    let expected_dims = match header.format {
        Format::Coordinate => 3,
        Format::Array => 2,
    };
    if dims.len() != expected_dims {
        return Err(parse_err(size_line, format!("expected {expected_dims} size fields")));
    }
    let rows = parse_usize(dims[0], size_line, "row count")?;
    let cols = parse_usize(dims[1], size_line, "column count")?;
    if header.symmetry != Symmetry::General && rows != cols {
        return Err(parse_err(size_line, "symmetric matrix must be square"));
    }

    match header.format {
        Format::Coordinate => {
            let nnz = parse_usize(dims[2], size_line, "entry count")?;
            let mut triplets = Vec::with_capacity(nnz * 2);
            let mut seen = 0;
            for (ln, l) in data {
                let l = l.map_err(io_err)?;
                let toks: Vec<&str> = l.split_whitespace().collect();
                let want = if header.field == Field::Pattern { 2 } else { 3 };
                if toks.len() != want {
                    return Err(parse_err(ln, format!("expected {want} fields")));
                }
                let i = parse_usize(toks[0], ln, "row index")?;
                let j = parse_usize(toks[1], ln, "column index")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(ln, format!("index ({i}, {j}) out of range")));
                }
                let v = if header.field == Field::Pattern {
                    1.0
                } else {
                    parse_value(toks[2], header.field, ln)?
                };
                let (i, j) = (i - 1, j - 1);
                match header.symmetry {
                    Symmetry::General => triplets.push((i, j, v)),
                    Symmetry::Symmetric => {
                        triplets.push((i, j, v));
                        if i != j {
                            triplets.push((j, i, v));
                        }
                    }
                    Symmetry::Skew => {
                        if i == j {
                            return Err(parse_err(ln, "skew-symmetric diagonal entry"));
                        }
                        triplets.push((i, j, v));
                        triplets.push((j, i, -v));
                    }
                }
                seen += 1;
                if seen > nnz {
                    return Err(parse_err(ln, format!("more than {nnz} entries")));
                }
            }
            if seen != nnz {
                return Err(parse_err(size_line, format!("expected {nnz} entries, found {seen}")));
            }
            Ok(Matrix::from_triplets(rows, cols, &triplets)?)
        }
        Format::Array => {
            // Column-major; symmetric storage lists the lower triangle only.
            let positions: Vec<(usize, usize)> = match header.symmetry {
                Symmetry::General => (0..cols)
                    .flat_map(|j| (0..rows).map(move |i| (i, j)))
                    .collect(),
                Symmetry::Symmetric => (0..cols)
                    .flat_map(|j| (j..rows).map(move |i| (i, j)))
                    .collect(),
                Symmetry::Skew => (0..cols)
                    .flat_map(|j| (j + 1..rows).map(move |i| (i, j)))
                    .collect(),
            };
            let mut dense = vec![0.0; rows * cols];
            let mut count = 0;
            for (ln, l) in data {
                let l = l.map_err(io_err)?;
                for tok in l.split_whitespace() {
                    let Some(&(i, j)) = positions.get(count) else {
                        return Err(parse_err(ln, format!("more than {} values", positions.len())));
                    };
                    let v = parse_value(tok, header.field, ln)?;
                    dense[i * cols + j] = v;
                    match header.symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => dense[j * cols + i] = v,
                        Symmetry::Skew => dense[j * cols + i] = -v,
                    }
                    count += 1;
                }
            }
            if count != positions.len() {
                return Err(parse_err(
                    size_line,
                    format!("expected {} values, found {count}", positions.len()),
                ));
            }
            Ok(Matrix::dense(rows, cols, dense)?)
        }
    }
}

/// Reads a Matrix Market file; `transpose` returns `Aᵀ` instead.
pub fn read_matrix_market(path: impl AsRef<Path>, transpose: bool) -> Result<Matrix, MtxError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MtxError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let a = parse_matrix_market(BufReader::new(file))?;
    Ok(if transpose { a.transpose() } else { a })
}

/// Reads a single-column Matrix Market file as a vector.
pub fn read_vector_market(path: impl AsRef<Path>) -> Result<Vec<f64>, MtxError> {
    let a = read_matrix_market(path, false)?;
    if a.cols() != 1 {
        return Err(MtxError::Unsupported(format!(
            "expected a single column, found {}",
            a.cols()
        )));
    }
    Ok(a.to_dense_vec())
}

/// Writes `a` in Matrix Market format to any writer.
pub fn write_matrix_market_to<W: Write>(a: &Matrix, mut out: W) -> io::Result<()> {
    if a.is_sparse() {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", a.rows(), a.cols(), a.nnz())?;
        for (i, j, v) in a.triplets() {
            writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    } else {
        writeln!(out, "%%MatrixMarket matrix array real general")?;
        writeln!(out, "{} {}", a.rows(), a.cols())?;
        let dense = a.to_dense_vec();
        for j in 0..a.cols() {
            for i in 0..a.rows() {
                writeln!(out, "{:e}", dense[i * a.cols() + j])?;
            }
        }
    }
    out.flush()
}

pub fn write_matrix_market(a: &Matrix, path: impl AsRef<Path>) -> Result<(), MtxError> {
    let path = path.as_ref();
    let io_err = |source| MtxError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_matrix_market_to(a, BufWriter::new(file)).map_err(io_err)
}
