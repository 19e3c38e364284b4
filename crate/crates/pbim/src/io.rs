//! File formats: Matrix Market coordinate files for sparse matrices and
//! one-value-per-line text files for vectors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::sparse::SparseMatrix;
use crate::{tf, Error, Result, Scalar};

/// Writes `a` as a Matrix Market coordinate file (1-based indices,
/// `%%MatrixMarket matrix coordinate real general` header).
pub fn write_matrix_market<T: Scalar>(a: &SparseMatrix<T>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for (r, c, v) in a.triplets() {
        writeln!(w, "{} {} {v:.17e}", r + 1, c + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a Matrix Market coordinate file written by [`write_matrix_market`]
/// or any `coordinate real general` file.
pub fn read_matrix_market<T: Scalar>(path: &Path) -> Result<SparseMatrix<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))??;
    if !header.starts_with("%%MatrixMarket") {
        return Err(Error::Parse("missing MatrixMarket header".into()));
    }
    let lower = header.to_lowercase();
    if !lower.contains("coordinate") || !lower.contains("real") || !lower.contains("general") {
        return Err(Error::Parse(format!("unsupported matrix kind: {header}")));
    }
    let mut size_line = None;
    for line in lines.by_ref() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some(t.to_string());
        break;
    }
    let size_line = size_line.ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad size entry '{s}'"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(Error::Parse(format!("bad size line '{size_line}'")));
    }
    let (m, n, nnz) = (dims[0], dims[1], dims[2]);
    let mut triplets = Vec::with_capacity(nnz);
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut parts = t.split_whitespace();
        let r: usize = parse_field(parts.next(), t)?;
        let c: usize = parse_field(parts.next(), t)?;
        let v: f64 = parse_field(parts.next(), t)?;
        if r == 0 || c == 0 {
            return Err(Error::Parse(format!("zero-based index in '{t}'")));
        }
        triplets.push((r - 1, c - 1, tf::<T>(v)));
    }
    if triplets.len() != nnz {
        return Err(Error::Parse(format!(
            "entry count {} does not match header {nnz}",
            triplets.len()
        )));
    }
    SparseMatrix::from_triplets(&triplets, m, n)
}

fn parse_field<F: std::str::FromStr>(field: Option<&str>, line: &str) -> Result<F> {
    field
        .ok_or_else(|| Error::Parse(format!("short entry line '{line}'")))?
        .parse()
        .map_err(|_| Error::Parse(format!("bad entry line '{line}'")))
}

/// Writes one value per line in full precision.
pub fn write_vector<T: Scalar>(v: &[T], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for x in v {
        writeln!(w, "{x:.17e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a one-value-per-line vector file; blank lines and `#` comments
/// are skipped.
pub fn read_vector<T: Scalar>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Parse(format!("bad vector entry '{t}'")))?;
        out.push(tf::<T>(v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("pbim-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn matrix_roundtrip() {
        let a = SparseMatrix::from_triplets(
            &[(0, 0, 1.5), (0, 2, -2.25), (3, 1, 1e-17)],
            4,
            3,
        )
        .unwrap();
        let path = tmp("roundtrip.mtx");
        write_matrix_market(&a, &path).unwrap();
        let b = read_matrix_market::<f64>(&path).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vector_roundtrip() {
        let v = vec![1.0, -0.5, 3.25e-9, 0.0];
        let path = tmp("roundtrip.txt");
        write_vector(&v, &path).unwrap();
        assert_eq!(read_vector::<f64>(&path).unwrap(), v);
    }

    #[test]
    fn rejects_bad_header() {
        let path = tmp("bad.mtx");
        std::fs::write(&path, "not a matrix\n1 1 0\n").unwrap();
        assert!(read_matrix_market::<f64>(&path).is_err());
    }

    #[test]
    fn rejects_count_mismatch() {
        let path = tmp("short.mtx");
        std::fs::write(
            &path,
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
        )
        .unwrap();
        assert!(read_matrix_market::<f64>(&path).is_err());
    }
}
