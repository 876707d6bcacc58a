//! Matrix Market coordinate format.
//!
//! Reads `real`/`integer` coordinate matrices stored as `general` or
//! `symmetric`. Writes `coordinate real general` with full precision.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<CsrMatrix> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("empty input".into()))??;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::MatrixMarket(format!("bad header: {header}")));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::MatrixMarket("only coordinate format is supported".into()));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::MatrixMarket(format!("unsupported field {}", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::MatrixMarket(format!("unsupported symmetry {other}"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(Error::MatrixMarket(format!("bad size line: {line}")));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| Error::MatrixMarket(format!("bad integer {s}")))
                };
                let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                triplets.reserve(if symmetric { 2 * dims.2 } else { dims.2 });
                size = Some(dims);
            }
            Some((rows, cols, _)) => {
                if fields.len() != 3 {
                    return Err(Error::MatrixMarket(format!("bad entry line: {line}")));
                }
                let bad = || Error::MatrixMarket(format!("bad entry line: {line}"));
                let i: usize = fields[0].parse().map_err(|_| bad())?;
                let j: usize = fields[1].parse().map_err(|_| bad())?;
                let v: f64 = fields[2].parse().map_err(|_| bad())?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(Error::MatrixMarket(format!("index out of range: {line}")));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
    let stored = if symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(Error::MatrixMarket(format!(
            "expected {nnz} entries, found {stored}"
        )));
    }
    CsrMatrix::from_triplets(rows, cols, &triplets)
}

pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::test_util::laplacian_1d;

    #[test]
    fn round_trip_is_exact() {
        let a = laplacian_1d(6);
        let scaled = CsrMatrix::from_triplets(
            6,
            6,
            &(0..6)
                .flat_map(|i| {
                    let (c, v) = a.row(i);
                    c.iter().zip(v).map(move |(&j, &x)| (i, j, x / 3.0)).collect::<Vec<_>>()
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&scaled, &mut buf).unwrap();
        let back = read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(back, scaled);
    }

    #[test]
    fn reads_symmetric_storage() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 5\n1 1 2\n2 1 -1\n2 2 2\n3 2 -1\n3 3 2\n";
        let a = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(a, laplacian_1d(3));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_matrix_market("".as_bytes()).is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n".as_bytes()).is_err());
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n";
        assert!(read_matrix_market(short.as_bytes()).is_err());
        let oob = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n";
        assert!(read_matrix_market(oob.as_bytes()).is_err());
    }
}
