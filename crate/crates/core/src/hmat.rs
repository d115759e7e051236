//! HMAT v1 text format.
//!
//! ```text
//! HMAT 1 2
//! # re im re im, row-major
//! 1.0 0.0  0.0 0.0
//! 0.0 0.0  2.0 0.0
//! ```
//!
//! `#` starts a comment running to the end of the line; blank lines are ignored.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{validate_hermitian, ComplexMatrix, HermitianMatrix};

/// Hermiticity tolerance applied to parsed matrices.
pub const HMAT_HERMITIAN_TOL: f64 = 1e-10;

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let content = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in content.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(Token { text: &content[s..i], column: s + 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &content[s..], column: s + 1 });
    }
    out
}

/// Parse HMAT text. `origin` names the source in error messages.
pub fn parse_hmat(text: &str, origin: &str) -> Result<HermitianMatrix> {
    let err = |line: usize, column: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        column,
        message,
    };

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, tokens(l)))
        .filter(|(_, t)| !t.is_empty());

    let (header_line, header) = lines.next().ok_or_else(|| err(1, 1, "missing HMAT header".into()))?;
    if header.len() != 3 || header[0].text != "HMAT" {
        return Err(err(header_line, 1, "expected header `HMAT 1 N`".into()));
    }
    if header[1].text != "1" {
        return Err(err(header_line, header[1].column, format!("unsupported version `{}`", header[1].text)));
    }
    let n: usize = header[2]
        .text
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| err(header_line, header[2].column, format!("invalid dimension `{}`", header[2].text)))?;

    let mut entries = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (line, toks) in lines {
        if rows == n {
            return Err(Error::DimensionMismatch { expected: n, got: rows + 1 });
        }
        if toks.len() != 2 * n {
            return Err(err(line, 1, format!("expected {} numbers, found {}", 2 * n, toks.len())));
        }
        for pair in toks.chunks(2) {
            let mut parts = [0.0; 2];
            for (slot, tok) in parts.iter_mut().zip(pair) {
                *slot = tok
                    .text
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(line, tok.column, format!("invalid number `{}`", tok.text)))?;
            }
            entries.push(Complex64::new(parts[0], parts[1]));
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::DimensionMismatch { expected: n, got: rows });
    }
    let m = ComplexMatrix::from_row_slice(n, n, &entries)?;
    validate_hermitian(&m, HMAT_HERMITIAN_TOL)
}

pub fn parse_matrix_file(path: &Path) -> Result<HermitianMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_hmat(&text, &path.display().to_string())
}

/// Render a matrix as HMAT v1 with shortest round-trip decimals.
pub fn write_hmat(m: &HermitianMatrix) -> String {
    let n = m.dim();
    let mut out = format!("HMAT 1 {n}\n");
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| {
                let z = m.as_matrix()[(i, j)];
                format!("{} {}", z.re, z.im)
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_oracle;
    use crate::rng::{random_hermitian, SimRng};
    use proptest::prelude::*;

    #[test]
    fn parses_diagonal() {
        let m = parse_hmat("HMAT 1 2\n1.0 0.0 0.0 0.0\n0.0 0.0 2.0 0.0\n", "t").unwrap();
        assert_eq!(m, HermitianMatrix::from_real_diagonal(&[1.0, 2.0]));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# leading\n\nHMAT 1 2 # header\n1 0 0 0\n\n  # mid\n0 0 2 0 # trailing\n";
        assert_eq!(parse_hmat(text, "t").unwrap(), HermitianMatrix::from_real_diagonal(&[1.0, 2.0]));
    }

    #[test]
    fn short_row_names_line() {
        match parse_hmat("HMAT 1 2\n1 0 0 0\n0 0 2\n", "f.hmat") {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(path, "f.hmat");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_token_reports_column() {
        match parse_hmat("HMAT 1 1\n1.0 x\n", "t") {
            Err(Error::Parse { line: 2, column: 5, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_and_row_count_errors() {
        assert!(matches!(parse_hmat("", "t"), Err(Error::Parse { .. })));
        assert!(matches!(parse_hmat("HMAT 2 1\n1 0\n", "t"), Err(Error::Parse { .. })));
        assert!(matches!(parse_hmat("HMAT 1 0\n", "t"), Err(Error::Parse { .. })));
        assert!(matches!(parse_hmat("HMAT 1 2\n1 0 0 0\n", "t"), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            parse_hmat("HMAT 1 1\n1 0\n2 0\n", "t"),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_hermitian_rejected() {
        assert!(matches!(
            parse_hmat("HMAT 1 2\n0 0 1 0\n0 0 0 0\n", "t"),
            Err(Error::HermiticityViolation { .. })
        ));
    }

    #[test]
    fn pauli_y() {
        let m = parse_hmat("HMAT 1 2\n0 0 0 1\n0 -1 0 0\n", "t").unwrap();
        let spec = spectral_oracle(&m).unwrap();
        assert!((spec.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((spec.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn write_then_parse_is_exact(n in 1usize..7, seed in any::<u64>()) {
            let m = random_hermitian(n, &mut SimRng::new(seed));
            let back = parse_hmat(&write_hmat(&m), "rt").unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
