//! Complex matrices in scenario and report JSON: nested rows whose entries are
//! `[re, im]` pairs or plain reals.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

fn entry(v: &Value, path: &str, i: usize, j: usize) -> Result<C64> {
    let bad = || Error::Parse(format!("{path}: entry ({i}, {j}) must be a number or an [re, im] pair"));
    match v {
        Value::Number(x) => x.as_f64().map(|re| C64::new(re, 0.0)).ok_or_else(bad),
        Value::Array(p) if p.len() == 2 => match (p[0].as_f64(), p[1].as_f64()) {
            (Some(re), Some(im)) => Ok(C64::new(re, im)),
            _ => Err(bad()),
        },
        _ => Err(bad()),
    }
}

/// Parses a square matrix; `path` names the field in error messages.
pub fn parse_matrix(v: &Value, path: &str) -> Result<CMat> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{path}: expected an array of rows")))?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse(format!("{path}: empty matrix")));
    }
    let mut m = CMat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Parse(format!("{path}: row {i} is not an array")))?;
        if row.len() != n {
            return Err(Error::Parse(format!("{path}: row {i} has {} entries, expected {n}", row.len())));
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = entry(x, path, i, j)?;
        }
    }
    Ok(m)
}

/// Parses a matrix and checks it has side `dim`.
pub fn parse_matrix_dim(v: &Value, path: &str, dim: usize) -> Result<CMat> {
    let m = parse_matrix(v, path)?;
    if m.nrows() != dim {
        return Err(Error::Parse(format!("{path}: matrix has side {}, expected {dim}", m.nrows())));
    }
    Ok(m)
}

pub fn complex_json(z: C64) -> Value {
    serde_json::json!([z.re, z.im])
}

pub fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_json(m[(i, j)])).collect()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn reals_and_pairs_mix() {
        let m = parse_matrix(&json!([[1, [0, 2]], [[0, -2], 3.5]]), "D").unwrap();
        assert_eq!(m[(0, 1)], C64::new(0.0, 2.0));
        assert_eq!(m[(1, 1)], C64::new(3.5, 0.0));
        assert_eq!(parse_matrix(&matrix_json(&m), "D").unwrap(), m);
    }

    #[test]
    fn ragged_row_names_the_entry() {
        let e = parse_matrix(&json!([[1, 0], [0, 1, 2]]), "modules[0].D").unwrap_err();
        assert!(e.to_string().contains("modules[0].D: row 1 has 3 entries, expected 2"));
    }

    #[test]
    fn bad_entry() {
        let e = parse_matrix(&json!([[1, "x"], [0, 1]]), "F").unwrap_err();
        assert!(e.to_string().contains("entry (0, 1)"));
    }
}
