//! JSON layout for complex matrices: `{"n": rows, "m": cols, "re": [[..]], "im": [[..]]}`.
//! `m` defaults to `n` and `im` defaults to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixJson {
    pub fn from_matrix(a: &CMatrix) -> Self {
        let re = (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)].re).collect()).collect();
        let has_im = a.iter().any(|z| z.im != 0.0);
        let im = has_im.then(|| (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)].im).collect()).collect());
        let m = (a.nrows() != a.ncols()).then_some(a.ncols());
        Self { n: a.nrows(), m, re, im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.n;
        let cols = self.m.unwrap_or(self.n);
        check_grid(&self.re, rows, cols, "re")?;
        if let Some(im) = &self.im {
            check_grid(im, rows, cols, "im")?;
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            let im = self.im.as_ref().map(|g| g[i][j]).unwrap_or(0.0);
            c64(self.re[i][j], im)
        }))
    }
}

fn check_grid(g: &[Vec<f64>], rows: usize, cols: usize, name: &str) -> Result<()> {
    if g.len() != rows || g.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse(format!("matrix field '{name}' is not {rows}x{cols}")));
    }
    if g.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("matrix field '{name}' has non-finite entries")));
    }
    Ok(())
}

pub fn matrix_to_value(a: &CMatrix) -> serde_json::Value {
    serde_json::to_value(MatrixJson::from_matrix(a)).expect("matrix serializes")
}

pub fn matrix_from_value(v: &serde_json::Value) -> Result<CMatrix> {
    let mj: MatrixJson = serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))?;
    mj.to_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_rectangular() {
        let a = CMatrix::from_fn(2, 3, |i, j| c64(i as f64, j as f64 - 1.0));
        let v = matrix_to_value(&a);
        assert_eq!(v["m"], 3);
        assert_eq!(matrix_from_value(&v).unwrap(), a);
    }

    #[test]
    fn real_square_omits_im() {
        let a = CMatrix::identity(2, 2);
        let v = matrix_to_value(&a);
        assert!(v.get("im").is_none());
        assert_eq!(matrix_from_value(&v).unwrap(), a);
    }

    #[test]
    fn ragged_rejected() {
        let v = serde_json::json!({"n": 2, "re": [[1.0, 0.0], [0.0]]});
        assert!(matches!(matrix_from_value(&v), Err(Error::Parse(_))));
    }
}
