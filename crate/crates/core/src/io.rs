//! JSON wire formats shared by instance files and reports.
//!
//! Matrices are row-major with every entry written as an `[re, im]` pair,
//! real matrices included.

use serde::{Deserialize, Serialize};

use crate::error::{PglError, Result};
use crate::linalg::{c, CMat, RMat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_real(m: &RMat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push([m[(i, j)], 0.0]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn from_complex(m: &CMat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    fn check(&self) -> Result<()> {
        if self.data.len() != self.rows * self.cols {
            return Err(PglError::MalformedInstance(format!(
                "matrix declares {}x{} but carries {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(())
    }

    pub fn to_complex(&self) -> Result<CMat> {
        self.check()?;
        Ok(CMat::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            c(re, im)
        }))
    }

    /// Real matrix; any nonzero imaginary part is rejected.
    pub fn to_real(&self) -> Result<RMat> {
        self.check()?;
        if let Some(bad) = self.data.iter().find(|z| z[1] != 0.0) {
            return Err(PglError::MalformedInstance(format!(
                "expected a real matrix, found imaginary part {}",
                bad[1]
            )));
        }
        Ok(RMat::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j][0]))
    }
}
