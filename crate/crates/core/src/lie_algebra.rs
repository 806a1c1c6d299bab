//! Real matrix Lie algebras given by a basis, and their structure constants.

use serde::{Deserialize, Serialize};

use crate::error::{PglError, Result};
use crate::linalg::{c, commutator, max_abs, pinv, realify, relative, CMat, RMat, RVec};
use crate::rng::TrialRng;

/// `c[i][j][k]` with `[e_i, e_j] = Σ_k c_ijk e_k`, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureConstantsJson {
    pub dim: usize,
    pub entries: Vec<(usize, usize, usize, f64)>,
}

impl StructureConstants {
    /// Validates antisymmetry and the Jacobi identity (relative to `tol`).
    pub fn new(dim: usize, c: Vec<f64>, tol: f64) -> Result<Self> {
        let sc = Self::unchecked(dim, c)?;
        let a = sc.antisymmetry_residual();
        if a > tol {
            return Err(PglError::InvalidStructureConstants { which: "antisymmetry", residual: a });
        }
        let j = sc.jacobi_residual();
        if j > tol {
            return Err(PglError::InvalidStructureConstants { which: "the Jacobi identity", residual: j });
        }
        Ok(sc)
    }

    pub fn unchecked(dim: usize, c: Vec<f64>) -> Result<Self> {
        if c.len() != dim * dim * dim {
            return Err(PglError::DimensionMismatch { expected: dim * dim * dim, found: c.len() });
        }
        Ok(Self { dim, c })
    }

    pub fn abelian(dim: usize) -> Self {
        Self { dim, c: vec![0.0; dim * dim * dim] }
    }

    /// `so(3)`: `c_ijk = ε_ijk`.
    pub fn so3() -> Self {
        let mut c = vec![0.0; 27];
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[(i * 3 + j) * 3 + k] = 1.0;
            c[(j * 3 + i) * 3 + k] = -1.0;
        }
        Self { dim: 3, c }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    fn scale(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.dim;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    r = r.max((self.get(i, j, k) + self.get(j, i, k)).abs());
                }
            }
        }
        relative(r, self.scale())
    }

    /// `max |Σ_l c_ijl c_lkm + c_jkl c_lim + c_kil c_ljm|`.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for m in 0..n {
                        let s: f64 = (0..n)
                            .map(|l| {
                                self.get(i, j, l) * self.get(l, k, m)
                                    + self.get(j, k, l) * self.get(l, i, m)
                                    + self.get(k, i, l) * self.get(l, j, m)
                            })
                            .sum();
                        r = r.max(s.abs());
                    }
                }
            }
        }
        relative(r, self.scale() * self.scale())
    }

    /// `[x, y]` in coordinates.
    pub fn bracket(&self, x: &RVec, y: &RVec) -> RVec {
        let n = self.dim;
        RVec::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += x[i] * y[j] * self.get(i, j, k);
                }
            }
            s
        })
    }

    pub fn to_json(&self) -> StructureConstantsJson {
        let n = self.dim;
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    if v != 0.0 {
                        entries.push((i, j, k, v));
                    }
                }
            }
        }
        StructureConstantsJson { dim: n, entries }
    }

    pub fn from_json(js: &StructureConstantsJson, tol: f64) -> Result<Self> {
        let n = js.dim;
        let mut c = vec![0.0; n * n * n];
        for &(i, j, k, v) in &js.entries {
            if i >= n || j >= n || k >= n {
                return Err(PglError::MalformedInstance(format!("index ({i},{j},{k}) out of range for dim {n}")));
            }
            c[(i * n + j) * n + k] = v;
        }
        Self::new(n, c, tol)
    }
}

/// A real Lie subalgebra of `gl(n, C)` spanned by `basis`.
#[derive(Clone, Debug)]
pub struct MatrixAlgebra {
    n: usize,
    basis: Vec<CMat>,
    /// Columns are the realified basis matrices.
    coords_map: RMat,
    coords_pinv: RMat,
}

impl MatrixAlgebra {
    pub fn new(n: usize, basis: Vec<CMat>) -> Result<Self> {
        for b in &basis {
            if b.shape() != (n, n) {
                return Err(PglError::DimensionMismatch { expected: n, found: b.nrows() });
            }
        }
        let m = basis.len();
        let mut coords_map = RMat::zeros(2 * n * n, m);
        for (j, b) in basis.iter().enumerate() {
            coords_map.set_column(j, &realify(b));
        }
        let rank = crate::linalg::rank(&coords_map, 0.0);
        if rank < m {
            return Err(PglError::DependentFlatBasis { rank, rows: m });
        }
        let coords_pinv = pinv(&coords_map, 0.0);
        Ok(Self { n, basis, coords_map, coords_pinv })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    pub fn element(&self, coeffs: &RVec) -> CMat {
        let mut out = CMat::zeros(self.n, self.n);
        for (b, &x) in self.basis.iter().zip(coeffs.iter()) {
            out += b * c(x, 0.0);
        }
        out
    }

    /// Least-squares coordinates of `m` and the relative residual of `m`
    /// outside the span.
    pub fn coords(&self, m: &CMat) -> (RVec, f64) {
        let v = realify(m);
        let x = &self.coords_pinv * &v;
        let res = relative((&self.coords_map * &x - &v).amax(), v.amax());
        (x, res)
    }

    /// Structure constants and the worst commutator-closure residual.
    pub fn structure_constants(&self) -> (StructureConstants, f64) {
        let m = self.dim();
        let mut c = vec![0.0; m * m * m];
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let (x, r) = self.coords(&commutator(&self.basis[i], &self.basis[j]));
                worst = worst.max(r);
                for k in 0..m {
                    c[(i * m + j) * m + k] = x[k];
                }
            }
        }
        (StructureConstants { dim: m, c }, worst)
    }

    /// Basis change `e'_i = Σ_j a_ji e_j` for an invertible `a`.
    pub fn rebased(&self, a: &RMat) -> Result<Self> {
        let basis = (0..self.dim()).map(|i| self.element(&a.column(i).into_owned())).collect();
        Self::new(self.n, basis)
    }
}

fn unit(n: usize, i: usize, j: usize, z: crate::linalg::C64) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, j)] = z;
    m
}

/// Named presets for matrix algebras.
pub mod presets {
    use super::*;

    /// `so(3)` with `[L1, L2] = L3` and cyclic.
    pub fn so3() -> MatrixAlgebra {
        let one = c(1.0, 0.0);
        let l = |a: usize, b: usize| unit(3, b, a, one) - unit(3, a, b, one);
        MatrixAlgebra::new(3, vec![l(1, 2), l(2, 0), l(0, 1)]).expect("independent")
    }

    /// `su(2)` spanned by `i σ_x / 2`, `i σ_y / 2`, `i σ_z / 2` up to sign,
    /// chosen so that `[e1, e2] = e3`.
    pub fn su2() -> MatrixAlgebra {
        let h = 0.5;
        let e1 = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -h), c(0.0, -h), c(0.0, 0.0)]);
        let e2 = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-h, 0.0), c(h, 0.0), c(0.0, 0.0)]);
        let e3 = CMat::from_row_slice(2, 2, &[c(0.0, -h), c(0.0, 0.0), c(0.0, 0.0), c(0.0, h)]);
        MatrixAlgebra::new(2, vec![e1, e2, e3]).expect("independent")
    }

    /// `u(2) = su(2) ⊕ iR`.
    pub fn u2() -> MatrixAlgebra {
        let mut basis = su2().basis().to_vec();
        basis.push(CMat::identity(2, 2) * c(0.0, 1.0));
        MatrixAlgebra::new(2, basis).expect("independent")
    }

    /// Diagonal `u(1)^n`.
    pub fn torus(n: usize) -> MatrixAlgebra {
        MatrixAlgebra::new(n, (0..n).map(|i| unit(n, i, i, c(0.0, 1.0))).collect()).expect("independent")
    }

    /// `gl(n, R)` with elementary matrices in row-major order.
    pub fn gl_real(n: usize) -> MatrixAlgebra {
        let mut basis = Vec::new();
        for i in 0..n {
            for j in 0..n {
                basis.push(unit(n, i, j, c(1.0, 0.0)));
            }
        }
        MatrixAlgebra::new(n, basis).expect("independent")
    }

    /// `sl(2, R)`: `H, E, F`.
    pub fn sl2() -> MatrixAlgebra {
        let one = c(1.0, 0.0);
        let h = unit(2, 0, 0, one) - unit(2, 1, 1, one);
        MatrixAlgebra::new(2, vec![h, unit(2, 0, 1, one), unit(2, 1, 0, one)]).expect("independent")
    }

    /// Strictly upper triangular `3 × 3`.
    pub fn heisenberg() -> MatrixAlgebra {
        let one = c(1.0, 0.0);
        MatrixAlgebra::new(3, vec![unit(3, 0, 1, one), unit(3, 1, 2, one), unit(3, 0, 2, one)]).expect("independent")
    }

    /// `u(n)` spanned by `i E_jj`, `E_jk - E_kj`, `i(E_jk + E_kj)`.
    pub fn u(n: usize) -> MatrixAlgebra {
        let mut basis = Vec::new();
        for j in 0..n {
            basis.push(unit(n, j, j, c(0.0, 1.0)));
        }
        for j in 0..n {
            for k in j + 1..n {
                basis.push(unit(n, j, k, c(1.0, 0.0)) - unit(n, k, j, c(1.0, 0.0)));
                basis.push(unit(n, j, k, c(0.0, 1.0)) + unit(n, k, j, c(0.0, 1.0)));
            }
        }
        MatrixAlgebra::new(n, basis).expect("independent")
    }
}

/// A random non-abelian Lie algebra of dimension at least 3: one of the
/// presets under a well-conditioned random change of basis.
pub fn random_algebra(rng: &mut TrialRng) -> MatrixAlgebra {
    let base = match rng.index(5) {
        0 => presets::so3(),
        1 => presets::sl2(),
        2 => presets::gl_real(2),
        3 => presets::u2(),
        _ => presets::heisenberg(),
    };
    let m = base.dim();
    let q = rng.orthogonal(m);
    let d = RMat::from_fn(m, m, |i, j| if i == j { rng.uniform(0.5, 2.0) } else { 0.0 });
    base.rebased(&(q * d)).expect("basis change is invertible")
}

/// Relative size of `x` against `scale`, for reporting.
pub fn residual_of(m: &RMat, scale: f64) -> f64 {
    relative(max_abs(m), scale)
}
