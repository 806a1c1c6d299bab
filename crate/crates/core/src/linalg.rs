//! Dense linear-algebra helpers shared by every module: rank-revealing
//! bases, nullspaces, pseudo-inverses and scale-free residuals.

use nalgebra::{Complex, DMatrix, DVector};

pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;
pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// Relative singular-value cutoff used for every rank decision.
pub const RANK_EPS: f64 = 1e-12;

/// Default relative tolerance for residual checks.
pub const DEFAULT_TOL: f64 = 1e-9;

pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn cmax_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

/// Scale-free residual `r / (1 + scale)`.
pub fn relative(r: f64, scale: f64) -> f64 {
    r / (1.0 + scale)
}

/// Singular-value threshold `max(m,n) * max(sigma_max, reference) * 1e-12`.
pub fn rank_cutoff(rows: usize, cols: usize, sigma_max: f64, reference: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max.max(reference) * RANK_EPS
}

fn svd_parts(m: &RMat) -> (RMat, RVec, RMat) {
    let svd = m.clone().svd(true, true);
    (
        svd.u.expect("u requested"),
        svd.singular_values,
        svd.v_t.expect("v_t requested"),
    )
}

/// Orthonormal basis of the column space of `m`.
///
/// `reference` is an operand scale below which singular values count as
/// zero even when the matrix itself is tiny (products that should vanish).
pub fn range_basis(m: &RMat, reference: f64) -> RMat {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return RMat::zeros(rows, 0);
    }
    let (u, s, _) = svd_parts(m);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let cut = rank_cutoff(rows, cols, smax, reference);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > cut && s[i] > 0.0).collect();
    RMat::from_fn(rows, keep.len(), |r, c| u[(r, keep[c])])
}

pub fn rank(m: &RMat, reference: f64) -> usize {
    range_basis(m, reference).ncols()
}

/// Orthonormal basis of the orthogonal complement of span(q), where `q`
/// has orthonormal columns in R^n.
pub fn complement(q: &RMat) -> RMat {
    let n = q.nrows();
    if q.ncols() == 0 {
        return RMat::identity(n, n);
    }
    if q.ncols() >= n {
        return RMat::zeros(n, 0);
    }
    let proj = RMat::identity(n, n) - q * q.transpose();
    // eigenvalues of a projector cluster at 0 and 1
    let eig = ((&proj + proj.transpose()) * 0.5).symmetric_eigen();
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    if keep.is_empty() {
        return RMat::zeros(n, 0);
    }
    let raw = RMat::from_fn(n, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
    // one projection pass removes any residual leakage into span(q)
    let cleaned = &raw - q * (q.transpose() * &raw);
    cleaned.qr().q()
}

/// Orthonormal basis of `{x : a x = 0}`.
pub fn nullspace(a: &RMat, reference: f64) -> RMat {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return RMat::identity(cols, cols);
    }
    let row_space = range_basis(&a.transpose(), reference);
    complement(&row_space)
}

/// Moore–Penrose pseudo-inverse with the shared rank cutoff.
pub fn pinv(a: &RMat, reference: f64) -> RMat {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return RMat::zeros(cols, rows);
    }
    let (u, s, vt) = svd_parts(a);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let cut = rank_cutoff(rows, cols, smax, reference);
    let mut out = RMat::zeros(cols, rows);
    for i in 0..s.len() {
        if s[i] > cut && s[i] > 0.0 {
            let v = vt.row(i).transpose();
            let w = u.column(i);
            out += (v * w.transpose()) / s[i];
        }
    }
    out
}

/// Spectral distance between the orthogonal projectors of two subspaces
/// (the sine of the largest principal angle); 1 when dimensions differ.
pub fn span_distance(q1: &RMat, q2: &RMat) -> f64 {
    if q1.ncols() != q2.ncols() || q1.nrows() != q2.nrows() {
        return 1.0;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let d = q1 * q1.transpose() - q2 * q2.transpose();
    spectral_norm(&d)
}

pub fn spectral_norm(m: &RMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn block_diag(a: &RMat, b: &RMat) -> RMat {
    let mut out = RMat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn hstack(a: &RMat, b: &RMat) -> RMat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = RMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vstack(a: &RMat, b: &RMat) -> RMat {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = RMat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

// ---------------------------------------------------------------------------
// complex helpers

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn trace(a: &CMat) -> C64 {
    a.trace()
}

pub fn expm(a: &CMat) -> CMat {
    a.clone().exp()
}

pub fn cidentity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| c(x, 0.0))
}

/// Interleaved `(re, im)` row-major real coordinates of a complex matrix.
pub fn realify(m: &CMat) -> RVec {
    let (r, cols) = m.shape();
    let mut v = RVec::zeros(2 * r * cols);
    for i in 0..r {
        for j in 0..cols {
            let z = m[(i, j)];
            v[2 * (i * cols + j)] = z.re;
            v[2 * (i * cols + j) + 1] = z.im;
        }
    }
    v
}

pub fn complexify(v: &RVec, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |i, j| {
        c(v[2 * (i * cols + j)], v[2 * (i * cols + j) + 1])
    })
}

/// Block-diagonal embedding `diag(a, fill * I)` into size `k`.
pub fn pad_block(a: &CMat, k: usize, fill: C64) -> CMat {
    let n = a.nrows();
    let mut out = CMat::zeros(k, k);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    for i in n..k {
        out[(i, i)] = fill;
    }
    out
}

/// Complex SVD `m = W diag(σ) V*`. nalgebra's complex SVD loses accuracy
/// on ill-conditioned input, so this goes through faer.
pub fn csvd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return (CMat::zeros(rows, 0), Vec::new(), CMat::zeros(cols, 0));
    }
    let fm = faer::Mat::<faer::c64>::from_fn(rows, cols, |i, j| faer::c64::new(m[(i, j)].re, m[(i, j)].im));
    let svd = fm.thin_svd().expect("svd converges");
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let w = CMat::from_fn(rows, k, |i, j| c(u[(i, j)].re, u[(i, j)].im));
    let vv = CMat::from_fn(cols, k, |i, j| c(v[(i, j)].re, v[(i, j)].im));
    let sig = (0..k).map(|j| s[j].re).collect();
    (w, sig, vv)
}

pub fn csingular_values(m: &CMat) -> Vec<f64> {
    csvd(m).1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_svd_reconstructs_ill_conditioned_input() {
        let mut rng = crate::rng::TrialRng::new(11);
        for _ in 0..50 {
            let sig = CMat::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(1e-4, 0.0), c(1e-8, 0.0)]));
            let m = rng.unitary(3) * sig * rng.unitary(3);
            let (w, s, v) = csvd(&m);
            let rec = &w * CMat::from_diagonal(&DVector::from_vec(s.iter().map(|&x| c(x, 0.0)).collect())) * v.adjoint();
            assert!(cmax_abs(&(rec - &m)) < 1e-14);
        }
    }

    #[test]
    fn nullspace_of_wide_matrix() {
        let a = RMat::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = nullspace(&a, 1.0);
        assert_eq!(n.ncols(), 2);
        assert!(max_abs(&(&a * &n)) < 1e-14);
        assert!(max_abs(&(n.transpose() * &n - RMat::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn tiny_product_counts_as_zero_with_reference() {
        let m = RMat::from_element(3, 1, 1e-17);
        assert_eq!(range_basis(&m, 1.0).ncols(), 0);
        assert_eq!(range_basis(&m, 0.0).ncols(), 1);
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let a = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = pinv(&a, 0.0);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(p[(1, 1)], 0.0);
    }

    #[test]
    fn realify_roundtrip() {
        let m = CMat::from_fn(2, 3, |i, j| c(i as f64, j as f64 - 1.0));
        assert_eq!(complexify(&realify(&m), 2, 3), m);
    }

    #[test]
    fn complement_and_range_are_orthogonal() {
        let mut rng = crate::rng::TrialRng::new(99);
        for trial in 0..300 {
            let n = 2 + trial % 7;
            let k = trial % n;
            let a = rng.gaussian(n, k);
            let q = range_basis(&a, 0.0);
            assert_eq!(q.ncols(), k);
            assert!(max_abs(&(q.transpose() * &q - RMat::identity(k, k))) < 1e-12);
            assert!(max_abs(&(&a - &q * (q.transpose() * &a))) < 1e-12 * (1.0 + max_abs(&a)));
            let c = complement(&q);
            assert_eq!(c.ncols(), n - k);
            assert!(max_abs(&(q.transpose() * &c)) < 1e-12);
            assert!(max_abs(&(c.transpose() * &c - RMat::identity(n - k, n - k))) < 1e-12);
        }
    }

    #[test]
    fn empty_shapes() {
        let z = RMat::zeros(0, 3);
        assert_eq!(nullspace(&z, 1.0).ncols(), 3);
        assert_eq!(range_basis(&RMat::zeros(3, 0), 1.0).ncols(), 0);
        assert_eq!(complement(&RMat::identity(2, 2)).ncols(), 0);
    }
}
