//! The multiplicative Poisson structure on `U(n)`.
//!
//! `gl(n, C) = u(n) ⊕ b(n)` (skew-Hermitian plus upper triangular with real
//! diagonal), with `u(n)*` identified with `b(n)` through
//! `⟨A, B⟩ = Im Tr(AB)`. Both summands are isotropic for this pairing.
//! The tensor is
//!
//! `Λ_R(g)(α1, α2) = Im Tr(p2(g⁻¹α1 g) p1(g⁻¹α2 g))`
//!
//! and the coadjoint transport used in the cocycle identity is the
//! re-projected `A_g α = p2(g⁻¹ α g)`.

use std::sync::Arc;

use crate::error::{PglError, Result};
use crate::jet::Jet2;
use crate::lie_algebra::presets;
use crate::linalg::{c, cmax_abs, commutator, expm, pad_block, realify, relative, CMat, RMat, RVec, C64};
use crate::poisson_jet::BivectorField;
use crate::rng::TrialRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    U,
    B,
}

impl Side {
    fn name(self) -> &'static str {
        match self {
            Side::U => "u(n)",
            Side::B => "b(n)",
        }
    }
}

/// `A = K + B` with `K ∈ u(n)`, `B ∈ b(n)`.
pub fn iwasawa_project(a: &CMat) -> (CMat, CMat) {
    let n = a.nrows();
    let mut k = CMat::zeros(n, n);
    let mut b = CMat::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = c(0.0, a[(i, i)].im);
        b[(i, i)] = c(a[(i, i)].re, 0.0);
        for j in 0..i {
            let low = a[(i, j)];
            k[(i, j)] = low;
            k[(j, i)] = -low.conj();
            b[(j, i)] = a[(j, i)] + low.conj();
        }
    }
    (k, b)
}

pub fn p1(a: &CMat) -> CMat {
    iwasawa_project(a).0
}

pub fn p2(a: &CMat) -> CMat {
    iwasawa_project(a).1
}

pub fn im_tr(a: &CMat, b: &CMat) -> f64 {
    (a * b).trace().im
}

/// Distance of `m` from the given summand (relative).
pub fn side_residual(m: &CMat, side: Side) -> f64 {
    let (k, b) = iwasawa_project(m);
    let off = match side {
        Side::U => b,
        Side::B => k,
    };
    relative(cmax_abs(&off), cmax_abs(m))
}

pub fn check_side(m: &CMat, side: Side, tol: f64) -> Result<()> {
    if side_residual(m, side) <= tol {
        return Ok(());
    }
    let other = if side == Side::U { Side::B } else { Side::U };
    let found = if side_residual(m, other) <= tol { other.name() } else { "neither summand" };
    Err(PglError::WrongSide { expected: side.name(), found })
}

pub fn unitarity_residual(g: &CMat) -> f64 {
    let n = g.nrows();
    cmax_abs(&(g * g.adjoint() - CMat::identity(n, n)))
}

pub fn check_unitary(g: &CMat, tol: f64) -> Result<()> {
    let residual = unitarity_residual(g);
    if residual > tol {
        return Err(PglError::NotMember { what: "U(n)".into(), residual });
    }
    Ok(())
}

/// `b(n)` basis: `E_jj`, then `E_jk`, `i E_jk` for `j < k`.
pub fn b_basis(n: usize) -> Vec<CMat> {
    let mut out = Vec::new();
    let unit = |i: usize, j: usize, z: C64| {
        let mut m = CMat::zeros(n, n);
        m[(i, j)] = z;
        m
    };
    for j in 0..n {
        out.push(unit(j, j, c(1.0, 0.0)));
    }
    for j in 0..n {
        for k in j + 1..n {
            out.push(unit(j, k, c(1.0, 0.0)));
            out.push(unit(j, k, c(0.0, 1.0)));
        }
    }
    out
}

pub fn random_b(rng: &mut TrialRng, n: usize) -> CMat {
    p2(&rng.complex_gaussian(n, n))
}

pub fn random_u(rng: &mut TrialRng, n: usize) -> CMat {
    p1(&rng.complex_gaussian(n, n))
}

/// The Poisson–Lie structure on `U(n)` at a fixed size.
#[derive(Clone, Debug)]
pub struct UnitaryPoissonLie {
    n: usize,
    tol: f64,
    u_basis: Vec<CMat>,
    b_basis: Vec<CMat>,
    /// Inverse of `G_ab = Im Tr(u_a b_b)`.
    pairing_inv: RMat,
}

impl UnitaryPoissonLie {
    pub fn new(n: usize, tol: f64) -> Self {
        let u_basis = presets::u(n).basis().to_vec();
        let b_basis = b_basis(n);
        let m = n * n;
        let g = RMat::from_fn(m, m, |a, b| im_tr(&u_basis[a], &b_basis[b]));
        let pairing_inv = g.try_inverse().expect("u(n) and b(n) are in duality");
        Self { n, tol, u_basis, b_basis, pairing_inv }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn u_basis(&self) -> &[CMat] {
        &self.u_basis
    }

    pub fn b_basis(&self) -> &[CMat] {
        &self.b_basis
    }

    /// The `b(n)` element whose pairing with `u_a` is `values[a]`.
    pub fn b_representative(&self, values: &RVec) -> CMat {
        let coeffs = &self.pairing_inv * values;
        let mut out = CMat::zeros(self.n, self.n);
        for (b, &x) in self.b_basis.iter().zip(coeffs.iter()) {
            out += b * c(x, 0.0);
        }
        out
    }

    fn check_inputs(&self, g: &CMat, a: &[&CMat]) -> Result<()> {
        check_unitary(g, self.tol)?;
        for x in a {
            check_side(x, Side::B, self.tol)?;
        }
        Ok(())
    }

    /// `Λ_R(g)(α1, α2)` without input validation.
    pub fn lambda_r_raw(g: &CMat, a1: &CMat, a2: &CMat) -> f64 {
        let gi = g.adjoint();
        im_tr(&p2(&(&gi * a1 * g)), &p1(&(&gi * a2 * g)))
    }

    pub fn lambda_r(&self, g: &CMat, a1: &CMat, a2: &CMat) -> Result<f64> {
        self.check_inputs(g, &[a1, a2])?;
        Ok(Self::lambda_r_raw(g, a1, a2))
    }

    /// `A_g α = p2(g⁻¹ α g)`; without `reproject`, the bare conjugate.
    pub fn transport(g: &CMat, a: &CMat, reproject: bool) -> CMat {
        let conj = g.adjoint() * a * g;
        if reproject {
            p2(&conj)
        } else {
            conj
        }
    }

    /// `|Λ_R(gh) - Λ_R(g) - Λ_R(h)(A_g α1, A_g α2)|`, relative.
    pub fn multiplicativity_residual(&self, g: &CMat, h: &CMat, a1: &CMat, a2: &CMat, reproject: bool) -> Result<f64> {
        self.check_inputs(g, &[a1, a2])?;
        check_unitary(h, self.tol)?;
        let gh = g * h;
        let lhs = Self::lambda_r_raw(&gh, a1, a2);
        let t1 = Self::lambda_r_raw(g, a1, a2);
        let t2 = Self::lambda_r_raw(h, &Self::transport(g, a1, reproject), &Self::transport(g, a2, reproject));
        let scale = cmax_abs(a1) * cmax_abs(a2);
        Ok(relative((lhs - t1 - t2).abs(), scale))
    }

    /// `T_eΛ_R(x)(α1, α2) = -Im Tr(α1 p1([x, α2]))`, from
    /// `d/dt Ad_{exp(-tx)} α = -[x, α]` at `t = 0`.
    pub fn te_lambda(x: &CMat, a1: &CMat, a2: &CMat) -> f64 {
        -im_tr(a1, &p1(&commutator(x, a2)))
    }

    /// Central difference of `t ↦ Λ_R(exp(tx))(α1, α2)` (audit oracle).
    pub fn te_lambda_fd(x: &CMat, a1: &CMat, a2: &CMat, h: f64) -> f64 {
        let gp = expm(&(x * c(h, 0.0)));
        let gm = expm(&(x * c(-h, 0.0)));
        (Self::lambda_r_raw(&gp, a1, a2) - Self::lambda_r_raw(&gm, a1, a2)) / (2.0 * h)
    }

    /// Infinitesimal transport `ad*_x α = -p2([x, α])`.
    pub fn ad_star(x: &CMat, a: &CMat) -> CMat {
        Self::ad_star_with(x, a, true)
    }

    /// `ad*_x α`, optionally without the projection back to `b(n)`.
    pub fn ad_star_with(x: &CMat, a: &CMat, reproject: bool) -> CMat {
        let br = commutator(x, a);
        if reproject {
            -p2(&br)
        } else {
            -br
        }
    }

    /// Residual of `λ([x, y]) = x·λ(y) - y·λ(x)` on `(α1, α2)`, where
    /// `(x·Θ)(α, β) = Θ(ad*_x α, β) + Θ(α, ad*_x β)`.
    pub fn cocycle_algebra_residual(&self, x: &CMat, y: &CMat, a1: &CMat, a2: &CMat) -> Result<f64> {
        self.cocycle_algebra_residual_with(x, y, a1, a2, true)
    }

    pub fn cocycle_algebra_residual_with(&self, x: &CMat, y: &CMat, a1: &CMat, a2: &CMat, reproject: bool) -> Result<f64> {
        check_side(x, Side::U, self.tol)?;
        check_side(y, Side::U, self.tol)?;
        check_side(a1, Side::B, self.tol)?;
        check_side(a2, Side::B, self.tol)?;
        let lhs = Self::te_lambda(&commutator(x, y), a1, a2);
        let act = |z: &CMat, w: &CMat| {
            Self::te_lambda(w, &Self::ad_star_with(z, a1, reproject), a2)
                + Self::te_lambda(w, a1, &Self::ad_star_with(z, a2, reproject))
        };
        let rhs = act(x, y) - act(y, x);
        let scale = cmax_abs(x) * cmax_abs(y) * cmax_abs(a1) * cmax_abs(a2);
        Ok(relative((lhs - rhs).abs(), scale))
    }

    /// The `b(n)` representative of `x ↦ T_eΛ_R(x)(α1, α2)`.
    pub fn derived_bracket(&self, a1: &CMat, a2: &CMat) -> Result<CMat> {
        check_side(a1, Side::B, self.tol)?;
        check_side(a2, Side::B, self.tol)?;
        let values = RVec::from_iterator(self.u_basis.len(), self.u_basis.iter().map(|x| Self::te_lambda(x, a1, a2)));
        Ok(self.b_representative(&values))
    }

    /// Jacobi residual of the derived bracket on a triple.
    pub fn derived_jacobi_residual(&self, a: &CMat, b: &CMat, cc: &CMat) -> Result<f64> {
        let br = |x: &CMat, y: &CMat| self.derived_bracket(x, y);
        let total = br(&br(a, b)?, cc)? + br(&br(b, cc)?, a)? + br(&br(cc, a)?, b)?;
        let scale = cmax_abs(a) * cmax_abs(b) * cmax_abs(cc);
        Ok(relative(cmax_abs(&total), scale))
    }

    /// Right-trivialized differential: the `b(n)` element `β` with
    /// `Im Tr(Xβ) = df_g(Xg)` for `X ∈ u(n)`, where `grad` is the gradient
    /// of `f` in interleaved real coordinates.
    pub fn right_differential(&self, grad: &RVec, g: &CMat) -> CMat {
        let values = RVec::from_iterator(self.u_basis.len(), self.u_basis.iter().map(|x| grad.dot(&realify(&(x * g)))));
        self.b_representative(&values)
    }

    /// The tensor as a bivector field on the real chart `R^{2n²}` of all
    /// `n × n` matrices, with `g⁻¹` replaced by `g*` so that entries are
    /// polynomial. Tangent to `U(n)` along `U(n)`.
    pub fn chart_bivector(&self) -> BivectorField {
        let this = Arc::new(self.clone());
        let n = self.n;
        let dim = 2 * n * n;
        BivectorField::from_lambda(dim, move |x| this.chart_lambda(x))
    }

    fn chart_lambda(&self, x: &[Jet2]) -> Vec<Jet2> {
        let n = self.n;
        let dim = 2 * n * n;
        let zero = || Jet2::constant(dim, 0.0);
        let m: Vec<CJ> = (0..n * n).map(|e| CJ { re: x[2 * e].clone(), im: x[2 * e + 1].clone() }).collect();
        let m_adj = cj_adjoint(&m, n);
        // Q_m = M* β_m M for each coordinate covector
        let mut proj = Vec::with_capacity(dim);
        for coord in 0..dim {
            let (entry, imag) = (coord / 2, coord % 2 == 1);
            let (i, j) = (entry / n, entry % n);
            // values on the u basis: Re/Im (X_a M)_ij
            let values: Vec<Jet2> = self
                .u_basis
                .iter()
                .map(|xa| {
                    let mut acc = CJ { re: zero(), im: zero() };
                    for k in 0..n {
                        acc = acc.plus(&m[k * n + j].times_const(xa[(i, k)]));
                    }
                    if imag {
                        acc.im
                    } else {
                        acc.re
                    }
                })
                .collect();
            let mut beta: Vec<CJ> = (0..n * n).map(|_| CJ { re: zero(), im: zero() }).collect();
            for (bidx, bmat) in self.b_basis.iter().enumerate() {
                let mut coeff = zero();
                for (a, v) in values.iter().enumerate() {
                    let w = self.pairing_inv[(bidx, a)];
                    if w != 0.0 {
                        coeff = coeff + v * w;
                    }
                }
                for e in 0..n * n {
                    let z = bmat[(e / n, e % n)];
                    if z != c(0.0, 0.0) {
                        beta[e] = beta[e].plus(&CJ { re: coeff.clone() * z.re, im: coeff.clone() * z.im });
                    }
                }
            }
            let q = cj_mul(&cj_mul(&m_adj, &beta, n), &m, n);
            proj.push(cj_iwasawa(&q, n));
        }
        let mut out = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                let prod = cj_mul(&proj[a].1, &proj[b].0, n);
                let mut tr = zero();
                for d in 0..n {
                    tr = tr + &prod[d * n + d].im;
                }
                out.push(tr);
            }
        }
        out
    }
}

/// Complex second-order jet.
#[derive(Clone, Debug)]
struct CJ {
    re: Jet2,
    im: Jet2,
}

impl CJ {
    fn plus(&self, o: &CJ) -> CJ {
        CJ { re: &self.re + &o.re, im: &self.im + &o.im }
    }
    fn minus(&self, o: &CJ) -> CJ {
        CJ { re: &self.re - &o.re, im: &self.im - &o.im }
    }
    fn times(&self, o: &CJ) -> CJ {
        CJ { re: &self.re * &o.re - &self.im * &o.im, im: &self.re * &o.im + &self.im * &o.re }
    }
    fn times_const(&self, z: C64) -> CJ {
        CJ { re: &self.re * z.re - &self.im * z.im, im: &self.re * z.im + &self.im * z.re }
    }
    fn conj(&self) -> CJ {
        CJ { re: self.re.clone(), im: -&self.im }
    }
    fn zero(dim: usize) -> CJ {
        CJ { re: Jet2::constant(dim, 0.0), im: Jet2::constant(dim, 0.0) }
    }
}

fn cj_mul(a: &[CJ], b: &[CJ], n: usize) -> Vec<CJ> {
    let dim = a[0].re.dim();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = CJ::zero(dim);
            for k in 0..n {
                acc = acc.plus(&a[i * n + k].times(&b[k * n + j]));
            }
            out.push(acc);
        }
    }
    out
}

fn cj_adjoint(a: &[CJ], n: usize) -> Vec<CJ> {
    (0..n * n).map(|e| a[(e % n) * n + e / n].conj()).collect()
}

/// Jet version of [`iwasawa_project`].
fn cj_iwasawa(a: &[CJ], n: usize) -> (Vec<CJ>, Vec<CJ>) {
    let dim = a[0].re.dim();
    let mut k: Vec<CJ> = (0..n * n).map(|_| CJ::zero(dim)).collect();
    let mut b: Vec<CJ> = (0..n * n).map(|_| CJ::zero(dim)).collect();
    for i in 0..n {
        let d = &a[i * n + i];
        k[i * n + i] = CJ { re: Jet2::constant(dim, 0.0), im: d.im.clone() };
        b[i * n + i] = CJ { re: d.re.clone(), im: Jet2::constant(dim, 0.0) };
        for j in 0..i {
            let low = &a[i * n + j];
            k[i * n + j] = low.clone();
            k[j * n + i] = CJ::zero(dim).minus(&low.conj());
            b[j * n + i] = a[j * n + i].plus(&low.conj());
        }
    }
    (k, b)
}

// ---------------------------------------------------------------------------
// the ascending tower U(1) ⊂ U(2) ⊂ ...

/// `diag(g, fill·I)` at size `k`. The canonical embedding uses `fill = 1`.
pub fn promote_group(g: &CMat, k: usize, fill: C64) -> Result<CMat> {
    if k < g.nrows() {
        return Err(PglError::InvalidLevel(format!("cannot promote level {} to {k}", g.nrows())));
    }
    Ok(pad_block(g, k, fill))
}

pub fn promote_algebra(a: &CMat, k: usize) -> Result<CMat> {
    promote_group(a, k, c(0.0, 0.0))
}

pub fn restrict(m: &CMat, n: usize) -> Result<CMat> {
    if n > m.nrows() {
        return Err(PglError::InvalidLevel(format!("cannot restrict level {} to {n}", m.nrows())));
    }
    Ok(m.view((0, 0), (n, n)).into_owned())
}

type LevelFn = Arc<dyn Fn(usize, &[Jet2]) -> Jet2 + Send + Sync>;

/// A real coordinate of a matrix entry: `(row, col, imaginary part)`.
pub type EntryCoord = (usize, usize, bool);

/// A family of scalar fields, one per level, in interleaved real
/// coordinates of the level's matrices.
#[derive(Clone)]
pub struct TowerField {
    f: LevelFn,
}

impl TowerField {
    pub fn new(f: impl Fn(usize, &[Jet2]) -> Jet2 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(move |_, x| Jet2::constant(x.len(), v))
    }

    /// `M ↦ Re Tr(L M)` with `L` zero-padded to each level.
    pub fn re_trace(l: CMat) -> Self {
        Self::new(move |k, x| {
            let mut acc = Jet2::constant(x.len(), 0.0);
            for i in 0..l.nrows().min(k) {
                for j in 0..l.ncols().min(k) {
                    // Re(L_ij M_ji)
                    let z = l[(i, j)];
                    let e = 2 * (j * k + i);
                    acc = acc + &x[e] * z.re - &x[e + 1] * z.im;
                }
            }
            acc
        })
    }

    /// `Σ coeff · coord_a · coord_b` over coordinates of the top-left
    /// entries.
    pub fn quadratic(terms: Vec<(EntryCoord, EntryCoord, f64)>) -> Self {
        Self::new(move |k, x| {
            let idx = |(r, c, im): (usize, usize, bool)| 2 * (r * k + c) + im as usize;
            let mut acc = Jet2::constant(x.len(), 0.0);
            for &(a, b, w) in &terms {
                acc = acc + (&x[idx(a)] * &x[idx(b)]) * w;
            }
            acc
        })
    }

    pub fn eval(&self, m: &CMat) -> Jet2 {
        let k = m.nrows();
        let x: Vec<f64> = realify(m).iter().cloned().collect();
        (self.f)(k, &Jet2::variables(&x))
    }
}

/// `{f, h}(g) = Λ_R(g)(d^R f, d^R h)` at a single level.
pub fn level_bracket(plie: &UnitaryPoissonLie, f: &TowerField, h: &TowerField, g: &CMat) -> Result<f64> {
    if g.nrows() != plie.n() {
        return Err(PglError::DimensionMismatch { expected: plie.n(), found: g.nrows() });
    }
    let bf = plie.right_differential(&RVec::from_vec(f.eval(g).grad), g);
    let bh = plie.right_differential(&RVec::from_vec(h.eval(g).grad), g);
    plie.lambda_r(g, &bf, &bh)
}

/// Bracket of `f`, `h` at `g` promoted to level `k`; fails if the families
/// disagree with themselves across levels at the evaluation point.
pub fn tower_bracket(f: &TowerField, h: &TowerField, g: &CMat, k: usize, tol: f64) -> Result<f64> {
    tower_bracket_with_fill(f, h, g, k, tol, c(1.0, 0.0))
}

/// As [`tower_bracket`], with a configurable padding value (the canonical
/// embedding pads with 1; anything else leaves the group).
pub fn tower_bracket_with_fill(f: &TowerField, h: &TowerField, g: &CMat, k: usize, tol: f64, fill: C64) -> Result<f64> {
    let n = g.nrows();
    let big = promote_group(g, k, fill)?;
    for field in [f, h] {
        let (lo, hi) = (field.eval(g).val, field.eval(&big).val);
        let residual = relative((lo - hi).abs(), lo.abs());
        if residual > tol {
            return Err(PglError::IncompatibleFamily { residual });
        }
    }
    let _ = n;
    level_bracket(&UnitaryPoissonLie::new(k, tol), f, h, &big)
}
