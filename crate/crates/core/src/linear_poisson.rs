//! Finite-dimensional linear partial Poisson spaces.
//!
//! A space is a triple `(E♭, E, P)`: `E = R^n`, a chosen set of functionals
//! spanning `E♭` (the rows of `flat`), and an anchor `P` sending
//! `E♭`-coordinates into `E`. The pairing form is pinned as
//! `Ω_P(α, β) = ⟨α, Pβ⟩`, i.e. the matrix `flat · anchor` must be skew.
//!
//! Subspaces are stored as orthonormal column bases. Every rank decision
//! goes through [`crate::linalg::rank_cutoff`]. Intersections in finite
//! dimension are always clean, so relation composition needs no
//! cleanliness hypothesis.

use serde::{Deserialize, Serialize};

use crate::error::{PglError, Result};
use crate::io::MatrixJson;
use crate::linalg::{
    block_diag, complement, hstack, max_abs, nullspace, pinv, range_basis, rank, relative,
    span_distance, RMat, RVec,
};

/// A linear subspace of `R^ambient_dim` with an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient_dim: usize,
    basis: RMat,
    tol: f64,
}

impl Subspace {
    /// Span of the columns of `span`, reduced to an orthonormal basis.
    pub fn from_span(ambient_dim: usize, span: &RMat, tol: f64) -> Result<Self> {
        Self::from_span_scaled(ambient_dim, span, 0.0, tol)
    }

    /// Like [`Subspace::from_span`], with an operand scale so that columns
    /// that are numerically zero relative to `reference` are dropped.
    pub fn from_span_scaled(ambient_dim: usize, span: &RMat, reference: f64, tol: f64) -> Result<Self> {
        if span.nrows() != ambient_dim {
            return Err(PglError::DimensionMismatch { expected: ambient_dim, found: span.nrows() });
        }
        Ok(Self { ambient_dim, basis: range_basis(span, reference), tol })
    }

    pub(crate) fn from_orthonormal(basis: RMat, tol: f64) -> Self {
        Self { ambient_dim: basis.nrows(), basis, tol }
    }

    pub fn zero(ambient_dim: usize, tol: f64) -> Self {
        Self { ambient_dim, basis: RMat::zeros(ambient_dim, 0), tol }
    }

    pub fn full(ambient_dim: usize, tol: f64) -> Self {
        Self { ambient_dim, basis: RMat::identity(ambient_dim, ambient_dim), tol }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &RMat {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Norm of the component of `v` outside the subspace.
    pub fn membership_residual(&self, v: &RVec) -> f64 {
        let proj = &self.basis * (self.basis.transpose() * v);
        (v - proj).norm()
    }

    pub fn contains(&self, v: &RVec) -> bool {
        self.membership_residual(v) <= self.tol * (1.0 + v.norm())
    }

    /// Largest principal-angle sine to `other` (1 on dimension mismatch).
    pub fn distance(&self, other: &Subspace) -> f64 {
        span_distance(&self.basis, &other.basis)
    }

    pub fn same_as(&self, other: &Subspace) -> bool {
        self.distance(other) <= self.tol.max(other.tol)
    }

    /// Largest residual of a basis vector of `self` outside `other`.
    pub fn inclusion_residual(&self, other: &Subspace) -> f64 {
        (0..self.dim())
            .map(|j| other.membership_residual(&self.basis.column(j).into_owned()))
            .fold(0.0, f64::max)
    }

    pub fn intersect(&self, other: &Subspace) -> Result<Subspace> {
        self.check_ambient(other.ambient_dim)?;
        let m = hstack(&self.basis, &(-&other.basis));
        let null = nullspace(&m, 1.0);
        let span = &self.basis * null.rows(0, self.dim());
        Subspace::from_span_scaled(self.ambient_dim, &span, 1.0, self.tol)
    }

    fn check_ambient(&self, n: usize) -> Result<()> {
        if self.ambient_dim != n {
            return Err(PglError::DimensionMismatch { expected: self.ambient_dim, found: n });
        }
        Ok(())
    }

    pub fn to_json(&self) -> SubspaceJson {
        SubspaceJson { dim: self.ambient_dim, matrix: MatrixJson::from_real(&self.basis), tol: self.tol }
    }

    pub fn from_json(js: &SubspaceJson) -> Result<Self> {
        Self::from_span(js.dim, &js.matrix.to_real()?, js.tol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceJson {
    pub dim: usize,
    pub matrix: MatrixJson,
    pub tol: f64,
}

/// Annihilator of `F` in the full dual, in the standard dual coordinates.
pub fn annihilator(f: &Subspace) -> Subspace {
    Subspace::from_orthonormal(complement(&f.basis), f.tol)
}

/// Wire form of a space: the flat basis rows and the anchor matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonSpaceJson {
    pub dim: usize,
    pub flat: MatrixJson,
    pub matrix: MatrixJson,
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `(E♭, E, P)` with `E = R^dim`, `E♭` spanned by the rows of `flat`.
#[derive(Clone, Debug)]
pub struct LinearPoissonSpace {
    dim: usize,
    flat: RMat,
    anchor: RMat,
    tol: f64,
}

impl LinearPoissonSpace {
    pub fn new(flat: RMat, anchor: RMat, tol: f64) -> Result<Self> {
        let space = Self::from_parts_unchecked(flat, anchor, tol)?;
        let k = space.flat_dim();
        let r = rank(&space.flat, 0.0);
        if r < k {
            return Err(PglError::DependentFlatBasis { rank: r, rows: k });
        }
        let residual = space.skewness_residual();
        if residual > tol {
            return Err(PglError::NotSkew { residual });
        }
        Ok(space)
    }

    /// Shape checks only; skewness and independence are not enforced.
    /// Used to build deliberately corrupted spaces in mutation runs.
    pub fn from_parts_unchecked(flat: RMat, anchor: RMat, tol: f64) -> Result<Self> {
        let dim = flat.ncols();
        if anchor.nrows() != dim {
            return Err(PglError::DimensionMismatch { expected: dim, found: anchor.nrows() });
        }
        if anchor.ncols() != flat.nrows() {
            return Err(PglError::DimensionMismatch { expected: flat.nrows(), found: anchor.ncols() });
        }
        Ok(Self { dim, flat, anchor, tol })
    }

    /// Full dual (`flat = I`) with the given skew anchor.
    pub fn with_full_dual(anchor: RMat, tol: f64) -> Result<Self> {
        let n = anchor.nrows();
        Self::new(RMat::identity(n, n), anchor, tol)
    }

    /// Symplectic space whose form is `ω(u, v) = uᵀ Ω v`; the anchor is
    /// `-Ω⁻¹`, so that `leaf_form(u, v) = ω(u, v)`.
    pub fn from_symplectic_form(omega: &RMat, tol: f64) -> Result<Self> {
        let n = omega.nrows();
        let inv = omega.clone().try_inverse().ok_or(PglError::NotMember {
            what: "nondegenerate 2-forms".into(),
            residual: 0.0,
        })?;
        let anchor = -inv;
        // symmetrize away rounding so the skewness invariant is exact
        let anchor = (&anchor - anchor.transpose()) * 0.5;
        Self::new(RMat::identity(n, n), anchor, tol)
    }

    /// The standard symplectic space `R^{2m}` pairing `e_i ↔ e_{m+i}`.
    pub fn standard_symplectic(m: usize, tol: f64) -> Self {
        Self::with_full_dual(standard_j(m), tol).expect("standard anchor is skew")
    }

    pub fn to_json(&self) -> PoissonSpaceJson {
        PoissonSpaceJson {
            dim: self.dim,
            flat: MatrixJson::from_real(&self.flat),
            matrix: MatrixJson::from_real(&self.anchor),
            tol: self.tol,
        }
    }

    pub fn from_json(js: &PoissonSpaceJson) -> Result<Self> {
        let space = Self::new(js.flat.to_real()?, js.matrix.to_real()?, js.tol)?;
        if space.dim != js.dim {
            return Err(PglError::DimensionMismatch { expected: js.dim, found: space.dim });
        }
        Ok(space)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flat_dim(&self) -> usize {
        self.flat.nrows()
    }

    pub fn flat(&self) -> &RMat {
        &self.flat
    }

    pub fn anchor(&self) -> &RMat {
        &self.anchor
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `Ω_P` in `E♭`-coordinates: `(flat · anchor)[a][b] = ⟨ω_a, P ω_b⟩`.
    pub fn pairing_matrix(&self) -> RMat {
        &self.flat * &self.anchor
    }

    pub fn skewness_residual(&self) -> f64 {
        let s = self.pairing_matrix();
        relative(max_abs(&(&s + s.transpose())), max_abs(&s))
    }

    pub fn is_symplectic(&self) -> bool {
        self.flat_dim() == self.dim && rank(&self.anchor, 0.0) == self.dim
    }

    fn check(&self, f: &Subspace) -> Result<()> {
        if f.ambient_dim() != self.dim {
            return Err(PglError::DimensionMismatch { expected: self.dim, found: f.ambient_dim() });
        }
        Ok(())
    }

    fn check_flat(&self, a: &Subspace) -> Result<()> {
        if a.ambient_dim() != self.flat_dim() {
            return Err(PglError::DimensionMismatch { expected: self.flat_dim(), found: a.ambient_dim() });
        }
        Ok(())
    }

    /// Kernel of the anchor, in `E♭`-coordinates.
    pub fn anchor_kernel(&self) -> Subspace {
        Subspace::from_orthonormal(nullspace(&self.anchor, max_abs(&self.anchor)), self.tol)
    }
}

/// Standard `2m × 2m` skew matrix `[[0, I], [-I, 0]]`.
pub fn standard_j(m: usize) -> RMat {
    let mut j = RMat::zeros(2 * m, 2 * m);
    for i in 0..m {
        j[(i, m + i)] = 1.0;
        j[(m + i, i)] = -1.0;
    }
    j
}

/// `F⁰ = {α ∈ E♭ : ⟨α, u⟩ = 0 ∀u ∈ F}` in `E♭`-coordinates.
pub fn zero_space(s: &LinearPoissonSpace, f: &Subspace) -> Result<Subspace> {
    s.check(f)?;
    let m = (&s.flat * f.basis()).transpose();
    Ok(Subspace::from_orthonormal(nullspace(&m, max_abs(&s.flat)), s.tol))
}

/// `F^{⊥_P} = P(F⁰)`.
pub fn perp_p(s: &LinearPoissonSpace, f: &Subspace) -> Result<Subspace> {
    let z = zero_space(s, f)?;
    let image = &s.anchor * z.basis();
    Subspace::from_span_scaled(s.dim, &image, max_abs(&s.anchor), s.tol)
}

/// `A^{⊥_P} = {ω ∈ E♭ : ⟨ω, Pα⟩ = 0 ∀α ∈ A}` for `A ⊆ E♭`.
pub fn orth_flat(s: &LinearPoissonSpace, a: &Subspace) -> Result<Subspace> {
    s.check_flat(a)?;
    let pm = s.pairing_matrix();
    let m = (&pm * a.basis()).transpose();
    Ok(Subspace::from_orthonormal(nullspace(&m, max_abs(&pm)), s.tol))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification {
    pub coisotropic: bool,
    pub lagrangian: bool,
    /// Largest `|⟨ω₁, Pω₂⟩|` over an orthonormal basis of `F⁰`.
    pub coisotropic_residual: f64,
    /// Span distance between `P(F⁰)` and `F`.
    pub lagrangian_residual: f64,
}

pub fn classify_subspace(s: &LinearPoissonSpace, f: &Subspace) -> Result<Classification> {
    let z = zero_space(s, f)?;
    let pm = s.pairing_matrix();
    let form = z.basis().transpose() * &pm * z.basis();
    let coisotropic_residual = relative(max_abs(&form), max_abs(&pm));
    let image = Subspace::from_span_scaled(s.dim, &(&s.anchor * z.basis()), max_abs(&s.anchor), s.tol)?;
    let lagrangian_residual = image.distance(f);
    Ok(Classification {
        coisotropic: coisotropic_residual <= s.tol,
        lagrangian: lagrangian_residual <= s.tol,
        coisotropic_residual,
        lagrangian_residual,
    })
}

/// `E₁ × E₂` with anchor `(P₁, sign·P₂)` and `E♭ = E₁♭ × E₂♭`.
pub fn product_space(s1: &LinearPoissonSpace, s2: &LinearPoissonSpace, sign: Sign) -> LinearPoissonSpace {
    LinearPoissonSpace {
        dim: s1.dim + s2.dim,
        flat: block_diag(&s1.flat, &s2.flat),
        anchor: block_diag(&s1.anchor, &(&s2.anchor * sign.factor())),
        tol: s1.tol.max(s2.tol),
    }
}

/// Residual of `P₂ = φ P₁ φ*` (or `P₂ = -φ P₁ φ*` when `anti`), with `φ*`
/// written in the `E♭` coordinate systems. Fails with
/// [`PglError::FlatNotPreserved`] when `φ*(E₂♭) ⊄ E₁♭`.
pub fn is_poisson_morphism(
    s1: &LinearPoissonSpace,
    s2: &LinearPoissonSpace,
    phi: &RMat,
    anti: bool,
) -> Result<f64> {
    if phi.shape() != (s2.dim, s1.dim) {
        return Err(PglError::DimensionMismatch { expected: s2.dim * s1.dim, found: phi.len() });
    }
    let tol = s1.tol.max(s2.tol);
    let pulled = &s2.flat * phi;
    let b1_pinv = pinv(&s1.flat, 0.0);
    let coords = &pulled * &b1_pinv;
    let escape = &pulled - &coords * &s1.flat;
    let flat_residual = relative(max_abs(&escape), max_abs(&pulled));
    if flat_residual > tol {
        return Err(PglError::FlatNotPreserved { residual: flat_residual });
    }
    let pullback = coords.transpose();
    let pushed = phi * &s1.anchor * &pullback;
    let diff = if anti { &s2.anchor + &pushed } else { &s2.anchor - &pushed };
    let scale = max_abs(&s2.anchor).max(max_abs(phi) * max_abs(&s1.anchor) * max_abs(&pullback));
    Ok(relative(max_abs(&diff), scale))
}

/// A linear relation `E₁ ⇢ E₂`, stored as its graph in `E₁ × E₂`.
#[derive(Clone, Debug)]
pub struct LinearRelation {
    pub dim1: usize,
    pub dim2: usize,
    pub graph: Subspace,
}

impl LinearRelation {
    pub fn new(dim1: usize, dim2: usize, graph: Subspace) -> Result<Self> {
        if graph.ambient_dim() != dim1 + dim2 {
            return Err(PglError::DimensionMismatch { expected: dim1 + dim2, found: graph.ambient_dim() });
        }
        Ok(Self { dim1, dim2, graph })
    }

    /// Graph `{(u, φu)}` of a linear map `φ : R^{cols} → R^{rows}`.
    pub fn graph_of(phi: &RMat, tol: f64) -> Self {
        let (d2, d1) = phi.shape();
        let span = crate::linalg::vstack(&RMat::identity(d1, d1), phi);
        let graph = Subspace::from_span(d1 + d2, &span, tol).expect("shape is consistent");
        Self { dim1: d1, dim2: d2, graph }
    }

    pub fn identity(n: usize, tol: f64) -> Self {
        Self::graph_of(&RMat::identity(n, n), tol)
    }

    fn parts(&self) -> (RMat, RMat) {
        let b = self.graph.basis();
        (b.rows(0, self.dim1).into_owned(), b.rows(self.dim1, self.dim2).into_owned())
    }
}

/// `S ∘ R = {(x, z) : ∃y, (x, y) ∈ R, (y, z) ∈ S}`.
pub fn relation_compose(r: &LinearRelation, s: &LinearRelation) -> Result<LinearRelation> {
    if r.dim2 != s.dim1 {
        return Err(PglError::DimensionMismatch { expected: r.dim2, found: s.dim1 });
    }
    let (rx, ry) = r.parts();
    let (sy, sz) = s.parts();
    let a = rx.ncols();
    let null = nullspace(&hstack(&ry, &(-&sy)), 1.0);
    let x = &rx * null.rows(0, a);
    let z = &sz * null.rows(a, null.nrows() - a);
    let span = crate::linalg::vstack(&x, &z);
    let tol = r.graph.tol().max(s.graph.tol());
    let graph = Subspace::from_span_scaled(r.dim1 + s.dim2, &span, 1.0, tol)?;
    LinearRelation::new(r.dim1, s.dim2, graph)
}

#[derive(Clone, Debug)]
pub struct ImageCertificate {
    pub image: Subspace,
    pub classification: Classification,
}

/// `R(C) = {y : (x, y) ∈ R, x ∈ C}` for a Poisson relation `R` and a
/// coisotropic `C`; the image is classified in the target space.
pub fn relation_apply(
    s1: &LinearPoissonSpace,
    s2: &LinearPoissonSpace,
    r: &LinearRelation,
    c: &Subspace,
) -> Result<ImageCertificate> {
    if r.dim1 != s1.dim() || r.dim2 != s2.dim() {
        return Err(PglError::DimensionMismatch { expected: s1.dim() + s2.dim(), found: r.dim1 + r.dim2 });
    }
    let cc = classify_subspace(s1, c)?;
    if !cc.coisotropic {
        return Err(PglError::NotCoisotropic { what: "input subspace", residual: cc.coisotropic_residual });
    }
    let prod = product_space(s1, s2, Sign::Minus);
    let rc = classify_subspace(&prod, &r.graph)?;
    if !rc.coisotropic {
        return Err(PglError::NotCoisotropic { what: "relation", residual: rc.coisotropic_residual });
    }
    let (rx, ry) = r.parts();
    let a = rx.ncols();
    let null = nullspace(&hstack(&rx, &(-c.basis())), 1.0);
    let y = &ry * null.rows(0, a);
    let image = Subspace::from_span_scaled(s2.dim(), &y, 1.0, s2.tol())?;
    let classification = classify_subspace(s2, &image)?;
    Ok(ImageCertificate { image, classification })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafValue {
    pub value: f64,
    /// Preimage residual `|Pα - u|` (relative), worst of the two inputs.
    pub preimage_residual: f64,
    /// Change of the value when both preimages are shifted by kernel elements.
    pub well_defined_residual: f64,
}

/// `ω_N(u, v) = ⟨α, Pβ⟩` with `Pα = u`, `Pβ = v` solved by minimum-norm
/// least squares.
pub fn leaf_form(s: &LinearPoissonSpace, u: &RVec, v: &RVec) -> Result<LeafValue> {
    if u.len() != s.dim || v.len() != s.dim {
        return Err(PglError::DimensionMismatch { expected: s.dim, found: u.len().min(v.len()) });
    }
    let p_pinv = pinv(&s.anchor, max_abs(&s.anchor));
    let alpha = &p_pinv * u;
    let beta = &p_pinv * v;
    let scale = max_abs(&s.anchor);
    let res_a = relative((&s.anchor * &alpha - u).norm(), u.norm());
    let res_b = relative((&s.anchor * &beta - v).norm(), v.norm());
    let preimage_residual = res_a.max(res_b);
    if preimage_residual > s.tol {
        return Err(PglError::NotInImage { residual: preimage_residual });
    }
    let pm = s.pairing_matrix();
    let value = (alpha.transpose() * &pm * &beta)[(0, 0)];
    let kernel = s.anchor_kernel();
    let shift = kernel.basis() * RVec::from_element(kernel.dim(), 1.0);
    let alpha2 = &alpha + &shift;
    let beta2 = &beta - &shift * 0.5;
    let value2 = (alpha2.transpose() * &pm * &beta2)[(0, 0)];
    let mag = scale * alpha2.norm() * beta2.norm();
    Ok(LeafValue { value, preimage_residual, well_defined_residual: relative((value - value2).abs(), mag) })
}

/// Random instances for tests and suites.
pub mod sample {
    use super::*;
    use crate::rng::TrialRng;

    /// Symplectic anchor `A J Aᵀ` with `A` orthogonal times a diagonal in
    /// `[0.5, 2]`.
    pub fn symplectic_space(rng: &mut TrialRng, dim: usize, tol: f64) -> LinearPoissonSpace {
        assert!(dim.is_multiple_of(2), "symplectic dimension must be even");
        poisson_space(rng, dim, dim, tol)
    }

    /// Full-dual Poisson space of the given (even) anchor rank.
    pub fn poisson_space(rng: &mut TrialRng, dim: usize, anchor_rank: usize, tol: f64) -> LinearPoissonSpace {
        let q = rng.orthogonal(dim);
        let d = RMat::from_fn(dim, dim, |i, j| if i == j { rng.uniform(0.5, 2.0) } else { 0.0 });
        let a = q * d;
        let mut j = RMat::zeros(dim, dim);
        j.view_mut((0, 0), (anchor_rank, anchor_rank)).copy_from(&standard_j(anchor_rank / 2));
        let p = &a * j * a.transpose();
        let p = (&p - p.transpose()) * 0.5;
        LinearPoissonSpace::with_full_dual(p, tol).expect("constructed skew")
    }

    /// Symplectic form matrix `Ω` with `ω(u, v) = uᵀΩv` for a symplectic space.
    pub fn form_matrix(s: &LinearPoissonSpace) -> RMat {
        // leaf_form(u, v) = ⟨P⁻¹u, v⟩, so Ω = P^{-T}
        s.anchor().clone().try_inverse().expect("symplectic").transpose()
    }

    /// Random isotropic subspace of dimension `k` of a symplectic space.
    pub fn isotropic(rng: &mut TrialRng, s: &LinearPoissonSpace, k: usize) -> Subspace {
        let n = s.dim();
        let omega = form_matrix(s);
        let mut basis = RMat::zeros(n, 0);
        for _ in 0..k {
            let constraints = (&omega.transpose() * &basis).transpose();
            let candidates = nullspace(&constraints, max_abs(&omega));
            let mut w = &candidates * rng.gaussian_vec(candidates.ncols());
            // remove the part already spanned
            w -= &basis * (basis.transpose() * &w);
            let w = w.normalize();
            basis = hstack(&basis, &RMat::from_column_slice(n, 1, w.as_slice()));
        }
        Subspace::from_span(n, &basis, s.tol()).expect("shape")
    }

    pub fn lagrangian(rng: &mut TrialRng, s: &LinearPoissonSpace) -> Subspace {
        isotropic(rng, s, s.dim() / 2)
    }

    /// `P`-orthogonal of a random isotropic subspace of random dimension.
    pub fn coisotropic(rng: &mut TrialRng, s: &LinearPoissonSpace) -> Subspace {
        let k = rng.index(s.dim() / 2 + 1);
        let iso = isotropic(rng, s, k);
        perp_p(s, &iso).expect("shape")
    }

    /// Random Poisson relation `E₁ ⇢ E₂` (coisotropic in `E₁ × E₂⁻`);
    /// Lagrangian when `lagrangian` is set.
    pub fn poisson_relation(
        rng: &mut TrialRng,
        s1: &LinearPoissonSpace,
        s2: &LinearPoissonSpace,
        lagrangian: bool,
    ) -> LinearRelation {
        let prod = product_space(s1, s2, Sign::Minus);
        let graph = if lagrangian { super::sample::lagrangian(rng, &prod) } else { coisotropic(rng, &prod) };
        LinearRelation::new(s1.dim(), s2.dim(), graph).expect("shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::TrialRng;

    const TOL: f64 = 1e-9;

    fn e(n: usize, i: usize) -> RVec {
        let mut v = RVec::zeros(n);
        v[i] = 1.0;
        v
    }

    fn span(n: usize, idx: &[usize]) -> Subspace {
        let m = RMat::from_fn(n, idx.len(), |r, c| if r == idx[c] { 1.0 } else { 0.0 });
        Subspace::from_span(n, &m, TOL).unwrap()
    }

    #[test]
    fn annihilator_examples() {
        assert_eq!(annihilator(&Subspace::full(3, TOL)).dim(), 0);
        assert_eq!(annihilator(&Subspace::zero(3, TOL)).dim(), 3);
        let a = annihilator(&span(3, &[0, 1]));
        assert_eq!(a.dim(), 1);
        assert!(a.contains(&e(3, 2)));
    }

    #[test]
    fn annihilator_dimension_count() {
        let mut rng = TrialRng::new(11);
        for k in 0..=5 {
            let f = Subspace::from_span(5, &rng.gaussian(5, k), TOL).unwrap();
            let a = annihilator(&f);
            assert_eq!(f.dim() + a.dim(), 5);
            assert!(max_abs(&(a.basis().transpose() * f.basis())) < 1e-12);
        }
    }

    #[test]
    fn zero_space_examples() {
        let s = LinearPoissonSpace::standard_symplectic(2, TOL);
        assert_eq!(zero_space(&s, &Subspace::full(4, TOL)).unwrap().dim(), 0);
        let f = span(4, &[0, 2]);
        assert!(zero_space(&s, &f).unwrap().same_as(&annihilator(&f)));

        // E = R^4, E♭ = span{e1*, e2*}, F = span{e1, e3} -> span{e2*}
        let flat = RMat::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let anchor = RMat::zeros(4, 2);
        let s = LinearPoissonSpace::new(flat, anchor, TOL).unwrap();
        let z = zero_space(&s, &span(4, &[0, 2])).unwrap();
        assert_eq!(z.dim(), 1);
        assert!(z.contains(&e(2, 1)));
    }

    #[test]
    fn perp_examples() {
        let s = LinearPoissonSpace::standard_symplectic(1, TOL);
        assert_eq!(perp_p(&s, &Subspace::full(2, TOL)).unwrap().dim(), 0);
        let line = span(2, &[0]);
        assert!(perp_p(&s, &line).unwrap().same_as(&line));
    }

    #[test]
    fn double_perp_random_symplectic() {
        let mut rng = TrialRng::new(5);
        for _ in 0..20 {
            let s = sample::symplectic_space(&mut rng, 4, TOL);
            let f = Subspace::from_span(4, &rng.gaussian(4, 2), TOL).unwrap();
            let back = perp_p(&s, &perp_p(&s, &f).unwrap()).unwrap();
            assert!(back.distance(&f) < 1e-10);
        }
    }

    #[test]
    fn orth_flat_examples() {
        let s = LinearPoissonSpace::standard_symplectic(2, TOL);
        assert_eq!(orth_flat(&s, &Subspace::zero(4, TOL)).unwrap().dim(), 4);
        let zero = LinearPoissonSpace::with_full_dual(RMat::zeros(3, 3), TOL).unwrap();
        assert_eq!(orth_flat(&zero, &span(3, &[0, 1])).unwrap().dim(), 3);

        let mut rng = TrialRng::new(9);
        let s = sample::poisson_space(&mut rng, 4, 2, TOL);
        let kernel = s.anchor_kernel();
        assert_eq!(kernel.dim(), 2);
        let a = Subspace::from_span(4, &rng.gaussian(4, 2), TOL).unwrap();
        let o = orth_flat(&s, &a).unwrap();
        assert!(kernel.inclusion_residual(&o) < 1e-10);
    }

    #[test]
    fn classification_examples() {
        let s = LinearPoissonSpace::standard_symplectic(2, TOL);
        assert!(classify_subspace(&s, &Subspace::full(4, TOL)).unwrap().coisotropic);
        let s2 = LinearPoissonSpace::standard_symplectic(1, TOL);
        let c = classify_subspace(&s2, &span(2, &[0])).unwrap();
        assert!(c.coisotropic && c.lagrangian);
        // e1<->e3, e2<->e4: span{e1,e2} is Lagrangian
        let c = classify_subspace(&s, &span(4, &[0, 1])).unwrap();
        assert!(c.lagrangian && c.coisotropic);
        // span{e1,e3} is symplectic, not coisotropic
        let c = classify_subspace(&s, &span(4, &[0, 2])).unwrap();
        assert!(!c.coisotropic && !c.lagrangian);
    }

    #[test]
    fn nested_coisotropy_is_monotone() {
        let mut rng = TrialRng::new(13);
        for _ in 0..20 {
            let s = sample::symplectic_space(&mut rng, 6, TOL);
            let f1 = sample::coisotropic(&mut rng, &s);
            let extra = rng.gaussian(6, 1);
            let f2 = Subspace::from_span(6, &hstack(f1.basis(), &extra), TOL).unwrap();
            let c1 = classify_subspace(&s, &f1).unwrap();
            assert!(c1.coisotropic, "{:?} dim {}", c1, f1.dim());
            assert!(classify_subspace(&s, &f2).unwrap().coisotropic);
        }
    }

    #[test]
    fn product_space_properties() {
        let s1 = LinearPoissonSpace::standard_symplectic(1, TOL);
        let trivial = LinearPoissonSpace::with_full_dual(RMat::zeros(0, 0), TOL).unwrap();
        let p = product_space(&s1, &trivial, Sign::Plus);
        assert_eq!(p.anchor(), s1.anchor());
        let s2 = LinearPoissonSpace::standard_symplectic(2, TOL);
        let p = product_space(&s1, &s2, Sign::Minus);
        assert!(p.is_symplectic());
        assert!(p.skewness_residual() <= 1e-15);
    }

    #[test]
    fn morphism_examples() {
        let mut rng = TrialRng::new(3);
        let s = sample::poisson_space(&mut rng, 4, 4, TOL);
        let id = RMat::identity(4, 4);
        assert!(is_poisson_morphism(&s, &s, &id, false).unwrap() < 1e-15);
        let flipped = LinearPoissonSpace::with_full_dual(-s.anchor(), TOL).unwrap();
        assert!(is_poisson_morphism(&s, &flipped, &id, true).unwrap() < 1e-15);
        assert!(is_poisson_morphism(&s, &flipped, &id, false).unwrap() > 0.1);
    }

    #[test]
    fn morphism_rejects_flat_escape() {
        let flat = RMat::from_row_slice(1, 2, &[1.0, 0.0]);
        let s1 = LinearPoissonSpace::new(flat, RMat::zeros(2, 1), TOL).unwrap();
        let s2 = LinearPoissonSpace::with_full_dual(RMat::zeros(2, 2), TOL).unwrap();
        let err = is_poisson_morphism(&s1, &s2, &RMat::identity(2, 2), false).unwrap_err();
        assert!(matches!(err, PglError::FlatNotPreserved { .. }));
    }

    #[test]
    fn symplectic_map_graph_is_lagrangian() {
        let mut rng = TrialRng::new(21);
        let s1 = sample::symplectic_space(&mut rng, 4, TOL);
        let phi = rng.gaussian(4, 4) + RMat::identity(4, 4) * 3.0;
        let pushed = &phi * s1.anchor() * phi.transpose();
        let s2 = LinearPoissonSpace::with_full_dual((&pushed - pushed.transpose()) * 0.5, TOL).unwrap();
        assert!(is_poisson_morphism(&s1, &s2, &phi, false).unwrap() < 1e-12);
        let prod = product_space(&s1, &s2, Sign::Minus);
        let c = classify_subspace(&prod, &LinearRelation::graph_of(&phi, TOL).graph).unwrap();
        assert!(c.lagrangian && c.coisotropic);
    }

    #[test]
    fn compose_graphs_is_graph_of_composition() {
        let mut rng = TrialRng::new(4);
        let phi = rng.gaussian(3, 2);
        let psi = rng.gaussian(4, 3);
        let composed = relation_compose(&LinearRelation::graph_of(&phi, TOL), &LinearRelation::graph_of(&psi, TOL)).unwrap();
        let expected = LinearRelation::graph_of(&(&psi * &phi), TOL);
        assert!(composed.graph.distance(&expected.graph) < 1e-10);

        let id = LinearRelation::identity(3, TOL);
        let r = LinearRelation::graph_of(&phi, TOL);
        assert!(relation_compose(&r, &id).unwrap().graph.distance(&r.graph) < 1e-12);
        assert!(relation_compose(&id, &r).is_err());
    }

    #[test]
    fn apply_identity_and_morphism() {
        let mut rng = TrialRng::new(8);
        let s = sample::symplectic_space(&mut rng, 4, TOL);
        let c = sample::coisotropic(&mut rng, &s);
        let img = relation_apply(&s, &s, &LinearRelation::identity(4, TOL), &c).unwrap();
        assert!(img.image.distance(&c) < 1e-10);

        // zero Poisson space, C = {0}; R = graph of a Poisson map into it
        let z1 = LinearPoissonSpace::with_full_dual(RMat::zeros(2, 2), TOL).unwrap();
        let z2 = LinearPoissonSpace::with_full_dual(RMat::zeros(3, 3), TOL).unwrap();
        let phi = rng.gaussian(3, 2);
        let r = LinearRelation::graph_of(&phi, TOL);
        let img = relation_apply(&z1, &z2, &r, &Subspace::zero(2, TOL)).unwrap();
        assert_eq!(img.image.dim(), 0);
        let full = relation_apply(&z1, &z2, &r, &Subspace::full(2, TOL)).unwrap();
        let expected = Subspace::from_span(3, &phi, TOL).unwrap();
        assert!(full.image.distance(&expected) < 1e-10);
    }

    #[test]
    fn apply_refuses_non_coisotropic_input() {
        let s = LinearPoissonSpace::standard_symplectic(2, TOL);
        let err = relation_apply(&s, &s, &LinearRelation::identity(4, TOL), &span(4, &[0, 2])).unwrap_err();
        assert!(matches!(err, PglError::NotCoisotropic { .. }));
    }

    #[test]
    fn lagrangian_through_symplectic_relation() {
        let mut rng = TrialRng::new(10);
        for _ in 0..10 {
            let s1 = sample::symplectic_space(&mut rng, 4, TOL);
            let s2 = sample::symplectic_space(&mut rng, 4, TOL);
            let r = sample::poisson_relation(&mut rng, &s1, &s2, true);
            let c = sample::lagrangian(&mut rng, &s1);
            let img = relation_apply(&s1, &s2, &r, &c).unwrap();
            assert!(img.classification.lagrangian, "{:?}", img.classification);
        }
    }

    #[test]
    fn leaf_form_examples() {
        let mut rng = TrialRng::new(12);
        let s = sample::symplectic_space(&mut rng, 4, TOL);
        let u = rng.gaussian_vec(4);
        let v = rng.gaussian_vec(4);
        assert!(leaf_form(&s, &u, &u).unwrap().value.abs() < 1e-12);
        let direct = (s.anchor().clone().try_inverse().unwrap() * &u).dot(&v);
        assert!((leaf_form(&s, &u, &v).unwrap().value - direct).abs() < 1e-10);

        let s = sample::poisson_space(&mut rng, 4, 2, TOL);
        let u = s.anchor() * rng.gaussian_vec(4);
        let v = s.anchor() * rng.gaussian_vec(4);
        let lv = leaf_form(&s, &u, &v).unwrap();
        assert!(lv.well_defined_residual < 1e-12);
        // independent preimages give the same value
        let k = s.anchor_kernel();
        let a2 = s.anchor().clone().svd(true, true).solve(&u, 1e-12).unwrap() + k.basis() * rng.gaussian_vec(k.dim());
        let b2 = s.anchor().clone().svd(true, true).solve(&v, 1e-12).unwrap() + k.basis() * rng.gaussian_vec(k.dim());
        let other = (a2.transpose() * s.pairing_matrix() * b2)[(0, 0)];
        assert!((other - lv.value).abs() < 1e-10);

        let outside = rng.gaussian_vec(4);
        assert!(matches!(leaf_form(&s, &outside, &v), Err(PglError::NotInImage { .. })));
    }

    #[test]
    fn constructor_rejects_symmetric_anchor() {
        let err = LinearPoissonSpace::with_full_dual(RMat::identity(2, 2), TOL).unwrap_err();
        assert!(matches!(err, PglError::NotSkew { .. }));
    }

    #[test]
    fn subspace_json_roundtrip() {
        let f = span(3, &[1]);
        let js = serde_json::to_string(&f.to_json()).unwrap();
        let back = Subspace::from_json(&serde_json::from_str(&js).unwrap()).unwrap();
        assert!(back.same_as(&f));
    }
}
