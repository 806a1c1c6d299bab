//! Pointwise Poisson calculus on `R^d`.
//!
//! A [`BivectorField`] stores its anchor `P(x) : T♭ → T` as jets together
//! with a constant flat basis `B` (rows). Internally the anchor is extended
//! to all covectors by `P̃ = P (BBᵀ)⁻¹ B`, which agrees with `P` on `T♭`.
//! Conventions:
//!
//! * `Λ(α, β) = ⟨β, Pα⟩`, so in flat coordinates `Λ_ab = (BP)_ba`;
//! * `{f, g} = ⟨dg, P df⟩ = Λ(df, dg)` and `X_f = P df`;
//! * `[α, β]_P = L_{Pα}β - L_{Pβ}α - dΛ(α, β)`, which gives
//!   `[df, dg]_P = d{f, g}`.
//!
//! All formulas are written once over a generic [`Scalar`] and run either
//! on values (`f64`) or on first-order jets (`Jet1`) when a derivative of
//! the result is needed.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{PglError, Result};
use crate::jet::{locals, FromJet2, Jet1, Jet2, Local, Scalar};
use crate::lie_algebra::StructureConstants;
use crate::linalg::{max_abs, rank, relative, RMat, RVec};
use crate::rng::TrialRng;

type ScalarFn = Arc<dyn Fn(&[Jet2]) -> Jet2 + Send + Sync>;
type ComponentFn = Arc<dyn Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync>;

/// A scalar field given as a jet-valued expression in the coordinates.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    f: ScalarFn,
}

impl ScalarField {
    pub fn new(dim: usize, f: impl Fn(&[Jet2]) -> Jet2 + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f) }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, move |x| Jet2::constant(x.len(), c))
    }

    pub fn coordinate(dim: usize, i: usize) -> Self {
        Self::new(dim, move |x| x[i].clone())
    }

    /// `Σ_i a_i x_i`.
    pub fn linear(a: Vec<f64>) -> Self {
        Self::new(a.len(), move |x| {
            let mut acc = Jet2::constant(x.len(), 0.0);
            for (xi, ai) in x.iter().zip(&a) {
                acc = acc + xi * *ai;
            }
            acc
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Jet2 {
        (self.f)(&Jet2::variables(x))
    }

    /// Composition with jet inputs; used for pullbacks.
    pub fn eval_jets(&self, x: &[Jet2]) -> Jet2 {
        (self.f)(x)
    }

    pub fn product(&self, other: &ScalarField) -> ScalarField {
        let (f, g) = (self.f.clone(), other.f.clone());
        ScalarField { dim: self.dim, f: Arc::new(move |x| f(x) * g(x)) }
    }
}

/// Component fields: vector fields and one-forms.
#[derive(Clone)]
pub struct ComponentField {
    dim: usize,
    f: ComponentFn,
}

impl ComponentField {
    pub fn new(dim: usize, f: impl Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f) }
    }

    pub fn constant(v: Vec<f64>) -> Self {
        Self::new(v.len(), move |x| v.iter().map(|&c| Jet2::constant(x.len(), c)).collect())
    }

    /// `x ↦ A x + b`.
    pub fn affine(a: RMat, b: RVec) -> Self {
        let dim = a.ncols();
        Self::new(dim, move |x| {
            (0..a.nrows())
                .map(|i| {
                    let mut acc = Jet2::constant(x.len(), b[i]);
                    for j in 0..a.ncols() {
                        acc = acc + &x[j] * a[(i, j)];
                    }
                    acc
                })
                .collect()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Vec<Jet2> {
        (self.f)(&Jet2::variables(x))
    }
}

pub type VectorField = ComponentField;

/// A one-form, either by components or as the differential of a function.
/// Exact forms only carry first derivatives of their coefficients.
#[derive(Clone)]
pub enum OneFormField {
    Components(ComponentField),
    Exact(ScalarField),
}

impl OneFormField {
    pub fn constant(v: Vec<f64>) -> Self {
        OneFormField::Components(ComponentField::constant(v))
    }

    fn local0(&self, x: &[f64]) -> Vec<Local<f64>> {
        match self {
            OneFormField::Components(c) => locals(&c.eval(x)),
            OneFormField::Exact(f) => {
                let j = f.eval(x);
                let d = x.len();
                (0..d).map(|i| Local { val: j.grad[i], d: j.hess[i * d..(i + 1) * d].to_vec() }).collect()
            }
        }
    }

    fn local1(&self, x: &[f64]) -> Result<Vec<Local<Jet1>>> {
        match self {
            OneFormField::Components(c) => Ok(locals(&c.eval(x))),
            OneFormField::Exact(_) => Err(PglError::InvalidConfig(
                "this evaluation needs second derivatives of the form; pass components".into(),
            )),
        }
    }
}

/// Poisson anchor field with a constant flat subbundle.
#[derive(Clone)]
pub struct BivectorField {
    dim: usize,
    flat: RMat,
    /// `(BBᵀ)⁻¹ B`: flat coordinates of a covector in the row space.
    to_flat: RMat,
    /// Row-major `dim × k` anchor jets.
    anchor: ComponentFn,
}

impl BivectorField {
    pub fn new(
        flat: RMat,
        anchor: impl Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync + 'static,
    ) -> Result<Self> {
        let (k, dim) = flat.shape();
        let r = rank(&flat, 0.0);
        if r < k {
            return Err(PglError::DependentFlatBasis { rank: r, rows: k });
        }
        let gram = (&flat * flat.transpose()).try_inverse().ok_or(PglError::DependentFlatBasis { rank: r, rows: k })?;
        Ok(Self { dim, to_flat: gram * &flat, flat, anchor: Arc::new(anchor) })
    }

    /// Full cotangent bundle; `lambda` returns `Λ_ij` row-major and the
    /// anchor is its transpose.
    pub fn from_lambda(dim: usize, lambda: impl Fn(&[Jet2]) -> Vec<Jet2> + Send + Sync + 'static) -> Self {
        Self::new(RMat::identity(dim, dim), move |x| {
            let l = lambda(x);
            let mut p = l.clone();
            for i in 0..dim {
                for j in 0..dim {
                    p[i * dim + j] = l[j * dim + i].clone();
                }
            }
            p
        })
        .expect("identity flat basis")
    }

    /// Constant anchor on the full cotangent bundle.
    pub fn constant(anchor: RMat) -> Self {
        let d = anchor.nrows();
        Self::new(RMat::identity(d, d), move |x| {
            let mut out = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    out.push(Jet2::constant(x.len(), anchor[(i, j)]));
                }
            }
            out
        })
        .expect("identity flat basis")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flat(&self) -> &RMat {
        &self.flat
    }

    fn anchor_jets(&self, x: &[f64]) -> Vec<Jet2> {
        let p = (self.anchor)(&Jet2::variables(x));
        assert_eq!(p.len(), self.dim * self.flat.nrows(), "anchor has wrong shape");
        p
    }

    /// Jets of the extended anchor `P̃` (`dim × dim`, row-major).
    fn extended(&self, x: &[f64]) -> Vec<Jet2> {
        let d = self.dim;
        let k = self.flat.nrows();
        let p = self.anchor_jets(x);
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = Jet2::constant(d, 0.0);
                for a in 0..k {
                    let m = self.to_flat[(a, j)];
                    if m != 0.0 {
                        acc = acc + &p[i * k + a] * m;
                    }
                }
                out.push(acc);
            }
        }
        out
    }

    /// `Λ(x)` in flat coordinates and its partial derivatives `∂_l Λ(x)`.
    pub fn lambda_at(&self, x: &[f64]) -> (RMat, Vec<RMat>) {
        let k = self.flat.nrows();
        let p = self.anchor_jets(x);
        let entry = |a: usize, b: usize, l: Option<usize>| -> f64 {
            (0..self.dim)
                .map(|i| {
                    let j = &p[i * k + a];
                    self.flat[(b, i)] * l.map_or(j.val, |l| j.grad[l])
                })
                .sum()
        };
        let lam = RMat::from_fn(k, k, |a, b| entry(a, b, None));
        let dlam = (0..self.dim).map(|l| RMat::from_fn(k, k, |a, b| entry(a, b, Some(l)))).collect();
        (lam, dlam)
    }

    pub fn skewness_residual(&self, x: &[f64]) -> f64 {
        let (lam, _) = self.lambda_at(x);
        relative(max_abs(&(&lam + lam.transpose())), max_abs(&lam))
    }

    /// Largest gap between `∂Λ` and central differences with step `h`.
    pub fn derivative_audit(&self, x: &[f64], h: f64) -> f64 {
        let (_, dlam) = self.lambda_at(x);
        let mut worst: f64 = 0.0;
        for (l, dl) in dlam.iter().enumerate() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[l] += h;
            xm[l] -= h;
            let fd = (self.lambda_at(&xp).0 - self.lambda_at(&xm).0) / (2.0 * h);
            worst = worst.max(relative(max_abs(&(fd - dl)), max_abs(dl)));
        }
        worst
    }

    fn flat_residual(&self, covector: &[f64]) -> f64 {
        let v = RVec::from_column_slice(covector);
        let back = self.flat.transpose() * (&self.to_flat * &v);
        relative((v - back).amax(), covector.iter().fold(0.0, |m, c| m.max(c.abs())))
    }

    fn check_flat<T: Scalar>(&self, tol: f64, forms: &[&[Local<T>]]) -> Result<()> {
        for form in forms {
            let vals: Vec<f64> = form.iter().map(|c| c.val.value()).collect();
            let residual = self.flat_residual(&vals);
            if residual > tol {
                return Err(PglError::NotFlatValued { residual });
            }
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(PglError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// generic first-order calculus

/// `(P̃ a)^i = Σ_j P̃_ij a_j` as locals.
fn apply<T: Scalar>(p: &[Local<T>], a: &[Local<T>]) -> Vec<Local<T>> {
    let d = a.len();
    (0..d)
        .map(|i| {
            let mut acc = p[i * d].times(&a[0]);
            for j in 1..d {
                acc = acc.plus(&p[i * d + j].times(&a[j]));
            }
            acc
        })
        .collect()
}

fn pair<T: Scalar>(a: &[Local<T>], v: &[Local<T>]) -> Local<T> {
    let mut acc = a[0].times(&v[0]);
    for i in 1..a.len() {
        acc = acc.plus(&a[i].times(&v[i]));
    }
    acc
}

fn sum<T: Scalar>(zero: &T, it: impl Iterator<Item = T>) -> T {
    it.fold(zero.clone(), |acc, x| acc.plus(&x))
}

/// `V(f) = Σ_j V^j ∂_j f`.
fn directional<T: Scalar>(v: &[Local<T>], f: &Local<T>) -> T {
    let z = f.val.zero_like();
    sum(&z, v.iter().zip(&f.d).map(|(vj, dj)| vj.val.times(dj)))
}

/// `(L_V β)_i = V^j ∂_j β_i + β_j ∂_i V^j`.
fn lie_form<T: Scalar>(v: &[Local<T>], beta: &[Local<T>]) -> Vec<T> {
    let d = v.len();
    (0..d)
        .map(|i| {
            let z = beta[i].val.zero_like();
            let a = directional(v, &beta[i]);
            let b = sum(&z, (0..d).map(|j| beta[j].val.times(&v[j].d[i])));
            a.plus(&b)
        })
        .collect()
}

/// `[V, W]^i = V^j ∂_j W^i - W^j ∂_j V^i`.
fn lie_vector<T: Scalar>(v: &[Local<T>], w: &[Local<T>]) -> Vec<T> {
    (0..v.len()).map(|i| directional(v, &w[i]).minus(&directional(w, &v[i]))).collect()
}

fn koszul_g<T: Scalar>(p: &[Local<T>], a: &[Local<T>], b: &[Local<T>]) -> Vec<T> {
    let va = apply(p, a);
    let vb = apply(p, b);
    let lam = pair(b, &va);
    let la = lie_form(&va, b);
    let lb = lie_form(&vb, a);
    (0..a.len()).map(|i| la[i].minus(&lb[i]).minus(&lam.d[i])).collect()
}

/// `[P, P](σ1, σ2) = P̃[σ1, σ2]_P - [P̃σ1, P̃σ2]`.
fn pp_g<T: Scalar>(p: &[Local<T>], s1: &[Local<T>], s2: &[Local<T>]) -> Vec<T> {
    let d = s1.len();
    let k = koszul_g(p, s1, s2);
    let br = lie_vector(&apply(p, s1), &apply(p, s2));
    (0..d)
        .map(|i| {
            let z = k[0].zero_like();
            sum(&z, (0..d).map(|j| p[i * d + j].val.times(&k[j]))).minus(&br[i])
        })
        .collect()
}

fn schouten_g<T: Scalar>(p: &[Local<T>], s: [&[Local<T>]; 3]) -> T {
    let pp = pp_g(p, s[1], s[0]);
    let z = pp[0].zero_like();
    sum(&z, s[2].iter().zip(&pp).map(|(c, v)| c.val.times(v)))
}

/// `d_P X(α, β) = Pα⟨β, X⟩ - Pβ⟨α, X⟩ - ⟨[α, β]_P, X⟩`.
fn dp_g<T: Scalar>(p: &[Local<T>], x: &[Local<T>], a: &[Local<T>], b: &[Local<T>]) -> T {
    let t1 = directional(&apply(p, a), &pair(b, x));
    let t2 = directional(&apply(p, b), &pair(a, x));
    let k = koszul_g(p, a, b);
    let z = t1.zero_like();
    let t3 = sum(&z, k.iter().zip(x).map(|(ki, xi)| ki.times(&xi.val)));
    t1.minus(&t2).minus(&t3)
}

/// `{f, g} = ⟨dg, P̃ df⟩` from locals of `f`, `g`.
fn bracket_g<T: Scalar>(p: &[Local<T>], f: &Local<T>, g: &Local<T>) -> T {
    let d = f.d.len();
    let z = f.val.zero_like();
    sum(
        &z,
        (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| g.d[i].times(&p[i * d + j].val).times(&f.d[j])),
    )
}

fn frozen_form(v: &[f64]) -> Vec<Local<f64>> {
    v.iter().map(|&c| Local::frozen(c, v.len())).collect()
}

// ---------------------------------------------------------------------------
// public operations

fn exact0(f: &ScalarField, x: &[f64]) -> (Local<f64>, Vec<Local<f64>>) {
    let j = f.eval(x);
    let d = x.len();
    let df = (0..d).map(|i| Local { val: j.grad[i], d: j.hess[i * d..(i + 1) * d].to_vec() }).collect();
    (f64::local(&j), df)
}

/// `{f, g}(x) = ⟨dg, P df⟩`.
pub fn bracket(w: &BivectorField, f: &ScalarField, g: &ScalarField, x: &[f64], tol: f64) -> Result<f64> {
    w.check_point(x)?;
    let p = locals::<f64>(&w.extended(x));
    let (lf, df) = exact0(f, x);
    let (lg, dg) = exact0(g, x);
    w.check_flat(tol, &[&df, &dg])?;
    Ok(bracket_g(&p, &lf, &lg))
}

/// `X_f(x) = P df`.
pub fn hamiltonian_field(w: &BivectorField, f: &ScalarField, x: &[f64], tol: f64) -> Result<RVec> {
    w.check_point(x)?;
    let p = locals::<f64>(&w.extended(x));
    let (_, df) = exact0(f, x);
    w.check_flat(tol, &[&df])?;
    Ok(RVec::from_iterator(x.len(), apply(&p, &df).into_iter().map(|c| c.val)))
}

/// Residual of `P d{f, g} = [X_f, X_g]` (relative).
pub fn hamiltonian_homomorphism_residual(
    w: &BivectorField,
    f: &ScalarField,
    g: &ScalarField,
    x: &[f64],
    tol: f64,
) -> Result<f64> {
    w.check_point(x)?;
    let jets = w.extended(x);
    let p0 = locals::<f64>(&jets);
    let p1 = locals::<Jet1>(&jets);
    let (jf, jg) = (f.eval(x), g.eval(x));
    let (_, df) = exact0(f, x);
    let (_, dg) = exact0(g, x);
    w.check_flat(tol, &[&df, &dg])?;
    let fg = bracket_g(&p1, &Jet1::local(&jf), &Jet1::local(&jg));
    let d = x.len();
    let lhs: Vec<f64> = (0..d).map(|i| (0..d).map(|j| p0[i * d + j].val * fg.grad[j]).sum()).collect();
    let rhs = lie_vector(&apply(&p0, &df), &apply(&p0, &dg));
    let diff = lhs.iter().zip(&rhs).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    let scale = lhs.iter().chain(&rhs).fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(relative(diff, scale))
}

/// `[α, β]_P(x)`.
pub fn koszul_bracket(w: &BivectorField, a: &OneFormField, b: &OneFormField, x: &[f64], tol: f64) -> Result<RVec> {
    w.check_point(x)?;
    let p = locals::<f64>(&w.extended(x));
    let (la, lb) = (a.local0(x), b.local0(x));
    w.check_flat(tol, &[&la, &lb])?;
    Ok(RVec::from_vec(koszul_g(&p, &la, &lb)))
}

/// `[Λ, Λ](σ1, σ2, σ3)(x) = ⟨σ3, [P, P](σ2, σ1)⟩`.
pub fn schouten_residual(w: &BivectorField, s: [&OneFormField; 3], x: &[f64], tol: f64) -> Result<f64> {
    w.check_point(x)?;
    let p = locals::<f64>(&w.extended(x));
    let l: Vec<Vec<Local<f64>>> = s.iter().map(|f| f.local0(x)).collect();
    w.check_flat(tol, &[&l[0], &l[1], &l[2]])?;
    Ok(schouten_g(&p, [&l[0], &l[1], &l[2]]))
}

/// `{f, {g, h}} + {g, {h, f}} + {h, {f, g}}` at `x`.
pub fn jacobiator(w: &BivectorField, f: &ScalarField, g: &ScalarField, h: &ScalarField, x: &[f64], tol: f64) -> Result<f64> {
    w.check_point(x)?;
    let jets = w.extended(x);
    let p0 = locals::<f64>(&jets);
    let p1 = locals::<Jet1>(&jets);
    let fs = [f, g, h];
    let j: Vec<Jet2> = fs.iter().map(|s| s.eval(x)).collect();
    let l0: Vec<Local<f64>> = j.iter().map(f64::local).collect();
    w.check_flat(tol, &[&frozen_form(&l0[0].d), &frozen_form(&l0[1].d), &frozen_form(&l0[2].d)])?;
    let l1: Vec<Local<Jet1>> = j.iter().map(Jet1::local).collect();
    let mut total = 0.0;
    for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let inner = bracket_g(&p1, &l1[b], &l1[c]);
        let inner = Local { val: inner.val, d: inner.grad };
        total += bracket_g(&p0, &l0[a], &inner);
    }
    Ok(total)
}

/// `d_P X(α, β)` at `x`.
pub fn dp_vector_field(
    w: &BivectorField,
    v: &VectorField,
    a: &OneFormField,
    b: &OneFormField,
    x: &[f64],
    tol: f64,
) -> Result<f64> {
    w.check_point(x)?;
    let p = locals::<f64>(&w.extended(x));
    let (la, lb) = (a.local0(x), b.local0(x));
    w.check_flat(tol, &[&la, &lb])?;
    Ok(dp_g(&p, &locals(&v.eval(x)), &la, &lb))
}

/// `(L_X Λ)(α, β) = X(Λ(α, β)) - Λ(L_X α, β) - Λ(α, L_X β)`, computed
/// independently of [`dp_vector_field`].
pub fn lie_derivative_of_lambda(
    w: &BivectorField,
    v: &VectorField,
    a: &OneFormField,
    b: &OneFormField,
    x: &[f64],
) -> Result<f64> {
    w.check_point(x)?;
    let p = locals::<f64>(&w.extended(x));
    let xv = locals::<f64>(&v.eval(x));
    let (la, lb) = (a.local0(x), b.local0(x));
    let lam = pair(&lb, &apply(&p, &la));
    let t1 = directional(&xv, &lam);
    let lxa = frozen_form(&lie_form(&xv, &la));
    let lxb = frozen_form(&lie_form(&xv, &lb));
    let t2 = pair(&lb, &apply(&p, &lxa)).val;
    let t3 = pair(&lxb, &apply(&p, &la)).val;
    Ok(t1 - t2 - t3)
}

/// `d_P[X, Y] - (L_X d_P Y - L_Y d_P X)` evaluated on `(α, β)`, relative
/// to the size of the terms.
pub fn bialgebroid_residual(
    w: &BivectorField,
    xf: &VectorField,
    yf: &VectorField,
    a: &OneFormField,
    b: &OneFormField,
    x: &[f64],
    tol: f64,
) -> Result<f64> {
    w.check_point(x)?;
    let jets = w.extended(x);
    let p0 = locals::<f64>(&jets);
    let p1 = locals::<Jet1>(&jets);
    let (xj, yj) = (xf.eval(x), yf.eval(x));
    let (x0, y0) = (locals::<f64>(&xj), locals::<f64>(&yj));
    let (x1, y1) = (locals::<Jet1>(&xj), locals::<Jet1>(&yj));
    let (a0, b0) = (a.local0(x), b.local0(x));
    let (a1, b1) = (a.local1(x)?, b.local1(x)?);
    w.check_flat(tol, &[&a0, &b0])?;

    let xy: Vec<Local<f64>> = lie_vector(&x1, &y1).into_iter().map(|c| Local { val: c.val, d: c.grad }).collect();
    let lhs = dp_g(&p0, &xy, &a0, &b0);

    // L_X Π(α, β) for the bivector Π = d_P Y, which is tensorial in (α, β)
    let lie_of = |xv0: &[Local<f64>], xv1_field: &[Local<Jet1>], zv0: &[Local<f64>]| -> (f64, f64) {
        let whole = dp_g(&p1, xv1_field, &a1, &b1);
        let t1: f64 = xv0.iter().zip(&whole.grad).map(|(c, g)| c.val * g).sum();
        let lxa = frozen_form(&lie_form(xv0, &a0));
        let lxb = frozen_form(&lie_form(xv0, &b0));
        let t2 = dp_g(&p0, zv0, &lxa, &b0);
        let t3 = dp_g(&p0, zv0, &a0, &lxb);
        (t1 - t2 - t3, t1.abs().max(t2.abs()).max(t3.abs()))
    };
    let (lx_dpy, s1) = lie_of(&x0, &y1, &y0);
    let (ly_dpx, s2) = lie_of(&y0, &x1, &x0);
    let rhs = lx_dpy - ly_dpx;
    Ok(relative((lhs - rhs).abs(), lhs.abs().max(s1).max(s2)))
}

/// Largest jacobiator over coordinate-function triples.
pub fn max_coordinate_jacobiator(w: &BivectorField, x: &[f64], tol: f64) -> Result<f64> {
    let d = w.dim();
    let coords: Vec<ScalarField> = (0..d).map(|i| ScalarField::coordinate(d, i)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            for k in j + 1..d {
                worst = worst.max(jacobiator(w, &coords[i], &coords[j], &coords[k], x, tol)?.abs());
            }
        }
    }
    Ok(worst)
}

/// Largest Schouten value over triples of the flat basis one-forms.
pub fn max_coordinate_schouten(w: &BivectorField, x: &[f64], tol: f64) -> Result<f64> {
    let k = w.flat().nrows();
    let forms: Vec<OneFormField> =
        (0..k).map(|a| OneFormField::constant(w.flat().row(a).iter().cloned().collect())).collect();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                worst = worst.max(schouten_residual(w, [&forms[i], &forms[j], &forms[l]], x, tol)?.abs());
            }
        }
    }
    Ok(worst)
}

/// Scale of a field at `x` for relative reporting: `max|Λ|·max|∂Λ|`.
pub fn field_scale(w: &BivectorField, x: &[f64]) -> f64 {
    let (lam, dlam) = w.lambda_at(x);
    let d = dlam.iter().fold(0.0, |m: f64, a| m.max(max_abs(a)));
    max_abs(&lam).max(1.0) * d.max(1.0)
}

// ---------------------------------------------------------------------------
// Lie–Poisson structures and polynomial fields

/// `Λ_ij(ξ) = Σ_k c_ijk ξ_k` on the dual of the Lie algebra.
pub fn lie_poisson_bivector(c: &StructureConstants) -> BivectorField {
    let c = c.clone();
    let d = c.dim();
    BivectorField::from_lambda(d, move |xi| {
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = Jet2::constant(d, 0.0);
                for (k, xk) in xi.iter().enumerate() {
                    let cijk = c.get(i, j, k);
                    if cijk != 0.0 {
                        acc = acc + xk * cijk;
                    }
                }
                out.push(acc);
            }
        }
        out
    })
}

/// Lie–Poisson plus a skew quadratic term `Σ_{k≤l} q_ijkl ξ_k ξ_l`; with
/// `symmetrize` the anchor is replaced by its symmetric part (used as a
/// corrupted variant).
pub fn perturbed_lie_poisson(c: &StructureConstants, q: Vec<f64>, symmetrize: bool) -> BivectorField {
    let c = c.clone();
    let d = c.dim();
    assert_eq!(q.len(), d * d * d * d);
    let sign = if symmetrize { 1.0 } else { -1.0 };
    BivectorField::from_lambda(d, move |xi| {
        let mut out = vec![Jet2::constant(d, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = Jet2::constant(d, 0.0);
                for k in 0..d {
                    let cijk = c.get(i, j, k);
                    if cijk != 0.0 {
                        acc = acc + &xi[k] * cijk;
                    }
                    for l in k..d {
                        let qv = q[((i * d + j) * d + k) * d + l];
                        if qv != 0.0 {
                            acc = acc + (&xi[k] * &xi[l]) * qv;
                        }
                    }
                }
                out[i * d + j] = acc;
            }
        }
        if symmetrize {
            for i in 0..d {
                for j in i + 1..d {
                    out[j * d + i] = out[i * d + j].clone() * sign;
                }
            }
        }
        out
    })
}

/// Random skew quadratic coefficients `q_ijkl = -q_jikl`.
pub fn random_skew_quadratic(rng: &mut TrialRng, d: usize) -> Vec<f64> {
    let mut q = vec![0.0; d * d * d * d];
    for i in 0..d {
        for j in i + 1..d {
            for k in 0..d {
                for l in k..d {
                    let v = rng.normal();
                    q[((i * d + j) * d + k) * d + l] = v;
                    q[((j * d + i) * d + k) * d + l] = -v;
                }
            }
        }
    }
    q
}

/// Lie–Poisson bivector with its anchor symmetrized (corrupted variant).
pub fn symmetrized_lie_poisson(c: &StructureConstants) -> BivectorField {
    let d = c.dim();
    perturbed_lie_poisson(c, vec![0.0; d * d * d * d], true)
}

/// `Σ coeff · Π x_i^{e_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub monomials: Vec<(Vec<u32>, f64)>,
}

impl Polynomial {
    pub fn dim(&self) -> usize {
        self.monomials.first().map_or(0, |m| m.0.len())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.monomials.iter().any(|m| m.0.len() != d) {
            return Err(PglError::MalformedInstance("monomials have inconsistent arity".into()));
        }
        Ok(())
    }

    pub fn eval_jets(&self, x: &[Jet2]) -> Jet2 {
        let mut acc = Jet2::constant(x.first().map_or(0, Jet2::dim), 0.0);
        for (exps, coeff) in &self.monomials {
            let mut term = Jet2::constant(acc.dim(), *coeff);
            for (xi, &e) in x.iter().zip(exps) {
                if e > 0 {
                    term = term * xi.powi(e as i32);
                }
            }
            acc = acc + term;
        }
        acc
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.monomials
            .iter()
            .map(|(e, c)| c * x.iter().zip(e).map(|(xi, &k)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn field(&self) -> ScalarField {
        let p = self.clone();
        ScalarField::new(self.dim(), move |x| p.eval_jets(x))
    }

    /// Random polynomial of total degree at most `degree`.
    pub fn random(rng: &mut TrialRng, dim: usize, terms: usize, degree: u32) -> Self {
        let monomials = (0..terms)
            .map(|_| {
                let mut e = vec![0u32; dim];
                let total = rng.index(degree as usize + 1);
                for _ in 0..total {
                    e[rng.index(dim)] += 1;
                }
                (e, rng.normal())
            })
            .collect();
        Self { monomials }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie_algebra::random_algebra;

    const TOL: f64 = 1e-9;

    fn standard2() -> BivectorField {
        // Λ = [[0, 1], [-1, 0]]
        BivectorField::from_lambda(2, |x| {
            let n = x.len();
            vec![Jet2::constant(n, 0.0), Jet2::constant(n, 1.0), Jet2::constant(n, -1.0), Jet2::constant(n, 0.0)]
        })
    }

    fn random_point(rng: &mut TrialRng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.normal()).collect()
    }

    #[test]
    fn bracket_examples() {
        let w = standard2();
        let (x1, x2) = (ScalarField::coordinate(2, 0), ScalarField::coordinate(2, 1));
        let x = [0.3, 0.9];
        assert_eq!(bracket(&w, &x1, &x2, &x, TOL).unwrap(), 1.0);
        assert_eq!(bracket(&w, &x1, &x1, &x, TOL).unwrap(), 0.0);
    }

    #[test]
    fn leibniz_and_antisymmetry() {
        let mut rng = TrialRng::new(1);
        let w = lie_poisson_bivector(&StructureConstants::so3());
        let f = Polynomial::random(&mut rng, 3, 4, 3).field();
        let g = Polynomial::random(&mut rng, 3, 4, 3).field();
        let h = Polynomial::random(&mut rng, 3, 4, 3).field();
        let gh = g.product(&h);
        for _ in 0..50 {
            let x = random_point(&mut rng, 3);
            let lhs = bracket(&w, &f, &gh, &x, TOL).unwrap();
            let rhs = g.eval(&x).val * bracket(&w, &f, &h, &x, TOL).unwrap()
                + h.eval(&x).val * bracket(&w, &f, &g, &x, TOL).unwrap();
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
            let fg = bracket(&w, &f, &g, &x, TOL).unwrap();
            let gf = bracket(&w, &g, &f, &x, TOL).unwrap();
            assert!((fg + gf).abs() < 1e-12 * (1.0 + fg.abs()));
        }
    }

    #[test]
    fn hamiltonian_examples() {
        let w = standard2();
        let x = [0.4, -1.2];
        assert_eq!(hamiltonian_field(&w, &ScalarField::constant(2, 3.0), &x, TOL).unwrap().amax(), 0.0);
        let energy = ScalarField::new(2, |x| (x[0].powi(2) + x[1].powi(2)) * 0.5);
        let xf = hamiltonian_field(&w, &energy, &x, TOL).unwrap();
        // P = Λᵀ = [[0, -1], [1, 0]], df = x
        assert!((xf[0] - 1.2).abs() < 1e-15 && (xf[1] - 0.4).abs() < 1e-15);
        let g = ScalarField::coordinate(2, 0);
        let direct = bracket(&w, &energy, &g, &x, TOL).unwrap();
        assert!((direct - xf[0]).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_homomorphism_on_lie_poisson() {
        let mut rng = TrialRng::new(4);
        let w = lie_poisson_bivector(&StructureConstants::so3());
        let f = Polynomial::random(&mut rng, 3, 5, 3).field();
        let g = Polynomial::random(&mut rng, 3, 5, 3).field();
        for _ in 0..20 {
            let x = random_point(&mut rng, 3);
            assert!(hamiltonian_homomorphism_residual(&w, &f, &g, &x, TOL).unwrap() < 1e-12);
        }
    }

    #[test]
    fn koszul_on_exact_forms_is_d_of_bracket() {
        let mut rng = TrialRng::new(3);
        let alg = random_algebra(&mut rng);
        let (sc, _) = alg.structure_constants();
        let w = lie_poisson_bivector(&sc);
        let d = sc.dim();
        let f = Polynomial::random(&mut rng, d, 5, 3).field();
        let g = Polynomial::random(&mut rng, d, 5, 3).field();
        for _ in 0..10 {
            let x = random_point(&mut rng, d);
            let k = koszul_bracket(&w, &OneFormField::Exact(f.clone()), &OneFormField::Exact(g.clone()), &x, TOL).unwrap();
            // independent: gradient of {f, g} by central differences of values
            let h = 1e-5;
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (bracket(&w, &f, &g, &xp, TOL).unwrap() - bracket(&w, &f, &g, &xm, TOL).unwrap()) / (2.0 * h);
                assert!((fd - k[i]).abs() < 1e-6 * (1.0 + fd.abs()), "{fd} vs {}", k[i]);
            }
        }
        let same = koszul_bracket(&w, &OneFormField::Exact(f.clone()), &OneFormField::Exact(f), &[0.1; 4][..d], TOL).unwrap();
        assert!(same.amax() < 1e-12);
    }

    #[test]
    fn koszul_constant_case_vanishes() {
        let w = standard2();
        let a = OneFormField::constant(vec![1.0, 2.0]);
        let b = OneFormField::constant(vec![-0.5, 3.0]);
        assert_eq!(koszul_bracket(&w, &a, &b, &[0.0, 1.0], TOL).unwrap().amax(), 0.0);
    }

    #[test]
    fn schouten_matches_jacobiator_on_differentials() {
        let mut rng = TrialRng::new(6);
        let d = 3;
        let w = perturbed_lie_poisson(&StructureConstants::so3(), random_skew_quadratic(&mut rng, d), false);
        let fs: Vec<ScalarField> = (0..3).map(|_| Polynomial::random(&mut rng, d, 4, 2).field()).collect();
        let x = random_point(&mut rng, d);
        let forms: Vec<OneFormField> = fs.iter().map(|f| OneFormField::Exact(f.clone())).collect();
        let s = schouten_residual(&w, [&forms[0], &forms[1], &forms[2]], &x, TOL).unwrap();
        let j = jacobiator(&w, &fs[0], &fs[1], &fs[2], &x, TOL).unwrap();
        assert!(j.abs() > 1e-3);
        assert!((s - j).abs() < 1e-10 * (1.0 + j.abs()), "{s} vs {j}");
    }

    #[test]
    fn lie_poisson_is_poisson() {
        let mut rng = TrialRng::new(8);
        let w = lie_poisson_bivector(&StructureConstants::so3());
        let (x1, x2) = (ScalarField::coordinate(3, 0), ScalarField::coordinate(3, 1));
        let x = [0.2, -0.4, 1.3];
        assert!((bracket(&w, &x1, &x2, &x, TOL).unwrap() - 1.3).abs() < 1e-15);
        for _ in 0..10 {
            let x = random_point(&mut rng, 3);
            assert!(max_coordinate_schouten(&w, &x, TOL).unwrap() < 1e-12);
            assert!(max_coordinate_jacobiator(&w, &x, TOL).unwrap() < 1e-12);
        }
        let zero = lie_poisson_bivector(&StructureConstants::abelian(3));
        assert_eq!(zero.lambda_at(&x).0.amax(), 0.0);
    }

    #[test]
    fn jacobiator_trivial_cases() {
        let mut rng = TrialRng::new(9);
        let w = BivectorField::constant(crate::linear_poisson::standard_j(2));
        let fs: Vec<ScalarField> = (0..3).map(|_| Polynomial::random(&mut rng, 4, 5, 3).field()).collect();
        let x = random_point(&mut rng, 4);
        assert!(jacobiator(&w, &fs[0], &fs[1], &fs[2], &x, TOL).unwrap().abs() < 1e-10);
        let w = perturbed_lie_poisson(&StructureConstants::so3(), random_skew_quadratic(&mut rng, 3), false);
        let f = Polynomial::random(&mut rng, 3, 4, 3).field();
        let g = Polynomial::random(&mut rng, 3, 4, 3).field();
        let x = random_point(&mut rng, 3);
        assert!(jacobiator(&w, &f, &f, &g, &x, TOL).unwrap().abs() < 1e-10);
    }

    #[test]
    fn dp_is_minus_lie_derivative() {
        let mut rng = TrialRng::new(10);
        let d = 3;
        let w = perturbed_lie_poisson(&StructureConstants::so3(), random_skew_quadratic(&mut rng, d), false);
        let poly_field = |rng: &mut TrialRng| {
            let ps: Vec<Polynomial> = (0..d).map(|_| Polynomial::random(rng, d, 4, 2)).collect();
            ComponentField::new(d, move |x| ps.iter().map(|p| p.eval_jets(x)).collect())
        };
        let v = poly_field(&mut rng);
        let a = OneFormField::Components(poly_field(&mut rng));
        let b = OneFormField::Components(poly_field(&mut rng));
        for _ in 0..20 {
            let x = random_point(&mut rng, d);
            let dp = dp_vector_field(&w, &v, &a, &b, &x, TOL).unwrap();
            let lie = lie_derivative_of_lambda(&w, &v, &a, &b, &x).unwrap();
            assert!((dp + lie).abs() < 1e-10 * (1.0 + dp.abs()), "{dp} vs {lie}");
            assert!(dp_vector_field(&w, &v, &a, &a, &x, TOL).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn bialgebroid_vanishes_for_lie_poisson() {
        let mut rng = TrialRng::new(12);
        let alg = random_algebra(&mut rng);
        let (sc, _) = alg.structure_constants();
        let d = sc.dim();
        let w = lie_poisson_bivector(&sc);
        let xf = ComponentField::affine(rng.gaussian(d, d), rng.gaussian_vec(d));
        let yf = ComponentField::affine(rng.gaussian(d, d), rng.gaussian_vec(d));
        let a = OneFormField::Components(ComponentField::affine(rng.gaussian(d, d), rng.gaussian_vec(d)));
        let b = OneFormField::constant(rng.gaussian_vec(d).iter().cloned().collect());
        for _ in 0..50 {
            let x = random_point(&mut rng, d);
            assert!(bialgebroid_residual(&w, &xf, &yf, &a, &b, &x, TOL).unwrap() < 1e-12);
        }
    }

    #[test]
    fn flat_escape_is_rejected() {
        let flat = RMat::from_row_slice(1, 2, &[1.0, 0.0]);
        let w = BivectorField::new(flat, |x| vec![Jet2::constant(x.len(), 0.0); 2]).unwrap();
        let err = bracket(&w, &ScalarField::coordinate(2, 0), &ScalarField::coordinate(2, 1), &[0.0, 0.0], TOL).unwrap_err();
        assert!(matches!(err, PglError::NotFlatValued { .. }));
    }

    #[test]
    fn derivative_audit_is_second_order() {
        let mut rng = TrialRng::new(13);
        let w = perturbed_lie_poisson(&StructureConstants::so3(), random_skew_quadratic(&mut rng, 3), false);
        let x = random_point(&mut rng, 3);
        assert!(w.derivative_audit(&x, 1e-5) < 1e-8);
        assert!(w.skewness_residual(&x) < 1e-15);
    }

    #[test]
    fn symmetrized_anchor_breaks_skewness() {
        let w = symmetrized_lie_poisson(&StructureConstants::so3());
        assert!(w.skewness_residual(&[0.5, 1.0, -0.3]) > 0.1);
    }

    #[test]
    fn polynomial_json_shape() {
        let p = Polynomial { monomials: vec![(vec![1, 0, 2], 3.5)] };
        let js = serde_json::to_string(&p).unwrap();
        assert_eq!(js, r#"{"monomials":[[[1,0,2],3.5]]}"#);
        assert!((p.eval_f64(&[2.0, 9.0, 0.5]) - 1.75).abs() < 1e-15);
    }
}
