//! The symplectic groupoid `T*G ⇉ g*` of a matrix Lie group.
//!
//! Points are left-trivialized: `(g, ξ)` with `ξ` the coefficients of the
//! covector against the dual of the algebra basis. Conventions:
//!
//! * `s(g, ξ) = ξ`, `t(g, ξ) = Ad*`-transport `ρ` with `ρ(Y) = ξ(g⁻¹Yg)`;
//! * `(g, ξ)·(h, η) = (gh, η)`, defined when `s(g, ξ) = t(h, η)`;
//! * `1_ξ = (e, ξ)`, `(g, ξ)⁻¹ = (g⁻¹, t(g, ξ))`.
//!
//! Tangent vectors at `p` are written in the chart
//! `(a, b) ↦ (exp(A) g, ξ + b)`, `A = Σ a_i e_i`. Differentials of the
//! structure maps are taken with forward dual matrices through the same
//! code that evaluates the maps.

use serde::{Deserialize, Serialize};

use crate::error::{PglError, Result};
use crate::io::MatrixJson;
use crate::lie_algebra::{presets, MatrixAlgebra, StructureConstants};
use crate::linalg::{c, cmax_abs, hstack, max_abs, nullspace, rank, relative, CMat, RMat, RVec};
use crate::linear_poisson::{classify_subspace, is_poisson_morphism, Classification, LinearPoissonSpace, Subspace};
use crate::rng::TrialRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    Unitary,
    SpecialUnitary,
    GeneralLinear,
}

/// A matrix Lie group through its algebra basis and a membership test.
#[derive(Clone, Debug)]
pub struct MatrixLieGroupSpec {
    pub name: String,
    pub algebra: MatrixAlgebra,
    pub membership: Membership,
    constants: StructureConstants,
    pub closure_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpecJson {
    pub n: usize,
    pub basis: Vec<MatrixJson>,
    pub membership: Membership,
}

impl MatrixLieGroupSpec {
    pub fn new(name: &str, algebra: MatrixAlgebra, membership: Membership, tol: f64) -> Result<Self> {
        let (constants, closure_residual) = algebra.structure_constants();
        if closure_residual > tol {
            return Err(PglError::NotMember { what: "commutator-closed spans".into(), residual: closure_residual });
        }
        Ok(Self { name: name.into(), algebra, membership, constants, closure_residual })
    }

    pub fn preset(name: &str, tol: f64) -> Result<Self> {
        let (alg, mem) = match name {
            "su2" => (presets::su2(), Membership::SpecialUnitary),
            "u2" => (presets::u2(), Membership::Unitary),
            "so3" => (presets::so3(), Membership::Unitary),
            "torus" => (presets::torus(2), Membership::Unitary),
            "gl2r" => (presets::gl_real(2), Membership::GeneralLinear),
            other => return Err(PglError::InvalidConfig(format!("unknown group preset `{other}`"))),
        };
        Self::new(name, alg, mem, tol)
    }

    pub fn from_json(js: &GroupSpecJson, tol: f64) -> Result<Self> {
        let basis = js.basis.iter().map(MatrixJson::to_complex).collect::<Result<Vec<_>>>()?;
        Self::new("instance", MatrixAlgebra::new(js.n, basis)?, js.membership, tol)
    }

    pub fn to_json(&self) -> GroupSpecJson {
        GroupSpecJson {
            n: self.algebra.n(),
            basis: self.algebra.basis().iter().map(MatrixJson::from_complex).collect(),
            membership: self.membership,
        }
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.constants
    }

    pub fn membership_residual(&self, g: &CMat) -> f64 {
        let n = g.nrows();
        let unitary = || cmax_abs(&(g * g.adjoint() - CMat::identity(n, n)));
        match self.membership {
            Membership::Unitary => unitary(),
            Membership::SpecialUnitary => unitary().max((g.determinant() - c(1.0, 0.0)).norm()),
            Membership::GeneralLinear => {
                if g.clone().try_inverse().is_some() {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// `exp` of a random algebra element.
    pub fn random_element(&self, rng: &mut TrialRng) -> CMat {
        let x = rng.gaussian_vec(self.dim());
        self.algebra.element(&x).exp()
    }

    pub fn bracket(&self, x: &RVec, y: &RVec) -> RVec {
        self.constants.bracket(x, y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CotangentPoint {
    pub g: CMat,
    pub xi: RVec,
}

/// Matrix with a first-order tangent.
#[derive(Clone, Debug)]
pub struct DualMat {
    pub val: CMat,
    pub tan: CMat,
}

impl DualMat {
    pub fn constant(m: CMat) -> Self {
        let n = m.nrows();
        Self { val: m, tan: CMat::zeros(n, n) }
    }

    pub fn mul(&self, o: &DualMat) -> DualMat {
        DualMat { val: &self.val * &o.val, tan: &self.tan * &o.val + &self.val * &o.tan }
    }

    pub fn inverse(&self) -> Option<DualMat> {
        let inv = self.val.clone().try_inverse()?;
        let tan = -(&inv * &self.tan * &inv);
        Some(DualMat { val: inv, tan })
    }

    /// `exp(A + εE)` via the block matrix `[[A, E], [0, A]]`.
    pub fn exp(a: &CMat, e: &CMat) -> DualMat {
        let n = a.nrows();
        let mut block = CMat::zeros(2 * n, 2 * n);
        block.view_mut((0, 0), (n, n)).copy_from(a);
        block.view_mut((n, n), (n, n)).copy_from(a);
        block.view_mut((0, n), (n, n)).copy_from(e);
        let ex = block.exp();
        DualMat { val: ex.view((0, 0), (n, n)).into_owned(), tan: ex.view((0, n), (n, n)).into_owned() }
    }
}

/// Which target map to use; the second is a corrupted variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Transport {
    #[default]
    Coadjoint,
    Dropped,
}

#[derive(Clone, Debug)]
pub struct CotangentGroupoid {
    pub spec: MatrixLieGroupSpec,
    pub transport: Transport,
    pub tol: f64,
}

impl CotangentGroupoid {
    pub fn new(spec: MatrixLieGroupSpec, tol: f64) -> Self {
        Self { spec, transport: Transport::Coadjoint, tol }
    }

    pub fn with_transport(mut self, transport: Transport) -> Self {
        self.transport = transport;
        self
    }

    fn m(&self) -> usize {
        self.spec.dim()
    }

    fn check(&self, p: &CotangentPoint) -> Result<()> {
        if p.xi.len() != self.m() {
            return Err(PglError::DimensionMismatch { expected: self.m(), found: p.xi.len() });
        }
        let residual = self.spec.membership_residual(&p.g);
        if residual > self.tol {
            return Err(PglError::NotMember { what: self.spec.name.clone(), residual });
        }
        Ok(())
    }

    pub fn source(&self, p: &CotangentPoint) -> RVec {
        p.xi.clone()
    }

    /// Target with a tangent: `ρ_j = Σ_i ξ_i coords_i(g⁻¹ e_j g)`.
    fn target_dual(&self, g: &DualMat, xi: &RVec, xi_tan: &RVec) -> (RVec, RVec) {
        if self.transport == Transport::Dropped {
            return (xi.clone(), xi_tan.clone());
        }
        let m = self.m();
        let gi = g.inverse().expect("group elements are invertible");
        let mut val = RVec::zeros(m);
        let mut tan = RVec::zeros(m);
        for (j, e) in self.spec.algebra.basis().iter().enumerate() {
            let conj = gi.mul(&DualMat::constant(e.clone())).mul(g);
            let (cv, _) = self.spec.algebra.coords(&conj.val);
            let (ct, _) = self.spec.algebra.coords(&conj.tan);
            val[j] = cv.dot(xi);
            tan[j] = ct.dot(xi) + cv.dot(xi_tan);
        }
        (val, tan)
    }

    pub fn target(&self, p: &CotangentPoint) -> RVec {
        let z = RVec::zeros(self.m());
        self.target_dual(&DualMat::constant(p.g.clone()), &p.xi, &z).0
    }

    pub fn unit(&self, xi: &RVec) -> CotangentPoint {
        let n = self.spec.algebra.n();
        CotangentPoint { g: CMat::identity(n, n), xi: xi.clone() }
    }

    pub fn multiply(&self, p: &CotangentPoint, q: &CotangentPoint) -> Result<CotangentPoint> {
        self.check(p)?;
        self.check(q)?;
        let mismatch = relative((self.source(p) - self.target(q)).amax(), p.xi.amax());
        if mismatch > self.tol {
            return Err(PglError::NotComposable { residual: mismatch });
        }
        Ok(CotangentPoint { g: &p.g * &q.g, xi: q.xi.clone() })
    }

    pub fn invert(&self, p: &CotangentPoint) -> Result<CotangentPoint> {
        self.check(p)?;
        let g = p.g.clone().try_inverse().ok_or(PglError::NotMember { what: "invertible matrices".into(), residual: 1.0 })?;
        Ok(CotangentPoint { g, xi: self.target(p) })
    }

    /// `η` with `t(h, η) = ξ`, so that `(g, ξ)·(h, η)` is defined.
    pub fn left_partner(&self, h: &CMat, xi: &RVec) -> Result<RVec> {
        let m = self.m();
        let mut t = RMat::zeros(m, m);
        for k in 0..m {
            let mut e = RVec::zeros(m);
            e[k] = 1.0;
            t.set_column(k, &self.target(&CotangentPoint { g: h.clone(), xi: e }));
        }
        t.lu().solve(xi).ok_or(PglError::NotComposable { residual: 1.0 })
    }

    pub fn random_point(&self, rng: &mut TrialRng) -> CotangentPoint {
        CotangentPoint { g: self.spec.random_element(rng), xi: rng.gaussian_vec(self.m()) }
    }

    /// `p` followed by a random right factor composable with it.
    pub fn random_composable(&self, rng: &mut TrialRng, p: &CotangentPoint) -> Result<CotangentPoint> {
        let h = self.spec.random_element(rng);
        let eta = self.left_partner(&h, &self.source(p))?;
        Ok(CotangentPoint { g: h, xi: eta })
    }

    // -- tangent calculus ---------------------------------------------------

    /// Chart tangent `(a, b)` at `p` pushed to `(right velocity, ρ̇)`.
    fn right_data(&self, p: &CotangentPoint, u: &RVec) -> (RVec, RVec) {
        let m = self.m();
        let a = u.rows(0, m).into_owned();
        let b = u.rows(m, m).into_owned();
        let amat = self.spec.algebra.element(&a);
        let n = amat.nrows();
        let curve = DualMat::exp(&CMat::zeros(n, n), &amat).mul(&DualMat::constant(p.g.clone()));
        let (_, rho_dot) = self.target_dual(&curve, &p.xi, &b);
        (a, rho_dot)
    }

    /// `Ds_p` as an `m × 2m` matrix.
    pub fn d_source(&self, _p: &CotangentPoint) -> RMat {
        let m = self.m();
        hstack(&RMat::zeros(m, m), &RMat::identity(m, m))
    }

    /// `Dt_p` as an `m × 2m` matrix.
    pub fn d_target(&self, p: &CotangentPoint) -> RMat {
        let m = self.m();
        let mut out = RMat::zeros(m, 2 * m);
        for k in 0..2 * m {
            let mut u = RVec::zeros(2 * m);
            u[k] = 1.0;
            out.set_column(k, &self.right_data(p, &u).1);
        }
        out
    }

    /// Tangent map of multiplication at a composable `(p, q)`.
    pub fn d_multiply(&self, p: &CotangentPoint, q: &CotangentPoint, u: &RVec, v: &RVec) -> RVec {
        let m = self.m();
        let n = p.g.nrows();
        let z = CMat::zeros(n, n);
        let gp = DualMat::exp(&z, &self.spec.algebra.element(&u.rows(0, m).into_owned())).mul(&DualMat::constant(p.g.clone()));
        let gq = DualMat::exp(&z, &self.spec.algebra.element(&v.rows(0, m).into_owned())).mul(&DualMat::constant(q.g.clone()));
        let prod = gp.mul(&gq);
        let inv = prod.val.clone().try_inverse().expect("invertible");
        let (a, _) = self.spec.algebra.coords(&(&prod.tan * inv));
        let mut out = RVec::zeros(2 * m);
        out.rows_mut(0, m).copy_from(&a);
        out.rows_mut(m, m).copy_from(&v.rows(m, m));
        out
    }

    /// `⟨η1, X2⟩ - ⟨η2, X1⟩ + ⟨ρ, [X1, X2]⟩` with `ρ = t(p)` and tangents
    /// given as (momentum velocity, right-trivialized velocity).
    pub fn canonical_form(&self, p: &CotangentPoint, t1: (&RVec, &RVec), t2: (&RVec, &RVec)) -> f64 {
        let rho = self.target(p);
        t1.0.dot(t2.1) - t2.0.dot(t1.1) + rho.dot(&self.spec.bracket(t1.1, t2.1))
    }

    /// `ω_p` in chart coordinates.
    pub fn omega_matrix(&self, p: &CotangentPoint) -> RMat {
        let m = self.m();
        let data: Vec<(RVec, RVec)> = (0..2 * m)
            .map(|k| {
                let mut u = RVec::zeros(2 * m);
                u[k] = 1.0;
                self.right_data(p, &u)
            })
            .collect();
        RMat::from_fn(2 * m, 2 * m, |i, j| {
            let (xi, ei) = (&data[i].0, &data[i].1);
            let (xj, ej) = (&data[j].0, &data[j].1);
            self.canonical_form(p, (ei, xi), (ej, xj))
        })
    }

    pub fn symplectic_space(&self, p: &CotangentPoint) -> Result<LinearPoissonSpace> {
        LinearPoissonSpace::from_symplectic_form(&self.omega_matrix(p), self.tol)
    }
}

/// Per-family worst residuals from one trial of the groupoid checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroupoidResiduals {
    pub associativity: f64,
    pub units: f64,
    pub inverses: f64,
    pub coherence: f64,
    pub multiplicativity: f64,
    pub fiber_orthogonality: f64,
    pub nondegeneracy: f64,
    pub unit_lagrangian: f64,
    pub zero_section_lagrangian: f64,
    pub dual_pair: f64,
    pub unit_coisotropic: f64,
    pub source_momentum: f64,
    pub target_momentum: f64,
}

fn vec_gap(a: &RVec, b: &RVec) -> f64 {
    relative((a - b).amax(), a.amax().max(b.amax()))
}

fn mat_gap(a: &CMat, b: &CMat) -> f64 {
    relative(cmax_abs(&(a - b)), cmax_abs(a).max(cmax_abs(b)))
}

fn point_gap(p: &CotangentPoint, q: &CotangentPoint) -> f64 {
    mat_gap(&p.g, &q.g).max(vec_gap(&p.xi, &q.xi))
}

impl CotangentGroupoid {
    /// Associativity, unit and inverse laws, `s`/`t` coherence.
    pub fn axiom_residuals(&self, rng: &mut TrialRng) -> Result<GroupoidResiduals> {
        let p = self.random_point(rng);
        let q = self.random_composable(rng, &p)?;
        let r = self.random_composable(rng, &q)?;
        let pq = self.multiply(&p, &q)?;
        let qr = self.multiply(&q, &r)?;
        let associativity = point_gap(&self.multiply(&pq, &r)?, &self.multiply(&p, &qr)?);
        let units = point_gap(&self.multiply(&self.unit(&self.target(&p)), &p)?, &p)
            .max(point_gap(&self.multiply(&p, &self.unit(&self.source(&p)))?, &p));
        let inv = self.invert(&p)?;
        let inverses = point_gap(&self.multiply(&p, &inv)?, &self.unit(&self.target(&p)))
            .max(point_gap(&self.multiply(&inv, &p)?, &self.unit(&self.source(&p))))
            .max(point_gap(&self.invert(&inv)?, &p));
        let coherence = vec_gap(&self.source(&pq), &self.source(&q))
            .max(vec_gap(&self.target(&pq), &self.target(&p)))
            .max(vec_gap(&self.source(&self.unit(&p.xi)), &p.xi))
            .max(vec_gap(&self.target(&self.unit(&p.xi)), &p.xi));
        Ok(GroupoidResiduals { associativity, units, inverses, coherence, ..Default::default() })
    }

    /// Multiplicativity of `ω`, fiber orthogonality, Lagrangian and
    /// coisotropic submanifolds, the dual pair, and the momentum maps.
    pub fn symplectic_residuals(&self, rng: &mut TrialRng) -> Result<GroupoidResiduals> {
        let m = self.m();
        let p = self.random_point(rng);
        let q = self.random_composable(rng, &p)?;
        let pq = self.multiply(&p, &q)?;
        let (op, oq, opq) = (self.omega_matrix(&p), self.omega_matrix(&q), self.omega_matrix(&pq));
        let scale = max_abs(&op).max(max_abs(&oq)).max(max_abs(&opq));

        // tangent space of the composable pairs: Ds_p u = Dt_q v
        let constraint = hstack(&self.d_source(&p), &(-self.d_target(&q)));
        let pairs = nullspace(&constraint, max_abs(&constraint));
        let mut multiplicativity: f64 = 0.0;
        let lifted: Vec<(RVec, RVec, RVec)> = (0..pairs.ncols())
            .map(|k| {
                let w = pairs.column(k);
                let u = w.rows(0, 2 * m).into_owned();
                let v = w.rows(2 * m, 2 * m).into_owned();
                let uv = self.d_multiply(&p, &q, &u, &v);
                (u, v, uv)
            })
            .collect();
        for (u1, v1, w1) in &lifted {
            for (u2, v2, w2) in &lifted {
                let lhs = (w1.transpose() * &opq * w2)[(0, 0)];
                let rhs = (u1.transpose() * &op * u2)[(0, 0)] + (v1.transpose() * &oq * v2)[(0, 0)];
                multiplicativity = multiplicativity.max(relative((lhs - rhs).abs(), scale));
            }
        }

        // s- and t-fibers are ω-orthogonal
        let ks = nullspace(&self.d_source(&p), 1.0);
        let dt = self.d_target(&p);
        let kt = nullspace(&dt, max_abs(&dt));
        let fiber_orthogonality = relative(max_abs(&(ks.transpose() * &op * &kt)), max_abs(&op));
        let nondegeneracy = if rank(&op, 0.0) == 2 * m { 0.0 } else { 1.0 };

        // units {(e, ξ)} and the zero section {(g, 0)}
        let unit_pt = self.unit(&p.xi);
        let unit_space = self.symplectic_space(&unit_pt)?;
        let unit_tangent = Subspace::from_span(2 * m, &RMat::identity(2 * m, 2 * m).columns(m, m).into_owned(), self.tol)?;
        let cu: Classification = classify_subspace(&unit_space, &unit_tangent)?;
        let zero_pt = CotangentPoint { g: p.g.clone(), xi: RVec::zeros(m) };
        let zero_space = self.symplectic_space(&zero_pt)?;
        let zero_tangent = Subspace::from_span(2 * m, &RMat::identity(2 * m, 2 * m).columns(0, m).into_owned(), self.tol)?;
        let cz = classify_subspace(&zero_space, &zero_tangent)?;

        // {s*f1, t*f2} = 0 for linear f1, f2: Dt P Dsᵀ = 0
        let space = self.symplectic_space(&p)?;
        let pair_matrix = &dt * space.anchor() * self.d_source(&p).transpose();
        let dual_pair = relative(max_abs(&pair_matrix), max_abs(space.anchor()) * max_abs(&dt));

        // with ω as above, t is Poisson into {f,g}(ζ) = ⟨ζ,[df,dg]⟩ and s anti-Poisson
        let kks_at = |zeta: &RVec| -> Result<LinearPoissonSpace> {
            LinearPoissonSpace::with_full_dual(kks_anchor_matrix(self.spec.constants(), zeta), self.tol)
        };
        let source_momentum = is_poisson_morphism(&space, &kks_at(&self.source(&p))?, &self.d_source(&p), true)?;
        let target_momentum = is_poisson_morphism(&space, &kks_at(&self.target(&p))?, &dt, false)?;

        Ok(GroupoidResiduals {
            multiplicativity,
            fiber_orthogonality,
            nondegeneracy,
            unit_lagrangian: cu.lagrangian_residual.max(cu.coisotropic_residual),
            zero_section_lagrangian: cz.lagrangian_residual.max(cz.coisotropic_residual),
            dual_pair,
            unit_coisotropic: cu.coisotropic_residual,
            source_momentum,
            target_momentum,
            ..Default::default()
        })
    }
}

// ---------------------------------------------------------------------------
// KKS structure on g*

/// `ad*_X ξ` with `(ad*_X ξ)(Y) = ξ([X, Y])`.
pub fn kks_anchor(c: &StructureConstants, xi: &RVec, x: &RVec) -> RVec {
    let m = c.dim();
    RVec::from_fn(m, |j, _| {
        let mut s = 0.0;
        for i in 0..m {
            for k in 0..m {
                s += x[i] * c.get(i, j, k) * xi[k];
            }
        }
        s
    })
}

/// Anchor of the Lie–Poisson structure at `ξ` (`P_ij = Λ_ji`,
/// `Λ_ij = Σ_k c_ijk ξ_k`).
pub fn kks_anchor_matrix(c: &StructureConstants, xi: &RVec) -> RMat {
    let m = c.dim();
    RMat::from_fn(m, m, |i, j| (0..m).map(|k| c.get(j, i, k) * xi[k]).sum())
}

/// `σ_ξ(X, Y) = ⟨ξ, [X, Y]⟩` via the matrix commutator.
pub fn kks_form(alg: &MatrixAlgebra, xi: &RVec, x: &RVec, y: &RVec) -> f64 {
    let (xm, ym) = (alg.element(x), alg.element(y));
    let (coords, _) = alg.coords(&(&xm * &ym - &ym * &xm));
    xi.dot(&coords)
}

/// `g_ξ = {X : ad*_X ξ = 0}` and its commutator-closure residual.
pub fn stabilizer_algebra(c: &StructureConstants, xi: &RVec, tol: f64) -> (Subspace, f64) {
    let m = c.dim();
    let mut mat = RMat::zeros(m, m);
    for i in 0..m {
        let mut e = RVec::zeros(m);
        e[i] = 1.0;
        mat.set_column(i, &kks_anchor(c, xi, &e));
    }
    let scale = c_scale(c) * xi.amax();
    let stab = Subspace::from_span(m, &nullspace(&mat, scale), tol).expect("shape");
    let mut closure: f64 = 0.0;
    let b = stab.basis();
    for i in 0..b.ncols() {
        for j in 0..b.ncols() {
            let br = c.bracket(&b.column(i).into_owned(), &b.column(j).into_owned());
            closure = closure.max(relative(stab.membership_residual(&br), c_scale(c)));
        }
    }
    (stab, closure)
}

fn c_scale(c: &StructureConstants) -> f64 {
    let m = c.dim();
    let mut s: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                s = s.max(c.get(i, j, k).abs());
            }
        }
    }
    s
}

/// Value of the orbit form and the gap between its two trace expressions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitFormValue {
    pub value: crate::linalg::C64,
    pub identity_residual: f64,
}

/// `σ_A(X1, X2) = Tr(ġ1 g⁻¹ Ȧ2) = -Tr(ġ2 g⁻¹ Ȧ1)` on the orbit through
/// `A = g J g⁻¹`, tangents `(ġ_i, Ȧ_i)` with `Ȧ_i = [ġ_i g⁻¹, A]`.
/// With `literal_product` the factor `g⁻¹` is replaced by `g` (corrupted
/// variant).
pub fn gl_orbit_form(
    a: &CMat,
    g: &CMat,
    t1: (&CMat, &CMat),
    t2: (&CMat, &CMat),
    tol: f64,
    literal_product: bool,
) -> Result<OrbitFormValue> {
    let gi = g.clone().try_inverse().ok_or(PglError::NotMember { what: "GL(n, C)".into(), residual: 1.0 })?;
    for (gd, ad) in [t1, t2] {
        let expected = crate::linalg::commutator(&(gd * &gi), a);
        let residual = relative(cmax_abs(&(ad - &expected)), cmax_abs(&expected));
        if residual > tol {
            return Err(PglError::InconsistentTangent { residual });
        }
    }
    let mid = if literal_product { g.clone() } else { gi };
    let e1 = (t1.0 * &mid * t2.1).trace();
    let e2 = -(t2.0 * &mid * t1.1).trace();
    let scale = cmax_abs(t1.0) * cmax_abs(&mid) * cmax_abs(t2.1) + cmax_abs(t2.0) * cmax_abs(&mid) * cmax_abs(t1.1);
    Ok(OrbitFormValue { value: e1, identity_residual: relative((e1 - e2).norm(), scale) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson_jet::{lie_poisson_bivector, max_coordinate_schouten};

    const TOL: f64 = 1e-9;

    fn groupoid(name: &str) -> CotangentGroupoid {
        CotangentGroupoid::new(MatrixLieGroupSpec::preset(name, TOL).unwrap(), TOL)
    }

    #[test]
    fn source_target_examples() {
        let gr = groupoid("su2");
        let mut rng = TrialRng::new(1);
        let xi = rng.gaussian_vec(3);
        let unit = gr.unit(&xi);
        assert!(vec_gap(&gr.target(&unit), &xi) < 1e-15);
        let p = gr.random_point(&mut rng);
        let zero = CotangentPoint { g: p.g.clone(), xi: RVec::zeros(3) };
        assert_eq!(gr.target(&zero).amax(), 0.0);
        // transport through the pairing, coordinate by coordinate
        let gi = p.g.adjoint();
        for (j, e) in gr.spec.algebra.basis().iter().enumerate() {
            let (coords, _) = gr.spec.algebra.coords(&(&gi * e * &p.g));
            assert!((gr.target(&p)[j] - coords.dot(&p.xi)).abs() < 1e-13);
        }
    }

    #[test]
    fn axioms_hold_on_presets() {
        let mut rng = TrialRng::new(2);
        for name in ["su2", "u2", "so3", "torus", "gl2r"] {
            let gr = groupoid(name);
            for _ in 0..10 {
                let r = gr.axiom_residuals(&mut rng).unwrap();
                for v in [r.associativity, r.units, r.inverses, r.coherence] {
                    assert!(v < 1e-12, "{name}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn non_composable_is_rejected() {
        let gr = groupoid("su2");
        let mut rng = TrialRng::new(3);
        let p = gr.random_point(&mut rng);
        let q = gr.random_point(&mut rng);
        assert!(matches!(gr.multiply(&p, &q), Err(PglError::NotComposable { .. })));
    }

    #[test]
    fn inverse_examples() {
        let gr = groupoid("u2");
        let mut rng = TrialRng::new(4);
        let u = gr.unit(&rng.gaussian_vec(4));
        assert!(point_gap(&gr.invert(&u).unwrap(), &u) < 1e-15);
        let p = CotangentPoint { g: gr.spec.random_element(&mut rng), xi: RVec::zeros(4) };
        let inv = gr.invert(&p).unwrap();
        assert!(mat_gap(&inv.g, &p.g.adjoint()) < 1e-14 && inv.xi.amax() == 0.0);
    }

    #[test]
    fn canonical_form_examples() {
        let gr = groupoid("so3");
        let mut rng = TrialRng::new(5);
        let p = gr.random_point(&mut rng);
        let (x, e) = (rng.gaussian_vec(3), rng.gaussian_vec(3));
        assert_eq!(gr.canonical_form(&p, (&e, &x), (&e, &x)), 0.0);
        let z = RVec::zeros(3);
        let zero_pt = CotangentPoint { g: p.g.clone(), xi: z.clone() };
        assert_eq!(gr.canonical_form(&zero_pt, (&e, &x), (&z, &z)), 0.0);
        let origin = gr.unit(&z);
        let (x2, e2) = (rng.gaussian_vec(3), rng.gaussian_vec(3));
        let flat = e.dot(&x2) - e2.dot(&x);
        assert!((gr.canonical_form(&origin, (&e, &x), (&e2, &x2)) - flat).abs() < 1e-14);
        let om = gr.omega_matrix(&p);
        assert!(max_abs(&(&om + om.transpose())) < 1e-13);
        assert_eq!(rank(&om, 0.0), 6);
    }

    #[test]
    fn symplectic_checks_on_presets() {
        let mut rng = TrialRng::new(6);
        for name in ["su2", "u2", "so3", "torus", "gl2r"] {
            let gr = groupoid(name);
            for _ in 0..5 {
                let r = gr.symplectic_residuals(&mut rng).unwrap();
                for v in [
                    r.multiplicativity,
                    r.fiber_orthogonality,
                    r.nondegeneracy,
                    r.unit_lagrangian,
                    r.zero_section_lagrangian,
                    r.dual_pair,
                    r.unit_coisotropic,
                    r.source_momentum,
                    r.target_momentum,
                ] {
                    assert!(v < 1e-10, "{name}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn dropped_transport_breaks_symplectic_checks() {
        let mut rng = TrialRng::new(7);
        let gr = groupoid("su2").with_transport(Transport::Dropped);
        let ax = gr.axiom_residuals(&mut rng).unwrap();
        assert!(ax.associativity < 1e-12);
        let r = gr.symplectic_residuals(&mut rng).unwrap();
        assert!(r.multiplicativity.max(r.fiber_orthogonality) > 1e-2, "{r:?}");
    }

    #[test]
    fn kks_examples() {
        let so3 = StructureConstants::so3();
        let alg = presets::so3();
        let e = |i: usize| {
            let mut v = RVec::zeros(3);
            v[i] = 1.0;
            v
        };
        assert!((kks_form(&alg, &e(2), &e(0), &e(1)) - 1.0).abs() < 1e-15);
        let mut rng = TrialRng::new(8);
        for _ in 0..10 {
            let (xi, x, y) = (rng.gaussian_vec(3), rng.gaussian_vec(3), rng.gaussian_vec(3));
            let via_anchor = kks_anchor(&so3, &xi, &x).dot(&y);
            assert!((kks_form(&alg, &xi, &x, &y) - via_anchor).abs() < 1e-13);
            assert!(kks_form(&alg, &xi, &x, &x).abs() < 1e-14);
        }
        let ab = StructureConstants::abelian(2);
        assert_eq!(kks_anchor(&ab, &rng.gaussian_vec(2), &rng.gaussian_vec(2)).amax(), 0.0);
        let w = lie_poisson_bivector(&so3);
        assert!(max_coordinate_schouten(&w, &[0.3, -0.2, 1.1], TOL).unwrap() < 1e-14);
    }

    #[test]
    fn stabilizer_examples() {
        let so3 = StructureConstants::so3();
        let (stab, closure) = stabilizer_algebra(&so3, &RVec::from_vec(vec![0.0, 0.0, 1.0]), TOL);
        assert_eq!(stab.dim(), 1);
        assert!(stab.contains(&RVec::from_vec(vec![0.0, 0.0, 1.0])));
        assert!(closure < 1e-14);
        let (all, _) = stabilizer_algebra(&so3, &RVec::zeros(3), TOL);
        assert_eq!(all.dim(), 3);
        let (u2, _) = presets::u2().structure_constants();
        let mut rng = TrialRng::new(9);
        let xi = rng.gaussian_vec(4);
        let (stab, closure) = stabilizer_algebra(&u2, &xi, TOL);
        let anchor_rank = rank(&kks_anchor_matrix(&u2, &xi), 0.0);
        assert_eq!(stab.dim() + anchor_rank, 4);
        assert!(closure < 1e-12);
    }

    #[test]
    fn gl_orbit_examples() {
        let mut rng = TrialRng::new(10);
        let g = rng.complex_gaussian(2, 2) + CMat::identity(2, 2) * c(2.0, 0.0);
        let gi = g.clone().try_inverse().unwrap();
        let j = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.5), c(-2.0, 0.0)]));
        let a = &g * &j * &gi;
        let tangent = |z: &CMat| {
            let gd = &g * z;
            let ad = crate::linalg::commutator(&(&gd * &gi), &a);
            (gd, ad)
        };
        let (g1, a1) = tangent(&rng.complex_gaussian(2, 2));
        let (g2, a2) = tangent(&rng.complex_gaussian(2, 2));
        let v = gl_orbit_form(&a, &g, (&g1, &a1), (&g2, &a2), TOL, false).unwrap();
        assert!(v.identity_residual < 1e-14);
        let (v1, v2) = (&g1 * &gi, &g2 * &gi);
        let oracle = (&a * crate::linalg::commutator(&v1, &v2)).trace();
        assert!((v.value - oracle).norm() < 1e-12);
        let same = gl_orbit_form(&a, &g, (&g1, &a1), (&g1, &a1), TOL, false).unwrap();
        assert!(same.value.norm() < 1e-12);
        let literal = gl_orbit_form(&a, &g, (&g1, &a1), (&g2, &a2), TOL, true).unwrap();
        assert!(literal.identity_residual > 1e-3);
        let bad = gl_orbit_form(&a, &g, (&g1, &a2), (&g2, &a2), TOL, false);
        assert!(matches!(bad, Err(PglError::InconsistentTangent { .. })));
    }

    #[test]
    fn nilpotent_orbit_by_curve_differences() {
        let mut rng = TrialRng::new(11);
        let g = rng.complex_gaussian(2, 2) + CMat::identity(2, 2) * c(2.0, 0.0);
        let gi = g.clone().try_inverse().unwrap();
        let mut j = CMat::zeros(2, 2);
        j[(0, 1)] = c(1.0, 0.0);
        let a = &g * &j * &gi;
        let h = 1e-5;
        let tangent = |z: &CMat| {
            let curve = |t: f64| {
                let gt = &g * (z * c(t, 0.0)).exp();
                &gt * &j * gt.try_inverse().unwrap()
            };
            let ad = (curve(h) - curve(-h)) / c(2.0 * h, 0.0);
            (&g * z, ad)
        };
        let (g1, a1) = tangent(&rng.complex_gaussian(2, 2));
        let (g2, a2) = tangent(&rng.complex_gaussian(2, 2));
        let v = gl_orbit_form(&a, &g, (&g1, &a1), (&g2, &a2), 1e-6, false).unwrap();
        assert!(v.identity_residual < 1e-8);
        assert!(v.value.norm() > 1e-3);
        let swapped = gl_orbit_form(&a, &g, (&g2, &a2), (&g1, &a1), 1e-6, false).unwrap();
        assert!((v.value + swapped.value).norm() < 1e-8);
    }

    #[test]
    fn group_spec_json_roundtrip() {
        let spec = MatrixLieGroupSpec::preset("u2", TOL).unwrap();
        let js = serde_json::to_string(&spec.to_json()).unwrap();
        assert!(js.contains(r#""membership":"unitary""#));
        let back = MatrixLieGroupSpec::from_json(&serde_json::from_str(&js).unwrap(), TOL).unwrap();
        assert_eq!(back.dim(), 4);
    }
}
