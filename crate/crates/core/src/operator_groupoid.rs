//! The groupoid of a finite-dimensional matrix *-algebra over its lattice
//! of projections: `s(x) = u*u`, `t(x) = uu*`, product when `s(x) = t(y)`,
//! inverse `|x|⁺u*`.
//!
//! Algebras are block-diagonal: `blocks = [n1, n2, ..]` occupy the leading
//! diagonal blocks of an `n × n` matrix, everything else is zero.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{PglError, Result};
use crate::io::MatrixJson;
use crate::linalg::{c, cmax_abs, csingular_values, csvd, relative, CMat, RMat, RANK_EPS};
use crate::linear_poisson::{classify_subspace, is_poisson_morphism, product_space, LinearPoissonSpace, Sign, Subspace};
use crate::rng::TrialRng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarAlgebraSpec {
    pub n: usize,
    pub blocks: Vec<usize>,
}

impl StarAlgebraSpec {
    pub fn new(n: usize, blocks: Vec<usize>) -> Result<Self> {
        if n == 0 || blocks.is_empty() || blocks.contains(&0) || blocks.iter().sum::<usize>() > n {
            return Err(PglError::InvalidConfig(format!("block sizes {blocks:?} do not fit in n = {n}")));
        }
        Ok(Self { n, blocks })
    }

    pub fn full(n: usize) -> Self {
        Self { n, blocks: vec![n] }
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.n, self.blocks.clone()).map(|_| ())
    }

    /// `(offset, size)` of each block.
    pub fn ranges(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.blocks
            .iter()
            .map(|&b| {
                let r = (off, b);
                off += b;
                r
            })
            .collect()
    }

    fn in_pattern(&self, i: usize, j: usize) -> bool {
        self.ranges().iter().any(|&(o, s)| (o..o + s).contains(&i) && (o..o + s).contains(&j))
    }

    /// Largest entry outside the block pattern.
    pub fn membership_residual(&self, x: &CMat) -> f64 {
        if x.shape() != (self.n, self.n) {
            return f64::INFINITY;
        }
        let mut r: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.in_pattern(i, j) {
                    r = r.max(x[(i, j)].norm());
                }
            }
        }
        relative(r, cmax_abs(x))
    }

    pub fn check_member(&self, x: &CMat, tol: f64) -> Result<()> {
        let residual = self.membership_residual(x);
        if residual > tol {
            return Err(PglError::NotMember { what: format!("block algebra {:?} in M{}", self.blocks, self.n), residual });
        }
        Ok(())
    }

    pub fn block(&self, x: &CMat, k: usize) -> CMat {
        let (o, s) = self.ranges()[k];
        x.view((o, o), (s, s)).into_owned()
    }

    pub fn assemble(&self, blocks: &[CMat]) -> CMat {
        let mut out = CMat::zeros(self.n, self.n);
        for (&(o, s), b) in self.ranges().iter().zip(blocks) {
            out.view_mut((o, o), (s, s)).copy_from(b);
        }
        out
    }

    pub fn identity(&self) -> CMat {
        self.assemble(&self.blocks.iter().map(|&s| CMat::identity(s, s)).collect::<Vec<_>>())
    }

    /// Random member with the given per-block ranks.
    pub fn random_of_rank(&self, rng: &mut TrialRng, ranks: &[usize]) -> CMat {
        let blocks: Vec<CMat> = self
            .blocks
            .iter()
            .zip(ranks)
            .map(|(&s, &r)| rng.complex_gaussian(s, r) * rng.complex_gaussian(r, s))
            .collect();
        self.assemble(&blocks)
    }

    pub fn random_member(&self, rng: &mut TrialRng) -> CMat {
        let blocks: Vec<CMat> = self.blocks.iter().map(|&s| rng.complex_gaussian(s, s)).collect();
        self.assemble(&blocks)
    }

    /// Random member `W diag(σ) V*` per block with `σ` log-spaced down to `1/cond`.
    pub fn random_conditioned(&self, rng: &mut TrialRng, cond: f64) -> CMat {
        let blocks: Vec<CMat> = self
            .blocks
            .iter()
            .map(|&s| {
                let sig = CMat::from_fn(s, s, |i, j| {
                    if i == j && s > 1 {
                        c(cond.powf(-(i as f64) / (s - 1) as f64), 0.0)
                    } else if i == j {
                        c(1.0, 0.0)
                    } else {
                        c(0.0, 0.0)
                    }
                });
                rng.unitary(s) * sig * rng.unitary(s)
            })
            .collect();
        self.assemble(&blocks)
    }
}

/// A member with its polar data `x = u|x|`.
#[derive(Clone, Debug)]
pub struct OperatorElement {
    pub x: CMat,
    pub u: CMat,
    pub modulus: CMat,
    /// `s(x) = u*u`.
    pub p: CMat,
    /// `t(x) = uu*`.
    pub q: CMat,
    pub block_ranks: Vec<usize>,
    /// Singular-value cut used for the rank decision.
    pub cutoff: f64,
    modulus_pinv: CMat,
}

struct BlockPolar {
    u: CMat,
    modulus: CMat,
    pinv: CMat,
    rank: usize,
}

fn block_polar(x: &CMat, cut: f64) -> BlockPolar {
    let s = x.nrows();
    let (w, sigma, v) = csvd(x);
    let mut u = CMat::zeros(s, s);
    let mut modulus = CMat::zeros(s, s);
    let mut pinv = CMat::zeros(s, s);
    let mut rank = 0;
    for (k, &sig) in sigma.iter().enumerate() {
        let (wk, vk) = (w.column(k), v.column(k));
        modulus += vk * vk.adjoint() * c(sig, 0.0);
        if sig > cut {
            rank += 1;
            u += wk * vk.adjoint();
            pinv += vk * vk.adjoint() * c(1.0 / sig, 0.0);
        }
    }
    BlockPolar { u, modulus, pinv, rank }
}

/// Polar decomposition through per-block SVD. Singular values at or below
/// `n·σ_max·1e-12` count as kernel.
pub fn polar_decompose(spec: &StarAlgebraSpec, x: &CMat, tol: f64) -> Result<OperatorElement> {
    let smax = csingular_values(x).into_iter().fold(0.0, f64::max);
    polar_decompose_with_cutoff(spec, x, tol, spec.n as f64 * smax * RANK_EPS)
}

/// Polar decomposition with an explicit singular-value cut. A cut of zero
/// keeps rounding-level directions in the initial domain.
pub fn polar_decompose_with_cutoff(spec: &StarAlgebraSpec, x: &CMat, tol: f64, cutoff: f64) -> Result<OperatorElement> {
    spec.check_member(x, tol)?;
    let parts: Vec<BlockPolar> = (0..spec.blocks.len()).map(|k| block_polar(&spec.block(x, k), cutoff)).collect();
    let u = spec.assemble(&parts.iter().map(|b| b.u.clone()).collect::<Vec<_>>());
    let modulus = spec.assemble(&parts.iter().map(|b| b.modulus.clone()).collect::<Vec<_>>());
    let modulus_pinv = spec.assemble(&parts.iter().map(|b| b.pinv.clone()).collect::<Vec<_>>());
    let p = u.adjoint() * &u;
    let q = &u * u.adjoint();
    Ok(OperatorElement { x: x.clone(), u, modulus, p, q, block_ranks: parts.iter().map(|b| b.rank).collect(), cutoff, modulus_pinv })
}

impl OperatorElement {
    /// `|x - u|x|| / (1 + |x|)` in max-norm.
    pub fn reconstruction_residual(&self) -> f64 {
        relative(cmax_abs(&(&self.x - &self.u * &self.modulus)), cmax_abs(&self.x))
    }

    /// Worst of: `p`, `q` projections, `u` vanishing on `ker x`, `|x|` Hermitian.
    pub fn polar_residual(&self) -> f64 {
        let n = self.x.nrows();
        let kernel_leak = cmax_abs(&(&self.u * (CMat::identity(n, n) - &self.p)));
        self.reconstruction_residual()
            .max(projection_residual(&self.p))
            .max(projection_residual(&self.q))
            .max(kernel_leak)
            .max(relative(cmax_abs(&(&self.modulus - self.modulus.adjoint())), cmax_abs(&self.modulus)))
    }

    /// `|x|⁺u*`, the matrix of `i(x)`.
    pub fn inverse_matrix(&self) -> CMat {
        &self.modulus_pinv * self.u.adjoint()
    }

    pub fn is_partial_isometry(&self) -> f64 {
        let uu = self.x.adjoint() * &self.x;
        relative(cmax_abs(&(&uu * &uu - &uu)), cmax_abs(&uu))
    }
}

pub fn projection_residual(p: &CMat) -> f64 {
    let herm = cmax_abs(&(p - p.adjoint()));
    let idem = cmax_abs(&(p * p - p));
    herm.max(idem)
}

/// The unit at a projection.
pub fn op_unit(spec: &StarAlgebraSpec, p: &ProjectionElement, tol: f64) -> Result<OperatorElement> {
    polar_decompose(spec, &p.p, tol)
}

pub fn op_multiply(spec: &StarAlgebraSpec, x: &OperatorElement, y: &OperatorElement, tol: f64) -> Result<OperatorElement> {
    let residual = cmax_abs(&(&x.p - &y.q));
    if residual > tol {
        return Err(PglError::NotComposable { residual });
    }
    polar_decompose(spec, &(&x.x * &y.x), tol)
}

/// `i(x) = |x|⁺u*`; the zero element is its own inverse.
pub fn op_invert(spec: &StarAlgebraSpec, x: &OperatorElement, tol: f64) -> Result<OperatorElement> {
    polar_decompose(spec, &x.inverse_matrix(), tol)
}

/// A member projection.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionElement {
    pub p: CMat,
}

impl ProjectionElement {
    pub fn new(spec: &StarAlgebraSpec, p: CMat, tol: f64) -> Result<Self> {
        spec.check_member(&p, tol)?;
        let residual = projection_residual(&p);
        if residual > tol {
            return Err(PglError::NotProjection { residual });
        }
        Ok(Self { p })
    }

    /// Nearest projection: Hermitian part, eigenvalues rounded to 0 or 1
    /// per block. Returns the projection and the adjustment size.
    pub fn reproject(spec: &StarAlgebraSpec, m: &CMat, tol: f64) -> Result<(Self, f64)> {
        spec.check_member(m, tol)?;
        let h = (m + m.adjoint()) * c(0.5, 0.0);
        let blocks: Vec<CMat> = (0..spec.blocks.len())
            .map(|k| {
                let eig = SymmetricEigen::new(spec.block(&h, k));
                let s = eig.eigenvalues.len();
                let mut out = CMat::zeros(s, s);
                for (i, &lam) in eig.eigenvalues.iter().enumerate() {
                    if lam > 0.5 {
                        let v = eig.eigenvectors.column(i);
                        out += v * v.adjoint();
                    }
                }
                out
            })
            .collect();
        let p = spec.assemble(&blocks);
        let adjustment = cmax_abs(&(&p - m));
        Ok((Self { p }, adjustment))
    }

    pub fn block_ranks(&self, spec: &StarAlgebraSpec) -> Vec<usize> {
        (0..spec.blocks.len()).map(|k| spec.block(&self.p, k).trace().re.round().max(0.0) as usize).collect()
    }

    /// Orthonormal basis of the range of block `k`.
    fn range_basis(&self, spec: &StarAlgebraSpec, k: usize) -> CMat {
        let eig = SymmetricEigen::new(spec.block(&self.p, k));
        let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        let s = eig.eigenvalues.len();
        CMat::from_fn(s, keep.len(), |r, col| eig.eigenvectors[(r, keep[col])])
    }
}

#[derive(Clone, Debug)]
pub struct MvnWitness {
    pub equivalent: bool,
    /// `u` with `uu* = p` and `u*u = q` when equivalent.
    pub witness: Option<CMat>,
    pub witness_residual: f64,
}

/// Murray–von Neumann equivalence: equal per-block ranks, witnessed by a
/// partial isometry between the ranges.
pub fn mvn_equivalent(spec: &StarAlgebraSpec, p: &ProjectionElement, q: &ProjectionElement) -> MvnWitness {
    if p.block_ranks(spec) != q.block_ranks(spec) {
        return MvnWitness { equivalent: false, witness: None, witness_residual: 0.0 };
    }
    let blocks: Vec<CMat> = (0..spec.blocks.len())
        .map(|k| p.range_basis(spec, k) * q.range_basis(spec, k).adjoint())
        .collect();
    let u = spec.assemble(&blocks);
    let residual = cmax_abs(&(&u * u.adjoint() - &p.p)).max(cmax_abs(&(u.adjoint() * &u - &q.p)));
    MvnWitness { equivalent: true, witness: Some(u), witness_residual: residual }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitClass {
    pub block_ranks: Vec<usize>,
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitPartition {
    pub classes: Vec<OrbitClass>,
    /// Worst witness residual inside classes.
    pub within_residual: f64,
    /// Pairs inside a class that failed to be equivalent, plus pairs across
    /// classes that were.
    pub violations: usize,
}

/// Groups samples by the class of `s(x)` and audits the pairwise relation
/// on both `s` and `t` projections.
pub fn orbit_partition(spec: &StarAlgebraSpec, samples: &[OperatorElement]) -> OrbitPartition {
    let proj = |m: &CMat| ProjectionElement { p: m.clone() };
    let mut classes: Vec<OrbitClass> = Vec::new();
    for (i, x) in samples.iter().enumerate() {
        let ranks = proj(&x.p).block_ranks(spec);
        match classes.iter_mut().find(|c| c.block_ranks == ranks) {
            Some(cl) => cl.members.push(i),
            None => classes.push(OrbitClass { block_ranks: ranks, members: vec![i] }),
        }
    }
    let mut within: f64 = 0.0;
    let mut violations = 0;
    let class_of = |i: usize| classes.iter().position(|c| c.members.contains(&i)).expect("every sample is classified");
    for i in 0..samples.len() {
        for j in 0..samples.len() {
            let same = class_of(i) == class_of(j);
            for (a, b) in [(&samples[i].p, &samples[j].p), (&samples[i].q, &samples[j].q), (&samples[i].p, &samples[j].q)] {
                let w = mvn_equivalent(spec, &proj(a), &proj(b));
                if w.equivalent != same {
                    violations += 1;
                }
                within = within.max(w.witness_residual);
            }
        }
    }
    OrbitPartition { classes, within_residual: within, violations }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SchattenIndex {
    P(f64),
    Inf,
}

pub fn schatten_norm(x: &CMat, index: SchattenIndex) -> Result<f64> {
    let s = csingular_values(x);
    match index {
        SchattenIndex::Inf => Ok(s.iter().cloned().fold(0.0, f64::max)),
        SchattenIndex::P(p) if p >= 1.0 => Ok(s.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)),
        SchattenIndex::P(p) => Err(PglError::InvalidSchattenIndex(p)),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormChain {
    /// `‖x‖_∞, ‖x‖_q, ‖x‖_2, ‖x‖_p, ‖x‖_1`, which should be nondecreasing.
    pub norms: [f64; 5],
    pub trace_abs: f64,
    /// Largest violation of the chain and of `|Tr x| ≤ ‖x‖_1`, relative.
    pub violation: f64,
}

/// Audit `‖x‖_∞ ≤ ‖x‖_q ≤ ‖x‖_2 ≤ ‖x‖_p ≤ ‖x‖_1` for `1 < p < 2 < q`.
pub fn norm_chain_report(x: &CMat, p: f64, q: f64) -> Result<NormChain> {
    if !(p > 1.0 && p < 2.0 && q > 2.0) {
        return Err(PglError::InvalidSchattenIndex(if p > 1.0 && p < 2.0 { q } else { p }));
    }
    let norms = [
        schatten_norm(x, SchattenIndex::Inf)?,
        schatten_norm(x, SchattenIndex::P(q))?,
        schatten_norm(x, SchattenIndex::P(2.0))?,
        schatten_norm(x, SchattenIndex::P(p))?,
        schatten_norm(x, SchattenIndex::P(1.0))?,
    ];
    let trace_abs = x.trace().norm();
    let scale = norms[4];
    let mut violation: f64 = relative((trace_abs - norms[4]).max(0.0), scale);
    for w in norms.windows(2) {
        violation = violation.max(relative((w[0] - w[1]).max(0.0), scale));
    }
    Ok(NormChain { norms, trace_abs, violation })
}

/// Residuals of the pair-groupoid check over `P₀ = s⁻¹(p₀)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairSubPoissonReport {
    /// Real dimension of `P₀`.
    pub real_dim: usize,
    /// Worst `|s(x) - p₀|` over sampled chart points.
    pub chart_residual: f64,
    /// Coisotropy residual of the multiplication graph.
    pub graph_coisotropic: f64,
    pub target_poisson: f64,
    pub source_anti_poisson: f64,
}

/// `T*P₀ ⇉` pair groupoid with anchor `(𝐏, -𝐏)` on `(T*P₀)²`. The graph
/// `{(a,b), (b,c), (a,c)}` must be coisotropic in `M × M × M⁻`, `t` Poisson
/// and `s` anti-Poisson.
pub fn pair_groupoid_subpoisson_check(
    spec: &StarAlgebraSpec,
    p0: &ProjectionElement,
    rng: &mut TrialRng,
    samples: usize,
    tol: f64,
) -> Result<PairSubPoissonReport> {
    pair_groupoid_subpoisson_check_signed(spec, p0, rng, samples, tol, Sign::Minus)
}

/// As [`pair_groupoid_subpoisson_check`] with an explicit sign on the third
/// factor of `M × M × M^±`; only `Sign::Minus` is correct.
pub fn pair_groupoid_subpoisson_check_signed(
    spec: &StarAlgebraSpec,
    p0: &ProjectionElement,
    rng: &mut TrialRng,
    samples: usize,
    tol: f64,
    third: Sign,
) -> Result<PairSubPoissonReport> {
    let residual = projection_residual(&p0.p);
    if residual > tol {
        return Err(PglError::NotProjection { residual });
    }
    spec.check_member(&p0.p, tol)?;
    let bases: Vec<CMat> = (0..spec.blocks.len()).map(|k| p0.range_basis(spec, k)).collect();
    let real_dim: usize = bases.iter().map(|q| 2 * q.nrows() * q.ncols()).sum();

    // chart x = ⊕ Y_k Q_k*: generic Y lands in s⁻¹(p₀)
    let mut chart_residual: f64 = 0.0;
    for _ in 0..samples {
        let blocks: Vec<CMat> = bases.iter().map(|q| rng.complex_gaussian(q.nrows(), q.ncols()) * q.adjoint()).collect();
        let el = polar_decompose(spec, &spec.assemble(&blocks), tol)?;
        chart_residual = chart_residual.max(cmax_abs(&(&el.p - &p0.p)));
    }
    if real_dim == 0 {
        return Ok(PairSubPoissonReport { chart_residual, ..Default::default() });
    }

    let base = LinearPoissonSpace::standard_symplectic(real_dim, tol);
    let d = 2 * real_dim;
    let pair = product_space(&base, &base, Sign::Minus);
    let triple = product_space(&product_space(&pair, &pair, Sign::Plus), &pair, third);
    let mut graph = RMat::zeros(6 * d, 3 * d);
    for (slot, which) in [0usize, 1, 1, 2, 0, 2].iter().enumerate() {
        for r in 0..d {
            graph[(slot * d + r, which * d + r)] = 1.0;
        }
    }
    let graph = Subspace::from_span(6 * d, &graph, tol)?;
    let cls = classify_subspace(&triple, &graph)?;
    let mut t = RMat::zeros(d, 2 * d);
    let mut s = RMat::zeros(d, 2 * d);
    for r in 0..d {
        t[(r, r)] = 1.0;
        s[(r, d + r)] = 1.0;
    }
    Ok(PairSubPoissonReport {
        real_dim,
        chart_residual,
        graph_coisotropic: cls.coisotropic_residual,
        target_poisson: is_poisson_morphism(&pair, &base, &t, false)?,
        source_anti_poisson: is_poisson_morphism(&pair, &base, &s, true)?,
    })
}

/// Instance file for operator samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSampleJson {
    pub algebra: StarAlgebraSpec,
    pub matrices: Vec<MatrixJson>,
}
