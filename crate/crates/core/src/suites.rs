//! Registered verification suites and the trial runner.
//!
//! A suite runs `trials` independent trials. Each trial draws from its own
//! substream keyed by `(seed, registry index, trial)` and records named
//! residuals, each against a pinned threshold. Reports keep the worst
//! residual per name, so the outcome does not depend on scheduling.
//!
//! Every suite has a corrupted variant (`mutate`) that must be caught.

use std::time::Instant;

use crate::cotangent_groupoid::{
    gl_orbit_form, kks_anchor, kks_anchor_matrix, kks_form, stabilizer_algebra, CotangentGroupoid, Membership,
    MatrixLieGroupSpec, Transport,
};
use crate::error::{PglError, Result};
use crate::instance::Instance;
use crate::lie_algebra::{presets, random_algebra, MatrixAlgebra, StructureConstants};
use crate::linalg::{c, cmax_abs, commutator, csingular_values, hstack, rank, relative, CMat, RMat, DEFAULT_TOL};
use crate::linear_poisson::{
    classify_subspace, is_poisson_morphism, leaf_form, perp_p, product_space, relation_apply, relation_compose,
    sample, LinearPoissonSpace, LinearRelation, Sign, Subspace,
};
use crate::operator_groupoid::{
    mvn_equivalent, norm_chain_report, orbit_partition, pair_groupoid_subpoisson_check_signed,
    polar_decompose, polar_decompose_with_cutoff, schatten_norm, OperatorElement, ProjectionElement,
    SchattenIndex, StarAlgebraSpec,
};
use crate::parallel::{map_trials, Execution};
use crate::poisson_jet::{
    bialgebroid_residual, bracket, dp_vector_field, field_scale, hamiltonian_homomorphism_residual,
    lie_derivative_of_lambda, lie_poisson_bivector, max_coordinate_jacobiator, max_coordinate_schouten,
    perturbed_lie_poisson, random_skew_quadratic, symmetrized_lie_poisson, BivectorField, ComponentField,
    OneFormField, Polynomial,
};
use crate::poisson_lie::{random_b, random_u, tower_bracket_with_fill, TowerField, UnitaryPoissonLie};
use crate::report::{merge, CheckReport, Observation, SuiteReport, SCHEMA_VERSION};
use crate::rng::TrialRng;

pub const DEFAULT_TRIALS: usize = 10;
const TRIAL_ERROR: &str = "trial-error";
const AUDIT_POINTS: usize = 4;

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub suite: String,
    pub trials: usize,
    pub seed: u64,
    pub dims: Vec<usize>,
    pub tol: f64,
    pub mutate: bool,
    pub execution: Execution,
    pub instance: Option<Instance>,
}

impl SuiteConfig {
    pub fn new(suite: &str) -> Self {
        Self {
            suite: suite.into(),
            trials: DEFAULT_TRIALS,
            seed: 0,
            dims: Vec::new(),
            tol: DEFAULT_TOL,
            mutate: false,
            execution: Execution::default(),
            instance: None,
        }
    }

    pub fn trials(mut self, n: usize) -> Self {
        self.trials = n;
        self
    }

    pub fn seed(mut self, s: u64) -> Self {
        self.seed = s;
        self
    }

    pub fn dims(mut self, d: Vec<usize>) -> Self {
        self.dims = d;
        self
    }

    pub fn tol(mut self, t: f64) -> Self {
        self.tol = t;
        self
    }

    pub fn mutated(mut self, m: bool) -> Self {
        self.mutate = m;
        self
    }

    pub fn execution(mut self, e: Execution) -> Self {
        self.execution = e;
        self
    }

    pub fn instance(mut self, i: Option<Instance>) -> Self {
        self.instance = i;
        self
    }
}

/// Public description of a registered suite.
#[derive(Clone, Copy, Debug)]
pub struct SuiteInfo {
    pub name: &'static str,
    pub module: &'static str,
    pub summary: &'static str,
    /// What `--dim` means for this suite.
    pub dims: &'static str,
    /// The corrupted variant run under `mutate`.
    pub mutation: &'static str,
    /// Instance kinds the suite accepts.
    pub instances: &'static [&'static str],
}

type TrialFn = fn(&Ctx, &mut TrialRng, &mut Checks) -> Result<()>;

struct Suite {
    info: SuiteInfo,
    run: TrialFn,
}

struct Ctx<'a> {
    tol: f64,
    dims: &'a [usize],
    mutate: bool,
    instance: Option<&'a Instance>,
    trial: usize,
}

impl Ctx<'_> {
    fn dim(&self, i: usize) -> Option<usize> {
        self.dims.get(i).copied()
    }
}

/// Observation sink for one trial.
struct Checks {
    tol: f64,
    out: Vec<Observation>,
}

impl Checks {
    /// Residual against the run tolerance.
    fn tol(&mut self, name: &str, r: f64) {
        self.out.push(Observation::new(name, r, self.tol));
    }

    fn at(&mut self, name: &str, r: f64, threshold: f64) {
        self.out.push(Observation::new(name, r, threshold));
    }

    /// A count that must be zero.
    fn count(&mut self, name: &str, n: usize) {
        self.out.push(Observation::new(name, n as f64, 0.0));
    }
}

macro_rules! suite {
    ($name:literal, $module:literal, $summary:literal, $dims:literal, $mutation:literal, [$($kind:literal),*], $run:expr) => {
        Suite {
            info: SuiteInfo {
                name: $name,
                module: $module,
                summary: $summary,
                dims: $dims,
                mutation: $mutation,
                instances: &[$($kind),*],
            },
            run: $run,
        }
    };
}

static REGISTRY: [Suite; 17] = [
    suite!("linear-perp", "linear_poisson", "double P-orthogonal, nested coisotropy, leaf form",
        "even dimension (default random in 2..8)", "anchor with a symmetric part added", ["subspace"], linear_perp),
    suite!("linear-morphism", "linear_poisson", "morphism residual against graph coisotropy",
        "source, target dimension (default 4, 4)", "target anchor with a symmetric part added", ["poisson-space"], linear_morphism),
    suite!("linear-relations", "linear_poisson", "composition and application of Poisson relations",
        "three even dimensions (default 4, 4, 4)", "second relation replaced by a random subspace", [], linear_relations),
    suite!("schouten-jacobi", "poisson_jet", "Schouten and Jacobi verdicts on Poisson and perturbed fields",
        "unused", "Lie-Poisson anchor symmetrized", ["structure-constants"], schouten_jacobi),
    suite!("bialgebroid", "poisson_jet", "bialgebroid identity and d_P against the Lie derivative",
        "unused", "Lie-Poisson anchor symmetrized", ["structure-constants"], bialgebroid),
    suite!("unitary-multiplicative", "poisson_lie", "multiplicativity of the bivector on U(n)",
        "n (default 3)", "re-projection onto b(n) skipped", [], unitary_multiplicative),
    suite!("unitary-cocycle", "poisson_lie", "algebra cocycle, derived bracket Jacobi, derivative audit",
        "n (default 2)", "re-projection onto b(n) skipped", [], unitary_cocycle),
    suite!("tower-stability", "poisson_lie", "bracket invariance along U(n) ⊂ U(n+1) ⊂ U(n+2)",
        "n (default 2)", "group padded with 0 instead of 1", [], tower_stability),
    suite!("cotangent-axioms", "cotangent_groupoid", "groupoid axioms and the target map",
        "n for U(n) (default SU(2) and U(2))", "coadjoint transport dropped", ["group-spec"], cotangent_axioms),
    suite!("cotangent-symplectic", "cotangent_groupoid", "multiplicative symplectic form, fibers, dual pair",
        "n for U(n) (default SU(2) and U(2))", "coadjoint transport dropped", ["group-spec"], cotangent_symplectic),
    suite!("kks", "cotangent_groupoid", "Lie-Poisson Schouten, stabilizers, KKS form",
        "unused", "Lie-Poisson anchor symmetrized", ["structure-constants", "group-spec"], kks),
    suite!("gl-orbits", "cotangent_groupoid", "orbit form identity on Jordan orbits of GL(n, C)",
        "n (default alternating 2, 3)", "g⁻¹ replaced by g", [], gl_orbits),
    suite!("polar", "operator_groupoid", "polar decomposition and rank detection",
        "block sizes (default [4])", "singular-value cut set to zero", ["algebra-spec", "operator-sample"], polar),
    suite!("vn-groupoid-axioms", "operator_groupoid", "groupoid axioms and partial isometries",
        "block sizes (default [2, 2])", "singular-value cut set to zero", ["algebra-spec"], vn_axioms),
    suite!("mvn-orbits", "operator_groupoid", "orbit partition against exhaustive rank enumeration",
        "block sizes (default cycles M4, M2+M2, M3, M2, M1)", "singular-value cut set to zero", ["algebra-spec"], mvn_orbits),
    suite!("schatten", "operator_groupoid", "Schatten norm chain, trace bound, closed forms",
        "block sizes (default [4])", "power sums reported without the 1/p root", ["algebra-spec", "operator-sample"], schatten),
    suite!("pair-subpoisson", "operator_groupoid", "pair groupoid over s⁻¹(p₀) is sub-Poisson",
        "block sizes (default [2])", "third factor not sign-flipped", ["algebra-spec"], pair_subpoisson),
];

pub fn list_suites() -> Vec<SuiteInfo> {
    REGISTRY.iter().map(|s| s.info).collect()
}

pub fn suite_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|s| s.info.name).collect()
}

fn run_one(index: usize, suite: &Suite, cfg: &SuiteConfig, instance: Option<&Instance>) -> Vec<CheckReport> {
    let per_trial = map_trials(cfg.execution, cfg.trials, |trial| {
        let ctx = Ctx { tol: cfg.tol, dims: &cfg.dims, mutate: cfg.mutate, instance, trial };
        let mut rng = TrialRng::for_trial(cfg.seed, index as u32, trial);
        let mut checks = Checks { tol: cfg.tol, out: Vec::new() };
        let outcome = (suite.run)(&ctx, &mut rng, &mut checks);
        let err = match outcome {
            Ok(()) => 0.0,
            Err(e) => e.residual().filter(|r| *r > 0.0).unwrap_or(1.0),
        };
        checks.out.push(Observation::new(TRIAL_ERROR, err, 0.0));
        checks.out
    });
    let mut merged = merge(per_trial.into_iter().flatten());
    // keep trial errors last regardless of when they first occurred
    if let Some(i) = merged.iter().position(|c| c.name == TRIAL_ERROR) {
        let e = merged.remove(i);
        merged.push(e);
    }
    merged
}

/// Runs one registered suite, or every suite for `all`.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    if cfg.trials == 0 {
        return Err(PglError::InvalidConfig("trials must be at least 1".into()));
    }
    if !(cfg.tol.is_finite() && cfg.tol > 0.0) {
        return Err(PglError::InvalidConfig(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    let start = Instant::now();
    let accepts = |s: &Suite| cfg.instance.as_ref().filter(|i| s.info.instances.contains(&i.kind()));
    let per_check = if cfg.suite == "all" {
        let mut out = Vec::new();
        for (i, s) in REGISTRY.iter().enumerate() {
            for mut c in run_one(i, s, cfg, accepts(s)) {
                c.name = format!("{}/{}", s.info.name, c.name);
                out.push(c);
            }
        }
        out
    } else {
        let (i, s) = REGISTRY
            .iter()
            .enumerate()
            .find(|(_, s)| s.info.name == cfg.suite)
            .ok_or_else(|| PglError::UnknownSuite(cfg.suite.clone()))?;
        if let Some(inst) = &cfg.instance {
            if accepts(s).is_none() {
                return Err(PglError::InvalidConfig(format!(
                    "suite `{}` does not take a `{}` instance (accepts: {})",
                    s.info.name,
                    inst.kind(),
                    if s.info.instances.is_empty() { "none".to_string() } else { s.info.instances.join(", ") }
                )));
            }
        }
        run_one(i, s, cfg, cfg.instance.as_ref())
    };
    let failures = SuiteReport::failures_of(&per_check);
    let max_residual = per_check.iter().map(|c| c.residual).fold(0.0, f64::max);
    Ok(SuiteReport {
        schema: SCHEMA_VERSION,
        suite: cfg.suite.clone(),
        seed: cfg.seed,
        trials: cfg.trials,
        dims: cfg.dims.clone(),
        tol: cfg.tol,
        mutated: cfg.mutate,
        failures,
        max_residual,
        per_check,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}

// ---------------------------------------------------------------------------
// shared helpers

fn random_symmetric(rng: &mut TrialRng, n: usize) -> RMat {
    let g = rng.gaussian(n, n);
    &g + g.transpose()
}

fn even(n: usize, what: &str) -> Result<usize> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(PglError::InvalidConfig(format!("{what} must be even and positive, got {n}")));
    }
    Ok(n)
}

fn point(rng: &mut TrialRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.normal()).collect()
}

fn mat_gap(a: &CMat, b: &CMat) -> f64 {
    relative(cmax_abs(&(a - b)), cmax_abs(a).max(cmax_abs(b)))
}

/// Structure constants from the instance, if it carries some.
fn instance_constants(ctx: &Ctx) -> Result<Option<StructureConstants>> {
    match ctx.instance {
        Some(Instance::StructureConstants(js)) => Ok(Some(StructureConstants::from_json(js, ctx.tol)?)),
        Some(Instance::GroupSpec(js)) => Ok(Some(MatrixLieGroupSpec::from_json(js, ctx.tol)?.constants().clone())),
        _ => Ok(None),
    }
}

fn poisson_field(c: &StructureConstants, mutate: bool) -> BivectorField {
    if mutate {
        symmetrized_lie_poisson(c)
    } else {
        lie_poisson_bivector(c)
    }
}

// ---------------------------------------------------------------------------
// linear_poisson

fn linear_perp(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let tol = ctx.tol;
    let given = match ctx.instance {
        Some(Instance::Subspace(js)) => Some(Subspace::from_json(js)?),
        _ => None,
    };
    let n = match (&given, ctx.dim(0)) {
        (Some(f), _) => f.ambient_dim(),
        (None, Some(d)) => d,
        (None, None) => 2 * (1 + rng.index(4)),
    };
    let n = even(n, "symplectic dimension")?;
    let mut s = sample::symplectic_space(rng, n, tol);
    if ctx.mutate {
        let anchor = s.anchor() + random_symmetric(rng, n);
        s = LinearPoissonSpace::from_parts_unchecked(s.flat().clone(), anchor, tol)?;
    }
    ch.tol("anchor-skewness", s.skewness_residual());

    let f = match given {
        Some(f) => f,
        None => {
            let k = rng.index(n + 1);
            Subspace::from_span(n, &rng.gaussian(n, k), tol)?
        }
    };
    let fp = perp_p(&s, &f)?;
    ch.tol("double-perp", perp_p(&s, &fp)?.distance(&f));
    ch.count("perp-dimension", usize::from(f.dim() + fp.dim() != n));

    let c1 = sample::coisotropic(rng, &s);
    ch.tol("coisotropic-sample", classify_subspace(&s, &c1)?.coisotropic_residual);
    let f2 = Subspace::from_span(n, &hstack(c1.basis(), &rng.gaussian(n, 1)), tol)?;
    ch.tol("nested-coisotropy", classify_subspace(&s, &f2)?.coisotropic_residual);

    // with full dual, ω(Pα, Pβ) = ⟨α, Pβ⟩ = αᵀPβ
    let (a, b) = (rng.gaussian_vec(n), rng.gaussian_vec(n));
    let leaf = leaf_form(&s, &(s.anchor() * &a), &(s.anchor() * &b))?;
    let direct = (a.transpose() * s.flat() * s.anchor() * &b)[(0, 0)];
    let scale = a.norm() * b.norm() * s.anchor().amax();
    ch.tol("leaf-form", relative((leaf.value - direct).abs(), scale));
    ch.tol("leaf-well-defined", leaf.well_defined_residual);
    Ok(())
}

fn linear_morphism(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let tol = ctx.tol;
    let s1 = match ctx.instance {
        Some(Instance::PoissonSpace(js)) => LinearPoissonSpace::from_json(js)?,
        _ => {
            let n1 = ctx.dim(0).unwrap_or(4);
            let r = 2 * rng.index(n1 / 2 + 1);
            sample::poisson_space(rng, n1, r, tol)
        }
    };
    let n1 = s1.dim();
    if s1.flat_dim() != n1 {
        return Err(PglError::InvalidConfig("linear-morphism needs a source space with full dual".into()));
    }
    let n2 = ctx.dim(1).unwrap_or(4);
    if n2 < 2 {
        return Err(PglError::InvalidConfig("linear-morphism needs a target dimension of at least 2".into()));
    }
    let phi = rng.gaussian(n2, n1);
    // φ P₁ φ* with φ* written in the source flat coordinates
    let b1_inv = s1.flat().clone().try_inverse().ok_or(PglError::DependentFlatBasis { rank: 0, rows: n1 })?;
    let pushed = &phi * s1.anchor() * (&phi * b1_inv).transpose();
    let pushed = (&pushed - pushed.transpose()) * 0.5;
    let morph = if ctx.mutate {
        LinearPoissonSpace::from_parts_unchecked(RMat::identity(n2, n2), pushed + random_symmetric(rng, n2), tol)?
    } else {
        LinearPoissonSpace::with_full_dual(pushed, tol)?
    };
    ch.tol("target-skewness", morph.skewness_residual());
    let r2 = 2 * (1 + rng.index(n2 / 2));
    let other = sample::poisson_space(rng, n2, r2, tol);

    let graph = LinearRelation::graph_of(&phi, tol).graph;
    let mut disagreements = 0;
    for (target, is_morphism) in [(&morph, true), (&other, false)] {
        let r = is_poisson_morphism(&s1, target, &phi, false)?;
        let g = classify_subspace(&product_space(&s1, target, Sign::Minus), &graph)?;
        disagreements += usize::from((r <= tol) != g.coisotropic);
        if is_morphism {
            ch.tol("morphism-residual", r);
            ch.tol("graph-coisotropy", g.coisotropic_residual);
        } else {
            ch.count("non-morphism-accepted", usize::from(r <= tol));
        }
    }
    ch.count("path-disagreement", disagreements);
    Ok(())
}

fn linear_relations(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let tol = ctx.tol;
    let dim = |i: usize| even(ctx.dim(i).unwrap_or(4), "relation dimension");
    let (n1, n2, n3) = (dim(0)?, dim(1)?, dim(2)?);
    let s1 = sample::symplectic_space(rng, n1, tol);
    let s2 = sample::symplectic_space(rng, n2, tol);
    let s3 = sample::symplectic_space(rng, n3, tol);
    let lag = rng.coin();
    let r = sample::poisson_relation(rng, &s1, &s2, lag);
    let q = if ctx.mutate {
        let k = (n2 + n3) / 2;
        LinearRelation::new(n2, n3, Subspace::from_span(n2 + n3, &rng.gaussian(n2 + n3, k), tol)?)?
    } else {
        let lag = rng.coin();
        sample::poisson_relation(rng, &s2, &s3, lag)
    };
    ch.tol("first-relation", classify_subspace(&product_space(&s1, &s2, Sign::Minus), &r.graph)?.coisotropic_residual);
    ch.tol("second-relation", classify_subspace(&product_space(&s2, &s3, Sign::Minus), &q.graph)?.coisotropic_residual);

    let comp = relation_compose(&r, &q)?;
    let cls = classify_subspace(&product_space(&s1, &s3, Sign::Minus), &comp.graph)?;
    ch.tol("composite-coisotropic", cls.coisotropic_residual);

    let c0 = sample::coisotropic(rng, &s1);
    let direct = relation_apply(&s1, &s3, &comp, &c0)?;
    let middle = relation_apply(&s1, &s2, &r, &c0)?;
    let stepwise = relation_apply(&s2, &s3, &q, &middle.image)?;
    ch.tol("image-coisotropic", direct.classification.coisotropic_residual);
    ch.tol("apply-composition", direct.image.distance(&stepwise.image));
    Ok(())
}

// ---------------------------------------------------------------------------
// poisson_jet

fn schouten_jacobi(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let tol = ctx.tol;
    let given = instance_constants(ctx)?;
    let poisson = ctx.trial.is_multiple_of(2);
    let sc = match given {
        Some(sc) => sc,
        None if poisson => random_algebra(rng).structure_constants().0,
        None => StructureConstants::so3(),
    };
    let d = sc.dim();
    let w = if poisson {
        poisson_field(&sc, ctx.mutate)
    } else {
        perturbed_lie_poisson(&sc, random_skew_quadratic(rng, d), false)
    };
    // verdicts take the worst of several audit points
    let (mut s, mut j) = (0.0f64, 0.0f64);
    for _ in 0..AUDIT_POINTS {
        let y = point(rng, d);
        let scale = field_scale(&w, &y);
        s = s.max(relative(max_coordinate_schouten(&w, &y, tol)?, scale));
        j = j.max(relative(max_coordinate_jacobiator(&w, &y, tol)?, scale));
    }
    let x = point(rng, d);
    ch.tol("skewness", w.skewness_residual(&x));
    ch.count("verdict-disagreement", usize::from((s <= tol) != (j <= tol)));

    let f = Polynomial::random(rng, d, 4, 3).field();
    let g = Polynomial::random(rng, d, 4, 3).field();
    let fg = bracket(&w, &f, &g, &x, tol)?;
    let gf = bracket(&w, &g, &f, &x, tol)?;
    ch.tol("antisymmetry", relative((fg + gf).abs(), fg.abs()));
    if poisson {
        ch.tol("poisson-schouten", s);
        ch.tol("poisson-jacobi", j);
        ch.tol("hamiltonian-homomorphism", hamiltonian_homomorphism_residual(&w, &f, &g, &x, tol)?);
    } else {
        // shortfall below the separation margin
        ch.at("non-poisson-separation", (1e-3 - s.min(j)).max(0.0), 0.0);
    }
    Ok(())
}

fn bialgebroid(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let tol = ctx.tol;
    let sc = match instance_constants(ctx)? {
        Some(sc) => sc,
        None => random_algebra(rng).structure_constants().0,
    };
    let d = sc.dim();
    let w = poisson_field(&sc, ctx.mutate);
    let xf = ComponentField::affine(rng.gaussian(d, d), rng.gaussian_vec(d));
    let yf = ComponentField::affine(rng.gaussian(d, d), rng.gaussian_vec(d));
    let a = OneFormField::Components(ComponentField::affine(rng.gaussian(d, d), rng.gaussian_vec(d)));
    let b = OneFormField::constant(rng.gaussian_vec(d).iter().cloned().collect());
    let x = point(rng, d);
    ch.tol("skewness", w.skewness_residual(&x));
    ch.tol("bialgebroid", bialgebroid_residual(&w, &xf, &yf, &a, &b, &x, tol)?);
    let dp = dp_vector_field(&w, &xf, &a, &b, &x, tol)?;
    let lie = lie_derivative_of_lambda(&w, &xf, &a, &b, &x)?;
    ch.tol("dp-lie-derivative", relative((dp + lie).abs(), dp.abs().max(lie.abs())));
    Ok(())
}

// ---------------------------------------------------------------------------
// poisson_lie

fn unitary_multiplicative(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let n = ctx.dim(0).unwrap_or(3);
    let plie = UnitaryPoissonLie::new(n, ctx.tol);
    let (g, h) = (rng.unitary(n), rng.unitary(n));
    let (a1, a2) = (random_b(rng, n), random_b(rng, n));
    let reproject = !ctx.mutate;
    ch.tol("multiplicativity", plie.multiplicativity_residual(&g, &h, &a1, &a2, reproject)?);
    let e = CMat::identity(n, n);
    ch.tol(
        "unit-factors",
        plie.multiplicativity_residual(&g, &e, &a1, &a2, reproject)?
            .max(plie.multiplicativity_residual(&e, &h, &a1, &a2, reproject)?),
    );
    ch.at("identity-value", plie.lambda_r(&e, &a1, &a2)?.abs(), 0.0);
    Ok(())
}

fn unitary_cocycle(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let n = ctx.dim(0).unwrap_or(2);
    let plie = UnitaryPoissonLie::new(n, ctx.tol);
    let reproject = !ctx.mutate;
    if ctx.trial == 0 {
        let (ub, bb) = (plie.u_basis(), plie.b_basis());
        let mut worst: f64 = 0.0;
        for x in ub {
            for y in ub {
                for a1 in bb {
                    for a2 in bb {
                        worst = worst.max(plie.cocycle_algebra_residual_with(x, y, a1, a2, reproject)?);
                    }
                }
            }
        }
        ch.at("cocycle-basis", worst, 1e-8);
    }
    let (x, y) = (random_u(rng, n), random_u(rng, n));
    let (a1, a2, a3) = (random_b(rng, n), random_b(rng, n), random_b(rng, n));
    ch.at("cocycle-random", plie.cocycle_algebra_residual_with(&x, &y, &a1, &a2, reproject)?, 1e-8);
    ch.at("derived-jacobi", plie.derived_jacobi_residual(&a1, &a2, &a3)?, 1e-7);
    let exact = UnitaryPoissonLie::te_lambda(&x, &a1, &a2);
    let fd = UnitaryPoissonLie::te_lambda_fd(&x, &a1, &a2, 1e-5);
    ch.at("derivative-audit", relative((exact - fd).abs(), exact.abs()), 1e-6);
    Ok(())
}

fn tower_stability(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let tol = ctx.tol;
    let n = ctx.dim(0).unwrap_or(2);
    let g = rng.unitary(n);
    let f = TowerField::re_trace(rng.complex_gaussian(n, n));
    let terms = (0..3)
        .map(|_| {
            let mut coord = || (rng.index(n), rng.index(n), rng.coin());
            (coord(), coord(), rng.normal())
        })
        .collect();
    let h = TowerField::quadratic(terms);
    let fill = if ctx.mutate { c(0.0, 0.0) } else { c(1.0, 0.0) };
    let base = tower_bracket_with_fill(&f, &h, &g, n, tol, fill)?;
    let mut worst: f64 = 0.0;
    for k in n + 1..=n + 2 {
        let v = tower_bracket_with_fill(&f, &h, &g, k, tol, fill)?;
        worst = worst.max(relative((v - base).abs(), base.abs()));
    }
    ch.at("level-invariance", worst, 1e-10);
    let constant = tower_bracket_with_fill(&TowerField::constant(rng.normal()), &h, &g, n + 1, tol, fill)?;
    ch.at("constant-bracket", constant.abs(), 0.0);
    Ok(())
}

// ---------------------------------------------------------------------------
// cotangent_groupoid

fn groups(ctx: &Ctx) -> Result<Vec<MatrixLieGroupSpec>> {
    let tol = ctx.tol;
    match (ctx.instance, ctx.dim(0)) {
        (Some(Instance::GroupSpec(js)), _) => Ok(vec![MatrixLieGroupSpec::from_json(js, tol)?]),
        (_, Some(n)) => Ok(vec![MatrixLieGroupSpec::new(&format!("u{n}"), presets::u(n), Membership::Unitary, tol)?]),
        _ => Ok(vec![MatrixLieGroupSpec::preset("su2", tol)?, MatrixLieGroupSpec::preset("u2", tol)?]),
    }
}

fn groupoid(ctx: &Ctx, spec: MatrixLieGroupSpec) -> CotangentGroupoid {
    let transport = if ctx.mutate { Transport::Dropped } else { Transport::Coadjoint };
    CotangentGroupoid::new(spec, ctx.tol).with_transport(transport)
}

fn cotangent_axioms(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    for spec in groups(ctx)? {
        let gp = groupoid(ctx, spec);
        let r = gp.axiom_residuals(rng)?;
        ch.tol("associativity", r.associativity);
        ch.tol("units", r.units);
        ch.tol("inverses", r.inverses);
        ch.tol("source-target", r.coherence);

        // ⟨t(g, ξ), y⟩ = ⟨ξ, g⁻¹ Y g⟩ for a random direction y
        let p = gp.random_point(rng);
        ch.tol("membership", gp.spec.membership_residual(&p.g));
        let alg = &gp.spec.algebra;
        let y = rng.gaussian_vec(alg.dim());
        let gi = p.g.clone().try_inverse().ok_or(PglError::NotMember { what: "invertible".into(), residual: 1.0 })?;
        let (conj, _) = alg.coords(&(&gi * alg.element(&y) * &p.g));
        let lhs = gp.target(&p).dot(&y);
        let rhs = p.xi.dot(&conj);
        ch.tol("transport-oracle", relative((lhs - rhs).abs(), p.xi.norm() * conj.norm()));
    }
    Ok(())
}

fn cotangent_symplectic(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    for spec in groups(ctx)? {
        let r = groupoid(ctx, spec).symplectic_residuals(rng)?;
        ch.at("multiplicativity", r.multiplicativity, 1e-8);
        ch.tol("fiber-orthogonality", r.fiber_orthogonality);
        ch.at("nondegeneracy", r.nondegeneracy, 0.0);
        ch.tol("unit-lagrangian", r.unit_lagrangian);
        ch.tol("zero-section-lagrangian", r.zero_section_lagrangian);
        ch.tol("dual-pair", r.dual_pair);
        ch.tol("unit-coisotropic", r.unit_coisotropic);
        ch.tol("source-momentum", r.source_momentum);
        ch.tol("target-momentum", r.target_momentum);
    }
    Ok(())
}

fn kks(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let tol = ctx.tol;
    let cases: Vec<(StructureConstants, Option<MatrixAlgebra>)> = match ctx.instance {
        Some(Instance::GroupSpec(js)) => {
            let spec = MatrixLieGroupSpec::from_json(js, tol)?;
            vec![(spec.constants().clone(), Some(spec.algebra))]
        }
        Some(Instance::StructureConstants(js)) => vec![(StructureConstants::from_json(js, tol)?, None)],
        _ => [presets::so3(), presets::u2(), presets::gl_real(2)]
            .into_iter()
            .map(|a| (a.structure_constants().0, Some(a)))
            .collect(),
    };
    for (sc, alg) in cases {
        let d = sc.dim();
        let w = poisson_field(&sc, ctx.mutate);
        let x = point(rng, d);
        ch.tol("skewness", w.skewness_residual(&x));
        ch.tol("schouten", relative(max_coordinate_schouten(&w, &x, tol)?, field_scale(&w, &x)));

        let xi = rng.gaussian_vec(d);
        let (stab, closure) = stabilizer_algebra(&sc, &xi, tol);
        ch.at("stabilizer-closure", closure, 1e-8);
        ch.count("stabilizer-rank", usize::from(stab.dim() + rank(&kks_anchor_matrix(&sc, &xi), 0.0) != d));
        if let Some(alg) = alg {
            let (u, v) = (rng.gaussian_vec(d), rng.gaussian_vec(d));
            let form = kks_form(&alg, &xi, &u, &v);
            let via_anchor = kks_anchor(&sc, &xi, &u).dot(&v);
            ch.tol("kks-form-anchor", relative((form - via_anchor).abs(), xi.norm() * u.norm() * v.norm()));
        }
    }
    Ok(())
}

/// Random Jordan matrix: blocks of random sizes, eigenvalues sometimes repeated.
fn random_jordan(rng: &mut TrialRng, n: usize) -> CMat {
    let mut j = CMat::zeros(n, n);
    let mut start = 0;
    let mut lambda = c(rng.normal(), rng.normal());
    while start < n {
        let size = 1 + rng.index(n - start);
        if rng.coin() {
            lambda = c(rng.normal(), rng.normal());
        }
        for i in start..start + size {
            j[(i, i)] = lambda;
            if i + 1 < start + size {
                j[(i, i + 1)] = c(1.0, 0.0);
            }
        }
        start += size;
    }
    j
}

fn gl_orbits(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let tol = ctx.tol;
    let n = ctx.dim(0).unwrap_or(2 + ctx.trial % 2);
    let diag = CMat::from_fn(n, n, |i, k| if i == k { c(rng.uniform(0.5, 2.0), 0.0) } else { c(0.0, 0.0) });
    let g = rng.unitary(n) * diag * rng.unitary(n);
    let gi = g.clone().try_inverse().ok_or(PglError::NotMember { what: "GL(n, C)".into(), residual: 1.0 })?;
    let a = &g * random_jordan(rng, n) * &gi;
    let mut tangent = || {
        let gd = &g * rng.complex_gaussian(n, n);
        let ad = commutator(&(&gd * &gi), &a);
        (gd, ad)
    };
    let (g1, a1) = tangent();
    let (g2, a2) = tangent();
    let v = gl_orbit_form(&a, &g, (&g1, &a1), (&g2, &a2), tol, ctx.mutate)?;
    let swapped = gl_orbit_form(&a, &g, (&g2, &a2), (&g1, &a1), tol, ctx.mutate)?;
    ch.tol("two-expression", v.identity_residual);
    ch.tol("antisymmetry", relative((v.value + swapped.value).norm(), v.value.norm()));
    let (v1, v2) = (&g1 * &gi, &g2 * &gi);
    let oracle = (&a * commutator(&v1, &v2)).trace();
    ch.tol("kks-oracle", relative((v.value - oracle).norm(), cmax_abs(&a) * cmax_abs(&v1) * cmax_abs(&v2)));
    Ok(())
}

// ---------------------------------------------------------------------------
// operator_groupoid

fn algebra(ctx: &Ctx, default: &[usize]) -> Result<StarAlgebraSpec> {
    match ctx.instance {
        Some(Instance::AlgebraSpec(spec)) => Ok(spec.clone()),
        Some(Instance::OperatorSample(js)) => Ok(js.algebra.clone()),
        _ => {
            let blocks = if ctx.dims.is_empty() { default.to_vec() } else { ctx.dims.to_vec() };
            StarAlgebraSpec::new(blocks.iter().sum(), blocks)
        }
    }
}

/// Polar decomposition with the configured singular-value cut.
fn polar_of(ctx: &Ctx, spec: &StarAlgebraSpec, x: &CMat) -> Result<OperatorElement> {
    if ctx.mutate {
        polar_decompose_with_cutoff(spec, x, ctx.tol, 0.0)
    } else {
        polar_decompose(spec, x, ctx.tol)
    }
}

fn sample_matrix(ctx: &Ctx) -> Result<Option<CMat>> {
    match ctx.instance {
        Some(Instance::OperatorSample(js)) => Ok(Some(js.matrices[ctx.trial % js.matrices.len()].to_complex()?)),
        _ => Ok(None),
    }
}

fn polar(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let spec = algebra(ctx, &[4])?;
    let (x, expected) = match sample_matrix(ctx)? {
        Some(x) => (x, None),
        None if ctx.trial.is_multiple_of(2) => {
            let ranks: Vec<usize> = spec.blocks.iter().map(|&s| rng.index(s)).collect();
            (spec.random_of_rank(rng, &ranks), Some(ranks))
        }
        None => {
            let cond = 10f64.powf(rng.uniform(0.0, 8.0));
            (spec.random_conditioned(rng, cond), Some(spec.blocks.clone()))
        }
    };
    let el = polar_of(ctx, &spec, &x)?;
    ch.at("reconstruction", el.reconstruction_residual(), 1e-12);
    ch.tol("polar-structure", el.polar_residual());
    if let Some(ranks) = expected {
        ch.count("rank", usize::from(el.block_ranks != ranks));
    }
    Ok(())
}

fn vn_axioms(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let tol = ctx.tol;
    let spec = algebra(ctx, &[2, 2])?;
    let polar = |m: &CMat| polar_of(ctx, &spec, m);
    let mul = |a: &OperatorElement, b: &OperatorElement| -> Result<OperatorElement> {
        let residual = cmax_abs(&(&a.p - &b.q));
        if residual > tol {
            return Err(PglError::NotComposable { residual });
        }
        polar(&(&a.x * &b.x))
    };

    let ranks: Vec<usize> = spec.blocks.iter().map(|&s| rng.index(s + 1)).collect();
    let x = polar(&spec.random_of_rank(rng, &ranks))?;
    ch.count("rank", usize::from(x.block_ranks != ranks));
    let y = polar(&(&x.p * spec.random_member(rng)))?;
    let z = polar(&(&y.p * spec.random_member(rng)))?;

    let xy = mul(&x, &y)?;
    let yz = mul(&y, &z)?;
    ch.tol("associativity", mat_gap(&mul(&xy, &z)?.x, &mul(&x, &yz)?.x));
    ch.tol("source-target", mat_gap(&xy.p, &y.p).max(mat_gap(&xy.q, &x.q)));

    let left = mul(&polar(&x.q)?, &x)?;
    let right = mul(&x, &polar(&x.p)?)?;
    ch.tol("units", mat_gap(&left.x, &x.x).max(mat_gap(&right.x, &x.x)));

    let inv = polar(&x.inverse_matrix())?;
    let inverses = mat_gap(&mul(&x, &inv)?.x, &x.q)
        .max(mat_gap(&mul(&inv, &x)?.x, &x.p))
        .max(mat_gap(&inv.p, &x.q))
        .max(mat_gap(&inv.q, &x.p));
    ch.tol("inverses", inverses);

    // partial isometries are closed under products and inverses
    let (u, v) = (polar(&x.u)?, polar(&y.u)?);
    let closure = mul(&u, &v)?.is_partial_isometry().max(polar(&u.inverse_matrix())?.is_partial_isometry());
    ch.at("isometry-closure", closure, 1e-10);

    if ctx.trial == 0 {
        let zero = polar(&CMat::zeros(spec.n, spec.n))?;
        let zi = polar(&zero.inverse_matrix())?;
        ch.at("zero-element", cmax_abs(&zero.p).max(cmax_abs(&zero.q)).max(cmax_abs(&zi.x)), 0.0);
    }
    Ok(())
}

fn rank_vectors(blocks: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &s in blocks {
        out = out.into_iter().flat_map(|v| (0..=s).map(move |r| [v.clone(), vec![r]].concat())).collect();
    }
    out
}

fn mvn_orbits(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let spec = match ctx.instance {
        Some(_) => algebra(ctx, &[])?,
        None if !ctx.dims.is_empty() => algebra(ctx, &[])?,
        None => {
            let cycle: [&[usize]; 5] = [&[4], &[2, 2], &[3], &[2], &[1]];
            let blocks = cycle[ctx.trial % cycle.len()].to_vec();
            StarAlgebraSpec::new(blocks.iter().sum(), blocks)?
        }
    };
    let classes = rank_vectors(&spec.blocks);
    let mut elements = Vec::new();
    let mut labels = Vec::new();
    for ranks in &classes {
        for _ in 0..2 {
            elements.push(polar_of(ctx, &spec, &spec.random_of_rank(rng, ranks))?);
            labels.push(ranks.clone());
        }
    }
    let part = orbit_partition(&spec, &elements);
    let mut mismatch = classes.len().abs_diff(part.classes.len());
    for cl in &part.classes {
        mismatch += cl.members.iter().filter(|&&i| labels[i] != cl.block_ranks).count();
    }
    ch.count("class-mismatch", mismatch);
    ch.count("violations", part.violations);
    ch.tol("witness", part.within_residual);

    // MvN between two independent projections of the same class
    let ranks = &classes[rng.index(classes.len())];
    let p = polar_of(ctx, &spec, &spec.random_of_rank(rng, ranks))?;
    let q = polar_of(ctx, &spec, &spec.random_of_rank(rng, ranks))?;
    let w = mvn_equivalent(&spec, &ProjectionElement { p: p.p }, &ProjectionElement { p: q.q });
    ch.count("same-rank-inequivalent", usize::from(!w.equivalent));
    ch.tol("witness-relations", w.witness_residual);
    Ok(())
}

fn schatten_of(x: &CMat, index: SchattenIndex, mutate: bool) -> Result<f64> {
    match (mutate, index) {
        (true, SchattenIndex::P(p)) => Ok(csingular_values(x).iter().map(|s| s.powf(p)).sum()),
        _ => schatten_norm(x, index),
    }
}

fn schatten(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let spec = algebra(ctx, &[4])?;
    let x = match sample_matrix(ctx)? {
        Some(x) => x,
        None => spec.random_member(rng),
    };
    let (p, q) = (rng.uniform(1.05, 1.95), rng.uniform(2.05, 8.0));
    let norm = |m: &CMat, i: SchattenIndex| schatten_of(m, i, ctx.mutate);
    let norms = [
        norm(&x, SchattenIndex::Inf)?,
        norm(&x, SchattenIndex::P(q))?,
        norm(&x, SchattenIndex::P(2.0))?,
        norm(&x, SchattenIndex::P(p))?,
        norm(&x, SchattenIndex::P(1.0))?,
    ];
    let scale = norms[4];
    let mut chain = relative((x.trace().norm() - norms[4]).max(0.0), scale);
    for w in norms.windows(2) {
        chain = chain.max(relative((w[0] - w[1]).max(0.0), scale));
    }
    ch.at("chain", chain, 1e-12);
    let frob = (&x * x.adjoint()).trace().re.sqrt();
    ch.at("frobenius", relative((norms[2] - frob).abs(), frob), 1e-12);
    let lib = norm_chain_report(&x, p, q)?;
    let agreement = lib.norms.iter().zip(&norms).map(|(a, b)| relative((a - b).abs(), a.abs())).fold(0.0, f64::max);
    ch.at("library-agreement", agreement, 1e-12);

    let n = spec.n;
    let id = CMat::identity(n, n);
    let expected = (n as f64).powf(1.0 / p);
    let identity = relative((norm(&id, SchattenIndex::P(p))? - expected).abs(), expected)
        .max((norm(&id, SchattenIndex::Inf)? - 1.0).abs());
    ch.at("identity", identity, 1e-12);

    let (v, w) = (rng.complex_gaussian(n, 1), rng.complex_gaussian(n, 1));
    let r1 = &v * w.adjoint();
    let sigma = v.norm() * w.norm();
    let mut rank_one: f64 = 0.0;
    for i in [SchattenIndex::P(1.0), SchattenIndex::P(p), SchattenIndex::P(2.0), SchattenIndex::P(q), SchattenIndex::Inf] {
        rank_one = rank_one.max(relative((norm(&r1, i)? - sigma).abs(), sigma));
    }
    ch.at("rank-one", rank_one, 1e-10);
    Ok(())
}

fn pair_subpoisson(ctx: &Ctx, rng: &mut TrialRng, ch: &mut Checks) -> Result<()> {
    let tol = ctx.tol;
    let spec = algebra(ctx, &[2])?;
    let ranks: Vec<usize> = match ctx.trial % 3 {
        0 => spec.blocks.clone(),
        1 => spec.blocks.iter().map(|&s| rng.index(s + 1)).collect(),
        _ => vec![0; spec.blocks.len()],
    };
    let p0 = polar_decompose(&spec, &spec.random_of_rank(rng, &ranks), tol)?.p;
    let p0 = ProjectionElement::new(&spec, p0, tol)?;
    let third = if ctx.mutate { Sign::Plus } else { Sign::Minus };
    let rep = pair_groupoid_subpoisson_check_signed(&spec, &p0, rng, 5, tol, third)?;
    let expected_dim: usize = spec.blocks.iter().zip(&ranks).map(|(s, r)| 2 * s * r).sum();
    ch.count("dimension", usize::from(rep.real_dim != expected_dim));
    ch.tol("chart", rep.chart_residual);
    ch.tol("graph-coisotropic", rep.graph_coisotropic);
    ch.tol("target-poisson", rep.target_poisson);
    ch.tol("source-anti-poisson", rep.source_anti_poisson);
    Ok(())
}
