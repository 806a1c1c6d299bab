//! Acceptance criteria 1 to 10. Prints one line per criterion and exits
//! nonzero if any fails.

use std::time::{Duration, Instant};

use pgl_core::linalg::RMat;
use pgl_core::linear_poisson::{perp_p, sample, Subspace};
use pgl_core::operator_groupoid::{polar_decompose, StarAlgebraSpec};
use pgl_core::poisson_lie::{random_b, UnitaryPoissonLie};
use pgl_core::report::SuiteReport;
use pgl_core::rng::TrialRng;
use pgl_core::suites::{run_suite, suite_names, SuiteConfig};

const SEED: u64 = 20_241;
const TOL: f64 = 1e-9;

struct Verdict {
    ok: bool,
    notes: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { ok: true, notes: Vec::new() }
    }

    /// Records `value <= bound`.
    fn le(&mut self, what: &str, value: f64, bound: f64) {
        let ok = value <= bound;
        self.ok &= ok;
        self.notes.push(format!("{what} {value:.1e}{}{bound:.0e}", if ok { "≤" } else { " > " }));
    }

    fn holds(&mut self, what: &str, ok: bool) {
        self.ok &= ok;
        if !ok {
            self.notes.push(format!("{what} violated"));
        }
    }
}

fn run(suite: &str, trials: usize, dims: &[usize]) -> SuiteReport {
    let cfg = SuiteConfig::new(suite).trials(trials).seed(SEED).dims(dims.to_vec()).tol(TOL);
    run_suite(&cfg).unwrap_or_else(|e| panic!("{suite}: {e}"))
}

fn residual(r: &SuiteReport, check: &str) -> f64 {
    r.per_check
        .iter()
        .find(|c| c.name == check)
        .unwrap_or_else(|| panic!("{} has no check {check}", r.suite))
        .residual
}

fn clean(v: &mut Verdict, r: &SuiteReport) {
    v.holds(&format!("{} clean run", r.suite), r.failures == 0);
}

/// Orthogonal projector onto the column span, by normal equations.
fn projector(b: &RMat) -> RMat {
    if b.ncols() == 0 {
        return RMat::zeros(b.nrows(), b.nrows());
    }
    let gram = (b.transpose() * b).try_inverse().expect("independent columns");
    b * gram * b.transpose()
}

fn criterion_1() -> Verdict {
    let mut v = Verdict::new();
    let r = run("linear-perp", 200, &[]);
    clean(&mut v, &r);
    v.le("suite double-perp", residual(&r, "double-perp"), 1e-9);
    // projector distance as a separate oracle
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let mut rng = TrialRng::for_trial(SEED, 900, trial);
        let n = 2 * (1 + rng.index(4));
        let s = sample::symplectic_space(&mut rng, n, TOL);
        let k = rng.index(n + 1);
        let f = Subspace::from_span(n, &rng.gaussian(n, k), TOL).unwrap();
        let back = perp_p(&s, &perp_p(&s, &f).unwrap()).unwrap();
        worst = worst.max((projector(f.basis()) - projector(back.basis())).amax());
    }
    v.le("projector distance", worst, 1e-9);
    v
}

fn criterion_2() -> Verdict {
    let mut v = Verdict::new();
    let r = run("linear-morphism", 100, &[]);
    clean(&mut v, &r);
    v.le("disagreements", residual(&r, "path-disagreement"), 0.0);
    v.le("accepted non-morphisms", residual(&r, "non-morphism-accepted"), 0.0);
    v.le("morphism residual", residual(&r, "morphism-residual"), TOL);
    v
}

fn criterion_3() -> Verdict {
    let mut v = Verdict::new();
    let r = run("linear-relations", 100, &[]);
    clean(&mut v, &r);
    v.le("composite", residual(&r, "composite-coisotropic"), TOL);
    v.le("apply", residual(&r, "apply-composition"), TOL);
    v
}

fn criterion_4() -> Verdict {
    let mut v = Verdict::new();
    let r = run("schouten-jacobi", 20, &[]);
    clean(&mut v, &r);
    v.le("disagreements", residual(&r, "verdict-disagreement"), 0.0);
    v.le("poisson schouten", residual(&r, "poisson-schouten"), 1e-9);
    v.le("poisson jacobi", residual(&r, "poisson-jacobi"), 1e-9);
    // zero shortfall means every non-Poisson residual reached 1e-3
    v.le("non-poisson shortfall below 1e-3", residual(&r, "non-poisson-separation"), 0.0);
    v
}

fn criterion_5() -> Verdict {
    let mut v = Verdict::new();
    let m = run("unitary-multiplicative", 100, &[3]);
    clean(&mut v, &m);
    v.le("multiplicativity", residual(&m, "multiplicativity"), 1e-9);
    let c = run("unitary-cocycle", 10, &[2]);
    clean(&mut v, &c);
    v.le("cocycle", residual(&c, "cocycle-basis"), 1e-8);
    v.le("derived jacobi", residual(&c, "derived-jacobi"), 1e-7);
    let plie = UnitaryPoissonLie::new(3, TOL);
    let mut rng = TrialRng::new(SEED);
    let e = pgl_core::linalg::CMat::identity(3, 3);
    let exact = (0..20).all(|_| {
        let (a1, a2) = (random_b(&mut rng, 3), random_b(&mut rng, 3));
        plie.lambda_r(&e, &a1, &a2).unwrap() == 0.0
    });
    v.holds("Λ_R(e) = 0 exactly", exact);
    v
}

fn criterion_6() -> Verdict {
    let mut v = Verdict::new();
    for suite in ["cotangent-axioms", "cotangent-symplectic"] {
        let r = run(suite, 100, &[]);
        clean(&mut v, &r);
        v.le(suite, r.max_residual, 1e-8);
    }
    v
}

fn criterion_7() -> Verdict {
    let mut v = Verdict::new();
    let k = run("kks", 50, &[]);
    clean(&mut v, &k);
    v.le("schouten", residual(&k, "schouten"), 1e-9);
    v.le("stabilizer closure", residual(&k, "stabilizer-closure"), 1e-8);
    let g = run("gl-orbits", 40, &[]);
    clean(&mut v, &g);
    v.le("two-expression", residual(&g, "two-expression"), 1e-9);
    v
}

fn criterion_8() -> Verdict {
    let mut v = Verdict::new();
    let p = run("polar", 200, &[]);
    clean(&mut v, &p);
    v.le("suite reconstruction", residual(&p, "reconstruction"), 1e-12);
    let spec = StarAlgebraSpec::full(4);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let mut rng = TrialRng::for_trial(SEED, 901, trial);
        let cond = 10f64.powf(8.0 * trial as f64 / 199.0);
        let x = spec.random_conditioned(&mut rng, cond);
        worst = worst.max(polar_decompose(&spec, &x, TOL).unwrap().reconstruction_residual());
    }
    v.le("reconstruction up to cond 1e8", worst, 1e-12);
    let a = run("vn-groupoid-axioms", 50, &[]);
    clean(&mut v, &a);
    let axioms = ["associativity", "source-target", "units", "inverses"].iter().map(|c| residual(&a, c)).fold(0.0, f64::max);
    v.le("axioms", axioms, 1e-9);
    let o = run("mvn-orbits", 10, &[]);
    clean(&mut v, &o);
    v.le("orbit mismatches", residual(&o, "class-mismatch"), 0.0);
    let s = run("schatten", 100, &[]);
    clean(&mut v, &s);
    v.le("schatten chain", residual(&s, "chain"), 1e-12);
    v
}

fn criterion_9() -> Verdict {
    let mut v = Verdict::new();
    let r = run("tower-stability", 50, &[2]);
    clean(&mut v, &r);
    v.le("level invariance", residual(&r, "level-invariance"), 1e-10);
    v
}

fn criterion_10() -> Verdict {
    let mut v = Verdict::new();
    for name in suite_names() {
        let cfg = SuiteConfig::new(name).trials(10).seed(SEED).tol(TOL).mutated(true);
        let r = run_suite(&cfg).unwrap();
        let caught = r.per_check.iter().any(|c| !c.pass && c.residual >= 1e-3);
        v.holds(&format!("{name} mutation caught"), caught);
    }
    if v.ok {
        v.notes.push(format!("{} mutations caught", suite_names().len()));
    }
    v
}

fn main() {
    // `cargo test` passes harness flags; a name filter skips the suite
    // unless it mentions acceptance.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let criteria: [(fn() -> Verdict, u64); 10] = [
        (criterion_1, 5),
        (criterion_2, 5),
        (criterion_3, 10),
        (criterion_4, 10),
        (criterion_5, 30),
        (criterion_6, 60),
        (criterion_7, 20),
        (criterion_8, 20),
        (criterion_9, 10),
        (criterion_10, 60),
    ];
    let mut failed = 0;
    for (i, (check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut v = check();
        let took = start.elapsed();
        let in_time = took < Duration::from_secs(*limit);
        if !in_time {
            v.notes.push(format!("over the {limit} s budget"));
        }
        let pass = v.ok && in_time;
        failed += usize::from(!pass);
        println!(
            "criterion {:>2}  {}  {:>7.2} s / {:>2} s  {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            limit,
            v.notes.join("; ")
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
