//! Instance files: seeded generation and loading, tagged by `kind`.

use serde::{Deserialize, Serialize};

use crate::cotangent_groupoid::{GroupSpecJson, Membership, MatrixLieGroupSpec};
use crate::error::{PglError, Result};
use crate::io::MatrixJson;
use crate::lie_algebra::{presets, MatrixAlgebra, StructureConstants, StructureConstantsJson};
use crate::linalg::{c, CMat, RMat};
use crate::linear_poisson::{sample, PoissonSpaceJson, Subspace, SubspaceJson};
use crate::operator_groupoid::{OperatorSampleJson, StarAlgebraSpec};
use crate::rng::TrialRng;

pub const KINDS: [&str; 6] =
    ["subspace", "poisson-space", "group-spec", "algebra-spec", "operator-sample", "structure-constants"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Instance {
    Subspace(SubspaceJson),
    PoissonSpace(PoissonSpaceJson),
    GroupSpec(GroupSpecJson),
    AlgebraSpec(StarAlgebraSpec),
    OperatorSample(OperatorSampleJson),
    StructureConstants(StructureConstantsJson),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Subspace(_) => "subspace",
            Instance::PoissonSpace(_) => "poisson-space",
            Instance::GroupSpec(_) => "group-spec",
            Instance::AlgebraSpec(_) => "algebra-spec",
            Instance::OperatorSample(_) => "operator-sample",
            Instance::StructureConstants(_) => "structure-constants",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text).map_err(|e| PglError::MalformedInstance(e.to_string()))?;
        inst.validate(crate::linalg::DEFAULT_TOL)?;
        Ok(inst)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instances serialize");
        s.push('\n');
        s
    }

    /// Structural validation; numeric tolerances use `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let bad = |e: PglError| PglError::MalformedInstance(e.to_string());
        match self {
            Instance::Subspace(js) => Subspace::from_json(js).map(|_| ()).map_err(bad),
            Instance::PoissonSpace(js) => crate::linear_poisson::LinearPoissonSpace::from_json(js).map(|_| ()).map_err(bad),
            Instance::GroupSpec(js) => MatrixLieGroupSpec::from_json(js, tol).map(|_| ()).map_err(bad),
            Instance::AlgebraSpec(spec) => spec.validate().map_err(bad),
            Instance::OperatorSample(js) => {
                js.algebra.validate().map_err(bad)?;
                if js.matrices.is_empty() {
                    return Err(PglError::MalformedInstance("operator sample carries no matrices".into()));
                }
                for m in &js.matrices {
                    js.algebra.check_member(&m.to_complex()?, tol).map_err(bad)?;
                }
                Ok(())
            }
            Instance::StructureConstants(js) => StructureConstants::from_json(js, tol).map(|_| ()).map_err(bad),
        }
    }
}

fn dim_or(dims: &[usize], i: usize, default: usize) -> usize {
    dims.get(i).copied().unwrap_or(default)
}

fn positive(d: usize, what: &str) -> Result<usize> {
    if d == 0 {
        return Err(PglError::InvalidConfig(format!("{what} must be positive")));
    }
    Ok(d)
}

/// `so(3) ⊕ R^{d-3}` (abelian below 3) in a random well-conditioned basis.
fn random_constants(rng: &mut TrialRng, d: usize) -> Result<StructureConstants> {
    if d < 3 {
        return Ok(StructureConstants::abelian(d));
    }
    let n = d;
    let so3 = presets::so3();
    let mut basis: Vec<CMat> = so3
        .basis()
        .iter()
        .map(|b| {
            let mut m = CMat::zeros(n, n);
            m.view_mut((0, 0), (3, 3)).copy_from(b);
            m
        })
        .collect();
    for k in 3..d {
        let mut m = CMat::zeros(n, n);
        m[(k, k)] = c(0.0, 1.0);
        basis.push(m);
    }
    let alg = MatrixAlgebra::new(n, basis)?;
    let q = rng.orthogonal(d);
    let scale = RMat::from_fn(d, d, |i, j| if i == j { rng.uniform(0.5, 2.0) } else { 0.0 });
    let (sc, _) = alg.rebased(&(q * scale))?.structure_constants();
    Ok(sc)
}

/// Seeded instance of the given kind. Same inputs give the same value and
/// therefore byte-identical files.
pub fn gen_instance(kind: &str, dims: &[usize], seed: u64) -> Result<Instance> {
    let mut rng = TrialRng::new(seed);
    let tol = crate::linalg::DEFAULT_TOL;
    match kind {
        "subspace" => {
            let n = positive(dim_or(dims, 0, 4), "ambient dimension")?;
            let k = dim_or(dims, 1, n / 2).min(n);
            let span = rng.gaussian(n, k);
            Ok(Instance::Subspace(Subspace::from_span(n, &span, tol)?.to_json()))
        }
        "poisson-space" => {
            let n = positive(dim_or(dims, 0, 4), "dimension")?;
            let r = dim_or(dims, 1, n) / 2 * 2;
            Ok(Instance::PoissonSpace(sample::poisson_space(&mut rng, n, r.min(n / 2 * 2), tol).to_json()))
        }
        "group-spec" => {
            let n = positive(dim_or(dims, 0, 2), "matrix size")?;
            Ok(Instance::GroupSpec(GroupSpecJson {
                n,
                basis: presets::u(n).basis().iter().map(MatrixJson::from_complex).collect(),
                membership: Membership::Unitary,
            }))
        }
        "algebra-spec" => {
            let blocks: Vec<usize> = if dims.is_empty() { vec![2, 2] } else { dims.to_vec() };
            let n = blocks.iter().sum();
            Ok(Instance::AlgebraSpec(StarAlgebraSpec::new(n, blocks)?))
        }
        "operator-sample" => {
            let n = positive(dim_or(dims, 0, 4), "matrix size")?;
            let count = positive(dim_or(dims, 1, 1), "sample count")?;
            let algebra = StarAlgebraSpec::full(n);
            let matrices = (0..count).map(|_| MatrixJson::from_complex(&algebra.random_member(&mut rng))).collect();
            Ok(Instance::OperatorSample(OperatorSampleJson { algebra, matrices }))
        }
        "structure-constants" => {
            let d = dim_or(dims, 0, 3);
            Ok(Instance::StructureConstants(random_constants(&mut rng, d)?.to_json()))
        }
        other => Err(PglError::UnknownKind(other.into())),
    }
}
