pub mod cotangent_groupoid;
pub mod error;
pub mod instance;
pub mod io;
pub mod jet;
pub mod lie_algebra;
pub mod linalg;
pub mod linear_poisson;
pub mod operator_groupoid;
pub mod parallel;
pub mod poisson_jet;
pub mod poisson_lie;
pub mod report;
pub mod rng;
pub mod suites;
