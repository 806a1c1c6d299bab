//! Seeded random streams.
//!
//! Every trial draws from ChaCha8 (a counter-based generator) keyed by the
//! run seed, with the stream id derived from a per-suite salt and the trial
//! index. Results therefore do not depend on scheduling order.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMat, RMat, RVec};

pub struct TrialRng(ChaCha8Rng);

impl TrialRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Independent substream for `(seed, salt, trial)`.
    pub fn for_trial(seed: u64, salt: u32, trial: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((salt as u64) << 32) | (trial as u64 & 0xffff_ffff));
        Self(rng)
    }

    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.0.random_range(lo..hi)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn coin(&mut self) -> bool {
        self.0.random::<bool>()
    }

    pub fn gaussian_vec(&mut self, n: usize) -> RVec {
        RVec::from_fn(n, |_, _| self.normal())
    }

    pub fn gaussian(&mut self, rows: usize, cols: usize) -> RMat {
        RMat::from_fn(rows, cols, |_, _| self.normal())
    }

    pub fn complex_gaussian(&mut self, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            Complex::new(self.normal(), self.normal()) / std::f64::consts::SQRT_2
        })
    }

    pub fn skew(&mut self, n: usize) -> RMat {
        let a = self.gaussian(n, n);
        (&a - a.transpose()) * 0.5
    }

    /// Haar-distributed unitary: QR of a complex Gaussian matrix with the
    /// triangular factor normalized to a positive real diagonal.
    pub fn unitary(&mut self, n: usize) -> CMat {
        let z = self.complex_gaussian(n, n);
        let qr = z.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            let d = r[(j, j)];
            let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex::new(1.0, 0.0) };
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
        q
    }

    /// Real orthogonal matrix by the same QR normalization.
    pub fn orthogonal(&mut self, n: usize) -> RMat {
        let z = self.gaussian(n, n);
        let qr = z.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                for i in 0..n {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        q
    }
}
