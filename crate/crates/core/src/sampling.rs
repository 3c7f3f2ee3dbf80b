//! Deterministic random inputs.
//!
//! Every randomized routine takes an explicit seed. Trial `i` of a run draws
//! from its own ChaCha stream `(seed, i)`, so results do not depend on how
//! trials are scheduled across threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matcore::{Mat, C64};

/// The independent random stream for task `index` of a run seeded by `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A standard complex Gaussian scalar (real and imaginary parts N(0, 1/2)).
pub fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// An `n x n` matrix with i.i.d. standard complex Gaussian entries.
pub fn gaussian_mat<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    DMatrix::from_fn(n, n, |_, _| gaussian_c64(rng))
}

/// A rectangular complex Gaussian matrix.
pub fn gaussian_rect<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    DMatrix::from_fn(rows, cols, |_, _| gaussian_c64(rng))
}

/// A Gaussian matrix rescaled to unit Frobenius norm.
pub fn unit_mat<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    let x = gaussian_mat(rng, n);
    let nrm = x.norm();
    x / C64::from(nrm)
}

/// A Haar-ish random unitary: the Q factor of a Gaussian matrix with the
/// phases of R's diagonal folded back in.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    let g = gaussian_mat(rng, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// A random rank-one matrix `xi * eta^*` with unit vectors.
pub fn rank_one<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    let xi = gaussian_rect(rng, n, 1);
    let eta = gaussian_rect(rng, n, 1);
    let xi = &xi / C64::from(xi.norm());
    let eta = &eta / C64::from(eta.norm());
    &xi * eta.adjoint()
}

/// A random real vector with entries uniform in `[lo, hi)`.
pub fn uniform_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}
