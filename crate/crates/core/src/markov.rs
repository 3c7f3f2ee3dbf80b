//! Selfadjoint Markov maps on `M_n`: Schur multipliers and unitary mixtures,
//! their validation, and the column/row decomposition on the complement of
//! the fixed space.
//!
//! The Markov checks use the normalized trace `tau = Tr / n`; everything
//! else in the crate uses `Tr`. For pairing identities the normalization
//! cancels, so only the tolerance scale depends on it.

use serde::Serialize;

use crate::decomp::{decompose, DecompOptions, DecompResult, Splitter};
use crate::error::{Error, Result};
use crate::matcore::{c, hermitian_eigen, trace_pairing, unit, Exponent, Mat};
use crate::superop::{unvec, vec_of, SuperOp};

const CHECK_TOL: f64 = 1e-10;
const MINUS_ONE_MARGIN: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub unital: bool,
    pub trace_preserving: bool,
    pub cp: bool,
    pub selfadjoint: bool,
    pub minus_one_free: bool,
}

impl Certificate {
    pub fn all(&self) -> bool {
        self.unital && self.trace_preserving && self.cp && self.selfadjoint && self.minus_one_free
    }

    fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (ok, name) in [
            (self.unital, "unital"),
            (self.trace_preserving, "trace preserving"),
            (self.cp, "completely positive"),
            (self.selfadjoint, "selfadjoint"),
            (self.minus_one_free, "-1 not in spectrum"),
        ] {
            if !ok {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct MarkovMap {
    pub op: SuperOp,
    pub certificate: Certificate,
}

/// The Choi matrix `[T(e_ij)]_{i,j}`.
pub fn choi_matrix(t: &SuperOp) -> Mat {
    let n = t.dim();
    let mut ch = Mat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            ch.view_mut((i * n, j * n), (n, n)).copy_from(&t.apply(&unit(n, i, j)));
        }
    }
    ch
}

/// Tests each Markov property to `1e-10`, and `-1` against the `S^2`
/// spectrum with margin `1e-8`.
pub fn validate_markov(t: &SuperOp) -> Result<Certificate> {
    let n = t.dim();
    let id = Mat::identity(n, n);
    let unital = (t.apply(&id) - &id).norm() <= CHECK_TOL * (n as f64).sqrt();
    let mut trace_preserving = true;
    let mut selfadjoint = true;
    let images: Vec<Mat> = (0..n * n).map(|idx| t.apply(&unit(n, idx % n, idx / n))).collect();
    for (idx, img) in images.iter().enumerate() {
        let want = if idx % n == idx / n { 1.0 } else { 0.0 };
        trace_preserving &= (img.trace() - c(want)).norm() <= CHECK_TOL;
    }
    // tau(T(x) y) = tau(x T(y)) on the matrix units
    let tau = |a: &Mat, b: &Mat| trace_pairing(a, b).expect("same size") / c(n as f64);
    for (i, ti) in images.iter().enumerate() {
        let ei = unit(n, i % n, i / n);
        for (j, tj) in images.iter().enumerate() {
            let ej = unit(n, j % n, j / n);
            selfadjoint &= (tau(ti, &ej) - tau(&ei, tj)).norm() <= CHECK_TOL;
        }
    }
    let ch = choi_matrix(t);
    let herm = (&ch - ch.adjoint()).norm() <= CHECK_TOL * ch.norm().max(1.0);
    let cp = herm && {
        let (ev, _) = hermitian_eigen(&ch)?;
        ev[0] >= -CHECK_TOL * ev.last().map_or(1.0, |v| v.abs().max(1.0))
    };
    let minus_one_free = t.eigenvalues()?.iter().all(|z| (z + c(1.0)).norm() > MINUS_ONE_MARGIN);
    Ok(Certificate { unital, trace_preserving, cp, selfadjoint, minus_one_free })
}

/// `x -> m o x` for a real symmetric PSD `m` with unit diagonal.
pub fn schur_markov(m: Mat) -> Result<MarkovMap> {
    let n = crate::matcore::check_square(&m)?;
    let scale = m.norm().max(1.0);
    if m.iter().any(|z| z.im.abs() > CHECK_TOL * scale) {
        return Err(Error::Markov("symbol is not real".into()));
    }
    if (&m - m.transpose()).norm() > CHECK_TOL * scale {
        return Err(Error::Markov("symbol is not symmetric".into()));
    }
    if (0..n).any(|i| (m[(i, i)] - c(1.0)).norm() > CHECK_TOL) {
        return Err(Error::Markov("symbol diagonal is not 1".into()));
    }
    let (ev, _) = hermitian_eigen(&m)?;
    if ev[0] < -CHECK_TOL * scale {
        return Err(Error::Markov(format!("symbol is not positive semidefinite (eigenvalue {})", ev[0])));
    }
    let op = SuperOp::schur(m)?;
    let certificate = validate_markov(&op)?;
    Ok(MarkovMap { op, certificate })
}

/// `x -> sum_i w_i u_i x u_i^*`; the family must be closed under adjoints
/// (up to a phase) with matching weights.
pub fn unitary_mixture_markov(weights: Vec<f64>, unitaries: Vec<Mat>) -> Result<MarkovMap> {
    if weights.is_empty() || weights.len() != unitaries.len() {
        return Err(Error::Markov("need one weight per unitary".into()));
    }
    if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Markov("weights must be positive and sum to 1".into()));
    }
    let n = crate::matcore::check_square(&unitaries[0])?;
    for u in &unitaries {
        if crate::matcore::check_square(u)? != n {
            return Err(Error::DimensionMismatch { expected: n, found: u.nrows() });
        }
        if (u.adjoint() * u - Mat::identity(n, n)).norm() > CHECK_TOL * n as f64 {
            return Err(Error::Markov("a member is not unitary".into()));
        }
    }
    // u_j = phase * u_i^* means |Tr(u_j^* u_i^*)| = |Tr((u_i u_j)^*)| = n
    for (i, ui) in unitaries.iter().enumerate() {
        let closed = unitaries.iter().zip(&weights).any(|(uj, &wj)| {
            (wj - weights[i]).abs() <= 1e-12 && ((ui * uj).trace().norm() - n as f64).abs() <= CHECK_TOL * n as f64
        });
        if !closed {
            return Err(Error::Markov(format!("member {i} has no adjoint partner with equal weight")));
        }
    }
    let op = SuperOp::unitary_mixture(weights, unitaries)?;
    let certificate = validate_markov(&op)?;
    Ok(MarkovMap { op, certificate })
}

/// Output of [`markov_decomposition_demo`].
#[derive(Clone, Debug, Serialize)]
pub struct MarkovDemo {
    #[serde(flatten)]
    pub result: DecompResult,
    /// Dimension of the fixed space `ker(I - T)` that was split off.
    pub fixed_dim: usize,
    /// Frobenius norm of the fixed-space component of `x`.
    pub fixed_part: f64,
}

/// Spectral projection onto `ker(I - T)` for a map whose `n^2 x n^2`
/// matrix is Hermitian (true for selfadjoint Markov maps).
pub fn fixed_space_projection(t: &SuperOp) -> Result<(Mat, usize)> {
    let m = t.as_matrix();
    let h = (&m + m.adjoint()) * c(0.5);
    let (ev, vecs) = hermitian_eigen(&h)?;
    let mut proj = Mat::zeros(m.nrows(), m.ncols());
    let mut dim = 0;
    for (k, &l) in ev.iter().enumerate() {
        if (l - 1.0).abs() < MINUS_ONE_MARGIN {
            let v = vecs.column(k);
            proj += v * v.adjoint();
            dim += 1;
        }
    }
    Ok((proj, dim))
}

/// Runs the decomposition for `T` restricted to the complement of its fixed
/// space: `T_0 = T - P_1` and `x_0 = x - P_1 x`, where `P_1` projects onto
/// `ker(I - T)`. The fixed space contains `I` and, for Schur maps with unit
/// diagonal, all diagonal matrices.
pub fn markov_decomposition_demo(
    map: &MarkovMap,
    p: Exponent,
    x: &Mat,
    splitter: Splitter,
    opts: &DecompOptions,
) -> Result<MarkovDemo> {
    if !map.certificate.all() {
        return Err(Error::Markov(format!("certificate fails: {}", map.certificate.failures().join(", "))));
    }
    if !(p.value() > 1.0 && p.value() < 2.0) {
        return Err(Error::InvalidExponent(p.value()));
    }
    let n = map.op.dim();
    let (proj, fixed_dim) = fixed_space_projection(&map.op)?;
    if fixed_dim == n * n {
        return Err(Error::Markov("the map is the identity: its fixed space is all of M_n".into()));
    }
    let t0 = SuperOp::explicit(map.op.as_matrix() - &proj)?;
    let fixed = unvec(&(&proj * vec_of(x)), n);
    let x0 = x - &fixed;
    let result = decompose(&t0, &x0, p, splitter, opts)?;
    Ok(MarkovDemo { result, fixed_dim, fixed_part: fixed.norm() })
}

/// The Toeplitz symbol `m_ij = c^{|i - j|}`.
pub fn toeplitz_symbol(n: usize, ratio: f64) -> Mat {
    crate::matcore::from_real(n, n, |i, j| ratio.powi((i as i32 - j as i32).abs()))
}
