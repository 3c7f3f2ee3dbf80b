//! Linear maps on `M_n` ("superoperators").
//!
//! Matrices are vectorized column-major: entry `(i, j)` of `x` sits at index
//! `i + n j` of `vec(x)`, so `vec(a x b) = (b^T (x) a) vec(x)`.
//!
//! Two adjoints appear. [`SuperOp::adjoint`] is the trace-duality adjoint,
//! `Tr(T(x) y) = Tr(x T*(y))`, which is what acts on `S^{p*}` when `T` acts
//! on `S^p`. [`SuperOp::hs_adjoint`] is the Hilbert-Schmidt adjoint, used for
//! gradients and selfadjointness checks on `S^2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{
    self, c, check_square, op_norm2, schatten_norm, Exponent, Mat, MatFn, C64,
};
use crate::sampling::{gaussian_mat, random_unitary, rank_one, substream};

#[derive(Clone, Debug)]
pub enum SuperOpKind {
    Identity,
    /// `x -> a x`
    LeftMult(Mat),
    /// `x -> x a`
    RightMult(Mat),
    /// `x -> m o x` (entrywise product)
    Schur(Mat),
    /// `x -> sum_i w_i u_i x u_i^*`
    UnitaryMixture { weights: Vec<f64>, unitaries: Vec<Mat> },
    /// An arbitrary `n^2 x n^2` matrix acting on `vec(x)`.
    Explicit(Mat),
}

#[derive(Clone, Debug)]
pub struct SuperOp {
    kind: SuperOpKind,
    dim: usize,
}

/// Two-sided bound on an operator norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
}

impl NormBracket {
    pub fn exact(v: f64) -> Self {
        NormBracket { lower: v, upper: v }
    }

    pub fn is_exact(&self) -> bool {
        self.upper - self.lower <= 1e-12 * self.upper.abs().max(1e-300)
    }
}

/// Sampling budget for operator-norm lower bounds.
#[derive(Clone, Copy, Debug)]
pub struct NormOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions { samples: 24, seed: 0x5eed }
    }
}

pub fn vec_of(x: &Mat) -> Mat {
    Mat::from_iterator(x.len(), 1, x.iter().copied())
}

pub fn unvec<R, C, S>(v: &nalgebra::Matrix<C64, R, C, S>, n: usize) -> Mat
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::RawStorage<C64, R, C>,
{
    Mat::from_iterator(n, n, v.iter().copied())
}

fn entrywise_poly(m: &Mat, coeffs: &[C64]) -> Mat {
    m.map(|z| horner(coeffs, z))
}

/// `sum_j coeffs[j] z^j`.
pub fn horner(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(c(0.0), |acc, &a| acc * z + a)
}

fn matrix_poly(a: &Mat, coeffs: &[C64]) -> Mat {
    let n = a.nrows();
    let mut acc = Mat::zeros(n, n);
    for &cj in coeffs.iter().rev() {
        acc = &acc * a;
        for i in 0..n {
            acc[(i, i)] += cj;
        }
    }
    acc
}

impl SuperOp {
    pub fn identity(n: usize) -> Self {
        SuperOp { kind: SuperOpKind::Identity, dim: n }
    }

    pub fn left_mult(a: Mat) -> Result<Self> {
        let n = check_square(&a)?;
        Ok(SuperOp { kind: SuperOpKind::LeftMult(a), dim: n })
    }

    pub fn right_mult(a: Mat) -> Result<Self> {
        let n = check_square(&a)?;
        Ok(SuperOp { kind: SuperOpKind::RightMult(a), dim: n })
    }

    pub fn schur(m: Mat) -> Result<Self> {
        let n = check_square(&m)?;
        Ok(SuperOp { kind: SuperOpKind::Schur(m), dim: n })
    }

    pub fn unitary_mixture(weights: Vec<f64>, unitaries: Vec<Mat>) -> Result<Self> {
        let first = unitaries
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty unitary mixture".into()))?;
        let n = check_square(first)?;
        if weights.len() != unitaries.len() {
            return Err(Error::DimensionMismatch { expected: unitaries.len(), found: weights.len() });
        }
        for u in &unitaries {
            if check_square(u)? != n {
                return Err(Error::DimensionMismatch { expected: n, found: u.nrows() });
            }
        }
        Ok(SuperOp { kind: SuperOpKind::UnitaryMixture { weights, unitaries }, dim: n })
    }

    /// Wraps an `n^2 x n^2` matrix acting on column-major `vec(x)`.
    pub fn explicit(m: Mat) -> Result<Self> {
        let nn = check_square(&m)?;
        let n = (nn as f64).sqrt().round() as usize;
        if n * n != nn {
            return Err(Error::InvalidArgument(format!("{nn} is not a perfect square")));
        }
        Ok(SuperOp { kind: SuperOpKind::Explicit(m), dim: n })
    }

    pub fn zero(n: usize) -> Self {
        SuperOp { kind: SuperOpKind::Explicit(Mat::zeros(n * n, n * n)), dim: n }
    }

    pub fn kind(&self) -> &SuperOpKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Applies the map; panics if `x` is not `dim x dim`.
    pub fn apply(&self, x: &Mat) -> Mat {
        assert_eq!(x.shape(), (self.dim, self.dim), "SuperOp::apply dimension mismatch");
        match &self.kind {
            SuperOpKind::Identity => x.clone(),
            SuperOpKind::LeftMult(a) => a * x,
            SuperOpKind::RightMult(a) => x * a,
            SuperOpKind::Schur(m) => m.component_mul(x),
            SuperOpKind::UnitaryMixture { weights, unitaries } => {
                let mut out = Mat::zeros(self.dim, self.dim);
                for (w, u) in weights.iter().zip(unitaries) {
                    out += (u * x * u.adjoint()) * c(*w);
                }
                out
            }
            SuperOpKind::Explicit(m) => unvec(&(m * vec_of(x)), self.dim),
        }
    }

    pub fn try_apply(&self, x: &Mat) -> Result<Mat> {
        if x.shape() != (self.dim, self.dim) {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.nrows() });
        }
        matcore::check_finite(x)?;
        Ok(self.apply(x))
    }

    /// `T^k x`.
    pub fn apply_pow(&self, x: &Mat, k: usize) -> Mat {
        let mut y = x.clone();
        for _ in 0..k {
            y = self.apply(&y);
        }
        y
    }

    /// `phi(T) x` by Horner's rule, `phi = sum_j coeffs[j] z^j`.
    pub fn apply_poly(&self, coeffs: &[C64], x: &Mat) -> Mat {
        let mut acc = Mat::zeros(self.dim, self.dim);
        for &cj in coeffs.iter().rev() {
            acc = self.apply(&acc) + x * cj;
        }
        acc
    }

    /// The trace-duality adjoint: `Tr(T(x) y) = Tr(x T*(y))`.
    pub fn adjoint(&self) -> SuperOp {
        let kind = match &self.kind {
            SuperOpKind::Identity => SuperOpKind::Identity,
            SuperOpKind::LeftMult(a) => SuperOpKind::RightMult(a.clone()),
            SuperOpKind::RightMult(a) => SuperOpKind::LeftMult(a.clone()),
            SuperOpKind::Schur(m) => SuperOpKind::Schur(m.transpose()),
            SuperOpKind::UnitaryMixture { weights, unitaries } => SuperOpKind::UnitaryMixture {
                weights: weights.clone(),
                unitaries: unitaries.iter().map(|u| u.adjoint()).collect(),
            },
            SuperOpKind::Explicit(m) => {
                let k = commutation(self.dim);
                SuperOpKind::Explicit(&k * m.transpose() * &k)
            }
        };
        SuperOp { kind, dim: self.dim }
    }

    /// The Hilbert-Schmidt adjoint: `Tr(T(x)^* y) = Tr(x^* T^dag(y))`.
    pub fn hs_adjoint(&self) -> SuperOp {
        let kind = match &self.kind {
            SuperOpKind::Identity => SuperOpKind::Identity,
            SuperOpKind::LeftMult(a) => SuperOpKind::LeftMult(a.adjoint()),
            SuperOpKind::RightMult(a) => SuperOpKind::RightMult(a.adjoint()),
            SuperOpKind::Schur(m) => SuperOpKind::Schur(m.map(|z| z.conj())),
            SuperOpKind::UnitaryMixture { weights, unitaries } => SuperOpKind::UnitaryMixture {
                weights: weights.clone(),
                unitaries: unitaries.iter().map(|u| u.adjoint()).collect(),
            },
            SuperOpKind::Explicit(m) => SuperOpKind::Explicit(m.adjoint()),
        };
        SuperOp { kind, dim: self.dim }
    }

    /// The `n^2 x n^2` matrix of the map on column-major `vec(x)`.
    pub fn as_matrix(&self) -> Mat {
        let n = self.dim;
        let id = Mat::identity(n, n);
        match &self.kind {
            SuperOpKind::Identity => Mat::identity(n * n, n * n),
            SuperOpKind::LeftMult(a) => id.kronecker(a),
            SuperOpKind::RightMult(a) => a.transpose().kronecker(&id),
            SuperOpKind::Schur(m) => Mat::from_diagonal(&nalgebra::DVector::from_iterator(
                n * n,
                m.iter().copied(),
            )),
            SuperOpKind::UnitaryMixture { weights, unitaries } => {
                let mut out = Mat::zeros(n * n, n * n);
                for (w, u) in weights.iter().zip(unitaries) {
                    out += u.map(|z| z.conj()).kronecker(u) * c(*w);
                }
                out
            }
            SuperOpKind::Explicit(m) => m.clone(),
        }
    }

    pub fn to_explicit(&self) -> SuperOp {
        SuperOp { kind: SuperOpKind::Explicit(self.as_matrix()), dim: self.dim }
    }

    /// `phi(T)` for a polynomial `phi`, keeping the structured representation
    /// when there is one.
    pub fn poly(&self, coeffs: &[C64]) -> SuperOp {
        let n = self.dim;
        let kind = match &self.kind {
            SuperOpKind::Identity => {
                SuperOpKind::Schur(Mat::from_element(n, n, horner(coeffs, c(1.0))))
            }
            SuperOpKind::LeftMult(a) => SuperOpKind::LeftMult(matrix_poly(a, coeffs)),
            SuperOpKind::RightMult(a) => SuperOpKind::RightMult(matrix_poly(a, coeffs)),
            SuperOpKind::Schur(m) => SuperOpKind::Schur(entrywise_poly(m, coeffs)),
            _ => SuperOpKind::Explicit(matrix_poly(&self.as_matrix(), coeffs)),
        };
        SuperOp { kind, dim: n }
    }

    /// `rho T`.
    pub fn scaled(&self, rho: f64) -> SuperOp {
        self.poly(&[c(0.0), c(rho)])
    }

    /// `f(T)` for a primary matrix function `f`, computed on the smallest
    /// faithful representation (the multiplier `a`, the Schur symbol, or the
    /// full `n^2 x n^2` matrix).
    pub fn map_function(
        &self,
        f: impl Fn(C64) -> C64,
        cut: Option<&matcore::BranchCut>,
    ) -> Result<(SuperOp, bool)> {
        let n = self.dim;
        let check = |z: C64| -> Result<()> {
            match cut {
                Some(cut) if cut.distance(z) <= cut.clearance => Err(Error::BranchCut(z)),
                _ => Ok(()),
            }
        };
        let (kind, ill) = match &self.kind {
            SuperOpKind::Identity => {
                check(c(1.0))?;
                (SuperOpKind::Schur(Mat::from_element(n, n, f(c(1.0)))), false)
            }
            SuperOpKind::LeftMult(a) => {
                let MatFn { value, ill_conditioned } = matcore::primary_matrix_function(a, &f, cut)?;
                (SuperOpKind::LeftMult(value), ill_conditioned)
            }
            SuperOpKind::RightMult(a) => {
                let MatFn { value, ill_conditioned } = matcore::primary_matrix_function(a, &f, cut)?;
                (SuperOpKind::RightMult(value), ill_conditioned)
            }
            SuperOpKind::Schur(m) => {
                for z in m.iter() {
                    check(*z)?;
                }
                (SuperOpKind::Schur(m.map(&f)), false)
            }
            _ => {
                let MatFn { value, ill_conditioned } =
                    matcore::primary_matrix_function(&self.as_matrix(), &f, cut)?;
                (SuperOpKind::Explicit(value), ill_conditioned)
            }
        };
        Ok((SuperOp { kind, dim: n }, ill))
    }

    /// `T + s S` as an explicit (or structure-preserving, when both sides
    /// share a structure) map.
    pub fn add_scaled(&self, other: &SuperOp, s: C64) -> Result<SuperOp> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let kind = match (&self.kind, &other.kind) {
            (SuperOpKind::LeftMult(a), SuperOpKind::LeftMult(b)) => SuperOpKind::LeftMult(a + b * s),
            (SuperOpKind::RightMult(a), SuperOpKind::RightMult(b)) => {
                SuperOpKind::RightMult(a + b * s)
            }
            (SuperOpKind::Schur(a), SuperOpKind::Schur(b)) => SuperOpKind::Schur(a + b * s),
            _ => SuperOpKind::Explicit(self.as_matrix() + other.as_matrix() * s),
        };
        Ok(SuperOp { kind, dim: self.dim })
    }

    /// The composition `T S`, i.e. `x -> T(S(x))`.
    pub fn compose(&self, other: &SuperOp) -> Result<SuperOp> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let kind = match (&self.kind, &other.kind) {
            (SuperOpKind::Identity, k) | (k, SuperOpKind::Identity) => k.clone(),
            (SuperOpKind::LeftMult(a), SuperOpKind::LeftMult(b)) => SuperOpKind::LeftMult(a * b),
            (SuperOpKind::RightMult(a), SuperOpKind::RightMult(b)) => SuperOpKind::RightMult(b * a),
            (SuperOpKind::Schur(a), SuperOpKind::Schur(b)) => SuperOpKind::Schur(a.component_mul(b)),
            _ => SuperOpKind::Explicit(self.as_matrix() * other.as_matrix()),
        };
        Ok(SuperOp { kind, dim: self.dim })
    }

    /// The resolvent `R(lambda, T) = (lambda - T)^{-1}`.
    pub fn resolvent(&self, lambda: C64) -> Result<SuperOp> {
        let n = self.dim;
        let shifted_inverse = |a: &Mat| -> Result<Mat> {
            let mut m = -a;
            for i in 0..m.nrows() {
                m[(i, i)] += lambda;
            }
            m.try_inverse().ok_or(Error::Singular(lambda))
        };
        let recip = |z: C64| -> Result<C64> {
            let d = lambda - z;
            if d == c(0.0) {
                Err(Error::Singular(lambda))
            } else {
                Ok(d.inv())
            }
        };
        let kind = match &self.kind {
            SuperOpKind::Identity => SuperOpKind::Schur(Mat::from_element(n, n, recip(c(1.0))?)),
            SuperOpKind::LeftMult(a) => SuperOpKind::LeftMult(shifted_inverse(a)?),
            SuperOpKind::RightMult(a) => SuperOpKind::RightMult(shifted_inverse(a)?),
            SuperOpKind::Schur(m) => {
                let mut out = m.clone();
                for z in out.iter_mut() {
                    *z = recip(*z)?;
                }
                SuperOpKind::Schur(out)
            }
            _ => SuperOpKind::Explicit(shifted_inverse(&self.as_matrix())?),
        };
        Ok(SuperOp { kind, dim: n })
    }

    /// Spectrum of the map on `M_n` (with multiplicity, `n^2` values).
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let n = self.dim;
        match &self.kind {
            SuperOpKind::Identity => Ok(vec![c(1.0); n * n]),
            SuperOpKind::LeftMult(a) | SuperOpKind::RightMult(a) => {
                let ev = matcore::eigenvalues(a)?;
                Ok(ev.iter().flat_map(|&z| std::iter::repeat_n(z, n)).collect())
            }
            SuperOpKind::Schur(m) => Ok(m.iter().copied().collect()),
            _ => matcore::eigenvalues(&self.as_matrix()),
        }
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().fold(0.0, |m, z| m.max(z.norm())))
    }

    /// Bracket for the `S^p -> S^p` operator norm, `p >= 1`.
    ///
    /// Exact for multiplications, for `p = 2`, and for PSD Schur symbols;
    /// otherwise the lower end is the best sampled ratio and the upper end the
    /// smaller of the operator-Schmidt bound and its Riesz-Thorin
    /// interpolation against the exact `S^2` norm.
    pub fn op_norm(&self, p: Exponent, opts: &NormOptions) -> Result<NormBracket> {
        let (upper, exact) = self.norm_upper(p)?;
        if exact {
            return Ok(NormBracket::exact(upper));
        }
        let lower = self.sampled_norm(p, opts, &self.as_matrix())?.min(upper);
        Ok(NormBracket { lower, upper })
    }

    /// Upper end of [`SuperOp::op_norm`] without the sampling work.
    pub fn op_norm_upper(&self, p: Exponent) -> Result<f64> {
        Ok(self.norm_upper(p)?.0)
    }

    fn norm_upper(&self, p: Exponent) -> Result<(f64, bool)> {
        if p.value() < 1.0 {
            return Err(Error::InvalidExponent(p.value()));
        }
        match &self.kind {
            SuperOpKind::Identity => return Ok((1.0, true)),
            SuperOpKind::LeftMult(a) | SuperOpKind::RightMult(a) => return Ok((op_norm2(a)?, true)),
            _ => {}
        }
        let m = self.as_matrix();
        let norm2 = op_norm2(&m)?;
        let pv = p.value();
        if pv == 2.0 {
            return Ok((norm2, true));
        }
        let mut upper = schmidt_bound(&m, self.dim)?;
        if let SuperOpKind::Schur(sym) = &self.kind {
            if let Some(d) = psd_schur_bound(sym)? {
                return Ok((d, true));
            }
        }
        if let SuperOpKind::UnitaryMixture { weights, .. } = &self.kind {
            upper = upper.min(weights.iter().map(|w| w.abs()).sum());
        }
        // complex interpolation between S^2 and S^1 (p < 2) or S^inf (p > 2)
        let theta = if pv < 2.0 { 2.0 * (1.0 - 1.0 / pv) } else { 2.0 / pv };
        let rt = upper.powf(1.0 - theta) * norm2.powf(theta);
        Ok((upper.min(rt), false))
    }

    fn sampled_norm(&self, p: Exponent, opts: &NormOptions, m: &Mat) -> Result<f64> {
        let n = self.dim;
        let ratio = |x: &Mat| -> Result<f64> {
            let d = schatten_norm(x, p)?;
            if d == 0.0 {
                return Ok(0.0);
            }
            Ok(schatten_norm(&self.apply(x), p)? / d)
        };
        let mut best = ratio(&Mat::identity(n, n))?;
        // the S^2 maximizer
        let svd = m.clone().svd(false, true);
        if let Some(v_t) = svd.v_t {
            let (imax, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
            let top = v_t.row(imax).adjoint();
            best = best.max(ratio(&unvec(&top, n))?);
        }
        for t in 0..opts.samples {
            let mut rng = substream(opts.seed, t as u64);
            let x = match t % 3 {
                0 => gaussian_mat(&mut rng, n),
                1 => rank_one(&mut rng, n),
                _ => random_unitary(&mut rng, n),
            };
            best = best.max(ratio(&x)?);
        }
        Ok(best)
    }
}

/// The commutation matrix `K` with `K vec(x) = vec(x^T)`.
pub fn commutation(n: usize) -> Mat {
    let mut k = Mat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            k[(j + n * i, i + n * j)] = c(1.0);
        }
    }
    k
}

/// Operator-Schmidt bound: writing `T(x) = sum_s sigma_s A_s x B_s` from the
/// SVD of the realigned matrix gives `||T||_{p->p} <= sum_s sigma_s
/// ||A_s||_inf ||B_s||_inf` for every `p >= 1`.
pub fn schmidt_bound(m: &Mat, n: usize) -> Result<f64> {
    // M[(i + n j), (k + n l)] = sum_s sigma_s A_s[i,k] B_s[l,j]
    let mut r = Mat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    r[(i + n * k, l + n * j)] = m[(i + n * j, k + n * l)];
                }
            }
        }
    }
    let svd = r
        .try_svd(true, true, crate::matcore::EPS, crate::matcore::MAX_SWEEPS)
        .ok_or(Error::NoConvergence("singular value decomposition"))?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^*");
    let top = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut bound = 0.0;
    for (s, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= top * 1e-15 {
            continue;
        }
        let a = unvec(&u.column(s).into_owned(), n);
        let b = Mat::from_iterator(n, n, v_t.row(s).iter().copied());
        bound += sigma * op_norm2(&a)? * op_norm2(&b)?;
    }
    Ok(bound)
}

/// For a positive semidefinite symbol `m`, the Schur multiplier has norm
/// `max_i m_ii` on every `S^p`, `1 <= p <= inf`.
fn psd_schur_bound(m: &Mat) -> Result<Option<f64>> {
    let herm = (m - m.adjoint()).norm() <= 1e-12 * m.norm().max(1e-300);
    if !herm {
        return Ok(None);
    }
    let ev = matcore::hermitian_eigenvalues(m)?;
    let top = ev.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if ev.iter().any(|&v| v < -1e-12 * top.max(1.0)) {
        return Ok(None);
    }
    Ok(Some((0..m.nrows()).fold(0.0, |a, i| a.max(m[(i, i)].re))))
}
