//! Constructive column/row decomposition `x = x_1 + x_2`.
//!
//! With `w_k = k^{1/2} T^{k-1} (I - T) x` split as `w = u + v`, put
//! `x_1 = Z^* u` and `x_2 = Z^* v` where
//! `Z^* u = sum_k k^{1/2} T^{k-1} (I + T)^2 (I - T) u_k`. Because
//! `sum_k k T^{2k-2} (I - T^2)^2 = I` whenever the series converges,
//! `x_1 + x_2 = Z^* w = x`, and the split square functions of `x_1`, `x_2`
//! are controlled by the column norm of `u` and the row norm of `v`.

use serde::{Deserialize, Serialize};

use crate::blocknorm::{
    column_norm, rad_norm_bracket, regular_norm, row_norm, sqrt_gram_norm, BlockVec, RadOptions,
};
use crate::error::{Error, Result};
use crate::matcore::{c, check_square, from_real, schatten_norm, Exponent, Mat, C64};
use crate::sqfun::{power_decay, square_function, weighted_geometric_tail, SqKind, SqSpec};
use crate::superop::SuperOp;

/// How the sequence `w` is divided between the column part `u` and the row
/// part `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Splitter {
    /// `v = 0`.
    AllColumn,
    /// `u = 0`.
    AllRow,
    /// `v` is the witness of the rad-norm bracket of `w`.
    RadOptimal,
    /// Each `w_k` goes, in order, to whichever side's norm grows less.
    Thresholded,
}

impl std::str::FromStr for Splitter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-column" => Ok(Splitter::AllColumn),
            "all-row" => Ok(Splitter::AllRow),
            "rad-optimal" => Ok(Splitter::RadOptimal),
            "thresholded" => Ok(Splitter::Thresholded),
            _ => Err(Error::InvalidArgument(format!("unknown splitter {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DecompOptions {
    /// Target for the certified reconstruction tail, relative to `||x||`.
    pub tol: f64,
    /// Cap on the number of terms when `k` is chosen automatically.
    pub k_max: usize,
    /// Fixed number of terms, overriding the tail policy.
    pub k: Option<usize>,
    /// Tolerance for the square functions of `x_1`, `x_2`.
    pub sq_tol: f64,
    pub rad: RadOptions,
}

impl Default for DecompOptions {
    fn default() -> Self {
        DecompOptions { tol: 1e-10, k_max: 1_000_000, k: None, sq_tol: 1e-6, rad: RadOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompResult {
    #[serde(skip)]
    pub x1: Mat,
    #[serde(skip)]
    pub x2: Mat,
    /// `(col-sq(x_1) + row-sq(x_2)) / ||x||_p`.
    pub constant: f64,
    /// `||x - x_1 - x_2||_p / ||x||_p`.
    pub residual: f64,
    pub k_used: usize,
    pub col_sq: f64,
    pub row_sq: f64,
    pub splitter: Splitter,
}

fn sqrt_weights(k: usize) -> Vec<f64> {
    (1..=k).map(|j| (j as f64).sqrt()).collect()
}

/// `(I + T)^2 (I - T) = I + T - T^2 - T^3`.
fn gen_poly() -> [C64; 4] {
    [c(1.0), c(1.0), c(-1.0), c(-1.0)]
}

/// `(Z y)_k = k^{1/2} (T^*)^{k-1} (I + T^*)^2 (I - T^*) y`, `k = 1..K`, with
/// `T^*` the trace-duality adjoint.
pub fn z_apply(t: &SuperOp, y: &Mat, k: usize) -> Result<BlockVec> {
    if check_square(y)? != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: y.nrows() });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one block".into()));
    }
    let ta = t.adjoint();
    let mut cur = ta.apply_poly(&gen_poly(), y);
    let mut out = Vec::with_capacity(k);
    for (j, &w) in sqrt_weights(k).iter().enumerate() {
        if j > 0 {
            cur = ta.apply(&cur);
        }
        out.push(&cur * c(w));
    }
    Ok(BlockVec::from_blocks_unchecked(out))
}

/// `Z^* u = sum_k k^{1/2} T^{k-1} (I + T)^2 (I - T) u_k`, by Horner.
pub fn z_star_apply(t: &SuperOp, u: &BlockVec) -> Result<Mat> {
    if u.dim() != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: u.dim() });
    }
    let n = t.dim();
    let mut acc = Mat::zeros(n, n);
    for (j, &w) in sqrt_weights(u.len()).iter().enumerate().rev() {
        acc = t.apply(&acc) + &u.blocks()[j] * c(w);
    }
    Ok(t.apply_poly(&gen_poly(), &acc))
}

/// `sum_{k <= K} k (rho T)^{2k-2} (I - (rho T)^2)^2 x`, which tends to `x`.
pub fn reconstruct_identity(t: &SuperOp, x: &Mat, rho: f64, k: usize) -> Result<Mat> {
    if check_square(x)? != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: x.nrows() });
    }
    let op = t.scaled(rho);
    let r = op.spectral_radius()?;
    if r >= 1.0 {
        return Err(Error::NoCertifiedTail(r));
    }
    let sq = op.compose(&op)?;
    let mut acc = Mat::zeros(x.nrows(), x.ncols());
    for j in (1..=k).rev() {
        acc = sq.apply(&acc) + x * c(j as f64);
    }
    // (I - S)^2 = I - 2 S + S^2
    Ok(sq.apply_poly(&[c(1.0), c(-2.0), c(1.0)], &acc))
}

/// Smallest `K` (doubling from 16) whose certified reconstruction tail
/// `sum_{k > K} k ||T^{2k-2} (I - T^2)^2 x||_2` is at most `tol ||x||_2`.
pub fn reconstruction_terms(t: &SuperOp, x: &Mat, tol: f64, k_max: usize) -> Result<(usize, f64)> {
    let decay = power_decay(t)?;
    let y = t.apply_poly(&[c(1.0), c(0.0), c(-2.0), c(0.0), c(1.0)], x);
    let scale = decay.constant * y.norm();
    let target = tol * x.norm();
    let mut k = 16.min(k_max.max(1));
    loop {
        let tail = scale * weighted_geometric_tail(k, 1.0, decay.rate);
        if tail <= target || k >= k_max {
            return Ok((k, tail));
        }
        k = (2 * k).min(k_max);
    }
}

fn eigenvalue_one_check(t: &SuperOp) -> Result<()> {
    if t.eigenvalues()?.iter().any(|z| (z - c(1.0)).norm() < 1e-10) {
        return Err(Error::EigenvalueOne);
    }
    Ok(())
}

/// Splits `w` into `(u, v)` with `u + v = w`.
fn split(w: &BlockVec, p: Exponent, splitter: Splitter, rad: &RadOptions) -> Result<(BlockVec, BlockVec)> {
    let zeros = BlockVec::zeros(w.len(), w.dim());
    match splitter {
        Splitter::AllColumn => Ok((w.clone(), zeros)),
        Splitter::AllRow => Ok((zeros, w.clone())),
        Splitter::RadOptimal => {
            if p.value() >= 2.0 || p.is_infinite() {
                return Ok(if column_norm(w, p)? <= row_norm(w, p)? { (w.clone(), zeros) } else { (zeros, w.clone()) });
            }
            let b = rad_norm_bracket(w, p, rad)?;
            let v = b.witness.expect("p < 2 returns a witness");
            Ok((w.sub(&v)?, v))
        }
        Splitter::Thresholded => {
            let n = w.dim();
            let (mut gc, mut gr) = (Mat::zeros(n, n), Mat::zeros(n, n));
            let (mut nc, mut nr) = (0.0, 0.0);
            let mut u = Vec::with_capacity(w.len());
            let mut v = Vec::with_capacity(w.len());
            for b in w.blocks() {
                let gc_next = &gc + b.adjoint() * b;
                let gr_next = &gr + b * b.adjoint();
                let (c_next, r_next) = (sqrt_gram_norm(&gc_next, p)?, sqrt_gram_norm(&gr_next, p)?);
                if c_next - nc <= r_next - nr {
                    (gc, nc) = (gc_next, c_next);
                    u.push(b.clone());
                    v.push(Mat::zeros(n, n));
                } else {
                    (gr, nr) = (gr_next, r_next);
                    v.push(b.clone());
                    u.push(Mat::zeros(n, n));
                }
            }
            Ok((BlockVec::from_blocks_unchecked(u), BlockVec::from_blocks_unchecked(v)))
        }
    }
}

/// Decomposes `x = x_1 + x_2` and measures `col-sq(x_1) + row-sq(x_2)`.
pub fn decompose(
    t: &SuperOp,
    x: &Mat,
    p: Exponent,
    splitter: Splitter,
    opts: &DecompOptions,
) -> Result<DecompResult> {
    if !(p.value() > 1.0) {
        return Err(Error::InvalidExponent(p.value()));
    }
    if check_square(x)? != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: x.nrows() });
    }
    eigenvalue_one_check(t)?;
    let k = match opts.k {
        Some(k) if k > 0 => k,
        Some(_) => return Err(Error::InvalidArgument("k must be positive".into())),
        None => reconstruction_terms(t, x, opts.tol, opts.k_max)?.0,
    };
    let n = t.dim();
    let mut cur = t.apply_poly(&[c(1.0), c(-1.0)], x);
    let mut w = Vec::with_capacity(k);
    for (j, &s) in sqrt_weights(k).iter().enumerate() {
        if j > 0 {
            cur = t.apply(&cur);
        }
        w.push(&cur * c(s));
    }
    let w = BlockVec::from_blocks_unchecked(w);
    let (u, v) = split(&w, p, splitter, &opts.rad)?;
    let x1 = z_star_apply(t, &u)?;
    let x2 = z_star_apply(t, &v)?;

    let xn = schatten_norm(x, p)?;
    if xn == 0.0 {
        let z = Mat::zeros(n, n);
        return Ok(DecompResult { x1: z.clone(), x2: z, constant: 0.0, residual: 0.0, k_used: k, col_sq: 0.0, row_sq: 0.0, splitter });
    }
    let residual = schatten_norm(&(x - &x1 - &x2), p)? / xn;
    let sq = |y: &Mat, kind: SqKind| -> Result<f64> {
        if y.norm() == 0.0 {
            return Ok(0.0);
        }
        let spec = SqSpec::new(p, 1.0, kind).with_tol(opts.sq_tol).with_k_max(opts.k_max);
        Ok(square_function(t, y, &spec)?.value)
    };
    let col_sq = sq(&x1, SqKind::Col)?;
    let row_sq = sq(&x2, SqKind::Row)?;
    Ok(DecompResult {
        x1,
        x2,
        constant: (col_sq + row_sq) / xn,
        residual,
        k_used: k,
        col_sq,
        row_sq,
        splitter,
    })
}

/// The `K x K` matrix `[sqrt(k m) / (k + m - 1)^2]`.
pub fn hankel_matrix(k: usize) -> Mat {
    from_real(k, k, |i, j| {
        let (a, b) = ((i + 1) as f64, (j + 1) as f64);
        (a * b).sqrt() / (a + b - 1.0).powi(2)
    })
}

/// Regular norm of [`hankel_matrix`].
pub fn hankel_regular_check(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    regular_norm(&hankel_matrix(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{diag, trace_pairing};
    use crate::sampling::{gaussian_mat, substream};

    fn la(n: usize) -> (Mat, SuperOp) {
        let a = diag(&(1..=n).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect::<Vec<_>>());
        (a.clone(), SuperOp::left_mult(a).unwrap())
    }

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn z_examples() {
        let (a, t) = la(3);
        let z = z_apply(&t, &Mat::zeros(3, 3), 4).unwrap();
        assert!(z.blocks().iter().all(|b| b.norm() == 0.0));
        let y = gaussian_mat(&mut substream(1, 0), 3);
        let z = z_apply(&t, &y, 4).unwrap();
        let id = Mat::identity(3, 3);
        // L_a^* = R_a
        let first = &y * (&id + &a) * (&id + &a) * (&id - &a);
        assert!((&z.blocks()[0] - first).norm() < 1e-13 * y.norm());
        let third = &y * &a * &a * (&id + &a) * (&id + &a) * (&id - &a) * c(3f64.sqrt());
        assert!((&z.blocks()[2] - third).norm() < 1e-13 * y.norm());
        let u = BlockVec::new(vec![y.clone()]).unwrap();
        let s = z_star_apply(&t, &u).unwrap();
        assert!((s - (&id + &a) * (&id + &a) * (&id - &a) * &y).norm() < 1e-13 * y.norm());
        assert_eq!(z_star_apply(&t, &BlockVec::zeros(5, 3)).unwrap().norm(), 0.0);
    }

    #[test]
    fn z_star_is_the_adjoint_of_z() {
        let mut rng = substream(2, 0);
        let t = SuperOp::explicit(gaussian_mat(&mut rng, 9) * c(0.2)).unwrap();
        for _ in 0..20 {
            let y = gaussian_mat(&mut rng, 3);
            let u = BlockVec::new((0..5).map(|_| gaussian_mat(&mut rng, 3)).collect()).unwrap();
            let lhs = trace_pairing(&z_star_apply(&t, &u).unwrap(), &y).unwrap();
            let rhs = u.pairing(&z_apply(&t, &y, 5).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn reconstruction_examples() {
        let x = gaussian_mat(&mut substream(3, 0), 4);
        let r = reconstruct_identity(&SuperOp::zero(4), &x, 1.0, 10).unwrap();
        assert!((r - &x).norm() < 1e-15 * x.norm());
        let (_, t) = la(6);
        let x = gaussian_mat(&mut substream(3, 1), 6);
        let k = reconstruction_terms(&t.scaled(0.99), &x, 1e-10, 1 << 20).unwrap().0;
        let r = reconstruct_identity(&t, &x, 0.99, k).unwrap();
        assert!((r - &x).norm() <= 1e-8 * x.norm());
        let bad = SuperOp::left_mult(diag(&[1.0, 0.5])).unwrap();
        assert!(reconstruct_identity(&bad, &Mat::identity(2, 2), 1.0, 3).is_err());
    }

    #[test]
    fn all_column_and_all_row() {
        let (_, t) = la(4);
        let x = gaussian_mat(&mut substream(4, 0), 4);
        let d = decompose(&t, &x, p(1.5), Splitter::AllColumn, &DecompOptions::default()).unwrap();
        assert!((&d.x1 - &x).norm() <= 1e-8 * x.norm() && d.x2.norm() == 0.0);
        let d = decompose(&t, &x, p(1.5), Splitter::AllRow, &DecompOptions::default()).unwrap();
        assert!((&d.x2 - &x).norm() <= 1e-8 * x.norm() && d.x1.norm() == 0.0);
    }

    #[test]
    fn every_splitter_reconstructs() {
        let (_, t) = la(4);
        let x = gaussian_mat(&mut substream(5, 0), 4);
        for s in [Splitter::RadOptimal, Splitter::Thresholded] {
            let d = decompose(&t, &x, p(4.0 / 3.0), s, &DecompOptions::default()).unwrap();
            assert!(d.residual <= 1e-6 && d.constant.is_finite(), "{s:?} {d:?}");
        }
    }

    #[test]
    fn first_piece_identity() {
        // (I - T) x_1 = sum_k k^{1/2} T^{k-1} (I - T^2)^2 u_k
        let (_, t) = la(3);
        let mut rng = substream(6, 0);
        let u = BlockVec::new((0..6).map(|_| gaussian_mat(&mut rng, 3)).collect()).unwrap();
        let x1 = z_star_apply(&t, &u).unwrap();
        let lhs = t.apply_poly(&[c(1.0), c(-1.0)], &x1);
        let mut rhs = Mat::zeros(3, 3);
        for (k, b) in u.blocks().iter().enumerate() {
            let y = t.apply_poly(&[c(1.0), c(0.0), c(-2.0), c(0.0), c(1.0)], b);
            rhs += t.apply_pow(&y, k) * c(((k + 1) as f64).sqrt());
        }
        assert!((lhs - rhs).norm() < 1e-8);
    }

    #[test]
    fn rejects_eigenvalue_one() {
        let t = SuperOp::identity(2);
        let r = decompose(&t, &Mat::identity(2, 2), p(1.5), Splitter::AllColumn, &DecompOptions::default());
        assert!(matches!(r, Err(Error::EigenvalueOne)));
    }

    #[test]
    fn hankel_examples() {
        assert!((hankel_regular_check(1).unwrap() - 1.0).abs() < 1e-15);
        let a = hankel_regular_check(64).unwrap();
        let b = hankel_regular_check(128).unwrap();
        assert!((a - b).abs() <= 0.01 && b <= 2.0);
    }
}
