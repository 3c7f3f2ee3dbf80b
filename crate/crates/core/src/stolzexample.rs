//! The diagonal example: `a = diag(1 - 2^{-k})`, the multiplications `L_a`
//! and `R_a`, and the growth of the column/row ratio on the rank-one test
//! matrix `x = (1/sqrt n) e (x) e`.
//!
//! For `T = L_a`, `alpha = 1` the square functions of `x` have closed forms:
//! the column one is `||(I + a)^{-1} x||_p`, and the row one is
//! `||A||_{p/2}^{1/2}` with `A_ij = (1 - a_i)(1 - a_j)(1 - a_i a_j)^{-2}
//! = 2^{i+j} / (2^i + 2^j - 1)^2`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{c, diag, from_real, schatten_norm, Exponent, Mat};
use crate::superop::SuperOp;

/// The truncation `diag(a_1, ..., a_n)`, `a_k = 1 - 2^{-k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagA {
    entries: Vec<f64>,
}

impl DiagA {
    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn matrix(&self) -> Mat {
        diag(&self.entries)
    }

    /// `L_a : x -> a x`.
    pub fn left_mult(&self) -> SuperOp {
        SuperOp::left_mult(self.matrix()).expect("square")
    }

    /// `R_a : x -> x a`.
    pub fn right_mult(&self) -> SuperOp {
        SuperOp::right_mult(self.matrix()).expect("square")
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(())
}

pub fn make_diag_a(n: usize) -> Result<DiagA> {
    check_n(n)?;
    Ok(DiagA { entries: (1..=n).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect() })
}

/// `x = (1/sqrt n) e (x) e`: every entry `1/sqrt n`, `||x||_p = sqrt n`.
pub fn rank_one_test(n: usize) -> Result<Mat> {
    check_n(n)?;
    Ok(Mat::from_element(n, n, c(1.0 / (n as f64).sqrt())))
}

/// `A_ij = 2^{i+j} / (2^i + 2^j - 1)^2`, evaluated as
/// `1 / (2^{(i-j)/2} + 2^{(j-i)/2} - 2^{-(i+j)/2})^2` to avoid overflow.
pub fn matrix_a(n: usize) -> Result<Mat> {
    check_n(n)?;
    Ok(from_real(n, n, |i, j| {
        let (i, j) = ((i + 1) as f64, (j + 1) as f64);
        let d = 2f64.powf((i - j) / 2.0) + 2f64.powf((j - i) / 2.0) - 2f64.powf(-(i + j) / 2.0);
        1.0 / (d * d)
    }))
}

/// `||A||_{S^1}` and `||A||_{S^2}^2`.
pub fn a_norm_bounds(n: usize) -> Result<(f64, f64)> {
    let a = matrix_a(n)?;
    Ok((schatten_norm(&a, Exponent::new(1.0)?)?, a.norm_squared()))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthRow {
    pub n: usize,
    pub col_norm: f64,
    pub row_norm: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub p: f64,
    pub rows: Vec<GrowthRow>,
    /// Least-squares slope of `log(ratio)` against `log(n)`.
    pub slope: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub theta: f64,
    pub expected_slope: f64,
}

/// The interpolation exponent `theta` of the growth rate `n^{theta/4}`:
/// `1/(p/2) = (1 - theta) + theta/2` on `(2, 4]`, `1` from `p = 4` on, and
/// the value at `p*` for `p < 2`.
pub fn growth_theta(p: Exponent) -> Result<f64> {
    let pv = p.value();
    if pv == 2.0 || pv <= 1.0 {
        return Err(Error::InvalidExponent(pv));
    }
    let q = if pv < 2.0 { p.conjugate().expect("p > 1").value() } else { pv };
    Ok(if q >= 4.0 { 1.0 } else { 2.0 - 4.0 / q })
}

/// Ordinary least squares of `y` on `x`: `(slope, rms residual)`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    (slope, (rss / m).sqrt())
}

/// One row of the experiment for size `n`, from the closed forms.
pub fn growth_row(p: Exponent, n: usize) -> Result<GrowthRow> {
    let a = make_diag_a(n)?;
    let x = rank_one_test(n)?;
    let inv = diag(&a.entries().iter().map(|v| 1.0 / (1.0 + v)).collect::<Vec<_>>());
    let col = schatten_norm(&(inv * x), p)?;
    let row = schatten_norm(&matrix_a(n)?, p.half())?.sqrt();
    let ratio = if p.value() > 2.0 { col / row } else { row / col };
    Ok(GrowthRow { n, col_norm: col, row_norm: row, ratio })
}

/// Column and row square functions of the rank-one test matrix under `L_a`
/// for each `n`, with the fitted growth rate of the larger over the smaller.
pub fn growth_experiment(p: Exponent, n_list: &[usize]) -> Result<GrowthReport> {
    let theta = growth_theta(p)?;
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("empty n list".into()));
    }
    let rows = n_list.par_iter().map(|&n| growth_row(p, n)).collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
    let (slope, residual) = fit_slope(&lx, &ly);
    Ok(GrowthReport { p: p.value(), rows, slope, residual, theta, expected_slope: theta / 4.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{hermitian_eigenvalues, singular_values};

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn diag_examples() {
        assert_eq!(make_diag_a(1).unwrap().entries(), &[0.5]);
        assert_eq!(make_diag_a(3).unwrap().entries(), &[0.5, 0.75, 0.875]);
        let a = make_diag_a(5).unwrap();
        assert_eq!(a.left_mult().spectral_radius().unwrap(), 1.0 - 0.5f64.powi(5));
        assert!(make_diag_a(0).is_err());
    }

    #[test]
    fn rank_one_examples() {
        assert_eq!(rank_one_test(1).unwrap(), Mat::from_element(1, 1, c(1.0)));
        let x = rank_one_test(4).unwrap();
        let s = singular_values(&x).unwrap();
        assert!((s[0] - 2.0).abs() < 1e-14 && s[1..].iter().all(|v| v.abs() < 1e-14));
        for v in [1.0, 3.0, f64::INFINITY] {
            assert!((schatten_norm(&x, Exponent::new(v).unwrap()).unwrap() - 2.0).abs() < 1e-13);
        }
        assert!((&x * x.adjoint() - Mat::from_element(4, 4, c(1.0))).norm() < 1e-14);
    }

    #[test]
    fn matrix_a_entries() {
        let a = matrix_a(6).unwrap();
        assert!((a[(0, 0)].re - 4.0 / 9.0).abs() < 1e-15);
        assert!((a[(0, 1)].re - 8.0 / 25.0).abs() < 1e-15);
        let d = make_diag_a(6).unwrap();
        let e = d.entries();
        for i in 0..6 {
            for j in 0..6 {
                let other = (1.0 - e[i]) * (1.0 - e[j]) / (1.0 - e[i] * e[j]).powi(2);
                assert!((a[(i, j)].re - other).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn a_is_psd_and_bounded() {
        for n in [1, 2, 8, 64] {
            let ev = hermitian_eigenvalues(&matrix_a(n).unwrap()).unwrap();
            assert!(ev[0] >= -1e-12);
            let (s1, s2) = a_norm_bounds(n).unwrap();
            assert!(s1 <= n as f64 && s2 <= 160.0 / 3.0 * n as f64);
        }
        assert!((a_norm_bounds(1).unwrap().0 - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn column_norm_is_of_order_sqrt_n() {
        for n in [1, 4, 16, 64] {
            let r = growth_row(p(4.0), n).unwrap();
            let s = (n as f64).sqrt();
            assert!(r.col_norm >= 0.5 * s && r.col_norm <= 2.0 / 3.0 * s);
            assert!(r.row_norm <= (160.0 / 3.0 * n as f64).powf(0.25));
        }
    }

    #[test]
    fn slope_fit_is_exact_on_power_laws() {
        let x: Vec<f64> = [1.0f64, 2.0, 4.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.25 * v + 1.0).collect();
        let (s, r) = fit_slope(&x, &y);
        assert!((s - 0.25).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn theta_values() {
        assert!((growth_theta(p(3.0)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(growth_theta(p(6.0)).unwrap(), 1.0);
        assert_eq!(growth_theta(p(4.0 / 3.0)).unwrap(), 1.0);
        assert!(growth_theta(p(2.0)).is_err());
        assert!(growth_experiment(p(4.0), &[]).is_err());
    }
}
