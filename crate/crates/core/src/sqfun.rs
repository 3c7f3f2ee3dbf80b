//! Discrete square functions of a Ritt operator with certified truncation.
//!
//! For `x` in `S^p_n` the square functions are norms of the sequence
//! `x_k = k^{alpha - 1/2} T^{k-1} (I - T)^alpha x`, `k >= 1`: the column,
//! row and rad norms, and the split norm
//! `inf { col-sq(x_1) + row-sq(x_2) : x = x_1 + x_2 }`.
//!
//! Truncation is certified from the decay of `||T^j||_{S^2 -> S^2}`: with
//! `||T^m|| = q < 1` and `C_0 = max_{j < m} ||T^j||` one has
//! `||T^j|| <= C r^j`, `r = q^{1/m}`, `C = C_0 q^{-(m-1)/m}`, and every tail
//! norm is bounded by `sqrt(c_p sum_{k > K} k^{2 alpha - 1} C^2 r^{2(k-1)}) ||y_0||_2`
//! with `y_0 = (I - T)^alpha x` and `c_p = n^{2/p - 1}` for `p < 2`, `1` otherwise.

use serde::{Deserialize, Serialize};

use crate::blocknorm::{column_norm, rad_norm_bracket, row_norm, BlockVec, RadOptions};
use crate::error::{Error, Result};
use crate::matcore::{c, Exponent, Mat};
use crate::ritt::fractional_power;
use crate::sampling::{substream, unit_mat};
use crate::superop::SuperOp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SqKind {
    Col,
    Row,
    Rad,
    Split,
}

impl std::str::FromStr for SqKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "col" => Ok(SqKind::Col),
            "row" => Ok(SqKind::Row),
            "rad" => Ok(SqKind::Rad),
            "split" => Ok(SqKind::Split),
            _ => Err(Error::InvalidArgument(format!("unknown square function kind {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SqSpec {
    pub p: Exponent,
    pub alpha: f64,
    pub kind: SqKind,
    pub k_max: usize,
    pub tol: f64,
    /// Damping: the sequence is built from `rho T`.
    pub rho: Option<f64>,
}

impl SqSpec {
    pub fn new(p: Exponent, alpha: f64, kind: SqKind) -> Self {
        SqSpec { p, alpha, kind, k_max: 1_000_000, tol: 1e-6, rho: None }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha = {} must be positive", self.alpha)));
        }
        if self.k_max == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("need k_max >= 1 and tol > 0".into()));
        }
        if let Some(r) = self.rho {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidArgument(format!("rho = {r} not in (0, 1]")));
            }
        }
        if self.p.value() < 1.0 {
            return Err(Error::InvalidExponent(self.p.value()));
        }
        Ok(())
    }

    fn operator(&self, t: &SuperOp) -> SuperOp {
        match self.rho {
            Some(r) if r != 1.0 => t.scaled(r),
            _ => t.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SqResult {
    /// The computed value: the truncated norm for col/row (and rad with
    /// `p >= 2`), the upper end of the bracket otherwise.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub k_used: usize,
    /// Certified bound on the norm of the discarded tail.
    pub tail_bound: f64,
    pub converged: bool,
}

/// `||T^j||_{S^2 -> S^2} <= constant * rate^j` for all `j >= 0`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PowerDecay {
    pub constant: f64,
    pub rate: f64,
}

const MAX_CONTRACTION_POWER: usize = 10_000;

pub(crate) fn power_decay(t: &SuperOp) -> Result<PowerDecay> {
    let rho_hat = t.spectral_radius()?;
    if rho_hat >= 1.0 {
        return Err(Error::NoCertifiedTail(rho_hat));
    }
    let two = Exponent::new(2.0)?;
    let mut c0 = 1.0_f64;
    let mut pow = t.clone();
    for m in 1..=MAX_CONTRACTION_POWER {
        let q = pow.op_norm_upper(two)?;
        if q < 1.0 {
            if q == 0.0 {
                // nilpotent: T^j = 0 for j >= m
                return Ok(PowerDecay { constant: c0 * 2f64.powi(m as i32), rate: 0.5 });
            }
            let rate = q.powf(1.0 / m as f64);
            return Ok(PowerDecay { constant: c0 * q.powf(-((m - 1) as f64) / m as f64), rate });
        }
        c0 = c0.max(q);
        pow = pow.compose(t)?;
    }
    Err(Error::NoCertifiedTail(rho_hat))
}

/// `sum_{k > K} k^e r^{2(k-1)}`, bounded by the first term over one minus
/// the largest ratio of consecutive terms.
pub(crate) fn weighted_geometric_tail(k: usize, e: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let k1 = (k + 1) as f64;
    let first = k1.powf(e) * r.powf(2.0 * k as f64);
    let ratio = ((k1 + 1.0) / k1).powf(e.max(0.0)) * r * r;
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    first / (1.0 - ratio)
}

fn c_p(p: Exponent, n: usize) -> f64 {
    if p.value() < 2.0 {
        (n as f64).powf(2.0 / p.value() - 1.0)
    } else {
        1.0
    }
}

/// The truncated sequence together with its tail certificate.
pub(crate) struct Truncated {
    pub blocks: BlockVec,
    pub tail_norm: f64,
    pub converged: bool,
}

/// Builds `x_k` for `k = 1..K` with `K` doubling from 16 until the tail
/// norm is at most `tol` times the partial norm `measure(blocks)`.
fn truncated_sequence(
    t: &SuperOp,
    x: &Mat,
    spec: &SqSpec,
    measure: &dyn Fn(&[Mat]) -> Result<f64>,
) -> Result<Truncated> {
    spec.validate()?;
    let n = crate::matcore::check_square(x)?;
    if t.dim() != n {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: n });
    }
    let op = spec.operator(t);
    let decay = power_decay(&op)?;
    let y0 = fractional_power(&op, spec.alpha)?.apply(x);
    let e = 2.0 * spec.alpha - 1.0;
    let scale = decay.constant * y0.norm() * c_p(spec.p, n).sqrt();
    let tail_at = |k: usize| scale * weighted_geometric_tail(k, e, decay.rate).sqrt();

    let mut blocks = Vec::new();
    let mut cur = y0;
    let mut k_target = 16.min(spec.k_max);
    loop {
        while blocks.len() < k_target {
            let k = blocks.len() + 1;
            if k > 1 {
                cur = op.apply(&cur);
            }
            blocks.push(&cur * c((k as f64).powf(spec.alpha - 0.5)));
        }
        let tail = tail_at(k_target);
        let partial = measure(&blocks)?;
        let done = tail <= spec.tol * partial || tail == 0.0;
        if done || k_target == spec.k_max {
            return Ok(Truncated {
                blocks: BlockVec::from_blocks_unchecked(blocks),
                tail_norm: tail,
                converged: done,
            });
        }
        k_target = (2 * k_target).min(spec.k_max);
    }
}

fn col_measure(p: Exponent) -> impl Fn(&[Mat]) -> Result<f64> {
    move |b: &[Mat]| column_norm(&BlockVec::from_blocks_unchecked(b.to_vec()), p)
}

/// The blocks `k^{alpha - 1/2} (rho T)^{k-1} (I - rho T)^alpha x`, `k <= K`,
/// with `K` chosen by the truncation policy for the column norm.
pub fn sq_sequence(t: &SuperOp, x: &Mat, spec: &SqSpec) -> Result<BlockVec> {
    Ok(truncated_sequence(t, x, spec, &col_measure(spec.p))?.blocks)
}

pub fn square_function(t: &SuperOp, x: &Mat, spec: &SqSpec) -> Result<SqResult> {
    let p = spec.p;
    match spec.kind {
        SqKind::Col | SqKind::Row => {
            let column = spec.kind == SqKind::Col;
            let measure = move |b: &[Mat]| {
                let v = BlockVec::from_blocks_unchecked(b.to_vec());
                if column {
                    column_norm(&v, p)
                } else {
                    row_norm(&v, p)
                }
            };
            let tr = truncated_sequence(t, x, spec, &measure)?;
            let v = measure(tr.blocks.blocks())?;
            Ok(SqResult {
                value: v,
                lower: v,
                upper: v + tr.tail_norm,
                k_used: tr.blocks.len(),
                tail_bound: tr.tail_norm,
                converged: tr.converged,
            })
        }
        SqKind::Rad => {
            // a lower bound for the rad norm: max(col, row) for p >= 2, and
            // the sequence Frobenius norm (= rad_2) for p < 2
            let measure = move |b: &[Mat]| {
                if p.value() >= 2.0 {
                    let v = BlockVec::from_blocks_unchecked(b.to_vec());
                    Ok(column_norm(&v, p)?.max(row_norm(&v, p)?))
                } else {
                    Ok(b.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt())
                }
            };
            let tr = truncated_sequence(t, x, spec, &measure)?;
            rad_result(&tr, p)
        }
        SqKind::Split => split_result(t, x, spec),
    }
}

fn rad_result(tr: &Truncated, p: Exponent) -> Result<SqResult> {
    let k_used = tr.blocks.len();
    if p.value() >= 2.0 {
        let v = column_norm(&tr.blocks, p)?.max(row_norm(&tr.blocks, p)?);
        return Ok(SqResult {
            value: v,
            lower: v,
            upper: v + tr.tail_norm,
            k_used,
            tail_bound: tr.tail_norm,
            converged: tr.converged,
        });
    }
    let b = rad_norm_bracket(&tr.blocks, p, &RadOptions::default())?;
    Ok(SqResult {
        value: b.upper,
        lower: b.lower,
        upper: b.upper + tr.tail_norm,
        k_used,
        tail_bound: tr.tail_norm,
        converged: tr.converged && b.converged,
    })
}

/// Steps of local refinement applied to the constructive split.
const SPLIT_REFINE_STEPS: usize = 50;

fn split_result(t: &SuperOp, x: &Mat, spec: &SqSpec) -> Result<SqResult> {
    let p = spec.p;
    let rad_spec = SqSpec { kind: SqKind::Rad, ..*spec };
    let rad = square_function(t, x, &rad_spec)?;
    let op = spec.operator(t);
    let d = crate::decomp::decompose(
        &op,
        x,
        p,
        crate::decomp::Splitter::RadOptimal,
        &crate::decomp::DecompOptions { tol: spec.tol.min(1e-8), k_max: spec.k_max, ..Default::default() },
    )?;
    let col_spec = SqSpec { kind: SqKind::Col, rho: None, ..*spec };
    let row_spec = SqSpec { kind: SqKind::Row, rho: None, ..*spec };
    // the pieces are re-measured against the (possibly damped) operator
    let eval = |x1: &Mat| -> Result<(f64, f64, usize, bool)> {
        let a = square_function(&op, x1, &col_spec)?;
        let b = square_function(&op, &(x - x1), &row_spec)?;
        Ok((a.upper + b.upper, a.tail_bound + b.tail_bound, a.k_used.max(b.k_used), a.converged && b.converged))
    };
    let (mut best, mut tail, mut k_used, mut conv) = eval(&d.x1)?;
    if let Some(cand) = refine_split(&op, x, &d.x1, &col_spec, SPLIT_REFINE_STEPS)? {
        let r = eval(&cand)?;
        if r.0 < best {
            (best, tail, k_used, conv) = r;
        }
    }
    Ok(SqResult {
        value: best,
        lower: rad.lower.min(best),
        upper: best,
        k_used,
        tail_bound: tail,
        converged: conv,
    })
}

/// Gradient descent with backtracking on the truncated objective
/// `col(S x_1) + row(S (x - x_1))`, `S` the (linear) sequence map.
fn refine_split(
    op: &SuperOp,
    x: &Mat,
    x1: &Mat,
    spec: &SqSpec,
    steps: usize,
) -> Result<Option<Mat>> {
    let p = spec.p;
    let k = sq_sequence(op, x, spec)?.len();
    let frac = fractional_power(op, spec.alpha)?;
    let frac_h = frac.hs_adjoint();
    let op_h = op.hs_adjoint();
    let weights: Vec<f64> = (1..=k).map(|j| (j as f64).powf(spec.alpha - 0.5)).collect();
    let seq = |y: &Mat| -> Vec<Mat> {
        let mut cur = frac.apply(y);
        let mut out = Vec::with_capacity(k);
        for (j, w) in weights.iter().enumerate() {
            if j > 0 {
                cur = op.apply(&cur);
            }
            out.push(&cur * c(*w));
        }
        out
    };
    // S^* g = (frac)^* sum_k w_k (T^*)^{k-1} g_k, by Horner
    let seq_adj = |g: &[Mat]| -> Mat {
        let mut acc = Mat::zeros(x.nrows(), x.ncols());
        for (j, w) in weights.iter().enumerate().rev() {
            acc = op_h.apply(&acc) + &g[j] * c(*w);
            if j == 0 {
                break;
            }
        }
        frac_h.apply(&acc)
    };
    let objective = |y1: &Mat| -> Result<(f64, Mat)> {
        let u = seq(y1);
        let v = seq(&(x - y1));
        let eps = 1e-9 * x.norm().max(1e-300);
        let (fc, gc) = crate::blocknorm::smooth_side_grad(&u, p, eps, true)?;
        let (fr, gr) = crate::blocknorm::smooth_side_grad(&v, p, eps, false)?;
        let grad = seq_adj(&gc) - seq_adj(&gr);
        Ok((fc + fr, grad))
    };
    let mut cur = x1.clone();
    let (mut f, mut g) = objective(&cur)?;
    let f0 = f;
    let mut step = x.norm() / g.norm().max(1e-300) * 1e-2;
    for _ in 0..steps {
        let mut moved = false;
        for _ in 0..30 {
            let cand = &cur - &g * c(step);
            let (fc, gc) = objective(&cand)?;
            if fc < f {
                cur = cand;
                f = fc;
                g = gc;
                step *= 1.5;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(if f < f0 { Some(cur) } else { None })
}

/// Ratios of square functions for different `alpha` over random unit `x`.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaTable {
    pub alphas: Vec<f64>,
    /// `ratios[i][j] = max_x value(alpha_i) / value(alpha_j)`.
    pub ratios: Vec<Vec<f64>>,
    /// Largest entry of `ratios`.
    pub spread: f64,
}

pub fn alpha_equivalence_experiment(
    t: &SuperOp,
    p: Exponent,
    alphas: &[f64],
    kind: SqKind,
    samples: usize,
    seed: u64,
) -> Result<AlphaTable> {
    if alphas.is_empty() || samples == 0 {
        return Err(Error::InvalidArgument("need alphas and samples >= 1".into()));
    }
    let m = alphas.len();
    let mut ratios = vec![vec![0.0_f64; m]; m];
    for s in 0..samples {
        let x = unit_mat(&mut substream(seed, s as u64), t.dim());
        let vals = alphas
            .iter()
            .map(|&a| Ok(square_function(t, &x, &SqSpec::new(p, a, kind))?.value))
            .collect::<Result<Vec<f64>>>()?;
        for i in 0..m {
            for j in 0..m {
                ratios[i][j] = ratios[i][j].max(vals[i] / vals[j]);
            }
        }
    }
    let spread = ratios.iter().flatten().fold(0.0_f64, |a, &b| a.max(b));
    Ok(AlphaTable { alphas: alphas.to_vec(), ratios, spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{diag, schatten_norm};
    use crate::sampling::gaussian_mat;

    fn la(n: usize) -> (Mat, SuperOp) {
        let a = diag(&(1..=n).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect::<Vec<_>>());
        (a.clone(), SuperOp::left_mult(a).unwrap())
    }

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn sequence_examples() {
        let (a, t) = la(4);
        let spec = SqSpec::new(p(3.0), 1.0, SqKind::Col);
        let z = sq_sequence(&t, &Mat::zeros(4, 4), &spec).unwrap();
        assert!(z.blocks().iter().all(|b| b.norm() == 0.0));
        let x = gaussian_mat(&mut substream(1, 0), 4);
        let s = sq_sequence(&t, &x, &spec).unwrap();
        let id = Mat::identity(4, 4);
        assert!((&s.blocks()[0] - (&id - &a) * &x).norm() < 1e-14 * x.norm());
        let third = (&a * &a * (&id - &a) * &x) * c(3f64.sqrt());
        assert!((&s.blocks()[2] - third).norm() < 1e-13 * x.norm());
    }

    #[test]
    fn closed_form_for_damped_multiplication() {
        let (a, t) = la(8);
        let rho = 0.99;
        let x = gaussian_mat(&mut substream(2, 0), 8);
        for pv in [4.0 / 3.0, 4.0] {
            let spec = SqSpec::new(p(pv), 1.0, SqKind::Col).with_rho(rho);
            let r = square_function(&t, &x, &spec).unwrap();
            let inv = (Mat::identity(8, 8) + &a * c(rho)).try_inverse().unwrap();
            let exact = schatten_norm(&(inv * &x), p(pv)).unwrap();
            assert!(r.converged && ((r.value - exact) / exact).abs() < 1e-6, "{r:?} {exact}");
            assert!(r.lower <= exact && exact <= r.upper);
        }
    }

    #[test]
    fn rad_at_two_equals_col() {
        let (_, t) = la(4);
        let x = gaussian_mat(&mut substream(3, 0), 4);
        let a = square_function(&t, &x, &SqSpec::new(p(2.0), 1.0, SqKind::Rad)).unwrap();
        let b = square_function(&t, &x, &SqSpec::new(p(2.0), 1.0, SqKind::Col)).unwrap();
        assert!((a.value - b.value).abs() < 1e-12 * b.value);
    }

    #[test]
    fn row_of_rank_one_test_matrix() {
        let n = 5;
        let (_, t) = la(n);
        let x = Mat::from_element(n, n, c(1.0 / (n as f64).sqrt()));
        let big_a = crate::matcore::from_real(n, n, |i, j| {
            let (i, j) = (i as i32 + 1, j as i32 + 1);
            2f64.powi(i + j) / (2f64.powi(i) + 2f64.powi(j) - 1.0).powi(2)
        });
        for pv in [3.0, 4.0] {
            let spec = SqSpec::new(p(pv), 1.0, SqKind::Row).with_tol(1e-8);
            let r = square_function(&t, &x, &spec).unwrap();
            let exact = schatten_norm(&big_a, p(pv / 2.0)).unwrap().sqrt();
            assert!(((r.value - exact) / exact).abs() < 1e-6, "{} {exact}", r.value);
        }
    }

    #[test]
    fn rejects_spectral_radius_one() {
        let t = SuperOp::left_mult(diag(&[1.0, 0.5])).unwrap();
        let x = Mat::identity(2, 2);
        let r = square_function(&t, &x, &SqSpec::new(p(3.0), 1.0, SqKind::Col));
        assert!(matches!(r, Err(Error::NoCertifiedTail(_))));
    }

    #[test]
    fn non_normal_tail_is_certified() {
        // a Jordan-type left multiplier: ||T|| > 1 > spectral radius
        let a = Mat::from_row_slice(2, 2, &[c(0.5), c(3.0), c(0.0), c(0.5)]);
        let t = SuperOp::left_mult(a.clone()).unwrap();
        let x = gaussian_mat(&mut substream(4, 0), 2);
        let spec = SqSpec::new(p(2.0), 1.0, SqKind::Col).with_tol(1e-9);
        let r = square_function(&t, &x, &spec).unwrap();
        // oracle: sum_k k ||a^{k-1}(I - a) x||_2^2 summed far past K
        let mut cur = (Mat::identity(2, 2) - &a) * &x;
        let mut s = 0.0;
        for k in 1..4000 {
            s += k as f64 * cur.norm_squared();
            cur = &a * cur;
        }
        assert!(r.lower <= s.sqrt() * (1.0 + 1e-12) && s.sqrt() <= r.upper * (1.0 + 1e-12));
    }

    #[test]
    fn hermitian_input_gives_equal_col_and_row() {
        let g = gaussian_mat(&mut substream(5, 0), 4);
        let h = &g + g.adjoint();
        // L_a is not Hermitian-preserving, but the Schur map with a real
        // symmetric symbol is
        let m = crate::matcore::from_real(4, 4, |i, j| 0.8f64.powi((i as i32 - j as i32).abs()) * 0.9);
        let s = SuperOp::schur(m).unwrap();
        let a = square_function(&s, &h, &SqSpec::new(p(3.0), 1.0, SqKind::Col)).unwrap();
        let b = square_function(&s, &h, &SqSpec::new(p(3.0), 1.0, SqKind::Row)).unwrap();
        assert!((a.value - b.value).abs() < 1e-10 * a.value);
    }

    #[test]
    fn scalar_alpha_ratios() {
        let rho = 0.6;
        let t = SuperOp::left_mult(Mat::identity(3, 3) * c(rho)).unwrap();
        let alphas = [0.5, 1.0, 2.0];
        let tab = alpha_equivalence_experiment(&t, p(3.0), &alphas, SqKind::Col, 3, 9).unwrap();
        let scalar = |a: f64| {
            let s: f64 = (1..2000).map(|k| (k as f64).powf(2.0 * a - 1.0) * rho.powi(2 * (k - 1))).sum();
            s.sqrt() * (1.0 - rho).powf(a)
        };
        for (i, &ai) in alphas.iter().enumerate() {
            assert!((tab.ratios[i][i] - 1.0).abs() < 1e-12);
            for (j, &aj) in alphas.iter().enumerate() {
                let want = scalar(ai) / scalar(aj);
                assert!((tab.ratios[i][j] - want).abs() < 1e-5 * want);
            }
        }
    }

    #[test]
    fn split_dominates_rad() {
        let (_, t) = la(4);
        let x = gaussian_mat(&mut substream(6, 0), 4);
        let spec = SqSpec::new(p(4.0 / 3.0), 1.0, SqKind::Split).with_rho(0.95);
        let s = square_function(&t, &x, &spec).unwrap();
        let r = square_function(&t, &x, &SqSpec { kind: SqKind::Rad, ..spec }).unwrap();
        assert!(s.lower >= r.lower - 1e-9 && s.upper >= r.lower - 1e-9);
    }
}
