//! Ritt diagnostics for maps on `S^p_n`: power and difference bounds, the
//! resolvent scan, Col/Row sampling, Stolz domains, fractional powers and
//! bounds for the `H^inf(B_gamma)` functional calculus.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::blocknorm::{column_norm, row_norm, BlockVec};
use crate::error::{Error, Result};
use crate::matcore::{c, schatten_norm, BranchCut, Exponent, Mat, C64};
use crate::quadrature::Estimate;
use crate::sampling::{gaussian_c64, gaussian_mat, gaussian_rect, rank_one, substream};
pub use crate::superop::{NormBracket, NormOptions, SuperOp};

/// The Stolz domain `B_gamma`: interior of the convex hull of `1` and the
/// disc `|z| < sin gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StolzDomain {
    gamma: f64,
}

impl StolzDomain {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!("Stolz angle {gamma} not in (0, pi/2)")));
        }
        Ok(StolzDomain { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Radius `sin gamma` of the inner disc.
    pub fn radius(&self) -> f64 {
        self.gamma.sin()
    }

    /// The two points where the sides from `1` touch the disc,
    /// `sin(gamma) e^{+-i(pi/2 - gamma)}`.
    pub fn tangent_points(&self) -> (C64, C64) {
        let t = C64::from_polar(self.radius(), FRAC_PI_2 - self.gamma);
        (t, t.conj())
    }

    /// Open membership. Outside the disc, a point belongs to the hull iff it
    /// lies strictly inside the angle of half-width `gamma` at `1` and on the
    /// vertex side of the chord through the tangent points.
    pub fn contains(&self, z: C64) -> bool {
        let s = self.radius();
        if z.norm() < s {
            return true;
        }
        let w = c(1.0) - z;
        if w.norm() == 0.0 {
            return false;
        }
        z.re >= s * s && w.arg().abs() < self.gamma
    }

    /// Points along the closed boundary with arc-length spacing at most `h`,
    /// starting and ending at the vertex `1`.
    fn boundary_samples(&self, h: f64) -> Vec<C64> {
        let s = self.radius();
        let beta = FRAC_PI_2 - self.gamma;
        let side = self.gamma.cos();
        let (t_up, t_lo) = self.tangent_points();
        let mut pts = Vec::new();
        let m = (side / h).ceil() as usize;
        for i in 0..m {
            pts.push(c(1.0) + (t_up - c(1.0)) * c(i as f64 / m as f64));
        }
        let arc = 2.0 * (PI - beta) * s;
        let m = ((arc / h).ceil() as usize).max(1);
        for i in 0..m {
            pts.push(C64::from_polar(s, beta + (2.0 * PI - 2.0 * beta) * i as f64 / m as f64));
        }
        let m = (side / h).ceil() as usize;
        for i in 0..=m {
            pts.push(t_lo + (c(1.0) - t_lo) * c(i as f64 / m as f64));
        }
        pts
    }

    /// A certified upper bound for `sup_{B_gamma} |phi|`: the maximum over a
    /// boundary mesh of spacing `h` plus `L h / 2`, with `L = sum k |c_k|`
    /// bounding `|phi'|` on the closed unit disc.
    pub fn sup_upper(&self, phi: &[C64]) -> f64 {
        let h = 1e-3;
        let lip: f64 = phi.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck.norm()).sum();
        let top = self
            .boundary_samples(h)
            .iter()
            .map(|&z| crate::superop::horner(phi, z).norm())
            .fold(0.0, f64::max);
        top + 0.5 * lip * h
    }
}

pub fn stolz_membership(z: C64, d: &StolzDomain) -> bool {
    d.contains(z)
}

/// Output of [`ritt_constants`]. Brackets collapse to a point when the
/// norms involved are exactly computable.
#[derive(Clone, Debug, Serialize)]
pub struct RittReport {
    /// `sup_{0 <= n <= n_max} ||T^n||`.
    pub power_bound: NormBracket,
    /// `sup_{1 <= n <= n_max} n ||T^n - T^{n-1}||`.
    pub diff_bound: NormBracket,
    /// The `n` at which the lower end of `diff_bound` is attained.
    pub diff_argmax: usize,
    /// `sup |lambda - 1| ||R(lambda, T)||` over the scanned grid.
    pub resolvent_bound: NormBracket,
    pub n_max: usize,
    pub radii: Vec<f64>,
    pub angles: usize,
    pub spectral_radius: f64,
    /// Grid points where `lambda - T` was singular, as `(re, im)`.
    pub flagged: Vec<(f64, f64)>,
}

fn sup_bracket(acc: &mut NormBracket, b: NormBracket, scale: f64) {
    acc.lower = acc.lower.max(scale * b.lower);
    acc.upper = acc.upper.max(scale * b.upper);
}

/// Power, difference and resolvent constants of `T` on `S^p_n`.
pub fn ritt_constants(t: &SuperOp, n_max: usize, p: Exponent) -> Result<RittReport> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let opts = NormOptions::default();
    let mut power = NormBracket::exact(1.0);
    let mut diff = NormBracket::exact(0.0);
    let mut diff_argmax = 0;
    let mut prev = SuperOp::identity(t.dim());
    for n in 1..=n_max {
        let cur = prev.compose(t)?;
        sup_bracket(&mut power, cur.op_norm(p, &opts)?, 1.0);
        let d = cur.add_scaled(&prev, c(-1.0))?.op_norm(p, &opts)?;
        if n as f64 * d.lower > diff.lower {
            diff_argmax = n;
        }
        sup_bracket(&mut diff, d, n as f64);
        prev = cur;
    }

    let radii: Vec<f64> = (-3..=1).map(|e| 10f64.powi(e)).collect();
    let angles = 64;
    let mut resolvent = NormBracket::exact(0.0);
    let mut flagged = Vec::new();
    for &r in &radii {
        for j in 0..angles {
            let lambda = c(1.0) + C64::from_polar(r, 2.0 * PI * j as f64 / angles as f64);
            if lambda.norm() <= 1.0 {
                continue;
            }
            let ok = match t.resolvent(lambda) {
                Ok(res) => match res.op_norm(p, &opts) {
                    Ok(b) if b.upper.is_finite() => {
                        sup_bracket(&mut resolvent, b, r);
                        true
                    }
                    _ => false,
                },
                Err(Error::Singular(_)) => false,
                Err(e) => return Err(e),
            };
            if !ok {
                flagged.push((lambda.re, lambda.im));
            }
        }
    }
    Ok(RittReport {
        power_bound: power,
        diff_bound: diff,
        diff_argmax,
        resolvent_bound: resolvent,
        n_max,
        radii,
        angles,
        spectral_radius: t.spectral_radius()?,
        flagged,
    })
}

fn side_bound_sample(
    family: &[SuperOp],
    p: Exponent,
    trials: usize,
    seed: u64,
    column: bool,
) -> Result<f64> {
    if family.is_empty() || trials == 0 {
        return Err(Error::InvalidArgument("need a nonempty family and trials >= 1".into()));
    }
    let n = family[0].dim();
    if family.iter().any(|t| t.dim() != n) {
        return Err(Error::InvalidArgument("family members act on different sizes".into()));
    }
    let norm = if column { column_norm } else { row_norm };
    let ratios: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = substream(seed, trial as u64);
            let len = rng.random_range(1..=6usize);
            let mut xs = Vec::with_capacity(len);
            let mut ys = Vec::with_capacity(len);
            for _ in 0..len {
                let x = if rng.random_bool(0.5) { gaussian_mat(&mut rng, n) } else { rank_one(&mut rng, n) };
                let op = &family[rng.random_range(0..family.len())];
                ys.push(op.apply(&x));
                xs.push(x);
            }
            let den = norm(&BlockVec::new(xs)?, p)?;
            Ok(if den == 0.0 { 0.0 } else { norm(&BlockVec::new(ys)?, p)? / den })
        })
        .collect();
    ratios.into_iter().try_fold(0.0, |m, r| Ok(f64::max(m, r?)))
}

/// Largest sampled `col((T_k x_k)) / col((x_k))` with `T_k` drawn from
/// `family`: a lower bound for the Col-bound of the family.
pub fn col_bound_sample(family: &[SuperOp], p: Exponent, trials: usize, seed: u64) -> Result<f64> {
    side_bound_sample(family, p, trials, seed, true)
}

/// Row analogue of [`col_bound_sample`].
pub fn row_bound_sample(family: &[SuperOp], p: Exponent, trials: usize, seed: u64) -> Result<f64> {
    side_bound_sample(family, p, trials, seed, false)
}

const ANGLE_STEP: f64 = 1e-3;

/// Smallest angle on the grid `k * 1e-3` whose Stolz domain contains every
/// eigenvalue `!= 1`, enlarged by `margin`; `None` if no domain does.
pub fn min_stolz_angle(t: &SuperOp, margin: f64) -> Result<Option<f64>> {
    if !(margin > 0.0) {
        return Err(Error::InvalidArgument("margin must be positive".into()));
    }
    let ev: Vec<C64> =
        t.eigenvalues()?.into_iter().filter(|z| (z - c(1.0)).norm() > 1e-12).collect();
    let fits = |k: usize| {
        let d = StolzDomain { gamma: k as f64 * ANGLE_STEP };
        ev.iter().all(|&z| d.contains(z))
    };
    let k_max = (FRAC_PI_2 / ANGLE_STEP).ceil() as usize - 1;
    if !fits(k_max) {
        return Ok(None);
    }
    // membership is monotone in the angle
    let (mut lo, mut hi) = (0usize, k_max);
    if fits(1) {
        hi = 1;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some((hi as f64 * ANGLE_STEP + margin).min(FRAC_PI_2 - ANGLE_STEP)))
}

/// `(I - T)^alpha`, principal branch.
pub fn fractional_power(t: &SuperOp, alpha: f64) -> Result<SuperOp> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be positive")));
    }
    if alpha == 1.0 {
        return Ok(t.poly(&[c(1.0), c(-1.0)]));
    }
    let cut = BranchCut::one_minus_z();
    Ok(t.map_function(|z| (c(1.0) - z).powf(alpha), Some(&cut))?.0)
}

/// Quadrature bound of [`fc_upper_bound`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FcBound {
    pub bound: f64,
    /// Estimated quadrature error (difference between `n` and `2n` nodes).
    pub error: f64,
}

struct Node {
    z: C64,
    /// Quadrature weight times `|dz| / 2 pi` times the resolvent norm bound.
    w: f64,
}

struct Panel {
    coarse: Vec<Node>,
    fine: Vec<Node>,
}

/// The contour `d B_gamma` with the vertex cut off by a notch of radius
/// `delta`, discretized once so that many polynomials can be bounded cheaply.
pub struct FcContour {
    panels: Vec<Panel>,
    pub delta: f64,
}

const NOTCH: f64 = 1e-3;

fn check_spectrum(t: &SuperOp, d: &StolzDomain) -> Result<f64> {
    let mut gap = f64::INFINITY;
    for z in t.eigenvalues()? {
        let dist = (z - c(1.0)).norm();
        if dist < 1e-12 {
            return Err(Error::EigenvalueOne);
        }
        if !d.contains(z) {
            return Err(Error::SpectrumOutsideContour(z));
        }
        gap = gap.min(dist);
    }
    Ok(gap)
}

impl FcContour {
    /// `nodes` Gauss points per panel on the sides and the notch, twice as
    /// many on the arc; the error estimate compares against doubled counts.
    pub fn new(t: &SuperOp, d: &StolzDomain, p: Exponent, nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidArgument("nodes must be positive".into()));
        }
        let gap = check_spectrum(t, d)?;
        let delta = NOTCH.min(0.5 * gap);
        let g = d.gamma();
        let s = d.radius();
        let beta = FRAC_PI_2 - g;
        let side = g.cos();
        let resolvent = |z: C64| -> Result<f64> { t.resolvent(z)?.op_norm_upper(p) };

        // each piece: parametrization, |z'(u)|, breakpoints, nodes per panel
        type Param = Box<dyn Fn(f64) -> (C64, f64)>;
        let up = C64::from_polar(1.0, PI - g);
        let lo = up.conj();
        let graded: Vec<f64> = {
            let count = ((side / delta).log2().ceil() as usize).max(1);
            (0..=count).map(|i| delta * (side / delta).powf(i as f64 / count as f64)).collect()
        };
        let arc_breaks: Vec<f64> =
            (0..=8).map(|i| beta + (2.0 * PI - 2.0 * beta) * i as f64 / 8.0).collect();
        let pieces: Vec<(Param, Vec<f64>, usize)> = vec![
            (Box::new(move |u| (c(1.0) + up * c(u), 1.0)), graded.clone(), nodes),
            (Box::new(move |u| (C64::from_polar(s, u), s)), arc_breaks, 2 * nodes),
            (Box::new(move |u| (c(1.0) + lo * c(u), 1.0)), graded, nodes),
            (
                Box::new(move |u| (c(1.0) + C64::from_polar(delta, u), delta)),
                vec![PI - g, PI + g],
                nodes,
            ),
        ];

        let mut panels = Vec::new();
        for (param, breaks, n) in pieces {
            let coarse_rule = crate::quadrature::gauss_legendre(n);
            let fine_rule = crate::quadrature::gauss_legendre(2 * n);
            for w in breaks.windows(2) {
                let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                let build = |(xs, ws): &(Vec<f64>, Vec<f64>)| -> Result<Vec<Node>> {
                    xs.iter()
                        .zip(ws)
                        .map(|(x, wt)| {
                            let (z, speed) = param(mid + half * x);
                            let r = resolvent(z)?;
                            Ok(Node { z, w: wt * half * speed * r / (2.0 * PI) })
                        })
                        .collect()
                };
                panels.push(Panel { coarse: build(&coarse_rule)?, fine: build(&fine_rule)? });
            }
        }
        Ok(FcContour { panels, delta })
    }

    /// `(1 / 2 pi) \oint |phi(z)| ||R(z, T)|| |dz|` with an error estimate.
    pub fn bound(&self, phi: &[C64]) -> FcBound {
        let eval = |nodes: &[Node]| -> f64 {
            nodes.iter().map(|nd| nd.w * crate::superop::horner(phi, nd.z).norm()).sum()
        };
        let total = self.panels.iter().fold(Estimate::default(), |acc, pn| {
            let (lo, hi) = (eval(&pn.coarse), eval(&pn.fine));
            acc + Estimate { value: hi, error: (hi - lo).abs() }
        });
        FcBound { bound: total.value, error: total.error }
    }
}

/// Cauchy-integral majorant for `||phi(T)||_{S^p -> S^p}`.
pub fn fc_upper_bound(
    t: &SuperOp,
    d: &StolzDomain,
    phi: &[C64],
    p: Exponent,
    nodes: usize,
) -> Result<FcBound> {
    Ok(FcContour::new(t, d, p, nodes)?.bound(phi))
}

/// Sampled lower bound for the `H^inf(B_gamma)` calculus constant:
/// the best `||phi(T)|| / sup_{B_gamma} |phi|` over `phi = 1` and `trials`
/// random polynomials of degree at most `degree`.
pub fn fc_lower_bound(
    t: &SuperOp,
    d: &StolzDomain,
    degree: usize,
    trials: usize,
    p: Exponent,
    seed: u64,
) -> Result<f64> {
    check_spectrum(t, d)?;
    let opts = NormOptions { seed, ..NormOptions::default() };
    let one = [c(1.0)];
    let mut best = t.poly(&one).op_norm(p, &opts)?.lower / d.sup_upper(&one);
    for trial in 0..trials {
        let mut rng = substream(seed, trial as u64);
        let phi: Vec<C64> = (0..=degree).map(|_| gaussian_c64(&mut rng)).collect();
        let sup = d.sup_upper(&phi);
        if sup == 0.0 {
            continue;
        }
        best = best.max(t.poly(&phi).op_norm(p, &opts)?.lower / sup);
    }
    Ok(best)
}

/// Sampled lower bound for `||I_{S^p_m} (x) phi(T)||`. Samples of every
/// amplification level `j <= m` are included, so the bound is monotone in
/// `m` for a fixed seed.
pub fn cb_lower_bound(
    t: &SuperOp,
    m: usize,
    p: Exponent,
    phi: &[C64],
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("amplification level m must be at least 1".into()));
    }
    let op = t.poly(phi);
    let n = t.dim();
    let mut best = 0.0_f64;
    for j in 1..=m {
        for trial in 0..trials {
            let mut rng = substream(seed, ((j - 1) * trials + trial) as u64);
            let y = if trial % 2 == 0 {
                gaussian_mat(&mut rng, j * n)
            } else {
                let u = gaussian_rect(&mut rng, j * n, 1);
                let v = gaussian_rect(&mut rng, j * n, 1);
                u * v.adjoint()
            };
            let mut out = Mat::zeros(j * n, j * n);
            for r in 0..j {
                for s in 0..j {
                    let block = y.view((r * n, s * n), (n, n)).into_owned();
                    out.view_mut((r * n, s * n), (n, n)).copy_from(&op.apply(&block));
                }
            }
            let den = schatten_norm(&y, p)?;
            if den > 0.0 {
                best = best.max(schatten_norm(&out, p)? / den);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{diag, op_norm2};

    fn la(n: usize) -> (Mat, SuperOp) {
        let a = diag(&(1..=n).map(|k| 1.0 - 0.5f64.powi(k as i32)).collect::<Vec<_>>());
        (a.clone(), SuperOp::left_mult(a).unwrap())
    }

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn membership_examples() {
        for g in [0.01, 0.5, 1.5] {
            let d = StolzDomain::new(g).unwrap();
            assert!(d.contains(c(0.0)));
            assert!(!d.contains(c(1.0)));
            assert!(d.contains(c(0.999)));
            assert!(!d.contains(c(-1.0)));
        }
        assert!(StolzDomain::new(0.0).is_err() && StolzDomain::new(FRAC_PI_2).is_err());
    }

    #[test]
    fn identity_constants() {
        let r = ritt_constants(&SuperOp::identity(2), 5, p(3.0)).unwrap();
        assert_eq!(r.power_bound.upper, 1.0);
        assert_eq!(r.diff_bound.upper, 0.0);
    }

    #[test]
    fn multiplication_constants() {
        let (_, t) = la(8);
        let r = ritt_constants(&t, 50, p(4.0)).unwrap();
        assert!((r.power_bound.upper - 1.0).abs() < 1e-12 && r.power_bound.lower == r.power_bound.upper);
        assert!((r.diff_bound.upper - 0.5).abs() < 1e-12);
        assert!(r.resolvent_bound.upper.is_finite() && r.flagged.is_empty());
    }

    #[test]
    fn resolvent_grid_flags_spectrum() {
        // eigenvalue 1 + 10^{-3} sits on the grid
        let t = SuperOp::left_mult(diag(&[1.001, 0.5])).unwrap();
        let r = ritt_constants(&t, 1, p(2.0)).unwrap();
        assert!(!r.flagged.is_empty());
    }

    #[test]
    fn col_sampling_of_identity_is_one() {
        let v = col_bound_sample(&[SuperOp::identity(3)], p(1.5), 20, 1).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = row_bound_sample(&[SuperOp::identity(3)], p(1.5), 20, 1).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stolz_angle_examples() {
        let t = SuperOp::left_mult(diag(&[0.5, 0.75])).unwrap();
        let g = min_stolz_angle(&t, 1e-2).unwrap().unwrap();
        assert!((g - (ANGLE_STEP + 1e-2)).abs() < 1e-12);
        let t = SuperOp::left_mult(diag(&[-0.5, 0.2])).unwrap();
        let g = min_stolz_angle(&t, 1e-2).unwrap().unwrap();
        assert!((g - (PI / 6.0 + 1e-2)).abs() < 2e-3);
        let t = SuperOp::left_mult(diag(&[1.1, 0.2])).unwrap();
        assert!(min_stolz_angle(&t, 1e-2).unwrap().is_none());
    }

    #[test]
    fn fractional_power_examples() {
        let (a, t) = la(4);
        let one = fractional_power(&t, 1.0).unwrap();
        let x = gaussian_mat(&mut substream(4, 0), 4);
        assert!((one.apply(&x) - (&x - &a * &x)).norm() < 1e-12 * x.norm());
        let half = fractional_power(&t, 0.5).unwrap();
        let twice = half.apply(&half.apply(&x));
        assert!((twice - one.apply(&x)).norm() < 1e-8 * x.norm());
        let q = fractional_power(&t, 0.3).unwrap();
        let oracle = diag(&(1..=4).map(|k| 0.5f64.powi(k).powf(0.3)).collect::<Vec<_>>());
        assert!((q.apply(&x) - oracle * &x).norm() < 1e-12 * x.norm());
        let bad = SuperOp::left_mult(diag(&[2.0])).unwrap();
        assert!(matches!(fractional_power(&bad, 0.5), Err(Error::BranchCut(_))));
    }

    #[test]
    fn fc_upper_bound_dominates_simple_cases() {
        let (a, t) = la(4);
        let d = StolzDomain::new(0.3).unwrap();
        let b = fc_upper_bound(&t, &d, &[c(2.0)], p(2.0), 32).unwrap();
        assert!(b.bound + b.error >= 2.0);
        let b = fc_upper_bound(&t, &d, &[c(0.0), c(1.0)], p(3.0), 32).unwrap();
        assert!(b.bound >= op_norm2(&a).unwrap());
        let bad = SuperOp::left_mult(diag(&[1.0, 0.5])).unwrap();
        assert!(matches!(fc_upper_bound(&bad, &d, &[c(1.0)], p(2.0), 8), Err(Error::EigenvalueOne)));
    }

    #[test]
    fn fc_error_shrinks_with_nodes() {
        let (_, t) = la(3);
        let d = StolzDomain::new(0.6).unwrap();
        let phi = [c(0.3), c(-0.5), c(0.2)];
        let e1 = fc_upper_bound(&t, &d, &phi, p(2.0), 8).unwrap().error;
        let e2 = fc_upper_bound(&t, &d, &phi, p(2.0), 16).unwrap().error;
        assert!(e2 <= 0.5 * e1, "{e1} {e2}");
    }

    #[test]
    fn fc_lower_bound_examples() {
        let (_, t) = la(4);
        let d = StolzDomain::new(0.3).unwrap();
        let v = fc_lower_bound(&t, &d, 0, 10, p(3.0), 7).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = fc_lower_bound(&t, &d, 5, 20, p(3.0), 7).unwrap();
        assert!((1.0 - 1e-9..=1.0 + 1e-6).contains(&v));
    }

    #[test]
    fn cb_bound_is_monotone_in_m() {
        let (_, t) = la(3);
        let phi = [c(0.1), c(0.7), c(-0.3)];
        let b1 = cb_lower_bound(&t, 1, p(1.5), &phi, 6, 3).unwrap();
        let b2 = cb_lower_bound(&t, 2, p(1.5), &phi, 6, 3).unwrap();
        assert!(b2 >= b1 - 1e-9);
    }
}
