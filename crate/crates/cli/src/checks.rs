//! Invariant suites behind `rittkit check`.

use serde::Serialize;

use rittkit::blocknorm::{column_norm, duality_check, row_norm, BlockVec};
use rittkit::decomp::{
    decompose, hankel_regular_check, reconstruct_identity, reconstruction_terms, z_apply, z_star_apply,
    DecompOptions, Splitter,
};
use rittkit::markov::{markov_decomposition_demo, schur_markov, toeplitz_symbol};
use rittkit::matcore::{c, schatten_norm, trace_pairing};
use rittkit::ritt::{cb_lower_bound, fc_upper_bound, min_stolz_angle, ritt_constants, StolzDomain};
use rittkit::sampling::{gaussian_c64, gaussian_mat, random_unitary, substream, uniform_vec};
use rittkit::stolzexample::{growth_experiment, make_diag_a};
use rittkit::superop::NormOptions;
use rittkit::{Exponent, Mat, C64};

pub const SUITES: [&str; 6] = ["identities", "norms", "ritt", "growth", "decomp", "markov"];

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn record(out: &mut Vec<CheckResult>, name: &str, outcome: rittkit::Result<(bool, String)>) {
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    out.push(CheckResult { name: name.into(), passed, detail });
}

fn p(v: f64) -> Exponent {
    Exponent::new(v).expect("valid exponent")
}

/// `None` for an unknown suite name.
pub fn run_suite(name: &str, seed: u64) -> Option<Vec<CheckResult>> {
    let mut out = Vec::new();
    match name {
        "identities" => identities(&mut out, seed),
        "norms" => norms(&mut out, seed),
        "ritt" => ritt(&mut out, seed),
        "growth" => growth(&mut out),
        "decomp" => decomp(&mut out, seed),
        "markov" => markov(&mut out, seed),
        _ => return None,
    }
    Some(out)
}

fn disc_points(seed: u64, count: usize, radius: f64) -> Vec<C64> {
    (0..count)
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let v = uniform_vec(&mut rng, 2, 0.0, 1.0);
            C64::from_polar(radius * v[0].sqrt(), std::f64::consts::TAU * v[1])
        })
        .collect()
}

fn identities(out: &mut Vec<CheckResult>, seed: u64) {
    let pts = disc_points(seed, 100, 0.9);
    record(out, "sum k z^(k-1) = (1-z)^(-2)", {
        let worst = pts
            .iter()
            .map(|&z| {
                let s: C64 = (1..=600).rev().fold(c(0.0), |acc, k| acc * z + c(k as f64));
                let want = (c(1.0) - z).powi(-2);
                (s - want).norm() / want.norm()
            })
            .fold(0.0, f64::max);
        Ok((worst <= 1e-8, format!("max relative error {worst:.3e}")))
    });
    record(out, "sum k z^(2k-2) (1-z^2)^2 = 1", {
        let worst = pts
            .iter()
            .map(|&z| {
                let w = z * z;
                let s: C64 = (1..=1200).rev().fold(c(0.0), |acc, k| acc * w + c(k as f64));
                (s * (c(1.0) - w).powi(2) - c(1.0)).norm()
            })
            .fold(0.0, f64::max);
        Ok((worst <= 1e-10, format!("max error {worst:.3e}")))
    });
    let t = make_diag_a(6).expect("n > 0").left_mult();
    let x = gaussian_mat(&mut substream(seed, 1000), 6);
    record(out, "operator reconstruction identity", (|| {
        let (k, _) = reconstruction_terms(&t, &x, 1e-10, 1_000_000)?;
        let err = (reconstruct_identity(&t, &x, 1.0, k)? - &x).norm() / x.norm();
        Ok((err <= 1e-8, format!("K = {k}, relative error {err:.3e}")))
    })());
    record(out, "Z and Z^* are adjoint", (|| {
        let u = BlockVec::new((0..8).map(|i| gaussian_mat(&mut substream(seed, 2000 + i), 6)).collect())?;
        let lhs = z_apply(&t, &x, 8)?.pairing(&u)?;
        let rhs = trace_pairing(&x, &z_star_apply(&t, &u)?)?;
        let err = (lhs - rhs).norm() / lhs.norm().max(1.0);
        Ok((err <= 1e-10, format!("relative error {err:.3e}")))
    })());
    record(out, "all-column splitter returns (x, 0)", (|| {
        let r = decompose(&t, &x, p(4.0 / 3.0), Splitter::AllColumn, &DecompOptions::default())?;
        let e1 = (&r.x1 - &x).norm() / x.norm();
        let e2 = r.x2.norm() / x.norm();
        Ok((e1 <= 1e-8 && e2 == 0.0, format!("|x1 - x| = {e1:.3e}, |x2| = {e2:.3e}")))
    })());
}

fn norms(out: &mut Vec<CheckResult>, seed: u64) {
    let exps = [p(1.0), p(4.0 / 3.0), p(2.0), p(3.0), Exponent::infinity()];
    record(out, "Schatten norm axioms", (|| {
        let mut bad = 0;
        for i in 0..50u64 {
            let mut rng = substream(seed, i);
            let (x, y) = (gaussian_mat(&mut rng, 4), gaussian_mat(&mut rng, 4));
            let s = gaussian_c64(&mut rng);
            for &q in &exps {
                let (nx, ny) = (schatten_norm(&x, q)?, schatten_norm(&y, q)?);
                let tri = schatten_norm(&(&x + &y), q)? <= (nx + ny) * (1.0 + 1e-12);
                let hom = (schatten_norm(&(&x * s), q)? - s.norm() * nx).abs() <= 1e-12 * s.norm() * nx;
                bad += usize::from(!(tri && hom && nx > 0.0));
            }
        }
        Ok((bad == 0, format!("{bad} failures in 250")))
    })());
    record(out, "Hoelder and unitary invariance", (|| {
        let mut bad = 0;
        for i in 0..50u64 {
            let mut rng = substream(seed, 100 + i);
            let (x, y) = (gaussian_mat(&mut rng, 4), gaussian_mat(&mut rng, 4));
            let (u, v) = (random_unitary(&mut rng, 4), random_unitary(&mut rng, 4));
            for &q in &exps {
                let qs = q.conjugate().expect("p >= 1");
                let lhs = trace_pairing(&x, &y)?.norm();
                let holder = lhs <= schatten_norm(&x, q)? * schatten_norm(&y, qs)? * (1.0 + 1e-12);
                let nx = schatten_norm(&x, q)?;
                let inv = (schatten_norm(&(&u * &x * &v), q)? - nx).abs() <= 1e-10 * nx;
                bad += usize::from(!(holder && inv));
            }
        }
        Ok((bad == 0, format!("{bad} failures in 250")))
    })());
    record(out, "column = row at p = 2", (|| {
        let mut worst = 0.0_f64;
        for i in 0..50u64 {
            let mut rng = substream(seed, 200 + i);
            let x = BlockVec::new((0..5).map(|_| gaussian_mat(&mut rng, 3)).collect())?;
            let (cn, rn) = (column_norm(&x, p(2.0))?, row_norm(&x, p(2.0))?);
            worst = worst.max((cn - rn).abs() / cn);
        }
        Ok((worst <= 1e-12, format!("max relative gap {worst:.3e}")))
    })());
    record(out, "column/row duality at (4/3, 4)", (|| {
        let mut bad = 0;
        for i in 0..200u64 {
            let mut rng = substream(seed, 300 + i);
            let x = BlockVec::new((0..4).map(|_| gaussian_mat(&mut rng, 3)).collect())?;
            let y = BlockVec::new((0..4).map(|_| gaussian_mat(&mut rng, 3)).collect())?;
            bad += usize::from(!duality_check(&x, &y, p(4.0 / 3.0))?);
        }
        Ok((bad == 0, format!("{bad} failures in 200")))
    })());
}

fn poly_of_diag(a: &[f64], phi: &[C64]) -> f64 {
    a.iter()
        .map(|&x| phi.iter().rev().fold(c(0.0), |acc, &co| acc * c(x) + co).norm())
        .fold(0.0, f64::max)
}

fn ritt(out: &mut Vec<CheckResult>, seed: u64) {
    let a = make_diag_a(8).expect("n > 0");
    let t = a.left_mult();
    record(out, "power and difference bounds of L_a", (|| {
        let r = ritt_constants(&t, 2000, p(4.0 / 3.0))?;
        let ok = (r.power_bound.upper - 1.0).abs() <= 1e-12 && (r.diff_bound.upper - 0.5).abs() <= 1e-12;
        Ok((ok, format!("power {:.15}, diff {:.15}", r.power_bound.upper, r.diff_bound.upper)))
    })());
    record(out, "Stolz domain of L_a", (|| {
        let gamma = min_stolz_angle(&t, 0.05)?.ok_or(rittkit::Error::InvalidArgument("no angle".into()))?;
        let d = StolzDomain::new(gamma)?;
        let ok = a.entries().iter().all(|&v| d.contains(c(v))) && !d.contains(c(1.0));
        Ok((ok, format!("gamma = {gamma:.4}")))
    })());
    record(out, "functional calculus bounds", (|| {
        let gamma = min_stolz_angle(&t, 0.05)?.expect("L_a has a Stolz angle");
        let d = StolzDomain::new(gamma)?;
        let mut bad = 0;
        for i in 0..10u64 {
            let mut rng = substream(seed, i);
            let phi: Vec<C64> = (0..=8).map(|_| gaussian_c64(&mut rng)).collect();
            let exact = poly_of_diag(a.entries(), &phi);
            let up = fc_upper_bound(&t, &d, &phi, p(4.0 / 3.0), 32)?;
            let cb = cb_lower_bound(&t, 2, p(4.0 / 3.0), &phi, 4, seed + i)?;
            bad += usize::from(up.bound < exact || cb > exact + 1e-8);
        }
        Ok((bad == 0, format!("{bad} failures in 10")))
    })());
}

fn growth(out: &mut Vec<CheckResult>) {
    let ns = [4, 8, 16, 32, 64];
    record(out, "p = 4 slope and column scale", (|| {
        let r = growth_experiment(p(4.0), &ns)?;
        let scale_ok = r.rows.iter().all(|row| {
            let s = row.col_norm / (row.n as f64).sqrt();
            (0.5..=0.67).contains(&s)
        });
        Ok((scale_ok && (0.2..=0.35).contains(&r.slope), format!("slope {:.4}", r.slope)))
    })());
    record(out, "p = 3 slope", (|| {
        let r = growth_experiment(p(3.0), &ns)?;
        Ok((r.slope >= 1.0 / 6.0 - 0.05, format!("slope {:.4}", r.slope)))
    })());
    record(out, "p = 4/3 row/column slope", (|| {
        let r = growth_experiment(p(4.0 / 3.0), &ns)?;
        Ok((r.slope > 0.1, format!("slope {:.4}", r.slope)))
    })());
}

fn decomp(out: &mut Vec<CheckResult>, seed: u64) {
    let t = make_diag_a(6).expect("n > 0").left_mult();
    record(out, "rad-optimal decompositions of L_a", (|| {
        let (mut res, mut cst) = (0.0_f64, 0.0_f64);
        for i in 0..4u64 {
            let x = gaussian_mat(&mut substream(seed + i, 0), 6);
            let mut opts = DecompOptions::default();
            opts.rad.seed = seed + i;
            let r = decompose(&t, &x, p(4.0 / 3.0), Splitter::RadOptimal, &opts)?;
            res = res.max(r.residual);
            cst = cst.max(r.constant);
        }
        Ok((res <= 1e-6 && cst.is_finite() && cst <= 50.0, format!("max residual {res:.3e}, max constant {cst:.4}")))
    })());
    record(out, "Hankel regular norm", (|| {
        let (h64, h128) = (hankel_regular_check(64)?, hankel_regular_check(128)?);
        Ok(((h64 - h128).abs() <= 0.01 && h128 <= 2.0, format!("K=64: {h64:.5}, K=128: {h128:.5}")))
    })());
}

fn markov(out: &mut Vec<CheckResult>, seed: u64) {
    let sym = toeplitz_symbol(4, 0.9);
    record(out, "Toeplitz Schur map is Markov", (|| {
        let m = schur_markov(sym.clone())?;
        Ok((m.certificate.all(), format!("{:?}", m.certificate)))
    })());
    record(out, "spectrum is the symbol entries", (|| {
        let m = schur_markov(sym.clone())?;
        let mut got: Vec<f64> = m.op.eigenvalues()?.iter().map(|z| z.re).collect();
        let mut want: Vec<f64> = sym.iter().map(|z| z.re).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok((err <= 1e-12, format!("max error {err:.3e}")))
    })());
    record(out, "contraction on S^1, S^2, S^inf", (|| {
        let m = schur_markov(sym.clone())?;
        let mut worst = 0.0_f64;
        for q in [p(1.0), p(2.0), Exponent::infinity()] {
            worst = worst.max(m.op.op_norm(q, &NormOptions { seed, ..NormOptions::default() })?.upper);
        }
        Ok((worst <= 1.0 + 1e-9, format!("max norm bound {worst:.12}")))
    })());
    record(out, "decomposition off the fixed space", (|| {
        let m = schur_markov(sym.clone())?;
        let x: Mat = gaussian_mat(&mut substream(seed, 0), 4);
        let mut opts = DecompOptions::default();
        opts.rad.seed = seed;
        let d = markov_decomposition_demo(&m, p(4.0 / 3.0), &x, Splitter::RadOptimal, &opts)?;
        Ok((d.result.residual <= 1e-6, format!("residual {:.3e}, constant {:.4}", d.result.residual, d.result.constant)))
    })());
}
