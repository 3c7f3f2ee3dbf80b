//! Dense complex matrix kernel: singular values, Schatten (quasi-)norms,
//! the modulus `|x| = (x^*x)^{1/2}`, the trace pairing, spectra and primary
//! matrix functions.
//!
//! Schatten norms always use the unnormalized trace.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// A dense complex matrix. Elements of `S^p_n` are square; a few internal
/// helpers (stacked block columns, realignments) also use rectangular ones.
pub type Mat = DMatrix<C64>;

// nalgebra's own default; a tighter threshold can return inaccurate singular vectors
pub(crate) const EPS: f64 = 5.0 * f64::EPSILON;
pub(crate) const MAX_SWEEPS: usize = 10_000;

/// A Schatten exponent `p` in `(0, inf]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p <= 0.0 {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Exponent(p))
    }

    pub fn infinity() -> Self {
        Exponent(f64::INFINITY)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// True for `p < 1`, where `||.||_p` is only a quasi-norm.
    pub fn is_quasi(self) -> bool {
        self.0 < 1.0
    }

    /// The conjugate exponent `p*` with `1/p + 1/p* = 1`; `None` for `p < 1`.
    pub fn conjugate(self) -> Option<Exponent> {
        let p = self.0;
        if p < 1.0 {
            None
        } else if p == 1.0 {
            Some(Exponent::infinity())
        } else if p.is_infinite() {
            Some(Exponent(1.0))
        } else {
            Some(Exponent(p / (p - 1.0)))
        }
    }

    /// `p / 2`, the exponent on which `|x|^2` is measured.
    pub fn half(self) -> Exponent {
        Exponent(self.0 / 2.0)
    }
}

/// Accepts decimals, fractions such as `4/3`, and `inf`.
impl std::str::FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse exponent {s:?}"));
        let v = match s {
            "inf" | "infinity" => f64::INFINITY,
            _ => match s.split_once('/') {
                Some((a, b)) => {
                    let a: f64 = a.trim().parse().map_err(|_| bad())?;
                    let b: f64 = b.trim().parse().map_err(|_| bad())?;
                    a / b
                }
                None => s.parse().map_err(|_| bad())?,
            },
        };
        Exponent::new(v)
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn check_finite(x: &Mat) -> Result<()> {
    if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn check_square(x: &Mat) -> Result<usize> {
    if x.nrows() != x.ncols() {
        return Err(Error::NotSquare { rows: x.nrows(), cols: x.ncols() });
    }
    check_finite(x)?;
    Ok(x.nrows())
}

pub fn check_same_dim(x: &Mat, y: &Mat) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.nrows() });
    }
    Ok(())
}

/// Matrix units `e_{ij}` (zero-based indices).
pub fn unit(n: usize, i: usize, j: usize) -> Mat {
    let mut e = Mat::zeros(n, n);
    e[(i, j)] = c(1.0);
    e
}

pub fn diag(entries: &[f64]) -> Mat {
    let n = entries.len();
    Mat::from_fn(n, n, |i, j| if i == j { c(entries[i]) } else { C64::new(0.0, 0.0) })
}

pub fn from_real(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Mat {
    Mat::from_fn(rows, cols, |i, j| c(f(i, j)))
}

/// Singular values in nonincreasing order. Accepts rectangular input.
pub fn singular_values(x: &Mat) -> Result<Vec<f64>> {
    check_finite(x)?;
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let svd = x
        .clone()
        .try_svd(false, false, EPS, MAX_SWEEPS)
        .ok_or(Error::NoConvergence("singular value decomposition"))?;
    let mut s: Vec<f64> = svd.singular_values.iter().map(|v| v.max(0.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// `(sum s_i^p)^{1/p}` computed without overflow; `max s_i` for `p = inf`.
pub fn lp_of_values(values: &[f64], p: Exponent) -> f64 {
    let top = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return 0.0;
    }
    if p.is_infinite() {
        return top;
    }
    let p = p.value();
    let sum: f64 = values.iter().map(|v| (v.abs() / top).powf(p)).sum();
    top * sum.powf(1.0 / p)
}

/// The Schatten `p`-norm (quasi-norm when `p < 1`).
pub fn schatten_norm(x: &Mat, p: Exponent) -> Result<f64> {
    if p.value() == 2.0 {
        check_finite(x)?;
        return Ok(x.norm());
    }
    Ok(lp_of_values(&singular_values(x)?, p))
}

/// Operator norm on `l^2`, i.e. the Schatten `inf`-norm.
pub fn op_norm2(x: &Mat) -> Result<f64> {
    schatten_norm(x, Exponent::infinity())
}

/// Eigen-decomposition of the Hermitian part of `h`: eigenvalues ascending,
/// with matching eigenvectors as columns.
pub fn hermitian_eigen(h: &Mat) -> Result<(Vec<f64>, Mat)> {
    check_square(h)?;
    let sym = (h + h.adjoint()) * c(0.5);
    let eig = SymmetricEigen::try_new(sym, EPS, MAX_SWEEPS)
        .ok_or(Error::NoConvergence("Hermitian eigensolver"))?;
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Mat::from_fn(h.nrows(), h.nrows(), |r, k| eig.eigenvectors[(r, order[k])]);
    Ok((values, vectors))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &Mat) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(h)?.0)
}

/// `h^t` for Hermitian positive semidefinite `h`; negative roundoff
/// eigenvalues are clamped to zero.
pub fn psd_power(h: &Mat, t: f64) -> Result<Mat> {
    let (vals, vecs) = hermitian_eigen(h)?;
    let top = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = top * 1e-300;
    let d: Vec<C64> = vals
        .iter()
        .map(|&v| if v > floor { c(v.powf(t)) } else { c(0.0) })
        .collect();
    Ok(scale_columns(&vecs, &d) * vecs.adjoint())
}

pub(crate) fn scale_columns(m: &Mat, d: &[C64]) -> Mat {
    let mut out = m.clone();
    for (j, dj) in d.iter().enumerate() {
        out.column_mut(j).scale_mut_c(*dj);
    }
    out
}

trait ScaleC {
    fn scale_mut_c(&mut self, s: C64);
}

impl<S> ScaleC for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_c(&mut self, s: C64) {
        for z in self.iter_mut() {
            *z *= s;
        }
    }
}

/// The modulus `|x| = (x^*x)^{1/2}`, built from the SVD `x = U S V^*` as
/// `V S V^*`.
pub fn modulus(x: &Mat) -> Result<Mat> {
    check_square(x)?;
    let svd = x
        .clone()
        .try_svd(false, true, EPS, MAX_SWEEPS)
        .ok_or(Error::NoConvergence("singular value decomposition"))?;
    let v_t = svd.v_t.expect("requested V^*");
    let s: Vec<C64> = svd.singular_values.iter().map(|&v| c(v)).collect();
    let v = v_t.adjoint();
    Ok(scale_columns(&v, &s) * v_t)
}

/// The bilinear trace pairing `<x, y> = Tr(xy)`.
pub fn trace_pairing(x: &Mat, y: &Mat) -> Result<C64> {
    check_same_dim(x, y)?;
    if x.nrows() != y.ncols() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.ncols() });
    }
    let n = x.nrows();
    let mut s = c(0.0);
    for i in 0..n {
        for j in 0..n {
            s += x[(i, j)] * y[(j, i)];
        }
    }
    Ok(s)
}

/// Complex Schur form `x = Q T Q^*` with `T` upper triangular.
pub fn schur(x: &Mat) -> Result<(Mat, Mat)> {
    check_square(x)?;
    let s = x
        .clone()
        .try_schur(EPS, MAX_SWEEPS)
        .ok_or(Error::NoConvergence("Schur decomposition"))?;
    let (q, mut t) = s.unpack();
    // clear roundoff below the diagonal
    for j in 0..t.ncols() {
        for i in (j + 1)..t.nrows() {
            t[(i, j)] = c(0.0);
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(x: &Mat) -> Result<Vec<C64>> {
    let n = check_square(x)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    if is_upper_triangular(x) {
        return Ok((0..n).map(|i| x[(i, i)]).collect());
    }
    let (_, t) = schur(x)?;
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

fn is_upper_triangular(x: &Mat) -> bool {
    (0..x.ncols()).all(|j| ((j + 1)..x.nrows()).all(|i| x[(i, j)] == c(0.0)))
}

pub fn spectral_radius(x: &Mat) -> Result<f64> {
    Ok(eigenvalues(x)?.iter().fold(0.0, |m, z| m.max(z.norm())))
}

/// `||x^*x - xx^*||_F <= tol ||x||_F^2`.
pub fn is_normal(x: &Mat, tol: f64) -> bool {
    let xa = x.adjoint();
    let comm = &xa * x - x * &xa;
    let scale = x.norm_squared();
    comm.norm() <= tol * scale.max(f64::MIN_POSITIVE)
}

/// A ray `{origin + t * direction : t >= 0}` the spectrum must stay away from.
#[derive(Clone, Copy, Debug)]
pub struct BranchCut {
    pub origin: C64,
    pub direction: C64,
    /// Minimum admissible distance from the ray.
    pub clearance: f64,
}

impl BranchCut {
    /// The cut of `z -> (1 - z)^alpha`, principal branch: `z` in `[1, inf)`.
    pub fn one_minus_z() -> Self {
        BranchCut { origin: c(1.0), direction: c(1.0), clearance: 1e-12 }
    }

    pub fn distance(&self, z: C64) -> f64 {
        let d = self.direction / self.direction.norm();
        let rel = (z - self.origin) * d.conj();
        if rel.re <= 0.0 {
            (z - self.origin).norm()
        } else {
            rel.im.abs()
        }
    }
}

/// Output of [`primary_matrix_function`].
#[derive(Clone, Debug)]
pub struct MatFn {
    pub value: Mat,
    /// Set when eigenvalues are (nearly) confluent for a non-normal input;
    /// the value is then computed from a slightly perturbed triangular factor.
    pub ill_conditioned: bool,
}

/// Evaluates `f(x)` for the primary matrix function of `f`.
///
/// Normal inputs are evaluated in the Schur (= eigenvector) basis. Otherwise
/// the Parlett recurrence runs on the triangular Schur factor. If two
/// eigenvalues are confluent the recurrence is undefined; the diagonal is then
/// split by a tiny deterministic perturbation and the result is flagged.
pub fn primary_matrix_function(
    x: &Mat,
    f: impl Fn(C64) -> C64,
    cut: Option<&BranchCut>,
) -> Result<MatFn> {
    let n = check_square(x)?;
    if n == 0 {
        return Ok(MatFn { value: x.clone(), ill_conditioned: false });
    }
    let (q, t) = schur(x)?;
    if let Some(cut) = cut {
        for i in 0..n {
            if cut.distance(t[(i, i)]) <= cut.clearance {
                return Err(Error::BranchCut(t[(i, i)]));
            }
        }
    }
    if is_normal(x, 1e-12) {
        let d: Vec<C64> = (0..n).map(|i| f(t[(i, i)])).collect();
        return Ok(MatFn { value: scale_columns(&q, &d) * q.adjoint(), ill_conditioned: false });
    }

    let scale = t.iter().fold(0.0_f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    let mut min_sep = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            min_sep = min_sep.min((t[(i, i)] - t[(j, j)]).norm());
        }
    }
    let mut tri = t;
    let mut ill = min_sep < 1e-4 * scale;
    if min_sep < 1e-8 * scale {
        // golden-angle offsets keep the perturbed diagonal pairwise distinct
        for i in 0..n {
            let theta = 2.399_963_229_728_653 * i as f64;
            let r = 1e-7 * scale * (1.0 + i as f64 / n as f64);
            tri[(i, i)] += C64::from_polar(r, theta);
        }
        ill = true;
    }
    let fx = parlett(&tri, &f);
    Ok(MatFn { value: &q * fx * q.adjoint(), ill_conditioned: ill })
}

fn parlett(t: &Mat, f: &impl Fn(C64) -> C64) -> Mat {
    let n = t.nrows();
    let mut fm = Mat::zeros(n, n);
    for i in 0..n {
        fm[(i, i)] = f(t[(i, i)]);
    }
    for p in 1..n {
        for i in 0..(n - p) {
            let j = i + p;
            let mut s = t[(i, j)] * (fm[(j, j)] - fm[(i, i)]);
            for k in (i + 1)..j {
                s += t[(i, k)] * fm[(k, j)] - fm[(i, k)] * t[(k, j)];
            }
            fm[(i, j)] = s / (t[(j, j)] - t[(i, i)]);
        }
    }
    fm
}

/// `(I - x)^alpha`, principal branch.
pub fn one_minus_power(x: &Mat, alpha: f64) -> Result<MatFn> {
    primary_matrix_function(x, |z| (c(1.0) - z).powf(alpha), Some(&BranchCut::one_minus_z()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{gaussian_mat, random_unitary, substream};

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("4/3".parse::<Exponent>().unwrap().value(), 4.0 / 3.0);
        assert!("inf".parse::<Exponent>().unwrap().is_infinite());
        assert_eq!(" 2.5 ".parse::<Exponent>().unwrap().value(), 2.5);
        assert!("0".parse::<Exponent>().is_err() && "x/3".parse::<Exponent>().is_err());
    }

    #[test]
    fn exponent_conjugates() {
        assert!((p(4.0 / 3.0).conjugate().unwrap().value() - 4.0).abs() < 1e-12);
        assert!(p(1.0).conjugate().unwrap().is_infinite());
        assert_eq!(Exponent::infinity().conjugate().unwrap().value(), 1.0);
        assert!(p(0.5).conjugate().is_none());
        assert!(p(0.5).is_quasi());
        assert!(Exponent::new(0.0).is_err());
        assert!(Exponent::new(f64::NAN).is_err());
    }

    #[test]
    fn singular_values_examples() {
        assert_eq!(singular_values(&diag(&[3.0, -4.0])).unwrap(), vec![4.0, 3.0]);
        let s = singular_values(&unit(2, 0, 1)).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15 && s[1].abs() < 1e-15);
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let mut rng = substream(7, 0);
        let x = gaussian_mat(&mut rng, 5);
        let s = singular_values(&x).unwrap();
        let mut ev = hermitian_eigenvalues(&(x.adjoint() * &x)).unwrap();
        ev.reverse();
        for (a, b) in s.iter().zip(ev) {
            assert!((a - b.max(0.0).sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn schatten_examples() {
        for v in [0.5, 1.0, 4.0 / 3.0, 2.0, 3.0, f64::INFINITY] {
            let e = Exponent::new(v).unwrap();
            assert!((schatten_norm(&unit(3, 0, 0), e).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!((schatten_norm(&diag(&[3.0, 4.0]), p(2.0)).unwrap() - 5.0).abs() < 1e-14);
        // (1/sqrt n) e (x) e has norm sqrt(n) for every p
        let n = 5;
        let x = Mat::from_element(n, n, c(1.0 / (n as f64).sqrt()));
        for v in [1.0, 3.0, f64::INFINITY] {
            let e = Exponent::new(v).unwrap();
            assert!((schatten_norm(&x, e).unwrap() - (n as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn large_exponents_do_not_overflow() {
        let x = diag(&[1e200, 1e200]);
        let v = schatten_norm(&x, p(8.0)).unwrap();
        assert!((v / 1e200 - 2f64.powf(1.0 / 8.0)).abs() < 1e-12);
    }

    #[test]
    fn modulus_examples() {
        let m = modulus(&unit(2, 0, 1)).unwrap();
        assert!((m - unit(2, 1, 1)).norm() < 1e-14);
        let mut rng = substream(3, 0);
        let g = gaussian_mat(&mut rng, 4);
        let h = &g * g.adjoint();
        assert!((modulus(&h).unwrap() - &h).norm() < 1e-10 * h.norm());
        let x = gaussian_mat(&mut rng, 4);
        let m = modulus(&x).unwrap();
        assert!((&m * &m - x.adjoint() * &x).norm() < 1e-10 * x.norm_squared());
        for v in [1.0, 2.0, 4.0] {
            let a = schatten_norm(&m, p(v)).unwrap();
            let b = schatten_norm(&x, p(v)).unwrap();
            assert!((a - b).abs() < 1e-10 * b);
        }
    }

    #[test]
    fn trace_pairing_examples() {
        assert_eq!(trace_pairing(&unit(2, 0, 1), &unit(2, 1, 0)).unwrap(), c(1.0));
        let mut rng = substream(5, 0);
        let x = gaussian_mat(&mut rng, 3);
        assert_eq!(trace_pairing(&x, &Mat::zeros(3, 3)).unwrap(), c(0.0));
        assert!(trace_pairing(&x, &Mat::zeros(2, 2)).is_err());
        let y = gaussian_mat(&mut rng, 3);
        let e = p(4.0 / 3.0);
        let lhs = trace_pairing(&x, &y).unwrap().norm();
        let rhs = schatten_norm(&x, e).unwrap() * schatten_norm(&y, e.conjugate().unwrap()).unwrap();
        assert!(lhs <= rhs);
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(&diag(&[0.5, 0.75])).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(spectral_radius(&unit(2, 0, 1)).unwrap(), 0.0);
        let mut rng = substream(11, 0);
        let x = gaussian_mat(&mut rng, 6);
        let x = &x * c(0.9 / op_norm2(&x).unwrap());
        assert!(spectral_radius(&x).unwrap() <= 0.9 + 1e-10);
    }

    #[test]
    fn matrix_function_examples() {
        let mut rng = substream(13, 0);
        let x = gaussian_mat(&mut rng, 5);
        let id = Mat::identity(5, 5);
        let r = primary_matrix_function(&x, |z| c(1.0) - z, None).unwrap();
        assert!((r.value - (&id - &x)).norm() < 1e-12 * x.norm().max(1.0));
        let r = primary_matrix_function(&x, |z| z * z, None).unwrap();
        assert!((r.value - &x * &x).norm() < 1e-10 * x.norm_squared());
        let d = diag(&[0.5, 0.75]);
        let r = one_minus_power(&d, 0.5).unwrap();
        assert!((r.value - diag(&[0.5f64.sqrt(), 0.25f64.sqrt()])).norm() < 1e-15);
    }

    #[test]
    fn branch_cut_is_rejected() {
        assert!(matches!(one_minus_power(&diag(&[0.5, 1.5]), 0.5), Err(Error::BranchCut(_))));
        assert!(matches!(one_minus_power(&diag(&[1.0]), 0.5), Err(Error::BranchCut(_))));
    }

    #[test]
    fn confluent_non_normal_is_flagged() {
        // Jordan block: f(J) = [[f, f'], [0, f]]
        let j = Mat::from_row_slice(2, 2, &[c(0.5), c(1.0), c(0.0), c(0.5)]);
        let r = primary_matrix_function(&j, |z| z * z * z, None).unwrap();
        assert!(r.ill_conditioned);
        assert!((r.value[(0, 1)] - c(0.75)).norm() < 1e-5);
        assert!((r.value[(0, 0)] - c(0.125)).norm() < 1e-5);
    }

    #[test]
    fn commuting_functions_multiply() {
        let mut rng = substream(17, 0);
        let x = gaussian_mat(&mut rng, 5) * c(0.3);
        let f = |z: C64| z.exp();
        let g = |z: C64| (c(2.0) + z).ln();
        let fg = primary_matrix_function(&x, |z| f(z) * g(z), None).unwrap().value;
        let prod = primary_matrix_function(&x, f, None).unwrap().value
            * primary_matrix_function(&x, g, None).unwrap().value;
        assert!((fg - &prod).norm() < 1e-8 * prod.norm());
    }

    #[test]
    fn unitary_invariance() {
        let mut rng = substream(19, 0);
        let x = gaussian_mat(&mut rng, 4);
        let u = random_unitary(&mut rng, 4);
        let v = random_unitary(&mut rng, 4);
        let y = &u * &x * &v;
        for e in [1.0, 3.0, f64::INFINITY] {
            let e = Exponent::new(e).unwrap();
            let a = schatten_norm(&x, e).unwrap();
            assert!((schatten_norm(&y, e).unwrap() - a).abs() < 1e-10 * a);
        }
    }
}
