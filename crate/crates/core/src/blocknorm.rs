//! Norms on finite sequences of matrices: the truncated column space
//! `S^p(l^2_c)`, the row space `S^p(l^2_r)`, and the Rademacher space
//! `S^p(l^2_rad)`.
//!
//! For a sequence `x = (x_1, ..., x_K)`:
//!
//! * column norm: `||(sum_k x_k^* x_k)^{1/2}||_p`
//! * row norm: `||(sum_k x_k x_k^*)^{1/2}||_p`
//! * rad norm: `max(col, row)` for `p >= 2`, and for `p < 2` the infimum of
//!   `col(u) + row(v)` over splittings `u + v = x`.
//!
//! The infimum has no closed form. [`rad_norm_bracket`] returns a certified
//! bracket: the upper end is the value of an explicit splitting (returned as a
//! witness), the lower end comes from the duality
//! `|sum_k Tr(x_k y_k)| <= rad_p(x) max(col_{p*}(y), row_{p*}(y))`.

mod rad;

use crate::error::{Error, Result};
use crate::matcore::{self, c, check_square, lp_of_values, Exponent, Mat, C64};
use crate::superop::SuperOp;

pub(crate) use rad::smooth_side as smooth_side_grad;
pub use rad::RadOptions;

/// A finite sequence of square matrices of one common size.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockVec {
    blocks: Vec<Mat>,
}

impl BlockVec {
    pub fn new(blocks: Vec<Mat>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty block vector".into()))?;
        let n = check_square(first)?;
        for b in &blocks {
            if check_square(b)? != n {
                return Err(Error::DimensionMismatch { expected: n, found: b.nrows() });
            }
        }
        Ok(BlockVec { blocks })
    }

    pub fn zeros(len: usize, n: usize) -> Self {
        BlockVec { blocks: vec![Mat::zeros(n, n); len.max(1)] }
    }

    pub(crate) fn from_blocks_unchecked(blocks: Vec<Mat>) -> Self {
        debug_assert!(!blocks.is_empty());
        BlockVec { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn blocks(&self) -> &[Mat] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Mat> {
        self.blocks
    }

    fn check_compatible(&self, other: &BlockVec) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// The bilinear pairing `sum_k Tr(x_k y_k)`.
    pub fn pairing(&self, other: &BlockVec) -> Result<C64> {
        self.check_compatible(other)?;
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(x, y)| matcore::trace_pairing(x, y).expect("checked dims"))
            .sum())
    }

    pub fn sub(&self, other: &BlockVec) -> Result<BlockVec> {
        self.check_compatible(other)?;
        Ok(BlockVec { blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a - b).collect() })
    }

    /// Blockwise adjoints `(x_k^*)`, which exchange column and row norms.
    pub fn adjoint(&self) -> BlockVec {
        BlockVec { blocks: self.blocks.iter().map(|b| b.adjoint()).collect() }
    }

    /// The `Kn x Kn` matrix `sum_k e_{k1} (x) x_k` (blocks stacked in the
    /// first block column).
    pub fn stacked_column(&self) -> Mat {
        let (k, n) = (self.len(), self.dim());
        let mut out = Mat::zeros(k * n, k * n);
        for (i, b) in self.blocks.iter().enumerate() {
            out.view_mut((i * n, 0), (n, n)).copy_from(b);
        }
        out
    }

    /// The `Kn x Kn` matrix `sum_k e_{1k} (x) x_k` (first block row).
    pub fn stacked_row(&self) -> Mat {
        let (k, n) = (self.len(), self.dim());
        let mut out = Mat::zeros(k * n, k * n);
        for (i, b) in self.blocks.iter().enumerate() {
            out.view_mut((0, i * n), (n, n)).copy_from(b);
        }
        out
    }
}

/// `sum_k x_k^* x_k`.
pub fn column_gram(x: &BlockVec) -> Mat {
    gram(x.blocks(), true)
}

/// `sum_k x_k x_k^*`.
pub fn row_gram(x: &BlockVec) -> Mat {
    gram(x.blocks(), false)
}

pub(crate) fn gram(blocks: &[Mat], column: bool) -> Mat {
    let n = blocks[0].nrows();
    let mut s = Mat::zeros(n, n);
    for b in blocks {
        if column {
            s += b.adjoint() * b;
        } else {
            s += b * b.adjoint();
        }
    }
    s
}

/// Schatten `p`-norm of `G^{1/2}` for a PSD Gram matrix `G`.
pub(crate) fn sqrt_gram_norm(g: &Mat, p: Exponent) -> Result<f64> {
    let ev = matcore::hermitian_eigenvalues(g)?;
    let s: Vec<f64> = ev.iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(lp_of_values(&s, p))
}

pub fn column_norm(x: &BlockVec, p: Exponent) -> Result<f64> {
    sqrt_gram_norm(&column_gram(x), p)
}

pub fn row_norm(x: &BlockVec, p: Exponent) -> Result<f64> {
    sqrt_gram_norm(&row_gram(x), p)
}

/// Certified bracket for the rad norm.
#[derive(Clone, Debug)]
pub struct RadBracket {
    pub lower: f64,
    pub upper: f64,
    /// Row part `v` of the best splitting found; the column part is `x - v`.
    /// `None` for `p >= 2`, where the value is exact.
    pub witness: Option<BlockVec>,
    /// `(upper - lower) / upper <= tol` was reached.
    pub converged: bool,
    pub iterations: usize,
}

impl RadBracket {
    pub fn relative_gap(&self) -> f64 {
        if self.upper == 0.0 {
            0.0
        } else {
            (self.upper - self.lower) / self.upper
        }
    }
}

/// Bracket `[lower, upper]` containing the rad norm of `x`, `1 < p < inf`.
pub fn rad_norm_bracket(x: &BlockVec, p: Exponent, opts: &RadOptions) -> Result<RadBracket> {
    let pv = p.value();
    if !(pv > 1.0 && pv.is_finite()) {
        return Err(Error::InvalidExponent(pv));
    }
    if pv >= 2.0 {
        let v = column_norm(x, p)?.max(row_norm(x, p)?);
        return Ok(RadBracket { lower: v, upper: v, witness: None, converged: true, iterations: 0 });
    }
    rad::sum_norm_bracket(x, p, opts)
}

/// Checks `|sum_k Tr(x_k y_k)| <= col_p(x) row_{p*}(y) + 1e-9`.
pub fn duality_check(x: &BlockVec, y: &BlockVec, p: Exponent) -> Result<bool> {
    let q = p
        .conjugate()
        .filter(|_| p.value() > 1.0 && p.value().is_finite())
        .ok_or(Error::InvalidExponent(p.value()))?;
    let lhs = x.pairing(y)?.norm();
    Ok(lhs <= column_norm(x, p)? * row_norm(y, q)? + 1e-9)
}

/// Regular norm of a finite scalar matrix: the operator norm of `[|c_ij|]`.
pub fn regular_norm(cm: &Mat) -> Result<f64> {
    matcore::check_finite(cm)?;
    let abs = cm.map(|z| c(z.norm()));
    matcore::op_norm2(&abs)
}

/// `y_i = sum_j c_ij T_ij(x_j)`.
pub fn op_matrix_apply(cm: &Mat, table: &[Vec<SuperOp>], x: &BlockVec) -> Result<BlockVec> {
    let k = x.len();
    if cm.shape() != (k, k) {
        return Err(Error::DimensionMismatch { expected: k, found: cm.nrows() });
    }
    if table.len() != k || table.iter().any(|row| row.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, found: table.len() });
    }
    let n = x.dim();
    let mut out = Vec::with_capacity(k);
    for (i, row) in table.iter().enumerate() {
        let mut acc = Mat::zeros(n, n);
        for (j, t) in row.iter().enumerate() {
            if t.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: t.dim() });
            }
            let cij = cm[(i, j)];
            if cij != c(0.0) {
                acc += t.apply(&x.blocks()[j]) * cij;
            }
        }
        out.push(acc);
    }
    Ok(BlockVec { blocks: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{diag, schatten_norm, unit};
    use crate::sampling::{gaussian_mat, substream};

    fn p(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    fn random_blocks(seed: u64, k: usize, n: usize) -> BlockVec {
        let mut rng = substream(seed, 0);
        BlockVec::new((0..k).map(|_| gaussian_mat(&mut rng, n)).collect()).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(BlockVec::new(vec![]).is_err());
        assert!(BlockVec::new(vec![Mat::zeros(2, 2), Mat::zeros(3, 3)]).is_err());
    }

    #[test]
    fn single_block_reduces_to_schatten() {
        let x = random_blocks(1, 1, 4);
        for v in [1.5, 2.0, 4.0] {
            let s = schatten_norm(&x.blocks()[0], p(v)).unwrap();
            assert!((column_norm(&x, p(v)).unwrap() - s).abs() < 1e-10 * s);
            assert!((row_norm(&x, p(v)).unwrap() - s).abs() < 1e-10 * s);
        }
    }

    #[test]
    fn hand_computed_examples() {
        let x = BlockVec::new(vec![unit(2, 0, 0), unit(2, 1, 0)]).unwrap();
        // sum x_k^* x_k = 2 e11
        assert!((column_norm(&x, p(4.0)).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        // sum x_k x_k^* = I_2
        assert!((row_norm(&x, p(4.0)).unwrap() - 2f64.powf(0.25)).abs() < 1e-14);
    }

    #[test]
    fn p2_is_frobenius_sum() {
        let x = random_blocks(2, 5, 3);
        let s: f64 = x.blocks().iter().map(|b| b.norm_squared()).sum::<f64>().sqrt();
        assert!((column_norm(&x, p(2.0)).unwrap() - s).abs() < 1e-10 * s);
        assert!((row_norm(&x, p(2.0)).unwrap() - s).abs() < 1e-10 * s);
    }

    #[test]
    fn hermitian_blocks_have_equal_col_and_row() {
        let x = random_blocks(3, 4, 3);
        let h = BlockVec::new(x.blocks().iter().map(|b| b + b.adjoint()).collect()).unwrap();
        let (a, b) = (column_norm(&h, p(3.0)).unwrap(), row_norm(&h, p(3.0)).unwrap());
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn column_norm_is_norm_of_stacked_matrix() {
        let x = random_blocks(4, 3, 3);
        for v in [1.5, 3.0] {
            let a = column_norm(&x, p(v)).unwrap();
            let b = schatten_norm(&x.stacked_column(), p(v)).unwrap();
            assert!((a - b).abs() < 1e-9 * b);
            let a = row_norm(&x, p(v)).unwrap();
            let b = schatten_norm(&x.stacked_row(), p(v)).unwrap();
            assert!((a - b).abs() < 1e-9 * b);
        }
    }

    #[test]
    fn rad_for_p_at_least_two_is_exact_max() {
        let x = random_blocks(5, 3, 3);
        let h = BlockVec::new(x.blocks().iter().map(|b| b + b.adjoint()).collect()).unwrap();
        let r = rad_norm_bracket(&h, p(4.0), &RadOptions::default()).unwrap();
        assert_eq!(r.lower, r.upper);
        assert!((r.upper - column_norm(&h, p(4.0)).unwrap()).abs() < 1e-10 * r.upper);
        assert!(r.witness.is_none());
    }

    #[test]
    fn rad_single_block_upper_is_below_one_sided_values() {
        let x = random_blocks(6, 1, 3);
        let e = p(4.0 / 3.0);
        let r = rad_norm_bracket(&x, e, &RadOptions::default()).unwrap();
        let m = column_norm(&x, e).unwrap().min(row_norm(&x, e).unwrap());
        assert!(r.upper <= m * (1.0 + 1e-12));
        assert!(r.lower <= r.upper);
    }

    #[test]
    fn rad_rejects_out_of_range_p() {
        let x = random_blocks(7, 2, 2);
        assert!(rad_norm_bracket(&x, p(1.0), &RadOptions::default()).is_err());
        assert!(rad_norm_bracket(&x, Exponent::infinity(), &RadOptions::default()).is_err());
    }

    #[test]
    fn duality_examples() {
        let x = random_blocks(8, 3, 3);
        let zero = BlockVec::zeros(3, 3);
        assert!(duality_check(&x, &zero, p(4.0 / 3.0)).unwrap());
        let e = BlockVec::new(vec![unit(2, 0, 0)]).unwrap();
        assert!(duality_check(&e, &e, p(4.0 / 3.0)).unwrap());
    }

    #[test]
    fn regular_norm_examples() {
        assert!((regular_norm(&Mat::from_element(2, 2, c(1.0))).unwrap() - 2.0).abs() < 1e-14);
        assert!((regular_norm(&diag(&[1.0, -5.0])).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn op_matrix_apply_examples() {
        let x = random_blocks(9, 2, 3);
        let id = SuperOp::identity(3);
        let table = vec![vec![id.clone(), id.clone()], vec![id.clone(), id]];
        let y = op_matrix_apply(&Mat::identity(2, 2), &table, &x).unwrap();
        assert_eq!(y, x);
        let z = op_matrix_apply(&Mat::zeros(2, 2), &table, &x).unwrap();
        assert!(z.blocks().iter().all(|b| b.norm() == 0.0));

        let a = diag(&[0.5, 0.75, 0.875]);
        let la = SuperOp::left_mult(a.clone()).unwrap();
        let table = vec![vec![la.clone(), la.clone()], vec![la.clone(), la]];
        let swap = Mat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let y = op_matrix_apply(&swap, &table, &x).unwrap();
        assert!((&y.blocks()[0] - &a * &x.blocks()[1]).norm() < 1e-14);
        assert!((&y.blocks()[1] - &a * &x.blocks()[0]).norm() < 1e-14);
    }
}
