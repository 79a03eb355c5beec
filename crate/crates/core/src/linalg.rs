//! Hankel matrices, row-space projections, pseudo-inverses and the block LQ
//! factorization of the stacked past/future data matrix.
//!
//! Every Hankel block carries the `1/sqrt(N)` normalisation, so products such
//! as `Z_P * Z_P^T` are sample covariances.

use nalgebra::{DMatrix, DVector};

use crate::error::{DdpcError, Result};
use crate::plant::TrajectoryBatch;

/// Singular values below `RANK_TOL * sigma_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Builds the scaled Hankel matrix of `signal` (channels in rows, time in
/// columns) whose block-row `i` holds samples `t0 + i .. t0 + i + n_cols`.
pub fn build_hankel(
    signal: &DMatrix<f64>,
    t0: usize,
    t1: usize,
    n_cols: usize,
) -> Result<DMatrix<f64>> {
    if t1 < t0 {
        return Err(DdpcError::Invalid(format!("hankel window t1={t1} < t0={t0}")));
    }
    if n_cols == 0 {
        return Err(DdpcError::Invalid("hankel matrix needs at least one column".into()));
    }
    let len = signal.ncols();
    let last = t1 + n_cols - 1;
    if last >= len {
        return Err(DdpcError::OutOfRange { index: last, len });
    }
    let s = signal.nrows();
    let block_rows = t1 - t0 + 1;
    let root_n = (n_cols as f64).sqrt();
    let mut h = DMatrix::zeros(s * block_rows, n_cols);
    for i in 0..block_rows {
        for j in 0..n_cols {
            for c in 0..s {
                h[(i * s + c, j)] = signal[(c, t0 + i + j)] / root_n;
            }
        }
    }
    Ok(h)
}

/// Past and future data matrices sharing the same `N` columns.
#[derive(Debug, Clone)]
pub struct HankelSet {
    /// `(m+p)ρ × N`; each time slice stacks `u(k)` then `y(k)`.
    pub z_past: DMatrix<f64>,
    pub u_future: DMatrix<f64>,
    pub y_future: DMatrix<f64>,
    pub rho: usize,
    pub horizon: usize,
    pub n_cols: usize,
    pub m_inputs: usize,
    pub p_outputs: usize,
}

impl HankelSet {
    /// `[Z_P; U_F]`
    pub fn past_and_inputs(&self) -> DMatrix<f64> {
        stack_rows(&[&self.z_past, &self.u_future])
    }

    /// `[Z_P; U_F; Y_F]`
    pub fn stacked(&self) -> DMatrix<f64> {
        stack_rows(&[&self.z_past, &self.u_future, &self.y_future])
    }

    /// Row counts of the three blocks.
    pub fn block_sizes(&self) -> (usize, usize, usize) {
        (
            (self.m_inputs + self.p_outputs) * self.rho,
            self.m_inputs * self.horizon,
            self.p_outputs * self.horizon,
        )
    }

    /// Smallest `N` for which the stacked matrix can have full row rank.
    pub fn min_columns(&self) -> usize {
        (self.m_inputs + self.p_outputs) * (self.rho + self.horizon) + 1
    }
}

/// Splits a trajectory into past (`ρ` samples) and future (`T` samples)
/// windows using all `N = N_data - T - ρ` available columns.
pub fn build_hankel_set(batch: &TrajectoryBatch, rho: usize, horizon: usize) -> Result<HankelSet> {
    if rho == 0 || horizon == 0 {
        return Err(DdpcError::Invalid("rho and horizon must be positive".into()));
    }
    let n_data = batch.len();
    let required = horizon + rho + 1;
    if n_data < required {
        return Err(DdpcError::InsufficientData {
            required,
            available: n_data,
        });
    }
    let n_cols = n_data - horizon - rho;
    let z = stack_rows(&[&batch.u, &batch.y]);
    Ok(HankelSet {
        z_past: build_hankel(&z, 0, rho - 1, n_cols)?,
        u_future: build_hankel(&batch.u, rho, rho + horizon - 1, n_cols)?,
        y_future: build_hankel(&batch.y, rho, rho + horizon - 1, n_cols)?,
        rho,
        horizon,
        n_cols,
        m_inputs: batch.m_inputs(),
        p_outputs: batch.p_outputs(),
    })
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ` with `s` sorted in
/// decreasing order and `k = min(rows, cols)` columns in `U` and `V`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    /// Number of singular values above `RANK_TOL * s_max`.
    pub fn rank(&self) -> usize {
        let smax = self.s.iter().copied().fold(0.0, f64::max);
        self.s.iter().filter(|&&v| v > RANK_TOL * smax && v > 0.0).count()
    }

    pub fn recompose(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose()
    }
}

/// One-sided Jacobi sweeps on the columns of `g`, accumulating the
/// rotations in `v`. Converges to mutually orthogonal columns.
fn jacobi_orthogonalize(g: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    const MAX_SWEEPS: usize = 80;
    let n = g.ncols();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = g.column(p).norm_squared();
                let beta = g.column(q).norm_squared();
                let gamma = g.column(p).dot(&g.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut *g, &mut *v] {
                    for r in 0..m.nrows() {
                        let (a, b) = (m[(r, p)], m[(r, q)]);
                        m[(r, p)] = c * a - s * b;
                        m[(r, q)] = s * a + c * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Thin SVD by Householder QR followed by one-sided Jacobi on the
/// triangular factor, which keeps small singular values accurate.
pub fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    let (rows, cols) = a.shape();
    if rows < cols {
        let t = thin_svd(&a.transpose());
        return ThinSvd { u: t.v, s: t.s, v: t.u };
    }
    if cols == 0 {
        return ThinSvd {
            u: DMatrix::zeros(rows, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(0, 0),
        };
    }
    let qr = a.clone().qr();
    let mut g = qr.r();
    let mut v = DMatrix::identity(cols, cols);
    jacobi_orthogonalize(&mut g, &mut v);
    let norms: Vec<f64> = (0..cols).map(|j| g.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut w = DMatrix::zeros(cols, cols);
    let mut v_sorted = DMatrix::zeros(cols, cols);
    let mut s = DVector::zeros(cols);
    for (k, &j) in order.iter().enumerate() {
        s[k] = norms[j];
        if norms[j] > 0.0 {
            w.set_column(k, &(g.column(j) / norms[j]));
        }
        v_sorted.set_column(k, &v.column(j));
    }
    ThinSvd {
        u: qr.q() * w,
        s,
        v: v_sorted,
    }
}

/// Moore-Penrose pseudo-inverse with singular values below
/// `RANK_TOL * sigma_max` dropped.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.is_empty() {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = thin_svd(a);
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for k in 0..svd.rank() {
        // out += v_k u_k^T / s_k
        out.ger(1.0 / svd.s[k], &svd.v.column(k), &svd.u.column(k), 1.0);
    }
    out
}

/// Orthonormal basis (as columns) of the row space of `a`, using the same
/// rank cutoff as [`pinv`].
pub fn row_span_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.is_empty() {
        return DMatrix::zeros(a.ncols(), 0);
    }
    let svd = thin_svd(a);
    svd.v.columns(0, svd.rank()).into_owned()
}

/// Number of singular values above `RANK_TOL * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    thin_svd(a).rank()
}

/// Orthogonal projection of the rows of `b` onto the row space of `onto`,
/// `B A^T (A A^T)^† A`.
pub fn project_rows(b: &DMatrix<f64>, onto: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.ncols() != onto.ncols() {
        return Err(DdpcError::shape(
            "project_rows",
            format!("{} columns vs {} columns", b.ncols(), onto.ncols()),
        ));
    }
    // B A^† A avoids forming the N×N projector.
    let coeffs = b * pinv(onto);
    Ok(coeffs * onto)
}

/// Minimum-norm solution of `a x = b`; fails if the system is inconsistent.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(DdpcError::shape(
            "min_norm_solve",
            format!("{} rows vs rhs of length {}", a.nrows(), b.len()),
        ));
    }
    let x = pinv(a) * b;
    let residual = (a * &x - b).norm();
    if residual > 1e-8 * b.norm().max(1.0) {
        return Err(DdpcError::Residual { residual });
    }
    Ok(x)
}

/// Block factors of `[Z_P; U_F; Y_F] = L Q` with `L` lower triangular and
/// `Q` having orthonormal rows.
#[derive(Debug, Clone)]
pub struct LqFactors {
    pub l11: DMatrix<f64>,
    pub l21: DMatrix<f64>,
    pub l22: DMatrix<f64>,
    pub l31: DMatrix<f64>,
    pub l32: DMatrix<f64>,
    pub l33: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub q3: DMatrix<f64>,
}

impl LqFactors {
    /// The full lower-triangular factor.
    pub fn l(&self) -> DMatrix<f64> {
        let (m1, m2, m3) = self.block_sizes();
        let m = m1 + m2 + m3;
        let mut l = DMatrix::zeros(m, m);
        l.view_mut((0, 0), (m1, m1)).copy_from(&self.l11);
        l.view_mut((m1, 0), (m2, m1)).copy_from(&self.l21);
        l.view_mut((m1, m1), (m2, m2)).copy_from(&self.l22);
        l.view_mut((m1 + m2, 0), (m3, m1)).copy_from(&self.l31);
        l.view_mut((m1 + m2, m1), (m3, m2)).copy_from(&self.l32);
        l.view_mut((m1 + m2, m1 + m2), (m3, m3)).copy_from(&self.l33);
        l
    }

    /// `[Q1; Q2; Q3]`
    pub fn q(&self) -> DMatrix<f64> {
        stack_rows(&[&self.q1, &self.q2, &self.q3])
    }

    pub fn reassemble(&self) -> DMatrix<f64> {
        self.l() * self.q()
    }

    pub fn block_sizes(&self) -> (usize, usize, usize) {
        (self.l11.nrows(), self.l22.nrows(), self.l33.nrows())
    }

    /// `L31 Q1 + L32 Q2`, the projection of `Y_F` onto `[Z_P; U_F]`.
    pub fn projected_future_outputs(&self) -> DMatrix<f64> {
        &self.l31 * &self.q1 + &self.l32 * &self.q2
    }
}

/// Computes the LQ factors without any rank requirement. In the noise-free
/// case some diagonal entries of `L11` (and `L33`) are numerically zero.
pub fn lq_factorize(h: &HankelSet) -> Result<LqFactors> {
    let (m1, m2, m3) = h.block_sizes();
    let m = m1 + m2 + m3;
    if h.n_cols < m {
        return Err(DdpcError::InsufficientData {
            required: m + h.rho + h.horizon,
            available: h.n_cols + h.rho + h.horizon,
        });
    }
    // LQ of Z is the transpose of the thin QR of Z^T.
    let qr = h.stacked().transpose().qr();
    let mut q = qr.q(); // N × M
    let mut r = qr.r(); // M × M, upper triangular
    for i in 0..m {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    let l = r.transpose();
    let qt = q.transpose();
    let blk = |r0: usize, c0: usize, nr: usize, nc: usize| l.view((r0, c0), (nr, nc)).into_owned();
    Ok(LqFactors {
        l11: blk(0, 0, m1, m1),
        l21: blk(m1, 0, m2, m1),
        l22: blk(m1, m1, m2, m2),
        l31: blk(m1 + m2, 0, m3, m1),
        l32: blk(m1 + m2, m1, m3, m2),
        l33: blk(m1 + m2, m1 + m2, m3, m3),
        q1: qt.rows(0, m1).into_owned(),
        q2: qt.rows(m1, m2).into_owned(),
        q3: qt.rows(m1 + m2, m3).into_owned(),
    })
}

/// Numerical ranks of the stacked data matrix and of its past block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankReport {
    pub rank: usize,
    pub expected: usize,
    pub past_rank: usize,
    pub past_expected: usize,
}

impl RankReport {
    pub fn is_full(&self) -> bool {
        self.rank == self.expected
    }
}

/// Ranks read off the triangular factor; `Q` has orthonormal rows so
/// `rank(Z_P) = rank(L11)`.
pub fn rank_report(lq: &LqFactors) -> RankReport {
    let l = lq.l();
    RankReport {
        rank: numerical_rank(&l),
        expected: l.nrows(),
        past_rank: numerical_rank(&lq.l11),
        past_expected: lq.l11.nrows(),
    }
}

/// LQ decomposition requiring full row rank of the stacked data matrix.
pub fn lq_decompose(h: &HankelSet) -> Result<LqFactors> {
    let lq = lq_factorize(h)?;
    let report = rank_report(&lq);
    if !report.is_full() {
        return Err(DdpcError::RankDeficient {
            rank: report.rank,
            expected: report.expected,
            past_rank: report.past_rank,
            past_expected: report.past_expected,
        });
    }
    Ok(lq)
}

pub(crate) fn stack_rows(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let ncols = blocks.first().map_or(0, |b| b.ncols());
    let nrows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(nrows, ncols);
    let mut r = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), ncols);
        out.rows_mut(r, b.nrows()).copy_from(*b);
        r += b.nrows();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn thin_svd_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (r, c) in [(7, 3), (3, 7), (40, 40), (1, 5)] {
            let a = random(r, c, &mut rng);
            let svd = thin_svd(&a);
            let k = r.min(c);
            assert!((svd.recompose() - &a).amax() < 1e-13);
            assert!((svd.u.tr_mul(&svd.u) - DMatrix::identity(k, k)).amax() < 1e-13);
            assert!((svd.v.tr_mul(&svd.v) - DMatrix::identity(k, k)).amax() < 1e-13);
            assert!(svd.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
            // Squared singular values are the eigenvalues of the Gram matrix.
            let mut eig: Vec<f64> = if r >= c { a.tr_mul(&a) } else { &a * a.transpose() }
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .collect();
            eig.sort_by(|x, y| y.total_cmp(x));
            for (s, e) in svd.s.iter().zip(eig) {
                assert!((s * s - e).abs() < 1e-12 * svd.s[0].powi(2));
            }
        }
    }

    #[test]
    fn thin_svd_of_rank_deficient_and_graded_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let low = random(30, 2, &mut rng) * random(2, 9, &mut rng);
        let svd = thin_svd(&low);
        assert_eq!(svd.rank(), 2);
        assert!((svd.recompose() - &low).amax() < 1e-13);
        // Columns scaled over twelve decades keep their small singular values.
        let d = DMatrix::from_diagonal(&DVector::from_fn(6, |i, _| 10f64.powi(-2 * i as i32)));
        let q = random(6, 6, &mut rng).qr().q();
        let svd = thin_svd(&(&q * &d));
        for i in 0..6 {
            let want = 10f64.powi(-2 * i as i32);
            assert!((svd.s[i] - want).abs() < 1e-10 * want, "{i}: {}", svd.s[i]);
        }
    }

    #[test]
    fn hankel_small_case() {
        let s = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let h = build_hankel(&s, 0, 1, 3).unwrap();
        let k = 1.0 / 3f64.sqrt();
        let expected = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0]) * k;
        assert!((h - expected).abs().max() < 1e-15);
    }

    #[test]
    fn hankel_constant_signal() {
        let s = DMatrix::from_element(2, 30, 4.5);
        let h = build_hankel(&s, 3, 7, 20).unwrap();
        let want = 4.5 / 20f64.sqrt();
        assert!(h.iter().all(|&v| v == want));
    }

    #[test]
    fn hankel_entrywise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random(1, 100, &mut rng);
        let h = build_hankel(&s, 0, 4, 90).unwrap();
        assert_eq!(h.shape(), (5, 90));
        for i in 0..5 {
            for j in 0..90 {
                assert_eq!(h[(i, j)], s[(0, i + j)] / 90f64.sqrt());
            }
        }
    }

    #[test]
    fn hankel_scaling_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random(2, 40, &mut rng);
        let h = build_hankel(&s, 1, 5, 30).unwrap();
        let h2 = build_hankel(&(&s * 4.0), 1, 5, 30).unwrap();
        assert_eq!(h * 4.0, h2);
    }

    #[test]
    fn hankel_too_short_names_index() {
        let s = DMatrix::zeros(1, 10);
        match build_hankel(&s, 0, 3, 8) {
            Err(DdpcError::OutOfRange { index, len }) => {
                assert_eq!((index, len), (10, 10));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn projection_onto_full_space_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random(3, 4, &mut rng);
        let a = random(4, 4, &mut rng);
        let p = project_rows(&b, &a).unwrap();
        assert!((p - &b).abs().max() < 1e-10);
    }

    #[test]
    fn projection_of_orthogonal_rows_vanishes() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(1, 4, &[0.0, 0.0, 3.0, -2.0]);
        assert!(project_rows(&b, &a).unwrap().abs().max() < 1e-14);
    }

    #[test]
    fn projection_shape_error() {
        let a = DMatrix::zeros(2, 4);
        let b = DMatrix::zeros(2, 5);
        assert!(matches!(project_rows(&b, &a), Err(DdpcError::Shape { .. })));
    }

    #[test]
    fn min_norm_small_cases() {
        let x = min_norm_solve(&DMatrix::identity(2, 2), &DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert!((x - DVector::from_vec(vec![3.0, 4.0])).norm() < 1e-14);
        let x = min_norm_solve(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), &DVector::from_vec(vec![2.0]))
            .unwrap();
        assert!((x - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn min_norm_rejects_inconsistent() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(min_norm_solve(&a, &b), Err(DdpcError::Residual { .. })));
    }

    #[test]
    fn pinv_of_rank_one() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let p = pinv(&a);
        // A A^† A = A for any pseudo-inverse
        assert!((&a * &p * &a - &a).abs().max() < 1e-12);
        assert_eq!(numerical_rank(&a), 1);
    }
}
