//! Dense least squares through Householder QR.
//!
//! Rows are folded in chunk by chunk: the triangular factor of the rows seen so
//! far is stacked on top of the next chunk and re-factored. The response vector
//! rides along as an extra column, so the last column of the final factor holds
//! `Qᵀy`. Working memory is `O((chunk + d) · d)` regardless of the row count.

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Relative pivot tolerance below which a design is declared rank deficient.
pub const RANK_TOL: f64 = 1e-10;

const CHUNK_ROWS: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct QrSolution {
    pub coefficients: Vec<f64>,
    /// Diagonal of the triangular factor.
    pub r_diag: Vec<f64>,
}

impl QrSolution {
    /// `(max |r_kk| / min |r_kk|)²`, an estimate of the normal-equations condition number.
    pub fn gram_condition(&self) -> f64 {
        let (lo, hi) = pivot_range(&self.r_diag);
        if lo > 0.0 {
            (hi / lo).powi(2)
        } else {
            f64::INFINITY
        }
    }
}

fn pivot_range(diag: &[f64]) -> (f64, f64) {
    diag.iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.abs()), hi.max(r.abs())))
}

/// Column-major scratch matrix.
struct Panel {
    rows: usize,
    data: Vec<f64>,
}

impl Panel {
    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Triangularises the panel in place with Householder reflections applied
    /// to every column, pivoting only on the first `pivots` columns.
    fn householder(&mut self, pivots: usize) {
        let rows = self.rows;
        for k in 0..pivots.min(rows) {
            let (head, tail) = self.data.split_at_mut((k + 1) * rows);
            let v = &mut head[k * rows + k..(k + 1) * rows];
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if v[0] > 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vtv: f64 = v.iter().map(|x| x * x).sum();
            for c in tail.chunks_exact_mut(rows) {
                let c = &mut c[k..];
                let s: f64 = v.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
                let f = 2.0 * s / vtv;
                for (ci, vi) in c.iter_mut().zip(v.iter()) {
                    *ci -= f * vi;
                }
            }
            v[0] = alpha;
            v[1..].iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Solves `min_b ‖design · b − y‖²`.
///
/// Fails with [`Error::RankDeficient`] when the smallest diagonal entry of the
/// triangular factor is below [`RANK_TOL`] times the largest.
pub fn least_squares(design: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<QrSolution> {
    let (n, d) = design.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("design has {n} rows, response has {}", y.len())));
    }
    if d == 0 {
        return Err(Error::DimensionMismatch("design has no columns".into()));
    }
    if n < d {
        return Err(Error::RankDeficient {
            min_pivot: 0.0,
            max_pivot: 0.0,
        });
    }
    let cols = d + 1;
    // carried triangle, column-major (cols × cols)
    let mut tri = vec![0.0; cols * cols];
    let mut have_tri = false;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK_ROWS).min(n);
        let top = if have_tri { cols } else { 0 };
        let rows = top + (end - start);
        let mut panel = Panel {
            rows,
            data: vec![0.0; rows * cols],
        };
        for j in 0..cols {
            let col = &mut panel.data[j * rows..(j + 1) * rows];
            if have_tri {
                col[..cols].copy_from_slice(&tri[j * cols..(j + 1) * cols]);
            }
            for (r, i) in (start..end).enumerate() {
                col[top + r] = if j < d { design[(i, j)] } else { y[i] };
            }
        }
        panel.householder(d);
        for j in 0..cols {
            let col = panel.col(j);
            let dst = &mut tri[j * cols..(j + 1) * cols];
            let keep = (j + 1).min(rows);
            dst[..keep].copy_from_slice(&col[..keep]);
            dst[keep..].iter_mut().for_each(|x| *x = 0.0);
        }
        have_tri = true;
        start = end;
    }

    let r = |i: usize, j: usize| tri[j * cols + i];
    let r_diag: Vec<f64> = (0..d).map(|k| r(k, k)).collect();
    let (lo, hi) = pivot_range(&r_diag);
    if !(hi > 0.0) || lo < RANK_TOL * hi || !lo.is_finite() {
        return Err(Error::RankDeficient {
            min_pivot: lo,
            max_pivot: hi,
        });
    }
    let mut b = vec![0.0; d];
    for k in (0..d).rev() {
        let mut acc = r(k, d);
        for j in k + 1..d {
            acc -= r(k, j) * b[j];
        }
        b[k] = acc / r(k, k);
    }
    Ok(QrSolution {
        coefficients: b,
        r_diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn identity_design_on_zeros() {
        let mut design = Array2::zeros((6, 3));
        for k in 0..3 {
            design[(k, k)] = 1.0;
        }
        let y = array![2.0, -1.0, 0.5, 0.0, 0.0, 0.0];
        let sol = least_squares(design.view(), y.view()).unwrap();
        for (got, want) in sol.coefficients.iter().zip([2.0, -1.0, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn three_by_two_against_normal_equations() {
        let design = array![[1.0, 2.0], [3.0, -1.0], [0.5, 4.0]];
        let y = array![1.0, 2.0, -3.0];
        // explicit 2×2 inverse of AᵀA applied to Aᵀy
        let (a, b, c) = (1.0 + 9.0 + 0.25, 2.0 - 3.0 + 2.0, 4.0 + 1.0 + 16.0);
        let (u, v) = (1.0 + 6.0 - 1.5, 2.0 - 2.0 - 12.0);
        let det = a * c - b * b;
        let want = [(c * u - b * v) / det, (a * v - b * u) / det];
        let sol = least_squares(design.view(), y.view()).unwrap();
        for (g, w) in sol.coefficients.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn noiseless_recovery_across_chunks() {
        let (n, d) = (1500, 12);
        let design = random_matrix(n, d, 1);
        let beta = Array1::from_iter((0..d).map(|k| k as f64 - 5.5));
        let y = design.dot(&beta);
        let sol = least_squares(design.view(), y.view()).unwrap();
        for (g, w) in sol.coefficients.iter().zip(beta.iter()) {
            assert!((g - w).abs() < 1e-10);
        }
        assert!(sol.gram_condition() >= 1.0);
    }

    #[test]
    fn rank_deficiency_detected() {
        let mut design = random_matrix(50, 3, 2);
        let c0 = design.column(0).to_owned();
        design.column_mut(2).assign(&(&c0 * 2.0));
        let y = Array1::zeros(50);
        assert!(matches!(least_squares(design.view(), y.view()), Err(Error::RankDeficient { .. })));

        let zeros = Array2::zeros((20, 2));
        assert!(matches!(
            least_squares(zeros.view(), Array1::zeros(20).view()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn too_few_rows_is_rank_deficient() {
        let design = random_matrix(2, 3, 3);
        assert!(least_squares(design.view(), Array1::zeros(2).view()).is_err());
    }

    #[test]
    fn mismatched_response_length() {
        let design = random_matrix(5, 2, 3);
        assert!(matches!(
            least_squares(design.view(), Array1::zeros(4).view()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
