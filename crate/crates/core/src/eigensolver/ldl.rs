//! Envelope (skyline) `L D L^T` factorization of `A - sigma I`.
//!
//! Fill-in of a symmetric factorization stays inside the row envelope, so
//! storing each row from its first nonzero to the diagonal is enough. The
//! number of negative pivots is the number of eigenvalues below the shift
//! (Sylvester's law of inertia).

use super::grid::SparseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct EnvelopeLdl {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    /// Row `i` holds `L[i, first[i]..i]` followed by `D[i]`.
    vals: Vec<f64>,
    pub shift: f64,
}

impl EnvelopeLdl {
    /// Factor `a - shift I`. Fails if a pivot is (numerically) zero, which
    /// means the shift sits on an eigenvalue.
    pub fn factor(a: &SparseMatrix, shift: f64) -> Result<Self> {
        let n = a.n;
        let mut first = vec![0; n];
        let mut start = vec![0; n + 1];
        for i in 0..n {
            let lo = (a.row_ptr[i]..a.row_ptr[i + 1]).map(|k| a.cols[k]).min().unwrap_or(i);
            first[i] = lo.min(i);
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut vals = vec![0.0; start[n]];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[k];
                if j <= i {
                    vals[start[i] + j - first[i]] += a.vals[k];
                }
            }
            vals[start[i] + i - first[i]] -= shift;
        }
        let scale = a.gershgorin_bound().max(shift.abs()).max(1.0);

        for i in 0..n {
            let fi = first[i];
            let (done, rest) = vals.split_at_mut(start[i]);
            let row = &mut rest[..i - fi + 1];
            // g_ij = a_ij - sum_k g_ik L_jk, with row i still holding g.
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                if k0 < j {
                    let rj = &done[start[j] + k0 - fj..start[j] + j - fj];
                    let ri = &row[k0 - fi..j - fi];
                    row[j - fi] -= dot(ri, rj);
                }
            }
            let mut d = row[i - fi];
            for j in fi..i {
                let dj = done[start[j] + j - first[j]];
                let g = row[j - fi];
                let l = g / dj;
                d -= g * l;
                row[j - fi] = l;
            }
            if d.abs() < 1e-13 * scale {
                return Err(Error::ConvergenceFailure(format!(
                    "singular pivot {d:.3e} at row {i} for shift {shift}"
                )));
            }
            row[i - fi] = d;
        }
        Ok(Self {
            n,
            first,
            start,
            vals,
            shift,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn diag(&self, i: usize) -> f64 {
        self.vals[self.start[i] + i - self.first[i]]
    }

    /// Eigenvalues of the factored matrix below the shift.
    pub fn negative_pivots(&self) -> usize {
        (0..self.n).filter(|&i| self.diag(i) < 0.0).count()
    }

    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }

    /// Solve `(A - shift) X = B` for `p` right-hand sides stored row-major
    /// (`x[i * p + c]`), in place.
    pub fn solve_rows(&self, x: &mut [f64], p: usize) {
        let mut acc = vec![0.0; p];
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.vals[self.start[i]..self.start[i] + i - fi];
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (off, &l) in row.iter().enumerate() {
                let k = fi + off;
                let xk = &x[k * p..(k + 1) * p];
                for c in 0..p {
                    acc[c] += l * xk[c];
                }
            }
            let xi = &mut x[i * p..(i + 1) * p];
            for c in 0..p {
                xi[c] -= acc[c];
            }
        }
        for i in 0..self.n {
            let d = self.diag(i);
            for v in &mut x[i * p..(i + 1) * p] {
                *v /= d;
            }
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = &self.vals[self.start[i]..self.start[i] + i - fi];
            acc.copy_from_slice(&x[i * p..(i + 1) * p]);
            for (off, &l) in row.iter().enumerate() {
                let k = fi + off;
                let xk = &mut x[k * p..(k + 1) * p];
                for c in 0..p {
                    xk[c] -= l * acc[c];
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_rows(&mut x, 1);
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize the loop.
    let mut s = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            s[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::grid::assemble_laplacian;
    use crate::geometry::{build_surface, BoundaryCondition, SurfaceDraft};

    fn small_torus() -> crate::eigensolver::grid::Laplacian {
        let spec = build_surface(
            &SurfaceDraft::torus(1.0, 0.3125, BoundaryCondition::Dirichlet).with_obstacle(0.5, 0.15625, 0.08),
        )
        .unwrap();
        assemble_laplacian(&spec, 64).unwrap()
    }

    #[test]
    fn solve_matches_dense_solve() {
        let lap = small_torus();
        let shift = 150.0;
        let ldl = EnvelopeLdl::factor(&lap.matrix, shift).unwrap();
        let b: Vec<f64> = (0..lap.matrix.n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let x = ldl.solve(&b);
        let mut r = lap.matrix.apply(&x);
        for i in 0..r.len() {
            r[i] -= shift * x[i] + b[i];
        }
        let rn: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rn < 1e-9 * bn, "{rn}");
    }

    #[test]
    fn inertia_counts_eigenvalues_below_the_shift() {
        let lap = small_torus();
        let dense = lap.matrix.to_dense();
        let eig = nalgebra::SymmetricEigen::new(dense).eigenvalues;
        for shift in [10.0, 300.0, 2000.0, 9000.0] {
            let expected = eig.iter().filter(|&&e| e < shift).count();
            let ldl = EnvelopeLdl::factor(&lap.matrix, shift).unwrap();
            assert_eq!(ldl.negative_pivots(), expected, "shift {shift}");
        }
    }

    #[test]
    fn multiple_right_hand_sides_agree_with_single_solves() {
        let lap = small_torus();
        let ldl = EnvelopeLdl::factor(&lap.matrix, -1.0).unwrap();
        let n = lap.matrix.n;
        let p = 3;
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|c| (0..n).map(|i| ((i + c) as f64).sin()).collect())
            .collect();
        let mut rows = vec![0.0; n * p];
        for c in 0..p {
            for i in 0..n {
                rows[i * p + c] = cols[c][i];
            }
        }
        ldl.solve_rows(&mut rows, p);
        for c in 0..p {
            let single = ldl.solve(&cols[c]);
            for i in 0..n {
                assert!((rows[i * p + c] - single[i]).abs() < 1e-12 * single[i].abs().max(1.0));
            }
        }
    }
}
