//! Shift-invert block Lanczos with spectrum slicing.
//!
//! The spectrum is cut into slices `[lo, hi)` whose eigenvalue count is known
//! exactly from the inertia of `A - hi I`. Each slice is solved by block
//! Lanczos on `(A - hi I)^{-1}` with full reorthogonalization, followed by a
//! Rayleigh-Ritz step on `A` and, when needed, a few subspace iterations.

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::SparseMatrix;
use super::ldl::EnvelopeLdl;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub block: usize,
    /// Target number of eigenvalues per slice.
    pub per_slice: usize,
    /// Basis size at which a slice is split instead of extended.
    pub max_basis: usize,
    /// Relative residual tolerance `|A u - mu u| <= tol max(mu, 1)`.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            block: 8,
            per_slice: 40,
            max_basis: 400,
            tol: 1e-8,
            seed: 0x5eed_1a2c,
        }
    }
}

/// Unit eigenvector of the sparse operator with its eigenvalue `mu`.
#[derive(Clone, Debug)]
pub struct RawPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Factor at `shift`, nudging it off eigenvalues if a pivot vanishes.
pub fn factor_near(a: &SparseMatrix, shift: f64) -> Result<EnvelopeLdl> {
    let mut s = shift;
    for k in 0..8 {
        match EnvelopeLdl::factor(a, s) {
            Ok(f) => return Ok(f),
            Err(_) => {
                s = shift + (1e-7 * shift.abs().max(1.0)) * (k as f64 + 1.0);
                log::debug!("shift {shift} hit an eigenvalue, retrying at {s}");
            }
        }
    }
    Err(Error::ConvergenceFailure(format!("cannot factor near shift {shift}")))
}

/// Eigenpairs with `mu < cut` or the lowest `k`, whichever request is given.
pub enum Target {
    Lowest(usize),
    Below(f64),
}

/// Solve for the requested part of the spectrum, sorted ascending.
pub fn slice_solve(
    a: &SparseMatrix,
    target: Target,
    area: f64,
    start: f64,
    opts: &SolverOptions,
) -> Result<Vec<RawPair>> {
    let density = (area / (4.0 * std::f64::consts::PI)).max(1e-12);
    let mut width = opts.per_slice as f64 / density;
    let mut lo = start;
    let mut below_lo = factor_near(a, lo)?.negative_pivots();
    if below_lo != 0 {
        return Err(Error::ConvergenceFailure(format!(
            "{below_lo} eigenvalues below the starting shift {start}"
        )));
    }
    let mut pairs: Vec<RawPair> = Vec::new();
    let mut slice = 0u64;
    loop {
        let done = match target {
            Target::Lowest(k) => {
                pairs.len() >= k && {
                    // Do not cut a degenerate cluster at the requested count.
                    let mu = pairs[k - 1].value;
                    lo > mu * (1.0 + 1e-6) + 1e-9
                }
            }
            Target::Below(cut) => lo >= cut,
        };
        if done {
            break;
        }
        let mut hi = lo + width;
        if let Target::Below(cut) = target {
            hi = hi.min(cut);
        }
        let ldl = factor_near(a, hi)?;
        let hi = ldl.shift;
        let below_hi = ldl.negative_pivots();
        let count = below_hi - below_lo;
        if count > 2 * opts.per_slice && hi - lo > 1e-9 * hi.abs().max(1.0) {
            width *= 0.5;
            continue;
        }
        if count > 0 {
            match lanczos_slice(a, &ldl, lo, hi, count, opts, slice) {
                Ok(found) => {
                    pairs.extend(found);
                    pairs.sort_by(|x, y| x.value.total_cmp(&y.value));
                }
                Err(SliceError::BasisExhausted) => {
                    log::debug!("slice [{lo}, {hi}) with {count} eigenvalues exhausted the basis; splitting");
                    width *= 0.5;
                    continue;
                }
                Err(SliceError::Failed(e)) => return Err(e),
            }
        }
        slice += 1;
        // Steer the next slice towards the target count.
        let ratio = if count == 0 {
            2.0
        } else {
            opts.per_slice as f64 / count as f64
        };
        width *= ratio.clamp(0.5, 2.0);
        lo = hi;
        below_lo = below_hi;
        if pairs.len() > a.n / 2 {
            return Err(Error::TooManyModes {
                requested: pairs.len(),
                available: a.n,
            });
        }
    }
    pairs.sort_by(|x, y| x.value.total_cmp(&y.value));
    if let Target::Below(cut) = target {
        pairs.retain(|p| p.value < cut);
    }
    Ok(pairs)
}

enum SliceError {
    BasisExhausted,
    Failed(Error),
}

impl From<Error> for SliceError {
    fn from(e: Error) -> Self {
        SliceError::Failed(e)
    }
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<f64> {
    (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `(A - shift)^{-1}` applied to the `p` columns of a column-major block.
fn apply_inverse(ldl: &EnvelopeLdl, block: &[f64], n: usize, p: usize) -> Vec<f64> {
    let mut rows = vec![0.0; n * p];
    for c in 0..p {
        for i in 0..n {
            rows[i * p + c] = block[c * n + i];
        }
    }
    ldl.solve_rows(&mut rows, p);
    let mut out = vec![0.0; n * p];
    for c in 0..p {
        for i in 0..n {
            out[c * n + i] = rows[i * p + c];
        }
    }
    out
}

/// Orthonormalize the columns of `w` against the first `m` basis columns and
/// each other (two Gram-Schmidt passes). Returns the projection coefficients
/// on the basis (`m x p`) and the triangular factor of the remainder.
/// Columns that vanish are replaced by random directions and get a zero
/// row in the triangular factor.
fn orthonormalize(
    basis: &[f64],
    n: usize,
    m: usize,
    w: &mut DMatrix<f64>,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = w.ncols();
    let incoming: Vec<f64> = (0..p).map(|c| w.column(c).norm()).collect();
    let mut coeffs = DMatrix::zeros(m, p);
    if m > 0 {
        let v = DMatrixView::from_slice(&basis[..n * m], n, m);
        for _ in 0..2 {
            let c = v.tr_mul(w);
            w.gemm(-1.0, &v, &c, 1.0);
            coeffs += c;
        }
    }
    let mut r = DMatrix::zeros(p, p);
    for c in 0..p {
        let original = incoming[c];
        for _ in 0..2 {
            for d in 0..c {
                let proj = w.column(d).dot(&w.column(c));
                r[(d, c)] += proj;
                let qd = w.column(d).clone_owned();
                w.column_mut(c).axpy(-proj, &qd, 1.0);
            }
        }
        let norm = w.column(c).norm();
        if norm > 1e-10 * original && norm > 1e-300 {
            r[(c, c)] = norm;
            w.column_mut(c).scale_mut(1.0 / norm);
        } else {
            // Breakdown: continue the Krylov space with a fresh direction.
            for d in 0..c {
                r[(d, c)] = 0.0;
            }
            let mut fresh = DMatrix::from_column_slice(n, 1, &random_block(rng, n, 1));
            for _ in 0..2 {
                if m > 0 {
                    let v = DMatrixView::from_slice(&basis[..n * m], n, m);
                    let cc = v.tr_mul(&fresh);
                    fresh.gemm(-1.0, &v, &cc, 1.0);
                }
                for d in 0..c {
                    let proj = w.column(d).dot(&fresh.column(0));
                    let qd = w.column(d).clone_owned();
                    fresh.column_mut(0).axpy(-proj, &qd, 1.0);
                }
            }
            let fnorm = fresh.norm();
            w.set_column(c, &(fresh.column(0) / fnorm));
        }
    }
    (coeffs, r)
}

fn lanczos_slice(
    a: &SparseMatrix,
    ldl: &EnvelopeLdl,
    lo: f64,
    hi: f64,
    count: usize,
    opts: &SolverOptions,
    slice: u64,
) -> std::result::Result<Vec<RawPair>, SliceError> {
    let n = a.n;
    let p = opts.block.min(n);
    let shift = ldl.shift;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ slice.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let max_basis = opts.max_basis.min(n - p).max(2 * p);

    let mut basis: Vec<f64> = Vec::with_capacity(n * (max_basis + p));
    let mut h = DMatrix::<f64>::zeros(max_basis + p, max_basis + p);

    let mut w = DMatrix::from_column_slice(n, p, &random_block(&mut rng, n, p));
    orthonormalize(&basis, n, 0, &mut w, &mut rng);
    basis.extend_from_slice(w.as_slice());
    let mut m = p;

    loop {
        let current = &basis[(m - p) * n..m * n];
        let applied = apply_inverse(ldl, current, n, p);
        let mut w = DMatrix::from_column_slice(n, p, &applied);
        let (coeffs, r) = orthonormalize(&basis, n, m, &mut w, &mut rng);
        h.view_mut((0, m - p), (m, p)).copy_from(&coeffs);
        h.view_mut((m, m - p), (p, p)).copy_from(&r);

        if m >= count.max(p) {
            let t = h.view((0, 0), (m, m));
            let t = (t + t.transpose()) * 0.5;
            let eig = SymmetricEigen::new(t);
            let last = r.clone_owned();
            let mut wanted = Vec::new();
            let mut converged = 0;
            for k in 0..m {
                let theta = eig.eigenvalues[k];
                if theta == 0.0 {
                    continue;
                }
                let mu = shift + 1.0 / theta;
                if mu < lo || mu >= hi {
                    continue;
                }
                let tail = eig.eigenvectors.view((m - p, k), (p, 1));
                // A residual of `est` for the inverse is roughly `est / theta^2`
                // for `A`.
                let est = (&last * tail).norm();
                if est <= 0.1 * opts.tol * mu.abs().max(1.0) * theta * theta {
                    converged += 1;
                    wanted.push(k);
                }
            }
            if converged > count {
                return Err(SliceError::Failed(Error::ConvergenceFailure(format!(
                    "slice [{lo}, {hi}): {converged} converged Ritz values but inertia counts {count}"
                ))));
            }
            if converged == count {
                let v = DMatrixView::from_slice(&basis[..n * m], n, m);
                let y = DMatrix::from_fn(m, count, |i, c| eig.eigenvectors[(i, wanted[c])]);
                if let Some(pairs) = refine(a, v * y, lo, hi, opts.tol) {
                    return Ok(pairs);
                }
            }
        }

        if m + p > max_basis {
            return Err(SliceError::BasisExhausted);
        }
        basis.extend_from_slice(w.as_slice());
        m += p;
    }
}

/// Rayleigh-Ritz on `A` over the columns of `u`. `None` if some residual
/// misses the tolerance or a Ritz value leaves the slice.
fn refine(a: &SparseMatrix, u: DMatrix<f64>, lo: f64, hi: f64, tol: f64) -> Option<Vec<RawPair>> {
    let n = a.n;
    let c = u.ncols();
    let q = u.qr().q();
    let mut aq = DMatrix::zeros(n, c);
    for k in 0..c {
        let col: Vec<f64> = q.column(k).iter().copied().collect();
        aq.set_column(k, &nalgebra::DVector::from_vec(a.apply(&col)));
    }
    let g = q.tr_mul(&aq);
    let g = (&g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(g);
    let rotated = &q * &eig.eigenvectors;
    let arot = &aq * &eig.eigenvectors;
    let mut pairs = Vec::with_capacity(c);
    let mut worst: f64 = 0.0;
    for k in 0..c {
        let mu = eig.eigenvalues[k];
        let res = (arot.column(k) - rotated.column(k) * mu).norm();
        worst = worst.max(res / mu.abs().max(1.0));
        pairs.push(RawPair {
            value: mu,
            vector: rotated.column(k).iter().copied().collect(),
        });
    }
    let inside = pairs
        .iter()
        .all(|p| p.value >= lo - 1e-9 * lo.abs().max(1.0) && p.value < hi);
    if worst <= tol && inside {
        Some(pairs)
    } else {
        log::debug!("slice [{lo}, {hi}): worst relative residual {worst:.2e}, extending basis");
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::grid::assemble_laplacian;
    use crate::geometry::{build_surface, BoundaryCondition, SurfaceDraft};

    fn check_against_dense(draft: SurfaceDraft, start: f64, k: usize) {
        let spec = build_surface(&draft).unwrap();
        let lap = assemble_laplacian(&spec, 64).unwrap();
        let dense = SymmetricEigen::new(lap.matrix.to_dense());
        let mut exact: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        exact.sort_by(|a, b| a.total_cmp(b));
        let opts = SolverOptions {
            per_slice: 12,
            ..SolverOptions::default()
        };
        let area = lap.grid.quadrature_area();
        let pairs = slice_solve(&lap.matrix, Target::Lowest(k), area, start, &opts).unwrap();
        assert!(pairs.len() >= k);
        for (i, p) in pairs.iter().take(k).enumerate() {
            assert!(
                (p.value - exact[i]).abs() <= 1e-9 * exact[i].abs().max(1.0),
                "{i}: {} vs {}",
                p.value,
                exact[i]
            );
        }
        for i in 0..k {
            for j in 0..k {
                let d: f64 = pairs[i].vector.iter().zip(&pairs[j].vector).map(|(a, b)| a * b).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((d - expected).abs() < 1e-8, "<{i},{j}> = {d}");
            }
        }
    }

    #[test]
    fn dirichlet_torus_matches_dense_solver() {
        check_against_dense(
            SurfaceDraft::torus(1.0, 0.3125, BoundaryCondition::Dirichlet).with_obstacle(0.5, 0.15625, 0.08),
            0.0,
            60,
        );
    }

    #[test]
    fn neumann_rectangle_matches_dense_solver() {
        check_against_dense(
            SurfaceDraft::rectangle(1.0, 0.3125, BoundaryCondition::Neumann).with_obstacle(0.4, 0.15625, 0.08),
            -1.0,
            60,
        );
    }
}
