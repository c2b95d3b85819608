//! Dirichlet/Neumann Laplace eigenpairs on a masked grid and their boundary
//! Cauchy data.

mod archive;
mod grid;
mod lanczos;
mod ldl;
mod trace;

use serde::{Deserialize, Serialize};

pub use archive::{read_archive, write_archive, write_eigen_table, write_traces_csv, ARCHIVE_MAGIC};
pub use grid::{
    assemble_laplacian, assemble_on, Grid, Laplacian, Neighbor, NodeKind, SparseMatrix, MIN_RESOLUTION, STEPS,
};
pub use lanczos::{factor_near, SolverOptions};
pub use ldl::EnvelopeLdl;
pub use trace::{
    extract_trace, extract_trace_with, flux_atoms, interpolate, BoundaryTrace, FluxAtom, TraceMethod, TraceSample,
};

use crate::error::{Error, Result};
use crate::geometry::BoundaryCondition;
use lanczos::{slice_solve, RawPair, Target};

/// Eigenvalues closer than this (relative) are treated as one cluster.
pub const CLUSTER_GAP: f64 = 1e-6;
/// Clusters this tight are exactly degenerate up to rounding and get a
/// canonical basis.
const EXACT_GAP: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub index: usize,
    /// Frequency; the eigenvalue of `-Delta_h` is `lambda^2`.
    pub lambda: f64,
    /// Values on every grid node (zero on masked nodes), normalized so that
    /// `h^2 sum field^2 = 1`.
    pub field: Vec<f64>,
    /// `|(-Delta_h - lambda^2) field|` in the grid quadrature norm.
    pub residual: f64,
}

impl EigenPair {
    pub fn eigenvalue(&self) -> f64 {
        self.lambda * self.lambda
    }

    pub fn sup_norm(&self) -> f64 {
        self.field.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub grid: Grid,
    pub pairs: Vec<EigenPair>,
}

impl Spectrum {
    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.grid.bc
    }

    /// Modes entering statistics: everything except a zero mode.
    pub fn nonzero(&self) -> impl Iterator<Item = &EigenPair> {
        self.pairs.iter().filter(|p| p.lambda > 1e-6)
    }
}

/// The `k` lowest eigenpairs with default solver settings.
pub fn solve_lowest(lap: &Laplacian, k: usize) -> Result<Spectrum> {
    solve_lowest_with(lap, k, &SolverOptions::default())
}

pub fn solve_lowest_with(lap: &Laplacian, k: usize, opts: &SolverOptions) -> Result<Spectrum> {
    let available = lap.grid.unknown_count();
    if k == 0 || 10 * k > available {
        return Err(Error::TooManyModes {
            requested: k,
            available,
        });
    }
    let mut raw = slice_solve(&lap.matrix, Target::Lowest(k), lap.grid.quadrature_area(), -1.0, opts)?;
    canonicalize_clusters(&mut raw);
    raw.truncate(k);
    finish(lap, raw, opts.tol)
}

/// All eigenpairs with frequency below `lambda_cut`.
pub fn solve_below(lap: &Laplacian, lambda_cut: f64, opts: &SolverOptions) -> Result<Spectrum> {
    let mut raw = slice_solve(
        &lap.matrix,
        Target::Below(lambda_cut * lambda_cut),
        lap.grid.quadrature_area(),
        -1.0,
        opts,
    )?;
    let available = lap.grid.unknown_count();
    if 10 * raw.len() > available {
        return Err(Error::TooManyModes {
            requested: raw.len(),
            available,
        });
    }
    canonicalize_clusters(&mut raw);
    finish(lap, raw, opts.tol)
}

/// Headroom of the final residual check over the solver tolerance. Cluster
/// rotations can add rounding of order the solver tolerance itself.
const FINAL_RESIDUAL_SLACK: f64 = 10.0;

fn finish(lap: &Laplacian, mut raw: Vec<RawPair>, tol: f64) -> Result<Spectrum> {
    let h = lap.grid.h;
    let products: Vec<Vec<f64>> = raw.iter().map(|r| lap.matrix.apply(&r.vector)).collect();
    for (r, au) in raw.iter_mut().zip(&products) {
        r.value = au.iter().zip(&r.vector).map(|(a, u)| a * u).sum();
    }
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a].value.total_cmp(&raw[b].value));
    let mut pairs = Vec::with_capacity(raw.len());
    for (index, k) in order.into_iter().enumerate() {
        let r = &raw[k];
        let residual = products[k]
            .iter()
            .zip(&r.vector)
            .map(|(a, u)| (a - r.value * u).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual > FINAL_RESIDUAL_SLACK * tol * r.value.abs().max(1.0) {
            return Err(Error::ConvergenceFailure(format!(
                "mode {index}: residual {residual:.3e} at eigenvalue {:.6}",
                r.value
            )));
        }
        let mut field = lap.grid.scatter(&r.vector);
        field.iter_mut().for_each(|v| *v /= h);
        pairs.push(EigenPair {
            index,
            lambda: r.value.max(0.0).sqrt(),
            field,
            residual,
        });
    }
    Ok(Spectrum {
        grid: lap.grid.clone(),
        pairs,
    })
}

/// Fixed pseudo-random weights used to pick the sign of simple modes.
fn sign_weight(i: usize) -> f64 {
    let x = (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0xd1b5_4a32_d192_ed03;
    let x = (x ^ (x >> 31)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

fn canonicalize_clusters(pairs: &mut [RawPair]) {
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() {
            let scale = pairs[end - 1].value.abs().max(1.0);
            if pairs[end].value - pairs[end - 1].value < CLUSTER_GAP * scale {
                end += 1;
            } else {
                break;
            }
        }
        let cluster = &mut pairs[start..end];
        if cluster.len() == 1 {
            let v = &mut cluster[0].vector;
            let s: f64 = v.iter().enumerate().map(|(i, x)| x * sign_weight(i)).sum();
            if s < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        } else {
            let spread = cluster[cluster.len() - 1].value - cluster[0].value;
            if spread <= EXACT_GAP * cluster[0].value.abs().max(1.0) {
                canonical_basis(cluster);
            } else {
                gram_schmidt(cluster);
            }
        }
        start = end;
    }
}

fn gram_schmidt(cluster: &mut [RawPair]) {
    for t in 0..cluster.len() {
        let (done, rest) = cluster.split_at_mut(t);
        let v = &mut rest[0].vector;
        for _ in 0..2 {
            for q in done.iter() {
                let d: f64 = q.vector.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(&q.vector).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Replace an exactly degenerate cluster's basis by one that does not depend
/// on the basis the solver happened to return.
///
/// Probe nodes are picked by pivoted elimination on the rows of the cluster
/// matrix (ties broken by lowest index). The basis is transformed to be the
/// identity on the probes and then orthonormalized in probe order.
fn canonical_basis(cluster: &mut [RawPair]) {
    let d = cluster.len();
    let n = cluster[0].vector.len();
    let row = |i: usize, c: &[RawPair]| -> Vec<f64> { c.iter().map(|p| p.vector[i]).collect() };
    let mut residual: Vec<f64> = (0..n).map(|i| row(i, cluster).iter().map(|x| x * x).sum()).collect();
    let mut directions: Vec<Vec<f64>> = Vec::new();
    let mut probes = Vec::with_capacity(d);
    for _ in 0..d {
        let best = residual.iter().cloned().fold(0.0, f64::max);
        let pick = residual.iter().position(|&r| r >= best * (1.0 - 1e-8)).unwrap();
        probes.push(pick);
        let mut q = row(pick, cluster);
        for dir in &directions {
            let dd: f64 = q.iter().zip(dir).map(|(a, b)| a * b).sum();
            q.iter_mut().zip(dir).for_each(|(x, y)| *x -= dd * y);
        }
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.iter_mut().for_each(|x| *x /= qn);
        for (i, r) in residual.iter_mut().enumerate() {
            let proj: f64 = cluster.iter().zip(&q).map(|(p, qc)| p.vector[i] * qc).sum();
            *r -= proj * proj;
        }
        residual[pick] = f64::NEG_INFINITY;
        directions.push(q);
    }
    let m = nalgebra::DMatrix::from_fn(d, d, |s, c| cluster[c].vector[probes[s]]);
    let Some(inv) = m.try_inverse() else {
        gram_schmidt(cluster);
        return;
    };
    let old: Vec<Vec<f64>> = cluster.iter().map(|p| p.vector.clone()).collect();
    for (t, pair) in cluster.iter_mut().enumerate() {
        let mut v = vec![0.0; n];
        for (c, col) in old.iter().enumerate() {
            let w = inv[(c, t)];
            v.iter_mut().zip(col).for_each(|(x, y)| *x += w * y);
        }
        pair.vector = v;
    }
    gram_schmidt(cluster);
    let mean = cluster.iter().map(|p| p.value).sum::<f64>() / d as f64;
    for p in cluster.iter_mut() {
        p.value = mean;
    }
}
