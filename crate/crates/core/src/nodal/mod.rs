//! Nodal domains, boundary sign changes and the nodal graph.

mod graph;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use graph::{build_nodal_graph, build_nodal_graph_with, euler_check, EulerCheck, NodalGraph, SingularPoint};

use crate::eigensolver::{BoundaryTrace, EigenPair, Grid, Neighbor, Spectrum};
use crate::error::{Error, Result};
use crate::geometry::SurfaceSpec;
use crate::numeric::{dyadic_windows, median};

/// Relative zero threshold for grid values and trace samples.
pub const ZERO_THRESHOLD: f64 = 1e-10;
/// Largest `lambda h` at which domain counts are trusted. Sampled product
/// modes on the unit square keep exact counts up to about 3; the eigensolver's
/// own dispersion error makes 1.5 the safe calibration.
pub const RESOLVED_LAMBDA_H: f64 = 1.5;
/// Largest fraction of plateau zero nodes before a field counts as unresolved.
pub const MAX_ZERO_FRACTION: f64 = 0.05;

/// Sign of every grid node (`0` on masked nodes and below the threshold).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignField {
    pub mode: usize,
    pub threshold: f64,
    pub signs: Vec<i8>,
    pub zero_nodes: usize,
    /// Zero nodes with no sign change among their eight neighbours. Zeros on
    /// a resolved nodal line (exact by symmetry) are not counted.
    pub plateau_nodes: usize,
}

impl SignField {
    pub fn new(grid: &Grid, pair: &EigenPair) -> Result<Self> {
        let threshold = ZERO_THRESHOLD * pair.sup_norm();
        let mut signs = vec![0i8; grid.node_count()];
        let mut zero_nodes = 0;
        for &n in &grid.nodes {
            let v = pair.field[n];
            signs[n] = if v > threshold {
                1
            } else if v < -threshold {
                -1
            } else {
                zero_nodes += 1;
                0
            };
        }
        let mut plateau_nodes = 0;
        if zero_nodes > 0 {
            for &n in &grid.nodes {
                if signs[n] != 0 {
                    continue;
                }
                let (i, j) = grid.ij(n);
                let (mut plus, mut minus) = (false, false);
                for dj in -1..=1 {
                    for di in -1..=1 {
                        if let Some(m) = grid.offset(i, j, di, dj) {
                            plus |= signs[m] > 0;
                            minus |= signs[m] < 0;
                        }
                    }
                }
                if !(plus && minus) {
                    plateau_nodes += 1;
                }
            }
        }
        let zero_fraction = plateau_nodes as f64 / grid.nodes.len().max(1) as f64;
        if zero_fraction > MAX_ZERO_FRACTION {
            return Err(Error::DegenerateField { zero_fraction });
        }
        Ok(Self {
            mode: pair.index,
            threshold,
            signs,
            zero_nodes,
            plateau_nodes,
        })
    }
}

/// Frequency below which nodal counts on `grid` are considered resolved.
pub fn resolved_cutoff(grid: &Grid) -> f64 {
    RESOLVED_LAMBDA_H / grid.h
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.parent.len()
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Number of 4-connected same-sign components; zero nodes join no domain.
pub fn count_nodal_domains(grid: &Grid, pair: &EigenPair) -> Result<usize> {
    let field = SignField::new(grid, pair)?;
    Ok(domains_of(grid, &field))
}

fn domains_of(grid: &Grid, field: &SignField) -> usize {
    let mut uf = UnionFind::new(grid.node_count());
    let mut count = 0usize;
    for &n in &grid.nodes {
        if field.signs[n] != 0 {
            count += 1;
        }
    }
    for &n in &grid.nodes {
        let s = field.signs[n];
        if s == 0 {
            continue;
        }
        for nb in grid.neighbors(n) {
            if let Neighbor::Node(m) = nb {
                if field.signs[m] == s && uf.union(n, m) {
                    count -= 1;
                }
            }
        }
    }
    count
}

/// Cyclic sign changes along one trace, carrying the last nonzero sign
/// across zero samples.
pub fn sign_changes_per_component(trace: &BoundaryTrace) -> usize {
    sign_changes_with_threshold(trace, ZERO_THRESHOLD * trace.sup())
}

/// Cyclic sign changes ignoring samples with `|value| <= tau`.
pub fn sign_changes_with_threshold(trace: &BoundaryTrace, tau: f64) -> usize {
    let signs: Vec<bool> = trace
        .samples
        .iter()
        .filter(|s| s.value.abs() > tau)
        .map(|s| s.value > 0.0)
        .collect();
    if signs.is_empty() {
        return 0;
    }
    (0..signs.len())
        .filter(|&k| signs[k] != signs[(k + 1) % signs.len()])
        .count()
}

/// Sign changes summed over all boundary components.
pub fn count_boundary_sign_changes(traces: &[BoundaryTrace]) -> Result<usize> {
    let sup = traces.iter().map(BoundaryTrace::sup).fold(0.0, f64::max);
    if sup == 0.0 {
        return Err(Error::AllZeroTrace);
    }
    let tau = ZERO_THRESHOLD * sup;
    Ok(traces.iter().map(|t| sign_changes_with_threshold(t, tau)).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchySupRecord {
    pub index: usize,
    pub lambda: f64,
    pub sup: f64,
    /// `sup / lambda^(1/2)`.
    pub ratio: f64,
}

/// Sup norms of the Cauchy data over all boundary samples. Zero modes are
/// skipped.
pub fn supnorm_cauchy<'a, I>(modes: I) -> Vec<CauchySupRecord>
where
    I: IntoIterator<Item = (&'a EigenPair, &'a [BoundaryTrace])>,
{
    modes
        .into_iter()
        .filter(|(p, _)| p.lambda > 1e-6)
        .map(|(p, traces)| {
            let sup = traces.iter().map(BoundaryTrace::sup).fold(0.0, f64::max);
            CauchySupRecord {
                index: p.index,
                lambda: p.lambda,
                sup,
                ratio: sup / p.lambda.sqrt(),
            }
        })
        .collect()
}

/// Median of a per-mode statistic inside a frequency window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMedian {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub median: f64,
}

/// Medians of `(lambda, value)` over dyadic windows ending at the largest
/// frequency. Zero frequencies are ignored and windows with fewer than
/// `min_count` entries are dropped.
pub fn window_medians(points: &[(f64, f64)], min_count: usize) -> Vec<WindowMedian> {
    let Some(top) = points.iter().map(|p| p.0).reduce(f64::max) else {
        return Vec::new();
    };
    let bottom = points
        .iter()
        .map(|p| p.0)
        .filter(|&l| l > 0.0)
        .fold(f64::INFINITY, f64::min);
    dyadic_windows(bottom, top * (1.0 + 1e-12))
        .into_iter()
        .filter_map(|(lo, hi)| {
            let vals: Vec<f64> = points.iter().filter(|p| p.0 >= lo && p.0 < hi).map(|p| p.1).collect();
            (vals.len() >= min_count).then(|| WindowMedian {
                lo,
                hi,
                count: vals.len(),
                median: median(&vals),
            })
        })
        .collect()
}

/// Everything the nodal analysis records for one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalRow {
    pub index: usize,
    pub lambda: f64,
    /// Domains from union-find.
    pub domains: usize,
    pub graph: NodalGraph,
    pub euler: EulerCheck,
    /// `domains <= index + 1`.
    pub courant: bool,
    /// Union-find count agrees with the graph's face count.
    pub counters_agree: bool,
    /// Every boundary component shows an even number of sign changes.
    pub even_changes: bool,
    pub sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalReport {
    pub rows: Vec<NodalRow>,
    /// Modes skipped as degenerate fields or all-zero traces.
    pub skipped: Vec<(usize, String)>,
}

impl NodalReport {
    pub fn euler_failures(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| !r.euler.pass).map(|r| r.index).collect()
    }

    pub fn courant_failures(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| !r.courant).map(|r| r.index).collect()
    }

    pub fn all_consistent(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.counters_agree && r.even_changes && r.euler.raw_pass)
    }
}

/// Analyze one mode given its traces.
pub fn analyze_mode(spec: &SurfaceSpec, grid: &Grid, pair: &EigenPair, traces: &[BoundaryTrace]) -> Result<NodalRow> {
    let field = SignField::new(grid, pair)?;
    let domains = domains_of(grid, &field);
    let graph = build_nodal_graph_with(spec, grid, pair, traces)?;
    let euler = euler_check(&graph);
    Ok(NodalRow {
        index: pair.index,
        lambda: pair.lambda,
        domains,
        courant: domains <= pair.index + 1,
        counters_agree: domains == graph.f,
        even_changes: traces.iter().all(|t| sign_changes_per_component(t).is_multiple_of(2)),
        sup: traces.iter().map(BoundaryTrace::sup).fold(0.0, f64::max),
        graph,
        euler,
    })
}

/// Nodal analysis of a whole spectrum, one trace set per pair.
pub fn analyze_spectrum(spec: &SurfaceSpec, spectrum: &Spectrum, traces: &[Vec<BoundaryTrace>]) -> NodalReport {
    let results: Vec<(usize, Result<NodalRow>)> = spectrum
        .pairs
        .par_iter()
        .zip(traces.par_iter())
        .map(|(p, t)| (p.index, analyze_mode(spec, &spectrum.grid, p, t)))
        .collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (index, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => skipped.push((index, e.to_string())),
        }
    }
    NodalReport { rows, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::{extract_trace, TraceSample};
    use crate::geometry::{build_surface, BoundaryCondition, SurfaceDraft};
    use std::f64::consts::PI;

    pub(crate) fn sampled(
        n: usize,
        bc: BoundaryCondition,
        f: impl Fn(f64, f64) -> f64,
        lambda: f64,
    ) -> (SurfaceSpec, Grid, EigenPair) {
        let spec = build_surface(&SurfaceDraft::rectangle(1.0, 1.0, bc)).unwrap();
        let grid = Grid::new(&spec, n).unwrap();
        let mut field = vec![0.0; grid.node_count()];
        for &k in &grid.nodes {
            let p = grid.position(k);
            field[k] = f(p.x, p.y);
        }
        let norm = (field.iter().map(|v| v * v).sum::<f64>() * grid.h * grid.h).sqrt();
        if norm > 0.0 {
            field.iter_mut().for_each(|v| *v /= norm);
        }
        (
            spec,
            grid,
            EigenPair {
                index: 0,
                lambda,
                field,
                residual: 0.0,
            },
        )
    }

    fn product(m: usize, n: usize) -> impl Fn(f64, f64) -> f64 {
        move |x, y| (m as f64 * PI * x).sin() * (n as f64 * PI * y).sin()
    }

    fn freq(m: usize, n: usize) -> f64 {
        PI * ((m * m + n * n) as f64).sqrt()
    }

    #[test]
    fn product_modes_have_m_times_n_domains() {
        for res in [64, 65] {
            for (m, n, expected) in [(1, 1, 1), (2, 1, 2), (3, 2, 6), (4, 3, 12)] {
                let (_, grid, pair) = sampled(res, BoundaryCondition::Dirichlet, product(m, n), freq(m, n));
                assert_eq!(
                    count_nodal_domains(&grid, &pair).unwrap(),
                    expected,
                    "({m},{n}) at {res}"
                );
            }
        }
    }

    #[test]
    fn symmetric_zero_lines_are_not_degenerate() {
        // (8, 8) on a 64 grid: 14 full zero lines, about 22% of nodes.
        let (_, grid, pair) = sampled(64, BoundaryCondition::Dirichlet, product(8, 8), freq(8, 8));
        let field = SignField::new(&grid, &pair).unwrap();
        assert!(field.zero_nodes as f64 > 0.2 * grid.nodes.len() as f64);
        assert_eq!(field.plateau_nodes, 0);
        assert_eq!(count_nodal_domains(&grid, &pair).unwrap(), 64);
    }

    #[test]
    fn mostly_zero_field_is_degenerate() {
        let (_, grid, pair) = sampled(
            64,
            BoundaryCondition::Dirichlet,
            |x, _| if x < 0.5 { 0.0 } else { 1.0 },
            1.0,
        );
        assert!(matches!(
            count_nodal_domains(&grid, &pair),
            Err(Error::DegenerateField { .. })
        ));
    }

    fn circle_trace(values: impl Fn(f64) -> f64) -> BoundaryTrace {
        let count = 400;
        let length = 2.0 * PI;
        BoundaryTrace {
            component: 0,
            bc: BoundaryCondition::Neumann,
            length,
            samples: (0..count)
                .map(|k| {
                    let s = k as f64 * length / count as f64;
                    TraceSample { s, value: values(s) }
                })
                .collect(),
        }
    }

    #[test]
    fn cosine_traces_change_sign_twice_per_period() {
        for k in 1..8 {
            let t = circle_trace(|s| (k as f64 * s).cos());
            assert_eq!(count_boundary_sign_changes(&[t]).unwrap(), 2 * k);
        }
        let constant = circle_trace(|_| 0.7);
        assert_eq!(count_boundary_sign_changes(&[constant]).unwrap(), 0);
        let zero = circle_trace(|_| 0.0);
        assert!(matches!(count_boundary_sign_changes(&[zero]), Err(Error::AllZeroTrace)));
    }

    #[test]
    fn zero_runs_are_bridged() {
        // + 0 0 + : no change; + 0 - : one change each way round.
        let t = circle_trace(|s| {
            if s < 1.0 {
                1.0
            } else if s < 2.0 {
                0.0
            } else if s < 4.0 {
                1.0
            } else {
                0.0
            }
        });
        assert_eq!(count_boundary_sign_changes(&[t]).unwrap(), 0);
        let t = circle_trace(|s| {
            if s < 3.0 {
                1.0
            } else if s < 3.5 {
                0.0
            } else {
                -1.0
            }
        });
        assert_eq!(count_boundary_sign_changes(&[t]).unwrap(), 2);
    }

    #[test]
    fn dirichlet_mode_two_one_has_two_boundary_changes() {
        for res in [200, 201] {
            let (spec, grid, pair) = sampled(res, BoundaryCondition::Dirichlet, product(2, 1), freq(2, 1));
            let traces = extract_trace(&spec, &grid, &pair).unwrap();
            assert_eq!(count_boundary_sign_changes(&traces).unwrap(), 2, "res {res}");
        }
    }

    #[test]
    fn sup_records_match_the_closed_form() {
        // Normalized (m, n) mode: 2 sin sin, so the wall trace peaks at
        // 2 pi max(m, n) / lambda.
        for (m, n) in [(1, 1), (2, 1), (1, 3)] {
            let lambda = freq(m, n);
            let (spec, grid, pair) = sampled(201, BoundaryCondition::Dirichlet, product(m, n), lambda);
            let traces = extract_trace(&spec, &grid, &pair).unwrap();
            let rec = supnorm_cauchy([(&pair, traces.as_slice())])[0];
            let exact = 2.0 * PI * m.max(n) as f64 / lambda;
            assert!(
                (rec.sup - exact).abs() < 0.02 * exact,
                "({m},{n}): {} vs {exact}",
                rec.sup
            );
            assert!((rec.ratio - exact / lambda.sqrt()).abs() < 0.02 * exact / lambda.sqrt());
        }
        let zero = EigenPair {
            index: 0,
            lambda: 0.0,
            field: vec![],
            residual: 0.0,
        };
        assert!(supnorm_cauchy([(&zero, &[][..])]).is_empty());
    }

    #[test]
    fn window_medians_cover_the_top_octave() {
        let pts: Vec<(f64, f64)> = (1..=64).map(|k| (k as f64, k as f64)).collect();
        let w = window_medians(&pts, 1);
        let last = w.last().unwrap();
        assert!(last.hi > 64.0 && (last.lo - 32.0).abs() < 1e-9);
        assert!(w.windows(2).all(|p| p[0].median < p[1].median));
    }

    #[test]
    fn union_find_merges() {
        let mut uf = UnionFind::new(5);
        assert!(uf.union(0, 1));
        assert!(uf.union(3, 4));
        assert!(!uf.union(1, 0));
        assert_eq!(uf.find(0), uf.find(1));
        assert_ne!(uf.find(1), uf.find(3));
    }
}
