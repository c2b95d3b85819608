//! Boundary Cauchy data: Neumann boundary values and Dirichlet normal
//! derivatives scaled by `1 / lambda`.

use serde::{Deserialize, Serialize};

use super::grid::{Grid, Neighbor, STEPS};
use super::EigenPair;
use crate::error::Result;
use crate::geometry::{min_image, BoundaryComponent, BoundaryCondition, ComponentShape, SurfaceSpec, Vec2};

/// Samples per grid spacing of boundary arc.
pub const SAMPLES_PER_CELL: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub s: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub component: usize,
    pub bc: BoundaryCondition,
    pub length: f64,
    /// Uniform in arclength, `samples[k].s = k * length / samples.len()`.
    pub samples: Vec<TraceSample>,
}

impl BoundaryTrace {
    pub fn spacing(&self) -> f64 {
        self.length / self.samples.len() as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.value)
    }

    /// Periodic trapezoid rule for `int g(s, value) ds`.
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, g: F) -> f64 {
        let ds = self.spacing();
        crate::numeric::compensated_sum(self.samples.iter().map(|s| g(s.s, s.value))) * ds
    }

    pub fn sup(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// How Dirichlet normal derivatives are read off the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceMethod {
    /// Quadratic extrapolation of interpolated values at distances
    /// `h, 2h, 3h` along the inward normal.
    NormalDifference,
    /// Discrete boundary flux of every grid edge leaving the domain, spread
    /// over the boundary with a Gaussian of width `0.75 h`.
    #[default]
    EdgeFlux,
}

const FLUX_WIDTH: f64 = 0.75;

/// Bilinear interpolation of a node field at `p`, dropping masked corners
/// (Neumann) or treating them as zero (Dirichlet). Returns `None` if no
/// active corner is available.
pub fn interpolate(grid: &Grid, field: &[f64], p: Vec2, masked_as_zero: bool) -> Option<f64> {
    let gx = (p.x - grid.x0) / grid.h;
    let gy = (p.y - grid.y0) / grid.h;
    let i0 = gx.floor() as i64;
    let j0 = gy.floor() as i64;
    let fx = gx - i0 as f64;
    let fy = gy - j0 as f64;
    let mut acc = 0.0;
    let mut weight = 0.0;
    for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
        for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
            let w = wx * wy;
            match node_at(grid, i0 + di, j0 + dj) {
                Corner::Active(n) => {
                    acc += w * field[n];
                    weight += w;
                }
                Corner::Zero => {
                    if masked_as_zero {
                        weight += w;
                    }
                }
            }
        }
    }
    (weight > 1e-12).then(|| acc / weight)
}

enum Corner {
    Active(usize),
    /// Masked node, or the eliminated Dirichlet wall.
    Zero,
}

fn node_at(grid: &Grid, i: i64, j: i64) -> Corner {
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    let dirichlet_wall = grid.outer_bc == Some(BoundaryCondition::Dirichlet);
    let wrap = |k: i64, len: i64, periodic: bool| -> Option<i64> {
        if periodic {
            Some(k.rem_euclid(len))
        } else if (0..len).contains(&k) {
            Some(k)
        } else if dirichlet_wall {
            None
        } else {
            // Neumann walls: mirror ghosts of cell-centred nodes.
            Some(k.clamp(0, len - 1))
        }
    };
    match (wrap(i, nx, grid.periodic_x), wrap(j, ny, grid.periodic_y)) {
        (Some(i), Some(j)) => {
            let n = (j * nx + i) as usize;
            if grid.is_active(n) {
                Corner::Active(n)
            } else {
                Corner::Zero
            }
        }
        _ => Corner::Zero,
    }
}

fn component_bc(spec: &SurfaceSpec, grid: &Grid, c: &BoundaryComponent) -> BoundaryCondition {
    match c.shape {
        ComponentShape::Circle { .. } => spec.bc,
        ComponentShape::Walls { .. } => grid.outer_bc.unwrap_or(spec.bc),
    }
}

fn sample_count(c: &BoundaryComponent, h: f64) -> usize {
    (SAMPLES_PER_CELL * c.length / h).ceil() as usize
}

/// Cauchy data of `pair` on every boundary component, with the default
/// Dirichlet method.
pub fn extract_trace(spec: &SurfaceSpec, grid: &Grid, pair: &EigenPair) -> Result<Vec<BoundaryTrace>> {
    extract_trace_with(spec, grid, pair, TraceMethod::default())
}

pub fn extract_trace_with(
    spec: &SurfaceSpec,
    grid: &Grid,
    pair: &EigenPair,
    method: TraceMethod,
) -> Result<Vec<BoundaryTrace>> {
    let mut out = Vec::with_capacity(spec.atlas.components.len());
    let atoms = if method == TraceMethod::EdgeFlux {
        flux_atoms(spec, grid, &pair.field)
    } else {
        Vec::new()
    };
    for c in &spec.atlas.components {
        let bc = component_bc(spec, grid, c);
        let count = sample_count(c, grid.h);
        let ds = c.length / count as f64;
        let samples: Vec<TraceSample> = match bc {
            BoundaryCondition::Neumann => (0..count)
                .map(|k| {
                    let s = k as f64 * ds;
                    let f = c.frame(s);
                    let value = interpolate(grid, &pair.field, f.point, false)
                        .or_else(|| interpolate(grid, &pair.field, f.point + f.normal * grid.h, false))
                        .unwrap_or(0.0);
                    TraceSample { s, value }
                })
                .collect(),
            BoundaryCondition::Dirichlet => {
                let scale = if pair.lambda > 0.0 { 1.0 / pair.lambda } else { 0.0 };
                match method {
                    TraceMethod::NormalDifference => (0..count)
                        .map(|k| {
                            let s = k as f64 * ds;
                            let f = c.frame(s);
                            let d = grid.h;
                            let v = |m: f64| {
                                interpolate(grid, &pair.field, f.point + f.normal * (m * d), true).unwrap_or(0.0)
                            };
                            let dn = (-2.5 * v(1.0) + 4.0 * v(2.0) - 1.5 * v(3.0)) / d;
                            TraceSample { s, value: dn * scale }
                        })
                        .collect(),
                    TraceMethod::EdgeFlux => {
                        let mine: Vec<&FluxAtom> = atoms.iter().filter(|a| a.component == c.id).collect();
                        smooth_atoms(&mine, c.length, count, FLUX_WIDTH * grid.h)
                            .into_iter()
                            .enumerate()
                            .map(|(k, v)| TraceSample {
                                s: k as f64 * ds,
                                value: v * scale,
                            })
                            .collect()
                    }
                }
            }
        };
        out.push(BoundaryTrace {
            component: c.id,
            bc,
            length: c.length,
            samples,
        });
    }
    Ok(out)
}

/// Flux of one grid edge through the boundary, located at arclength `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxAtom {
    pub component: usize,
    pub s: f64,
    /// `int dphi/dnu ds` carried by the edge (`phi` at the active end; the
    /// ghost is zero).
    pub flux: f64,
}

/// Boundary fluxes of every edge from an active node to a Dirichlet ghost.
/// For any smooth `g`, `sum g(s) flux` approximates `int g dphi/dnu ds`.
pub fn flux_atoms(spec: &SurfaceSpec, grid: &Grid, field: &[f64]) -> Vec<FluxAtom> {
    let walls = spec.atlas.components.iter().find(|c| !c.is_circle());
    let mut atoms = Vec::new();
    for &node in &grid.nodes {
        let p = grid.position(node);
        for (k, nb) in grid.neighbors(node).into_iter().enumerate() {
            let step = Vec2::new(STEPS[k].0 as f64, STEPS[k].1 as f64) * grid.h;
            match nb {
                Neighbor::Obstacle(_, o) if spec.bc == BoundaryCondition::Dirichlet => {
                    let ob = &spec.obstacles[o];
                    let mut rel = p - ob.center;
                    if grid.periodic_x {
                        rel = min_image(rel, spec.width(), spec.height());
                    }
                    // Crossing of the edge with the circle.
                    let b = rel.dot(step);
                    let a = step.norm_sq();
                    let cc = rel.norm_sq() - ob.radius * ob.radius;
                    let disc = (b * b - a * cc).max(0.0);
                    let t = ((-b - disc.sqrt()) / a).clamp(0.0, 1.0);
                    let hit = ob.center + rel + step * t;
                    let s = spec.atlas.components[o].locate(hit);
                    atoms.push(FluxAtom {
                        component: o,
                        s,
                        flux: field[node],
                    });
                }
                Neighbor::Wall if grid.outer_bc == Some(BoundaryCondition::Dirichlet) => {
                    if let Some(w) = walls {
                        atoms.push(FluxAtom {
                            component: w.id,
                            s: w.locate(p + step),
                            flux: field[node],
                        });
                    }
                }
                _ => {}
            }
        }
    }
    atoms
}

/// Gaussian-smoothed density of the atoms on a closed curve of length `len`,
/// sampled at `count` uniform points.
fn smooth_atoms(atoms: &[&FluxAtom], len: f64, count: usize, width: f64) -> Vec<f64> {
    let ds = len / count as f64;
    let mut out = vec![0.0; count];
    let reach = (5.0 * width / ds).ceil() as i64;
    let norm = 1.0 / (width * (2.0 * std::f64::consts::PI).sqrt());
    for a in atoms {
        let centre = (a.s / ds).round() as i64;
        for k in centre - reach..=centre + reach {
            let idx = k.rem_euclid(count as i64) as usize;
            let mut d = idx as f64 * ds - a.s;
            d -= len * (d / len).round();
            out[idx] += a.flux * norm * (-0.5 * (d / width).powi(2)).exp();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::{assemble_laplacian, solve_lowest};
    use crate::geometry::{build_surface, SurfaceDraft};
    use std::f64::consts::PI;

    fn square_pair(
        n: usize,
        bc: BoundaryCondition,
        f: impl Fn(f64, f64) -> f64,
        lambda: f64,
    ) -> (SurfaceSpec, Grid, EigenPair) {
        let spec = build_surface(&SurfaceDraft::rectangle(1.0, 1.0, bc)).unwrap();
        let grid = Grid::new(&spec, n).unwrap();
        let mut field: Vec<f64> = (0..grid.node_count())
            .map(|k| {
                let p = grid.position(k);
                f(p.x, p.y)
            })
            .collect();
        let norm = (field.iter().map(|v| v * v).sum::<f64>() * grid.h * grid.h).sqrt();
        field.iter_mut().for_each(|v| *v /= norm);
        let pair = EigenPair {
            index: 0,
            lambda,
            field,
            residual: 0.0,
        };
        (spec, grid, pair)
    }

    #[test]
    fn dirichlet_ground_state_trace_on_the_bottom_wall() {
        let lambda = (2.0f64).sqrt() * PI;
        let (spec, grid, pair) = square_pair(
            201,
            BoundaryCondition::Dirichlet,
            |x, y| (PI * x).sin() * (PI * y).sin(),
            lambda,
        );
        for method in [TraceMethod::NormalDifference, TraceMethod::EdgeFlux] {
            let traces = extract_trace_with(&spec, &grid, &pair, method).unwrap();
            let t = &traces[0];
            let mut worst: f64 = 0.0;
            for s in t.samples.iter().filter(|s| s.s > 0.1 && s.s < 0.9) {
                // Normalized field is 2 sin sin, so the derivative is 2 pi sin(pi x).
                let exact = 2.0 * PI * (PI * s.s).sin() / lambda;
                worst = worst.max((s.value - exact).abs() / exact);
            }
            assert!(worst < 0.02, "{method:?}: {worst}");
            assert!(t.spacing() <= grid.h / 2.0);
        }
    }

    #[test]
    fn neumann_cosine_trace_on_the_left_wall() {
        let (spec, grid, pair) = square_pair(128, BoundaryCondition::Neumann, |x, _| (PI * x).cos(), PI);
        let t = &extract_trace(&spec, &grid, &pair).unwrap()[0];
        let scale = 2f64.sqrt();
        for s in &t.samples {
            // Left wall runs from (0, 1) down to (0, 0).
            if s.s > 3.0 + 1e-9 {
                assert!((s.value - scale).abs() < 1e-3 * scale, "{}", s.value);
            }
        }
    }

    #[test]
    fn zero_field_has_zero_trace() {
        let (spec, grid, pair) = square_pair(64, BoundaryCondition::Dirichlet, |_, _| 0.0, 5.0);
        let pair = EigenPair {
            field: vec![0.0; pair.field.len()],
            ..pair
        };
        for method in [TraceMethod::NormalDifference, TraceMethod::EdgeFlux] {
            let traces = extract_trace_with(&spec, &grid, &pair, method).unwrap();
            assert!(traces.iter().all(|t| t.values().all(|v| v == 0.0)));
        }
    }

    /// `int (X . n_out) (d_nu phi)^2 ds = 2 lambda^2` for a normalized
    /// Dirichlet eigenfunction; with the `1/lambda` scaling the right-hand
    /// side is 2.
    fn rellich(spec: &SurfaceSpec, traces: &[BoundaryTrace], x0: Vec2) -> f64 {
        traces
            .iter()
            .map(|t| {
                let c = &spec.atlas.components[t.component];
                t.integrate(|s, v| {
                    let f = c.frame(s);
                    (f.point - x0).dot(-f.normal) * v * v
                })
            })
            .sum()
    }

    #[test]
    fn rellich_identity_on_a_holed_rectangle() {
        let spec = build_surface(
            &SurfaceDraft::rectangle(1.0, 0.75, BoundaryCondition::Dirichlet).with_obstacle(0.6, 0.4, 0.15),
        )
        .unwrap();
        let lap = assemble_laplacian(&spec, 160).unwrap();
        let s = solve_lowest(&lap, 30).unwrap();
        let x0 = Vec2::new(0.3, 0.2);
        let mut errs = [0.0f64; 2];
        for p in &s.pairs {
            for (k, method) in [TraceMethod::NormalDifference, TraceMethod::EdgeFlux]
                .into_iter()
                .enumerate()
            {
                let traces = extract_trace_with(&spec, &lap.grid, p, method).unwrap();
                errs[k] = errs[k].max((rellich(&spec, &traces, x0) - 2.0).abs() / 2.0);
            }
        }
        assert!(errs[1] < 0.03 && errs[1] < errs[0], "Rellich errors {errs:?}");
    }
}
