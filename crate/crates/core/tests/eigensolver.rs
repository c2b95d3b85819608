use std::f64::consts::PI;

use sinai_core::eigensolver::{
    assemble_laplacian, extract_trace, interpolate, solve_lowest, EigenPair, Grid, Neighbor, SolverOptions,
};
use sinai_core::geometry::{build_surface, BoundaryCondition, SurfaceDraft, SurfaceSpec};

fn square(bc: BoundaryCondition) -> SurfaceSpec {
    build_surface(&SurfaceDraft::rectangle(1.0, 1.0, bc)).unwrap()
}

#[test]
fn ground_state_at_production_resolution() {
    let lap = assemble_laplacian(&square(BoundaryCondition::Dirichlet), 201).unwrap();
    let s = solve_lowest(&lap, 3).unwrap();
    let exact = 2.0 * PI * PI;
    assert!((s.pairs[0].eigenvalue() - exact).abs() < 0.01 * exact);
    assert!((s.pairs[1].eigenvalue() - 5.0 * PI * PI).abs() < 0.01 * 5.0 * PI * PI);
    assert!((s.pairs[2].lambda - s.pairs[1].lambda).abs() < 1e-6 * s.pairs[1].lambda);
}

#[test]
fn counting_function_follows_the_area_law() {
    let cut = 500.0f64;
    let analytic = (1..20)
        .flat_map(|m| (1..20).map(move |n| (m, n)))
        .filter(|&(m, n)| PI * PI * ((m * m + n * n) as f64) < cut)
        .count();
    let lap = assemble_laplacian(&square(BoundaryCondition::Dirichlet), 96).unwrap();
    let s = sinai_core::eigensolver::solve_below(&lap, cut.sqrt(), &SolverOptions::default()).unwrap();
    assert!(s.pairs.len().abs_diff(analytic) <= 1, "{} vs {analytic}", s.pairs.len());
    // Two-term Weyl law: A lambda^2 / 4 pi - L lambda / 4 pi.
    let weyl = cut / (4.0 * PI) - 4.0 * cut.sqrt() / (4.0 * PI);
    assert!(
        (s.pairs.len() as f64 - weyl).abs() < 0.1 * weyl,
        "{} vs {weyl}",
        s.pairs.len()
    );
}

/// Sum of squared differences over every grid edge, ghosts counted as zero
/// (Dirichlet) or skipped (Neumann).
fn dirichlet_energy(grid: &Grid, pair: &EigenPair) -> f64 {
    let mut e = 0.0;
    for &node in &grid.nodes {
        for nb in grid.neighbors(node) {
            let other = match nb {
                Neighbor::Node(m) => pair.field[m],
                _ if grid.bc == BoundaryCondition::Dirichlet => 0.0,
                _ => continue,
            };
            // Each interior edge is visited from both ends.
            let weight = if matches!(nb, Neighbor::Node(_)) { 0.5 } else { 1.0 };
            e += weight * (pair.field[node] - other).powi(2);
        }
    }
    e
}

#[test]
fn discrete_green_identity() {
    let spec = build_surface(&SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Dirichlet).with_obstacle(0.5, 0.5, 0.2))
        .unwrap();
    let lap = assemble_laplacian(&spec, 80).unwrap();
    let s = solve_lowest(&lap, 10).unwrap();
    let h2 = lap.grid.h * lap.grid.h;
    for p in &s.pairs {
        let mass: f64 = p.field.iter().map(|v| v * v).sum::<f64>() * h2;
        let grad = dirichlet_energy(&lap.grid, p);
        assert!((p.eigenvalue() * mass - grad).abs() < 0.01 * grad);
    }
}

#[test]
fn adding_an_obstacle_raises_dirichlet_eigenvalues() {
    let one = SurfaceDraft::rectangle(1.0, 0.75, BoundaryCondition::Dirichlet).with_obstacle(0.3, 0.375, 0.1);
    let two = one.clone().with_obstacle(0.7, 0.375, 0.1);
    let a = solve_lowest(&assemble_laplacian(&build_surface(&one).unwrap(), 100).unwrap(), 20).unwrap();
    let b = solve_lowest(&assemble_laplacian(&build_surface(&two).unwrap(), 100).unwrap(), 20).unwrap();
    for (x, y) in a.pairs.iter().zip(&b.pairs) {
        assert!(y.lambda > x.lambda, "mode {}: {} <= {}", x.index, y.lambda, x.lambda);
    }
}

#[test]
fn refinement_is_second_order() {
    let exact = 2.0 * PI * PI;
    let err = |n| {
        let lap = assemble_laplacian(&square(BoundaryCondition::Dirichlet), n).unwrap();
        (solve_lowest(&lap, 1).unwrap().pairs[0].eigenvalue() - exact).abs()
    };
    let ratio = err(64) / err(128);
    assert!((2.5..=6.0).contains(&ratio), "{ratio}");
}

#[test]
fn neumann_traces_match_nearby_grid_values() {
    let spec =
        build_surface(&SurfaceDraft::rectangle(1.0, 0.75, BoundaryCondition::Neumann).with_obstacle(0.55, 0.4, 0.15))
            .unwrap();
    let lap = assemble_laplacian(&spec, 100).unwrap();
    let grid = &lap.grid;
    let s = solve_lowest(&lap, 8).unwrap();
    for p in &s.pairs {
        let mut grad: f64 = 0.0;
        for &node in &grid.nodes {
            for nb in grid.neighbors(node) {
                if let Neighbor::Node(m) = nb {
                    grad = grad.max((p.field[m] - p.field[node]).abs() / grid.h);
                }
            }
        }
        let bound = 10.0 * grid.h * grad.max(1e-12);
        for t in extract_trace(&spec, grid, p).unwrap() {
            let c = &spec.atlas.components[t.component];
            assert!(t.spacing() <= grid.h / 2.0);
            for sample in &t.samples {
                let f = c.frame(sample.s);
                // Nearest active node along the inward normal.
                let near = (1..6)
                    .find_map(|k| {
                        let q = f.point + f.normal * (k as f64 * grid.h * 0.5);
                        let i = ((q.x - grid.x0) / grid.h).round() as i64;
                        let j = ((q.y - grid.y0) / grid.h).round() as i64;
                        if i < 0 || j < 0 || i >= grid.nx as i64 || j >= grid.ny as i64 {
                            return None;
                        }
                        let n = j as usize * grid.nx + i as usize;
                        grid.is_active(n).then(|| p.field[n])
                    })
                    .or_else(|| interpolate(grid, &p.field, f.point, false))
                    .unwrap();
                assert!(
                    (sample.value - near).abs() <= bound,
                    "mode {}: {} vs {near}",
                    p.index,
                    sample.value
                );
            }
        }
    }
}
