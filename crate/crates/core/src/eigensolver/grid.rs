//! Masked finite-difference grid and the 5-point Laplacian on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{min_image, Base, BoundaryCondition, SurfaceSpec, Vec2};
use crate::numeric::fnv1a;

pub const MIN_RESOLUTION: usize = 64;
/// Obstacles must span at least this many cells across.
pub const MIN_OBSTACLE_CELLS: f64 = 10.0;

const MASKED: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    /// Active node with at least one masked or out-of-grid neighbour.
    BoundaryAdjacent,
    Obstacle,
}

/// What lies one step away from a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighbor {
    Node(usize),
    /// Masked node inside the given obstacle.
    Obstacle(usize, usize),
    /// Beyond a rectangle wall.
    Wall,
}

pub const STEPS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Node-centred grid covering the base domain.
///
/// Node `(i, j)` sits at `(x0 + i h, y0 + j h)`. On a torus and behind Neumann
/// walls nodes are cell centres; behind Dirichlet walls they are cell corners
/// with the wall nodes themselves eliminated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub x0: f64,
    pub y0: f64,
    pub periodic_x: bool,
    pub periodic_y: bool,
    /// Cells across the base width.
    pub resolution: usize,
    pub bc: BoundaryCondition,
    pub outer_bc: Option<BoundaryCondition>,
    pub kinds: Vec<NodeKind>,
    /// Obstacle index of each masked node.
    pub owner: Vec<Option<u16>>,
    /// Unknown index of each node (`u32::MAX` when masked).
    unknown: Vec<u32>,
    /// Node of each unknown.
    pub nodes: Vec<usize>,
}

impl Grid {
    pub fn new(spec: &SurfaceSpec, resolution: usize) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::InvalidSurface(format!(
                "resolution {resolution} is below the minimum {MIN_RESOLUTION}"
            )));
        }
        let (w, hgt) = (spec.width(), spec.height());
        let h = w / resolution as f64;
        let rows = hgt / h;
        let cells_y = rows.round();
        if (rows - cells_y).abs() > 1e-6 * rows.max(1.0) {
            return Err(Error::InvalidSurface(format!(
                "height {hgt} is not a whole number of cells of size {h}"
            )));
        }
        let cells_y = cells_y as usize;
        for (index, o) in spec.obstacles.iter().enumerate() {
            let cells = 2.0 * o.radius / h;
            if cells < MIN_OBSTACLE_CELLS {
                return Err(Error::ResolutionTooCoarse { index, cells });
            }
        }

        let (nx, ny, x0, y0, periodic, outer_bc) = match spec.base {
            Base::Torus { .. } => (resolution, cells_y, 0.5 * h, 0.5 * h, true, None),
            Base::Rectangle {
                outer_bc: BoundaryCondition::Dirichlet,
                ..
            } => (
                resolution - 1,
                cells_y - 1,
                h,
                h,
                false,
                Some(BoundaryCondition::Dirichlet),
            ),
            Base::Rectangle {
                outer_bc: BoundaryCondition::Neumann,
                ..
            } => (
                resolution,
                cells_y,
                0.5 * h,
                0.5 * h,
                false,
                Some(BoundaryCondition::Neumann),
            ),
        };

        let mut owner = vec![None; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let p = Vec2::new(x0 + i as f64 * h, y0 + j as f64 * h);
                for (k, o) in spec.obstacles.iter().enumerate() {
                    let mut d = p - o.center;
                    if periodic {
                        d = min_image(d, w, hgt);
                    }
                    if d.norm() < o.radius {
                        owner[j * nx + i] = Some(k as u16);
                        break;
                    }
                }
            }
        }

        let mut grid = Grid {
            nx,
            ny,
            h,
            x0,
            y0,
            periodic_x: periodic,
            periodic_y: periodic,
            resolution,
            bc: spec.bc,
            outer_bc,
            kinds: vec![NodeKind::Interior; nx * ny],
            owner,
            unknown: vec![MASKED; nx * ny],
            nodes: Vec::new(),
        };

        // Interleave rows 0, ny-1, 1, ny-2, ... when rows wrap around, so that
        // every coupling stays within about two rows of the diagonal.
        let row_order: Vec<usize> = if grid.periodic_y {
            (0..ny)
                .map(|k| if k % 2 == 0 { k / 2 } else { ny - 1 - k / 2 })
                .collect()
        } else {
            (0..ny).collect()
        };
        for &j in &row_order {
            for i in 0..nx {
                let n = j * nx + i;
                if grid.owner[n].is_none() {
                    grid.unknown[n] = grid.nodes.len() as u32;
                    grid.nodes.push(n);
                }
            }
        }
        for n in 0..nx * ny {
            grid.kinds[n] = if grid.owner[n].is_some() {
                NodeKind::Obstacle
            } else if grid.neighbors(n).iter().any(|nb| !matches!(nb, Neighbor::Node(_))) {
                NodeKind::BoundaryAdjacent
            } else {
                NodeKind::Interior
            };
        }
        Ok(grid)
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn unknown_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn unknown_of(&self, node: usize) -> Option<usize> {
        let u = self.unknown[node];
        (u != MASKED).then_some(u as usize)
    }

    pub fn is_active(&self, node: usize) -> bool {
        self.unknown[node] != MASKED
    }

    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    pub fn position(&self, node: usize) -> Vec2 {
        let (i, j) = self.ij(node);
        Vec2::new(self.x0 + i as f64 * self.h, self.y0 + j as f64 * self.h)
    }

    /// Node reached from `(i, j)` by `(di, dj)`, wrapping periodic axes;
    /// `None` beyond a wall.
    pub fn offset(&self, i: usize, j: usize, di: i64, dj: i64) -> Option<usize> {
        let ii = i as i64 + di;
        let jj = j as i64 + dj;
        let ii = if self.periodic_x {
            ii.rem_euclid(self.nx as i64)
        } else if ii < 0 || ii >= self.nx as i64 {
            return None;
        } else {
            ii
        };
        let jj = if self.periodic_y {
            jj.rem_euclid(self.ny as i64)
        } else if jj < 0 || jj >= self.ny as i64 {
            return None;
        } else {
            jj
        };
        Some(jj as usize * self.nx + ii as usize)
    }

    pub fn neighbor(&self, node: usize, step: (i64, i64)) -> Neighbor {
        let (i, j) = self.ij(node);
        match self.offset(i, j, step.0, step.1) {
            None => Neighbor::Wall,
            Some(m) => match self.owner[m] {
                Some(k) => Neighbor::Obstacle(m, k as usize),
                None => Neighbor::Node(m),
            },
        }
    }

    pub fn neighbors(&self, node: usize) -> [Neighbor; 4] {
        STEPS.map(|s| self.neighbor(node, s))
    }

    /// Scatter an unknown vector onto the full node grid (masked nodes 0).
    pub fn scatter(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.node_count()];
        for (k, &n) in self.nodes.iter().enumerate() {
            out[n] = u[k];
        }
        out
    }

    pub fn gather(&self, field: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&n| field[n]).collect()
    }

    /// Area covered by the grid quadrature. Dirichlet walls carry their
    /// trapezoid weight (the field vanishes there), so the rule spans the
    /// whole table.
    pub fn quadrature_area(&self) -> f64 {
        let walls = if self.outer_bc == Some(BoundaryCondition::Dirichlet) {
            self.nx + self.ny + 1
        } else {
            0
        };
        (self.unknown_count() + walls) as f64 * self.h * self.h
    }

    /// Fingerprint of the mask, stored in archive headers.
    pub fn mask_hash(&self) -> u64 {
        fnv1a(self.owner.iter().map(|o| o.map_or(0u8, |k| 1 + (k % 255) as u8)))
    }
}

/// Symmetric sparse matrix in compressed-row form (both triangles stored).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|k| self.vals[k] * x[self.cols[k]])
                .sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&k| self.cols[k] == j)
            .map_or(0.0, |k| self.vals[k])
    }

    /// Largest Gershgorin radius, an upper bound for the spectrum.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.vals[k].abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

/// `-Delta_h` on the active nodes of a grid.
#[derive(Clone, Debug)]
pub struct Laplacian {
    pub grid: Grid,
    pub matrix: SparseMatrix,
}

/// Assemble the 5-point `-Delta` with Dirichlet nodes eliminated (zero
/// extension) and Neumann neighbours mirrored (ghost equal to the node).
pub fn assemble_laplacian(spec: &SurfaceSpec, resolution: usize) -> Result<Laplacian> {
    let grid = Grid::new(spec, resolution)?;
    let matrix = assemble_on(&grid);
    Ok(Laplacian { grid, matrix })
}

pub fn assemble_on(grid: &Grid) -> SparseMatrix {
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let n = grid.unknown_count();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(5 * n);
    let mut vals = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    for (row, &node) in grid.nodes.iter().enumerate() {
        let mut diag = 0.0;
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(5);
        for nb in grid.neighbors(node) {
            match nb {
                Neighbor::Node(m) => {
                    diag += inv_h2;
                    let col = grid.unknown_of(m).expect("active neighbour");
                    // Small periodic grids can couple the same pair twice.
                    match entries.iter_mut().find(|(c, _)| *c == col) {
                        Some(e) => e.1 -= inv_h2,
                        None => entries.push((col, -inv_h2)),
                    }
                }
                Neighbor::Obstacle(..) => {
                    if grid.bc == BoundaryCondition::Dirichlet {
                        diag += inv_h2;
                    }
                }
                Neighbor::Wall => {
                    if grid.outer_bc == Some(BoundaryCondition::Dirichlet) {
                        diag += inv_h2;
                    }
                }
            }
        }
        entries.push((row, diag));
        entries.sort_by_key(|e| e.0);
        for (c, v) in entries {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    SparseMatrix { n, row_ptr, cols, vals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_surface, SurfaceDraft};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(bc: BoundaryCondition) -> SurfaceSpec {
        build_surface(&SurfaceDraft::rectangle(1.0, 1.0, bc)).unwrap()
    }

    #[test]
    fn dirichlet_square_rows_match_the_five_point_stencil() {
        let lap = assemble_laplacian(&square(BoundaryCondition::Dirichlet), 64).unwrap();
        let h2 = lap.grid.h * lap.grid.h;
        assert_eq!(lap.grid.unknown_count(), 63 * 63);
        for i in 0..lap.matrix.n {
            assert!((lap.matrix.get(i, i) * h2 - 4.0).abs() < 1e-12);
            let row_sum: f64 = (lap.matrix.row_ptr[i]..lap.matrix.row_ptr[i + 1])
                .map(|k| lap.matrix.vals[k])
                .sum::<f64>()
                * h2;
            let missing = lap
                .grid
                .neighbors(lap.grid.nodes[i])
                .iter()
                .filter(|n| **n == Neighbor::Wall)
                .count();
            assert!((row_sum - missing as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn neumann_torus_annihilates_constants() {
        let spec =
            build_surface(&SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Neumann).with_obstacle(0.5, 0.5, 0.2))
                .unwrap();
        let lap = assemble_laplacian(&spec, 64).unwrap();
        let ones = vec![1.0; lap.matrix.n];
        let y = lap.matrix.apply(&ones);
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn operator_is_symmetric() {
        let spec =
            build_surface(&SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Dirichlet).with_obstacle(0.4, 0.6, 0.2))
                .unwrap();
        let lap = assemble_laplacian(&spec, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let u: Vec<f64> = (0..lap.matrix.n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..lap.matrix.n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let au = lap.matrix.apply(&u);
            let av = lap.matrix.apply(&v);
            let lhs: f64 = au.iter().zip(&v).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(&av).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
        }
    }

    #[test]
    fn torus_has_wraparound_couplings_and_rectangle_does_not() {
        let torus =
            build_surface(&SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Dirichlet).with_obstacle(0.5, 0.5, 0.2))
                .unwrap();
        let g = Grid::new(&torus, 64).unwrap();
        assert_eq!(g.neighbor(0, (-1, 0)), Neighbor::Node(63));
        let r = Grid::new(&square(BoundaryCondition::Neumann), 64).unwrap();
        assert_eq!(r.neighbor(0, (-1, 0)), Neighbor::Wall);
        assert_eq!(r.kinds[0], NodeKind::BoundaryAdjacent);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let spec =
            build_surface(&SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Dirichlet).with_obstacle(0.5, 0.5, 0.06))
                .unwrap();
        assert!(matches!(Grid::new(&spec, 64), Err(Error::ResolutionTooCoarse { .. })));
        assert!(Grid::new(&spec, 100).is_ok());
    }

    #[test]
    fn mask_matches_obstacle_area() {
        let spec =
            build_surface(&SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Dirichlet).with_obstacle(0.5, 0.5, 0.2))
                .unwrap();
        let g = Grid::new(&spec, 200).unwrap();
        assert!((g.quadrature_area() - spec.area()).abs() < 0.01 * spec.area());
    }
}
