//! Nodal graph on the dual cubical complex.
//!
//! Every active node owns the closed square of side `h` around it. The graph
//! is the union of the staircase boundary, the dual edges between squares of
//! different sign and the closed squares of zero nodes. Its faces are then
//! exactly the 4-connected sign domains, and `v - e = chi(G)` is read off an
//! exact cell count, whatever vertices are chosen.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{count_boundary_sign_changes, SignField, UnionFind};
use crate::eigensolver::{extract_trace, BoundaryTrace, EigenPair, Grid, Neighbor, STEPS};
use crate::error::Result;
use crate::geometry::{SurfaceSpec, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub position: Vec2,
    /// Number of nodal arcs meeting at the point.
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodalGraph {
    pub v: usize,
    pub e: usize,
    pub f: usize,
    pub m: usize,
    /// Boundary sign changes of the Cauchy data.
    pub n: usize,
    /// `2 - 2 genus_tilde - holes`.
    pub defect: i64,
    pub genus_tilde: u32,
    pub holes: u32,
    /// Euler characteristic of the graph, `v - e`.
    pub chi: i64,
    pub singular: Vec<SingularPoint>,
    /// Marker vertices of closed curves without other vertices, placed at the
    /// curve's lexicographically smallest grid corner.
    pub loops: Vec<Vec2>,
}

/// Outcome of the topological inequality and the raw Euler inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerCheck {
    pub lhs: usize,
    pub rhs: f64,
    pub pass: bool,
    /// `v - e + f - m + h`.
    pub raw_lhs: i64,
    /// `1 - 2 genus_tilde`.
    pub raw_rhs: i64,
    pub raw_pass: bool,
}

pub fn euler_check(g: &NodalGraph) -> EulerCheck {
    let rhs = g.n as f64 / 2.0 + g.defect as f64;
    let raw_lhs = g.v as i64 - g.e as i64 + g.f as i64 - g.m as i64 + g.holes as i64;
    let raw_rhs = 1 - 2 * g.genus_tilde as i64;
    EulerCheck {
        lhs: g.f,
        rhs,
        pass: g.f as f64 >= rhs,
        raw_lhs,
        raw_rhs,
        raw_pass: raw_lhs >= raw_rhs,
    }
}

pub fn build_nodal_graph(spec: &SurfaceSpec, grid: &Grid, pair: &EigenPair) -> Result<NodalGraph> {
    let traces = extract_trace(spec, grid, pair)?;
    build_nodal_graph_with(spec, grid, pair, &traces)
}

/// Build the graph with precomputed boundary traces.
pub fn build_nodal_graph_with(
    spec: &SurfaceSpec,
    grid: &Grid,
    pair: &EigenPair,
    traces: &[BoundaryTrace],
) -> Result<NodalGraph> {
    let field = SignField::new(grid, pair)?;
    let cx = Complex::new(grid, &field);
    let n = count_boundary_sign_changes(traces)?;

    let (chi, mut corner_sets) = cx.topology();
    let m = corner_sets.components;
    let f = cx.faces();

    // Every graph component needs a vertex: singular points, boundary
    // touches, or a loop marker.
    let singular = cx.singular_points();
    let mut has_vertex = vec![false; corner_sets.len()];
    for s in &singular.clusters {
        has_vertex[corner_sets.root_of(s.corner)] = true;
    }
    for t in traces {
        let changes = super::sign_changes_per_component(t);
        if changes > 0 {
            if let Some(c) = cx.boundary_corner(spec, t.component) {
                has_vertex[corner_sets.root_of(c)] = true;
            }
        }
    }
    let mut loops = Vec::new();
    let mut seen = vec![false; corner_sets.len()];
    for corner in 0..cx.corner_count() {
        if !cx.corner_in_g[corner] {
            continue;
        }
        let root = corner_sets.root_of(corner);
        if !seen[root] {
            seen[root] = true;
            if !has_vertex[root] {
                // Corners are scanned in row order, so this is the smallest
                // corner of the curve in (j, i) order.
                loops.push(cx.corner_position(corner));
            }
        }
    }
    let v = singular.clusters.len() + n + loops.len();
    let e = (v as i64 - chi).max(0) as usize;
    Ok(NodalGraph {
        v,
        e,
        f,
        m,
        n,
        defect: spec.euler_characteristic(),
        genus_tilde: spec.genus_tilde,
        holes: spec.holes,
        chi,
        singular: singular
            .clusters
            .iter()
            .map(|c| SingularPoint {
                position: c.position,
                degree: c.degree,
            })
            .collect(),
        loops,
    })
}

/// Union-find over corners that also reports the number of sets among the
/// corners in the graph.
struct CornerSets {
    uf: UnionFind,
    components: usize,
}

impl CornerSets {
    fn len(&self) -> usize {
        self.uf.len()
    }

    fn root_of(&mut self, c: usize) -> usize {
        self.uf.find(c)
    }
}

/// Square state at a (possibly out-of-range) node position.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Square {
    Outside,
    Signed(i8),
}

struct Complex<'a> {
    grid: &'a Grid,
    signs: &'a SignField,
    /// Corner counts along each axis.
    cx: usize,
    cy: usize,
    corner_in_g: Vec<bool>,
}

struct Cluster {
    corner: usize,
    position: Vec2,
    degree: usize,
}

struct Singular {
    clusters: Vec<Cluster>,
}

impl<'a> Complex<'a> {
    fn new(grid: &'a Grid, signs: &'a SignField) -> Self {
        let cx = if grid.periodic_x { grid.nx } else { grid.nx + 1 };
        let cy = if grid.periodic_y { grid.ny } else { grid.ny + 1 };
        let mut me = Self {
            grid,
            signs,
            cx,
            cy,
            corner_in_g: Vec::new(),
        };
        let mut in_g = vec![false; cx * cy];
        me.for_each_edge(|a, b, on| {
            if on {
                in_g[a] = true;
                in_g[b] = true;
            }
        });
        me.corner_in_g = in_g;
        me
    }

    fn corner_count(&self) -> usize {
        self.cx * self.cy
    }

    fn square(&self, i: i64, j: i64) -> Square {
        let g = self.grid;
        let wrap = |k: i64, len: usize, periodic: bool| {
            if periodic {
                Some(k.rem_euclid(len as i64) as usize)
            } else if k >= 0 && (k as usize) < len {
                Some(k as usize)
            } else {
                None
            }
        };
        match (wrap(i, g.nx, g.periodic_x), wrap(j, g.ny, g.periodic_y)) {
            (Some(i), Some(j)) => {
                let node = j * g.nx + i;
                if g.is_active(node) {
                    Square::Signed(self.signs.signs[node])
                } else {
                    Square::Outside
                }
            }
            _ => Square::Outside,
        }
    }

    fn corner(&self, i: i64, j: i64) -> usize {
        let i = if self.grid.periodic_x {
            i.rem_euclid(self.cx as i64)
        } else {
            i
        } as usize;
        let j = if self.grid.periodic_y {
            j.rem_euclid(self.cy as i64)
        } else {
            j
        } as usize;
        j * self.cx + i
    }

    fn corner_position(&self, c: usize) -> Vec2 {
        let (i, j) = (c % self.cx, c / self.cx);
        let h = self.grid.h;
        Vec2::new(self.grid.x0 + (i as f64 - 0.5) * h, self.grid.y0 + (j as f64 - 0.5) * h)
    }

    /// A dual edge between squares `a` and `b` lies in the graph when it
    /// bounds the domain, touches a zero square, or separates signs.
    fn edge_on(a: Square, b: Square) -> Option<bool> {
        match (a, b) {
            (Square::Outside, Square::Outside) => None,
            (Square::Outside, _) | (_, Square::Outside) => Some(true),
            (Square::Signed(x), Square::Signed(y)) => Some(x == 0 || y == 0 || x != y),
        }
    }

    /// Visit every dual edge inside the closed domain as `(corner, corner, in_graph)`.
    fn for_each_edge<F: FnMut(usize, usize, bool)>(&self, mut visit: F) {
        let hx = self.grid.nx as i64;
        let hy = self.cy as i64;
        // Horizontal edge (i, j)-(i+1, j) separates nodes (i, j-1) and (i, j).
        for j in 0..hy {
            for i in 0..hx {
                if let Some(on) = Self::edge_on(self.square(i, j - 1), self.square(i, j)) {
                    visit(self.corner(i, j), self.corner(i + 1, j), on);
                }
            }
        }
        let vx = self.cx as i64;
        let vy = self.grid.ny as i64;
        // Vertical edge (i, j)-(i, j+1) separates nodes (i-1, j) and (i, j).
        for j in 0..vy {
            for i in 0..vx {
                if let Some(on) = Self::edge_on(self.square(i - 1, j), self.square(i, j)) {
                    visit(self.corner(i, j), self.corner(i, j + 1), on);
                }
            }
        }
    }

    /// Euler characteristic of the graph and its connected components.
    fn topology(&self) -> (i64, CornerSets) {
        let mut uf = UnionFind::new(self.corner_count());
        let mut edges = 0i64;
        self.for_each_edge(|a, b, on| {
            if on {
                edges += 1;
                uf.union(a, b);
            }
        });
        let vertices = self.corner_in_g.iter().filter(|&&b| b).count() as i64;
        let zero_squares = self.grid.nodes.iter().filter(|&&n| self.signs.signs[n] == 0).count() as i64;
        let mut roots = std::collections::HashSet::new();
        for c in 0..self.corner_count() {
            if self.corner_in_g[c] {
                roots.insert(uf.find(c));
            }
        }
        let components = roots.len();
        (vertices - edges + zero_squares, CornerSets { uf, components })
    }

    /// Faces by flood fill across dual edges that are not in the graph.
    fn faces(&self) -> usize {
        let g = self.grid;
        let mut seen = vec![false; g.node_count()];
        let mut faces = 0;
        let mut queue = VecDeque::new();
        for &start in &g.nodes {
            if seen[start] || self.signs.signs[start] == 0 {
                continue;
            }
            faces += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(node) = queue.pop_front() {
                let (i, j) = g.ij(node);
                for (di, dj) in STEPS {
                    let Some(next) = g.offset(i, j, di, dj) else { continue };
                    if seen[next] {
                        continue;
                    }
                    let a = self.square(i as i64, j as i64);
                    let b = self.square(i as i64 + di, j as i64 + dj);
                    if Self::edge_on(a, b) == Some(false) {
                        seen[next] = true;
                        queue.push_back(next);
                    }
                }
            }
        }
        faces
    }

    /// A graph corner on the boundary of component `id`, if the grid
    /// resolves it.
    fn boundary_corner(&self, spec: &SurfaceSpec, id: usize) -> Option<usize> {
        let circle = spec.atlas.components.get(id)?.is_circle();
        for &node in &self.grid.nodes {
            for (k, nb) in self.grid.neighbors(node).into_iter().enumerate() {
                let hit = match nb {
                    Neighbor::Obstacle(_, o) => circle && o == id,
                    Neighbor::Wall => !circle,
                    Neighbor::Node(_) => false,
                };
                if hit {
                    let (i, j) = self.grid.ij(node);
                    let (i, j) = (i as i64, j as i64);
                    // Shared edge between the node's square and the step.
                    let c = match STEPS[k] {
                        (1, 0) => self.corner(i + 1, j),
                        (-1, 0) => self.corner(i, j),
                        (0, 1) => self.corner(i, j + 1),
                        _ => self.corner(i, j),
                    };
                    return Some(c);
                }
            }
        }
        None
    }

    /// Interior points where four or more sign sectors meet, clustered.
    fn singular_points(&self) -> Singular {
        let mut raw: Vec<(i64, i64, usize, usize)> = Vec::new(); // (2x, 2y) in half cells, corner, degree
        let g = self.grid;
        // Corners surrounded by four nonzero squares of alternating sign.
        for j in 0..self.cy as i64 {
            for i in 0..self.cx as i64 {
                let ring = [
                    self.square(i - 1, j - 1),
                    self.square(i, j - 1),
                    self.square(i, j),
                    self.square(i - 1, j),
                ];
                let d = ring_changes(&ring);
                if d >= 4 {
                    raw.push((2 * i - 1, 2 * j - 1, self.corner(i, j), d));
                }
            }
        }
        // Zero squares whose eight neighbours show at least four sectors.
        for &node in &g.nodes {
            if self.signs.signs[node] != 0 {
                continue;
            }
            let (i, j) = g.ij(node);
            let (i, j) = (i as i64, j as i64);
            let ring = [
                self.square(i + 1, j),
                self.square(i + 1, j + 1),
                self.square(i, j + 1),
                self.square(i - 1, j + 1),
                self.square(i - 1, j),
                self.square(i - 1, j - 1),
                self.square(i, j - 1),
                self.square(i + 1, j - 1),
            ];
            let d = ring_changes(&ring);
            if d >= 4 {
                raw.push((2 * i, 2 * j, self.corner(i, j), d));
            }
        }
        // Merge detections within 1.5 cells of each other.
        let mut uf = UnionFind::new(raw.len());
        let (wx, wy) = (2 * g.nx as i64, 2 * g.ny as i64);
        for a in 0..raw.len() {
            for b in a + 1..raw.len() {
                let mut dx = (raw[a].0 - raw[b].0).abs();
                let mut dy = (raw[a].1 - raw[b].1).abs();
                if g.periodic_x {
                    dx = dx.min(wx - dx);
                }
                if g.periodic_y {
                    dy = dy.min(wy - dy);
                }
                if dx <= 3 && dy <= 3 {
                    uf.union(a, b);
                }
            }
        }
        let mut clusters: Vec<Cluster> = Vec::new();
        let mut index_of = std::collections::HashMap::new();
        for (k, &(x2, y2, corner, degree)) in raw.iter().enumerate() {
            let root = uf.find(k);
            let position = Vec2::new(g.x0 + x2 as f64 * g.h / 2.0, g.y0 + y2 as f64 * g.h / 2.0);
            match index_of.get(&root) {
                Some(&c) => {
                    let cl: &mut Cluster = &mut clusters[c];
                    cl.degree = cl.degree.max(degree);
                }
                None => {
                    index_of.insert(root, clusters.len());
                    clusters.push(Cluster {
                        corner,
                        position,
                        degree,
                    });
                }
            }
        }
        Singular { clusters }
    }
}

/// Sign changes around a closed ring, bridging zeros and outside squares.
/// Rings touching the outside are boundary configurations and report 0.
fn ring_changes(ring: &[Square]) -> usize {
    if ring.contains(&Square::Outside) {
        return 0;
    }
    let signs: Vec<i8> = ring
        .iter()
        .filter_map(|s| match s {
            Square::Signed(v) if *v != 0 => Some(*v),
            _ => None,
        })
        .collect();
    if signs.is_empty() {
        return 0;
    }
    (0..signs.len())
        .filter(|&k| signs[k] != signs[(k + 1) % signs.len()])
        .count()
}
