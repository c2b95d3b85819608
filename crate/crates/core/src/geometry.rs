//! Billiard tables: a flat torus or rectangle with disjoint circular
//! obstacles removed, together with the arclength parametrization of every
//! boundary component.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid resolution (cells across the base width) used when no explicit
/// resolution is given. Obstacle clearances are checked against ten of these
/// cells.
pub const DEFAULT_RESOLUTION: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        self * (1.0 / self.norm())
    }

    /// Rotation by +90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn from_angle(theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c, s)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Base {
    Torus {
        width: f64,
        height: f64,
    },
    Rectangle {
        width: f64,
        height: f64,
        outer_bc: BoundaryCondition,
    },
}

impl Base {
    pub fn width(&self) -> f64 {
        match *self {
            Base::Torus { width, .. } | Base::Rectangle { width, .. } => width,
        }
    }

    pub fn height(&self) -> f64 {
        match *self {
            Base::Torus { height, .. } | Base::Rectangle { height, .. } => height,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Base::Torus { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

/// Raw table description as read from a configuration file.
///
/// ```toml
/// base = "torus"          # or "rectangle"
/// width = 1.0
/// height = 1.0
/// bc = "dirichlet"        # boundary condition on the obstacles
/// outer_bc = "dirichlet"  # rectangle walls only; defaults to `bc`
///
/// [[obstacle]]
/// center = [0.5, 0.5]
/// radius = 0.2
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceDraft {
    pub base: BaseKind,
    pub width: f64,
    pub height: f64,
    pub bc: BoundaryCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_bc: Option<BoundaryCondition>,
    #[serde(default, rename = "obstacle")]
    pub obstacles: Vec<ObstacleDraft>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Torus,
    Rectangle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleDraft {
    pub center: [f64; 2],
    pub radius: f64,
}

impl SurfaceDraft {
    pub fn torus(width: f64, height: f64, bc: BoundaryCondition) -> Self {
        Self {
            base: BaseKind::Torus,
            width,
            height,
            bc,
            outer_bc: None,
            obstacles: Vec::new(),
        }
    }

    pub fn rectangle(width: f64, height: f64, bc: BoundaryCondition) -> Self {
        Self {
            base: BaseKind::Rectangle,
            ..Self::torus(width, height, bc)
        }
    }

    pub fn with_obstacle(mut self, x: f64, y: f64, radius: f64) -> Self {
        self.obstacles.push(ObstacleDraft { center: [x, y], radius });
        self
    }

    pub fn with_bc(mut self, bc: BoundaryCondition) -> Self {
        self.bc = bc;
        if self.outer_bc.is_some() {
            self.outer_bc = Some(bc);
        }
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidSurface(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("surface drafts always serialize")
    }
}

/// Geometry of one closed boundary curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ComponentShape {
    /// Obstacle circle, traversed counterclockwise from angle 0.
    Circle { center: Vec2, radius: f64 },
    /// Outer rectangle, traversed counterclockwise from the origin corner.
    Walls { width: f64, height: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryComponent {
    pub id: usize,
    pub shape: ComponentShape,
    pub length: f64,
}

/// Arclength frame at a boundary point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryFrame {
    pub point: Vec2,
    pub tangent: Vec2,
    /// Unit normal pointing into the table.
    pub normal: Vec2,
    /// Unsigned geodesic curvature: 1/radius on circles, 0 on walls.
    pub curvature: f64,
    /// Curvature measured against the inward normal: negative on obstacle
    /// circles (the boundary bends away from the table), 0 on walls.
    pub signed_curvature: f64,
}

impl BoundaryComponent {
    pub fn frame(&self, s: f64) -> BoundaryFrame {
        let s = s.rem_euclid(self.length);
        match self.shape {
            ComponentShape::Circle { center, radius } => {
                let theta = s / radius;
                let radial = Vec2::from_angle(theta);
                BoundaryFrame {
                    point: center + radial * radius,
                    tangent: radial.perp(),
                    normal: radial,
                    curvature: 1.0 / radius,
                    signed_curvature: -1.0 / radius,
                }
            }
            ComponentShape::Walls { width, height } => {
                let (point, tangent) = if s < width {
                    (Vec2::new(s, 0.0), Vec2::new(1.0, 0.0))
                } else if s < width + height {
                    (Vec2::new(width, s - width), Vec2::new(0.0, 1.0))
                } else if s < 2.0 * width + height {
                    (Vec2::new(width - (s - width - height), height), Vec2::new(-1.0, 0.0))
                } else {
                    (
                        Vec2::new(0.0, height - (s - 2.0 * width - height)),
                        Vec2::new(0.0, -1.0),
                    )
                };
                BoundaryFrame {
                    point,
                    tangent,
                    normal: tangent.perp(),
                    curvature: 0.0,
                    signed_curvature: 0.0,
                }
            }
        }
    }

    /// Arclength of the boundary point nearest to `point`.
    pub fn locate(&self, point: Vec2) -> f64 {
        match self.shape {
            ComponentShape::Circle { center, radius } => {
                let d = point - center;
                (d.y.atan2(d.x).rem_euclid(TAU) * radius).rem_euclid(self.length)
            }
            ComponentShape::Walls { width, height } => {
                let candidates = [
                    (point.y.abs(), point.x.clamp(0.0, width)),
                    ((point.x - width).abs(), width + point.y.clamp(0.0, height)),
                    (
                        (point.y - height).abs(),
                        width + height + (width - point.x).clamp(0.0, width),
                    ),
                    (
                        point.x.abs(),
                        2.0 * width + height + (height - point.y).clamp(0.0, height),
                    ),
                ];
                let (_, s) = candidates.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
                s.rem_euclid(self.length)
            }
        }
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.shape, ComponentShape::Circle { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAtlas {
    pub components: Vec<BoundaryComponent>,
}

impl BoundaryAtlas {
    pub fn total_length(&self) -> f64 {
        self.components.iter().map(|c| c.length).sum()
    }
}

/// A validated billiard table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub base: Base,
    pub obstacles: Vec<Obstacle>,
    pub bc: BoundaryCondition,
    /// Genus of the closed surface the table embeds into.
    pub genus_tilde: u32,
    /// Number of disks removed from that closed surface.
    pub holes: u32,
    pub atlas: BoundaryAtlas,
}

/// Validate a draft and build its boundary atlas.
///
/// Obstacles must keep a clearance of ten default grid cells from each other
/// (including periodic images) and from rectangle walls.
pub fn build_surface(draft: &SurfaceDraft) -> Result<SurfaceSpec> {
    let (w, h) = (draft.width, draft.height);
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(Error::InvalidSurface(format!(
            "dimensions must be positive, got {w} x {h}"
        )));
    }
    let base = match draft.base {
        BaseKind::Torus => Base::Torus { width: w, height: h },
        BaseKind::Rectangle => Base::Rectangle {
            width: w,
            height: h,
            outer_bc: draft.outer_bc.unwrap_or(draft.bc),
        },
    };
    if base.is_torus() && draft.obstacles.is_empty() {
        return Err(Error::TorusWithoutObstacle);
    }
    let required = 10.0 * w / DEFAULT_RESOLUTION as f64;

    let mut obstacles = Vec::with_capacity(draft.obstacles.len());
    for (index, o) in draft.obstacles.iter().enumerate() {
        if o.radius.is_nan() || o.radius <= 0.0 {
            return Err(Error::InvalidSurface(format!(
                "obstacle {index} has non-positive radius"
            )));
        }
        let c = Vec2::new(o.center[0], o.center[1]);
        let inside = (c.x - o.radius)
            .min(w - c.x - o.radius)
            .min(c.y - o.radius)
            .min(h - c.y - o.radius);
        let needed = if base.is_torus() { 0.0 } else { required };
        if inside <= needed {
            return Err(Error::ObstacleOutsideDomain {
                index,
                clearance: inside,
                required: needed,
            });
        }
        obstacles.push(Obstacle {
            center: c,
            radius: o.radius,
        });
    }

    for i in 0..obstacles.len() {
        if base.is_torus() {
            let own = w.min(h) - 2.0 * obstacles[i].radius;
            if own < required {
                return Err(Error::OverlappingObstacles {
                    first: i,
                    second: i,
                    clearance: own,
                    required,
                });
            }
        }
        for j in i + 1..obstacles.len() {
            let mut d = obstacles[j].center - obstacles[i].center;
            if base.is_torus() {
                d = min_image(d, w, h);
            }
            let clearance = d.norm() - obstacles[i].radius - obstacles[j].radius;
            if clearance < required {
                return Err(Error::OverlappingObstacles {
                    first: i,
                    second: j,
                    clearance,
                    required,
                });
            }
        }
    }

    let mut components: Vec<BoundaryComponent> = obstacles
        .iter()
        .enumerate()
        .map(|(id, o)| BoundaryComponent {
            id,
            shape: ComponentShape::Circle {
                center: o.center,
                radius: o.radius,
            },
            length: TAU * o.radius,
        })
        .collect();
    let r = obstacles.len() as u32;
    let (genus_tilde, holes) = match base {
        Base::Torus { .. } => (1, r),
        Base::Rectangle { .. } => {
            components.push(BoundaryComponent {
                id: components.len(),
                shape: ComponentShape::Walls { width: w, height: h },
                length: 2.0 * (w + h),
            });
            (0, r + 1)
        }
    };

    Ok(SurfaceSpec {
        base,
        obstacles,
        bc: draft.bc,
        genus_tilde,
        holes,
        atlas: BoundaryAtlas { components },
    })
}

/// Shortest representative of a displacement on a `w` x `h` torus.
pub fn min_image(d: Vec2, w: f64, h: f64) -> Vec2 {
    Vec2::new(d.x - w * (d.x / w).round(), d.y - h * (d.y / h).round())
}

impl SurfaceSpec {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        build_surface(&SurfaceDraft::from_file(path)?)
    }

    pub fn width(&self) -> f64 {
        self.base.width()
    }

    pub fn height(&self) -> f64 {
        self.base.height()
    }

    pub fn is_torus(&self) -> bool {
        self.base.is_torus()
    }

    pub fn component(&self, id: usize) -> Result<&BoundaryComponent> {
        self.atlas.components.get(id).ok_or(Error::UnknownComponent(id))
    }

    /// Exact flat area of the table.
    pub fn area(&self) -> f64 {
        self.width() * self.height() - self.obstacles.iter().map(|o| PI * o.radius * o.radius).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.atlas.total_length()
    }

    /// `2 - 2 g - h`, the Euler characteristic of the table.
    pub fn euler_characteristic(&self) -> i64 {
        2 - 2 * self.genus_tilde as i64 - self.holes as i64
    }

    /// Largest distance between two points of the table.
    pub fn diameter(&self) -> f64 {
        let (w, h) = (self.width(), self.height());
        if self.is_torus() {
            0.5 * w.hypot(h)
        } else {
            w.hypot(h)
        }
    }

    /// Wrap a point into the fundamental domain (identity on rectangles).
    pub fn wrap(&self, p: Vec2) -> Vec2 {
        if self.is_torus() {
            Vec2::new(p.x.rem_euclid(self.width()), p.y.rem_euclid(self.height()))
        } else {
            p
        }
    }

    /// Distance between two points, using the periodic metric on a torus.
    pub fn distance(&self, a: Vec2, b: Vec2) -> f64 {
        let d = b - a;
        if self.is_torus() {
            min_image(d, self.width(), self.height()).norm()
        } else {
            d.norm()
        }
    }

    /// Whether `p` lies in the closed table.
    pub fn contains(&self, p: Vec2) -> bool {
        let p = self.wrap(p);
        if !self.is_torus() && (p.x < 0.0 || p.y < 0.0 || p.x > self.width() || p.y > self.height()) {
            return false;
        }
        self.obstacles
            .iter()
            .all(|o| (p - o.center).norm() >= o.radius * (1.0 - 1e-12))
    }
}

/// Arclength frame of `component` at `s`; `s` wraps modulo the component length.
pub fn boundary_eval(spec: &SurfaceSpec, component: usize, s: f64) -> Result<BoundaryFrame> {
    Ok(spec.component(component)?.frame(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sinai() -> SurfaceSpec {
        build_surface(&SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Dirichlet).with_obstacle(0.5, 0.5, 0.2))
            .unwrap()
    }

    #[test]
    fn torus_with_one_disk_has_genus_one_and_one_hole() {
        let spec = sinai();
        assert_eq!((spec.genus_tilde, spec.holes), (1, 1));
        assert_eq!(spec.euler_characteristic(), -1);
    }

    #[test]
    fn empty_rectangle_is_a_sphere_minus_a_disk() {
        let spec = build_surface(&SurfaceDraft::rectangle(1.0, 1.0, BoundaryCondition::Dirichlet)).unwrap();
        assert_eq!((spec.genus_tilde, spec.holes), (0, 1));
        assert_eq!(spec.atlas.components.len(), 1);
        assert_abs_diff_eq!(spec.perimeter(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn overlapping_disks_are_rejected() {
        let draft = SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Dirichlet)
            .with_obstacle(0.3, 0.5, 0.25)
            .with_obstacle(0.7, 0.5, 0.25);
        match build_surface(&draft) {
            Err(Error::OverlappingObstacles { clearance, .. }) => assert_abs_diff_eq!(clearance, -0.1, epsilon = 1e-12),
            other => panic!("expected overlap, got {other:?}"),
        }
    }

    #[test]
    fn periodic_images_count_towards_clearance() {
        let draft = SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Dirichlet)
            .with_obstacle(0.12, 0.5, 0.1)
            .with_obstacle(0.88, 0.5, 0.1);
        assert!(matches!(build_surface(&draft), Err(Error::OverlappingObstacles { .. })));
    }

    #[test]
    fn torus_without_obstacle_is_rejected() {
        let draft = SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Neumann);
        assert!(matches!(build_surface(&draft), Err(Error::TorusWithoutObstacle)));
    }

    #[test]
    fn obstacle_touching_a_wall_is_outside() {
        let draft = SurfaceDraft::rectangle(1.0, 1.0, BoundaryCondition::Dirichlet).with_obstacle(0.2, 0.5, 0.19);
        assert!(matches!(
            build_surface(&draft),
            Err(Error::ObstacleOutsideDomain { .. })
        ));
    }

    #[test]
    fn circle_frame_at_start_and_half_way() {
        let spec = sinai();
        let f = boundary_eval(&spec, 0, 0.0).unwrap();
        assert_abs_diff_eq!(f.point.x, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(f.point.y, 0.5, epsilon = 1e-15);
        assert_eq!(f.normal, Vec2::new(1.0, 0.0));
        assert_abs_diff_eq!(f.curvature, 5.0, epsilon = 1e-12);

        let g = boundary_eval(&spec, 0, PI * 0.2).unwrap();
        assert_abs_diff_eq!(g.point.x, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(g.point.y, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g.normal.x, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.normal.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn arclength_wraps_around() {
        let spec = sinai();
        let len = spec.atlas.components[0].length;
        let a = boundary_eval(&spec, 0, len + 0.1).unwrap();
        let b = boundary_eval(&spec, 0, 0.1).unwrap();
        assert_abs_diff_eq!(a.point.x, b.point.x, epsilon = 1e-12);
        assert_abs_diff_eq!(a.point.y, b.point.y, epsilon = 1e-12);
    }

    #[test]
    fn unknown_component_is_an_error() {
        assert!(matches!(
            boundary_eval(&sinai(), 3, 0.0),
            Err(Error::UnknownComponent(3))
        ));
    }

    #[test]
    fn walls_have_inward_normals() {
        let spec = build_surface(&SurfaceDraft::rectangle(2.0, 1.0, BoundaryCondition::Neumann)).unwrap();
        let c = &spec.atlas.components[0];
        let centre = Vec2::new(1.0, 0.5);
        for k in 0..60 {
            let s = k as f64 * 0.1 + 0.05;
            let f = c.frame(s);
            assert!((centre - f.point).dot(f.normal) > 0.0, "s = {s}");
            assert_eq!(f.curvature, 0.0);
        }
    }

    #[test]
    fn total_length_matches_circumferences_plus_walls() {
        let spec = build_surface(
            &SurfaceDraft::rectangle(2.0, 1.0, BoundaryCondition::Neumann)
                .with_obstacle(0.5, 0.5, 0.2)
                .with_obstacle(1.4, 0.5, 0.15),
        )
        .unwrap();
        assert_abs_diff_eq!(spec.perimeter(), TAU * 0.35 + 6.0, epsilon = 1e-12);
        assert_eq!(spec.holes, 3);
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            base = "rectangle"
            width = 1.0
            height = 0.5
            bc = "neumann"
            outer_bc = "dirichlet"
            [[obstacle]]
            center = [0.5, 0.25]
            radius = 0.1
        "#;
        let draft = SurfaceDraft::from_toml_str(text).unwrap();
        let spec = build_surface(&draft).unwrap();
        assert_eq!(
            spec.base,
            Base::Rectangle {
                width: 1.0,
                height: 0.5,
                outer_bc: BoundaryCondition::Dirichlet
            }
        );
        assert_eq!(SurfaceDraft::from_toml_str(&draft.to_toml_string()).unwrap(), draft);
    }

    proptest! {
        #[test]
        fn frames_are_orthonormal_and_periodic(s in -10.0f64..10.0, comp in 0usize..2) {
            let spec = build_surface(
                &SurfaceDraft::rectangle(1.5, 1.0, BoundaryCondition::Dirichlet).with_obstacle(0.6, 0.5, 0.2),
            ).unwrap();
            let c = &spec.atlas.components[comp];
            let f = c.frame(s);
            prop_assert!((f.tangent.norm() - 1.0).abs() < 1e-12);
            prop_assert!((f.normal.norm() - 1.0).abs() < 1e-12);
            prop_assert!(f.tangent.dot(f.normal).abs() < 1e-12);
            let g = c.frame(s + c.length);
            prop_assert!((f.point - g.point).norm() < 1e-12);
            let back = c.locate(f.point);
            prop_assert!((c.frame(back).point - f.point).norm() < 1e-9);
        }
    }
}
