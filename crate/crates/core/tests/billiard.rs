use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sinai_core::billiard::{
    billiard_map, conjugate_point_scan, lyapunov_estimate, map_jacobian, orbit, random_phase_point, PhasePoint,
};
use sinai_core::geometry::SurfaceSpec;

fn surface(name: &str) -> SurfaceSpec {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/surfaces/");
    SurfaceSpec::from_file(format!("{dir}{name}")).unwrap()
}

#[test]
fn shipped_surfaces_load() {
    let torus = surface("sinai_torus.toml");
    assert!(torus.is_torus());
    assert!((torus.area() - (1.0 - std::f64::consts::PI * 0.04)).abs() < 1e-12);
    let square = surface("unit_square.toml");
    assert!(!square.is_torus());
    assert!((square.area() - 1.0).abs() < 1e-12);
    for name in ["two_disk_torus.toml", "rectangle_disk.toml"] {
        let s = surface(name);
        assert!(s.area() > 0.0 && s.perimeter() > 0.0, "{name}");
    }
}

#[test]
fn map_preserves_phase_space() {
    let spec = surface("two_disk_torus.toml");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let p = random_phase_point(&spec, &mut rng);
        let (q, t) = billiard_map(&spec, p).unwrap();
        assert!(t > 0.0);
        assert!(q.eta.abs() <= 1.0);
        let len = spec.component(q.component).unwrap().length;
        assert!((0.0..len).contains(&q.s));
        if let Some(j) = map_jacobian(&spec, p, 1e-6).unwrap() {
            assert!((j.det() - 1.0).abs() < 1e-4, "det {}", j.det());
        }
    }
}

#[test]
fn orbits_are_deterministic() {
    let spec = surface("sinai_torus.toml");
    let p = PhasePoint::new(0, 0.3, 0.2);
    assert_eq!(orbit(&spec, p, 200).unwrap(), orbit(&spec, p, 200).unwrap());
}

#[test]
fn dispersing_table_is_chaotic_without_focusing() {
    let spec = surface("sinai_torus.toml");
    let p = PhasePoint::new(0, 0.1, 0.37);
    let est = lyapunov_estimate(&spec, p, 2000).unwrap();
    assert!(est.exponent > 0.0);
    assert!(est.std_error < est.exponent);
    let scan = conjugate_point_scan(&spec, p, 100.0).unwrap();
    assert_eq!(scan.first_zero, None);
}
