mod common;

use common::{random_orthogonal, random_spec, within_sigmas, OverlapFixture};
use slicedmi::gaussian::{gaussian_smi_mc, gaussian_smi_upper_bound};
use slicedmi::{GaussianSpec, SeededRng};

#[test]
fn pinned_overlap_fixture_reproduces() {
    let fx = OverlapFixture::load();
    let fresh = gaussian_smi_mc(&fx.spec(), 100_000, fx.seed + 1).unwrap();
    assert!(
        within_sigmas(fresh.value, fresh.std_error, fx.value, fx.std_error, 3.0),
        "fixture {} vs fresh {} ± {}",
        fx.value,
        fresh.value,
        fresh.std_error
    );
}

/// SMI of a 2×2 spec by the rectangle (periodic trapezoid) rule over the two
/// circle angles, written out from the covariance blocks.
fn quadrature_2x2(sx: [[f64; 2]; 2], sy: [[f64; 2]; 2], sxy: [[f64; 2]; 2], grid: usize) -> f64 {
    let step = std::f64::consts::TAU / grid as f64;
    let quad = |s: [[f64; 2]; 2], u: [f64; 2], v: [f64; 2]| {
        u[0] * (s[0][0] * v[0] + s[0][1] * v[1]) + u[1] * (s[1][0] * v[0] + s[1][1] * v[1])
    };
    let mut total = 0.0;
    for i in 0..grid {
        let t = [(i as f64 * step).cos(), (i as f64 * step).sin()];
        let vx = quad(sx, t, t);
        for j in 0..grid {
            let p = [(j as f64 * step).cos(), (j as f64 * step).sin()];
            let rho = quad(sxy, t, p) / (vx * quad(sy, p, p)).sqrt();
            total += -0.5 * (1.0 - rho * rho).ln();
        }
    }
    total / (grid * grid) as f64
}

#[test]
fn monte_carlo_matches_quadrature_in_two_dimensions() {
    let cases = [
        ([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]], [[0.6, 0.0], [0.0, 0.3]]),
        ([[1.0, 0.3], [0.3, 2.0]], [[1.5, -0.4], [-0.4, 1.0]], [[0.5, 0.2], [-0.3, 0.6]]),
    ];
    for (sx, sy, sxy) in cases {
        let rows = |m: [[f64; 2]; 2]| m.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        let spec = GaussianSpec::new(rows(sx), rows(sy), rows(sxy)).unwrap();
        let mc = gaussian_smi_mc(&spec, 100_000, 3).unwrap();
        let quad = quadrature_2x2(sx, sy, sxy, 720);
        assert!((mc.value - quad).abs() <= 1e-3, "mc {} ± {} vs quadrature {quad}", mc.value, mc.std_error);
    }
}

#[test]
fn rotation_leaves_oracle_unchanged() {
    let mut rng = SeededRng::new(77);
    for trial in 0..5 {
        let spec = random_spec(3, 2, 0.9, &mut rng);
        let (u, v) = (random_orthogonal(3, &mut rng), random_orthogonal(2, &mut rng));
        let rotated = spec.transformed(&u, &v).unwrap();
        let a = gaussian_smi_mc(&spec, 100_000, trial).unwrap();
        let b = gaussian_smi_mc(&rotated, 100_000, 1000 + trial).unwrap();
        assert!(within_sigmas(a.value, a.std_error, b.value, b.std_error, 3.0), "{} vs {}", a.value, b.value);
    }
}

#[test]
fn monte_carlo_is_bracketed_by_zero_and_cca_bound() {
    let mut rng = SeededRng::new(5);
    for i in 0..100 {
        let (dx, dy) = (1 + i % 4, 1 + (i / 4) % 3);
        let spec = random_spec(dx, dy, 0.95, &mut rng);
        let mc = gaussian_smi_mc(&spec, 2000, i as u64).unwrap();
        let bound = gaussian_smi_upper_bound(&spec).unwrap();
        assert!(mc.value >= 0.0);
        // scalar specs hit the bound exactly, up to rounding
        assert!(mc.value <= bound + 3.0 * mc.std_error + 1e-12, "spec {i}: {} > {bound}", mc.value);
    }
}
