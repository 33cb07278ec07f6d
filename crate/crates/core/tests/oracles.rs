//! Discrete operators checked against values computed independently here.

use std::f64::consts::PI;

use conecert::expr::Signature;
use conecert::geometry::{build_grid, DomainSpec};
use conecert::greens::{SolutionOperator, SolverConfig};
use conecert::operator::{assemble, BoundarySpec, EllipticSpec};
use conecert::{expr::Expr, Grid};

fn dirichlet(domain: &DomainSpec, h: f64) -> (Grid, SolutionOperator) {
    let grid = build_grid(domain, h).unwrap();
    let op = assemble(&EllipticSpec::laplacian(), &BoundarySpec::Dirichlet, &grid).unwrap();
    (grid.clone(), SolutionOperator::new(op, SolverConfig::default()).unwrap())
}

/// J0 by its power series, fine for |x| < 10.
fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

fn bessel_i(nu: u32, x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = (x / 2.0).powi(nu as i32) / (1..=nu).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..60 {
        term *= q / (k as f64 * (k + nu) as f64);
        sum += term;
    }
    sum
}

fn first_zero_j0() -> f64 {
    let (mut a, mut b) = (2.0, 3.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if bessel_j0(a) * bessel_j0(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Center value of `−Δu = 1` on the unit square with zero boundary data.
fn square_torsion_center() -> f64 {
    let mut s = 0.0;
    for m in (1..800).step_by(2) {
        for n in (1..800).step_by(2) {
            let sign = if ((m + n) / 2) % 2 == 1 { 1.0 } else { -1.0 };
            let (m, n) = (m as f64, n as f64);
            s += sign * 16.0 / (PI.powi(4) * m * n * (m * m + n * n));
        }
    }
    s
}

/// `u'' + u'/r = c u`, `u(0) = 1`, `u'(0) = 0` by RK4, returned as
/// samples `(r, u, u')` on `[0, 1]`.
fn radial_shoot(c: f64, steps: usize) -> Vec<(f64, f64, f64)> {
    let dr = 1.0 / steps as f64;
    // Start just off the axis with the series u ≈ 1 + c r²/4.
    let r0 = 1e-6;
    let mut y = [1.0 + c * r0 * r0 / 4.0, c * r0 / 2.0];
    let mut r = r0;
    let rhs = |r: f64, y: [f64; 2]| [y[1], c * y[0] - y[1] / r];
    let mut out = vec![(0.0, 1.0, 0.0)];
    for k in 0..steps {
        let target = (k + 1) as f64 * dr;
        let step = target - r;
        let k1 = rhs(r, y);
        let k2 = rhs(r + step / 2.0, [y[0] + step / 2.0 * k1[0], y[1] + step / 2.0 * k1[1]]);
        let k3 = rhs(r + step / 2.0, [y[0] + step / 2.0 * k2[0], y[1] + step / 2.0 * k2[1]]);
        let k4 = rhs(r + step, [y[0] + step * k3[0], y[1] + step * k3[1]]);
        for i in 0..2 {
            y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        r = target;
        out.push((r, y[0], y[1]));
    }
    out
}

#[test]
fn bessel_oracle_sanity() {
    let j = first_zero_j0();
    assert!((j - 2.404825557695773).abs() < 1e-12, "{j}");
    assert!((bessel_i(0, 1.0) - 1.2660658777520082).abs() < 1e-14);
    assert!((bessel_i(1, 1.0) - 0.5651591039924851).abs() < 1e-14);
}

#[test]
fn disk_torsion_converges() {
    let mut errs = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let (grid, k) = dirichlet(&DomainSpec::unit_disk(), h);
        let err = grid
            .nodes()
            .iter()
            .zip(k.k1().values())
            .map(|(p, v)| (v - (1.0 - p[0] * p[0] - p[1] * p[1]) / 4.0).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[2] < 1e-3, "{errs:?}");
    assert!(errs[1] / errs[2] >= 3.0, "{errs:?}");
}

#[test]
fn square_torsion_center_value() {
    let want = square_torsion_center();
    assert!((want - 0.0736713532).abs() < 1e-6, "{want}");
    let (grid, k) = dirichlet(&DomainSpec::unit_square(), 1.0 / 32.0);
    let c = grid.node_at(16, 16).unwrap();
    let got = k.k1().values()[c];
    assert!((got - want).abs() < 1e-4, "{got} vs {want}");
}

#[test]
fn disk_spectral_radius_matches_bessel_zero() {
    let want = 1.0 / first_zero_j0().powi(2);
    let (_, k) = dirichlet(&DomainSpec::unit_disk(), 1.0 / 32.0);
    let s = k.spectral().unwrap();
    assert!(((s.r - want) / want).abs() < 5e-3, "{} vs {want}", s.r);
    assert!(s.residual <= 1e-8);
}

#[test]
fn square_spectral_radius() {
    let want = 1.0 / (2.0 * PI * PI);
    let (_, k) = dirichlet(&DomainSpec::unit_square(), 1.0 / 32.0);
    let s = k.spectral().unwrap();
    assert!(((s.r - want) / want).abs() < 5e-3, "{} vs {want}", s.r);
}

#[test]
fn neumann_lift_matches_radial_profile() {
    let c = 1.0;
    let prof = radial_shoot(c, 4000);
    let slope = prof.last().unwrap().2;
    let at = |r: f64| {
        let k = ((r * 4000.0).round() as usize).min(4000);
        prof[k].1 / slope
    };
    let closed = bessel_i(0, 1.0) / bessel_i(1, 1.0);
    assert!((at(1.0) - closed).abs() < 1e-8);

    let sig = Signature::spatial();
    let spec = EllipticSpec {
        reaction: Expr::parse("1", &sig).unwrap(),
        ..EllipticSpec::laplacian()
    };
    let mut errs = Vec::new();
    for h in [1.0 / 16.0, 1.0 / 32.0] {
        let grid = build_grid(&DomainSpec::unit_disk(), h).unwrap();
        let op = assemble(&spec, &BoundarySpec::Neumann, &grid).unwrap();
        let k = SolutionOperator::new(op, SolverConfig::default()).unwrap();
        let err = grid
            .nodes()
            .iter()
            .zip(k.gamma().values())
            .map(|(p, g)| (g - at(p[0].hypot(p[1]))).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[1] < 0.05 * closed, "{errs:?}");
    assert!(errs[1] < errs[0], "{errs:?}");
}
