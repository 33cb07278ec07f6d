//! The operator `(T + Γ) u = (λ_i K_i F_i(u) + η_i h_i[u] γ_i)_i` on the
//! order box `P_I = {0 ≤ u_i ≤ ρ_i}` and a damped Picard search for its
//! fixed points.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{product_distance, product_norm, GridFunction};
use crate::functionals::{nemytskii, Functional, FunctionalSpec, Nonlinearity};
use crate::geometry::{DomainSpec, Grid, GridOptions};
use crate::greens::{SolutionOperator, SolverConfig};
use crate::operator::{assemble, validate_boundary, validate_elliptic, BoundarySpec, EllipticReport, EllipticSpec};

/// Slack on the box constraint when checking inputs.
pub const BOX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub elliptic: EllipticSpec,
    pub boundary: BoundarySpec,
    pub f: Expr,
    pub h: FunctionalSpec,
    pub rho: f64,
    pub lambda: f64,
    pub eta: f64,
}

impl ComponentSpec {
    /// `-Δ u = λ f`, `u = η h[u]` on `∂Ω`.
    pub fn dirichlet_laplacian(f: Expr, h: FunctionalSpec, rho: f64) -> Self {
        ComponentSpec {
            elliptic: EllipticSpec::laplacian(),
            boundary: BoundarySpec::Dirichlet,
            f,
            h,
            rho,
            lambda: 0.0,
            eta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub domain: DomainSpec,
    pub components: Vec<ComponentSpec>,
}

impl SystemSpec {
    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.rho).collect()
    }

    pub fn lambda(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.lambda).collect()
    }

    pub fn eta(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.eta).collect()
    }

    pub fn set_parameters(&mut self, lambda: &[f64], eta: &[f64]) -> Result<()> {
        check_parameters(self.n(), lambda, eta)?;
        for (c, (&l, &e)) in self.components.iter_mut().zip(lambda.iter().zip(eta)) {
            c.lambda = l;
            c.eta = e;
        }
        Ok(())
    }

    /// Checks the grid-independent invariants.
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.components.is_empty() {
            return Err(Error::validation("/components", "at least one component is required"));
        }
        for (i, c) in self.components.iter().enumerate() {
            if !(c.rho > 0.0 && c.rho.is_finite()) {
                return Err(Error::validation(format!("/components/{i}/rho"), format!("must be positive, got {}", c.rho)));
            }
            for (key, v) in [("lambda", c.lambda), ("eta", c.eta)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::validation(format!("/components/{i}/{key}"), format!("must be nonnegative, got {v}")));
                }
            }
        }
        Ok(())
    }
}

fn check_parameters(n: usize, lambda: &[f64], eta: &[f64]) -> Result<()> {
    if lambda.len() != n || eta.len() != n {
        return Err(Error::validation(
            "/parameters",
            format!("expected {n} values of lambda and eta, got {} and {}", lambda.len(), eta.len()),
        ));
    }
    for &v in lambda.iter().chain(eta) {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::validation("/parameters", format!("parameters must be nonnegative, got {v}")));
        }
    }
    Ok(())
}

/// A [`SystemSpec`] discretized on one grid. Components with identical
/// `(L, B)` share their [`SolutionOperator`].
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    spec: SystemSpec,
    digest: String,
    grid: Grid,
    ops: Vec<Arc<SolutionOperator>>,
    f: Vec<Nonlinearity>,
    h: Vec<Functional>,
    elliptic: Vec<EllipticReport>,
    rho: Vec<f64>,
    lambda: Vec<f64>,
    eta: Vec<f64>,
}

impl DiscreteSystem {
    pub fn build(sys: &SystemSpec, h: f64, solver: &SolverConfig) -> Result<Self> {
        Self::build_with(sys, h, GridOptions::default(), solver)
    }

    pub fn build_with(sys: &SystemSpec, h: f64, grid_opts: GridOptions, solver: &SolverConfig) -> Result<Self> {
        sys.validate()?;
        let n = sys.n();
        let grid = Grid::build(&sys.domain, h, grid_opts)?;
        let mut ops: Vec<Arc<SolutionOperator>> = Vec::with_capacity(n);
        let mut elliptic = Vec::with_capacity(n);
        for (i, c) in sys.components.iter().enumerate() {
            let report = validate_elliptic(&c.elliptic, &grid)?;
            validate_boundary(&c.boundary, &grid)?;
            if c.boundary == BoundarySpec::Neumann && report.reaction_vanishes {
                return Err(Error::validation(
                    format!("/components/{i}/B"),
                    "a Neumann boundary operator needs a reaction coefficient that is not identically zero",
                ));
            }
            elliptic.push(report);
            let shared = sys.components[..i]
                .iter()
                .position(|p| p.elliptic == c.elliptic && p.boundary == c.boundary);
            let op = match shared {
                Some(j) => ops[j].clone(),
                None => Arc::new(SolutionOperator::new(assemble(&c.elliptic, &c.boundary, &grid)?, *solver)?),
            };
            ops.push(op);
        }
        let f = sys
            .components
            .iter()
            .map(|c| Nonlinearity::new(c.f.clone(), n))
            .collect::<Result<Vec<_>>>()?;
        let hs = sys
            .components
            .iter()
            .map(|c| Functional::bind(&c.h, &grid, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiscreteSystem {
            spec: sys.clone(),
            digest: crate::problem::digest(sys),
            grid,
            ops,
            f,
            h: hs,
            elliptic,
            rho: sys.rho(),
            lambda: sys.lambda(),
            eta: sys.eta(),
        })
    }

    pub fn n(&self) -> usize {
        self.ops.len()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn component_spec(&self, i: usize) -> &ComponentSpec {
        &self.spec.components[i]
    }

    /// SHA-256 of the canonical JSON form of the system, parameters excluded.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn op(&self, i: usize) -> &SolutionOperator {
        &self.ops[i]
    }

    pub fn nonlinearity(&self, i: usize) -> &Nonlinearity {
        &self.f[i]
    }

    pub fn functional(&self, i: usize) -> &Functional {
        &self.h[i]
    }

    pub fn elliptic_report(&self, i: usize) -> &EllipticReport {
        &self.elliptic[i]
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn set_parameters(&mut self, lambda: &[f64], eta: &[f64]) -> Result<()> {
        check_parameters(self.n(), lambda, eta)?;
        self.lambda = lambda.to_vec();
        self.eta = eta.to_vec();
        Ok(())
    }

    /// Returns `Err(OutOfBox)` at the first node outside `P_I` (with slack [`BOX_TOL`]).
    pub fn check_box(&self, u: &[GridFunction]) -> Result<()> {
        self.check_shape(u)?;
        for (i, c) in u.iter().enumerate() {
            for (k, &v) in c.values().iter().enumerate() {
                if !(v >= -BOX_TOL && v <= self.rho[i] + BOX_TOL) {
                    let x = self.grid.node(k);
                    return Err(Error::OutOfBox {
                        component: i,
                        x: x[0],
                        y: x[1],
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    fn check_shape(&self, u: &[GridFunction]) -> Result<()> {
        if u.len() != self.n() {
            return Err(Error::GridMismatch {
                expected: self.n(),
                found: u.len(),
            });
        }
        for c in u {
            c.check(&self.grid)?;
        }
        Ok(())
    }

    /// `(T + Γ) u` for `u ∈ P_I`.
    pub fn apply(&self, u: &[GridFunction]) -> Result<Vec<GridFunction>> {
        self.check_box(u)?;
        self.apply_unchecked(u)
    }

    fn apply_unchecked(&self, u: &[GridFunction]) -> Result<Vec<GridFunction>> {
        let mut out = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            let mut v = if self.lambda[i] != 0.0 {
                let fu = nemytskii(&self.f[i], u, &self.grid)?;
                self.ops[i].apply_k(&fu)?.scaled(self.lambda[i])
            } else {
                GridFunction::zeros(&self.grid)
            };
            if self.eta[i] != 0.0 {
                let hu = self.h[i].eval(u)?;
                v.axpy(self.eta[i] * hu, self.ops[i].gamma())?;
            }
            out.push(v);
        }
        Ok(out)
    }

    /// The constant field `u ≡ c`.
    pub fn constant(&self, c: &[f64]) -> Vec<GridFunction> {
        c.iter().map(|&v| GridFunction::constant(&self.grid, v)).collect()
    }

    /// A field with independent uniform node values in `[0, ρ_i]`.
    pub fn random_in_box(&self, rng: &mut impl Rng) -> Vec<GridFunction> {
        self.rho
            .iter()
            .map(|&r| {
                let values = (0..self.grid.len()).map(|_| rng.gen::<f64>() * r).collect();
                GridFunction::from_parts(self.grid.id(), values)
            })
            .collect()
    }

    /// Projects onto `P_I`, returning the number of clamped node values.
    pub fn clamp(&self, u: &mut [GridFunction]) -> usize {
        let mut clamps = 0;
        for (c, &r) in u.iter_mut().zip(&self.rho) {
            for v in c.values_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                    clamps += 1;
                } else if *v > r {
                    *v = r;
                    clamps += 1;
                }
            }
        }
        clamps
    }
}

pub fn apply_t_gamma(sys: &DiscreteSystem, u: &[GridFunction]) -> Result<Vec<GridFunction>> {
    sys.apply(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardConfig {
    /// Damping `θ ∈ (0, 1]`.
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            theta: 0.5,
            tol: 1e-8,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Converged,
    MaxIter,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    /// `‖u_k‖`
    pub norm: f64,
    /// `‖u_k − (T + Γ) u_k‖`
    pub residual: f64,
    /// `(T + Γ) u_k` left the box.
    pub out_of_box: bool,
    /// Node values clamped when forming `u_{k+1}`.
    pub clamps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardResult {
    #[serde(skip)]
    pub u: Vec<GridFunction>,
    pub status: Status,
    pub iterations: usize,
    pub residual: f64,
    pub norm: f64,
    pub clamps: usize,
    /// Converged, but the box projection was active at the end.
    pub suspicious: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub trace: Vec<TraceStep>,
}

/// Iterates `u ← (1 − θ) u + θ (T + Γ) u`, projecting onto `P_I`.
pub fn picard_solve(sys: &DiscreteSystem, u0: &[GridFunction], cfg: &PicardConfig) -> Result<PicardResult> {
    if !(cfg.theta > 0.0 && cfg.theta <= 1.0) {
        return Err(Error::validation("/solver/theta", format!("damping must lie in (0, 1], got {}", cfg.theta)));
    }
    sys.check_shape(u0)?;
    let mut u = u0.to_vec();
    let mut clamps = sys.clamp(&mut u);
    let mut trace: Vec<TraceStep> = Vec::new();
    let finish = |u: Vec<GridFunction>, status, trace: Vec<TraceStep>, clamps, error| {
        let last = trace.last().copied();
        let clamped_before = trace.len() >= 2 && trace[trace.len() - 2].clamps > 0;
        let suspicious =
            status == Status::Converged && (last.is_some_and(|s: TraceStep| s.out_of_box) || clamped_before);
        PicardResult {
            norm: product_norm(&u),
            u,
            status,
            iterations: trace.len(),
            residual: last.map_or(f64::NAN, |s| s.residual),
            clamps,
            suspicious,
            error,
            trace,
        }
    };
    for _ in 0..cfg.max_iter {
        let v = match sys.apply_unchecked(&u) {
            Ok(v) => v,
            Err(e) => return Ok(finish(u, Status::Diverged, trace, clamps, Some(e.to_string()))),
        };
        let residual = product_distance(&u, &v)?;
        let out_of_box = v
            .iter()
            .zip(sys.rho())
            .any(|(c, &r)| c.min() < -BOX_TOL || c.max() > r + BOX_TOL);
        let mut step = TraceStep {
            norm: product_norm(&u),
            residual,
            out_of_box,
            clamps: 0,
        };
        if !residual.is_finite() {
            trace.push(step);
            return Ok(finish(u, Status::Diverged, trace, clamps, Some("non-finite iterate".into())));
        }
        if residual <= cfg.tol {
            trace.push(step);
            return Ok(finish(u, Status::Converged, trace, clamps, None));
        }
        let mut next = v;
        if cfg.theta < 1.0 {
            for (n, c) in next.iter_mut().zip(&u) {
                for (a, b) in n.values_mut().iter_mut().zip(c.values()) {
                    *a = (1.0 - cfg.theta) * b + cfg.theta * *a;
                }
            }
        }
        step.clamps = sys.clamp(&mut next);
        clamps += step.clamps;
        trace.push(step);
        u = next;
    }
    Ok(finish(u, Status::MaxIter, trace, clamps, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MultiStartConfig {
    /// Seeded random starts in addition to the corner `ρ` and midpoint `ρ/2`.
    pub random_starts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StartKind {
    Corner,
    Midpoint,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiStartReport {
    pub starts: Vec<StartKind>,
    pub runs: Vec<PicardResult>,
    /// Indices of converged runs whose limits are pairwise more than
    /// `100 · tol` apart.
    pub distinct: Vec<usize>,
}

/// Start fields in order: corner, midpoint, then `random_starts` seeded fields.
pub fn start_points(sys: &DiscreteSystem, cfg: &MultiStartConfig) -> Vec<(StartKind, Vec<GridFunction>)> {
    let rho = sys.rho().to_vec();
    let half: Vec<f64> = rho.iter().map(|r| 0.5 * r).collect();
    let mut starts = vec![(StartKind::Corner, sys.constant(&rho)), (StartKind::Midpoint, sys.constant(&half))];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.random_starts {
        starts.push((StartKind::Random, sys.random_in_box(&mut rng)));
    }
    starts
}

pub fn multistart(sys: &DiscreteSystem, picard: &PicardConfig, cfg: &MultiStartConfig) -> Result<MultiStartReport> {
    let starts = start_points(sys, cfg);
    #[cfg(feature = "parallel")]
    let runs: Vec<Result<PicardResult>> = {
        use rayon::prelude::*;
        starts.par_iter().map(|(_, u0)| picard_solve(sys, u0, picard)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Result<PicardResult>> = starts.iter().map(|(_, u0)| picard_solve(sys, u0, picard)).collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut distinct: Vec<usize> = Vec::new();
    for (k, run) in runs.iter().enumerate() {
        if run.status != Status::Converged {
            continue;
        }
        let mut new = true;
        for &j in &distinct {
            if product_distance(&runs[j].u, &run.u)? <= 100.0 * picard.tol {
                new = false;
                break;
            }
        }
        if new {
            distinct.push(k);
        }
    }
    Ok(MultiStartReport {
        starts: starts.into_iter().map(|s| s.0).collect(),
        runs,
        distinct,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    pub residual: f64,
    pub in_box: bool,
    pub norm: f64,
    pub component_norms: Vec<f64>,
    /// `‖u‖ > tol`
    pub nonzero: bool,
    /// `ρ0 ≤ ‖u‖` and `‖u_i‖∞ ≤ ρ_i`, when `ρ0` is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub localized: Option<bool>,
}

pub fn verify_solution(sys: &DiscreteSystem, u: &[GridFunction], tol: f64, rho0: Option<f64>) -> Result<SolutionReport> {
    sys.check_shape(u)?;
    let in_box = sys.check_box(u).is_ok();
    let residual = match sys.apply_unchecked(u) {
        Ok(v) => product_distance(u, &v)?,
        Err(_) => f64::INFINITY,
    };
    let component_norms: Vec<f64> = u.iter().map(|c| c.sup_norm()).collect();
    let norm = product_norm(u);
    let localized = rho0.map(|r0| {
        r0 <= norm && component_norms.iter().zip(sys.rho()).all(|(n, r)| *n <= r + BOX_TOL)
    });
    Ok(SolutionReport {
        residual,
        in_box,
        norm,
        component_norms,
        nonzero: norm > tol,
        localized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Signature;

    fn affine(f: &str, h: FunctionalSpec, lambda: f64, eta: f64) -> DiscreteSystem {
        let mut c = ComponentSpec::dirichlet_laplacian(Expr::parse(f, &Signature::nonlinearity(1)).unwrap(), h, 10.0);
        c.lambda = lambda;
        c.eta = eta;
        let sys = SystemSpec {
            domain: DomainSpec::unit_disk(),
            components: vec![c],
        };
        DiscreteSystem::build(&sys, 1.0 / 16.0, &SolverConfig::default()).unwrap()
    }

    fn constant_functional(c: &str) -> FunctionalSpec {
        FunctionalSpec::new(Vec::new(), c).unwrap()
    }

    #[test]
    fn affine_problem_converges_in_two_steps() {
        let sys = affine("1", FunctionalSpec::zero(), 1.0, 0.0);
        let u0 = sys.constant(&[3.0]);
        let cfg = PicardConfig {
            theta: 1.0,
            ..Default::default()
        };
        let run = picard_solve(&sys, &u0, &cfg).unwrap();
        assert_eq!(run.status, Status::Converged);
        assert!(run.iterations <= 2);
        assert!(run.u[0].distance(sys.op(0).k1()).unwrap() < 1e-15);
    }

    #[test]
    fn pure_boundary_lift() {
        let sys = affine("0", constant_functional("1"), 0.0, 1.0);
        let v = sys.apply(&sys.constant(&[0.5])).unwrap();
        assert!(v[0].values().iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn out_of_box_rejected() {
        let sys = affine("1", FunctionalSpec::zero(), 1.0, 0.0);
        assert!(matches!(sys.apply(&sys.constant(&[11.0])), Err(Error::OutOfBox { component: 0, .. })));
    }

    #[test]
    fn clamping_is_recorded() {
        // 100 K(1) + 5 peaks at 30 > ρ = 10.
        let sys = affine("100", constant_functional("5"), 1.0, 1.0);
        let run = picard_solve(&sys, &sys.constant(&[0.0]), &PicardConfig::default()).unwrap();
        assert!(run.clamps > 0);
        assert!(run.u[0].max() <= 10.0);
    }

    #[test]
    fn multistart_finds_single_limit() {
        let sys = affine("1", FunctionalSpec::zero(), 1.0, 0.0);
        let rep = multistart(
            &sys,
            &PicardConfig::default(),
            &MultiStartConfig {
                random_starts: 3,
                seed: 7,
            },
        )
        .unwrap();
        assert_eq!(rep.runs.len(), 5);
        assert_eq!(rep.distinct.len(), 1);
        assert_eq!(rep.starts[2], StartKind::Random);
    }

    #[test]
    fn verify_zero_and_k1() {
        let sys = affine("1", FunctionalSpec::zero(), 1.0, 0.0);
        let rep = verify_solution(&sys, &[sys.op(0).k1().clone()], 1e-8, Some(0.1)).unwrap();
        assert!(rep.residual < 1e-14 && rep.in_box && rep.nonzero);
        assert_eq!(rep.localized, Some(true));
    }
}
