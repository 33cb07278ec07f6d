//! The discrete solution operator `K` of `(L, B)`, the boundary lift `γ`
//! and the principal eigenpair `(r(K), φ)`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridFunction;
use crate::linalg::{bicgstab, conjugate_gradient, BandedLu};
use crate::operator::DiscreteOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    /// Banded LU up to `direct_limit` unknowns, Krylov beyond.
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Relative residual target for iterative solves.
    pub tol: f64,
    pub max_iter: usize,
    pub direct_limit: usize,
    /// Relative eigen-residual target for the power iteration.
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::Auto,
            tol: 1e-10,
            max_iter: 20_000,
            direct_limit: 40_000,
            eigen_tol: 1e-10,
            eigen_max_iter: 5_000,
        }
    }
}

#[derive(Debug)]
enum Backend {
    Direct(BandedLu),
    Iterative,
}

/// Principal eigenpair `K φ = r φ`, `φ ≥ 0`, `‖φ‖∞ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub r: f64,
    /// `μ = 1/r`
    pub mu: f64,
    pub phi: GridFunction,
    pub iterations: usize,
    /// `‖K φ − r φ‖∞ / r`
    pub residual: f64,
}

/// Bounds `α e ≤ K g ≤ β e` with `e = K(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EPositivity {
    pub alpha: f64,
    pub beta: f64,
    /// Nodes skipped because `e` is numerically zero there.
    pub excluded: usize,
}

/// `e` below this is treated as zero in `K g / e` quotients.
pub const E_FLOOR: f64 = 1e-14;

#[derive(Debug)]
pub struct SolutionOperator {
    op: DiscreteOperator,
    config: SolverConfig,
    backend: Backend,
    k1: GridFunction,
    gamma: GridFunction,
    spectral: OnceLock<SpectralPair>,
}

impl SolutionOperator {
    /// Factors (or prepares) the operator and caches `K(1)` and `γ`.
    pub fn new(op: DiscreteOperator, config: SolverConfig) -> Result<Self> {
        let direct = match config.method {
            SolverMethod::Direct => true,
            SolverMethod::Iterative => false,
            SolverMethod::Auto => op.len() <= config.direct_limit,
        };
        let backend = if direct {
            Backend::Direct(BandedLu::factor(&op.matrix)?)
        } else {
            Backend::Iterative
        };
        let placeholder = GridFunction::from_parts(op.grid_id(), Vec::new());
        let mut k = SolutionOperator {
            op,
            config,
            backend,
            k1: placeholder.clone(),
            gamma: placeholder,
            spectral: OnceLock::new(),
        };
        let ones = vec![1.0; k.op.len()];
        k.k1 = GridFunction::from_parts(k.op.grid_id(), k.solve(&ones)?);
        let rhs = k.op.unit_boundary_rhs();
        k.gamma = GridFunction::from_parts(k.op.grid_id(), k.solve(&rhs)?);
        Ok(k)
    }

    pub fn op(&self) -> &DiscreteOperator {
        &self.op
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.backend, Backend::Direct(_))
    }

    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        self.op.is_empty()
    }

    pub fn grid_id(&self) -> u64 {
        self.op.grid_id()
    }

    pub fn h(&self) -> f64 {
        self.op.h()
    }

    /// Solves `A u = b` on the raw vectors.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Direct(lu) => Ok(lu.solve(b)),
            Backend::Iterative if self.op.symmetric => {
                Ok(conjugate_gradient(&self.op.matrix, b, self.config.tol, self.config.max_iter)?.x)
            }
            Backend::Iterative => Ok(bicgstab(&self.op.matrix, b, self.config.tol, self.config.max_iter)?.x),
        }
    }

    /// `u = K g`: `L u = g` with homogeneous boundary data.
    pub fn apply_k(&self, g: &GridFunction) -> Result<GridFunction> {
        self.check(g)?;
        Ok(GridFunction::from_parts(self.grid_id(), self.solve(g.values())?))
    }

    fn check(&self, g: &GridFunction) -> Result<()> {
        if g.grid_id() != self.grid_id() || g.len() != self.len() {
            return Err(Error::GridMismatch {
                expected: self.len(),
                found: g.len(),
            });
        }
        Ok(())
    }

    /// `e = K(1)`
    pub fn k1(&self) -> &GridFunction {
        &self.k1
    }

    pub fn norm_k1(&self) -> f64 {
        self.k1.max().max(0.0)
    }

    /// `L γ = 0`, `B γ = 1`.
    pub fn gamma(&self) -> &GridFunction {
        &self.gamma
    }

    pub fn gamma_norm(&self) -> f64 {
        self.gamma.sup_norm()
    }

    /// Cached principal eigenpair using the configured tolerances.
    pub fn spectral(&self) -> Result<&SpectralPair> {
        if let Some(s) = self.spectral.get() {
            return Ok(s);
        }
        let s = self.spectral_radius(self.config.eigen_tol, self.config.eigen_max_iter)?;
        Ok(self.spectral.get_or_init(|| s))
    }

    /// Power iteration from `φ⁰ ≡ 1`, normalized in the sup-norm.
    pub fn spectral_radius(&self, tol: f64, max_iter: usize) -> Result<SpectralPair> {
        let n = self.len();
        let mut phi = vec![1.0; n];
        let mut last = f64::NAN;
        for it in 1..=max_iter {
            let psi = self.solve(&phi)?;
            let r = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::NotPositiveOperator { value: r });
            }
            let residual = psi
                .iter()
                .zip(&phi)
                .fold(0.0f64, |m, (p, f)| m.max((p - r * f).abs()))
                / r;
            last = residual;
            if residual <= tol {
                return Ok(SpectralPair {
                    r,
                    mu: 1.0 / r,
                    phi: GridFunction::from_parts(self.grid_id(), phi),
                    iterations: it,
                    residual,
                });
            }
            phi = psi.into_iter().map(|v| v / r).collect();
        }
        Err(Error::NoConvergence {
            max_iter,
            residual: last,
        })
    }

    /// `α_g = min K g / e`, `β_g = max K g / e` over nodes with `e > E_FLOOR`.
    pub fn e_positivity(&self, g: &GridFunction) -> Result<EPositivity> {
        self.check(g)?;
        if g.values().iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroInput);
        }
        let kg = self.apply_k(g)?;
        let mut alpha = f64::INFINITY;
        let mut beta = f64::NEG_INFINITY;
        let mut excluded = 0;
        for (&u, &e) in kg.values().iter().zip(self.k1.values()) {
            if e <= E_FLOOR {
                excluded += 1;
                continue;
            }
            alpha = alpha.min(u / e);
            beta = beta.max(u / e);
        }
        Ok(EPositivity { alpha, beta, excluded })
    }
}

pub fn apply_k(k: &SolutionOperator, g: &GridFunction) -> Result<GridFunction> {
    k.apply_k(g)
}

pub fn norm_k1(k: &SolutionOperator) -> f64 {
    k.norm_k1()
}

pub fn compute_gamma(k: &SolutionOperator) -> &GridFunction {
    k.gamma()
}

pub fn spectral_radius(k: &SolutionOperator, tol: f64, max_iter: usize) -> Result<SpectralPair> {
    k.spectral_radius(tol, max_iter)
}

pub fn e_positivity_report(k: &SolutionOperator, g: &GridFunction) -> Result<EPositivity> {
    k.e_positivity(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec};
    use crate::operator::{assemble, BoundarySpec, EllipticSpec};

    fn poisson(domain: &DomainSpec, h: f64, method: SolverMethod) -> (crate::Grid, SolutionOperator) {
        let grid = build_grid(domain, h).unwrap();
        let op = assemble(&EllipticSpec::laplacian(), &BoundarySpec::Dirichlet, &grid).unwrap();
        let cfg = SolverConfig {
            method,
            ..Default::default()
        };
        let k = SolutionOperator::new(op, cfg).unwrap();
        (grid, k)
    }

    #[test]
    fn disk_torsion_function() {
        let (grid, k) = poisson(&DomainSpec::unit_disk(), 1.0 / 16.0, SolverMethod::Auto);
        assert!(k.is_direct());
        let err = grid
            .nodes()
            .iter()
            .zip(k.k1().values())
            .map(|(p, v)| (v - (1.0 - p[0] * p[0] - p[1] * p[1]) / 4.0).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-2, "{err}");
        assert!((k.gamma_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direct_and_iterative_agree() {
        let (_, a) = poisson(&DomainSpec::unit_disk(), 1.0 / 12.0, SolverMethod::Direct);
        let (_, b) = poisson(&DomainSpec::unit_disk(), 1.0 / 12.0, SolverMethod::Iterative);
        let d: f64 = a.k1().values().iter().zip(b.k1().values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn zero_source_and_unit_source() {
        let (grid, k) = poisson(&DomainSpec::unit_square(), 0.125, SolverMethod::Auto);
        assert_eq!(k.apply_k(&GridFunction::zeros(&grid)).unwrap().sup_norm(), 0.0);
        let e = k.e_positivity(&GridFunction::constant(&grid, 2.0)).unwrap();
        assert!((e.alpha - 2.0).abs() < 1e-12 && (e.beta - 2.0).abs() < 1e-12);
        assert_eq!(k.e_positivity(&GridFunction::zeros(&grid)), Err(Error::ZeroInput));
    }

    #[test]
    fn power_iteration_residual() {
        let (_, k) = poisson(&DomainSpec::unit_square(), 1.0 / 16.0, SolverMethod::Auto);
        let s = k.spectral().unwrap();
        assert!(s.residual <= 1e-10);
        assert!((s.r * 2.0 * std::f64::consts::PI.powi(2) - 1.0).abs() < 0.01, "{}", s.r);
        assert!(s.phi.min() >= 0.0);
        assert_eq!(s.phi.sup_norm(), 1.0);
    }
}
