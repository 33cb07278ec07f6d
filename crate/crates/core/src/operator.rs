//! Elliptic operators `L u = -Σ a_jl ∂_j∂_l u + Σ a_j ∂_j u + a u` and
//! boundary operators `B u = b u + δ ∂u/∂ν`, and their finite-difference
//! assembly on a [`Grid`].
//!
//! Discretization:
//! * diffusion: symmetric Shortley–Weller form. A link of length `θh` to the
//!   boundary enters the diagonal as `a/(θh²)`; interior links are the usual
//!   `-a/h²`. For constant coefficients and Dirichlet data the matrix is
//!   symmetric and converges at second order.
//! * mixed second derivatives: positive-type seven-point stencil, applied only
//!   where every neighbor it touches is an interior node.
//! * advection: first-order upwinding.
//! * Neumann/Robin: the axis flux at a cut is replaced by `n_axis · ∂u/∂ν`
//!   with `∂u/∂ν = g - b u` and `u` on the boundary taken from the node
//!   (first order). `ν` is the outward unit normal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Program, Signature};
use crate::field::GridFunction;
use crate::geometry::{Dir, Grid, Link, Point2};
use crate::linalg::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSpec {
    /// `a_jl(x)`, expected symmetric.
    pub diffusion: [[Expr; 2]; 2],
    /// `a_j(x)`
    pub advection: [Expr; 2],
    /// `a(x) ≥ 0`
    pub reaction: Expr,
}

impl EllipticSpec {
    /// `-Δ`
    pub fn laplacian() -> Self {
        Self::scaled_laplacian(1.0)
    }

    /// `-c Δ`
    pub fn scaled_laplacian(c: f64) -> Self {
        let z = || Expr::Num(0.0);
        EllipticSpec {
            diffusion: [[Expr::Num(c), z()], [z(), Expr::Num(c)]],
            advection: [z(), z()],
            reaction: z(),
        }
    }

    pub fn with_reaction(mut self, a: Expr) -> Self {
        self.reaction = a;
        self
    }

    /// Parses coefficient strings over `x1`, `x2`.
    pub fn parse(diffusion: [[&str; 2]; 2], advection: [&str; 2], reaction: &str) -> Result<Self> {
        let sig = Signature::spatial();
        let p = |s: &str| Expr::parse(s, &sig);
        Ok(EllipticSpec {
            diffusion: [
                [p(diffusion[0][0])?, p(diffusion[0][1])?],
                [p(diffusion[1][0])?, p(diffusion[1][1])?],
            ],
            advection: [p(advection[0])?, p(advection[1])?],
            reaction: p(reaction)?,
        })
    }

    fn compile(&self) -> Result<Coefficients> {
        let sig = Signature::spatial();
        let c = |e: &Expr| Program::compile(e, &sig);
        Ok(Coefficients {
            diffusion: [
                [c(&self.diffusion[0][0])?, c(&self.diffusion[0][1])?],
                [c(&self.diffusion[1][0])?, c(&self.diffusion[1][1])?],
            ],
            advection: [c(&self.advection[0])?, c(&self.advection[1])?],
            reaction: c(&self.reaction)?,
        })
    }
}

struct Coefficients {
    diffusion: [[Program; 2]; 2],
    advection: [Program; 2],
    reaction: Program,
}

struct Sample {
    a: [[f64; 2]; 2],
    adv: [f64; 2],
    c: f64,
}

impl Coefficients {
    fn at(&self, x: Point2) -> Result<Sample> {
        let env = Env::new(x, &[]);
        let ev = |p: &Program| p.eval(&env).map_err(|e| e.at_node(x));
        Ok(Sample {
            a: [
                [ev(&self.diffusion[0][0])?, ev(&self.diffusion[0][1])?],
                [ev(&self.diffusion[1][0])?, ev(&self.diffusion[1][1])?],
            ],
            adv: [ev(&self.advection[0])?, ev(&self.advection[1])?],
            c: ev(&self.reaction)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySpec {
    /// `u = g`
    Dirichlet,
    /// `∂u/∂ν = g`
    Neumann,
    /// `b u + ∂u/∂ν = g`, `b ≥ 0`, `b ≢ 0`
    Robin { b: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Robin,
}

impl BoundarySpec {
    pub fn kind(&self) -> BoundaryKind {
        match self {
            BoundarySpec::Dirichlet => BoundaryKind::Dirichlet,
            BoundarySpec::Neumann => BoundaryKind::Neumann,
            BoundarySpec::Robin { .. } => BoundaryKind::Robin,
        }
    }
}

/// Outcome of checking the ellipticity hypotheses at every node and boundary point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticReport {
    /// Smallest eigenvalue of the diffusion matrix over the samples.
    pub mu0: f64,
    pub max_asymmetry: f64,
    pub min_reaction: f64,
    /// `a(x) = 0` at every sample.
    pub reaction_vanishes: bool,
    pub samples: usize,
}

fn sample_points(grid: &Grid) -> impl Iterator<Item = Point2> + '_ {
    grid.nodes()
        .iter()
        .copied()
        .chain(grid.boundary_points().iter().map(|b| b.x))
}

fn min_eigenvalue(a: [[f64; 2]; 2]) -> f64 {
    let off = 0.5 * (a[0][1] + a[1][0]);
    let mean = 0.5 * (a[0][0] + a[1][1]);
    let half_gap = 0.5 * (a[0][0] - a[1][1]);
    mean - half_gap.hypot(off)
}

pub fn validate_elliptic(spec: &EllipticSpec, grid: &Grid) -> Result<EllipticReport> {
    let coef = spec.compile()?;
    let mut report = EllipticReport {
        mu0: f64::INFINITY,
        max_asymmetry: 0.0,
        min_reaction: f64::INFINITY,
        reaction_vanishes: true,
        samples: 0,
    };
    for x in sample_points(grid) {
        let s = coef.at(x)?;
        let asym = (s.a[0][1] - s.a[1][0]).abs();
        if asym > 1e-12 * s.a[0][1].abs().max(1.0) {
            return Err(Error::AsymmetricDiffusion {
                x: x[0],
                y: x[1],
                a12: s.a[0][1],
                a21: s.a[1][0],
            });
        }
        let lmin = min_eigenvalue(s.a);
        if lmin <= 0.0 {
            return Err(Error::NotElliptic {
                x: x[0],
                y: x[1],
                min_eigenvalue: lmin,
            });
        }
        if s.c < 0.0 {
            return Err(Error::NegativeReaction {
                x: x[0],
                y: x[1],
                value: s.c,
            });
        }
        report.max_asymmetry = report.max_asymmetry.max(asym);
        report.mu0 = report.mu0.min(lmin);
        report.min_reaction = report.min_reaction.min(s.c);
        report.reaction_vanishes &= s.c == 0.0;
        report.samples += 1;
    }
    Ok(report)
}

/// Checks `b ≥ 0`, `b ≢ 0` for Robin operators on the boundary points of `grid`.
pub fn validate_boundary(spec: &BoundarySpec, grid: &Grid) -> Result<()> {
    let BoundarySpec::Robin { b } = spec else {
        return Ok(());
    };
    let prog = Program::compile(b, &Signature::spatial())?;
    let mut nonzero = false;
    for bp in grid.boundary_points() {
        let v = prog.eval(&Env::new(bp.x, &[])).map_err(|e| e.at_node(bp.x))?;
        if v < 0.0 {
            return Err(Error::InvalidBoundary(format!(
                "Robin coefficient b = {v} < 0 at ({}, {})",
                bp.x[0], bp.x[1]
            )));
        }
        nonzero |= v > 0.0;
    }
    if !nonzero {
        return Err(Error::InvalidBoundary(
            "Robin coefficient vanishes on the whole boundary; use neumann".into(),
        ));
    }
    Ok(())
}

/// Discrete `(L, B)` on the interior nodes: `A u = f + R g` where `g` holds
/// boundary data at [`Grid::boundary_points`].
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: CsrMatrix,
    pub boundary_map: CsrMatrix,
    pub symmetric: bool,
    pub m_matrix_certified: bool,
    pub sign_violations: usize,
    /// Nodes where a mixed-derivative term had to be dropped near the boundary.
    pub mixed_terms_dropped: usize,
    pub boundary: BoundaryKind,
    grid_id: u64,
    h: f64,
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn boundary_rhs(&self, data: &[f64]) -> Vec<f64> {
        self.boundary_map.mul(data)
    }

    /// Right-hand side for boundary data `g ≡ 1`.
    pub fn unit_boundary_rhs(&self) -> Vec<f64> {
        self.boundary_rhs(&vec![1.0; self.boundary_map.ncols()])
    }

    /// Returns `Err(SignPatternViolation)` unless the sign scan passed.
    pub fn require_m_matrix(&self) -> Result<()> {
        if self.m_matrix_certified {
            Ok(())
        } else {
            Err(Error::SignPatternViolation {
                count: self.sign_violations,
            })
        }
    }
}

pub fn assemble(spec: &EllipticSpec, bspec: &BoundarySpec, grid: &Grid) -> Result<DiscreteOperator> {
    let coef = spec.compile()?;
    let robin_b = match bspec {
        BoundarySpec::Robin { b } => Some(Program::compile(b, &Signature::spatial())?),
        _ => None,
    };
    let boundary_coefficient = |x: Point2| -> Result<f64> {
        match &robin_b {
            Some(p) => p.eval(&Env::new(x, &[])).map_err(|e| e.at_node(x)),
            None => Ok(0.0),
        }
    };

    let h = grid.h();
    let h2 = h * h;
    let n = grid.len();
    let mut a = Vec::with_capacity(7 * n);
    let mut r = Vec::new();
    let mut mixed_terms_dropped = 0;
    let dirichlet = matches!(bspec, BoundarySpec::Dirichlet);

    for k in 0..n {
        let x = grid.node(k);
        let s = coef.at(x)?;
        let mut diag = s.c;

        for dir in Dir::ALL {
            let ax = dir.axis();
            let d = s.a[ax][ax];
            match grid.link(k, dir) {
                Link::Node(q) => {
                    diag += d / h2;
                    a.push((k, q, -d / h2));
                }
                Link::Boundary(bi) => {
                    let bp = &grid.boundary_points()[bi];
                    if dirichlet {
                        let w = d / (bp.fraction * h2);
                        diag += w;
                        r.push((k, bi, w));
                    } else {
                        let ne = (bp.normal[ax] * dir.sign()).max(0.0);
                        diag += d * ne * boundary_coefficient(bp.x)? / h;
                        r.push((k, bi, d * ne / h));
                    }
                }
            }
        }

        for ax in 0..2 {
            let v = s.adv[ax];
            if v == 0.0 {
                continue;
            }
            let upwind = match (ax, v > 0.0) {
                (0, true) => Dir::West,
                (0, false) => Dir::East,
                (_, true) => Dir::South,
                (_, false) => Dir::North,
            };
            let speed = v.abs();
            match grid.link(k, upwind) {
                Link::Node(q) => {
                    diag += speed / h;
                    a.push((k, q, -speed / h));
                }
                Link::Boundary(bi) => {
                    let bp = &grid.boundary_points()[bi];
                    if dirichlet {
                        let w = speed / (bp.fraction * h);
                        diag += w;
                        r.push((k, bi, w));
                    } else {
                        let ne = (bp.normal[ax] * upwind.sign()).max(0.0);
                        diag += speed * ne * boundary_coefficient(bp.x)?;
                        r.push((k, bi, speed * ne));
                    }
                }
            }
        }

        let a12 = 0.5 * (s.a[0][1] + s.a[1][0]);
        if a12 != 0.0 {
            let [i, j] = grid.lattice_index(k);
            // a12 > 0 couples (+,+)/(-,-); a12 < 0 couples (+,-)/(-,+).
            let sgn = if a12 > 0.0 { 1 } else { -1 };
            let diagonals = [grid.node_at(i + 1, j + sgn), grid.node_at(i - 1, j - sgn)];
            let axis: Vec<usize> = grid
                .links(k)
                .iter()
                .filter_map(|l| match l {
                    Link::Node(q) => Some(*q),
                    Link::Boundary(_) => None,
                })
                .collect();
            match diagonals {
                [Some(p), Some(q)] if axis.len() == 4 => {
                    let w = a12.abs() / h2;
                    diag -= 2.0 * w;
                    for q in axis {
                        a.push((k, q, w));
                    }
                    a.push((k, p, -w));
                    a.push((k, q, -w));
                }
                _ => mixed_terms_dropped += 1,
            }
        }
        a.push((k, k, diag));
    }

    let matrix = CsrMatrix::from_triplets(n, n, a);
    let boundary_map = CsrMatrix::from_triplets(n, grid.boundary_points().len(), r);
    let sign_violations = sign_scan(&matrix);
    Ok(DiscreteOperator {
        symmetric: matrix.is_symmetric(1e-12),
        m_matrix_certified: sign_violations == 0,
        sign_violations,
        mixed_terms_dropped,
        boundary: bspec.kind(),
        matrix,
        boundary_map,
        grid_id: grid.id(),
        h,
    })
}

/// Counts entries breaking the M-matrix sign pattern: positive diagonal,
/// nonpositive off-diagonals, nonnegative row sums.
fn sign_scan(m: &CsrMatrix) -> usize {
    let tol = 1e-13 * m.max_abs();
    let mut bad = 0;
    for i in 0..m.nrows() {
        let mut row_sum = 0.0;
        let mut has_diag = false;
        for (j, v) in m.row(i) {
            row_sum += v;
            if i == j {
                has_diag = true;
                if v <= 0.0 {
                    bad += 1;
                }
            } else if v > tol {
                bad += 1;
            }
        }
        if !has_diag || row_sum < -tol {
            bad += 1;
        }
    }
    bad
}

pub fn apply_operator(op: &DiscreteOperator, u: &GridFunction) -> Result<GridFunction> {
    if u.grid_id() != op.grid_id || u.len() != op.len() {
        return Err(Error::GridMismatch {
            expected: op.len(),
            found: u.len(),
        });
    }
    Ok(GridFunction::from_parts(op.grid_id, op.matrix.mul(u.values())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec};

    #[test]
    fn ellipticity_constants() {
        let g = build_grid(&DomainSpec::unit_square(), 0.25).unwrap();
        let r = validate_elliptic(&EllipticSpec::laplacian(), &g).unwrap();
        assert_eq!(r.mu0, 1.0);
        assert!(r.reaction_vanishes);
        let r = validate_elliptic(&EllipticSpec::parse([["2", "0"], ["0", "1/2"]], ["0", "0"], "0").unwrap(), &g).unwrap();
        assert_eq!(r.mu0, 0.5);
    }

    #[test]
    fn ellipticity_failures() {
        let g = build_grid(&DomainSpec::unit_square(), 0.25).unwrap();
        let bad = EllipticSpec::parse([["1", "2"], ["2", "1"]], ["0", "0"], "0").unwrap();
        match validate_elliptic(&bad, &g) {
            Err(Error::NotElliptic { min_eigenvalue, .. }) => assert!((min_eigenvalue + 1.0).abs() < 1e-14),
            r => panic!("{r:?}"),
        }
        let asym = EllipticSpec::parse([["1", "0.1"], ["0", "1"]], ["0", "0"], "0").unwrap();
        assert!(matches!(validate_elliptic(&asym, &g), Err(Error::AsymmetricDiffusion { .. })));
        let neg = EllipticSpec::laplacian().with_reaction(Expr::parse("x1 - 0.5", &Signature::spatial()).unwrap());
        assert!(matches!(validate_elliptic(&neg, &g), Err(Error::NegativeReaction { .. })));
    }

    #[test]
    fn robin_coefficient_checks() {
        let g = build_grid(&DomainSpec::unit_disk(), 0.25).unwrap();
        let sig = Signature::spatial();
        let ok = BoundarySpec::Robin { b: Expr::parse("1", &sig).unwrap() };
        assert!(validate_boundary(&ok, &g).is_ok());
        let zero = BoundarySpec::Robin { b: Expr::parse("0", &sig).unwrap() };
        assert!(validate_boundary(&zero, &g).is_err());
        let neg = BoundarySpec::Robin { b: Expr::parse("x1", &sig).unwrap() };
        assert!(validate_boundary(&neg, &g).is_err());
    }

    #[test]
    fn five_point_stencil_on_square() {
        let g = build_grid(&DomainSpec::unit_square(), 0.25).unwrap();
        let op = assemble(&EllipticSpec::laplacian(), &BoundarySpec::Dirichlet, &g).unwrap();
        let h2 = 0.0625;
        for k in 0..g.len() {
            assert_eq!(op.matrix.get(k, k), 4.0 / h2);
            for (j, v) in op.matrix.row(k) {
                if j != k {
                    assert_eq!(v, -1.0 / h2);
                }
            }
        }
        assert!(op.symmetric && op.m_matrix_certified);
    }

    #[test]
    fn disk_dirichlet_is_m_matrix() {
        let g = build_grid(&DomainSpec::unit_disk(), 1.0 / 16.0).unwrap();
        let op = assemble(&EllipticSpec::laplacian(), &BoundarySpec::Dirichlet, &g).unwrap();
        assert!(op.m_matrix_certified);
        assert!(op.symmetric);
    }

    #[test]
    fn neumann_with_reaction_is_symmetric() {
        let g = build_grid(&DomainSpec::unit_disk(), 1.0 / 16.0).unwrap();
        let spec = EllipticSpec::laplacian().with_reaction(Expr::Num(1.0));
        let op = assemble(&spec, &BoundarySpec::Neumann, &g).unwrap();
        assert!(op.symmetric && op.m_matrix_certified);
    }

    #[test]
    fn upwind_keeps_sign_pattern() {
        let g = build_grid(&DomainSpec::unit_disk(), 1.0 / 16.0).unwrap();
        let spec = EllipticSpec::parse([["1", "0"], ["0", "1"]], ["30*x2", "-30*x1"], "0").unwrap();
        let op = assemble(&spec, &BoundarySpec::Dirichlet, &g).unwrap();
        assert!(op.m_matrix_certified);
        assert!(!op.symmetric);
    }

    #[test]
    fn mixed_derivatives() {
        let g = build_grid(&DomainSpec::unit_square(), 0.125).unwrap();
        let mild = EllipticSpec::parse([["1", "0.5"], ["0.5", "1"]], ["0", "0"], "0").unwrap();
        let op = assemble(&mild, &BoundarySpec::Dirichlet, &g).unwrap();
        assert!(op.m_matrix_certified);
        assert!(op.mixed_terms_dropped > 0);
        // |a12| > min(a11, a22) loses the sign pattern.
        let strong = EllipticSpec::parse([["1", "1.5"], ["1.5", "4"]], ["0", "0"], "0").unwrap();
        let op = assemble(&strong, &BoundarySpec::Dirichlet, &g).unwrap();
        assert!(!op.m_matrix_certified);
        assert!(op.require_m_matrix().is_err());
    }

    #[test]
    fn linear_function_in_kernel_away_from_boundary() {
        let g = build_grid(&DomainSpec::unit_square(), 0.125).unwrap();
        let op = assemble(&EllipticSpec::laplacian(), &BoundarySpec::Dirichlet, &g).unwrap();
        let u = GridFunction::from_fn(&g, |p| p[0]);
        let lu = apply_operator(&op, &u).unwrap();
        for k in 0..g.len() {
            if g.links(k).iter().all(|l| matches!(l, Link::Node(_))) {
                assert!(lu.values()[k].abs() < 1e-10);
            }
        }
        assert!(apply_operator(&op, &GridFunction::zeros(&g)).unwrap().sup_norm() == 0.0);
        let other = build_grid(&DomainSpec::unit_square(), 0.125).unwrap();
        assert!(apply_operator(&op, &GridFunction::zeros(&other)).is_err());
    }

    #[test]
    fn exact_on_quadratics_away_from_boundary() {
        let g = build_grid(&DomainSpec::unit_disk(), 1.0 / 32.0).unwrap();
        let spec = EllipticSpec::parse([["2", "0"], ["0", "3"]], ["0", "0"], "0").unwrap();
        let op = assemble(&spec, &BoundarySpec::Dirichlet, &g).unwrap();
        let u = GridFunction::from_fn(&g, |p| 1.0 + p[0] - 2.0 * p[1] + 3.0 * p[0] * p[0] + 0.5 * p[1] * p[1]);
        // L u = -(2·6 + 3·1) = -15
        let lu = apply_operator(&op, &u).unwrap();
        for k in 0..g.len() {
            if g.links(k).iter().all(|l| matches!(l, Link::Node(_))) {
                assert!((lu.values()[k] + 15.0).abs() <= 1e-10 * 15.0 * 1024.0, "{}", lu.values()[k]);
            }
        }
    }
}
