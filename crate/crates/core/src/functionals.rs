//! Nemytskii operators `F_i(u)(x) = f_i(x, u(x))`, boundary functionals
//! `h_i[u]`, and sampled estimates of the constants `M_i`, `H_i`, `δ`,
//! `τ_i`, `ξ_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{is_identifier, is_reserved, Env, Expr, Program, Signature};
use crate::field::GridFunction;
use crate::geometry::{Grid, Point2};

/// Relative slack allowed when a sampled inequality holds with equality.
pub const BOUND_RTOL: f64 = 1e-12;

/// Where a constant came from. Only `User` and `Exact` are rigorous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Supplied as a majorant in the problem file.
    User,
    /// Maximum/minimum over a finite sample lattice.
    Sampled,
    /// Attained exactly by the sampling (e.g. constant nonlinearity).
    Exact,
    /// Computed from the discrete operators.
    Discretized,
}

impl Provenance {
    pub fn is_sampled(self) -> bool {
        self == Provenance::Sampled
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub value: f64,
    pub provenance: Provenance,
}

impl Constant {
    pub fn user(value: f64) -> Self {
        Constant {
            value,
            provenance: Provenance::User,
        }
    }

    pub fn sampled(value: f64) -> Self {
        Constant {
            value,
            provenance: Provenance::Sampled,
        }
    }

    pub fn discretized(value: f64) -> Self {
        Constant {
            value,
            provenance: Provenance::Discretized,
        }
    }
}

/// Theorem constants, one entry per component where indexed.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ConstantsReport {
    #[serde(rename = "M")]
    pub m: Vec<Constant>,
    #[serde(rename = "H")]
    pub h: Vec<Constant>,
    pub k1_norm: Vec<Constant>,
    pub gamma_norm: Vec<Constant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<Constant>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<Constant>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Constant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    /// 0-based.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i0: Option<usize>,
}

impl ConstantsReport {
    pub fn any_sampled(&self) -> bool {
        self.m
            .iter()
            .chain(&self.h)
            .chain(&self.k1_norm)
            .chain(&self.gamma_norm)
            .chain(self.tau.iter().flatten())
            .chain(self.xi.iter().flatten())
            .chain(&self.delta)
            .any(|c| c.provenance.is_sampled())
    }
}

/// Integral weights down to `-WEIGHT_SLACK` are read as zero, so weights such
/// as `1 - x1^2 - x2^2` survive rounding on the boundary.
const WEIGHT_SLACK: f64 = 1e-12;

/// Sample-lattice resolution for the constant estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub samples_per_axis: usize,
    /// Upper bound on the number of `u`-samples; the per-axis count is
    /// reduced for large `n` to respect it.
    pub max_samples: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            samples_per_axis: 33,
            max_samples: 1 << 20,
        }
    }
}

impl SamplingConfig {
    pub fn with_samples(samples_per_axis: usize) -> Self {
        SamplingConfig {
            samples_per_axis,
            ..Default::default()
        }
    }

    fn per_axis(&self, n: usize) -> usize {
        let mut s = self.samples_per_axis.max(2);
        while s > 2 && (s as f64).powi(n as i32) > self.max_samples as f64 {
            s -= 1;
        }
        s
    }
}

/// Tensor lattice of `s` equispaced points per axis on `Π [0, ρ_k]`,
/// endpoints included.
fn for_each_box_point(rho: &[f64], s: usize, mut f: impl FnMut(&[f64]) -> Result<()>) -> Result<()> {
    let n = rho.len();
    let mut idx = vec![0usize; n];
    let mut u = vec![0.0; n];
    loop {
        for k in 0..n {
            u[k] = rho[k] * idx[k] as f64 / (s - 1) as f64;
        }
        f(&u)?;
        let mut k = 0;
        loop {
            if k == n {
                return Ok(());
            }
            idx[k] += 1;
            if idx[k] < s {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// A compiled nonlinearity `f(x, u)` of an `n`-component system.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    expr: Expr,
    prog: Program,
    n: usize,
    spatial: bool,
}

impl Nonlinearity {
    pub fn new(expr: Expr, n: usize) -> Result<Self> {
        let prog = Program::compile(&expr, &Signature::nonlinearity(n))?;
        Ok(Nonlinearity {
            spatial: expr.depends_on_space(),
            expr,
            prog,
            n,
        })
    }

    pub fn parse(text: &str, n: usize) -> Result<Self> {
        Self::new(Expr::parse(text, &Signature::nonlinearity(n))?, n)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn components(&self) -> usize {
        self.n
    }

    pub fn depends_on_space(&self) -> bool {
        self.spatial
    }

    pub fn eval(&self, x: Point2, u: &[f64]) -> Result<f64> {
        self.prog.eval(&Env::new(x, u)).map_err(|e| e.at_node(x))
    }

    /// Spatial sample points: all nodes, or a single one if `f` ignores `x`.
    fn x_samples<'g>(&self, grid: &'g Grid) -> &'g [Point2] {
        if self.spatial {
            grid.nodes()
        } else {
            &grid.nodes()[..1.min(grid.len())]
        }
    }
}

/// `F(u)(node) = f(x_node, u(node))`.
pub fn nemytskii(f: &Nonlinearity, u: &[GridFunction], grid: &Grid) -> Result<GridFunction> {
    if u.len() != f.n {
        return Err(Error::GridMismatch {
            expected: f.n,
            found: u.len(),
        });
    }
    for c in u {
        c.check(grid)?;
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut at = vec![0.0; f.n];
    let mut stack = Vec::new();
    for (k, &x) in grid.nodes().iter().enumerate() {
        for (a, c) in at.iter_mut().zip(u) {
            *a = c.values()[k];
        }
        out.push(f.prog.eval_with(&Env::new(x, &at), &mut stack).map_err(|e| e.at_node(x))?);
    }
    GridFunction::new(grid, out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    /// `u_k(ω)`
    Point { component: usize, point: Point2 },
    /// `∫_Ω α̂(x) u_k(x) dx`
    Integral { component: usize, weight: Expr },
}

impl Primitive {
    pub fn component(&self) -> usize {
        match self {
            Primitive::Point { component, .. } | Primitive::Integral { component, .. } => *component,
        }
    }
}

/// `h[u] = ĥ(p_1[u], …, p_m[u])` with linear primitives `p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSpec {
    pub primitives: Vec<(String, Primitive)>,
    pub combiner: Expr,
}

impl FunctionalSpec {
    pub fn new(primitives: Vec<(String, Primitive)>, combiner: &str) -> Result<Self> {
        for (i, (name, _)) in primitives.iter().enumerate() {
            if !is_identifier(name) || is_reserved(name) {
                return Err(Error::InvalidFunctional(format!("`{name}` cannot name a primitive")));
            }
            if primitives[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::InvalidFunctional(format!("duplicate primitive `{name}`")));
            }
        }
        let sig = Signature::scalars(primitives.iter().map(|(n, _)| n.clone()));
        let combiner = Expr::parse(combiner, &sig)?;
        Ok(FunctionalSpec { primitives, combiner })
    }

    /// `h ≡ 0`
    pub fn zero() -> Self {
        FunctionalSpec {
            primitives: Vec::new(),
            combiner: Expr::Num(0.0),
        }
    }

    pub fn signature(&self) -> Signature {
        Signature::scalars(self.primitives.iter().map(|(n, _)| n.clone()))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Stencil {
    component: usize,
    terms: Vec<(usize, f64)>,
    /// Value on the field `u_k ≡ 1`.
    total: f64,
}

impl Stencil {
    fn new(component: usize, terms: Vec<(usize, f64)>) -> Self {
        let total = terms.iter().map(|t| t.1).sum();
        Stencil {
            component,
            terms,
            total,
        }
    }

    fn apply(&self, u: &GridFunction) -> f64 {
        self.terms.iter().map(|&(k, w)| w * u.values()[k]).sum()
    }
}

/// A [`FunctionalSpec`] bound to a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    spec: FunctionalSpec,
    stencils: Vec<Stencil>,
    combiner: Program,
    n: usize,
    grid_id: u64,
}

/// Value assigned to lattice point `(i, j)` when it is not an interior node:
/// mean of interior axis neighbors, else of diagonal ones, else the nearest node.
fn extended_point(grid: &Grid, i: i64, j: i64) -> Vec<(usize, f64)> {
    if let Some(k) = grid.node_at(i, j) {
        return vec![(k, 1.0)];
    }
    for ring in [
        [(1, 0), (-1, 0), (0, 1), (0, -1)],
        [(1, 1), (-1, 1), (1, -1), (-1, -1)],
    ] {
        let found: Vec<usize> = ring.iter().filter_map(|(a, b)| grid.node_at(i + a, j + b)).collect();
        if !found.is_empty() {
            let w = 1.0 / found.len() as f64;
            return found.into_iter().map(|k| (k, w)).collect();
        }
    }
    let p = grid.lattice_point(i, j);
    let nearest = (0..grid.len())
        .min_by(|&a, &b| {
            let d = |k: usize| {
                let q = grid.node(k);
                (q[0] - p[0]).hypot(q[1] - p[1])
            };
            d(a).total_cmp(&d(b))
        })
        .expect("grid has nodes");
    vec![(nearest, 1.0)]
}

fn point_stencil(grid: &Grid, p: Point2) -> Vec<(usize, f64)> {
    let [i, j] = grid.cell_of(p);
    let o = grid.lattice_point(i, j);
    let tx = ((p[0] - o[0]) / grid.h()).clamp(0.0, 1.0);
    let ty = ((p[1] - o[1]) / grid.h()).clamp(0.0, 1.0);
    let mut terms: Vec<(usize, f64)> = Vec::new();
    for (di, dj, w) in [
        (0, 0, (1.0 - tx) * (1.0 - ty)),
        (1, 0, tx * (1.0 - ty)),
        (0, 1, (1.0 - tx) * ty),
        (1, 1, tx * ty),
    ] {
        if w == 0.0 {
            continue;
        }
        for (k, v) in extended_point(grid, i + di, j + dj) {
            match terms.iter_mut().find(|t| t.0 == k) {
                Some(t) => t.1 += w * v,
                None => terms.push((k, w * v)),
            }
        }
    }
    terms
}

impl Functional {
    /// Binds `spec` to `grid` for an `n`-component system, checking that
    /// points lie in `Ω`, weights are nonnegative and the combiner is
    /// nonnegative on sampled nonnegative inputs.
    pub fn bind(spec: &FunctionalSpec, grid: &Grid, n: usize) -> Result<Self> {
        let mut stencils = Vec::with_capacity(spec.primitives.len());
        for (name, prim) in &spec.primitives {
            if prim.component() >= n {
                return Err(Error::InvalidFunctional(format!(
                    "primitive `{name}` refers to component {} of {n}",
                    prim.component() + 1
                )));
            }
            let terms = match prim {
                Primitive::Point { point, .. } => {
                    if !grid.domain().contains(*point) {
                        return Err(Error::PointOutsideDomain(point[0], point[1]));
                    }
                    point_stencil(grid, *point)
                }
                Primitive::Integral { weight, .. } => {
                    let prog = Program::compile(weight, &Signature::spatial())?;
                    for bp in grid.boundary_points() {
                        let v = prog.eval(&Env::new(bp.x, &[])).map_err(|e| e.at_node(bp.x))?;
                        if v < -WEIGHT_SLACK {
                            return Err(Error::InvalidFunctional(format!(
                                "weight of `{name}` is negative ({v}) at ({}, {})",
                                bp.x[0], bp.x[1]
                            )));
                        }
                    }
                    let mut terms = Vec::with_capacity(grid.len());
                    for (k, (&x, &w)) in grid.nodes().iter().zip(grid.cell_weights()).enumerate() {
                        let a = prog.eval(&Env::new(x, &[])).map_err(|e| e.at_node(x))?;
                        if a < -WEIGHT_SLACK {
                            return Err(Error::InvalidFunctional(format!(
                                "weight of `{name}` is negative ({a}) at ({}, {})",
                                x[0], x[1]
                            )));
                        }
                        let a = a.max(0.0);
                        if a * w != 0.0 {
                            terms.push((k, a * w));
                        }
                    }
                    terms
                }
            };
            stencils.push(Stencil::new(prim.component(), terms));
        }
        let combiner = Program::compile(&spec.combiner, &spec.signature())?;
        let f = Functional {
            spec: spec.clone(),
            stencils,
            combiner,
            n,
            grid_id: grid.id(),
        };
        f.check_combiner_sign()?;
        Ok(f)
    }

    fn check_combiner_sign(&self) -> Result<()> {
        const LEVELS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
        let m = self.stencils.len();
        if m > 6 {
            return Ok(());
        }
        let mut scratch = Vec::new();
        let rho = vec![1.0; m];
        for_each_box_point(&rho, LEVELS.len(), |t| {
            let p: Vec<f64> = t.iter().map(|&v| LEVELS[(v * 3.0).round() as usize]).collect();
            match self.combiner.eval_with(&Env::scalars(&p), &mut scratch) {
                Ok(v) if v < 0.0 => Err(Error::InvalidFunctional(format!(
                    "combiner `{}` is negative ({v}) at nonnegative inputs {p:?}",
                    self.spec.combiner
                ))),
                _ => Ok(()),
            }
        })
    }

    pub fn spec(&self) -> &FunctionalSpec {
        &self.spec
    }

    /// Values of the linear primitives on `u`.
    pub fn primitive_values(&self, u: &[GridFunction]) -> Result<Vec<f64>> {
        if u.len() != self.n {
            return Err(Error::GridMismatch {
                expected: self.n,
                found: u.len(),
            });
        }
        for c in u {
            if c.grid_id() != self.grid_id {
                return Err(Error::GridMismatch {
                    expected: self.stencils.len(),
                    found: c.len(),
                });
            }
        }
        Ok(self.stencils.iter().map(|s| s.apply(&u[s.component])).collect())
    }

    fn combine(&self, p: &[f64]) -> Result<f64> {
        let v = self.combiner.eval(&Env::scalars(p))?;
        if v < 0.0 {
            return Err(Error::NegativeFunctionalValue(v));
        }
        Ok(v)
    }

    pub fn eval(&self, u: &[GridFunction]) -> Result<f64> {
        self.combine(&self.primitive_values(u)?)
    }

    /// `h[u]` for the constant field `u ≡ c`.
    pub fn eval_constant(&self, c: &[f64]) -> Result<f64> {
        let p: Vec<f64> = self.stencils.iter().map(|s| s.total * c[s.component]).collect();
        self.combine(&p)
    }
}

pub fn eval_functional(h: &Functional, u: &[GridFunction]) -> Result<f64> {
    h.eval(u)
}

/// Sampled value with the sample at which it was attained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    /// Smallest sampled value.
    pub min: f64,
    pub provenance: Provenance,
    pub x: Point2,
    pub u: Vec<f64>,
    pub samples: usize,
}

impl Estimate {
    pub fn constant(&self) -> Constant {
        Constant {
            value: self.value,
            provenance: self.provenance,
        }
    }
}

/// `M = max f` over the nodes and the sample lattice of `Π [0, ρ_k]`.
/// Fails with [`Error::NegativeNonlinearity`] at the first negative sample.
pub fn estimate_m(f: &Nonlinearity, rho: &[f64], grid: &Grid, cfg: &SamplingConfig) -> Result<Estimate> {
    let s = cfg.per_axis(rho.len());
    let mut best = Estimate {
        value: f64::NEG_INFINITY,
        min: f64::INFINITY,
        provenance: Provenance::Sampled,
        x: [0.0, 0.0],
        u: vec![0.0; rho.len()],
        samples: 0,
    };
    let mut stack = Vec::new();
    for &x in f.x_samples(grid) {
        for_each_box_point(rho, s, |u| {
            let v = f.prog.eval_with(&Env::new(x, u), &mut stack).map_err(|e| e.at_node(x))?;
            if v < 0.0 {
                return Err(Error::NegativeNonlinearity {
                    value: v,
                    x: x[0],
                    y: x[1],
                    u: u.to_vec(),
                });
            }
            best.samples += 1;
            best.min = best.min.min(v);
            if v > best.value {
                best.value = v;
                best.x = x;
                best.u = u.to_vec();
            }
            Ok(())
        })?;
    }
    if f.expr.is_closed() {
        best.provenance = Provenance::Exact;
    }
    Ok(best)
}

/// `H ≈ sup h[u]` over constant fields `u ≡ c`, `c` on the sample lattice.
pub fn estimate_h(h: &Functional, rho: &[f64], cfg: &SamplingConfig) -> Result<Estimate> {
    let s = cfg.per_axis(rho.len());
    let mut best = Estimate {
        value: f64::NEG_INFINITY,
        min: f64::INFINITY,
        provenance: Provenance::Sampled,
        x: [0.0, 0.0],
        u: vec![0.0; rho.len()],
        samples: 0,
    };
    for_each_box_point(rho, s, |c| {
        let v = h.eval_constant(c)?;
        best.samples += 1;
        best.min = best.min.min(v);
        if v > best.value {
            best.value = v;
            best.u = c.to_vec();
        }
        Ok(())
    })?;
    if h.spec.combiner.is_closed() {
        best.provenance = Provenance::Exact;
    }
    Ok(best)
}

/// `δ = min f(x, u) / u_{i0}` over samples of `Π [0, ρ0]` with `u_{i0} > 0`;
/// `0` when the bound is unusable.
pub fn find_delta(f: &Nonlinearity, i0: usize, rho0: f64, grid: &Grid, cfg: &SamplingConfig) -> f64 {
    let n = f.n;
    let s = cfg.per_axis(n);
    let rho = vec![rho0; n];
    let mut delta = f64::INFINITY;
    let mut stack = Vec::new();
    for &x in f.x_samples(grid) {
        let r = for_each_box_point(&rho, s, |u| {
            if u[i0] <= 0.0 {
                return Ok(());
            }
            let v = f.prog.eval_with(&Env::new(x, u), &mut stack)?;
            let q = v / u[i0];
            if v < 0.0 || !(q > 0.0) {
                return Err(Error::ZeroInput);
            }
            delta = delta.min(q);
            Ok(())
        });
        if r.is_err() {
            return 0.0;
        }
    }
    if delta.is_finite() {
        delta
    } else {
        0.0
    }
}

/// Sampled check of `0 ≤ f_i(x, u) ≤ τ u_i` and `h_i[u] ≤ ξ ‖u‖`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearBoundsReport {
    pub component: usize,
    pub verified: bool,
    /// `min (τ u_i − f)` over the samples.
    pub f_margin: f64,
    /// `min (ξ ‖u‖ − h[u])` over the constant-field samples.
    pub h_margin: f64,
    pub violations: usize,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

impl LinearBoundsReport {
    pub fn into_result(self) -> Result<Self> {
        if self.verified {
            Ok(self)
        } else {
            Err(Error::BoundViolated(format!(
                "component {}: {} violation(s), witness u = {:?}",
                self.component + 1,
                self.violations,
                self.witness.unwrap_or_default()
            )))
        }
    }
}

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs - rhs > BOUND_RTOL * rhs.abs().max(1.0)
}

#[allow(clippy::too_many_arguments)]
pub fn verify_linear_bounds(
    f: &Nonlinearity,
    i: usize,
    tau: f64,
    h: &Functional,
    xi: f64,
    rho: &[f64],
    grid: &Grid,
    cfg: &SamplingConfig,
) -> Result<LinearBoundsReport> {
    let s = cfg.per_axis(rho.len());
    let mut rep = LinearBoundsReport {
        component: i,
        verified: true,
        f_margin: f64::INFINITY,
        h_margin: f64::INFINITY,
        violations: 0,
        samples: 0,
        witness: None,
    };
    let mut stack = Vec::new();
    for &x in f.x_samples(grid) {
        for_each_box_point(rho, s, |u| {
            let v = f.prog.eval_with(&Env::new(x, u), &mut stack).map_err(|e| e.at_node(x))?;
            let bound = tau * u[i];
            rep.samples += 1;
            rep.f_margin = rep.f_margin.min(bound - v);
            if v < 0.0 || exceeds(v, bound) {
                rep.violations += 1;
                rep.witness.get_or_insert_with(|| u.to_vec());
            }
            Ok(())
        })?;
    }
    for_each_box_point(rho, s, |c| {
        let v = h.eval_constant(c)?;
        let bound = xi * c.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        rep.samples += 1;
        rep.h_margin = rep.h_margin.min(bound - v);
        if exceeds(v, bound) {
            rep.violations += 1;
            rep.witness.get_or_insert_with(|| c.to_vec());
        }
        Ok(())
    })?;
    rep.verified = rep.violations == 0;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec};
    use std::f64::consts::PI;

    fn disk(h: f64) -> Grid {
        build_grid(&DomainSpec::unit_disk(), h).unwrap()
    }

    fn example1_h(grid: &Grid) -> (Functional, Functional) {
        let origin = [0.0, 0.0];
        let h1 = FunctionalSpec::new(
            vec![
                ("a".into(), Primitive::Point { component: 0, point: origin }),
                ("b".into(), Primitive::Point { component: 1, point: origin }),
            ],
            "a^2 + b^0.5",
        )
        .unwrap();
        let h2 = FunctionalSpec::new(
            vec![
                ("a".into(), Primitive::Point { component: 0, point: origin }),
                ("q".into(), Primitive::Integral { component: 1, weight: Expr::Num(1.0) }),
            ],
            "a^0.25 + q^2",
        )
        .unwrap();
        (Functional::bind(&h1, grid, 2).unwrap(), Functional::bind(&h2, grid, 2).unwrap())
    }

    #[test]
    fn constant_fields() {
        let g = disk(1.0 / 32.0);
        let (h1, h2) = example1_h(&g);
        let u = [GridFunction::constant(&g, 0.3), GridFunction::constant(&g, 0.49)];
        assert!((h1.eval(&u).unwrap() - (0.09 + 0.7)).abs() < 1e-12);
        let u = [GridFunction::zeros(&g), GridFunction::constant(&g, 0.5)];
        let want = (0.5 * PI).powi(2);
        assert!((h2.eval(&u).unwrap() - want).abs() < 1e-6 * want);
        assert!((h2.eval_constant(&[0.0, 0.5]).unwrap() - h2.eval(&u).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn point_outside_rejected() {
        let g = disk(0.25);
        let spec =
            FunctionalSpec::new(vec![("p".into(), Primitive::Point { component: 0, point: [1.0, 0.0] })], "p").unwrap();
        assert_eq!(Functional::bind(&spec, &g, 1), Err(Error::PointOutsideDomain(1.0, 0.0)));
    }

    #[test]
    fn negative_combiner_rejected() {
        let g = disk(0.25);
        let spec =
            FunctionalSpec::new(vec![("p".into(), Primitive::Point { component: 0, point: [0.0, 0.0] })], "p - 1")
                .unwrap();
        assert!(matches!(Functional::bind(&spec, &g, 1), Err(Error::InvalidFunctional(_))));
        assert!(FunctionalSpec::new(vec![("sin".into(), Primitive::Point { component: 0, point: [0.0, 0.0] })], "1")
            .is_err());
    }

    #[test]
    fn interpolation_between_nodes() {
        let g = build_grid(&DomainSpec::unit_square(), 0.125).unwrap();
        let spec =
            FunctionalSpec::new(vec![("p".into(), Primitive::Point { component: 0, point: [0.3, 0.55] })], "p").unwrap();
        let h = Functional::bind(&spec, &g, 1).unwrap();
        let u = GridFunction::from_fn(&g, |p| 2.0 * p[0] - p[1]);
        assert!((h.eval(&[u]).unwrap() - (0.6 - 0.55)).abs() < 1e-12);
    }

    #[test]
    fn example1_m() {
        let g = disk(0.25);
        let rho = [15.0 * PI / 64.0; 2];
        let f1 = Nonlinearity::parse("sqrt(max(u1,u2)) + tan(max(u1,u2))", 2).unwrap();
        let m1 = estimate_m(&f1, &rho, &g, &SamplingConfig::default()).unwrap();
        assert!((m1.value - 1.7644327).abs() < 1e-6);
        assert_eq!(m1.samples, 33 * 33);
        let f2 = Nonlinearity::parse("(1 - sin(u2)) * max(u1,u2)^2", 2).unwrap();
        let m2 = estimate_m(&f2, &rho, &g, &SamplingConfig::default()).unwrap();
        assert!((m2.value - rho[0] * rho[0]).abs() < 1e-15);
        assert_eq!(m2.u, vec![rho[0], 0.0]);
    }

    #[test]
    fn negative_nonlinearity_has_witness() {
        let g = disk(0.25);
        let f = Nonlinearity::parse("u1 - 0.5", 1).unwrap();
        assert!(matches!(
            estimate_m(&f, &[1.0], &g, &SamplingConfig::default()),
            Err(Error::NegativeNonlinearity { .. })
        ));
    }

    #[test]
    fn delta_examples() {
        let g = disk(0.25);
        let cfg = SamplingConfig::default();
        assert_eq!(find_delta(&Nonlinearity::parse("u1", 2).unwrap(), 0, 0.3, &g, &cfg), 1.0);
        let f1 = Nonlinearity::parse("sqrt(max(u1,u2)) + tan(max(u1,u2))", 2).unwrap();
        assert!(find_delta(&f1, 0, 0.25, &g, &cfg) >= 1.0);
        assert_eq!(find_delta(&Nonlinearity::parse("u1 - u2", 2).unwrap(), 0, 0.3, &g, &cfg), 0.0);
    }

    #[test]
    fn example2_linear_bounds() {
        let g = disk(0.25);
        let rho = [PI / 4.0, PI / 2.0];
        let o = [0.0, 0.0];
        let spec = FunctionalSpec::new(
            vec![
                ("a".into(), Primitive::Point { component: 0, point: o }),
                ("b".into(), Primitive::Point { component: 1, point: o }),
            ],
            "a + b^2",
        )
        .unwrap();
        let h1 = Functional::bind(&spec, &g, 2).unwrap();
        let f1 = Nonlinearity::parse("u1^2 * sin(u2)", 2).unwrap();
        let cfg = SamplingConfig::with_samples(65);
        let r = verify_linear_bounds(&f1, 0, PI / 4.0, &h1, PI / 2.0 + 1.0, &rho, &g, &cfg).unwrap();
        assert!(r.verified, "{r:?}");
        let r = verify_linear_bounds(&f1, 0, 0.7, &h1, PI / 2.0 + 1.0, &rho, &g, &cfg).unwrap();
        assert!(!r.verified);
        assert!(matches!(r.into_result(), Err(Error::BoundViolated(_))));
    }
}
