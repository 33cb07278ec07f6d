//! Mechanical checks of the existence conditions (a)–(d) and of the
//! non-existence condition at given parameters `(λ, η)`, and sweeps of
//! both over parameter grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::DiscreteSystem;
use crate::functionals::{
    estimate_h, estimate_m, find_delta, verify_linear_bounds, Constant, ConstantsReport, LinearBoundsReport,
    SamplingConfig, BOUND_RTOL,
};
use crate::geometry::Grid;
use crate::greens::SolutionOperator;
use crate::operator::assemble;

/// User-supplied constants. Every `Some` replaces the corresponding
/// computed value and is marked [`Provenance::User`](crate::functionals::Provenance::User).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstantOverrides {
    pub m: Option<Vec<f64>>,
    pub h: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub xi: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub rho0: Option<f64>,
    /// 0-based.
    pub i0: Option<usize>,
    pub k1_norm: Option<Vec<f64>>,
    pub gamma_norm: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyOptions {
    pub sampling: SamplingConfig,
    /// Also compute `r(K_{i0})` on the grid of spacing `2h` and attach the
    /// Richardson-extrapolated `μ`.
    pub richardson: bool,
    /// Number of rungs `ρ0 = min ρ · 2^{-k}`, `k = 1..=ladder`, tried when
    /// no `ρ0` is given.
    pub ladder: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            sampling: SamplingConfig::default(),
            richardson: true,
            ladder: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    Existence,
    Nonexistence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Every condition holds and every constant is rigorous.
    Pass,
    /// Every condition holds but some constant is a sampled estimate.
    Advisory,
    Fail,
    /// The hypotheses needed to even state the condition were not verified.
    NotApplicable,
}

impl Verdict {
    pub fn holds(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::Advisory)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: String,
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`
    pub margin: f64,
    /// `lhs < rhs` rather than `lhs ≤ rhs`.
    pub strict: bool,
}

impl Condition {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64, strict: bool) -> Self {
        let satisfied = if strict { lhs < rhs } else { lhs <= rhs };
        Condition {
            name: name.into(),
            satisfied,
            lhs,
            rhs,
            margin: rhs - lhs,
            strict,
        }
    }

    /// `lhs ≤ rhs` up to a relative [`BOUND_RTOL`], for comparing a sampled
    /// value against a closed-form majorant of the same quantity.
    fn majorant(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Condition {
            satisfied: lhs <= rhs + BOUND_RTOL * rhs.abs(),
            ..Condition::new(name, lhs, rhs, false)
        }
    }

    /// Conditions that change with `(λ, η)`.
    pub fn is_parametric(&self) -> bool {
        self.name.starts_with('d') || self.name.starts_with("contraction")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuEstimate {
    pub h: f64,
    /// `1 / r(K_{i0})` on the grid.
    pub mu: f64,
    pub eigen_residual: f64,
    /// From `r_h + (r_h − r_{2h}) / 3`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_extrapolated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub digest: String,
    pub h: f64,
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    pub constants: ConstantsReport,
    pub conditions: Vec<Condition>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<MuEstimate>,
    /// `c = max_i (λ_i τ_i ‖K_i(1)‖∞ + η_i ξ_i ‖γ_i‖∞)`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction: Option<f64>,
    pub conclusion: String,
    pub caveats: Vec<String>,
}

impl Certificate {
    /// The condition with the smallest margin among the failing ones, or
    /// among the parameter-dependent ones when every condition holds.
    pub fn binding(&self) -> Option<&Condition> {
        let failing = self.conditions.iter().filter(|c| !c.satisfied);
        let pool: Vec<&Condition> = if failing.clone().next().is_some() {
            failing.collect()
        } else {
            self.conditions.iter().filter(|c| c.is_parametric()).collect()
        };
        pool.into_iter().min_by(|a, b| a.margin.total_cmp(&b.margin))
    }

    /// Recomputes the parameter-dependent left-hand sides from the stored
    /// constants and returns `(name, margin)` for each.
    pub fn replay_margins(&self) -> Vec<(String, f64)> {
        let c = &self.constants;
        let n = self.lambda.len();
        let mut out = Vec::new();
        match self.kind {
            CertificateKind::Existence => {
                if let (Some(i0), Some(delta)) = (c.i0, c.delta) {
                    if let Some(mu) = self.mu {
                        out.push(("d1".to_string(), self.lambda[i0] - mu.mu / delta.value));
                    }
                }
                for i in 0..n {
                    let lhs = existence_lhs(self.lambda[i], self.eta[i], c.m[i].value, c.k1_norm[i].value, c.h[i].value, c.gamma_norm[i].value);
                    out.push((format!("d2[{}]", i + 1), self.rho_rhs(i) - lhs));
                }
            }
            CertificateKind::Nonexistence => {
                let (Some(tau), Some(xi)) = (&c.tau, &c.xi) else {
                    return out;
                };
                for i in 0..n {
                    let lhs = existence_lhs(self.lambda[i], self.eta[i], tau[i].value, c.k1_norm[i].value, xi[i].value, c.gamma_norm[i].value);
                    out.push((format!("contraction[{}]", i + 1), 1.0 - lhs));
                }
            }
        }
        out
    }

    fn rho_rhs(&self, i: usize) -> f64 {
        let name = format!("d2[{}]", i + 1);
        self.conditions.iter().find(|c| c.name == name).map_or(f64::NAN, |c| c.rhs)
    }
}

/// `λ A ‖K(1)‖∞ + η B ‖γ‖∞`, the common shape of both conditions.
pub fn existence_lhs(lambda: f64, eta: f64, a: f64, k1: f64, b: f64, gamma: f64) -> f64 {
    lambda * a * k1 + eta * b * gamma
}

fn norms(sys: &DiscreteSystem, over: &ConstantOverrides) -> Result<(Vec<Constant>, Vec<Constant>)> {
    let n = sys.n();
    let pick = |user: &Option<Vec<f64>>, name: &str, f: &dyn Fn(&SolutionOperator) -> f64| -> Result<Vec<Constant>> {
        match user {
            Some(v) => {
                check_len(v, n, name)?;
                Ok(v.iter().map(|&x| Constant::user(x)).collect())
            }
            None => Ok((0..n).map(|i| Constant::discretized(f(sys.op(i)))).collect()),
        }
    };
    Ok((
        pick(&over.k1_norm, "k1_norm", &|k| k.norm_k1())?,
        pick(&over.gamma_norm, "gamma_norm", &|k| k.gamma_norm())?,
    ))
}

fn check_len(v: &[f64], n: usize, name: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::validation(
            format!("/constants/{name}"),
            format!("expected {n} values, got {}", v.len()),
        ));
    }
    Ok(())
}

fn common_caveats(sys: &DiscreteSystem) -> Vec<String> {
    let mut caveats = vec![format!(
        "operator norms and spectral data are computed on a grid with h = {}",
        sys.grid().h()
    )];
    if sys.grid().domain().has_corners() {
        caveats.push("the domain has corners, so its boundary is not a C^{2+μ} manifold".into());
    }
    if (0..sys.n()).any(|i| sys.op(i).op().mixed_terms_dropped > 0) {
        caveats.push("mixed-derivative terms were dropped at some near-boundary nodes".into());
    }
    if (0..sys.n()).any(|i| !sys.op(i).op().m_matrix_certified) {
        caveats.push("some discrete operator failed the M-matrix sign scan; positivity is not guaranteed".into());
    }
    caveats.push("continuity of the functionals h_i is assumed, not checked".into());
    caveats
}

/// One rung of the `ρ0` ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Rung {
    rho0: f64,
    delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    i0: usize,
    mu: MuEstimate,
    rungs: Vec<Rung>,
    /// Sampled `δ` at the user `ρ0` when a user `δ` is given.
    delta_check: Option<f64>,
}

/// Everything in an existence certificate that does not depend on `(λ, η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceSetup {
    digest: String,
    h: f64,
    rho: Vec<f64>,
    base: ConstantsReport,
    fixed: Vec<Condition>,
    candidates: Vec<Candidate>,
    user_delta: Option<f64>,
    caveats: Vec<String>,
}

fn mu_estimate(sys: &DiscreteSystem, i0: usize, opts: &CertifyOptions, spec_2h: Option<&Grid>) -> Result<MuEstimate> {
    let k = sys.op(i0);
    let s = k.spectral()?;
    let mut est = MuEstimate {
        h: k.h(),
        mu: s.mu,
        eigen_residual: s.residual,
        mu_extrapolated: None,
    };
    if let (true, Some(coarse)) = (opts.richardson, spec_2h) {
        let c = sys.component_spec(i0);
        let op = assemble(&c.elliptic, &c.boundary, coarse)?;
        let kc = SolutionOperator::new(op, *k.config())?;
        let rc = kc.spectral()?.r;
        est.mu_extrapolated = Some(1.0 / (s.r + (s.r - rc) / 3.0));
    }
    Ok(est)
}

impl ExistenceSetup {
    pub fn new(sys: &DiscreteSystem, over: &ConstantOverrides, opts: &CertifyOptions) -> Result<Self> {
        let n = sys.n();
        let rho = sys.rho().to_vec();
        let min_rho = rho.iter().copied().fold(f64::INFINITY, f64::min);
        let grid = sys.grid();
        let mut fixed = Vec::new();
        let mut m = Vec::with_capacity(n);
        let mut hs = Vec::with_capacity(n);
        if let Some(v) = &over.m {
            check_len(v, n, "M")?;
        }
        if let Some(v) = &over.h {
            check_len(v, n, "H")?;
        }

        for i in 0..n {
            let sampled = match estimate_m(sys.nonlinearity(i), &rho, grid, &opts.sampling) {
                Ok(e) => {
                    fixed.push(Condition::new(format!("a[{}]: f >= 0", i + 1), 0.0, e.min, false));
                    Some(e)
                }
                Err(Error::NegativeNonlinearity { value, .. }) => {
                    fixed.push(Condition::new(format!("a[{}]: f >= 0", i + 1), 0.0, value, false));
                    None
                }
                Err(e) => return Err(e),
            };
            let c = match (&over.m, &sampled) {
                (Some(v), s) => {
                    if let Some(s) = s {
                        fixed.push(Condition::majorant(format!("a[{}]: M majorant", i + 1), s.value, v[i]));
                    }
                    Constant::user(v[i])
                }
                (None, Some(s)) => s.constant(),
                (None, None) => Constant::sampled(f64::NAN),
            };
            m.push(c);

            let he = estimate_h(sys.functional(i), &rho, &opts.sampling)?;
            let c = match &over.h {
                Some(v) => {
                    fixed.push(Condition::majorant(format!("c[{}]: H majorant", i + 1), he.value, v[i]));
                    Constant::user(v[i])
                }
                None => he.constant(),
            };
            let finite = c.value.is_finite() && c.value >= 0.0;
            fixed.push(Condition {
                satisfied: finite,
                ..Condition::new(format!("c[{}]: 0 <= H < inf", i + 1), 0.0, c.value, false)
            });
            hs.push(c);
        }
        let (k1_norm, gamma_norm) = norms(sys, over)?;

        let coarse = if opts.richardson {
            Grid::build(grid.domain(), 2.0 * grid.h(), Default::default()).ok()
        } else {
            None
        };
        let indices: Vec<usize> = match over.i0 {
            Some(i) if i < n => vec![i],
            Some(i) => return Err(Error::validation("/constants/i0", format!("component {} does not exist", i + 1))),
            None => (0..n).collect(),
        };
        let mut candidates = Vec::new();
        let mut mu_cache: Vec<(usize, MuEstimate)> = Vec::new();
        for &i0 in &indices {
            let mu = match mu_cache.iter().find(|(j, _)| std::ptr::eq(sys.op(*j), sys.op(i0))) {
                Some((_, mu)) => *mu,
                None => {
                    let mu = mu_estimate(sys, i0, opts, coarse.as_ref())?;
                    mu_cache.push((i0, mu));
                    mu
                }
            };
            let f = sys.nonlinearity(i0);
            let rho0s: Vec<f64> = match over.rho0 {
                Some(r) => vec![r],
                None => (1..=opts.ladder.max(1)).map(|k| min_rho * 0.5f64.powi(k as i32)).collect(),
            };
            let rungs = rho0s
                .iter()
                .map(|&r| Rung {
                    rho0: r,
                    delta: find_delta(f, i0, r, grid, &opts.sampling),
                })
                .collect::<Vec<_>>();
            let delta_check = over.delta.map(|_| {
                let r = over.rho0.unwrap_or(0.5 * min_rho);
                find_delta(f, i0, r, grid, &opts.sampling)
            });
            candidates.push(Candidate {
                i0,
                mu,
                rungs,
                delta_check,
            });
        }

        Ok(ExistenceSetup {
            digest: sys.digest().to_string(),
            h: grid.h(),
            rho,
            base: ConstantsReport {
                m,
                h: hs,
                k1_norm,
                gamma_norm,
                ..Default::default()
            },
            fixed,
            candidates,
            user_delta: over.delta,
            caveats: common_caveats(sys),
        })
    }

    /// Picks `(i0, ρ0, δ)` for the given `λ`: the largest `ρ0` on the ladder
    /// satisfying `μ/δ ≤ λ_{i0}`, preferring candidates that satisfy it.
    fn choose(&self, lambda: &[f64]) -> (&Candidate, Rung) {
        let mut best: Option<(&Candidate, Rung, bool, f64)> = None;
        for c in &self.candidates {
            let (rung, ok) = match self.user_delta {
                Some(d) => (
                    Rung {
                        rho0: c.rungs[0].rho0,
                        delta: d,
                    },
                    c.mu.mu / d <= lambda[c.i0],
                ),
                None => match c.rungs.iter().find(|r| r.delta > 0.0 && c.mu.mu / r.delta <= lambda[c.i0]) {
                    Some(r) => (*r, true),
                    None => (*c.rungs.last().expect("nonempty ladder"), false),
                },
            };
            let margin = lambda[c.i0] - c.mu.mu / rung.delta;
            let better = match &best {
                None => true,
                Some((_, br, bok, bm)) => {
                    (ok && !bok) || (ok == *bok && (rung.rho0 > br.rho0 || (rung.rho0 == br.rho0 && margin > *bm)))
                }
            };
            if better {
                best = Some((c, rung, ok, margin));
            }
        }
        let (c, r, _, _) = best.expect("at least one candidate");
        (c, r)
    }

    pub fn certify(&self, lambda: &[f64], eta: &[f64]) -> Certificate {
        let n = self.rho.len();
        let (cand, rung) = self.choose(lambda);
        let min_rho = self.rho.iter().copied().fold(f64::INFINITY, f64::min);
        let mut conditions = self.fixed.clone();
        let delta = match self.user_delta {
            Some(d) => Constant::user(d),
            None => Constant::sampled(rung.delta),
        };
        conditions.push(Condition::new("b: delta > 0", 0.0, delta.value, true));
        conditions.push(Condition::new("b: 0 < rho0", 0.0, rung.rho0, true));
        conditions.push(Condition::new("b: rho0 < min rho", rung.rho0, min_rho, true));
        if let Some(sampled) = cand.delta_check {
            conditions.push(Condition::new("b: delta verified", delta.value, sampled, false));
        }
        conditions.push(Condition::new("d1", cand.mu.mu / delta.value, lambda[cand.i0], false));
        let c = &self.base;
        for i in 0..n {
            let lhs = existence_lhs(lambda[i], eta[i], c.m[i].value, c.k1_norm[i].value, c.h[i].value, c.gamma_norm[i].value);
            conditions.push(Condition::new(format!("d2[{}]", i + 1), lhs, self.rho[i], false));
        }
        let constants = ConstantsReport {
            delta: Some(delta),
            rho0: Some(rung.rho0),
            i0: Some(cand.i0),
            ..self.base.clone()
        };
        let all = conditions.iter().all(|c| c.satisfied);
        let verdict = match (all, constants.any_sampled()) {
            (false, _) => Verdict::Fail,
            (true, true) => Verdict::Advisory,
            (true, false) => Verdict::Pass,
        };
        let conclusion = if all {
            format!(
                "a nonzero positive solution exists with {} <= ||u|| and ||u_i|| <= rho_i",
                rung.rho0
            )
        } else {
            "the existence conditions do not hold at these parameters".to_string()
        };
        let mut caveats = self.caveats.clone();
        if constants.any_sampled() {
            caveats.push("some constants are sampled estimates, not proven bounds".into());
        }
        Certificate {
            kind: CertificateKind::Existence,
            digest: self.digest.clone(),
            h: self.h,
            lambda: lambda.to_vec(),
            eta: eta.to_vec(),
            constants,
            conditions,
            verdict,
            mu: Some(cand.mu),
            contraction: None,
            conclusion,
            caveats,
        }
    }
}

/// Everything in a non-existence certificate that does not depend on `(λ, η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonexistenceSetup {
    digest: String,
    h: f64,
    base: ConstantsReport,
    bounds: Vec<LinearBoundsReport>,
    caveats: Vec<String>,
}

impl NonexistenceSetup {
    pub fn new(sys: &DiscreteSystem, over: &ConstantOverrides, opts: &CertifyOptions) -> Result<Self> {
        let n = sys.n();
        let tau = over.tau.as_ref().ok_or_else(|| Error::MissingConstant("tau".into()))?;
        let xi = over.xi.as_ref().ok_or_else(|| Error::MissingConstant("xi".into()))?;
        check_len(tau, n, "tau")?;
        check_len(xi, n, "xi")?;
        let rho = sys.rho().to_vec();
        let bounds = (0..n)
            .map(|i| {
                verify_linear_bounds(
                    sys.nonlinearity(i),
                    i,
                    tau[i],
                    sys.functional(i),
                    xi[i],
                    &rho,
                    sys.grid(),
                    &opts.sampling,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let (k1_norm, gamma_norm) = norms(sys, over)?;
        let mut caveats = common_caveats(sys);
        caveats.push(format!(
            "the bounds on f_i and h_i were checked on a lattice of {} samples per axis",
            opts.sampling.samples_per_axis
        ));
        Ok(NonexistenceSetup {
            digest: sys.digest().to_string(),
            h: sys.grid().h(),
            base: ConstantsReport {
                k1_norm,
                gamma_norm,
                tau: Some(tau.iter().map(|&v| Constant::user(v)).collect()),
                xi: Some(xi.iter().map(|&v| Constant::user(v)).collect()),
                ..Default::default()
            },
            bounds,
            caveats,
        })
    }

    pub fn bounds(&self) -> &[LinearBoundsReport] {
        &self.bounds
    }

    pub fn certify(&self, lambda: &[f64], eta: &[f64]) -> Certificate {
        let c = &self.base;
        let tau = c.tau.as_ref().expect("set in new");
        let xi = c.xi.as_ref().expect("set in new");
        let mut conditions = Vec::new();
        for b in &self.bounds {
            conditions.push(Condition {
                satisfied: b.verified,
                ..Condition::new(format!("bounds[{}]", b.component + 1), 0.0, b.f_margin.min(b.h_margin), false)
            });
        }
        let mut contraction = 0.0f64;
        for i in 0..lambda.len() {
            let lhs = existence_lhs(lambda[i], eta[i], tau[i].value, c.k1_norm[i].value, xi[i].value, c.gamma_norm[i].value);
            contraction = contraction.max(lhs);
            conditions.push(Condition::new(format!("contraction[{}]", i + 1), lhs, 1.0, true));
        }
        let verified = self.bounds.iter().all(|b| b.verified);
        let all = conditions.iter().all(|c| c.satisfied);
        let verdict = match (verified, all) {
            (false, _) => Verdict::NotApplicable,
            (true, false) => Verdict::Fail,
            (true, true) if c.any_sampled() => Verdict::Advisory,
            (true, true) => Verdict::Pass,
        };
        let conclusion = match verdict {
            Verdict::Pass | Verdict::Advisory => "at most the zero solution in P_I".to_string(),
            Verdict::Fail => "the non-existence condition does not hold at these parameters".to_string(),
            Verdict::NotApplicable => "the linear bounds on f_i and h_i could not be verified".to_string(),
        };
        Certificate {
            kind: CertificateKind::Nonexistence,
            digest: self.digest.clone(),
            h: self.h,
            lambda: lambda.to_vec(),
            eta: eta.to_vec(),
            constants: c.clone(),
            conditions,
            verdict,
            mu: None,
            contraction: Some(contraction),
            conclusion,
            caveats: self.caveats.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Setup {
    Existence(ExistenceSetup),
    Nonexistence(NonexistenceSetup),
}

impl Setup {
    pub fn new(kind: CertificateKind, sys: &DiscreteSystem, over: &ConstantOverrides, opts: &CertifyOptions) -> Result<Self> {
        Ok(match kind {
            CertificateKind::Existence => Setup::Existence(ExistenceSetup::new(sys, over, opts)?),
            CertificateKind::Nonexistence => Setup::Nonexistence(NonexistenceSetup::new(sys, over, opts)?),
        })
    }

    pub fn certify(&self, lambda: &[f64], eta: &[f64]) -> Certificate {
        match self {
            Setup::Existence(s) => s.certify(lambda, eta),
            Setup::Nonexistence(s) => s.certify(lambda, eta),
        }
    }
}

pub fn certify_existence(sys: &DiscreteSystem, over: &ConstantOverrides, opts: &CertifyOptions) -> Result<Certificate> {
    Ok(ExistenceSetup::new(sys, over, opts)?.certify(sys.lambda(), sys.eta()))
}

pub fn certify_nonexistence(sys: &DiscreteSystem, over: &ConstantOverrides, opts: &CertifyOptions) -> Result<Certificate> {
    Ok(NonexistenceSetup::new(sys, over, opts)?.certify(sys.lambda(), sys.eta()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Lambda,
    Eta,
}

/// One swept parameter: `λ_i` or `η_i` over `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub parameter: Parameter,
    /// 0-based.
    pub component: usize,
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// Parses an axis named like `lambda2` or `eta1` (1-based component)
    /// over the range `a:b:step`.
    pub fn parse(name: &str, range: &str, n: usize) -> Result<SweepAxis> {
        let pointer = format!("/{name}");
        let (parameter, digits) = if let Some(d) = name.strip_prefix("lambda") {
            (Parameter::Lambda, d)
        } else if let Some(d) = name.strip_prefix("eta") {
            (Parameter::Eta, d)
        } else {
            return Err(Error::validation(pointer, "expected lambdaK or etaK"));
        };
        let k: usize = digits
            .parse()
            .map_err(|_| Error::validation(&pointer, "expected lambdaK or etaK"))?;
        if k == 0 || k > n {
            return Err(Error::validation(pointer, format!("component must lie in 1..={n}")));
        }
        let values = parse_range(range).ok_or_else(|| {
            Error::validation(&pointer, format!("expected a:b:step with step > 0 and a <= b, got `{range}`"))
        })?;
        Ok(SweepAxis {
            parameter,
            component: k - 1,
            values,
        })
    }

    pub fn name(&self) -> String {
        let p = match self.parameter {
            Parameter::Lambda => "lambda",
            Parameter::Eta => "eta",
        };
        format!("{p}{}", self.component + 1)
    }
}

/// `a:b:step` inclusive of `b` up to rounding.
pub fn parse_range(text: &str) -> Option<Vec<f64>> {
    let parts: Vec<f64> = text.split(':').map(|s| s.trim().parse().ok()).collect::<Option<_>>()?;
    let [a, b, step] = parts[..] else {
        return None;
    };
    if !(step > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
        return None;
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    Some((0..count).map(|k| a + k as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionRow {
    pub values: Vec<f64>,
    pub verdict: Verdict,
    pub binding: String,
}

/// Evaluates one certificate per point of the tensor grid spanned by `axes`,
/// with the other parameters taken from `lambda`, `eta`. Rows are ordered with
/// the first axis varying slowest.
pub fn sweep_region(setup: &Setup, lambda: &[f64], eta: &[f64], axes: &[SweepAxis]) -> Vec<RegionRow> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Vec::new();
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let point = |mut k: usize| -> RegionRow {
        let mut idx = vec![0; axes.len()];
        for (d, a) in axes.iter().enumerate().rev() {
            idx[d] = k % a.values.len();
            k /= a.values.len();
        }
        let (mut l, mut e) = (lambda.to_vec(), eta.to_vec());
        let mut values = Vec::with_capacity(axes.len());
        for (a, &j) in axes.iter().zip(&idx) {
            let v = a.values[j];
            values.push(v);
            match a.parameter {
                Parameter::Lambda => l[a.component] = v,
                Parameter::Eta => e[a.component] = v,
            }
        }
        let cert = setup.certify(&l, &e);
        RegionRow {
            values,
            verdict: cert.verdict,
            binding: cert.binding().map(|c| c.name.clone()).unwrap_or_default(),
        }
    };
    run_indexed(total, point)
}

#[cfg(feature = "parallel")]
fn run_indexed<T: Send>(total: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    let threads = std::env::var("CONECERT_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    match threads.and_then(|t| rayon::ThreadPoolBuilder::new().num_threads(t).build().ok()) {
        Some(pool) => pool.install(|| (0..total).into_par_iter().map(&f).collect()),
        None => (0..total).into_par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_indexed<T>(total: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..total).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_strictness() {
        assert!(Condition::new("x", 1.0, 1.0, false).satisfied);
        assert!(!Condition::new("x", 1.0, 1.0, true).satisfied);
        assert_eq!(Condition::new("x", 0.25, 1.0, true).margin, 0.75);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:1:0.25"), Some(vec![0.0, 0.25, 0.5, 0.75, 1.0]));
        assert_eq!(parse_range("0:2:0.02").unwrap().len(), 101);
        assert_eq!(parse_range("1:0:0.1"), None);
        assert_eq!(parse_range("0:1"), None);
        assert_eq!(parse_range("0:1:0"), None);
    }

    #[test]
    fn axis_names() {
        let a = SweepAxis::parse("eta2", "0:1:0.5", 2).unwrap();
        assert_eq!((a.parameter, a.component, a.values.len()), (Parameter::Eta, 1, 3));
        assert_eq!(a.name(), "eta2");
        assert!(SweepAxis::parse("eta3", "0:1:0.5", 2).is_err());
        assert!(SweepAxis::parse("lambda0", "0:1:0.5", 2).is_err());
        assert!(SweepAxis::parse("mu1", "0:1:0.5", 2).is_err());
        assert!(SweepAxis::parse("lambda1", "0:1", 2).is_err());
    }
}
