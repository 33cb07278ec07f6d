//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes a problem file as JSON text and returns a JSON
//! string; errors are thrown as JavaScript exceptions carrying the message.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use conecert::certificates::{sweep_region, CertificateKind, Setup, SweepAxis, Verdict};
use conecert::fixedpoint::{multistart, DiscreteSystem, Status};
use conecert::problem::{bundled, Problem};
use conecert::DomainSpec;

pub type ApiResult = Result<String, String>;

fn load(problem: &str, h: f64) -> Result<Problem, String> {
    let mut p = Problem::from_json(problem).map_err(|e| e.to_string())?;
    if h > 0.0 {
        p.config.grid_h = h;
    }
    Ok(p)
}

fn discretize(p: &Problem) -> Result<DiscreteSystem, String> {
    p.discretize().map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> ApiResult {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Mesh {
    domain: DomainSpec,
    h: f64,
    /// Flattened `[x0, y0, x1, y1, ...]`.
    nodes: Vec<f64>,
}

fn mesh(sys: &DiscreteSystem) -> Mesh {
    Mesh {
        domain: sys.grid().domain().clone(),
        h: sys.grid().h(),
        nodes: sys.grid().nodes().iter().flat_map(|p| [p[0], p[1]]).collect(),
    }
}

#[derive(Serialize)]
struct Fields {
    mesh: Mesh,
    component: usize,
    k1: Vec<f64>,
    gamma: Vec<f64>,
    phi: Vec<f64>,
    k1_norm: f64,
    gamma_norm: f64,
    spectral_radius: f64,
    mu: f64,
    m_matrix_certified: bool,
}

/// `K(1)`, `γ` and the principal eigenfunction of component `component`
/// (1-based).
pub fn operator_fields(problem: &str, component: usize, h: f64) -> ApiResult {
    let p = load(problem, h)?;
    let sys = discretize(&p)?;
    if component == 0 || component > sys.n() {
        return Err(format!("component must lie in 1..={}", sys.n()));
    }
    let k = sys.op(component - 1);
    let s = k.spectral().map_err(|e| e.to_string())?;
    to_json(&Fields {
        mesh: mesh(&sys),
        component,
        k1: k.k1().values().to_vec(),
        gamma: k.gamma().values().to_vec(),
        phi: s.phi.values().to_vec(),
        k1_norm: k.norm_k1(),
        gamma_norm: k.gamma_norm(),
        spectral_radius: s.r,
        mu: s.mu,
        m_matrix_certified: k.op().m_matrix_certified,
    })
}

#[derive(Serialize)]
struct Region {
    kind: CertificateKind,
    x_axis: String,
    y_axis: String,
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Row-major over `ys` (outer) and `xs` (inner).
    verdicts: Vec<Verdict>,
    binding: Vec<String>,
}

/// Certificate verdicts on the grid spanned by two axes such as
/// `lambda1` over `0:2:0.05` and `eta1` over `0:0.5:0.01`.
pub fn region_sweep(problem: &str, kind: &str, x_axis: &str, x_range: &str, y_axis: &str, y_range: &str, h: f64) -> ApiResult {
    let kind = match kind {
        "existence" => CertificateKind::Existence,
        "nonexistence" => CertificateKind::Nonexistence,
        other => return Err(format!("unknown certificate kind `{other}`")),
    };
    let p = load(problem, h)?;
    let n = p.spec.n();
    let x = SweepAxis::parse(x_axis, x_range, n).map_err(|e| e.to_string())?;
    let y = SweepAxis::parse(y_axis, y_range, n).map_err(|e| e.to_string())?;
    if x.name() == y.name() {
        return Err("the two axes must differ".into());
    }
    let sys = discretize(&p)?;
    let setup = Setup::new(kind, &sys, &p.config.constants, &p.config.certify).map_err(|e| e.to_string())?;
    let rows = sweep_region(&setup, sys.lambda(), sys.eta(), &[y.clone(), x.clone()]);
    to_json(&Region {
        kind,
        x_axis: x.name(),
        y_axis: y.name(),
        xs: x.values,
        ys: y.values,
        verdicts: rows.iter().map(|r| r.verdict).collect(),
        binding: rows.into_iter().map(|r| r.binding).collect(),
    })
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub lambda: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    pub theta: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub starts: Option<usize>,
    pub seed: Option<u64>,
    pub h: Option<f64>,
}

#[derive(Serialize)]
struct Run {
    status: Status,
    iterations: usize,
    norm: f64,
    residual: f64,
    suspicious: bool,
    /// `‖u_k‖` per step.
    norms: Vec<f64>,
}

#[derive(Serialize)]
struct Solve {
    mesh: Mesh,
    lambda: Vec<f64>,
    eta: Vec<f64>,
    rho: Vec<f64>,
    runs: Vec<Run>,
    distinct: Vec<usize>,
    /// Node values of the first distinct limit, one array per component.
    solution: Vec<Vec<f64>>,
}

/// Multi-start damped Picard iteration; `options` is a JSON object with
/// optional `lambda`, `eta`, `theta`, `tol`, `max_iter`, `starts`, `seed`, `h`.
pub fn picard(problem: &str, options: &str) -> ApiResult {
    let o: SolveOptions = if options.trim().is_empty() {
        SolveOptions::default()
    } else {
        serde_json::from_str(options).map_err(|e| format!("options: {e}"))?
    };
    let mut p = load(problem, o.h.unwrap_or(0.0))?;
    let lambda = o.lambda.unwrap_or_else(|| p.spec.lambda());
    let eta = o.eta.unwrap_or_else(|| p.spec.eta());
    p.spec.set_parameters(&lambda, &eta).map_err(|e| e.to_string())?;
    let c = &mut p.config;
    c.picard.theta = o.theta.unwrap_or(c.picard.theta);
    c.picard.tol = o.tol.unwrap_or(c.picard.tol);
    c.picard.max_iter = o.max_iter.unwrap_or(c.picard.max_iter);
    c.multistart.random_starts = o.starts.unwrap_or(c.multistart.random_starts);
    c.multistart.seed = o.seed.unwrap_or(c.multistart.seed);
    let sys = discretize(&p)?;
    let rep = multistart(&sys, &p.config.picard, &p.config.multistart).map_err(|e| e.to_string())?;
    let shown = rep.distinct.first().map_or(&rep.runs[0], |&k| &rep.runs[k]);
    let solution = shown.u.iter().map(|c| c.values().to_vec()).collect();
    let runs = rep
        .runs
        .iter()
        .map(|r| Run {
            status: r.status,
            iterations: r.iterations,
            norm: r.norm,
            residual: r.residual,
            suspicious: r.suspicious,
            norms: r.trace.iter().map(|s| s.norm).collect(),
        })
        .collect();
    to_json(&Solve {
        mesh: mesh(&sys),
        lambda: sys.lambda().to_vec(),
        eta: sys.eta().to_vec(),
        rho: sys.rho().to_vec(),
        runs,
        distinct: rep.distinct,
        solution,
    })
}

pub fn bundled_problem(name: &str) -> ApiResult {
    bundled::get(name).map(str::to_string).ok_or_else(|| format!("no bundled problem `{name}`"))
}

fn js(r: ApiResult) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = operatorFields)]
pub fn operator_fields_js(problem: &str, component: usize, h: f64) -> Result<String, JsError> {
    js(operator_fields(problem, component, h))
}

#[wasm_bindgen(js_name = regionSweep)]
pub fn region_sweep_js(problem: &str, kind: &str, x_axis: &str, x_range: &str, y_axis: &str, y_range: &str, h: f64) -> Result<String, JsError> {
    js(region_sweep(problem, kind, x_axis, x_range, y_axis, y_range, h))
}

#[wasm_bindgen(js_name = picardSolve)]
pub fn picard_js(problem: &str, options: &str) -> Result<String, JsError> {
    js(picard(problem, options))
}

#[wasm_bindgen(js_name = bundledProblem)]
pub fn bundled_problem_js(name: &str) -> Result<String, JsError> {
    js(bundled_problem(name))
}
