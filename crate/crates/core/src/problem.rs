//! JSON problem files.
//!
//! ```json
//! {
//!   "domain": {"type": "disk", "center": [0, 0], "radius": 1},
//!   "n": 1,
//!   "components": [{
//!     "L": {"diffusion": [["1", "0"], ["0", "1"]], "advection": ["0", "0"], "reaction": "0"},
//!     "B": {"kind": "dirichlet"},
//!     "f": "u1^2",
//!     "h": {"primitives": {"p": {"point": [0, 0], "component": 1}}, "combiner": "p"},
//!     "rho": "pi/4", "lambda": 0.5, "eta": 0.1
//!   }],
//!   "constants": {"M": [0.62], "tau": ["pi/4"]},
//!   "grid": {"h": 0.03125},
//!   "solver": {"picard": {"theta": 0.5}}
//! }
//! ```
//!
//! Scalars may be numbers or closed expressions such as `"15*pi/64"`.
//! Component indices (`component`, `i0`) are 1-based in files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::certificates::{CertifyOptions, ConstantOverrides};
use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Signature};
use crate::fixedpoint::{ComponentSpec, DiscreteSystem, MultiStartConfig, PicardConfig, SystemSpec};
use crate::functionals::{FunctionalSpec, Primitive, SamplingConfig};
use crate::geometry::{DomainSpec, GridOptions, Point2};
use crate::greens::SolverConfig;
use crate::operator::{BoundarySpec, EllipticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Expr(String),
}

impl Scalar {
    fn value(&self, pointer: &str) -> Result<f64> {
        match self {
            Scalar::Num(v) => Ok(*v),
            Scalar::Expr(text) => Expr::parse(text, &Signature::constant())
                .and_then(|e| e.eval(&Signature::constant(), &Env::empty()))
                .map_err(|e| Error::validation(pointer, e.to_string())),
        }
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::Num(0.0)
    }
}

fn identity() -> [[String; 2]; 2] {
    [["1".into(), "0".into()], ["0".into(), "1".into()]]
}

fn zeros() -> [String; 2] {
    ["0".into(), "0".into()]
}

fn zero() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    #[serde(default = "identity")]
    diffusion: [[String; 2]; 2],
    #[serde(default = "zeros")]
    advection: [String; 2],
    #[serde(default = "zero")]
    reaction: String,
}

impl Default for OperatorFile {
    fn default() -> Self {
        OperatorFile {
            diffusion: identity(),
            advection: zeros(),
            reaction: zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum BoundaryFile {
    #[default]
    Dirichlet,
    Neumann,
    Robin {
        b: String,
    },
}

fn one() -> String {
    "1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegralFile {
    component: usize,
    #[serde(default = "one")]
    weight: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum PrimitiveFile {
    Point { point: Point2, component: usize },
    Integral { integral: IntegralFile },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalFile {
    #[serde(default)]
    primitives: BTreeMap<String, PrimitiveFile>,
    combiner: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentFile {
    #[serde(rename = "L", default)]
    l: OperatorFile,
    #[serde(rename = "B", default)]
    b: BoundaryFile,
    f: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<FunctionalFile>,
    rho: Scalar,
    #[serde(default)]
    lambda: Scalar,
    #[serde(default)]
    eta: Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConstantsFile {
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    m: Option<Vec<Scalar>>,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    h: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    xi: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho0: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    i0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k1_norm: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_norm: Option<Vec<Scalar>>,
}

pub const DEFAULT_GRID_H: f64 = 1.0 / 32.0;

fn default_h() -> f64 {
    DEFAULT_GRID_H
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    #[serde(default = "default_h")]
    h: f64,
    #[serde(default = "default_floor")]
    cut_floor: f64,
    #[serde(default)]
    strict_cuts: bool,
}

fn default_floor() -> f64 {
    GridOptions::default().cut_floor
}

impl Default for GridFile {
    fn default() -> Self {
        GridFile {
            h: default_h(),
            cut_floor: default_floor(),
            strict_cuts: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct SolverFile {
    linear: SolverConfig,
    picard: PicardConfig,
    multistart: MultiStartConfig,
    certify: CertifyOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    domain: DomainSpec,
    n: usize,
    components: Vec<ComponentFile>,
    #[serde(default)]
    constants: ConstantsFile,
    #[serde(default)]
    grid: GridFile,
    #[serde(default)]
    solver: SolverFile,
}

/// Settings that accompany a [`SystemSpec`] in a problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub grid_h: f64,
    pub grid: GridOptions,
    pub solver: SolverConfig,
    pub picard: PicardConfig,
    pub multistart: MultiStartConfig,
    pub certify: CertifyOptions,
    pub constants: ConstantOverrides,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            grid_h: DEFAULT_GRID_H,
            grid: GridOptions::default(),
            solver: SolverConfig::default(),
            picard: PicardConfig::default(),
            multistart: MultiStartConfig::default(),
            certify: CertifyOptions::default(),
            constants: ConstantOverrides::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub spec: SystemSpec,
    pub config: ProblemConfig,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn scalars(v: &Option<Vec<Scalar>>, n: usize, name: &str) -> Result<Option<Vec<f64>>> {
    let Some(v) = v else {
        return Ok(None);
    };
    if v.len() != n {
        return Err(Error::validation(format!("/constants/{name}"), format!("expected {n} values, got {}", v.len())));
    }
    v.iter()
        .enumerate()
        .map(|(i, s)| s.value(&format!("/constants/{name}/{i}")))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn at(pointer: String) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        e @ (Error::ValidationError { .. } | Error::SchemaError { .. }) => e,
        e => Error::validation(pointer, e.to_string()),
    }
}

impl ProblemFile {
    fn into_problem(self) -> Result<Problem> {
        let n = self.n;
        if n == 0 {
            return Err(Error::validation("/n", "at least one component is required"));
        }
        if self.components.len() != n {
            return Err(Error::validation(
                "/components",
                format!("n = {n} but {} component(s) are given", self.components.len()),
            ));
        }
        self.domain.validate().map_err(at("/domain".into()))?;
        let mut components = Vec::with_capacity(n);
        for (i, c) in self.components.into_iter().enumerate() {
            let base = format!("/components/{i}");
            let spatial = Signature::spatial();
            let parse = |text: &str, pointer: String| Expr::parse(text, &spatial).map_err(at(pointer));
            let d = &c.l.diffusion;
            let elliptic = EllipticSpec {
                diffusion: [
                    [parse(&d[0][0], format!("{base}/L/diffusion/0/0"))?, parse(&d[0][1], format!("{base}/L/diffusion/0/1"))?],
                    [parse(&d[1][0], format!("{base}/L/diffusion/1/0"))?, parse(&d[1][1], format!("{base}/L/diffusion/1/1"))?],
                ],
                advection: [
                    parse(&c.l.advection[0], format!("{base}/L/advection/0"))?,
                    parse(&c.l.advection[1], format!("{base}/L/advection/1"))?,
                ],
                reaction: parse(&c.l.reaction, format!("{base}/L/reaction"))?,
            };
            let boundary = match &c.b {
                BoundaryFile::Dirichlet => BoundarySpec::Dirichlet,
                BoundaryFile::Neumann => BoundarySpec::Neumann,
                BoundaryFile::Robin { b } => BoundarySpec::Robin {
                    b: parse(b, format!("{base}/B/b"))?,
                },
            };
            let f = Expr::parse(&c.f, &Signature::nonlinearity(n)).map_err(at(format!("{base}/f")))?;
            let h = match c.h {
                None => FunctionalSpec::zero(),
                Some(hf) => {
                    let mut prims = Vec::with_capacity(hf.primitives.len());
                    for (name, p) in hf.primitives {
                        let pointer = format!("{base}/h/primitives/{name}");
                        let (component, prim) = match p {
                            PrimitiveFile::Point { point, component } => (component, Primitive::Point { component, point }),
                            PrimitiveFile::Integral { integral } => (
                                integral.component,
                                Primitive::Integral {
                                    component: integral.component,
                                    weight: parse(&integral.weight, format!("{pointer}/integral/weight"))?,
                                },
                            ),
                        };
                        if component == 0 || component > n {
                            return Err(Error::validation(
                                pointer,
                                format!("component must lie in 1..={n}, got {component}"),
                            ));
                        }
                        let prim = match prim {
                            Primitive::Point { point, .. } => Primitive::Point { component: component - 1, point },
                            Primitive::Integral { weight, .. } => Primitive::Integral { component: component - 1, weight },
                        };
                        prims.push((name, prim));
                    }
                    FunctionalSpec::new(prims, &hf.combiner).map_err(at(format!("{base}/h")))?
                }
            };
            components.push(ComponentSpec {
                elliptic,
                boundary,
                f,
                h,
                rho: c.rho.value(&format!("{base}/rho"))?,
                lambda: c.lambda.value(&format!("{base}/lambda"))?,
                eta: c.eta.value(&format!("{base}/eta"))?,
            });
        }
        let spec = SystemSpec {
            domain: self.domain,
            components,
        };
        spec.validate()?;

        let k = &self.constants;
        let i0 = match k.i0 {
            Some(i) if i == 0 || i > n => {
                return Err(Error::validation("/constants/i0", format!("must lie in 1..={n}, got {i}")))
            }
            other => other.map(|i| i - 1),
        };
        let single = |s: &Option<Scalar>, name: &str| s.as_ref().map(|s| s.value(&format!("/constants/{name}"))).transpose();
        let constants = ConstantOverrides {
            m: scalars(&k.m, n, "M")?,
            h: scalars(&k.h, n, "H")?,
            tau: scalars(&k.tau, n, "tau")?,
            xi: scalars(&k.xi, n, "xi")?,
            delta: single(&k.delta, "delta")?,
            rho0: single(&k.rho0, "rho0")?,
            i0,
            k1_norm: scalars(&k.k1_norm, n, "k1_norm")?,
            gamma_norm: scalars(&k.gamma_norm, n, "gamma_norm")?,
        };
        if !(self.grid.h > 0.0 && self.grid.h.is_finite()) {
            return Err(Error::validation("/grid/h", format!("must be positive, got {}", self.grid.h)));
        }
        Ok(Problem {
            spec,
            config: ProblemConfig {
                grid_h: self.grid.h,
                grid: GridOptions {
                    cut_floor: self.grid.cut_floor,
                    strict_cuts: self.grid.strict_cuts,
                },
                solver: self.solver.linear,
                picard: self.solver.picard,
                multistart: self.solver.multistart,
                certify: self.solver.certify,
                constants,
            },
        })
    }

    fn from_problem(p: &Problem) -> Self {
        let s = |e: &Expr| e.to_string();
        let components = p
            .spec
            .components
            .iter()
            .map(|c| {
                let d = &c.elliptic.diffusion;
                ComponentFile {
                    l: OperatorFile {
                        diffusion: [[s(&d[0][0]), s(&d[0][1])], [s(&d[1][0]), s(&d[1][1])]],
                        advection: [s(&c.elliptic.advection[0]), s(&c.elliptic.advection[1])],
                        reaction: s(&c.elliptic.reaction),
                    },
                    b: match &c.boundary {
                        BoundarySpec::Dirichlet => BoundaryFile::Dirichlet,
                        BoundarySpec::Neumann => BoundaryFile::Neumann,
                        BoundarySpec::Robin { b } => BoundaryFile::Robin { b: s(b) },
                    },
                    f: s(&c.f),
                    h: Some(FunctionalFile {
                        primitives: c
                            .h
                            .primitives
                            .iter()
                            .map(|(name, prim)| {
                                let file = match prim {
                                    Primitive::Point { component, point } => PrimitiveFile::Point {
                                        point: *point,
                                        component: component + 1,
                                    },
                                    Primitive::Integral { component, weight } => PrimitiveFile::Integral {
                                        integral: IntegralFile {
                                            component: component + 1,
                                            weight: s(weight),
                                        },
                                    },
                                };
                                (name.clone(), file)
                            })
                            .collect(),
                        combiner: s(&c.h.combiner),
                    }),
                    rho: Scalar::Num(c.rho),
                    lambda: Scalar::Num(c.lambda),
                    eta: Scalar::Num(c.eta),
                }
            })
            .collect();
        let nums = |v: &Option<Vec<f64>>| v.as_ref().map(|v| v.iter().map(|&x| Scalar::Num(x)).collect());
        let k = &p.config.constants;
        ProblemFile {
            domain: p.spec.domain.clone(),
            n: p.spec.n(),
            components,
            constants: ConstantsFile {
                m: nums(&k.m),
                h: nums(&k.h),
                tau: nums(&k.tau),
                xi: nums(&k.xi),
                delta: k.delta.map(Scalar::Num),
                rho0: k.rho0.map(Scalar::Num),
                i0: k.i0.map(|i| i + 1),
                k1_norm: nums(&k.k1_norm),
                gamma_norm: nums(&k.gamma_norm),
            },
            grid: GridFile {
                h: p.config.grid_h,
                cut_floor: p.config.grid.cut_floor,
                strict_cuts: p.config.grid.strict_cuts,
            },
            solver: SolverFile {
                linear: p.config.solver,
                picard: p.config.picard,
                multistart: p.config.multistart,
                certify: p.config.certify,
            },
        }
    }
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| Error::SchemaError {
            pointer: pointer_of(e.path()),
            message: e.inner().to_string(),
        })?;
        file.into_problem()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::SchemaError {
            pointer: "/".into(),
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProblemFile::from_problem(self)).expect("problem files serialize")
    }

    pub fn discretize(&self) -> Result<DiscreteSystem> {
        DiscreteSystem::build_with(&self.spec, self.config.grid_h, self.config.grid, &self.config.solver)
    }

    pub fn sampling(&self) -> SamplingConfig {
        self.config.certify.sampling
    }
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    Problem::load(path)
}

/// SHA-256 over the canonical JSON form of `spec` with `λ = η = 0`.
pub fn digest(spec: &SystemSpec) -> String {
    let mut bare = spec.clone();
    for c in &mut bare.components {
        c.lambda = 0.0;
        c.eta = 0.0;
    }
    let p = Problem {
        spec: bare,
        config: ProblemConfig::default(),
    };
    let file = ProblemFile::from_problem(&p);
    let json = serde_json::json!({
        "domain": file.domain,
        "n": file.n,
        "components": file.components,
    });
    hex::encode(Sha256::digest(json.to_string().as_bytes()))
}

/// The problem files shipped with the crate.
pub mod bundled {
    pub const EXAMPLE1: &str = include_str!("../problems/example1.json");
    pub const EXAMPLE2: &str = include_str!("../problems/example2.json");

    pub fn get(name: &str) -> Option<&'static str> {
        match name {
            "example1" => Some(EXAMPLE1),
            "example2" => Some(EXAMPLE2),
            _ => None,
        }
    }
}
