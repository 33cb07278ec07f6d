//! Reproduction of the two worked examples shipped in `problems/`.
//!
//! Constants are reported at full precision and rounded up at the third
//! decimal, the convention used when quoting them.

use std::fmt;

use serde::Serialize;

use crate::certificates::{
    existence_lhs, Certificate, CertifyOptions, ConstantOverrides, ExistenceSetup, NonexistenceSetup, Verdict,
};
use crate::error::{Error, Result};
use crate::functionals::{estimate_h, estimate_m, SamplingConfig};
use crate::problem::{bundled, Problem};

pub const NAMES: [&str; 2] = ["example1", "example2"];

/// `x` rounded up at the third decimal; values within `1e-9` of a
/// three-decimal number are taken as exact.
pub fn round_up3(x: f64) -> f64 {
    let scaled = x * 1000.0;
    let nearest = scaled.round();
    if (scaled - nearest).abs() < 1e-9 {
        nearest / 1000.0
    } else {
        scaled.ceil() / 1000.0
    }
}

pub fn fmt3(x: f64) -> String {
    format!("{:.3}", round_up3(x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproRow {
    pub symbol: String,
    pub value: f64,
    pub rounded: String,
    pub note: String,
}

impl ReproRow {
    fn new(symbol: impl Into<String>, value: f64, note: impl Into<String>) -> Self {
        ReproRow {
            symbol: symbol.into(),
            value,
            rounded: fmt3(value),
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePoint {
    pub label: String,
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    pub verdict: Verdict,
    pub binding: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproReport {
    pub name: String,
    pub h: f64,
    pub rows: Vec<ReproRow>,
    pub inequalities: Vec<String>,
    pub points: Vec<SamplePoint>,
}

impl ReproReport {
    pub fn row(&self, symbol: &str) -> Option<&ReproRow> {
        self.rows.iter().find(|r| r.symbol == symbol)
    }
}

impl fmt::Display for ReproReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} (h = {})", self.name, self.h)?;
        let width = self.rows.iter().map(|r| r.symbol.len()).max().unwrap_or(0);
        for r in &self.rows {
            write!(f, "  {:<width$}  {:<8}  {:<22}", r.symbol, r.rounded, format!("{:.17e}", r.value))?;
            if r.note.is_empty() {
                writeln!(f)?;
            } else {
                writeln!(f, "  {}", r.note)?;
            }
        }
        for line in &self.inequalities {
            writeln!(f, "  {line}")?;
        }
        for p in &self.points {
            writeln!(
                f,
                "  {}: lambda = {:?}, eta = {:?}: {:?} (binding: {})",
                p.label, p.lambda, p.eta, p.verdict, p.binding
            )?;
        }
        Ok(())
    }
}

pub fn run(name: &str, h: f64) -> Result<ReproReport> {
    match name {
        "example1" => example1(h),
        "example2" => example2(h),
        other => Err(Error::validation("/", format!("unknown example `{other}`"))),
    }
}

fn load(name: &str, h: f64) -> Result<Problem> {
    let mut p = Problem::from_json(bundled::get(name).expect("bundled example"))?;
    p.config.grid_h = h;
    Ok(p)
}

pub fn example1(h: f64) -> Result<ReproReport> {
    let p = load("example1", h)?;
    let sys = p.discretize()?;
    let over = &p.config.constants;
    let m = over.m.clone().expect("example1 ships M");
    let hm = over.h.clone().expect("example1 ships H");
    let rho = sys.rho().to_vec();
    let sampling = p.config.certify.sampling;

    let mut rows = Vec::new();
    for i in 0..2 {
        rows.push(ReproRow::new(format!("||K{}(1)||", i + 1), sys.op(i).norm_k1(), "exact 1/4"));
        rows.push(ReproRow::new(format!("||gamma{}||", i + 1), sys.op(i).gamma_norm(), "exact 1"));
    }
    for i in 0..2 {
        let est = estimate_m(sys.nonlinearity(i), &rho, sys.grid(), &sampling)?;
        rows.push(ReproRow::new(
            format!("M{}", i + 1),
            m[i],
            format!("sampled max {:.17e}", est.value),
        ));
    }
    for i in 0..2 {
        let est = estimate_h(sys.functional(i), &rho, &sampling)?;
        rows.push(ReproRow::new(
            format!("H{}", i + 1),
            hm[i],
            format!("user majorant; sampled max {:.17e}", est.value),
        ));
    }
    rows.push(ReproRow::new("rho", rho[0], "15*pi/64"));

    let inequalities = (0..2)
        .map(|i| {
            format!(
                "{} * lambda{k} / 4 + {} * eta{k} <= {}",
                fmt3(m[i]),
                fmt3(hm[i]),
                fmt3(rho[i]),
                k = i + 1
            )
        })
        .collect();

    let setup = ExistenceSetup::new(&sys, over, &p.config.certify)?;
    let points = [[0.5, 0.5, 0.2, 0.05], [0.5, 0.5, 0.2, 0.2]]
        .iter()
        .map(|q| sample_point("existence", &setup.certify(&q[..2], &q[2..])))
        .collect();

    Ok(ReproReport {
        name: "example1".into(),
        h: sys.grid().h(),
        rows,
        inequalities,
        points,
    })
}

pub fn example2(h: f64) -> Result<ReproReport> {
    let p = load("example2", h)?;
    let sys = p.discretize()?;
    let over = &p.config.constants;
    let tau = over.tau.clone().expect("example2 ships tau");
    let xi = over.xi.clone().expect("example2 ships xi");
    let opts = CertifyOptions {
        sampling: SamplingConfig::with_samples(65),
        ..p.config.certify
    };
    let setup = NonexistenceSetup::new(&sys, over, &opts)?;

    let mut rows = Vec::new();
    for (i, b) in setup.bounds().iter().enumerate() {
        let status = if b.verified { "verified" } else { "VIOLATED" };
        rows.push(ReproRow::new(
            format!("tau{}", i + 1),
            tau[i],
            format!("{status}: {} violations in {} samples", b.violations, b.samples),
        ));
        rows.push(ReproRow::new(format!("xi{}", i + 1), xi[i], status));
    }
    let mut norms = Vec::new();
    for i in 0..2 {
        let k1 = sys.op(i).norm_k1();
        let g = sys.op(i).gamma_norm();
        rows.push(ReproRow::new(format!("||K{}(1)||", i + 1), k1, "exact 1/4"));
        rows.push(ReproRow::new(format!("||gamma{}||", i + 1), g, "exact 1"));
        norms.push((k1, g));
    }

    let mut inequalities = Vec::new();
    for i in 0..2 {
        inequalities.push(format!(
            "{} * lambda{k} + {} * eta{k} < 1",
            fmt3(tau[i]),
            fmt3(xi[i]),
            k = i + 1
        ));
    }
    for (i, (k1, g)) in norms.iter().enumerate() {
        inequalities.push(format!(
            "{} * lambda{k} + {} * eta{k} < 1  (with computed ||K{k}(1)||, ||gamma{k}||)",
            fmt3(tau[i] * k1),
            fmt3(xi[i] * g),
            k = i + 1
        ));
    }

    let unit = ConstantOverrides {
        k1_norm: Some(vec![1.0; 2]),
        gamma_norm: Some(vec![1.0; 2]),
        ..over.clone()
    };
    let conservative = NonexistenceSetup::new(&sys, &unit, &opts)?;
    let mut points = Vec::new();
    for q in [[0.5, 0.2, 0.1, 0.05], [0.5, 0.2, 0.1, 0.1]] {
        points.push(sample_point("computed norms", &setup.certify(&q[..2], &q[2..])));
        points.push(sample_point("unit norms", &conservative.certify(&q[..2], &q[2..])));
    }

    Ok(ReproReport {
        name: "example2".into(),
        h: sys.grid().h(),
        rows,
        inequalities,
        points,
    })
}

fn sample_point(label: &str, c: &Certificate) -> SamplePoint {
    SamplePoint {
        label: label.into(),
        lambda: c.lambda.clone(),
        eta: c.eta.clone(),
        verdict: c.verdict,
        binding: c.binding().map(|b| b.name.clone()).unwrap_or_default(),
    }
}

/// `λ τ + η ξ` with unit operator norms, the form quoted for the second
/// example.
pub fn conservative_lhs(lambda: f64, eta: f64, tau: f64, xi: f64) -> f64 {
    existence_lhs(lambda, eta, tau, 1.0, xi, 1.0)
}
