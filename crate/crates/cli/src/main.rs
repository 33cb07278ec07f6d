use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use conecert::certificates::{sweep_region, CertificateKind, Setup, SweepAxis, Verdict};
use conecert::fixedpoint::{multistart, verify_solution, Status};
use conecert::problem::{bundled, Problem};
use conecert::{repro, Error};

mod output;

use output::{csv_table, Table};

const EXIT_INTERNAL: u8 = 1;
const EXIT_MAXITER: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_FAIL: u8 = 4;
const EXIT_ADVISORY: u8 = 5;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "conecert", version, about = "Certificates and fixed points for elliptic systems with functional boundary conditions")]
struct Cli {
    /// Grid spacing, overriding the problem file.
    #[arg(long, global = true)]
    grid_h: Option<f64>,
    /// Picard tolerance, overriding the problem file.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for random starts, overriding the problem file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Existence,
    Nonexistence,
}

impl From<Kind> for CertificateKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Existence => CertificateKind::Existence,
            Kind::Nonexistence => CertificateKind::Nonexistence,
        }
    }
}

#[derive(clap::Args, Debug)]
struct Params {
    /// Comma-separated λ_i, overriding the problem file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,
    /// Comma-separated η_i, overriding the problem file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    eta: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run damped Picard iteration from the corner, midpoint and random starts.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        params: Params,
        /// Damping θ in (0, 1].
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Random starts in addition to the corner and midpoint.
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Check the existence or non-existence conditions at one parameter point.
    Certify {
        #[arg(value_enum)]
        kind: Kind,
        problem: PathBuf,
        #[command(flatten)]
        params: Params,
        /// 1-based component for the spectral condition.
        #[arg(long)]
        i0: Option<usize>,
        #[arg(long)]
        rho0: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Sweep a certificate over a parameter grid given by `--lambdaK a:b:step`
    /// and `--etaK a:b:step` flags.
    Region {
        problem: PathBuf,
        #[arg(long, value_enum, default_value = "existence")]
        kind: Kind,
        #[command(flatten)]
        params: Params,
    },
    /// Report the discrete operators, their norms and spectral data.
    OperatorInfo {
        problem: PathBuf,
        /// 1-based component whose fields are written in CSV mode.
        #[arg(long, default_value_t = 1)]
        component: usize,
    },
    /// Recompute the constants of a bundled example.
    Repro {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(repro::NAMES))]
        name: String,
    },
    /// Load and discretize a problem file, reporting any error with its location.
    Validate { problem: PathBuf },
}

/// Result of a command: the text to emit and the exit code.
struct Done {
    text: String,
    code: u8,
}

impl Done {
    fn ok(text: String) -> Self {
        Done { text, code: 0 }
    }
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

/// Pulls `--lambdaK v` / `--etaK v` pairs (also `--lambdaK=v`) out of the
/// argument list.
fn split_sweep_flags(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut sweeps = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let flag = a.strip_prefix("--").unwrap_or("");
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (flag, None),
        };
        let digits = name
            .strip_prefix("lambda")
            .or_else(|| name.strip_prefix("eta"))
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()));
        if digits.is_none() {
            rest.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| format!("--{name} needs a value a:b:step"))?,
        };
        sweeps.push((name.to_string(), value));
    }
    Ok((rest, sweeps))
}

fn sweep_axes(flags: &[(String, String)], n: usize) -> Result<Vec<SweepAxis>, Failure> {
    if flags.is_empty() {
        return Err(Failure::Usage("region needs at least one --lambdaK or --etaK range".into()));
    }
    flags
        .iter()
        .map(|(name, range)| SweepAxis::parse(name, range, n).map_err(|e| Failure::Usage(format!("--{name}: {e}"))))
        .collect()
}

/// Reads a problem file; a missing path naming a bundled example loads that.
fn load(cli: &Cli, path: &PathBuf) -> Result<Problem, Failure> {
    let bundled = path.to_str().filter(|_| !path.exists()).and_then(bundled::get);
    let mut p = match bundled {
        Some(text) => Problem::from_json(text)?,
        None => Problem::load(path)?,
    };
    if let Some(h) = cli.grid_h {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Failure::Usage(format!("--grid-h must be positive, got {h}")));
        }
        p.config.grid_h = h;
    }
    if let Some(t) = cli.tol {
        p.config.picard.tol = t;
    }
    if let Some(s) = cli.seed {
        p.config.multistart.seed = s;
    }
    Ok(p)
}

fn apply_params(p: &mut Problem, params: &Params) -> Result<(), Failure> {
    let n = p.spec.n();
    let lambda = params.lambda.clone().unwrap_or_else(|| p.spec.lambda());
    let eta = params.eta.clone().unwrap_or_else(|| p.spec.eta());
    if lambda.len() != n || eta.len() != n {
        return Err(Failure::Usage(format!("--lambda and --eta need {n} comma-separated values")));
    }
    p.spec.set_parameters(&lambda, &eta)?;
    Ok(())
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => 0,
        Verdict::Advisory => EXIT_ADVISORY,
        Verdict::Fail | Verdict::NotApplicable => EXIT_FAIL,
    }
}

#[derive(Serialize)]
struct SolveReport {
    lambda: Vec<f64>,
    eta: Vec<f64>,
    h: f64,
    runs: Vec<RunSummary>,
    distinct: Vec<usize>,
}

#[derive(Serialize)]
struct RunSummary {
    start: conecert::fixedpoint::StartKind,
    #[serde(flatten)]
    result: conecert::fixedpoint::PicardResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<conecert::fixedpoint::SolutionReport>,
}

fn solve(cli: &Cli, problem: &PathBuf, params: &Params, theta: Option<f64>, max_iter: Option<usize>, starts: Option<usize>) -> Result<Done, Failure> {
    let mut p = load(cli, problem)?;
    apply_params(&mut p, params)?;
    if let Some(t) = theta {
        p.config.picard.theta = t;
    }
    if let Some(m) = max_iter {
        p.config.picard.max_iter = m;
    }
    if let Some(s) = starts {
        p.config.multistart.random_starts = s;
    }
    let sys = p.discretize()?;
    let rep = multistart(&sys, &p.config.picard, &p.config.multistart)?;
    let code = if rep.runs.iter().any(|r| r.status == Status::Converged) {
        0
    } else if rep.runs.iter().any(|r| r.status == Status::Diverged) {
        EXIT_DIVERGED
    } else {
        EXIT_MAXITER
    };
    if cli.format == Some(Format::Csv) {
        // Node values of the first distinct limit, or of the last iterate of
        // the first run when nothing converged.
        let run = rep.distinct.first().map_or(&rep.runs[0], |&k| &rep.runs[k]);
        let mut header = vec!["x1".to_string(), "x2".to_string()];
        header.extend((1..=sys.n()).map(|i| format!("u{i}")));
        let mut table = Table::new(header);
        for (k, x) in sys.grid().nodes().iter().enumerate() {
            let mut row = vec![x[0], x[1]];
            row.extend(run.u.iter().map(|c| c.values()[k]));
            table.push_numbers(&row);
        }
        return Ok(Done {
            text: csv_table(&table),
            code,
        });
    }
    let mut runs = Vec::new();
    for (start, result) in rep.starts.iter().zip(rep.runs) {
        let verification = if result.status == Status::Converged {
            Some(verify_solution(&sys, &result.u, p.config.picard.tol, None)?)
        } else {
            None
        };
        runs.push(RunSummary {
            start: *start,
            result,
            verification,
        });
    }
    let report = SolveReport {
        lambda: sys.lambda().to_vec(),
        eta: sys.eta().to_vec(),
        h: sys.grid().h(),
        runs,
        distinct: rep.distinct,
    };
    Ok(Done { text: json(&report), code })
}

#[allow(clippy::too_many_arguments)]
fn certify(cli: &Cli, kind: Kind, problem: &PathBuf, params: &Params, i0: Option<usize>, rho0: Option<f64>, delta: Option<f64>) -> Result<Done, Failure> {
    let mut p = load(cli, problem)?;
    apply_params(&mut p, params)?;
    let n = p.spec.n();
    if let Some(i) = i0 {
        if i == 0 || i > n {
            return Err(Failure::Usage(format!("--i0 must lie in 1..={n}")));
        }
        p.config.constants.i0 = Some(i - 1);
    }
    if rho0.is_some() {
        p.config.constants.rho0 = rho0;
    }
    if delta.is_some() {
        p.config.constants.delta = delta;
    }
    let sys = p.discretize()?;
    let setup = Setup::new(kind.into(), &sys, &p.config.constants, &p.config.certify)?;
    let cert = setup.certify(sys.lambda(), sys.eta());
    let code = verdict_code(cert.verdict);
    if cli.format == Some(Format::Csv) {
        let mut table = Table::new(["condition", "lhs", "rhs", "margin", "strict", "satisfied"].map(String::from).to_vec());
        for c in &cert.conditions {
            table.push(vec![
                c.name.clone(),
                output::num(c.lhs),
                output::num(c.rhs),
                output::num(c.margin),
                c.strict.to_string(),
                c.satisfied.to_string(),
            ]);
        }
        return Ok(Done {
            text: csv_table(&table),
            code,
        });
    }
    Ok(Done { text: json(&cert), code })
}

fn region(cli: &Cli, problem: &PathBuf, kind: Kind, params: &Params, sweeps: &[(String, String)]) -> Result<Done, Failure> {
    let mut p = load(cli, problem)?;
    apply_params(&mut p, params)?;
    let axes = sweep_axes(sweeps, p.spec.n())?;
    let sys = p.discretize()?;
    let setup = Setup::new(kind.into(), &sys, &p.config.constants, &p.config.certify)?;
    let rows = sweep_region(&setup, sys.lambda(), sys.eta(), &axes);
    if cli.format == Some(Format::Json) {
        #[derive(Serialize)]
        struct RegionReport<'a> {
            kind: CertificateKind,
            axes: Vec<String>,
            rows: &'a [conecert::certificates::RegionRow],
        }
        let report = RegionReport {
            kind: kind.into(),
            axes: axes.iter().map(|a| a.name()).collect(),
            rows: &rows,
        };
        return Ok(Done::ok(json(&report)));
    }
    let mut header: Vec<String> = axes.iter().map(|a| a.name()).collect();
    header.extend(["verdict".to_string(), "binding".to_string()]);
    let mut table = Table::new(header);
    for r in &rows {
        let mut row: Vec<String> = r.values.iter().map(|&v| output::num(v)).collect();
        row.push(output::verdict(r.verdict).to_string());
        row.push(r.binding.clone());
        table.push(row);
    }
    Ok(Done::ok(csv_table(&table)))
}

#[derive(Serialize)]
struct ComponentInfo {
    component: usize,
    boundary: conecert::operator::BoundaryKind,
    nodes: usize,
    symmetric: bool,
    m_matrix_certified: bool,
    sign_violations: usize,
    mixed_terms_dropped: usize,
    direct_solver: bool,
    k1_norm: f64,
    gamma_norm: f64,
    spectral_radius: f64,
    mu: f64,
    eigen_residual: f64,
    power_iterations: usize,
    elliptic: conecert::operator::EllipticReport,
}

#[derive(Serialize)]
struct OperatorInfo {
    digest: String,
    h: f64,
    nodes: usize,
    boundary_points: usize,
    clamped_cuts: usize,
    area: f64,
    components: Vec<ComponentInfo>,
}

fn operator_info(cli: &Cli, problem: &PathBuf, component: usize) -> Result<Done, Failure> {
    let p = load(cli, problem)?;
    let sys = p.discretize()?;
    let n = sys.n();
    if component == 0 || component > n {
        return Err(Failure::Usage(format!("--component must lie in 1..={n}")));
    }
    if cli.format == Some(Format::Csv) {
        let k = sys.op(component - 1);
        let s = k.spectral()?;
        let mut table = Table::new(["x1", "x2", "k1", "gamma", "phi"].map(String::from).to_vec());
        for (i, x) in sys.grid().nodes().iter().enumerate() {
            table.push_numbers(&[x[0], x[1], k.k1().values()[i], k.gamma().values()[i], s.phi.values()[i]]);
        }
        return Ok(Done::ok(csv_table(&table)));
    }
    let mut components = Vec::with_capacity(n);
    for i in 0..n {
        let k = sys.op(i);
        let s = k.spectral()?;
        components.push(ComponentInfo {
            component: i + 1,
            boundary: k.op().boundary,
            nodes: k.len(),
            symmetric: k.op().symmetric,
            m_matrix_certified: k.op().m_matrix_certified,
            sign_violations: k.op().sign_violations,
            mixed_terms_dropped: k.op().mixed_terms_dropped,
            direct_solver: k.is_direct(),
            k1_norm: k.norm_k1(),
            gamma_norm: k.gamma_norm(),
            spectral_radius: s.r,
            mu: s.mu,
            eigen_residual: s.residual,
            power_iterations: s.iterations,
            elliptic: sys.elliptic_report(i).clone(),
        });
    }
    let grid = sys.grid();
    let info = OperatorInfo {
        digest: sys.digest().to_string(),
        h: grid.h(),
        nodes: grid.len(),
        boundary_points: grid.boundary_points().len(),
        clamped_cuts: grid.clamped_cuts(),
        area: grid.cell_weights().iter().sum(),
        components,
    };
    Ok(Done::ok(json(&info)))
}

fn run_repro(cli: &Cli, name: &str) -> Result<Done, Failure> {
    let h = cli.grid_h.unwrap_or(conecert::problem::DEFAULT_GRID_H);
    let report = repro::run(name, h)?;
    let text = match cli.format {
        None => report.to_string(),
        Some(Format::Json) => json(&report),
        Some(Format::Csv) => {
            let mut table = Table::new(["symbol", "value", "rounded", "note"].map(String::from).to_vec());
            for r in &report.rows {
                table.push(vec![r.symbol.clone(), output::num(r.value), r.rounded.clone(), r.note.clone()]);
            }
            csv_table(&table)
        }
    };
    Ok(Done::ok(text))
}

#[derive(Serialize)]
struct Validated {
    valid: bool,
    n: usize,
    domain: conecert::DomainSpec,
    h: f64,
    nodes: usize,
    digest: String,
}

fn validate(cli: &Cli, problem: &PathBuf) -> Result<Done, Failure> {
    let p = load(cli, problem)?;
    let sys = p.discretize()?;
    Ok(Done::ok(json(&Validated {
        valid: true,
        n: sys.n(),
        domain: p.spec.domain.clone(),
        h: sys.grid().h(),
        nodes: sys.grid().len(),
        digest: sys.digest().to_string(),
    })))
}

fn dispatch(cli: &Cli, sweeps: &[(String, String)]) -> Result<Done, Failure> {
    if !sweeps.is_empty() && !matches!(cli.command, Command::Region { .. }) {
        return Err(Failure::Usage(format!("--{} is only accepted by `region`", sweeps[0].0)));
    }
    match &cli.command {
        Command::Solve {
            problem,
            params,
            theta,
            max_iter,
            starts,
        } => solve(cli, problem, params, *theta, *max_iter, *starts),
        Command::Certify {
            kind,
            problem,
            params,
            i0,
            rho0,
            delta,
        } => certify(cli, *kind, problem, params, *i0, *rho0, *delta),
        Command::Region { problem, kind, params } => region(cli, problem, *kind, params, sweeps),
        Command::OperatorInfo { problem, component } => operator_info(cli, problem, *component),
        Command::Repro { name } => run_repro(cli, name),
        Command::Validate { problem } => validate(cli, problem),
    }
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::SchemaError { .. }
        | Error::ValidationError { .. }
        | Error::SyntaxError { .. }
        | Error::UnknownIdentifier(_)
        | Error::MissingConstant(_)
        | Error::InvalidDomain(_)
        | Error::EmptyGrid { .. }
        | Error::DegenerateCut { .. }
        | Error::NotElliptic { .. }
        | Error::AsymmetricDiffusion { .. }
        | Error::NegativeReaction { .. }
        | Error::InvalidBoundary(_)
        | Error::PointOutsideDomain(..)
        | Error::InvalidFunctional(_) => EXIT_USAGE,
        _ => EXIT_INTERNAL,
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let (args, sweeps) = match split_sweep_flags(args) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let done = match dispatch(&cli, &sweeps) {
        Ok(d) => d,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_for(&e));
        }
    };
    let written = match &cli.output {
        Some(path) => std::fs::write(path, &done.text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => match std::io::stdout().lock().write_all(done.text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            other => other.map_err(|e| e.to_string()),
        },
    };
    if let Err(msg) = written {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_INTERNAL);
    }
    ExitCode::from(done.code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_flags_are_split() {
        let args = ["conecert", "region", "p.json", "--lambda1", "0:1:0.5", "--eta2=0:1:1", "--lambda", "1,2"]
            .map(String::from)
            .to_vec();
        let (rest, sweeps) = split_sweep_flags(args).unwrap();
        assert_eq!(rest, ["conecert", "region", "p.json", "--lambda", "1,2"]);
        assert_eq!(
            sweeps,
            [("lambda1".to_string(), "0:1:0.5".to_string()), ("eta2".to_string(), "0:1:1".to_string())]
        );
        assert!(split_sweep_flags(vec!["--eta1".into()]).is_err());
    }

    #[test]
    fn bundled_names_are_accepted() {
        for name in repro::NAMES {
            assert!(bundled::get(name).is_some());
        }
    }
}
