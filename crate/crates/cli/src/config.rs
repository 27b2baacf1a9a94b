//! Run configuration: flat `key = value` files with dotted block prefixes
//! (`grid.n`, `problem.p`), `[block]` headers, and `--set` overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use plap_core::plap::CoreConfig;
use plap_core::singular::{ConvectionSpec, EpsSchedule, ProblemSpec};

use crate::error::CliError;

/// Every accepted key. Bare names resolve to the unique entry ending in
/// `.name`.
pub const KEYS: &[&str] = &[
    "command",
    "seed",
    "grid.dim",
    "grid.extent",
    "grid.n",
    "problem.p",
    "problem.alpha",
    "problem.lambda",
    "problem.a",
    "problem.b",
    "problem.r1",
    "problem.r2",
    "problem.q",
    "problem.u0_sup",
    "problem.cp_hat",
    "problem.theta",
    "solver.tol",
    "solver.max_iter",
    "solver.delta_reg",
    "solver.eps0",
    "solver.factor",
    "solver.floor",
    "output.directory",
    "output.formats",
    "sweep.lambdas",
    "calibration.probes",
    "verify.input",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    SolveU0,
    SolveSublinear,
    SolveSupercritical,
    Eigen,
    Constants,
    SweepLambda,
    Verify,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::SolveU0,
        Command::SolveSublinear,
        Command::SolveSupercritical,
        Command::Eigen,
        Command::Constants,
        Command::SweepLambda,
        Command::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SolveU0 => "solve-u0",
            Command::SolveSublinear => "solve-sublinear",
            Command::SolveSupercritical => "solve-supercritical",
            Command::Eigen => "eigen",
            Command::Constants => "constants",
            Command::SweepLambda => "sweep-lambda",
            Command::Verify => "verify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
                format!("unknown command `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Where a value came from, for error messages.
#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    Line(PathBuf, usize),
    Flag(String),
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(p, n) => write!(f, "{}:{n}", p.display()),
            Origin::Flag(s) => write!(f, "--set {s}"),
            Origin::Default => f.write_str("default"),
        }
    }
}

/// Raw `key → (value, origin)` map with keys already canonical.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

fn canonical_key(key: &str) -> Option<&'static str> {
    if let Some(k) = KEYS.iter().find(|k| **k == key) {
        return Some(k);
    }
    let mut hits = KEYS.iter().filter(|k| k.rsplit('.').next() == Some(key));
    match (hits.next(), hits.next()) {
        (Some(k), None) => Some(k),
        _ => None,
    }
}

impl RawConfig {
    fn insert(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), CliError> {
        let key = canonical_key(key).ok_or_else(|| CliError::Config(format!("{origin}: unknown key `{key}`")))?;
        self.entries.insert(key.to_string(), (value.trim().to_string(), origin));
        Ok(())
    }

    pub fn parse_str(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        raw.merge_str(text, path)?;
        Ok(raw)
    }

    pub fn merge_str(&mut self, text: &str, path: &Path) -> Result<(), CliError> {
        let mut block = String::new();
        for (k, line) in text.lines().enumerate() {
            let origin = Origin::Line(path.to_path_buf(), k + 1);
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config(format!("{origin}: unterminated block header")))?
                    .trim();
                if !KEYS.iter().any(|key| key.starts_with(&format!("{name}."))) {
                    return Err(CliError::Config(format!("{origin}: unknown block `[{name}]`")));
                }
                block = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}: expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let full = if block.is_empty() || key.contains('.') {
                key.to_string()
            } else {
                format!("{block}.{key}")
            };
            self.insert(&full, value, origin)?;
        }
        Ok(())
    }

    /// Rebuilds a raw map from [`RawConfig::flat`] output.
    pub fn from_flat(map: &BTreeMap<String, String>, label: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (k, v) in map {
            raw.insert(k, v, Origin::Flag(format!("{label}:{k}={v}")))?;
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text, path)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set {assignment}: expected key=value")))?;
        self.insert(key.trim(), value, Origin::Flag(assignment.to_string()))
    }

    fn get(&self, key: &str) -> Option<&(String, Origin)> {
        self.entries.get(key)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::Config(format!("{origin}: bad value `{v}` for {key}: {e}"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .split([',', ';'])
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|e| CliError::Config(format!("{origin}: bad entry `{s}` in {key}: {e}")))
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    /// Canonical `key → value` view, used to embed the configuration in
    /// reports.
    pub fn flat(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect()
    }

    fn origin(&self, key: &str) -> Origin {
        self.get(key).map(|(_, o)| o.clone()).unwrap_or(Origin::Default)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridBlock {
    pub dim: usize,
    pub extent: Vec<(f64, f64)>,
    pub n: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemBlock {
    pub p: f64,
    pub alpha: f64,
    /// `None` means the command's default (`1`, or `A*/2` in the
    /// supercritical commands).
    pub lambda: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub q: Option<f64>,
    pub u0_sup: Option<f64>,
    pub cp_hat: Option<f64>,
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverBlock {
    pub tol: f64,
    pub max_iter: usize,
    pub delta_reg: f64,
    pub eps0: f64,
    pub factor: f64,
    pub floor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub grid: GridBlock,
    pub problem: ProblemBlock,
    pub solver: SolverBlock,
    pub output: OutputBlock,
    pub lambdas: Vec<f64>,
    pub probes: usize,
    pub verify_input: Option<PathBuf>,
    /// Resolved keys as given, for the report.
    pub flat: BTreeMap<String, String>,
}

fn invalid(origin: Origin, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("{origin}: {msg}"))
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let command: Command = raw
            .parse::<String>("command")?
            .ok_or_else(|| CliError::Config("missing `command`".into()))?
            .parse()
            .map_err(|e| invalid(raw.origin("command"), e))?;

        let dim = raw.parse::<usize>("grid.dim")?.unwrap_or(1);
        if !(dim == 1 || dim == 2) {
            return Err(invalid(raw.origin("grid.dim"), format!("grid.dim must be 1 or 2, got {dim}")));
        }
        let extent = match raw.list::<f64>("grid.extent")? {
            None => vec![(0.0, 1.0); dim],
            Some(v) if v.len() == 2 * dim => v.chunks(2).map(|c| (c[0], c[1])).collect(),
            Some(v) => {
                return Err(invalid(
                    raw.origin("grid.extent"),
                    format!("grid.extent needs {} numbers (lo,hi per axis), got {}", 2 * dim, v.len()),
                ))
            }
        };
        if let Some((lo, hi)) = extent.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(invalid(raw.origin("grid.extent"), format!("empty interval [{lo}, {hi}]")));
        }
        let n = match raw.list::<usize>("grid.n")? {
            None => vec![255; dim],
            Some(v) if v.len() == 1 => vec![v[0]; dim],
            Some(v) if v.len() == dim => v,
            Some(v) => {
                return Err(invalid(
                    raw.origin("grid.n"),
                    format!("grid.n needs 1 or {dim} counts, got {}", v.len()),
                ))
            }
        };
        if n.iter().any(|&k| k < 1) {
            return Err(invalid(raw.origin("grid.n"), "grid.n must be >= 1"));
        }

        let problem = ProblemBlock {
            p: raw.parse("problem.p")?.unwrap_or(2.0),
            alpha: raw.parse("problem.alpha")?.unwrap_or(0.5),
            lambda: raw.parse("problem.lambda")?,
            a: raw.parse("problem.a")?.unwrap_or(0.0),
            b: raw.parse("problem.b")?.unwrap_or(0.0),
            r1: raw.parse("problem.r1")?,
            r2: raw.parse("problem.r2")?,
            q: raw.parse("problem.q")?,
            u0_sup: raw.parse("problem.u0_sup")?,
            cp_hat: raw.parse("problem.cp_hat")?,
            theta: raw.parse("problem.theta")?,
        };
        let sched = EpsSchedule::default();
        let core = CoreConfig::default();
        let solver = SolverBlock {
            tol: raw.parse("solver.tol")?.unwrap_or(core.tol),
            max_iter: raw.parse("solver.max_iter")?.unwrap_or(core.max_iter),
            delta_reg: raw.parse("solver.delta_reg")?.unwrap_or(core.delta_reg),
            eps0: raw.parse("solver.eps0")?.unwrap_or(sched.eps0),
            factor: raw.parse("solver.factor")?.unwrap_or(sched.factor),
            floor: raw.parse("solver.floor")?.unwrap_or(sched.floor),
        };
        let formats = match raw.list::<String>("output.formats")? {
            None => vec![Format::Csv, Format::Json],
            Some(v) => v
                .iter()
                .map(|f| match f.as_str() {
                    "csv" => Ok(Format::Csv),
                    "json" => Ok(Format::Json),
                    other => Err(invalid(raw.origin("output.formats"), format!("unknown format `{other}`"))),
                })
                .collect::<Result<_, _>>()?,
        };
        let output = OutputBlock {
            directory: raw.parse::<PathBuf>("output.directory")?.unwrap_or_else(|| PathBuf::from("out")),
            formats,
        };
        let cfg = RunConfig {
            command,
            seed: raw.parse("seed")?.unwrap_or(42),
            grid: GridBlock { dim, extent, n },
            problem,
            solver,
            output,
            lambdas: raw.list("sweep.lambdas")?.unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3, 1e-4]),
            probes: raw.parse("calibration.probes")?.unwrap_or(3),
            verify_input: raw.parse("verify.input")?,
            flat: raw.flat(),
        };
        cfg.validate(raw)?;
        Ok(cfg)
    }

    fn validate(&self, raw: &RawConfig) -> Result<(), CliError> {
        let pr = &self.problem;
        let o = |k: &str| raw.origin(k);
        if !(pr.p > 1.0 && pr.p.is_finite()) {
            return Err(invalid(o("problem.p"), format!("p must exceed 1, got {}", pr.p)));
        }
        if !(pr.alpha > 0.0 && pr.alpha < 1.0) {
            return Err(invalid(
                o("problem.alpha"),
                format!("alpha must lie in (0,1), got {} (hypothesis 0 < alpha < 1 of the singular term)", pr.alpha),
            ));
        }
        if let Some(l) = pr.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(invalid(o("problem.lambda"), format!("lambda must be positive, got {l}")));
            }
        }
        for (key, coef) in [("problem.a", pr.a), ("problem.b", pr.b)] {
            if !(coef >= 0.0 && coef.is_finite()) {
                return Err(invalid(o(key), format!("{key} must be >= 0, got {coef}")));
            }
        }
        for (key, r) in [("problem.r1", pr.r1), ("problem.r2", pr.r2)] {
            if let Some(r) = r {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(invalid(o(key), format!("{key} must be positive, got {r}")));
                }
                if r == pr.p - 1.0 {
                    return Err(invalid(
                        o(key),
                        format!("{key} = p - 1 = {r} is excluded: exponents must lie in (0, p-1) or (p-1, inf)"),
                    ));
                }
            }
        }
        for (coef_key, coef, r_key, r) in [("a", pr.a, "problem.r1", pr.r1), ("b", pr.b, "problem.r2", pr.r2)] {
            if coef > 0.0 && r.is_none() {
                return Err(invalid(o(r_key), format!("{r_key} is required when problem.{coef_key} > 0")));
            }
        }
        for (key, v) in [("problem.u0_sup", pr.u0_sup), ("problem.cp_hat", pr.cp_hat)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(o(key), format!("{key} must be positive, got {v}")));
                }
            }
        }
        let s = &self.solver;
        if !(s.tol >= 1e-14 && s.tol.is_finite()) {
            return Err(invalid(o("solver.tol"), format!("tol must be >= 1e-14, got {}", s.tol)));
        }
        if s.max_iter < 1 {
            return Err(invalid(o("solver.max_iter"), "max_iter must be >= 1"));
        }
        if !(s.delta_reg >= 0.0 && s.delta_reg.is_finite()) {
            return Err(invalid(o("solver.delta_reg"), "delta_reg must be >= 0"));
        }
        self.schedule()
            .validate()
            .map_err(|e| invalid(o("solver.floor"), e))?;
        if self.probes < 3 {
            return Err(invalid(o("calibration.probes"), "calibration.probes must be >= 3"));
        }

        let spec = self.spec(1.0);
        match self.command {
            Command::SolveSublinear if !spec.is_sublinear() => {
                return Err(invalid(
                    o("problem.r1"),
                    format!("solve-sublinear needs active exponents below p - 1 = {}", pr.p - 1.0),
                ))
            }
            Command::SolveSupercritical | Command::Constants | Command::SweepLambda => {
                if !spec.is_supercritical() {
                    return Err(invalid(
                        o("problem.r1"),
                        format!("{} needs active exponents above p - 1 = {}", self.command, pr.p - 1.0),
                    ));
                }
                // q only enters through the calibrated gradient constant
                let (lo, q) = (self.q_lower(), self.q());
                if pr.cp_hat.is_none() && !(q > lo && pr.alpha * q < 1.0) {
                    return Err(invalid(
                        o("problem.q"),
                        format!("q = {q} must satisfy q > max(N, p') = {lo} and alpha q < 1"),
                    ));
                }
            }
            _ => {}
        }
        if self.command == Command::SweepLambda {
            if self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(invalid(o("sweep.lambdas"), "sweep.lambdas must be positive"));
            }
            if self.lambdas.windows(2).any(|w| w[1] >= w[0]) {
                return Err(invalid(o("sweep.lambdas"), "sweep.lambdas must be strictly descending"));
            }
        }
        Ok(())
    }

    pub fn core(&self) -> CoreConfig {
        CoreConfig {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            delta_reg: self.solver.delta_reg,
            ..CoreConfig::default()
        }
    }

    pub fn schedule(&self) -> EpsSchedule {
        EpsSchedule {
            eps0: self.solver.eps0,
            factor: self.solver.factor,
            floor: self.solver.floor,
            ..EpsSchedule::default()
        }
    }

    /// Convection with unset exponents of zero coefficients filled by `p`.
    pub fn convection(&self) -> ConvectionSpec {
        let pr = &self.problem;
        ConvectionSpec {
            a: pr.a,
            b: pr.b,
            r1: pr.r1.unwrap_or(pr.p),
            r2: pr.r2.unwrap_or(pr.p),
        }
    }

    pub fn spec(&self, lambda: f64) -> ProblemSpec {
        ProblemSpec {
            p: self.problem.p,
            alpha: self.problem.alpha,
            lambda,
            convection: self.convection(),
        }
    }

    fn q_lower(&self) -> f64 {
        let p = self.problem.p;
        (self.grid.dim as f64).max(p / (p - 1.0))
    }

    /// `problem.q`, defaulting to the midpoint of `(max(N, p'), 1/α)`.
    pub fn q(&self) -> f64 {
        self.problem
            .q
            .unwrap_or_else(|| 0.5 * (self.q_lower() + 1.0 / self.problem.alpha))
    }

    pub fn writes(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

/// Reads the optional file, applies overrides in order, and validates.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut raw = match path {
        Some(p) => RawConfig::from_file(p)?,
        None => RawConfig::default(),
    };
    for s in overrides {
        raw.set(s)?;
    }
    RunConfig::from_raw(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_raw(&RawConfig::parse_str(text, Path::new("run.ini"))?)
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse("command = eigen\np = 2\ndim = 1\nn = 511\n").unwrap();
        assert_eq!(c.command, Command::Eigen);
        assert_eq!(c.grid.n, vec![511]);
        assert_eq!(c.grid.extent, vec![(0.0, 1.0)]);
        assert_eq!(c.seed, 42);
        assert_eq!(c.solver.floor, EpsSchedule::default().floor);
    }

    #[test]
    fn blocks_and_dotted_keys_agree() {
        let a = parse("command=solve-u0\n[grid]\nn = 63\n[problem]\nalpha = 0.25\n").unwrap();
        let b = parse("command=solve-u0\ngrid.n=63\nproblem.alpha=0.25\n").unwrap();
        assert_eq!(a.grid, b.grid);
        assert_eq!(a.problem, b.problem);
    }

    #[test]
    fn alpha_out_of_range() {
        let e = parse("command=solve-u0\nalpha=1.5\n").unwrap_err().to_string();
        assert!(e.contains("alpha must lie in (0,1)"), "{e}");
        assert!(e.contains("run.ini:2"), "{e}");
    }

    #[test]
    fn excluded_exponent() {
        let e = parse("command=solve-supercritical\np=2\na=1\nr1=1.0\nr2=2\n").unwrap_err().to_string();
        assert!(e.contains("excluded"), "{e}");
    }

    #[test]
    fn unknown_key_names_line() {
        let e = parse("command=eigen\n\n# note\nfoo = 1\n").unwrap_err().to_string();
        assert!(e.contains("run.ini:4") && e.contains("unknown key `foo`"), "{e}");
    }

    #[test]
    fn overrides_win_and_are_named() {
        let mut raw = RawConfig::parse_str("command=eigen\nn=15\n", Path::new("x")).unwrap();
        raw.set("grid.n=31").unwrap();
        assert_eq!(RunConfig::from_raw(&raw).unwrap().grid.n, vec![31]);
        raw.set("p=abc").unwrap();
        let e = RunConfig::from_raw(&raw).unwrap_err().to_string();
        assert!(e.contains("--set p=abc"), "{e}");
        assert!(raw.set("nonsense").is_err());
    }

    #[test]
    fn regime_and_integrability_checks() {
        assert!(parse("command=solve-sublinear\na=1\nr1=2\n").is_err());
        assert!(parse("command=constants\nalpha=0.5\na=1\nr1=3\np=2\n").is_err());
        assert!(parse("command=constants\nalpha=0.5\na=1\nr1=3\np=2\ncp_hat=1\nu0_sup=1\n").is_ok());
        let c = parse("command=constants\nalpha=0.25\na=1\nr1=3\np=2\n").unwrap();
        assert!(c.q() > 2.0 && c.q() * 0.25 < 1.0);
    }

    #[test]
    fn sweep_needs_descending_lambdas() {
        assert!(parse("command=sweep-lambda\nalpha=0.25\nlambdas=0.1,0.2\n").is_err());
        assert!(parse("command=sweep-lambda\nalpha=0.25\nlambdas=0.1,0.01\n").is_ok());
    }
}
