//! Command-line front end. Every command writes a JSON report
//! (`{command, config, problem_digest, results, verdict, warnings, timestamp}`)
//! and exits with 0 (verdict pass), 1 (verdict fail) or 2 (input or runtime
//! error). `penalty-path` also writes a CSV of the penalty path.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::certify::{abadie_check, check_cq, fritz_john_sweep, isolated_sufficient, Tolerances};
use crate::error::{Error, Result};
use crate::expr::EvalError;
use crate::extended_real::ExtReal;
use crate::hadamard::{
    hadamard_diff_check, lower_hadamard, sample_unit_directions, tangent_cone_member,
    SamplingSchedule,
};
use crate::penalty::{
    exactness_threshold, gamma_grid, isolated_growth_check, GridSearch, Penalty, PenaltyPathResult,
};
use crate::problem::{parse_problem, Candidate, ProblemInstance};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    /// Lower Hadamard derivative estimates of one function
    Derivative,
    /// Contingent cone membership of directions
    Tangent,
    /// Penalty path over a grid of weights and the exactness threshold
    PenaltyPath,
    /// Constraint qualification d(x) <= -a near the candidate
    CheckCq,
    /// Fritz John certificates per direction
    CertifyFj,
    /// Strict certificates (isolated minimum), optionally the growth check
    CertifyIsolated,
    /// Tangent cone vs linearized cone comparison
    CheckAbadie,
}

impl CommandKind {
    fn name(self) -> &'static str {
        match self {
            CommandKind::Derivative => "derivative",
            CommandKind::Tangent => "tangent",
            CommandKind::PenaltyPath => "penalty-path",
            CommandKind::CheckCq => "check-cq",
            CommandKind::CertifyFj => "certify-fj",
            CommandKind::CertifyIsolated => "certify-isolated",
            CommandKind::CheckAbadie => "check-abadie",
        }
    }
}

#[derive(Clone, Debug, Parser)]
#[command(
    name = "optcert",
    version,
    about = "Optimality certificates via exact penalty functions"
)]
pub struct CommandSpec {
    #[arg(value_enum)]
    pub command: CommandKind,
    /// Problem file (TOML with [problem] and [candidate] sections)
    pub problem_path: PathBuf,
    /// Write the JSON report here instead of stdout
    #[arg(long = "out")]
    pub output_path: Option<PathBuf>,
    /// CSV path for penalty-path (defaults to the --out path with .csv)
    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Penalty weight; when absent, certificates use threshold + 1
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 0.25)]
    pub gamma_step: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub match_tol: f64,
    /// CQ margin bound a > 0 (check-cq)
    #[arg(long)]
    pub a: Option<f64>,
    /// Growth constant A > 0; enables the growth check in certify-isolated
    #[arg(long = "growth-A")]
    pub growth_a: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub growth_samples: usize,
    #[arg(long, default_value_t = 64)]
    pub dirs: usize,
    #[arg(long, default_value_t = 32)]
    pub points: usize,

    #[arg(long, default_value_t = SamplingSchedule::default().t0)]
    pub t0: f64,
    #[arg(long, default_value_t = SamplingSchedule::default().ratio)]
    pub ratio: f64,
    #[arg(long, default_value_t = SamplingSchedule::default().levels)]
    pub levels: usize,
    #[arg(long, default_value_t = SamplingSchedule::default().samples_per_level)]
    pub samples: usize,
    #[arg(long, default_value_t = SamplingSchedule::default().dir_radius_factor)]
    pub dir_radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = Tolerances::default().zero_tol)]
    pub zero_tol: f64,
    #[arg(long, default_value_t = Tolerances::default().diff_tol)]
    pub diff_tol: f64,

    /// Comma-separated direction (normalised); default samples --dirs directions
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
    /// Function for `derivative`: f, F, h, g<i> or h<j>
    #[arg(long, default_value = "f")]
    pub target: String,
    /// Set for `derivative` (default X) and `tangent` (default G): X, G or S
    #[arg(long)]
    pub set: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub problem_digest: String,
    pub results: Value,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
    pub timestamp: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match CommandSpec::try_parse_from(args) {
        Ok(spec) => run(&spec),
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            code
        }
    }
}

/// Runs a command and writes its outputs; returns the process exit code.
pub fn run(spec: &CommandSpec) -> i32 {
    match execute(spec).and_then(|(report, csv)| emit(spec, &report, csv.as_ref()).map(|_| report))
    {
        Ok(report) => match report.verdict {
            Verdict::Pass => EXIT_PASS,
            Verdict::Fail => EXIT_FAIL,
        },
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn emit(spec: &CommandSpec, report: &Report, csv: Option<&PenaltyPathResult>) -> Result<()> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Format(format!("cannot serialise report: {e}")))?;
    match &spec.output_path {
        Some(path) => fs::write(path, json + "\n").map_err(io_err(path))?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{json}").map_err(io_err(Path::new("<stdout>")))?;
        }
    }
    if let Some(path) = csv_path(spec) {
        if let Some(path_result) = csv {
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            path_result.write_csv(file)?;
        }
    }
    Ok(())
}

fn csv_path(spec: &CommandSpec) -> Option<PathBuf> {
    spec.csv
        .clone()
        .or_else(|| spec.output_path.as_ref().map(|p| p.with_extension("csv")))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "--{name} must be positive, got {v}"
        )))
    }
}

fn validate_flags(spec: &CommandSpec) -> Result<()> {
    positive("gamma-step", spec.gamma_step)?;
    positive("grid-step", spec.grid_step)?;
    positive("match-tol", spec.match_tol)?;
    positive("zero-tol", spec.zero_tol)?;
    positive("diff-tol", spec.diff_tol)?;
    if !(spec.gamma_max.is_finite() && spec.gamma_max >= 0.0) {
        return Err(Error::InvalidArgument(
            "--gamma-max must be nonnegative".into(),
        ));
    }
    if let Some(g) = spec.gamma {
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidArgument("--gamma must be nonnegative".into()));
        }
    }
    if let Some(a) = spec.a {
        positive("a", a)?;
    }
    if let Some(a) = spec.growth_a {
        positive("growth-A", a)?;
    }
    for (name, v) in [
        ("dirs", spec.dirs),
        ("points", spec.points),
        ("growth-samples", spec.growth_samples),
    ] {
        if v == 0 {
            return Err(Error::InvalidArgument(format!("--{name} must be positive")));
        }
    }
    schedule(spec).validate()
}

fn schedule(spec: &CommandSpec) -> SamplingSchedule {
    SamplingSchedule {
        t0: spec.t0,
        ratio: spec.ratio,
        levels: spec.levels,
        samples_per_level: spec.samples,
        dir_radius_factor: spec.dir_radius,
        seed: spec.seed,
    }
}

fn tolerances(spec: &CommandSpec) -> Tolerances {
    Tolerances {
        zero_tol: spec.zero_tol,
        diff_tol: spec.diff_tol,
    }
}

fn direction_seed(spec: &CommandSpec) -> u64 {
    spec.seed.wrapping_add(1)
}

fn point_seed(spec: &CommandSpec) -> u64 {
    spec.seed.wrapping_add(2)
}

fn to_json<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Format(format!("cannot serialise results: {e}")))
}

fn directions(spec: &CommandSpec, dim: usize) -> Result<Vec<Vec<f64>>> {
    let Some(text) = &spec.direction else {
        return Ok(sample_unit_directions(spec.dirs, dim, direction_seed(spec)));
    };
    let u = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidArgument(format!("--direction `{text}`: {e}")))?;
    if u.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "--direction has {} components, dim is {dim}",
            u.len()
        )));
    }
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::InvalidArgument(
            "--direction must be a nonzero finite vector".into(),
        ));
    }
    Ok(vec![u.into_iter().map(|v| v / norm).collect()])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
enum SetKind {
    X,
    G,
    S,
}

fn set_kind(spec: &CommandSpec, default: SetKind) -> Result<SetKind> {
    match spec.set.as_deref() {
        None => Ok(default),
        Some("X" | "x") => Ok(SetKind::X),
        Some("G" | "g") => Ok(SetKind::G),
        Some("S" | "s") => Ok(SetKind::S),
        Some(other) => Err(Error::InvalidArgument(format!(
            "--set `{other}`: expected X, G or S"
        ))),
    }
}

fn member<'a>(
    p: &'a ProblemInstance,
    kind: SetKind,
    tol: f64,
) -> impl Fn(&[f64]) -> std::result::Result<bool, EvalError> + 'a {
    move |y: &[f64]| match kind {
        SetKind::X => p.in_x(y, tol),
        SetKind::G => p.in_g(y, tol),
        SetKind::S => p.in_s(y, tol),
    }
}

/// Resolves the penalty weight: `--gamma`, or the exactness threshold plus one.
fn resolve_gamma(
    spec: &CommandSpec,
    p: &ProblemInstance,
    cand: &Candidate,
) -> Result<(f64, Value)> {
    if let Some(g) = spec.gamma {
        return Ok((g, json!({ "source": "flag", "gamma": g })));
    }
    let path = penalty_path(spec, p, cand)?;
    match path.threshold_s {
        Some(s) => Ok((
            s + 1.0,
            json!({ "source": "threshold+1", "gamma": s + 1.0, "threshold_s": s }),
        )),
        None => Err(Error::InvalidArgument(
            "no exactness threshold on the gamma grid; pass --gamma or raise --gamma-max".into(),
        )),
    }
}

fn penalty_path(
    spec: &CommandSpec,
    p: &ProblemInstance,
    cand: &Candidate,
) -> Result<PenaltyPathResult> {
    let search = GridSearch {
        delta: cand.delta,
        grid_step: spec.grid_step,
        feas_tol: cand.feas_tol,
    };
    exactness_threshold(
        p,
        &cand.x_bar,
        &gamma_grid(spec.gamma_max, spec.gamma_step)?,
        &search,
        spec.match_tol,
    )
}

struct Outcome {
    results: Value,
    verdict: Verdict,
    warnings: Vec<String>,
    extra_config: Value,
    csv: Option<PenaltyPathResult>,
}

impl Outcome {
    fn new(results: Value, pass: bool) -> Self {
        Outcome {
            results,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            warnings: Vec::new(),
            extra_config: Value::Null,
            csv: None,
        }
    }
}

/// Computes the report without writing anything.
pub fn execute(spec: &CommandSpec) -> Result<(Report, Option<PenaltyPathResult>)> {
    validate_flags(spec)?;
    let bytes = fs::read(&spec.problem_path).map_err(|source| Error::Io {
        path: spec.problem_path.clone(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Format("problem file is not UTF-8".into()))?;
    let (p, cand) = parse_problem(&text)?;
    let sched = schedule(spec);
    let tols = tolerances(spec);

    let outcome = match spec.command {
        CommandKind::Derivative => derivative(spec, &p, &cand, &sched, &tols)?,
        CommandKind::Tangent => tangent(spec, &p, &cand, &sched)?,
        CommandKind::PenaltyPath => {
            let path = penalty_path(spec, &p, &cand)?;
            let mut o = Outcome::new(
                json!({
                    "threshold_s": path.threshold_s,
                    "monotonicity_violations": path.monotonicity_violations(),
                    "path": to_json(&path)?,
                }),
                path.threshold_s.is_some(),
            );
            o.csv = Some(path);
            o
        }
        CommandKind::CheckCq => {
            let a = spec
                .a
                .ok_or_else(|| Error::InvalidArgument("check-cq requires --a".into()))?;
            let report = check_cq(
                &p,
                &cand,
                a,
                spec.points,
                spec.dirs,
                &sched,
                point_seed(spec),
            )?;
            Outcome::new(to_json(&report)?, report.pass)
        }
        CommandKind::CertifyFj => {
            let (gamma, gamma_info) = resolve_gamma(spec, &p, &cand)?;
            let sweep = fritz_john_sweep(
                &p,
                &cand,
                gamma,
                spec.dirs,
                &sched,
                direction_seed(spec),
                &tols,
            )?;
            let violated: Vec<&Vec<f64>> = sweep
                .per_direction
                .iter()
                .filter(|d| d.certificate.is_none())
                .map(|d| &d.data.vector.direction)
                .collect();
            let mut o = Outcome::new(
                json!({
                    "gamma": gamma_info,
                    "directions": sweep.per_direction.len(),
                    "certificates": sweep.per_direction.iter().filter(|d| d.certificate.is_some()).count(),
                    "violated_directions": violated,
                    "per_direction": to_json(&sweep.per_direction)?,
                }),
                sweep.certified,
            );
            o.warnings = sweep.warnings();
            o
        }
        CommandKind::CertifyIsolated => {
            let (gamma, gamma_info) = resolve_gamma(spec, &p, &cand)?;
            let sweep = isolated_sufficient(
                &p,
                &cand,
                gamma,
                spec.dirs,
                &sched,
                direction_seed(spec),
                &tols,
            )?;
            let growth = match spec.growth_a {
                Some(a) => {
                    let search = GridSearch {
                        delta: cand.delta,
                        grid_step: spec.grid_step,
                        feas_tol: cand.feas_tol,
                    };
                    Some(isolated_growth_check(
                        &p,
                        &cand.x_bar,
                        gamma,
                        a,
                        spec.growth_samples,
                        point_seed(spec),
                        &search,
                    )?)
                }
                None => None,
            };
            let pass = sweep.certified && growth.as_ref().is_none_or(|g| g.holds);
            let mut o = Outcome::new(
                json!({
                    "gamma": gamma_info,
                    "certified": sweep.certified,
                    "directions": sweep.per_direction.len(),
                    "per_direction": to_json(&sweep.per_direction)?,
                    "growth_check": to_json(&growth)?,
                }),
                pass,
            );
            o.warnings = sweep.warnings();
            o
        }
        CommandKind::CheckAbadie => {
            let report = abadie_check(&p, &cand, spec.dirs, &sched, direction_seed(spec), &tols)?;
            Outcome::new(to_json(&report)?, report.pass)
        }
    };

    let mut warnings = outcome.warnings;
    if p.lipschitz.is_none()
        && matches!(
            spec.command,
            CommandKind::CertifyFj | CommandKind::PenaltyPath
        )
    {
        warnings.push("no Lipschitz constant given for f; it is a hypothesis of the exactness result and is not checked".into());
    }
    let mut config = json!({
        "problem_path": spec.problem_path.display().to_string(),
        "problem": describe_problem(&p),
        "candidate": to_json(&cand)?,
        "schedule": to_json(&sched)?,
        "tolerances": to_json(&tols)?,
        "gamma": spec.gamma,
        "gamma_max": spec.gamma_max,
        "gamma_step": spec.gamma_step,
        "grid_step": spec.grid_step,
        "match_tol": spec.match_tol,
        "a": spec.a,
        "growth_A": spec.growth_a,
        "growth_samples": spec.growth_samples,
        "dirs": spec.dirs,
        "points": spec.points,
        "seed": spec.seed,
        "direction_seed": direction_seed(spec),
        "point_seed": point_seed(spec),
        "direction": spec.direction,
        "target": spec.target,
        "set": spec.set,
    });
    if !outcome.extra_config.is_null() {
        config["command_specific"] = outcome.extra_config;
    }
    let report = Report {
        command: spec.command.name().to_string(),
        config,
        problem_digest: hex::encode(Sha256::digest(&bytes)),
        results: outcome.results,
        verdict: outcome.verdict,
        warnings,
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    Ok((report, outcome.csv))
}

fn describe_problem(p: &ProblemInstance) -> Value {
    let ext = |v: &[f64]| -> Vec<ExtReal> {
        v.iter()
            .map(|x| ExtReal::new(*x).unwrap_or(ExtReal::ZERO))
            .collect()
    };
    let show = |es: &[crate::expr::Expr]| es.iter().map(|e| e.to_string()).collect::<Vec<_>>();
    json!({
        "dim": p.dim,
        "objective": p.objective.to_string(),
        "inequalities": show(&p.inequalities),
        "equalities": show(&p.equalities),
        "set_lower": ext(&p.box_lower),
        "set_upper": ext(&p.box_upper),
        "set_constraints": show(&p.set_constraints),
        "lipschitz": p.lipschitz,
    })
}

type ScalarFn<'a> = Box<dyn Fn(&[f64]) -> std::result::Result<f64, EvalError> + Sync + 'a>;

fn derivative(
    spec: &CommandSpec,
    p: &ProblemInstance,
    cand: &Candidate,
    sched: &SamplingSchedule,
    tols: &Tolerances,
) -> Result<Outcome> {
    let kind = set_kind(spec, SetKind::X)?;
    let tol = cand.feas_tol;
    let x_bar = cand.x_bar.as_slice();
    let gamma = spec.gamma;
    let target = spec.target.as_str();
    let function: ScalarFn<'_> = match target {
        "f" => Box::new(|y: &[f64]| p.objective_value(y)),
        "h" => Box::new(|y: &[f64]| p.h_aggregate(y)),
        "F" => {
            let g =
                gamma.ok_or_else(|| Error::InvalidArgument("--target F needs --gamma".into()))?;
            let pen = Penalty::new(p, x_bar, g)?;
            Box::new(move |y: &[f64]| pen.formula(y))
        }
        other => {
            let index = |prefix: &str, len: usize| -> Option<usize> {
                let k: usize = other.strip_prefix(prefix)?.parse().ok()?;
                (1..=len).contains(&k).then_some(k - 1)
            };
            if let Some(i) = index("g", p.inequalities.len()) {
                let e = &p.inequalities[i];
                Box::new(move |y: &[f64]| e.eval(y))
            } else if let Some(j) = index("h", p.equalities.len()) {
                let e = &p.equalities[j];
                Box::new(move |y: &[f64]| e.eval(y))
            } else {
                return Err(Error::InvalidArgument(format!(
                    "--target `{other}`: expected f, F, h, g1..g{} or h1..h{}",
                    p.inequalities.len(),
                    p.equalities.len()
                )));
            }
        }
    };
    let in_set = member(p, kind, tol);
    let mut rows = Vec::new();
    let mut all_nonneg = true;
    let floor = ExtReal::new(-tols.zero_tol)?;
    for u in directions(spec, p.dim)? {
        let est = lower_hadamard(&function, &in_set, x_bar, &u, sched)?;
        let diff = hadamard_diff_check(&function, &in_set, x_bar, &u, sched, tols.diff_tol)?;
        all_nonneg &= est.value >= floor;
        rows.push(json!({
            "direction": u,
            "lower_hadamard": to_json(&est)?,
            "hadamard_differentiable": diff.differentiable,
            "hadamard_value": diff.value,
            "spread": diff.spread,
        }));
    }
    let mut o = Outcome::new(
        json!({ "target": target, "set": kind, "per_direction": rows, "all_nonnegative": all_nonneg }),
        all_nonneg,
    );
    o.extra_config = json!({ "set_resolved": kind });
    Ok(o)
}

fn tangent(
    spec: &CommandSpec,
    p: &ProblemInstance,
    cand: &Candidate,
    sched: &SamplingSchedule,
) -> Result<Outcome> {
    let kind = set_kind(spec, SetKind::G)?;
    let in_set = member(p, kind, cand.feas_tol);
    let mut rows = Vec::new();
    for u in directions(spec, p.dim)? {
        let inside = tangent_cone_member(&in_set, &cand.x_bar, &u, sched)?;
        rows.push(json!({ "direction": u, "in_cone": inside }));
    }
    let mut o = Outcome::new(json!({ "set": kind, "per_direction": rows }), true);
    o.extra_config = json!({ "set_resolved": kind });
    Ok(o)
}
