//! Problem (P): minimize `f` over `x ∈ X` subject to `g_i(x) ≤ 0`, `h_j(x) = 0`.
//!
//! `X` is a box intersected with `{x : c(x) ≤ 0}` for the extra set
//! constraints, hence closed. The derived sets are
//! `G = {x ∈ X : g_i(x) ≤ 0}` and `S = {x ∈ G : h(x) = 0}` with
//! `h = Σ h_j²`. All membership tests are tolerance based.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, EvalError, Expr};

pub const DEFAULT_FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub dim: usize,
    pub objective: Expr,
    pub inequalities: Vec<Expr>,
    pub equalities: Vec<Expr>,
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
    pub set_constraints: Vec<Expr>,
    /// Lipschitz constant of `f` near the candidate. Carried as metadata only.
    pub lipschitz: Option<f64>,
}

/// The candidate `x̄` together with the radius `δ` of `N_δ(x̄)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub x_bar: Vec<f64>,
    pub delta: f64,
    pub feas_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub in_x: bool,
    pub in_g: bool,
    pub in_s: bool,
    /// Zero-based indices into `inequalities` with `|g_i(x)| ≤ tol`.
    pub active_set: Vec<usize>,
}

/// Builder taking expression sources, parsed on [`ProblemBuilder::build`].
#[derive(Clone, Debug, Default)]
pub struct ProblemBuilder {
    dim: usize,
    objective: String,
    inequalities: Vec<String>,
    equalities: Vec<String>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    set_constraints: Vec<String>,
    lipschitz: Option<f64>,
}

impl ProblemBuilder {
    pub fn objective(mut self, text: &str) -> Self {
        self.objective = text.to_string();
        self
    }

    pub fn inequality(mut self, text: &str) -> Self {
        self.inequalities.push(text.to_string());
        self
    }

    pub fn equality(mut self, text: &str) -> Self {
        self.equalities.push(text.to_string());
        self
    }

    pub fn set_constraint(mut self, text: &str) -> Self {
        self.set_constraints.push(text.to_string());
        self
    }

    pub fn bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    pub fn lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn build(self) -> Result<ProblemInstance> {
        let dim = self.dim;
        if dim == 0 {
            return Err(Error::Format("dim must be a positive integer".into()));
        }
        let parse_one = |field: String, text: &str| {
            expr::parse(text, dim).map_err(|source| Error::Parse { field, source })
        };
        let parse_all = |name: &str, texts: &[String]| {
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| parse_one(format!("{name}[{i}]"), t))
                .collect::<Result<Vec<_>>>()
        };
        let objective = parse_one("objective".into(), &self.objective)?;
        let inequalities = parse_all("inequalities", &self.inequalities)?;
        let equalities = parse_all("equalities", &self.equalities)?;
        let set_constraints = parse_all("set_constraints", &self.set_constraints)?;
        let box_lower = self.lower.unwrap_or_else(|| vec![f64::NEG_INFINITY; dim]);
        let box_upper = self.upper.unwrap_or_else(|| vec![f64::INFINITY; dim]);
        for (name, b) in [("set_lower", &box_lower), ("set_upper", &box_upper)] {
            if b.len() != dim {
                return Err(Error::Format(format!(
                    "{name} has {} entries, dim is {dim}",
                    b.len()
                )));
            }
            if b.iter().any(|v| v.is_nan()) {
                return Err(Error::Format(format!("{name} contains NaN")));
            }
        }
        if let Some(i) = (0..dim).find(|&i| box_lower[i] > box_upper[i]) {
            return Err(Error::Format(format!(
                "set_lower[{i}] = {} exceeds set_upper[{i}] = {}",
                box_lower[i], box_upper[i]
            )));
        }
        if let Some(l) = self.lipschitz {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Format(format!(
                    "lipschitz must be positive, got {l}"
                )));
            }
        }
        Ok(ProblemInstance {
            dim,
            objective,
            inequalities,
            equalities,
            box_lower,
            box_upper,
            set_constraints,
            lipschitz: self.lipschitz,
        })
    }
}

impl ProblemInstance {
    pub fn builder(dim: usize) -> ProblemBuilder {
        ProblemBuilder {
            dim,
            ..ProblemBuilder::default()
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), EvalError> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(EvalError::Dimension {
                expected: self.dim,
                got: x.len(),
            })
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(x)?;
        self.objective.eval(x)
    }

    /// `h(x) = Σ_j h_j(x)²`; zero when there are no equalities.
    pub fn h_aggregate(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(x)?;
        self.equalities.iter().try_fold(0.0, |acc, h| {
            let v = h.eval(x)?;
            Ok(acc + v * v)
        })
    }

    pub fn in_x(&self, x: &[f64], tol: f64) -> Result<bool, EvalError> {
        self.check_dim(x)?;
        let in_box = x
            .iter()
            .zip(self.box_lower.iter().zip(&self.box_upper))
            .all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol);
        if !in_box {
            return Ok(false);
        }
        for c in &self.set_constraints {
            if c.eval(x)? > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn in_g(&self, x: &[f64], tol: f64) -> Result<bool, EvalError> {
        if !self.in_x(x, tol)? {
            return Ok(false);
        }
        for g in &self.inequalities {
            if g.eval(x)? > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn in_s(&self, x: &[f64], tol: f64) -> Result<bool, EvalError> {
        Ok(self.in_g(x, tol)? && self.h_aggregate(x)? <= tol * tol)
    }

    /// Zero-based indices `i` with `|g_i(x)| ≤ tol`.
    pub fn active_set(&self, x: &[f64], tol: f64) -> Result<Vec<usize>, EvalError> {
        self.check_dim(x)?;
        let mut active = Vec::new();
        for (i, g) in self.inequalities.iter().enumerate() {
            if g.eval(x)?.abs() <= tol {
                active.push(i);
            }
        }
        Ok(active)
    }

    pub fn classify(&self, x: &[f64], tol: f64) -> Result<Classification> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("point {x:?} is not finite")));
        }
        let in_x = self.in_x(x, tol)?;
        let in_g = in_x && self.in_g(x, tol)?;
        let in_s = in_g && self.h_aggregate(x)? <= tol * tol;
        let active_set = self.active_set(x, tol)?;
        Ok(Classification {
            in_x,
            in_g,
            in_s,
            active_set,
        })
    }

    /// Checks the candidate's parameters and that `x̄ ∈ S`.
    pub fn validate_candidate(&self, cand: &Candidate) -> Result<()> {
        if cand.x_bar.len() != self.dim {
            return Err(Error::Format(format!(
                "candidate point has {} entries, dim is {}",
                cand.x_bar.len(),
                self.dim
            )));
        }
        if !(cand.delta.is_finite() && cand.delta > 0.0) {
            return Err(Error::Format(format!(
                "delta must be positive, got {}",
                cand.delta
            )));
        }
        if !(cand.feas_tol.is_finite() && cand.feas_tol > 0.0) {
            return Err(Error::Format(format!(
                "feas_tol must be positive, got {}",
                cand.feas_tol
            )));
        }
        let class = self.classify(&cand.x_bar, cand.feas_tol)?;
        if !class.in_s {
            let which = if !class.in_x {
                "outside X"
            } else if !class.in_g {
                "violates an inequality"
            } else {
                "violates an equality"
            };
            return Err(Error::CandidateInfeasible(format!(
                "{:?} {which}",
                cand.x_bar
            )));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    problem: ProblemSection,
    candidate: CandidateSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    dim: i64,
    objective: String,
    #[serde(default)]
    inequalities: Vec<String>,
    #[serde(default)]
    equalities: Vec<String>,
    set_lower: Option<Vec<BoundEntry>>,
    set_upper: Option<Vec<BoundEntry>>,
    #[serde(default)]
    set_constraints: Vec<String>,
    lipschitz: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateSection {
    point: Vec<f64>,
    delta: f64,
    feas_tol: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BoundEntry {
    Number(f64),
    Text(String),
}

impl BoundEntry {
    fn value(&self) -> Result<f64> {
        match self {
            BoundEntry::Number(v) => Ok(*v),
            BoundEntry::Text(s) => match s.as_str() {
                "-inf" => Ok(f64::NEG_INFINITY),
                "+inf" | "inf" => Ok(f64::INFINITY),
                other => Err(Error::Format(format!("bad bound `{other}`"))),
            },
        }
    }
}

/// Parses a problem file held in memory.
pub fn parse_problem(text: &str) -> Result<(ProblemInstance, Candidate)> {
    let file: ProblemFile =
        toml::from_str(text).map_err(|e| Error::Format(e.message().to_string()))?;
    let sec = file.problem;
    if sec.dim <= 0 {
        return Err(Error::Format(format!(
            "dim must be positive, got {}",
            sec.dim
        )));
    }
    let dim = sec.dim as usize;
    let mut builder = ProblemInstance::builder(dim).objective(&sec.objective);
    for g in &sec.inequalities {
        builder = builder.inequality(g);
    }
    for h in &sec.equalities {
        builder = builder.equality(h);
    }
    for c in &sec.set_constraints {
        builder = builder.set_constraint(c);
    }
    let bound = |entries: Option<Vec<BoundEntry>>, default: f64| -> Result<Vec<f64>> {
        match entries {
            None => Ok(vec![default; dim]),
            Some(v) => v.iter().map(BoundEntry::value).collect(),
        }
    };
    builder = builder.bounds(
        bound(sec.set_lower, f64::NEG_INFINITY)?,
        bound(sec.set_upper, f64::INFINITY)?,
    );
    if let Some(l) = sec.lipschitz {
        builder = builder.lipschitz(l);
    }
    let problem = builder.build()?;
    let cand = Candidate {
        x_bar: file.candidate.point,
        delta: file.candidate.delta,
        feas_tol: file.candidate.feas_tol.unwrap_or(DEFAULT_FEAS_TOL),
    };
    problem.validate_candidate(&cand)?;
    Ok((problem, cand))
}

/// Reads and parses a problem file. The candidate must lie in `S`.
pub fn load_problem(path: impl AsRef<Path>) -> Result<(ProblemInstance, Candidate)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_problem(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ParseError;
    use proptest::prelude::*;

    const EX_PEN: &str = r#"
[problem]
dim = 2
objective = "-x1"
equalities = ["sqrt(abs(x1))"]
set_lower = [-1, -1]
set_upper = [1, 1]

[candidate]
point = [0, 0]
delta = 0.75
"#;

    fn ex_fj() -> ProblemInstance {
        ProblemInstance::builder(1)
            .objective("-x1")
            .inequality("x1")
            .bounds(vec![-1.0], vec![1.0])
            .build()
            .unwrap()
    }

    #[test]
    fn loads_ex_pen() {
        let (p, c) = parse_problem(EX_PEN).unwrap();
        assert_eq!((p.dim, p.inequalities.len(), p.equalities.len()), (2, 0, 1));
        assert_eq!(c.x_bar, vec![0.0, 0.0]);
        assert_eq!(c.feas_tol, DEFAULT_FEAS_TOL);
        assert_eq!(p.box_upper, vec![1.0, 1.0]);
    }

    #[test]
    fn infinite_bounds_as_strings() {
        let text = EX_PEN
            .replace("set_lower = [-1, -1]", r#"set_lower = ["-inf", -1.5]"#)
            .replace("set_upper = [1, 1]", r#"set_upper = [1, "+inf"]"#);
        let (p, _) = parse_problem(&text).unwrap();
        assert_eq!(p.box_lower, vec![f64::NEG_INFINITY, -1.5]);
        assert_eq!(p.box_upper, vec![1.0, f64::INFINITY]);
    }

    #[test]
    fn point_length_mismatch_is_format_error() {
        let text = EX_PEN.replace("point = [0, 0]", "point = [0]");
        assert!(matches!(parse_problem(&text), Err(Error::Format(_))));
    }

    #[test]
    fn unknown_function_in_objective() {
        let text = EX_PEN.replace(r#"objective = "-x1""#, r#"objective = "foo(x1)""#);
        assert!(matches!(
            parse_problem(&text),
            Err(Error::Parse {
                source: ParseError::UnknownIdentifier { .. },
                ..
            })
        ));
    }

    #[test]
    fn missing_section_and_infeasible_candidate() {
        assert!(matches!(
            parse_problem("[problem]\ndim = 1\nobjective = \"x1\"\n"),
            Err(Error::Format(_))
        ));
        let text = EX_PEN.replace("point = [0, 0]", "point = [0.5, 0]");
        assert!(matches!(
            parse_problem(&text),
            Err(Error::CandidateInfeasible(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_problem("/nonexistent/problem.toml"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn classify_examples() {
        let p = ex_fj();
        let c = p.classify(&[0.0], 1e-9).unwrap();
        assert!(c.in_x && c.in_g && c.in_s);
        assert_eq!(c.active_set, vec![0]);
        let c = p.classify(&[0.5], 1e-9).unwrap();
        assert!(c.in_x && !c.in_g);

        let (pen, _) = parse_problem(EX_PEN).unwrap();
        let c = pen.classify(&[0.3, 0.0], 1e-9).unwrap();
        assert!(c.in_g && !c.in_s);
    }

    #[test]
    fn h_aggregate_examples() {
        let p = ProblemInstance::builder(2)
            .objective("0")
            .equality("x1")
            .equality("x2")
            .build()
            .unwrap();
        assert_eq!(p.h_aggregate(&[1.0, 2.0]).unwrap(), 5.0);
        let p = ProblemInstance::builder(2).objective("0").build().unwrap();
        assert_eq!(p.h_aggregate(&[3.0, -7.0]).unwrap(), 0.0);
        let p = ProblemInstance::builder(1)
            .objective("0")
            .equality("sqrt(abs(x1))")
            .build()
            .unwrap();
        assert_eq!(p.h_aggregate(&[0.25]).unwrap(), 0.25);
    }

    #[test]
    fn inverted_box_rejected() {
        let err = ProblemInstance::builder(1)
            .objective("x1")
            .bounds(vec![1.0], vec![0.0])
            .build();
        assert!(matches!(err, Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn classification_chain(x1 in -2.0f64..2.0, x2 in -2.0f64..2.0) {
            let p = ProblemInstance::builder(2)
                .objective("x1")
                .inequality("x1 + x2 - 1")
                .equality("x1 - x2")
                .set_constraint("x1^2 + x2^2 - 2")
                .bounds(vec![-1.5, -1.5], vec![1.5, 1.5])
                .build()
                .unwrap();
            let c = p.classify(&[x1, x2], 1e-9).unwrap();
            prop_assert!(!c.in_s || c.in_g);
            prop_assert!(!c.in_g || c.in_x);
            prop_assert!(p.h_aggregate(&[x1, x2]).unwrap() >= 0.0);
        }
    }
}
