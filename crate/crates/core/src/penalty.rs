//! The penalty function `F(x, γ) = f(x) + γ·h(x) + ½‖x − x̄‖²` on `G`, its
//! brute-force minimisation over `G_δ = G ∩ N_δ(x̄)`, the empirical exactness
//! threshold along a grid of penalty weights, and the linear growth check
//! `F(x, γ) ≥ F(x̄, γ) + A‖x − x̄‖`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::EvalError;
use crate::problem::ProblemInstance;

/// Upper bound on the number of lattice points enumerated by a grid search.
pub const MAX_GRID_POINTS: usize = 200_000_000;

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `F(·, γ)` for a fixed centre `x̄` and weight `γ`.
#[derive(Clone, Copy, Debug)]
pub struct Penalty<'a> {
    problem: &'a ProblemInstance,
    center: &'a [f64],
    gamma: f64,
}

impl<'a> Penalty<'a> {
    pub fn new(problem: &'a ProblemInstance, center: &'a [f64], gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "penalty weight must be a nonnegative real, got {gamma}"
            )));
        }
        if center.len() != problem.dim {
            return Err(Error::LengthMismatch {
                expected: problem.dim,
                got: center.len(),
            });
        }
        Ok(Penalty {
            problem,
            center,
            gamma,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The formula evaluated anywhere, without checking `x ∈ G`. Directional
    /// derivatives of `F` are taken relative to `X`, which leaves `G`.
    pub fn formula(&self, x: &[f64]) -> Result<f64, EvalError> {
        let f = self.problem.objective_value(x)?;
        let h = self.problem.h_aggregate(x)?;
        let d = distance(x, self.center);
        Ok(f + self.gamma * h + 0.5 * d * d)
    }

    /// `F(x, γ)` for `x ∈ G` (membership within `tol`).
    pub fn value(&self, x: &[f64], tol: f64) -> Result<f64> {
        if !self.problem.in_g(x, tol)? {
            return Err(Error::NotInG(x.to_vec()));
        }
        Ok(self.formula(x)?)
    }
}

/// `F(x, γ)` at `x ∈ G` with centre `x_bar`.
pub fn penalty_value(
    p: &ProblemInstance,
    x_bar: &[f64],
    x: &[f64],
    gamma: f64,
    tol: f64,
) -> Result<f64> {
    Penalty::new(p, x_bar, gamma)?.value(x, tol)
}

/// Geometry of the grid search over `G_δ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSearch {
    pub delta: f64,
    pub grid_step: f64,
    pub feas_tol: f64,
}

impl GridSearch {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("grid_step", self.grid_step),
            ("feas_tol", self.feas_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn in_ball(&self, x: &[f64], center: &[f64]) -> bool {
        distance(x, center) <= self.delta * (1.0 + 1e-12)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridMinimum {
    pub argmin: Vec<f64>,
    pub min_value: f64,
}

/// Lattice points `x̄ + step·z` of `G_δ` in lexicographic order, with the
/// γ-independent parts of `F` cached.
struct FeasibleGrid {
    dim: usize,
    coords: Vec<f64>,
    f: Vec<f64>,
    h: Vec<f64>,
    prox: Vec<f64>,
}

impl FeasibleGrid {
    fn build(p: &ProblemInstance, x_bar: &[f64], search: &GridSearch) -> Result<Self> {
        search.validate()?;
        let dim = p.dim;
        let reach = (search.delta / search.grid_step * (1.0 + 1e-12)).floor() as i64;
        let side = (2 * reach + 1) as usize;
        let inner = side
            .checked_pow(dim as u32 - 1)
            .filter(|n| n.saturating_mul(side) <= MAX_GRID_POINTS)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "grid of {side}^{dim} points exceeds the limit of {MAX_GRID_POINTS}"
                ))
            })?;

        type Chunk = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);
        let chunks: Vec<Chunk> = (0..side)
            .into_par_iter()
            .map(|first| -> Result<Chunk> {
                let mut chunk: Chunk = Default::default();
                let mut z = vec![0i64; dim];
                let mut x = vec![0.0; dim];
                for idx in 0..inner {
                    z[0] = first as i64 - reach;
                    let mut rest = idx;
                    for slot in (1..dim).rev() {
                        z[slot] = (rest % side) as i64 - reach;
                        rest /= side;
                    }
                    for ((xi, zi), ci) in x.iter_mut().zip(&z).zip(x_bar) {
                        *xi = ci + search.grid_step * *zi as f64;
                    }
                    if !search.in_ball(&x, x_bar) || !p.in_g(&x, search.feas_tol)? {
                        continue;
                    }
                    let d = distance(&x, x_bar);
                    chunk.0.extend_from_slice(&x);
                    chunk.1.push(p.objective_value(&x)?);
                    chunk.2.push(p.h_aggregate(&x)?);
                    chunk.3.push(0.5 * d * d);
                }
                Ok(chunk)
            })
            .collect::<Result<_>>()?;

        let mut grid = FeasibleGrid {
            dim,
            coords: Vec::new(),
            f: Vec::new(),
            h: Vec::new(),
            prox: Vec::new(),
        };
        for (c, f, h, prox) in chunks {
            grid.coords.extend(c);
            grid.f.extend(f);
            grid.h.extend(h);
            grid.prox.extend(prox);
        }
        if grid.f.is_empty() {
            return Err(Error::EmptyFeasibleGrid);
        }
        Ok(grid)
    }

    fn len(&self) -> usize {
        self.f.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn value(&self, i: usize, gamma: f64) -> f64 {
        self.f[i] + gamma * self.h[i] + self.prox[i]
    }

    /// First (lexicographically smallest) index attaining the minimum.
    fn argmin(&self, gamma: f64) -> (usize, f64) {
        let mut best = (0, self.value(0, gamma));
        for i in 1..self.len() {
            let v = self.value(i, gamma);
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    }
}

/// Coordinate pattern search from a grid minimiser, halving the step from
/// `grid_step/2` down to `grid_step/16`. Moves only on strict improvement.
fn refine(
    pen: &Penalty<'_>,
    x_bar: &[f64],
    search: &GridSearch,
    start: &[f64],
    start_value: f64,
) -> Result<GridMinimum> {
    let mut best = start.to_vec();
    let mut best_value = start_value;
    let mut step = search.grid_step / 2.0;
    let finest = search.grid_step / 16.0;
    let mut trial = best.clone();
    while step >= finest * (1.0 - 1e-12) {
        for _ in 0..10_000 {
            let mut improved = false;
            for i in 0..best.len() {
                for sign in [-1.0, 1.0] {
                    trial.copy_from_slice(&best);
                    trial[i] += sign * step;
                    if !search.in_ball(&trial, x_bar)
                        || !pen.problem.in_g(&trial, search.feas_tol)?
                    {
                        continue;
                    }
                    let v = pen.formula(&trial)?;
                    if v < best_value {
                        best.copy_from_slice(&trial);
                        best_value = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step /= 2.0;
    }
    Ok(GridMinimum {
        argmin: best,
        min_value: best_value,
    })
}

/// Minimises `F(·, γ)` over `G_δ` by exhaustive lattice search followed by a
/// pattern-search refinement. Ties go to the lexicographically smallest point.
pub fn minimize_over(
    p: &ProblemInstance,
    x_bar: &[f64],
    gamma: f64,
    search: &GridSearch,
) -> Result<GridMinimum> {
    let pen = Penalty::new(p, x_bar, gamma)?;
    let grid = FeasibleGrid::build(p, x_bar, search)?;
    let (i, v) = grid.argmin(gamma);
    refine(&pen, x_bar, search, grid.point(i), v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PenaltyPoint {
    pub gamma: f64,
    pub argmin: Vec<f64>,
    pub min_value: f64,
    pub dist_to_xbar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PenaltyPathResult {
    pub gamma_values: Vec<f64>,
    pub per_gamma: Vec<PenaltyPoint>,
    /// Smallest grid weight from which every larger grid weight has its
    /// minimiser within `match_tol` of `x̄`.
    pub threshold_s: Option<f64>,
    pub match_tol: f64,
}

impl PenaltyPathResult {
    /// Grid weights at which the minimiser left `x̄` after having matched it at
    /// a smaller weight. Empty when exactness is monotone along the grid.
    pub fn monotonicity_violations(&self) -> Vec<f64> {
        let mut matched = false;
        let mut violations = Vec::new();
        for pt in &self.per_gamma {
            let here = pt.dist_to_xbar <= self.match_tol;
            if matched && !here {
                violations.push(pt.gamma);
            }
            matched |= here;
        }
        violations
    }

    /// CSV with columns `gamma, x1..xn, min_value, dist_to_xbar`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let to_io = |e: csv::Error| Error::Io {
            path: "<csv>".into(),
            source: std::io::Error::other(e),
        };
        let mut w = csv::Writer::from_writer(out);
        let dim = self.per_gamma.first().map_or(0, |p| p.argmin.len());
        let mut header = vec!["gamma".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        header.extend(["min_value".to_string(), "dist_to_xbar".to_string()]);
        w.write_record(&header).map_err(to_io)?;
        for pt in &self.per_gamma {
            let mut row = vec![pt.gamma.to_string()];
            row.extend(pt.argmin.iter().map(|v| v.to_string()));
            row.push(pt.min_value.to_string());
            row.push(pt.dist_to_xbar.to_string());
            w.write_record(&row).map_err(to_io)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv>".into(),
            source,
        })
    }
}

/// `0, step, 2·step, …` up to `max` inclusive.
pub fn gamma_grid(max: f64, step: f64) -> Result<Vec<f64>> {
    if !(max.is_finite() && max >= 0.0 && step.is_finite() && step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma grid needs max >= 0 and step > 0, got max = {max}, step = {step}"
        )));
    }
    let n = (max / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step).collect())
}

/// Runs [`minimize_over`] along an ascending grid of penalty weights and
/// reports the empirical exactness threshold.
pub fn exactness_threshold(
    p: &ProblemInstance,
    x_bar: &[f64],
    gamma_grid: &[f64],
    search: &GridSearch,
    match_tol: f64,
) -> Result<PenaltyPathResult> {
    if gamma_grid.is_empty() {
        return Err(Error::InvalidArgument("gamma grid is empty".into()));
    }
    if gamma_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "gamma grid must be strictly ascending".into(),
        ));
    }
    if !(match_tol.is_finite() && match_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "match_tol must be positive, got {match_tol}"
        )));
    }
    if !p.in_s(x_bar, search.feas_tol)? {
        return Err(Error::CandidateInfeasible(format!("{x_bar:?} is not in S")));
    }
    let grid = FeasibleGrid::build(p, x_bar, search)?;
    let per_gamma = gamma_grid
        .iter()
        .map(|&gamma| {
            let pen = Penalty::new(p, x_bar, gamma)?;
            let (i, v) = grid.argmin(gamma);
            let m = refine(&pen, x_bar, search, grid.point(i), v)?;
            Ok(PenaltyPoint {
                gamma,
                dist_to_xbar: distance(&m.argmin, x_bar),
                argmin: m.argmin,
                min_value: m.min_value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let first_exact = per_gamma
        .iter()
        .rposition(|pt| pt.dist_to_xbar > match_tol)
        .map_or(0, |i| i + 1);
    Ok(PenaltyPathResult {
        gamma_values: gamma_grid.to_vec(),
        threshold_s: gamma_grid.get(first_exact).copied(),
        per_gamma,
        match_tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub holds: bool,
    pub witness: Option<Vec<f64>>,
    /// `F(w) − F(x̄) − A‖w − x̄‖` at the witness.
    pub witness_gap: Option<f64>,
    pub points_checked: usize,
}

/// Checks `F(x, γ) − F(x̄, γ) ≥ A‖x − x̄‖ − feas_tol` on `sample_count` seeded
/// random points of `G_δ` and on the full search lattice. The witness is the
/// first violator, random samples first.
pub fn isolated_growth_check(
    p: &ProblemInstance,
    x_bar: &[f64],
    gamma: f64,
    growth_a: f64,
    sample_count: usize,
    seed: u64,
    search: &GridSearch,
) -> Result<GrowthCheck> {
    if !(growth_a.is_finite() && growth_a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "growth constant A must be positive, got {growth_a}"
        )));
    }
    search.validate()?;
    if !p.in_s(x_bar, search.feas_tol)? {
        return Err(Error::CandidateInfeasible(format!("{x_bar:?} is not in S")));
    }
    let pen = Penalty::new(p, x_bar, gamma)?;
    let base = pen.formula(x_bar)?;
    let gap_at =
        |x: &[f64]| -> Result<f64> { Ok(pen.formula(x)? - base - growth_a * distance(x, x_bar)) };
    let violation = |x: &[f64], gap: f64, checked: usize| GrowthCheck {
        holds: false,
        witness: Some(x.to_vec()),
        witness_gap: Some(gap),
        points_checked: checked,
    };
    let mut checked = 0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = p.dim;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < sample_count && attempts < sample_count.saturating_mul(100) {
        attempts += 1;
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let r = search.delta * rng.random::<f64>().powf(1.0 / dim as f64);
        let x: Vec<f64> = x_bar
            .iter()
            .zip(&g)
            .map(|(c, v)| c + r * v / norm)
            .collect();
        if !p.in_g(&x, search.feas_tol)? {
            continue;
        }
        accepted += 1;
        checked += 1;
        let gap = gap_at(&x)?;
        if gap < -search.feas_tol {
            return Ok(violation(&x, gap, checked));
        }
    }

    let grid = FeasibleGrid::build(p, x_bar, search)?;
    for i in 0..grid.len() {
        checked += 1;
        let gap = gap_at(grid.point(i))?;
        if gap < -search.feas_tol {
            return Ok(violation(grid.point(i), gap, checked));
        }
    }
    Ok(GrowthCheck {
        holds: true,
        witness: None,
        witness_gap: None,
        points_checked: checked,
    })
}
