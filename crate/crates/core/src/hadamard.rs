//! Sampling estimators for lower Hadamard conditional derivatives
//!
//! ```text
//! ld φ(x; u; S) = liminf  (φ(x + t u') − φ(x)) / t,   (t, u') → (+0, u), x + t u' ∈ S
//! ```
//!
//! and for membership in the contingent cone `T(S, x)`.
//!
//! The liminf is replaced by a minimum over a geometric ladder of scales
//! `t_k = t0·ratio^k`, `k = 0..K`. At level `k` the unperturbed direction `u`
//! and `M` directions drawn uniformly from the ball of radius
//! `dir_radius_factor·t_k` around `u` are tried; only points `x + t_k u'`
//! accepted by the membership oracle contribute. No admissible sample at all
//! yields `+∞`, matching the convention off the tangent cone.
//!
//! Finite sampling can only see quotients that exist, so the estimate is an
//! upper approximation of the true liminf. Each level has its own RNG stream,
//! so adding levels or samples never changes earlier samples and can only
//! lower the estimate.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::EvalError;
use crate::extended_real::ExtReal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingSchedule {
    pub t0: f64,
    pub ratio: f64,
    pub levels: usize,
    pub samples_per_level: usize,
    pub dir_radius_factor: f64,
    pub seed: u64,
}

impl Default for SamplingSchedule {
    fn default() -> Self {
        SamplingSchedule {
            t0: 1e-2,
            ratio: 0.5,
            levels: 12,
            samples_per_level: 64,
            dir_radius_factor: 1.0,
            seed: 0,
        }
    }
}

impl SamplingSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("sampling schedule: {what}")));
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return bad("t0 must be positive");
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad("ratio must lie in (0, 1)");
        }
        if self.levels == 0 {
            return bad("levels must be at least 1");
        }
        if self.samples_per_level == 0 {
            return bad("samples per level must be at least 1");
        }
        if !(self.dir_radius_factor.is_finite() && self.dir_radius_factor > 0.0) {
            return bad("dir_radius_factor must be positive");
        }
        if self.scale(self.levels - 1) <= 0.0 {
            return bad("deepest scale underflows to zero");
        }
        Ok(())
    }

    /// `t_k = t0·ratio^k`.
    pub fn scale(&self, level: usize) -> f64 {
        self.t0 * self.ratio.powi(level as i32)
    }

    pub fn radius(&self, level: usize) -> f64 {
        self.dir_radius_factor * self.scale(level)
    }

    /// The deepest `⌈K/2⌉` levels.
    pub fn deep_levels(&self) -> Range<usize> {
        let deep = self.levels.div_ceil(2);
        self.levels - deep..self.levels
    }

    /// Directions tried at `level`: `u` itself, then the perturbed samples.
    fn level_directions(&self, u: &[f64], level: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(level as u64);
        let radius = self.radius(level);
        let base = u.to_vec();
        std::iter::once(base.clone()).chain((0..self.samples_per_level).map(move |_| {
            let offset = uniform_in_ball(&mut rng, base.len());
            base.iter()
                .zip(offset)
                .map(|(b, o)| b + radius * o)
                .collect()
        }))
    }
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let r: f64 = rng.random::<f64>().powf(1.0 / dim as f64);
            return g.into_iter().map(|v| v * r / norm).collect();
        }
    }
}

/// Per-level record: the scale, the smallest admissible quotient and the
/// number of admissible samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelMinimum {
    pub scale: f64,
    pub min_quotient: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeEstimate {
    pub value: ExtReal,
    pub admissible_samples: usize,
    pub level_minima: Vec<LevelMinimum>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiffCheck {
    pub differentiable: bool,
    /// Midpoint of the deep-level quotient range when differentiable,
    /// otherwise the lower estimate.
    pub value: ExtReal,
    /// `max − min` of the admissible quotients over the deep levels.
    pub spread: Option<f64>,
    pub lower: DerivativeEstimate,
}

struct LevelStats {
    scale: f64,
    min: f64,
    max: f64,
    count: usize,
}

fn check_inputs<M>(member: &M, x: &[f64], u: &[f64], sched: &SamplingSchedule) -> Result<()>
where
    M: Fn(&[f64]) -> Result<bool, EvalError>,
{
    sched.validate()?;
    if x.len() != u.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: u.len(),
        });
    }
    if u.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("x and u must be finite".into()));
    }
    if !member(x)? {
        return Err(Error::InvalidArgument(format!(
            "base point {x:?} is not in the set"
        )));
    }
    Ok(())
}

fn sweep<F, M>(
    phi: &F,
    member: &M,
    x: &[f64],
    u: &[f64],
    sched: &SamplingSchedule,
) -> Result<Vec<LevelStats>>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
    M: Fn(&[f64]) -> Result<bool, EvalError>,
{
    let base = phi(x).map_err(|source| Error::Estimator {
        point: x.to_vec(),
        t: 0.0,
        source,
    })?;
    let mut point = vec![0.0; x.len()];
    (0..sched.levels)
        .map(|k| {
            let t = sched.scale(k);
            let mut stats = LevelStats {
                scale: t,
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
                count: 0,
            };
            for dir in sched.level_directions(u, k) {
                for ((p, xi), di) in point.iter_mut().zip(x).zip(&dir) {
                    *p = xi + t * di;
                }
                if !member(&point)? {
                    continue;
                }
                let value = phi(&point).map_err(|source| Error::Estimator {
                    point: point.clone(),
                    t,
                    source,
                })?;
                let q = (value - base) / t;
                stats.min = stats.min.min(q);
                stats.max = stats.max.max(q);
                stats.count += 1;
            }
            Ok(stats)
        })
        .collect()
}

fn to_estimate(stats: &[LevelStats]) -> Result<DerivativeEstimate> {
    let level_minima: Vec<LevelMinimum> = stats
        .iter()
        .map(|s| LevelMinimum {
            scale: s.scale,
            min_quotient: (s.count > 0).then_some(s.min),
            count: s.count,
        })
        .collect();
    let admissible_samples = stats.iter().map(|s| s.count).sum();
    let value = level_minima
        .iter()
        .filter_map(|l| l.min_quotient)
        .min_by(f64::total_cmp)
        .map_or(Ok(ExtReal::PosInf), ExtReal::new)?;
    Ok(DerivativeEstimate {
        value,
        admissible_samples,
        level_minima,
    })
}

/// Estimates `ld φ(x; u; S)` where `S` is given by the membership oracle.
pub fn lower_hadamard<F, M>(
    phi: F,
    member: M,
    x: &[f64],
    u: &[f64],
    sched: &SamplingSchedule,
) -> Result<DerivativeEstimate>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
    M: Fn(&[f64]) -> Result<bool, EvalError>,
{
    check_inputs(&member, x, u, sched)?;
    to_estimate(&sweep(&phi, &member, x, u, sched)?)
}

/// Tests whether the conditional Hadamard limit exists: over the deepest
/// `⌈K/2⌉` levels every level must have an admissible sample and all
/// admissible quotients must lie within `tol` of each other.
pub fn hadamard_diff_check<F, M>(
    phi: F,
    member: M,
    x: &[f64],
    u: &[f64],
    sched: &SamplingSchedule,
    tol: f64,
) -> Result<DiffCheck>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
    M: Fn(&[f64]) -> Result<bool, EvalError>,
{
    check_inputs(&member, x, u, sched)?;
    let stats = sweep(&phi, &member, x, u, sched)?;
    let lower = to_estimate(&stats)?;
    let deep = &stats[sched.deep_levels()];
    let all_admissible = deep.iter().all(|s| s.count > 0);
    let spread = all_admissible.then(|| {
        let lo = deep.iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
        let hi = deep.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });
    let differentiable = spread.is_some_and(|(lo, hi)| hi - lo <= tol);
    let value = match spread {
        Some((lo, hi)) if differentiable => ExtReal::new(0.5 * (lo + hi))?,
        _ => lower.value,
    };
    Ok(DiffCheck {
        differentiable,
        value,
        spread: spread.map(|(lo, hi)| hi - lo),
        lower,
    })
}

/// Contingent-cone test: `u ∈ T(S, x)` is accepted when each of the deepest
/// `⌈K/2⌉` levels has at least one admissible sample `x + t_k u' ∈ S`.
pub fn tangent_cone_member<M>(
    member: M,
    x: &[f64],
    u: &[f64],
    sched: &SamplingSchedule,
) -> Result<bool>
where
    M: Fn(&[f64]) -> Result<bool, EvalError>,
{
    check_inputs(&member, x, u, sched)?;
    let mut point = vec![0.0; x.len()];
    for k in sched.deep_levels() {
        let t = sched.scale(k);
        let mut hit = false;
        for dir in sched.level_directions(u, k) {
            for ((p, xi), di) in point.iter_mut().zip(x).zip(&dir) {
                *p = xi + t * di;
            }
            if member(&point)? {
                hit = true;
                break;
            }
        }
        if !hit {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Deterministic unit directions. In one dimension this is `{+1, −1}`
/// regardless of `count`. Otherwise the `±e_i` axes come first (in the order
/// `+e_1, −e_1, +e_2, …`), followed by normalised Gaussian samples.
pub fn sample_unit_directions(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let mut dirs: Vec<Vec<f64>> = (0..dim)
        .flat_map(|i| {
            [1.0, -1.0].map(|s| {
                let mut e = vec![0.0; dim];
                e[i] = s;
                e
            })
        })
        .take(count)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while dirs.len() < count {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-8 {
            dirs.push(g.into_iter().map(|v| v / norm).collect());
        }
    }
    dirs
}
