//! Checkable optimality conditions at a candidate `x̄`.
//!
//! * the constraint-qualification margin
//!   `d(x) = inf { ld h(x; u; X) : ‖u‖ = 1, u ∈ T(G, x) }` and the condition
//!   `d(x) ≤ −a` on `N_δ(x̄) ∖ S`;
//! * Fritz John certificates: for a direction `u`, the vector
//!   `ᾱ = (ld F(x̄; u; X), d g_i(x̄; u; X) for i ∈ I(x̄))` and nonzero
//!   `λ ≥ 0` with `⟨λ, ᾱ⟩ ≥ 0`;
//! * strict certificates (`⟨λ, ᾱ⟩ > 0`) through the separation rule
//!   `(a, b) ∉ [−∞, 0]^{1+p}`, which yield isolated minimality;
//! * the Abadie comparison `T(G, x̄) = C(x̄)`.
//!
//! In every certificate a component equal to `−∞` gets a zero multiplier.
//! Multipliers are nonnegative, including for strict certificates.
//!
//! The estimators return upper approximations, so before any sign test the
//! finite components with `|v| ≤ zero_tol` are snapped to exactly zero (the
//! "resolved" vector). Both the raw and the resolved vectors are reported.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extended_real::{xdot, ExtReal};
use crate::hadamard::{
    hadamard_diff_check, lower_hadamard, sample_unit_directions, tangent_cone_member,
    DerivativeEstimate, SamplingSchedule,
};
use crate::penalty::Penalty;
use crate::problem::{Candidate, ProblemInstance};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Finite derivative values with `|v| ≤ zero_tol` count as zero.
    pub zero_tol: f64,
    /// Spread allowed by the Hadamard differentiability test.
    pub diff_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            zero_tol: 5e-2,
            diff_tol: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeVector {
    pub alpha0: ExtReal,
    /// One entry per active constraint, in the order of `active_set`.
    pub alpha: Vec<ExtReal>,
    /// Zero-based indices of the active inequalities.
    pub active_set: Vec<usize>,
    pub direction: Vec<f64>,
    pub gamma_used: f64,
}

impl DerivativeVector {
    /// `(alpha0, alpha_1, …, alpha_p)` as one vector.
    pub fn components(&self) -> Vec<ExtReal> {
        std::iter::once(self.alpha0)
            .chain(self.alpha.iter().copied())
            .collect()
    }

    pub fn resolved(&self, zero_tol: f64) -> Vec<ExtReal> {
        self.components()
            .into_iter()
            .map(|v| v.snap_to_zero(zero_tol))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    Nonstrict,
    Strict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub lambda: Vec<f64>,
    pub kind: CertificateKind,
    pub direction: Vec<f64>,
    /// `⟨λ, ᾱ⟩` on the resolved vector.
    pub pairing_value: ExtReal,
}

impl Certificate {
    /// Re-checks the multiplier rules and the pairing sign against the
    /// resolved derivative vector.
    pub fn validate(&self, resolved: &[ExtReal]) -> Result<()> {
        let fail = |why: &str| Err(Error::InvalidArgument(format!("certificate {why}")));
        if self.lambda.len() != resolved.len() {
            return Err(Error::LengthMismatch {
                expected: resolved.len(),
                got: self.lambda.len(),
            });
        }
        if self.lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return fail("has a negative or non-finite multiplier");
        }
        if self.lambda.iter().all(|l| *l == 0.0) {
            return fail("has all-zero multipliers");
        }
        if self
            .lambda
            .iter()
            .zip(resolved)
            .any(|(l, a)| *a == ExtReal::NegInf && *l != 0.0)
        {
            return fail("puts weight on a -inf component");
        }
        let pairing = xdot(&self.lambda, resolved)?;
        if pairing != self.pairing_value {
            return fail("pairing value does not match");
        }
        let sign_ok = match self.kind {
            CertificateKind::Nonstrict => pairing >= ExtReal::ZERO,
            CertificateKind::Strict => pairing.is_positive(),
        };
        if !sign_ok {
            return fail("pairing has the wrong sign");
        }
        Ok(())
    }
}

/// Multipliers `(λ, μ)` with `λ·a + ⟨μ, b⟩ > 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Separation {
    pub lambda: f64,
    pub mu: Vec<f64>,
}

/// `(a, b) ∈ [−∞, 0]^{1+p}`, i.e. no component is strictly positive.
pub fn in_nonpositive_orthant(a: ExtReal, b: &[ExtReal]) -> bool {
    !a.is_positive() && !b.iter().any(|v| v.is_positive())
}

/// Strict separation of `(a, b)` from `[−∞, 0]^{1+p}`.
///
/// Returns `None` exactly when every component is `≤ 0`. Otherwise a unit
/// multiplier goes on one strictly positive component: finite ones are
/// preferred over `+∞`, lowest index first. `−∞` components always get zero.
pub fn separation_certificate(a: ExtReal, b: &[ExtReal]) -> Option<Separation> {
    let all: Vec<ExtReal> = std::iter::once(a).chain(b.iter().copied()).collect();
    let pick = all
        .iter()
        .position(|v| v.is_positive() && v.is_finite())
        .or_else(|| all.iter().position(|v| v.is_positive()))?;
    let mut weights = vec![0.0; all.len()];
    weights[pick] = 1.0;
    Some(Separation {
        lambda: weights[0],
        mu: weights[1..].to_vec(),
    })
}

/// Nonstrict multipliers: a nonzero `λ ≥ 0` with `⟨λ, α⟩ ≥ 0`, or `None`
/// when `α ∈ (−∞, 0)^{1+p}` in the extended sense.
///
/// One finite nonnegative component gets `λ_i = 1` (lowest index). When only
/// `+∞` components are nonnegative, each of them gets `λ_i = 1`.
pub fn nonstrict_multipliers(alpha: &[ExtReal]) -> Option<Vec<f64>> {
    let mut weights = vec![0.0; alpha.len()];
    if let Some(i) = alpha
        .iter()
        .position(|v| v.is_finite() && *v >= ExtReal::ZERO)
    {
        weights[i] = 1.0;
        return Some(weights);
    }
    let mut any = false;
    for (w, v) in weights.iter_mut().zip(alpha) {
        if *v == ExtReal::PosInf {
            *w = 1.0;
            any = true;
        }
    }
    any.then_some(weights)
}

fn check_candidate(p: &ProblemInstance, cand: &Candidate) -> Result<()> {
    p.validate_candidate(cand)
}

fn check_direction(p: &ProblemInstance, u: &[f64]) -> Result<()> {
    if u.len() != p.dim {
        return Err(Error::LengthMismatch {
            expected: p.dim,
            got: u.len(),
        });
    }
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "direction {u:?} is not a unit vector"
        )));
    }
    Ok(())
}

/// Estimate of `d(x)` with the minimising direction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CqMargin {
    pub value: ExtReal,
    pub direction: Option<Vec<f64>>,
    pub tangent_directions: usize,
}

/// `d(x)`: minimum of `ld h(x; u; X)` over sampled unit directions that pass
/// the `T(G, x)` test; `+∞` when none does.
pub fn cq_margin(
    p: &ProblemInstance,
    x: &[f64],
    dir_count: usize,
    sched: &SamplingSchedule,
    tol: f64,
) -> Result<CqMargin> {
    if !p.in_g(x, tol)? {
        return Err(Error::NotInG(x.to_vec()));
    }
    let in_g = |y: &[f64]| p.in_g(y, tol);
    let in_x = |y: &[f64]| p.in_x(y, tol);
    let h = |y: &[f64]| p.h_aggregate(y);
    let mut best = CqMargin {
        value: ExtReal::PosInf,
        direction: None,
        tangent_directions: 0,
    };
    for u in sample_unit_directions(dir_count, p.dim, sched.seed) {
        if !tangent_cone_member(in_g, x, &u, sched)? {
            continue;
        }
        best.tangent_directions += 1;
        let est = lower_hadamard(h, in_x, x, &u, sched)?;
        if est.value < best.value {
            best.value = est.value;
            best.direction = Some(u);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CqReport {
    pub a: f64,
    pub sampled_points: Vec<Vec<f64>>,
    pub d_hat: Vec<ExtReal>,
    pub worst_margin: ExtReal,
    pub pass: bool,
}

/// Samples `point_count` points of `N_δ(x̄) ∩ G` with `h > feas_tol²` and
/// checks `d(x) ≤ −a` at each of them.
pub fn check_cq(
    p: &ProblemInstance,
    cand: &Candidate,
    a: f64,
    point_count: usize,
    dir_count: usize,
    sched: &SamplingSchedule,
    seed: u64,
) -> Result<CqReport> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    check_candidate(p, cand)?;
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "a must be positive, got {a}"
        )));
    }
    let tol = cand.feas_tol;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let max_attempts = point_count.saturating_mul(1000).max(1000);
    let mut attempts = 0;
    while points.len() < point_count && attempts < max_attempts {
        attempts += 1;
        let g: Vec<f64> = (0..p.dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let r = cand.delta * rng.random::<f64>().powf(1.0 / p.dim as f64);
        let x: Vec<f64> = cand
            .x_bar
            .iter()
            .zip(&g)
            .map(|(c, v)| c + r * v / norm)
            .collect();
        if p.in_g(&x, tol)? && p.h_aggregate(&x)? > tol * tol {
            points.push(x);
        }
    }
    if points.is_empty() {
        return Err(Error::NoOffSPoints);
    }
    let d_hat = points
        .par_iter()
        .map(|x| cq_margin(p, x, dir_count, sched, tol).map(|m| m.value))
        .collect::<Result<Vec<_>>>()?;
    let worst_margin = d_hat.iter().copied().max().unwrap_or(ExtReal::NegInf);
    let bound = ExtReal::new(-a)?;
    Ok(CqReport {
        a,
        pass: d_hat.iter().all(|d| *d <= bound),
        sampled_points: points,
        d_hat,
        worst_margin,
    })
}

/// Derivative vector at `x̄` in direction `u` plus diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionalData {
    pub vector: DerivativeVector,
    pub penalty_estimate: DerivativeEstimate,
    /// `true` per active constraint when the Hadamard limit was found.
    pub differentiable: Vec<bool>,
    pub warnings: Vec<String>,
}

/// Builds `ᾱ` for direction `u`: `ld F(x̄; u; X)` with `F = F(·, γ)` and the
/// Hadamard derivatives of the active `g_i` relative to `X`.
pub fn derivative_vector(
    p: &ProblemInstance,
    cand: &Candidate,
    u: &[f64],
    gamma: f64,
    sched: &SamplingSchedule,
    tols: &Tolerances,
) -> Result<DirectionalData> {
    check_direction(p, u)?;
    let tol = cand.feas_tol;
    let x_bar = cand.x_bar.as_slice();
    let pen = Penalty::new(p, x_bar, gamma)?;
    let in_x = |y: &[f64]| p.in_x(y, tol);
    let penalty_estimate = lower_hadamard(|y: &[f64]| pen.formula(y), in_x, x_bar, u, sched)?;
    let active_set = p.active_set(x_bar, tol)?;
    let mut alpha = Vec::with_capacity(active_set.len());
    let mut differentiable = Vec::with_capacity(active_set.len());
    let mut warnings = Vec::new();
    for &i in &active_set {
        let g = &p.inequalities[i];
        let check =
            hadamard_diff_check(|y: &[f64]| g.eval(y), in_x, x_bar, u, sched, tols.diff_tol)?;
        if !check.differentiable && check.value.is_finite() {
            warnings.push(format!(
                "g{} is not Hadamard differentiable at x_bar in direction {:?} (spread {}); using the lower estimate",
                i + 1,
                u,
                check.spread.map_or("n/a".to_string(), |s| format!("{s:.3e}")),
            ));
        }
        differentiable.push(check.differentiable);
        alpha.push(check.value);
    }
    Ok(DirectionalData {
        vector: DerivativeVector {
            alpha0: penalty_estimate.value,
            alpha,
            active_set,
            direction: u.to_vec(),
            gamma_used: gamma,
        },
        penalty_estimate,
        differentiable,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionVerdict {
    pub data: DirectionalData,
    pub resolved: Vec<ExtReal>,
    pub certificate: Option<Certificate>,
}

/// Nonstrict Fritz John certificate for one direction. `None` means the
/// necessary condition fails for `u`: every component of the resolved vector
/// is negative.
pub fn fritz_john_at(
    p: &ProblemInstance,
    cand: &Candidate,
    u: &[f64],
    gamma: f64,
    sched: &SamplingSchedule,
    tols: &Tolerances,
) -> Result<DirectionVerdict> {
    check_candidate(p, cand)?;
    let data = derivative_vector(p, cand, u, gamma, sched, tols)?;
    let resolved = data.vector.resolved(tols.zero_tol);
    let certificate = match nonstrict_multipliers(&resolved) {
        Some(lambda) => {
            let cert = Certificate {
                pairing_value: xdot(&lambda, &resolved)?,
                lambda,
                kind: CertificateKind::Nonstrict,
                direction: u.to_vec(),
            };
            cert.validate(&resolved)?;
            Some(cert)
        }
        None => None,
    };
    Ok(DirectionVerdict {
        data,
        resolved,
        certificate,
    })
}

fn strict_at(
    p: &ProblemInstance,
    cand: &Candidate,
    u: &[f64],
    gamma: f64,
    sched: &SamplingSchedule,
    tols: &Tolerances,
) -> Result<DirectionVerdict> {
    let data = derivative_vector(p, cand, u, gamma, sched, tols)?;
    let resolved = data.vector.resolved(tols.zero_tol);
    let certificate = match separation_certificate(resolved[0], &resolved[1..]) {
        Some(sep) => {
            let lambda: Vec<f64> = std::iter::once(sep.lambda).chain(sep.mu).collect();
            let cert = Certificate {
                pairing_value: xdot(&lambda, &resolved)?,
                lambda,
                kind: CertificateKind::Strict,
                direction: u.to_vec(),
            };
            cert.validate(&resolved)?;
            Some(cert)
        }
        None => None,
    };
    Ok(DirectionVerdict {
        data,
        resolved,
        certificate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionSweep {
    /// `true` when every sampled direction received a certificate.
    pub certified: bool,
    pub per_direction: Vec<DirectionVerdict>,
}

impl DirectionSweep {
    pub fn warnings(&self) -> Vec<String> {
        self.per_direction
            .iter()
            .flat_map(|d| d.data.warnings.iter().cloned())
            .collect()
    }
}

fn sweep_directions<F>(
    p: &ProblemInstance,
    dir_count: usize,
    seed: u64,
    per: F,
) -> Result<DirectionSweep>
where
    F: Fn(&[f64]) -> Result<DirectionVerdict> + Sync,
{
    if dir_count == 0 {
        return Err(Error::InvalidArgument(
            "direction count must be positive".into(),
        ));
    }
    let per_direction = sample_unit_directions(dir_count, p.dim, seed)
        .par_iter()
        .map(|u| per(u))
        .collect::<Result<Vec<_>>>()?;
    Ok(DirectionSweep {
        certified: per_direction.iter().all(|d| d.certificate.is_some()),
        per_direction,
    })
}

/// Fritz John certificates over a seeded sample of unit directions.
pub fn fritz_john_sweep(
    p: &ProblemInstance,
    cand: &Candidate,
    gamma: f64,
    dir_count: usize,
    sched: &SamplingSchedule,
    seed: u64,
    tols: &Tolerances,
) -> Result<DirectionSweep> {
    check_candidate(p, cand)?;
    sweep_directions(p, dir_count, seed, |u| {
        fritz_john_at(p, cand, u, gamma, sched, tols)
    })
}

/// Strict certificates over a seeded sample of unit directions. `certified`
/// means every sampled direction separates, which is the sufficient condition
/// for `x̄` to be an isolated local minimiser.
pub fn isolated_sufficient(
    p: &ProblemInstance,
    cand: &Candidate,
    gamma: f64,
    dir_count: usize,
    sched: &SamplingSchedule,
    seed: u64,
    tols: &Tolerances,
) -> Result<DirectionSweep> {
    check_candidate(p, cand)?;
    sweep_directions(p, dir_count, seed, |u| {
        strict_at(p, cand, u, gamma, sched, tols)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbadieDirection {
    pub direction: Vec<f64>,
    pub in_tangent_cone: bool,
    pub in_linearized_cone: bool,
    pub g_derivatives: Vec<ExtReal>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbadieReport {
    pub pass: bool,
    pub mismatches: Vec<Vec<f64>>,
    pub per_direction: Vec<AbadieDirection>,
}

/// Compares `u ∈ T(G, x̄)` with `u ∈ C(x̄)`, where
/// `C(x̄) = {u ∈ T(X, x̄) : d g_i(x̄; u; X) ≤ 0 for i ∈ I(x̄)}`.
pub fn abadie_check(
    p: &ProblemInstance,
    cand: &Candidate,
    dir_count: usize,
    sched: &SamplingSchedule,
    seed: u64,
    tols: &Tolerances,
) -> Result<AbadieReport> {
    check_candidate(p, cand)?;
    if dir_count == 0 {
        return Err(Error::InvalidArgument(
            "direction count must be positive".into(),
        ));
    }
    let tol = cand.feas_tol;
    let x_bar = cand.x_bar.as_slice();
    let active = p.active_set(x_bar, tol)?;
    let in_g = |y: &[f64]| p.in_g(y, tol);
    let in_x = |y: &[f64]| p.in_x(y, tol);
    let per_direction = sample_unit_directions(dir_count, p.dim, seed)
        .par_iter()
        .map(|u| -> Result<AbadieDirection> {
            let in_t = tangent_cone_member(in_g, x_bar, u, sched)?;
            let in_tx = tangent_cone_member(in_x, x_bar, u, sched)?;
            let g_derivatives = active
                .iter()
                .map(|&i| {
                    let g = &p.inequalities[i];
                    hadamard_diff_check(|y: &[f64]| g.eval(y), in_x, x_bar, u, sched, tols.diff_tol)
                        .map(|c| c.value)
                })
                .collect::<Result<Vec<_>>>()?;
            let zero = ExtReal::new(tols.zero_tol)?;
            let in_c = in_tx && g_derivatives.iter().all(|d| *d <= zero);
            Ok(AbadieDirection {
                direction: u.clone(),
                in_tangent_cone: in_t,
                in_linearized_cone: in_c,
                g_derivatives,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mismatches: Vec<Vec<f64>> = per_direction
        .iter()
        .filter(|d| d.in_tangent_cone != d.in_linearized_cone)
        .map(|d| d.direction.clone())
        .collect();
    Ok(AbadieReport {
        pass: mismatches.is_empty(),
        mismatches,
        per_direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    use ExtReal::{Finite, NegInf, PosInf};

    fn cand(x_bar: Vec<f64>, delta: f64) -> Candidate {
        Candidate {
            x_bar,
            delta,
            feas_tol: 1e-9,
        }
    }

    fn ex_fj() -> ProblemInstance {
        ProblemInstance::builder(1)
            .objective("-x1")
            .inequality("x1")
            .bounds(vec![-1.0], vec![1.0])
            .build()
            .unwrap()
    }

    #[test]
    fn separation_examples() {
        let s = separation_certificate(Finite(1.0), &[Finite(-1.0)]).unwrap();
        assert_eq!((s.lambda, s.mu), (1.0, vec![0.0]));
        assert_eq!(separation_certificate(NegInf, &[Finite(0.0)]), None);
        let s = separation_certificate(NegInf, &[Finite(2.0)]).unwrap();
        assert_eq!((s.lambda, s.mu), (0.0, vec![1.0]));
        // finite preferred over +inf
        let s = separation_certificate(PosInf, &[Finite(0.5)]).unwrap();
        assert_eq!((s.lambda, s.mu), (0.0, vec![1.0]));
        let s = separation_certificate(PosInf, &[NegInf]).unwrap();
        assert_eq!((s.lambda, s.mu), (1.0, vec![0.0]));
    }

    #[test]
    fn nonstrict_rules() {
        assert_eq!(
            nonstrict_multipliers(&[Finite(-1.0), Finite(1.0)]),
            Some(vec![0.0, 1.0])
        );
        assert_eq!(
            nonstrict_multipliers(&[Finite(0.0), Finite(1.0)]),
            Some(vec![1.0, 0.0])
        );
        assert_eq!(
            nonstrict_multipliers(&[PosInf, NegInf, PosInf]),
            Some(vec![1.0, 0.0, 1.0])
        );
        assert_eq!(nonstrict_multipliers(&[Finite(-1.0), NegInf]), None);
        assert_eq!(nonstrict_multipliers(&[]), None);
    }

    #[test]
    fn certificate_validation_catches_bad_multipliers() {
        let resolved = [NegInf, Finite(2.0)];
        let bad = Certificate {
            lambda: vec![1.0, 1.0],
            kind: CertificateKind::Nonstrict,
            direction: vec![1.0],
            pairing_value: NegInf,
        };
        assert!(bad.validate(&resolved).is_err());
        let good = Certificate {
            lambda: vec![0.0, 1.0],
            kind: CertificateKind::Strict,
            direction: vec![1.0],
            pairing_value: Finite(2.0),
        };
        assert!(good.validate(&resolved).is_ok());
        let zero = Certificate {
            lambda: vec![0.0, 0.0],
            ..good.clone()
        };
        assert!(zero.validate(&resolved).is_err());
    }

    #[test]
    fn fritz_john_ex_fj() {
        let p = ex_fj();
        let c = cand(vec![0.0], 0.5);
        let s = SamplingSchedule::default();
        let t = Tolerances::default();
        let up = fritz_john_at(&p, &c, &[1.0], 2.0, &s, &t).unwrap();
        assert_abs_diff_eq!(up.data.vector.alpha0.to_f64(), -1.0, epsilon = 5e-2);
        assert_abs_diff_eq!(up.data.vector.alpha[0].to_f64(), 1.0, epsilon = 5e-2);
        assert_eq!(up.certificate.unwrap().lambda, vec![0.0, 1.0]);
        let down = fritz_john_at(&p, &c, &[-1.0], 2.0, &s, &t).unwrap();
        assert_abs_diff_eq!(down.data.vector.alpha0.to_f64(), 1.0, epsilon = 5e-2);
        assert_abs_diff_eq!(down.data.vector.alpha[0].to_f64(), -1.0, epsilon = 5e-2);
        assert_eq!(down.certificate.unwrap().lambda, vec![1.0, 0.0]);
    }

    #[test]
    fn fritz_john_violated_for_linear_objective() {
        let p = ProblemInstance::builder(1).objective("x1").build().unwrap();
        let c = cand(vec![0.0], 0.5);
        let v = fritz_john_at(
            &p,
            &c,
            &[-1.0],
            1.0,
            &SamplingSchedule::default(),
            &Tolerances::default(),
        )
        .unwrap();
        assert!(v.certificate.is_none());
        assert_abs_diff_eq!(v.data.vector.alpha0.to_f64(), -1.0, epsilon = 5e-2);
        assert!(v.data.vector.alpha.is_empty());
    }

    #[test]
    fn direction_must_be_unit() {
        let p = ex_fj();
        let c = cand(vec![0.0], 0.5);
        assert!(fritz_john_at(
            &p,
            &c,
            &[2.0],
            1.0,
            &SamplingSchedule::default(),
            &Tolerances::default()
        )
        .is_err());
    }

    #[test]
    fn cq_margin_examples() {
        let s = SamplingSchedule::default();
        let nonsmooth = ProblemInstance::builder(2)
            .objective("-x1")
            .equality("sqrt(abs(x1))")
            .bounds(vec![-1.0, -1.0], vec![1.0, 1.0])
            .build()
            .unwrap();
        let m = cq_margin(&nonsmooth, &[0.3, 0.0], 16, &s, 1e-9).unwrap();
        assert_abs_diff_eq!(m.value.to_f64(), -1.0, epsilon = 5e-2);
        assert_eq!(m.direction, Some(vec![-1.0, 0.0]));
        let smooth = ProblemInstance::builder(2)
            .objective("-x1")
            .equality("x1")
            .bounds(vec![-1.0, -1.0], vec![1.0, 1.0])
            .build()
            .unwrap();
        let m = cq_margin(&smooth, &[0.3, 0.0], 16, &s, 1e-9).unwrap();
        assert_abs_diff_eq!(m.value.to_f64(), -0.6, epsilon = 5e-2);
        assert!(matches!(
            cq_margin(&smooth, &[2.0, 0.0], 16, &s, 1e-9),
            Err(Error::NotInG(_))
        ));
    }

    #[test]
    fn cq_needs_equalities() {
        let p = ex_fj();
        let r = check_cq(
            &p,
            &cand(vec![0.0], 0.5),
            0.5,
            8,
            4,
            &SamplingSchedule::default(),
            1,
        );
        assert!(matches!(r, Err(Error::NoOffSPoints)));
    }

    #[test]
    fn abadie_box_boundary() {
        let p = ProblemInstance::builder(1)
            .objective("x1")
            .bounds(vec![0.0], vec![1.0])
            .build()
            .unwrap();
        let r = abadie_check(
            &p,
            &cand(vec![0.0], 0.5),
            2,
            &SamplingSchedule::default(),
            0,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(r.pass);
        let down = &r.per_direction[1];
        assert_eq!(down.direction, vec![-1.0]);
        assert!(!down.in_tangent_cone && !down.in_linearized_cone);
    }
}
