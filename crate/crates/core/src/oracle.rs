//! Reference values for cross-checking the main code paths.
//!
//! Nothing here calls into `integrator` or `solver`: closed-form trajectories
//! are evaluated from their formulas, reference minima come from a plain
//! proximal-gradient loop, and trajectories from a fixed-step classical RK4.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::problems::{CompositeProblem, Params};

/// Certificate threshold for [`reference_minimum`].
pub const CERTIFICATE_TOL: f64 = 1e-10;

/// Number of fixed steps taken by [`tiny_step_integrate`].
pub const TINY_STEPS: usize = 1_000_000;

/// Longest horizon `t_end − t0` the fixed-step reference accepts.
pub const TINY_MAX_HORIZON: f64 = 1.0e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    ClosedForm,
    LongSolve,
    TinyStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceResult {
    pub kind: ReferenceKind,
    pub value: f64,
    pub point: Vec<f64>,
    /// Norm of the prox-gradient mapping at `point`.
    pub certificate: f64,
    pub certified: bool,
}

fn param(params: &Params, key: &str, family: &str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| Error::InvalidParameter {
        family: family.to_string(),
        constraint: format!("missing `{key}`"),
    })
}

fn invalid(family: &str, constraint: String) -> Error {
    Error::InvalidParameter {
        family: family.to_string(),
        constraint,
    }
}

/// Exact `(x(t), ẋ(t))` of a scalar solution of `ẍ + (α/t)ẋ + Φ'(x) = 0`.
///
/// Families:
/// - `exp-decay` {alpha ≥ 1}: `x = ln t` for `Φ = ((α−1)/2)e^{−2x}`
/// - `inverse-power` {theta > 0, alpha ≥ θ/(2+θ)}: `x = t^{2/(2+θ)}`
/// - `power-gamma` {gamma > 2, alpha > γ/(γ−2)}: `x = t^{−2/(γ−2)}`
/// - `free-decay` {x0, v0, alpha > 1, t0 > 0}: `Φ ≡ 0`
pub fn closed_form_trajectory(family: &str, params: &Params, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(invalid(family, format!("t > 0 (got {t})")));
    }
    match family {
        "exp-decay" => {
            let alpha = param(params, "alpha", family)?;
            if alpha < 1.0 {
                return Err(invalid(family, format!("alpha ≥ 1 (got {alpha})")));
            }
            Ok((t.ln(), 1.0 / t))
        }
        "inverse-power" => {
            let theta = param(params, "theta", family)?;
            let alpha = param(params, "alpha", family)?;
            if theta <= 0.0 {
                return Err(invalid(family, format!("theta > 0 (got {theta})")));
            }
            if alpha < theta / (2.0 + theta) {
                return Err(invalid(family, format!("alpha ≥ theta/(2+theta) (got {alpha})")));
            }
            let e = 2.0 / (2.0 + theta);
            Ok((t.powf(e), e * t.powf(e - 1.0)))
        }
        "power-gamma" => {
            let gamma = param(params, "gamma", family)?;
            let alpha = param(params, "alpha", family)?;
            if gamma <= 2.0 {
                return Err(invalid(family, format!("gamma > 2 (got {gamma})")));
            }
            if alpha <= gamma / (gamma - 2.0) {
                return Err(invalid(family, format!("alpha > gamma/(gamma-2) (got {alpha})")));
            }
            let theta = 2.0 / (gamma - 2.0);
            Ok((t.powf(-theta), -theta * t.powf(-theta - 1.0)))
        }
        "free-decay" => {
            let x0 = param(params, "x0", family)?;
            let v0 = param(params, "v0", family)?;
            let alpha = param(params, "alpha", family)?;
            let t0 = param(params, "t0", family)?;
            if alpha <= 1.0 {
                return Err(invalid(family, format!("alpha > 1 (got {alpha})")));
            }
            if !(t0 > 0.0) {
                return Err(invalid(family, format!("t0 > 0 (got {t0})")));
            }
            // t^α ẋ is conserved when Φ ≡ 0
            let ratio = t0 / t;
            let v = v0 * ratio.powf(alpha);
            let x = x0 + v0 * t0 * (1.0 - ratio.powf(alpha - 1.0)) / (alpha - 1.0);
            Ok((x, v))
        }
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

fn forward_backward(problem: &CompositeProblem, gamma: f64, x: &[f64]) -> Vec<f64> {
    let g = problem.smooth.gradient(x);
    let forward: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gamma * gi).collect();
    match &problem.nonsmooth {
        Some(term) => term.prox(gamma, &forward),
        None => forward,
    }
}

/// Long proximal-gradient solve at step `1/(2L)`, stopped once the
/// prox-gradient mapping norm falls below [`CERTIFICATE_TOL`].
pub fn reference_minimum(problem: &CompositeProblem, budget: usize) -> ReferenceResult {
    let n = problem.dim();
    let Some(lipschitz) = problem.smooth.lipschitz() else {
        // No global step bound: fall back to analytic metadata.
        return match (&problem.known_minimizer, problem.known_min_value) {
            (Some(x), Some(v)) => {
                let certificate = problem.smooth.gradient(x).iter().map(|g| g * g).sum::<f64>().sqrt();
                ReferenceResult {
                    kind: ReferenceKind::ClosedForm,
                    value: v,
                    point: x.clone(),
                    certificate,
                    certified: certificate <= CERTIFICATE_TOL,
                }
            }
            _ => ReferenceResult {
                kind: ReferenceKind::ClosedForm,
                value: f64::NAN,
                point: vec![f64::NAN; n],
                certificate: f64::INFINITY,
                certified: false,
            },
        };
    };
    let gamma = if lipschitz > 0.0 { 0.5 / lipschitz } else { 1.0 };
    let mut x = match &problem.nonsmooth {
        Some(term) => term.prox(gamma, &vec![0.0; n]),
        None => vec![0.0; n],
    };
    let mut certificate = f64::INFINITY;
    for _ in 0..budget {
        let next = forward_backward(problem, gamma, &x);
        certificate = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / gamma;
        x = next;
        if !certificate.is_finite() || certificate <= CERTIFICATE_TOL {
            break;
        }
    }
    let value = problem.value(&x).unwrap_or(f64::NAN);
    ReferenceResult {
        kind: ReferenceKind::LongSolve,
        value,
        point: x,
        certificate,
        certified: certificate <= CERTIFICATE_TOL,
    }
}

/// Largest improvement of `F` found on `directions` random points of the
/// sphere of radius `radius` around `point` (negative when nothing improves).
pub fn perturbation_improvement(
    problem: &CompositeProblem,
    point: &[f64],
    radius: f64,
    directions: usize,
    seed: u64,
) -> f64 {
    let base = problem.value(point).unwrap_or(f64::INFINITY);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..directions {
        let d: Vec<f64> = (0..point.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nd = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let y: Vec<f64> = point.iter().zip(&d).map(|(p, di)| p + radius * di / nd).collect();
        if let Ok(v) = problem.value(&y) {
            best = best.max(base - v);
        }
    }
    best
}

/// A reference state `(t, x, v)`.
pub type ReferenceState = (f64, Vec<f64>, Vec<f64>);

fn accel(problem: &CompositeProblem, alpha: f64, t: f64, x: &[f64], v: &[f64]) -> Vec<f64> {
    let g = problem.smooth.gradient(x);
    v.iter().zip(&g).map(|(vi, gi)| -(alpha / t) * vi - gi).collect()
}

fn rk4_step(
    problem: &CompositeProblem,
    alpha: f64,
    t: f64,
    x: &[f64],
    v: &[f64],
    h: f64,
) -> (Vec<f64>, Vec<f64>) {
    let shift = |base: &[f64], d: &[f64], s: f64| -> Vec<f64> {
        base.iter().zip(d).map(|(b, di)| b + s * di).collect()
    };
    let a1 = accel(problem, alpha, t, x, v);
    let (x2, v2) = (shift(x, v, h / 2.0), shift(v, &a1, h / 2.0));
    let a2 = accel(problem, alpha, t + h / 2.0, &x2, &v2);
    let (x3, v3) = (shift(x, &v2, h / 2.0), shift(v, &a2, h / 2.0));
    let a3 = accel(problem, alpha, t + h / 2.0, &x3, &v3);
    let (x4, v4) = (shift(x, &v3, h), shift(v, &a3, h));
    let a4 = accel(problem, alpha, t + h, &x4, &v4);
    let n = x.len();
    let mut xn = vec![0.0; n];
    let mut vn = vec![0.0; n];
    for i in 0..n {
        xn[i] = x[i] + h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
        vn[i] = v[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
    }
    (xn, vn)
}

/// Fixed-step classical RK4 with step `(t_end − t0)/10⁶`, reporting states at
/// the requested times (sorted, within `[t0, t_end]`).
pub fn tiny_step_integrate(
    problem: &CompositeProblem,
    alpha: f64,
    t0: f64,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    at: &[f64],
) -> Result<Vec<ReferenceState>> {
    if problem.nonsmooth.is_some() {
        return Err(Error::NonsmoothDynamics(problem.id.clone()));
    }
    problem.check_dim(x0)?;
    problem.check_dim(v0)?;
    if !(t0 > 0.0 && t_end > t0) {
        return Err(Error::InvalidConfig(format!("need 0 < t0 < t_end (got {t0}, {t_end})")));
    }
    if t_end - t0 > TINY_MAX_HORIZON {
        return Err(Error::BudgetExceeded { horizon: t_end - t0 });
    }
    if at.windows(2).any(|w| w[1] < w[0]) || at.iter().any(|&s| s < t0 || s > t_end) {
        return Err(Error::InvalidConfig("reference times must be sorted and inside [t0, t_end]".into()));
    }
    let h = (t_end - t0) / TINY_STEPS as f64;
    let mut n = 0usize;
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut out = Vec::with_capacity(at.len());
    for &target in at {
        while n < TINY_STEPS && t0 + (n + 1) as f64 * h <= target {
            let (xn, vn) = rk4_step(problem, alpha, t0 + n as f64 * h, &x, &v, h);
            x = xn;
            v = vn;
            n += 1;
        }
        let tn = t0 + n as f64 * h;
        let rest = target - tn;
        if rest > 0.0 {
            let (xs, vs) = rk4_step(problem, alpha, tn, &x, &v, rest);
            out.push((target, xs, vs));
        } else {
            out.push((target, x.clone(), v.clone()));
        }
    }
    Ok(out)
}
