//! Energy functions, their monotonicity and integrability checks, and
//! log-log rate fits.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{fmt_f64, fmt_opt};
use crate::integrator::{self, State, Trajectory};
use crate::linalg;
use crate::problems::CompositeProblem;

/// Per-step relative tolerance for monotonicity verdicts.
pub const MONOTONE_TOL: f64 = 1e-8;

/// `W = ½‖v‖² + f(x)`
pub fn global_energy(state: &State, problem: &CompositeProblem) -> Result<f64> {
    problem.check_dim(&state.x)?;
    problem.check_dim(&state.v)?;
    Ok(0.5 * linalg::norm_sq(&state.v) + problem.smooth.value(&state.x))
}

/// `h = ½‖x − z‖²` and `ḣ = ⟨x − z, v⟩`.
pub fn anchor_function(state: &State, anchor: &[f64]) -> Result<(f64, f64)> {
    if anchor.len() != state.x.len() {
        return Err(Error::DimensionMismatch { expected: state.x.len(), got: anchor.len() });
    }
    let d = linalg::sub(&state.x, anchor);
    Ok((0.5 * linalg::norm_sq(&d), linalg::dot(&d, &state.v)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub lambda: f64,
    pub xi: f64,
    pub p: f64,
    pub anchor: Vec<f64>,
}

impl EnergyParams {
    pub fn new(lambda: f64, xi: f64, p: f64, anchor: Vec<f64>) -> Result<Self> {
        if !(lambda >= 0.0 && xi >= 0.0 && p >= 0.0) || !(lambda.is_finite() && xi.is_finite() && p.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "energy parameters must be finite and nonnegative (λ={lambda}, ξ={xi}, p={p})"
            )));
        }
        Ok(Self { lambda, xi, p, anchor })
    }

    /// `ξ* = λ(α − λ − 1)`, the choice that cancels the cross term.
    pub fn balanced(lambda: f64, alpha: f64, anchor: Vec<f64>) -> Result<Self> {
        Self::new(lambda, lambda * (alpha - lambda - 1.0), 0.0, anchor)
    }
}

#[allow(clippy::too_many_arguments)]
fn anchored_raw(t: f64, gap: f64, x: &[f64], v: &[f64], anchor: &[f64], lambda: f64, xi: f64, p: f64) -> (f64, f64) {
    let mut mixed = 0.0;
    let mut dist2 = 0.0;
    for i in 0..x.len() {
        let d = x[i] - anchor[i];
        let m = lambda * d + t * v[i];
        mixed += m * m;
        dist2 += d * d;
    }
    let base = t * t * gap + 0.5 * mixed;
    (base + 0.5 * xi * dist2, t.powf(p) * base)
}

fn require_minimizer(problem: &CompositeProblem) -> Result<f64> {
    match (problem.known_minimizer.as_ref(), problem.known_min_value) {
        (Some(_), Some(m)) => Ok(m),
        _ => Err(Error::EmptyArgmin(problem.id.clone())),
    }
}

/// `E_{λ,ξ} = t²·gap + ½‖λ(x−x*) + t v‖² + (ξ/2)‖x−x*‖²` and `E_λ^p = t^p E_{λ,0}`.
pub fn anchored_energy(state: &State, problem: &CompositeProblem, params: &EnergyParams) -> Result<(f64, f64)> {
    let min = require_minimizer(problem)?;
    problem.check_dim(&params.anchor)?;
    problem.check_dim(&state.x)?;
    problem.check_dim(&state.v)?;
    let gap = problem.smooth.value(&state.x) - min;
    Ok(anchored_raw(state.t, gap, &state.x, &state.v, &params.anchor, params.lambda, params.xi, params.p))
}

/// Outcome of a per-step monotonicity scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneVerdict {
    /// Whether theory guarantees monotonicity in this setting.
    pub asserted: bool,
    pub nonincreasing: bool,
    /// Largest `(qᵢ₊₁ − qᵢ)/|qᵢ|` over increasing steps (0 if none).
    pub max_violation: f64,
    pub worst_index: Option<usize>,
}

impl MonotoneVerdict {
    /// True unless monotonicity is asserted and violated.
    pub fn ok(&self) -> bool {
        !self.asserted || self.nonincreasing
    }
}

/// Scan for increases larger than `rel_tol·|qᵢ|` between consecutive samples.
pub fn monotone_verdict(values: &[f64], rel_tol: f64, asserted: bool) -> MonotoneVerdict {
    let mut worst = 0.0;
    let mut worst_index = None;
    for (i, w) in values.windows(2).enumerate() {
        let rise = w[1] - w[0];
        if rise > 0.0 || rise.is_nan() {
            let rel = if w[0] != 0.0 { rise / w[0].abs() } else { f64::INFINITY };
            let rel = if rel.is_nan() { f64::INFINITY } else { rel };
            if rel > worst {
                worst = rel;
                worst_index = Some(i);
            }
        }
    }
    MonotoneVerdict {
        asserted,
        nonincreasing: worst <= rel_tol,
        max_violation: worst,
        worst_index,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySample {
    pub t: f64,
    pub w: f64,
    pub h: f64,
    pub hdot: f64,
    pub e_lx: Option<f64>,
    pub e_lp: Option<f64>,
    pub gap: Option<f64>,
    pub tsq_gap: Option<f64>,
    pub norm_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub samples: Vec<EnergySample>,
    pub verdicts: BTreeMap<String, MonotoneVerdict>,
    pub integrals: BTreeMap<String, f64>,
}

pub const ENERGY_CSV_HEADER: &str = "t,W,h,hdot,E_lx,E_lp,gap,tsq_gap,norm_v";

impl EnergyReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{ENERGY_CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                fmt_f64(s.t),
                fmt_f64(s.w),
                fmt_f64(s.h),
                fmt_f64(s.hdot),
                fmt_opt(s.e_lx),
                fmt_opt(s.e_lp),
                fmt_opt(s.gap),
                fmt_opt(s.tsq_gap),
                fmt_f64(s.norm_v)
            )?;
        }
        Ok(())
    }

    pub fn gap_series(&self) -> Vec<(f64, f64)> {
        self.samples.iter().filter_map(|s| Some((s.t, s.gap?))).collect()
    }
}

/// Raw objective gap at a state (unclamped; `None` without a reference minimum).
fn state_gap(problem: &CompositeProblem, state: &State) -> Option<f64> {
    problem
        .known_min_value
        .map(|m| problem.smooth.value(&state.x) - m)
}

/// Evaluate `W`, `h_z`, `ḣ_z`, the anchored energies (when `params` is given
/// and the argmin is known) and the gap along a trajectory.
///
/// `h_z` is anchored at `params.anchor`, else at the known minimizer, else at
/// the origin.
pub fn energy_report(
    traj: &Trajectory,
    problem: &CompositeProblem,
    params: Option<&EnergyParams>,
) -> Result<EnergyReport> {
    let alpha = traj.config.alpha;
    let anchored = match params {
        Some(p) => {
            require_minimizer(problem)?;
            problem.check_dim(&p.anchor)?;
            Some(p)
        }
        None => None,
    };
    let anchor = anchored
        .map(|p| p.anchor.clone())
        .or_else(|| problem.known_minimizer.clone())
        .unwrap_or_else(|| vec![0.0; problem.dim()]);

    let mut samples = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        let w = global_energy(s, problem)?;
        let (h, hdot) = anchor_function(s, &anchor)?;
        let gap = state_gap(problem, s);
        let (e_lx, e_lp) = match (anchored, gap) {
            (Some(p), Some(g)) => {
                let (a, b) = anchored_raw(s.t, g, &s.x, &s.v, &p.anchor, p.lambda, p.xi, p.p);
                (Some(a), Some(b))
            }
            _ => (None, None),
        };
        samples.push(EnergySample {
            t: s.t,
            w,
            h,
            hdot,
            e_lx,
            e_lp,
            gap,
            tsq_gap: gap.map(|g| s.t * s.t * g),
            norm_v: linalg::norm(&s.v),
        });
    }

    let mut verdicts = BTreeMap::new();
    let ws: Vec<f64> = samples.iter().map(|s| s.w).collect();
    verdicts.insert("W".to_string(), monotone_verdict(&ws, MONOTONE_TOL, true));
    if let Some(p) = anchored {
        let balanced = (p.xi - p.lambda * (alpha - p.lambda - 1.0)).abs() <= 1e-12 * (1.0 + p.xi.abs());
        let asserted = alpha >= 3.0 && (2.0..=alpha - 1.0).contains(&p.lambda) && balanced && p.p == 0.0;
        let e: Vec<f64> = samples.iter().filter_map(|s| s.e_lx).collect();
        verdicts.insert("E_lx".to_string(), monotone_verdict(&e, MONOTONE_TOL, asserted));
        let e: Vec<f64> = samples.iter().filter_map(|s| s.e_lp).collect();
        verdicts.insert("E_lp".to_string(), monotone_verdict(&e, MONOTONE_TOL, asserted && p.p == 0.0));
    }

    let mut integrals = BTreeMap::new();
    if let Ok(balance) = energy_balance(traj, problem) {
        integrals.insert("dissipation".to_string(), balance.dissipated);
        integrals.insert("energy_balance_residual".to_string(), balance.max_relative_residual);
    }
    Ok(EnergyReport { samples, verdicts, integrals })
}

/// Trapezoid running integral of `(tᵢ, yᵢ)`.
pub fn trapezoid_running(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..t.len() {
        acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBalance {
    /// `∫ (α/s)‖v‖² ds` over the whole run.
    pub dissipated: f64,
    /// `max_i |W(tᵢ) − W(t0) + ∫_{t0}^{tᵢ}(α/s)‖v‖²| / max(|W(t0)|, dissipated)`.
    pub max_relative_residual: f64,
}

/// Check `W(t) − W(t0) = −∫ (α/s)‖v‖² ds` on the samples.
///
/// Uses the dense-output quadrature when the trajectory carries it, otherwise
/// the trapezoid rule on the samples.
pub fn energy_balance(traj: &Trajectory, problem: &CompositeProblem) -> Result<EnergyBalance> {
    let alpha = traj.config.alpha;
    let diss = match &traj.integrals {
        Some(i) => i.dissipation.clone(),
        None => {
            let t = traj.times();
            let y: Vec<f64> = traj.states.iter().map(|s| alpha / s.t * linalg::norm_sq(&s.v)).collect();
            trapezoid_running(&t, &y)
        }
    };
    let w: Vec<f64> = traj
        .states
        .iter()
        .map(|s| global_energy(s, problem))
        .collect::<Result<_>>()?;
    let dissipated = *diss.last().unwrap_or(&0.0);
    let scale = w[0].abs().max(dissipated);
    let worst = w
        .iter()
        .zip(&diss)
        .map(|(wi, di)| (wi - w[0] + di).abs())
        .fold(0.0, f64::max);
    Ok(EnergyBalance {
        dissipated,
        max_relative_residual: if scale > 0.0 { worst / scale } else { worst },
    })
}

/// The two anchored energies singled out by the theory, along one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialEnergies {
    pub alpha: f64,
    /// `E_{α−1,0}(tᵢ)`
    pub top: Vec<f64>,
    /// `E_{2,2(α−3)}(tᵢ)`
    pub two: Vec<f64>,
    pub top_verdict: MonotoneVerdict,
    pub two_verdict: MonotoneVerdict,
    /// `sup_i tᵢ² gap(tᵢ)`
    pub sup_t2gap: f64,
    /// `E_{α−1,0}(t0)`
    pub bound: f64,
    /// `sup t² gap ≤ E_{α−1,0}(t0)(1 + 1e−6)`; only asserted for `α ≥ 3`.
    pub bound_holds: bool,
}

/// Evaluate `E_{α−1,0}` and `E_{2,2(α−3)}` and the value bound
/// `t²·gap ≤ E_{α−1,0}(t0)`. For `α < 3` everything is computed but no
/// monotonicity is asserted.
pub fn check_special_energies(traj: &Trajectory, problem: &CompositeProblem, alpha: f64) -> Result<SpecialEnergies> {
    let min = require_minimizer(problem)?;
    let anchor = problem.known_minimizer.clone().expect("checked by require_minimizer");
    let asserted = alpha >= 3.0;
    let mut top = Vec::with_capacity(traj.states.len());
    let mut two = Vec::with_capacity(traj.states.len());
    let mut sup_t2gap = 0.0f64;
    for s in &traj.states {
        let gap = problem.smooth.value(&s.x) - min;
        top.push(anchored_raw(s.t, gap, &s.x, &s.v, &anchor, alpha - 1.0, 0.0, 0.0).0);
        two.push(anchored_raw(s.t, gap, &s.x, &s.v, &anchor, 2.0, 2.0 * (alpha - 3.0), 0.0).0);
        sup_t2gap = sup_t2gap.max(s.t * s.t * gap);
    }
    let bound = top[0];
    Ok(SpecialEnergies {
        alpha,
        top_verdict: monotone_verdict(&top, MONOTONE_TOL, asserted),
        two_verdict: monotone_verdict(&two, MONOTONE_TOL, asserted),
        top,
        two,
        sup_t2gap,
        bound,
        bound_holds: sup_t2gap <= bound * (1.0 + 1e-6),
    })
}

/// A running integral with a tail-convergence verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunningSeries {
    pub times: Vec<f64>,
    pub partial: Vec<f64>,
    pub total: f64,
    /// Increment over the last decade of `t`, as a fraction of the total.
    pub last_decade_fraction: f64,
    /// `last_decade_fraction < 0.05`.
    pub cauchy: bool,
}

impl RunningSeries {
    fn new(times: Vec<f64>, partial: Vec<f64>) -> Self {
        let total = *partial.last().unwrap_or(&0.0);
        let t_end = *times.last().unwrap_or(&0.0);
        let idx = times.iter().position(|&t| t >= t_end / 10.0).unwrap_or(0);
        let increment = total - partial[idx];
        let last_decade_fraction = if total != 0.0 { increment / total } else { 0.0 };
        Self {
            times,
            partial,
            total,
            last_decade_fraction,
            cauchy: last_decade_fraction < 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedIntegrals {
    /// `∫ t·gap dt`
    pub t_gap: Option<RunningSeries>,
    /// `∫ gap/t dt`
    pub gap_over_t: Option<RunningSeries>,
    /// `∫ t‖ẋ‖² dt`
    pub t_kinetic: RunningSeries,
    /// `E_{α−1,0}(t0)/(α−3)` for `α > 3` with known argmin.
    pub t_gap_bound: Option<f64>,
    /// `E_{2,2(α−3)}(t0)/(α−3)` for `α > 3` with known argmin.
    pub t_kinetic_bound: Option<f64>,
}

/// Running quadratures of `t·gap`, `gap/t` and `t‖ẋ‖²` with their bounds.
pub fn weighted_integrals(traj: &Trajectory, problem: &CompositeProblem, alpha: f64) -> Result<WeightedIntegrals> {
    let times = traj.times();
    let (t_gap, gap_over_t, t_kinetic) = match &traj.integrals {
        Some(i) => (i.t_gap.clone(), i.gap_over_t.clone(), i.t_kinetic.clone()),
        None => {
            let gaps: Option<Vec<f64>> = traj.states.iter().map(|s| state_gap(problem, s)).collect();
            let tg = gaps.as_ref().map(|g| {
                let y: Vec<f64> = g.iter().zip(&times).map(|(g, t)| t * g).collect();
                trapezoid_running(&times, &y)
            });
            let gt = gaps.as_ref().map(|g| {
                let y: Vec<f64> = g.iter().zip(&times).map(|(g, t)| g / t).collect();
                trapezoid_running(&times, &y)
            });
            let y: Vec<f64> = traj.states.iter().map(|s| s.t * linalg::norm_sq(&s.v)).collect();
            (tg, gt, trapezoid_running(&times, &y))
        }
    };
    let (t_gap_bound, t_kinetic_bound) = if alpha > 3.0 && problem.has_minimizer() {
        let e = check_special_energies(traj, problem, alpha)?;
        (Some(e.top[0] / (alpha - 3.0)), Some(e.two[0] / (alpha - 3.0)))
    } else {
        (None, None)
    };
    Ok(WeightedIntegrals {
        t_gap: t_gap.map(|p| RunningSeries::new(times.clone(), p)),
        gap_over_t: gap_over_t.map(|p| RunningSeries::new(times.clone(), p)),
        t_kinetic: RunningSeries::new(times.clone(), t_kinetic),
        t_gap_bound,
        t_kinetic_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicAcceleration {
    /// `(t, g(t))` with `g(t) = t^{−α} ∫_{t0}^t s^α ‖ẍ(s)‖² ds`.
    pub series: Vec<(f64, f64)>,
    /// `g` at the sample nearest the geometric midpoint `√(t0·t_end)`.
    pub g_mid: f64,
    pub g_end: f64,
    /// `g_end < g_mid`
    pub decaying: bool,
}

/// Ergodic average of the squared acceleration.
pub fn ergodic_acceleration(traj: &Trajectory, problem: &CompositeProblem, alpha: f64) -> Result<ErgodicAcceleration> {
    let times = traj.times();
    let running = match &traj.integrals {
        Some(i) => i.weighted_accel.clone(),
        None => {
            let y: Vec<f64> = traj
                .states
                .iter()
                .map(|s| {
                    let (_, a) = integrator::rhs(s, alpha, problem)?;
                    Ok(s.t.powf(alpha) * linalg::norm_sq(&a))
                })
                .collect::<Result<_>>()?;
            trapezoid_running(&times, &y)
        }
    };
    let series: Vec<(f64, f64)> = times
        .iter()
        .zip(&running)
        .map(|(t, r)| (*t, r / t.powf(alpha)))
        .collect();
    let mid_t = (times[0] * times[times.len() - 1]).sqrt();
    let mid = times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.ln() - mid_t.ln()).abs().total_cmp(&(b.1.ln() - mid_t.ln()).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let g_mid = series[mid].1;
    let g_end = series[series.len() - 1].1;
    Ok(ErgodicAcceleration {
        series,
        g_mid,
        g_end,
        decaying: g_end < g_mid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityBound {
    /// `√(2E_{α−1,0}(t0)) + (α−1) sup‖x − x*‖`
    pub bound: f64,
    /// `max_i tᵢ‖vᵢ‖`
    pub max_t_norm_v: f64,
    pub holds: bool,
}

/// Pointwise check of `t‖ẋ(t)‖ ≤ √(2E_{α−1,0}(t0)) + (α−1) sup‖x − x*‖`.
pub fn velocity_bound(traj: &Trajectory, problem: &CompositeProblem, alpha: f64) -> Result<VelocityBound> {
    let e = check_special_energies(traj, problem, alpha)?;
    let anchor = problem.known_minimizer.as_ref().expect("checked by special energies");
    let sup_dist = traj
        .states
        .iter()
        .map(|s| linalg::dist(&s.x, anchor))
        .fold(0.0, f64::max);
    let bound = (2.0 * e.bound).sqrt() + (alpha - 1.0) * sup_dist;
    let max_t_norm_v = traj
        .states
        .iter()
        .map(|s| s.t * linalg::norm(&s.v))
        .fold(0.0, f64::max);
    Ok(VelocityBound {
        bound,
        max_t_norm_v,
        holds: traj.states.iter().all(|s| s.t * linalg::norm(&s.v) <= bound),
    })
}

/// Least-squares slope of `log y` against `log s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    /// RMS residual of the fit in log space.
    pub residual: f64,
    pub envelope: bool,
}

/// Minimum number of positive points a fit window must contain.
pub const MIN_FIT_POINTS: usize = 10;

/// Default trailing fraction of the log-range used for fits.
pub const DEFAULT_FIT_WINDOW: f64 = 0.5;

/// Fit `y ≈ C s^p` over the trailing `window_fraction` of the `log s` range.
///
/// With `envelope`, `y` is first replaced by its running maximum taken from
/// the end of the series backwards, so oscillating data is fitted on its
/// decaying upper envelope.
pub fn fit_rate(series: &[(f64, f64)], window_fraction: f64, envelope: bool) -> Result<RateFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("window fraction must be in (0, 1], got {window_fraction}")));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(s, y)| *s > 0.0 && s.is_finite() && y.is_finite())
        .collect();
    if pts.is_empty() {
        return Err(Error::TooFewPoints { needed: MIN_FIT_POINTS, found: 0 });
    }
    if pts.iter().all(|(_, y)| *y == 0.0) {
        return Err(Error::ConvergedRateUndefined);
    }
    let ys: Vec<f64> = if envelope {
        let mut env = vec![0.0; pts.len()];
        let mut run = f64::NEG_INFINITY;
        for i in (0..pts.len()).rev() {
            run = run.max(pts[i].1);
            env[i] = run;
        }
        env
    } else {
        pts.iter().map(|p| p.1).collect()
    };
    let (s_min, s_max) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (s, _)| (lo.min(*s), hi.max(*s)));
    let log_hi = s_max.ln();
    let log_lo = log_hi - window_fraction * (log_hi - s_min.ln());
    let cut = log_lo.exp();

    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for ((s, _), y) in pts.iter().zip(&ys) {
        if s.ln() >= log_lo - 1e-12 && *y > 0.0 {
            lx.push(s.ln());
            ly.push(y.ln());
        }
    }
    if lx.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { needed: MIN_FIT_POINTS, found: lx.len() });
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints { needed: MIN_FIT_POINTS, found: 1 });
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        exponent,
        intercept,
        window: (cut.max(s_min), s_max),
        residual,
        envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate, IntegratorConfig};
    use crate::problems::{catalog, Params};
    use proptest::prelude::*;

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn st(t: f64, x: &[f64], v: &[f64]) -> State {
        State { t, x: x.to_vec(), v: v.to_vec() }
    }

    #[test]
    fn global_energy_examples() {
        let q = catalog("quadratic", &Params::new()).unwrap();
        assert_eq!(global_energy(&st(1.0, &[0.0], &[0.0]), &q).unwrap(), 0.0);
        assert_eq!(global_energy(&st(1.0, &[1.0], &[1.0]), &q).unwrap(), 1.0);
        let e = catalog("exp-decay", &params(&[("alpha", 3.0)])).unwrap();
        for t in [1.0, 3.0, 20.0] {
            let w = global_energy(&st(t, &[t.ln()], &[1.0 / t]), &e).unwrap();
            assert!((w - 1.5 / (t * t)).abs() < 1e-15, "t={t}");
        }
    }

    #[test]
    fn anchor_function_examples() {
        assert_eq!(anchor_function(&st(1.0, &[2.0, 2.0], &[5.0, 5.0]), &[2.0, 2.0]).unwrap(), (0.0, 0.0));
        assert_eq!(anchor_function(&st(1.0, &[3.0, 4.0], &[1.0, 0.0]), &[0.0, 0.0]).unwrap(), (12.5, 3.0));
        assert!(anchor_function(&st(1.0, &[3.0], &[1.0]), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn anchored_energy_examples() {
        let q = catalog("quadratic", &Params::new()).unwrap();
        let s = st(2.0, &[1.0], &[0.0]);
        let (e, _) = anchored_energy(&s, &q, &EnergyParams::new(2.0, 0.0, 0.0, vec![0.0]).unwrap()).unwrap();
        assert_eq!(e, 4.0);
        let (_, ep) = anchored_energy(&s, &q, &EnergyParams::new(2.0, 0.0, 1.0, vec![0.0]).unwrap()).unwrap();
        assert_eq!(ep, 8.0);
        for (l, xi) in [(0.0, 0.0), (2.0, 3.0), (5.0, 0.5)] {
            let (a, b) = anchored_energy(&st(7.0, &[0.0], &[0.0]), &q, &EnergyParams::new(l, xi, 2.0, vec![0.0]).unwrap()).unwrap();
            assert_eq!((a, b), (0.0, 0.0));
        }
        let e = catalog("exp-decay", &Params::new()).unwrap();
        let r = anchored_energy(&s, &e, &EnergyParams::new(2.0, 0.0, 0.0, vec![0.0]).unwrap());
        assert!(matches!(r, Err(Error::EmptyArgmin(_))));
        assert!(EnergyParams::new(-1.0, 0.0, 0.0, vec![0.0]).is_err());
    }

    #[test]
    fn stationary_trajectory_has_flat_zero_energies() {
        let q = catalog("quadratic", &params(&[("dim", 2.0)])).unwrap();
        let traj = integrate(&q, &IntegratorConfig::new(3.0, 1.0, 100.0), &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        let e = check_special_energies(&traj, &q, 3.0).unwrap();
        assert!(e.top.iter().chain(&e.two).all(|v| *v == 0.0));
        assert!(e.top_verdict.nonincreasing && e.bound_holds);
        let w = weighted_integrals(&traj, &q, 4.0).unwrap();
        assert_eq!(w.t_kinetic.total, 0.0);
        assert_eq!(w.t_gap.unwrap().total, 0.0);
        let g = ergodic_acceleration(&traj, &q, 3.0).unwrap();
        assert!(g.series.iter().all(|(_, g)| *g == 0.0));
    }

    #[test]
    fn alpha_below_three_is_not_asserted() {
        let q = catalog("quadratic", &Params::new()).unwrap();
        let traj = integrate(&q, &IntegratorConfig::new(1.0, 1.0, 50.0), &[1.0], &[0.0]).unwrap();
        let e = check_special_energies(&traj, &q, 1.0).unwrap();
        assert!(!e.top_verdict.asserted && !e.two_verdict.asserted);
        assert!(e.top_verdict.ok());
    }

    #[test]
    fn quadratic_special_energies_decrease() {
        let q = catalog("quadratic", &Params::new()).unwrap();
        for alpha in [3.0, 4.0] {
            let traj = integrate(&q, &IntegratorConfig::new(alpha, 1.0, 1e3), &[1.0], &[0.0]).unwrap();
            let e = check_special_energies(&traj, &q, alpha).unwrap();
            assert!(e.top_verdict.nonincreasing, "α={alpha} {:?}", e.top_verdict);
            assert!(e.two_verdict.nonincreasing, "α={alpha} {:?}", e.two_verdict);
        }
    }

    #[test]
    fn hdot_vanishes_on_quadratic() {
        let q = catalog("quadratic", &Params::new()).unwrap();
        let traj = integrate(&q, &IntegratorConfig::new(4.0, 1.0, 1e3), &[1.0], &[0.0]).unwrap();
        let r = energy_report(&traj, &q, None).unwrap();
        let late = r.samples.iter().filter(|s| s.t > 500.0).map(|s| s.hdot.abs()).fold(0.0, f64::max);
        let early = r.samples.iter().filter(|s| s.t < 5.0).map(|s| s.hdot.abs()).fold(0.0, f64::max);
        assert!(late < 1e-3 * early, "late={late} early={early}");
    }

    #[test]
    fn free_decay_ergodic_acceleration_vanishes() {
        let z = catalog("zero", &Params::new()).unwrap();
        let traj = integrate(&z, &IntegratorConfig::new(3.0, 1.0, 1e3), &[0.0], &[1.0]).unwrap();
        let g = ergodic_acceleration(&traj, &z, 3.0).unwrap();
        // closed form: ∫ s^α α² s^{−2α−2} = α²(1 − t^{−α−1})/(α+1)
        for (t, gt) in &g.series {
            let exact = 9.0 * (1.0 - t.powf(-4.0)) / 4.0 / t.powi(3);
            assert!((gt - exact).abs() <= 1e-7 * exact.max(1e-300), "t={t} {gt} vs {exact}");
        }
        assert!(g.decaying);
    }

    #[test]
    fn power_gamma_weighted_value_integral() {
        // ∫_1^T 0.75 t^{−3} dt = 0.375 (1 − T^{−2})
        let p = catalog("power-gamma", &params(&[("gamma", 4.0), ("alpha", 5.0)])).unwrap();
        let traj = integrate(&p, &IntegratorConfig::new(5.0, 1.0, 1e3), &[1.0], &[-1.0]).unwrap();
        let w = weighted_integrals(&traj, &p, 5.0).unwrap();
        let tg = w.t_gap.unwrap();
        assert!((tg.total - 0.375 * (1.0 - 1e-6)).abs() < 1e-8, "{}", tg.total);
        assert!(tg.cauchy);
        assert!(tg.total <= w.t_gap_bound.unwrap());
    }

    #[test]
    fn fit_rate_exact_power_law() {
        let series: Vec<(f64, f64)> = (0..200).map(|i| {
            let s = 10f64.powf(4.0 * i as f64 / 199.0);
            (s, s.powi(-2))
        }).collect();
        let fit = fit_rate(&series, 0.5, false).unwrap();
        assert!((fit.exponent + 2.0).abs() < 1e-10);
        assert!(fit.residual < 1e-10);
        assert!((fit.window.0 - 100.0).abs() < 1e-6 && fit.window.1 == 1e4);
    }

    #[test]
    fn fit_rate_errors() {
        let few: Vec<(f64, f64)> = (1..5).map(|i| (i as f64, 1.0)).collect();
        assert!(matches!(fit_rate(&few, 0.5, false), Err(Error::TooFewPoints { .. })));
        let zero: Vec<(f64, f64)> = (1..50).map(|i| (i as f64, 0.0)).collect();
        assert!(matches!(fit_rate(&zero, 0.5, true), Err(Error::ConvergedRateUndefined)));
        assert!(fit_rate(&zero, 0.0, true).is_err());
    }

    #[test]
    fn envelope_tames_oscillation() {
        let series: Vec<(f64, f64)> = (0..400).map(|i| {
            let s = 10f64.powf(3.0 * i as f64 / 399.0);
            (s, s.powi(-3) * (s.cos().powi(2) + 1e-3))
        }).collect();
        let fit = fit_rate(&series, 0.5, true).unwrap();
        assert!((fit.exponent + 3.0).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn monotone_verdict_detects_rise() {
        let v = monotone_verdict(&[3.0, 2.0, 2.5, 1.0], 1e-8, true);
        assert!(!v.nonincreasing && !v.ok());
        assert_eq!(v.worst_index, Some(1));
        assert!((v.max_violation - 0.25).abs() < 1e-15);
        let v = monotone_verdict(&[0.0, 0.0, 0.0], 1e-8, true);
        assert!(v.nonincreasing);
    }

    proptest! {
        #[test]
        fn fit_recovers_synthetic_exponents(p in -6.0f64..2.0, c in 0.01f64..100.0, frac in 0.2f64..1.0) {
            let series: Vec<(f64, f64)> = (0..100).map(|i| {
                let s = 10f64.powf(-1.0 + 5.0 * i as f64 / 99.0);
                (s, c * s.powf(p))
            }).collect();
            let fit = fit_rate(&series, frac, false).unwrap();
            prop_assert!((fit.exponent - p).abs() < 1e-8);
        }

        #[test]
        fn anchored_energy_zero_at_rest_on_minimizer(l in 0.0f64..10.0, xi in 0.0f64..10.0, p in 0.0f64..3.0, t in 0.1f64..1e4) {
            let q = catalog("quadratic", &params(&[("dim", 3.0)])).unwrap();
            let s = State { t, x: vec![0.0; 3], v: vec![0.0; 3] };
            let e = anchored_energy(&s, &q, &EnergyParams::new(l, xi, p, vec![0.0; 3]).unwrap()).unwrap();
            prop_assert_eq!(e, (0.0, 0.0));
        }
    }
}
