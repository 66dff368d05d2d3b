//! Inertial forward-backward iteration with damping parameter α
//! (FISTA at α = 3), iterate histories and discrete rate diagnostics.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{fmt_f64, fmt_opt};
use crate::linalg;
use crate::problems::CompositeProblem;

/// Step size choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSize {
    /// `1/L` from the problem's Lipschitz constant.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub gamma: StepSize,
    pub max_iters: u64,
    pub x0: Vec<f64>,
    /// `x_{−1}`; defaults to `x0` (no initial momentum).
    pub x_prev: Option<Vec<f64>>,
    pub stop_gap: Option<f64>,
    pub stop_step: Option<f64>,
}

impl SolverConfig {
    pub fn new(alpha: f64, max_iters: u64, x0: Vec<f64>) -> Self {
        Self {
            alpha,
            gamma: StepSize::Auto,
            max_iters,
            x0,
            x_prev: None,
            stop_gap: None,
            stop_step: None,
        }
    }

    pub fn validate(&self, problem: &CompositeProblem) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig("alpha must be positive".into()));
        }
        if let StepSize::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidConfig("gamma must be positive".into()));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        problem.check_dim(&self.x0)?;
        if let Some(p) = &self.x_prev {
            problem.check_dim(p)?;
        }
        Ok(())
    }

    /// The step size in use plus any warning about it.
    pub fn resolve_gamma(&self, problem: &CompositeProblem) -> Result<(f64, Option<String>)> {
        let lip = problem.smooth.lipschitz();
        match (self.gamma, lip) {
            (StepSize::Auto, Some(l)) if l > 0.0 => Ok((1.0 / l, None)),
            (StepSize::Auto, Some(_)) => Ok((1.0, None)),
            (StepSize::Auto, None) => Err(Error::InvalidConfig(format!(
                "`{}` has no global Lipschitz constant; pass an explicit gamma",
                problem.id
            ))),
            (StepSize::Fixed(g), Some(l)) if g * l > 1.0 => Ok((
                g,
                Some(format!("gamma = {g} exceeds 1/L = {}; no rate guarantee", 1.0 / l)),
            )),
            (StepSize::Fixed(g), _) => Ok((g, None)),
        }
    }
}

/// `(k−1)/(k+α−1)`
pub fn inertial_coefficient(k: u64, alpha: f64) -> f64 {
    (k as f64 - 1.0) / (k as f64 + alpha - 1.0)
}

/// One iteration: `y = x_k + c_k (x_k − x_prev)`, `x_next = prox_{γg}(y − γ∇f(y))`.
pub fn step(
    x_k: &[f64],
    x_prev: &[f64],
    k: u64,
    alpha: f64,
    gamma: f64,
    problem: &CompositeProblem,
) -> Result<(Vec<f64>, Vec<f64>)> {
    problem.check_dim(x_k)?;
    problem.check_dim(x_prev)?;
    let c = inertial_coefficient(k, alpha);
    let y: Vec<f64> = x_k.iter().zip(x_prev).map(|(a, b)| a + c * (a - b)).collect();
    let mut forward = problem.smooth.gradient(&y);
    for (f, yi) in forward.iter_mut().zip(&y) {
        *f = yi - gamma * *f;
    }
    let next = match &problem.nonsmooth {
        Some(term) => term.prox(gamma, &forward),
        None => forward,
    };
    if !linalg::all_finite(&y) || !linalg::all_finite(&next) {
        return Err(Error::Diverged { k, last_finite: x_k.to_vec() });
    }
    Ok((y, next))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    pub k: u64,
    pub x: Vec<f64>,
    /// Extrapolated point built from `x_k` and `x_{k−1}`.
    pub y: Vec<f64>,
    pub value: f64,
    pub gap: Option<f64>,
    /// `‖x_k − x_{k−1}‖`
    pub step_norm: f64,
    /// `Σ_{j≤k} j·gap(x_j)`
    pub sum_k_gap: Option<f64>,
    /// `Σ_{j≤k} j‖x_j − x_{j−1}‖²`
    pub sum_k_step2: f64,
    /// Discrete counterpart of `E_{α−1,0}` (experimental).
    pub discrete_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateHistory {
    pub problem_id: String,
    pub alpha: f64,
    pub gamma: f64,
    pub records: Vec<IterateRecord>,
    pub iterations: u64,
    pub stopped_early: bool,
    pub warnings: Vec<String>,
}

pub const HISTORY_CSV_HEADER: &str = "k,F,gap,step_norm,k2gap,sum_k_gap,sum_k_step2";

impl IterateHistory {
    pub fn last(&self) -> &IterateRecord {
        self.records.last().expect("history has at least one record")
    }

    pub fn record_at(&self, k: u64) -> Option<&IterateRecord> {
        self.records
            .binary_search_by_key(&k, |r| r.k)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{HISTORY_CSV_HEADER}")?;
        for r in &self.records {
            let k = r.k as f64;
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.k,
                fmt_f64(r.value),
                fmt_opt(r.gap),
                fmt_f64(r.step_norm),
                fmt_opt(r.gap.map(|g| k * k * g)),
                fmt_opt(r.sum_k_gap),
                fmt_f64(r.sum_k_step2)
            )?;
        }
        Ok(())
    }

    /// `(k, gap)` pairs.
    pub fn gap_series(&self) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter_map(|r| Some((r.k as f64, r.gap?)))
            .collect()
    }
}

/// Rows kept: every `⌈k/500⌉`-th iterate.
pub fn is_recorded(k: u64) -> bool {
    k.is_multiple_of(k.div_ceil(500).max(1))
}

fn discrete_energy(
    k: u64,
    alpha: f64,
    gamma: f64,
    gap: f64,
    x: &[f64],
    y: &[f64],
    anchor: &[f64],
) -> f64 {
    let kf = k as f64;
    let a1 = alpha - 1.0;
    let mixed: f64 = (0..x.len())
        .map(|i| {
            let m = (kf + a1) * y[i] - kf * x[i] - a1 * anchor[i];
            m * m
        })
        .sum();
    2.0 * gamma * (kf + alpha - 2.0).powi(2) / a1 * gap + mixed / a1
}

/// Iterate until `max_iters` or a stopping rule fires.
pub fn run(problem: &CompositeProblem, config: &SolverConfig) -> Result<IterateHistory> {
    config.validate(problem)?;
    let (gamma, warning) = config.resolve_gamma(problem)?;
    let alpha = config.alpha;
    let mut warnings: Vec<String> = warning.into_iter().collect();
    if alpha < 3.0 {
        warnings.push("α<3: no guarantee".to_string());
    }
    let mut x = config.x0.clone();
    let mut x_prev = config.x_prev.clone().unwrap_or_else(|| x.clone());
    if problem.value(&x).is_err() {
        return Err(Error::InvalidConfig("x0 lies outside the domain of the objective".into()));
    }
    let energy_anchor = if alpha > 1.0 { problem.known_minimizer.clone() } else { None };

    let mut records = Vec::new();
    let mut sum_k_gap = problem.known_min_value.map(|_| 0.0);
    let mut sum_k_step2 = 0.0;
    let mut k = 1u64;
    let stopped_early = loop {
        let value = problem.value(&x).map_err(|_| Error::Diverged { k, last_finite: x_prev.clone() })?;
        if !value.is_finite() {
            return Err(Error::Diverged { k, last_finite: x_prev.clone() });
        }
        let gap = match problem.known_min_value {
            Some(_) => Some(problem.gap(&x)?),
            None => None,
        };
        let step_norm = linalg::dist(&x, &x_prev);
        let kf = k as f64;
        if let (Some(s), Some(g)) = (sum_k_gap.as_mut(), gap) {
            *s += kf * g;
        }
        sum_k_step2 += kf * step_norm * step_norm;

        let stop = config.stop_gap.zip(gap).is_some_and(|(s, g)| g <= s)
            || (k > 1 && config.stop_step.is_some_and(|s| step_norm <= s));
        let last = stop || k == config.max_iters;

        let (y, next) = step(&x, &x_prev, k, alpha, gamma, problem)?;
        if last || is_recorded(k) {
            let discrete_energy = match (&energy_anchor, gap) {
                (Some(a), Some(g)) => Some(discrete_energy(k, alpha, gamma, g, &x, &y, a)),
                _ => None,
            };
            records.push(IterateRecord {
                k,
                x: x.clone(),
                y,
                value,
                gap,
                step_norm,
                sum_k_gap,
                sum_k_step2,
                discrete_energy,
            });
        }
        if last {
            break stop && k < config.max_iters;
        }
        x_prev = std::mem::replace(&mut x, next);
        k += 1;
    };
    Ok(IterateHistory {
        problem_id: problem.id.clone(),
        alpha,
        gamma,
        records,
        iterations: k,
        stopped_early,
        warnings,
    })
}

/// Tail verdicts and series derived from a history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDiagnostics {
    pub k: Vec<u64>,
    pub k2gap: Option<Vec<f64>>,
    /// Running maximum of `k²·gap`.
    pub k2gap_envelope: Option<Vec<f64>>,
    pub sum_k_gap: Option<Vec<f64>>,
    pub sum_k_step2: Vec<f64>,
    /// `k‖x_k − x_{k−1}‖`
    pub k_step: Vec<f64>,
    pub discrete_energy: Option<Vec<f64>>,
    /// Relative increase of the `k²·gap` envelope over the final decade of `k`.
    pub envelope_growth: Option<f64>,
    /// `envelope_growth < 5%`
    pub envelope_stable: Option<bool>,
    /// Last-half increment of `Σk‖Δx‖²` relative to its total.
    pub step2_tail_fraction: f64,
    pub gap_tail_fraction: Option<f64>,
    /// Tail-Cauchy verdicts (`< 10%`); only reported for `α > 3`.
    pub step2_cauchy: Option<bool>,
    pub gap_cauchy: Option<bool>,
    pub max_k_step: f64,
}

pub const DIAGNOSTICS_CSV_HEADER: &str = "k,k2gap,k2gap_envelope,sum_k_gap,sum_k_step2,k_step_norm,discrete_energy";

impl DiscreteDiagnostics {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{DIAGNOSTICS_CSV_HEADER}")?;
        let pick = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|v| v[i]);
        for i in 0..self.k.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.k[i],
                fmt_opt(pick(&self.k2gap, i)),
                fmt_opt(pick(&self.k2gap_envelope, i)),
                fmt_opt(pick(&self.sum_k_gap, i)),
                fmt_f64(self.sum_k_step2[i]),
                fmt_f64(self.k_step[i]),
                fmt_opt(pick(&self.discrete_energy, i))
            )?;
        }
        Ok(())
    }
}

fn tail_fraction(k: &[u64], partial: &[f64], from: u64) -> f64 {
    let total = *partial.last().unwrap_or(&0.0);
    if total == 0.0 {
        return 0.0;
    }
    let idx = k.iter().rposition(|&kk| kk <= from).unwrap_or(0);
    (total - partial[idx]) / total
}

pub fn discrete_diagnostics(history: &IterateHistory) -> DiscreteDiagnostics {
    let recs = &history.records;
    let k: Vec<u64> = recs.iter().map(|r| r.k).collect();
    let k_end = *k.last().unwrap_or(&1);
    let k2gap: Option<Vec<f64>> = recs
        .iter()
        .map(|r| r.gap.map(|g| (r.k as f64).powi(2) * g))
        .collect();
    let envelope = k2gap.as_ref().map(|v| {
        let mut run = 0.0f64;
        v.iter().map(|x| {
            run = run.max(*x);
            run
        }).collect::<Vec<_>>()
    });
    let envelope_growth = envelope.as_ref().map(|env| {
        let idx = k.iter().rposition(|&kk| kk <= k_end / 10).unwrap_or(0);
        let start = env[idx];
        let end = *env.last().unwrap_or(&0.0);
        if start > 0.0 {
            (end - start) / start
        } else if end > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    });
    let sum_k_gap: Option<Vec<f64>> = recs.iter().map(|r| r.sum_k_gap).collect();
    let sum_k_step2: Vec<f64> = recs.iter().map(|r| r.sum_k_step2).collect();
    let k_step: Vec<f64> = recs.iter().map(|r| r.k as f64 * r.step_norm).collect();
    let discrete_energy: Option<Vec<f64>> = recs.iter().map(|r| r.discrete_energy).collect();
    let step2_tail_fraction = tail_fraction(&k, &sum_k_step2, k_end / 2);
    let gap_tail_fraction = sum_k_gap.as_ref().map(|s| tail_fraction(&k, s, k_end / 2));
    let cauchy_applies = history.alpha > 3.0;
    DiscreteDiagnostics {
        envelope_stable: envelope_growth.map(|g| g < 0.05),
        envelope_growth,
        step2_cauchy: cauchy_applies.then_some(step2_tail_fraction < 0.1),
        gap_cauchy: if cauchy_applies { gap_tail_fraction.map(|f| f < 0.1) } else { None },
        step2_tail_fraction,
        gap_tail_fraction,
        max_k_step: k_step.iter().copied().fold(0.0, f64::max),
        k,
        k2gap,
        k2gap_envelope: envelope,
        sum_k_gap,
        sum_k_step2,
        k_step,
        discrete_energy,
    }
}
