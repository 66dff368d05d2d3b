//! Adaptive integration of `ẍ + (α/t)ẋ + ∇f(x) = 0` from `t0 > 0`.
//!
//! The second-order equation is integrated as the first-order system
//! `(ẋ, v̇) = (v, −(α/t)v − ∇f(x))` with the Dormand–Prince 5(4) pair, PI step
//! control and the 4th-order continuous extension. Output is sampled on a
//! geometric grid. While stepping, the dense interpolant also feeds a
//! Gauss–Legendre quadrature of the integrands used by the energy identities.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::fmt_f64;
use crate::linalg;
use crate::problems::{CompositeProblem, ProxTerm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub alpha: f64,
    pub t0: f64,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub sample_count: usize,
    /// Accumulate running integrals over the dense output.
    pub quadrature: bool,
}

impl IntegratorConfig {
    pub fn new(alpha: f64, t0: f64, t_end: f64) -> Self {
        Self {
            alpha,
            t0,
            t_end,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_steps: 20_000_000,
            sample_count: 200,
            quadrature: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return bad("t0 must be positive (the damping α/t is singular at 0)");
        }
        if !(self.t_end > self.t0 && self.t_end.is_finite()) {
            return bad("t_end must exceed t0");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.sample_count < 2 {
            return bad("sample_count must be at least 2");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }

    /// `sample_count` times equally spaced in `ln t`, ending exactly at `t_end`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = self.sample_count;
        let ratio = self.t_end / self.t0;
        (0..n)
            .map(|i| match i {
                0 => self.t0,
                i if i == n - 1 => self.t_end,
                i => self.t0 * ratio.powf(i as f64 / (n - 1) as f64),
            })
            .collect()
    }
}

/// Running integrals over `[t0, tᵢ]`, one entry per sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunningIntegrals {
    /// `∫ (α/s)‖v‖² ds`
    pub dissipation: Vec<f64>,
    /// `∫ s‖v‖² ds`
    pub t_kinetic: Vec<f64>,
    /// `∫ s·(f − min f) ds`
    pub t_gap: Option<Vec<f64>>,
    /// `∫ (f − min f)/s ds`
    pub gap_over_t: Option<Vec<f64>>,
    /// `∫ s^α ‖ẍ‖² ds`
    pub weighted_accel: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub problem_id: String,
    pub config: IntegratorConfig,
    pub states: Vec<State>,
    pub integrals: Option<RunningIntegrals>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// CSV with header `t,x0,..,x{d-1},v0,..,v{d-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.states.first().map_or(0, |s| s.x.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        header.extend((0..d).map(|i| format!("v{i}")));
        writeln!(w, "{}", header.join(","))?;
        for s in &self.states {
            let row: Vec<String> = std::iter::once(s.t)
                .chain(s.x.iter().copied())
                .chain(s.v.iter().copied())
                .map(fmt_f64)
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn require_smooth(problem: &CompositeProblem) -> Result<()> {
    if problem.nonsmooth.is_some() {
        return Err(Error::NonsmoothDynamics(problem.id.clone()));
    }
    Ok(())
}

/// Right-hand side `(v, −(α/t)v − ∇f(x))`.
pub fn rhs(state: &State, alpha: f64, problem: &CompositeProblem) -> Result<(Vec<f64>, Vec<f64>)> {
    require_smooth(problem)?;
    if !(state.t > 0.0) {
        return Err(Error::InvalidConfig(format!("t must be positive, got {}", state.t)));
    }
    problem.check_dim(&state.x)?;
    problem.check_dim(&state.v)?;
    let g = problem.smooth.gradient(&state.x);
    let dv = state
        .v
        .iter()
        .zip(&g)
        .map(|(v, g)| -(alpha / state.t) * v - g)
        .collect();
    Ok((state.v.clone(), dv))
}

/// Exact solution of `ẍ + (α/t)ẋ = 0`:
/// `v(t) = v0 (t0/t)^α`, `x(t) = x0 + v0 t0^α (t0^{1−α} − t^{1−α})/(α−1)`.
pub fn free_decay(x0: &[f64], v0: &[f64], alpha: f64, t0: f64, t: f64) -> Result<State> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "free decay oracle needs alpha > 1 (got {alpha}); x is unbounded otherwise"
        )));
    }
    if !(t0 > 0.0 && t >= t0) {
        return Err(Error::InvalidConfig(format!("need 0 < t0 ≤ t (got t0={t0}, t={t})")));
    }
    if x0.len() != v0.len() {
        return Err(Error::DimensionMismatch { expected: x0.len(), got: v0.len() });
    }
    let damp = t0.powf(alpha);
    let shift = damp * (t0.powf(1.0 - alpha) - t.powf(1.0 - alpha)) / (alpha - 1.0);
    let decay = (t0 / t).powf(alpha);
    Ok(State {
        t,
        x: x0.iter().zip(v0).map(|(x, v)| x + v * shift).collect(),
        v: v0.iter().map(|v| v * decay).collect(),
    })
}

/// How to choose `v0` when it is not given numerically.
#[derive(Debug, Clone, PartialEq)]
pub enum VelocityInit {
    Zero,
    /// Along `−∇f(x0)`.
    Gradient { scale: Option<f64> },
    /// Along the proximal-point step `(I + γ∇f)⁻¹(x0) − x0`.
    ProxDir { gamma: f64, scale: Option<f64> },
    Explicit(Vec<f64>),
}

/// Resolve a [`VelocityInit`]. Directions are unit-normalized and multiplied by
/// `scale`, which defaults to `(α−1)/t0`.
pub fn initial_velocity(
    problem: &CompositeProblem,
    x0: &[f64],
    alpha: f64,
    t0: f64,
    init: &VelocityInit,
) -> Result<Vec<f64>> {
    problem.check_dim(x0)?;
    let default_scale = (alpha - 1.0) / t0;
    let along = |dir: Vec<f64>, scale: Option<f64>| {
        let n = linalg::norm(&dir);
        let s = scale.unwrap_or(default_scale);
        if n == 0.0 || !n.is_finite() {
            vec![0.0; dir.len()]
        } else {
            dir.into_iter().map(|d| s * d / n).collect()
        }
    };
    match init {
        VelocityInit::Zero => Ok(vec![0.0; x0.len()]),
        VelocityInit::Explicit(v) => {
            problem.check_dim(v)?;
            Ok(v.clone())
        }
        VelocityInit::Gradient { scale } => {
            let g = problem.smooth.gradient(x0);
            Ok(along(g.into_iter().map(|g| -g).collect(), *scale))
        }
        VelocityInit::ProxDir { gamma, scale } => {
            if !(*gamma > 0.0) {
                return Err(Error::InvalidConfig("prox-dir gamma must be positive".into()));
            }
            let p = smooth_proximal_point(problem, x0, *gamma);
            Ok(along(linalg::sub(&p, x0), *scale))
        }
    }
}

/// `argmin_ξ f(ξ) + ‖ξ − x0‖²/(2γ)` by gradient descent on the strongly
/// convex objective. Box-constrained entries are projected.
fn smooth_proximal_point(problem: &CompositeProblem, x0: &[f64], gamma: f64) -> Vec<f64> {
    let inv = 1.0 / gamma;
    let mut x = x0.to_vec();
    let objective = |x: &[f64]| {
        problem.smooth.value(x) + 0.5 * inv * x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    };
    let mut step = match problem.smooth.lipschitz() {
        Some(l) => 1.0 / (l + inv),
        None => gamma,
    };
    let project = |x: Vec<f64>| match &problem.nonsmooth {
        Some(ProxTerm::Box { lo, hi }) => x.into_iter().map(|v| v.clamp(*lo, *hi)).collect(),
        _ => x,
    };
    let mut fx = objective(&x);
    for _ in 0..10_000 {
        let mut g = problem.smooth.gradient(&x);
        for (gi, (xi, ai)) in g.iter_mut().zip(x.iter().zip(x0)) {
            *gi += inv * (xi - ai);
        }
        let gn = linalg::norm(&g);
        if gn <= 1e-12 * (1.0 + linalg::norm(&x)) {
            break;
        }
        // backtracking keeps this usable without a global Lipschitz bound
        loop {
            let trial: Vec<f64> = project(x.iter().zip(&g).map(|(a, b)| a - step * b).collect());
            let ft = objective(&trial);
            if ft.is_finite() && ft <= fx - 0.25 * step * gn * gn {
                x = trial;
                fx = ft;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return x;
            }
        }
    }
    x
}

// Dormand–Prince 5(4) coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

// 5-point Gauss–Legendre on [−1, 1]
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

struct System<'a> {
    problem: &'a CompositeProblem,
    alpha: f64,
    dim: usize,
    grad: Vec<f64>,
    evals: usize,
}

impl System<'_> {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let (x, v) = y.split_at(d);
        self.problem.smooth.gradient_into(x, &mut self.grad);
        out[..d].copy_from_slice(v);
        for i in 0..d {
            out[d + i] = -(self.alpha / t) * v[i] - self.grad[i];
        }
        self.evals += 1;
    }
}

/// Hermite-like dense output of one accepted step.
struct Dense {
    t: f64,
    h: f64,
    r1: Vec<f64>,
    r2: Vec<f64>,
    r3: Vec<f64>,
    r4: Vec<f64>,
    r5: Vec<f64>,
}

impl Dense {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t) / self.h;
        let s1 = 1.0 - s;
        for i in 0..out.len() {
            out[i] = self.r1[i] + s * (self.r2[i] + s1 * (self.r3[i] + s * (self.r4[i] + s1 * self.r5[i])));
        }
    }
}

struct Quadrature<'a> {
    problem: &'a CompositeProblem,
    alpha: f64,
    min_value: Option<f64>,
    acc: [f64; 5],
    out: RunningIntegrals,
    y: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Quadrature<'a> {
    fn new(problem: &'a CompositeProblem, alpha: f64, samples: usize) -> Self {
        let min_value = problem.known_min_value;
        let mut out = RunningIntegrals {
            dissipation: Vec::with_capacity(samples),
            t_kinetic: Vec::with_capacity(samples),
            t_gap: min_value.map(|_| Vec::with_capacity(samples)),
            gap_over_t: min_value.map(|_| Vec::with_capacity(samples)),
            weighted_accel: Vec::with_capacity(samples),
        };
        out.dissipation.push(0.0);
        out.t_kinetic.push(0.0);
        out.weighted_accel.push(0.0);
        if let Some(v) = out.t_gap.as_mut() {
            v.push(0.0);
        }
        if let Some(v) = out.gap_over_t.as_mut() {
            v.push(0.0);
        }
        let d = problem.dim();
        Self {
            problem,
            alpha,
            min_value,
            acc: [0.0; 5],
            out,
            y: vec![0.0; 2 * d],
            grad: vec![0.0; d],
        }
    }

    fn integrate(&mut self, dense: &Dense, a: f64, b: f64) {
        if b <= a {
            return;
        }
        let d = self.problem.dim();
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (node, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let s = mid + half * node;
            dense.eval(s, &mut self.y);
            let (x, v) = self.y.split_at(d);
            self.problem.smooth.gradient_into(x, &mut self.grad);
            let v2 = linalg::norm_sq(v);
            let acc2: f64 = v
                .iter()
                .zip(&self.grad)
                .map(|(vi, gi)| {
                    let a = -(self.alpha / s) * vi - gi;
                    a * a
                })
                .sum();
            let wh = w * half;
            self.acc[0] += wh * (self.alpha / s) * v2;
            self.acc[1] += wh * s * v2;
            self.acc[4] += wh * s.powf(self.alpha) * acc2;
            if let Some(m) = self.min_value {
                let gap = self.problem.smooth.value(x) - m;
                self.acc[2] += wh * s * gap;
                self.acc[3] += wh * gap / s;
            }
        }
    }

    fn record(&mut self) {
        self.out.dissipation.push(self.acc[0]);
        self.out.t_kinetic.push(self.acc[1]);
        self.out.weighted_accel.push(self.acc[4]);
        if let Some(v) = self.out.t_gap.as_mut() {
            v.push(self.acc[2]);
        }
        if let Some(v) = self.out.gap_over_t.as_mut() {
            v.push(self.acc[3]);
        }
    }
}

fn error_norm(y0: &[f64], y1: &[f64], err: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = y0.len().max(1);
    let sum: f64 = (0..y0.len())
        .map(|i| {
            let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / n as f64).sqrt()
}

fn state_of(t: f64, y: &[f64], d: usize) -> State {
    State {
        t,
        x: y[..d].to_vec(),
        v: y[d..].to_vec(),
    }
}

/// Integrate from `(x0, v0)` at `config.t0` to `config.t_end`.
pub fn integrate(
    problem: &CompositeProblem,
    config: &IntegratorConfig,
    x0: &[f64],
    v0: &[f64],
) -> Result<Trajectory> {
    require_smooth(problem)?;
    config.validate()?;
    problem.check_dim(x0)?;
    problem.check_dim(v0)?;
    let d = problem.dim();
    let n = 2 * d;
    let (rtol, atol) = (config.rel_tol, config.abs_tol);
    let times = config.sample_times();

    let mut sys = System {
        problem,
        alpha: config.alpha,
        dim: d,
        grad: vec![0.0; d],
        evals: 0,
    };
    let mut quad = config
        .quadrature
        .then(|| Quadrature::new(problem, config.alpha, times.len()));

    let mut t = config.t0;
    let mut y: Vec<f64> = x0.iter().chain(v0).copied().collect();
    if !linalg::all_finite(&y) {
        return Err(Error::NonFiniteState { last: Box::new(state_of(t, &y, d)) });
    }
    let mut states = Vec::with_capacity(times.len());
    states.push(State { t, x: x0.to_vec(), v: v0.to_vec() });
    let mut next_sample = 1;

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut buf = vec![0.0; n];

    sys.eval(t, &y, &mut k1);
    if !linalg::all_finite(&k1) {
        return Err(Error::NonFiniteState { last: Box::new(state_of(t, &y, d)) });
    }

    // initial step guess
    let mut h = {
        let sc: Vec<f64> = y.iter().map(|v| atol + rtol * v.abs()).collect();
        let rms = |a: &[f64]| (a.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
        let d0 = rms(&y);
        let d1 = rms(&k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(config.t_end - t);
        for i in 0..n {
            ys[i] = y[i] + h0 * k1[i];
        }
        sys.eval(t + h0, &ys, &mut k2);
        let diff: Vec<f64> = k2.iter().zip(&k1).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(config.t_end - t)
    };

    let mut fac_old: f64 = 1e-4;
    let mut rejected_last = false;
    let mut stats = IntegrationStats::default();

    while t < config.t_end {
        if stats.accepted + stats.rejected >= config.max_steps {
            return Err(Error::MaxStepsExceeded {
                max_steps: config.max_steps,
                last: Box::new(state_of(t, &y, d)),
            });
        }
        if t + 1.01 * h >= config.t_end {
            h = config.t_end - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { last: Box::new(state_of(t, &y, d)) });
        }

        for i in 0..n {
            ys[i] = y[i] + h * A21 * k1[i];
        }
        sys.eval(t + C2 * h, &ys, &mut k2);
        for i in 0..n {
            ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.eval(t + C3 * h, &ys, &mut k3);
        for i in 0..n {
            ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.eval(t + C4 * h, &ys, &mut k4);
        for i in 0..n {
            ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.eval(t + C5 * h, &ys, &mut k5);
        for i in 0..n {
            ys[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if h == config.t_end - t { config.t_end } else { t + h };
        sys.eval(t_new, &ys, &mut k6);
        for i in 0..n {
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.eval(t_new, &y1, &mut k7);
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let mut en = error_norm(&y, &y1, &err, rtol, atol);
        if !en.is_finite() || !linalg::all_finite(&k7) {
            en = f64::INFINITY;
        }

        let fac11 = en.powf(0.2 - BETA * 0.75);
        if en <= 1.0 {
            stats.accepted += 1;
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if rejected_last {
                h_new = h_new.min(h);
            }
            fac_old = en.max(1e-4);
            rejected_last = false;

            let dense = Dense {
                t,
                h,
                r1: y.clone(),
                r2: y1.iter().zip(&y).map(|(a, b)| a - b).collect(),
                r3: (0..n).map(|i| h * k1[i] - (y1[i] - y[i])).collect(),
                r4: (0..n)
                    .map(|i| (y1[i] - y[i]) - h * k7[i] - (h * k1[i] - (y1[i] - y[i])))
                    .collect(),
                r5: (0..n)
                    .map(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]))
                    .collect(),
            };
            let mut seg_start = t;
            while next_sample < times.len() && times[next_sample] <= t_new {
                let ts = times[next_sample];
                if let Some(q) = quad.as_mut() {
                    q.integrate(&dense, seg_start, ts);
                    q.record();
                }
                seg_start = ts;
                if ts == t_new {
                    states.push(state_of(ts, &y1, d));
                } else {
                    dense.eval(ts, &mut buf);
                    states.push(state_of(ts, &buf, d));
                }
                next_sample += 1;
            }
            if let Some(q) = quad.as_mut() {
                q.integrate(&dense, seg_start, t_new);
            }

            t = t_new;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            h = h_new;
        } else {
            stats.rejected += 1;
            if en.is_finite() {
                h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            } else {
                h *= FAC_MIN;
            }
            rejected_last = true;
            if h <= 1e-14 * t.abs().max(1.0) {
                let last = Box::new(state_of(t, &y, d));
                return Err(if en.is_finite() {
                    Error::StepSizeUnderflow { last }
                } else {
                    Error::NonFiniteState { last }
                });
            }
        }
    }
    stats.rhs_evals = sys.evals;
    debug_assert_eq!(states.len(), times.len());

    Ok(Trajectory {
        problem_id: problem.id.clone(),
        config: config.clone(),
        states,
        integrals: quad.map(|q| q.out),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{catalog, Params};

    fn params(kv: &[(&str, f64)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn rhs_examples() {
        let z = catalog("zero", &Params::new()).unwrap();
        let s = State { t: 1.0, x: vec![3.0], v: vec![0.0] };
        assert_eq!(rhs(&s, 3.0, &z).unwrap(), (vec![0.0], vec![0.0]));

        let e = catalog("exp-decay", &params(&[("alpha", 3.0)])).unwrap();
        let s = State { t: 1.0, x: vec![0.0], v: vec![1.0] };
        assert_eq!(rhs(&s, 3.0, &e).unwrap(), (vec![1.0], vec![-1.0]));

        let q = catalog("quadratic", &Params::new()).unwrap();
        let s = State { t: 2.0, x: vec![1.0], v: vec![0.0] };
        let (dx, dv) = rhs(&s, 3.0, &q).unwrap();
        assert_eq!(dx, vec![0.0]);
        assert_eq!(dv, vec![-1.0]);
    }

    #[test]
    fn rhs_rejects_nonsmooth() {
        let b = catalog("box-qp", &params(&[("dim", 2.0)])).unwrap();
        let s = State { t: 1.0, x: vec![0.0; 2], v: vec![0.0; 2] };
        assert!(matches!(rhs(&s, 3.0, &b), Err(Error::NonsmoothDynamics(_))));
        let cfg = IntegratorConfig::new(3.0, 1.0, 2.0);
        assert!(matches!(integrate(&b, &cfg, &[0.0; 2], &[0.0; 2]), Err(Error::NonsmoothDynamics(_))));
    }

    #[test]
    fn free_decay_examples() {
        let s = free_decay(&[2.0], &[0.0], 3.0, 1.0, 50.0).unwrap();
        assert_eq!((s.x[0], s.v[0]), (2.0, 0.0));
        let s = free_decay(&[0.0], &[1.0], 2.0, 1.0, 1e12).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-11);
        let s = free_decay(&[0.0], &[1.0], 3.0, 1.0, 10.0).unwrap();
        assert!((s.v[0] - 1e-3).abs() < 1e-18);
        assert!(free_decay(&[0.0], &[1.0], 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = IntegratorConfig::new(3.0, 0.0, 10.0);
        assert!(c.validate().is_err());
        c.t0 = 1.0;
        assert!(c.validate().is_ok());
        c.t_end = 0.5;
        assert!(c.validate().is_err());
        let c = IntegratorConfig::new(3.0, 1.0, 1e4);
        let ts = c.sample_times();
        assert_eq!(ts.len(), 200);
        assert_eq!((ts[0], ts[199]), (1.0, 1e4));
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_problem_stationary_is_exact() {
        let z = catalog("zero", &params(&[("dim", 2.0)])).unwrap();
        let traj = integrate(&z, &IntegratorConfig::new(4.0, 1.0, 100.0), &[1.5, -2.0], &[0.0, 0.0]).unwrap();
        assert!(traj.states.iter().all(|s| s.x == vec![1.5, -2.0] && s.v == vec![0.0, 0.0]));
    }

    #[test]
    fn max_steps_reports_last_state() {
        let q = catalog("quadratic", &Params::new()).unwrap();
        let mut cfg = IntegratorConfig::new(3.0, 1.0, 1e3);
        cfg.max_steps = 10;
        match integrate(&q, &cfg, &[1.0], &[0.0]) {
            Err(Error::MaxStepsExceeded { last, .. }) => assert!(last.t > 1.0 && last.t < 1e3),
            other => panic!("expected max-steps error, got {other:?}"),
        }
    }

    #[test]
    fn inverse_power_outside_domain_is_reported() {
        let p = catalog("inverse-power", &params(&[("theta", 2.0), ("alpha", 3.0)])).unwrap();
        // the potential is undefined for x ≤ 0
        let r = integrate(&p, &IntegratorConfig::new(3.0, 1.0, 100.0), &[-0.5], &[0.0]);
        assert!(matches!(r, Err(Error::NonFiniteState { .. }) | Err(Error::StepSizeUnderflow { .. })), "{r:?}");
    }

    #[test]
    fn velocity_initialization() {
        let q = catalog("quadratic", &params(&[("dim", 2.0)])).unwrap();
        let x0 = [3.0, 4.0];
        let v = initial_velocity(&q, &x0, 3.0, 1.0, &VelocityInit::Gradient { scale: None }).unwrap();
        assert!((v[0] + 1.2).abs() < 1e-15 && (v[1] + 1.6).abs() < 1e-15);
        let v = initial_velocity(&q, &x0, 3.0, 2.0, &VelocityInit::ProxDir { gamma: 100.0, scale: None }).unwrap();
        // proximal point of ½‖x‖² is x0/(1+γ): direction −x0
        assert!((v[0] + 0.6).abs() < 1e-9 && (v[1] + 0.8).abs() < 1e-9, "{v:?}");
        let v = initial_velocity(&q, &[0.0, 0.0], 3.0, 1.0, &VelocityInit::Gradient { scale: None }).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
        assert!(initial_velocity(&q, &x0, 3.0, 1.0, &VelocityInit::Explicit(vec![1.0])).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let z = catalog("zero", &params(&[("dim", 2.0)])).unwrap();
        let mut cfg = IntegratorConfig::new(3.0, 1.0, 10.0);
        cfg.sample_count = 3;
        let traj = integrate(&z, &cfg, &[1.0, 2.0], &[0.0, 0.0]).unwrap();
        let mut out = Vec::new();
        traj.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x0,x1,v0,v1");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "1.0000000000000000e0,1.0000000000000000e0,2.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0");
    }
}
