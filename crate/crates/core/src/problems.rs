//! Composite objectives `F = f + g` and the benchmark catalog.
//!
//! `f` is the smooth part (the potential driving the continuous dynamics and
//! the explicit half of the forward-backward step). `g` is an optional
//! prox-capable term handled implicitly by the discrete solver only.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::oracle;

/// Named real parameters for a catalog family.
pub type Params = BTreeMap<String, f64>;

/// Upper bound on the number of scalar unknowns a catalog instance may allocate.
const MAX_ENTRIES: f64 = 4.0e6;

/// Values of an extended-real valued function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }
}

/// One additive piece of a smooth term. Scalar families act componentwise
/// and are summed over coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothPiece {
    /// `½ Σ dᵢ (xᵢ − cᵢ)²`
    Quadratic { diag: Vec<f64>, center: Vec<f64> },
    /// `c |x|^γ`
    PowerGamma { c: f64, gamma: f64 },
    /// `coef · e^{−2x}`
    ExpDecay { coef: f64 },
    /// `c / x^θ`, defined for `x > 0` only.
    InversePower { c: f64, theta: f64 },
    /// `½ ‖A x − b‖²`
    LeastSquares { a: Matrix, b: Vec<f64> },
    /// `w Σ (√(xᵢ² + ε²) − ε)`, a smooth stand-in for `w‖x‖₁`.
    PseudoHuber { weight: f64, eps: f64 },
    /// `(ρ/2) dist²(x, [lo, hi]ⁿ)`, a smooth stand-in for the box indicator.
    BoxPenalty { lo: f64, hi: f64, rho: f64 },
}

impl SmoothPiece {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            SmoothPiece::Quadratic { diag, center } => {
                0.5 * x
                    .iter()
                    .zip(diag)
                    .zip(center)
                    .map(|((xi, d), c)| d * (xi - c) * (xi - c))
                    .sum::<f64>()
            }
            SmoothPiece::PowerGamma { c, gamma } => x.iter().map(|xi| c * xi.abs().powf(*gamma)).sum(),
            SmoothPiece::ExpDecay { coef } => x.iter().map(|xi| coef * (-2.0 * xi).exp()).sum(),
            SmoothPiece::InversePower { c, theta } => x
                .iter()
                .map(|&xi| if xi > 0.0 { c * xi.powf(-theta) } else { f64::INFINITY })
                .sum(),
            SmoothPiece::LeastSquares { a, b } => {
                let r = linalg::sub(&a.mul_vec(x), b);
                0.5 * linalg::norm_sq(&r)
            }
            SmoothPiece::PseudoHuber { weight, eps } => {
                weight * x.iter().map(|xi| (xi * xi + eps * eps).sqrt() - eps).sum::<f64>()
            }
            SmoothPiece::BoxPenalty { lo, hi, rho } => {
                0.5 * rho
                    * x.iter()
                        .map(|&xi| {
                            let d = xi - xi.clamp(*lo, *hi);
                            d * d
                        })
                        .sum::<f64>()
            }
        }
    }

    fn add_gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            SmoothPiece::Quadratic { diag, center } => {
                for i in 0..x.len() {
                    out[i] += diag[i] * (x[i] - center[i]);
                }
            }
            SmoothPiece::PowerGamma { c, gamma } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += c * gamma * xi.abs().powf(gamma - 2.0) * xi;
                }
            }
            SmoothPiece::ExpDecay { coef } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += -2.0 * coef * (-2.0 * xi).exp();
                }
            }
            SmoothPiece::InversePower { c, theta } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += if xi > 0.0 { -c * theta * xi.powf(-theta - 1.0) } else { f64::NAN };
                }
            }
            SmoothPiece::LeastSquares { a, b } => {
                let r = linalg::sub(&a.mul_vec(x), b);
                linalg::axpy(out, 1.0, &a.tr_mul_vec(&r));
            }
            SmoothPiece::PseudoHuber { weight, eps } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += weight * xi / (xi * xi + eps * eps).sqrt();
                }
            }
            SmoothPiece::BoxPenalty { lo, hi, rho } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += rho * (xi - xi.clamp(*lo, *hi));
                }
            }
        }
    }

    fn lipschitz(&self) -> Option<f64> {
        match self {
            SmoothPiece::Quadratic { diag, .. } => Some(diag.iter().cloned().fold(0.0, f64::max)),
            SmoothPiece::LeastSquares { a, .. } => Some(a.spectral_norm_sq(50, 1e-10)),
            SmoothPiece::PseudoHuber { weight, eps } => Some(weight / eps),
            SmoothPiece::BoxPenalty { rho, .. } => Some(*rho),
            SmoothPiece::PowerGamma { .. } | SmoothPiece::ExpDecay { .. } | SmoothPiece::InversePower { .. } => None,
        }
    }

    fn strong_convexity(&self) -> f64 {
        match self {
            SmoothPiece::Quadratic { diag, .. } => diag.iter().cloned().fold(f64::INFINITY, f64::min),
            _ => 0.0,
        }
    }
}

/// The smooth part `f`, a scaled sum of pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothTerm {
    dim: usize,
    pieces: Vec<SmoothPiece>,
    scale: f64,
    lipschitz: Option<f64>,
    strong_convexity: Option<f64>,
}

impl SmoothTerm {
    pub fn new(dim: usize, pieces: Vec<SmoothPiece>) -> Self {
        let lipschitz = if pieces.is_empty() {
            Some(0.0)
        } else {
            pieces
                .iter()
                .map(SmoothPiece::lipschitz)
                .try_fold(0.0, |acc, l| l.map(|l| acc + l))
        };
        let mu: f64 = pieces.iter().map(SmoothPiece::strong_convexity).sum();
        Self {
            dim,
            pieces,
            scale: 1.0,
            lipschitz,
            strong_convexity: (mu > 0.0).then_some(mu),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[SmoothPiece] {
        &self.pieces
    }

    /// Lipschitz constant of the gradient, when globally finite.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    /// Strong-convexity modulus μ, when positive.
    pub fn strong_convexity(&self) -> Option<f64> {
        self.strong_convexity
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.scale * self.pieces.iter().map(|p| p.value(x)).sum::<f64>()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, &mut g);
        g
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        out.iter_mut().for_each(|o| *o = 0.0);
        for p in &self.pieces {
            p.add_gradient(x, out);
        }
        if self.scale != 1.0 {
            out.iter_mut().for_each(|o| *o *= self.scale);
        }
    }

    /// `s · f`
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            pieces: self.pieces.clone(),
            scale: self.scale * s,
            lipschitz: self.lipschitz.map(|l| l * s),
            strong_convexity: self.strong_convexity.map(|m| m * s),
        }
    }
}

/// Componentwise `sign(xᵢ) · max(|xᵢ| − threshold, 0)`.
pub fn soft_threshold(x: &[f64], threshold: f64) -> Vec<f64> {
    x.iter()
        .map(|&xi| xi.signum() * (xi.abs() - threshold).max(0.0))
        .collect()
}

/// A prox-capable nonsmooth term `g`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxTerm {
    /// `w ‖x‖₁`
    L1 { weight: f64 },
    /// Indicator of `[lo, hi]ⁿ`.
    Box { lo: f64, hi: f64 },
}

impl ProxTerm {
    pub fn value(&self, x: &[f64]) -> ExtReal {
        match self {
            ProxTerm::L1 { weight } => ExtReal::Finite(weight * x.iter().map(|v| v.abs()).sum::<f64>()),
            ProxTerm::Box { lo, hi } => {
                if x.iter().all(|v| (*lo..=*hi).contains(v)) {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::Infinite
                }
            }
        }
    }

    /// `prox_{γg}(x) = argmin_p g(p) + ‖p − x‖² / (2γ)`
    pub fn prox(&self, gamma: f64, x: &[f64]) -> Vec<f64> {
        debug_assert!(gamma > 0.0);
        match self {
            ProxTerm::L1 { weight } => soft_threshold(x, gamma * weight),
            ProxTerm::Box { lo, hi } => x.iter().map(|v| v.clamp(*lo, *hi)).collect(),
        }
    }
}

/// Catalog families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Zero,
    Quadratic,
    PowerGamma,
    ExpDecay,
    InversePower,
    Lasso,
    BoxQp,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Zero,
        Family::Quadratic,
        Family::PowerGamma,
        Family::ExpDecay,
        Family::InversePower,
        Family::Lasso,
        Family::BoxQp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::Quadratic => "quadratic",
            Family::PowerGamma => "power-gamma",
            Family::ExpDecay => "exp-decay",
            Family::InversePower => "inverse-power",
            Family::Lasso => "lasso",
            Family::BoxQp => "box-qp",
        }
    }

    pub fn allowed_params(self) -> &'static [&'static str] {
        match self {
            Family::Zero => &["dim"],
            Family::Quadratic => &["dim", "mu", "l"],
            Family::PowerGamma => &["gamma", "alpha"],
            Family::ExpDecay => &["alpha"],
            Family::InversePower => &["theta", "alpha"],
            Family::Lasso => &["m", "n", "seed", "lambda", "sparsity", "noise", "smoothing"],
            Family::BoxQp => &["dim", "mu", "l", "lo", "hi", "seed", "smoothing"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// An exact solution of the damped dynamics attached to a catalog problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormTrajectory {
    family: String,
    params: Params,
    alpha: f64,
}

impl ClosedFormTrajectory {
    /// Damping parameter the formula solves for.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (x, v) = oracle::closed_form_trajectory(&self.family, &self.params, t)?;
        Ok((vec![x], vec![v]))
    }
}

/// `F = f + g` plus whatever analytic metadata is known.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeProblem {
    pub id: String,
    pub family: Option<Family>,
    pub smooth: SmoothTerm,
    pub nonsmooth: Option<ProxTerm>,
    /// `min F` (or `inf F` when the argmin is empty).
    pub known_min_value: Option<f64>,
    pub known_minimizer: Option<Vec<f64>>,
    pub closed_form: Option<ClosedFormTrajectory>,
    /// Optimality certificate of a computed reference minimum.
    pub min_certificate: Option<f64>,
}

impl CompositeProblem {
    pub fn smooth_only(id: impl Into<String>, smooth: SmoothTerm) -> Self {
        Self {
            id: id.into(),
            family: None,
            smooth,
            nonsmooth: None,
            known_min_value: None,
            known_minimizer: None,
            closed_form: None,
            min_certificate: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn is_smooth(&self) -> bool {
        self.nonsmooth.is_none()
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `f(x) + g(x)`
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let g = match &self.nonsmooth {
            None => 0.0,
            Some(term) => term.value(x).finite().ok_or(Error::InfiniteValue)?,
        };
        Ok(self.smooth.value(x) + g)
    }

    /// `F(x) − min F`, clamped at zero inside a `1e−12` numerical floor.
    pub fn gap(&self, x: &[f64]) -> Result<f64> {
        let reference = self
            .known_min_value
            .ok_or_else(|| Error::NoReferenceMinimum(self.id.clone()))?;
        gap_against(self.value(x)?, reference)
    }

    /// Gap against a caller-supplied reference value.
    pub fn gap_with_reference(&self, x: &[f64], reference: f64) -> Result<f64> {
        gap_against(self.value(x)?, reference)
    }

    /// Argmin known and nonempty.
    pub fn has_minimizer(&self) -> bool {
        self.known_minimizer.is_some()
    }

    /// The problem `s·F` (drops trajectory metadata, which is tied to `F`).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidConfig(format!("scale must be positive, got {s}")));
        }
        if self.nonsmooth.is_some() {
            return Err(Error::NonsmoothDynamics(self.id.clone()));
        }
        Ok(Self {
            id: format!("{}*{}", self.id, s),
            family: self.family,
            smooth: self.smooth.scaled(s),
            nonsmooth: None,
            known_min_value: self.known_min_value.map(|m| m * s),
            known_minimizer: self.known_minimizer.clone(),
            closed_form: None,
            min_certificate: self.min_certificate,
        })
    }

    /// Default starting point for runs that do not set one.
    pub fn default_start(&self) -> Vec<f64> {
        match (&self.family, &self.nonsmooth) {
            (Some(Family::ExpDecay), _) => vec![0.0],
            (Some(Family::Lasso), _) => vec![0.0; self.dim()],
            (_, Some(ProxTerm::Box { lo, hi })) => vec![0.0f64.clamp(*lo, *hi); self.dim()],
            _ => vec![1.0; self.dim()],
        }
    }
}

fn gap_against(value: f64, reference: f64) -> Result<f64> {
    let gap = value - reference;
    if gap >= 0.0 {
        Ok(gap)
    } else if gap >= -1e-12 * (1.0 + reference.abs()) {
        Ok(0.0)
    } else {
        Err(Error::BelowReference { value, reference })
    }
}

struct ParamReader<'a> {
    family: Family,
    params: &'a Params,
}

impl ParamReader<'_> {
    fn invalid(&self, constraint: impl Into<String>) -> Error {
        Error::InvalidParameter {
            family: self.family.name().to_string(),
            constraint: constraint.into(),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.params.get(key).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(self.invalid(format!("{key} must be finite")));
        }
        Ok(v)
    }

    fn opt_real(&self, key: &str) -> Result<Option<f64>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(v) if v.is_finite() => Ok(Some(*v)),
            Some(_) => Err(self.invalid(format!("{key} must be finite"))),
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.real(key, default as f64)?;
        if v < 1.0 || v.fract() != 0.0 || v > MAX_ENTRIES {
            return Err(self.invalid(format!("{key} must be a positive integer ≤ {MAX_ENTRIES}")));
        }
        Ok(v as usize)
    }

    fn seed(&self) -> Result<u64> {
        let v = self.real("seed", 0.0)?;
        if v < 0.0 || v.fract() != 0.0 || v > 9.0e15 {
            return Err(self.invalid("seed must be a nonnegative integer"));
        }
        Ok(v as u64)
    }
}

/// Build a catalog problem.
///
/// | family | params (defaults) |
/// |---|---|
/// | `zero` | `dim` (1) |
/// | `quadratic` | `dim` (1), `mu` (1), `l` (= mu): `½ Σ dᵢ xᵢ²`, `dᵢ` spaced in `[mu, l]` |
/// | `power-gamma` | `gamma` (4), `alpha` (5): `c|x|^γ` with trajectory `t^{−2/(γ−2)}` |
/// | `exp-decay` | `alpha` (3): `((α−1)/2) e^{−2x}` with trajectory `ln t` |
/// | `inverse-power` | `theta` (2), `alpha` (3): `c/x^θ` with trajectory `t^{2/(2+θ)}` |
/// | `lasso` | `m` (20), `n` (50), `seed` (0), `lambda`, `sparsity` (5), `noise` (0.01), `smoothing` |
/// | `box-qp` | `dim` (10), `mu` (1), `l` (10), `lo` (−1), `hi` (1), `seed` (0), `smoothing` |
///
/// With `smoothing = ε > 0`, lasso's `λ‖x‖₁` becomes a pseudo-Huber term of
/// width ε and box-qp's indicator becomes a penalty of stiffness `1/ε`, giving
/// a smooth problem the continuous dynamics can run on.
pub fn catalog(name: &str, params: &Params) -> Result<CompositeProblem> {
    let family: Family = name.parse()?;
    let reader = ParamReader { family, params };
    if let Some(key) = params.keys().find(|k| !family.allowed_params().contains(&k.as_str())) {
        return Err(reader.invalid(format!(
            "unknown parameter `{key}` (allowed: {})",
            family.allowed_params().join(", ")
        )));
    }
    let mut problem = match family {
        Family::Zero => {
            let dim = reader.count("dim", 1)?;
            let mut p = CompositeProblem::smooth_only("zero", SmoothTerm::new(dim, vec![]));
            p.known_min_value = Some(0.0);
            p.known_minimizer = Some(vec![0.0; dim]);
            p
        }
        Family::Quadratic => {
            let dim = reader.count("dim", 1)?;
            let mu = reader.real("mu", 1.0)?;
            let l = reader.real("l", mu)?;
            if mu <= 0.0 {
                return Err(reader.invalid("mu > 0"));
            }
            if l < mu {
                return Err(reader.invalid("l ≥ mu"));
            }
            let diag = spaced(mu, l, dim);
            let mut p = CompositeProblem::smooth_only(
                "quadratic",
                SmoothTerm::new(dim, vec![SmoothPiece::Quadratic { diag, center: vec![0.0; dim] }]),
            );
            p.known_min_value = Some(0.0);
            p.known_minimizer = Some(vec![0.0; dim]);
            p
        }
        Family::PowerGamma => {
            let gamma = reader.real("gamma", 4.0)?;
            let alpha = reader.real("alpha", 5.0)?;
            let c = power_gamma_coefficient(gamma, alpha).map_err(|m| reader.invalid(m))?;
            let mut p = CompositeProblem::smooth_only(
                "power-gamma",
                SmoothTerm::new(1, vec![SmoothPiece::PowerGamma { c, gamma }]),
            );
            p.known_min_value = Some(0.0);
            p.known_minimizer = Some(vec![0.0]);
            p.closed_form = Some(closed_form("power-gamma", &[("gamma", gamma), ("alpha", alpha)]));
            p
        }
        Family::ExpDecay => {
            let alpha = reader.real("alpha", 3.0)?;
            if alpha < 1.0 {
                return Err(reader.invalid("alpha ≥ 1"));
            }
            let mut p = CompositeProblem::smooth_only(
                "exp-decay",
                SmoothTerm::new(1, vec![SmoothPiece::ExpDecay { coef: 0.5 * (alpha - 1.0) }]),
            );
            p.known_min_value = Some(0.0);
            p.closed_form = Some(closed_form("exp-decay", &[("alpha", alpha)]));
            p
        }
        Family::InversePower => {
            let theta = reader.real("theta", 2.0)?;
            let alpha = reader.real("alpha", 3.0)?;
            let c = inverse_power_coefficient(theta, alpha).map_err(|m| reader.invalid(m))?;
            let mut p = CompositeProblem::smooth_only(
                "inverse-power",
                SmoothTerm::new(1, vec![SmoothPiece::InversePower { c, theta }]),
            );
            p.known_min_value = Some(0.0);
            p.closed_form = Some(closed_form("inverse-power", &[("theta", theta), ("alpha", alpha)]));
            p
        }
        Family::Lasso => lasso(&reader)?,
        Family::BoxQp => box_qp(&reader)?,
    };
    problem.family = Some(family);
    Ok(problem)
}

/// `c = (2/(γ(γ−2)))(α − γ/(γ−2))`, requiring `γ > 2` and `α > γ/(γ−2)`.
pub fn power_gamma_coefficient(gamma: f64, alpha: f64) -> std::result::Result<f64, String> {
    if gamma <= 2.0 {
        return Err(format!("gamma > 2 (got {gamma})"));
    }
    let threshold = gamma / (gamma - 2.0);
    if alpha <= threshold {
        return Err(format!("alpha > gamma/(gamma-2) = {threshold} (got {alpha})"));
    }
    Ok(2.0 / (gamma * (gamma - 2.0)) * (alpha - threshold))
}

/// `c = 2(2α + θ(α−1)) / (θ(2+θ)²)`, requiring `θ > 0` and `α ≥ θ/(2+θ)`.
pub fn inverse_power_coefficient(theta: f64, alpha: f64) -> std::result::Result<f64, String> {
    if theta <= 0.0 {
        return Err(format!("theta > 0 (got {theta})"));
    }
    let threshold = theta / (2.0 + theta);
    if alpha < threshold {
        return Err(format!("alpha ≥ theta/(2+theta) = {threshold} (got {alpha})"));
    }
    Ok(2.0 * (2.0 * alpha + theta * (alpha - 1.0)) / (theta * (2.0 + theta).powi(2)))
}

fn closed_form(family: &str, params: &[(&str, f64)]) -> ClosedFormTrajectory {
    let params: Params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    ClosedFormTrajectory {
        family: family.to_string(),
        alpha: params["alpha"],
        params,
    }
}

fn spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn smoothing(reader: &ParamReader<'_>) -> Result<Option<f64>> {
    match reader.opt_real("smoothing")? {
        Some(eps) if eps <= 0.0 => Err(reader.invalid("smoothing > 0")),
        other => Ok(other),
    }
}

fn lasso(reader: &ParamReader<'_>) -> Result<CompositeProblem> {
    let m = reader.count("m", 20)?;
    let n = reader.count("n", 50)?;
    if (m as f64) * (n as f64) > MAX_ENTRIES {
        return Err(reader.invalid(format!("m·n ≤ {MAX_ENTRIES}")));
    }
    let seed = reader.seed()?;
    let sparsity = reader.real("sparsity", 5.0_f64.min(n as f64))?;
    if sparsity < 0.0 || sparsity.fract() != 0.0 || sparsity > n as f64 {
        return Err(reader.invalid("sparsity must be an integer in [0, n]"));
    }
    let noise = reader.real("noise", 0.01)?;
    if noise < 0.0 {
        return Err(reader.invalid("noise ≥ 0"));
    }
    let eps = smoothing(reader)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let a_data: Vec<f64> = (0..m * n)
        .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let a = Matrix::from_row_major(m, n, a_data);
    let mut x_true = vec![0.0; n];
    for xi in x_true.iter_mut().take(sparsity as usize) {
        *xi = StandardNormal.sample(&mut rng);
    }
    let mut b = a.mul_vec(&x_true);
    for bi in b.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *bi += noise * e;
    }
    let lambda = match reader.opt_real("lambda")? {
        Some(l) if l < 0.0 => return Err(reader.invalid("lambda ≥ 0")),
        Some(l) => l,
        None => 0.1 * a.tr_mul_vec(&b).iter().fold(0.0f64, |acc, v| acc.max(v.abs())),
    };

    let ls = SmoothPiece::LeastSquares { a, b };
    let (smooth, nonsmooth) = match eps {
        Some(eps) => (
            SmoothTerm::new(n, vec![ls, SmoothPiece::PseudoHuber { weight: lambda, eps }]),
            None,
        ),
        None => (SmoothTerm::new(n, vec![ls]), Some(ProxTerm::L1 { weight: lambda })),
    };
    let id = match eps {
        Some(eps) => format!("lasso(m={m},n={n},seed={seed},smoothing={eps})"),
        None => format!("lasso(m={m},n={n},seed={seed})"),
    };
    let mut problem = CompositeProblem {
        id,
        family: Some(Family::Lasso),
        smooth,
        nonsmooth,
        known_min_value: None,
        known_minimizer: None,
        closed_form: None,
        min_certificate: None,
    };
    let key = format!(
        "{}|{:x}|{:x}|{:x}",
        problem.id,
        lambda.to_bits(),
        noise.to_bits(),
        sparsity.to_bits()
    );
    let (value, point, certificate) = cached_reference(&key, &problem);
    problem.known_min_value = Some(value);
    problem.known_minimizer = Some(point);
    problem.min_certificate = Some(certificate);
    Ok(problem)
}

/// Iteration budget of the cached long reference solve.
pub const REFERENCE_BUDGET: usize = 1_000_000;

type CachedMinimum = (f64, Vec<f64>, f64);

fn cached_reference(key: &str, problem: &CompositeProblem) -> CachedMinimum {
    static CACHE: OnceLock<Mutex<HashMap<String, CachedMinimum>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("reference cache poisoned").get(key) {
        return hit.clone();
    }
    let reference = oracle::reference_minimum(problem, REFERENCE_BUDGET);
    let entry = (reference.value, reference.point, reference.certificate);
    cache
        .lock()
        .expect("reference cache poisoned")
        .insert(key.to_string(), entry.clone());
    entry
}

fn box_qp(reader: &ParamReader<'_>) -> Result<CompositeProblem> {
    let dim = reader.count("dim", 10)?;
    let mu = reader.real("mu", 1.0)?;
    let l = reader.real("l", 10.0_f64.max(mu))?;
    if mu <= 0.0 || l < mu {
        return Err(reader.invalid("0 < mu ≤ l"));
    }
    let lo = reader.real("lo", -1.0)?;
    let hi = reader.real("hi", 1.0)?;
    if lo >= hi {
        return Err(reader.invalid("lo < hi"));
    }
    let seed = reader.seed()?;
    let eps = smoothing(reader)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = hi - lo;
    let spread = Uniform::new(lo - width, hi + width).expect("finite bounds");
    let center: Vec<f64> = (0..dim).map(|_| spread.sample(&mut rng)).collect();
    let diag = spaced(mu, l, dim);

    // Separable, so the minimizer is exact per coordinate.
    let (minimizer, min_value): (Vec<f64>, f64) = match eps {
        None => {
            let x: Vec<f64> = center.iter().map(|c| c.clamp(lo, hi)).collect();
            let v = 0.5 * x.iter().zip(&center).zip(&diag).map(|((x, c), d)| d * (x - c) * (x - c)).sum::<f64>();
            (x, v)
        }
        Some(eps) => {
            let rho = 1.0 / eps;
            let mut value = 0.0;
            let x = center
                .iter()
                .zip(&diag)
                .map(|(&c, &d)| {
                    let bound = c.clamp(lo, hi);
                    let x = (d * c + rho * bound) / (d + rho);
                    value += 0.5 * d * (x - c) * (x - c) + 0.5 * rho * (x - bound) * (x - bound);
                    x
                })
                .collect();
            (x, value)
        }
    };

    let quad = SmoothPiece::Quadratic { diag, center };
    let (smooth, nonsmooth, id) = match eps {
        Some(eps) => (
            SmoothTerm::new(dim, vec![quad, SmoothPiece::BoxPenalty { lo, hi, rho: 1.0 / eps }]),
            None,
            format!("box-qp(dim={dim},seed={seed},smoothing={eps})"),
        ),
        None => (
            SmoothTerm::new(dim, vec![quad]),
            Some(ProxTerm::Box { lo, hi }),
            format!("box-qp(dim={dim},seed={seed})"),
        ),
    };
    Ok(CompositeProblem {
        id,
        family: Some(Family::BoxQp),
        smooth,
        nonsmooth,
        known_min_value: Some(min_value),
        known_minimizer: Some(minimizer),
        closed_form: None,
        min_certificate: Some(0.0),
    })
}

/// Problem-specification file: `{family, params, seed?, dim?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub family: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl ProblemSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("problem spec: {e}")))
    }

    /// Merge the top-level `seed`/`dim` shortcuts into the parameter map.
    pub fn merged_params(&self) -> Params {
        let mut params = self.params.clone();
        if let Some(seed) = self.seed {
            params.insert("seed".into(), seed as f64);
        }
        if let Some(dim) = self.dim {
            params.insert("dim".into(), dim as f64);
        }
        params
    }

    pub fn build(&self) -> Result<CompositeProblem> {
        catalog(&self.family, &self.merged_params())
    }
}
