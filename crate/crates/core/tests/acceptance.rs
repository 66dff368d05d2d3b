//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line.

use std::time::Instant;

use inertia_lab::integrator::{integrate, IntegratorConfig, State, Trajectory};
use inertia_lab::lyapunov::{self, EnergyParams, MONOTONE_TOL};
use inertia_lab::problems::{catalog, CompositeProblem, Params};
use inertia_lab::{linalg, oracle, solver};

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn verdict(id: u32, name: &str, pass: bool, detail: String, started: Instant) {
    println!(
        "criterion {id:>2} {name}: {} ({detail}; {:.2}s)",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

/// Tight absolute tolerance for long runs on fast-decaying states.
fn deep_config(alpha: f64, t_end: f64) -> IntegratorConfig {
    let mut cfg = IntegratorConfig::new(alpha, 1.0, t_end);
    cfg.abs_tol = 1e-20;
    cfg
}

#[test]
fn c01_exp_decay_closed_form() {
    let started = Instant::now();
    let p = catalog("exp-decay", &params(&[("alpha", 3.0)])).unwrap();
    let traj = integrate(&p, &IntegratorConfig::new(3.0, 1.0, 100.0), &[0.0], &[1.0]).unwrap();
    let err = traj.states.iter().map(|s| (s.x[0] - s.t.ln()).abs()).fold(0.0, f64::max);
    verdict(1, "exp-decay trajectory matches ln t", err <= 1e-6, format!("max |x − ln t| = {err:.3e}"), started);
}

#[test]
fn c02_power_gamma_closed_form() {
    let started = Instant::now();
    let p = catalog("power-gamma", &params(&[("gamma", 4.0), ("alpha", 5.0)])).unwrap();
    let traj = integrate(&p, &IntegratorConfig::new(5.0, 1.0, 100.0), &[1.0], &[-1.0]).unwrap();
    let err = traj
        .states
        .iter()
        .map(|s| ((s.x[0] - 1.0 / s.t) * s.t).abs())
        .fold(0.0, f64::max);
    let report = lyapunov::energy_report(&traj, &p, None).unwrap();
    let fit = lyapunov::fit_rate(&report.gap_series(), lyapunov::DEFAULT_FIT_WINDOW, true).unwrap();
    let pass = err <= 1e-6 && (fit.exponent + 4.0).abs() <= 0.05;
    verdict(
        2,
        "power-gamma trajectory and gap rate",
        pass,
        format!("max rel err {err:.3e}, gap exponent {:.4}", fit.exponent),
        started,
    );
}

fn catalog_runs() -> Vec<(CompositeProblem, Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    let z = catalog("zero", &params(&[("dim", 2.0)])).unwrap();
    out.push((z, vec![1.0, -1.0], vec![1.0, 0.5]));
    let q = catalog("quadratic", &params(&[("dim", 4.0), ("mu", 1.0), ("l", 10.0)])).unwrap();
    let x0 = q.default_start();
    out.push((q, x0, vec![0.0; 4]));
    let pg = catalog("power-gamma", &Params::new()).unwrap();
    out.push((pg, vec![1.0], vec![-1.0]));
    let e = catalog("exp-decay", &Params::new()).unwrap();
    out.push((e, vec![0.0], vec![1.0]));
    let ip = catalog("inverse-power", &Params::new()).unwrap();
    out.push((ip, vec![1.0], vec![0.5]));
    let l = catalog("lasso", &params(&[("smoothing", 0.01)])).unwrap();
    let x0 = l.default_start();
    out.push((l, x0, vec![0.0; 50]));
    let b = catalog("box-qp", &params(&[("smoothing", 0.01)])).unwrap();
    let x0 = b.default_start();
    out.push((b, x0, vec![0.0; 10]));
    out
}

#[test]
fn c03_global_energy_decay() {
    let started = Instant::now();
    let mut worst_rise = 0.0f64;
    let mut worst_balance = 0.0f64;
    let mut worst_case = String::new();
    for (p, x0, v0) in catalog_runs() {
        for alpha in [1.0, 3.0, 4.0, 6.0] {
            let traj = integrate(&p, &IntegratorConfig::new(alpha, 1.0, 100.0), &x0, &v0).unwrap();
            let w: Vec<f64> = traj.states.iter().map(|s| lyapunov::global_energy(s, &p).unwrap()).collect();
            let v = lyapunov::monotone_verdict(&w, MONOTONE_TOL, true);
            let b = lyapunov::energy_balance(&traj, &p).unwrap();
            if v.max_violation > worst_rise || b.max_relative_residual > worst_balance {
                worst_case = format!("{} α={alpha}", p.id);
            }
            worst_rise = worst_rise.max(v.max_violation);
            worst_balance = worst_balance.max(b.max_relative_residual);
        }
    }
    let pass = worst_rise <= 1e-8 && worst_balance <= 1e-6;
    verdict(
        3,
        "W nonincreasing and energy balance across the catalog",
        pass,
        format!("max rise {worst_rise:.3e}, max balance residual {worst_balance:.3e}, worst {worst_case}"),
        started,
    );
}

#[test]
fn c04_anchored_energy_monotone() {
    let started = Instant::now();
    let q = catalog("quadratic", &Params::new()).unwrap();
    let pg = catalog("power-gamma", &Params::new()).unwrap();
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (p, x0, v0) in [(&q, 1.0, 0.0), (&pg, 1.0, -1.0)] {
        for alpha in [3.0, 4.0, 6.0] {
            let traj = integrate(p, &deep_config(alpha, 1e3), &[x0], &[v0]).unwrap();
            for lambda in [2.0, alpha - 1.0] {
                let ep = EnergyParams::balanced(lambda, alpha, vec![0.0]).unwrap();
                let r = lyapunov::energy_report(&traj, p, Some(&ep)).unwrap();
                let v = r.verdicts["E_lx"];
                assert!(v.asserted);
                if !v.nonincreasing {
                    detail.push(format!("{} α={alpha} λ={lambda}", p.id));
                }
                worst = worst.max(v.max_violation);
            }
        }
    }
    verdict(
        4,
        "E_{λ,ξ*} nonincreasing",
        worst <= 1e-8,
        format!("max relative rise {worst:.3e} {detail:?}"),
        started,
    );
}

fn value_bound_runs() -> Vec<(CompositeProblem, Vec<f64>, Vec<f64>)> {
    let q = catalog("quadratic", &Params::new()).unwrap();
    let pg = catalog("power-gamma", &Params::new()).unwrap();
    let l = catalog("lasso", &params(&[("smoothing", 0.01)])).unwrap();
    let lx0 = l.default_start();
    vec![
        (q, vec![1.0], vec![0.0]),
        (pg, vec![1.0], vec![-1.0]),
        (l, lx0, vec![0.0; 50]),
    ]
}

#[test]
fn c05_value_rate_bound() {
    let started = Instant::now();
    let mut worst_ratio = 0.0f64;
    let mut failures = Vec::new();
    for (p, x0, v0) in value_bound_runs() {
        for alpha in [3.0, 4.0, 6.0] {
            let cfg = if p.dim() > 1 { IntegratorConfig::new(alpha, 1.0, 1e4) } else { deep_config(alpha, 1e4) };
            let traj = integrate(&p, &cfg, &x0, &v0).unwrap();
            let e = lyapunov::check_special_energies(&traj, &p, alpha).unwrap();
            worst_ratio = worst_ratio.max(e.sup_t2gap / e.bound);
            if !e.bound_holds {
                failures.push(format!("{} α={alpha}", p.id));
            }
        }
    }
    verdict(
        5,
        "sup t²·gap ≤ E_{α−1,0}(t0)",
        failures.is_empty(),
        format!("max ratio {worst_ratio:.6} {failures:?}"),
        started,
    );
}

fn strong_convexity_runs() -> Vec<(f64, Trajectory)> {
    let q = catalog("quadratic", &params(&[("mu", 1.0)])).unwrap();
    [3.0, 4.5, 6.0]
        .into_iter()
        .map(|alpha| (alpha, integrate(&q, &deep_config(alpha, 1e4), &[1.0], &[0.0]).unwrap()))
        .collect()
}

#[test]
fn c06_strong_convexity_rate() {
    let started = Instant::now();
    let q = catalog("quadratic", &params(&[("mu", 1.0)])).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (alpha, traj) in strong_convexity_runs() {
        let r = lyapunov::energy_report(&traj, &q, None).unwrap();
        let fit = lyapunov::fit_rate(&r.gap_series(), lyapunov::DEFAULT_FIT_WINDOW, true).unwrap();
        let target = -2.0 * alpha / 3.0;
        pass &= (fit.exponent - target).abs() <= 0.3;
        detail.push(format!("α={alpha}: {:.3} vs {target:.3}", fit.exponent));
    }
    verdict(6, "envelope exponent within 0.3 of −2α/3", pass, detail.join(", "), started);
}

#[test]
fn c07_velocity_bound() {
    let started = Instant::now();
    let q = catalog("quadratic", &params(&[("mu", 1.0)])).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (alpha, traj) in strong_convexity_runs() {
        let b = lyapunov::velocity_bound(&traj, &q, alpha).unwrap();
        pass &= b.holds;
        detail.push(format!("α={alpha}: {:.4} ≤ {:.4}", b.max_t_norm_v, b.bound));
    }
    verdict(7, "t‖v‖ bound", pass, detail.join(", "), started);
}

#[test]
fn c08_ergodic_acceleration() {
    let started = Instant::now();
    let q = catalog("quadratic", &Params::new()).unwrap();
    let traj = integrate(&q, &deep_config(4.0, 1e4), &[1.0], &[0.0]).unwrap();
    let g = lyapunov::ergodic_acceleration(&traj, &q, 4.0).unwrap();
    verdict(
        8,
        "ergodic acceleration decays",
        g.g_end < 0.5 * g.g_mid,
        format!("g(end) = {:.3e}, g(mid) = {:.3e}", g.g_end, g.g_mid),
        started,
    );
}

fn rescaling_error(p: &CompositeProblem, alpha: f64, x0: &[f64], v0: &[f64], a: f64) -> f64 {
    let mut cfg = IntegratorConfig::new(alpha, 1.0, 100.0);
    cfg.rel_tol = 1e-12;
    cfg.abs_tol = 1e-16;
    let orig = integrate(p, &cfg, x0, v0).unwrap();
    let scaled = p.scaled(a * a).unwrap();
    let mut cfg_s = cfg.clone();
    cfg_s.t0 = cfg.t0 / a;
    cfg_s.t_end = cfg.t_end / a;
    let av0: Vec<f64> = v0.iter().map(|v| a * v).collect();
    let resc = integrate(&scaled, &cfg_s, x0, &av0).unwrap();
    let mut worst = 0.0f64;
    for (s, y) in orig.states.iter().zip(&resc.states) {
        assert!((y.t * a - s.t).abs() <= 1e-12 * s.t);
        let scale = linalg::norm(&s.x).max(linalg::norm(&s.v)).max(1e-300);
        let dx = linalg::dist(&s.x, &y.x);
        let dv = s.v.iter().zip(&y.v).map(|(v, w)| (a * v - w).powi(2)).sum::<f64>().sqrt() / a;
        worst = worst.max(dx.max(dv) / scale);
    }
    worst
}

#[test]
fn c09_rescaling_invariance() {
    let started = Instant::now();
    let q = catalog("quadratic", &params(&[("dim", 3.0), ("l", 5.0)])).unwrap();
    let pg = catalog("power-gamma", &Params::new()).unwrap();
    let eq = rescaling_error(&q, 4.0, &[1.0, -1.0, 0.5], &[0.0; 3], 2.0);
    let ep = rescaling_error(&pg, 5.0, &[1.0], &[-1.0], 2.0);
    verdict(
        9,
        "time rescaling a = 2",
        eq <= 1e-7 && ep <= 1e-7,
        format!("quadratic {eq:.3e}, power-gamma {ep:.3e}"),
        started,
    );
}

#[test]
fn c10_discrete_rate() {
    let started = Instant::now();
    let l = catalog("lasso", &params(&[("m", 20.0), ("n", 50.0), ("seed", 0.0)])).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for alpha in [3.0, 4.0, 5.0] {
        let h = solver::run(&l, &solver::SolverConfig::new(alpha, 100_000, l.default_start())).unwrap();
        let d = solver::discrete_diagnostics(&h);
        let growth = d.envelope_growth.unwrap();
        pass &= growth < 0.05;
        let mut line = format!("α={alpha}: envelope growth {growth:.3e}");
        if alpha > 3.0 {
            let tail = h.record_at(100_000).unwrap();
            let mid = h.record_at(50_000).unwrap();
            let dist = linalg::dist(&tail.x, &mid.x);
            pass &= d.step2_cauchy == Some(true) && dist <= 1e-6;
            line += &format!(", Σk‖Δx‖² tail {:.3e}, ‖x_1e5 − x_5e4‖ {dist:.3e}", d.step2_tail_fraction);
        }
        detail.push(line);
    }
    verdict(10, "discrete O(1/k²) rate and Cauchy tails", pass, detail.join("; "), started);
}

#[test]
fn c11_fista_equivalence() {
    let started = Instant::now();
    let pass = [1u64, 2, 10, 1_000, 1_000_000]
        .iter()
        .all(|&k| solver::inertial_coefficient(k, 3.0) == (k - 1) as f64 / (k + 2) as f64);
    verdict(11, "α = 3 coefficients equal (k−1)/(k+2)", pass, "k ∈ {1, 2, 10, 1e3, 1e6}".into(), started);
}

fn cross_validation_error(p: &CompositeProblem, alpha: f64, x0: &[f64], v0: &[f64]) -> f64 {
    let traj = integrate(p, &IntegratorConfig::new(alpha, 1.0, 10.0), x0, v0).unwrap();
    let times = traj.times();
    let reference = oracle::tiny_step_integrate(p, alpha, 1.0, x0, v0, 10.0, &times).unwrap();
    traj.states
        .iter()
        .zip(&reference)
        .map(|(s, (t, x, v)): (&State, &oracle::ReferenceState)| {
            assert_eq!(s.t, *t);
            let num = linalg::norm_sq(&linalg::sub(&s.x, x)) + linalg::norm_sq(&linalg::sub(&s.v, v));
            let den = linalg::norm_sq(x) + linalg::norm_sq(v);
            (num / den).sqrt()
        })
        .fold(0.0, f64::max)
}

#[test]
fn c12_oracle_cross_validation() {
    let started = Instant::now();
    let q = catalog("quadratic", &params(&[("dim", 3.0), ("l", 10.0)])).unwrap();
    let e = catalog("exp-decay", &Params::new()).unwrap();
    let eq = cross_validation_error(&q, 3.0, &[1.0, 1.0, 1.0], &[0.0; 3]);
    let ee = cross_validation_error(&e, 3.0, &[0.0], &[1.0]);
    verdict(
        12,
        "adaptive integrator vs fixed-step reference",
        eq <= 1e-6 && ee <= 1e-6,
        format!("quadratic {eq:.3e}, exp-decay {ee:.3e}"),
        started,
    );
}
