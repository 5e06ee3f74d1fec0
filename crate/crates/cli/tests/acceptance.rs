//! End-to-end acceptance checks. Runs every criterion, prints one
//! PASS/FAIL line each and exits non-zero if any failed.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng as _;
use tmaris::config::stream;
use tmaris::experiments::run_cell;
use tmaris::{run_convergence, run_sweep, run_timing, ExperimentConfig, SweepAxis};
use tmaris_core::admm::updates::*;
use tmaris_core::admm::Problem;
use tmaris_core::linalg::*;
use tmaris_core::oracles::{
    default_fd_step, finite_difference_gradient, single_user_optimum, small_instance_certificate,
};
use tmaris_core::system::{complex_normal, sample_channel};
use tmaris_core::tma::*;
use tmaris_core::{rng_from_seed, Rng};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn rand_mat(n: usize, k: usize, rng: &mut Rng) -> CMat {
    CMat::from_fn(n, k, |_, _| complex_normal(rng))
}

fn rel_err(a: &CMat, b: &CMat) -> f64 {
    frobenius_sqr(&(a - b)).sqrt() / frobenius_sqr(b).sqrt().max(1e-300)
}

fn tma_power_constant() -> Outcome {
    let sym = CompositeSymbol::new(1.0, 0.3, 1.0).unwrap();
    let w = map_to_waveform(&sym, DEFAULT_PERIOD_S).unwrap();
    let p = harmonic_peak(1, &w).unwrap().norm_sqr();
    let err = (p - (2.0 / PI).powi(2)).abs();
    (err <= 1e-12, format!("|c1|^2 = {p:.15} ({:.2} dB), error {err:.1e}", 10.0 * p.log10()))
}

fn tma_round_trip() -> Outcome {
    let mut rng = rng_from_seed(2);
    let samples = 4096;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let a_max = 0.5 + rng.random::<f64>();
        let a = a_max * rng.random::<f64>();
        let phase = PI * (2.0 * rng.random::<f64>() - 1.0);
        let sym = CompositeSymbol::new(a, phase, a_max).unwrap();
        let w = map_to_waveform(&sym, DEFAULT_PERIOD_S).unwrap();
        let got =
            demodulate_first_harmonic(&sample_waveform(&w, samples), samples as f64 / w.period).unwrap();
        let want = sym.target_harmonic();
        if want.norm() > 0.0 {
            worst = worst.max((got - want).norm() / want.norm());
        }
    }
    (worst <= 1e-3, format!("200 symbols at {samples} samples, worst relative error {worst:.2e}"))
}

/// Composite Simpson over each piece where the waveform is constant.
fn quadrature(f: f64, w: &TmaWaveform) -> C64 {
    let t = w.period;
    let mut cuts = vec![0.0, t, w.t_on.min(t), (w.t_on + w.tau).min(t)];
    if w.wraps() {
        cuts.push(w.t_on + w.tau - t);
    }
    cuts.sort_by(f64::total_cmp);
    let mut acc = C64::new(0.0, 0.0);
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let s = waveform_phase(0.5 * (a + b), w).unwrap();
        let panels = 2000;
        let h = (b - a) / panels as f64;
        let g = |x: f64| C64::from_polar(1.0, -2.0 * PI * f * x);
        let mut sum = g(a) + g(b);
        for i in 1..panels {
            sum += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc += s * sum * (h / 3.0);
    }
    acc / t
}

fn spectrum_consistency() -> Outcome {
    let mut rng = rng_from_seed(3);
    let (mut exact, mut quad): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let sym =
            CompositeSymbol::new(rng.random::<f64>(), PI * (2.0 * rng.random::<f64>() - 1.0), 1.0).unwrap();
        let w = map_to_waveform(&sym, DEFAULT_PERIOD_S).unwrap();
        for q in (-5..=5).filter(|q| *q != 0) {
            let f = q as f64 / w.period;
            let c = harmonic_peak(q, &w).unwrap();
            let s = spectrum(f, &w);
            exact = exact.max((s - c).norm());
            quad = quad.max((quadrature(f, &w) - s).norm());
        }
    }
    (
        exact <= 1e-12 && quad <= 1e-6,
        format!("closed form vs harmonic peaks {exact:.1e}, vs quadrature {quad:.1e}"),
    )
}

fn gradient_oracles() -> Outcome {
    let mut rng = rng_from_seed(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=4);
        let k = rng.random_range(1..=4);
        let f = rand_mat(n, k, &mut rng);
        let xi = rand_mat(n, k, &mut rng);
        let anchor = rand_mat(n, k, &mut rng);
        let h = CVec::from_fn(n, |_, _| complex_normal(&mut rng));
        let (row, user) = (rng.random_range(0..n), rng.random_range(0..k));
        let (lambda, mu, eta) = (2.0 * rng.random::<f64>(), rng.random::<f64>(), 2.0 * rng.random::<f64>());
        let (power, noise) = (0.5 + rng.random::<f64>(), 0.1 + rng.random::<f64>());

        let g = rand_mat(n, k, &mut rng);
        let num = finite_difference_gradient(
            |x: &CMat| l1_objective(x, &f, &xi, row, lambda, power),
            &g,
            default_fd_step(&g),
        )
        .unwrap();
        worst = worst.max(rel_err(&l1_gradient(&g, &f, &xi, row, lambda), &num));

        let psi = rand_mat(n, k, &mut rng);
        let num = finite_difference_gradient(
            |x: &CMat| l2_objective(x, &f, &anchor, &h, user, mu, eta, noise),
            &psi,
            default_fd_step(&psi),
        )
        .unwrap();
        worst = worst.max(rel_err(&l2_gradient(&psi, &f, &anchor, &h, user, mu, eta), &num));
    }
    (worst <= 1e-6, format!("50 instances, worst relative error {worst:.1e}"))
}

fn perturbation(n: usize, k: usize, rng: &mut Rng) -> CMat {
    let d = rand_mat(n, k, rng);
    let s = frobenius_sqr(&d).sqrt();
    d * C64::from(1e-3 / s)
}

fn best_improvement(obj: impl Fn(&CMat) -> f64, x: &CMat, rng: &mut Rng) -> f64 {
    let base = obj(x);
    (0..1000)
        .map(|_| base - obj(&(x + perturbation(x.nrows(), x.ncols(), rng))))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn best_scalar_improvement(obj: impl Fn(f64) -> f64, x: f64, rng: &mut Rng) -> f64 {
    let base = obj(x);
    (0..1000)
        .map(|_| base - obj(x + if rng.random::<bool>() { 1e-3 } else { -1e-3 }))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn closed_form_stationarity() -> Outcome {
    let mut rng = rng_from_seed(5);
    let mut worst = [f64::NEG_INFINITY; 5];
    for _ in 0..10 {
        let n = rng.random_range(1..=4);
        let k = rng.random_range(1..=4);
        let f = rand_mat(n, k, &mut rng);
        let xi = rand_mat(n, k, &mut rng);
        let anchor = rand_mat(n, k, &mut rng);
        let h = CVec::from_fn(n, |_, _| complex_normal(&mut rng));
        let (row, user) = (rng.random_range(0..n), rng.random_range(0..k));
        let (lambda, mu, eta) = (2.0 * rng.random::<f64>(), rng.random::<f64>(), 2.0 * rng.random::<f64>());
        let (power, noise) = (0.5 + rng.random::<f64>(), 0.1 + rng.random::<f64>());

        let rho = 0.5 + rng.random::<f64>();
        let etas: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let xis: Vec<f64> = (0..k).map(|_| rng.random::<f64>() - 0.5).collect();
        let g = gamma_closed_form(rho, &etas, &xis);
        worst[0] =
            worst[0].max(best_scalar_improvement(|x| gamma_objective(x, rho, &etas, &xis), g, &mut rng));

        let gc = gamma_copy_closed_form(&f, &xi, row, lambda);
        worst[1] =
            worst[1].max(best_improvement(|x| l1_objective(x, &f, &xi, row, lambda, power), &gc, &mut rng));

        let psi = psi_closed_form(&f, &anchor, &h, user, mu, eta);
        worst[2] = worst[2].max(best_improvement(
            |x| l2_objective(x, &f, &anchor, &h, user, mu, eta, noise),
            &psi,
            &mut rng,
        ));

        let (gamma, xi_k, theta) = (1.5, 0.2, rng.random::<f64>());
        let ipn = interference(&psi, &h, user) + noise;
        let s = signal(&psi, &h, user);
        let e = eta_closed_form(gamma, xi_k, theta, ipn);
        worst[3] = worst[3].max(best_scalar_improvement(
            |x| eta_objective(x, gamma, xi_k, theta, ipn, s),
            e,
            &mut rng,
        ));

        let gammas: Vec<CMat> = (0..n).map(|_| rand_mat(n, k, &mut rng)).collect();
        let xis_m: Vec<CMat> = (0..n).map(|_| rand_mat(n, k, &mut rng)).collect();
        let psis: Vec<CMat> = (0..k).map(|_| rand_mat(n, k, &mut rng)).collect();
        let lams: Vec<CMat> = (0..k).map(|_| rand_mat(n, k, &mut rng)).collect();
        let sum = |a: &[CMat], b: &[CMat]| a.iter().zip(b).fold(CMat::zeros(n, k), |acc, (x, y)| acc + x + y);
        let fc = f_closed_form(&sum(&psis, &lams), &sum(&gammas, &xis_m), n + k);
        worst[4] =
            worst[4].max(best_improvement(|x| f_objective(x, &gammas, &xis_m, &psis, &lams), &fc, &mut rng));
    }
    let max = worst.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (
        max <= 1e-8,
        format!(
            "best improvement gamma {:.1e}, Gamma {:.1e}, Psi {:.1e}, eta {:.1e}, F {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn hadamard_identity() -> Outcome {
    let mut rng = rng_from_seed(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = rand_mat(4, 3, &mut rng);
        let x = rand_mat(4, 3, &mut rng);
        let lhs = vec_of(&hadamard(&a, &x));
        let rhs = diag_of_vec(&a) * vec_of(&x);
        for (p, q) in lhs.iter().zip(rhs.iter()) {
            worst = worst.max((p - q).norm() / p.norm().max(1.0));
        }
    }
    (worst <= 4.0 * f64::EPSILON, format!("100 pairs, worst error {worst:.1e}"))
}

fn single_user_optimality() -> Outcome {
    let cfg = ExperimentConfig { nx: 2, nz: 4, users: 1, ..Default::default() };
    let mut good = 0;
    let mut worst = f64::INFINITY;
    for seed in 0..50 {
        let sys = cfg.system(seed, None).unwrap();
        let ch = sample_channel(&sys, &mut stream(seed, 1)).unwrap();
        let opt = single_user_optimum(&ch.h[0], sys.element_power_w, sys.noise_power_w[0]).unwrap().value;
        let out = run_cell(&cfg, seed, None, &cfg.solver).unwrap();
        let ratio = out.min_sinr / opt;
        worst = worst.min(ratio);
        if ratio >= 0.95 {
            good += 1;
        }
    }
    (good >= 45, format!("{good}/50 seeds at >= 95% of the optimum, worst ratio {worst:.3}"))
}

fn small_instance_certificates() -> Outcome {
    let cfg = ExperimentConfig { nx: 1, nz: 2, users: 2, ..Default::default() };
    let mut ok = 0;
    for seed in 0..10 {
        let sys = cfg.system(seed, None).unwrap();
        let ch = sample_channel(&sys, &mut stream(seed, 1)).unwrap();
        let problem = Problem::from_config(&sys, &ch).unwrap();
        let out = run_cell(&cfg, seed, None, &cfg.solver).unwrap();
        if small_instance_certificate(&problem, &out.f, 32).unwrap() {
            ok += 1;
        }
    }
    (ok >= 8, format!("{ok}/10 seeds certified at grid density 32"))
}

fn convergence_and_feasibility() -> Outcome {
    let cfg = ExperimentConfig::default();
    let mut ok = 0;
    let mut max_iters = 0;
    let mut detail = Vec::new();
    for seed in 0..20 {
        let sys = cfg.system(seed, None).unwrap();
        let out = run_cell(&cfg, seed, None, &cfg.solver).unwrap();
        let feasible =
            (0..out.f.nrows()).all(|n| row_norm_sqr(&out.f, n) <= sys.element_power_w * (1.0 + 1e-9));
        let res = *out.trace.relative_residual.last().unwrap();
        max_iters = max_iters.max(out.iterations);
        if out.converged && out.iterations <= 50 && feasible && res < 1e-2 {
            ok += 1;
        } else {
            detail.push(format!(
                "seed {seed}: {} iterations, residual {res:.1e}, feasible {feasible}",
                out.iterations
            ));
        }
    }
    let mut msg = format!("{ok}/20 seeds stopped within 50 iterations feasible with residuals < 1e-2 (max {max_iters} iterations)");
    for d in detail {
        msg.push_str("; ");
        msg.push_str(&d);
    }
    (ok == 20, msg)
}

fn trend_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for axis in [SweepAxis::Power, SweepAxis::Elements, SweepAxis::Kappa] {
        let cfg = ExperimentConfig {
            sweep_axis: Some(axis),
            out_dir: dir.path().to_path_buf(),
            ..Default::default()
        };
        let out = run_sweep(&cfg).unwrap();
        let rho = out.summary_value("spearman").unwrap();
        pass &= rho > 0.9;
        parts.push(format!("{axis} {rho:.3}"));
    }
    (pass, format!("mean Spearman over 20 paired seeds: {}", parts.join(", ")))
}

fn linear_complexity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        sweep_axis: Some(SweepAxis::Elements),
        sweep_values: vec![64.0, 121.0, 256.0, 484.0],
        timing_iters: 30,
        out_dir: dir.path().to_path_buf(),
        ..Default::default()
    };
    let out = run_timing(&cfg).unwrap();
    let slope = out.summary_value("loglog_slope").unwrap();
    let times: Vec<String> =
        out.rows.iter().map(|r| format!("N={} {:.3} ms", r.sweep_value.unwrap(), r.wall_ms)).collect();
    ((0.7..=1.3).contains(&slope), format!("log-log slope {slope:.3} ({})", times.join(", ")))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &std::path::Path| {
        let cfg = ExperimentConfig { seeds: vec![42, 7], out_dir: dir.to_path_buf(), ..Default::default() };
        std::fs::read(run_convergence(&cfg).unwrap().csv).unwrap()
    };
    let (x, y) = (run(a.path()), run(b.path()));
    (x == y && !x.is_empty(), format!("{} bytes, identical: {}", x.len(), x == y))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("TMA power constant", tma_power_constant),
        ("TMA round trip", tma_round_trip),
        ("spectrum consistency", spectrum_consistency),
        ("gradient oracles", gradient_oracles),
        ("closed-form stationarity", closed_form_stationarity),
        ("Hadamard vectorisation", hadamard_identity),
        ("single-user optimality", single_user_optimality),
        ("small-instance certificate", small_instance_certificates),
        ("convergence and feasibility", convergence_and_feasibility),
        ("trend reproduction", trend_reproduction),
        ("linear complexity", linear_complexity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = check();
        let secs = start.elapsed().as_secs_f64();
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:2} {}: {name} ({detail}) [{secs:.1} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
