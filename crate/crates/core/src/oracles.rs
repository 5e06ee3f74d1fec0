//! Independent references for checking the solver.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::admm::Problem;
use crate::error::{invalid, Error, Result};
use crate::linalg::{unit_phase, CMat, CVec, C64};
use crate::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub f: CMat,
    /// Minimum SINR of `f` (linear).
    pub value: f64,
    pub evaluations: usize,
}

/// Exact optimum for a single user: full power on every element, phases
/// matched to the channel.
pub fn single_user_optimum(h: &CVec, power: f64, noise: f64) -> Result<OracleResult> {
    if !(power > 0.0) || !(noise > 0.0) {
        return Err(invalid("power/noise", "must be positive"));
    }
    let amp = power.sqrt();
    let f = CMat::from_fn(h.len(), 1, |n, _| unit_phase(h[n].arg()) * amp);
    let s: f64 = h.iter().map(|z| z.norm()).sum();
    Ok(OracleResult { f, value: power * s * s / noise, evaluations: 1 })
}

/// Random full-power point: uniform phases and a uniform split of each
/// row's power over the users.
pub fn random_feasible(n: usize, users: usize, power: f64, rng: &mut Rng) -> CMat {
    let mut f = CMat::zeros(n, users);
    for e in 0..n {
        let split = simplex_point(users, rng);
        for k in 0..users {
            let ph = 2.0 * PI * rng.random::<f64>();
            f[(e, k)] = unit_phase(ph) * (power * split[k]).sqrt();
        }
    }
    f
}

fn simplex_point(users: usize, rng: &mut Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..users).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Best of `budget` random feasible draws plus an initial equal-split,
/// zero-phase point.
pub fn random_search(problem: &Problem, budget: usize, rng: &mut Rng) -> OracleResult {
    let (n, users) = (problem.elements(), problem.users());
    let mut best = CMat::from_element(n, users, C64::from((problem.power / users as f64).sqrt()));
    let mut value = problem.min_sinr(&best);
    for _ in 0..budget {
        let f = random_feasible(n, users, problem.power, rng);
        let v = problem.min_sinr(&f);
        if v > value {
            value = v;
            best = f;
        }
    }
    OracleResult { f: best, value, evaluations: budget + 1 }
}

/// Default step `1e-5 (1 + ||X||_F)`.
pub fn default_fd_step(x: &CMat) -> f64 {
    1e-5 * (1.0 + crate::linalg::frobenius_sqr(x).sqrt())
}

/// Central-difference Wirtinger gradient `(df/dRe - j df/dIm) / 2` of a
/// real function of a complex matrix.
pub fn finite_difference_gradient(f: impl Fn(&CMat) -> f64, x: &CMat, step: f64) -> Result<CMat> {
    if !(step > 0.0) {
        return Err(invalid("step", "must be positive"));
    }
    let mut out = CMat::zeros(x.nrows(), x.ncols());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe[i];
        let mut partial = |d: C64| -> Result<f64> {
            probe[i] = orig + d;
            let p = f(&probe);
            probe[i] = orig - d;
            let m = f(&probe);
            probe[i] = orig;
            if !p.is_finite() || !m.is_finite() {
                return Err(invalid("f", "non-finite evaluation"));
            }
            Ok((p - m) / (2.0 * step))
        };
        let dre = partial(C64::new(step, 0.0))?;
        let dim = partial(C64::new(0.0, step))?;
        out[i] = C64::new(0.5 * dre, -0.5 * dim);
    }
    Ok(out)
}

/// Largest instance the grid certificate accepts (`N * K`).
pub const CERTIFICATE_MAX_ENTRIES: usize = 4;

/// Best min-SINR on a product grid over the feasible set.
///
/// Every row is at full power (scaling a row down never helps the minimum
/// by more than the grid resolution of the split). Each row is described by
/// per-user power shares on a `density`-point grid and per-entry phases on a
/// `density`-point grid. Since `F -> F diag(e^{j c_k})` leaves every SINR
/// unchanged, the phases of the first row are fixed to zero.
pub fn grid_search(problem: &Problem, density: usize) -> Result<OracleResult> {
    let (n, users) = (problem.elements(), problem.users());
    if n * users > CERTIFICATE_MAX_ENTRIES {
        return Err(Error::TooLarge {
            what: "grid certificate",
            detail: format!("N*K = {} > {}", n * users, CERTIFICATE_MAX_ENTRIES),
        });
    }
    if density < 2 {
        return Err(invalid("density", "at least 2 grid points required"));
    }
    let shares: Vec<Vec<f64>> = share_grid(users, density);
    let phases: Vec<C64> = (0..density).map(|i| unit_phase(2.0 * PI * i as f64 / density as f64)).collect();

    // Enumerate (share, phase) choices per row; row 0 has zero phases.
    let row_options = |row: usize| -> Vec<Vec<C64>> {
        let mut opts = Vec::new();
        let phase_choices = if row == 0 { 1 } else { density.pow(users as u32) };
        for s in &shares {
            for pc in 0..phase_choices {
                let mut idx = pc;
                let row_vals: Vec<C64> = (0..users)
                    .map(|k| {
                        let ph = if row == 0 { C64::new(1.0, 0.0) } else { phases[idx % density] };
                        idx /= density;
                        ph * (problem.power * s[k]).sqrt()
                    })
                    .collect();
                opts.push(row_vals);
            }
        }
        opts
    };
    let options: Vec<Vec<Vec<C64>>> = (0..n).map(row_options).collect();

    let mut best_value = f64::NEG_INFINITY;
    let mut best = CMat::zeros(n, users);
    let mut f = CMat::zeros(n, users);
    let mut counters = vec![0usize; n];
    let mut evaluations = 0usize;
    loop {
        for e in 0..n {
            for k in 0..users {
                f[(e, k)] = options[e][counters[e]][k];
            }
        }
        let v = problem.min_sinr(&f);
        evaluations += 1;
        if v > best_value {
            best_value = v;
            best.copy_from(&f);
        }
        let mut e = 0;
        loop {
            if e == n {
                return Ok(OracleResult { f: best, value: best_value, evaluations });
            }
            counters[e] += 1;
            if counters[e] < options[e].len() {
                break;
            }
            counters[e] = 0;
            e += 1;
        }
    }
}

fn share_grid(users: usize, density: usize) -> Vec<Vec<f64>> {
    if users == 1 {
        return vec![vec![1.0]];
    }
    // Compositions of `density` into `users` non-negative parts.
    let mut out = Vec::new();
    let mut cur = vec![0usize; users];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, density: usize, out: &mut Vec<Vec<f64>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.iter().map(|c| *c as f64 / density as f64).collect());
            return;
        }
        for c in 0..=left {
            cur[pos] = c;
            rec(pos + 1, left - c, cur, density, out);
        }
    }
    rec(0, density, &mut cur, density, &mut out);
    out
}

/// True when no grid point beats `candidate`'s min-SINR by more than 2%.
pub fn small_instance_certificate(problem: &Problem, candidate: &CMat, density: usize) -> Result<bool> {
    let grid = grid_search(problem, density)?;
    let v = problem.min_sinr(candidate);
    Ok(grid.value <= 1.02 * v)
}
