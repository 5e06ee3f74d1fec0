use std::time::Instant;

use super::state::AdmmState;
use super::updates::{
    column_response, eta_closed_form, gamma_closed_form, interference, multiplier_step, psi_closed_form,
    sca_lower_bound, signal,
};
use super::{MultiplierMode, MultiplierSolve, SolverOptions};
use crate::error::{check_index, invalid, Error, Result};
use crate::linalg::{all_finite, norm_sqr, row_norm_sqr, CMat, CVec, C64};
use crate::system::{random_full_power, ChannelSet, SystemConfig};
use crate::Rng;

/// Channels, noise powers and the per-element power budget of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub h: Vec<CVec>,
    pub noise: Vec<f64>,
    pub power: f64,
}

impl Problem {
    pub fn new(ch: &ChannelSet, noise: &[f64], power: f64) -> Result<Self> {
        if noise.len() != ch.users() {
            return Err(Error::Dimension("one noise power per user required".into()));
        }
        if noise.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid("noise", "noise power must be positive"));
        }
        if !(power > 0.0) {
            return Err(invalid("power", "must be positive"));
        }
        Ok(Problem { h: ch.h.clone(), noise: noise.to_vec(), power })
    }

    pub fn from_config(cfg: &SystemConfig, ch: &ChannelSet) -> Result<Self> {
        if ch.elements() != cfg.elements() || ch.users() != cfg.user_count() {
            return Err(Error::Dimension("channels do not match the configuration".into()));
        }
        Problem::new(ch, &cfg.noise_power_w, cfg.element_power_w)
    }

    pub fn elements(&self) -> usize {
        self.h[0].len()
    }

    pub fn users(&self) -> usize {
        self.h.len()
    }

    /// Equivalent instance with unit power and unit noise: `h_k sqrt(P) / sigma_k`.
    /// SINRs are unchanged when `F` is divided by `sqrt(P)`.
    pub fn normalized(&self) -> Problem {
        let h = self.h.iter().zip(&self.noise).map(|(h, s)| h * C64::from((self.power / s).sqrt())).collect();
        Problem { h, noise: vec![1.0; self.users()], power: 1.0 }
    }

    /// `P (sum_n |h_kn|)^2 / sigma_k^2`, the SINR user `k` would reach alone.
    pub fn single_user_bound(&self, k: usize) -> f64 {
        let s: f64 = self.h[k].iter().map(|z| z.norm()).sum();
        self.power * s * s / self.noise[k]
    }

    pub fn sinr(&self, f: &CMat, k: usize) -> f64 {
        signal(f, &self.h[k], k) / (interference(f, &self.h[k], k) + self.noise[k])
    }

    pub fn min_sinr(&self, f: &CMat) -> f64 {
        (0..self.users()).map(|k| self.sinr(f, k)).fold(f64::INFINITY, f64::min)
    }
}

/// Scales every row whose power exceeds `power` back onto the limit.
pub fn project_feasible(f: &CMat, power: f64) -> CMat {
    let mut out = f.clone();
    for n in 0..f.nrows() {
        let p = row_norm_sqr(f, n);
        if p > power {
            out.row_mut(n).scale_mut((power / p).sqrt());
        }
    }
    out
}

/// Random full-power start; every copy equals `F^0` and every auxiliary
/// equals its minimum SINR.
pub fn init_state(problem: &Problem, rng: &mut Rng) -> AdmmState {
    let f = random_full_power(problem.elements(), problem.users(), problem.power, rng);
    let g = problem.min_sinr(&f);
    AdmmState::from_point(f, g)
}

pub fn update_gamma(state: &mut AdmmState, rho: f64) -> f64 {
    state.gamma = gamma_closed_form(rho, &state.eta, &state.xi);
    state.gamma
}

/// Recomputes `Gamma_n` from the current `F`, `Xi_n` and `lambda_n`.
pub fn update_gamma_copy(state: &mut AdmmState, n: usize) -> Result<CMat> {
    check_index("element", n, state.elements())?;
    refresh_shared(state);
    refresh_own_row(state, n);
    Ok(state.gamma_copy(n))
}

fn refresh_shared(state: &mut AdmmState) {
    state.rows.shared = &state.f - &state.rows.shared_err;
}

fn refresh_own_row(state: &mut AdmmState, n: usize) {
    let s = 1.0 / (1.0 + state.lambda[n]);
    for k in 0..state.users() {
        state.rows.own[(n, k)] = (state.f[(n, k)] - state.rows.own_err[(n, k)]) * s;
    }
}

/// One projected step on the power constraint of element `n`.
pub fn update_lambda(
    state: &mut AdmmState,
    problem: &Problem,
    n: usize,
    step: f64,
    mode: MultiplierMode,
) -> Result<f64> {
    check_index("element", n, state.elements())?;
    let g = row_norm_sqr(&state.rows.own, n) - problem.power;
    state.lambda[n] = multiplier_step(state.lambda[n], step, g, mode);
    Ok(state.lambda[n])
}

/// Recomputes `Psi_k` from `F - Lambda_k`, the anchor, `mu_k` and `eta_k`.
pub fn update_psi(state: &mut AdmmState, problem: &Problem, k: usize) -> Result<CMat> {
    check_index("user", k, state.users())?;
    let z = &state.f - &state.lambda_err[k];
    let eta = state.eta[k].max(0.0);
    state.psi[k] = psi_closed_form(&z, &state.anchor[k], &problem.h[k], k, state.mu[k], eta);
    Ok(state.psi[k].clone())
}

fn sinr_violation_lb(state: &AdmmState, problem: &Problem, k: usize) -> f64 {
    let h = &problem.h[k];
    let psi = &state.psi[k];
    state.eta[k] * (interference(psi, h, k) + problem.noise[k]) - sca_lower_bound(psi, &state.anchor[k], h, k)
}

/// One projected step on the linearised SINR constraint of user `k`.
pub fn update_mu(
    state: &mut AdmmState,
    problem: &Problem,
    k: usize,
    step: f64,
    mode: MultiplierMode,
) -> Result<f64> {
    check_index("user", k, state.users())?;
    let g = sinr_violation_lb(state, problem, k);
    state.mu[k] = multiplier_step(state.mu[k], step, g, mode);
    Ok(state.mu[k])
}

pub fn update_eta(state: &mut AdmmState, problem: &Problem, k: usize) -> Result<f64> {
    check_index("user", k, state.users())?;
    let ipn = interference(&state.psi[k], &problem.h[k], k) + problem.noise[k];
    state.eta[k] = eta_closed_form(state.gamma, state.xi[k], state.theta[k], ipn);
    Ok(state.eta[k])
}

/// One projected step on the exact SINR constraint of user `k`.
pub fn update_theta(
    state: &mut AdmmState,
    problem: &Problem,
    k: usize,
    step: f64,
    mode: MultiplierMode,
) -> Result<f64> {
    check_index("user", k, state.users())?;
    let h = &problem.h[k];
    let psi = &state.psi[k];
    let g = state.eta[k] * (interference(psi, h, k) + problem.noise[k]) - signal(psi, h, k);
    state.theta[k] = multiplier_step(state.theta[k], step, g, mode);
    Ok(state.theta[k])
}

pub fn update_f(state: &mut AdmmState) -> CMat {
    let (n, k) = (state.elements(), state.users());
    let mut acc = state.rows.sum_with_err();
    for (p, l) in state.psi.iter().zip(&state.lambda_err) {
        acc += p;
        acc += l;
    }
    state.f = acc / C64::from((n + k) as f64);
    state.f.clone()
}

pub fn update_errors(state: &mut AdmmState) {
    for k in 0..state.users() {
        state.xi[k] += state.eta[k] - state.gamma;
        let d = &state.psi[k] - &state.f;
        state.lambda_err[k] += d;
    }
    let rows = &mut state.rows;
    rows.shared_err += &rows.shared - &state.f;
    rows.own_err += &rows.own - &state.f;
}

/// KKT point of the `(Psi_k, eta_k)` pair projected onto the linearised
/// SINR constraint with `theta = weight * mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProjection {
    pub psi: CMat,
    pub eta: f64,
    pub mu: f64,
    pub theta: f64,
}

/// Solves the `Psi_k` and `eta_k` sub-problems simultaneously, choosing
/// `mu_k >= 0` by complementary slackness and `theta_k = weight * mu_k`.
///
/// Both closed forms reduce to scalars along `h`, so the multiplier is found
/// by a one-dimensional root search.
#[allow(clippy::too_many_arguments)]
pub fn joint_sinr_projection(
    z: &CMat,
    target: f64,
    anchor: &CMat,
    h: &CVec,
    k: usize,
    noise: f64,
    weight: f64,
) -> JointProjection {
    let hh = norm_sqr(h.as_slice());
    let i0 = interference(z, h, k);
    let a = column_response(z, h, k);
    let u = column_response(anchor, h, k);
    let s0 = u.norm_sqr() + 2.0 * (u.conj() * (a - u)).re;
    let slope = 2.0 * hh * u.norm_sqr();

    let c = i0 + noise;
    let interf = |mu: f64, eta: f64| i0 / (1.0 + mu * eta.max(0.0) * hh).powi(2);
    let finish = |mu: f64, eta: f64| JointProjection {
        psi: psi_closed_form(z, anchor, h, k, mu, eta.max(0.0)),
        eta,
        mu,
        theta: weight * mu,
    };

    if target * c - s0 <= 0.0 {
        return finish(0.0, target);
    }

    // The eta-stationarity equation can fold in mu, so the search runs over
    // eta. For fixed eta >= 0 the constraint residual is decreasing in mu,
    // which makes the multiplier a single-valued function of eta.
    let mu_of = |eta: f64| -> f64 {
        let r0 = eta * c - s0;
        if r0 <= 0.0 {
            return 0.0;
        }
        if eta == 0.0 || i0 == 0.0 || slope == 0.0 {
            if slope > 0.0 {
                return r0 / slope;
            }
            let t = s0 / eta - noise;
            if eta == 0.0 || i0 == 0.0 || t <= 0.0 || hh == 0.0 {
                return f64::INFINITY;
            }
            return ((i0 / t).sqrt() - 1.0).max(0.0) / (eta * hh);
        }
        let r = |mu: f64| eta * (interf(mu, eta) + noise) - s0 - mu * slope;
        find_root(r, 0.0, r0 / slope)
    };
    let g = |eta: f64| -> f64 {
        let mu = mu_of(eta);
        if !mu.is_finite() {
            return f64::INFINITY;
        }
        eta - target + 0.5 * weight * mu * (interf(mu, eta) + noise)
    };

    let eta_lo = (s0 / c).max(0.0);
    if eta_lo == 0.0 && g(0.0) > 0.0 {
        // Negative eta: the interference is unshrunk and both conditions
        // are linear in mu.
        let mu = (target * c - s0) / (0.5 * weight * c * c + slope);
        return finish(mu, target - 0.5 * weight * mu * c);
    }
    let eta = find_root(g, eta_lo, target);
    finish(mu_of(eta), eta)
}

/// Root of `f` on `[lo, hi]` given `f(lo) <= 0 <= f(hi)` (or the reverse),
/// by false position with the Illinois modification.
fn find_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    if flo.signum() == fhi.signum() {
        return if flo.abs() < fhi.abs() { lo } else { hi };
    }
    let mut side = 0;
    for _ in 0..200 {
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        if !x.is_finite() || x <= lo.min(hi) || x >= lo.max(hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 || (hi - lo).abs() <= 1e-15 * (lo.abs() + hi.abs()) {
            return x;
        }
        if fx.signum() == fhi.signum() {
            hi = x;
            fhi = fx;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        } else {
            lo = x;
            flo = fx;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (lo + hi)
}

/// Per-iteration record of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub gamma: Vec<f64>,
    /// Minimum SINR of the projected beamformer (linear).
    pub min_sinr: Vec<f64>,
    /// `max_n ||Gamma_n - F||_F`.
    pub gamma_residual: Vec<f64>,
    /// `max_k ||Psi_k - F||_F`.
    pub psi_residual: Vec<f64>,
    /// `max_k |eta_k - gamma|`.
    pub eta_residual: Vec<f64>,
    /// Largest of the three, relative to `||F||_F` or `|gamma|`.
    pub relative_residual: Vec<f64>,
    pub wall_ms: Vec<f64>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    fn push(&mut self, state: &AdmmState, problem: &Problem, wall_ms: f64) {
        let max = |v: Vec<f64>| v.into_iter().fold(0.0_f64, f64::max);
        self.gamma.push(state.gamma);
        self.min_sinr.push(problem.min_sinr(&project_feasible(&state.f, problem.power)));
        self.gamma_residual.push(max(state.gamma_residuals()));
        self.psi_residual.push(max(state.psi_residuals()));
        self.eta_residual.push(max(state.eta_residuals()));
        self.relative_residual.push(state.max_relative_residual());
        self.wall_ms.push(wall_ms);
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Projected-feasible beamformer in physical units.
    pub f: CMat,
    pub min_sinr: f64,
    pub trace: SolveTrace,
    pub iterations: usize,
    /// Whether the stopping rule fired before `max_iters`.
    pub converged: bool,
}

/// Runs the solver on the instance described by `cfg` and `ch`, starting
/// from a random point drawn from `seed`.
pub fn solve(cfg: &SystemConfig, ch: &ChannelSet, opts: &SolverOptions, seed: u64) -> Result<SolveOutcome> {
    let problem = Problem::from_config(cfg, ch)?;
    let mut rng = crate::rng_from_seed(seed);
    solve_problem(&problem, opts, &mut rng)
}

pub fn solve_problem(problem: &Problem, opts: &SolverOptions, rng: &mut Rng) -> Result<SolveOutcome> {
    opts.validate()?;
    let norm = problem.normalized();
    let amp = problem.power.sqrt();
    let mut state = init_state(&norm, rng);
    let mut trace = SolveTrace::default();

    if norm.h.iter().any(|h| norm_sqr(h.as_slice()) == 0.0) {
        trace.push(&state, &norm, 0.0);
        return Ok(SolveOutcome {
            f: project_feasible(&state.f, 1.0) * C64::from(amp),
            min_sinr: 0.0,
            trace,
            iterations: 0,
            converged: true,
        });
    }

    let (n, users) = (norm.elements(), norm.users());
    let s_ref = (0..users).map(|k| norm.single_user_bound(k)).fold(f64::INFINITY, f64::min);
    let user_scale = (users * users) as f64;
    let mut rho = opts.rho * user_scale / s_ref;
    let mut rho_f = opts.consensus_weight * s_ref / (n as f64 * user_scale);
    let mut converged = false;
    let mut prev_gamma = state.gamma;

    for r in 1..=opts.max_iters {
        let start = Instant::now();
        state.iteration = r;
        let step = if opts.step_decay { opts.step_size / (r as f64).sqrt() } else { opts.step_size };

        update_gamma(&mut state, rho);
        check_scalar(state.gamma, "gamma", r)?;

        refresh_shared(&mut state);
        for e in 0..n {
            match opts.multiplier_solve {
                MultiplierSolve::Exact => {
                    let p: f64 =
                        (0..users).map(|k| (state.f[(e, k)] - state.rows.own_err[(e, k)]).norm_sqr()).sum();
                    state.lambda[e] = ((p / norm.power).sqrt() - 1.0).max(0.0);
                    refresh_own_row(&mut state, e);
                }
                MultiplierSolve::Steps => {
                    refresh_own_row(&mut state, e);
                    for _ in 0..opts.inner_steps {
                        update_lambda(&mut state, &norm, e, step, opts.multiplier_mode)?;
                    }
                }
            }
        }
        check_matrix(&state.rows.own, "Gamma", r)?;

        let anchor = project_feasible(&state.f, norm.power);
        for k in 0..users {
            match opts.multiplier_solve {
                MultiplierSolve::Exact => {
                    let z = &state.f - &state.lambda_err[k];
                    let target = state.gamma - state.xi[k];
                    let p =
                        joint_sinr_projection(&z, target, &anchor, &norm.h[k], k, norm.noise[k], rho_f / rho);
                    state.anchor[k] = anchor.clone();
                    state.psi[k] = p.psi;
                    state.eta[k] = p.eta;
                    state.mu[k] = p.mu;
                    state.theta[k] = p.theta;
                }
                MultiplierSolve::Steps => {
                    update_psi(&mut state, &norm, k)?;
                    for _ in 0..opts.inner_steps {
                        update_mu(&mut state, &norm, k, step, opts.multiplier_mode)?;
                    }
                    update_eta(&mut state, &norm, k)?;
                    for _ in 0..opts.inner_steps {
                        update_theta(&mut state, &norm, k, step, opts.multiplier_mode)?;
                    }
                    state.anchor[k] = state.psi[k].clone();
                }
            }
            check_matrix(&state.psi[k], "Psi", r)?;
            check_scalar(state.eta[k], "eta", r)?;
        }

        update_f(&mut state);
        check_matrix(&state.f, "F", r)?;
        update_errors(&mut state);

        // Scaled errors are divided by the same factor the penalty grows by,
        // so the unscaled multipliers carry over.
        let g = opts.consensus_growth * opts.penalty_growth;
        if g > 1.0 {
            rho_f *= g;
            for l in state.lambda_err.iter_mut() {
                l.scale_mut(1.0 / g);
            }
            state.rows.scale_errors(1.0 / g);
        }
        if opts.penalty_growth > 1.0 {
            rho *= opts.penalty_growth;
            for x in state.xi.iter_mut() {
                *x /= opts.penalty_growth;
            }
        }

        trace.push(&state, &norm, start.elapsed().as_secs_f64() * 1e3);
        let change = (state.gamma - prev_gamma).abs() / prev_gamma.abs().max(1e-12);
        prev_gamma = state.gamma;
        if change < opts.tolerance && state.max_relative_residual() < opts.residual_tolerance {
            converged = true;
            break;
        }
    }

    let f_norm = project_feasible(&state.f, norm.power);
    let min_sinr = norm.min_sinr(&f_norm);
    Ok(SolveOutcome { f: f_norm * C64::from(amp), min_sinr, iterations: trace.len(), trace, converged })
}

fn check_scalar(x: f64, update: &'static str, iteration: usize) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { update, iteration })
    }
}

fn check_matrix(x: &CMat, update: &'static str, iteration: usize) -> Result<()> {
    if all_finite(x) {
        Ok(())
    } else {
        Err(Error::NonFinite { update, iteration })
    }
}
