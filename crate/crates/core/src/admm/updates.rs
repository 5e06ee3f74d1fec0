//! Closed-form block updates, their sub-problem Lagrangians and gradients.
//!
//! The sub-problem objectives are written so that each closed form is an
//! exact stationary point:
//!
//! * `gamma`:  `-g + (rho/2) sum_k (eta_k - g + xi_k)^2`
//! * `Gamma_n`: `||G - F + Xi_n||^2 + lambda_n (||row_n(G)||^2 - P)`
//! * `Psi_k`:  `||Psi - F + Lambda_k||^2 + mu_k (eta_k (I_k(Psi) + s2) - lb_k(Psi))`
//! * `eta_k`:  `(eta - gamma + xi_k)^2 + theta_k (eta (I_k + s2) - S_k)`
//! * `F`:      `sum_n ||Gamma_n - F + Xi_n||^2 + sum_k ||Psi_k - F + Lambda_k||^2`
//!
//! Gradients use the Wirtinger derivative `d/dX = (d/dRe - j d/dIm) / 2`,
//! under which `d ||X||^2 / dX = conj(X)`.

use crate::linalg::{frobenius_sqr, inner, norm_sqr, CMat, CVec, C64};

/// Optimal auxiliary objective for fixed copies.
pub fn gamma_closed_form(rho: f64, eta: &[f64], xi: &[f64]) -> f64 {
    let k = eta.len() as f64;
    let s: f64 = eta.iter().zip(xi).map(|(e, x)| e + x).sum();
    (1.0 + rho * s) / (rho * k)
}

pub fn gamma_objective(g: f64, rho: f64, eta: &[f64], xi: &[f64]) -> f64 {
    -g + 0.5 * rho * eta.iter().zip(xi).map(|(e, x)| (e - g + x).powi(2)).sum::<f64>()
}

/// `Gamma_n`: `F - Xi_n` with row `n` divided by `1 + lambda_n`.
pub fn gamma_copy_closed_form(f: &CMat, xi_n: &CMat, n: usize, lambda_n: f64) -> CMat {
    let mut g = f - xi_n;
    g.row_mut(n).scale_mut(1.0 / (1.0 + lambda_n));
    g
}

pub fn l1_objective(g: &CMat, f: &CMat, xi_n: &CMat, n: usize, lambda_n: f64, power: f64) -> f64 {
    frobenius_sqr(&(g - f + xi_n)) + lambda_n * (crate::linalg::row_norm_sqr(g, n) - power)
}

pub fn l1_gradient(g: &CMat, f: &CMat, xi_n: &CMat, n: usize, lambda_n: f64) -> CMat {
    let mut out = (g - f + xi_n).map(|z| z.conj());
    for k in 0..g.ncols() {
        out[(n, k)] += g[(n, k)].conj() * lambda_n;
    }
    out
}

/// `sum_{i != k} |h^H psi_i|^2`.
pub fn interference(psi: &CMat, h: &CVec, k: usize) -> f64 {
    let n = psi.nrows();
    (0..psi.ncols())
        .filter(|i| *i != k)
        .map(|i| inner(h.as_slice(), &psi.as_slice()[i * n..(i + 1) * n]).norm_sqr())
        .sum()
}

pub fn signal(psi: &CMat, h: &CVec, k: usize) -> f64 {
    column_response(psi, h, k).norm_sqr()
}

/// `h^H psi_k`.
pub fn column_response(psi: &CMat, h: &CVec, k: usize) -> C64 {
    let n = psi.nrows();
    inner(h.as_slice(), &psi.as_slice()[k * n..(k + 1) * n])
}

/// First-order lower bound on `|h^H psi_k|^2` around `anchor`:
/// `|u|^2 + 2 Re(conj(u) (h^H psi_k - u))` with `u = h^H anchor_k`.
/// It is tight at the anchor and a global under-estimator.
pub fn sca_lower_bound(psi: &CMat, anchor: &CMat, h: &CVec, k: usize) -> f64 {
    let u = column_response(anchor, h, k);
    let v = column_response(psi, h, k);
    u.norm_sqr() + 2.0 * (u.conj() * (v - u)).re
}

/// Minimiser of the `Psi_k` sub-problem for `z = F - Lambda_k`.
///
/// The masked channel matrix is block diagonal with one rank-one block
/// `h h^H` per user, so interfering columns use a Sherman-Morrison solve and
/// column `k` is `z_k` plus the anchor term.
pub fn psi_closed_form(z: &CMat, anchor: &CMat, h: &CVec, k: usize, mu: f64, eta: f64) -> CMat {
    let n = z.nrows();
    let hh = norm_sqr(h.as_slice());
    let c = mu * eta / (1.0 + mu * eta * hh);
    let mut out = z.clone();
    for i in 0..z.ncols() {
        let col = &mut out.as_mut_slice()[i * n..(i + 1) * n];
        if i == k {
            let u = column_response(anchor, h, k) * mu;
            for (x, hv) in col.iter_mut().zip(h.iter()) {
                *x += hv * u;
            }
        } else if c != 0.0 {
            let p = inner(h.as_slice(), col) * c;
            for (x, hv) in col.iter_mut().zip(h.iter()) {
                *x -= hv * p;
            }
        }
    }
    out
}

/// Surrogate Lagrangian of the `Psi_k` sub-problem.
#[allow(clippy::too_many_arguments)]
pub fn l2_objective(
    psi: &CMat,
    z: &CMat,
    anchor: &CMat,
    h: &CVec,
    k: usize,
    mu: f64,
    eta: f64,
    noise: f64,
) -> f64 {
    frobenius_sqr(&(psi - z))
        + mu * (eta * (interference(psi, h, k) + noise) - sca_lower_bound(psi, anchor, h, k))
}

pub fn l2_gradient(psi: &CMat, z: &CMat, anchor: &CMat, h: &CVec, k: usize, mu: f64, eta: f64) -> CMat {
    let n = psi.nrows();
    let mut out = (psi - z).map(|x| x.conj());
    let u = column_response(anchor, h, k);
    for i in 0..psi.ncols() {
        let coeff = if i == k { -mu * u.conj() } else { mu * eta * column_response(psi, h, i).conj() };
        for e in 0..n {
            out[(e, i)] += h[e].conj() * coeff;
        }
    }
    out
}

/// `eta_k = gamma - xi_k - (theta_k / 2)(I_k + s2)`.
pub fn eta_closed_form(gamma: f64, xi: f64, theta: f64, interference_plus_noise: f64) -> f64 {
    gamma - xi - 0.5 * theta * interference_plus_noise
}

pub fn eta_objective(
    eta: f64,
    gamma: f64,
    xi: f64,
    theta: f64,
    interference_plus_noise: f64,
    signal: f64,
) -> f64 {
    (eta - gamma + xi).powi(2) + theta * (eta * interference_plus_noise - signal)
}

/// `F = (sum_k (Psi_k + Lambda_k) + sum_n (Gamma_n + Xi_n)) / (K + N)`.
pub fn f_closed_form(psi_plus_lambda: &CMat, gamma_plus_xi: &CMat, copies: usize) -> CMat {
    (psi_plus_lambda + gamma_plus_xi) / C64::from(copies as f64)
}

pub fn f_objective(f: &CMat, gammas: &[CMat], xis: &[CMat], psis: &[CMat], lambdas: &[CMat]) -> f64 {
    let a: f64 = gammas.iter().zip(xis).map(|(g, x)| frobenius_sqr(&(g - f + x))).sum();
    let b: f64 = psis.iter().zip(lambdas).map(|(p, l)| frobenius_sqr(&(p - f + l))).sum();
    a + b
}

/// Projected multiplier step. Dual ascent adds the violation, the literal
/// variant subtracts it.
pub fn multiplier_step(current: f64, step: f64, violation: f64, mode: super::MultiplierMode) -> f64 {
    let next = match mode {
        super::MultiplierMode::DualAscent => current + step * violation,
        super::MultiplierMode::PaperLiteral => current - step * violation,
    };
    next.max(0.0)
}
