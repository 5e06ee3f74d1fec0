use approx::assert_relative_eq;
use rand::Rng as _;
use tmaris_core::admm::updates::*;
use tmaris_core::admm::{
    joint_sinr_projection, update_errors, update_f, update_gamma_copy, AdmmState, MultiplierMode,
};
use tmaris_core::linalg::*;
use tmaris_core::oracles::{default_fd_step, finite_difference_gradient};
use tmaris_core::system::{complex_normal, index_vector_a};
use tmaris_core::{rng_from_seed, Rng};

fn rand_mat(n: usize, k: usize, rng: &mut Rng) -> CMat {
    CMat::from_fn(n, k, |_, _| complex_normal(rng))
}

fn rand_vec(n: usize, rng: &mut Rng) -> CVec {
    CVec::from_fn(n, |_, _| complex_normal(rng))
}

fn perturbation(n: usize, k: usize, norm: f64, rng: &mut Rng) -> CMat {
    let d = rand_mat(n, k, rng);
    let s = frobenius_sqr(&d).sqrt();
    d * C64::from(norm / s)
}

fn rel_err(a: &CMat, b: &CMat) -> f64 {
    frobenius_sqr(&(a - b)).sqrt() / frobenius_sqr(b).sqrt().max(1e-300)
}

#[test]
fn gamma_examples() {
    assert_eq!(gamma_closed_form(1.0, &[0.0], &[0.0]), 1.0);
    assert_relative_eq!(gamma_closed_form(2.0, &[1.0, 1.0], &[0.5, 0.5]), 1.75);
    let g = gamma_closed_form(1e12, &[1.0, 2.0], &[0.5, 0.5]);
    assert_relative_eq!(g, 2.0, max_relative = 1e-9);
}

#[test]
fn gamma_copy_examples() {
    let mut rng = rng_from_seed(1);
    let f = rand_mat(3, 2, &mut rng);
    let xi = rand_mat(3, 2, &mut rng);
    assert_eq!(gamma_copy_closed_form(&f, &xi, 1, 0.0), &f - &xi);

    let two = CMat::from_element(1, 1, C64::new(2.0, 0.0));
    let g = gamma_copy_closed_form(&two, &CMat::zeros(1, 1), 0, 1.0);
    assert_eq!(g[(0, 0)], C64::new(1.0, 0.0));

    let g = gamma_copy_closed_form(&f, &xi, 1, 1e15);
    let z = &f - &xi;
    for k in 0..2 {
        assert!(g[(1, k)].norm() < 1e-14);
        assert_eq!(g[(0, k)], z[(0, k)]);
        assert_eq!(g[(2, k)], z[(2, k)]);
    }
}

#[test]
fn multiplier_examples() {
    use MultiplierMode::*;
    assert_eq!(multiplier_step(0.0, 0.1, -1.0, DualAscent), 0.0);
    assert_relative_eq!(multiplier_step(0.0, 0.5, 0.4, DualAscent), 0.2);
    assert_relative_eq!(multiplier_step(1.0, 0.5, 0.4, DualAscent), 1.2);
    assert_relative_eq!(multiplier_step(2.0, 0.1, -1.0, DualAscent), 1.9);
    assert_relative_eq!(multiplier_step(1.0, 0.2, 0.5, DualAscent), 1.1);
    assert_relative_eq!(multiplier_step(1.0, 0.5, 0.4, PaperLiteral), 0.8);
    assert_eq!(multiplier_step(0.0, 0.5, 0.4, PaperLiteral), 0.0);
}

#[test]
fn eta_examples() {
    assert_eq!(eta_closed_form(2.0, 0.5, 0.0, 3.0), 1.5);
    assert_relative_eq!(eta_closed_form(2.0, 0.5, 1.0, 1.0), 1.0);
    assert!(eta_closed_form(2.0, 0.5, 2.0, 1.0) < eta_closed_form(2.0, 0.5, 1.0, 1.0));
}

#[test]
fn f_examples() {
    let two = CMat::from_element(1, 1, C64::new(2.0, 0.0));
    let f = f_closed_form(&two, &CMat::zeros(1, 1), 2);
    assert_eq!(f[(0, 0)], C64::new(1.0, 0.0));
}

#[test]
fn psi_with_zero_multiplier_is_the_target() {
    let mut rng = rng_from_seed(2);
    let z = rand_mat(3, 2, &mut rng);
    let anchor = rand_mat(3, 2, &mut rng);
    let h = rand_vec(3, &mut rng);
    assert_eq!(psi_closed_form(&z, &anchor, &h, 0, 0.0, 1.3), z);
}

#[test]
fn sca_bound_is_tight_and_below() {
    let mut rng = rng_from_seed(3);
    let h = rand_vec(2, &mut rng);
    let anchor = rand_mat(2, 2, &mut rng);
    for k in 0..2 {
        assert_relative_eq!(
            sca_lower_bound(&anchor, &anchor, &h, k),
            signal(&anchor, &h, k),
            max_relative = 1e-12
        );
    }
    for _ in 0..1000 {
        let psi = rand_mat(2, 2, &mut rng) * C64::from(3.0 * rng.random::<f64>());
        for k in 0..2 {
            let gap = signal(&psi, &h, k) - sca_lower_bound(&psi, &anchor, &h, k);
            assert!(gap >= -1e-12, "{gap}");
        }
    }
}

/// Dense `NK x NK` construction of the `Psi_k` update with `A_i = a_i a_i^T`.
fn dense_psi(z: &CMat, anchor: &CMat, h: &CVec, k: usize, mu: f64, eta: f64) -> CMat {
    let (n, users) = (z.nrows(), z.ncols());
    let nk = n * users;
    let ht = CVec::from_fn(nk, |i, _| h[i % n]);
    let hh = &ht * ht.adjoint();
    let mask = |i: usize| -> CMat {
        let a = index_vector_a(i, n, users).unwrap();
        CMat::from_fn(nk, nk, |r, c| C64::from(a[r] * a[c]))
    };
    let mut m = CMat::identity(nk, nk);
    for i in (0..users).filter(|i| *i != k) {
        m += hadamard(&hh, &mask(i)) * C64::from(mu * eta);
    }
    let rhs = hadamard(&hh, &mask(k)) * vec_of(anchor) * C64::from(mu) + vec_of(z);
    let inv = m.try_inverse().unwrap();
    unvec(&(inv * rhs), n, users)
}

#[test]
fn structured_psi_matches_dense_inverse() {
    let mut rng = rng_from_seed(4);
    for _ in 0..50 {
        let z = rand_mat(3, 3, &mut rng);
        let anchor = rand_mat(3, 3, &mut rng);
        let h = rand_vec(3, &mut rng);
        let k = rng.random_range(0..3);
        let mu = 2.0 * rng.random::<f64>();
        let eta = 3.0 * rng.random::<f64>();
        let fast = psi_closed_form(&z, &anchor, &h, k, mu, eta);
        let slow = dense_psi(&z, &anchor, &h, k, mu, eta);
        assert!(rel_err(&fast, &slow) < 1e-10);
    }
}

#[test]
fn hadamard_vectorisation_identity() {
    let mut rng = rng_from_seed(5);
    for _ in 0..100 {
        let a = rand_mat(4, 3, &mut rng);
        let x = rand_mat(4, 3, &mut rng);
        let lhs = vec_of(&hadamard(&a, &x));
        let rhs = diag_of_vec(&a) * vec_of(&x);
        for (p, q) in lhs.iter().zip(rhs.iter()) {
            assert!((p - q).norm() <= 4.0 * f64::EPSILON * p.norm().max(1.0));
        }
    }
}

#[test]
fn kron_places_second_factor_fastest() {
    let a = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
    let b = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(3.0, 0.0)]);
    let k = kron(&a, &b);
    assert_eq!(k.len(), 6);
    assert_eq!(k[4], C64::new(0.0, 2.0));
}

struct Instance {
    n: usize,
    k: usize,
    f: CMat,
    xi: CMat,
    anchor: CMat,
    h: CVec,
    row: usize,
    user: usize,
    lambda: f64,
    mu: f64,
    eta: f64,
    power: f64,
    noise: f64,
}

fn instance(rng: &mut Rng) -> Instance {
    let n = rng.random_range(1..=4);
    let k = rng.random_range(1..=4);
    Instance {
        n,
        k,
        f: rand_mat(n, k, rng),
        xi: rand_mat(n, k, rng),
        anchor: rand_mat(n, k, rng),
        h: rand_vec(n, rng),
        row: rng.random_range(0..n),
        user: rng.random_range(0..k),
        lambda: 2.0 * rng.random::<f64>(),
        mu: rng.random::<f64>(),
        eta: 2.0 * rng.random::<f64>(),
        power: 0.5 + rng.random::<f64>(),
        noise: 0.1 + rng.random::<f64>(),
    }
}

fn grad_close(analytic: &CMat, numeric: &CMat) -> bool {
    rel_err(analytic, numeric) < 1e-6
}

#[test]
fn power_lagrangian_gradient_matches_finite_differences() {
    let mut rng = rng_from_seed(6);
    for _ in 0..50 {
        let p = instance(&mut rng);
        let g = rand_mat(p.n, p.k, &mut rng);
        let obj = |x: &CMat| l1_objective(x, &p.f, &p.xi, p.row, p.lambda, p.power);
        let num = finite_difference_gradient(obj, &g, default_fd_step(&g)).unwrap();
        let ana = l1_gradient(&g, &p.f, &p.xi, p.row, p.lambda);
        assert!(grad_close(&ana, &num), "{}", rel_err(&ana, &num));
    }
}

#[test]
fn sinr_lagrangian_gradient_matches_finite_differences() {
    let mut rng = rng_from_seed(7);
    for _ in 0..50 {
        let p = instance(&mut rng);
        let psi = rand_mat(p.n, p.k, &mut rng);
        let obj = |x: &CMat| l2_objective(x, &p.f, &p.anchor, &p.h, p.user, p.mu, p.eta, p.noise);
        let num = finite_difference_gradient(obj, &psi, default_fd_step(&psi)).unwrap();
        let ana = l2_gradient(&psi, &p.f, &p.anchor, &p.h, p.user, p.mu, p.eta);
        assert!(grad_close(&ana, &num), "{}", rel_err(&ana, &num));
    }
}

#[test]
fn closed_forms_zero_their_gradients() {
    let mut rng = rng_from_seed(8);
    for _ in 0..20 {
        let p = instance(&mut rng);
        let g = gamma_copy_closed_form(&p.f, &p.xi, p.row, p.lambda);
        assert!(frobenius_sqr(&l1_gradient(&g, &p.f, &p.xi, p.row, p.lambda)) < 1e-20);

        let psi = psi_closed_form(&p.f, &p.anchor, &p.h, p.user, p.mu, p.eta);
        let obj = |x: &CMat| l2_objective(x, &p.f, &p.anchor, &p.h, p.user, p.mu, p.eta, p.noise);
        let num = finite_difference_gradient(obj, &psi, default_fd_step(&psi)).unwrap();
        assert!(frobenius_sqr(&num).sqrt() < 1e-8);
    }
}

#[test]
fn wirtinger_convention_on_squared_norm() {
    let x = CMat::identity(2, 2);
    let num = finite_difference_gradient(frobenius_sqr, &x, 1e-3).unwrap();
    assert!(rel_err(&num, &x.map(|z| z.conj())) < 1e-12);
}

/// Largest decrease of `obj` found by random perturbations of size `1e-3`.
fn best_improvement(obj: impl Fn(&CMat) -> f64, x: &CMat, rng: &mut Rng) -> f64 {
    let base = obj(x);
    (0..1000)
        .map(|_| base - obj(&(x + perturbation(x.nrows(), x.ncols(), 1e-3, rng))))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn best_scalar_improvement(obj: impl Fn(f64) -> f64, x: f64, rng: &mut Rng) -> f64 {
    let base = obj(x);
    (0..1000)
        .map(|_| {
            let d = if rng.random::<bool>() { 1e-3 } else { -1e-3 };
            base - obj(x + d)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn closed_forms_are_not_improved_by_perturbations() {
    let mut rng = rng_from_seed(9);
    for _ in 0..5 {
        let p = instance(&mut rng);

        let rho = 0.5 + rng.random::<f64>();
        let etas: Vec<f64> = (0..p.k).map(|_| rng.random::<f64>()).collect();
        let xis: Vec<f64> = (0..p.k).map(|_| rng.random::<f64>() - 0.5).collect();
        let g = gamma_closed_form(rho, &etas, &xis);
        let imp = best_scalar_improvement(|x| gamma_objective(x, rho, &etas, &xis), g, &mut rng);
        assert!(imp <= 1e-8, "gamma {imp}");

        let gc = gamma_copy_closed_form(&p.f, &p.xi, p.row, p.lambda);
        let imp = best_improvement(|x| l1_objective(x, &p.f, &p.xi, p.row, p.lambda, p.power), &gc, &mut rng);
        assert!(imp <= 1e-8, "Gamma {imp}");

        let psi = psi_closed_form(&p.f, &p.anchor, &p.h, p.user, p.mu, p.eta);
        let imp = best_improvement(
            |x| l2_objective(x, &p.f, &p.anchor, &p.h, p.user, p.mu, p.eta, p.noise),
            &psi,
            &mut rng,
        );
        assert!(imp <= 1e-8, "Psi {imp}");

        let (gamma, xi, theta) = (1.5, 0.2, rng.random::<f64>());
        let ipn = interference(&psi, &p.h, p.user) + p.noise;
        let s = signal(&psi, &p.h, p.user);
        let e = eta_closed_form(gamma, xi, theta, ipn);
        let imp = best_scalar_improvement(|x| eta_objective(x, gamma, xi, theta, ipn, s), e, &mut rng);
        assert!(imp <= 1e-8, "eta {imp}");

        let gammas: Vec<CMat> = (0..p.n).map(|_| rand_mat(p.n, p.k, &mut rng)).collect();
        let xis_m: Vec<CMat> = (0..p.n).map(|_| rand_mat(p.n, p.k, &mut rng)).collect();
        let psis: Vec<CMat> = (0..p.k).map(|_| rand_mat(p.n, p.k, &mut rng)).collect();
        let lams: Vec<CMat> = (0..p.k).map(|_| rand_mat(p.n, p.k, &mut rng)).collect();
        let sum =
            |a: &[CMat], b: &[CMat]| a.iter().zip(b).fold(CMat::zeros(p.n, p.k), |acc, (x, y)| acc + x + y);
        let f = f_closed_form(&sum(&psis, &lams), &sum(&gammas, &xis_m), p.n + p.k);
        let imp = best_improvement(|x| f_objective(x, &gammas, &xis_m, &psis, &lams), &f, &mut rng);
        assert!(imp <= 1e-8, "F {imp}");
    }
}

#[test]
fn structured_copies_match_dense_copies() {
    let mut rng = rng_from_seed(10);
    let (n, k) = (4, 3);
    let f0 = rand_mat(n, k, &mut rng);
    let mut state = AdmmState::from_point(f0.clone(), 1.0);
    for p in state.psi.iter_mut() {
        *p = rand_mat(n, k, &mut rng);
    }
    for l in state.lambda_err.iter_mut() {
        *l = rand_mat(n, k, &mut rng);
    }
    state.lambda = (0..n).map(|_| rng.random::<f64>()).collect();

    let mut f = f0;
    let mut gammas = vec![f.clone(); n];
    let mut xis = vec![CMat::zeros(n, k); n];
    for _ in 0..5 {
        for e in 0..n {
            gammas[e] = gamma_copy_closed_form(&f, &xis[e], e, state.lambda[e]);
            update_gamma_copy(&mut state, e).unwrap();
        }
        let pl = state.psi.iter().zip(&state.lambda_err).fold(CMat::zeros(n, k), |acc, (p, l)| acc + p + l);
        let gx = gammas.iter().zip(&xis).fold(CMat::zeros(n, k), |acc, (g, x)| acc + g + x);
        f = f_closed_form(&pl, &gx, n + k);
        update_f(&mut state);
        for e in 0..n {
            xis[e] += &gammas[e] - &f;
        }
        update_errors(&mut state);

        assert!(rel_err(&state.f, &f) < 1e-12);
        for e in 0..n {
            assert!(rel_err(&state.gamma_copy(e), &gammas[e]) < 1e-12);
            assert!(rel_err(&state.xi_copy(e), &xis[e]) < 1e-12);
        }
        let dense: Vec<f64> = gammas.iter().map(|g| frobenius_sqr(&(g - &f)).sqrt()).collect();
        for (a, b) in state.gamma_residuals().iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b));
        }
    }
}

#[test]
fn error_updates_accumulate() {
    let mut rng = rng_from_seed(11);
    let f = rand_mat(2, 2, &mut rng);
    let mut state = AdmmState::from_point(f.clone(), 1.0);
    update_errors(&mut state);
    assert_eq!(state.xi, vec![0.0, 0.0]);
    assert_eq!(frobenius_sqr(&state.lambda_err[0]), 0.0);
    assert_eq!(frobenius_sqr(&state.xi_copy(1)), 0.0);

    let d = rand_mat(2, 2, &mut rng);
    state.psi[0] = &f + &d;
    state.eta[1] = 1.5;
    update_errors(&mut state);
    update_errors(&mut state);
    assert!(rel_err(&state.lambda_err[0], &(&d * C64::from(2.0))) < 1e-14);
    assert_relative_eq!(state.xi[1], 1.0);
    assert_eq!(state.xi[0], 0.0);
}

#[test]
fn joint_projection_satisfies_kkt() {
    let mut rng = rng_from_seed(12);
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let users = rng.random_range(1..=4);
        let z = rand_mat(n, users, &mut rng);
        let anchor = rand_mat(n, users, &mut rng);
        let h = rand_vec(n, &mut rng);
        let k = rng.random_range(0..users);
        let noise = 0.1 + rng.random::<f64>();
        let weight = 0.01 + rng.random::<f64>();
        let target = 5.0 * rng.random::<f64>();
        let p = joint_sinr_projection(&z, target, &anchor, &h, k, noise, weight);
        assert!(p.mu >= 0.0 && p.theta >= 0.0);
        assert_relative_eq!(p.theta, weight * p.mu, max_relative = 1e-12);

        let psi = psi_closed_form(&z, &anchor, &h, k, p.mu, p.eta.max(0.0));
        assert!(rel_err(&p.psi, &psi) < 1e-12);
        let ipn = interference(&p.psi, &h, k) + noise;
        let eta = eta_closed_form(target, 0.0, p.theta, ipn);
        assert!((p.eta - eta).abs() < 1e-9 * (1.0 + eta.abs()));

        let viol = p.eta * ipn - sca_lower_bound(&p.psi, &anchor, &h, k);
        let scale = 1.0 + p.eta.abs() * ipn;
        if p.mu > 0.0 {
            assert!(
                viol.abs() < 1e-8 * scale,
                "active constraint {viol} mu {} eta {} target {target} weight {weight} u {}",
                p.mu,
                p.eta,
                column_response(&anchor, &h, k)
            );
        } else {
            assert!(viol <= 1e-8 * scale, "infeasible at mu = 0: {viol}");
        }
    }
}
