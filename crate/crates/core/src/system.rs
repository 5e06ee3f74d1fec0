//! Physical layer: UPA steering vectors, Rician channels, the stacked
//! index-vector SINR model, per-element power and MMSE pilot estimation.
//!
//! User and element indices are zero-based throughout the public API.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_index, invalid, Error, Result};
use crate::linalg::{inner, unit_phase, CMat, CVec, C64};
use crate::Rng;

/// Position of one user relative to the surface.
///
/// `theta` is measured from the surface normal and `phi` is the azimuth in
/// the surface plane, so the steering phases along the two array axes use
/// `sin(theta)cos(phi)` and `sin(theta)sin(phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserGeometry {
    pub distance_m: f64,
    pub theta: f64,
    pub phi: f64,
}

impl UserGeometry {
    /// Geometry of a ground user at `(x, y, 0)` seen from a surface mounted
    /// at height `height_m` above the origin and facing the ground.
    pub fn from_ground_position(x: f64, y: f64, height_m: f64) -> Self {
        let distance_m = (x * x + y * y + height_m * height_m).sqrt();
        UserGeometry { distance_m, theta: (height_m / distance_m).clamp(-1.0, 1.0).acos(), phi: y.atan2(x) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub nx: usize,
    pub nz: usize,
    pub spacing_m: f64,
    pub wavelength_m: f64,
    /// Maximum transmit power of each element (W).
    pub element_power_w: f64,
    /// Noise power per user (W); its length fixes the user count.
    pub noise_power_w: Vec<f64>,
    /// Path gain at the reference distance of 1 m (linear).
    pub path_gain_ref: f64,
    pub path_loss_exp: f64,
    /// Rician factor (linear).
    pub rician_factor: f64,
    pub users: Vec<UserGeometry>,
}

/// Height of the surface above the user plane (m).
pub const DEFAULT_HEIGHT_M: f64 = 15.0;
/// Radius of the disk users are dropped in (m).
pub const DEFAULT_RADIUS_M: f64 = 50.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl SystemConfig {
    /// Default simulation scenario: 4x4 half-wavelength array, 1 mW per
    /// element, -50 dBm noise, alpha = 3, beta = -20 dB, kappa = 3 dB, with
    /// `users` dropped uniformly in the default disk.
    pub fn default_scenario(users: usize, rng: &mut Rng) -> Self {
        let drops = drop_users(users, DEFAULT_RADIUS_M, DEFAULT_HEIGHT_M, rng);
        SystemConfig {
            nx: 4,
            nz: 4,
            spacing_m: 0.5,
            wavelength_m: 1.0,
            element_power_w: 1e-3,
            noise_power_w: vec![dbm_to_watts(-50.0); users],
            path_gain_ref: db_to_linear(-20.0),
            path_loss_exp: 3.0,
            rician_factor: db_to_linear(3.0),
            users: drops,
        }
    }

    pub fn elements(&self) -> usize {
        self.nx * self.nz
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.nz == 0 {
            return Err(invalid("nx/nz", "element counts must be at least 1"));
        }
        if self.users.is_empty() {
            return Err(invalid("users", "at least one user is required"));
        }
        if self.noise_power_w.len() != self.users.len() {
            return Err(Error::Dimension(format!(
                "{} noise powers for {} users",
                self.noise_power_w.len(),
                self.users.len()
            )));
        }
        if !(self.element_power_w > 0.0) {
            return Err(invalid("element_power_w", "must be positive"));
        }
        if self.noise_power_w.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid("noise_power_w", "must be positive"));
        }
        if !(self.path_gain_ref > 0.0) {
            return Err(invalid("path_gain_ref", "must be positive"));
        }
        if !(self.rician_factor >= 0.0) {
            return Err(invalid("rician_factor", "must be non-negative"));
        }
        if !(self.spacing_m > 0.0) || !(self.wavelength_m > 0.0) {
            return Err(invalid("spacing_m", "spacing and wavelength must be positive"));
        }
        if self.users.iter().any(|u| !(u.distance_m > 0.0)) {
            return Err(invalid("users", "distances must be positive"));
        }
        Ok(())
    }

    /// Large-scale power gain `beta * d^-alpha` of user `k`.
    pub fn large_scale_gain(&self, k: usize) -> f64 {
        self.path_gain_ref * self.users[k].distance_m.powf(-self.path_loss_exp)
    }
}

/// Drops `k` users uniformly in a disk of `radius_m` centred below the surface.
pub fn drop_users(k: usize, radius_m: f64, height_m: f64, rng: &mut Rng) -> Vec<UserGeometry> {
    (0..k)
        .map(|_| {
            let r = radius_m * rng.random::<f64>().sqrt();
            let a = 2.0 * PI * rng.random::<f64>();
            UserGeometry::from_ground_position(r * a.cos(), r * a.sin(), height_m)
        })
        .collect()
}

/// `a_x ⊗ a_z`; element `(nx, nz)` sits at index `nx * Nz + nz`.
pub fn steering_vector(theta: f64, phi: f64, cfg: &SystemConfig) -> CVec {
    let k = 2.0 * PI * cfg.spacing_m / cfg.wavelength_m;
    let ux = theta.sin() * phi.cos();
    let uz = theta.sin() * phi.sin();
    let mut out = CVec::zeros(cfg.elements());
    for ix in 0..cfg.nx {
        for iz in 0..cfg.nz {
            let ph = -k * (ix as f64 * ux + iz as f64 * uz);
            out[ix * cfg.nz + iz] = unit_phase(ph);
        }
    }
    out
}

/// Draws a circularly-symmetric complex Gaussian with unit variance.
pub fn complex_normal(rng: &mut Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Channels of all users, one `N`-vector each.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<CVec>,
}

impl ChannelSet {
    pub fn new(h: Vec<CVec>) -> Result<Self> {
        let n = h.first().map(|v| v.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::Dimension("empty channel set".into()));
        }
        if h.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("channels of unequal length".into()));
        }
        if h.iter().any(|v| v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(invalid("h", "non-finite channel entry"));
        }
        Ok(ChannelSet { h })
    }

    pub fn elements(&self) -> usize {
        self.h[0].len()
    }

    pub fn users(&self) -> usize {
        self.h.len()
    }

    /// `K` stacked copies of `h_k`.
    pub fn stacked(&self, k: usize) -> CVec {
        let n = self.elements();
        let kk = self.users();
        CVec::from_fn(n * kk, |i, _| self.h[k][i % n])
    }
}

/// Samples a Rician channel for every user in `cfg`.
pub fn sample_channel(cfg: &SystemConfig, rng: &mut Rng) -> Result<ChannelSet> {
    cfg.validate()?;
    let kappa = cfg.rician_factor;
    let (w_los, w_nlos) = rician_weights(kappa);
    let h = (0..cfg.user_count())
        .map(|k| {
            let u = cfg.users[k];
            let los = steering_vector(u.theta, u.phi, cfg);
            let amp = cfg.large_scale_gain(k).sqrt();
            CVec::from_fn(cfg.elements(), |i, _| amp * (los[i] * w_los + complex_normal(rng) * w_nlos))
        })
        .collect();
    ChannelSet::new(h)
}

fn rician_weights(kappa: f64) -> (f64, f64) {
    ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
}

/// Analytic `E[h_k h_k^H]` under the Rician model.
pub fn channel_covariance(cfg: &SystemConfig, k: usize) -> Result<CMat> {
    check_index("user", k, cfg.user_count())?;
    let u = cfg.users[k];
    let los = steering_vector(u.theta, u.phi, cfg);
    let kappa = cfg.rician_factor;
    let g = cfg.large_scale_gain(k);
    let n = cfg.elements();
    let mut r = &los * los.adjoint() * C64::from(kappa / (kappa + 1.0));
    for i in 0..n {
        r[(i, i)] += 1.0 / (kappa + 1.0);
    }
    Ok(r * C64::from(g))
}

/// Indicator of user `k`'s block in the stacked `NK` vector.
pub fn index_vector_a(k: usize, n: usize, users: usize) -> Result<Vec<f64>> {
    check_index("user", k, users)?;
    Ok((0..n * users).map(|i| if i / n == k { 1.0 } else { 0.0 }).collect())
}

/// Indicator of element `e` in every user block of the stacked `NK` vector.
pub fn index_vector_b(e: usize, n: usize, users: usize) -> Result<Vec<f64>> {
    check_index("element", e, n)?;
    Ok((0..n * users).map(|i| if i % n == e { 1.0 } else { 0.0 }).collect())
}

fn check_dims(f: &CMat, ch: &ChannelSet) -> Result<()> {
    if f.nrows() != ch.elements() || f.ncols() != ch.users() {
        return Err(Error::Dimension(format!(
            "F is {}x{}, channels are {}x{}",
            f.nrows(),
            f.ncols(),
            ch.elements(),
            ch.users()
        )));
    }
    Ok(())
}

/// SINR of user `k`: `|h_k^H f_k|^2 / (sum_{i != k} |h_k^H f_i|^2 + noise)`.
pub fn sinr(f: &CMat, ch: &ChannelSet, k: usize, noise: f64) -> Result<f64> {
    check_dims(f, ch)?;
    check_index("user", k, ch.users())?;
    if !(noise > 0.0) {
        return Err(invalid("noise", "noise power must be positive"));
    }
    let gains = user_gains(f, &ch.h[k]);
    Ok(sinr_from_gains(&gains, k, noise))
}

/// `|h^H f_i|^2` for every column `i`.
pub fn user_gains(f: &CMat, h: &CVec) -> Vec<f64> {
    let n = f.nrows();
    (0..f.ncols()).map(|i| inner(h.as_slice(), &f.as_slice()[i * n..(i + 1) * n]).norm_sqr()).collect()
}

pub(crate) fn sinr_from_gains(gains: &[f64], k: usize, noise: f64) -> f64 {
    let interference: f64 = gains.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, g)| g).sum();
    gains[k] / (interference + noise)
}

/// SINR evaluated through the stacked channel and index vectors.
pub fn sinr_stacked(f: &CMat, ch: &ChannelSet, k: usize, noise: f64) -> Result<f64> {
    check_dims(f, ch)?;
    check_index("user", k, ch.users())?;
    if !(noise > 0.0) {
        return Err(invalid("noise", "noise power must be positive"));
    }
    let (n, kk) = (ch.elements(), ch.users());
    let ht = ch.stacked(k);
    let vf = f.as_slice();
    let term = |i: usize| -> Result<f64> {
        let a = index_vector_a(i, n, kk)?;
        let masked: Vec<C64> = vf.iter().zip(&a).map(|(x, m)| x * *m).collect();
        Ok(inner(ht.as_slice(), &masked).norm_sqr())
    };
    let mut interference = 0.0;
    for i in (0..kk).filter(|i| *i != k) {
        interference += term(i)?;
    }
    Ok(term(k)? / (interference + noise))
}

/// Smallest SINR over all users.
pub fn min_sinr(f: &CMat, ch: &ChannelSet, noise: &[f64]) -> Result<f64> {
    check_dims(f, ch)?;
    if noise.len() != ch.users() {
        return Err(Error::Dimension("one noise power per user required".into()));
    }
    let mut best = f64::INFINITY;
    for (k, s2) in noise.iter().enumerate() {
        best = best.min(sinr(f, ch, k, *s2)?);
    }
    Ok(best)
}

/// Power radiated by element `e`: `sum_k |F[e,k]|^2`.
pub fn per_element_power(f: &CMat, e: usize) -> Result<f64> {
    check_index("element", e, f.nrows())?;
    Ok(crate::linalg::row_norm_sqr(f, e))
}

/// Pilot measurements of one user together with the statistics needed to
/// estimate its channel.
#[derive(Debug, Clone)]
pub struct PilotBatch {
    /// Pilot of every user (length `L` each).
    pub pilots: Vec<CVec>,
    /// Index of the user being estimated.
    pub user: usize,
    /// Received pilot block of that user.
    pub received: CVec,
    pub channel_cov: CMat,
    pub interference_cov: CMat,
}

/// `K` orthogonal unit-modulus pilots of length `len >= K` (DFT rows).
pub fn orthogonal_pilots(users: usize, len: usize) -> Result<Vec<CVec>> {
    if len < users || len == 0 {
        return Err(invalid("pilot length", format!("{len} < {users} users")));
    }
    Ok((0..users)
        .map(|k| CVec::from_fn(len, |l, _| unit_phase(-2.0 * PI * (k * l) as f64 / len as f64)))
        .collect())
}

/// `sum_{i != k} s_i f_i^H R_h f_i s_i^H + noise * I`.
pub fn interference_covariance(
    pilots: &[CVec],
    f: &CMat,
    channel_cov: &CMat,
    k: usize,
    noise: f64,
) -> Result<CMat> {
    check_index("user", k, pilots.len())?;
    if f.ncols() != pilots.len() {
        return Err(Error::Dimension("one pilot per column of F required".into()));
    }
    let len = pilots[0].len();
    let mut r = CMat::identity(len, len) * C64::from(noise);
    for i in (0..pilots.len()).filter(|i| *i != k) {
        let fi = f.column(i);
        let q = (fi.adjoint() * channel_cov * fi)[(0, 0)];
        r += &pilots[i] * pilots[i].adjoint() * q;
    }
    Ok(r)
}

/// `Xi_k = R_h (f_k s_k^H) [(s_k f_k^H) R_h (f_k s_k^H) + R_w]^{-1}`.
pub fn mmse_filter(channel_cov: &CMat, f_k: &CVec, s_k: &CVec, interference_cov: &CMat) -> Result<CMat> {
    let a_h = f_k * s_k.adjoint();
    let a = a_h.adjoint();
    let m = &a * channel_cov * &a_h + interference_cov;
    // Xi M = R_h A^H, solved as M^H Xi^H = (R_h A^H)^H.
    let rhs = (channel_cov * &a_h).adjoint();
    let lu = m.adjoint().lu();
    let xi_h = lu.solve(&rhs).ok_or(Error::Singular("MMSE filter"))?;
    if xi_h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular("MMSE filter"));
    }
    Ok(xi_h.adjoint())
}

/// Linear MMSE estimate `Xi_k y_k` of user `batch.user`'s channel.
pub fn mmse_estimate(batch: &PilotBatch, f: &CMat) -> Result<CVec> {
    check_index("user", batch.user, batch.pilots.len())?;
    let f_k: CVec = f.column(batch.user).into_owned();
    let xi = mmse_filter(&batch.channel_cov, &f_k, &batch.pilots[batch.user], &batch.interference_cov)?;
    Ok(xi * &batch.received)
}

/// Draws `w ~ CN(0, cov)` through a Cholesky factor.
pub fn sample_gaussian(cov: &CMat, rng: &mut Rng) -> Result<CVec> {
    let chol = cov.clone().cholesky().ok_or(Error::Singular("covariance factorisation"))?;
    let z = CVec::from_fn(cov.nrows(), |_, _| complex_normal(rng));
    Ok(chol.l() * z)
}

/// Received pilot block `y_k = s_k f_k^H h_k + w_k` with `w_k` drawn from
/// `CN(0, interference_cov)`.
pub fn receive_pilots(
    h_k: &CVec,
    f_k: &CVec,
    s_k: &CVec,
    interference_cov: &CMat,
    rng: &mut Rng,
) -> Result<CVec> {
    let w = sample_gaussian(interference_cov, rng)?;
    let gain = inner(f_k.as_slice(), h_k.as_slice());
    Ok(s_k * gain + w)
}

/// Assembles a [`PilotBatch`] for user `k` with the default pilots (`L = K`).
pub fn simulate_pilot_batch(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    f: &CMat,
    k: usize,
    rng: &mut Rng,
) -> Result<PilotBatch> {
    check_index("user", k, ch.users())?;
    let pilots = orthogonal_pilots(ch.users(), ch.users())?;
    let channel_cov = channel_covariance(cfg, k)?;
    let interference_cov = interference_covariance(&pilots, f, &channel_cov, k, cfg.noise_power_w[k])?;
    let f_k: CVec = f.column(k).into_owned();
    let received = receive_pilots(&ch.h[k], &f_k, &pilots[k], &interference_cov, rng)?;
    Ok(PilotBatch { pilots, user: k, received, channel_cov, interference_cov })
}

/// Random `N x K` matrix with every row scaled to power `p`.
pub fn random_full_power(n: usize, users: usize, p: f64, rng: &mut Rng) -> CMat {
    let mut f = CMat::from_fn(n, users, |_, _| complex_normal(rng));
    for e in 0..n {
        let s = (p / crate::linalg::row_norm_sqr(&f, e).max(f64::MIN_POSITIVE)).sqrt();
        f.row_mut(e).scale_mut(s);
    }
    f
}
