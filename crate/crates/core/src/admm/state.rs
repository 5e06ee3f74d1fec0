use crate::linalg::{frobenius_sqr, CMat, C64};

/// The `N` power-constraint copies `Gamma_n` and their error terms `Xi_n`.
///
/// Every copy agrees with `F - Xi_n` outside its own row, and after the
/// first error update the off-row part of `Xi_n` equals `F_prev - F` for all
/// `n`. So the `N` copies are stored as four `N x K` matrices: the shared
/// off-row value of `Gamma_n` and of `Xi_n`, and the own row of each.
#[derive(Debug, Clone, PartialEq)]
pub struct RowCopies {
    /// Off-row value shared by every `Gamma_n`.
    pub shared: CMat,
    /// Off-row value shared by every `Xi_n`.
    pub shared_err: CMat,
    /// Row `n` holds row `n` of `Gamma_n`.
    pub own: CMat,
    /// Row `n` holds row `n` of `Xi_n`.
    pub own_err: CMat,
}

impl RowCopies {
    pub fn new(f: &CMat) -> Self {
        let zero = CMat::zeros(f.nrows(), f.ncols());
        RowCopies { shared: f.clone(), shared_err: zero.clone(), own: f.clone(), own_err: zero }
    }

    pub fn copy(&self, n: usize) -> CMat {
        let mut g = self.shared.clone();
        g.set_row(n, &self.own.row(n));
        g
    }

    pub fn err(&self, n: usize) -> CMat {
        let mut x = self.shared_err.clone();
        x.set_row(n, &self.own_err.row(n));
        x
    }

    /// `sum_n (Gamma_n + Xi_n)`.
    pub fn sum_with_err(&self) -> CMat {
        let n = self.shared.nrows() as f64;
        let off = (&self.shared + &self.shared_err) * C64::from(n - 1.0);
        off + &self.own + &self.own_err
    }

    /// `||Gamma_n - F||_F` for every `n`.
    pub fn residuals(&self, f: &CMat) -> Vec<f64> {
        let n = f.nrows();
        let off_rows: Vec<f64> = (0..n).map(|m| row_dist_sqr(&self.shared, f, m)).collect();
        let total: f64 = off_rows.iter().sum();
        (0..n).map(|m| (total - off_rows[m] + row_dist_sqr(&self.own, f, m)).max(0.0).sqrt()).collect()
    }

    pub fn scale_errors(&mut self, s: f64) {
        self.shared_err.scale_mut(s);
        self.own_err.scale_mut(s);
    }
}

fn row_dist_sqr(a: &CMat, b: &CMat, m: usize) -> f64 {
    a.row(m).iter().zip(b.row(m).iter()).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Full iterate of the consensus ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub f: CMat,
    pub gamma: f64,
    pub rows: RowCopies,
    pub psi: Vec<CMat>,
    /// SCA expansion points `Psi_k^r`.
    pub anchor: Vec<CMat>,
    pub lambda_err: Vec<CMat>,
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub theta: Vec<f64>,
    pub iteration: usize,
}

impl AdmmState {
    /// All copies equal to `f`, auxiliaries equal to `gamma`, errors and
    /// multipliers zero.
    pub fn from_point(f: CMat, gamma: f64) -> Self {
        let (n, k) = (f.nrows(), f.ncols());
        AdmmState {
            rows: RowCopies::new(&f),
            psi: vec![f.clone(); k],
            anchor: vec![f.clone(); k],
            lambda_err: vec![CMat::zeros(n, k); k],
            eta: vec![gamma; k],
            xi: vec![0.0; k],
            lambda: vec![0.0; n],
            mu: vec![0.0; k],
            theta: vec![0.0; k],
            iteration: 0,
            f,
            gamma,
        }
    }

    pub fn elements(&self) -> usize {
        self.f.nrows()
    }

    pub fn users(&self) -> usize {
        self.f.ncols()
    }

    pub fn gamma_copy(&self, n: usize) -> CMat {
        self.rows.copy(n)
    }

    pub fn xi_copy(&self, n: usize) -> CMat {
        self.rows.err(n)
    }

    pub fn gamma_residuals(&self) -> Vec<f64> {
        self.rows.residuals(&self.f)
    }

    pub fn psi_residuals(&self) -> Vec<f64> {
        self.psi.iter().map(|p| frobenius_sqr(&(p - &self.f)).sqrt()).collect()
    }

    pub fn eta_residuals(&self) -> Vec<f64> {
        self.eta.iter().map(|e| (e - self.gamma).abs()).collect()
    }

    /// Largest consensus residual, matrices relative to `||F||_F` and the
    /// auxiliaries relative to `|gamma|`.
    pub fn max_relative_residual(&self) -> f64 {
        let fnorm = frobenius_sqr(&self.f).sqrt().max(1e-300);
        let gnorm = self.gamma.abs().max(1e-300);
        let m =
            self.gamma_residuals().into_iter().chain(self.psi_residuals()).fold(0.0_f64, f64::max) / fnorm;
        let e = self.eta_residuals().into_iter().fold(0.0_f64, f64::max) / gnorm;
        m.max(e)
    }
}
