//! Single-interval time-stepping maps.
//!
//! Coarse propagation is the exponential theta-scheme (closed form in the
//! linear case, implicit fixed-point solve otherwise; `theta = 0` is the
//! exponential Euler scheme). Fine propagation composes `J` steps of either
//! the exponential Euler scheme or, for linear drift, the exact
//! Ornstein-Uhlenbeck flow driven by the same increments.

use num_complex::Complex64;

use crate::analysis::{eta, s_theta};
use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::spectral::{
    eigenvalue, eval_nonlinearity, h_norm, lipschitz_bound, ModelConfig, SpectralField, TimeGrid,
};

/// How the theta-scheme consumes the noise over a coarse interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoarseNoise {
    /// `S_theta S(dT) Q^{1/2} delta_n W` with the plain coarse increment.
    #[default]
    Increment,
    /// `S_theta int S(T_n - s) Q^{1/2} dW(s)`, the exact stochastic
    /// convolution over the interval. Only meaningful for standalone
    /// (non-parareal) linear runs; the parareal controller always pairs
    /// coarse and fine through the plain increments.
    ExactConvolution,
}

/// Fixed-point solve controls for the implicit theta-scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSolve {
    pub tol: f64,
    pub maxit: usize,
}

impl Default for ThetaSolve {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            maxit: 200,
        }
    }
}

/// One coarse step of the exponential theta-scheme for linear drift
/// `F(u) = lambda u`:
/// `u^m <- e^{-lambda_m dT} (eta u^m + S_theta q_m delta_n beta_m)`.
pub fn exp_theta_linear_step(
    u: &SpectralField,
    n: usize,
    path: &NoisePath,
    cfg: &ModelConfig,
    grid: &TimeGrid,
    noise: CoarseNoise,
) -> Result<SpectralField> {
    let lambda = cfg.nonlinearity.linear_rate().ok_or(Error::RequiresLinear)?;
    let dt = grid.coarse_dt();
    let e = eta(cfg.theta, lambda, dt);
    let st = s_theta(cfg.theta, lambda, dt);
    let coeffs = match noise {
        CoarseNoise::Increment => (0..cfg.modes)
            .map(|m| {
                let semi = (-eigenvalue(m + 1, cfg.alpha) * dt).exp();
                let db = path.coarse_increment(n, m)?;
                Ok(semi * (e * u.coeffs()[m] + st * (cfg.q.amplitude(m) * db)))
            })
            .collect::<Result<Vec<Complex64>>>()?,
        CoarseNoise::ExactConvolution => {
            let conv = path.coarse_convolution(n, cfg)?;
            (0..cfg.modes)
                .map(|m| {
                    let semi = (-eigenvalue(m + 1, cfg.alpha) * dt).exp();
                    semi * e * u.coeffs()[m] + st * conv[m]
                })
                .collect()
        }
    };
    Ok(SpectralField::from_coeffs(coeffs))
}

/// Which increment (and step size) an exponential Euler step consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerStep {
    /// Coarse step over interval `n` with `delta_n W`.
    Coarse { n: usize },
    /// Fine step `j` of interval `n` with `delta_{n,j} W`.
    Fine { n: usize, j: usize },
}

/// Exponential Euler step `u <- S(h)(u + i h F(u) + Q^{1/2} dW)` for any
/// admissible nonlinearity.
pub fn exp_euler_step(
    u: &SpectralField,
    step: EulerStep,
    path: &NoisePath,
    cfg: &ModelConfig,
    grid: &TimeGrid,
) -> Result<SpectralField> {
    let (h, noise): (f64, Vec<Complex64>) = match step {
        EulerStep::Coarse { n } => (
            grid.coarse_dt(),
            (0..cfg.modes)
                .map(|m| path.coarse_increment(n, m))
                .collect::<Result<_>>()?,
        ),
        EulerStep::Fine { n, j } => (
            grid.fine_dt(),
            (0..cfg.modes)
                .map(|m| path.fine_increment(n, j, m))
                .collect(),
        ),
    };
    let fu = eval_nonlinearity(u, cfg);
    let ih = Complex64::new(0.0, h);
    let coeffs = (0..cfg.modes)
        .map(|m| {
            let semi = (-eigenvalue(m + 1, cfg.alpha) * h).exp();
            semi * (u.coeffs()[m] + ih * fu.coeffs()[m] + cfg.q.amplitude(m) * noise[m])
        })
        .collect();
    Ok(SpectralField::from_coeffs(coeffs))
}

/// One coarse step of the implicit exponential theta-scheme
/// `u_n = S(dT) u_{n-1} + i (1-theta) dT S(dT) F(u_{n-1}) + i theta dT F(u_n)
///        + S(dT) Q^{1/2} delta_n W`,
/// solved by fixed-point iteration on `w = b + i theta dT F(w)`. Requires
/// the contraction condition `theta dT L_F < 1`; `theta = 0` reduces to the
/// exponential Euler step exactly.
pub fn exp_theta_nonlinear_step(
    u: &SpectralField,
    n: usize,
    path: &NoisePath,
    cfg: &ModelConfig,
    grid: &TimeGrid,
    solve: &ThetaSolve,
) -> Result<SpectralField> {
    if cfg.theta == 0.0 {
        return exp_euler_step(u, EulerStep::Coarse { n }, path, cfg, grid);
    }
    let dt = grid.coarse_dt();
    let contraction = cfg.theta * dt * lipschitz_bound(cfg);
    if contraction >= 1.0 {
        return Err(Error::ContractionViolation(contraction));
    }
    let fu = eval_nonlinearity(u, cfg);
    let noise = path.coarse_noise(n, &cfg.q)?;
    let iw = Complex64::new(0.0, (1.0 - cfg.theta) * dt);
    let b = SpectralField::from_coeffs(
        (0..cfg.modes)
            .map(|m| {
                let semi = (-eigenvalue(m + 1, cfg.alpha) * dt).exp();
                semi * (u.coeffs()[m] + iw * fu.coeffs()[m] + noise.coeffs()[m])
            })
            .collect(),
    );
    let implicit_weight = Complex64::new(0.0, cfg.theta * dt);
    let mut w = b.clone();
    let mut increment = f64::INFINITY;
    for _ in 0..solve.maxit {
        let next = b.add_scaled(&eval_nonlinearity(&w, cfg), implicit_weight);
        increment = h_norm(&(&next - &w));
        w = next;
        if increment <= solve.tol {
            return Ok(w);
        }
    }
    Err(Error::NonConvergence {
        maxit: solve.maxit,
        increment,
    })
}

/// One exact fine step of the linear flow: the Ornstein-Uhlenbeck update
/// `u^m <- e^{(-lambda_m + i lambda) dt} u^m + zeta_m` with the stochastic
/// convolution `zeta` sampled jointly with the plain increments.
pub fn exact_linear_fine_step(
    u: &SpectralField,
    n: usize,
    j: usize,
    path: &NoisePath,
    cfg: &ModelConfig,
    grid: &TimeGrid,
) -> Result<SpectralField> {
    let lambda = cfg.nonlinearity.linear_rate().ok_or(Error::RequiresLinear)?;
    let dt = grid.fine_dt();
    let pairs = path.joint_ou_increments(n, j, cfg, lambda)?;
    let coeffs = (0..cfg.modes)
        .map(|m| {
            let g = ((-eigenvalue(m + 1, cfg.alpha) + Complex64::new(0.0, lambda)) * dt).exp();
            g * u.coeffs()[m] + pairs[m].1
        })
        .collect();
    Ok(SpectralField::from_coeffs(coeffs))
}

/// Fine propagator choices for one fine step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineKind {
    ExpEuler,
    ExactLinear,
}

impl FineKind {
    pub fn step(
        &self,
        u: &SpectralField,
        n: usize,
        j: usize,
        path: &NoisePath,
        cfg: &ModelConfig,
        grid: &TimeGrid,
    ) -> Result<SpectralField> {
        match self {
            FineKind::ExpEuler => exp_euler_step(u, EulerStep::Fine { n, j }, path, cfg, grid),
            FineKind::ExactLinear => exact_linear_fine_step(u, n, j, path, cfg, grid),
        }
    }

    /// Whether composed steps reproduce the law of the continuous flow.
    pub fn distributionally_exact(&self) -> bool {
        matches!(self, FineKind::ExactLinear)
    }
}

/// The theta-scheme coarse propagator (linear closed form when the drift is
/// linear, implicit solve otherwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseTheta {
    pub noise: CoarseNoise,
    pub solve: ThetaSolve,
}

impl Default for CoarseTheta {
    fn default() -> Self {
        Self {
            noise: CoarseNoise::Increment,
            solve: ThetaSolve::default(),
        }
    }
}

impl CoarseTheta {
    pub fn step(
        &self,
        u: &SpectralField,
        n: usize,
        path: &NoisePath,
        cfg: &ModelConfig,
        grid: &TimeGrid,
    ) -> Result<SpectralField> {
        if cfg.nonlinearity.is_linear() {
            exp_theta_linear_step(u, n, path, cfg, grid, self.noise)
        } else {
            exp_theta_nonlinear_step(u, n, path, cfg, grid, &self.solve)
        }
    }

    pub fn distributionally_exact(&self) -> bool {
        false
    }
}

/// Compose the `J` fine steps of coarse interval `n`. Reads only increments
/// of interval `n`.
pub fn propagate_fine(
    u: &SpectralField,
    n: usize,
    path: &NoisePath,
    cfg: &ModelConfig,
    grid: &TimeGrid,
    kind: FineKind,
) -> Result<SpectralField> {
    let mut v = u.clone();
    for j in 0..grid.fine_per_coarse() {
        v = kind.step(&v, n, j, path, cfg, grid)?;
    }
    Ok(v)
}

/// Evolve the theta-scheme alone (no parareal correction) through `steps`
/// coarse intervals. Used by the longtime distribution studies.
pub fn evolve_theta_scheme(
    u0: &SpectralField,
    steps: usize,
    path: &NoisePath,
    cfg: &ModelConfig,
    grid: &TimeGrid,
    coarse: &CoarseTheta,
) -> Result<SpectralField> {
    let mut u = u0.clone();
    for n in 0..steps {
        u = coarse.step(&u, n, path, cfg, grid)?;
    }
    Ok(u)
}
