//! Spectral (sine-eigenbasis) state representation.
//!
//! The state lives on `[0, 1]` with homogeneous Dirichlet boundary
//! conditions and is stored as the first `M` coefficients against the
//! eigenbasis `e_m(x) = sqrt(2) sin(m pi x)`. The linear operator
//! `Lambda = -i Laplace + alpha` is diagonal in this basis with
//! eigenvalues `lambda_m = i (m pi)^2 + alpha`, so the semigroup
//! `S(t) = exp(-t Lambda)` acts mode-wise.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Truncated spectral state: coefficient `m` is `<u, e_m>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(modes: usize) -> Self {
        Self {
            coeffs: vec![Complex64::ZERO; modes],
        }
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Mode-wise linear combination `self + w * other`.
    pub fn add_scaled(&self, other: &Self, w: Complex64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + w * b)
                .collect(),
        }
    }

    pub fn scale(&self, w: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| w * c).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl std::ops::Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        debug_assert_eq!(self.len(), rhs.len());
        SpectralField {
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl std::ops::Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        debug_assert_eq!(self.len(), rhs.len());
        SpectralField {
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Drift nonlinearity `F`. All variants satisfy `F(0) = 0`, a global
/// Lipschitz bound, and the gauge condition `Im <conj(u), F(u)> = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `F(u) = lambda * u`.
    Linear(f64),
    /// Multiplication by a real potential, `F(u)(x) = V(x) u(x)`, with the
    /// potential sampled on the collocation grid (`2M + 1` interior points).
    Potential(Vec<f64>),
    /// `F(u)(x) = lambda |u|^2 u / (1 + |u|^2)`, evaluated pointwise on the
    /// collocation grid.
    SaturatedCubic(f64),
}

impl Nonlinearity {
    pub fn is_linear(&self) -> bool {
        matches!(self, Nonlinearity::Linear(_))
    }

    /// The drift rate of the linear variant, if that is what this is.
    pub fn linear_rate(&self) -> Option<f64> {
        match self {
            Nonlinearity::Linear(l) => Some(*l),
            _ => None,
        }
    }

    /// Sample a potential `V` at the collocation points for `modes` modes.
    pub fn potential_from_fn(modes: usize, v: impl Fn(f64) -> f64) -> Self {
        let points = collocation_points(modes);
        let dx = 1.0 / (points + 1) as f64;
        Nonlinearity::Potential((1..=points).map(|p| v(p as f64 * dx)).collect())
    }
}

/// Mode amplitudes `q_m = ||Q^{1/2} e_m||` of the (diagonal) noise operator.
#[derive(Debug, Clone, PartialEq)]
pub struct QSpec {
    amplitudes: Vec<f64>,
}

impl QSpec {
    /// `q_m = c` for every mode.
    pub fn flat(c: f64, modes: usize) -> Result<Self> {
        Self::from_amplitudes(vec![c; modes])
    }

    /// `q_m = c * m^{-s}`.
    pub fn poly_decay(c: f64, s: f64, modes: usize) -> Result<Self> {
        Self::from_amplitudes(
            (1..=modes)
                .map(|m| c * (m as f64).powf(-s))
                .collect(),
        )
    }

    pub fn from_amplitudes(amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.iter().any(|&q| !(q >= 0.0)) {
            return Err(Error::InvalidModel(
                "noise amplitudes q_m must be nonnegative".into(),
            ));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, mode_index: usize) -> f64 {
        self.amplitudes[mode_index]
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

/// Model parameters for `du = (i Laplace u - alpha u + i F(u)) dt + Q^{1/2} dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub alpha: f64,
    pub theta: f64,
    pub modes: usize,
    pub nonlinearity: Nonlinearity,
    pub q: QSpec,
}

impl ModelConfig {
    pub fn new(
        alpha: f64,
        theta: f64,
        modes: usize,
        nonlinearity: Nonlinearity,
        q: QSpec,
    ) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "damping alpha must be >= 0, got {alpha}"
            )));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidModel(format!(
                "theta must lie in [0, 1], got {theta}"
            )));
        }
        if modes == 0 {
            return Err(Error::InvalidModel("mode count M must be >= 1".into()));
        }
        if q.len() != modes {
            return Err(Error::LengthMismatch {
                expected: modes,
                got: q.len(),
            });
        }
        if let Nonlinearity::Potential(v) = &nonlinearity {
            let expected = collocation_points(modes);
            if v.len() != expected {
                return Err(Error::LengthMismatch {
                    expected,
                    got: v.len(),
                });
            }
        }
        Ok(Self {
            alpha,
            theta,
            modes,
            nonlinearity,
            q,
        })
    }
}

/// Uniform two-level grid: `[0, T]` split into `N` coarse intervals of
/// length `dT`, each split into `J` fine steps of length `dt`.
///
/// Grid times are always formed as `(n J + j) * dt` so that
/// `t_{n,J} == T_{n+1}` holds bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    coarse_steps: usize,
    fine_per_coarse: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, coarse_steps: usize, fine_per_coarse: usize) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon T must be > 0, got {t_end}"
            )));
        }
        if coarse_steps == 0 || fine_per_coarse == 0 {
            return Err(Error::InvalidGrid(
                "coarse count N and fine count J must be >= 1".into(),
            ));
        }
        Ok(Self {
            t_end,
            coarse_steps,
            fine_per_coarse,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Number of coarse intervals `N`.
    pub fn coarse_steps(&self) -> usize {
        self.coarse_steps
    }

    /// Fine steps per coarse interval `J`.
    pub fn fine_per_coarse(&self) -> usize {
        self.fine_per_coarse
    }

    /// Coarse step `dT = T / N`.
    pub fn coarse_dt(&self) -> f64 {
        self.t_end / self.coarse_steps as f64
    }

    /// Fine step `dt = dT / J`.
    pub fn fine_dt(&self) -> f64 {
        self.coarse_dt() / self.fine_per_coarse as f64
    }

    /// `t_{n,j} = (n J + j) * dt`.
    pub fn time(&self, n: usize, j: usize) -> f64 {
        ((n * self.fine_per_coarse + j) as f64) * self.fine_dt()
    }

    /// `T_n = t_{n,0}`.
    pub fn coarse_time(&self, n: usize) -> f64 {
        self.time(n, 0)
    }
}

/// Number of interior collocation points used for pointwise nonlinearities.
pub fn collocation_points(modes: usize) -> usize {
    2 * modes + 1
}

/// Eigenvalue `lambda_m = i (m pi)^2 + alpha` of `Lambda` (`m >= 1`).
pub fn eigenvalue(m: usize, alpha: f64) -> Complex64 {
    assert!(m >= 1, "mode numbers are 1-based");
    Complex64::new(alpha, (m as f64 * PI).powi(2))
}

/// Apply the semigroup `S(t) = exp(-t Lambda)` mode-wise.
pub fn semigroup_apply(u: &SpectralField, t: f64, cfg: &ModelConfig) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let coeffs = u
        .coeffs()
        .iter()
        .enumerate()
        .map(|(idx, c)| (-eigenvalue(idx + 1, cfg.alpha) * t).exp() * c)
        .collect();
    Ok(SpectralField::from_coeffs(coeffs))
}

/// `||u|| = sqrt(sum |u^m|^2)`.
pub fn h_norm(u: &SpectralField) -> f64 {
    u.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `||u||_{H^s} = sqrt(sum |u^m|^2 |lambda_m|^s)`.
pub fn hs_norm(u: &SpectralField, s: f64, alpha: f64) -> f64 {
    u.coeffs()
        .iter()
        .enumerate()
        .map(|(idx, c)| c.norm_sqr() * eigenvalue(idx + 1, alpha).norm().powf(s))
        .sum::<f64>()
        .sqrt()
}

/// Synthesize the field on the interior collocation grid,
/// `u(x_p) = sum_m u^m sqrt(2) sin(m pi x_p)`.
pub fn to_collocation(u: &SpectralField) -> Vec<Complex64> {
    let modes = u.len();
    let points = collocation_points(modes);
    let dx = 1.0 / (points + 1) as f64;
    (1..=points)
        .map(|p| {
            let x = p as f64 * dx;
            u.coeffs()
                .iter()
                .enumerate()
                .map(|(idx, c)| c * (2.0f64).sqrt() * ((idx + 1) as f64 * PI * x).sin())
                .sum()
        })
        .collect()
}

/// Project grid values back onto the first `modes` sine modes. Exact (up to
/// rounding) for band-limited data because the discrete sine functions are
/// orthogonal on the interior grid.
pub fn from_collocation(values: &[Complex64], modes: usize) -> SpectralField {
    let points = values.len();
    let dx = 1.0 / (points + 1) as f64;
    let coeffs = (1..=modes)
        .map(|m| {
            values
                .iter()
                .enumerate()
                .map(|(p, v)| {
                    let x = (p + 1) as f64 * dx;
                    v * (2.0f64).sqrt() * (m as f64 * PI * x).sin()
                })
                .sum::<Complex64>()
                * dx
        })
        .collect();
    SpectralField::from_coeffs(coeffs)
}

/// Discrete inner product `sum_p conj(u(x_p)) v(x_p) dx` on the collocation grid.
pub fn collocation_inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    debug_assert_eq!(u.len(), v.len());
    let dx = 1.0 / (u.len() + 1) as f64;
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<Complex64>() * dx
}

/// Evaluate the drift nonlinearity `F(u)` in spectral coordinates.
///
/// Pointwise variants go through the collocation grid; products that leave
/// the first `M` modes alias back, which is accepted for `SaturatedCubic`
/// (the transform pair itself is exact for band-limited data).
pub fn eval_nonlinearity(u: &SpectralField, cfg: &ModelConfig) -> SpectralField {
    match &cfg.nonlinearity {
        Nonlinearity::Linear(lambda) => u.scale(Complex64::new(*lambda, 0.0)),
        Nonlinearity::Potential(v) => {
            let mut grid = to_collocation(u);
            for (g, &vp) in grid.iter_mut().zip(v) {
                *g *= vp;
            }
            from_collocation(&grid, u.len())
        }
        Nonlinearity::SaturatedCubic(lambda) => {
            let mut grid = to_collocation(u);
            for g in grid.iter_mut() {
                let r2 = g.norm_sqr();
                *g *= lambda * r2 / (1.0 + r2);
            }
            from_collocation(&grid, u.len())
        }
    }
}

/// A global Lipschitz constant `L_F` for the configured nonlinearity.
///
/// For `SaturatedCubic` the returned `2 |lambda|` is a valid upper bound for
/// the pointwise map `z -> lambda |z|^2 z / (1 + |z|^2)` (the sharp constant
/// is `9/8 |lambda|`), and pointwise bounds carry over to the collocation
/// evaluation because synthesis is an isometry and re-projection is a
/// contraction.
pub fn lipschitz_bound(cfg: &ModelConfig) -> f64 {
    match &cfg.nonlinearity {
        Nonlinearity::Linear(lambda) => lambda.abs(),
        Nonlinearity::Potential(v) => v.iter().fold(0.0, |acc, &x| acc.max(x.abs())),
        Nonlinearity::SaturatedCubic(lambda) => 2.0 * lambda.abs(),
    }
}
