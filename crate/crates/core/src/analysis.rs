//! Closed-form analytic objects for the linear model and the exponential
//! theta-scheme: amplification factors, stability and contraction checks,
//! Gaussian moment evolution, the invariant measure, and the error bounds
//! that the parareal iteration is tested against.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::noise::{keyed, stream};
use crate::spectral::{eigenvalue, ModelConfig, SpectralField, TimeGrid};

/// Drift amplification `eta = (1 + i (1-theta) lambda dT) / (1 - i theta lambda dT)`
/// of the exponential theta-scheme.
pub fn eta(theta: f64, lambda: f64, dt: f64) -> Complex64 {
    Complex64::new(1.0, (1.0 - theta) * lambda * dt) / Complex64::new(1.0, -theta * lambda * dt)
}

/// The implicit-part resolvent `S_theta = (1 - i theta lambda dT)^{-1}`.
pub fn s_theta(theta: f64, lambda: f64, dt: f64) -> Complex64 {
    Complex64::new(1.0, -theta * lambda * dt).inv()
}

/// `|eta|`, evaluated as `sqrt((1 + (1-theta)^2 x^2) / (1 + theta^2 x^2))`
/// so that it is exactly `1` at `theta = 1/2`.
pub fn eta_modulus(theta: f64, lambda: f64, dt: f64) -> f64 {
    let x2 = (lambda * dt) * (lambda * dt);
    let num = 1.0 + (1.0 - theta) * (1.0 - theta) * x2;
    let den = 1.0 + theta * theta * x2;
    (num / den).sqrt()
}

/// Stable function `tau = (1 + (1-theta)^2 x^2) / ((1 + theta^2 x^2) e^{2 alpha dT})`,
/// identically `|eta|^2 e^{-2 alpha dT}`; `tau < 1` marks longtime stability.
pub fn stable_function(theta: f64, lambda: f64, alpha: f64, dt: f64) -> f64 {
    let x2 = (lambda * dt) * (lambda * dt);
    let num = 1.0 + (1.0 - theta) * (1.0 - theta) * x2;
    let den = (1.0 + theta * theta * x2) * (2.0 * alpha * dt).exp();
    num / den
}

/// Outcome of the uniform-in-time contraction test for the parareal
/// iteration with the theta-scheme coarse propagator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionCheck {
    /// `|e^{i lambda dT} - eta| e^{-alpha dT} + |eta| e^{-alpha dT} < 1`.
    pub converges: bool,
    /// Per-iteration contraction factor of the sup-norm error,
    /// `|e^{i lambda dT} - eta| e^{-alpha dT} / (1 - |eta| e^{-alpha dT})`,
    /// infinite when the coarse recursion itself is not damped.
    pub rate: f64,
    /// Damping above which uniform convergence is guaranteed:
    /// `sqrt((1/2 - theta)^+) |lambda|`.
    pub sufficient_alpha: f64,
}

pub fn uniform_contraction_check(
    theta: f64,
    lambda: f64,
    alpha: f64,
    dt: f64,
) -> ContractionCheck {
    let damp = (-alpha * dt).exp();
    let gamma = (Complex64::from_polar(1.0, lambda * dt) - eta(theta, lambda, dt)).norm() * damp;
    let beta = eta_modulus(theta, lambda, dt) * damp;
    let rate = if beta < 1.0 {
        gamma / (1.0 - beta)
    } else {
        f64::INFINITY
    };
    ContractionCheck {
        converges: gamma + beta < 1.0,
        rate,
        sufficient_alpha: (0.5 - theta).max(0.0).sqrt() * lambda.abs(),
    }
}

/// Rasterized stability region of the coarse scheme over an
/// `(alpha, lambda)` rectangle; a cell is stable iff `tau < 1` at its center
/// (marginal `tau = 1` counts as unstable).
#[derive(Debug, Clone)]
pub struct RegionGrid {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    stable: Vec<bool>,
}

impl RegionGrid {
    pub fn is_stable(&self, alpha_idx: usize, lambda_idx: usize) -> bool {
        self.stable[alpha_idx * self.lambdas.len() + lambda_idx]
    }

    pub fn all_stable(&self) -> bool {
        self.stable.iter().all(|&s| s)
    }

    /// CSV serialization: header `alpha,lambda,stable`, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,lambda,stable\n");
        for (ia, a) in self.alphas.iter().enumerate() {
            for (il, l) in self.lambdas.iter().enumerate() {
                let flag = u8::from(self.is_stable(ia, il));
                out.push_str(&format!("{a},{l},{flag}\n"));
            }
        }
        out
    }
}

pub fn region_raster(
    theta: f64,
    dt: f64,
    alpha_range: (f64, f64),
    lambda_range: (f64, f64),
    resolution: (usize, usize),
) -> Result<RegionGrid> {
    let (na, nl) = resolution;
    if na == 0 || nl == 0 {
        return Err(Error::InvalidStudy("raster resolution must be >= 1".into()));
    }
    if !(alpha_range.1 > alpha_range.0) || !(lambda_range.1 > lambda_range.0) {
        return Err(Error::InvalidStudy(
            "raster ranges must be nonempty intervals".into(),
        ));
    }
    let centers = |range: (f64, f64), cells: usize| -> Vec<f64> {
        let width = (range.1 - range.0) / cells as f64;
        (0..cells)
            .map(|i| range.0 + (i as f64 + 0.5) * width)
            .collect()
    };
    let alphas = centers(alpha_range, na);
    let lambdas = centers(lambda_range, nl);
    let mut stable = Vec::with_capacity(na * nl);
    for &a in &alphas {
        for &l in &lambdas {
            stable.push(stable_function(theta, l, a, dt) < 1.0);
        }
    }
    Ok(RegionGrid {
        alphas,
        lambdas,
        stable,
    })
}

/// One-dimensional complex Gaussian law `N(mean, covariance, relation)`.
///
/// Zero relation means the real and imaginary parts are independent with
/// equal variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianStats {
    pub mean: Complex64,
    pub covariance: f64,
    pub relation: Complex64,
}

impl GaussianStats {
    pub fn deterministic(mean: Complex64) -> Self {
        Self {
            mean,
            covariance: 0.0,
            relation: Complex64::ZERO,
        }
    }
}

/// Per-mode law of the exact flow at time `t`, starting from the per-mode
/// laws `u0`. `t = +inf` returns the invariant law (requires `alpha > 0`).
pub fn exact_moments(
    t: f64,
    u0: &[GaussianStats],
    cfg: &ModelConfig,
    lambda: f64,
) -> Result<Vec<GaussianStats>> {
    if !cfg.nonlinearity.is_linear() {
        return Err(Error::RequiresLinear);
    }
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if t.is_infinite() {
        if cfg.alpha > 0.0 {
            return invariant_stats(cfg);
        }
        return Err(Error::Divergent(
            "alpha = 0: covariance grows linearly, no invariant measure".into(),
        ));
    }
    let alpha = cfg.alpha;
    Ok(u0
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let mu = -eigenvalue(m + 1, alpha) + Complex64::new(0.0, lambda);
            let g = (mu * t).exp();
            let q = cfg.q.amplitude(m);
            let noise_var = if alpha > 0.0 {
                (1.0 - (-2.0 * alpha * t).exp()) / alpha * q * q
            } else {
                2.0 * t * q * q
            };
            GaussianStats {
                mean: g * s.mean,
                covariance: (-2.0 * alpha * t).exp() * s.covariance + noise_var,
                relation: g * g * s.relation,
            }
        })
        .collect())
}

/// Per-mode law of the theta-scheme iterate `u_n`, starting from `u0`.
pub fn theta_scheme_moments(
    n: usize,
    u0: &[GaussianStats],
    cfg: &ModelConfig,
    lambda: f64,
    grid: &TimeGrid,
) -> Result<Vec<GaussianStats>> {
    if !cfg.nonlinearity.is_linear() {
        return Err(Error::RequiresLinear);
    }
    let dt = grid.coarse_dt();
    let theta = cfg.theta;
    let alpha = cfg.alpha;
    let e = eta(theta, lambda, dt);
    let tau = stable_function(theta, lambda, alpha, dt);
    let x2 = (lambda * dt) * (lambda * dt);
    let noise_gain = ((1.0 + theta * theta * x2) * (2.0 * alpha * dt).exp()).recip();
    let geometric = if tau == 1.0 {
        n as f64
    } else {
        (1.0 - tau.powi(n as i32)) / (1.0 - tau)
    };
    Ok(u0
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let g = e * (-eigenvalue(m + 1, alpha) * dt).exp();
            let gn = g.powu(n as u32);
            let q = cfg.q.amplitude(m);
            GaussianStats {
                mean: gn * s.mean,
                covariance: tau.powi(n as i32) * s.covariance
                    + noise_gain * geometric * q * q * 2.0 * dt,
                relation: gn * gn * s.relation,
            }
        })
        .collect())
}

/// Per-mode invariant law `N(0, q_m^2 / alpha, 0)` of the exact flow.
pub fn invariant_stats(cfg: &ModelConfig) -> Result<Vec<GaussianStats>> {
    if !(cfg.alpha > 0.0) {
        return Err(Error::RequiresDamping(cfg.alpha));
    }
    Ok((0..cfg.modes)
        .map(|m| {
            let q = cfg.q.amplitude(m);
            GaussianStats {
                mean: Complex64::ZERO,
                covariance: q * q / cfg.alpha,
                relation: Complex64::ZERO,
            }
        })
        .collect())
}

/// Characteristic function of a complex Gaussian,
/// `E exp(i Re(conj(c) Z)) = exp(i Re(conj(c) m) - (conj(c) C c + Re(conj(c) R conj(c))) / 4)`.
pub fn char_function(nu: &GaussianStats, c: Complex64) -> Complex64 {
    let cc = c.conj();
    let re = -0.25 * (nu.covariance * c.norm_sqr() + (cc * nu.relation * cc).re);
    let im = (cc * nu.mean).re;
    Complex64::new(re, im).exp()
}

/// Draw one field from the invariant measure: mode `m` gets
/// `q_m / sqrt(2 alpha) (xi + i r)` with independent standard normals.
pub fn sample_invariant(cfg: &ModelConfig, seed: u64) -> Result<SpectralField> {
    if !(cfg.alpha > 0.0) {
        return Err(Error::RequiresDamping(cfg.alpha));
    }
    let scale = (2.0 * cfg.alpha).sqrt().recip();
    Ok(SpectralField::from_coeffs(
        (0..cfg.modes)
            .map(|m| {
                let (xi, r) = keyed::normal_pair(seed, &[m as u64, stream::INVARIANT]);
                cfg.q.amplitude(m) * scale * Complex64::new(xi, r)
            })
            .collect(),
    ))
}

/// Longtime convergence factor for the implicit theta-scheme in the
/// nonlinear case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearFactor {
    /// `f(theta) = (1 + (2-theta) L_F dT + L_F dT e^{L_F dT}) e^{-alpha dT}`.
    pub factor: f64,
    /// Whether `f(theta) < 1`, i.e. the iteration contracts uniformly in time.
    pub converges: bool,
}

pub fn nonlinear_factor(theta: f64, l_f: f64, alpha: f64, dt: f64) -> NonlinearFactor {
    let factor =
        (1.0 + (2.0 - theta) * l_f * dt + l_f * dt * (l_f * dt).exp()) * (-alpha * dt).exp();
    NonlinearFactor {
        factor,
        converges: factor < 1.0,
    }
}

/// Binomial coefficient as a float (0 when `k > n`).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 1..=k {
        r = r * (n - k + i) as f64 / i as f64;
    }
    r
}

/// Upper bound on the sup-norm of the k-th power of the n-dimensional
/// parareal iteration matrix `M(beta)` (strictly lower triangular with
/// geometric sub-diagonals):
/// `min(((1-beta^{n-1})/(1-beta))^k, C(n-1,k))` for `beta < 1`, and
/// `beta^{n-1-k} C(n-1,k)` for `beta >= 1` (the boundary `beta = 1` uses the
/// second branch). `M` is nilpotent, so the bound is 0 for `k >= n`.
pub fn mk_norm_bound(beta: f64, n: usize, k: usize) -> f64 {
    assert!(n >= 1 && beta >= 0.0);
    if k == 0 {
        return 1.0;
    }
    if k >= n {
        return 0.0;
    }
    let binom = binomial(n - 1, k);
    if beta < 1.0 {
        let row_sum = (1.0 - beta.powi(n as i32 - 1)) / (1.0 - beta);
        row_sum.powi(k as i32).min(binom)
    } else {
        beta.powi((n - 1 - k) as i32) * binom
    }
}

/// Rigorous per-path bound on `sup_n ||eps_n^{(k)}|| / sup_n ||eps_n^{(0)}||`
/// for the linear parareal iteration with exact fine flow:
/// `(|e^{i lambda dT} - eta| e^{-alpha dT})^k ||M^k(|eta| e^{-alpha dT})||`.
pub fn linear_error_bound(
    theta: f64,
    lambda: f64,
    alpha: f64,
    dt: f64,
    k: usize,
    n: usize,
) -> f64 {
    let damp = (-alpha * dt).exp();
    let gamma = (Complex64::from_polar(1.0, lambda * dt) - eta(theta, lambda, dt)).norm() * damp;
    let beta = eta_modulus(theta, lambda, dt) * damp;
    gamma.powi(k as i32) * mk_norm_bound(beta, n, k)
}

/// The coarse-step threshold `dT_*` solving `x^{-1} ln x^{-1} = alpha` on
/// `(0, 1)`, found by bisection to 1e-12.
pub fn delta_t_star(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::RequiresDamping(alpha));
    }
    let f = |x: f64| -> f64 { (1.0 / x).ln() / x - alpha };
    let mut lo = 1e-300;
    let mut hi = 1.0;
    // f decreases from +inf to -alpha on (0, 1].
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoisePath;
    use crate::spectral::{Nonlinearity, QSpec};

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn linear_cfg(modes: usize, alpha: f64, theta: f64, q: f64) -> ModelConfig {
        ModelConfig::new(
            alpha,
            theta,
            modes,
            Nonlinearity::Linear(0.0),
            QSpec::flat(q, modes).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_modulus(0.5, 3.7, 0.9), 1.0);
        assert!((eta(0.5, 3.7, 0.9).norm() - 1.0).abs() < 1e-14);

        let e = eta(0.0, SQRT2, 0.25);
        assert!((e - Complex64::new(1.0, 0.25 * SQRT2)).norm() < 1e-15);
        assert!((e.norm() - 1.125f64.sqrt()).abs() < 1e-12);
        assert!((e.norm() - 1.06066).abs() < 1e-5);

        let e1 = eta(1.0, 1.0, 0.1);
        assert!((e1 - Complex64::new(1.0, -0.1).inv()).norm() < 1e-15);
        assert!((e1.norm() - 0.995037).abs() < 1e-6);

        assert!((s_theta(1.0, 1.0, 0.1) - e1).norm() < 1e-15);
    }

    #[test]
    fn stable_function_examples() {
        assert_eq!(stable_function(0.5, 2.2, 0.0, 0.7), 1.0);
        assert!(
            (stable_function(0.0, SQRT2, 1.0, 0.5) - 1.5 / std::f64::consts::E).abs() < 1e-12
        );
        assert!((stable_function(0.0, SQRT2, 1.0, 0.5) - 0.551819).abs() < 1e-6);
        for ldt in [0.3, 1.0, 4.0] {
            let tau = stable_function(1.0, ldt, 0.0, 1.0);
            assert!((tau - 1.0 / (1.0 + ldt * ldt)).abs() < 1e-15);
            assert!(tau < 1.0);
        }
    }

    #[test]
    fn stable_function_equals_eta_modulus_identity() {
        for i in 0..10_000u64 {
            let theta = keyed::uniform(1, &[i, 0]);
            let lambda = 20.0 * keyed::uniform(1, &[i, 1]) - 10.0;
            let alpha = 5.0 * keyed::uniform(1, &[i, 2]);
            let dt = 2.0 * keyed::uniform(1, &[i, 3]);
            let tau = stable_function(theta, lambda, alpha, dt);
            let m = eta_modulus(theta, lambda, dt);
            let other = m * m * (-2.0 * alpha * dt).exp();
            assert!(
                (tau - other).abs() <= 1e-14 * tau.max(1.0),
                "tau {tau} vs {other}"
            );
        }
    }

    #[test]
    fn eta_modulus_regimes() {
        for &(theta, expect_above) in &[(0.3, true), (0.49, true), (0.51, false), (1.0, false)] {
            let m = eta_modulus(theta, 1.5, 0.4);
            if expect_above {
                assert!(m > 1.0, "theta {theta}: {m}");
            } else {
                assert!(m < 1.0, "theta {theta}: {m}");
            }
        }
    }

    #[test]
    fn contraction_check_examples() {
        let c = uniform_contraction_check(1.0, 1.0, 0.5, 0.1);
        assert!(c.converges);
        let damp = (-0.05f64).exp();
        let sum = ((Complex64::from_polar(1.0, 0.1) - eta(1.0, 1.0, 0.1)).norm()
            + eta_modulus(1.0, 1.0, 0.1))
            * damp;
        assert!((sum - 0.95124).abs() < 1e-4);

        assert_eq!(uniform_contraction_check(0.5, 9.0, 1.0, 0.1).sufficient_alpha, 0.0);
        assert_eq!(uniform_contraction_check(0.75, 9.0, 1.0, 0.1).sufficient_alpha, 0.0);
        assert!(
            (uniform_contraction_check(0.0, SQRT2, 1.0, 0.1).sufficient_alpha - 1.0).abs()
                < 1e-15
        );
    }

    #[test]
    fn taylor_factor_of_gamma() {
        // |e^{i x} - eta| ~ |theta - 1/2| lambda^2 dt^2 for theta != 1/2,
        // and O(dt^3) at theta = 1/2.
        let lambda = 1.3;
        for &theta in &[0.0, 0.2, 0.8, 1.0] {
            let dt = 1e-4;
            let gamma = (Complex64::from_polar(1.0, lambda * dt) - eta(theta, lambda, dt)).norm();
            let lead = 0.5 * (2.0 * theta - 1.0).abs() * lambda * lambda * dt * dt;
            assert!(
                (gamma / lead - 1.0).abs() < 1e-2,
                "theta {theta}: ratio {}",
                gamma / lead
            );
        }
        let (d1, d2) = (1e-3, 5e-4);
        let g = |dt: f64| (Complex64::from_polar(1.0, lambda * dt) - eta(0.5, lambda, dt)).norm();
        let slope = (g(d1) / g(d2)).log2() / (d1 / d2).log2();
        assert!((slope - 3.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn region_raster_examples() {
        let all = region_raster(0.5, 0.1, (0.01, 3.0), (-5.0, 5.0), (8, 8)).unwrap();
        assert!(all.all_stable());

        let g = region_raster(0.0, 0.1, (0.5, 1.5), (SQRT2 - 0.5, SQRT2 + 0.5), (1, 1)).unwrap();
        assert!((g.alphas[0] - 1.0).abs() < 1e-12);
        assert!(g.is_stable(0, 0));
        assert!((stable_function(0.0, SQRT2, 1.0, 0.1) - 0.8351).abs() < 1e-4);

        let b = region_raster(0.0, 0.1, (0.005, 0.015), (4.5, 5.5), (1, 1)).unwrap();
        assert!(!b.is_stable(0, 0));
        assert!((stable_function(0.0, 5.0, 0.01, 0.1) - 1.2475).abs() < 1e-4);

        assert!(region_raster(0.0, 0.1, (1.0, 1.0), (0.0, 1.0), (2, 2)).is_err());
        assert!(region_raster(0.0, 0.1, (0.0, 1.0), (0.0, 1.0), (0, 2)).is_err());
    }

    #[test]
    fn region_csv_shape() {
        let g = region_raster(0.0, 0.1, (0.0, 1.0), (0.0, 1.0), (2, 3)).unwrap();
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], "alpha,lambda,stable");
        assert_eq!(lines.len(), 1 + 6);
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn exact_moments_identity_and_limits() {
        let cfg = linear_cfg(2, 1.0, 0.5, 0.8);
        let u0 = vec![
            GaussianStats {
                mean: Complex64::new(1.0, -0.5),
                covariance: 0.3,
                relation: Complex64::new(0.1, 0.2),
            };
            2
        ];
        let at0 = exact_moments(0.0, &u0, &cfg, 2.0).unwrap();
        assert_eq!(at0, u0);

        let inf = exact_moments(f64::INFINITY, &u0, &cfg, 2.0).unwrap();
        for s in &inf {
            assert_eq!(s.mean, Complex64::ZERO);
            assert!((s.covariance - 0.64).abs() < 1e-15);
            assert_eq!(s.relation, Complex64::ZERO);
        }

        let flat = linear_cfg(1, 0.0, 0.5, 1.0);
        assert!(matches!(
            exact_moments(f64::INFINITY, &u0[..1], &flat, 0.0),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn exact_moment_mean_matches_complex_exponential() {
        let cfg = linear_cfg(1, 1.0, 0.5, 0.0);
        let u0 = [GaussianStats::deterministic(Complex64::ONE)];
        let s = exact_moments(0.1, &u0, &cfg, 0.0).unwrap();
        assert!((s[0].mean.re - 0.49827).abs() < 5e-5);
        assert!((s[0].mean.im + 0.75529).abs() < 5e-5);
    }

    #[test]
    fn theta_scheme_moments_identity_and_longrun() {
        let grid = TimeGrid::new(1.0, 16, 1).unwrap();
        let cfg = linear_cfg(2, 1.5, 0.7, 1.0);
        let u0 = vec![
            GaussianStats {
                mean: Complex64::new(0.4, 0.1),
                covariance: 0.2,
                relation: Complex64::new(-0.1, 0.05),
            };
            2
        ];
        assert_eq!(theta_scheme_moments(0, &u0, &cfg, 1.0, &grid).unwrap(), u0);

        // n -> inf with dT -> 0: covariance approaches q^2 / alpha.
        let fine = TimeGrid::new(20.0, 20_000, 1).unwrap();
        let s = theta_scheme_moments(20_000, &u0, &cfg, 1.0, &fine).unwrap();
        let target = 1.0 / 1.5;
        assert!((s[0].covariance - target).abs() < 5e-3 * target);
        assert!(s[0].mean.norm() < 1e-10);
    }

    #[test]
    fn theta_scheme_moments_tau_one_branch() {
        // theta = 1/2, alpha = 0 gives tau == 1 exactly; the geometric sum
        // degenerates to n.
        let grid = TimeGrid::new(1.0, 4, 1).unwrap();
        let cfg = linear_cfg(1, 0.0, 0.5, 1.0);
        let u0 = [GaussianStats::deterministic(Complex64::ZERO)];
        let s = theta_scheme_moments(4, &u0, &cfg, 1.0, &grid).unwrap();
        let dt = grid.coarse_dt();
        let x2 = (1.0 * dt) * (1.0 * dt);
        let expected = (1.0 + 0.25 * x2).recip() * 4.0 * 2.0 * dt;
        assert!((s[0].covariance - expected).abs() < 1e-14);
    }

    #[test]
    fn theta_scheme_moments_match_monte_carlo() {
        // Mode-wise theta-scheme recursion driven by sampled increments,
        // compared against the closed-form law at n = 10.
        let grid = TimeGrid::new(1.0, 10, 1).unwrap();
        let cfg = linear_cfg(1, 0.8, 0.3, 0.7);
        let lambda = 1.1;
        let dt = grid.coarse_dt();
        let e = eta(cfg.theta, lambda, dt);
        let st = s_theta(cfg.theta, lambda, dt);
        let semi = (-eigenvalue(1, cfg.alpha) * dt).exp();
        let u0 = Complex64::new(0.9, -0.4);

        let paths = 100_000usize;
        let mut sum = Complex64::ZERO;
        let mut vals = Vec::with_capacity(paths);
        for s in 0..paths {
            let path = NoisePath::sample(&grid, 1, 900_000 + s as u64);
            let mut u = u0;
            for n in 0..10 {
                let db = path.coarse_increment(n, 0).unwrap();
                u = semi * (e * u + st * (cfg.q.amplitude(0) * db));
            }
            sum += u;
            vals.push(u);
        }
        let k = paths as f64;
        let mean = sum / k;
        let mut cov = 0.0;
        let mut rel = Complex64::ZERO;
        for v in &vals {
            let d = v - mean;
            cov += d.norm_sqr();
            rel += d * d;
        }
        cov /= k;
        rel /= k;

        let law = theta_scheme_moments(
            10,
            &[GaussianStats::deterministic(u0)],
            &cfg,
            lambda,
            &grid,
        )
        .unwrap()[0];
        // 3 standard errors for each statistic.
        let se_mean = (law.covariance / 2.0 / k).sqrt();
        assert!((mean - law.mean).re.abs() <= 3.0 * se_mean);
        assert!((mean - law.mean).im.abs() <= 3.0 * se_mean);
        let se_cov = law.covariance / k.sqrt();
        assert!((cov - law.covariance).abs() <= 3.0 * se_cov);
        let se_rel = law.covariance / k.sqrt();
        assert!((rel - law.relation).re.abs() <= 3.0 * se_rel);
        assert!((rel - law.relation).im.abs() <= 3.0 * se_rel);
    }

    #[test]
    fn char_function_examples() {
        let nu = GaussianStats {
            mean: Complex64::new(0.3, -0.2),
            covariance: 0.7,
            relation: Complex64::new(0.2, 0.1),
        };
        assert_eq!(char_function(&nu, Complex64::ZERO), Complex64::ONE);

        let alpha = 2.0;
        let q: f64 = 0.9;
        let inv = GaussianStats {
            mean: Complex64::ZERO,
            covariance: 4.0 * q * q / alpha,
            relation: Complex64::ZERO,
        };
        let c = Complex64::from_polar(1.0, 0.8);
        let got = char_function(&inv, c);
        assert!((got.re - (-q * q / alpha).exp()).abs() < 1e-14);
        assert!(got.im.abs() < 1e-14);
    }

    #[test]
    fn char_function_matches_invariant_ensemble() {
        let cfg = linear_cfg(1, 2.0, 0.5, 1.0);
        let c = Complex64::new(0.7, -0.4);
        let paths = 100_000;
        let mut sum = Complex64::ZERO;
        let mut sum_sq = 0.0;
        for s in 0..paths {
            let z = sample_invariant(&cfg, s).unwrap().coeffs()[0];
            let v = Complex64::new(0.0, (c.conj() * z).re).exp();
            sum += v;
            sum_sq += v.norm_sqr();
        }
        let k = paths as f64;
        let emp = sum / k;
        let law = char_function(&invariant_stats(&cfg).unwrap()[0], c);
        let se = ((sum_sq / k - emp.norm_sqr()) / k).sqrt();
        assert!((emp - law).norm() <= 3.0 * se * 2.0f64.sqrt());
    }

    #[test]
    fn exact_moments_converge_to_invariant_char() {
        let cfg = linear_cfg(1, 1.0, 0.5, 0.8);
        let u0 = [GaussianStats {
            mean: Complex64::new(1.0, 1.0),
            covariance: 0.5,
            relation: Complex64::new(0.3, 0.0),
        }];
        let inv = invariant_stats(&cfg).unwrap()[0];
        let c = Complex64::new(0.4, 0.9);
        let mut prev = f64::INFINITY;
        for &t in &[1.0, 4.0, 16.0] {
            let law = exact_moments(t, &u0, &cfg, 2.0).unwrap()[0];
            let gap = (char_function(&law, c) - char_function(&inv, c)).norm();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn sample_invariant_moments() {
        let cfg = linear_cfg(2, 2.0, 0.5, 1.0);
        assert!(sample_invariant(&linear_cfg(1, 0.0, 0.5, 1.0), 0).is_err());

        let zero_q = ModelConfig::new(
            2.0,
            0.5,
            2,
            Nonlinearity::Linear(0.0),
            QSpec::flat(0.0, 2).unwrap(),
        )
        .unwrap();
        assert!(crate::spectral::h_norm(&sample_invariant(&zero_q, 3).unwrap()) == 0.0);

        let paths = 100_000;
        let mut cov = [0.0; 2];
        let mut rel = [Complex64::ZERO; 2];
        for s in 0..paths {
            let f = sample_invariant(&cfg, 40_000 + s).unwrap();
            for m in 0..2 {
                cov[m] += f.coeffs()[m].norm_sqr();
                rel[m] += f.coeffs()[m] * f.coeffs()[m];
            }
        }
        let k = paths as f64;
        for m in 0..2 {
            let target = 0.5;
            assert!((cov[m] / k - target).abs() <= 3.0 * target / k.sqrt());
            assert!((rel[m] / k).norm() <= 3.0 * target / k.sqrt());
        }
    }

    #[test]
    fn nonlinear_factor_examples() {
        let f0 = nonlinear_factor(0.3, 0.0, 1.0, 0.2);
        assert!((f0.factor - (-0.2f64).exp()).abs() < 1e-15);
        assert!(f0.converges);

        let f1 = nonlinear_factor(1.0, 1.0, 3.0, 0.1);
        assert!((f1.factor - 0.89677).abs() < 1e-5);
        assert!(f1.converges);

        let f2 = nonlinear_factor(0.0, 1.0, 1.0, 0.1);
        assert!((f2.factor - 1.18580).abs() < 1e-5);
        assert!(!f2.converges);
    }

    #[test]
    fn nonlinear_factor_strictly_decreasing_in_theta() {
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let theta = i as f64 / 100.0;
            let f = nonlinear_factor(theta, 1.3, 0.4, 0.2).factor;
            assert!(f < prev, "not decreasing at theta = {theta}");
            prev = f;
        }
    }

    #[test]
    fn mk_norm_bound_examples() {
        assert_eq!(mk_norm_bound(0.7, 6, 0), 1.0);
        assert_eq!(mk_norm_bound(0.5, 4, 2), 3.0);
        assert_eq!(mk_norm_bound(1.0, 5, 2), binomial(4, 2));
        assert_eq!(mk_norm_bound(0.5, 4, 4), 0.0);
        assert_eq!(binomial(3, 2), 3.0);
        assert_eq!(binomial(3, 5), 0.0);
    }

    #[test]
    fn linear_error_bound_scaling() {
        // theta = 1/2 at fixed n: the bound scales like dt^{3k}.
        let b = |dt: f64| linear_error_bound(0.5, 1.0, 1.0, dt, 2, 10);
        let slope = (b(1.0 / 8.0) / b(1.0 / 64.0)).log2() / 3.0;
        assert!((slope - 6.0).abs() < 0.35, "slope {slope}");

        assert_eq!(mk_norm_bound(0.9, 16, 0), 1.0);
        assert!(linear_error_bound(0.7, 1.0, 1.0, 0.1, 0, 16) <= 1.0);

        // theta = 1, k = 3, n = 16: halving the step shrinks the bound by
        // roughly 2^{-3} in the moderate-step regime.
        let b1 = linear_error_bound(1.0, SQRT2, 1.0, 0.25, 3, 16);
        let b2 = linear_error_bound(1.0, SQRT2, 1.0, 0.125, 3, 16);
        assert!(b1.is_finite() && b1 > 0.0);
        let ratio = (b2 / b1).log2();
        assert!((-4.0..=-2.5).contains(&ratio), "log2 ratio {ratio}");
    }

    #[test]
    fn delta_t_star_examples() {
        let x = delta_t_star(1.0).unwrap();
        assert!((x - 0.567143).abs() < 1e-6);
        assert!(((1.0 / x) * (1.0 / x).ln() - 1.0).abs() < 1e-10);

        assert!(delta_t_star(1e-6).unwrap() > 0.99);
        let hi = delta_t_star(0.5).unwrap();
        let lo = delta_t_star(2.0).unwrap();
        assert!(lo < hi);
        assert!(delta_t_star(0.0).is_err());
    }
}
