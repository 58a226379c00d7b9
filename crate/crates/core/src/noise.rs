//! Deterministic generation of the driving noise.
//!
//! Every random quantity in the library is produced by a counter-based
//! generator: a 64-bit key is derived from `(seed, indices...)` and mapped
//! through a splitmix64-style avalanche, so any single increment can be
//! produced independently of all others. Regenerating a path with the same
//! seed gives bit-identical values regardless of thread count or order.

use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{eigenvalue, ModelConfig, QSpec, SpectralField, TimeGrid};

/// Keyed counter-based random primitives.
pub mod keyed {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

    /// splitmix64 finalizer.
    #[inline]
    fn mix64(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn stream_key(seed: u64, words: &[u64]) -> u64 {
        let mut h = mix64(seed.wrapping_add(GOLDEN));
        for &w in words {
            h = mix64(h.wrapping_add(GOLDEN).wrapping_add(w));
        }
        h
    }

    #[inline]
    fn output(key: u64, counter: u64) -> u64 {
        mix64(key.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    #[inline]
    fn to_unit(x: u64) -> f64 {
        // (0, 1), exactly representable.
        ((x >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform draw in `(0, 1)` for the stream `(seed, words)`.
    pub fn uniform(seed: u64, words: &[u64]) -> f64 {
        to_unit(output(stream_key(seed, words), 0))
    }

    /// A pair of independent standard normals for the stream `(seed, words)`,
    /// via the Box-Muller transform.
    pub fn normal_pair(seed: u64, words: &[u64]) -> (f64, f64) {
        let key = stream_key(seed, words);
        let u1 = to_unit(output(key, 0));
        let u2 = to_unit(output(key, 1));
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        (r * phi.cos(), r * phi.sin())
    }

    /// Derive a sub-seed, e.g. one per Monte Carlo sample.
    pub fn derive_seed(seed: u64, words: &[u64]) -> u64 {
        stream_key(seed, words)
    }
}

/// Stream discriminators so distinct uses of one seed never collide.
pub(crate) mod stream {
    pub const FINE: u64 = 0;
    pub const AUX: u64 = 1;
    pub const INVARIANT: u64 = 2;
    pub const SAMPLE: u64 = 3;
}

/// All complex Brownian increments of one sample path on the fine grid.
///
/// Entry `(n, j, m)` holds the increment of the m-th mode's Brownian motion
/// over the fine step `j` of coarse interval `n`; real and imaginary parts
/// are independent `N(0, dt)`, so `E|db|^2 = 2 dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    seed: u64,
    coarse_steps: usize,
    fine_per_coarse: usize,
    modes: usize,
    fine_dt: f64,
    increments: Vec<Complex64>,
}

impl NoisePath {
    /// Generate the full path for `(grid, modes, seed)`.
    pub fn sample(grid: &TimeGrid, modes: usize, seed: u64) -> Self {
        let n = grid.coarse_steps();
        let j = grid.fine_per_coarse();
        let dt = grid.fine_dt();
        let total = n * j * modes;
        let gen = |flat: usize| -> Complex64 {
            let m = flat % modes;
            let rest = flat / modes;
            let jj = rest % j;
            let nn = rest / j;
            let (a, b) = keyed::normal_pair(
                seed,
                &[nn as u64, jj as u64, m as u64, stream::FINE],
            );
            let std = dt.sqrt();
            Complex64::new(std * a, std * b)
        };
        let increments: Vec<Complex64> = if total >= 1 << 14 {
            (0..total).into_par_iter().map(gen).collect()
        } else {
            (0..total).map(gen).collect()
        };
        Self {
            seed,
            coarse_steps: n,
            fine_per_coarse: j,
            modes,
            fine_dt: dt,
            increments,
        }
    }

    /// Rebuild a path from raw parts (testing fixtures, binary dumps).
    pub fn from_parts(
        coarse_steps: usize,
        fine_per_coarse: usize,
        modes: usize,
        seed: u64,
        fine_dt: f64,
        increments: Vec<Complex64>,
    ) -> Result<Self> {
        let expected = coarse_steps * fine_per_coarse * modes;
        if increments.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: increments.len(),
            });
        }
        Ok(Self {
            seed,
            coarse_steps,
            fine_per_coarse,
            modes,
            fine_dt,
            increments,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn coarse_steps(&self) -> usize {
        self.coarse_steps
    }

    pub fn fine_per_coarse(&self) -> usize {
        self.fine_per_coarse
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn fine_dt(&self) -> f64 {
        self.fine_dt
    }

    #[inline]
    fn index(&self, n: usize, j: usize, m: usize) -> usize {
        (n * self.fine_per_coarse + j) * self.modes + m
    }

    /// Fine increment `delta_{n,j} beta_m` (all indices 0-based; `j` counts
    /// the fine step within coarse interval `n`).
    pub fn fine_increment(&self, n: usize, j: usize, m: usize) -> Complex64 {
        assert!(
            n < self.coarse_steps && j < self.fine_per_coarse && m < self.modes,
            "noise index ({n},{j},{m}) out of range"
        );
        self.increments[self.index(n, j, m)]
    }

    /// Coarse increment `delta_n beta_m`, the exact sum of the fine
    /// increments of interval `n`.
    pub fn coarse_increment(&self, n: usize, m: usize) -> Result<Complex64> {
        if n >= self.coarse_steps {
            return Err(Error::IndexOutOfRange {
                name: "coarse interval",
                index: n,
                limit: self.coarse_steps,
            });
        }
        if m >= self.modes {
            return Err(Error::IndexOutOfRange {
                name: "mode",
                index: m,
                limit: self.modes,
            });
        }
        let mut sum = Complex64::ZERO;
        for j in 0..self.fine_per_coarse {
            sum += self.increments[self.index(n, j, m)];
        }
        Ok(sum)
    }

    /// All coarse increments of interval `n`, scaled by `Q^{1/2}`.
    pub fn coarse_noise(&self, n: usize, q: &QSpec) -> Result<SpectralField> {
        let dw: Vec<Complex64> = (0..self.modes)
            .map(|m| self.coarse_increment(n, m))
            .collect::<Result<_>>()?;
        apply_sqrt_q(q, &dw)
    }

    /// Jointly sampled `(delta beta_m, zeta_m)` for one fine step, where
    /// `zeta_m` is the exact stochastic convolution
    /// `int exp(-(lambda_m - i lambda)(t_j - s)) q_m dbeta_m(s)`
    /// over the step. The pair is coupled through the conditional
    /// decomposition `zeta = c q dbeta + r` with `r` an independent
    /// zero-relation complex Gaussian drawn from the auxiliary stream of the
    /// same `(n, j, m)` key.
    pub fn joint_ou_increments(
        &self,
        n: usize,
        j: usize,
        cfg: &ModelConfig,
        lambda: f64,
    ) -> Result<Vec<(Complex64, Complex64)>> {
        if !cfg.nonlinearity.is_linear() {
            return Err(Error::RequiresLinear);
        }
        if n >= self.coarse_steps {
            return Err(Error::IndexOutOfRange {
                name: "coarse interval",
                index: n,
                limit: self.coarse_steps,
            });
        }
        if j >= self.fine_per_coarse {
            return Err(Error::IndexOutOfRange {
                name: "fine step",
                index: j,
                limit: self.fine_per_coarse,
            });
        }
        let dt = self.fine_dt;
        let alpha = cfg.alpha;
        Ok((0..self.modes)
            .map(|m| {
                let db = self.increments[self.index(n, j, m)];
                let q = cfg.q.amplitude(m);
                let z = eigenvalue(m + 1, alpha) - Complex64::new(0.0, lambda);
                let c = relative_kernel_mean(z * dt);
                // Ito isometry: E|zeta|^2 = q^2 (1 - exp(-2 alpha dt)) / alpha.
                let total_var = if alpha > 0.0 {
                    q * q * (1.0 - (-2.0 * alpha * dt).exp()) / alpha
                } else {
                    q * q * 2.0 * dt
                };
                let resid_var = (total_var - c.norm_sqr() * q * q * 2.0 * dt).max(0.0);
                let (xi, rho) = keyed::normal_pair(
                    self.seed,
                    &[n as u64, j as u64, m as u64, stream::AUX],
                );
                let r = (resid_var / 2.0).sqrt() * Complex64::new(xi, rho);
                (db, c * q * db + r)
            })
            .collect())
    }

    /// Exact stochastic convolution over a whole coarse interval with the
    /// semigroup-only kernel, `int_{T_n}^{T_{n+1}} exp(-lambda_m (T_{n+1}-s)) q_m dbeta_m`,
    /// assembled from the fine-step convolutions so it stays coupled to the
    /// fine increments.
    pub fn coarse_convolution(&self, n: usize, cfg: &ModelConfig) -> Result<Vec<Complex64>> {
        let dt = self.fine_dt;
        let j_count = self.fine_per_coarse;
        let mut acc = vec![Complex64::ZERO; self.modes];
        for j in 0..j_count {
            let pairs = self.joint_ou_increments(n, j, cfg, 0.0)?;
            let remaining = (j_count - 1 - j) as f64 * dt;
            for (m, (_, zeta)) in pairs.into_iter().enumerate() {
                acc[m] += (-eigenvalue(m + 1, cfg.alpha) * remaining).exp() * zeta;
            }
        }
        Ok(acc)
    }

    /// Serialize as `N, J, M, seed` (u64 little-endian) followed by the
    /// increments in row-major `(n, j, m)` order, each as two f64 LE.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        for v in [
            self.coarse_steps as u64,
            self.fine_per_coarse as u64,
            self.modes as u64,
            self.seed,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for c in &self.increments {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of [`NoisePath::save`]. The fine step size is not part of the
    /// dump format and must be supplied by the caller.
    pub fn load<R: Read>(mut r: R, fine_dt: f64) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut header = [0u64; 4];
        for h in header.iter_mut() {
            r.read_exact(&mut word)?;
            *h = u64::from_le_bytes(word);
        }
        let [n, j, m, seed] = header;
        let total = (n as usize)
            .checked_mul(j as usize)
            .and_then(|x| x.checked_mul(m as usize))
            .ok_or_else(|| Error::CorruptDump("header sizes overflow".into()))?;
        let mut increments = Vec::with_capacity(total);
        for _ in 0..total {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            increments.push(Complex64::new(re, im));
        }
        Self::from_parts(n as usize, j as usize, m as usize, seed, fine_dt, increments)
    }

    /// Copy of the path with every increment of coarse intervals `> n`
    /// replaced by NaN. Used by tests to verify that propagating interval
    /// `n` never reads ahead.
    pub fn poisoned_after(&self, n: usize) -> Self {
        let mut clone = self.clone();
        let nan = Complex64::new(f64::NAN, f64::NAN);
        let start = (n + 1) * self.fine_per_coarse * self.modes;
        for c in clone.increments[start.min(clone.increments.len())..].iter_mut() {
            *c = nan;
        }
        clone
    }
}

/// `(1 - exp(-w)) / w`, the mean of the convolution kernel relative to the
/// plain increment, with a series branch near `w = 0`.
fn relative_kernel_mean(w: Complex64) -> Complex64 {
    if w.norm() < 1e-6 {
        Complex64::ONE - w / 2.0 + w * w / 6.0 - w * w * w / 24.0
    } else {
        (Complex64::ONE - (-w).exp()) / w
    }
}

/// Mode-wise product `q_m * dW_m`.
pub fn apply_sqrt_q(q: &QSpec, dw: &[Complex64]) -> Result<SpectralField> {
    if q.len() != dw.len() {
        return Err(Error::LengthMismatch {
            expected: q.len(),
            got: dw.len(),
        });
    }
    Ok(SpectralField::from_coeffs(
        q.amplitudes()
            .iter()
            .zip(dw)
            .map(|(&qm, d)| qm * d)
            .collect(),
    ))
}
