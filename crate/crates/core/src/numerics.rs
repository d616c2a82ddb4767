//! Complex error function and seeded complex Gaussian noise.
//!
//! `erf` is evaluated in the first quadrant and mapped to the other three
//! with the exact symmetries `erf(-z) = -erf(z)` and `erf(conj z) =
//! conj erf(z)`, so oddness and conjugate symmetry hold bit-for-bit.
//!
//! Inside the first quadrant two regimes are used:
//!
//! * the Maclaurin series `2/sqrt(pi) * sum (-1)^n z^(2n+1) / (n! (2n+1))`
//!   for `|z| <= SERIES_RADIUS`, and also for `Re z < 1` where the result
//!   grows like `exp(Im(z)^2)` and the series cancellation stays bounded by
//!   `exp(2 Re(z)^2)`;
//! * the Laplace continued fraction for `erfc` elsewhere, evaluated with the
//!   modified Lentz algorithm.

use core::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Complex scalar used throughout the crate.
pub type ComplexScalar = Complex64;

/// Crossover radius between the power series and the continued fraction.
pub const SERIES_RADIUS: f64 = 3.0;

const FRAC_2_SQRT_PI: f64 = core::f64::consts::FRAC_2_SQRT_PI;
const MAX_SERIES_TERMS: usize = 4000;
const MAX_CF_TERMS: usize = 20_000;

/// `e^{j*phase}`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    let (s, c) = libm::sincos(phase);
    Complex64::new(c, s)
}

/// Error function extended to complex arguments.
///
/// Absolute error is below 1e-12 wherever `|erf(z)|` is of order one; for
/// arguments where the result itself is huge the error is relative. Results
/// that would overflow saturate at `±f64::MAX` per component.
pub fn erf(z: Complex64) -> Complex64 {
    let x = z.re.abs();
    let y = z.im.abs();
    let q = erf_first_quadrant(x, y);
    // The real part is odd in Re z and even in Im z; the imaginary part the
    // other way round. Either may be negative inside the first quadrant.
    let flip = |v: f64, s: f64| if s.is_sign_negative() { -v } else { v };
    Complex64::new(flip(saturate(q.re), z.re), flip(saturate(q.im), z.im))
}

/// Imaginary error function `erfi(v) = -j erf(j v)`.
pub fn erfi(v: Complex64) -> Complex64 {
    let j = Complex64::new(0.0, 1.0);
    -j * erf(j * v)
}

#[inline]
fn saturate(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else if v.is_nan() {
        0.0
    } else if v > 0.0 {
        f64::MAX
    } else {
        -f64::MAX
    }
}

fn erf_first_quadrant(x: f64, y: f64) -> Complex64 {
    let z = Complex64::new(x, y);
    if y == 0.0 && x > 6.0 {
        // erfc(6) ~ 2e-17, below half an ulp of 1.
        return Complex64::new(1.0, 0.0);
    }
    if z.norm() <= SERIES_RADIUS || x < 1.0 {
        erf_series(z)
    } else {
        Complex64::new(1.0, 0.0) - erfc_continued_fraction(z)
    }
}

fn erf_series(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut power = z;
    let mut sum = z;
    for n in 1..MAX_SERIES_TERMS {
        power = -power * z2 / n as f64;
        let term = power / (2 * n + 1) as f64;
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum * FRAC_2_SQRT_PI
}

/// `erfc(z) = exp(-z^2)/sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))`
/// for `Re z > 0`.
fn erfc_continued_fraction(z: Complex64) -> Complex64 {
    const TINY: f64 = 1e-300;
    let mut f = z;
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for k in 1..MAX_CF_TERMS {
        let a = 0.5 * k as f64;
        d = z + d * a;
        if d.norm_sqr() == 0.0 {
            d = Complex64::new(TINY, 0.0);
        }
        d = d.inv();
        c = z + c.inv() * a;
        if c.norm_sqr() == 0.0 {
            c = Complex64::new(TINY, 0.0);
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    (-(z * z)).exp() / (libm::sqrt(PI) * f)
}

/// Circularly-symmetric complex Gaussian noise source `CN(0, sigma2)`.
///
/// Draws come from ChaCha8 (`rand_chacha`) seeded with `seed` and switched
/// to `stream`, transformed with the ziggurat sampler of `rand_distr`. The
/// same `(sigma2, seed, stream)` always yields the same sequence on every
/// platform.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    sigma2: f64,
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl NoiseModel {
    pub fn new(sigma2: f64, seed: u64) -> Self {
        Self::with_stream(sigma2, seed, 0)
    }

    pub fn with_stream(sigma2: f64, seed: u64, stream: u64) -> Self {
        assert!(
            sigma2 >= 0.0 && sigma2.is_finite(),
            "noise power must be finite and non-negative"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            sigma2,
            seed,
            stream,
            rng,
        }
    }

    /// Noiseless source: every sample is exactly zero.
    pub fn silent() -> Self {
        Self::new(0.0, 0)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Next noise sample; real and imaginary parts each have variance
    /// `sigma2 / 2`.
    pub fn awgn_sample(&mut self) -> Complex64 {
        if self.sigma2 == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let scale = libm::sqrt(0.5 * self.sigma2);
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        Complex64::new(scale * re, scale * im)
    }
}
