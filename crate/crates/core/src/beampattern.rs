//! Beam pattern of a near-field user observed through far-field DFT beams.
//!
//! With `alpha = N^2 d (1 - theta^2) / (8 r)` and `beta = N (theta - phi) / 2`
//! the correlation between the near-field steering vector and a DFT beam is
//! approximated by
//!
//! ```text
//! f~ = e^{j pi (alpha - beta^2) / (4 alpha)}
//!      [erf(c (beta - 2 alpha)) - erf(c (beta + 2 alpha))] / (4 sqrt(alpha)),
//! c  = e^{j 3 pi / 4} sqrt(pi) / (2 sqrt(alpha)).
//! ```
//!
//! Its magnitude is flat (`~ 1 / (2 sqrt(alpha))`) over `|beta| < 2 alpha`, so
//! the half-gain width of the normalized pattern is `N d (1 - theta^2) / r`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::{hermitian_dot, near_field_steering, ArrayConfig, PolarPoint};
use crate::codebooks::{far_field_weights, DftCodebook};
use crate::error::{Error, Result};
use crate::numerics::{cis, erf};

/// Quadratic (`alpha`) and linear (`beta`) phase coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
}

impl AlphaBeta {
    pub fn new(cfg: &ArrayConfig, p: &PolarPoint, phi: f64) -> Self {
        let n = cfg.antennas() as f64;
        Self {
            alpha: n * n * cfg.spacing() * (1.0 - p.theta * p.theta) / (8.0 * p.r),
            beta: n * (p.theta - phi) / 2.0,
        }
    }
}

/// `|b^H(theta, r) a(phi)|` by direct summation.
pub fn exact_gain(cfg: &ArrayConfig, p: &PolarPoint, phi: f64) -> f64 {
    let b = near_field_steering(cfg, p);
    let a = far_field_weights(cfg.antennas(), phi);
    hermitian_dot(&b, &a).norm()
}

/// Second-order (Fresnel) model of `b^H a(phi)`:
/// `(1/N) sum exp(j pi [-delta_n (theta - phi) + delta_n^2 d (1 - theta^2) / (2 r)])`.
pub fn taylor_f(cfg: &ArrayConfig, p: &PolarPoint, phi: f64) -> Complex64 {
    let n = cfg.antennas();
    let quad = cfg.spacing() * (1.0 - p.theta * p.theta) / (2.0 * p.r);
    let lin = p.theta - phi;
    let sum = (0..n).fold(Complex64::new(0.0, 0.0), |acc, i| {
        let delta = cfg.element_offset(i);
        acc + cis(PI * (-delta * lin + delta * delta * quad))
    });
    sum / n as f64
}

pub fn taylor_gain(cfg: &ArrayConfig, p: &PolarPoint, phi: f64) -> f64 {
    taylor_f(cfg, p, phi).norm()
}

fn erf_arguments(ab: &AlphaBeta) -> (Complex64, Complex64) {
    let c = cis(0.75 * PI) * (libm::sqrt(PI) / (2.0 * libm::sqrt(ab.alpha)));
    (c * (ab.beta - 2.0 * ab.alpha), c * (ab.beta + 2.0 * ab.alpha))
}

/// Closed-form (integral) approximation `f~` of `b^H a(phi)`.
pub fn closed_form_f(ab: &AlphaBeta) -> Result<Complex64> {
    if !(ab.alpha > 0.0) {
        return Err(Error::Domain { alpha: ab.alpha });
    }
    let (lo, hi) = erf_arguments(ab);
    let phase = cis(PI * (ab.alpha - ab.beta * ab.beta) / (4.0 * ab.alpha));
    Ok(phase * (erf(lo) - erf(hi)) / (4.0 * libm::sqrt(ab.alpha)))
}

/// Closed-form normalized gain `|erf(c(beta - 2 alpha)) - erf(c(beta + 2 alpha))| / 2`.
pub fn normalized_closed_form(ab: &AlphaBeta) -> Result<f64> {
    if !(ab.alpha > 0.0) {
        return Err(Error::Domain { alpha: ab.alpha });
    }
    let (lo, hi) = erf_arguments(ab);
    Ok(0.5 * (erf(lo) - erf(hi)).norm())
}

/// Large-`alpha` central gain `1 / (2 sqrt(alpha))`.
pub fn central_gain(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain { alpha });
    }
    Ok(1.0 / (2.0 * libm::sqrt(alpha)))
}

/// Half-gain beam width `N d (1 - theta^2) / r`.
pub fn closed_form_width(cfg: &ArrayConfig, p: &PolarPoint) -> f64 {
    cfg.aperture() * (1.0 - p.theta * p.theta) / p.r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    Raw,
    /// Divided by the gain of the beam pointing exactly at `theta`.
    CentralNormalized,
}

/// Gains sampled on the DFT grid.
#[derive(Clone, Debug)]
pub struct BeamPattern {
    pub grid: Vec<f64>,
    pub gains: Vec<f64>,
    pub normalization: Normalization,
}

impl BeamPattern {
    /// Index of the strongest grid sample (first one on ties).
    pub fn peak_index(&self) -> usize {
        argmax(&self.gains)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn raw_pattern(cfg: &ArrayConfig, p: &PolarPoint, codebook: &DftCodebook) -> BeamPattern {
    let b = near_field_steering(cfg, p);
    let gains = codebook
        .codewords
        .iter()
        .map(|c| hermitian_dot(&b, &c.weights).norm())
        .collect();
    BeamPattern {
        grid: codebook.angle_grid.clone(),
        gains,
        normalization: Normalization::Raw,
    }
}

/// Pattern divided by the central gain `|b^H a(theta)|`. The channel factor
/// `sqrt(N) g e^{-j 2 pi r / lambda}` cancels, so this is also the normalized
/// channel-level pattern.
pub fn normalized_pattern(cfg: &ArrayConfig, p: &PolarPoint, codebook: &DftCodebook) -> BeamPattern {
    let mut pattern = raw_pattern(cfg, p, codebook);
    let centre = exact_gain(cfg, p, p.theta);
    for g in &mut pattern.gains {
        *g /= centre;
    }
    pattern.normalization = Normalization::CentralNormalized;
    pattern
}

/// Grid angles whose gain exceeds a threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct MainAngleSet {
    pub indices: Vec<usize>,
    pub angles: Vec<f64>,
    pub rho: f64,
    /// `max(angles) - min(angles)`.
    pub width: f64,
}

/// Largest run `lo..=hi` around `centre` with every value `> threshold`.
/// `centre` itself is not tested.
pub(crate) fn run_around(values: &[f64], centre: usize, threshold: f64) -> (usize, usize) {
    let mut lo = centre;
    while lo > 0 && values[lo - 1] > threshold {
        lo -= 1;
    }
    let mut hi = centre;
    while hi + 1 < values.len() && values[hi + 1] > threshold {
        hi += 1;
    }
    (lo, hi)
}

/// Main angle set at threshold `rho`. With `contiguous` only the run of grid
/// points around the strongest sample is kept; otherwise every sample above
/// `rho` counts.
pub fn measure_width(pattern: &BeamPattern, rho: f64, contiguous: bool) -> Result<MainAngleSet> {
    let peak = pattern.peak_index();
    if pattern.gains.is_empty() || !(pattern.gains[peak] > rho) {
        return Err(Error::EmptySet { threshold: rho });
    }
    let indices: Vec<usize> = if contiguous {
        let (lo, hi) = run_around(&pattern.gains, peak, rho);
        (lo..=hi).collect()
    } else {
        (0..pattern.gains.len()).filter(|&i| pattern.gains[i] > rho).collect()
    };
    let angles: Vec<f64> = indices.iter().map(|&i| pattern.grid[i]).collect();
    let width = angles[angles.len() - 1] - angles[0];
    Ok(MainAngleSet {
        indices,
        angles,
        rho,
        width,
    })
}

/// Width of the main run around the peak with its two `rho` crossings
/// located by linear interpolation between neighbouring grid samples.
pub fn continuous_width(pattern: &BeamPattern, rho: f64) -> Result<f64> {
    let peak = pattern.peak_index();
    if pattern.gains.is_empty() || !(pattern.gains[peak] > rho) {
        return Err(Error::EmptySet { threshold: rho });
    }
    let g = &pattern.gains;
    let x = &pattern.grid;
    let (lo, hi) = run_around(g, peak, rho);
    let left = if lo == 0 {
        x[0]
    } else {
        x[lo - 1] + (rho - g[lo - 1]) / (g[lo] - g[lo - 1]) * (x[lo] - x[lo - 1])
    };
    let right = if hi + 1 == g.len() {
        x[hi]
    } else {
        x[hi] + (g[hi] - rho) / (g[hi] - g[hi + 1]) * (x[hi + 1] - x[hi])
    };
    Ok(right - left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebooks::build_dft_codebook;

    fn fig2() -> (ArrayConfig, PolarPoint) {
        (
            ArrayConfig::new(512, 100e9).unwrap(),
            PolarPoint::new(0.0, 8.0).unwrap(),
        )
    }

    #[test]
    fn alpha_for_the_reference_user() {
        let (cfg, p) = fig2();
        let ab = AlphaBeta::new(&cfg, &p, 0.0);
        assert!((ab.alpha - 6.14).abs() < 0.01, "{}", ab.alpha);
        assert_eq!(ab.beta, 0.0);
    }

    #[test]
    fn central_gain_formula() {
        assert_eq!(central_gain(0.25).unwrap(), 1.0);
        assert!((central_gain(6.144).unwrap() - 0.201_718).abs() < 1e-5);
        assert!(central_gain(0.0).is_err());
        assert!(closed_form_f(&AlphaBeta { alpha: -1.0, beta: 0.0 }).is_err());
    }

    #[test]
    fn closed_form_magnitude_even_in_beta() {
        for &(alpha, beta) in &[(6.144, 3.0), (0.7, 1.1), (20.0, 33.0), (2.0, 0.4)] {
            let a = closed_form_f(&AlphaBeta { alpha, beta }).unwrap().norm();
            let b = closed_form_f(&AlphaBeta { alpha, beta: -beta }).unwrap().norm();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_centre_near_asymptote() {
        let (cfg, p) = fig2();
        let v = closed_form_f(&AlphaBeta::new(&cfg, &p, 0.0)).unwrap().norm();
        // Fresnel ripple keeps the centre a few percent under the asymptote.
        assert!((v / 0.201_718 - 1.0).abs() < 0.05, "{v}");
        assert!((v - exact_gain(&cfg, &p, 0.0)).abs() < 2e-3);
    }

    #[test]
    fn widths_scale_as_documented() {
        let cfg = ArrayConfig::new(512, 100e9).unwrap();
        let w0 = closed_form_width(&cfg, &PolarPoint::new(0.0, 8.0).unwrap());
        assert!((w0 - 0.0959).abs() < 1e-4, "{w0}");
        let w6 = closed_form_width(&cfg, &PolarPoint::new(0.6, 8.0).unwrap());
        assert!((w6 / w0 - 0.64).abs() < 1e-12);
        let w16 = closed_form_width(&cfg, &PolarPoint::new(0.0, 16.0).unwrap());
        assert!((w16 / w0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normalized_pattern_is_one_at_theta_and_symmetric() {
        let (cfg, p) = fig2();
        let cb = build_dft_codebook(&cfg);
        let pat = normalized_pattern(&cfg, &p, &cb);
        let n = pat.gains.len();
        for i in 0..n / 2 {
            assert!((pat.gains[i] - pat.gains[n - 1 - i]).abs() < 1e-10);
        }
        // The grid straddles theta = 0; evaluate the normalization directly.
        let centre = exact_gain(&cfg, &p, 0.0);
        assert!((exact_gain(&cfg, &p, p.theta) / centre - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fig2_half_gain_width() {
        let (cfg, p) = fig2();
        let cb = build_dft_codebook(&cfg);
        let pat = normalized_pattern(&cfg, &p, &cb);
        let set = measure_width(&pat, 0.5, true).unwrap();
        let b = closed_form_width(&cfg, &p);
        assert!((set.width / b - 1.0).abs() < 0.1, "{} vs {b}", set.width);
        let cont = continuous_width(&pat, 0.5).unwrap();
        assert!((cont - set.width).abs() <= 2.0 * 2.0 / 512.0);
        assert!(set.angles.iter().all(|a| a.abs() < 0.06));
    }

    #[test]
    fn threshold_above_everything_is_empty() {
        let (cfg, p) = fig2();
        let cb = build_dft_codebook(&cfg);
        let pat = normalized_pattern(&cfg, &p, &cb);
        let top = pat.gains[pat.peak_index()];
        assert!(matches!(
            measure_width(&pat, top + 1e-9, true),
            Err(Error::EmptySet { .. })
        ));
        let single = measure_width(&pat, top - 1e-12, true).unwrap();
        assert_eq!(single.width, 0.0);
    }

    #[test]
    fn literal_set_contains_contiguous_set() {
        let (cfg, _) = fig2();
        let p = PolarPoint::new(0.3, 6.2).unwrap();
        let cb = build_dft_codebook(&cfg);
        let pat = normalized_pattern(&cfg, &p, &cb);
        let a = measure_width(&pat, 0.5, true).unwrap();
        let b = measure_width(&pat, 0.5, false).unwrap();
        assert!(b.width >= a.width);
        assert!(a.indices.iter().all(|i| b.indices.contains(i)));
    }

    #[test]
    fn run_around_stops_at_edges() {
        let v = [0.9, 0.8, 0.2, 0.7, 0.9, 0.6];
        assert_eq!(run_around(&v, 0, 0.5), (0, 1));
        assert_eq!(run_around(&v, 4, 0.5), (3, 5));
    }
}
