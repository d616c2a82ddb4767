//! Array geometry, spherical-wavefront steering vectors and the LoS channel.
//!
//! The array lies on the y-axis centred at the origin; element `n` sits at
//! `(0, delta_n * d)` with `delta_n = (2n - N + 1) / 2`. Users are described
//! by their spatial angle `theta = sin(phi)` and their range `r` from the
//! array centre.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::numerics::cis;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform linear array with half-wavelength spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrayConfig {
    antennas: usize,
    carrier_hz: f64,
    wavelength: f64,
    spacing: f64,
}

impl ArrayConfig {
    pub fn new(antennas: usize, carrier_hz: f64) -> Result<Self> {
        if antennas < 2 {
            return Err(invalid(format!("antenna count must be >= 2, got {antennas}")));
        }
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(invalid(format!("carrier frequency must be positive, got {carrier_hz}")));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_hz;
        Ok(Self {
            antennas,
            carrier_hz,
            wavelength,
            spacing: wavelength / 2.0,
        })
    }

    #[inline]
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    #[inline]
    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    #[inline]
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `D = N d`.
    #[inline]
    pub fn aperture(&self) -> f64 {
        self.antennas as f64 * self.spacing
    }

    /// Element offset `delta_n = (2n - N + 1) / 2` in units of `d`.
    #[inline]
    pub fn element_offset(&self, n: usize) -> f64 {
        (2.0 * n as f64 - self.antennas as f64 + 1.0) / 2.0
    }

    /// Fresnel distance `D^{3/2} / (2 sqrt(lambda))`.
    pub fn fresnel_distance(&self) -> f64 {
        let d = self.aperture();
        0.5 * libm::sqrt(d * d * d / self.wavelength)
    }

    /// Rayleigh distance `2 D^2 / lambda`.
    pub fn rayleigh_distance(&self) -> f64 {
        2.0 * self.aperture() * self.aperture() / self.wavelength
    }

    /// `(R_Fre, R_Ray)`, the radiative near-field region.
    pub fn region_boundaries(&self) -> (f64, f64) {
        (self.fresnel_distance(), self.rayleigh_distance())
    }

    /// Free-space amplitude gain `lambda / (4 pi r)`.
    #[inline]
    pub fn path_gain(&self, r: f64) -> f64 {
        self.wavelength / (4.0 * PI * r)
    }
}

/// User location in the polar domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarPoint {
    pub theta: f64,
    pub r: f64,
}

impl PolarPoint {
    pub fn new(theta: f64, r: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&theta) {
            return Err(invalid(format!("spatial angle must lie in [-1, 1], got {theta}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(invalid(format!("distance must be positive and finite, got {r}")));
        }
        Ok(Self { theta, r })
    }

    /// From the physical angle of departure in radians.
    pub fn from_aod(phi_rad: f64, r: f64) -> Result<Self> {
        Self::new(libm::sin(phi_rad), r)
    }

    /// Physical angle of departure in radians.
    pub fn aod(&self) -> f64 {
        libm::asin(self.theta)
    }
}

/// `r^(n) - r`, evaluated without cancellation.
pub fn element_path_difference(cfg: &ArrayConfig, p: &PolarPoint, n: usize) -> f64 {
    let y = cfg.element_offset(n) * cfg.spacing();
    let rn = element_distance(cfg, p, n);
    (y * y - 2.0 * p.r * p.theta * y) / (rn + p.r)
}

/// Distance from element `n` to the user.
pub fn element_distance(cfg: &ArrayConfig, p: &PolarPoint, n: usize) -> f64 {
    debug_assert!(n < cfg.antennas());
    let y = cfg.element_offset(n) * cfg.spacing();
    libm::sqrt((p.r * p.r + y * y - 2.0 * p.r * p.theta * y).max(0.0))
}

/// Unit-norm near-field steering vector
/// `b_n = exp(-j 2 pi (r^(n) - r) / lambda) / sqrt(N)`.
pub fn near_field_steering(cfg: &ArrayConfig, p: &PolarPoint) -> Vec<Complex64> {
    let n = cfg.antennas();
    let scale = 1.0 / libm::sqrt(n as f64);
    let k = 2.0 * PI / cfg.wavelength();
    (0..n)
        .map(|i| cis(-k * element_path_difference(cfg, p, i)) * scale)
        .collect()
}

/// Line-of-sight channel `h` with `h^H = sqrt(N) g e^{-j 2 pi r / lambda} b^H`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelVector {
    pub h: Vec<Complex64>,
    pub gain: f64,
    pub r: f64,
}

impl ChannelVector {
    /// `h^H v`.
    pub fn response(&self, v: &[Complex64]) -> Complex64 {
        hermitian_dot(&self.h, v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.iter().map(|x| x.norm_sqr()).sum()
    }
}

pub fn los_channel(cfg: &ArrayConfig, p: &PolarPoint) -> ChannelVector {
    let gain = cfg.path_gain(p.r);
    let n = cfg.antennas() as f64;
    // h = conj(h^H): the common phase flips sign.
    let common = cis(2.0 * PI * p.r / cfg.wavelength()) * (libm::sqrt(n) * gain);
    let h = near_field_steering(cfg, p).into_iter().map(|b| b * common).collect();
    ChannelVector { h, gain, r: p.r }
}

/// `a^H b = sum conj(a_n) b_n`.
pub fn hermitian_dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

pub fn vector_norm(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x.norm_sqr()).sum::<f64>())
}
