//! Far-field DFT codebook and the polar-domain near-field codebook.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::{near_field_steering, ArrayConfig, PolarPoint};
use crate::error::{invalid, Error, Result};
use crate::numerics::cis;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CodewordLabel {
    /// Far-field beam towards spatial angle `angle`.
    FarField { angle: f64 },
    /// Near-field beam focused at `(theta, r)`.
    NearField { theta: f64, r: f64 },
}

impl CodewordLabel {
    pub fn theta(&self) -> f64 {
        match *self {
            CodewordLabel::FarField { angle } => angle,
            CodewordLabel::NearField { theta, .. } => theta,
        }
    }

    /// Focal distance; infinite for far-field beams.
    pub fn r(&self) -> f64 {
        match *self {
            CodewordLabel::FarField { .. } => f64::INFINITY,
            CodewordLabel::NearField { r, .. } => r,
        }
    }
}

/// Unit-norm beamforming vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Codeword {
    pub weights: Vec<Complex64>,
    pub label: CodewordLabel,
}

impl Codeword {
    pub fn far_field(antennas: usize, angle: f64) -> Self {
        Self {
            weights: far_field_weights(antennas, angle),
            label: CodewordLabel::FarField { angle },
        }
    }

    pub fn near_field(cfg: &ArrayConfig, p: &PolarPoint) -> Self {
        Self {
            weights: near_field_steering(cfg, p),
            label: CodewordLabel::NearField { theta: p.theta, r: p.r },
        }
    }
}

/// `a_n(phi) = exp(j pi delta_n phi) / sqrt(N)`, the `r -> inf` limit of the
/// near-field steering vector.
pub fn far_field_weights(antennas: usize, angle: f64) -> Vec<Complex64> {
    let scale = 1.0 / libm::sqrt(antennas as f64);
    let half = (antennas as f64 - 1.0) / 2.0;
    (0..antennas)
        .map(|n| cis(PI * (n as f64 - half) * angle) * scale)
        .collect()
}

/// `phi_n = (2n - N + 1) / N`.
#[inline]
pub fn dft_angle(antennas: usize, n: usize) -> f64 {
    (2.0 * n as f64 - antennas as f64 + 1.0) / antennas as f64
}

/// Index of the DFT grid angle nearest to `theta` (ties go to the lower index).
pub fn nearest_dft_index(antennas: usize, theta: f64) -> usize {
    let n = antennas as f64;
    let x = (theta * n + n - 1.0) / 2.0;
    libm::ceil(x - 0.5).clamp(0.0, n - 1.0) as usize
}

#[derive(Clone, Debug)]
pub struct DftCodebook {
    pub codewords: Vec<Codeword>,
    pub angle_grid: Vec<f64>,
}

impl DftCodebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }
}

pub fn build_dft_codebook(cfg: &ArrayConfig) -> DftCodebook {
    let n = cfg.antennas();
    let angle_grid: Vec<f64> = (0..n).map(|i| dft_angle(n, i)).collect();
    let codewords = angle_grid.iter().map(|&a| Codeword::far_field(n, a)).collect();
    DftCodebook { codewords, angle_grid }
}

/// Polar-domain codebook: for every DFT angle `theta_n`, near-field beams at
/// the rings `r_s = Z (1 - theta_n^2) / s`, `s = 1, 2, ...`, kept when they
/// fall inside `[r_min, R_Ray]`, followed by one far-field beam.
#[derive(Clone, Debug)]
pub struct PolarCodebook {
    pub entries: Vec<Codeword>,
    /// `entries[offsets[i]..offsets[i + 1]]` belong to `angles[i]`.
    pub offsets: Vec<usize>,
    pub angles: Vec<f64>,
    pub beta: f64,
    /// Ring scale `Z = N^2 d^2 / (2 beta^2 lambda)`.
    pub z_delta: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl PolarCodebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries (finite rings then far-field) at angle index `i`.
    pub fn at_angle(&self, i: usize) -> &[Codeword] {
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Number of codewords (rings plus the far-field beam) at angle `i`.
    pub fn samples_at(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Finite-distance rings at angle `i`.
    pub fn rings_at(&self, i: usize) -> usize {
        self.samples_at(i) - 1
    }

    /// Average number of codewords per angle, `S`.
    pub fn average_samples(&self) -> f64 {
        self.entries.len() as f64 / self.angles.len() as f64
    }
}

/// Rings `Z (1 - theta^2) / s` for `s = 1, 2, ...` inside `[r_min, r_max]`,
/// largest first.
pub fn ring_distances(z_delta: f64, theta: f64, r_min: f64, r_max: f64) -> Vec<f64> {
    let scale = z_delta * (1.0 - theta * theta);
    let mut rings = Vec::new();
    let mut s = 1usize;
    loop {
        let r = scale / s as f64;
        if !(r >= r_min) || r <= 0.0 {
            break;
        }
        if r <= r_max {
            rings.push(r);
        }
        s += 1;
    }
    rings
}

pub fn build_polar_codebook(cfg: &ArrayConfig, beta: f64, r_min: f64) -> Result<PolarCodebook> {
    let (fresnel, rayleigh) = cfg.region_boundaries();
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid("polar codebook beta must be positive"));
    }
    // Tolerate r_min a hair below R_Fre from round-tripping through text.
    if !(r_min >= fresnel * (1.0 - 1e-12) && r_min < rayleigh) {
        return Err(invalid("polar codebook r_min must lie in [R_Fre, R_Ray)"));
    }
    let n = cfg.antennas();
    let d = cfg.spacing();
    let z_delta = (n * n) as f64 * d * d / (2.0 * beta * beta * cfg.wavelength());

    let mut entries = Vec::new();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut angles = Vec::with_capacity(n);
    let mut rings_total = 0usize;
    for i in 0..n {
        let theta = dft_angle(n, i);
        angles.push(theta);
        offsets.push(entries.len());
        for r in ring_distances(z_delta, theta, r_min, rayleigh) {
            entries.push(Codeword::near_field(cfg, &PolarPoint { theta, r }));
            rings_total += 1;
        }
        entries.push(Codeword::far_field(n, theta));
    }
    offsets.push(entries.len());
    if rings_total == 0 {
        return Err(Error::EmptyGrid);
    }
    Ok(PolarCodebook {
        entries,
        offsets,
        angles,
        beta,
        z_delta,
        r_min,
        r_max: rayleigh,
    })
}
