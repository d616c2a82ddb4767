//! Beam training: the width-based scheme and the joint, fast and exhaustive
//! baselines.
//!
//! Every scheme starts from one sweep of the DFT codebook except the
//! exhaustive search, which sweeps the whole polar codebook. The `*_from_sweep`
//! variants let several schemes share one sweep of the same user.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::beampattern::{argmax, run_around};
use crate::channel::{ArrayConfig, ChannelVector, PolarPoint};
use crate::codebooks::{Codeword, CodewordLabel, DftCodebook, PolarCodebook};
use crate::error::{invalid, Error, Result};
use crate::numerics::NoiseModel;

/// Received samples of a sweep, one per transmitted codeword.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub samples: Vec<Complex64>,
    pub pilot_count: usize,
}

impl SweepResult {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.samples.iter().map(|y| y.norm()).collect()
    }
}

/// How a measured half-gain width is turned into a distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceRule {
    /// `r = N d (1 - theta^2) / B`, the inverse of the closed-form width.
    WidthInversion,
    /// `r = d (1 - theta^2) / B^2`.
    LiteralSquared,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Refinement candidates.
    pub k: usize,
    /// Largest index gap inside one cluster.
    pub cluster_gap: usize,
    /// `rho2` as a fraction of the strongest sample.
    pub rho2_fraction: f64,
    pub distance_rule: DistanceRule,
    /// Distances searched by the joint baseline.
    pub z_mu_size: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            k: 3,
            cluster_gap: 8,
            rho2_fraction: 0.65,
            distance_rule: DistanceRule::WidthInversion,
            z_mu_size: 64,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if self.cluster_gap == 0 {
            return Err(invalid("cluster gap L must be at least 1"));
        }
        if !(self.rho2_fraction > 0.0 && self.rho2_fraction < 1.0) {
            return Err(invalid("rho2 fraction must lie in (0, 1)"));
        }
        if self.z_mu_size < 2 {
            return Err(invalid("Z_mu grid needs at least 2 distances"));
        }
        Ok(())
    }
}

/// One refinement candidate and the power it returned.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub theta: f64,
    pub r: f64,
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocationEstimate {
    pub theta_hat: f64,
    pub r_hat: f64,
    pub codeword: Codeword,
    pub pilot_count: usize,
    pub candidates: Vec<Candidate>,
    /// Width-to-distance model evaluations spent in the distance stage.
    pub model_evaluations: usize,
    /// Sweep samples inspected while measuring widths.
    pub width_scans: usize,
}

/// Transmit every codeword once and record `h^H v + w`.
pub fn sweep_codewords<'a, I>(channel: &ChannelVector, codewords: I, noise: &mut NoiseModel) -> SweepResult
where
    I: IntoIterator<Item = &'a Codeword>,
{
    let samples: Vec<Complex64> = codewords
        .into_iter()
        .map(|c| channel.response(&c.weights) + noise.awgn_sample())
        .collect();
    let pilot_count = samples.len();
    SweepResult { samples, pilot_count }
}

/// Sweep of the DFT codebook.
pub fn beam_sweep(channel: &ChannelVector, codebook: &DftCodebook, noise: &mut NoiseModel) -> SweepResult {
    sweep_codewords(channel, &codebook.codewords, noise)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    /// Runs of above-threshold indices, in increasing order.
    pub clusters: Vec<Vec<usize>>,
    /// Index into `clusters` of the cluster holding the strongest sample.
    pub selected: usize,
}

impl Clustering {
    pub fn best(&self) -> &[usize] {
        &self.clusters[self.selected]
    }
}

/// Split `{n : magnitudes[n] > rho2}` into clusters whose consecutive members
/// are at most `gap` apart, and pick the one holding the strongest sample.
pub fn cluster_indices(magnitudes: &[f64], rho2: f64, gap: usize) -> Result<Clustering> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut selected = 0;
    let mut best = f64::NEG_INFINITY;
    let mut last: Option<usize> = None;
    for (n, &m) in magnitudes.iter().enumerate() {
        if !(m > rho2) {
            continue;
        }
        match last {
            Some(prev) if n - prev <= gap => clusters.last_mut().unwrap().push(n),
            _ => clusters.push(alloc::vec![n]),
        }
        if m > best {
            best = m;
            selected = clusters.len() - 1;
        }
        last = Some(n);
    }
    if clusters.is_empty() {
        return Err(Error::EmptySet { threshold: rho2 });
    }
    Ok(Clustering { clusters, selected })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AngleEstimate {
    /// Midpoint of the extremes of the main angle set.
    pub theta_hat: f64,
    /// Grid indices of the refinement candidates, nearest first.
    pub candidates: Vec<usize>,
    /// Grid indices of the main angle set.
    pub main_set: Vec<usize>,
}

/// Median-angle estimate from a DFT sweep. With `clustered` the main angle
/// set is restricted to the strongest cluster; otherwise every sample above
/// `rho2` counts.
pub fn estimate_angle(
    magnitudes: &[f64],
    grid: &[f64],
    ec: &EstimatorConfig,
    clustered: bool,
) -> Result<AngleEstimate> {
    let peak = magnitudes[argmax(magnitudes)];
    let rho2 = ec.rho2_fraction * peak;
    let main_set: Vec<usize> = if clustered {
        cluster_indices(magnitudes, rho2, ec.cluster_gap)?.best().to_vec()
    } else {
        let set: Vec<usize> = (0..magnitudes.len()).filter(|&n| magnitudes[n] > rho2).collect();
        if set.is_empty() {
            return Err(Error::EmptySet { threshold: rho2 });
        }
        set
    };
    let lo = grid[main_set[0]];
    let hi = grid[main_set[main_set.len() - 1]];
    let theta_hat = 0.5 * (lo + hi);
    let candidates = pick_candidates(&main_set, grid, theta_hat, ec.k);
    Ok(AngleEstimate {
        theta_hat,
        candidates,
        main_set,
    })
}

/// The `k` members of `set` nearest `centre` (ties toward the smaller
/// angle). A set smaller than `k` is topped up with the nearest grid angles
/// outside it.
fn pick_candidates(set: &[usize], grid: &[f64], centre: f64, k: usize) -> Vec<usize> {
    let key = |&n: &usize| ((grid[n] - centre).abs(), grid[n]);
    let by_distance = |a: &usize, b: &usize| key(a).partial_cmp(&key(b)).unwrap();
    let mut chosen = set.to_vec();
    chosen.sort_by(by_distance);
    chosen.truncate(k);
    if chosen.len() < k {
        let mut rest: Vec<usize> = (0..grid.len()).filter(|n| !set.contains(n)).collect();
        rest.sort_by(by_distance);
        chosen.extend(rest.into_iter().take(k - chosen.len()));
    }
    chosen
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceEstimate {
    pub r_hat: f64,
    /// Half-gain width `B` around the candidate.
    pub width: f64,
    pub model_evaluations: usize,
    pub width_scans: usize,
}

/// Half-gain width of the contiguous run around grid index `candidate`,
/// normalized by the candidate's own sample.
fn half_gain_width(magnitudes: &[f64], grid: &[f64], candidate: usize) -> (f64, usize) {
    let reference = magnitudes[candidate];
    if !(reference > 0.0) {
        return (0.0, 1);
    }
    let (lo, hi) = run_around(magnitudes, candidate, 0.5 * reference);
    // The run plus the two samples that ended it.
    let scans = hi - lo + 1 + usize::from(lo > 0) + usize::from(hi + 1 < magnitudes.len());
    (grid[hi] - grid[lo], scans)
}

/// Distance from the measured half-gain width at a candidate angle. A
/// zero width means the beam is no wider than a far-field beam, so the
/// Rayleigh distance is returned.
pub fn estimate_distance(
    cfg: &ArrayConfig,
    magnitudes: &[f64],
    grid: &[f64],
    candidate: usize,
    rule: DistanceRule,
) -> DistanceEstimate {
    let (fresnel, rayleigh) = cfg.region_boundaries();
    let (width, width_scans) = half_gain_width(magnitudes, grid, candidate);
    let theta = grid[candidate];
    let r_hat = if width > 0.0 {
        let r = match rule {
            DistanceRule::WidthInversion => cfg.aperture() * (1.0 - theta * theta) / width,
            DistanceRule::LiteralSquared => cfg.spacing() * (1.0 - theta * theta) / (width * width),
        };
        r.clamp(fresnel, rayleigh)
    } else {
        rayleigh
    };
    DistanceEstimate {
        r_hat,
        width,
        model_evaluations: 1,
        width_scans,
    }
}

/// `Z_mu`: `size` log-spaced distances from `R_Fre` to `R_Ray`.
pub fn z_mu_grid(cfg: &ArrayConfig, size: usize) -> Vec<f64> {
    let (fresnel, rayleigh) = cfg.region_boundaries();
    let ratio = libm::log(rayleigh / fresnel);
    (0..size)
        .map(|i| fresnel * libm::exp(ratio * i as f64 / (size - 1) as f64))
        .collect()
}

/// Joint-baseline distance: the `Z_mu` entry whose predicted width is
/// closest to the measured one.
pub fn search_distance(
    cfg: &ArrayConfig,
    magnitudes: &[f64],
    grid: &[f64],
    candidate: usize,
    z_mu: &[f64],
) -> DistanceEstimate {
    let (width, width_scans) = half_gain_width(magnitudes, grid, candidate);
    let theta = grid[candidate];
    let scale = cfg.aperture() * (1.0 - theta * theta);
    let mut r_hat = z_mu[0];
    let mut best = f64::INFINITY;
    for &r in z_mu {
        let miss = (scale / r - width).abs();
        if miss < best {
            best = miss;
            r_hat = r;
        }
    }
    DistanceEstimate {
        r_hat,
        width,
        model_evaluations: z_mu.len(),
        width_scans,
    }
}

/// Transmit one codeword per candidate and keep the strongest.
fn refine(
    cfg: &ArrayConfig,
    channel: &ChannelVector,
    points: &[PolarPoint],
    noise: &mut NoiseModel,
) -> (usize, Vec<Candidate>, Codeword) {
    let mut best = 0;
    let mut candidates = Vec::with_capacity(points.len());
    let mut best_codeword = None;
    for (i, p) in points.iter().enumerate() {
        let codeword = Codeword::near_field(cfg, p);
        let power = (channel.response(&codeword.weights) + noise.awgn_sample()).norm_sqr();
        candidates.push(Candidate {
            theta: p.theta,
            r: p.r,
            power,
        });
        if i == 0 || power > candidates[best].power {
            best = i;
            best_codeword = Some(codeword);
        }
    }
    (best, candidates, best_codeword.expect("at least one candidate"))
}

fn finish(
    sweep: &SweepResult,
    points: &[PolarPoint],
    distances: &[DistanceEstimate],
    cfg: &ArrayConfig,
    channel: &ChannelVector,
    noise: &mut NoiseModel,
) -> LocationEstimate {
    let (best, candidates, codeword) = refine(cfg, channel, points, noise);
    LocationEstimate {
        theta_hat: points[best].theta,
        r_hat: points[best].r,
        codeword,
        pilot_count: sweep.pilot_count + points.len(),
        candidates,
        model_evaluations: distances.iter().map(|d| d.model_evaluations).sum(),
        width_scans: distances.iter().map(|d| d.width_scans).sum(),
    }
}

/// Clustered median-angle estimate, width-inversion distances and `k`
/// refinement pilots. Uses `N + k` pilots.
pub fn proposed_from_sweep(
    cfg: &ArrayConfig,
    channel: &ChannelVector,
    dft: &DftCodebook,
    sweep: &SweepResult,
    noise: &mut NoiseModel,
    ec: &EstimatorConfig,
) -> Result<LocationEstimate> {
    ec.validate()?;
    let mags = sweep.magnitudes();
    let angle = estimate_angle(&mags, &dft.angle_grid, ec, true)?;
    let distances: Vec<DistanceEstimate> = angle
        .candidates
        .iter()
        .map(|&c| estimate_distance(cfg, &mags, &dft.angle_grid, c, ec.distance_rule))
        .collect();
    let points: Vec<PolarPoint> = angle
        .candidates
        .iter()
        .zip(&distances)
        .map(|(&c, d)| PolarPoint {
            theta: dft.angle_grid[c],
            r: d.r_hat,
        })
        .collect();
    Ok(finish(sweep, &points, &distances, cfg, channel, noise))
}

pub fn proposed_training(
    cfg: &ArrayConfig,
    channel: &ChannelVector,
    dft: &DftCodebook,
    noise: &mut NoiseModel,
    ec: &EstimatorConfig,
) -> Result<LocationEstimate> {
    let sweep = beam_sweep(channel, dft, noise);
    proposed_from_sweep(cfg, channel, dft, &sweep, noise, ec)
}

/// Median-angle estimate without clustering, then a width-matching search
/// over `Z_mu`. Uses `N + k` pilots and `|Z_mu|` model evaluations per
/// candidate.
pub fn joint_from_sweep(
    cfg: &ArrayConfig,
    channel: &ChannelVector,
    dft: &DftCodebook,
    sweep: &SweepResult,
    noise: &mut NoiseModel,
    ec: &EstimatorConfig,
) -> Result<LocationEstimate> {
    ec.validate()?;
    let mags = sweep.magnitudes();
    let angle = estimate_angle(&mags, &dft.angle_grid, ec, false)?;
    let z_mu = z_mu_grid(cfg, ec.z_mu_size);
    let distances: Vec<DistanceEstimate> = angle
        .candidates
        .iter()
        .map(|&c| search_distance(cfg, &mags, &dft.angle_grid, c, &z_mu))
        .collect();
    let points: Vec<PolarPoint> = angle
        .candidates
        .iter()
        .zip(&distances)
        .map(|(&c, d)| PolarPoint {
            theta: dft.angle_grid[c],
            r: d.r_hat,
        })
        .collect();
    Ok(finish(sweep, &points, &distances, cfg, channel, noise))
}

pub fn joint_training(
    cfg: &ArrayConfig,
    channel: &ChannelVector,
    dft: &DftCodebook,
    noise: &mut NoiseModel,
    ec: &EstimatorConfig,
) -> Result<LocationEstimate> {
    let sweep = beam_sweep(channel, dft, noise);
    joint_from_sweep(cfg, channel, dft, &sweep, noise, ec)
}

fn location_of(label: &CodewordLabel, rayleigh: f64) -> (f64, f64) {
    match *label {
        CodewordLabel::FarField { angle } => (angle, rayleigh),
        CodewordLabel::NearField { theta, r } => (theta, r),
    }
}

/// Pick the strongest of `entries`; a far-field winner reports `R_Ray`.
fn strongest_entry(
    cfg: &ArrayConfig,
    entries: &[&Codeword],
    samples: &[Complex64],
) -> (f64, f64, Codeword, Vec<Candidate>) {
    let rayleigh = cfg.rayleigh_distance();
    let powers: Vec<f64> = samples.iter().map(|y| y.norm_sqr()).collect();
    let best = argmax(&powers);
    let candidates = entries
        .iter()
        .zip(&powers)
        .map(|(c, &power)| {
            let (theta, r) = location_of(&c.label, rayleigh);
            Candidate { theta, r, power }
        })
        .collect();
    let (theta, r) = location_of(&entries[best].label, rayleigh);
    (theta, r, entries[best].clone(), candidates)
}

/// Angle as in the joint baseline, then every polar-codebook entry at each
/// candidate angle is swept. Uses `N + sum_i S(theta_i)` pilots.
pub fn fast_from_sweep(
    cfg: &ArrayConfig,
    channel: &ChannelVector,
    dft: &DftCodebook,
    polar: &PolarCodebook,
    sweep: &SweepResult,
    noise: &mut NoiseModel,
    ec: &EstimatorConfig,
) -> Result<LocationEstimate> {
    ec.validate()?;
    let mags = sweep.magnitudes();
    let angle = estimate_angle(&mags, &dft.angle_grid, ec, false)?;
    let entries: Vec<&Codeword> = angle.candidates.iter().flat_map(|&c| polar.at_angle(c)).collect();
    let second = sweep_codewords(channel, entries.iter().copied(), noise);
    let (theta_hat, r_hat, codeword, candidates) = strongest_entry(cfg, &entries, &second.samples);
    Ok(LocationEstimate {
        theta_hat,
        r_hat,
        codeword,
        pilot_count: sweep.pilot_count + second.pilot_count,
        candidates,
        model_evaluations: 0,
        width_scans: 0,
    })
}

pub fn fast_training(
    cfg: &ArrayConfig,
    channel: &ChannelVector,
    dft: &DftCodebook,
    polar: &PolarCodebook,
    noise: &mut NoiseModel,
    ec: &EstimatorConfig,
) -> Result<LocationEstimate> {
    let sweep = beam_sweep(channel, dft, noise);
    fast_from_sweep(cfg, channel, dft, polar, &sweep, noise, ec)
}

/// Sweep the whole polar codebook and keep the strongest entry. Uses `N S`
/// pilots.
pub fn exhaustive_training(
    cfg: &ArrayConfig,
    channel: &ChannelVector,
    polar: &PolarCodebook,
    noise: &mut NoiseModel,
) -> LocationEstimate {
    let sweep = sweep_codewords(channel, &polar.entries, noise);
    let entries: Vec<&Codeword> = polar.entries.iter().collect();
    let (theta_hat, r_hat, codeword, candidates) = strongest_entry(cfg, &entries, &sweep.samples);
    LocationEstimate {
        theta_hat,
        r_hat,
        codeword,
        pilot_count: sweep.pilot_count,
        candidates,
        model_evaluations: 0,
        width_scans: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beampattern::exact_gain;
    use crate::channel::los_channel;
    use crate::codebooks::{build_dft_codebook, build_polar_codebook, dft_angle};

    fn setup(n: usize) -> (ArrayConfig, DftCodebook) {
        let cfg = ArrayConfig::new(n, 100e9).unwrap();
        let dft = build_dft_codebook(&cfg);
        (cfg, dft)
    }

    #[test]
    fn clusters_follow_the_gap_rule() {
        let mut m = alloc::vec![0.0; 40];
        m[10] = 1.0;
        m[12] = 2.0;
        m[30] = 3.0;
        let c = cluster_indices(&m, 0.5, 8).unwrap();
        assert_eq!(c.clusters, alloc::vec![alloc::vec![10, 12], alloc::vec![30]]);
        assert_eq!(c.best(), &[30]);
        assert!(matches!(cluster_indices(&m, 5.0, 8), Err(Error::EmptySet { .. })));
    }

    #[test]
    fn noiseless_sweep_matches_gain_table() {
        let (cfg, dft) = setup(64);
        let p = PolarPoint::new(0.2, 3.0).unwrap();
        let h = los_channel(&cfg, &p);
        let s = beam_sweep(&h, &dft, &mut NoiseModel::silent());
        assert_eq!(s.pilot_count, 64);
        let scale = (64f64).sqrt() * cfg.path_gain(3.0);
        for (y, &phi) in s.samples.iter().zip(&dft.angle_grid) {
            assert!((y.norm() - scale * exact_gain(&cfg, &p, phi)).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn reference_user_angle_and_distance() {
        let (cfg, dft) = setup(512);
        let p = PolarPoint::new(0.0, 8.0).unwrap();
        let h = los_channel(&cfg, &p);
        let ec = EstimatorConfig::default();
        let sweep = beam_sweep(&h, &dft, &mut NoiseModel::silent());
        let mags = sweep.magnitudes();
        let angle = estimate_angle(&mags, &dft.angle_grid, &ec, true).unwrap();
        assert!(angle.theta_hat.abs() <= 2.0 / 512.0);
        let d = estimate_distance(&cfg, &mags, &dft.angle_grid, angle.candidates[0], ec.distance_rule);
        assert!((7.2..=8.8).contains(&d.r_hat), "{}", d.r_hat);
        assert_eq!(d.model_evaluations, 1);
    }

    #[test]
    fn on_grid_far_field_user_is_exact() {
        let (cfg, dft) = setup(128);
        let theta = dft_angle(128, 80);
        let p = PolarPoint::new(theta, 100.0 * cfg.rayleigh_distance()).unwrap();
        let h = los_channel(&cfg, &p);
        let mags = beam_sweep(&h, &dft, &mut NoiseModel::silent()).magnitudes();
        let ec = EstimatorConfig {
            k: 1,
            ..Default::default()
        };
        let a = estimate_angle(&mags, &dft.angle_grid, &ec, true).unwrap();
        assert_eq!(a.theta_hat, theta);
        assert_eq!(a.candidates, [80]);
    }

    #[test]
    fn candidates_fill_from_neighbours() {
        let grid: Vec<f64> = (0..8).map(|i| dft_angle(8, i)).collect();
        assert_eq!(pick_candidates(&[3], &grid, grid[3], 3), [3, 2, 4]);
        assert_eq!(pick_candidates(&[2, 3, 4, 5], &grid, 0.0, 3), [3, 4, 2]);
    }

    #[test]
    fn distance_inversion_scaling() {
        let cfg = ArrayConfig::new(16, 100e9).unwrap();
        let grid: Vec<f64> = (0..16).map(|i| dft_angle(16, i)).collect();
        let mut mags = alloc::vec![0.0; 16];
        for m in &mut mags[6..=9] {
            *m = 1.0;
        }
        let narrow = estimate_distance(&cfg, &mags, &grid, 7, DistanceRule::WidthInversion);
        for m in &mut mags[3..=12] {
            *m = 1.0;
        }
        let wide = estimate_distance(&cfg, &mags, &grid, 7, DistanceRule::WidthInversion);
        assert!(wide.width > narrow.width);
        let (fre, _) = cfg.region_boundaries();
        let expect = cfg.aperture() * (1.0 - grid[7] * grid[7]) / wide.width;
        assert!((wide.r_hat - expect.max(fre)).abs() < 1e-12);
        let single = estimate_distance(&cfg, &[0.0, 1.0, 0.0], &grid[..3], 1, DistanceRule::WidthInversion);
        assert_eq!(single.r_hat, cfg.rayleigh_distance());
    }

    #[test]
    fn pilot_budgets() {
        let (cfg, dft) = setup(128);
        let polar = build_polar_codebook(&cfg, 1.6, cfg.fresnel_distance()).unwrap();
        let p = PolarPoint::new(0.1, 4.0).unwrap();
        let h = los_channel(&cfg, &p);
        let ec = EstimatorConfig::default();
        let mut z = NoiseModel::silent();
        assert_eq!(proposed_training(&cfg, &h, &dft, &mut z, &ec).unwrap().pilot_count, 131);
        let joint = joint_training(&cfg, &h, &dft, &mut z, &ec).unwrap();
        assert_eq!(joint.pilot_count, 131);
        assert_eq!(joint.model_evaluations, 3 * 64);
        let fast = fast_training(&cfg, &h, &dft, &polar, &mut z, &ec).unwrap();
        assert_eq!(fast.pilot_count, 128 + fast.candidates.len());
        assert!(fast.candidates.len() >= 3);
        let ex = exhaustive_training(&cfg, &h, &polar, &mut z);
        assert_eq!(ex.pilot_count, polar.len());
    }

    #[test]
    fn exhaustive_recovers_a_codebook_entry() {
        let (cfg, _) = setup(64);
        let polar = build_polar_codebook(&cfg, 1.6, cfg.fresnel_distance()).unwrap();
        let entry = polar.at_angle(30)[0].label;
        let p = PolarPoint::new(entry.theta(), entry.r()).unwrap();
        let h = los_channel(&cfg, &p);
        let est = exhaustive_training(&cfg, &h, &polar, &mut NoiseModel::silent());
        assert_eq!(est.codeword.label, entry);
    }
}
