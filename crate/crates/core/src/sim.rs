//! Monte-Carlo scenarios: noise calibration, user sampling, per-trial
//! evaluation of every scheme, aggregation and overhead accounting.
//!
//! Every trial is a pure function of `(config, snr index, trial index)`.
//! Random draws come from ChaCha8 streams keyed by the trial index, with the
//! seed derived from the scenario seed and the purpose of the draw, so trials
//! can run in any order or in parallel and still give identical rows.

use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, Uniform};

use crate::beamforming::{multiuser_precode, multiuser_rate};
use crate::channel::{los_channel, near_field_steering, ArrayConfig, ChannelVector, PolarPoint};
use crate::codebooks::{build_dft_codebook, build_polar_codebook, DftCodebook, PolarCodebook};
use crate::error::{invalid, Result};
use crate::estimators::{
    beam_sweep, exhaustive_training, fast_from_sweep, joint_from_sweep, proposed_from_sweep, EstimatorConfig,
    LocationEstimate, SweepResult,
};
use crate::numerics::NoiseModel;

/// Location of the calibration user, `(theta, r)`.
pub const REFERENCE_USER: (f64, f64) = (0.0, 5.0);

/// How "SNR without beamforming" at the reference user maps to `sigma2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnrReference {
    /// Per-antenna channel power: `sigma2 = g(5 m)^2 / snr`.
    PerAntenna,
    /// Whole-array channel energy: `sigma2 = N g(5 m)^2 / snr`.
    TotalEnergy,
}

impl SnrReference {
    pub fn name(&self) -> &'static str {
        match self {
            SnrReference::PerAntenna => "per-antenna",
            SnrReference::TotalEnergy => "total-energy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-antenna" => Some(SnrReference::PerAntenna),
            "total-energy" => Some(SnrReference::TotalEnergy),
            _ => None,
        }
    }
}

pub fn calibrate_noise(cfg: &ArrayConfig, snr_db: f64, reference: SnrReference) -> f64 {
    let g = cfg.path_gain(REFERENCE_USER.1);
    let power = match reference {
        SnrReference::PerAntenna => g * g,
        SnrReference::TotalEnergy => cfg.antennas() as f64 * g * g,
    };
    power / libm::pow(10.0, snr_db / 10.0)
}

/// Independent uniform draws of `theta` and `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UserSampler {
    pub theta: (f64, f64),
    pub r: (f64, f64),
}

impl UserSampler {
    /// `theta` in `[-0.8, 0.8]`, `r` from `R_Fre` to `min(100 m, R_Ray)`.
    pub fn default_for(cfg: &ArrayConfig) -> Self {
        let (fresnel, rayleigh) = cfg.region_boundaries();
        Self {
            theta: (-0.8, 0.8),
            r: (fresnel, rayleigh.min(100.0)),
        }
    }

    pub fn validate(&self, cfg: &ArrayConfig) -> Result<()> {
        let (fresnel, rayleigh) = cfg.region_boundaries();
        let (t0, t1) = self.theta;
        let (r0, r1) = self.r;
        if !(-1.0 < t0 && t0 <= t1 && t1 < 1.0) {
            return Err(invalid("theta range must satisfy -1 < min <= max < 1"));
        }
        let slack = 1e-9 * fresnel;
        if !(r0 >= fresnel - slack && r0 <= r1 && r1 <= rayleigh) {
            return Err(invalid("r range must lie inside [R_Fre, R_Ray]"));
        }
        Ok(())
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> PolarPoint {
        let theta = Uniform::new_inclusive(self.theta.0, self.theta.1)
            .expect("validated theta range")
            .sample(rng);
        let r = Uniform::new_inclusive(self.r.0, self.r.1)
            .expect("validated r range")
            .sample(rng);
        PolarPoint { theta, r }
    }

    /// Variance of the uniform `theta` distribution.
    pub fn theta_variance(&self) -> f64 {
        uniform_variance(self.theta)
    }

    pub fn r_variance(&self) -> f64 {
        uniform_variance(self.r)
    }
}

fn uniform_variance((a, b): (f64, f64)) -> f64 {
    (b - a) * (b - a) / 12.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Proposed,
    Joint,
    Fast,
    Exhaustive,
    /// Beamforming with the true location; no training.
    FullCsi,
}

impl Scheme {
    pub const TRAINED: [Scheme; 4] = [Scheme::Proposed, Scheme::Joint, Scheme::Fast, Scheme::Exhaustive];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Joint => "joint",
            Scheme::Fast => "fast",
            Scheme::Exhaustive => "exhaustive",
            Scheme::FullCsi => "full-csi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "proposed" => Some(Scheme::Proposed),
            "joint" => Some(Scheme::Joint),
            "fast" => Some(Scheme::Fast),
            "exhaustive" => Some(Scheme::Exhaustive),
            "full-csi" => Some(Scheme::FullCsi),
            _ => None,
        }
    }

    fn tag(&self) -> u64 {
        match self {
            Scheme::Proposed => 1,
            Scheme::Joint => 2,
            Scheme::Fast => 3,
            Scheme::Exhaustive => 4,
            Scheme::FullCsi => 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub antennas: usize,
    pub carrier_hz: f64,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// `None` selects [`UserSampler::default_for`].
    pub sampler: Option<UserSampler>,
    /// Users per group in the multi-user experiment.
    pub users: usize,
    pub estimator: EstimatorConfig,
    pub schemes: Vec<Scheme>,
    pub snr_reference: SnrReference,
    pub polar_beta: f64,
    /// Replaces the calibrated noise power when set (e.g. `0` for noiseless).
    pub noise_override: Option<f64>,
    /// Transmit power budget of the multi-user precoder.
    pub power: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            antennas: 256,
            carrier_hz: 100e9,
            snr_db: (0..14).map(|i| 4.0 + 2.0 * i as f64).collect(),
            trials: 200,
            seed: 1,
            sampler: None,
            users: 10,
            estimator: EstimatorConfig::default(),
            schemes: Scheme::TRAINED.to_vec(),
            snr_reference: SnrReference::PerAntenna,
            polar_beta: 1.6,
            noise_override: None,
            power: 1.0,
        }
    }
}

/// Codebooks and resolved settings shared by all trials of a scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub array: ArrayConfig,
    pub sampler: UserSampler,
    pub dft: DftCodebook,
    pub polar: Option<PolarCodebook>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let array = ArrayConfig::new(config.antennas, config.carrier_hz)?;
        config.estimator.validate()?;
        if config.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if config.snr_db.is_empty() || config.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(invalid("SNR grid must be a non-empty list of finite values"));
        }
        if config.users == 0 || config.users > config.antennas {
            return Err(invalid("users per group must lie in [1, N]"));
        }
        if config.schemes.is_empty() {
            return Err(invalid("at least one scheme is required"));
        }
        if let Some(s) = config.noise_override {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(invalid("noise override must be finite and non-negative"));
            }
        }
        if !(config.power > 0.0 && config.power.is_finite()) {
            return Err(invalid("power must be positive"));
        }
        let sampler = config.sampler.unwrap_or_else(|| UserSampler::default_for(&array));
        sampler.validate(&array)?;
        let dft = build_dft_codebook(&array);
        let needs_polar = config
            .schemes
            .iter()
            .any(|s| matches!(s, Scheme::Fast | Scheme::Exhaustive));
        let polar = if needs_polar {
            Some(build_polar_codebook(
                &array,
                config.polar_beta,
                array.fresnel_distance(),
            )?)
        } else {
            None
        };
        Ok(Self {
            config,
            array,
            sampler,
            dft,
            polar,
        })
    }

    pub fn sigma2(&self, snr_index: usize) -> f64 {
        self.config
            .noise_override
            .unwrap_or_else(|| calibrate_noise(&self.array, self.config.snr_db[snr_index], self.config.snr_reference))
    }

    /// Users of `trial`; identical at every SNR point.
    pub fn users_for(&self, trial: usize, count: usize) -> Vec<PolarPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, 0));
        rng.set_stream(trial as u64);
        (0..count).map(|_| self.sampler.sample(&mut rng)).collect()
    }

    fn noise(&self, snr_index: usize, trial: usize, user: usize, purpose: u64) -> NoiseModel {
        let tag = ((snr_index as u64 + 1) << 40) ^ ((user as u64) << 8) ^ purpose;
        NoiseModel::with_stream(self.sigma2(snr_index), derive_seed(self.config.seed, tag), trial as u64)
    }

    fn trained_schemes(&self) -> impl Iterator<Item = Scheme> + '_ {
        self.config.schemes.iter().copied().filter(|s| *s != Scheme::FullCsi)
    }

    /// Train one user with every configured scheme. The DFT sweep is shared
    /// by the proposed, joint and fast schemes; each scheme draws its own
    /// second-stage noise.
    fn train_all(
        &self,
        snr_index: usize,
        trial: usize,
        user: usize,
        channel: &ChannelVector,
    ) -> Vec<(Scheme, Result<LocationEstimate>)> {
        let cfg = &self.array;
        let ec = &self.config.estimator;
        let mut sweep: Option<SweepResult> = None;
        let mut out = Vec::new();
        for scheme in self.trained_schemes() {
            let mut noise = self.noise(snr_index, trial, user, scheme.tag());
            if scheme != Scheme::Exhaustive && sweep.is_none() {
                let mut sweep_noise = self.noise(snr_index, trial, user, 0);
                sweep = Some(beam_sweep(channel, &self.dft, &mut sweep_noise));
            }
            let est = match scheme {
                Scheme::Proposed => {
                    proposed_from_sweep(cfg, channel, &self.dft, sweep.as_ref().unwrap(), &mut noise, ec)
                }
                Scheme::Joint => joint_from_sweep(cfg, channel, &self.dft, sweep.as_ref().unwrap(), &mut noise, ec),
                Scheme::Fast => fast_from_sweep(
                    cfg,
                    channel,
                    &self.dft,
                    self.polar.as_ref().unwrap(),
                    sweep.as_ref().unwrap(),
                    &mut noise,
                    ec,
                ),
                Scheme::Exhaustive => Ok(exhaustive_training(
                    cfg,
                    channel,
                    self.polar.as_ref().unwrap(),
                    &mut noise,
                )),
                Scheme::FullCsi => unreachable!(),
            };
            out.push((scheme, est));
        }
        out
    }

    /// NMSE trial: one user, every trained scheme.
    pub fn nmse_trial(&self, snr_index: usize, trial: usize) -> Vec<TrialRow> {
        let p = self.users_for(trial, 1)[0];
        let channel = los_channel(&self.array, &p);
        let snr_db = self.config.snr_db[snr_index];
        self.train_all(snr_index, trial, 0, &channel)
            .into_iter()
            .map(|(scheme, est)| TrialRow::from_estimate(trial, snr_db, scheme, 0, p, est.ok().as_ref(), None))
            .collect()
    }

    /// Single-user rate trial: every trained scheme plus full CSI.
    pub fn single_rate_trial(&self, snr_index: usize, trial: usize) -> Vec<TrialRow> {
        let p = self.users_for(trial, 1)[0];
        let channel = los_channel(&self.array, &p);
        let sigma2 = self.sigma2(snr_index);
        let snr_db = self.config.snr_db[snr_index];
        let mut rows: Vec<TrialRow> = self
            .train_all(snr_index, trial, 0, &channel)
            .into_iter()
            .map(|(scheme, est)| {
                let est = est.ok();
                let sinr = est
                    .as_ref()
                    .map(|e| channel.response(&e.codeword.weights).norm_sqr() / sigma2);
                TrialRow::from_estimate(trial, snr_db, scheme, 0, p, est.as_ref(), sinr)
            })
            .collect();
        if self.config.schemes.contains(&Scheme::FullCsi) {
            let v = near_field_steering(&self.array, &p);
            let sinr = channel.response(&v).norm_sqr() / sigma2;
            rows.push(TrialRow::full_csi(trial, snr_db, 0, p, sinr));
        }
        rows
    }

    /// Multi-user trial: `M` users trained independently, then RZF on the
    /// estimated positions. One row per user and scheme.
    pub fn multi_rate_trial(&self, snr_index: usize, trial: usize) -> Vec<TrialRow> {
        let m = self.config.users;
        let users = self.users_for(trial, m);
        let channels: Vec<ChannelVector> = users.iter().map(|p| los_channel(&self.array, p)).collect();
        let sigma2 = self.sigma2(snr_index);
        let snr_db = self.config.snr_db[snr_index];
        let power = self.config.power;

        let per_user: Vec<Vec<(Scheme, Result<LocationEstimate>)>> = channels
            .iter()
            .enumerate()
            .map(|(u, h)| self.train_all(snr_index, trial, u, h))
            .collect();
        let mut rows = Vec::new();
        for (si, scheme) in self.trained_schemes().enumerate() {
            let estimates: Vec<Option<&LocationEstimate>> = per_user.iter().map(|v| v[si].1.as_ref().ok()).collect();
            let positions: Option<Vec<PolarPoint>> = estimates
                .iter()
                .map(|e| {
                    e.map(|e| PolarPoint {
                        theta: e.theta_hat,
                        r: e.r_hat,
                    })
                })
                .collect();
            let rates = positions
                .and_then(|pos| multiuser_precode(&self.array, &pos, sigma2, power).ok())
                .map(|pm| multiuser_rate(&channels, &pm, sigma2));
            for (u, p) in users.iter().enumerate() {
                let sinr = rates.as_ref().map(|r| r.sinr[u]);
                let mut row = TrialRow::from_estimate(trial, snr_db, scheme, u, *p, estimates[u], sinr);
                if rates.is_none() {
                    row.outage = true;
                }
                rows.push(row);
            }
        }
        if self.config.schemes.contains(&Scheme::FullCsi) {
            let rates = multiuser_precode(&self.array, &users, sigma2, power)
                .ok()
                .map(|pm| multiuser_rate(&channels, &pm, sigma2));
            for (u, p) in users.iter().enumerate() {
                let mut row = TrialRow::full_csi(trial, snr_db, u, *p, rates.as_ref().map_or(0.0, |r| r.sinr[u]));
                row.outage = rates.is_none();
                rows.push(row);
            }
        }
        rows
    }

    pub fn trial(&self, kind: Experiment, snr_index: usize, trial: usize) -> Vec<TrialRow> {
        match kind {
            Experiment::Nmse => self.nmse_trial(snr_index, trial),
            Experiment::RateSingle => self.single_rate_trial(snr_index, trial),
            Experiment::RateMulti => self.multi_rate_trial(snr_index, trial),
        }
    }

    /// All `(snr index, trial)` jobs in output order.
    pub fn jobs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let trials = self.config.trials;
        (0..self.config.snr_db.len()).flat_map(move |s| (0..trials).map(move |t| (s, t)))
    }

    /// Sequential run; rows ordered by SNR, trial, then scheme.
    pub fn run(&self, kind: Experiment) -> Vec<TrialRow> {
        self.jobs().flat_map(|(s, t)| self.trial(kind, s, t)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Nmse,
    RateSingle,
    RateMulti,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Nmse => "nmse",
            Experiment::RateSingle => "rate-single",
            Experiment::RateMulti => "rate-multi",
        }
    }
}

/// SplitMix64 finalizer of `seed ^ mix(tag)`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(tag))
}

/// One scheme's outcome for one user of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub snr_db: f64,
    pub scheme: Scheme,
    pub user: usize,
    pub theta: f64,
    pub r: f64,
    pub theta_hat: f64,
    pub r_hat: f64,
    pub pilots: usize,
    /// Post-beamforming SINR (SNR for a single user), linear.
    pub sinr: Option<f64>,
    pub rate: Option<f64>,
    pub outage: bool,
}

impl TrialRow {
    fn from_estimate(
        trial: usize,
        snr_db: f64,
        scheme: Scheme,
        user: usize,
        p: PolarPoint,
        est: Option<&LocationEstimate>,
        sinr: Option<f64>,
    ) -> Self {
        Self {
            trial,
            snr_db,
            scheme,
            user,
            theta: p.theta,
            r: p.r,
            theta_hat: est.map_or(f64::NAN, |e| e.theta_hat),
            r_hat: est.map_or(f64::NAN, |e| e.r_hat),
            pilots: est.map_or(0, |e| e.pilot_count),
            sinr,
            rate: sinr.map(|x| libm::log2(1.0 + x)),
            outage: est.is_none(),
        }
    }

    fn full_csi(trial: usize, snr_db: f64, user: usize, p: PolarPoint, sinr: f64) -> Self {
        Self {
            trial,
            snr_db,
            scheme: Scheme::FullCsi,
            user,
            theta: p.theta,
            r: p.r,
            theta_hat: p.theta,
            r_hat: p.r,
            pilots: 0,
            sinr: Some(sinr),
            rate: Some(libm::log2(1.0 + sinr)),
            outage: false,
        }
    }
}

/// Per-(scheme, SNR) aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub scheme: Scheme,
    pub snr_db: f64,
    /// Rows aggregated (trials times users).
    pub samples: usize,
    pub outages: usize,
    pub nmse_theta: f64,
    pub nmse_r: f64,
    pub mean_rate: f64,
    pub mean_pilots: f64,
}

/// Aggregate rows in their given order. Records come out ordered by SNR
/// (first appearance) and then by scheme order in `schemes`.
pub fn aggregate(rows: &[TrialRow], sampler: &UserSampler, schemes: &[Scheme]) -> Vec<MetricsRecord> {
    let mut snrs: Vec<f64> = Vec::new();
    for r in rows {
        if !snrs.contains(&r.snr_db) {
            snrs.push(r.snr_db);
        }
    }
    let var_theta = sampler.theta_variance();
    let var_r = sampler.r_variance();
    let mut out = Vec::new();
    for &snr in &snrs {
        for &scheme in schemes {
            let mut samples = 0usize;
            let mut outages = 0usize;
            let (mut et, mut er, mut rate, mut pilots) = (0.0, 0.0, 0.0, 0.0);
            let mut rated = 0usize;
            for row in rows.iter().filter(|r| r.snr_db == snr && r.scheme == scheme) {
                samples += 1;
                if row.outage {
                    outages += 1;
                    continue;
                }
                et += (row.theta - row.theta_hat) * (row.theta - row.theta_hat);
                er += (row.r - row.r_hat) * (row.r - row.r_hat);
                pilots += row.pilots as f64;
                if let Some(x) = row.rate {
                    rate += x;
                    rated += 1;
                }
            }
            if samples == 0 {
                continue;
            }
            let ok = (samples - outages).max(1) as f64;
            out.push(MetricsRecord {
                scheme,
                snr_db: snr,
                samples,
                outages,
                nmse_theta: et / ok / var_theta,
                nmse_r: er / ok / var_r,
                mean_rate: if rated > 0 { rate / rated as f64 } else { f64::NAN },
                mean_pilots: pilots / ok,
            });
        }
    }
    out
}

/// Measured training cost of one scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct OverheadRow {
    pub scheme: Scheme,
    pub antennas: usize,
    pub k: usize,
    pub pilots: usize,
    /// Average polar codewords per angle.
    pub s_average: f64,
    /// Polar codewords at the angles actually visited.
    pub s_visited: usize,
    pub model_evaluations: usize,
    pub width_scans: usize,
    pub formula: String,
}

/// Train a noiseless probe user at `probe` with every trained scheme and
/// report the pilots and distance-stage work actually spent.
pub fn overhead_report(
    cfg: &ArrayConfig,
    ec: &EstimatorConfig,
    polar_beta: f64,
    probe: PolarPoint,
) -> Result<Vec<OverheadRow>> {
    ec.validate()?;
    let dft = build_dft_codebook(cfg);
    let polar = build_polar_codebook(cfg, polar_beta, cfg.fresnel_distance())?;
    let channel = los_channel(cfg, &probe);
    let mut silent = NoiseModel::silent();
    let sweep = beam_sweep(&channel, &dft, &mut silent);
    let n = cfg.antennas();
    let s = polar.average_samples();
    let mut rows = Vec::new();
    for scheme in Scheme::TRAINED {
        let est = match scheme {
            Scheme::Proposed => proposed_from_sweep(cfg, &channel, &dft, &sweep, &mut silent, ec)?,
            Scheme::Joint => joint_from_sweep(cfg, &channel, &dft, &sweep, &mut silent, ec)?,
            Scheme::Fast => fast_from_sweep(cfg, &channel, &dft, &polar, &sweep, &mut silent, ec)?,
            Scheme::Exhaustive => exhaustive_training(cfg, &channel, &polar, &mut silent),
            Scheme::FullCsi => unreachable!(),
        };
        let (s_visited, formula) = match scheme {
            Scheme::Proposed | Scheme::Joint => (0, "N+k"),
            Scheme::Fast => (est.pilot_count - n, "N+k*S"),
            _ => (polar.len(), "N*S"),
        };
        rows.push(OverheadRow {
            scheme,
            antennas: n,
            k: ec.k,
            pilots: est.pilot_count,
            s_average: s,
            s_visited,
            model_evaluations: est.model_evaluations,
            width_scans: est.width_scans,
            formula: String::from(formula),
        });
    }
    Ok(rows)
}
