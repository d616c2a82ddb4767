//! End-to-end behaviour of the training schemes against brute-force and
//! noiseless oracles.

use nfbeam_core::beampattern::exact_gain;
use nfbeam_core::channel::los_channel;
use nfbeam_core::codebooks::{build_dft_codebook, build_polar_codebook, nearest_dft_index, ring_distances};
use nfbeam_core::estimators::{
    beam_sweep, cluster_indices, estimate_angle, exhaustive_training, fast_training, joint_training, proposed_training,
};
use nfbeam_core::sim::{aggregate, UserSampler};
use nfbeam_core::{
    ArrayConfig, ChannelVector, EstimatorConfig, Experiment, NoiseModel, PolarPoint, Scenario, ScenarioConfig, Scheme,
};

fn array(n: usize) -> ArrayConfig {
    ArrayConfig::new(n, 100e9).unwrap()
}

fn sweep_magnitudes(cfg: &ArrayConfig, channel: &ChannelVector) -> Vec<f64> {
    beam_sweep(channel, &build_dft_codebook(cfg), &mut NoiseModel::silent()).magnitudes()
}

#[test]
fn near_field_user_gives_a_single_cluster_over_the_main_lobe() {
    let cfg = array(512);
    let dft = build_dft_codebook(&cfg);
    let p = PolarPoint::new(0.0, 8.0).unwrap();
    let mags = sweep_magnitudes(&cfg, &los_channel(&cfg, &p));
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let c = cluster_indices(&mags, 0.65 * peak, 8).unwrap();
    assert_eq!(c.clusters.len(), 1);
    let best = c.best();
    let (lo, hi) = (dft.angle_grid[best[0]], dft.angle_grid[best[best.len() - 1]]);
    assert!(lo < -0.03 && hi > 0.03, "{lo} {hi}");
}

#[test]
fn two_separated_users_give_two_clusters_and_the_stronger_wins() {
    let cfg = array(512);
    let dft = build_dft_codebook(&cfg);
    let strong = los_channel(&cfg, &PolarPoint::new(-0.4, 8.0).unwrap());
    let weak = los_channel(&cfg, &PolarPoint::new(0.4, 12.0).unwrap());
    let mixed = ChannelVector {
        h: strong.h.iter().zip(&weak.h).map(|(a, b)| a + b).collect(),
        gain: strong.gain,
        r: strong.r,
    };
    let mags = sweep_magnitudes(&cfg, &mixed);
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let c = cluster_indices(&mags, 0.65 * peak, 8).unwrap();
    assert_eq!(c.clusters.len(), 2);
    let best = c.best();
    let centre = 0.5 * (dft.angle_grid[best[0]] + dft.angle_grid[best[best.len() - 1]]);
    assert!((centre + 0.4).abs() < 4.0 / 512.0, "{centre}");
}

#[test]
fn an_isolated_spike_moves_the_unclustered_estimate_only() {
    let cfg = array(256);
    let dft = build_dft_codebook(&cfg);
    let ec = EstimatorConfig::default();
    let p = PolarPoint::new(0.1, 6.0).unwrap();
    let clean = sweep_magnitudes(&cfg, &los_channel(&cfg, &p));
    let peak = clean.iter().copied().fold(0.0, f64::max);
    let before_p = estimate_angle(&clean, &dft.angle_grid, &ec, true).unwrap();
    let before_j = estimate_angle(&clean, &dft.angle_grid, &ec, false).unwrap();
    assert_eq!(before_p.theta_hat, before_j.theta_hat);

    let mut spiked = clean.clone();
    let far = nearest_dft_index(256, -0.6);
    assert!(before_p.main_set.iter().all(|&i| i.abs_diff(far) > ec.cluster_gap));
    spiked[far] = 0.8 * peak;
    let after_p = estimate_angle(&spiked, &dft.angle_grid, &ec, true).unwrap();
    let after_j = estimate_angle(&spiked, &dft.angle_grid, &ec, false).unwrap();
    assert_eq!(after_p, before_p);
    assert!((after_j.theta_hat - before_j.theta_hat).abs() > 0.1);
}

#[test]
fn single_candidate_is_the_grid_angle_nearest_the_estimate() {
    let cfg = array(256);
    let dft = build_dft_codebook(&cfg);
    let ec = EstimatorConfig {
        k: 1,
        ..EstimatorConfig::default()
    };
    for &(theta, r) in &[(0.23, 5.0), (-0.51, 9.0), (0.0, 4.0)] {
        let mags = sweep_magnitudes(&cfg, &los_channel(&cfg, &PolarPoint::new(theta, r).unwrap()));
        let a = estimate_angle(&mags, &dft.angle_grid, &ec, true).unwrap();
        let nearest = dft
            .angle_grid
            .iter()
            .map(|g| (g - a.theta_hat).abs())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(a.candidates.len(), 1);
        assert_eq!((dft.angle_grid[a.candidates[0]] - a.theta_hat).abs(), nearest);
    }
}

#[test]
fn noiseless_proposed_training_locates_an_on_grid_user() {
    let cfg = array(512);
    let dft = build_dft_codebook(&cfg);
    let theta = dft.angle_grid[nearest_dft_index(512, 0.3)];
    let p = PolarPoint::new(theta, 20.0).unwrap();
    let est = proposed_training(
        &cfg,
        &los_channel(&cfg, &p),
        &dft,
        &mut NoiseModel::silent(),
        &EstimatorConfig::default(),
    )
    .unwrap();
    assert!((est.theta_hat - theta).abs() <= 4.0 / 512.0, "{}", est.theta_hat);
    assert!((est.r_hat - 20.0).abs() / 20.0 <= 0.15, "{}", est.r_hat);
    assert_eq!(est.pilot_count, 512 + 3);
}

#[test]
fn without_noise_the_joint_angle_equals_the_proposed_angle() {
    let cfg = array(256);
    let dft = build_dft_codebook(&cfg);
    let ec = EstimatorConfig::default();
    for &(theta, r) in &[(0.0, 5.0), (0.44, 3.3), (-0.7, 12.0)] {
        let ch = los_channel(&cfg, &PolarPoint::new(theta, r).unwrap());
        let mags = sweep_magnitudes(&cfg, &ch);
        let a = estimate_angle(&mags, &dft.angle_grid, &ec, true).unwrap();
        let b = estimate_angle(&mags, &dft.angle_grid, &ec, false).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
        let j = joint_training(&cfg, &ch, &dft, &mut NoiseModel::silent(), &ec).unwrap();
        assert_eq!(j.pilot_count, 256 + 3);
        assert_eq!(j.model_evaluations, 3 * ec.z_mu_size);
    }
}

#[test]
fn fast_scheme_returns_the_ring_a_user_sits_on() {
    let cfg = array(256);
    let dft = build_dft_codebook(&cfg);
    let polar = build_polar_codebook(&cfg, 1.6, cfg.fresnel_distance()).unwrap();
    let ec = EstimatorConfig::default();
    let i = nearest_dft_index(256, 0.2);
    let theta = dft.angle_grid[i];
    let rings = ring_distances(polar.z_delta, theta, polar.r_min, polar.r_max);
    assert!(rings.len() >= 2);
    for &r in &rings {
        let ch = los_channel(&cfg, &PolarPoint::new(theta, r).unwrap());
        let est = fast_training(&cfg, &ch, &dft, &polar, &mut NoiseModel::silent(), &ec).unwrap();
        assert_eq!((est.theta_hat, est.r_hat), (theta, r));
    }
    // Between two rings: the strongest visited entry is returned, and when
    // the user's own angle was visited it is one of the two adjacent rings.
    // The angle stage can miss by more than a bin here, in which case the
    // far-field entry of a neighbouring angle may win.
    let mut on_angle = 0;
    for pair in rings.windows(2) {
        for t in 1..8 {
            let r = pair[1] + (pair[0] - pair[1]) * t as f64 / 8.0;
            let ch = los_channel(&cfg, &PolarPoint::new(theta, r).unwrap());
            let est = fast_training(&cfg, &ch, &dft, &polar, &mut NoiseModel::silent(), &ec).unwrap();
            let best = est.candidates.iter().map(|c| c.power).fold(0.0, f64::max);
            assert_eq!(ch.response(&est.codeword.weights).norm_sqr(), best);
            if est.candidates.iter().any(|c| c.theta == theta) {
                on_angle += 1;
                assert!(est.r_hat == pair[0] || est.r_hat == pair[1], "{r}: {}", est.r_hat);
            }
        }
    }
    assert!(on_angle > 0);
}

#[test]
fn exhaustive_search_returns_the_best_codeword() {
    let cfg = array(128);
    let polar = build_polar_codebook(&cfg, 1.6, cfg.fresnel_distance()).unwrap();
    for &(theta, r) in &[(0.05, 2.0), (-0.33, 4.5), (0.71, 10.0)] {
        let p = PolarPoint::new(theta, r).unwrap();
        let ch = los_channel(&cfg, &p);
        let est = exhaustive_training(&cfg, &ch, &polar, &mut NoiseModel::silent());
        let gain = |w: &[num_complex::Complex64]| ch.response(w).norm();
        let best = polar.entries.iter().map(|c| gain(&c.weights)).fold(0.0, f64::max);
        assert_eq!(gain(&est.codeword.weights), best);
        assert_eq!(est.pilot_count, polar.len());
        // Cross-check the brute-force table against the DFT pattern helper
        // for far-field entries.
        for c in polar.entries.iter().filter(|c| c.label.r().is_infinite()) {
            let expected = (128f64).sqrt() * cfg.path_gain(r) * exact_gain(&cfg, &p, c.label.theta());
            assert!((gain(&c.weights) - expected).abs() <= 1e-9 * expected + 1e-18);
        }
    }
}

#[test]
fn codebook_entry_users_are_recovered_exactly() {
    let cfg = array(128);
    let polar = build_polar_codebook(&cfg, 1.6, cfg.fresnel_distance()).unwrap();
    for c in polar.entries.iter().filter(|c| c.label.r().is_finite()).step_by(37) {
        let p = PolarPoint::new(c.label.theta(), c.label.r()).unwrap();
        let est = exhaustive_training(&cfg, &los_channel(&cfg, &p), &polar, &mut NoiseModel::silent());
        assert_eq!(est.codeword.label, c.label);
    }
}

fn rate_scenario(k: usize) -> Scenario {
    Scenario::new(ScenarioConfig {
        snr_db: vec![6.0],
        trials: 300,
        schemes: vec![Scheme::Proposed, Scheme::FullCsi],
        estimator: EstimatorConfig {
            k,
            ..EstimatorConfig::default()
        },
        ..ScenarioConfig::default()
    })
    .unwrap()
}

#[test]
fn three_candidates_beat_one_at_low_snr() {
    let mean = |k| {
        let sc = rate_scenario(k);
        let rows = sc.run(Experiment::RateSingle);
        aggregate(&rows, &sc.sampler, &[Scheme::Proposed])[0].mean_rate
    };
    let (one, three) = (mean(1), mean(3));
    assert!(three > one, "k=3 {three} vs k=1 {one}");
}

#[test]
fn full_csi_bounds_every_single_user_rate() {
    let sc = Scenario::new(ScenarioConfig {
        snr_db: vec![4.0, 16.0, 30.0],
        trials: 40,
        schemes: vec![
            Scheme::Proposed,
            Scheme::Joint,
            Scheme::Fast,
            Scheme::Exhaustive,
            Scheme::FullCsi,
        ],
        ..ScenarioConfig::default()
    })
    .unwrap();
    let rows = sc.run(Experiment::RateSingle);
    for chunk in rows.chunk_by(|a, b| a.trial == b.trial && a.snr_db == b.snr_db) {
        let full = chunk
            .iter()
            .find(|r| r.scheme == Scheme::FullCsi)
            .unwrap()
            .rate
            .unwrap();
        for r in chunk {
            assert!(r.rate.unwrap_or(0.0) <= full, "{r:?}");
        }
    }
}

#[test]
fn noiseless_angle_error_stays_within_two_bins() {
    let sc = Scenario::new(ScenarioConfig {
        snr_db: vec![0.0],
        trials: 150,
        noise_override: Some(0.0),
        schemes: vec![Scheme::Proposed],
        ..ScenarioConfig::default()
    })
    .unwrap();
    let rows = sc.run(Experiment::Nmse);
    let m = &aggregate(&rows, &sc.sampler, &[Scheme::Proposed])[0];
    let bound = (4.0f64 / 256.0).powi(2) / sc.sampler.theta_variance();
    assert_eq!(m.outages, 0);
    assert!(m.nmse_theta <= bound, "{} > {bound}", m.nmse_theta);
}

#[test]
fn sampled_users_respect_the_configured_region() {
    let cfg = array(256);
    let s = UserSampler::default_for(&cfg);
    let sc = Scenario::new(ScenarioConfig::default()).unwrap();
    for t in 0..200 {
        for p in sc.users_for(t, 10) {
            assert!(p.r >= cfg.fresnel_distance() && p.r <= s.r.1.min(cfg.rayleigh_distance()));
            assert!(p.theta.abs() <= 0.8);
        }
    }
}
