//! Data-phase rates: single-user beamforming and multi-user regularized
//! zero-forcing built from location-reconstructed channels.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{los_channel, ArrayConfig, ChannelVector, PolarPoint};
use crate::error::{invalid, Error, Result};

/// `log2(1 + |h^H v|^2 / sigma2)`; `sigma2` must be positive.
pub fn single_user_rate(channel: &ChannelVector, v: &[Complex64], sigma2: f64) -> f64 {
    libm::log2(1.0 + channel.response(v).norm_sqr() / sigma2)
}

/// One beamforming column per user.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecodingMatrix {
    pub columns: Vec<Vec<Complex64>>,
    pub power: f64,
}

impl PrecodingMatrix {
    pub fn total_power(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| c.iter().map(|x| x.norm_sqr()).sum::<f64>())
            .sum()
    }
}

/// `V = H (H^H H + M sigma2 / P I)^{-1}` scaled to total power `P`. Fails
/// when a Cholesky pivot of the regularized Gram matrix falls below `1e-12`
/// of its largest diagonal entry.
pub fn rzf_precode(channels: &[Vec<Complex64>], sigma2: f64, power: f64) -> Result<PrecodingMatrix> {
    let m = channels.len();
    if m == 0 {
        return Err(invalid("at least one user is required"));
    }
    let n = channels[0].len();
    if m > n || channels.iter().any(|h| h.len() != n) {
        return Err(invalid("need M <= N channels of equal length"));
    }
    if !(power > 0.0 && sigma2 >= 0.0) {
        return Err(invalid("power must be positive and noise non-negative"));
    }
    let h = DMatrix::from_fn(n, m, |i, u| channels[u][i]);
    let mut gram = h.adjoint() * &h;
    let reg = m as f64 * sigma2 / power;
    for i in 0..m {
        gram[(i, i)] += reg;
    }
    let scale = (0..m).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    let chol = gram.cholesky().ok_or(Error::SingularChannel)?;
    let l = chol.l_dirty();
    if (0..m).any(|i| !(l[(i, i)].norm_sqr() > 1e-12 * scale)) {
        return Err(Error::SingularChannel);
    }
    let v = h * chol.inverse();
    let total = v.norm_squared();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::SingularChannel);
    }
    let v = v * Complex64::new(libm::sqrt(power / total), 0.0);
    let columns = (0..m).map(|u| v.column(u).iter().copied().collect()).collect();
    Ok(PrecodingMatrix { columns, power })
}

/// RZF from channels reconstructed at the given (estimated or true) positions.
pub fn multiuser_precode(
    cfg: &ArrayConfig,
    positions: &[PolarPoint],
    sigma2: f64,
    power: f64,
) -> Result<PrecodingMatrix> {
    let channels: Vec<Vec<Complex64>> = positions.iter().map(|p| los_channel(cfg, p).h).collect();
    rzf_precode(&channels, sigma2, power)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiUserRates {
    pub sinr: Vec<f64>,
    pub rates: Vec<f64>,
    pub average: f64,
}

/// `R_u = log2(1 + |h_u^H v_u|^2 / (sum_{s != u} |h_u^H v_s|^2 + sigma2))`
/// with the true channels.
pub fn multiuser_rate(channels: &[ChannelVector], precoder: &PrecodingMatrix, sigma2: f64) -> MultiUserRates {
    let mut sinr = Vec::with_capacity(channels.len());
    let mut rates = Vec::with_capacity(channels.len());
    for (u, h) in channels.iter().enumerate() {
        let mut signal = 0.0;
        let mut interference = 0.0;
        for (s, v) in precoder.columns.iter().enumerate() {
            let p = h.response(v).norm_sqr();
            if s == u {
                signal = p;
            } else {
                interference += p;
            }
        }
        let ratio = signal / (interference + sigma2);
        sinr.push(ratio);
        rates.push(libm::log2(1.0 + ratio));
    }
    let average = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
    MultiUserRates { sinr, rates, average }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    use crate::channel::{hermitian_dot, near_field_steering, vector_norm};

    fn users() -> Vec<PolarPoint> {
        [(-0.5, 3.0), (-0.1, 6.0), (0.2, 2.5), (0.6, 9.0)]
            .iter()
            .map(|&(t, r)| PolarPoint::new(t, r).unwrap())
            .collect()
    }

    #[test]
    fn full_csi_single_user_rate_is_matched_filter() {
        let cfg = ArrayConfig::new(64, 100e9).unwrap();
        let p = PolarPoint::new(0.3, 4.0).unwrap();
        let h = los_channel(&cfg, &p);
        let sigma2 = 1e-9;
        let r = single_user_rate(&h, &near_field_steering(&cfg, &p), sigma2);
        let g = cfg.path_gain(4.0);
        assert!((r - (1.0 + 64.0 * g * g / sigma2).log2()).abs() < 1e-9);
        let null = vec![Complex64::new(0.0, 0.0); 64];
        assert_eq!(single_user_rate(&h, &null, sigma2), 0.0);
    }

    #[test]
    fn single_user_rzf_is_matched_direction() {
        let cfg = ArrayConfig::new(32, 100e9).unwrap();
        let p = PolarPoint::new(-0.2, 2.0).unwrap();
        let pm = multiuser_precode(&cfg, &[p], 1e-8, 1.0).unwrap();
        let b = near_field_steering(&cfg, &p);
        let v = &pm.columns[0];
        assert!((vector_norm(v) - 1.0).abs() < 1e-12);
        assert!((hermitian_dot(&b, v).norm() - 1.0).abs() < 1e-10);
        let h = los_channel(&cfg, &p);
        let multi = multiuser_rate(core::slice::from_ref(&h), &pm, 1e-8);
        assert!((multi.average - single_user_rate(&h, v, 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_limit_suppresses_interference() {
        let cfg = ArrayConfig::new(64, 100e9).unwrap();
        let us = users();
        let pm = multiuser_precode(&cfg, &us, 1e-20, 1.0).unwrap();
        assert!((pm.total_power() - 1.0).abs() < 1e-10);
        for (u, p) in us.iter().enumerate() {
            let h = los_channel(&cfg, p);
            let own = h.response(&pm.columns[u]).norm();
            for (s, v) in pm.columns.iter().enumerate() {
                if s != u {
                    assert!(h.response(v).norm() / own <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn duplicate_positions_without_regularizer_are_singular() {
        let cfg = ArrayConfig::new(16, 100e9).unwrap();
        let p = PolarPoint::new(0.1, 1.0).unwrap();
        assert_eq!(multiuser_precode(&cfg, &[p, p], 0.0, 1.0), Err(Error::SingularChannel));
    }

    #[test]
    fn zero_column_has_zero_rate() {
        let cfg = ArrayConfig::new(16, 100e9).unwrap();
        let us = users();
        let mut pm = multiuser_precode(&cfg, &us[..2], 1e-9, 1.0).unwrap();
        pm.columns[1].iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        let hs: Vec<_> = us[..2].iter().map(|p| los_channel(&cfg, p)).collect();
        assert_eq!(multiuser_rate(&hs, &pm, 1e-9).rates[1], 0.0);
    }
}
