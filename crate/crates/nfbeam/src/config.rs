//! Flat `key = value` configuration files.
//!
//! Blank lines and text after `#` are ignored. Every key must be known;
//! later assignments win, so command-line overrides are applied after the
//! file.

use std::path::Path;
use std::str::FromStr;

use nfbeam_core::estimators::DistanceRule;
use nfbeam_core::sim::{SnrReference, UserSampler};
use nfbeam_core::{ArrayConfig, ScenarioConfig, Scheme};

use crate::error::CliError;

/// Every accepted key, in the order the resolved config is printed.
pub const KEYS: &[&str] = &[
    "antennas",
    "carrier_hz",
    "snr_db",
    "snr_reference",
    "trials",
    "seed",
    "workers",
    "theta_min",
    "theta_max",
    "r_min",
    "r_max",
    "users",
    "power",
    "noise_override",
    "schemes",
    "k",
    "cluster_gap",
    "rho2_fraction",
    "distance_rule",
    "z_mu_size",
    "polar_beta",
    "theta",
    "r",
];

/// Everything a subcommand may need.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    /// Worker threads; `0` lets the pool decide.
    pub workers: usize,
    /// Single user for `pattern`, `train` and `overhead`.
    pub theta: f64,
    pub r: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            theta_min: None,
            theta_max: None,
            r_min: None,
            r_max: None,
            workers: 0,
            theta: 0.0,
            r: 8.0,
        }
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse '{value}'")))
}

/// `4:30:2` (inclusive range) or a comma-separated list.
fn snr_grid(value: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let start: f64 = number("snr_db", parts[0])?;
        let stop: f64 = number("snr_db", parts[1])?;
        let step: f64 = number("snr_db", parts[2])?;
        if !(step > 0.0) || stop < start {
            return Err(CliError::Config(
                "snr_db: range needs start <= stop and step > 0".into(),
            ));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    value.split(',').map(|v| number("snr_db", v.trim())).collect()
}

fn schemes(value: &str) -> Result<Vec<Scheme>, CliError> {
    value
        .split(',')
        .map(|s| {
            Scheme::parse(s.trim()).ok_or_else(|| CliError::Config(format!("schemes: unknown scheme '{}'", s.trim())))
        })
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        let sc = &mut self.scenario;
        match key {
            "antennas" | "N" => sc.antennas = number(key, value)?,
            "carrier_hz" | "fc" => sc.carrier_hz = number(key, value)?,
            "snr_db" => sc.snr_db = snr_grid(value)?,
            "snr_reference" => {
                sc.snr_reference = SnrReference::parse(value)
                    .ok_or_else(|| CliError::Config(format!("snr_reference: unknown value '{value}'")))?
            }
            "trials" => sc.trials = number(key, value)?,
            "seed" => sc.seed = number(key, value)?,
            "workers" => self.workers = number(key, value)?,
            "theta_min" => self.theta_min = Some(number(key, value)?),
            "theta_max" => self.theta_max = Some(number(key, value)?),
            "r_min" => self.r_min = Some(number(key, value)?),
            "r_max" => self.r_max = Some(number(key, value)?),
            "users" => sc.users = number(key, value)?,
            "power" => sc.power = number(key, value)?,
            "noise_override" => {
                sc.noise_override = match value {
                    "none" | "" => None,
                    v => Some(number(key, v)?),
                }
            }
            "schemes" => sc.schemes = schemes(value)?,
            "k" => sc.estimator.k = number(key, value)?,
            "cluster_gap" | "L" => sc.estimator.cluster_gap = number(key, value)?,
            "rho2_fraction" => sc.estimator.rho2_fraction = number(key, value)?,
            "distance_rule" => {
                sc.estimator.distance_rule = match value {
                    "width-inversion" => DistanceRule::WidthInversion,
                    "literal-squared" => DistanceRule::LiteralSquared,
                    _ => return Err(CliError::Config(format!("distance_rule: unknown value '{value}'"))),
                }
            }
            "z_mu_size" => sc.estimator.z_mu_size = number(key, value)?,
            "polar_beta" => sc.polar_beta = number(key, value)?,
            "theta" => self.theta = number(key, value)?,
            "r" => self.r = number(key, value)?,
            _ => return Err(CliError::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Apply the assignments in `text`; `origin` names the source in errors.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected key = value", i + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| CliError::Config(format!("{origin}:{}: {}", i + 1, e)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file '{}': {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// `KEY=VALUE` override from the command line.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not KEY=VALUE")))?;
        self.set(key.trim(), value)
    }

    /// Scenario with the sampler bounds resolved against the array.
    pub fn resolved_scenario(&self) -> Result<ScenarioConfig, CliError> {
        let mut sc = self.scenario.clone();
        let array = ArrayConfig::new(sc.antennas, sc.carrier_hz)?;
        let default = UserSampler::default_for(&array);
        sc.sampler = Some(UserSampler {
            theta: (
                self.theta_min.unwrap_or(default.theta.0),
                self.theta_max.unwrap_or(default.theta.1),
            ),
            r: (self.r_min.unwrap_or(default.r.0), self.r_max.unwrap_or(default.r.1)),
        });
        Ok(sc)
    }

    /// `(key, value)` pairs of the effective configuration.
    pub fn entries(&self) -> Vec<(String, String)> {
        let sc = self.resolved_scenario().unwrap_or_else(|_| self.scenario.clone());
        let sampler = sc.sampler;
        let ec = &sc.estimator;
        let join = |xs: Vec<String>| xs.join(",");
        let opt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), |v| v.to_string());
        let mut out = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push("antennas", sc.antennas.to_string());
        push("carrier_hz", sc.carrier_hz.to_string());
        push("snr_db", join(sc.snr_db.iter().map(f64::to_string).collect()));
        push("snr_reference", sc.snr_reference.name().to_string());
        push("trials", sc.trials.to_string());
        push("seed", sc.seed.to_string());
        push("workers", self.workers.to_string());
        push("theta_min", opt(sampler.map(|s| s.theta.0)));
        push("theta_max", opt(sampler.map(|s| s.theta.1)));
        push("r_min", opt(sampler.map(|s| s.r.0)));
        push("r_max", opt(sampler.map(|s| s.r.1)));
        push("users", sc.users.to_string());
        push("power", sc.power.to_string());
        push("noise_override", opt(sc.noise_override));
        push(
            "schemes",
            join(sc.schemes.iter().map(|s| s.name().to_string()).collect()),
        );
        push("k", ec.k.to_string());
        push("cluster_gap", ec.cluster_gap.to_string());
        push("rho2_fraction", ec.rho2_fraction.to_string());
        push(
            "distance_rule",
            match ec.distance_rule {
                DistanceRule::WidthInversion => "width-inversion",
                DistanceRule::LiteralSquared => "literal-squared",
            }
            .to_string(),
        );
        push("z_mu_size", ec.z_mu_size.to_string());
        push("polar_beta", sc.polar_beta.to_string());
        push("theta", self.theta.to_string());
        push("r", self.r.to_string());
        out
    }
}

/// Render `entries` as a config file that parses back to the same values.
pub fn render(entries: &[(String, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_ranges_and_lists() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# demo\nantennas = 128  # small\nsnr_db = 4:10:2\nschemes = proposed, fast\n\nk=1\n",
            "demo",
        )
        .unwrap();
        assert_eq!(c.scenario.antennas, 128);
        assert_eq!(c.scenario.snr_db, [4.0, 6.0, 8.0, 10.0]);
        assert_eq!(c.scenario.schemes, [Scheme::Proposed, Scheme::Fast]);
        assert_eq!(c.scenario.estimator.k, 1);
        c.apply_assignment("snr_db=1,2.5").unwrap();
        assert_eq!(c.scenario.snr_db, [1.0, 2.5]);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut c = RunConfig::default();
        let err = c.apply_text("antennas = 64\nbogus_key = 3\n", "f.cfg").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus_key") && msg.contains("f.cfg:2"), "{msg}");
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut c = RunConfig::default();
        assert!(c.set("trials", "many").is_err());
        assert!(c.set("schemes", "proposed,psychic").is_err());
        assert!(c.set("snr_db", "10:4:2").is_err());
        assert!(c.apply_text("no equals sign", "x").is_err());
    }

    #[test]
    fn rendered_entries_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text(
            "antennas = 64\nseed = 9\nrho2_fraction = 0.7\nnoise_override = 0\n",
            "x",
        )
        .unwrap();
        let text = render(&c.entries());
        let mut back = RunConfig::default();
        back.apply_text(&text, "rendered").unwrap();
        assert_eq!(back.entries(), c.entries());
    }
}
