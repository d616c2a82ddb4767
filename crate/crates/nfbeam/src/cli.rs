//! The `nfbeam` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nfbeam_core::beampattern::{
    closed_form_width, continuous_width, exact_gain, measure_width, normalized_closed_form, normalized_pattern,
    raw_pattern, taylor_gain, AlphaBeta,
};
use nfbeam_core::codebooks::{build_dft_codebook, build_polar_codebook};
use nfbeam_core::sim::{overhead_report, MetricsRecord, UserSampler};
use nfbeam_core::{ArrayConfig, CodewordLabel, Experiment, PolarPoint, Scenario, Scheme};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, line_chart, metrics_table, real, trial_table, write_csv, write_text, Series, Table};
use crate::runner::{run_experiment, run_trials};

#[derive(Debug, Parser)]
#[command(
    name = "nfbeam",
    version,
    about = "Near-field beam training experiments with a DFT codebook"
)]
pub struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory (default: $NFBEAM_OUT_DIR, then the current directory).
    #[arg(long, global = true, env = "NFBEAM_OUT_DIR", value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override any config key; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Antenna count.
    #[arg(long = "N", global = true, allow_hyphen_values = true)]
    pub antennas: Option<String>,
    /// Carrier frequency in Hz.
    #[arg(long = "fc", global = true, allow_hyphen_values = true)]
    pub carrier: Option<String>,
    /// Spatial angle of the single user.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Distance of the single user in metres.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub r: Option<String>,
    /// Refinement candidates.
    #[arg(long, global = true)]
    pub k: Option<String>,
    #[arg(long, global = true)]
    pub trials: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Reference SNR grid, `start:stop:step` or a comma list (dB).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub snr: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<String>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Raw, normalized and closed-form beam pattern of one user.
    Pattern,
    /// Train one user with every scheme.
    Train,
    /// Angle and distance NMSE versus reference SNR.
    Nmse,
    /// Single-user achievable rate versus reference SNR.
    RateSingle,
    /// Multi-user achievable rate versus reference SNR.
    RateMulti,
    /// Pilot and distance-stage cost of every scheme.
    Overhead,
    /// DFT and polar codebook labels.
    CodebookDump,
}

impl Cli {
    /// Config file first, then `--set`, then the dedicated flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut rc = RunConfig::default();
        if let Some(path) = &self.config {
            rc.apply_file(path)?;
        }
        for a in &self.set {
            rc.apply_assignment(a)?;
        }
        let flags = [
            ("antennas", &self.antennas),
            ("carrier_hz", &self.carrier),
            ("theta", &self.theta),
            ("r", &self.r),
            ("k", &self.k),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("snr_db", &self.snr),
            ("workers", &self.workers),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                rc.set(key, v)?;
            }
        }
        Ok(rc)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Parse `args` (including the program name) and run. Returns the text meant
/// for standard output.
pub fn run<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    execute(&cli)
}

pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let rc = cli.resolve()?;
    let out = ensure_dir(&cli.out_dir())?;
    match cli.command {
        Command::Pattern => pattern(&rc, &out, cli.svg),
        Command::Train => train(&rc, &out),
        Command::Nmse => experiment(&rc, &out, cli.svg, Experiment::Nmse),
        Command::RateSingle => experiment(&rc, &out, cli.svg, Experiment::RateSingle),
        Command::RateMulti => experiment(&rc, &out, cli.svg, Experiment::RateMulti),
        Command::Overhead => overhead(&rc, &out),
        Command::CodebookDump => codebook_dump(&rc, &out),
    }
}

fn header(rc: &RunConfig, command: &str) -> Vec<(String, String)> {
    let mut h = vec![("command".to_string(), command.to_string())];
    // The worker count does not change any result, and leaving it out keeps
    // artifacts byte-identical across thread counts.
    h.extend(rc.entries().into_iter().filter(|(k, _)| k != "workers"));
    h
}

fn single_user(rc: &RunConfig, array: &ArrayConfig) -> Result<PolarPoint, CliError> {
    let p = PolarPoint::new(rc.theta, rc.r)?;
    let (fresnel, rayleigh) = array.region_boundaries();
    if p.theta.abs() >= 1.0 {
        return Err(CliError::Config("theta must lie strictly inside (-1, 1)".into()));
    }
    if !(p.r > 0.0) {
        return Err(CliError::Config(format!(
            "r must be positive (R_Fre = {fresnel}, R_Ray = {rayleigh})"
        )));
    }
    Ok(p)
}

fn pattern(rc: &RunConfig, out: &Path, svg: bool) -> Result<String, CliError> {
    let sc = &rc.scenario;
    let array = ArrayConfig::new(sc.antennas, sc.carrier_hz)?;
    let p = single_user(rc, &array)?;
    let dft = build_dft_codebook(&array);
    let raw = raw_pattern(&array, &p, &dft);
    let norm = normalized_pattern(&array, &p, &dft);
    let mut table = Table {
        columns: vec![
            "index",
            "phi",
            "raw_gain",
            "normalized_gain",
            "taylor_gain",
            "closed_form_normalized",
        ],
        rows: Vec::new(),
    };
    let mut closed = Vec::new();
    for (i, &phi) in dft.angle_grid.iter().enumerate() {
        let cf = normalized_closed_form(&AlphaBeta::new(&array, &p, phi)).ok();
        closed.push((phi, cf.unwrap_or(f64::NAN)));
        table.rows.push(vec![
            i.to_string(),
            real(phi),
            real(raw.gains[i]),
            real(norm.gains[i]),
            real(taylor_gain(&array, &p, phi)),
            cf.map_or_else(String::new, real),
        ]);
    }
    write_csv(&out.join("pattern.csv"), &header(rc, "pattern"), &table)?;

    let alpha = AlphaBeta::new(&array, &p, p.theta).alpha;
    let mut s = String::new();
    let _ = writeln!(s, "alpha={}", real(alpha));
    let _ = writeln!(s, "central_gain={}", real(exact_gain(&array, &p, p.theta)));
    let _ = writeln!(s, "central_gain_asymptotic={}", real(1.0 / (2.0 * alpha.sqrt())));
    match measure_width(&norm, 0.5, true) {
        Ok(set) => {
            let _ = writeln!(s, "width_grid={}", real(set.width));
        }
        Err(e) => {
            let _ = writeln!(s, "width_grid=none ({e})");
        }
    }
    if let Ok(w) = continuous_width(&norm, 0.5) {
        let _ = writeln!(s, "width_interpolated={}", real(w));
    }
    let _ = writeln!(s, "width_closed_form={}", real(closed_form_width(&array, &p)));
    if svg {
        let series = [
            Series {
                name: "DFT sweep".into(),
                points: dft.angle_grid.iter().copied().zip(norm.gains.iter().copied()).collect(),
            },
            Series {
                name: "closed form".into(),
                points: closed,
            },
        ];
        let chart = line_chart(
            &format!("Normalized beam pattern, theta={}, r={} m", p.theta, p.r),
            "phi",
            "normalized gain",
            &series,
            false,
        );
        write_text(&out.join("pattern.svg"), &chart)?;
    }
    Ok(s)
}

fn with_full_csi(rc: &RunConfig) -> RunConfig {
    let mut rc = rc.clone();
    if !rc.scenario.schemes.contains(&Scheme::FullCsi) {
        rc.scenario.schemes.push(Scheme::FullCsi);
    }
    rc
}

fn train(rc: &RunConfig, out: &Path) -> Result<String, CliError> {
    let mut rc = with_full_csi(rc);
    rc.scenario.trials = 1;
    rc.theta_min = Some(rc.theta);
    rc.theta_max = Some(rc.theta);
    rc.r_min = Some(rc.r);
    rc.r_max = Some(rc.r);
    let mut sc = rc.resolved_scenario()?;
    sc.sampler = Some(UserSampler {
        theta: (rc.theta, rc.theta),
        r: (rc.r, rc.r),
    });
    let scenario = Scenario::new(sc)?;
    let rows = run_trials(&scenario, Experiment::RateSingle, rc.workers)?;
    write_csv(&out.join("train.csv"), &header(&rc, "train"), &trial_table(&rows))?;
    let mut s = String::new();
    for r in &rows {
        let _ = writeln!(
            s,
            "snr_db={} scheme={} theta_hat={} r_hat={} pilots={} rate={}",
            r.snr_db,
            r.scheme.name(),
            real(r.theta_hat),
            real(r.r_hat),
            r.pilots,
            r.rate.map_or_else(|| "none".into(), real)
        );
    }
    Ok(s)
}

fn summary(records: &[MetricsRecord], kind: Experiment) -> String {
    let mut s = String::new();
    for m in records {
        match kind {
            Experiment::Nmse => {
                let _ = writeln!(
                    s,
                    "{:>10} snr_db={:>5} nmse_theta={:.4e} nmse_r={:.4e} outages={}",
                    m.scheme.name(),
                    m.snr_db,
                    m.nmse_theta,
                    m.nmse_r,
                    m.outages
                );
            }
            _ => {
                let _ = writeln!(
                    s,
                    "{:>10} snr_db={:>5} mean_rate={:.4} outages={}",
                    m.scheme.name(),
                    m.snr_db,
                    m.mean_rate,
                    m.outages
                );
            }
        }
    }
    s
}

fn curves(records: &[MetricsRecord], metric: fn(&MetricsRecord) -> f64) -> Vec<Series> {
    let mut series: Vec<Series> = Vec::new();
    for m in records {
        let name = m.scheme.name();
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((m.snr_db, metric(m))),
            None => series.push(Series {
                name: name.to_string(),
                points: vec![(m.snr_db, metric(m))],
            }),
        }
    }
    series
}

fn experiment(rc: &RunConfig, out: &Path, svg: bool, kind: Experiment) -> Result<String, CliError> {
    let rc = if kind == Experiment::Nmse {
        rc.clone()
    } else {
        with_full_csi(rc)
    };
    let scenario = Scenario::new(rc.resolved_scenario()?)?;
    let (rows, records) = run_experiment(&scenario, kind, rc.workers)?;
    let name = kind.name().replace('-', "_");
    let head = header(&rc, kind.name());
    write_csv(&out.join(format!("{name}_trials.csv")), &head, &trial_table(&rows))?;
    write_csv(&out.join(format!("{name}.csv")), &head, &metrics_table(&records))?;
    if svg {
        if kind == Experiment::Nmse {
            let t = line_chart(
                "Angle NMSE",
                "reference SNR (dB)",
                "NMSE",
                &curves(&records, |m| m.nmse_theta),
                true,
            );
            write_text(&out.join("nmse_theta.svg"), &t)?;
            let r = line_chart(
                "Distance NMSE",
                "reference SNR (dB)",
                "NMSE",
                &curves(&records, |m| m.nmse_r),
                true,
            );
            write_text(&out.join("nmse_r.svg"), &r)?;
        } else {
            let c = line_chart(
                "Achievable rate",
                "reference SNR (dB)",
                "bits/s/Hz",
                &curves(&records, |m| m.mean_rate),
                false,
            );
            write_text(&out.join(format!("{name}.svg")), &c)?;
        }
    }
    Ok(summary(&records, kind))
}

fn overhead(rc: &RunConfig, out: &Path) -> Result<String, CliError> {
    let sc = &rc.scenario;
    let array = ArrayConfig::new(sc.antennas, sc.carrier_hz)?;
    let probe = single_user(rc, &array)?;
    let rows = overhead_report(&array, &sc.estimator, sc.polar_beta, probe)?;
    let table = Table {
        columns: vec![
            "scheme",
            "antennas",
            "k",
            "pilots",
            "formula",
            "s_average",
            "s_visited",
            "model_evaluations",
            "width_scans",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.scheme.name().to_string(),
                    r.antennas.to_string(),
                    r.k.to_string(),
                    r.pilots.to_string(),
                    r.formula.clone(),
                    real(r.s_average),
                    r.s_visited.to_string(),
                    r.model_evaluations.to_string(),
                    r.width_scans.to_string(),
                ]
            })
            .collect(),
    };
    write_csv(&out.join("overhead.csv"), &header(rc, "overhead"), &table)?;
    let mut s = String::new();
    for r in &rows {
        let _ = writeln!(
            s,
            "{}, {} pilots ({}), {} distance-model evaluations",
            r.scheme.name(),
            r.pilots,
            r.formula,
            r.model_evaluations
        );
    }
    Ok(s)
}

fn codebook_dump(rc: &RunConfig, out: &Path) -> Result<String, CliError> {
    let sc = &rc.scenario;
    let array = ArrayConfig::new(sc.antennas, sc.carrier_hz)?;
    let dft = build_dft_codebook(&array);
    let polar = build_polar_codebook(&array, sc.polar_beta, array.fresnel_distance())?;
    let mut table = Table {
        columns: vec!["book", "index", "angle_index", "kind", "theta", "r"],
        rows: Vec::new(),
    };
    let label_row = |book: &str, index: usize, angle_index: usize, label: &CodewordLabel| {
        let kind = match label {
            CodewordLabel::FarField { .. } => "far",
            CodewordLabel::NearField { .. } => "near",
        };
        vec![
            book.to_string(),
            index.to_string(),
            angle_index.to_string(),
            kind.to_string(),
            real(label.theta()),
            real(label.r()),
        ]
    };
    for (i, c) in dft.codewords.iter().enumerate() {
        table.rows.push(label_row("dft", i, i, &c.label));
    }
    for a in 0..polar.angles.len() {
        for (j, c) in polar.at_angle(a).iter().enumerate() {
            table.rows.push(label_row("polar", polar.offsets[a] + j, a, &c.label));
        }
    }
    write_csv(&out.join("codebook.csv"), &header(rc, "codebook-dump"), &table)?;
    let mut s = String::new();
    let _ = writeln!(s, "dft_codewords={}", dft.len());
    let _ = writeln!(s, "polar_codewords={}", polar.len());
    let _ = writeln!(s, "polar_s_average={}", real(polar.average_samples()));
    let _ = writeln!(s, "polar_z_delta={}", real(polar.z_delta));
    Ok(s)
}
