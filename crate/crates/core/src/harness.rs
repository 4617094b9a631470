//! Experiment configuration, seeded Monte Carlo trials, parameter sweeps and
//! result files.
//!
//! Trial `k` of a run with master seed `s` draws everything from ChaCha20
//! stream `k` of seed `s`: first the swarm seed, then the link angles, then
//! the scattered fields. Sweeps reuse the same trial streams at every sweep
//! value, so curves are paired across values.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::{evaluate_baseline, star_ris_placement, BaselineConfig};
use crate::channel::{ChannelModel, ChannelParams, ChannelRealization, LinkParams};
use crate::error::{Error, Result};
use crate::geometry::{partition_surface, Aperture, PresetDensity, SurfaceGeometry};
use crate::pso::{optimize_problem, Objective, Problem, PsoConfig};
use crate::rate::RateReport;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Correlation storage above this size triggers a warning.
const MEMORY_WARN_BYTES: f64 = 1024.0 * 1024.0 * 1024.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn wavelength(f_c: f64) -> f64 {
    SPEED_OF_LIGHT / f_c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpacingToken {
    #[serde(rename = "half-lambda")]
    HalfLambda,
}

/// Minimum element spacing: meters, or the token `"half-lambda"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spacing {
    Token(SpacingToken),
    Meters(f64),
}

impl Spacing {
    pub fn meters(&self, wavelength: f64) -> f64 {
        match self {
            Spacing::Token(SpacingToken::HalfLambda) => wavelength / 2.0,
            Spacing::Meters(d) => *d,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Power,
    Area,
    Iterations,
    #[default]
    None,
}

/// Everything needed to reproduce a run. Field names are the JSON keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Horizontal aperture, meters.
    pub a_h: f64,
    /// Vertical aperture, meters.
    pub a_v: f64,
    /// Fluid element count.
    pub m: usize,
    /// Element count of the conventional surface.
    pub m_hat: usize,
    /// Presets per subarea row.
    pub n_h: usize,
    /// Presets per subarea column.
    pub n_v: usize,
    /// Total presets per subarea; when set (a perfect square) it overrides
    /// `n_h` and `n_v`.
    pub presets_per_subarea: Option<usize>,
    /// Carrier frequency, Hz.
    pub f_c: f64,
    pub sigma2_dbm: f64,
    /// Transmit power for non-power sweeps.
    pub p_dbm: f64,
    pub p_sweep_dbm: Vec<f64>,
    /// Square aperture areas for the area sweep, m².
    pub area_sweep_m2: Vec<f64>,
    pub k_f: f64,
    pub k_u: f64,
    pub d_f: f64,
    pub d_u: f64,
    pub alpha: f64,
    pub min_spacing: Spacing,
    pub n_particles: usize,
    pub n_iterations: usize,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub tau: f64,
    pub objective: Objective,
    pub n_trials: usize,
    pub seed: u64,
    pub sweep: SweepAxis,
    /// Seed one particle of every swarm with the baseline placement.
    pub inject_baseline: bool,
    /// Attach the mean convergence curve to every record.
    pub record_convergence: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            a_h: 2.0,
            a_v: 2.0,
            m: 4,
            m_hat: 4,
            n_h: 10,
            n_v: 10,
            presets_per_subarea: None,
            f_c: 3.5e9,
            sigma2_dbm: -90.0,
            p_dbm: 40.0,
            p_sweep_dbm: vec![20.0, 25.0, 30.0, 35.0, 40.0],
            area_sweep_m2: vec![1.0, 4.0, 9.0, 16.0],
            k_f: 5.0,
            k_u: 5.0,
            d_f: 100.0,
            d_u: 200.0,
            alpha: 2.5,
            min_spacing: Spacing::Token(SpacingToken::HalfLambda),
            n_particles: 50,
            n_iterations: 100,
            w: 0.4,
            c1: 0.5,
            c2: 0.5,
            tau: 1e6,
            objective: Objective::Min,
            n_trials: 100,
            seed: 1,
            sweep: SweepAxis::None,
            inject_baseline: false,
            record_convergence: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Serialization {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a_h", self.a_h),
            ("a_v", self.a_v),
            ("f_c", self.f_c),
            ("d_f", self.d_f),
            ("d_u", self.d_u),
            ("alpha", self.alpha),
            ("tau", self.tau),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("k_f", self.k_f), ("k_u", self.k_u)] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        for (name, v) in [("sigma2_dbm", self.sigma2_dbm), ("p_dbm", self.p_dbm)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if self.m == 0 || self.m_hat == 0 || self.n_h == 0 || self.n_v == 0 {
            return Err(Error::Config(
                "element and preset counts must be at least 1".into(),
            ));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.p_sweep_dbm.is_empty() || self.p_sweep_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("p_sweep_dbm must be a non-empty list".into()));
        }
        if self.area_sweep_m2.is_empty() || self.area_sweep_m2.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config(
                "area_sweep_m2 must be a non-empty list of positive areas".into(),
            ));
        }
        let d = self.min_spacing.meters(self.wavelength());
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Config(format!(
                "min_spacing must be positive, got {d}"
            )));
        }
        self.presets()?;
        self.pso(0).validate()
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.f_c)
    }

    pub fn presets(&self) -> Result<PresetDensity> {
        match self.presets_per_subarea {
            None => Ok(PresetDensity::new(self.n_h, self.n_v)),
            Some(n) => {
                let side = (n as f64).sqrt().round() as usize;
                if side == 0 || side * side != n {
                    return Err(Error::Config(format!(
                        "presets_per_subarea = {n} is not a positive perfect square"
                    )));
                }
                Ok(PresetDensity::square(side))
            }
        }
    }

    pub fn geometry(&self) -> Result<SurfaceGeometry> {
        let lambda = self.wavelength();
        partition_surface(
            Aperture::new(self.a_h, self.a_v),
            self.m,
            self.presets()?,
            self.min_spacing.meters(lambda),
            lambda,
        )
    }

    pub fn pso(&self, seed: u64) -> PsoConfig {
        PsoConfig {
            n_particles: self.n_particles,
            n_iterations: self.n_iterations,
            inertia: self.w,
            cognitive: self.c1,
            social: self.c2,
            penalty: self.tau,
            seed,
            objective: self.objective,
        }
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.sigma2_dbm)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    /// Same configuration on a square aperture of the given area.
    pub fn with_area(&self, area: f64) -> Self {
        let side = area.sqrt();
        Self {
            a_h: side,
            a_v: side,
            ..self.clone()
        }
    }
}

/// Outcome of one Monte Carlo repetition at one transmit power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub p_dbm: f64,
    pub fires: RateReport,
    pub baseline: RateReport,
    pub history: Vec<f64>,
    /// Lattice indices of the optimized elements.
    pub indices: Vec<usize>,
}

/// Independent random stream for trial `trial_index`.
pub fn trial_rng(seed: u64, trial_index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial_index as u64);
    rng
}

/// Link geometry for one trial: every angle uniform over `(0, π)`.
pub fn draw_channel_params<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> ChannelParams {
    let mut angle = || loop {
        let a: f64 = rng.random_range(0.0..PI);
        if a > 0.0 {
            return a;
        }
    };
    let mut link = |k: f64, d: f64| LinkParams {
        rician_k: k,
        distance: d,
        path_loss_exponent: cfg.alpha,
        azimuth: angle(),
        elevation: angle(),
    };
    let incident = link(cfg.k_f, cfg.d_f);
    let reflect = link(cfg.k_u, cfg.d_u);
    let transmit = link(cfg.k_u, cfg.d_u);
    ChannelParams {
        bs_departure: angle(),
        incident,
        reflect,
        transmit,
    }
}

/// Random draws of one trial.
#[derive(Clone, Debug)]
pub struct TrialDraw {
    pub pso_seed: u64,
    pub params: ChannelParams,
    pub realization: ChannelRealization,
}

/// A configuration bound to its geometry and correlation model.
#[derive(Clone, Debug)]
pub struct Scenario {
    cfg: ExperimentConfig,
    model: ChannelModel,
    baseline: BaselineConfig,
}

impl Scenario {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let geometry = cfg.geometry()?;
        let l = geometry.num_presets() as f64;
        let bytes = 3.0 * l * l * 8.0;
        if bytes > MEMORY_WARN_BYTES {
            log::warn!(
                "{} presets need about {:.1} GiB for the correlation model",
                l,
                bytes / MEMORY_WARN_BYTES
            );
        }
        let baseline = BaselineConfig { m_hat: cfg.m_hat };
        // surface the baseline layout error before any trial runs
        star_ris_placement(&geometry, &baseline)?;
        Ok(Self {
            cfg: cfg.clone(),
            model: ChannelModel::new(geometry)?,
            baseline,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> &SurfaceGeometry {
        self.model.geometry()
    }

    pub fn draw(&self, trial_index: usize) -> Result<TrialDraw> {
        let mut rng = trial_rng(self.cfg.seed, trial_index);
        let pso_seed = rng.next_u64();
        let params = draw_channel_params(&self.cfg, &mut rng);
        let realization = self.model.synthesize(&params, &mut rng)?;
        Ok(TrialDraw {
            pso_seed,
            params,
            realization,
        })
    }

    /// Optimizes and benchmarks one draw at every power in `powers_dbm`.
    pub fn run_draw(
        &self,
        trial_index: usize,
        draw: &TrialDraw,
        powers_dbm: &[f64],
    ) -> Result<Vec<TrialRecord>> {
        let geom = self.geometry();
        let noise = self.cfg.noise_watts();
        let pso = self.cfg.pso(draw.pso_seed);
        let inject = if self.cfg.inject_baseline {
            vec![star_ris_placement(geom, &self.baseline)?]
        } else {
            Vec::new()
        };
        powers_dbm
            .iter()
            .map(|&p_dbm| {
                let power = dbm_to_watts(p_dbm);
                let problem = Problem::new(
                    &draw.realization,
                    geom,
                    power,
                    noise,
                    pso.objective,
                    pso.penalty,
                )?;
                let out = optimize_problem(&problem, &pso, &inject)?;
                let baseline =
                    evaluate_baseline(&draw.realization, geom, &self.baseline, power, noise)?;
                Ok(TrialRecord {
                    trial_index,
                    p_dbm,
                    fires: out.report,
                    baseline,
                    history: out.history,
                    indices: out.indices,
                })
            })
            .collect()
    }

    pub fn run_trial(&self, trial_index: usize, p_dbm: f64) -> Result<TrialRecord> {
        let draw = self.draw(trial_index)?;
        Ok(self.run_draw(trial_index, &draw, &[p_dbm])?.remove(0))
    }

    /// All trials at every power; outer index is the power.
    pub fn run_trials(&self, powers_dbm: &[f64]) -> Result<Vec<Vec<TrialRecord>>> {
        let per_trial = (0..self.cfg.n_trials)
            .into_par_iter()
            .map(|k| {
                let draw = self.draw(k)?;
                self.run_draw(k, &draw, powers_dbm)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..powers_dbm.len())
            .map(|j| per_trial.iter().map(|t| t[j].clone()).collect())
            .collect())
    }
}

/// One Monte Carlo repetition at the configured power.
pub fn run_trial(cfg: &ExperimentConfig, trial_index: usize) -> Result<TrialRecord> {
    Scenario::new(cfg)?.run_trial(trial_index, cfg.p_dbm)
}

/// Aggregate over all trials at one sweep value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub sweep_value: f64,
    pub m: usize,
    pub fires_mean: f64,
    pub fires_stderr: f64,
    pub baseline_mean: f64,
    pub baseline_stderr: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub config_digest: String,
    /// Mean global-best fitness after initialization and each iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Vec<f64>>,
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Element-wise mean of equally long histories.
pub fn mean_history(trials: &[TrialRecord]) -> Vec<f64> {
    let len = trials.iter().map(|t| t.history.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| trials.iter().map(|t| t.history[i]).sum::<f64>() / trials.len() as f64)
        .collect()
}

fn aggregate(cfg: &ExperimentConfig, sweep_value: f64, trials: &[TrialRecord]) -> ResultRecord {
    let fires: Vec<f64> = trials.iter().map(|t| t.fires.effective).collect();
    let base: Vec<f64> = trials.iter().map(|t| t.baseline.effective).collect();
    let (fires_mean, fires_stderr) = mean_stderr(&fires);
    let (baseline_mean, baseline_stderr) = mean_stderr(&base);
    ResultRecord {
        sweep_value,
        m: cfg.m,
        fires_mean,
        fires_stderr,
        baseline_mean,
        baseline_stderr,
        n_trials: trials.len(),
        seed: cfg.seed,
        config_digest: cfg.digest(),
        convergence: cfg.record_convergence.then(|| mean_history(trials)),
    }
}

/// Runs the sweep selected by `cfg.sweep`.
///
/// * `power`: one record per entry of `p_sweep_dbm`.
/// * `area`: one record per entry of `area_sweep_m2` (square apertures).
/// * `iterations`: one record per iteration count `0..=n_iterations`, the
///   FIRES column holding the mean global-best fitness at that iteration.
/// * `none`: a single record at `p_dbm`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    match cfg.sweep {
        SweepAxis::Power => {
            let scenario = Scenario::new(cfg)?;
            let by_power = scenario.run_trials(&cfg.p_sweep_dbm)?;
            Ok(cfg
                .p_sweep_dbm
                .iter()
                .zip(&by_power)
                .map(|(&p, trials)| aggregate(cfg, p, trials))
                .collect())
        }
        SweepAxis::Area => cfg
            .area_sweep_m2
            .iter()
            .map(|&area| {
                let sized = cfg.with_area(area);
                let trials = Scenario::new(&sized)?.run_trials(&[cfg.p_dbm])?.remove(0);
                // digest of the generating config, which embeds the aperture
                Ok(aggregate(&sized, area, &trials))
            })
            .collect(),
        SweepAxis::Iterations => {
            let trials = Scenario::new(cfg)?.run_trials(&[cfg.p_dbm])?.remove(0);
            let curve = mean_history(&trials);
            let (baseline_mean, baseline_stderr) = mean_stderr(
                &trials
                    .iter()
                    .map(|t| t.baseline.effective)
                    .collect::<Vec<_>>(),
            );
            let digest = cfg.digest();
            Ok(curve
                .iter()
                .enumerate()
                .map(|(t, &mean)| {
                    let at_t: Vec<f64> = trials.iter().map(|r| r.history[t]).collect();
                    ResultRecord {
                        sweep_value: t as f64,
                        m: cfg.m,
                        fires_mean: mean,
                        fires_stderr: mean_stderr(&at_t).1,
                        baseline_mean,
                        baseline_stderr,
                        n_trials: trials.len(),
                        seed: cfg.seed,
                        config_digest: digest.clone(),
                        convergence: None,
                    }
                })
                .collect())
        }
        SweepAxis::None => {
            let trials = Scenario::new(cfg)?.run_trials(&[cfg.p_dbm])?.remove(0);
            Ok(vec![aggregate(cfg, cfg.p_dbm, &trials)])
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 7] = [
    "sweep_value",
    "fires_mean",
    "fires_stderr",
    "baseline_mean",
    "baseline_stderr",
    "n_trials",
    "seed",
];

/// Records plus the configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub config: ExperimentConfig,
    pub records: Vec<ResultRecord>,
}

pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.sweep_value.to_string(),
            r.fires_mean.to_string(),
            r.fires_stderr.to_string(),
            r.baseline_mean.to_string(),
            r.baseline_stderr.to_string(),
            r.n_trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(
    cfg: &ExperimentConfig,
    records: &[ResultRecord],
    out: W,
) -> serde_json::Result<()> {
    let file = ResultsFile {
        config: cfg.clone(),
        records: records.to_vec(),
    };
    serde_json::to_writer_pretty(out, &file)
}

/// Writes `records` to `path` in the requested format.
pub fn emit_results(
    records: &[ResultRecord],
    cfg: &ExperimentConfig,
    path: &Path,
    format: OutputFormat,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let out = std::io::BufWriter::new(file);
    let ser_err = |message: String| Error::Serialization {
        path: path.to_owned(),
        message,
    };
    match format {
        OutputFormat::Csv => write_csv(records, out).map_err(|e| ser_err(e.to_string())),
        OutputFormat::Json => {
            let mut out = out;
            write_json(cfg, records, &mut out).map_err(|e| ser_err(e.to_string()))?;
            out.flush().map_err(|source| Error::Io {
                path: path.to_owned(),
                source,
            })
        }
    }
}

pub fn load_results(path: &Path) -> Result<ResultsFile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Serialization {
        path: path.to_owned(),
        message: e.to_string(),
    })
}
