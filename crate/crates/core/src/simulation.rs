//! Seeded Monte-Carlo campaigns: scenario configuration, one end-to-end
//! trial per seed, aggregation, and the table and figure sweeps.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fiveg_only_solve, gnss_only_solve, hybrid_solve, FixedSolution, FloatSolution, SearchControl};
use crate::fiveg::{aoa_fim, bs_layout, channel_gain, los_unit_vectors, noiseless_aoa, simulate_aoa, upa_geometry, AoaSet, RadioConfig, TABLE1_OFFSETS};
use crate::frames::{frobenius_error, geodesic_angle_deg, rotation_from_euler, EulerAngles, Rotation, Vec3};
use crate::gnss::{
    build_design_with, noiseless_epoch, random_constellation, sample_ambiguities, simulate_epoch, synth_constellation,
    BaselineSet, Constellation, DdCorrelation, DesignOptions, GnssNoiseModel, SkyGeometry,
};

// Independent random substreams of one trial.
const STREAM_CONSTELLATION: u64 = 0;
const STREAM_ATTITUDE: u64 = 1;
const STREAM_AMBIGUITY: u64 = 2;
const STREAM_GNSS_NOISE: u64 = 3;
const STREAM_CHANNEL: u64 = 4;
const STREAM_AOA_NOISE: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeMode {
    #[default]
    Random,
    Fixed,
}

/// True attitude: uniform random per trial, or fixed Euler angles (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AttitudeConfig {
    pub mode: AttitudeMode,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConstellationPolicy {
    /// Fresh random geometry for every trial.
    #[default]
    PerTrial,
    /// One random geometry drawn from `seed`, shared by all trials.
    Fixed,
    /// The azimuth/elevation pairs in `az_el_deg`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationConfig {
    pub policy: ConstellationPolicy,
    pub seed: u64,
    pub az_el_deg: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Tracked satellites, pivot included (N + 1).
    pub n_satellites: usize,
    /// Body-frame baselines in meters, one per antenna pair.
    pub baselines: Vec<[f64; 3]>,
    /// Undifferenced carrier-phase standard deviation (m).
    pub sigma_phase: f64,
    pub dd_correlation: DdCorrelation,
    /// Number of 5G base stations (L).
    pub n_bs: usize,
    pub ambiguity_half_range: i64,
    pub user_position: [f64; 3],
    /// Draw GNSS measurement noise; the stochastic model is used either way.
    pub gnss_noise: bool,
    /// Draw angle-of-arrival noise.
    pub aoa_noise: bool,
    pub attitude: AttitudeConfig,
    pub constellation: ConstellationConfig,
    pub radio: RadioConfig,
    pub search: SearchControl,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_satellites: 5,
            baselines: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            sigma_phase: 0.001,
            dd_correlation: DdCorrelation::Full,
            n_bs: 3,
            ambiguity_half_range: 100,
            user_position: [0.0; 3],
            gnss_noise: true,
            aoa_noise: true,
            attitude: AttitudeConfig::default(),
            constellation: ConstellationConfig::default(),
            radio: RadioConfig::default(),
            search: SearchControl::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_satellites < 4 {
            return Err(Error::Config(format!("n_satellites must be at least 4, got {}", self.n_satellites)));
        }
        BaselineSet::from_columns(&self.baselines)?;
        if !(self.sigma_phase > 0.0) || !self.sigma_phase.is_finite() {
            return Err(Error::Config("sigma_phase must be positive".into()));
        }
        if self.n_bs > TABLE1_OFFSETS.len() {
            return Err(Error::Config(format!("n_bs must be at most {}, got {}", TABLE1_OFFSETS.len(), self.n_bs)));
        }
        if self.ambiguity_half_range < 0 {
            return Err(Error::Config("ambiguity_half_range must be non-negative".into()));
        }
        if self.attitude.mode == AttitudeMode::Fixed {
            self.euler()?;
        }
        if self.constellation.policy == ConstellationPolicy::Explicit
            && self.constellation.az_el_deg.len() != self.n_satellites
        {
            return Err(Error::Config(format!(
                "constellation.az_el_deg has {} entries, n_satellites is {}",
                self.constellation.az_el_deg.len(),
                self.n_satellites
            )));
        }
        self.radio.validate()?;
        self.search.validate()
    }

    fn euler(&self) -> Result<EulerAngles> {
        EulerAngles::from_degrees(self.attitude.yaw_deg, self.attitude.pitch_deg, self.attitude.roll_deg)
    }

    pub fn noise_model(&self) -> GnssNoiseModel {
        GnssNoiseModel { dd_correlation: self.dd_correlation, ..GnssNoiseModel::new(self.sigma_phase) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Hybrid,
    GnssOnly,
    FivegOnly,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Hybrid, Method::GnssOnly, Method::FivegOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Hybrid => "hybrid",
            Method::GnssOnly => "gnss_only",
            Method::FivegOnly => "fiveg_only",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Errors of one method in one trial. Float quantities and ambiguity
/// success are absent for the 5G-only solver.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub float_z_error: Option<f64>,
    pub float_r_error: Option<f64>,
    pub fixed_r_error_frobenius: f64,
    pub fixed_r_error_deg: f64,
    pub success: Option<bool>,
    pub bound_closed: bool,
    pub n_candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok(MethodResult),
    Failed(String),
    Skipped,
}

impl Outcome {
    pub fn result(&self) -> Option<&MethodResult> {
        match self {
            Outcome::Ok(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub hybrid: Outcome,
    pub gnss_only: Outcome,
    pub fiveg_only: Outcome,
}

impl TrialResult {
    pub fn outcome(&self, method: Method) -> &Outcome {
        match method {
            Method::Hybrid => &self.hybrid,
            Method::GnssOnly => &self.gnss_only,
            Method::FivegOnly => &self.fiveg_only,
        }
    }

    /// Hybrid ambiguity success.
    pub fn success(&self) -> bool {
        self.hybrid.result().and_then(|r| r.success).unwrap_or(false)
    }
}

/// Which solvers a trial runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSet {
    pub hybrid: bool,
    pub gnss_only: bool,
    pub fiveg_only: bool,
}

impl MethodSet {
    pub const ALL: MethodSet = MethodSet { hybrid: true, gnss_only: true, fiveg_only: true };
}

/// Everything a trial draws before solving.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub constellation: Constellation,
    pub r_true: Rotation,
    pub z_true: DMatrix<i64>,
    pub design: crate::gnss::GnssDesign,
    pub epoch: crate::gnss::GnssEpoch,
    pub baselines: BaselineSet,
    pub aoa: Option<AoaSet>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Per-station equivalent Fisher information for the true attitude.
pub fn station_information(cfg: &ScenarioConfig, r_true: &Rotation, seed: u64) -> Result<(nalgebra::Matrix3xX<f64>, Vec<Matrix2<f64>>)> {
    let layout = bs_layout(Vec3::from(cfg.user_position), cfg.n_bs)?;
    let e = los_unit_vectors(&layout)?;
    let array = upa_geometry(&cfg.radio);
    let mut rng = stream(seed, STREAM_CHANNEL);
    let mut efims = Vec::with_capacity(cfg.n_bs);
    for (k, dist) in layout.distances().into_iter().enumerate() {
        let gain = channel_gain(dist, cfg.radio.carrier_hz, &mut rng);
        let t = r_true.matrix().transpose() * e.column(k);
        efims.push(aoa_fim(&array, &t, gain, &cfg.radio)?);
    }
    Ok((e, efims))
}

/// Draws geometry, truth and observations for `seed` with
/// [`DesignOptions`] applied to the GNSS design.
pub fn draw_trial(cfg: &ScenarioConfig, seed: u64, options: DesignOptions) -> Result<TrialData> {
    let constellation = match cfg.constellation.policy {
        ConstellationPolicy::PerTrial => random_constellation(cfg.n_satellites, &mut stream(seed, STREAM_CONSTELLATION))?,
        ConstellationPolicy::Fixed => synth_constellation(cfg.n_satellites, &SkyGeometry::Seeded(cfg.constellation.seed))?,
        ConstellationPolicy::Explicit => {
            let pairs: Vec<(f64, f64)> = cfg.constellation.az_el_deg.iter().map(|p| (p[0], p[1])).collect();
            synth_constellation(cfg.n_satellites, &SkyGeometry::AzElDeg(pairs))?
        }
    };
    let r_true = match cfg.attitude.mode {
        AttitudeMode::Random => Rotation::random(&mut stream(seed, STREAM_ATTITUDE)),
        AttitudeMode::Fixed => rotation_from_euler(cfg.euler()?),
    };
    let baselines = BaselineSet::from_columns(&cfg.baselines)?;
    let m = baselines.n_baselines();
    let z_true = sample_ambiguities(constellation.n_dd(), m, cfg.ambiguity_half_range, &mut stream(seed, STREAM_AMBIGUITY));
    let design = build_design_with(&constellation, &cfg.noise_model(), m, options);
    let epoch = if cfg.gnss_noise {
        simulate_epoch(&design, &r_true, &baselines, &z_true, &mut stream(seed, STREAM_GNSS_NOISE))?
    } else {
        noiseless_epoch(&design, &r_true, &baselines, &z_true)?
    };
    let aoa = if cfg.n_bs == 0 {
        None
    } else {
        let (e, efims) = station_information(cfg, &r_true, seed)?;
        Some(if cfg.aoa_noise {
            simulate_aoa(&e, &r_true, &efims, &mut stream(seed, STREAM_AOA_NOISE))?
        } else {
            noiseless_aoa(&e, &r_true, &efims)?
        })
    };
    Ok(TrialData { constellation, r_true, z_true, design, epoch, baselines, aoa })
}

fn score(data: &TrialData, float: &FloatSolution, mut fixed: FixedSolution) -> MethodResult {
    let z_true = data.z_true.map(|v| v as f64);
    let success = fixed.mark_success(&data.z_true);
    MethodResult {
        float_z_error: Some(frobenius_error(&float.z_float, &z_true)),
        float_r_error: Some(frobenius_error(&float.r_float, data.r_true.matrix())),
        fixed_r_error_frobenius: frobenius_error(fixed.r_fixed.matrix(), data.r_true.matrix()),
        fixed_r_error_deg: geodesic_angle_deg(&fixed.r_fixed, &data.r_true),
        success: Some(success),
        bound_closed: fixed.bound_closed,
        n_candidates: fixed.n_candidates_evaluated,
    }
}

fn outcome<T>(res: Result<T>, f: impl FnOnce(T) -> MethodResult) -> Outcome {
    match res {
        Ok(v) => Outcome::Ok(f(v)),
        Err(e) => Outcome::Failed(e.to_string()),
    }
}

/// Runs the selected solvers on already drawn trial data.
pub fn solve_trial(cfg: &ScenarioConfig, data: &TrialData, seed: u64, methods: MethodSet) -> TrialResult {
    let ctrl = &cfg.search;
    let gnss_only = if methods.gnss_only || (methods.hybrid && data.aoa.is_none()) {
        outcome(gnss_only_solve(&data.design, &data.epoch, &data.baselines, ctrl), |(fl, fx)| score(data, &fl, fx))
    } else {
        Outcome::Skipped
    };
    let hybrid = match (&data.aoa, methods.hybrid) {
        (_, false) => Outcome::Skipped,
        (None, true) => gnss_only.clone(),
        (Some(aoa), true) => outcome(hybrid_solve(&data.design, &data.epoch, aoa, &data.baselines, ctrl), |(fl, fx)| {
            score(data, &fl, fx)
        }),
    };
    let fiveg_only = match &data.aoa {
        Some(aoa) if methods.fiveg_only && aoa.n_bs() >= 2 => outcome(fiveg_only_solve(aoa, ctrl), |r| MethodResult {
            float_z_error: None,
            float_r_error: None,
            fixed_r_error_frobenius: frobenius_error(r.matrix(), data.r_true.matrix()),
            fixed_r_error_deg: geodesic_angle_deg(&r, &data.r_true),
            success: None,
            bound_closed: true,
            n_candidates: 0,
        }),
        _ => Outcome::Skipped,
    };
    TrialResult {
        seed,
        hybrid,
        gnss_only: if methods.gnss_only { gnss_only } else { Outcome::Skipped },
        fiveg_only,
    }
}

pub fn run_trial_with(cfg: &ScenarioConfig, seed: u64, methods: MethodSet, options: DesignOptions) -> TrialResult {
    match draw_trial(cfg, seed, options) {
        Ok(data) => solve_trial(cfg, &data, seed, methods),
        Err(e) => {
            let msg = e.to_string();
            let failed = |on: bool| if on { Outcome::Failed(msg.clone()) } else { Outcome::Skipped };
            TrialResult {
                seed,
                hybrid: failed(methods.hybrid),
                gnss_only: failed(methods.gnss_only),
                fiveg_only: failed(methods.fiveg_only && cfg.n_bs >= 2),
            }
        }
    }
}

/// One end-to-end trial: hybrid and GNSS-only always, 5G-only when L >= 2.
pub fn run_trial(cfg: &ScenarioConfig, seed: u64) -> TrialResult {
    run_trial_with(cfg, seed, MethodSet::ALL, DesignOptions::default())
}

/// Mean and root-mean-square of one error metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub n: usize,
    pub mean: f64,
    pub rmse: f64,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MetricSummary { n, mean: f64::NAN, rmse: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ms = values.iter().map(|v| v * v).sum::<f64>() / n as f64;
        MetricSummary { n, mean, rmse: ms.sqrt() }
    }
}

pub const METRICS: [&str; 4] = ["float_Z", "float_R", "fixed_R_frob", "fixed_R_deg"];

fn metric_value(r: &MethodResult, metric: &str) -> Option<f64> {
    match metric {
        "float_Z" => r.float_z_error,
        "float_R" => r.float_r_error,
        "fixed_R_frob" => Some(r.fixed_r_error_frobenius),
        "fixed_R_deg" => Some(r.fixed_r_error_deg),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodAggregate {
    pub n_run: usize,
    pub n_failed: usize,
    pub n_bound_not_closed: usize,
    pub n_success: usize,
    /// Successes over all trials; absent for the 5G-only solver.
    pub success_rate: Option<f64>,
    pub metrics: BTreeMap<&'static str, MetricSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetrics {
    pub n_trials: usize,
    pub methods: BTreeMap<Method, MethodAggregate>,
    pub config: ScenarioConfig,
}

impl AggregateMetrics {
    pub fn method(&self, m: Method) -> Option<&MethodAggregate> {
        self.methods.get(&m)
    }

    pub fn metric(&self, m: Method, metric: &str) -> Option<MetricSummary> {
        self.methods.get(&m).and_then(|a| a.metrics.get(metric).copied())
    }
}

/// Aggregates trials. Solver failures are excluded from the error
/// statistics; success rates use every trial as the denominator.
pub fn aggregate(cfg: &ScenarioConfig, trials: &[TrialResult]) -> AggregateMetrics {
    let n_trials = trials.len();
    let mut methods = BTreeMap::new();
    for method in Method::ALL {
        let outcomes: Vec<&Outcome> = trials.iter().map(|t| t.outcome(method)).collect();
        let n_run = outcomes.iter().filter(|o| !matches!(o, Outcome::Skipped)).count();
        if n_run == 0 {
            continue;
        }
        let ok: Vec<&MethodResult> = outcomes.iter().filter_map(|o| o.result()).collect();
        let n_success = ok.iter().filter(|r| r.success == Some(true)).count();
        let has_success = ok.iter().any(|r| r.success.is_some()) || method != Method::FivegOnly;
        let mut metrics = BTreeMap::new();
        for name in METRICS {
            let values: Vec<f64> = ok.iter().filter_map(|r| metric_value(r, name)).collect();
            if !values.is_empty() {
                metrics.insert(name, MetricSummary::from_values(&values));
            }
        }
        methods.insert(
            method,
            MethodAggregate {
                n_run,
                n_failed: n_run - ok.len(),
                n_bound_not_closed: ok.iter().filter(|r| !r.bound_closed).count(),
                n_success,
                success_rate: has_success.then(|| n_success as f64 / n_trials.max(1) as f64),
                metrics,
            },
        );
    }
    AggregateMetrics { n_trials, methods, config: cfg.clone() }
}

/// Runs `f(i)` for `i in 0..n` on `jobs` worker threads, results in index
/// order.
pub fn parallel_map<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if jobs <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub trials: Vec<TrialResult>,
    pub aggregate: AggregateMetrics,
}

/// Trials with seeds `base_seed + i`, `i < n_trials`.
pub fn run_campaign(cfg: &ScenarioConfig, n_trials: usize, base_seed: u64, jobs: usize) -> Result<Campaign> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    cfg.validate()?;
    let trials = parallel_map(n_trials, jobs, |i| run_trial(cfg, base_seed.wrapping_add(i as u64)));
    let aggregate = aggregate(cfg, &trials);
    Ok(Campaign { trials, aggregate })
}

/// Noise and radio presets of the success-rate/error table pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TablePreset {
    pub sigma_phase: f64,
    pub n_transmissions: u32,
}

pub fn table_preset(table: u32) -> Result<TablePreset> {
    match table {
        2 | 3 => Ok(TablePreset { sigma_phase: 0.03, n_transmissions: 64 }),
        4 | 5 => Ok(TablePreset { sigma_phase: 0.03, n_transmissions: 512 }),
        6 | 7 => Ok(TablePreset { sigma_phase: 0.003, n_transmissions: 512 }),
        _ => Err(Error::Config(format!("table must be in 2..=7, got {table}"))),
    }
}

pub fn apply_table_preset(base: &ScenarioConfig, table: u32) -> Result<ScenarioConfig> {
    let p = table_preset(table)?;
    let mut cfg = base.clone();
    cfg.sigma_phase = p.sigma_phase;
    cfg.radio.n_transmissions = p.n_transmissions;
    Ok(cfg)
}

/// Success rate and mean fixed attitude error (degrees) per
/// `(n_satellites, n_bs)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGrid {
    pub sat_range: Vec<usize>,
    pub bs_range: Vec<usize>,
    pub success: Vec<Vec<f64>>,
    pub error_deg: Vec<Vec<f64>>,
    pub aggregates: Vec<Vec<AggregateMetrics>>,
}

pub fn sweep_tables(
    base: &ScenarioConfig,
    sat_range: &[usize],
    bs_range: &[usize],
    n_trials: usize,
    base_seed: u64,
    jobs: usize,
) -> Result<TableGrid> {
    if sat_range.is_empty() || bs_range.is_empty() {
        return Err(Error::Config("table ranges must be non-empty".into()));
    }
    let hybrid_only = MethodSet { hybrid: true, gnss_only: false, fiveg_only: false };
    let mut grid = TableGrid {
        sat_range: sat_range.to_vec(),
        bs_range: bs_range.to_vec(),
        success: Vec::new(),
        error_deg: Vec::new(),
        aggregates: Vec::new(),
    };
    for &n_sats in sat_range {
        let (mut s_row, mut e_row, mut a_row) = (Vec::new(), Vec::new(), Vec::new());
        for &l in bs_range {
            let cfg = ScenarioConfig { n_satellites: n_sats, n_bs: l, ..base.clone() };
            cfg.validate()?;
            let trials = parallel_map(n_trials, jobs, |i| {
                run_trial_with(&cfg, base_seed.wrapping_add(i as u64), hybrid_only, DesignOptions::default())
            });
            let agg = aggregate(&cfg, &trials);
            let h = agg.method(Method::Hybrid).expect("hybrid always runs");
            s_row.push(h.success_rate.unwrap_or(0.0));
            e_row.push(h.metrics.get("fixed_R_deg").map_or(f64::NAN, |m| m.mean));
            a_row.push(agg);
        }
        grid.success.push(s_row);
        grid.error_deg.push(e_row);
        grid.aggregates.push(a_row);
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
}

impl FigureId {
    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            2 => Ok(FigureId::Fig2),
            3 => Ok(FigureId::Fig3),
            4 => Ok(FigureId::Fig4),
            _ => Err(Error::Config(format!("figure must be 2, 3 or 4, got {n}"))),
        }
    }
}

/// One long-format figure record.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub setup: String,
    pub method: Method,
    pub metric: String,
    pub trial_or_l: String,
    pub value: f64,
}

/// Radio setup of a figure series: transmissions and power (dBm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioSetup {
    pub label: &'static str,
    pub n_transmissions: u32,
    pub tx_power_dbm: f64,
}

pub const FIG2_SETUPS: [RadioSetup; 3] = [
    RadioSetup { label: "i", n_transmissions: 64, tx_power_dbm: 17.0 },
    RadioSetup { label: "ii", n_transmissions: 256, tx_power_dbm: 17.0 },
    RadioSetup { label: "iii", n_transmissions: 256, tx_power_dbm: 20.0 },
];

pub const FIG3_SETUPS: [RadioSetup; 2] = [
    RadioSetup { label: "i", n_transmissions: 64, tx_power_dbm: 17.0 },
    RadioSetup { label: "ii", n_transmissions: 128, tx_power_dbm: 20.0 },
];

pub const FIG4_SETUPS: [RadioSetup; 3] = [
    RadioSetup { label: "i", n_transmissions: 64, tx_power_dbm: 17.0 },
    RadioSetup { label: "ii", n_transmissions: 128, tx_power_dbm: 17.0 },
    RadioSetup { label: "iii", n_transmissions: 128, tx_power_dbm: 20.0 },
];

pub const FIG4_BS_COUNTS: [usize; 4] = [2, 4, 6, 8];

fn with_setup(base: &ScenarioConfig, setup: &RadioSetup, n_bs: usize) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.n_bs = n_bs;
    cfg.radio.n_transmissions = setup.n_transmissions;
    cfg.radio.tx_power_dbm = setup.tx_power_dbm;
    cfg
}

fn run_methods(cfg: &ScenarioConfig, n_trials: usize, base_seed: u64, jobs: usize, methods: MethodSet) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    Ok(parallel_map(n_trials, jobs, |i| {
        run_trial_with(cfg, base_seed.wrapping_add(i as u64), methods, DesignOptions::default())
    }))
}

/// Figure series. GNSS-only results do not depend on the radio setup or
/// on L, so they are computed once per figure and repeated per setup.
pub fn figure_data(id: FigureId, base: &ScenarioConfig, n_trials: usize, base_seed: u64, jobs: usize) -> Result<Vec<FigureRow>> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    let gnss_set = MethodSet { hybrid: false, gnss_only: true, fiveg_only: false };
    let mut rows = Vec::new();
    let mut push = |setup: &str, method: Method, metric: &str, key: String, value: f64| {
        rows.push(FigureRow { setup: setup.to_string(), method, metric: metric.to_string(), trial_or_l: key, value });
    };
    match id {
        FigureId::Fig2 => {
            let gnss = aggregate(base, &run_methods(&with_setup(base, &FIG2_SETUPS[0], 1), n_trials, base_seed, jobs, gnss_set)?);
            let set = MethodSet { hybrid: true, gnss_only: false, fiveg_only: false };
            for setup in &FIG2_SETUPS {
                let cfg = with_setup(base, setup, 1);
                let hybrid = aggregate(&cfg, &run_methods(&cfg, n_trials, base_seed, jobs, set)?);
                for (method, agg) in [(Method::GnssOnly, &gnss), (Method::Hybrid, &hybrid)] {
                    for metric in ["float_Z", "float_R", "fixed_R_frob"] {
                        let v = agg.metric(method, metric).map_or(f64::NAN, |m| m.mean);
                        push(setup.label, method, &format!("{metric}_mean"), "1".into(), v);
                    }
                }
            }
        }
        FigureId::Fig3 => {
            let gnss = run_methods(&with_setup(base, &FIG3_SETUPS[0], 3), n_trials, base_seed, jobs, gnss_set)?;
            let set = MethodSet { hybrid: true, gnss_only: false, fiveg_only: true };
            for setup in &FIG3_SETUPS {
                let cfg = with_setup(base, setup, 3);
                let trials = run_methods(&cfg, n_trials, base_seed, jobs, set)?;
                for (i, (g, t)) in gnss.iter().zip(&trials).enumerate() {
                    for (method, o) in [(Method::GnssOnly, &g.gnss_only), (Method::FivegOnly, &t.fiveg_only), (Method::Hybrid, &t.hybrid)] {
                        let v = o.result().map_or(f64::NAN, |r| r.fixed_r_error_frobenius);
                        push(setup.label, method, "fixed_R_frob", i.to_string(), v);
                    }
                }
            }
        }
        FigureId::Fig4 => {
            let gnss = aggregate(base, &run_methods(&with_setup(base, &FIG4_SETUPS[0], 2), n_trials, base_seed, jobs, gnss_set)?);
            let gnss_rmse = gnss.metric(Method::GnssOnly, "fixed_R_deg").map_or(f64::NAN, |m| m.rmse);
            let set = MethodSet { hybrid: true, gnss_only: false, fiveg_only: true };
            for setup in &FIG4_SETUPS {
                for &l in &FIG4_BS_COUNTS {
                    let cfg = with_setup(base, setup, l);
                    let agg = aggregate(&cfg, &run_methods(&cfg, n_trials, base_seed, jobs, set)?);
                    push(setup.label, Method::GnssOnly, "fixed_R_deg_rmse", l.to_string(), gnss_rmse);
                    for method in [Method::FivegOnly, Method::Hybrid] {
                        let v = agg.metric(method, "fixed_R_deg").map_or(f64::NAN, |m| m.rmse);
                        push(setup.label, method, "fixed_R_deg_rmse", l.to_string(), v);
                    }
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(cfg: ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig { gnss_noise: false, aoa_noise: false, ..cfg }
    }

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = ScenarioConfig::default();
        assert_eq!(run_trial(&cfg, 11), run_trial(&cfg, 11));
    }

    #[test]
    fn noiseless_trial_is_exact() {
        let cfg = quiet(ScenarioConfig::default());
        let t = run_trial(&cfg, 5);
        for m in Method::ALL {
            let r = t.outcome(m).result().unwrap_or_else(|| panic!("{m} failed: {:?}", t.outcome(m)));
            assert!(r.fixed_r_error_deg < 1e-6, "{m}: {}", r.fixed_r_error_deg);
            assert!(r.float_r_error.unwrap_or(0.0) < 1e-6);
            assert!(r.float_z_error.unwrap_or(0.0) < 1e-6);
            assert!(r.success.unwrap_or(true));
        }
    }

    #[test]
    fn without_stations_hybrid_equals_gnss_only() {
        let cfg = ScenarioConfig { n_bs: 0, ..ScenarioConfig::default() };
        let t = run_trial(&cfg, 3);
        assert_eq!(t.hybrid, t.gnss_only);
        assert_eq!(t.fiveg_only, Outcome::Skipped);
    }

    #[test]
    fn single_station_skips_fiveg_only() {
        let cfg = ScenarioConfig { n_bs: 1, ..ScenarioConfig::default() };
        assert_eq!(run_trial(&cfg, 3).fiveg_only, Outcome::Skipped);
    }

    #[test]
    fn rmse_squared_is_mean_square() {
        let v = [0.5, 1.5, 2.0, 0.0];
        let s = MetricSummary::from_values(&v);
        let ms = v.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!((s.rmse * s.rmse - ms).abs() < 1e-12);
        assert!((s.mean - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_trial_campaign_matches_trial() {
        let cfg = ScenarioConfig::default();
        let c = run_campaign(&cfg, 1, 9, 1).unwrap();
        let t = run_trial(&cfg, 9);
        let h = t.hybrid.result().unwrap();
        let agg = c.aggregate.metric(Method::Hybrid, "fixed_R_deg").unwrap();
        assert_eq!(agg.mean, h.fixed_r_error_deg);
        assert_eq!(c.aggregate.method(Method::Hybrid).unwrap().success_rate, Some(if t.success() { 1.0 } else { 0.0 }));
    }

    #[test]
    fn parallel_campaign_matches_serial() {
        let cfg = ScenarioConfig::default();
        let a = run_campaign(&cfg, 6, 100, 1).unwrap();
        let b = run_campaign(&cfg, 6, 100, 4).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.aggregate, b.aggregate);
    }

    #[test]
    fn table_presets() {
        assert_eq!(table_preset(2).unwrap(), TablePreset { sigma_phase: 0.03, n_transmissions: 64 });
        assert_eq!(table_preset(5).unwrap().n_transmissions, 512);
        assert_eq!(table_preset(7).unwrap().sigma_phase, 0.003);
        assert!(table_preset(8).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            ScenarioConfig { n_satellites: 3, ..Default::default() },
            ScenarioConfig { sigma_phase: 0.0, ..Default::default() },
            ScenarioConfig { n_bs: 9, ..Default::default() },
            ScenarioConfig { baselines: vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
