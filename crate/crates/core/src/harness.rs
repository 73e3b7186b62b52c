//! Experiment configuration, orchestration and result files.
//!
//! A run reads one JSON config, dispatches on its `kind` and writes into the
//! output directory:
//!
//! * `results.jsonl`: a header line (`schema_version`, `kind`,
//!   `config_digest`) followed by one [`ResultRow`] per line;
//! * `summary.csv`: the same rows as CSV;
//! * `plot.csv`: `series,x,y` records for plotting;
//! * `report.json`: the full structured report (codebook, bound values, …);
//! * `metadata.json`: timestamps and wall-clock time, the only content that
//!   differs between reruns.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{bound_report, converse_trend, BoundReport, ConverseValue};
use crate::channel::{ChannelParams, PowerConstraints, RawChannelParams, RawPower};
use crate::di_code::{
    calibrate_threshold_to, construct_codebook, di_rate, estimate_errors, memory_scaling,
    packing_log_count_bound, CalibrationRule, ConstructionStrategy, DICodebook,
};
use crate::dif_protocol::{
    build_dif_code, default_hash_range, dif_rate, estimate_dif_errors, estimate_inner_error,
    max_messages_log_log, typical_log_size, DifSettings, DEFAULT_TYPICALITY_TAIL,
};
use crate::measures::{
    bhattacharyya, poisson_bhattacharyya_sq, poisson_entropy_approx, poisson_entropy_exact,
    poisson_pmf_truncated, tv_distance, DEFAULT_TAIL_MASS,
};
use crate::rng::derive_seed;
use crate::sim::{ErrorEstimate, SimResult};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DTPC_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

pub const RESULTS_FILE: &str = "results.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.csv";
pub const REPORT_FILE: &str = "report.json";
pub const METADATA_FILE: &str = "metadata.json";

pub const DEFAULT_CONVERSE_GRID: [usize; 5] = [64, 256, 1024, 4096, 16384];
pub const DEFAULT_MEANS: [f64; 8] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
pub const DEFAULT_DIF_MESSAGES: u64 = 1 << 20;

const CONSTRUCTION_SEED: u64 = 1;
const CALIBRATION_SEED: u64 = 2;
const SIMULATION_SEED: u64 = 3;
const INNER_SEED: u64 = 4;
const CODE_SEED: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Bounds,
    DiSim,
    DifSim,
    MeasuresCheck,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Bounds => "bounds",
            Kind::DiSim => "di-sim",
            Kind::DifSim => "dif-sim",
            Kind::MeasuresCheck => "measures-check",
        }
    }
}

fn default_lambda() -> f64 {
    0.1
}

fn default_epsilon() -> f64 {
    0.2
}

fn default_tail() -> f64 {
    DEFAULT_TYPICALITY_TAIL
}

fn default_rule() -> CalibrationRule {
    CalibrationRule::WilsonUpper
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub channel: RawChannelParams,
    pub power: RawPower,
    /// Block length (pilot length for `dif-sim`).
    #[serde(default)]
    pub n: Option<usize>,
    /// Memory exponent; when given with `n`, `⌊n^κ⌋` must equal the channel memory.
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Explicit memory length; must equal `hit_probs.len() - 1`.
    #[serde(default)]
    pub memory: Option<usize>,
    #[serde(default = "default_lambda")]
    pub lambda1: f64,
    #[serde(default = "default_lambda")]
    pub lambda2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_tail")]
    pub typicality_tail: f64,
    /// Hash range `M`; defaults to the smallest power of two `>= 2/λ2`.
    #[serde(default)]
    pub hash_range: Option<u64>,
    /// Number of DIF message identities `N`.
    #[serde(default)]
    pub messages: Option<u64>,
    /// `(sent, tested)` DIF pairs; defaults to a 4-cycle over messages 1..=4.
    #[serde(default)]
    pub pairs: Option<Vec<(u64, u64)>>,
    #[serde(default)]
    pub trials: u64,
    /// Trials spent calibrating the DI threshold; defaults to `max(trials, 1000)`.
    #[serde(default)]
    pub calibration_trials: Option<u64>,
    #[serde(default = "default_rule")]
    pub calibration_rule: CalibrationRule,
    /// Type I budget used while calibrating; defaults to `lambda1`.
    #[serde(default)]
    pub calibration_budget: Option<f64>,
    #[serde(default)]
    pub strategy: ConstructionStrategy,
    /// Block lengths of the converse trend.
    #[serde(default)]
    pub converse_grid: Option<Vec<usize>>,
    /// Poisson means compared pairwise by `measures-check`.
    #[serde(default)]
    pub means: Option<Vec<f64>>,
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// SHA-256 of the raw config bytes, hex encoded.
pub fn config_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentConfig {
    /// Parses a config and returns it with the digest of `bytes`.
    pub fn from_slice(bytes: &[u8]) -> Result<(Self, String)> {
        Ok((serde_json::from_slice(bytes)?, config_digest(bytes)))
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_slice(&bytes)
    }

    fn calibration_trials(&self) -> u64 {
        self.calibration_trials.unwrap_or(self.trials.max(1000))
    }

    fn messages(&self) -> u64 {
        self.messages.unwrap_or(DEFAULT_DIF_MESSAGES)
    }

    fn pairs(&self) -> Vec<(u64, u64)> {
        self.pairs
            .clone()
            .unwrap_or_else(|| vec![(1, 2), (2, 3), (3, 4), (4, 1)])
    }

    /// Every violated constraint, checked before anything runs.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let ch = &self.channel;
        if let Some(mut c) = ChannelParams::violations(&ch.hit_probs, ch.slot_duration, ch.dark_current) {
            v.append(&mut c);
        }
        let k = ch.hit_probs.len().saturating_sub(1);
        let (peak, avg) = (self.power.peak, self.power.avg);
        if !(peak > 0.0 && peak.is_finite()) {
            v.push(format!("power.peak must be > 0, got {peak}"));
        }
        if !(avg > 0.0 && avg.is_finite()) {
            v.push(format!("power.avg must be > 0, got {avg}"));
        }
        if let Some(m) = self.memory {
            if m != k {
                v.push(format!("memory = {m} but channel has K = {k}"));
            }
        }
        if let Some(kappa) = self.kappa {
            if !(0.0..1.0).contains(&kappa) {
                v.push(format!("kappa must lie in [0, 1), got {kappa}"));
            } else if let (Some(n), Kind::DiSim) = (self.n, self.kind) {
                if n >= 1 && memory_scaling(n, kappa).ok() != Some(k) {
                    v.push(format!("floor(n^kappa) for n={n}, kappa={kappa} does not match channel K = {k}"));
                }
            }
        }
        let (l1, l2) = (self.lambda1, self.lambda2);
        if !(l1 >= 0.0 && l2 >= 0.0 && l1 + l2 < 1.0) {
            v.push(format!("need lambda1, lambda2 >= 0 and lambda1 + lambda2 < 1, got {l1}, {l2}"));
        } else if matches!(self.kind, Kind::Bounds | Kind::DiSim) && l1 + l2 == 0.0 {
            v.push("lambda1 + lambda2 must be > 0".to_owned());
        }

        let needs_n = matches!(self.kind, Kind::DiSim | Kind::DifSim);
        if needs_n && !matches!(self.n, Some(n) if n >= 1) {
            v.push(format!("{} needs n >= 1", self.kind.as_str()));
        }
        if needs_n && self.trials == 0 {
            v.push(format!("{} needs trials >= 1", self.kind.as_str()));
        }

        match self.kind {
            Kind::Bounds => {
                if self.kappa.is_none() {
                    v.push("bounds needs kappa".to_owned());
                }
                if let Some(bad) = self.converse_grid.iter().flatten().find(|&&n| n < 2) {
                    v.push(format!("converse_grid entries must be >= 2, got {bad}"));
                }
            }
            Kind::DiSim => {
                if let Some(b) = self.calibration_budget {
                    if !(0.0..=self.lambda1).contains(&b) {
                        v.push(format!("calibration_budget must lie in [0, lambda1], got {b}"));
                    }
                }
                if !(self.strategy.separation >= 1.0 && self.strategy.separation.is_finite()) {
                    v.push(format!("strategy.separation must be >= 1, got {}", self.strategy.separation));
                }
                if self.calibration_trials() < 1000 {
                    v.push(format!("calibration_trials must be >= 1000, got {}", self.calibration_trials()));
                }
                let s = &self.strategy;
                if s.alphabet.is_empty() || s.alphabet.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    v.push("strategy.alphabet must be non-empty fractions in [0, 1]".to_owned());
                }
                if s.max_codewords == 0 {
                    v.push("strategy.max_codewords must be >= 1".to_owned());
                }
            }
            Kind::DifSim => self.dif_violations(&mut v),
            Kind::MeasuresCheck => {
                if let Some(bad) = self.means.iter().flatten().find(|m| !(**m >= 0.0 && m.is_finite())) {
                    v.push(format!("means must be finite and >= 0, got {bad}"));
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    fn dif_violations(&self, v: &mut Vec<String>) {
        if !(self.epsilon > 0.0) {
            v.push(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.typicality_tail > 0.0 && self.typicality_tail < 1.0) {
            v.push(format!("typicality_tail must lie in (0, 1), got {}", self.typicality_tail));
        }
        let n_messages = self.messages();
        let range = match self.hash_range {
            Some(m) => Some(m),
            None => default_hash_range(self.lambda2).ok(),
        };
        match range {
            None => v.push("hash_range is unset and lambda2 gives no default".to_owned()),
            Some(m) => {
                if m == 0 || m > n_messages {
                    v.push(format!("hash_range must satisfy 1 <= M <= messages = {n_messages}, got {m}"));
                }
                if let Some(n) = self.n {
                    let len = (n as f64).sqrt().ceil() as u32;
                    if len < 64 && m > 1u64 << len {
                        v.push(format!("hash_range {m} exceeds 2^{len} inner codewords"));
                    }
                }
            }
        }
        for (i, j) in self.pairs() {
            if i == j {
                v.push(format!("pair ({i}, {j}) must name two different messages"));
            }
            for msg in [i, j] {
                if msg == 0 || msg > n_messages {
                    v.push(format!("pair message {msg} outside 1..={n_messages}"));
                }
            }
        }
    }

    fn channel(&self) -> Result<ChannelParams> {
        ChannelParams::new(
            self.channel.hit_probs.clone(),
            self.channel.slot_duration,
            self.channel.dark_current,
        )
    }

    fn constraints(&self) -> Result<PowerConstraints> {
        PowerConstraints::new(self.power.peak, self.power.avg)
    }
}

/// One summary record. Bound-type rows leave the message, interval and trial
/// columns empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_digest: String,
    pub metric: String,
    pub message_i: Option<u64>,
    pub message_j: Option<u64>,
    pub estimate: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub trials: Option<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsHeader {
    pub schema_version: u32,
    pub kind: Kind,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsOutput {
    pub report: BoundReport,
    pub converse: Vec<ConverseValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiOutput {
    pub codebook: DICodebook,
    pub packing_bound_bits: f64,
    pub rate: f64,
    pub sim: SimResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifOutput {
    pub hash_range: u64,
    pub inner_length: usize,
    pub typical_log_size_bits: f64,
    pub max_messages_log_log: f64,
    pub rate: f64,
    pub inner_error: ErrorEstimate,
    pub sim: SimResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub mean1: f64,
    pub mean2: f64,
    pub closed_form_sq: f64,
    pub summed_sq: f64,
    pub tv: f64,
    pub sandwich_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuresOutput {
    pub pairs: Vec<PairCheck>,
    pub max_bhattacharyya_gap: f64,
    pub sandwich_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Report {
    Bounds(BoundsOutput),
    DiSim(DiOutput),
    DifSim(DifOutput),
    MeasuresCheck(MeasuresOutput),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub kind: Kind,
    pub config_digest: String,
    pub rows: Vec<ResultRow>,
    pub plot: Vec<PlotRow>,
    pub report: Report,
}

struct Rows<'a> {
    digest: &'a str,
    seed: u64,
    rows: Vec<ResultRow>,
}

impl Rows<'_> {
    fn value(&mut self, metric: impl Into<String>, estimate: f64) {
        self.rows.push(ResultRow {
            config_digest: self.digest.to_owned(),
            metric: metric.into(),
            message_i: None,
            message_j: None,
            estimate,
            ci_low: None,
            ci_high: None,
            trials: None,
            seed: self.seed,
        });
    }

    fn error(&mut self, metric: &str, i: Option<u64>, j: Option<u64>, e: &ErrorEstimate) {
        self.rows.push(ResultRow {
            config_digest: self.digest.to_owned(),
            metric: metric.to_owned(),
            message_i: i,
            message_j: j,
            estimate: e.estimate,
            ci_low: Some(e.ci_low),
            ci_high: Some(e.ci_high),
            trials: Some(e.trials),
            seed: self.seed,
        });
    }

    fn sim(&mut self, sim: &SimResult) {
        for m in &sim.type_one {
            self.error("type-one", Some(m.message), None, &m.error);
        }
        for p in &sim.type_two {
            self.error("type-two", Some(p.sent), Some(p.tested), &p.error);
        }
        self.value("type-one-max-upper", sim.type_one_upper());
        self.value("type-two-max-upper", sim.type_two_upper());
    }
}

fn sim_plot(sim: &SimResult) -> Vec<PlotRow> {
    let mut plot: Vec<PlotRow> = sim
        .type_one
        .iter()
        .map(|m| PlotRow {
            series: "type-one".into(),
            x: m.message as f64,
            y: m.error.estimate,
        })
        .collect();
    // worst Type II per sent message
    let mut worst: std::collections::BTreeMap<u64, f64> = Default::default();
    for p in &sim.type_two {
        let w = worst.entry(p.sent).or_insert(0.0);
        *w = w.max(p.error.estimate);
    }
    plot.extend(worst.into_iter().map(|(sent, y)| PlotRow {
        series: "type-two-max".into(),
        x: sent as f64,
        y,
    }));
    plot
}

/// Validates `config` and runs its pipeline. Nothing is written.
pub fn run(config: &ExperimentConfig, digest: &str) -> Result<RunOutput> {
    config.validate()?;
    let params = config.channel()?;
    let constraints = config.constraints()?;
    let seed = config.master_seed;
    let mut rows = Rows {
        digest,
        seed,
        rows: Vec::new(),
    };
    let mut plot = Vec::new();

    let report = match config.kind {
        Kind::Bounds => {
            let kappa = config.kappa.expect("validated");
            let report = bound_report(kappa, &params, constraints.peak())?;
            let grid = config.converse_grid.clone().unwrap_or(DEFAULT_CONVERSE_GRID.to_vec());
            let converse = converse_trend(&grid, kappa, &params, &constraints, config.lambda1, config.lambda2)?;
            rows.value("di-lower", report.di_lower);
            rows.value("di-upper", report.di_upper);
            rows.value("dif-lower-exact", report.dif_lower_exact);
            rows.value("dif-lower-asymptotic", report.dif_lower_asymptotic);
            for c in &converse {
                rows.value(format!("converse-normalized@n={}", c.n), c.normalized);
                plot.push(PlotRow {
                    series: "converse-normalized".into(),
                    x: c.n as f64,
                    y: c.normalized,
                });
            }
            Report::Bounds(BoundsOutput { report, converse })
        }
        Kind::DiSim => {
            let n = config.n.expect("validated");
            let mut book = construct_codebook(
                n,
                &params,
                &constraints,
                config.lambda1,
                config.lambda2,
                &config.strategy,
                derive_seed(seed, &[CONSTRUCTION_SEED]),
            )?;
            calibrate_threshold_to(
                &mut book,
                config.calibration_budget.unwrap_or(config.lambda1),
                config.calibration_trials(),
                derive_seed(seed, &[CALIBRATION_SEED]),
                config.calibration_rule,
            )?;
            let sim = estimate_errors(&book, config.trials, derive_seed(seed, &[SIMULATION_SEED]))?;
            let packing_bound_bits = packing_log_count_bound(&book.geometry(config.kappa)?)?;
            let rate = di_rate((book.len() as f64).log2(), n);
            rows.value("codebook-size", book.len() as f64);
            rows.value("threshold", book.threshold());
            if let Some((d, _, _)) = book.min_pairwise_distance() {
                rows.value("min-distance", d);
            }
            rows.value("radius", book.radius());
            rows.value("packing-bound-bits", packing_bound_bits);
            rows.value("rate", rate);
            rows.sim(&sim);
            plot = sim_plot(&sim);
            Report::DiSim(DiOutput {
                codebook: book,
                packing_bound_bits,
                rate,
                sim,
            })
        }
        Kind::DifSim => {
            let n = config.n.expect("validated");
            let settings = DifSettings {
                n,
                peak: constraints.peak(),
                avg: constraints.avg(),
                epsilon: config.epsilon,
                typicality_tail: config.typicality_tail,
                messages: config.messages(),
                range: config.hash_range,
                lambda2: config.lambda2,
                seed: derive_seed(seed, &[CODE_SEED]),
            };
            let code = build_dif_code(&params, &settings)?;
            let sim = estimate_dif_errors(&code, &config.pairs(), config.trials, derive_seed(seed, &[SIMULATION_SEED]))?;
            let inner_error = estimate_inner_error(
                &code.inner,
                &params,
                &code.pilot.input(),
                config.trials,
                derive_seed(seed, &[INNER_SEED]),
            )?;
            let out = DifOutput {
                hash_range: code.hashes.range,
                inner_length: code.inner.length(),
                typical_log_size_bits: typical_log_size(n, params.memory(), &code.typ)?,
                max_messages_log_log: max_messages_log_log(n, &params, constraints.peak())?,
                rate: dif_rate(max_messages_log_log(n, &params, constraints.peak())?, code.m()),
                inner_error,
                sim,
            };
            rows.value("hash-range", out.hash_range as f64);
            rows.error("inner-error", None, None, &out.inner_error);
            rows.value("typical-log-size-bits", out.typical_log_size_bits);
            rows.value("max-messages-log-log", out.max_messages_log_log);
            rows.value("rate", out.rate);
            rows.sim(&out.sim);
            plot = sim_plot(&out.sim);
            Report::DifSim(out)
        }
        Kind::MeasuresCheck => {
            let means = config.means.clone().unwrap_or(DEFAULT_MEANS.to_vec());
            let out = measures_check(&means)?;
            let mut idx = 0;
            for a in 0..means.len() {
                for b in a + 1..means.len() {
                    let p = &out.pairs[idx];
                    idx += 1;
                    let (i, j) = (Some(a as u64 + 1), Some(b as u64 + 1));
                    for (metric, value) in [
                        ("bhattacharyya-sq-closed", p.closed_form_sq),
                        ("bhattacharyya-sq-summed", p.summed_sq),
                        ("tv-distance", p.tv),
                    ] {
                        rows.rows.push(ResultRow {
                            message_i: i,
                            message_j: j,
                            ..pair_row(&rows, metric, value)
                        });
                    }
                }
            }
            for &m in means.iter().filter(|&&m| m > 0.0) {
                let exact = poisson_entropy_exact(m, DEFAULT_TAIL_MASS)?;
                let approx = poisson_entropy_approx(m)?;
                plot.push(PlotRow {
                    series: "entropy-exact".into(),
                    x: m,
                    y: exact,
                });
                plot.push(PlotRow {
                    series: "entropy-approx".into(),
                    x: m,
                    y: approx,
                });
            }
            rows.value("max-bhattacharyya-gap", out.max_bhattacharyya_gap);
            rows.value("sandwich-violations", out.sandwich_violations as f64);
            Report::MeasuresCheck(out)
        }
    };

    Ok(RunOutput {
        kind: config.kind,
        config_digest: digest.to_owned(),
        rows: rows.rows,
        plot,
        report,
    })
}

fn pair_row(rows: &Rows<'_>, metric: &str, estimate: f64) -> ResultRow {
    ResultRow {
        config_digest: rows.digest.to_owned(),
        metric: metric.to_owned(),
        message_i: None,
        message_j: None,
        estimate,
        ci_low: None,
        ci_high: None,
        trials: None,
        seed: rows.seed,
    }
}

/// Closed-form vs summed Bhattacharyya and the fidelity sandwich for every
/// pair of `means`.
pub fn measures_check(means: &[f64]) -> Result<MeasuresOutput> {
    const SLACK: f64 = 1e-6;
    let laws = means
        .iter()
        .map(|&m| poisson_pmf_truncated(m, 1e-20))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            let f = bhattacharyya(&laws[a], &laws[b]);
            let tv = tv_distance(&laws[a], &laws[b]);
            pairs.push(PairCheck {
                mean1: means[a],
                mean2: means[b],
                closed_form_sq: poisson_bhattacharyya_sq(means[a], means[b]),
                summed_sq: f * f,
                tv,
                sandwich_holds: 1.0 - f <= tv + SLACK && tv <= (1.0 - f * f).max(0.0).sqrt() + SLACK,
            });
        }
    }
    Ok(MeasuresOutput {
        max_bhattacharyya_gap: pairs
            .iter()
            .map(|p| (p.closed_form_sq - p.summed_sq).abs())
            .fold(0.0, f64::max),
        sandwich_violations: pairs.iter().filter(|p| !p.sandwich_holds).count() as u64,
        pairs,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_results(path: &Path, kind: Kind, digest: &str, rows: &[ResultRow]) -> Result<()> {
    let mut w = create(path)?;
    let header = ResultsHeader {
        schema_version: SCHEMA_VERSION,
        kind,
        config_digest: digest.to_owned(),
    };
    let mut line = |v: String| writeln!(w, "{v}").map_err(|e| Error::io(path, e));
    line(serde_json::to_string(&header)?)?;
    for row in rows {
        line(serde_json::to_string(row)?)?;
    }
    finish(w, path)
}

/// Reads a results file, rejecting schema versions other than [`SCHEMA_VERSION`].
pub fn read_results(path: &Path) -> Result<(ResultsHeader, Vec<ResultRow>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::invalid(format!("{} is empty", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&first)?;
    let found = raw
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::invalid("results header lacks schema_version"))?;
    if found != SCHEMA_VERSION as u64 {
        return Err(Error::UnsupportedSchema {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    let header: ResultsHeader = serde_json::from_value(raw)?;
    let rows = lines
        .map(|l| {
            let l = l.map_err(|e| Error::io(path, e))?;
            Ok(serde_json::from_str(&l)?)
        })
        .collect::<Result<Vec<ResultRow>>>()?;
    Ok((header, rows))
}

pub fn write_summary(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record([
        "config_digest", "metric", "message_i", "message_j", "estimate", "ci_low", "ci_high", "trials", "seed",
    ])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Writes `series,x,y` records; an empty slice yields a header-only file.
pub fn emit_plot_data(rows: &[PlotRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["series", "x", "y"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_plot_data(path: &Path) -> Result<Vec<PlotRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub config_digest: String,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub package_version: String,
}

/// Writes every deterministic output file of `out` into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_results(&dir.join(RESULTS_FILE), out.kind, &out.config_digest, &out.rows)?;
    write_summary(&dir.join(SUMMARY_FILE), &out.rows)?;
    emit_plot_data(&out.plot, &dir.join(PLOT_FILE))?;
    let report_path = dir.join(REPORT_FILE);
    let mut w = create(&report_path)?;
    serde_json::to_writer_pretty(&mut w, &out.report)?;
    writeln!(w).map_err(|e| Error::io(&report_path, e))?;
    finish(w, &report_path)
}

/// [`run`], then [`write_outputs`] plus the metadata file.
pub fn execute(config: &ExperimentConfig, digest: &str, dir: &Path) -> Result<RunOutput> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let out = run(config, digest)?;
    write_outputs(&out, dir)?;
    let meta = Metadata {
        schema_version: SCHEMA_VERSION,
        config_digest: digest.to_owned(),
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        package_version: env!("CARGO_PKG_VERSION").to_owned(),
    };
    let path = dir.join(METADATA_FILE);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &meta)?;
    finish(w, &path)?;
    Ok(out)
}

/// Output directory: explicit flag, then the config, then [`OUT_DIR_ENV`].
pub fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig, env: Option<&str>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}
