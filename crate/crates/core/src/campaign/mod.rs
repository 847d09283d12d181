//! Seeded randomized verification campaigns.
//!
//! A [`Campaign`] turns an RNG into one checked instance. [`run_campaign`]
//! derives an independent seed for every trial from the master seed, runs the
//! trials on a thread pool and reduces the records in trial order, so a report
//! depends only on `(campaign, params, trials, seed, version)`.

mod algebra;
mod calibration;
mod currents;
mod planes;

use std::collections::BTreeMap;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sampling;

/// Parameters shared by all campaigns; each campaign reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignParams {
    pub m: usize,
    pub n: usize,
    /// Number of planes for fixed-size families.
    pub planes: usize,
    /// Largest family size for combinatorial campaigns.
    pub max_planes: usize,
    /// Fixed `δ`; drawn per trial when absent.
    pub delta: Option<f64>,
    pub delta_bar: f64,
    pub big_m: f64,
    pub amplitude: f64,
    pub noise: f64,
    pub spine_cutoff: f64,
    pub resolution: usize,
    pub samples: usize,
    pub depth: u32,
    pub tau: f64,
    pub rho_star: f64,
    pub rotation_angle: f64,
    pub fraction: f64,
    /// Hill-climb steps per search in the calibration campaigns.
    pub refine_steps: usize,
}

impl Default for CampaignParams {
    fn default() -> Self {
        Self {
            m: 3,
            n: 2,
            planes: 2,
            max_planes: 6,
            delta: None,
            delta_bar: 0.25,
            big_m: 2.0,
            amplitude: 0.01,
            noise: 0.001,
            spine_cutoff: crate::excess::DEFAULT_SPINE_CUTOFF,
            resolution: 1024,
            samples: 2000,
            depth: 4,
            tau: 0.1,
            rho_star: crate::whitney::DEFAULT_RHO_STAR,
            rotation_angle: 1e-3,
            fraction: 0.05,
            refine_steps: 150,
        }
    }
}

/// Result of one trial as produced by a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub passed: bool,
    /// Signed slack of the tightest checked inequality (`≥ 0` when it holds).
    pub margin: f64,
    pub metrics: Vec<(&'static str, f64)>,
}

impl TrialOutcome {
    pub fn new(passed: bool, margin: f64) -> Self {
        Self {
            passed,
            margin,
            metrics: Vec::new(),
        }
    }

    pub fn metric(mut self, name: &'static str, value: f64) -> Self {
        self.metrics.push((name, value));
        self
    }
}

pub trait Campaign: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    /// Whether a failed trial is a violated invariant. Calibration campaigns
    /// only record their constants.
    fn hard(&self) -> bool {
        true
    }

    /// The metric whose maximum is the campaign's calibrated constant.
    fn constant(&self) -> Option<&'static str> {
        None
    }

    fn run_trial(&self, params: &CampaignParams, trial: u64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome>;
}

pub fn registry() -> Vec<Box<dyn Campaign>> {
    vec![
        Box::new(algebra::Prune),
        Box::new(algebra::Layers),
        Box::new(algebra::Clusters1),
        Box::new(algebra::Clusters2),
        Box::new(algebra::Clusters3),
        Box::new(planes::Angles),
        Box::new(planes::Rotation),
        Box::new(planes::Hausdorff),
        Box::new(planes::Sandwich),
        Box::new(calibration::SepRegion),
        Box::new(calibration::Spine),
        Box::new(calibration::Shift),
        Box::new(calibration::Maximizer),
        Box::new(currents::ExcessScaling),
        Box::new(currents::Whitney),
        Box::new(currents::PlanarOpt),
    ]
}

pub fn find(name: &str) -> Result<Box<dyn Campaign>> {
    registry()
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| Error::UnknownCampaign(name.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub passed: bool,
    pub margin: f64,
    pub metrics: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub campaign: String,
    pub version: String,
    pub master_seed: u64,
    pub trials: u64,
    pub params: CampaignParams,
    pub hard: bool,
    pub passed: u64,
    pub errors: u64,
    pub worst_margin: f64,
    pub constant: Option<f64>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub records: Vec<TrialRecord>,
    /// SHA-256 of the report with this field empty and `wall_clock_secs` zero.
    pub hash: String,
    pub wall_clock_secs: f64,
}

impl CampaignReport {
    /// True when a hard campaign saw a trial that ran and failed.
    pub fn hard_failure(&self) -> bool {
        self.hard && self.records.iter().any(|r| !r.passed && r.error.is_none())
    }

    /// `NAME pass/trials worst_margin seed`.
    pub fn summary_line(&self) -> String {
        format!(
            "{} {}/{} {:e} {}",
            self.campaign, self.passed, self.trials, self.worst_margin, self.master_seed
        )
    }

    /// One row per trial: index, seed, outcome, margin, then every metric.
    pub fn to_csv(&self) -> String {
        let names: Vec<&String> = self.aggregates.keys().collect();
        let mut out = String::from("trial,seed,passed,margin");
        for n in &names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",error\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}", r.trial, r.seed, r.passed, r.margin));
            for n in &names {
                out.push(',');
                if let Some(v) = r.metrics.get(*n) {
                    out.push_str(&v.to_string());
                }
            }
            out.push(',');
            if let Some(e) = &r.error {
                out.push('"');
                out.push_str(&e.replace('"', "'"));
                out.push('"');
            }
            out.push('\n');
        }
        out
    }

    fn digest(&self) -> String {
        let mut copy = self.clone();
        copy.hash = String::new();
        copy.wall_clock_secs = 0.0;
        let bytes = serde_json::to_vec(&copy).expect("report serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Thread count from `CONEKIT_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("CONEKIT_THREADS")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
}

pub fn run_campaign(
    campaign: &dyn Campaign,
    params: &CampaignParams,
    trials: u64,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<CampaignReport> {
    if trials == 0 {
        return Err(Error::param("trial count must be at least 1"));
    }
    let start = Instant::now();
    let run = |trial: u64| {
        let seed = sampling::split_seed(master_seed, trial);
        let mut rng = sampling::rng(seed);
        match campaign.run_trial(params, trial, &mut rng) {
            Ok(o) => TrialRecord {
                trial,
                seed,
                passed: o.passed,
                margin: o.margin,
                metrics: o.metrics.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                error: None,
            },
            Err(e) => TrialRecord {
                trial,
                seed,
                passed: false,
                margin: f64::NAN,
                metrics: BTreeMap::new(),
                error: Some(e.to_string()),
            },
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;
    let records: Vec<TrialRecord> = pool.install(|| (0..trials).into_par_iter().map(run).collect());

    let passed = records.iter().filter(|r| r.passed).count() as u64;
    let errors = records.iter().filter(|r| r.error.is_some()).count() as u64;
    let worst_margin = records
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| r.margin)
        .fold(f64::INFINITY, f64::min);
    let mut sums: BTreeMap<String, (f64, f64, f64, u64)> = BTreeMap::new();
    for r in &records {
        for (k, &v) in &r.metrics {
            let e = sums
                .entry(k.clone())
                .or_insert((f64::INFINITY, f64::NEG_INFINITY, 0.0, 0));
            e.0 = e.0.min(v);
            e.1 = e.1.max(v);
            e.2 += v;
            e.3 += 1;
        }
    }
    let aggregates: BTreeMap<String, Aggregate> = sums
        .into_iter()
        .map(|(k, (min, max, sum, n))| {
            (
                k,
                Aggregate {
                    min,
                    max,
                    mean: sum / n as f64,
                },
            )
        })
        .collect();
    let constant = campaign
        .constant()
        .and_then(|c| aggregates.get(c))
        .map(|a| a.max);
    let mut report = CampaignReport {
        campaign: campaign.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed,
        trials,
        params: params.clone(),
        hard: campaign.hard(),
        passed,
        errors,
        worst_margin,
        constant,
        aggregates,
        records,
        hash: String::new(),
        wall_clock_secs: 0.0,
    };
    report.hash = report.digest();
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// `1e-9`-style check: `margin = tol - err`.
pub(crate) fn within(err: f64, tol: f64) -> (bool, f64) {
    (err <= tol, tol - err)
}
