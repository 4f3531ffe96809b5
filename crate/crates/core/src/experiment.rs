//! Monte Carlo selection-rate experiments over the simulation settings and
//! their comparison against published reference rates.
//!
//! Replicate `r` draws its dataset with seed [`replicate_seed`]`(seed, r)`,
//! screens all pairs with the default top-`⌈n/ln n⌉` rule and records
//! whether each tracked couple lands in the selected set.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{run_screening, ResolvedRule, Retention, ScreeningConfig, SelectionRule};
use crate::error::{KifError, Result};
use crate::simgen::{replicate_seed, Generator, LogisticLabels, Setting};

/// Reference selection rates, tab-separated, with `#` comment lines.
pub const REFERENCE_RATES_TSV: &str = include_str!("../data/reference_rates.tsv");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceRate {
    pub setting: String,
    /// Model number or scenario name; `-` when the setting has none.
    pub variant: String,
    /// 0-based couple.
    pub couple: (usize, usize),
    pub reference: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ReferenceRate {
    pub fn accepts(&self, rate: f64) -> bool {
        // bounds are two-decimal values; absorb their binary rounding
        rate >= self.lower - 1e-9 && rate <= self.upper + 1e-9
    }
}

/// Version tag of the embedded reference table.
pub fn reference_version() -> String {
    REFERENCE_RATES_TSV
        .lines()
        .find_map(|l| l.strip_prefix("# version"))
        .map(|v| v.trim().to_string())
        .unwrap_or_default()
}

pub fn reference_rates() -> Result<Vec<ReferenceRate>> {
    parse_reference_rates(REFERENCE_RATES_TSV)
}

pub fn parse_reference_rates(text: &str) -> Result<Vec<ReferenceRate>> {
    let mut out = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    lines.next(); // header
    for (line_no, line) in lines {
        let bad = |message: String| KifError::Parse {
            row: line_no + 1,
            column: String::new(),
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, got {}", fields.len())));
        }
        let (a, b) = fields[2]
            .split_once('-')
            .ok_or_else(|| bad(format!("bad couple '{}'", fields[2])))?;
        let feature = |s: &str| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(bad(format!("bad feature number '{s}'"))),
            }
        };
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| bad(format!("bad rate '{s}'")))
        };
        out.push(ReferenceRate {
            setting: fields[0].to_string(),
            variant: fields[1].to_string(),
            couple: (feature(a)?, feature(b)?),
            reference: num(fields[3])?,
            lower: num(fields[4])?,
            upper: num(fields[5])?,
        });
    }
    Ok(out)
}

/// The reference entry for `couple` of `setting`, if one exists.
pub fn reference_for(setting: &Setting, couple: (usize, usize)) -> Result<Option<ReferenceRate>> {
    let variant = setting.variant().unwrap_or_else(|| "-".to_string());
    Ok(reference_rates()?
        .into_iter()
        .find(|r| r.setting == setting.id() && r.variant == variant && r.couple == couple))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub setting: Setting,
    pub n: usize,
    pub p: usize,
    pub replications: usize,
    pub seed: u64,
    /// Label mechanism of the logistic settings.
    pub logistic_labels: LogisticLabels,
}

impl ExperimentSpec {
    pub fn new(setting: Setting, n: usize, p: usize, replications: usize, seed: u64) -> Self {
        Self {
            setting,
            n,
            p,
            replications,
            seed,
            logistic_labels: LogisticLabels::Bernoulli,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(KifError::InvalidSimulation(
                "replications must be >= 1".into(),
            ));
        }
        if self.n < 2 {
            return Err(KifError::InvalidSimulation("n must be >= 2".into()));
        }
        if self.p < self.setting.min_p() {
            return Err(KifError::InvalidSimulation(format!(
                "setting {} needs p >= {}, got {}",
                self.setting,
                self.setting.min_p(),
                self.p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    /// One flag per tracked couple.
    pub selected: Vec<bool>,
    /// 1-based rank of each tracked couple, if it was retained.
    pub ranks: Vec<Option<usize>>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupleRate {
    /// 0-based couple.
    pub couple: (usize, usize),
    pub times_selected: usize,
    /// `times_selected / R`.
    pub rate: f64,
    pub reference: Option<ReferenceRate>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub top_d: usize,
    pub reference_version: String,
    pub rates: Vec<CoupleRate>,
    pub replications: Vec<Replication>,
    /// `None` when no tracked couple has a reference value.
    pub passed: Option<bool>,
    pub total_seconds: f64,
}

/// Runs the experiment. Replicates are independent and processed in
/// parallel; results are in replicate order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let start = Instant::now();
    let generator =
        Generator::new(spec.setting, spec.p)?.with_logistic_labels(spec.logistic_labels);
    let couples = spec.setting.tracked_couples();
    let config = ScreeningConfig {
        rule: SelectionRule::AutoTopD,
        retention: Retention::Head,
        ..ScreeningConfig::default()
    };
    let top_d = match config.rule.resolve(spec.n) {
        ResolvedRule::TopD { d } => d,
        ResolvedRule::Threshold { .. } => unreachable!("top-d rule"),
    };

    let replications: Vec<Replication> = (0..spec.replications)
        .into_par_iter()
        .map(|r| -> Result<Replication> {
            let t = Instant::now();
            let seed = replicate_seed(spec.seed, r as u64);
            let data = generator.sample(spec.n, seed)?;
            let result = run_screening(&data, &config)?;
            Ok(Replication {
                index: r,
                seed,
                selected: couples
                    .iter()
                    .map(|&(j, l)| result.is_selected(j, l))
                    .collect(),
                ranks: couples.iter().map(|&(j, l)| result.rank_of(j, l)).collect(),
                seconds: t.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_>>()?;

    let mut rates = Vec::with_capacity(couples.len());
    for (c, &couple) in couples.iter().enumerate() {
        let times_selected = replications.iter().filter(|r| r.selected[c]).count();
        let rate = times_selected as f64 / spec.replications as f64;
        let reference = reference_for(&spec.setting, couple)?;
        let pass = reference.as_ref().map(|r| r.accepts(rate));
        rates.push(CoupleRate {
            couple,
            times_selected,
            rate,
            reference,
            pass,
        });
    }
    let checked: Vec<bool> = rates.iter().filter_map(|r| r.pass).collect();
    let passed = (!checked.is_empty()).then(|| checked.iter().all(|&p| p));

    Ok(ExperimentReport {
        spec: spec.clone(),
        top_d,
        reference_version: reference_version(),
        rates,
        replications,
        passed,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}
