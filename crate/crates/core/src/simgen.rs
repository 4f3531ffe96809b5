//! Seedable generators for the toy example and the five simulation
//! settings.
//!
//! Feature `X_m` of the settings (1-based) is column `m − 1`. Every
//! generator draws from `ChaCha8Rng::seed_from_u64(seed)`; replicate `r` of
//! an experiment uses [`replicate_seed`]`(seed, r)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{KifError, Result};
use crate::mvn::{CovarianceSpec, FactorRepair, MvnSampler};
use crate::rank_stats::LabelVector;

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `r`: `splitmix64(seed XOR r)`.
pub fn replicate_seed(seed: u64, r: u64) -> u64 {
    splitmix64(seed ^ r)
}

/// Linear predictors of the four logistic interaction models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LogisticModel {
    /// `2X₁ + 2X₂ + X₁X₂`
    M1,
    /// `X₁ + X₅ + X₁X₂`
    M2,
    /// `X₅ + X₁₀ + X₁X₂`
    M3,
    /// `X₁X₂`
    M4,
}

impl LogisticModel {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Self::M1),
            2 => Ok(Self::M2),
            3 => Ok(Self::M3),
            4 => Ok(Self::M4),
            _ => Err(KifError::InvalidSimulation(format!(
                "logistic model must be 1..=4, got {id}"
            ))),
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Self::M1 => 1,
            Self::M2 => 2,
            Self::M3 => 3,
            Self::M4 => 4,
        }
    }

    /// `x(m)` returns `X_m` (1-based).
    pub fn eta(self, x: impl Fn(usize) -> f64) -> f64 {
        match self {
            Self::M1 => 2.0 * x(1) + 2.0 * x(2) + x(1) * x(2),
            Self::M2 => x(1) + x(5) + x(1) * x(2),
            Self::M3 => x(5) + x(10) + x(1) * x(2),
            Self::M4 => x(1) * x(2),
        }
    }
}

/// How the logistic settings turn the linear predictor `η` into a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogisticLabels {
    /// `Y ~ Bernoulli(1 / (1 + e^{−η}))`, the stated design.
    #[default]
    Bernoulli,
    /// `Y = 1{η > 0}`. Not the stated design; kept to study how much the
    /// published selection rates depend on label noise.
    Threshold,
}

impl FromStr for LogisticLabels {
    type Err = KifError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bernoulli" => Ok(Self::Bernoulli),
            "threshold" => Ok(Self::Threshold),
            _ => Err(KifError::InvalidSimulation(format!(
                "unknown label mechanism '{s}' (bernoulli, threshold)"
            ))),
        }
    }
}

/// Class proportions of the binary-feature setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scenario {
    /// `(π₀, π₁) = (0.5, 0.5)`
    Balanced,
    /// `(π₀, π₁) = (0.7, 0.3)`
    Unbalanced73,
    /// `(π₀, π₁) = (0.3, 0.7)`
    Unbalanced37,
}

impl Scenario {
    pub fn proportions(self) -> (f64, f64) {
        match self {
            Self::Balanced => (0.5, 0.5),
            Self::Unbalanced73 => (0.7, 0.3),
            Self::Unbalanced37 => (0.3, 0.7),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Balanced => "balanced",
            Self::Unbalanced73 => "unbal-73",
            Self::Unbalanced37 => "unbal-37",
        }
    }
}

impl FromStr for Scenario {
    type Err = KifError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" | "1" => Ok(Self::Balanced),
            "unbal-73" | "2" => Ok(Self::Unbalanced73),
            "unbal-37" | "3" => Ok(Self::Unbalanced37),
            _ => Err(KifError::InvalidSimulation(format!(
                "unknown scenario '{s}' (balanced, unbal-73, unbal-37)"
            ))),
        }
    }
}

/// θ_{kj} = P(X_{2j−1} = 1 | Y = k), rows k = 0, 1 and columns j = 1..4.
pub const SETTING5_THETA: [[f64; 4]; 2] = [[0.3, 0.4, 0.5, 0.3], [0.95, 0.9, 0.9, 0.95]];

/// P(X_{2j} = 1 | Y = k, X_{2j−1} = x) for the given θ_{kj}.
pub fn setting5_second_prob(theta: f64, first: bool) -> f64 {
    match (first, theta > 0.5) {
        (false, true) => 0.6,
        (false, false) => 0.4,
        (true, true) => 0.95,
        (true, false) => 0.05,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Setting {
    Toy,
    /// Logistic interaction model on AR(0.2) Gaussian features.
    S1(LogisticModel),
    /// As `S1` but the returned features are `exp(X)`.
    S2(LogisticModel),
    /// Two-class Gaussian mixture with two interactive couples.
    S3,
    /// Two-class Gaussian mixture with one interactive couple and one
    /// correlated decoy couple.
    S4,
    /// Binary features with four interactive couples.
    S5(Scenario),
}

impl Setting {
    /// Parses a setting id (`toy`, `s1`..`s5`) and its model/scenario.
    pub fn parse(setting: &str, variant: Option<&str>) -> Result<Self> {
        let model = || -> Result<LogisticModel> {
            let v = variant.ok_or_else(|| {
                KifError::InvalidSimulation(format!("setting {setting} needs a model 1..=4"))
            })?;
            let id = v
                .parse::<u32>()
                .map_err(|_| KifError::InvalidSimulation(format!("invalid model '{v}'")))?;
            LogisticModel::from_id(id)
        };
        let no_variant = |s: Setting| match variant {
            None => Ok(s),
            Some(v) => Err(KifError::InvalidSimulation(format!(
                "setting {setting} takes no model/scenario, got '{v}'"
            ))),
        };
        match setting.to_ascii_lowercase().as_str() {
            "toy" => no_variant(Setting::Toy),
            "s1" | "1" => Ok(Setting::S1(model()?)),
            "s2" | "2" => Ok(Setting::S2(model()?)),
            "s3" | "3" => no_variant(Setting::S3),
            "s4" | "4" => no_variant(Setting::S4),
            "s5" | "5" => Ok(Setting::S5(variant.unwrap_or("balanced").parse()?)),
            other => Err(KifError::InvalidSimulation(format!(
                "unknown setting '{other}'"
            ))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Setting::Toy => "toy",
            Setting::S1(_) => "s1",
            Setting::S2(_) => "s2",
            Setting::S3 => "s3",
            Setting::S4 => "s4",
            Setting::S5(_) => "s5",
        }
    }

    /// Model number or scenario name, if the setting has one.
    pub fn variant(&self) -> Option<String> {
        match self {
            Setting::S1(m) | Setting::S2(m) => Some(m.id().to_string()),
            Setting::S5(s) => Some(s.name().to_string()),
            _ => None,
        }
    }

    pub fn min_p(&self) -> usize {
        match self {
            Setting::Toy | Setting::S3 | Setting::S4 => 4,
            Setting::S1(_) | Setting::S2(_) => 10,
            Setting::S5(_) => 8,
        }
    }

    /// `(π₀, π₁)` used to draw the label, where the setting fixes it.
    pub fn class_proportions(&self) -> Option<(f64, f64)> {
        match self {
            Setting::Toy | Setting::S3 | Setting::S4 => Some((0.5, 0.5)),
            Setting::S5(s) => Some(s.proportions()),
            Setting::S1(_) | Setting::S2(_) => None,
        }
    }

    /// Couples whose selection is tracked (0-based columns). For `S4` the
    /// second couple is the decoy.
    pub fn tracked_couples(&self) -> Vec<(usize, usize)> {
        match self {
            Setting::S1(_) | Setting::S2(_) => vec![(0, 1)],
            Setting::Toy | Setting::S3 | Setting::S4 => vec![(0, 1), (2, 3)],
            Setting::S5(_) => vec![(0, 1), (2, 3), (4, 5), (6, 7)],
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.variant() {
            Some(v) => write!(f, "{}/{}", self.id(), v),
            None => f.write_str(self.id()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationSpec {
    pub setting: Setting,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(KifError::InvalidSimulation(
                "n and p must be positive".into(),
            ));
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

/// Label-conditional cell distribution of a feature couple over a 3×3
/// grid. Given the label, a cell is drawn from the label's table and the
/// couple is drawn uniformly inside that cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMap {
    pub first_edges: [f64; 4],
    pub second_edges: [f64; 4],
    /// `P(cell | Y = 1)`, indexed `[first band][second band]`.
    pub given_one: [[f64; 3]; 3],
    /// `P(cell | Y = 0)`.
    pub given_zero: [[f64; 3]; 3],
}

const THIRD: f64 = 1.0 / 3.0;
const SIXTH: f64 = 1.0 / 6.0;

/// `(X₁, X₂)`: bands at ±1/3. `Y = 1` lives on the diagonal cells
/// (including `[−1, −1/3)²`), `Y = 0` on the off-diagonal cells.
pub const TOY_X12: CellMap = CellMap {
    first_edges: [-1.0, -THIRD, THIRD, 1.0],
    second_edges: [-1.0, -THIRD, THIRD, 1.0],
    given_one: [[THIRD, 0.0, 0.0], [0.0, THIRD, 0.0], [0.0, 0.0, THIRD]],
    given_zero: [
        [0.0, SIXTH, SIXTH],
        [SIXTH, 0.0, SIXTH],
        [SIXTH, SIXTH, 0.0],
    ],
};

/// `(X₃, X₄)`: bands at ±1/4. `Y = 1` on the anti-diagonal side
/// (including `X₃ ∈ [1/4, 1], X₄ ∈ [−1/4, 1/4)`), `Y = 0` on the diagonal.
pub const TOY_X34: CellMap = CellMap {
    first_edges: [-1.0, -0.25, 0.25, 1.0],
    second_edges: [-1.0, -0.25, 0.25, 1.0],
    given_one: [[0.0, 0.0, 0.375], [0.0, 0.0, 0.125], [0.375, 0.125, 0.0]],
    given_zero: [[0.375, 0.0, 0.0], [0.0, 0.375, 0.0], [0.0, 0.0, 0.25]],
};

impl CellMap {
    fn draw<R: Rng>(&self, label_one: bool, rng: &mut R) -> (f64, f64) {
        let table = if label_one {
            &self.given_one
        } else {
            &self.given_zero
        };
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut cell = (2, 2);
        'outer: for (a, row) in table.iter().enumerate() {
            for (b, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    cell = (a, b);
                    acc += w;
                    if u < acc {
                        break 'outer;
                    }
                }
            }
        }
        let (a, b) = cell;
        let lo = self.first_edges[a];
        let x = lo + rng.gen::<f64>() * (self.first_edges[a + 1] - lo);
        let lo = self.second_edges[b];
        let y = lo + rng.gen::<f64>() * (self.second_edges[b + 1] - lo);
        (x, y)
    }
}

/// Class 0 is named "0" and class 1 is named "1", whatever the draw order.
fn binary_labels(y: &[bool]) -> Result<LabelVector> {
    let codes = y.iter().map(|&b| u32::from(b)).collect();
    LabelVector::from_codes(codes, vec!["0".into(), "1".into()])
}

/// A setting with its covariance factors prepared once for many draws.
#[derive(Debug, Clone)]
pub struct Generator {
    setting: Setting,
    p: usize,
    samplers: Vec<MvnSampler>,
    labels: LogisticLabels,
}

fn mixture_covariances(setting: Setting, p: usize) -> (CovarianceSpec, CovarianceSpec) {
    // (Σ for Y = 1, Σ for Y = 0); 0-based couples (0,1) and (2,3)
    match setting {
        Setting::S3 => (
            CovarianceSpec::block_constant(p, 0.2, vec![(2, 3, -0.8)]),
            CovarianceSpec::block_constant(p, 0.2, vec![(0, 1, 0.8), (2, 3, 0.8)]),
        ),
        Setting::S4 => (
            CovarianceSpec::block_constant(p, 0.2, vec![(0, 1, 0.8), (2, 3, 0.8)]),
            CovarianceSpec::block_constant(p, 0.2, vec![(2, 3, 0.8)]),
        ),
        _ => unreachable!("not a mixture setting"),
    }
}

impl Generator {
    pub fn new(setting: Setting, p: usize) -> Result<Self> {
        if p < setting.min_p() {
            return Err(KifError::InvalidSimulation(format!(
                "setting {setting} needs p >= {}, got {p}",
                setting.min_p()
            )));
        }
        let samplers = match setting {
            Setting::S1(_) | Setting::S2(_) => {
                vec![MvnSampler::new(&CovarianceSpec::ar_decay(p, 0.2))?]
            }
            Setting::S3 | Setting::S4 => {
                let (one, zero) = mixture_covariances(setting, p);
                // Σ₁ of S3 is indefinite once p ≥ 10
                vec![
                    MvnSampler::with_repair(&one, FactorRepair::ClipNegativeEigenvalues)?,
                    MvnSampler::with_repair(&zero, FactorRepair::ClipNegativeEigenvalues)?,
                ]
            }
            Setting::Toy | Setting::S5(_) => Vec::new(),
        };
        Ok(Self {
            setting,
            p,
            samplers,
            labels: LogisticLabels::default(),
        })
    }

    /// Label mechanism of the logistic settings; ignored by the others.
    pub fn with_logistic_labels(mut self, labels: LogisticLabels) -> Self {
        self.labels = labels;
        self
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn samplers(&self) -> &[MvnSampler] {
        &self.samplers
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(KifError::InvalidSimulation("n must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self.p;
        match self.setting {
            Setting::Toy => sample_toy(n, p, &mut rng),
            Setting::S1(model) => self.sample_logistic(model, n, &mut rng),
            Setting::S2(model) => self
                .sample_logistic(model, n, &mut rng)?
                .map_values(f64::exp),
            Setting::S3 | Setting::S4 => self.sample_mixture(n, &mut rng),
            Setting::S5(scenario) => sample_binary(scenario, n, p, &mut rng),
        }
    }

    fn sample_logistic(
        &self,
        model: LogisticModel,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Dataset> {
        let x = self.samplers[0].sample(n, rng);
        let y: Vec<bool> = (0..n)
            .map(|i| {
                let eta = model.eta(|m| x[(i, m - 1)]);
                // the uniform is drawn under both mechanisms so that the
                // feature stream does not depend on the choice
                let u = rng.gen::<f64>();
                match self.labels {
                    LogisticLabels::Bernoulli => u < 1.0 / (1.0 + (-eta).exp()),
                    LogisticLabels::Threshold => eta > 0.0,
                }
            })
            .collect();
        Dataset::new(n, self.p, x.as_slice().to_vec(), binary_labels(&y)?)
    }

    fn sample_mixture(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        let y: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.5).collect();
        let z = self.samplers[0].standard_normals(n, rng);
        let x_one = self.samplers[0].transform(&z);
        let x_zero = self.samplers[1].transform(&z);
        let mut values = vec![0.0; n * self.p];
        for j in 0..self.p {
            for (i, &yi) in y.iter().enumerate() {
                values[j * n + i] = if yi { x_one[(i, j)] } else { x_zero[(i, j)] };
            }
        }
        Dataset::new(n, self.p, values, binary_labels(&y)?)
    }
}

fn sample_toy<R: Rng>(n: usize, p: usize, rng: &mut R) -> Result<Dataset> {
    let mut values = vec![0.0; n * p];
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let yi = rng.gen::<f64>() < 0.5;
        y.push(yi);
        let (a, b) = TOY_X12.draw(yi, rng);
        let (c, d) = TOY_X34.draw(yi, rng);
        values[i] = a;
        values[n + i] = b;
        values[2 * n + i] = c;
        values[3 * n + i] = d;
        for j in 4..p {
            values[j * n + i] = -1.0 + 2.0 * rng.gen::<f64>();
        }
    }
    Dataset::new(n, p, values, binary_labels(&y)?)
}

fn sample_binary<R: Rng>(scenario: Scenario, n: usize, p: usize, rng: &mut R) -> Result<Dataset> {
    let (_, pi_one) = scenario.proportions();
    let mut values = vec![0.0; n * p];
    let mut y = Vec::with_capacity(n);
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    for i in 0..n {
        let yi = rng.gen::<f64>() < pi_one;
        y.push(yi);
        let thetas = &SETTING5_THETA[usize::from(yi)];
        for (c, &theta) in thetas.iter().enumerate() {
            let first = rng.gen::<f64>() < theta;
            let second = rng.gen::<f64>() < setting5_second_prob(theta, first);
            values[2 * c * n + i] = bit(first);
            values[(2 * c + 1) * n + i] = bit(second);
        }
        for j in 8..p {
            values[j * n + i] = bit(rng.gen::<f64>() < 0.5);
        }
    }
    Dataset::new(n, p, values, binary_labels(&y)?)
}

pub fn generate(spec: &SimulationSpec) -> Result<Dataset> {
    spec.validate()?;
    Generator::new(spec.setting, spec.p)?.sample(spec.n, spec.seed)
}

pub fn gen_toy(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    generate(&SimulationSpec {
        setting: Setting::Toy,
        n,
        p,
        seed,
    })
}

pub fn gen_setting1(model: u32, n: usize, p: usize, seed: u64) -> Result<Dataset> {
    generate(&SimulationSpec {
        setting: Setting::S1(LogisticModel::from_id(model)?),
        n,
        p,
        seed,
    })
}

pub fn gen_setting2(model: u32, n: usize, p: usize, seed: u64) -> Result<Dataset> {
    generate(&SimulationSpec {
        setting: Setting::S2(LogisticModel::from_id(model)?),
        n,
        p,
        seed,
    })
}

pub fn gen_setting3(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    generate(&SimulationSpec {
        setting: Setting::S3,
        n,
        p,
        seed,
    })
}

pub fn gen_setting4(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    generate(&SimulationSpec {
        setting: Setting::S4,
        n,
        p,
        seed,
    })
}

pub fn gen_setting5(scenario: Scenario, n: usize, p: usize, seed: u64) -> Result<Dataset> {
    generate(&SimulationSpec {
        setting: Setting::S5(scenario),
        n,
        p,
        seed,
    })
}
