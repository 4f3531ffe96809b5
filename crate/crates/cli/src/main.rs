//! `kif`: screen labelled datasets for interactive feature couples, attach
//! permutation p-values and rerun the simulation studies.
//!
//! Exit codes:
//!
//! | code | meaning                                               |
//! |------|-------------------------------------------------------|
//! | 0    | success                                               |
//! | 1    | `reproduce --check` found a rate outside its band     |
//! | 2    | invalid command line                                  |
//! | 3    | file could not be read or written                     |
//! | 4    | malformed or unusable input data                      |
//! | 5    | invalid configuration or simulation request           |

mod args;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use kif_core::engine::SelectionRule;
use kif_core::{
    load_csv, permutation_pvalues, run_experiment, run_screening, save_csv, variance_prescreen,
    Dataset, ExperimentSpec, Generator, KifError, PermutationPlan, ScreeningConfig, Setting,
};

use args::{Cli, Command, PermtestArgs, ReproduceArgs, ScreenArgs, SimulateArgs};

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(context: impl std::fmt::Display, err: io::Error) -> Self {
        Self {
            code: 3,
            message: format!("{context}: {err}"),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<KifError> for Failure {
    fn from(err: KifError) -> Self {
        let code = match err {
            KifError::Io(_) => 3,
            KifError::InvalidConfig(_)
            | KifError::InvalidSimulation(_)
            | KifError::NotPositiveDefinite => 5,
            _ => 4,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match cli.threads() {
        Ok(t) => t,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(err) => {
            eprintln!("error: cannot start worker pool: {err}");
            return ExitCode::from(5);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(command: Command) -> CliResult<u8> {
    match command {
        Command::Screen(a) => screen(a).map(|_| 0),
        Command::Permtest(a) => permtest(a).map(|_| 0),
        Command::Reproduce(a) => reproduce(a),
        Command::Simulate(a) => simulate(a).map(|_| 0),
    }
}

/// Opens `path` for writing, or standard output for `-` or no path.
fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) if p == Path::new("-") => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => {
            let file = File::create(p).map_err(|e| Failure::io(p.display(), e))?;
            Ok(Box::new(BufWriter::new(file)))
        }
    }
}

fn write_all(path: Option<&Path>, text: &str) -> CliResult<()> {
    let mut out = open_output(path)?;
    let target = path.map_or("stdout".to_string(), |p| p.display().to_string());
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::io(target, e))
}

fn load(input: &Path, label_col: &str, delimiter: char) -> CliResult<Dataset> {
    let delimiter = u8::try_from(delimiter)
        .map_err(|_| Failure::data(format!("delimiter '{delimiter}' is not a single byte")))?;
    Ok(load_csv(input, label_col, delimiter)?)
}

fn screen(a: ScreenArgs) -> CliResult<()> {
    let data = load(&a.input, &a.label_col, a.delimiter)?;
    let rule = match (a.top_d, a.threshold.as_deref()) {
        (Some(d), _) => SelectionRule::TopD { d },
        (None, Some([c, r])) => SelectionRule::Threshold { c: *c, r: *r },
        _ => SelectionRule::AutoTopD,
    };
    let config = ScreeningConfig {
        rule,
        prescreen_fraction: a.prescreen,
        kernel: a.kernel.into(),
        ..ScreeningConfig::default()
    };
    let result = run_screening(&data, &config)?;
    eprintln!(
        "screened {} pairs over {} features (n = {}); {} selected",
        result.pairs_evaluated,
        result.p,
        result.n,
        result.selected.len()
    );
    for class in &result.skipped_classes {
        eprintln!("warning: class '{class}' has fewer than 2 rows and was left out");
    }
    let names = data.feature_names();
    let text = match a.format {
        args::Format::Tsv => output::screen_tsv(&result, names, a.all),
        args::Format::Json => output::screen_json(&result, names, a.all, a.timings)?,
    };
    write_all(a.output.as_deref(), &text)
}

fn permtest(a: PermtestArgs) -> CliResult<()> {
    let data = load(&a.input, &a.label_col, a.delimiter)?;
    let pairs = match (&a.pairs, a.top_k) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path.display(), e))?;
            output::parse_pairs(&text, data.feature_names()).map_err(Failure::data)?
        }
        (None, k) => {
            let screened = if a.prescreen > 0.0 {
                variance_prescreen(&data, a.prescreen)?
            } else {
                data.clone()
            };
            let config = ScreeningConfig {
                rule: SelectionRule::TopD { d: k },
                retention: kif_core::Retention::Head,
                ..ScreeningConfig::default()
            };
            kif_core::screen_all_pairs(&screened, &config)?.selected
        }
    };
    let plan = PermutationPlan::new(pairs, a.permutations, a.seed);
    eprintln!(
        "running {} permutations for {} couple(s)",
        plan.permutations,
        plan.pairs.len()
    );
    let pvalues = permutation_pvalues(&data, &plan)?;
    write_all(
        a.output.as_deref(),
        &output::pvalues_tsv(&pvalues, data.feature_names()),
    )
}

fn setting_of(setting: &str, variant: Option<&str>) -> CliResult<Setting> {
    Ok(Setting::parse(setting, variant)?)
}

fn reproduce(a: ReproduceArgs) -> CliResult<u8> {
    let mut spec = ExperimentSpec::new(
        setting_of(&a.setting, a.variant.as_deref())?,
        a.n,
        a.p,
        a.replications,
        a.seed,
    );
    spec.logistic_labels = a.logistic_labels.parse()?;
    let report = run_experiment(&spec)?;
    for rate in &report.rates {
        let (j, l) = rate.couple;
        let verdict = match rate.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "no reference",
        };
        eprintln!(
            "{}: couple (X{}, X{}) selected {}/{} = {:.2} [{}]",
            spec.setting,
            j + 1,
            l + 1,
            rate.times_selected,
            spec.replications,
            rate.rate,
            verdict
        );
    }
    let text = match a.format {
        args::Format::Tsv => output::report_tsv(&report),
        args::Format::Json => output::report_json(&report, a.timings)?,
    };
    write_all(a.output.as_deref(), &text)?;
    Ok(if a.check && report.passed == Some(false) {
        1
    } else {
        0
    })
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let setting = setting_of(&a.setting, a.variant.as_deref())?;
    let generator = Generator::new(setting, a.p)?.with_logistic_labels(a.logistic_labels.parse()?);
    let data = generator.sample(a.n, a.seed)?;
    let delimiter = u8::try_from(a.delimiter)
        .map_err(|_| Failure::data(format!("delimiter '{}' is not a single byte", a.delimiter)))?;
    match a.output.as_deref() {
        Some(p) if p != Path::new("-") => save_csv(&data, p, &a.label_col, delimiter)?,
        _ => {
            let stdout = io::stdout().lock();
            kif_core::write_csv(&data, BufWriter::new(stdout), &a.label_col, delimiter)?
        }
    }
    eprintln!(
        "wrote {} rows x {} features of {}",
        data.n(),
        data.p(),
        setting
    );
    Ok(())
}
