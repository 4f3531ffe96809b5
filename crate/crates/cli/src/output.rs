//! Text formats written by the commands. Scores are printed with 17
//! significant digits so they parse back to the same `f64`.

use std::collections::HashMap;

use kif_core::{ExperimentReport, KifError, PairPValue, ScreeningResult};
use serde::Serialize;

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// `rank, feature_j, feature_l, kif_score` for the selected couples, or for
/// every ranked couple when `all` is set.
pub fn screen_tsv(result: &ScreeningResult, names: &[String], all: bool) -> String {
    let mut out = String::from("rank\tfeature_j\tfeature_l\tkif_score\n");
    let rows = if all {
        &result.ranked[..]
    } else {
        &result.ranked[..result.selected.len()]
    };
    for s in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            s.rank,
            names[s.j],
            names[s.l],
            sci(s.score)
        ));
    }
    out
}

#[derive(Serialize)]
struct JsonPair<'a> {
    rank: usize,
    feature_j: &'a str,
    feature_l: &'a str,
    /// 0-based column indices in the input file, label column excluded.
    index_j: usize,
    index_l: usize,
    kif_score: f64,
}

#[derive(Serialize)]
struct JsonScreen<'a> {
    n: usize,
    p: usize,
    pairs_evaluated: u64,
    config: &'a kif_core::ScreeningConfig,
    rule: &'a kif_core::ResolvedRule,
    skipped_classes: &'a [String],
    selected: usize,
    pairs: Vec<JsonPair<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<&'a kif_core::engine::Timing>,
}

pub fn screen_json(
    result: &ScreeningResult,
    names: &[String],
    all: bool,
    timings: bool,
) -> Result<String, KifError> {
    let rows = if all {
        &result.ranked[..]
    } else {
        &result.ranked[..result.selected.len()]
    };
    let doc = JsonScreen {
        n: result.n,
        p: result.p,
        pairs_evaluated: result.pairs_evaluated,
        config: &result.config,
        rule: &result.rule,
        skipped_classes: &result.skipped_classes,
        selected: result.selected.len(),
        pairs: rows
            .iter()
            .map(|s| JsonPair {
                rank: s.rank,
                feature_j: &names[s.j],
                feature_l: &names[s.l],
                index_j: s.j,
                index_l: s.l,
                kif_score: s.score,
            })
            .collect(),
        timing: timings.then_some(&result.timing),
    };
    to_json(&doc)
}

fn to_json<T: Serialize>(doc: &T) -> Result<String, KifError> {
    let mut text =
        serde_json::to_string_pretty(doc).map_err(|e| KifError::InvalidConfig(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Reads couples from a TSV whose header has `feature_j` and `feature_l`
/// columns holding feature names. Returns 0-based `(j, l)` with `j < l`.
pub fn parse_pairs(text: &str, names: &[String]) -> Result<Vec<(usize, usize)>, String> {
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or("pairs file is empty")?
        .split('\t')
        .map(str::trim)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or(format!("pairs file has no '{name}' column"))
    };
    let (cj, cl) = (col("feature_j")?, col("feature_l")?);
    let mut pairs = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let lookup = |c: usize| -> Result<usize, String> {
            let name = fields
                .get(c)
                .ok_or(format!("pairs file row {}: missing field", row + 1))?;
            index.get(name).copied().ok_or(format!(
                "pairs file row {}: unknown feature '{name}'",
                row + 1
            ))
        };
        let (a, b) = (lookup(cj)?, lookup(cl)?);
        if a == b {
            return Err(format!(
                "pairs file row {}: couple repeats feature",
                row + 1
            ));
        }
        pairs.push((a.min(b), a.max(b)));
    }
    if pairs.is_empty() {
        return Err("pairs file lists no couples".into());
    }
    Ok(pairs)
}

/// `feature_j, feature_l, kif_score, p_value`.
pub fn pvalues_tsv(pvalues: &[PairPValue], names: &[String]) -> String {
    let mut out = String::from("feature_j\tfeature_l\tkif_score\tp_value\n");
    for pv in pvalues {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            names[pv.j],
            names[pv.l],
            sci(pv.observed),
            sci(pv.p_value)
        ));
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or("NA".to_string(), |x| format!("{x:.2}"))
}

fn labels_name(spec: &kif_core::ExperimentSpec) -> &'static str {
    match (spec.setting, spec.logistic_labels) {
        (
            kif_core::Setting::S1(_) | kif_core::Setting::S2(_),
            kif_core::LogisticLabels::Threshold,
        ) => "threshold",
        (kif_core::Setting::S1(_) | kif_core::Setting::S2(_), _) => "bernoulli",
        _ => "-",
    }
}

/// One row per tracked couple (1-based feature numbers).
pub fn report_tsv(report: &ExperimentReport) -> String {
    let spec = &report.spec;
    let mut out = String::from(
        "setting\tvariant\tlabels\tcouple\tn\tp\treplications\tseed\ttop_d\ttimes_selected\trate\treference\tlower\tupper\tpass\n",
    );
    for r in &report.rates {
        let reference = r.reference.as_ref();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}-{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            spec.setting.id(),
            spec.setting.variant().unwrap_or_else(|| "-".into()),
            labels_name(spec),
            r.couple.0 + 1,
            r.couple.1 + 1,
            spec.n,
            spec.p,
            spec.replications,
            spec.seed,
            report.top_d,
            r.times_selected,
            sci(r.rate),
            opt(reference.map(|x| x.reference)),
            opt(reference.map(|x| x.lower)),
            opt(reference.map(|x| x.upper)),
            match r.pass {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "NA",
            }
        ));
    }
    out
}

pub fn report_json(report: &ExperimentReport, timings: bool) -> Result<String, KifError> {
    if timings {
        return to_json(report);
    }
    let mut stripped = report.clone();
    stripped.total_seconds = 0.0;
    for r in &mut stripped.replications {
        r.seconds = 0.0;
    }
    let mut value =
        serde_json::to_value(&stripped).map_err(|e| KifError::InvalidConfig(e.to_string()))?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("total_seconds");
        if let Some(reps) = obj.get_mut("replications").and_then(|r| r.as_array_mut()) {
            for rep in reps {
                if let Some(o) = rep.as_object_mut() {
                    o.remove("seconds");
                }
            }
        }
    }
    to_json(&value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn pairs_file_by_name() {
        let text = "rank\tfeature_j\tfeature_l\tkif_score\n1\tc\ta\t0.5\n2\ta\tb\t0.1\n";
        assert_eq!(parse_pairs(text, &names()).unwrap(), vec![(0, 2), (0, 1)]);
    }

    #[test]
    fn pairs_file_errors() {
        assert!(parse_pairs("", &names()).is_err());
        assert!(parse_pairs("x\ty\n", &names()).is_err());
        assert!(parse_pairs("feature_j\tfeature_l\na\tzz\n", &names()).is_err());
        assert!(parse_pairs("feature_j\tfeature_l\na\ta\n", &names()).is_err());
        assert!(parse_pairs("feature_j\tfeature_l\n", &names()).is_err());
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(sci(0.1), "1.0000000000000001e-1");
        let back: f64 = sci(1.0 / 3.0).parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }
}
