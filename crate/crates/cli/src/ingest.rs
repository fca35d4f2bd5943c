//! Long-format CSV ingestion: one row per (subject, visit).

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use skewmda::data::{PatternedDataset, Subject};
use skewmda::model::INTERCEPT;

use crate::error::{io_err, CliError, Result};

fn default_subject() -> String {
    "subject".into()
}

fn default_visit() -> String {
    "visit".into()
}

fn default_outcome() -> String {
    "y".into()
}

/// Where the data live and which columns play which role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default = "default_subject")]
    pub subject: String,
    #[serde(default = "default_visit")]
    pub visit: String,
    #[serde(default = "default_outcome")]
    pub outcome: String,
    /// 0/1 arm indicator, entered as the last X covariate.
    #[serde(default)]
    pub treatment: Option<String>,
    /// Baseline (subject-level) X covariates.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Per-visit Z covariates with effects shared across visits.
    #[serde(default)]
    pub time_varying: Vec<String>,
    /// Visit labels in time order; inferred from the data when absent.
    #[serde(default)]
    pub visits: Option<Vec<String>>,
}

impl DataConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            subject: default_subject(),
            visit: default_visit(),
            outcome: default_outcome(),
            treatment: None,
            covariates: Vec::new(),
            time_varying: Vec::new(),
            visits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub data: PatternedDataset,
    /// Visit labels, index `j − 1` for visit `j`.
    pub visits: Vec<String>,
}

fn is_missing(v: &str) -> bool {
    v.is_empty() || v.eq_ignore_ascii_case("na") || v == "."
}

fn number(value: &str, column: &str, line: u64) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::NonNumeric { line, column: column.to_string(), value: value.to_string() })
}

/// Numeric order when every label parses as a number, text order otherwise.
fn order_labels(mut labels: Vec<String>) -> Vec<String> {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.parse::<f64>().ok()).collect();
    match numeric {
        Some(_) => labels.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap())),
        None => labels.sort(),
    }
    labels
}

struct Row {
    line: u64,
    subject: String,
    visit: String,
    outcome: Option<f64>,
    baseline: Vec<f64>,
    time_varying: Vec<f64>,
}

struct Pending {
    baseline: Vec<f64>,
    visits: HashMap<usize, (Option<f64>, Vec<f64>)>,
}

pub fn ingest(cfg: &DataConfig, intercept: bool) -> Result<Ingested> {
    let file = std::fs::File::open(&cfg.path).map_err(io_err(&cfg.path))?;
    ingest_reader(file, cfg, intercept)
}

pub fn ingest_reader<R: Read>(reader: R, cfg: &DataConfig, intercept: bool) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| CliError::MissingColumn(name.to_string()));
    let subject_col = col(&cfg.subject)?;
    let visit_col = col(&cfg.visit)?;
    let outcome_col = col(&cfg.outcome)?;
    let mut baseline_names = cfg.covariates.clone();
    if let Some(t) = &cfg.treatment {
        if cfg.covariates.contains(t) {
            return Err(CliError::Config(format!("'{t}' is both the treatment and a covariate")));
        }
        baseline_names.push(t.clone());
    }
    let baseline_cols = baseline_names.iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;
    let tv_cols = cfg.time_varying.iter().map(|n| col(n)).collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |k: usize| rec.get(k).unwrap_or("");
        let subject = field(subject_col).to_string();
        if subject.is_empty() {
            return Err(CliError::Data(format!("line {line}: empty subject id")));
        }
        let raw_y = field(outcome_col);
        let outcome = if is_missing(raw_y) { None } else { Some(number(raw_y, &cfg.outcome, line)?) };
        let baseline = baseline_cols
            .iter()
            .zip(&baseline_names)
            .map(|(&k, name)| number(field(k), name, line))
            .collect::<Result<Vec<_>>>()?;
        let time_varying = tv_cols
            .iter()
            .zip(&cfg.time_varying)
            .map(|(&k, name)| number(field(k), name, line))
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row { line, subject, visit: field(visit_col).to_string(), outcome, baseline, time_varying });
    }
    if rows.is_empty() {
        return Err(CliError::Data("no data rows".into()));
    }

    let labels = match &cfg.visits {
        Some(v) => v.clone(),
        None => {
            let mut seen: Vec<String> = rows.iter().map(|r| r.visit.clone()).collect();
            seen.sort();
            seen.dedup();
            order_labels(seen)
        }
    };
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(j, l)| (l.as_str(), j)).collect();
    if index.len() != labels.len() {
        return Err(CliError::Config("visit labels must be distinct".into()));
    }
    let p = labels.len();

    let mut subjects: BTreeMap<String, Pending> = BTreeMap::new();
    for row in rows {
        let j = *index
            .get(row.visit.as_str())
            .ok_or_else(|| CliError::UnknownVisit { line: row.line, label: row.visit.clone() })?;
        let entry = subjects
            .entry(row.subject.clone())
            .or_insert_with(|| Pending { baseline: row.baseline.clone(), visits: HashMap::new() });
        if let Some(k) = (0..row.baseline.len()).find(|&k| row.baseline[k] != entry.baseline[k]) {
            return Err(CliError::Data(format!(
                "line {}: subject '{}' changes baseline covariate '{}'",
                row.line, row.subject, baseline_names[k]
            )));
        }
        if entry.visits.insert(j, (row.outcome, row.time_varying)).is_some() {
            return Err(CliError::Duplicate { line: row.line, subject: row.subject, visit: row.visit });
        }
    }

    let r = cfg.time_varying.len();
    let mut built = Vec::with_capacity(subjects.len());
    for (id, pending) in subjects {
        let mut x = Vec::with_capacity(pending.baseline.len() + 1);
        if intercept {
            x.push(1.0);
        }
        x.extend(&pending.baseline);
        let mut y = vec![None; p];
        let mut z = DMatrix::zeros(p, r);
        for j in 0..p {
            match pending.visits.get(&j) {
                Some((v, tv)) => {
                    y[j] = *v;
                    for (k, val) in tv.iter().enumerate() {
                        z[(j, k)] = *val;
                    }
                }
                None if r > 0 => {
                    return Err(CliError::Data(format!(
                        "subject '{id}' has no row for visit '{}'; time-varying covariates need every visit",
                        labels[j]
                    )));
                }
                None => {}
            }
        }
        let mut s = Subject::new(id, x, y);
        s.z = z;
        built.push(s);
    }

    let mut x_names = Vec::new();
    if intercept {
        x_names.push(INTERCEPT.to_string());
    }
    x_names.extend(baseline_names);
    let data = PatternedDataset::new(p, x_names, cfg.time_varying.clone(), built).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(Ingested { data, visits: labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> DataConfig {
        DataConfig { treatment: Some("trt".into()), covariates: vec!["base".into()], ..DataConfig::new("-") }
    }

    #[test]
    fn complete_two_by_three() {
        let csv = "subject,visit,y,trt,base\na,1,1.0,0,0.5\na,2,2.0,0,0.5\na,3,3.0,0,0.5\nb,1,1.5,1,-1\nb,2,2.5,1,-1\nb,3,3.5,1,-1\n";
        let got = ingest_reader(csv.as_bytes(), &cfg(), true).unwrap();
        let sum = got.data.summary();
        assert_eq!(sum.n_tail, vec![2, 2, 2]);
        assert_eq!(sum.pattern_counts, vec![0, 0, 0, 2]);
        assert_eq!(got.data.x_names, vec![INTERCEPT.to_string(), "base".into(), "trt".into()]);
        assert_eq!(got.data.subjects[1].x.as_slice(), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn intermittent_cell() {
        let csv = "subject,visit,y,trt,base\na,1,1.0,0,0\na,2,NA,0,0\na,3,3.0,0,0\n";
        let got = ingest_reader(csv.as_bytes(), &cfg(), true).unwrap();
        assert_eq!(got.data.subjects[0].dropout(), 3);
        assert_eq!(got.data.summary().intermittent_counts, vec![0, 1, 0]);
    }

    #[test]
    fn labels_sort_numerically() {
        assert_eq!(order_labels(vec!["10".into(), "2".into(), "1".into()]), vec!["1", "2", "10"]);
        assert_eq!(order_labels(vec!["week2".into(), "base".into()]), vec!["base", "week2"]);
    }
}
