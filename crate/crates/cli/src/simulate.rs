//! Synthetic trial data in the long CSV layout that `ingest` reads.

use std::path::Path;

use serde::Deserialize;
use skewmda::model::INTERCEPT;
use skewmda::oracles::{generate_scenario, SyntheticScenario};
use skewmda::rng::{Domain, StreamFactory};

use crate::error::{io_err, CliError, Result, StepContext};
use crate::output::num;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: SyntheticScenario,
}

pub fn load_scenario(path: &Path) -> Result<SyntheticScenario> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let f: ScenarioFile = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(f.scenario)
}

/// One row per subject and visit: `subject, visit, y`, then the baseline
/// covariates, the treatment and the time-varying covariates. Missing
/// outcomes are empty.
pub fn simulate_csv(scenario: &SyntheticScenario, seed: u64) -> Result<Vec<u8>> {
    let mut rng = StreamFactory::new(seed).stream(Domain::Simulate, 0, 0);
    let sc = generate_scenario(scenario, &mut rng).step("simulate")?;
    let data = &sc.data;
    let x_cols: Vec<(usize, &String)> = data.x_names.iter().enumerate().filter(|(_, n)| *n != INTERCEPT).collect();
    let mut header = vec!["subject".to_string(), "visit".to_string(), "y".to_string()];
    header.extend(x_cols.iter().map(|(_, n)| n.to_string()));
    header.extend(data.z_names.iter().cloned());

    let mut subjects: Vec<_> = data.subjects.iter().collect();
    subjects.sort_by(|a, b| a.id.cmp(&b.id));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for s in subjects {
        for j in 0..data.p {
            let mut row = vec![s.id.clone(), (j + 1).to_string(), s.y[j].map(num).unwrap_or_default()];
            row.extend(x_cols.iter().map(|(k, _)| num(s.x[*k])));
            row.extend((0..data.z_names.len()).map(|k| num(s.z[(j, k)])));
            w.write_record(&row)?;
        }
    }
    w.into_inner().map_err(|e| io_err(Path::new("<memory>"))(e.into_error()))
}
