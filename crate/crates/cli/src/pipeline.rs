//! fit → impute → analyze → tipping-point orchestration.

use std::path::Path;

use rand::RngCore;
use serde::Serialize;
use serde_json::json;
use skewmda::analysis::{analyze_mi, tipping_point, MiResult, TippingConfig, TippingGrid};
use skewmda::data::{PatternSummary, PatternedDataset};
use skewmda::imputation::{generate_mi_sets, ImputedDataset};
use skewmda::model::ModelSpec;
use skewmda::oracles::{chain_diagnostics, ParameterSummary};
use skewmda::rng::{Domain, StreamFactory};
use skewmda::sampler::{compute_dic, run_chain, Dic, DrawStore, SamplerConfig};

use crate::config::RunConfig;
use crate::error::{io_err, CliError, Result, StepContext};
use crate::ingest::{ingest, Ingested};
use crate::output::{num, sha256_hex, write_diagnostics, RunDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Fit,
    Impute,
    Analyze,
    Tip,
    Run,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Fit => "fit",
            Stage::Impute => "impute",
            Stage::Analyze => "analyze",
            Stage::Tip => "tip",
            Stage::Run => "run",
        }
    }

    fn imputes(self) -> bool {
        matches!(self, Stage::Impute | Stage::Analyze | Stage::Run)
    }

    fn analyzes(self) -> bool {
        matches!(self, Stage::Analyze | Stage::Run)
    }

    fn tips(self) -> bool {
        matches!(self, Stage::Tip | Stage::Run)
    }
}

/// Ingested data with the model layout it implies.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: PatternedDataset,
    pub visits: Vec<String>,
    pub spec: ModelSpec,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let Ingested { data, visits } = ingest(&cfg.data, cfg.model.intercept)?;
    let spec = ModelSpec {
        variant: cfg.model.variant,
        p: data.p,
        x_names: data.x_names.clone(),
        z_names: data.z_names.clone(),
        intercept: cfg.model.intercept,
        treatment: cfg.data.treatment.clone(),
    };
    data.check_spec(&spec).step("model specification")?;
    for s in &cfg.imputation.strategies {
        s.strategy.validate(&spec).step("imputation strategy")?;
    }
    Ok(Prepared { data, visits, spec })
}

/// Seed of chain `k`: the configured seed for the first chain, derived
/// streams for the rest.
pub fn chain_seed(seed: u64, k: usize) -> u64 {
    if k == 0 {
        seed
    } else {
        StreamFactory::new(seed).stream(Domain::Init, u64::MAX, k as u64).next_u64()
    }
}

pub fn fit_chains(cfg: &RunConfig, prep: &Prepared) -> Result<Vec<DrawStore>> {
    let configs: Vec<SamplerConfig> = (0..cfg.run.chains)
        .map(|k| SamplerConfig { seed: chain_seed(cfg.sampler.seed, k), ..cfg.sampler.clone() })
        .collect();
    let results: Vec<skewmda::Result<DrawStore>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|sc| scope.spawn(move || run_chain(&prep.data, &prep.spec, &cfg.prior, sc)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    results.into_iter().map(|r| r.step("sampler")).collect()
}

/// Draws of all chains in chain order.
pub fn pool_chains(stores: &[DrawStore]) -> DrawStore {
    let mut pooled = stores[0].clone();
    for s in &stores[1..] {
        pooled.draws.extend(s.draws.iter().cloned());
    }
    pooled.acceptance_rate = None;
    pooled
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyOutcome {
    pub name: String,
    pub result: Option<MiResult>,
}

/// What a pipeline run produced, beyond the files.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub patterns: PatternSummary,
    pub dic: Vec<Dic>,
    pub strategies: Vec<StrategyOutcome>,
    pub tipping: Option<TippingGrid>,
}

fn patterns_csv(dir: &mut RunDir, prep: &Prepared, summary: &PatternSummary) -> Result<()> {
    let rows = (0..=prep.data.p).map(|s| {
        vec![
            s.to_string(),
            if s == 0 { String::new() } else { prep.visits[s - 1].clone() },
            summary.pattern_counts[s].to_string(),
            if s == 0 { String::new() } else { summary.n_tail[s - 1].to_string() },
            if s == 0 { String::new() } else { summary.intermittent_counts[s - 1].to_string() },
        ]
    });
    dir.csv("patterns.csv", &["visit", "label", "last_observed_here", "observed_here_or_later", "intermittent_missing"], rows)
}

fn draws_csv(dir: &mut RunDir, stores: &[DrawStore]) -> Result<()> {
    let names = stores[0].column_names();
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(names);
    let mut rows = Vec::new();
    for (c, store) in stores.iter().enumerate() {
        let (_, table) = store.table().step("draw table")?;
        for (i, row) in table.into_iter().enumerate() {
            let mut out = vec![(c + 1).to_string(), (i + 1).to_string()];
            out.extend(row.into_iter().map(num));
            rows.push(out);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    dir.csv("draws.csv", &header, rows)
}

fn imputed_csv(dir: &mut RunDir, name: &str, sets: &[ImputedDataset], visits: &[String]) -> Result<()> {
    let rows = sets.iter().flat_map(|ds| {
        ds.long_rows().map(move |(id, j, v, pr)| {
            vec![ds.index.to_string(), (ds.draw + 1).to_string(), id.to_string(), visits[j - 1].clone(), num(v), pr.as_str().to_string()]
        })
    });
    dir.csv(&format!("imputed_{name}.csv"), &["imputation", "draw", "subject", "visit", "value", "provenance"], rows)
}

fn mi_row(label: Vec<String>, r: &MiResult) -> Vec<String> {
    let mut row = label;
    row.extend([
        r.m().to_string(),
        num(r.q_bar),
        num(r.u_bar),
        num(r.between),
        num(r.total),
        num(r.total.sqrt()),
        num(r.df),
        num(r.df_complete),
        num(r.t_stat),
        num(r.p_value),
    ]);
    row
}

const MI_COLUMNS: [&str; 10] = ["m", "estimate", "within", "between", "total", "se", "df", "df_complete", "t", "p_value"];

/// Runs `stage` into `out` and writes its manifest.
pub fn execute(cfg: &RunConfig, stage: Stage, out: &Path, log: &dyn Fn(&str)) -> Result<RunSummary> {
    let prep = prepare(cfg)?;
    let summary = prep.data.summary();
    log(&format!("data: {} subjects, {} visits, {} with an observation", summary.n_tot, prep.data.p, summary.n));
    if stage.tips() && cfg.tipping.is_none() && stage == Stage::Tip {
        return Err(CliError::Config("the tip command needs a [tipping] section".into()));
    }
    if (stage.analyzes() || stage.tips()) && prep.spec.treatment.is_none() && stage != Stage::Run {
        return Err(CliError::Config("analysis needs a treatment column".into()));
    }
    let mut dir = RunDir::create(out)?;
    patterns_csv(&mut dir, &prep, &summary)?;

    log(&format!("fit: {} chain(s), variant {}", cfg.run.chains, cfg.model.variant.name()));
    let stores = fit_chains(cfg, &prep)?;
    draws_csv(&mut dir, &stores)?;
    let diags = stores.iter().map(|s| chain_diagnostics(s).step("diagnostics")).collect::<Result<Vec<Vec<ParameterSummary>>>>()?;
    write_diagnostics(&mut dir, &diags)?;
    let pooled = pool_chains(&stores);
    let mut dic = stores.iter().map(|s| compute_dic(s, &prep.data).step("DIC")).collect::<Result<Vec<_>>>()?;
    if stores.len() > 1 {
        dic.push(compute_dic(&pooled, &prep.data).step("DIC")?);
    }
    let dic_rows = dic.iter().enumerate().map(|(k, d)| {
        let chain = if k < stores.len() { (k + 1).to_string() } else { "all".to_string() };
        vec![chain, num(d.dic), num(d.p_d), num(d.d_bar), num(d.d_hat)]
    });
    dir.csv("dic.csv", &["chain", "dic", "p_d", "d_bar", "d_hat"], dic_rows)?;

    let can_analyze = prep.spec.treatment.is_some();
    let mut strategies = Vec::new();
    if stage.imputes() {
        let mut mi_rows = Vec::new();
        let mut est_rows = Vec::new();
        for s in &cfg.imputation.strategies {
            let name = s.label();
            log(&format!("impute: {name}, m = {}", cfg.imputation.m));
            let sets = generate_mi_sets(&pooled, &prep.data, &prep.spec, &s.strategy, cfg.imputation.m, cfg.imputation.seed)
                .step("imputation")?;
            imputed_csv(&mut dir, &name, &sets, &prep.visits)?;
            let mut result = None;
            if stage.analyzes() && can_analyze {
                let r = analyze_mi(&sets, &prep.data, &prep.spec, &cfg.analysis).step("analysis")?;
                for (b, (e, v)) in r.estimates.iter().zip(&r.variances).enumerate() {
                    est_rows.push(vec![name.clone(), (b + 1).to_string(), num(*e), num(*v)]);
                }
                mi_rows.push(mi_row(vec![name.clone()], &r));
                result = Some(r);
            }
            strategies.push(StrategyOutcome { name, result });
        }
        if stage.analyzes() {
            if can_analyze {
                let mut header = vec!["strategy"];
                header.extend(MI_COLUMNS);
                dir.csv("mi_summary.csv", &header, mi_rows)?;
                dir.csv("mi_estimates.csv", &["strategy", "imputation", "estimate", "variance"], est_rows)?;
            } else {
                log("analysis skipped: no treatment column");
            }
        }
    }

    let mut tipping = None;
    if let (true, Some(t), true) = (stage.tips(), &cfg.tipping, can_analyze) {
        let tc = TippingConfig {
            delta0: t.delta0.clone(),
            delta1: t.delta1.clone(),
            m: t.m.unwrap_or(cfg.imputation.m),
            seed: t.seed.unwrap_or(cfg.imputation.seed),
            alpha: t.alpha,
            conditional: t.conditional,
        };
        log(&format!("tip: {} x {} grid, m = {}", tc.delta0.len(), tc.delta1.len(), tc.m));
        let grid = tipping_point(&pooled, &prep.data, &prep.spec, &tc, &cfg.analysis).step("tipping point")?;
        let mut rows = Vec::new();
        for (a, row) in grid.cells.iter().enumerate() {
            for (b, cell) in row.iter().enumerate() {
                let mut r = mi_row(vec![num(grid.delta0[a]), num(grid.delta1[b])], cell);
                r.push(num(-cell.p_value.log10()));
                rows.push(r);
            }
        }
        let mut header = vec!["delta_control", "delta_treated"];
        header.extend(MI_COLUMNS);
        header.push("neg_log10_p");
        dir.csv("tipping.csv", &header, rows)?;
        let bound = grid
            .boundary()
            .into_iter()
            .zip(&grid.delta0)
            .map(|(b, d0)| vec![num(*d0), b.map(num).unwrap_or_default()]);
        dir.csv("tipping_boundary.csv", &["delta_control", "first_nonsignificant_delta_treated"], bound)?;
        tipping = Some(grid);
    }

    let data_bytes = std::fs::read(&cfg.data.path).map_err(io_err(&cfg.data.path))?;
    let resolved = cfg
        .prior
        .resolve(prep.spec.p, prep.spec.q(), prep.spec.z_names.len())
        .step("prior")?;
    let chains: Vec<_> = stores
        .iter()
        .enumerate()
        .map(|(k, s)| {
            json!({
                "chain": k + 1,
                "seed": chain_seed(cfg.sampler.seed, k),
                "draws": s.len(),
                "nu_acceptance_rate": s.acceptance_rate,
                "nu_proposal_sd": if s.mh_step.is_finite() { Some(s.mh_step) } else { None },
            })
        })
        .collect();
    dir.manifest(json!({
        "tool": "skewmda",
        "version": env!("CARGO_PKG_VERSION"),
        "command": stage.name(),
        "seed": cfg.sampler.seed,
        "config": cfg,
        "resolved": {
            "pc_lambda": resolved.pc_lambda,
            "pc_lambda_rule": if cfg.prior.pc_lambda.is_some() { "configured".to_string() } else { format!("P(nu < {}) = 1/2", cfg.prior.pc_median) },
            "n_w": resolved.n_w(),
            "alpha_prior_rank": resolved.m_rank,
            "x_names": prep.spec.x_names,
            "z_names": prep.spec.z_names,
            "visits": prep.visits,
        },
        "data": { "sha256": sha256_hex(&data_bytes), "patterns": summary },
        "chains": chains,
        "dic": dic,
        "strategies": strategies,
    }))?;
    log(&format!("wrote {} files to {}", dir.files().len() + 1, dir.root().display()));
    Ok(RunSummary { patterns: summary, dic, strategies, tipping })
}

/// Per-chain diagnostics from a `draws.csv` written by a previous run.
pub fn diagnose_file(path: &Path) -> Result<Vec<Vec<ParameterSummary>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(path)(io),
        other => CliError::Data(format!("{}: {other:?}", path.display())),
    })?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("chain") {
        return Err(CliError::MissingColumn("chain".into()));
    }
    let mut chains: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let chain = rec.get(0).unwrap_or_default().to_string();
        let row = rec
            .iter()
            .enumerate()
            .skip(2)
            .map(|(k, v)| {
                v.parse::<f64>().map_err(|_| CliError::NonNumeric { line: line as u64 + 2, column: header[k].clone(), value: v.into() })
            })
            .collect::<Result<Vec<f64>>>()?;
        match chains.last_mut() {
            Some((c, rows)) if *c == chain => rows.push(row),
            _ => chains.push((chain, vec![row])),
        }
    }
    chains
        .into_iter()
        .map(|(_, rows)| {
            if rows.len() < 100 {
                return Err(CliError::Data(format!("a chain needs at least 100 draws, found {}", rows.len())));
            }
            Ok((2..header.len())
                .filter(|&k| rows.iter().all(|r| r[k - 2].is_finite()))
                .map(|k| {
                    let col: Vec<f64> = rows.iter().map(|r| r[k - 2]).collect();
                    skewmda::oracles::diagnostics::summarize(&header[k], &col, 50)
                })
                .collect())
        })
        .collect()
}
