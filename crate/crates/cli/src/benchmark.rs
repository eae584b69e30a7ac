use std::path::Path;

use serde::Serialize;
use wfgl::evaluation::{
    fpr_calibration, mean_delta, psi_oracle_mc, rank_bias_experiment, triangle_table, youden_experiment, ExperimentConfig,
};
use wfgl::simgen::build_joint_model;
use wfgl::stats::{mean, one_sample_t_pvalue, sign_test_greater_pvalue};

use crate::commands::{metadata, VERSION};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Youden,
    Triangle,
    Rank,
    Fpr,
}

impl Table {
    fn name(self) -> &'static str {
        match self {
            Table::Youden => "youden",
            Table::Triangle => "triangle",
            Table::Rank => "rank",
            Table::Fpr => "fpr",
        }
    }
}

pub fn experiment(cfg: &RunConfig) -> ExperimentConfig {
    ExperimentConfig {
        sim: cfg.simulate.clone(),
        admm: cfg.admm,
        tuning: cfg.tuning,
        psi_estimator: cfg.benchmark.psi_estimator,
        replicates: cfg.benchmark.replicates,
        data_seed: cfg.benchmark.data_seed,
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    wfgl: &'a str,
    table: Table,
    config: &'a RunConfig,
    model_seed: u64,
    data_seeds: (u64, u64),
    summary: serde_json::Value,
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("summary serializes")
}

fn f(v: f64) -> String {
    v.to_string()
}

pub fn run(cfg: &RunConfig, table: Table, out: &Path) -> CliResult<()> {
    let exp = experiment(cfg);
    exp.validate()?;
    std::fs::create_dir_all(out)?;
    let meta = metadata(&format!("benchmark --table {}", table.name()), cfg);
    let tsv = out.join(format!("{}.tsv", table.name()));
    let json = out.join(format!("{}_meta.json", table.name()));
    let seeds = (exp.data_seed, exp.data_seed + exp.replicates as u64 - 1);
    let write_meta = |summary: serde_json::Value| -> CliResult<()> {
        let m = Meta { wfgl: VERSION, table, config: cfg, model_seed: exp.sim.seed, data_seeds: seeds, summary };
        Ok(wfgl::io::write_json(&json, &m)?)
    };
    match table {
        Table::Youden => {
            let (outs, failed) = youden_experiment(&exp, cfg.benchmark.max_steps)?;
            let rows: Vec<Vec<String>> = outs
                .iter()
                .map(|o| {
                    vec![
                        f(o.delta),
                        o.wfgl.tp.to_string(),
                        o.wfgl.fp.to_string(),
                        o.fgl.tp.to_string(),
                        o.fgl.fp.to_string(),
                        o.wfgl_common.to_string(),
                        o.wfgl_diff.to_string(),
                        o.fgl_common.to_string(),
                        o.fgl_diff.to_string(),
                    ]
                })
                .collect();
            let header = ["delta", "tp_wfgl", "fp_wfgl", "tp_fgl", "fp_fgl", "common_wfgl", "diff_wfgl", "common_fgl", "diff_fgl"];
            wfgl::io::write_rows(&tsv, &header, &rows, &meta)?;
            let deltas: Vec<f64> = outs.iter().map(|o| o.delta).collect();
            #[derive(Serialize)]
            struct S {
                replicates: usize,
                failed: usize,
                mean_delta: f64,
                sign_test_p: f64,
                t_test_p: f64,
            }
            let s = S {
                replicates: outs.len(),
                failed,
                mean_delta: mean_delta(&outs),
                sign_test_p: sign_test_greater_pvalue(&deltas),
                t_test_p: one_sample_t_pvalue(&deltas),
            };
            write_meta(to_json(&s))?;
        }
        Table::Triangle => {
            let rows = triangle_table(&exp, &cfg.benchmark.triangle_alphas)?;
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let c = &r.counts;
                    vec![
                        r.alpha.map_or_else(|| "NO".to_string(), f),
                        f(c.tp_common),
                        f(c.fp_common),
                        f(c.tp_diff),
                        f(c.fp_diff),
                        f(c.tp()),
                        f(c.fp()),
                    ]
                })
                .collect();
            wfgl::io::write_rows(&tsv, &["alpha", "tp_common", "fp_common", "tp_diff", "fp_diff", "tp", "fp"], &body, &meta)?;
            write_meta(to_json(&rows))?;
        }
        Table::Rank => {
            let model = build_joint_model(&exp.sim)?;
            let b = &cfg.benchmark;
            let oracle = psi_oracle_mc(&model, exp.sim.n, b.oracle_reps, b.oracle_seed, exp.admm.rho, exp.admm.class_weight)?;
            let pairs = rank_bias_experiment(&exp, &oracle)?;
            let body: Vec<Vec<String>> =
                pairs.iter().enumerate().map(|(r, (i, p))| vec![(exp.data_seed + r as u64).to_string(), f(*i), f(*p)]).collect();
            wfgl::io::write_rows(&tsv, &["seed", "independence", "paired"], &body, &meta)?;
            let ind: Vec<f64> = pairs.iter().map(|x| x.0).collect();
            let pai: Vec<f64> = pairs.iter().map(|x| x.1).collect();
            #[derive(Serialize)]
            struct S {
                oracle_reps: usize,
                oracle_seed: u64,
                mean_independence: f64,
                mean_paired: f64,
                ratio: f64,
            }
            let (mi, mp) = (mean(&ind), mean(&pai));
            let s = S { oracle_reps: b.oracle_reps, oracle_seed: b.oracle_seed, mean_independence: mi, mean_paired: mp, ratio: (mp / mi).abs() };
            write_meta(to_json(&s))?;
        }
        Table::Fpr => {
            if cfg.benchmark.fpr_alphas.is_empty() {
                return Err(CliError::Config("benchmark.fpr_alphas is empty".into()));
            }
            let rows = fpr_calibration(&exp, cfg.benchmark.fpr_target, &cfg.benchmark.fpr_alphas)?;
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![f(r.target), f(r.median), f(r.q025), f(r.q975), r.replicates.to_string(), r.failed.to_string()])
                .collect();
            wfgl::io::write_rows(&tsv, &["target", "median", "q025", "q975", "replicates", "failed"], &body, &meta)?;
            write_meta(to_json(&rows))?;
        }
    }
    Ok(())
}
