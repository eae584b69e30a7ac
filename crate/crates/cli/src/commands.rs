use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use wfgl::admm::JointEstimate;
use wfgl::io::{read_long_paired, read_paired, read_table, read_weights, write_edges, write_json, write_rows, write_table, write_weights};
use wfgl::model::PairedDataset;
use wfgl::permutation::differential_count_distribution;
use wfgl::pipeline::{estimate as fit, EdgeCounts, EstimateOptions, EstimateOutcome, WeightSource};
use wfgl::screening::{screen as run_screen, GeneScreen};
use wfgl::simgen::{build_joint_model, sample_paired_gaussian};
use wfgl::tuning::{IterationPenalty, TuningResult};

use crate::config::{RunConfig, WeightMode};
use crate::error::{CliError, CliResult};
use crate::InputArgs;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn metadata(command: &str, cfg: &RunConfig) -> Vec<(String, String)> {
    vec![
        ("wfgl".into(), VERSION.into()),
        ("command".into(), command.into()),
        ("config".into(), cfg.to_json()),
    ]
}

fn out_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let sim = &cfg.simulate;
    sim.validate()?;
    out_dir(out)?;
    let model = build_joint_model(sim)?;
    let data = sample_paired_gaussian(&model, sim.n, sim.seed)?;
    let names = &data.variable_names;
    write_table(&out.join("data_x.tsv"), names, &data.x)?;
    write_table(&out.join("data_y.tsv"), names, &data.y)?;
    let rows: Vec<Vec<String>> = model
        .edge_labels
        .iter()
        .map(|(&(i, j), label)| {
            vec![
                (i + 1).to_string(),
                (j + 1).to_string(),
                names[i].clone(),
                names[j].clone(),
                label.as_str().to_string(),
                model.omega_x[(i, j)].to_string(),
                model.omega_y[(i, j)].to_string(),
            ]
        })
        .collect();
    let meta = metadata("simulate", cfg);
    write_rows(&out.join("truth_edges.tsv"), &["i", "j", "name_i", "name_j", "label", "omega_x", "omega_y"], &rows, &meta)?;
    let joint_names: Vec<String> = names.iter().map(|n| format!("X_{n}")).chain(names.iter().map(|n| format!("Y_{n}"))).collect();
    write_table(&out.join("truth_omega_joint.tsv"), &joint_names, &model.omega_joint)?;
    #[derive(Serialize)]
    struct ModelJson<'a> {
        wfgl: &'a str,
        config: &'a wfgl::simgen::SimConfig,
        model_seed: u64,
        data_seed: u64,
        dim: usize,
        delta: f64,
        cross_shrink: f64,
        cross_diag: &'a [f64],
        differential_edges: usize,
        truth_edges: usize,
    }
    write_json(
        &out.join("model.json"),
        &ModelJson {
            wfgl: VERSION,
            config: sim,
            model_seed: sim.seed,
            data_seed: sim.seed,
            dim: model.dim(),
            delta: model.delta,
            cross_shrink: model.cross_shrink,
            cross_diag: &model.cross_diag,
            differential_edges: model.differential_edges().len(),
            truth_edges: model.edge_labels.len(),
        },
    )?;
    Ok(())
}

pub fn read_input(input: &InputArgs) -> CliResult<PairedDataset> {
    match (&input.x, &input.y, &input.long) {
        (Some(x), Some(y), None) => Ok(read_paired(x, y)?),
        (None, None, Some(l)) => Ok(read_long_paired(l)?),
        _ => Err(CliError::Config("give either --x and --y, or --long".into())),
    }
}

pub fn options(cfg: &RunConfig) -> CliResult<EstimateOptions> {
    let weights = match (&cfg.weights.file, cfg.weights.mode) {
        (Some(f), _) => WeightSource::Given(read_weights(f)?),
        (None, WeightMode::Independence) => WeightSource::Independence,
        (None, WeightMode::Paired) => WeightSource::Paired(cfg.weights.estimator),
    };
    let alpha = cfg.triangle_alpha();
    if cfg.triangle.prune && !(0.0..=1.0).contains(&alpha) {
        return Err(CliError::Config(format!("triangle alpha must be in [0, 1], got {alpha}")));
    }
    cfg.admm.validate()?;
    cfg.tuning.validate()?;
    Ok(EstimateOptions {
        admm: cfg.admm,
        tuning: cfg.tuning,
        weights,
        triangle: cfg.triangle.prune.then_some((alpha, cfg.triangle.correction)),
    })
}

fn fit_checked(cfg: &RunConfig, data: &PairedDataset, allow_nonconverged: bool) -> CliResult<(EstimateOptions, EstimateOutcome)> {
    let opts = options(cfg)?;
    let outcome = fit(data, &opts)?;
    if !outcome.unpruned.converged && !allow_nonconverged {
        return Err(CliError::Convergence(format!(
            "no convergence after {} iterations (tol {}); rerun with --allow-nonconverged to keep the result",
            outcome.unpruned.iterations, cfg.admm.tol
        )));
    }
    Ok((opts, outcome))
}

#[derive(Serialize)]
struct PruneJson {
    condition: &'static str,
    triangles: usize,
    weakest_edges: usize,
    removed: usize,
}

#[derive(Serialize)]
struct EstimateJson<'a> {
    wfgl: &'a str,
    config: &'a RunConfig,
    n: usize,
    p: usize,
    alpha2_prime: f64,
    lambda1: f64,
    lambda2: f64,
    iterations: usize,
    converged: bool,
    counts_before_pruning: EdgeCounts,
    counts: EdgeCounts,
    pruning: Option<Vec<PruneJson>>,
    trajectory: &'a [IterationPenalty],
}

fn summary_json<'a>(cfg: &'a RunConfig, data: &PairedDataset, out: &'a EstimateOutcome, tuning: &'a TuningResult) -> EstimateJson<'a> {
    let est = out.estimate();
    EstimateJson {
        wfgl: VERSION,
        config: cfg,
        n: data.n(),
        p: data.p(),
        alpha2_prime: tuning.alpha2_prime,
        lambda1: out.unpruned.lambda1,
        lambda2: out.unpruned.lambda2,
        iterations: out.unpruned.iterations,
        converged: out.unpruned.converged,
        counts_before_pruning: EdgeCounts::of(&out.unpruned),
        counts: EdgeCounts::of(est),
        pruning: out.pruned.as_ref().map(|(_, r)| {
            [("x", &r.x), ("y", &r.y)]
                .into_iter()
                .map(|(c, p)| PruneJson { condition: c, triangles: p.triangles, weakest_edges: p.weakest.len(), removed: p.removed.len() })
                .collect()
        }),
        trajectory: &tuning.trajectory,
    }
}

fn write_edge_files(out: &Path, est: &JointEstimate, names: &[String], meta: &[(String, String)]) -> CliResult<()> {
    write_edges(&out.join("common_edges.tsv"), &est.common_edges, est, names, meta)?;
    write_edges(&out.join("x_only_edges.tsv"), &est.x_only_edges, est, names, meta)?;
    write_edges(&out.join("y_only_edges.tsv"), &est.y_only_edges, est, names, meta)?;
    Ok(())
}

pub fn estimate(cfg: &RunConfig, data: &PairedDataset, out: &Path, export_weights: Option<&Path>, allow_nonconverged: bool) -> CliResult<()> {
    let (_, outcome) = fit_checked(cfg, data, allow_nonconverged)?;
    out_dir(out)?;
    let meta = metadata("estimate", cfg);
    write_edge_files(out, outcome.estimate(), &data.variable_names, &meta)?;
    write_json(&out.join("summary.json"), &summary_json(cfg, data, &outcome, &outcome.tuning))?;
    if let Some(path) = export_weights {
        write_weights(path, &data.variable_names, &outcome.weights)?;
    }
    Ok(())
}

pub fn permtest(cfg: &RunConfig, data: &PairedDataset, out: &Path, allow_nonconverged: bool) -> CliResult<()> {
    if cfg.permtest.reps < 1 {
        return Err(CliError::Config("permtest reps must be >= 1".into()));
    }
    let (opts, outcome) = fit_checked(cfg, data, allow_nonconverged)?;
    let frozen = outcome.frozen(&opts.admm, opts.triangle);
    let summary = differential_count_distribution(data, outcome.estimate(), &outcome.weights, &frozen, cfg.permtest.reps, cfg.permtest.seed)?;
    out_dir(out)?;
    let meta = metadata("permtest", cfg);
    let rows: Vec<Vec<String>> = summary
        .replicate_counts
        .iter()
        .enumerate()
        .map(|(r, c)| vec![(r + 1).to_string(), (cfg.permtest.seed + r as u64).to_string(), c.x_only.to_string(), c.y_only.to_string(), c.total.to_string()])
        .collect();
    write_rows(&out.join("permtest_counts.tsv"), &["replicate", "seed", "x_only", "y_only", "total"], &rows, &meta)?;
    #[derive(Serialize)]
    struct PermJson<'a> {
        wfgl: &'a str,
        config: &'a RunConfig,
        replicates: usize,
        #[serde(flatten)]
        summary: &'a wfgl::permutation::PermutationSummary,
    }
    write_json(&out.join("permtest_summary.json"), &PermJson { wfgl: VERSION, config: cfg, replicates: cfg.permtest.reps, summary: &summary })?;
    Ok(())
}

fn read_clusters(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(['\t', ',']).map(str::trim).collect();
        if fields.len() != 2 {
            return Err(CliError::Data(format!("{}: line {} must have gene and cluster", path.display(), k + 1)));
        }
        if k == 0 && fields[0] == "gene" {
            continue;
        }
        out.insert(fields[0].to_string(), fields[1].to_string());
    }
    Ok(out)
}

pub fn screen_rows(results: &[GeneScreen], clusters: Option<&BTreeMap<String, String>>) -> Vec<Vec<String>> {
    results
        .iter()
        .map(|g| {
            let mut r = vec![
                g.gene.clone(),
                g.adcor_h.to_string(),
                g.adcor_t.to_string(),
                g.tss.to_string(),
                g.pval_h.to_string(),
                g.pval_t.to_string(),
                g.pval_d.to_string(),
                g.adj_h.to_string(),
                g.adj_t.to_string(),
                g.adj_d.to_string(),
                g.selected.to_string(),
            ];
            if let Some(c) = clusters {
                r.push(c.get(&g.gene).cloned().unwrap_or_else(|| "NA".into()));
            }
            r
        })
        .collect()
}

pub fn screen(cfg: &RunConfig, healthy: &Path, tumor: &Path, clusters: Option<&Path>, out: &Path) -> CliResult<()> {
    cfg.screen.validate()?;
    let h = read_table(healthy)?;
    let t = read_table(tumor)?;
    if h.names != t.names || h.data.shape() != t.data.shape() {
        return Err(CliError::Data("healthy and tumor files must have the same genes and samples".into()));
    }
    let labels = clusters.map(read_clusters).transpose()?;
    let results = run_screen(&h.data, &t.data, &h.names, &cfg.screen)?;
    out_dir(out)?;
    let meta = metadata("screen", cfg);
    let mut header = vec!["gene", "adcor_h", "adcor_t", "tss", "pval_h", "pval_t", "pval_d", "adj_h", "adj_t", "adj_d", "selected"];
    if labels.is_some() {
        header.push("cluster");
    }
    write_rows(&out.join("screen_results.tsv"), &header, &screen_rows(&results, labels.as_ref()), &meta)?;
    let selected: Vec<Vec<String>> = results
        .iter()
        .filter(|g| g.selected)
        .map(|g| match &labels {
            Some(l) => vec![g.gene.clone(), l.get(&g.gene).cloned().unwrap_or_else(|| "NA".into())],
            None => vec![g.gene.clone()],
        })
        .collect();
    let sel_header: &[&str] = if labels.is_some() { &["gene", "cluster"] } else { &["gene"] };
    write_rows(&out.join("selected_genes.tsv"), sel_header, &selected, &meta)?;
    Ok(())
}
