use wfgl::admm::AdmmConfig;
use wfgl::evaluation::{differential_confusion, support_fpr};
use wfgl::exec::with_threads;
use wfgl::permutation::{differential_count_distribution, FrozenFit};
use wfgl::pipeline::{estimate, EdgeCounts, EstimateOptions, WeightSource};
use wfgl::simgen::{build_joint_model, sample_paired_gaussian, GroundTruthModel, SimConfig};
use wfgl::triangle::{prune_triangles, TriangleCorrection};
use wfgl::weights::PsiEstimator;

fn model() -> GroundTruthModel {
    build_joint_model(&SimConfig { p: 40, seed: 11, ..Default::default() }).unwrap()
}

#[test]
fn simulated_fit_recovers_signal() {
    let m = model();
    let data = sample_paired_gaussian(&m, 300, 5).unwrap();
    let out = estimate(&data, &EstimateOptions { triangle: None, ..Default::default() }).unwrap();
    let est = out.estimate();
    assert!(est.converged);
    let c = differential_confusion(est, &m).unwrap();
    assert!(c.tp > 0, "{c:?}");
    assert!(c.tp >= c.fp, "{c:?}");
    let fpr = support_fpr(est, &m).unwrap().value();
    assert!(fpr < 0.15, "support FPR {fpr}");
}

#[test]
fn fits_are_deterministic() {
    let m = model();
    let data = sample_paired_gaussian(&m, 120, 2).unwrap();
    let a = estimate(&data, &EstimateOptions::default()).unwrap();
    let b = estimate(&data, &EstimateOptions::default()).unwrap();
    assert_eq!(a.estimate(), b.estimate());
    assert_eq!(a.tuning, b.tuning);
}

#[test]
fn permutation_summary_independent_of_threads() {
    let m = model();
    let data = sample_paired_gaussian(&m, 100, 3).unwrap();
    let out = estimate(&data, &EstimateOptions::default()).unwrap();
    let frozen = out.frozen(&AdmmConfig::default(), Some((0.05, TriangleCorrection::None)));
    let run = |t| with_threads(t, || differential_count_distribution(&data, out.estimate(), &out.weights, &frozen, 6, 40).unwrap());
    assert_eq!(run(Some(1)), run(Some(3)));
}

#[test]
fn permuting_identical_conditions_gives_no_differences() {
    let m = model();
    let d = sample_paired_gaussian(&m, 100, 4).unwrap();
    let data = wfgl::model::PairedDataset::new(d.x.clone(), d.x.clone(), None).unwrap();
    let opts = EstimateOptions { weights: WeightSource::Independence, triangle: None, ..Default::default() };
    let out = estimate(&data, &opts).unwrap();
    assert_eq!(out.estimate().differential_count(), 0);
    let frozen = FrozenFit { admm: AdmmConfig::with_lambdas(out.unpruned.lambda1, out.unpruned.lambda2), triangle: None };
    let s = differential_count_distribution(&data, out.estimate(), &out.weights, &frozen, 4, 1).unwrap();
    assert!(s.replicate_counts.iter().all(|c| c.total == 0));
}

#[test]
fn retained_edges_grow_with_alpha() {
    let m = model();
    let data = sample_paired_gaussian(&m, 150, 8).unwrap();
    let out = estimate(&data, &EstimateOptions { triangle: None, ..Default::default() }).unwrap();
    let mut last = 0usize;
    for alpha in [0.0, 0.01, 0.03, 0.05, 0.2, 1.0] {
        let (pruned, _) = prune_triangles(&out.unpruned, &data, alpha, TriangleCorrection::None).unwrap();
        let kept = pruned.graph_x().len() + pruned.graph_y().len();
        assert!(kept >= last, "alpha {alpha}: {kept} < {last}");
        last = kept;
    }
    assert_eq!(last, out.unpruned.graph_x().len() + out.unpruned.graph_y().len());
}

#[test]
fn bh_correction_prunes_at_least_as_much() {
    let m = model();
    let data = sample_paired_gaussian(&m, 150, 9).unwrap();
    let out = estimate(&data, &EstimateOptions { triangle: None, ..Default::default() }).unwrap();
    let (plain, _) = prune_triangles(&out.unpruned, &data, 0.05, TriangleCorrection::None).unwrap();
    let (bh, _) = prune_triangles(&out.unpruned, &data, 0.05, TriangleCorrection::Bh).unwrap();
    assert!(bh.graph_x().is_subset(&plain.graph_x()));
    assert!(bh.graph_y().is_subset(&plain.graph_y()));
}

#[test]
fn paired_estimators_all_fit() {
    let m = model();
    let data = sample_paired_gaussian(&m, 120, 6).unwrap();
    let counts: Vec<EdgeCounts> = [PsiEstimator::Independence, PsiEstimator::RegBased, PsiEstimator::RegBasedSim]
        .into_iter()
        .map(|e| {
            let opts = EstimateOptions { weights: WeightSource::Paired(e), ..Default::default() };
            EdgeCounts::of(estimate(&data, &opts).unwrap().estimate())
        })
        .collect();
    assert!(counts.iter().all(|c| c.common > 0), "{counts:?}");
}
