mod common;

use std::collections::BTreeSet;

use common::{feasible_by_sets, rng};
use proptest::prelude::*;
use rand::Rng;
use sparsevary::benchmark::*;
use sparsevary::stepwise::sparse_ridge_greedy;
use sparsevary::{build_quadform, check_feasible, ProblemInstance, SimilarityGraph, SparsityBudget, Support, VertexBlock};

fn temporal(seed: u64) -> SynthParams {
    SynthParams { n: 40, t: 20, d: 50, k_local: 5, k_global: 0, k_change: 2, sigma_v: 0.1, seed, ..Default::default() }
}

fn spatial(seed: u64) -> SynthParams {
    SynthParams {
        mode: Mode::Spatial,
        n: 40,
        t: 20,
        d: 50,
        k_local: 5,
        k_global: 8,
        k_change: 4,
        sigma_v: 0.1,
        edges: 15,
        seed,
        ..Default::default()
    }
}

fn vertex_sets(z: &Support) -> Vec<BTreeSet<usize>> {
    (0..z.vertices()).map(|t| (0..z.dim()).filter(|&d| z.bits()[t * z.dim() + d]).collect()).collect()
}

#[test]
fn temporal_without_drift_or_changes_is_constant() {
    let p = SynthParams { sigma_v: 0.0, k_change: 0, ..temporal(3) };
    let truth = gen_beta_temporal(&p, &mut rng(3)).unwrap();
    let first = &truth.beta[..p.d];
    assert_eq!(first.iter().filter(|v| **v != 0.0).count(), p.k_local);
    assert!(first.iter().all(|&v| v == 0.0 || v == 1.0 || v == -1.0));
    for row in truth.beta.chunks(p.d) {
        assert_eq!(row, first);
    }
}

#[test]
fn temporal_full_support_admits_no_changes() {
    let p = SynthParams { k_local: 6, d: 6, k_change: 0, ..temporal(0) };
    let truth = gen_beta_temporal(&p, &mut rng(0)).unwrap();
    assert_eq!(truth.support.count(), p.t * p.d);
    let bad = SynthParams { k_change: 1, ..p };
    assert!(gen_beta_temporal(&bad, &mut rng(0)).is_err());
}

#[test]
fn temporal_rejects_more_changes_than_slots() {
    let p = SynthParams { t: 3, k_change: 3, ..temporal(0) };
    assert!(gen_beta_temporal(&p, &mut rng(0)).is_err());
}

#[test]
fn temporal_ground_truth_audit() {
    for seed in 0..10 {
        let p = temporal(seed);
        let truth = gen_beta_temporal(&p, &mut rng(seed)).unwrap();
        assert!(truth.graph.is_chain());
        assert_eq!(truth.replacements, p.k_change);
        let sets = vertex_sets(&truth.support);
        let changed_edges = (1..p.t).filter(|&t| sets[t] != sets[t - 1]).count();
        assert_eq!(changed_edges, p.k_change);
        let union: BTreeSet<usize> = sets.iter().flatten().copied().collect();
        assert_eq!(union.len(), p.k_local + p.k_change);
        let budget = SparsityBudget::new(p.k_local, p.k_local + p.k_change, 2 * p.k_change);
        assert!(feasible_by_sets(&truth.support, &budget, &truth.graph));
        assert!(check_feasible(&truth.support, &budget, &truth.graph));
    }
}

#[test]
fn spatial_edgeless_graph_gives_independent_vertices() {
    let p = SynthParams { edges: 0, k_change: 0, sigma_v: 0.0, ..spatial(1) };
    let truth = gen_beta_spatial(&p, &mut rng(1)).unwrap();
    assert_eq!(truth.graph.components().len(), p.t);
    let sets = vertex_sets(&truth.support);
    assert!(sets.iter().all(|s| s.len() == p.k_local));
    assert!(sets.iter().any(|s| *s != sets[0]));
}

#[test]
fn spatial_complete_graph_shares_one_base() {
    let p = SynthParams { t: 8, edges: 28, k_change: 0, ..spatial(2) };
    let truth = gen_beta_spatial(&p, &mut rng(2)).unwrap();
    assert_eq!(truth.graph.edge_count(), 28);
    assert_eq!(truth.graph.components().len(), 1);
    let sets = vertex_sets(&truth.support);
    assert!(sets.iter().all(|s| *s == sets[0]));
}

#[test]
fn spatial_rejects_too_many_edges() {
    let p = SynthParams { t: 5, edges: 11, ..spatial(0) };
    assert!(gen_beta_spatial(&p, &mut rng(0)).is_err());
    assert!(random_graph(5, 11, &mut rng(0)).is_err());
}

#[test]
fn spatial_ground_truth_audit() {
    for seed in 0..10 {
        let p = spatial(seed);
        let truth = gen_beta_spatial(&p, &mut rng(seed)).unwrap();
        assert_eq!(truth.graph.edge_count(), p.edges);
        assert_eq!(truth.replacements, p.k_change);
        let sets = vertex_sets(&truth.support);
        assert!(sets.iter().all(|s| s.len() == p.k_local));
        let union: BTreeSet<usize> = sets.iter().flatten().copied().collect();
        assert!(union.len() <= p.k_global);
        let change: usize = truth.graph.edges().iter().map(|&(s, t)| sets[s].symmetric_difference(&sets[t]).count()).sum();
        let budget = SparsityBudget::new(p.k_local, p.k_global, change);
        assert!(check_feasible(&truth.support, &budget, &truth.graph));
        // Only replaced vertices can differ from their neighbors.
        assert!(change <= 2 * truth.graph.degrees().iter().copied().max().unwrap_or(0) * p.k_change);
    }
}

#[test]
fn generated_datasets_are_feasible_under_their_budgets() {
    for seed in 0..3 {
        for p in [temporal(seed), spatial(seed)] {
            let ds = generate(&p).unwrap();
            assert!(check_feasible(&ds.z_true, &ds.budget, ds.instance.graph()));
            assert_eq!(Support::of_coefficients(p.t, p.d, &ds.beta_true).unwrap(), ds.z_true);
        }
    }
}

#[test]
fn generation_is_reproducible() {
    let a = generate(&temporal(9)).unwrap();
    let b = generate(&temporal(9)).unwrap();
    assert_eq!(a.beta_true, b.beta_true);
    assert_eq!(a.instance.blocks(), b.instance.blocks());
    assert_eq!(a.test_blocks, b.test_blocks);
    let c = generate(&temporal(10)).unwrap();
    assert_ne!(a.beta_true, c.beta_true);
    let s1 = generate(&spatial(4)).unwrap();
    let s2 = generate(&spatial(4)).unwrap();
    assert_eq!(s1.instance.graph(), s2.instance.graph());
    assert_eq!(s1.instance.blocks(), s2.instance.blocks());
}

#[test]
fn uncorrelated_design_has_variance_two() {
    let x = gen_x(100, 20, 50, 0.0, 0.0, &mut rng(5)).unwrap();
    let values: Vec<f64> = x.iter().flat_map(|m| m.as_slice().iter().copied()).collect();
    assert!(values.len() >= 100_000);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    assert!((var - 2.0).abs() < 0.1, "variance {var}");
}

#[test]
fn time_correlation_follows_the_recursion() {
    let rho: f64 = 0.6;
    let (xa, _) = gen_design_components(2000, 8, 50, rho, 0.0, &mut rng(6)).unwrap();
    // Var₀ = 1, Var_{t+1} = 1 + ρ² Var_t, Corr(t, t+1) = ρ √(Var_t / Var_{t+1}).
    let mut var = vec![1.0f64];
    for t in 0..7 {
        var.push(1.0 + rho * rho * var[t]);
    }
    for t in [0usize, 3, 6] {
        let a = xa[t].as_slice();
        let b = xa[t + 1].as_slice();
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
        let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n).sqrt();
        let sb = (b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n).sqrt();
        let expected = rho * (var[t] / var[t + 1]).sqrt();
        let got = cov / (sa * sb);
        assert!((got - expected).abs() < 0.05 * expected, "t={t}: {got} vs {expected}");
    }
}

#[test]
fn design_is_reproducible_and_validates_correlations() {
    let a = gen_x(5, 3, 4, 0.6, 0.6, &mut rng(1)).unwrap();
    let b = gen_x(5, 3, 4, 0.6, 0.6, &mut rng(1)).unwrap();
    assert_eq!(a, b);
    assert!(gen_x(5, 3, 4, 1.0, 0.0, &mut rng(1)).is_err());
}

#[test]
fn huge_snr_leaves_signal_almost_untouched() {
    let clean: Vec<Vec<f64>> = (0..4).map(|t| (0..50).map(|i| (i + t) as f64 * 0.1 - 2.0).collect()).collect();
    let noisy = add_noise(&clean, 1e9, &mut rng(2)).unwrap();
    let norm = clean.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let max_diff = clean.iter().flatten().zip(noisy.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(max_diff < 1e-3 * norm);
}

#[test]
fn snr_two_gives_quarter_noise_power() {
    let mut r = rng(7);
    let clean: Vec<Vec<f64>> = (0..10).map(|_| (0..1000).map(|_| r.random_range(-3.0..3.0)).collect()).collect();
    let noisy = add_noise(&clean, 2.0, &mut rng(8)).unwrap();
    let signal: f64 = clean.iter().flatten().map(|v| v * v).sum();
    let noise: f64 = clean.iter().flatten().zip(noisy.iter().flatten()).map(|(a, b)| (a - b).powi(2)).sum();
    let ratio = noise / signal;
    assert!((ratio - 0.25).abs() < 0.025, "ratio {ratio}");
    assert_eq!(noisy, add_noise(&clean, 2.0, &mut rng(8)).unwrap());
}

#[test]
fn zero_signal_stays_clean() {
    let clean = vec![vec![0.0; 5]; 3];
    assert_eq!(add_noise(&clean, 2.0, &mut rng(0)).unwrap(), clean);
    assert!(add_noise(&clean, 0.0, &mut rng(0)).is_err());
}

fn small_dataset(seed: u64) -> SynthDataset {
    generate(&SynthParams { n: 30, t: 4, d: 8, k_local: 2, k_change: 1, seed, ..Default::default() }).unwrap()
}

#[test]
fn perfect_estimate_metrics() {
    let ds = small_dataset(1);
    let m = compute_metrics(&ds.beta_true, &ds.z_true, &ds).unwrap();
    assert_eq!(m.mae_coefficients, 0.0);
    assert_eq!(m.support_recovered_pct, 100.0);
    assert_eq!(m.false_positive_pct, 0.0);
    let dim = ds.params.d;
    let ys: Vec<f64> = ds.test_blocks.iter().flat_map(|b| b.y.iter().copied()).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let sst: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let noise: f64 = ds
        .test_blocks
        .iter()
        .enumerate()
        .map(|(t, b)| {
            let clean = b.x.matvec(&ds.beta_true[t * dim..(t + 1) * dim]);
            b.y.iter().zip(clean).map(|(y, c)| (y - c).powi(2)).sum::<f64>()
        })
        .sum();
    assert!((m.oos_r2 - (1.0 - noise / sst)).abs() < 1e-12);
}

#[test]
fn null_model_metrics() {
    let ds = small_dataset(2);
    let zero = vec![0.0; ds.beta_true.len()];
    let empty = Support::empty(ds.params.t, ds.params.d);
    let m = compute_metrics(&zero, &empty, &ds).unwrap();
    assert_eq!(m.support_recovered_pct, 0.0);
    assert_eq!(m.false_positive_pct, 0.0);
    assert!(m.oos_r2 <= 0.0);
}

#[test]
fn metrics_match_a_direct_reimplementation() {
    let ds = small_dataset(3);
    let mut r = rng(11);
    for _ in 0..5 {
        let z = common::random_support(&mut r, ds.params.t, ds.params.d, 0.3);
        let beta: Vec<f64> = z.bits().iter().map(|&on| if on { r.random_range(-2.0..2.0) } else { 0.0 }).collect();
        let m = compute_metrics(&beta, &z, &ds).unwrap();

        let n = beta.len() as f64;
        let mae = beta.iter().zip(&ds.beta_true).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
        let mut pairs = Vec::new();
        for (t, b) in ds.test_blocks.iter().enumerate() {
            for i in 0..b.samples() {
                let pred: f64 = (0..ds.params.d).map(|d| b.x[(i, d)] * beta[t * ds.params.d + d]).sum();
                pairs.push((b.y[i], pred));
            }
        }
        let ybar = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
        let r2 = 1.0
            - pairs.iter().map(|(y, p)| (y - p).powi(2)).sum::<f64>() / pairs.iter().map(|(y, _)| (y - ybar).powi(2)).sum::<f64>();
        let truth: BTreeSet<usize> = ds.z_true.indices().into_iter().collect();
        let est: BTreeSet<usize> = z.indices().into_iter().collect();
        let rec = 100.0 * est.intersection(&truth).count() as f64 / truth.len() as f64;
        let fp = 100.0 * est.difference(&truth).count() as f64 / est.len().max(1) as f64;

        assert!((m.mae_coefficients - mae).abs() < 1e-12);
        assert!((m.oos_r2 - r2).abs() < 1e-9);
        assert!((m.support_recovered_pct - rec).abs() < 1e-12);
        assert!((m.false_positive_pct - fp).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perfect_support_metrics_iff_equal(bits in proptest::collection::vec(any::<bool>(), 32), flip in proptest::option::of(0usize..32)) {
        let ds = small_dataset(4);
        let mut z_bits = ds.z_true.bits().to_vec();
        if let Some(i) = flip {
            z_bits[i] = !z_bits[i];
        }
        let z = Support::from_bits(4, 8, z_bits).unwrap();
        let beta: Vec<f64> = z.bits().iter().zip(&bits).map(|(&on, &b)| if on { if b { 1.0 } else { -1.0 } } else { 0.0 }).collect();
        let m = compute_metrics(&beta, &z, &ds).unwrap();
        let perfect = m.support_recovered_pct == 100.0 && m.false_positive_pct == 0.0;
        prop_assert_eq!(perfect, z == ds.z_true);
        prop_assert!((0.0..=100.0).contains(&m.support_recovered_pct));
        prop_assert!((0.0..=100.0).contains(&m.false_positive_pct));
        prop_assert!(m.oos_r2 <= 1.0);
    }

    #[test]
    fn generators_are_feasible_and_reproducible(seed in 0u64..1000, kl in 1usize..4, kc in 0usize..3) {
        let p = SynthParams { n: 5, t: 6, d: 10, k_local: kl, k_global: kl + 2, k_change: kc, edges: 5, seed, ..Default::default() };
        let a = gen_beta_temporal(&p, &mut rng(seed)).unwrap();
        prop_assert!(check_feasible(&a.support, &SparsityBudget::new(kl, kl + kc, 2 * kc), &a.graph));
        prop_assert_eq!(&a, &gen_beta_temporal(&p, &mut rng(seed)).unwrap());
        let s = gen_beta_spatial(&SynthParams { mode: Mode::Spatial, ..p }, &mut rng(seed)).unwrap();
        let change = s.support.change_count(&s.graph);
        prop_assert!(check_feasible(&s.support, &SparsityBudget::new(kl, kl + 2, change), &s.graph));
        prop_assert_eq!(&s, &gen_beta_spatial(&SynthParams { mode: Mode::Spatial, ..p }, &mut rng(seed)).unwrap());
    }
}

#[test]
fn static_fit_on_one_vertex_matches_greedy() {
    let mut r = rng(12);
    let inst = common::random_instance(&mut r, SimilarityGraph::edgeless(1).unwrap(), 6, 20, 2.0, 0.0);
    let b = inst.block(0);
    let single = sparse_ridge_greedy(&b.x, &b.y, 3, 2.0, &(0..6).collect::<Vec<_>>()).unwrap();
    assert_eq!(fit_static(&inst, 3, 2.0).unwrap(), single.beta);
}

#[test]
fn static_fit_on_duplicated_vertices_matches_single_fit() {
    let mut r = rng(13);
    let x = common::gaussian_matrix(&mut r, 25, 7);
    let y: Vec<f64> = (0..25).map(|_| r.random_range(-1.0..1.0)).collect();
    let single = sparse_ridge_greedy(&x, &y, 3, 1.5, &(0..7).collect::<Vec<_>>()).unwrap();
    let blocks = vec![VertexBlock::new(x.clone(), y.clone()).unwrap(); 4];
    let inst = ProblemInstance::new(SimilarityGraph::chain(4).unwrap(), blocks, 1.0, 0.0).unwrap();
    // Stacking four copies scales XᵀX and Xᵀy by 4, so λ must scale too.
    let pooled = fit_static(&inst, 3, 4.0 * 1.5).unwrap();
    for row in pooled.chunks(7) {
        let support: Vec<usize> = (0..7).filter(|&d| row[d] != 0.0).collect();
        let mut expected = single.support.clone();
        expected.sort_unstable();
        assert_eq!(support, expected);
        for (a, b) in row.iter().zip(&single.beta) {
            assert!((a - b).abs() < 1e-10);
        }
    }
    assert!(fit_static(&inst, 8, 1.0).is_err());
}

#[test]
fn standard_grid_values() {
    let g = Grid::standard(300);
    let expected = [300.0, 100.0, 100.0 / 3.0, 100.0 / 9.0, 100.0 / 27.0, 100.0 / 81.0, 100.0 / 243.0];
    assert_eq!(g.lambda_beta.len(), 7);
    for (a, b) in g.lambda_beta.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12 * b);
    }
    assert_eq!(g.lambda_delta, vec![300.0, 100.0, 300.0 / 9.0]);
    assert_eq!(g.len(), 21);
}

#[test]
fn single_config_grid_returns_it() {
    let ds = small_dataset(5);
    let res = grid_search(&ds.instance, &Grid::single(7.0, 3.0), 0.7, |inst, stage| {
        assert_eq!(stage, FitStage::Refit);
        assert_eq!((inst.lambda_beta(), inst.lambda_delta()), (7.0, 3.0));
        fit_static(inst, 2, inst.lambda_beta())
    })
    .unwrap();
    assert_eq!((res.best.lambda_beta, res.best.lambda_delta), (7.0, 3.0));
}

#[test]
fn grid_search_picks_the_argmax() {
    let ds = small_dataset(6);
    let grid = Grid::standard(ds.params.n);
    let mut refit_lambdas = None;
    let res = grid_search(&ds.instance, &grid, 0.7, |inst, stage| {
        if stage == FitStage::Refit {
            refit_lambdas = Some((inst.lambda_beta(), inst.lambda_delta()));
            assert_eq!(inst.total_samples(), ds.instance.total_samples());
        }
        let qf = build_quadform(inst)?;
        sparsevary::stepwise::stepwise_fit(&qf, &ds.budget, 0)
    })
    .unwrap();
    assert_eq!(res.scores.len(), grid.len());
    assert!(res.scores.iter().all(|s| res.best.holdout_r2 >= s.holdout_r2));
    assert_eq!(refit_lambdas, Some((res.best.lambda_beta, res.best.lambda_delta)));
}

#[test]
fn holdout_split_is_contiguous() {
    let ds = small_dataset(7);
    let (train, valid) = holdout_split(&ds.instance, 0.7).unwrap();
    for t in 0..ds.params.t {
        let full = ds.instance.block(t);
        assert_eq!(train.block(t).samples(), 21);
        assert_eq!(valid[t].samples(), 9);
        assert_eq!(train.block(t).y[..], full.y[..21]);
        assert_eq!(valid[t].y[..], full.y[21..]);
        assert_eq!(valid[t].x.row(0), full.x.row(21));
    }
    assert!(holdout_split(&ds.instance, 1.0).is_err());
}

#[test]
fn dataset_round_trips_through_disk() {
    let ds = generate(&spatial(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(dir.path()).unwrap();
    assert_eq!(back.params, ds.params);
    assert_eq!(back.budget, ds.budget);
    assert_eq!(back.replacements, ds.replacements);
    assert_eq!(back.beta_true, ds.beta_true);
    assert_eq!(back.z_true, ds.z_true);
    assert_eq!(back.instance.graph(), ds.instance.graph());
    assert_eq!(back.instance.blocks(), ds.instance.blocks());
    assert_eq!(back.test_blocks, ds.test_blocks);
    let (qa, qb) = (build_quadform(&ds.instance).unwrap(), build_quadform(&back.instance).unwrap());
    let diff = qa.dense_m().max_abs_diff(&qb.dense_m());
    assert!(diff <= 1e-12);
}

#[test]
fn failed_incremental_lp_updates_fall_back_to_fresh_solves() {
    // At this grid point microlp's incremental updates hit a singular basis.
    let params = SynthParams { n: 40, t: 3, d: 6, k_local: 2, k_change: 1, ..Default::default() };
    let ds = generate(&params).unwrap();
    let (train, _) = holdout_split(&ds.instance, 0.7).unwrap();
    let inst = train.with_lambdas(40.0 / 243.0, 40.0).unwrap();
    let limits = sparsevary::master::SolveLimits::default().with_gap_tol(0.0).with_cut_tol(0.0);
    let res = fit_cutplane(&inst, &ds.budget, 0, &limits).unwrap();
    assert!(res.lp_rebuilds > 0);
    let qf = build_quadform(&inst).unwrap();
    let best = common::all_supports(3, 6)
        .into_iter()
        .filter(|z| check_feasible(z, &ds.budget, qf.graph()))
        .map(|z| sparsevary::oracle::eval_cost(&qf, &z).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((res.upper_bound - best).abs() <= 1e-9 * best.abs().max(1.0), "{} vs {best}", res.upper_bound);
}
