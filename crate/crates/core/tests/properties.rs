mod common;

use common::*;
use proptest::prelude::*;
use rankdyn::bart::{induced_partition, locate_cell, DecisionTree, Forest};
use rankdyn::baselines::borda_count;
use rankdyn::latent::{sample_latent_path, sample_latent_scores_static, sample_level_moves, LatentScoreState};
use rankdyn::model::{DesignBuilder, FitConfig, LagInput, Layout, ModelKind};
use rankdyn::oracle::exact_filter_oracle;
use rankdyn::rankings::{kendall_tau, rank_of_scores, Ranking, RankingPanel};
use rankdyn::regression::{Regressor, RegressorDraw};
use rankdyn::rng::derive_rng;
use rankdyn::simgen::{simulate, ScenarioId, ScenarioRequest};
use rankdyn::stats::truncated_normal_draw;

fn arb_perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn arb_ranking(n: usize) -> impl Strategy<Value = Ranking> {
    arb_perm(n).prop_map(|o| Ranking::from_order(&o).unwrap())
}

fn arb_tree(depth: u32) -> BoxedStrategy<DecisionTree> {
    let leaf = (-3.0..3.0f64).prop_map(DecisionTree::leaf);
    leaf.prop_recursive(depth, 16, 2, |inner| {
        (-2.0..2.0f64, inner.clone(), inner).prop_map(|(cut, l, r)| DecisionTree::split(0, cut, l, r))
    })
    .boxed()
}

fn distinct_scores(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::btree_set(-1000i32..1000, n).prop_flat_map(|set| {
        let v: Vec<f64> = set.into_iter().map(|x| x as f64 / 10.0).collect();
        Just(v).prop_shuffle()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranks_are_invariant_to_increasing_transforms(z in distinct_scores(7), a in 0.1..5.0f64, b in -3.0..3.0f64) {
        let r = rank_of_scores(&z).unwrap();
        let t: Vec<f64> = z.iter().map(|x| (a * x + b).atan() + x.powi(3)).collect();
        prop_assert_eq!(r, rank_of_scores(&t).unwrap());
    }

    #[test]
    fn kendall_tau_is_a_metric(a in arb_ranking(6), b in arb_ranking(6), c in arb_ranking(6)) {
        let d = |x: &Ranking, y: &Ranking| kendall_tau(x, y).unwrap();
        prop_assert!((0.0..=1.0).contains(&d(&a, &b)));
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b) == 0.0, a == b);
        // unscaled discordant-pair counts satisfy the triangle inequality
        let pairs = 15.0;
        prop_assert!((d(&a, &c) * pairs).round() <= (d(&a, &b) * pairs).round() + (d(&b, &c) * pairs).round());
    }

    #[test]
    fn forest_is_the_sum_of_its_trees(trees in proptest::collection::vec(arb_tree(3), 1..5), x in -3.0..3.0f64) {
        let sum: f64 = trees.iter().map(|t| t.predict(&[x])).sum();
        let f = Forest::new(trees, 1).unwrap();
        prop_assert!((f.predict(&[x]) - sum).abs() < 1e-12);
    }

    #[test]
    fn forest_is_constant_on_induced_cells(trees in proptest::collection::vec(arb_tree(3), 1..4), u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let f = Forest::new(trees, 1).unwrap();
        let cells = induced_partition(&f, 0).unwrap();
        let x = -3.0 + 6.0 * u;
        let k = locate_cell(&cells, x);
        prop_assert!(cells[k].contains(x));
        // a second point in the same cell gives the same value
        let (lo, hi) = (cells[k].lower.max(-10.0), cells[k].upper.min(10.0));
        let y = lo + (hi - lo) * v;
        if cells[k].contains(y) {
            prop_assert!((f.predict(&[x]) - f.predict(&[y])).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_draws_stay_inside(mu in -20.0..20.0f64, lo in -30.0..30.0f64, width in 1e-6..10.0f64, lower_inf: bool, upper_inf: bool, seed: u64) {
        let lower = if lower_inf { f64::NEG_INFINITY } else { lo };
        let upper = if upper_inf { f64::INFINITY } else { lo + width };
        let mut rng = derive_rng(seed, &[]);
        for _ in 0..20 {
            let x = truncated_normal_draw(mu, lower, upper, &mut rng).unwrap();
            prop_assert!(x > lower && x < upper, "{x} outside ({lower}, {upper})");
        }
    }

    #[test]
    fn static_sweeps_keep_the_ordering(rs in proptest::collection::vec(arb_ranking(5), 1..4), means in proptest::collection::vec(-5.0..5.0f64, 15), seed: u64) {
        let m = rs.len();
        let panel = RankingPanel::cross_section(rs, None).unwrap();
        let layout = Layout { n_items: 5, n_rankers: m, n_periods: 1, dynamic: false };
        let mut state = LatentScoreState::initialize(&panel, layout, |_| 0.0);
        for sweep in 0..5 {
            sample_latent_scores_static(&mut state, &means[..5 * m], &panel, seed, sweep).unwrap();
            prop_assert!(state.check_ordering(&panel).is_ok());
        }
    }

    #[test]
    fn path_sweeps_keep_the_ordering(orders in proptest::collection::vec(arb_perm(4), 2..5), cut in -1.0..1.0f64, l in -2.0..2.0f64, r in -2.0..2.0f64, seed: u64) {
        let t_n = orders.len();
        let rs = orders.iter().map(|o| vec![Ranking::from_order(o).unwrap()]).collect();
        let panel = RankingPanel::new(rs, None).unwrap();
        let layout = Layout { n_items: 4, n_rankers: 1, n_periods: t_n, dynamic: true };
        let builder = DesignBuilder::new(ModelKind::Arrobart.spec().unwrap(), LagInput::OwnScalarLag, &panel, layout);
        let reg = Regressor::from_draw(RegressorDraw::Forest(stump(cut, l, r)), &Default::default());
        let mut state = LatentScoreState::initialize(&panel, layout, |_| 0.0);
        for sweep in 0..5 {
            sample_latent_path(&mut state, &reg, &builder, &|_| 0.0, seed, sweep).unwrap();
            sample_level_moves(&mut state, &reg, &builder, &|_| 0.0, seed, sweep).unwrap();
            prop_assert!(state.check_ordering(&panel).is_ok());
        }
    }

    #[test]
    fn borda_ignores_ranker_order_and_duplication(rs in proptest::collection::vec(arb_ranking(6), 1..6), seed: u64) {
        let base = borda_count(&rs).unwrap();
        let mut shuffled = rs.clone();
        let mut rng = derive_rng(seed, &[]);
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
        prop_assert_eq!(&borda_count(&shuffled).unwrap(), &base);
        let doubled: Vec<Ranking> = rs.iter().chain(rs.iter()).cloned().collect();
        prop_assert_eq!(&borda_count(&doubled).unwrap(), &base);
    }

    #[test]
    fn filter_weights_form_a_simplex(cut in -1.5..1.5f64, l in -2.0..2.0f64, r in -2.0..2.0f64, orders in proptest::collection::vec(arb_perm(2), 1..4)) {
        let refs: Vec<&[usize]> = orders.iter().map(|o| o.as_slice()).collect();
        let panel = single_ranker_panel(&refs);
        let states = exact_filter_oracle(&stump(cut, l, r), &panel, &FitConfig::new(ModelKind::Arrobart)).unwrap();
        for s in &states {
            let w = &s.mixture.weights;
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            prop_assert!(s.mixture.normalizers.iter().all(|&n| (0.0..=1.0 + 1e-12).contains(&n)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulated_panels_are_valid_and_reproducible(k in 1u8..=3, dynamic: bool, sigma in 0.5..10.0f64, seed: u64) {
        let id = if dynamic { ScenarioId::Dynamic(k) } else { ScenarioId::Static(k) };
        let req = ScenarioRequest { n_items: Some(6), n_rankers: Some(3), n_periods: dynamic.then_some(5), ..ScenarioRequest::new(id, sigma, seed) };
        let a = simulate(&req).unwrap();
        let b = simulate(&req).unwrap();
        prop_assert_eq!(&a, &b);
        let p = a.panel();
        for t in 0..p.n_times() {
            for j in 0..p.n_rankers() {
                let mut ranks = p.ranking(j, t).ranks().to_vec();
                ranks.sort();
                prop_assert_eq!(ranks, (1..=6).collect::<Vec<u32>>());
            }
        }
        let mut bytes = Vec::new();
        p.write_csv(&mut bytes).unwrap();
        prop_assert_eq!(&RankingPanel::read_csv(bytes.as_slice()).unwrap(), p);
    }
}
