//! Property tests for metrics, statistics and the recommenders.

use popbias::metrics::{
    gap, kl_miscalibration, mae, popularity_lift, UserMetricRow, DEFAULT_ALPHA,
};
use popbias::model::{GenreDistribution, SparseMatrix};
use popbias::recommenders::{top_n, KnnModel, NmfConfig, NmfModel, Recommender};
use popbias::stats::{build_group_report, spearman, welch_t_test};
use popbias::stratify::{popularity_from_matrix, Group};
use popbias::{ItemId, UserId};
use proptest::prelude::*;

fn distribution() -> impl Strategy<Value = GenreDistribution<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], 1..12)
        .prop_filter("needs mass", |w| w.iter().any(|&x| x > 0.0))
        .prop_map(|w| GenreDistribution::from_dense(&w))
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, 2..30)
        .prop_filter("non-constant", |v| v.iter().any(|&x| x != v[0]))
}

fn matrix() -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    prop::collection::btree_map((0..10usize, 0..8usize), 2..=10u8, 5..50).prop_map(|cells| {
        cells
            .into_iter()
            .map(|((u, i), v)| (u, i, f64::from(v) / 2.0))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn miscalibration_is_non_negative(p in distribution(), q in prop_oneof![distribution(), Just(GenreDistribution::empty())]) {
        let mc = kl_miscalibration(&p, &q, DEFAULT_ALPHA).unwrap();
        prop_assert!(mc >= 0.0);
        prop_assert!(mc <= (1.0 / DEFAULT_ALPHA).ln() + 1e-12);
    }
}

proptest! {
    #[test]
    fn self_miscalibration_vanishes(p in distribution()) {
        prop_assert!(kl_miscalibration(&p, &p, DEFAULT_ALPHA).unwrap() <= 1e-12);
    }

    #[test]
    fn lift_is_bounded_below(gap_p in 1e-6..1.0f64, gap_q in 0.0..1.0f64) {
        let lift = popularity_lift(gap_p, gap_q).unwrap();
        prop_assert!(lift >= -1.0);
        prop_assert_eq!(lift == 0.0, gap_q == gap_p);
        prop_assert_eq!(popularity_lift(gap_p, gap_p).unwrap(), 0.0);
    }

    #[test]
    fn mae_is_translation_invariant(
        pairs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 1..100),
        shift in -1000.0..1000.0f64,
    ) {
        let shifted: Vec<(f64, f64)> = pairs.iter().map(|&(p, a)| (p + shift, a + shift)).collect();
        let (a, b) = (mae(&pairs).unwrap(), mae(&shifted).unwrap());
        // the shift itself is rounded to the operands' precision
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + shift.abs()), "{a} {b}");
    }

    #[test]
    fn gap_ignores_duplicated_lists(triplets in matrix(), picks in prop::collection::vec(prop::collection::vec(0..8usize, 1..6), 1..10)) {
        let m = SparseMatrix::from_triplets(10, 8, &triplets);
        let profile = popularity_from_matrix(&m).unwrap();
        let lists: Vec<(UserId, Vec<ItemId>)> = picks
            .iter()
            .enumerate()
            .map(|(u, items)| (UserId::from_index(u), items.iter().map(|&i| ItemId::from_index(i)).collect()))
            .collect();
        let doubled: Vec<(UserId, Vec<ItemId>)> = lists
            .iter()
            .map(|(u, items)| (*u, items.iter().chain(items).copied().collect()))
            .collect();
        let (a, b) = (gap(&lists, &profile).unwrap(), gap(&doubled, &profile).unwrap());
        prop_assert!((a - b).abs() <= 1e-12, "{a} {b}");
    }

    #[test]
    fn welch_is_antisymmetric(a in sample(), b in sample()) {
        let ab = welch_t_test(&a, &b).unwrap();
        let ba = welch_t_test(&b, &a).unwrap();
        prop_assert_eq!(ab.t, -ba.t);
        prop_assert_eq!(ab.p, ba.p);
        prop_assert!((0.0..=1.0).contains(&ab.p));
    }

    #[test]
    fn spearman_survives_monotone_maps(xs in prop::collection::vec(-1000i32..1000, 3..40), ys in prop::collection::vec(-1000i32..1000, 3..40)) {
        let n = xs.len().min(ys.len());
        let x: Vec<f64> = xs[..n].iter().map(|&v| f64::from(v)).collect();
        let y: Vec<f64> = ys[..n].iter().map(|&v| f64::from(v)).collect();
        let Ok(base) = spearman(&x, &y) else {
            prop_assume!(false);
            unreachable!()
        };
        // exact in f64 for these magnitudes
        let cubed: Vec<f64> = x.iter().map(|v| v * v * v + 2.0 * v).collect();
        let shifted: Vec<f64> = y.iter().map(|v| 3.0 * v - 7.0).collect();
        prop_assert_eq!(spearman(&cubed, &shifted).unwrap(), base);
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!((spearman(&x, &flipped).unwrap() + base).abs() <= 1e-12);
    }

    #[test]
    fn report_means_match_rows(values in prop::collection::vec((0.0..4.0f64, 0.0..5.0f64, 0.01..1.0f64, 0.0..1.0f64), 6..60)) {
        let rows: Vec<UserMetricRow<f64>> = values
            .iter()
            .enumerate()
            .map(|(u, &(mae, mc, gap_p, gap_q))| UserMetricRow {
                user: UserId::from_index(u),
                group: Group::ALL[u % 3],
                mae: Some(mae),
                mc: Some(mc),
                gap_p,
                gap_q: Some(gap_q),
            })
            .collect();
        let report = build_group_report("x", &rows).unwrap();
        for g in Group::ALL {
            let mine: Vec<&UserMetricRow<f64>> = rows.iter().filter(|r| r.group == g).collect();
            let n = mine.len() as f64;
            let mean = |f: fn(&UserMetricRow<f64>) -> f64| mine.iter().map(|r| f(r)).sum::<f64>() / n;
            let s = report.summary(g);
            prop_assert_eq!(s.users, mine.len());
            prop_assert!((s.mae.unwrap() - mean(|r| r.mae.unwrap())).abs() <= 1e-12);
            prop_assert!((s.mc.unwrap() - mean(|r| r.mc.unwrap())).abs() <= 1e-12);
            let (gp, gq) = (mean(|r| r.gap_p), mean(|r| r.gap_q.unwrap()));
            prop_assert!((s.pl.unwrap() - (gq - gp) / gp).abs() <= 1e-9);
        }
    }

    #[test]
    fn knn_ignores_rating_order(triplets in matrix(), k in 1usize..6, rotate in 0usize..50) {
        let mut reordered = triplets.clone();
        reordered.reverse();
        let r = rotate % reordered.len();
        reordered.rotate_left(r);
        let a = SparseMatrix::from_triplets(10, 8, &triplets);
        let b = SparseMatrix::from_triplets(10, 8, &reordered);
        let ma = KnnModel::fit(&a, k, (1.0, 5.0)).unwrap();
        let mb = KnnModel::fit(&b, k, (1.0, 5.0)).unwrap();
        for u in 0..10 {
            let user = UserId::from_index(u);
            for i in 0..8 {
                let item = ItemId::from_index(i);
                let p = ma.predict(user, item).unwrap();
                prop_assert_eq!(p, mb.predict(user, item).unwrap());
                prop_assert!((1.0..=5.0).contains(&p));
            }
            prop_assert_eq!(top_n(&ma, user, 3, &a).unwrap(), top_n(&mb, user, 3, &b).unwrap());
        }
    }

    #[test]
    fn nmf_predictions_stay_in_range(triplets in matrix(), factors in 1usize..5, seed in any::<u64>()) {
        let m = SparseMatrix::from_triplets(10, 8, &triplets);
        let model = NmfModel::fit(&m, NmfConfig { factors, iterations: 30, seed }, (1.0, 5.0)).unwrap();
        let again = NmfModel::fit(&m, NmfConfig { factors, iterations: 30, seed }, (1.0, 5.0)).unwrap();
        prop_assert_eq!(&model, &again);
        for u in 0..10 {
            for p in model.score_all(UserId::from_index(u)).unwrap() {
                prop_assert!((1.0..=5.0).contains(&p));
            }
        }
    }
}
