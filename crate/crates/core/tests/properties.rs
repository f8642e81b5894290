use proptest::prelude::*;

use fpmpc::ingest::{normalize_covariates, parse_csv_counts, parse_libsvm, write_libsvm, CovariateSet, RawRecord};
use fpmpc::leakage::{bound_masking, mutual_information, BoundedPrior, LeakageEvent, LeakageLedger};
use fpmpc::sharing::{reconstruct, share_n, share_two};
use fpmpc::{NoiseSpec, RandomSource, Tensor};

fn event() -> impl Strategy<Value = LeakageEvent> {
    prop_oneof![
        (0.0..1.0f64, 10.0..1e8f64).prop_map(|(beta, gamma)| LeakageEvent::Masking { beta, gamma }),
        (4.0..1e8f64).prop_map(|gamma| LeakageEvent::BeaverSquare { gamma }),
        (1u32..30, 0.0..1.0f64, 1.0..1e8f64).prop_map(|(n, beta, gamma)| LeakageEvent::ExpChain { n, beta, gamma }),
        Just(LeakageEvent::Deterministic),
    ]
}

fn grid_prior() -> impl Strategy<Value = BoundedPrior> {
    prop::collection::vec((-1.0..=1.0f64, 0.01..1.0f64), 1..6).prop_map(|pts| {
        let total: f64 = pts.iter().map(|p| p.1).sum();
        let mut probs: Vec<f64> = pts.iter().map(|p| p.1 / total).collect();
        let head: f64 = probs[1..].iter().sum();
        probs[0] = 1.0 - head;
        BoundedPrior::grid(1.0, pts.iter().map(|p| p.0).collect(), probs).unwrap()
    })
}

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Tensor> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(m, n)| {
        prop::collection::vec(-1.0..=1.0f64, m * n).prop_map(move |d| Tensor::new(vec![m, n], d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ledger_total_is_sum_of_entries(events in prop::collection::vec((event(), 0u64..1000, 0usize..4), 0..20)) {
        let mut ledger = LeakageLedger::new();
        let mut expected = 0.0;
        for (e, count, tag) in &events {
            ledger.charge(&format!("op {tag}"), *e, *count).unwrap();
            expected += e.bits().unwrap() * *count as f64;
        }
        let sum: f64 = ledger.entries().map(|e| e.bits).sum();
        prop_assert_eq!(ledger.total_bits(), sum);
        prop_assert!((ledger.total_bits() - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn masking_bound_dominates_mutual_information(prior in grid_prior(), log_gamma in 0.5..6.0f64) {
        let gamma = 10f64.powf(log_gamma);
        let mi = mutual_information(&prior, gamma).unwrap();
        prop_assert!(mi >= -1e-12);
        prop_assert!(mi <= bound_masking(1.0, gamma).unwrap() + 1e-10);
    }

    #[test]
    fn two_party_sharing_roundtrip(x in matrix(6, 6), seed in any::<u64>()) {
        let noise = NoiseSpec::default();
        let (a, b) = share_two(&x, &noise, 1, &mut RandomSource::new(seed, 0)).unwrap();
        let err = reconstruct(&[a, b]).unwrap().sub(&x).unwrap().max_abs();
        prop_assert!(err <= 2.0 * noise.gamma() * f64::EPSILON);
    }

    #[test]
    fn n_party_sharing_roundtrip(x in matrix(4, 4), n in 2usize..7, seed in any::<u64>()) {
        let noise = NoiseSpec::default();
        let shares = share_n(&x, n, &noise, 3, &mut RandomSource::new(seed, 0)).unwrap();
        prop_assert_eq!(shares.len(), n);
        let err = reconstruct(&shares).unwrap().sub(&x).unwrap().max_abs();
        prop_assert!(err <= 2.0 * n as f64 * noise.gamma() * f64::EPSILON);
    }

    #[test]
    fn libsvm_roundtrip(rows in prop::collection::vec(
        (-1e6..1e6f64, prop::collection::btree_map(0usize..50, -1e6..1e6f64, 0..8)), 0..20)
    ) {
        let records: Vec<RawRecord> = rows
            .into_iter()
            .map(|(label, f)| RawRecord { label, features: f.into_iter().collect() })
            .collect();
        let back = parse_libsvm(&write_libsvm(&records)).unwrap();
        prop_assert_eq!(back, records);
    }

    #[test]
    fn group_columns_are_one_hot(rows in prop::collection::vec((0u8..5, 1990u32..2010, 0u32..100), 1..30)) {
        let mut text = String::from("corps,year,count\n");
        for (g, y, c) in &rows {
            text.push_str(&format!("{g},{y},{c}\n"));
        }
        let groups = rows.iter().map(|r| r.0).collect::<std::collections::BTreeSet<_>>().len();
        let data = parse_csv_counts(&text, CovariateSet::GroupsQuadratic).unwrap();
        let (m, n) = data.design().shape2().unwrap();
        prop_assert_eq!((m, n), (rows.len(), groups + 3));
        let y0 = rows.iter().map(|r| r.1).min().unwrap() as f64;
        for (i, (_, y, c)) in rows.iter().enumerate() {
            let row = &data.design().data()[i * n..(i + 1) * n];
            prop_assert_eq!(row[..groups].iter().filter(|&&v| v == 1.0).count(), 1);
            prop_assert!(row[..groups].iter().all(|&v| v == 0.0 || v == 1.0));
            prop_assert_eq!(row[groups + 1], *y as f64 - y0);
            prop_assert_eq!(data.targets().data()[i], *c as f64);
        }
    }

    #[test]
    fn normalized_columns_are_centered_and_bounded(a in matrix(12, 5)) {
        let (m, n) = a.shape2().unwrap();
        let mask: Vec<bool> = (0..n).map(|j| j % 2 == 0).collect();
        let out = normalize_covariates(&a, &mask).unwrap();
        for j in 0..n {
            let col: Vec<f64> = (0..m).map(|i| out.get(i, j)).collect();
            if mask[j] {
                let mean = col.iter().sum::<f64>() / m as f64;
                prop_assert!(mean.abs() <= 1e-12);
                prop_assert!(col.iter().all(|v| v.abs() <= 1.0 + 1e-15));
            } else {
                prop_assert!(col.iter().enumerate().all(|(i, v)| *v == a.get(i, j)));
            }
        }
    }
}
