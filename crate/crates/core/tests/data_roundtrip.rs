use std::io::Cursor;

use chrono::NaiveDate;
use mcudi_core::data::{
    apply_scaler, fit_scaler, generate_synthetic_stream, load_csv, load_csv_reader, Churn,
    DatasetSchema, DriftInjection, LabelRule, PeriodGranularity, SynthConfig,
};
use proptest::prelude::*;

fn config() -> SynthConfig {
    SynthConfig {
        n_features: 4,
        periods: 5,
        rows_per_period: 40,
        label_rule: LabelRule {
            features: vec![0],
            weights: None,
            threshold: 0.0,
            flip_probability: 0.1,
        },
        drifts: vec![DriftInjection {
            period: 2,
            features: vec![1],
            magnitude: 1.5,
        }],
        churn: Some(Churn {
            features: vec![3],
            magnitude: 0.25,
        }),
    }
}

#[test]
fn synthetic_stream_survives_a_csv_round_trip() {
    let stream = generate_synthetic_stream(&config(), 10).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stream.csv");
    stream
        .write_csv(
            std::fs::File::create(&path).unwrap(),
            NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
        )
        .unwrap();
    let loaded = load_csv(&path, &stream.schema()).unwrap();
    assert_eq!(loaded.report.rows_dropped, 0);
    assert_eq!(loaded.batches.len(), 5);
    for (a, b) in loaded.batches.iter().zip(&stream.batches) {
        assert_eq!(a.period_id(), b.period_id());
        assert_eq!(a.features(), b.features());
        assert_eq!(a.labels(), b.labels());
    }
}

#[test]
fn standardizing_with_a_fitted_scaler_centers_the_first_period() {
    let stream = generate_synthetic_stream(&config(), 3).unwrap();
    let s = fit_scaler(&stream.batches[0]).unwrap();
    let scaled = apply_scaler(&s, &stream.batches[0]).unwrap();
    let refit = fit_scaler(&scaled).unwrap();
    for j in 0..4 {
        assert!(refit.location()[j].abs() < 1e-9);
        assert!((refit.scale()[j] - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn periods_come_out_sorted_whatever_the_row_order(
        days in prop::collection::vec(0u32..60, 1..80),
        gran in prop_oneof![Just(PeriodGranularity::Day), Just(PeriodGranularity::Week), Just(PeriodGranularity::Month)],
    ) {
        let mut csv = String::from("when,x,y\n");
        for (i, d) in days.iter().enumerate() {
            let date = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap() + chrono::Days::new(*d as u64);
            csv.push_str(&format!("{date},{i},{}\n", i % 2));
        }
        let schema = DatasetSchema {
            feature_columns: vec!["x".into()],
            label_column: Some("y".into()),
            period_column: Some("when".into()),
            period_granularity: gran,
        };
        let loaded = load_csv_reader(Cursor::new(csv), &schema).unwrap();
        let ids: Vec<usize> = loaded.batches.iter().map(|b| b.period_id()).collect();
        prop_assert_eq!(ids, (0..loaded.batches.len()).collect::<Vec<_>>());
        let keys: Vec<&str> = loaded.batches.iter().map(|b| b.period_key()).collect();
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(loaded.batches.iter().map(|b| b.len()).sum::<usize>(), days.len());
    }
}
