//! End-to-end exercises of the public API: parse, grow, evaluate,
//! serialize, reload, predict.

use grove_core::data::MemoryMode;
use grove_core::eval::{gini_importance, oob_error, OobPredictions};
use grove_core::forest::{
    grow_forest, predict_forest, ForestPrediction, GrowConfig, ImportanceMode, PredictorView,
    TreeType,
};
use grove_core::io::{
    build_dataset, parse_dataset_str, read_forest_file, serialize_forest, write_forest_file,
    ResponseSpec,
};
use grove_core::sampling::RngStream;

fn blob_csv(n_per_class: usize) -> String {
    let mut rng = RngStream::new(2024);
    let mut csv = String::from("f1,f2,kind\n");
    for i in 0..n_per_class * 2 {
        let kind = if i % 2 == 0 { "red" } else { "blue" };
        let center = if i % 2 == 0 { 0.0 } else { 4.0 };
        let f1 = center + rng.next_f64();
        let f2 = center - rng.next_f64();
        csv.push_str(&format!("{f1:.6},{f2:.6},{kind}\n"));
    }
    csv
}

#[test]
fn classification_pipeline_round_trips() {
    let table = parse_dataset_str(&blob_csv(40)).unwrap();
    let ds = build_dataset(&table, &ResponseSpec::Classification { target: "kind" }).unwrap();

    let cfg = GrowConfig {
        num_trees: 50,
        seed: 42,
        importance_mode: ImportanceMode::Gini,
        ..GrowConfig::default()
    };
    let forest = grow_forest(&ds, &cfg).unwrap();

    let summary = oob_error(&forest, &ds).unwrap();
    assert!(summary.error < 0.15, "oob error {}", summary.error);
    match summary.predictions {
        OobPredictions::Classes(p) => assert_eq!(p.len(), 80),
        _ => unreachable!(),
    }

    let importance = gini_importance(&forest).unwrap();
    assert_eq!(importance.values.len(), 2);
    assert!(importance.values.iter().all(|v| v.is_finite() && *v >= 0.0));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pipeline.forest");
    write_forest_file(&path, &forest).unwrap();
    let loaded = read_forest_file(&path).unwrap();

    let view = PredictorView::from_dataset(&forest, &ds).unwrap();
    let original = predict_forest(&forest, &view).unwrap();
    let view = PredictorView::from_dataset(&loaded, &ds).unwrap();
    let reloaded = predict_forest(&loaded, &view).unwrap();
    assert_eq!(original, reloaded);
}

#[test]
fn worker_count_yields_byte_identical_serialization() {
    let table = parse_dataset_str(&blob_csv(30)).unwrap();
    let ds = build_dataset(&table, &ResponseSpec::Classification { target: "kind" }).unwrap();
    let mut cfg = GrowConfig {
        num_trees: 16,
        seed: 7,
        ..GrowConfig::default()
    };
    cfg.worker_count = Some(1);
    let serial = grow_forest(&ds, &cfg).unwrap();
    cfg.worker_count = Some(8);
    let parallel = grow_forest(&ds, &cfg).unwrap();
    assert_eq!(serialize_forest(&serial), serialize_forest(&parallel));
}

#[test]
fn dense_and_packed_inputs_grow_bit_identical_forests() {
    let mut rng = RngStream::new(99);
    let n = 120;
    let snps: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..n).map(|_| rng.below(3) as f64).collect())
        .collect();
    let mut csv = String::from("s1,s2,s3,s4,y\n");
    for row in 0..n {
        let burden: f64 = snps.iter().map(|c| c[row]).sum();
        let label = if burden + rng.next_f64() > 4.0 { "case" } else { "ctrl" };
        csv.push_str(&format!(
            "{},{},{},{},{label}\n",
            snps[0][row], snps[1][row], snps[2][row], snps[3][row]
        ));
    }
    let table = parse_dataset_str(&csv).unwrap();
    let dense = build_dataset(&table, &ResponseSpec::Classification { target: "y" }).unwrap();
    let packed = dense.clone().pack_genotype_columns();

    let mut cfg = GrowConfig {
        num_trees: 24,
        seed: 1234,
        ..GrowConfig::default()
    };
    cfg.memory_mode = MemoryMode::RuntimeOptimized;
    let from_dense = grow_forest(&dense, &cfg).unwrap();
    cfg.memory_mode = MemoryMode::Gwas;
    let from_packed = grow_forest(&packed, &cfg).unwrap();

    let mut aligned = from_packed.clone();
    aligned.memory_mode = from_dense.memory_mode;
    assert_eq!(serialize_forest(&from_dense), serialize_forest(&aligned));
}

#[test]
fn survival_pipeline_produces_usable_risks() {
    let mut rng = RngStream::new(51);
    let mut csv = String::from("age,dose,time,status\n");
    for _ in 0..80 {
        let age = 40.0 + rng.next_f64() * 30.0;
        let dose = rng.next_f64();
        let hazard = 0.1 + dose;
        let time = (1.0 - rng.next_f64()).ln() / -hazard;
        let status = u8::from(rng.next_f64() < 0.8);
        csv.push_str(&format!("{age:.3},{dose:.3},{time:.3},{status}\n"));
    }
    let table = parse_dataset_str(&csv).unwrap();
    let ds = build_dataset(
        &table,
        &ResponseSpec::Survival {
            time: "time",
            status: "status",
        },
    )
    .unwrap();
    let cfg = GrowConfig {
        tree_type: TreeType::Survival,
        num_trees: 40,
        seed: 3,
        ..GrowConfig::default()
    };
    let forest = grow_forest(&ds, &cfg).unwrap();
    let summary = oob_error(&forest, &ds).unwrap();
    assert!(
        summary.error < 0.5,
        "survival OOB 1-C should beat chance, got {}",
        summary.error
    );
    let view = PredictorView::from_dataset(&forest, &ds).unwrap();
    match predict_forest(&forest, &view).unwrap() {
        ForestPrediction::Curves(rows) => {
            assert_eq!(rows.len(), 80);
            assert!(rows.iter().all(|c| c.len() == forest.timepoints.len()));
        }
        _ => unreachable!(),
    }
}
