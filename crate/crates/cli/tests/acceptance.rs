//! Release acceptance gate: one test per shipping criterion, each printing a
//! single PASS or FAIL line with its measured values (visible with
//! `--nocapture`, or on failure). The tests cover accuracy bands, importance
//! rankings, split-search equivalence, agreement with an independent
//! reference implementation, sampler statistics, reproducibility, scaling,
//! memory-mode ordering, survival statistics, and model-file round-trips.
//! Tests share a lock so wall-clock and peak-memory measurements are not
//! contaminated by concurrent work in the same process.

use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use grove_core::data::{Dataset, FeatureColumn, MemoryMode, Response};
use grove_core::eval::{c_index, gini_importance, oob_error, permutation_importance};
use grove_core::forest::{grow_forest, GrowConfig, ImportanceMode, TreeType};
use grove_core::io::{build_dataset, parse_dataset_file, serialize_forest, ResponseSpec};
use grove_core::sampling::{bootstrap, sample_without_replacement, RngStream};
use grove_core::split::logrank_statistic;
use grove_core::split::oracle::check_equivalence_case;
use grove_sim::bench::{measure_point_inline, plan_point, BenchAxis, BenchBase};
use grove_sim::snp::{simulate_snp_dataset, SimSpec};
use grove_sim::validate::{run_validation_protocol, ValidationConfig};

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn iris_path() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/iris.csv")
}

fn iris_dataset() -> Dataset {
    let table = parse_dataset_file(Path::new(iris_path())).expect("iris parses");
    build_dataset(&table, &ResponseSpec::Classification { target: "Species" })
        .expect("iris builds")
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn grove(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_grove"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("grove binary runs")
}

fn grow_iris_forests() -> (Dataset, Vec<grove_core::forest::ForestModel>) {
    let dataset = iris_dataset();
    let forests = (0..20u64)
        .map(|seed| {
            let config = GrowConfig {
                num_trees: 500,
                mtry: Some(2),
                min_node_size: Some(1),
                seed,
                ..GrowConfig::default()
            };
            grow_forest(&dataset, &config).expect("iris forest grows")
        })
        .collect();
    (dataset, forests)
}

#[test]
fn criterion_01_iris_error_band_and_speed() {
    let _lock = gate();
    let start = Instant::now();
    let (dataset, forests) = grow_iris_forests();
    let errors: Vec<f64> = forests
        .iter()
        .map(|forest| oob_error(forest, &dataset).expect("error computes").error)
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let median_error = median(&errors);
    let pass = (0.02..=0.08).contains(&median_error) && elapsed < 5.0;
    println!(
        "criterion 01 {}: iris median OOB error {median_error:.4} over 20 seeds \
         (band [0.02, 0.08]) in {elapsed:.2}s (limit 5s)",
        verdict(pass)
    );
    assert!(
        pass,
        "median OOB error {median_error:.4} or runtime {elapsed:.2}s out of bounds"
    );
}

#[test]
fn criterion_02_iris_importance_levels_and_ranking() {
    let _lock = gate();
    let start = Instant::now();
    let (dataset, forests) = grow_iris_forests();
    let mut per_feature: Vec<Vec<f64>> = vec![Vec::new(); 4];
    for forest in &forests {
        let report = permutation_importance(forest, &dataset, ImportanceMode::PermutationRaw)
            .expect("importance computes");
        for (feature, &value) in report.values.iter().enumerate() {
            per_feature[feature].push(value);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let sepal_length = median(&per_feature[0]);
    let sepal_width = median(&per_feature[1]);
    let petal_length = median(&per_feature[2]);
    let petal_width = median(&per_feature[3]);
    let pass = petal_length > 0.25
        && petal_width > 0.15
        && sepal_width < 0.05
        && petal_length > petal_width
        && petal_width > sepal_length
        && sepal_length > sepal_width
        && elapsed < 30.0;
    println!(
        "criterion 02 {}: iris median permutation importance \
         petal length {petal_length:.4} > petal width {petal_width:.4} > \
         sepal length {sepal_length:.4} > sepal width {sepal_width:.4} \
         in {elapsed:.2}s (limit 30s)",
        verdict(pass)
    );
    assert!(
        pass,
        "importance medians ({petal_length:.4}, {petal_width:.4}, {sepal_length:.4}, \
         {sepal_width:.4}) or runtime {elapsed:.2}s out of bounds"
    );
}

#[test]
fn criterion_03_split_searches_agree_on_fuzzed_nodes() {
    let _lock = gate();
    let cases = 10_000u64;
    let mut first_failure = None;
    for case_index in 0..cases {
        if let Err(message) = check_equivalence_case(case_index, 1e-10) {
            first_failure = Some(message);
            break;
        }
    }
    let pass = first_failure.is_none();
    println!(
        "criterion 03 {}: {cases} fuzzed nodes cross-checked across all split \
         searches and a brute-force reference at relative tolerance 1e-10",
        verdict(pass)
    );
    assert!(pass, "{}", first_failure.unwrap_or_default());
}

#[test]
fn criterion_04_agreement_with_reference_implementation() {
    let _lock = gate();
    let start = Instant::now();
    let config = ValidationConfig {
        datasets: 20,
        spec: SimSpec {
            n: 500,
            p: 50,
            n_effect: 5,
            seed: 200,
            ..SimSpec::default()
        },
        num_trees: 12_000,
        worker_count: None,
    };
    let report = run_validation_protocol(&config).expect("validation protocol runs");
    let elapsed = start.elapsed().as_secs_f64();
    let width = report.upper_limit - report.lower_limit;
    let pass = report.mean_difference.abs() <= 0.01
        && width < 0.04
        && report.all_within_limits()
        && elapsed < 600.0;
    println!(
        "criterion 04 {}: engine vs reference OOB error over 20 datasets, \
         mean difference {:+.4} (limit ±0.01), agreement limits [{:+.4}, {:+.4}] \
         width {width:.4} (limit 0.04), all pairs inside: {}, {elapsed:.0}s (limit 600s)",
        verdict(pass),
        report.mean_difference,
        report.lower_limit,
        report.upper_limit,
        report.all_within_limits()
    );
    assert!(
        pass,
        "mean {:+.4}, width {width:.4}, within limits {}, runtime {elapsed:.0}s",
        report.mean_difference,
        report.all_within_limits()
    );
}

#[test]
fn criterion_05_effect_features_outrank_noise_features() {
    let _lock = gate();
    let (n, p, n_effect, reps) = (500usize, 20usize, 5usize, 50u64);
    let mut impurity_columns: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut permutation_columns: Vec<Vec<f64>> = vec![Vec::new(); p];
    for rep in 0..reps {
        let spec = SimSpec {
            n,
            p,
            n_effect,
            effect_size: 1.25,
            seed: 9000 + rep,
            ..SimSpec::default()
        };
        let dataset = simulate_snp_dataset(&spec)
            .expect("simulation runs")
            .to_dataset(false)
            .expect("dataset builds");
        let config = GrowConfig {
            num_trees: 192,
            min_node_size: Some(1),
            importance_mode: ImportanceMode::Gini,
            seed: 100 + rep,
            ..GrowConfig::default()
        };
        let forest = grow_forest(&dataset, &config).expect("forest grows");
        let impurity = gini_importance(&forest).expect("impurity importance present");
        let permutation =
            permutation_importance(&forest, &dataset, ImportanceMode::PermutationRaw)
                .expect("permutation importance computes");
        for feature in 0..p {
            impurity_columns[feature].push(impurity.values[feature]);
            permutation_columns[feature].push(permutation.values[feature]);
        }
    }
    let extremes = |columns: &[Vec<f64>]| {
        let medians: Vec<f64> = columns.iter().map(|column| median(column)).collect();
        let weakest_effect = medians[..n_effect]
            .iter()
            .cloned()
            .fold(f64::MAX, f64::min);
        let strongest_noise = medians[n_effect..]
            .iter()
            .cloned()
            .fold(f64::MIN, f64::max);
        (weakest_effect, strongest_noise)
    };
    let (impurity_effect, impurity_noise) = extremes(&impurity_columns);
    let (permutation_effect, permutation_noise) = extremes(&permutation_columns);
    let pass = impurity_effect > impurity_noise && permutation_effect > permutation_noise;
    println!(
        "criterion 05 {}: weakest effect vs strongest noise feature medians over \
         {reps} datasets, impurity {impurity_effect:.4} > {impurity_noise:.4}, \
         permutation {permutation_effect:.4} > {permutation_noise:.4}",
        verdict(pass)
    );
    assert!(
        pass,
        "impurity {impurity_effect:.4} vs {impurity_noise:.4}, \
         permutation {permutation_effect:.4} vs {permutation_noise:.4}"
    );
}

#[test]
fn criterion_06_sampler_uniformity_and_bootstrap_coverage() {
    let _lock = gate();
    // Chi-squared critical value for 9 degrees of freedom at significance 0.001.
    const CHI2_CRITICAL: f64 = 27.877164871256575;
    let draws = 100_000u32;
    let mut rng = RngStream::new(61);
    let mut counts = [0u64; 10];
    for _ in 0..draws {
        let pair = sample_without_replacement(5, 2, &mut rng).expect("sampling succeeds");
        let (a, b) = (pair[0], pair[1]);
        let cell = a * 5 - a * (a + 1) / 2 + (b - a - 1);
        counts[cell] += 1;
    }
    let expected = f64::from(draws) / 10.0;
    let chi_squared: f64 = counts
        .iter()
        .map(|&observed| {
            let delta = observed as f64 - expected;
            delta * delta / expected
        })
        .sum();

    let bag = bootstrap(10_000, &mut RngStream::new(62));
    let oob_fraction = bag.oob_indices.len() as f64 / 10_000.0;

    let pass = chi_squared < CHI2_CRITICAL && (0.35..=0.39).contains(&oob_fraction);
    println!(
        "criterion 06 {}: pair-draw chi-squared {chi_squared:.2} over {draws} draws \
         (limit {CHI2_CRITICAL:.2}), bootstrap OOB fraction {oob_fraction:.4} \
         (band [0.35, 0.39])",
        verdict(pass)
    );
    assert!(
        pass,
        "chi-squared {chi_squared:.2} or OOB fraction {oob_fraction:.4} out of bounds"
    );
}

#[test]
fn criterion_07_reproducible_across_workers_and_layouts() {
    let _lock = gate();
    let dir = tempfile::tempdir().expect("tempdir");
    for (threads, prefix) in [("1", "single"), ("8", "eight")] {
        let output = grove(
            dir.path(),
            &[
                "--file",
                iris_path(),
                "--depvarname",
                "Species",
                "--ntree",
                "150",
                "--seed",
                "99",
                "--nthreads",
                threads,
                "--write",
                "--outprefix",
                prefix,
            ],
        );
        assert!(
            output.status.success(),
            "training failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    let single = std::fs::read(dir.path().join("single.forest")).expect("file written");
    let eight = std::fs::read(dir.path().join("eight.forest")).expect("file written");
    let workers_identical = single == eight;

    let spec = SimSpec {
        n: 300,
        p: 12,
        n_effect: 3,
        seed: 5,
        ..SimSpec::default()
    };
    let data = simulate_snp_dataset(&spec).expect("simulation runs");
    let grow = |dataset: &Dataset, memory_mode: MemoryMode| {
        let config = GrowConfig {
            num_trees: 40,
            memory_mode,
            seed: 1234,
            ..GrowConfig::default()
        };
        grow_forest(dataset, &config).expect("forest grows")
    };
    let dense_forest = grow(
        &data.to_dataset(false).expect("dense dataset"),
        MemoryMode::RuntimeOptimized,
    );
    let packed_forest = grow(
        &data.to_dataset(true).expect("packed dataset"),
        MemoryMode::Gwas,
    );
    let mut aligned = packed_forest.clone();
    aligned.memory_mode = dense_forest.memory_mode;
    let layouts_identical = serialize_forest(&aligned) == serialize_forest(&dense_forest);

    let pass = workers_identical && layouts_identical;
    println!(
        "criterion 07 {}: model files bit-identical across 1 vs 8 workers: {}, \
         forests bit-identical across dense vs packed layouts: {}",
        verdict(pass),
        workers_identical,
        layouts_identical
    );
    assert!(
        pass,
        "workers identical: {workers_identical}, layouts identical: {layouts_identical}"
    );
}

#[test]
fn criterion_08_runtime_scales_linearly_in_tree_count() {
    let _lock = gate();
    let base = BenchBase::default();
    let mut ratios = Vec::new();
    for rep in 0..5u64 {
        let half = measure_point_inline(&plan_point(&base, BenchAxis::NumTrees, 250, rep))
            .expect("run measures")
            .0
            .seconds;
        let full = measure_point_inline(&plan_point(&base, BenchAxis::NumTrees, 500, rep))
            .expect("run measures")
            .0
            .seconds;
        ratios.push(full / half);
    }
    let median_ratio = median(&ratios);
    let pass = (1.6..=2.4).contains(&median_ratio);
    println!(
        "criterion 08 {}: doubling trees at 1000 samples x 1000 features scales \
         wall time by {median_ratio:.3} (median of 5 paired runs, band [1.6, 2.4])",
        verdict(pass)
    );
    assert!(pass, "median scaling factor {median_ratio:.3} out of band");
}

#[test]
fn criterion_09_memory_modes_order_peak_usage() {
    let _lock = gate();
    let peak = |mode: &str| -> u64 {
        let output = Command::new(env!("CARGO_BIN_EXE_grove"))
            .args([
                "bench-point",
                "--samples",
                "2000",
                "--features",
                "5000",
                "--ntree",
                "25",
                "--mtry",
                "70",
                "--minnode",
                "1",
                "--treetype",
                "1",
                "--memorymode",
                mode,
                "--seed",
                "7",
            ])
            .output()
            .expect("grove binary runs");
        assert!(
            output.status.success(),
            "measurement failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let stdout = String::from_utf8(output.stdout).expect("utf8 output");
        stdout
            .trim()
            .split('\t')
            .nth(1)
            .expect("seconds and bytes")
            .parse()
            .expect("byte count parses")
    };
    let runtime_optimized = peak("0");
    let memory_efficient = peak("1");
    let packed = peak("2");
    let pass = packed < memory_efficient && memory_efficient <= runtime_optimized;
    println!(
        "criterion 09 {}: peak memory on 2000 samples x 5000 genotype features, \
         packed {:.1} MB < memory-efficient {:.1} MB <= runtime-optimized {:.1} MB",
        verdict(pass),
        packed as f64 / 1e6,
        memory_efficient as f64 / 1e6,
        runtime_optimized as f64 / 1e6
    );
    assert!(
        pass,
        "peaks {packed} / {memory_efficient} / {runtime_optimized} bytes not ordered"
    );
}

struct Lcg(u64);

impl Lcg {
    fn below(&mut self, n: usize) -> usize {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 33) as usize % n
    }
}

fn reference_logrank(left: (&[f64], &[u8]), right: (&[f64], &[u8])) -> Option<f64> {
    let mut event_times: Vec<f64> = left
        .0
        .iter()
        .zip(left.1)
        .chain(right.0.iter().zip(right.1))
        .filter(|&(_, &status)| status == 1)
        .map(|(&time, _)| time)
        .collect();
    event_times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    event_times.dedup();

    let count = |group: (&[f64], &[u8]), pred: &dyn Fn(f64, u8) -> bool| -> f64 {
        group
            .0
            .iter()
            .zip(group.1)
            .filter(|&(&time, &status)| pred(time, status))
            .count() as f64
    };
    let mut numerator = 0.0;
    let mut variance = 0.0;
    for &t in &event_times {
        let at_risk_left = count(left, &|time, _| time >= t);
        let at_risk = at_risk_left + count(right, &|time, _| time >= t);
        let deaths_left = count(left, &|time, status| time == t && status == 1);
        let deaths = deaths_left + count(right, &|time, status| time == t && status == 1);
        numerator += deaths_left - at_risk_left * deaths / at_risk;
        if at_risk > 1.0 {
            variance += (at_risk_left / at_risk)
                * (1.0 - at_risk_left / at_risk)
                * ((at_risk - deaths) / (at_risk - 1.0))
                * deaths;
        }
    }
    if variance > 0.0 {
        Some(numerator.abs() / variance.sqrt())
    } else {
        None
    }
}

#[test]
fn criterion_10_survival_statistics_check_out() {
    let _lock = gate();
    let mut lcg = Lcg(0x5EED_CAFE);
    let mut defined = 0u32;
    let mut worst_gap: f64 = 0.0;
    fn draw_group(lcg: &mut Lcg, size: usize) -> (Vec<f64>, Vec<u8>) {
        let times = (0..size).map(|_| 0.5 * (1 + lcg.below(10)) as f64).collect();
        let statuses = (0..size).map(|_| lcg.below(2) as u8).collect();
        (times, statuses)
    }
    for sample in 0..1000 {
        let left_size = 2 + lcg.below(15);
        let (left_times, left_statuses) = draw_group(&mut lcg, left_size);
        let right_size = 2 + lcg.below(15);
        let (right_times, right_statuses) = draw_group(&mut lcg, right_size);
        let engine = logrank_statistic(
            (&left_times, &left_statuses),
            (&right_times, &right_statuses),
        );
        let reference = reference_logrank(
            (&left_times, &left_statuses),
            (&right_times, &right_statuses),
        );
        match (engine, reference) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                defined += 1;
                worst_gap = worst_gap.max((a - b).abs());
                assert!(
                    (a - b).abs() <= 1e-9,
                    "sample {sample}: log-rank {a} vs reference {b}"
                );
            }
            (engine, reference) => panic!(
                "sample {sample}: log-rank defined {} vs reference defined {}",
                engine.is_some(),
                reference.is_some()
            ),
        }
    }
    assert!(defined > 500, "only {defined} of 1000 samples had a defined statistic");

    let times: Vec<f64> = (1..=40).map(f64::from).collect();
    let statuses = vec![1u8; 40];
    let descending_risks: Vec<f64> = (0..40).map(|k| f64::from(40 - k)).collect();
    let ascending_risks: Vec<f64> = (0..40).map(f64::from).collect();
    let perfect = c_index(&times, &statuses, &descending_risks).expect("concordance computes");
    let reversed = c_index(&times, &statuses, &ascending_risks).expect("concordance computes");
    let mixed_times: Vec<f64> = (0..40).map(|_| (1 + lcg.below(10)) as f64).collect();
    let mixed_statuses: Vec<u8> = (0..40).map(|_| u8::from(lcg.below(4) != 0)).collect();
    let mixed_risks: Vec<f64> = (0..40).map(|_| 0.5 * lcg.below(6) as f64).collect();
    let negated_risks: Vec<f64> = mixed_risks.iter().map(|r| -r).collect();
    let mixed = c_index(&mixed_times, &mixed_statuses, &mixed_risks).expect("computes");
    let negated = c_index(&mixed_times, &mixed_statuses, &negated_risks).expect("computes");
    let identities_hold =
        perfect == 1.0 && reversed == 0.0 && (mixed + negated - 1.0).abs() < 1e-12;

    let toy = proportional_hazards_toy(200);
    let config = GrowConfig {
        tree_type: TreeType::Survival,
        num_trees: 100,
        mtry: Some(2),
        seed: 11,
        ..GrowConfig::default()
    };
    let forest = grow_forest(&toy, &config).expect("survival forest grows");
    let survival_error = oob_error(&forest, &toy).expect("error computes").error;

    let pass = identities_hold && survival_error < 0.45;
    println!(
        "criterion 10 {}: log-rank matches an independent tabulation on {defined} \
         defined samples (worst gap {worst_gap:.2e}), concordance identities \
         perfect {perfect:.1} / reversed {reversed:.1} / complement sum \
         {:.12}, survival OOB error {survival_error:.4} (limit 0.45)",
        verdict(pass),
        mixed + negated
    );
    assert!(
        pass,
        "identities hold: {identities_hold}, survival OOB error {survival_error:.4}"
    );
}

fn proportional_hazards_toy(n: usize) -> Dataset {
    let mut rng = RngStream::new(404);
    let mut genotype = Vec::with_capacity(n);
    let mut uniform = Vec::with_capacity(n);
    let mut shuffled = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut statuses = Vec::with_capacity(n);
    for _ in 0..n {
        let g = rng.below(3) as f64;
        let hazard = 0.1 * (0.8 * g).exp();
        let u = 1.0 - rng.next_f64();
        let t = -u.ln() / hazard;
        genotype.push(g);
        uniform.push(rng.next_f64() * 2.0);
        shuffled.push(rng.below(3) as f64);
        if t > 15.0 {
            times.push(15.0);
            statuses.push(0);
        } else {
            times.push((t * 4.0).ceil() / 4.0);
            statuses.push(1);
        }
    }
    Dataset::new(
        vec![
            FeatureColumn::dense("risk_allele", genotype),
            FeatureColumn::dense("noise_a", uniform),
            FeatureColumn::dense("noise_b", shuffled),
        ],
        Response::Survival { times, statuses },
    )
    .expect("toy dataset builds")
}

#[test]
fn criterion_11_model_files_round_trip_and_reject_corruption() {
    let _lock = gate();
    let dir = tempfile::tempdir().expect("tempdir");
    let train = grove(
        dir.path(),
        &[
            "--file",
            iris_path(),
            "--depvarname",
            "Species",
            "--ntree",
            "80",
            "--seed",
            "3",
            "--write",
            "--outprefix",
            "model",
        ],
    );
    assert!(
        train.status.success(),
        "training failed: {}",
        String::from_utf8_lossy(&train.stderr)
    );
    let predict = grove(
        dir.path(),
        &[
            "--file",
            iris_path(),
            "--predict",
            "model.forest",
            "--outprefix",
            "scored",
        ],
    );
    assert!(
        predict.status.success(),
        "prediction failed: {}",
        String::from_utf8_lossy(&predict.stderr)
    );
    let predictions =
        std::fs::read_to_string(dir.path().join("scored.prediction")).expect("file written");
    let rows = predictions.lines().count();

    let forest_path = dir.path().join("model.forest");
    let mut bytes = std::fs::read(&forest_path).expect("model file readable");
    let middle = bytes.len() / 2;
    bytes[middle] ^= 0xFF;
    std::fs::write(&forest_path, &bytes).expect("model file writable");
    let corrupted = grove(
        dir.path(),
        &[
            "--file",
            iris_path(),
            "--predict",
            "model.forest",
            "--outprefix",
            "after",
        ],
    );
    let exit = corrupted.status.code();

    let pass = rows == 150 && exit == Some(3);
    println!(
        "criterion 11 {}: trained model predicts {rows} rows for 150 inputs, \
         corrupted model file rejected with exit code {exit:?} (expected 3)",
        verdict(pass)
    );
    assert!(pass, "prediction rows {rows}, corrupted-file exit code {exit:?}");
}
