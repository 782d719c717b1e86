//! Training mode: parse the data file, grow the forest, print the summary
//! block, and write the requested artifact files.

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use grove_core::data::{Dataset, MemoryMode, Response};
use grove_core::eval::{
    confusion_matrix, gini_importance, oob_error, permutation_importance, ImportanceReport,
    OobPredictions, OobSummary,
};
use grove_core::forest::{grow_forest, ForestModel, GrowConfig, ImportanceMode, TreeType};
use grove_core::io::{build_dataset, parse_dataset_file, write_forest_file, ResponseSpec};
use grove_core::{GroveError, Result};

use crate::MainArgs;

fn importance_mode_from_code(code: u8) -> Result<ImportanceMode> {
    match code {
        0 => Ok(ImportanceMode::None),
        1 => Ok(ImportanceMode::Gini),
        2 => Ok(ImportanceMode::PermutationRaw),
        3 => Ok(ImportanceMode::PermutationScaled),
        _ => Err(GroveError::Config(format!(
            "unknown importance measure {code}; expected 0, 1, 2 or 3"
        ))),
    }
}

fn importance_mode_label(mode: ImportanceMode) -> &'static str {
    match mode {
        ImportanceMode::None => "none",
        ImportanceMode::Gini => "impurity",
        ImportanceMode::PermutationRaw => "permutation",
        ImportanceMode::PermutationScaled => "scaled permutation",
    }
}

fn clock_seed() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0x5EED, |d| d.as_nanos() as u64)
}

fn summary_line(label: &str, value: impl std::fmt::Display) {
    println!("{label:<34}{value}");
}

fn print_summary(
    forest: &ForestModel,
    dataset: &Dataset,
    importance_mode: ImportanceMode,
    summary: &OobSummary,
) {
    summary_line("Type:", forest.tree_type.label());
    summary_line("Number of trees:", forest.num_trees());
    summary_line("Sample size:", dataset.n_samples());
    summary_line("Number of independent variables:", dataset.n_features());
    summary_line("Mtry:", forest.mtry);
    summary_line("Target node size:", forest.min_node_size);
    summary_line(
        "Variable importance mode:",
        importance_mode_label(importance_mode),
    );
    let error = if forest.tree_type == TreeType::Classification {
        format!("{:.2} %", summary.error * 100.0)
    } else {
        format!("{:.6}", summary.error)
    };
    summary_line("OOB prediction error:", error);
}

fn write_confusion(path: &PathBuf, forest: &ForestModel, dataset: &Dataset, oob: &OobPredictions) -> Result<()> {
    let OobPredictions::Classes(predicted) = oob else {
        return Ok(());
    };
    let Response::Classification { labels, classes } = dataset.response() else {
        return Ok(());
    };
    let mut truth_seen = Vec::new();
    let mut pred_seen = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        if let Some(class) = p {
            truth_seen.push(labels[i]);
            pred_seen.push(*class);
        }
    }
    let matrix = confusion_matrix(&truth_seen, &pred_seen, classes.len())?;
    let mut out = String::from("truth");
    for class in &forest.classes {
        out.push('\t');
        out.push_str(class);
    }
    out.push('\n');
    for (t, row) in matrix.iter().enumerate() {
        out.push_str(&classes[t]);
        for count in row {
            out.push_str(&format!("\t{count}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_importance(path: &PathBuf, forest: &ForestModel, report: &ImportanceReport) -> Result<()> {
    let mut out = String::new();
    for (name, value) in forest.feature_names.iter().zip(&report.values) {
        out.push_str(&format!("{name}\t{value}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn run(args: &MainArgs) -> Result<()> {
    let file = args
        .file
        .as_ref()
        .ok_or_else(|| GroveError::Config("--file is required".into()))?;
    let depvar = args.depvarname.as_deref().ok_or_else(|| {
        GroveError::Config(
            "--depvarname is required to train; use --predict to apply a stored forest".into(),
        )
    })?;
    let tree_type = TreeType::from_code(args.treetype)?;
    if tree_type == TreeType::Survival && args.statusvarname.is_none() {
        return Err(GroveError::Config(
            "survival forests need --statusvarname".into(),
        ));
    }
    if tree_type != TreeType::Survival && args.statusvarname.is_some() {
        return Err(GroveError::Config(
            "--statusvarname only applies to survival forests (--treetype 5)".into(),
        ));
    }
    let memory_mode = crate::memory_mode_from_code(args.memorymode)?;
    let importance_mode = importance_mode_from_code(args.impmeasure)?;

    if args.verbose {
        println!("Loading {}", file.display());
    }
    let table = parse_dataset_file(file)?;
    let response = match tree_type {
        TreeType::Classification | TreeType::Probability => {
            ResponseSpec::Classification { target: depvar }
        }
        TreeType::Regression => ResponseSpec::Regression { target: depvar },
        TreeType::Survival => ResponseSpec::Survival {
            time: depvar,
            status: args.statusvarname.as_deref().expect("checked above"),
        },
    };
    let mut dataset = build_dataset(&table, &response)?;
    if memory_mode == MemoryMode::Gwas {
        dataset = dataset.pack_genotype_columns();
    }

    let cfg = GrowConfig {
        tree_type,
        num_trees: args.ntree.unwrap_or(500),
        mtry: args.mtry,
        min_node_size: args.targetpartitionsize,
        memory_mode,
        importance_mode,
        seed: args.seed.unwrap_or_else(clock_seed),
        worker_count: args.nthreads,
        ..GrowConfig::default()
    };
    if args.verbose {
        println!(
            "Growing {} trees on {} samples with {} features",
            cfg.num_trees,
            dataset.n_samples(),
            dataset.n_features()
        );
    }
    let started = Instant::now();
    let forest = grow_forest(&dataset, &cfg)?;
    if args.verbose {
        println!("Growth finished after {:.2} s", started.elapsed().as_secs_f64());
    }
    let summary = oob_error(&forest, &dataset)?;
    print_summary(&forest, &dataset, importance_mode, &summary);

    if forest.tree_type == TreeType::Classification {
        let path = PathBuf::from(format!("{}.confusion", args.outprefix));
        write_confusion(&path, &forest, &dataset, &summary.predictions)?;
        if args.verbose {
            println!("Confusion matrix written to {}", path.display());
        }
    }
    if importance_mode != ImportanceMode::None {
        let report = match importance_mode {
            ImportanceMode::Gini => gini_importance(&forest)?,
            mode => permutation_importance(&forest, &dataset, mode)?,
        };
        let path = PathBuf::from(format!("{}.importance", args.outprefix));
        write_importance(&path, &forest, &report)?;
        if args.verbose {
            println!("Variable importance written to {}", path.display());
        }
    }
    if args.write {
        let path = PathBuf::from(format!("{}.forest", args.outprefix));
        write_forest_file(&path, &forest)?;
        if args.verbose {
            println!("Forest written to {}", path.display());
        }
    }
    Ok(())
}
