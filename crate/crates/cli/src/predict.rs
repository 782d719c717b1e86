//! Prediction mode: load a stored forest, apply it to the numeric columns
//! of the data file, and write one prediction per row.

use std::path::PathBuf;

use grove_core::forest::{predict_forest, ForestModel, ForestPrediction, PredictorView};
use grove_core::io::{parse_dataset_file, read_forest_file, ParsedColumn};
use grove_core::{GroveError, Result};

use crate::MainArgs;

fn render_prediction(forest: &ForestModel, prediction: &ForestPrediction) -> String {
    let mut out = String::new();
    match prediction {
        ForestPrediction::Classes(rows) => {
            for &class in rows {
                out.push_str(&forest.classes[class as usize]);
                out.push('\n');
            }
        }
        ForestPrediction::Values(rows) => {
            for value in rows {
                out.push_str(&format!("{value}\n"));
            }
        }
        ForestPrediction::Probabilities(rows) => {
            for row in rows {
                push_tab_joined(&mut out, row);
            }
        }
        ForestPrediction::Curves(rows) => {
            push_tab_joined(&mut out, &forest.timepoints);
            for row in rows {
                push_tab_joined(&mut out, row);
            }
        }
    }
    out
}

fn push_tab_joined(out: &mut String, values: &[f64]) {
    for (i, value) in values.iter().enumerate() {
        if i > 0 {
            out.push('\t');
        }
        out.push_str(&format!("{value}"));
    }
    out.push('\n');
}

pub fn run(args: &MainArgs) -> Result<()> {
    let file = args
        .file
        .as_ref()
        .ok_or_else(|| GroveError::Config("--file is required".into()))?;
    let forest_path = args.predict.as_ref().expect("predict mode dispatch");
    let forest = read_forest_file(forest_path)?;
    if args.verbose {
        println!(
            "Loaded a {} forest with {} trees",
            forest.tree_type.label(),
            forest.num_trees()
        );
    }

    let table = parse_dataset_file(file)?;
    let mut names: Vec<&str> = Vec::new();
    let mut columns: Vec<&[f64]> = Vec::new();
    for (i, name) in table.names().iter().enumerate() {
        if let ParsedColumn::Numeric(values) = table.column(i) {
            names.push(name);
            columns.push(values);
        }
    }
    let view = PredictorView::from_named_columns(&forest, &names, &columns, table.n_rows())?;
    let prediction = predict_forest(&forest, &view)?;

    let path = PathBuf::from(format!("{}.prediction", args.outprefix));
    std::fs::write(&path, render_prediction(&forest, &prediction))?;
    println!(
        "Predictions for {} rows written to {}",
        table.n_rows(),
        path.display()
    );
    Ok(())
}
