//! DataCo transaction CSVs.

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array3;

use super::{encode_labels, Dataset, TaskKind};
use crate::{Error, Result};

pub const DATACO_FEATURES: [&str; 11] = [
    "Type",
    "Days for shipping (real)",
    "Days for shipment (scheduled)",
    "Benefit per order",
    "Sales per customer",
    "Latitude",
    "Longitude",
    "Order Item Discount",
    "Order Item Discount Rate",
    "Order Item Total",
    "Order Profit Per Order",
];

pub const DATACO_CATEGORICAL: [&str; 1] = ["Type"];

pub const DATACO_TARGET: &str = "Late_delivery_risk";

#[derive(Debug, Clone, PartialEq)]
pub struct DataCoOptions {
    pub features: Vec<String>,
    /// Subset of `features` holding words; coded by first appearance.
    pub categorical: Vec<String>,
    pub target: String,
    pub max_samples: Option<usize>,
}

impl Default for DataCoOptions {
    fn default() -> Self {
        Self {
            features: DATACO_FEATURES.iter().map(|s| s.to_string()).collect(),
            categorical: DATACO_CATEGORICAL.iter().map(|s| s.to_string()).collect(),
            target: DATACO_TARGET.to_string(),
            max_samples: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataCoLoad {
    pub dataset: Dataset,
    /// Rows discarded for missing or unparseable values.
    pub dropped: usize,
    /// Code tables for the categorical columns, in code order.
    pub codes: Vec<(String, Vec<String>)>,
}

/// Loads a DataCo-style CSV. Each row becomes one signal over the feature
/// nodes (one value per node).
pub fn load_dataco(path: &Path, options: &DataCoOptions) -> Result<DataCoLoad> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    load_from_reader(&mut reader, options)
}

enum Cell {
    Number(f64),
    Word(String),
}

fn load_from_reader<R: std::io::Read>(reader: &mut csv::Reader<R>, options: &DataCoOptions) -> Result<DataCoLoad> {
    if options.features.is_empty() {
        return Err(Error::invalid("no DataCo feature columns selected"));
    }
    if let Some(c) = options.categorical.iter().find(|c| !options.features.contains(c)) {
        return Err(Error::invalid(format!("categorical column '{c}' is not a selected feature")));
    }
    let header: Vec<String> = reader
        .byte_headers()?
        .iter()
        .map(|h| String::from_utf8_lossy(h).trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    if header.is_empty() {
        return Err(Error::schema("CSV has no header row"));
    }
    let column = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::schema(format!("missing column '{name}'")))
    };
    let feature_cols = options.features.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;
    let target_col = column(&options.target)?;
    let is_categorical: Vec<bool> = options.features.iter().map(|f| options.categorical.contains(f)).collect();

    let mut tables: Vec<HashMap<String, usize>> = vec![HashMap::new(); feature_cols.len()];
    let mut table_order: Vec<Vec<String>> = vec![Vec::new(); feature_cols.len()];
    let mut values = Vec::new();
    let mut raw_targets = Vec::new();
    let mut dropped = 0;
    let mut record = csv::ByteRecord::new();
    while reader.read_byte_record(&mut record)? {
        if options.max_samples.is_some_and(|m| raw_targets.len() >= m) {
            break;
        }
        let field = |i: usize| record.get(i).map(|b| String::from_utf8_lossy(b).trim().to_string());
        let target = match field(target_col) {
            Some(t) if !t.is_empty() => t,
            _ => {
                dropped += 1;
                continue;
            }
        };
        let mut row: Vec<Cell> = Vec::with_capacity(feature_cols.len());
        let mut ok = true;
        for (j, &col) in feature_cols.iter().enumerate() {
            match field(col) {
                Some(s) if !s.is_empty() => {
                    if is_categorical[j] {
                        row.push(Cell::Word(s));
                    } else {
                        match s.parse::<f64>() {
                            Ok(v) if v.is_finite() => row.push(Cell::Number(v)),
                            _ => ok = false,
                        }
                    }
                }
                _ => ok = false,
            }
            if !ok {
                break;
            }
        }
        if !ok {
            dropped += 1;
            continue;
        }
        for (j, cell) in row.into_iter().enumerate() {
            values.push(match cell {
                Cell::Number(v) => v,
                Cell::Word(word) => {
                    let next = tables[j].len();
                    let code = *tables[j].entry(word.clone()).or_insert_with(|| {
                        table_order[j].push(word);
                        next
                    });
                    code as f64
                }
            });
        }
        raw_targets.push(target);
    }
    let s = raw_targets.len();
    if s == 0 {
        return Err(Error::invalid("no usable rows after cleaning"));
    }
    let (targets, class_names) = encode_labels(&raw_targets);
    if class_names.len() < 2 {
        return Err(Error::invalid(format!(
            "target column '{}' has a single class after cleaning",
            options.target
        )));
    }
    let n = feature_cols.len();
    let samples = Array3::from_shape_vec((s, n, 1), values).expect("row width");
    let dataset = Dataset::new(
        samples,
        options.features.clone(),
        TaskKind::SampleClass,
        targets,
        Vec::new(),
        class_names,
    )?;
    let codes = options
        .features
        .iter()
        .zip(table_order)
        .filter(|(f, _)| options.categorical.contains(f))
        .map(|(f, t)| (f.clone(), t))
        .collect();
    Ok(DataCoLoad { dataset, dropped, codes })
}
