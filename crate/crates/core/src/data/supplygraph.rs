//! SupplyGraph-style directories.
//!
//! ```text
//! delivery_to_distributor.csv  factory_issue.csv  production.csv  sales_order.csv
//!     date,<product>,<product>,...     one row per date
//! products.csv                         product,group[,plant]
//! edges_product_group.csv  edges_plant.csv  edges_sub_group.csv  edges_storage.csv
//!     src,dst,label                    zero-based product indices
//! ```
//!
//! The four temporal files are required; `products.csv` and the edge files
//! are read when present.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;

use super::{encode_labels, window_signals, Dataset, TaskKind};
use crate::{Error, Result};

pub const SIGNAL_FILES: [&str; 4] = [
    "delivery_to_distributor.csv",
    "factory_issue.csv",
    "production.csv",
    "sales_order.csv",
];

pub const EDGE_FILES: [(EdgeKind, &str); 4] = [
    (EdgeKind::ProductGroup, "edges_product_group.csv"),
    (EdgeKind::Plant, "edges_plant.csv"),
    (EdgeKind::SubGroup, "edges_sub_group.csv"),
    (EdgeKind::Storage, "edges_storage.csv"),
];

const PRODUCTS_FILE: &str = "products.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    ProductGroup,
    Plant,
    SubGroup,
    Storage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub kind: EdgeKind,
    pub edges: Vec<(usize, usize)>,
    /// Raw relation label per edge.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupplyGraphSeries {
    pub dates: Vec<NaiveDate>,
    pub products: Vec<String>,
    /// One `dates × products` matrix per entry of [`SIGNAL_FILES`].
    pub signals: Vec<Array2<f64>>,
    pub groups: Option<Vec<String>>,
    pub plants: Option<Vec<String>>,
}

impl SupplyGraphSeries {
    /// Product-group classification: one node per product, one signal per
    /// window of each temporal file.
    pub fn node_dataset(&self, window: usize, stride: usize) -> Result<Dataset> {
        let groups = self
            .groups
            .as_ref()
            .ok_or_else(|| Error::schema("product groups are required (products.csv)"))?;
        let (targets, class_names) = encode_labels(groups);
        Dataset::new(
            window_signals(&self.signals, window, stride)?,
            self.products.clone(),
            TaskKind::NodeClass,
            targets,
            Vec::new(),
            class_names,
        )
    }

    /// Relation classification over the edges of `list`.
    pub fn edge_dataset(&self, list: &EdgeList, window: usize, stride: usize) -> Result<Dataset> {
        if list.edges.is_empty() {
            return Err(Error::invalid("edge list is empty"));
        }
        let (targets, class_names) = encode_labels(&list.labels);
        Dataset::new(
            window_signals(&self.signals, window, stride)?,
            self.products.clone(),
            TaskKind::EdgeClass,
            targets,
            list.edges.clone(),
            class_names,
        )
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y/%m/%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y-%m-%d"))
        .ok()
}

struct Temporal {
    dates: Vec<NaiveDate>,
    products: Vec<String>,
    values: Array2<f64>,
}

fn read_temporal(path: &Path) -> Result<Temporal> {
    let name = path.display();
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(Error::schema(format!("{name}: expected a date column and at least one product")));
    }
    let products = header[1..].to_vec();
    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = line + 2;
        let date = parse_date(record.get(0).unwrap_or("").trim())
            .ok_or_else(|| Error::schema(format!("{name}:{row}: unparseable date")))?;
        if record.len() != header.len() {
            return Err(Error::schema(format!("{name}:{row}: expected {} fields", header.len())));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::schema(format!("{name}:{row}: non-numeric value")))?;
        rows.push((date, values));
    }
    if rows.is_empty() {
        return Err(Error::schema(format!("{name}: no data rows")));
    }
    rows.sort_by_key(|(d, _)| *d);
    let t = rows.len();
    let p = products.len();
    let dates = rows.iter().map(|(d, _)| *d).collect();
    let flat = rows.into_iter().flat_map(|(_, v)| v).collect();
    Ok(Temporal {
        dates,
        products,
        values: Array2::from_shape_vec((t, p), flat).expect("row width checked"),
    })
}

fn read_products(path: &Path, products: &[String]) -> Result<(Vec<String>, Option<Vec<String>>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |n: &str| header.iter().position(|h| h == n);
    let (pc, gc) = match (col("product"), col("group")) {
        (Some(p), Some(g)) => (p, g),
        _ => return Err(Error::schema("products.csv needs 'product' and 'group' columns")),
    };
    let plc = col("plant");
    let mut groups = vec![None; products.len()];
    let mut plants = vec![None; products.len()];
    for record in reader.records() {
        let record = record?;
        let product = record.get(pc).unwrap_or("").trim();
        let i = products
            .iter()
            .position(|p| p == product)
            .ok_or_else(|| Error::schema(format!("products.csv lists unknown product '{product}'")))?;
        groups[i] = record.get(gc).map(|g| g.trim().to_string());
        plants[i] = plc.and_then(|c| record.get(c)).map(|p| p.trim().to_string());
    }
    let groups = groups
        .into_iter()
        .zip(products)
        .map(|(g, p)| g.ok_or_else(|| Error::schema(format!("products.csv has no group for '{p}'"))))
        .collect::<Result<Vec<_>>>()?;
    let plants = match plc {
        Some(_) => Some(
            plants
                .into_iter()
                .zip(products)
                .map(|(g, p)| g.ok_or_else(|| Error::schema(format!("products.csv has no plant for '{p}'"))))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok((groups, plants))
}

fn read_edges(path: &Path, kind: EdgeKind, nodes: usize) -> Result<EdgeList> {
    let name = path.display();
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != ["src", "dst", "label"] {
        return Err(Error::schema(format!("{name}: header must be src,dst,label")));
    }
    let mut edges = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = line + 2;
        let index = |i: usize| -> Result<usize> {
            let v: usize = record
                .get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::schema(format!("{name}:{row}: bad node index")))?;
            if v >= nodes {
                return Err(Error::schema(format!(
                    "{name}:{row}: node index {v} out of range for {nodes} products"
                )));
            }
            Ok(v)
        };
        edges.push((index(0)?, index(1)?));
        labels.push(record.get(2).unwrap_or("").trim().to_string());
    }
    Ok(EdgeList { kind, edges, labels })
}

pub fn load_supplygraph(dir: &Path) -> Result<(SupplyGraphSeries, Vec<EdgeList>)> {
    let mut temporal = Vec::with_capacity(SIGNAL_FILES.len());
    for file in SIGNAL_FILES {
        let path = dir.join(file);
        if !path.exists() {
            return Err(Error::schema(format!("missing temporal file {}", path.display())));
        }
        temporal.push(read_temporal(&path)?);
    }
    let first = &temporal[0];
    let products = first.products.clone();
    let mut signals = Vec::with_capacity(temporal.len());
    for (t, file) in temporal.iter().zip(SIGNAL_FILES) {
        let mut sorted_a = t.products.clone();
        let mut sorted_b = products.clone();
        sorted_a.sort();
        sorted_b.sort();
        if sorted_a != sorted_b {
            return Err(Error::schema(format!(
                "{file}: product set differs from {}",
                SIGNAL_FILES[0]
            )));
        }
        if t.dates != first.dates {
            return Err(Error::schema(format!("{file}: dates differ from {}", SIGNAL_FILES[0])));
        }
        let order: Vec<usize> = products
            .iter()
            .map(|p| t.products.iter().position(|q| q == p).expect("same set"))
            .collect();
        signals.push(t.values.select(ndarray::Axis(1), &order));
    }
    let products_path = dir.join(PRODUCTS_FILE);
    let (groups, plants) = if products_path.exists() {
        let (g, p) = read_products(&products_path, &products)?;
        (Some(g), p)
    } else {
        (None, None)
    };
    let mut edge_lists = Vec::new();
    for (kind, file) in EDGE_FILES {
        let path = dir.join(file);
        if path.exists() {
            edge_lists.push(read_edges(&path, kind, products.len())?);
        }
    }
    let series = SupplyGraphSeries {
        dates: first.dates.clone(),
        products,
        signals,
        groups,
        plants,
    };
    Ok((series, edge_lists))
}

/// Writes the directory layout read by [`load_supplygraph`].
pub fn write_supplygraph(dir: &Path, series: &SupplyGraphSeries, edges: &[EdgeList]) -> Result<()> {
    if series.signals.len() != SIGNAL_FILES.len() {
        return Err(Error::invalid(format!("expected {} signals", SIGNAL_FILES.len())));
    }
    fs::create_dir_all(dir)?;
    for (signal, file) in series.signals.iter().zip(SIGNAL_FILES) {
        let mut w = csv::Writer::from_path(dir.join(file))?;
        let mut header = vec!["date".to_string()];
        header.extend(series.products.iter().cloned());
        w.write_record(&header)?;
        for (date, row) in series.dates.iter().zip(signal.rows()) {
            let mut rec = vec![date.format("%Y-%m-%d").to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    if let Some(groups) = &series.groups {
        let mut w = csv::Writer::from_path(dir.join(PRODUCTS_FILE))?;
        match &series.plants {
            Some(plants) => {
                w.write_record(["product", "group", "plant"])?;
                for ((p, g), pl) in series.products.iter().zip(groups).zip(plants) {
                    w.write_record([p, g, pl])?;
                }
            }
            None => {
                w.write_record(["product", "group"])?;
                for (p, g) in series.products.iter().zip(groups) {
                    w.write_record([p, g])?;
                }
            }
        }
        w.flush()?;
    }
    for list in edges {
        let file = EDGE_FILES
            .iter()
            .find(|(k, _)| *k == list.kind)
            .map(|(_, f)| *f)
            .expect("every kind has a file");
        let mut w = csv::Writer::from_path(dir.join(file))?;
        w.write_record(["src", "dst", "label"])?;
        for ((s, d), l) in list.edges.iter().zip(&list.labels) {
            w.write_record([s.to_string(), d.to_string(), l.clone()])?;
        }
        w.flush()?;
    }
    Ok(())
}
