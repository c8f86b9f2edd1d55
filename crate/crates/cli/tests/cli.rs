use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chegn::data::synth_generate;
use chegn::graph::{build_adjacency, pearson_correlation, DEFAULT_THRESHOLD};
use chegn::train::node_feature_matrix;

const SMALL: [&str; 6] = [
    "--set",
    "synthetic.samples=40",
    "--set",
    "training.epochs=6",
    "--set",
    "training.folds=2",
];

fn chegn(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chegn"))
        .args(args)
        .env("CHEGN_OUTPUT_ROOT", root)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(root: &Path, args: &[&str]) -> Output {
    let out = chegn(root, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn with_small<'a>(args: &[&'a str]) -> Vec<&'a str> {
    SMALL.iter().copied().chain(args.iter().copied()).collect()
}

fn read_matrix(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').skip(1).map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn accuracy_line(text: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with("accuracy:")).unwrap();
    line["accuracy:".len()..].trim().parse().unwrap()
}

#[test]
fn train_writes_the_run_directory() {
    let root = tempfile::tempdir().unwrap();
    ok(root.path(), &with_small(&["--variant", "gcn", "train"]));
    let dir = root.path().join("gcn");
    for name in [
        "metrics.txt",
        "confusion.csv",
        "history.csv",
        "fold_plan.csv",
        "checkpoint.bin",
        "resolved_config.toml",
    ] {
        assert!(dir.join(name).is_file(), "missing {name}");
    }
    let history = fs::read_to_string(dir.join("history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(
        lines.next().unwrap(),
        "fold,epoch,loss_graph,loss_conv,loss_total,train_accuracy"
    );
    let folds: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(folds.len(), 3 * 6);
    assert_eq!(folds.iter().filter(|f| **f == "final").count(), 6);

    let plan = fs::read_to_string(dir.join("fold_plan.csv")).unwrap();
    assert_eq!(plan.lines().count(), 41);

    let confusion = fs::read_to_string(dir.join("confusion.csv")).unwrap();
    let total: u64 = confusion
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|v| v.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(total, 40);

    let resolved = fs::read_to_string(dir.join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("variant = \"gcn\""));
    assert!(resolved.contains("epochs = 6"));
}

#[test]
fn invalid_threshold_exits_one_and_names_the_key() {
    let root = tempfile::tempdir().unwrap();
    let out = chegn(root.path(), &["--set", "graph.threshold=1.5", "train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("graph.threshold"));
    assert!(!root.path().join("cheb").exists());
}

#[test]
fn config_file_and_flags_combine() {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("run.toml");
    fs::write(
        &config,
        "variant = \"gat\"\nseed = 3\n[synthetic]\nsamples = 30\n[training]\nepochs = 2\nfolds = 2\n",
    )
    .unwrap();
    let path = config.to_str().unwrap();
    ok(root.path(), &["--config", path, "--seed", "4", "train"]);
    let resolved = fs::read_to_string(root.path().join("gat/resolved_config.toml")).unwrap();
    assert!(resolved.contains("seed = 4"));
    assert!(resolved.contains("samples = 30"));

    fs::write(&config, "[training]\nepoch = 2\n").unwrap();
    let out = chegn(root.path(), &["--config", path, "train"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_reproduces_and_rejects_mismatched_checkpoints() {
    let root = tempfile::tempdir().unwrap();
    ok(root.path(), &with_small(&["train"]));
    let dir = root.path().join("cheb");
    let history = fs::read_to_string(dir.join("history.csv")).unwrap();
    let last_final = history.lines().filter(|l| l.starts_with("final,")).last().unwrap();
    let train_acc: f64 = last_final.rsplit(',').next().unwrap().parse().unwrap();

    ok(root.path(), &with_small(&["eval"]));
    let first = fs::read(dir.join("eval/metrics.txt")).unwrap();
    let acc = accuracy_line(&String::from_utf8_lossy(&first));
    // the history row is measured with dropout active, evaluation without
    assert!(acc + 1e-12 >= train_acc - 0.25, "eval {acc} vs train {train_acc}");
    ok(root.path(), &with_small(&["eval"]));
    assert_eq!(fs::read(dir.join("eval/metrics.txt")).unwrap(), first);

    let out = chegn(root.path(), &with_small(&["--set", "model.orders=[1, 1, 1, 1]", "eval"]));
    assert_eq!(out.status.code(), Some(1));
    let out = chegn(root.path(), &with_small(&["--set", "synthetic.channels=8", "eval"]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exported_graph_matches_the_adjacency_builder() {
    let root = tempfile::tempdir().unwrap();
    ok(root.path(), &with_small(&["--seed", "2", "train"]));
    ok(root.path(), &with_small(&["--seed", "2", "export", "graph"]));
    let (names, rows) = read_matrix(&root.path().join("cheb/export/graph.csv"));
    assert_eq!(names.len(), 10);
    assert_eq!(rows.len(), 10);
    for i in 0..10 {
        assert_eq!(rows[i][i], 1.0 / (1.0 + (-1.0f64).exp()));
        for j in 0..10 {
            assert_eq!(rows[i][j], rows[j][i]);
        }
    }

    let data = synth_generate(40, 10, 2, 3.0, 2).unwrap().dataset;
    let all: Vec<usize> = (0..40).collect();
    let corr = pearson_correlation(&node_feature_matrix(&data, &all).unwrap()).unwrap();
    let expected = build_adjacency(&corr, DEFAULT_THRESHOLD).unwrap();
    for i in 0..10 {
        for j in 0..10 {
            assert_eq!(rows[i][j], expected.values()[[i, j]], "entry ({i},{j})");
        }
    }
}

#[test]
fn embeddings_have_one_row_per_node_and_the_layer_widths() {
    let root = tempfile::tempdir().unwrap();
    let widths = ["--set", "model.widths=[6, 4, 3, 2]"];
    ok(root.path(), &[&with_small(&widths)[..], &["train"]].concat());
    ok(root.path(), &[&with_small(&widths)[..], &["export", "embeddings", "--sample", "5"]].concat());
    let dir = root.path().join("cheb/export");
    let (cols, rows) = read_matrix(&dir.join("embedding_input.csv"));
    assert_eq!((rows.len(), cols.len()), (10, 1));
    for (layer, width) in [6, 4, 3, 2].iter().enumerate() {
        let (cols, rows) = read_matrix(&dir.join(format!("embedding_layer{}.csv", layer + 1)));
        assert_eq!((rows.len(), cols.len()), (10, *width));
        assert!(rows.iter().flatten().all(|v| v.is_finite()));
    }

    let out = chegn(root.path(), &[&with_small(&widths)[..], &["export", "embeddings", "--sample", "40"]].concat());
    assert_eq!(out.status.code(), Some(1));
    let out = chegn(root.path(), &with_small(&["export", "weights"]));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synthetic_samples_load_back_through_the_tabular_task() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    ok(root.path(), &["--set", "synthetic.samples=30", "synth", "--out", data.to_str().unwrap()]);
    let csv = data.join("samples.csv");
    let features: Vec<String> = (0..10).map(|i| format!("\"ch{i}\"")).collect();
    let features = format!("data.features=[{}]", features.join(","));
    let path = format!("data.dataco_path={}", toml_string(&csv));
    ok(
        root.path(),
        &[
            "--task",
            "dataco-risk",
            "--set",
            &path,
            "--set",
            &features,
            "--set",
            "data.categorical=[]",
            "--set",
            "data.target=label",
            "--set",
            "training.epochs=2",
            "--set",
            "training.folds=2",
            "train",
        ],
    );
    let plan = fs::read_to_string(root.path().join("cheb/fold_plan.csv")).unwrap();
    assert_eq!(plan.lines().count(), 31);
}

#[test]
fn synthetic_supplygraph_directory_trains_on_edges() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("sg");
    let common = ["--set", "synthetic.kind=edge", "--set", "synthetic.length=40"];
    ok(root.path(), &[&common[..], &["synth", "--out", data.to_str().unwrap()]].concat());
    let dir = format!("data.supplygraph_dir={}", toml_string(&data));
    ok(
        root.path(),
        &[
            "--task",
            "sg-product-edges",
            "--set",
            &dir,
            "--set",
            "data.stride=5",
            "--set",
            "training.epochs=2",
            "--set",
            "training.folds=2",
            "train",
        ],
    );
    assert!(root.path().join("cheb/checkpoint.bin").is_file());

    let out = chegn(root.path(), &["--task", "sg-plant-edges", "--set", &dir, "train"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let root = tempfile::tempdir().unwrap();
    assert_eq!(chegn(root.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(chegn(root.path(), &["train", "--seed", "x"]).status.code(), Some(1));
    assert_eq!(chegn(root.path(), &["--help"]).status.code(), Some(0));
}

fn toml_string(path: &Path) -> String {
    format!("{:?}", path.to_str().unwrap())
}

#[test]
fn divergence_exits_two() {
    let root = tempfile::tempdir().unwrap();
    let out = chegn(
        root.path(),
        &with_small(&[
            "--set",
            "training.graph_optimizer=sgd",
            "--set",
            "training.conv_optimizer=sgd",
            "--set",
            "training.graph_lr=1e300",
            "--set",
            "training.conv_lr=1e300",
            "train",
        ]),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
