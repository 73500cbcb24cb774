use std::path::Path;
use std::process::Command;

use expertnet::harness::{emit_report, run_grid, ExperimentConfig, Method, Mode, ResultRecord};

const BLOBS: &str = r#"
[dataset]
kind = "blobs"
classes = 3
per_class = 40
dim = 4
separation = 5.0

[training]
epochs = 3
batch_size = 16
amateur_hidden = [8]
expert_hidden = [6]
"#;

fn config(axes: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("schema_version = 1\n{axes}\n{BLOBS}")).unwrap()
}

#[test]
fn expertnet_cell_yields_both_modes() {
    let grid = run_grid(&config("noise_ratios = [0.2]\nmethods = [\"expertnet\"]\nseeds = [1]"), 1).unwrap();
    let modes: Vec<Mode> = grid.records.iter().map(|r| r.mode).collect();
    assert_eq!(modes, vec![Mode::AmateurOnly, Mode::Full]);
    assert!(grid.records.iter().all(|r| r.status == "ok" && r.epochs_run == 3));
}

#[test]
fn grid_record_count_and_order() {
    let cfg = config("noise_ratios = [0.4, 0.2]\nmethods = [\"plain-ce\", \"expertnet\"]\nseeds = [3, 1, 2]");
    let grid = run_grid(&cfg, 2).unwrap();
    // 2 ratios x 3 seeds: expertnet gives two records per cell, plain-ce one.
    assert_eq!(grid.records.len(), 18);
    assert_eq!(grid.failed_cells(), 0);
    let keys: Vec<(u64, Method, Mode, u64)> =
        grid.records.iter().map(|r| (r.noise_ratio.to_bits(), r.method, r.mode, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn methods_in_a_cell_share_data_and_batch_order() {
    let cfg = config("noise_ratios = [0.3]\nfractions = [1.0, 0.5]\nmethods = [\"expertnet\", \"bootstrap\", \"forward\"]\nseeds = [7]");
    let grid = run_grid(&cfg, 1).unwrap();
    // Per cell: a header naming the dataset hash, then one line per epoch.
    let mut cells: std::collections::BTreeMap<String, Vec<(String, Vec<String>)>> = Default::default();
    let mut current = String::new();
    for line in grid.log.lines() {
        let words: Vec<&str> = line.split_whitespace().collect();
        if words[0] == "epoch" {
            cells.get_mut(&current).unwrap().last_mut().unwrap().1.push(words[3].to_string());
        } else {
            current = words[1..4].join(" ");
            let hash = words[4].strip_prefix("dataset=").unwrap().to_string();
            cells.entry(current.clone()).or_default().push((hash, Vec::new()));
        }
    }
    assert_eq!(cells.len(), 2);
    for runs in cells.values() {
        assert_eq!(runs.len(), 3);
        assert!(runs.iter().all(|r| r == &runs[0] && r.1.len() == 3));
    }
}

#[test]
fn failed_cells_are_recorded_and_the_grid_continues() {
    // 96 training rows: a 0.004 fraction rounds to zero samples.
    let grid = run_grid(
        &config("noise_ratios = [0.2]\nfractions = [1.0, 0.004]\nmethods = [\"expertnet\", \"forward\"]\nseeds = [1]"),
        1,
    )
    .unwrap();
    assert_eq!(grid.records.len(), 6);
    assert_eq!(grid.failed_cells(), 3);
    for r in &grid.records {
        assert_eq!(r.failed(), r.fraction < 0.5, "{r:?}");
        if r.failed() {
            assert!(r.status.starts_with("failed:"));
        }
    }
}

fn record(method: Method, fraction: f64, seed: u64, accuracy: f64) -> ResultRecord {
    ResultRecord {
        method,
        mode: Mode::AmateurOnly,
        noise_ratio: 0.4,
        fraction,
        seed,
        accuracy: Some(accuracy),
        wall_seconds: 1.0,
        epochs_run: 10,
        dataset_hash: "h".into(),
        status: "ok".into(),
    }
}

#[test]
fn pivot_cells_show_mean_and_sample_stdev() {
    let dir = tempfile::tempdir().unwrap();
    let records = vec![
        record(Method::PlainCe, 1.0, 1, 0.80),
        record(Method::PlainCe, 1.0, 2, 0.82),
        record(Method::PlainCe, 0.5, 1, 0.7),
        record(Method::Forward, 1.0, 1, 0.9),
    ];
    let files = emit_report(&records, "", dir.path()).unwrap();
    assert_eq!(files.pivots, vec![dir.path().join("pivot_rho40.csv")]);
    let pivot = std::fs::read_to_string(&files.pivots[0]).unwrap();
    assert_eq!(pivot, "fraction,plain-ce/amateur-only,forward/amateur-only\n1,0.8100±0.0141,0.9000\n0.5,0.7000,n/a\n");
    let results = std::fs::read_to_string(&files.results).unwrap();
    assert_eq!(results.lines().count(), 1 + records.len());
    let again = tempfile::tempdir().unwrap();
    emit_report(&records, "", again.path()).unwrap();
    for name in ["results.csv", "pivot_rho40.csv", "run.log"] {
        assert_eq!(std::fs::read(dir.path().join(name)).unwrap(), std::fs::read(again.path().join(name)).unwrap());
    }
    assert!(results.starts_with("method,mode,noise_ratio,fraction,seed,accuracy,epochs_run,dataset_hash,status\n"));
    assert!(!results.contains("wall"));
    assert!(std::fs::read_to_string(&files.timings).unwrap().contains("wall_seconds"));
}

#[test]
fn table_dataset_with_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("a,b,kind\n");
    for i in 0..90 {
        let (x, label) = match i % 3 {
            0 => (0.0, "cat"),
            1 => (5.0, "dog"),
            _ => (10.0, "eel"),
        };
        csv.push_str(&format!("{},{},{label}\n", x + (i as f64 * 0.37).sin(), -x));
    }
    std::fs::write(dir.path().join("animals.csv"), csv).unwrap();
    let text = "schema_version = 1\nnoise_ratios = [0.1]\nmethods = [\"expertnet\", \"bootstrap\"]\nseeds = [1]\n\
                [dataset]\nkind = \"table\"\ntrain = \"animals.csv\"\nfeatures = [\"a\", \"b\"]\nlabel = \"kind\"\n\
                [training]\nepochs = 5\nbatch_size = 8\n";
    let path = dir.path().join("grid.toml");
    std::fs::write(&path, text).unwrap();
    let cfg = ExperimentConfig::read(&path).unwrap();
    let grid = run_grid(&cfg, 1).unwrap();
    assert_eq!(grid.records.len(), 3);
    assert_eq!(grid.failed_cells(), 0);
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_expertnet")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write_config(dir: &Path, axes: &str) -> String {
    let path = dir.join("grid.toml");
    std::fs::write(&path, format!("schema_version = 1\n{axes}\n{BLOBS}")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn cli_run_writes_reports_and_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "noise_ratios = [0.2]\nmethods = [\"expertnet\"]\nseeds = [1, 2]");
    let out = dir.path().join("out");
    let (code, stdout) =
        cli(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "5", "--threads", "2"]);
    assert_eq!(code, 0, "{stdout}");
    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 3);
    assert!(results.lines().skip(1).all(|l| l.contains(",5,")));
    assert!(out.join("pivot_rho20.csv").exists() && out.join("run.log").exists());

    let failing =
        write_config(dir.path(), "noise_ratios = [0.2]\nfractions = [0.004]\nmethods = [\"plain-ce\"]\nseeds = [1]");
    assert_eq!(cli(&["run", "--config", &failing, "--out", out.to_str().unwrap()]).0, 1);
    assert_eq!(cli(&["run", "--config", "/nonexistent.toml"]).0, 2);
}

#[test]
fn cli_train_saves_a_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "noise_ratios = [0.2]\nmethods = [\"expertnet\"]\nseeds = [1]");
    let ckpt = dir.path().join("model.ckpt");
    let (code, stdout) = cli(&[
        "train",
        "--config",
        &cfg,
        "--method",
        "expertnet",
        "--ratio",
        "0.2",
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("expertnet full: accuracy"));
    let model = expertnet::expertnet::read_checkpoint::<f64>(&ckpt, Default::default(), Default::default()).unwrap();
    assert_eq!((model.input_dim(), model.num_classes()), (4, 3));
}

#[test]
fn cli_noise_stats_and_gradcheck() {
    let (code, stdout) = cli(&["noise-stats", "--classes", "4", "--ratio", "0.4", "--samples", "20000", "--seed", "3"]);
    assert_eq!(code, 0);
    let observed: f64 = stdout.lines().nth(1).unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((observed - 0.4).abs() < 0.02);
    assert_eq!(stdout.lines().count(), 3 + 4);

    let (code, stdout) = cli(&["gradcheck", "--cases", "12", "--seed", "1"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("0 failures"));
}
