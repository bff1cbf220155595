use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sotnn_core::data::{IdxImages, IdxLabels};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_sotnn");

/// Class `k` lights up row band `k` of a 28×28 image, plus a little noise.
fn synthetic(count: usize, salt: u32) -> (IdxImages, IdxLabels) {
    let mut pixels = Vec::with_capacity(count * 784);
    let mut labels = Vec::with_capacity(count);
    let mut state = 0x9e37_79b9u32 ^ salt;
    for i in 0..count {
        let label = (i % 10) as u8;
        labels.push(label);
        for p in 0..784 {
            state ^= state << 13;
            state ^= state >> 17;
            state ^= state << 5;
            let row = p / 28;
            let on = row / 3 == label as usize;
            pixels.push(if on {
                200 + (state % 56) as u8
            } else {
                (state % 30) as u8
            });
        }
    }
    let images = IdxImages {
        count,
        rows: 28,
        cols: 28,
        pixels,
    };
    (images, IdxLabels { labels })
}

fn write_mnist(dir: &Path, train: usize, test: usize) {
    let (ti, tl) = synthetic(train, 1);
    let (vi, vl) = synthetic(test, 2);
    fs::write(dir.join("train-images-idx3-ubyte"), ti.to_bytes()).unwrap();
    fs::write(dir.join("train-labels-idx1-ubyte"), tl.to_bytes()).unwrap();
    fs::write(dir.join("t10k-images-idx3-ubyte"), vi.to_bytes()).unwrap();
    fs::write(dir.join("t10k-labels-idx1-ubyte"), vl.to_bytes()).unwrap();
}

struct Env {
    _tmp: TempDir,
    data: PathBuf,
    root: PathBuf,
}

fn env() -> Env {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("mnist");
    fs::create_dir(&data).unwrap();
    write_mnist(&data, 200, 50);
    Env {
        root: tmp.path().to_path_buf(),
        data,
        _tmp: tmp,
    }
}

fn run(env: &Env, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--data")
        .arg(&env.data)
        .env_remove("SOTNN_DATA_DIR")
        .current_dir(&env.root)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn train_args<'a>(out: &'a str, epochs: &'a str) -> Vec<&'a str> {
    vec![
        "train",
        "--out",
        out,
        "--epochs",
        epochs,
        "--set",
        "train.batch_size=20",
        "--set",
        "train.learning_rate=0.02",
    ]
}

#[test]
fn train_writes_all_artifacts() {
    let e = env();
    ok(&run(&e, &train_args("run", "3")));
    let dir = e.root.join("run");
    for f in [
        "metrics_oracle.csv",
        "metrics_crossbar.csv",
        "checkpoint.json",
        "report.json",
        "config_echo.toml",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let oracle = fs::read_to_string(dir.join("metrics_oracle.csv")).unwrap();
    let crossbar = fs::read_to_string(dir.join("metrics_crossbar.csv")).unwrap();
    assert!(oracle.starts_with("epoch,train_acc,test_acc,mean_loss\n"));
    assert_eq!(oracle.lines().count(), 4);
    assert_eq!(crossbar.lines().count(), 4);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["oracle"]["epochs"].as_array().unwrap().len(), 3);
    assert_eq!(report["crossbar"]["epochs"].as_array().unwrap().len(), 3);
    // 16 + 10 programming rows, one cycle per test image.
    assert_eq!(report["cycles"]["training_cycles"], 26);
    assert_eq!(report["cycles"]["inference_cycles"], 50);
    assert_eq!(report["speedup"]["speedup"], 100000.0);
    assert_eq!(report["power_area"]["neuron_count"], 26);
    let echo = fs::read_to_string(dir.join("config_echo.toml")).unwrap();
    assert_eq!(report["config_echo"].as_str().unwrap(), echo);
    let final_acc = report["oracle"]["epochs"][2]["test_acc"].as_f64().unwrap();
    assert!(final_acc > 0.5, "synthetic bands should be learnable, got {final_acc}");
}

#[test]
fn zero_epochs_gives_empty_series() {
    let e = env();
    ok(&run(&e, &train_args("zero", "0")));
    let dir = e.root.join("zero");
    assert_eq!(
        fs::read_to_string(dir.join("metrics_oracle.csv")).unwrap(),
        "epoch,train_acc,test_acc,mean_loss\n"
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["oracle"]["epochs"].as_array().unwrap().is_empty());
    assert!(report["crossbar"]["epochs"].as_array().unwrap().is_empty());
    assert!(report["accuracy_gap"].is_null());
    assert_eq!(report["cycles"]["training_cycles"], 26);
}

#[test]
fn same_seed_is_bitwise_reproducible() {
    let e = env();
    ok(&run(&e, &train_args("a", "2")));
    ok(&run(&e, &train_args("b", "2")));
    for f in ["metrics_oracle.csv", "metrics_crossbar.csv", "checkpoint.json"] {
        assert_eq!(
            fs::read(e.root.join("a").join(f)).unwrap(),
            fs::read(e.root.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let mut other = train_args("c", "2");
    other.extend(["--seed", "7"]);
    ok(&run(&e, &other));
    assert_ne!(
        fs::read(e.root.join("a/checkpoint.json")).unwrap(),
        fs::read(e.root.join("c/checkpoint.json")).unwrap()
    );
}

#[test]
fn rerun_from_config_echo_reproduces_outputs() {
    let e = env();
    ok(&run(&e, &train_args("first", "2")));
    let echo = e.root.join("first/config_echo.toml");
    let out = Command::new(BIN)
        .args(["train", "--config"])
        .arg(&echo)
        .args(["--out", "second"])
        .current_dir(&e.root)
        .env_remove("SOTNN_DATA_DIR")
        .output()
        .unwrap();
    ok(&out);
    for f in ["metrics_oracle.csv", "metrics_crossbar.csv", "checkpoint.json"] {
        assert_eq!(
            fs::read(e.root.join("first").join(f)).unwrap(),
            fs::read(e.root.join("second").join(f)).unwrap(),
            "{f}"
        );
    }
    // The echo of the echo differs only in output.dir.
    let a = fs::read_to_string(&echo).unwrap();
    let b = fs::read_to_string(e.root.join("second/config_echo.toml")).unwrap();
    assert_eq!(a.replace("\"first\"", "\"second\""), b);
}

#[test]
fn flags_override_config_file() {
    let e = env();
    let cfg = e.root.join("c.toml");
    fs::write(&cfg, "seed = 5\ntrain.epochs = 4\n[circuit]\nnonideal = true\n").unwrap();
    let out = Command::new(BIN)
        .args(["train", "--config"])
        .arg(&cfg)
        .args([
            "--epochs",
            "1",
            "--nonideal",
            "off",
            "--out",
            "o",
            "--set",
            "train.batch_size=50",
        ])
        .arg("--data")
        .arg(&e.data)
        .current_dir(&e.root)
        .output()
        .unwrap();
    ok(&out);
    let echo = fs::read_to_string(e.root.join("o/config_echo.toml")).unwrap();
    assert!(echo.contains("seed = 5\n"));
    assert!(echo.contains("train.epochs = 1\n"));
    assert!(echo.contains("circuit.nonideal = false\n"));
    assert!(echo.contains("train.batch_size = 50\n"));
}

#[test]
fn data_dir_from_environment() {
    let e = env();
    let out = Command::new(BIN)
        .args(["train", "--epochs", "1", "--out", "envrun"])
        .env("SOTNN_DATA_DIR", &e.data)
        .current_dir(&e.root)
        .output()
        .unwrap();
    ok(&out);
}

#[test]
fn infer_reports_single_cycle_and_matches_oracle() {
    let e = env();
    let mut args = train_args("run", "2");
    args.extend(["--nonideal", "off"]);
    ok(&run(&e, &args));
    let ck = e.root.join("run/checkpoint.json");
    let out = run(
        &e,
        &[
            "infer",
            "--nonideal",
            "off",
            "--checkpoint",
            ck.to_str().unwrap(),
            "--index",
            "3",
        ],
    );
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["cycles_crossbar"], 1);
    assert_eq!(v["cycles_gpu"], 100000);
    assert_eq!(v["speedup"], 100000.0);
    let p = &v["predictions"][0];
    assert_eq!(p["index"], 3);
    assert_eq!(p["class"], p["oracle_class"]);
    assert_eq!(p["activations"].as_array().unwrap().len(), 10);

    let out = run(
        &e,
        &[
            "infer",
            "--nonideal",
            "off",
            "--checkpoint",
            ck.to_str().unwrap(),
            "--count",
            "20",
        ],
    );
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["cycles_crossbar"], 20);
    assert_eq!(v["cycles_gpu"], 2_000_000);
    for p in v["predictions"].as_array().unwrap() {
        assert_eq!(p["class"], p["oracle_class"]);
    }

    let img = e.data.join("t10k-images-idx3-ubyte");
    let out = run(
        &e,
        &[
            "infer",
            "--checkpoint",
            ck.to_str().unwrap(),
            "--image",
            img.to_str().unwrap(),
        ],
    );
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["cycles_crossbar"], 50);
}

#[test]
fn export_vtc_shape() {
    let e = env();
    ok(&run(&e, &["export-vtc", "--out", "vtc", "--points", "101"]));
    let text = fs::read_to_string(e.root.join("vtc/vtc.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("v_in,v_out"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[0].0, 0.0);
    assert_eq!(rows[100].0, 0.8);
    assert!(rows.windows(2).all(|w| w[1].1 <= w[0].1));
    assert!((rows[50].0 - 0.4).abs() < 1e-15);
    assert!((rows[50].1 - 0.4).abs() < 1e-12);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let e = env();
    let out = run(
        &e,
        &[
            "sweep",
            "--out",
            "sw",
            "--epochs",
            "1",
            "--param",
            "train.delta_b",
            "--values",
            "-0.1,0,0.1",
        ],
    );
    ok(&out);
    let text = fs::read_to_string(e.root.join("sw/sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "param,value,oracle_test_acc,crossbar_test_acc,gap");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("train.delta_b,-0.1,"));
    assert!(lines[3].starts_with("train.delta_b,0.1,"));
    for row in &lines[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 5);
        for f in &fields[2..] {
            assert!(f.parse::<f64>().unwrap().is_finite());
        }
    }
    assert!(e.root.join("sw/train.delta_b=-0.1/report.json").is_file());
}

#[test]
fn single_value_sweep_matches_train() {
    let e = env();
    ok(&run(
        &e,
        &[
            "sweep",
            "--out",
            "sw",
            "--epochs",
            "2",
            "--param",
            "circuit.read_voltage",
            "--values",
            "0.1",
        ],
    ));
    ok(&run(&e, &["train", "--out", "tr", "--epochs", "2"]));
    for f in ["metrics_oracle.csv", "metrics_crossbar.csv", "checkpoint.json"] {
        assert_eq!(
            fs::read(e.root.join("sw/circuit.read_voltage=0.1").join(f)).unwrap(),
            fs::read(e.root.join("tr").join(f)).unwrap()
        );
    }
}

#[test]
fn report_bookkeeping() {
    let e = env();
    let out = run(&e, &["report", "--out", "hw"]);
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["programming_cycles"], 26);
    assert_eq!(v["inference_cycles_per_image"], 1);
    assert_eq!(v["speedup"]["speedup"], 100000.0);
    assert_eq!(v["power_area"]["total_power"].as_f64().unwrap(), 26.0 * 64e-6);
    assert!(e.root.join("hw/hardware.json").is_file());
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn exit_codes_by_failure_kind() {
    let e = env();
    // Usage error from argument parsing.
    assert_eq!(code(&run(&e, &["train", "--epochs", "many"])), 2);
    // Config errors.
    assert_eq!(code(&run(&e, &["train", "--set", "device.bogus=1"])), 3);
    let bad = e.root.join("bad.toml");
    fs::write(&bad, "train.epochs = [").unwrap();
    assert_eq!(code(&run(&e, &["train", "--config", bad.to_str().unwrap()])), 3);
    assert_eq!(code(&run(&e, &["export-vtc", "--points", "1"])), 3);
    assert_eq!(code(&run(&e, &["export-vtc", "--from", "0.8", "--to", "0.1"])), 3);
    assert_eq!(code(&run(&e, &["sweep", "--param", "nope", "--values", "1"])), 3);
    // Data errors.
    let out = Command::new(BIN)
        .args(["train", "--epochs", "1", "--data", "missing-dir"])
        .current_dir(&e.root)
        .output()
        .unwrap();
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let corrupt = e.root.join("corrupt.json");
    fs::write(&corrupt, "{\"schema_version\": 1}").unwrap();
    assert_eq!(code(&run(&e, &["infer", "--checkpoint", corrupt.to_str().unwrap()])), 4);
    fs::write(e.data.join("t10k-labels-idx1-ubyte"), [0u8, 0, 8, 1, 0, 0, 0, 9]).unwrap();
    assert_eq!(code(&run(&e, &["train", "--epochs", "1"])), 4);
}
