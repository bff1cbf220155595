//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! The MNIST criterion reads the four IDX files from `$SOTNN_DATA_DIR`, or
//! `data/mnist` at the workspace root.

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sotnn::config::ExperimentConfig;
use sotnn::experiment::{build_pipeline, load_dataset, run_training};
use sotnn_core::analog::Sign;
use sotnn_core::arch::{
    power_area_report, MlpPipeline, SpeedupReport, GPU_CYCLES_PER_IMAGE, NEURON_AREA_M2, NEURON_POWER_W,
};
use sotnn_core::data::{parse_idx_images, parse_idx_labels, IdxImages, IdxLabels};
use sotnn_core::device::{base_resistance, resistance, tmr, DeviceParams, MagState, MtjCell};
use sotnn_core::train::{
    argmax, backward, batch_loss, binarize_deterministic, binarize_stochastic, clip_teacher, forward_batch,
    map_to_crossbar, predict, Network, StudentView,
};
use sotnn_core::Matrix;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("SOTNN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn random_student<R: Rng>(topology: &[usize], rng: &mut R) -> StudentView {
    let net = Network::uniform(topology, 1.0, rng).map_values(|v| if v >= 0.0 { 1.0 } else { -1.0 });
    StudentView::from_network(net).unwrap()
}

fn random_inputs<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(0.0..=1.0))
}

fn pipeline(topology: &[usize], read_voltage: f64, nonideal: bool) -> MlpPipeline {
    let cfg = ExperimentConfig {
        topology: topology.to_vec(),
        read_voltage,
        nonideal,
        ..ExperimentConfig::default()
    };
    build_pipeline(&cfg).unwrap()
}

/// Trains the default 784×16×10 network for 10 epochs on full MNIST, then
/// checks the oracle accuracy, the crossbar gap, and argmax agreement of an
/// ideal crossbar on every test image.
fn mnist() -> (Outcome, Outcome) {
    let cfg = ExperimentConfig {
        data_dir: data_dir(),
        crossbar_train: false,
        ..ExperimentConfig::default()
    };
    let data = match load_dataset(&cfg) {
        Ok(d) => d,
        Err(e) => {
            let msg = format!("MNIST unavailable at {}: {e}", cfg.data_dir.display());
            return (Err(msg.clone()), Err(msg));
        }
    };
    let start = Instant::now();
    let outcome = match run_training(&cfg, &data, |_, _| {}) {
        Ok(o) => o,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let secs = start.elapsed().as_secs_f64();
    let sel = outcome.selected.as_ref().unwrap();
    let oracle = sel.oracle.accuracy;
    let crossbar = sel.crossbar.accuracy;
    let gap = (oracle - crossbar).abs();
    let series: Vec<String> = outcome
        .oracle
        .epochs
        .iter()
        .map(|e| format!("{:.4}", e.test_acc))
        .collect();
    let c1 = check(
        oracle >= 0.845 && gap <= 0.015,
        format!(
            "deployed epoch {} oracle test acc {:.2}% (need >= 84.5%), crossbar {:.2}%, gap {:.2} pp (need <= 1.5), {:.0} s; per-epoch oracle [{}]",
            sel.epoch,
            oracle * 100.0,
            crossbar * 100.0,
            gap * 100.0,
            secs,
            series.join(", ")
        ),
    );

    let (_, student, _) = outcome.deployed();
    let mut ideal = pipeline(&cfg.topology, cfg.read_voltage, false);
    map_to_crossbar(&student, &mut ideal).unwrap();
    let (out, _) = ideal.infer_batch(data.test.inputs()).unwrap();
    let mut disagree = 0;
    for i in 0..data.test.len() {
        let o = predict(student.network(), data.test.input(i)).unwrap();
        disagree += (argmax(&o) != argmax(out.row(i))) as usize;
    }
    let c3b = check(
        disagree == 0,
        format!("argmax disagreements {disagree} / {} test images", data.test.len()),
    );
    (c1, c3b)
}

fn device_values() -> Outcome {
    let p = DeviceParams::reference();
    let r_p = resistance(&MtjCell::new(p, MagState::Parallel), 0.0);
    let r_ap = resistance(&MtjCell::new(p, MagState::AntiParallel), 0.0);
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let t = tmr(&p, 0.65);
    check(
        rel(r_p, 8488.3) < 1e-3 && rel(r_ap, 16976.5) < 1e-3 && t == 0.5 && r_p == base_resistance(&p),
        format!("R_P {r_p:.4} ohm, R_AP {r_ap:.4} ohm, TMR(0.65 V) = {t}"),
    )
}

fn analog_equivalence(c3b: Outcome) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n_in = rng.gen_range(1..=64);
        let n_out = rng.gen_range(1..=64);
        let student = random_student(&[n_in, n_out], &mut rng);
        let mut p = pipeline(&[n_in, n_out], 0.1, false);
        map_to_crossbar(&student, &mut p).unwrap();
        let x = random_inputs(1, n_in, &mut rng);
        let (analog, _) = p.infer(x.row(0)).unwrap();
        let ideal = predict(student.network(), x.row(0)).unwrap();
        for (a, i) in analog.iter().zip(&ideal) {
            worst = worst.max((a - i).abs() / i.abs());
        }
    }
    let layers = format!("max relative error {worst:.3e} over 1000 layers (need < 1e-9)");
    match (worst < 1e-9, c3b) {
        (true, Ok(d)) => Ok(format!("{layers}; {d}")),
        (true, Err(d)) | (false, Err(d)) => Err(format!("{layers}; {d}")),
        (false, Ok(d)) => Err(format!("{layers}; {d}")),
    }
}

fn cycle_accounting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let student = random_student(&[784, 16, 10], &mut rng);
    let mut p = pipeline(&[784, 16, 10], 0.1, true);
    map_to_crossbar(&student, &mut p).unwrap();
    let programming = p.counter().training_cycles();
    let mut per_image = Vec::new();
    for _ in 0..5 {
        let x = random_inputs(1, 784, &mut rng);
        let before = p.counter().inference_cycles();
        let (_, charged) = p.infer(x.row(0)).unwrap();
        per_image.push((charged, p.counter().inference_cycles() - before));
    }
    let speedup = SpeedupReport::new(1, GPU_CYCLES_PER_IMAGE);
    let pa = power_area_report(&p, NEURON_POWER_W, NEURON_AREA_M2);
    check(
        programming == 26
            && per_image.iter().all(|&(a, b)| a == 1 && b == 1)
            && speedup.speedup == 1e5
            && pa.neuron_count == 26
            && pa.total_power == 26.0 * NEURON_POWER_W
            && pa.total_area == 26.0 * NEURON_AREA_M2,
        format!(
            "programming {programming} cycles, per-inference {per_image:?}, speedup {}, power {:.3e} W, area {:.3e} m^2",
            speedup.speedup, pa.total_power, pa.total_area
        ),
    )
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-4;
    let floor = 1e-8;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let net = Network::uniform(&[4, 3, 2], 1.0, &mut rng);
        let x = random_inputs(6, 4, &mut rng);
        let t = Matrix::from_fn(6, 2, |_, _| rng.gen_range(0.0..=1.0));
        let records = forward_batch(&net, &x).unwrap();
        let grads = backward(&net, &x, &records, &t).unwrap();
        for (k, &g) in grads.values().enumerate() {
            let shift = |d: f64| {
                let mut i = 0;
                net.map_values(|v| {
                    let out = if i == k { v + d } else { v };
                    i += 1;
                    out
                })
            };
            let fd = (batch_loss(&shift(h), &x, &t).unwrap() - batch_loss(&shift(-h), &x, &t).unwrap()) / (2.0 * h);
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(floor));
        }
    }
    check(
        worst < 1e-4,
        format!("max relative error {worst:.3e} over 10 nets of 4x3x2 (need < 1e-4)"),
    )
}

fn binarization() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for delta in [-0.3, 0.0, 0.25] {
        ok &= binarize_deterministic(delta, delta) == Sign::Plus;
        ok &= binarize_deterministic(delta - 1e-12, delta) == Sign::Minus;
    }
    for s in [-1.0, 1.0] {
        let once = binarize_deterministic(s, 0.0).value();
        ok &= once == s && binarize_deterministic(once, 0.0).value() == once;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let net = Network::uniform(&[5, 4, 3], 3.0, &mut rng);
    let once = clip_teacher(net).into_network();
    let twice = clip_teacher(once.clone()).into_network();
    ok &= once == twice && once.values().all(|v| (-1.0..=1.0).contains(v));
    notes.push(format!(
        "deterministic boundary/idempotence/clip {}",
        if ok { "ok" } else { "broken" }
    ));

    let n = 10_000;
    for w in [-0.9, -0.5, 0.0, 0.3, 0.8] {
        let p: f64 = ((w + 1.0) / 2.0f64).clamp(0.0, 1.0);
        let plus = (0..n)
            .filter(|_| binarize_stochastic(w, &mut rng).unwrap() == Sign::Plus)
            .count() as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        let z = (plus - n as f64 * p) / sigma;
        ok &= z.abs() <= 3.0;
        notes.push(format!("w={w}: {plus} (z={z:+.2})"));
    }
    check(ok, notes.join(", "))
}

fn nonideality() -> Outcome {
    let voltages = [0.4, 0.2, 0.1, 0.05];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases: Vec<(StudentView, Matrix)> = (0..20)
        .map(|_| (random_student(&[64, 16, 10], &mut rng), random_inputs(20, 64, &mut rng)))
        .collect();
    let mut devs = Vec::new();
    for &v in &voltages {
        let mut worst = 0.0f64;
        for (student, x) in &cases {
            let mut p = pipeline(&[64, 16, 10], v, true);
            map_to_crossbar(student, &mut p).unwrap();
            for r in 0..x.rows() {
                let (analog, _) = p.infer(x.row(r)).unwrap();
                let ideal = predict(student.network(), x.row(r)).unwrap();
                for (a, i) in analog.iter().zip(&ideal) {
                    worst = worst.max((a - i).abs());
                }
            }
        }
        devs.push(worst);
    }
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);
    let listing: Vec<String> = voltages
        .iter()
        .zip(&devs)
        .map(|(v, d)| format!("{v} V: {d:.3e}"))
        .collect();
    check(monotone, format!("max |analog - oracle| {}", listing.join(", ")))
}

fn idx_robustness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut round_trips = true;
    for _ in 0..50 {
        let (count, rows, cols) = (rng.gen_range(0..20), rng.gen_range(1..30), rng.gen_range(1..30));
        let img = IdxImages {
            count,
            rows,
            cols,
            pixels: (0..count * rows * cols).map(|_| rng.gen()).collect(),
        };
        let bytes = img.to_bytes();
        round_trips &= parse_idx_images(&bytes)
            .map(|p| p == img && p.to_bytes() == bytes)
            .unwrap_or(false);
        let lab = IdxLabels {
            labels: (0..count).map(|_| rng.gen_range(0..10)).collect(),
        };
        let bytes = lab.to_bytes();
        round_trips &= parse_idx_labels(&bytes)
            .map(|p| p == lab && p.to_bytes() == bytes)
            .unwrap_or(false);
    }

    let image_seed = IdxImages {
        count: 3,
        rows: 4,
        cols: 5,
        pixels: (0..60).collect(),
    }
    .to_bytes();
    let label_seed = IdxLabels { labels: vec![1, 7, 9] }.to_bytes();
    let mut panics = 0;
    let quiet = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut errors = 0;
    let mut inconsistent = 0;
    for i in 0..10_000 {
        let images = i % 2 == 0;
        let mut bytes = if images { image_seed.clone() } else { label_seed.clone() };
        let header = if images { 16 } else { 8 };
        for _ in 0..rng.gen_range(1..=4) {
            match rng.gen_range(0..4) {
                0 => bytes[rng.gen_range(0..header)] = rng.gen(),
                1 => {
                    let at = rng.gen_range(0..header);
                    bytes[at] ^= 1 << rng.gen_range(0..8);
                }
                2 => bytes.truncate(rng.gen_range(0..bytes.len())),
                _ => bytes.extend((0..rng.gen_range(1..8)).map(|_| rng.gen::<u8>())),
            }
            if bytes.len() < header {
                break;
            }
        }
        let result = panic::catch_unwind(AssertUnwindSafe(|| {
            if images {
                parse_idx_images(&bytes).map(|p| p.to_bytes() == bytes)
            } else {
                parse_idx_labels(&bytes).map(|p| p.to_bytes() == bytes)
            }
        }));
        match result {
            Err(_) => panics += 1,
            Ok(Err(_)) => errors += 1,
            Ok(Ok(consistent)) => inconsistent += (!consistent) as usize,
        }
    }
    panic::set_hook(quiet);
    check(
        round_trips && panics == 0 && inconsistent == 0,
        format!(
            "round trips {}, 10000 mutated inputs: {errors} typed errors, {} accepted as valid, {panics} panics",
            if round_trips { "bit-exact" } else { "BROKEN" },
            10_000 - errors - panics
        ),
    )
}

fn main() {
    let (c1, c3b) = mnist();
    let results = [
        ("1 MNIST accuracy reproduction", c1),
        ("2 device model values", device_values()),
        ("3 analog/oracle equivalence", analog_equivalence(c3b)),
        ("4 cycle accounting", cycle_accounting()),
        ("5 gradient correctness", gradients()),
        ("6 binarization laws", binarization()),
        ("7 nonideality monotonicity", nonideality()),
        ("8 IDX robustness", idx_robustness()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS criterion {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {name}: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
