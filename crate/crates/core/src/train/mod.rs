//! Hardware-aware teacher-student training.
//!
//! A real-valued teacher holds clipped weights and biases in `[-1, 1]`. Each
//! step snapshots a binarized student from it, runs the student forward and
//! backward, and applies the student's gradients to the teacher. The trained
//! student is what gets written into the crossbar.

mod binarize;
mod network;
mod optim;

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use binarize::{binarize_deterministic, binarize_stochastic, Binarization};
pub use network::{
    backward, batch_loss, forward, forward_batch, loss, loss_from_preactivation, predict, BatchRecord, Gradients,
    Layer, LayerRecord, Network,
};
pub use optim::{Optimizer, OptimizerState};

use crate::analog::Sign;
use crate::arch::MlpPipeline;
use crate::data::{batches, Split, NUM_CLASSES};
use crate::{Error, Result};

const INIT_STREAM: u64 = 0;
const BINARIZE_STREAM: u64 = 1;
/// Epoch `e` shuffles with ChaCha stream `SHUFFLE_STREAM_BASE + e`.
pub(crate) const SHUFFLE_STREAM_BASE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub binarization: Binarization,
    pub delta_b: f64,
    pub rng_seed: u64,
    pub optimizer: Optimizer,
    /// Teacher parameters start uniform in `[-init_range, init_range]`.
    pub init_range: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            epochs: 10,
            batch_size: 100,
            binarization: Binarization::Deterministic,
            delta_b: 0.0,
            rng_seed: 42,
            optimizer: Optimizer::default(),
            init_range: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1"));
        }
        if !self.delta_b.is_finite() {
            return Err(Error::Config("delta_b must be finite"));
        }
        if !(0.0..=1.0).contains(&self.init_range) {
            return Err(Error::Config("init_range must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Real-valued teacher; every entry stays inside `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherNet(Network);

/// Binarized snapshot: every weight and bias is exactly `±1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentView(Network);

impl TeacherNet {
    pub fn init(topology: &[usize], init_range: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        clip_teacher(Network::uniform(topology, init_range, &mut rng))
    }

    pub fn network(&self) -> &Network {
        &self.0
    }

    pub fn into_network(self) -> Network {
        self.0
    }

    pub fn binarize_deterministic(&self, delta_b: f64) -> StudentView {
        StudentView(self.0.map_values(|w| binarize_deterministic(w, delta_b).value()))
    }

    pub fn binarize_stochastic<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> StudentView {
        // The clipping invariant keeps every entry inside the sampler's domain.
        StudentView(self.0.map_values(|w| {
            binarize_stochastic(w, rng)
                .expect("teacher entries are clipped to [-1, 1]")
                .value()
        }))
    }
}

impl AsRef<Network> for TeacherNet {
    fn as_ref(&self) -> &Network {
        &self.0
    }
}

impl StudentView {
    /// Accepts a network only if every entry is exactly `±1`.
    pub fn from_network(net: Network) -> Result<Self> {
        for layer in net.layers() {
            for r in 0..layer.out_nodes() {
                for (c, &value) in layer.weights.row(r).iter().enumerate() {
                    if Sign::from_value(value).is_none() {
                        return Err(Error::NonBinaryWeight { row: r, col: c, value });
                    }
                }
            }
            if let Some((r, &value)) = layer
                .biases
                .iter()
                .enumerate()
                .find(|(_, &b)| Sign::from_value(b).is_none())
            {
                return Err(Error::NonBinaryWeight {
                    row: r,
                    col: layer.in_nodes(),
                    value,
                });
            }
        }
        Ok(Self(net))
    }

    pub fn network(&self) -> &Network {
        &self.0
    }
}

impl AsRef<Network> for StudentView {
    fn as_ref(&self) -> &Network {
        &self.0
    }
}

/// Clamps every weight and bias into `[-1, 1]`.
pub fn clip_teacher(net: Network) -> TeacherNet {
    let mut net = net;
    for v in net.values_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    TeacherNet(net)
}

/// Classification quality of a predictor over a split.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_loss: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

/// Index of the largest activation; ties resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Runs `predict` over every sample; `predict` returns class activations.
pub fn evaluate<F>(split: &Split, mut predict: F) -> Result<Evaluation>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut confusion = vec![vec![0u64; NUM_CLASSES]; NUM_CLASSES];
    let mut correct = 0usize;
    let mut total_loss = 0.0;
    let mut target = vec![0.0; NUM_CLASSES];
    for i in 0..split.len() {
        let o = predict(split.input(i))?;
        if o.len() != NUM_CLASSES {
            return Err(Error::Dimension {
                expected: NUM_CLASSES,
                actual: o.len(),
                context: "class activations",
            });
        }
        let label = split.labels()[i] as usize;
        target[label] = 1.0;
        total_loss += loss(&o, &target);
        target[label] = 0.0;
        let guess = argmax(&o);
        confusion[label][guess] += 1;
        correct += (guess == label) as usize;
    }
    let n = split.len().max(1) as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        mean_loss: total_loss / n,
        confusion,
    })
}

pub fn evaluate_network(net: &Network, split: &Split) -> Result<Evaluation> {
    evaluate(split, |x| predict(net, x))
}

pub fn evaluate_pipeline(pipeline: &MlpPipeline, split: &Split) -> Result<Evaluation> {
    evaluate(split, |x| pipeline.infer(x).map(|(o, _)| o))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metrics {
    pub epochs: Vec<EpochMetrics>,
    pub confusion: Option<Vec<Vec<u64>>>,
}

impl Metrics {
    pub fn final_test_acc(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.test_acc)
    }
}

/// Training state across epochs.
#[derive(Debug, Clone)]
pub struct Trainer {
    teacher: TeacherNet,
    optimizer: OptimizerState,
    config: TrainConfig,
    binarize_rng: ChaCha8Rng,
    epochs_done: u64,
}

impl Trainer {
    pub fn new(topology: &[usize], config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if topology.len() < 2 || topology.contains(&0) {
            return Err(Error::Config("topology needs at least two non-empty layers"));
        }
        Self::from_teacher(TeacherNet::init(topology, config.init_range, config.rng_seed), config)
    }

    pub fn from_teacher(teacher: TeacherNet, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut binarize_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        binarize_rng.set_stream(BINARIZE_STREAM);
        Ok(Self {
            optimizer: OptimizerState::new(config.optimizer, teacher.network()),
            teacher,
            config,
            binarize_rng,
            epochs_done: 0,
        })
    }

    pub fn teacher(&self) -> &TeacherNet {
        &self.teacher
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn epochs_done(&self) -> u64 {
        self.epochs_done
    }

    /// Student for evaluation and deployment: deterministic thresholding at
    /// `delta_b`, whichever scheme is used during training.
    pub fn student(&self) -> StudentView {
        self.teacher.binarize_deterministic(self.config.delta_b)
    }

    fn training_snapshot(&mut self) -> StudentView {
        match self.config.binarization {
            Binarization::Deterministic => self.student(),
            Binarization::Stochastic => self.teacher.binarize_stochastic(&mut self.binarize_rng),
        }
    }

    /// One pass over `train`: snapshot → forward → backward → step → clip per
    /// batch. Returns the mean training loss of the pass.
    pub fn run_epoch(&mut self, train: &Split) -> Result<f64> {
        if train.is_empty() {
            return Err(Error::Config("training split is empty"));
        }
        let mut total = 0.0;
        for batch in batches(train, self.config.batch_size, self.config.rng_seed, self.epochs_done)? {
            let student = self.training_snapshot();
            let records = forward_batch(student.network(), &batch.inputs)?;
            let last = records.last().expect("non-empty topology");
            for b in 0..batch.inputs.rows() {
                total += loss(last.o.row(b), batch.targets.row(b));
            }
            let grads = backward(student.network(), &batch.inputs, &records, &batch.targets)?;
            self.optimizer
                .apply(&mut self.teacher.0, &grads, self.config.learning_rate);
            for v in self.teacher.0.values_mut() {
                *v = v.clamp(-1.0, 1.0);
            }
        }
        self.epochs_done += 1;
        Ok(total / train.len() as f64)
    }

    /// [`Trainer::run_epoch`] followed by student evaluation on both splits.
    pub fn train_epoch(&mut self, train: &Split, test: &Split) -> Result<EpochMetrics> {
        let mean_loss = self.run_epoch(train)?;
        let student = self.student();
        let train_acc = evaluate_network(student.network(), train)?.accuracy;
        let test_acc = evaluate_network(student.network(), test)?.accuracy;
        Ok(EpochMetrics {
            epoch: self.epochs_done as usize,
            train_acc,
            test_acc,
            mean_loss,
        })
    }
}

/// Programs every crossbar layer with the student's weights and biases.
pub fn map_to_crossbar(view: &StudentView, pipeline: &mut MlpPipeline) -> Result<()> {
    let net = view.network();
    let ptop = pipeline.topology();
    let ntop = net.topology();
    if ptop != ntop {
        let at = ptop
            .iter()
            .zip(&ntop)
            .position(|(a, b)| a != b)
            .unwrap_or(ptop.len().min(ntop.len()));
        return Err(Error::Dimension {
            expected: ptop.get(at).copied().unwrap_or(ptop.len()),
            actual: ntop.get(at).copied().unwrap_or(ntop.len()),
            context: "student vs crossbar topology",
        });
    }
    for (i, layer) in net.layers().iter().enumerate() {
        pipeline.program(i, &layer.weights, &layer.biases)?;
    }
    Ok(())
}
