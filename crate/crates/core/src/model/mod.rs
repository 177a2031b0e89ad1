//! Encoder-predictor network: stacked LSTMs over element rows produce one
//! embedding per step; stacked LSTMs over the step stream predict times.

mod adam;
mod metrics;
mod network;
mod train;

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use adam::{clip_global_norm, clip_norm, Adam};
pub use metrics::{loss_ls, observed_spread, target_level_r2};
pub use network::{predict_sequence, prepare_rows, sequence_loss_node, ParamNodes, PredictionResult, SequenceOutputs};
pub use train::{train, train_with, EpochReport, TrainConfig, TrainReport, TrainingExample};

use crate::error::{Error, Result};
use crate::features::{FEATURE_WIDTH, TAIL_WIDTH};
use crate::scalar::Real;
use crate::seed;

pub const ENCODER_CELLS: usize = 23;
pub const PREDICTOR_CELLS: usize = 30;
pub const LSTM_LAYERS: usize = 2;
pub const FF_UNITS: usize = 28;
pub const PREDICTOR_INPUT: usize = ENCODER_CELLS + TAIL_WIDTH;
pub const EMBEDDING_DROPOUT: f64 = 0.1;
pub const FF_DROPOUT: f64 = 0.4;
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Gates stacked as input, forget, candidate, output; `w` is `4H × (I + H)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
pub struct LstmLayer<T> {
    pub input: usize,
    pub hidden: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
pub struct Dense<T> {
    pub input: usize,
    pub output: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
}

fn uniform<T: Real>(rng: &mut impl Rng, n: usize, fan_in: usize) -> Vec<T> {
    let k = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| T::lit(rng.random_range(-k..=k))).collect()
}

impl<T: Real> LstmLayer<T> {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let fan_in = input + hidden;
        Self { input, hidden, w: uniform(rng, 4 * hidden * fan_in, fan_in), b: uniform(rng, 4 * hidden, fan_in) }
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.w.len() != 4 * self.hidden * (self.input + self.hidden) || self.b.len() != 4 * self.hidden {
            return Err(Error::ModelShape(format!("{name}: tensor sizes do not match {}x{}", self.input, self.hidden)));
        }
        Ok(())
    }
}

impl<T: Real> Dense<T> {
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self { input, output, w: uniform(rng, input * output, input), b: uniform(rng, output, input) }
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.w.len() != self.input * self.output || self.b.len() != self.output {
            return Err(Error::ModelShape(format!("{name}: tensor sizes do not match {}x{}", self.input, self.output)));
        }
        Ok(())
    }
}

/// Affine map from the head's raw output to milliseconds per step, fitted
/// to the training observations so the network works near unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputScale {
    pub offset: f64,
    pub scale: f64,
}

impl Default for OutputScale {
    fn default() -> Self {
        Self { offset: 0.0, scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutRates {
    pub embedding: f64,
    pub feed_forward: f64,
}

impl Default for DropoutRates {
    fn default() -> Self {
        Self { embedding: EMBEDDING_DROPOUT, feed_forward: FF_DROPOUT }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
pub struct ModelParams<T> {
    pub encoder: Vec<LstmLayer<T>>,
    pub predictor: Vec<LstmLayer<T>>,
    pub feed_forward: Dense<T>,
    pub head: Dense<T>,
    pub output: OutputScale,
    pub dropout: DropoutRates,
}

/// Layer sizes recorded next to the weights so a file with a different
/// architecture is refused on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeManifest {
    pub encoder_input: usize,
    pub encoder_cells: usize,
    pub encoder_layers: usize,
    pub predictor_input: usize,
    pub predictor_cells: usize,
    pub predictor_layers: usize,
    pub feed_forward_units: usize,
}

impl ShapeManifest {
    pub const STANDARD: ShapeManifest = ShapeManifest {
        encoder_input: FEATURE_WIDTH,
        encoder_cells: ENCODER_CELLS,
        encoder_layers: LSTM_LAYERS,
        predictor_input: PREDICTOR_INPUT,
        predictor_cells: PREDICTOR_CELLS,
        predictor_layers: LSTM_LAYERS,
        feed_forward_units: FF_UNITS,
    };
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Serialize + DeserializeOwned")]
struct ModelFile<T> {
    version: u32,
    shape: ShapeManifest,
    params: ModelParams<T>,
}

impl<T: Real> ModelParams<T> {
    /// Seeded uniform initialization in `±1/√fan_in`.
    pub fn init(seed: u64) -> Self {
        Self::with_shape(ShapeManifest::STANDARD, seed)
    }

    pub fn with_shape(shape: ShapeManifest, seed: u64) -> Self {
        let mut rng = seed::rng(seed, "model-init", 0);
        let stack = |input: usize, cells: usize, layers: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            (0..layers).map(|l| LstmLayer::new(if l == 0 { input } else { cells }, cells, rng)).collect::<Vec<_>>()
        };
        let encoder = stack(shape.encoder_input, shape.encoder_cells, shape.encoder_layers, &mut rng);
        let predictor = stack(shape.predictor_input, shape.predictor_cells, shape.predictor_layers, &mut rng);
        let feed_forward = Dense::new(shape.predictor_cells, shape.feed_forward_units, &mut rng);
        let head = Dense::new(shape.feed_forward_units, 1, &mut rng);
        Self { encoder, predictor, feed_forward, head, output: OutputScale::default(), dropout: DropoutRates::default() }
    }

    pub fn shape(&self) -> ShapeManifest {
        ShapeManifest {
            encoder_input: self.encoder.first().map_or(0, |l| l.input),
            encoder_cells: self.encoder.first().map_or(0, |l| l.hidden),
            encoder_layers: self.encoder.len(),
            predictor_input: self.predictor.first().map_or(0, |l| l.input),
            predictor_cells: self.predictor.first().map_or(0, |l| l.hidden),
            predictor_layers: self.predictor.len(),
            feed_forward_units: self.feed_forward.output,
        }
    }

    /// Checks internal consistency of every tensor against the layer sizes.
    pub fn validate(&self) -> Result<()> {
        let s = self.shape();
        if s.encoder_layers == 0 || s.predictor_layers == 0 {
            return Err(Error::ModelShape("empty LSTM stack".into()));
        }
        if s.predictor_input != s.encoder_cells + TAIL_WIDTH {
            return Err(Error::ModelShape("predictor input must be embedding + task tail".into()));
        }
        for (i, l) in self.encoder.iter().enumerate() {
            l.check(&format!("encoder[{i}]"))?;
            if i > 0 && (l.input != s.encoder_cells || l.hidden != s.encoder_cells) {
                return Err(Error::ModelShape(format!("encoder[{i}] size")));
            }
        }
        for (i, l) in self.predictor.iter().enumerate() {
            l.check(&format!("predictor[{i}]"))?;
            if i > 0 && (l.input != s.predictor_cells || l.hidden != s.predictor_cells) {
                return Err(Error::ModelShape(format!("predictor[{i}] size")));
            }
        }
        self.feed_forward.check("feed_forward")?;
        self.head.check("head")?;
        if self.feed_forward.input != s.predictor_cells || self.head.input != self.feed_forward.output || self.head.output != 1 {
            return Err(Error::ModelShape("feed-forward/head sizes".into()));
        }
        Ok(())
    }

    /// Trainable tensors in a fixed order.
    pub fn tensors(&self) -> Vec<&Vec<T>> {
        let mut out = Vec::new();
        for l in self.encoder.iter().chain(&self.predictor) {
            out.push(&l.w);
            out.push(&l.b);
        }
        out.extend([&self.feed_forward.w, &self.feed_forward.b, &self.head.w, &self.head.b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for l in self.encoder.iter_mut().chain(self.predictor.iter_mut()) {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        out.push(&mut self.feed_forward.w);
        out.push(&mut self.feed_forward.b);
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }

    pub fn n_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Converts every weight to another scalar type.
    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::lit(x.as_f64())).collect::<Vec<U>>();
        let lstm = |l: &LstmLayer<T>| LstmLayer { input: l.input, hidden: l.hidden, w: conv(&l.w), b: conv(&l.b) };
        let dense = |d: &Dense<T>| Dense { input: d.input, output: d.output, w: conv(&d.w), b: conv(&d.b) };
        ModelParams {
            encoder: self.encoder.iter().map(lstm).collect(),
            predictor: self.predictor.iter().map(lstm).collect(),
            feed_forward: dense(&self.feed_forward),
            head: dense(&self.head),
            output: self.output,
            dropout: self.dropout,
        }
    }
}

impl<T: Real + Serialize + DeserializeOwned> ModelParams<T> {
    pub fn to_json(&self) -> String {
        let file = ModelFile { version: MODEL_FORMAT_VERSION, shape: self.shape(), params: self.clone() };
        serde_json::to_string(&file).expect("model serializes")
    }

    /// Parses a model file, refusing other format versions and any
    /// architecture other than the standard one.
    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
            shape: ShapeManifest,
        }
        let header: Header = serde_json::from_str(s)?;
        if header.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(header.version));
        }
        if header.shape != ShapeManifest::STANDARD {
            return Err(Error::ModelShape(format!("file declares {:?}", header.shape)));
        }
        let file: ModelFile<T> = serde_json::from_str(s)?;
        if file.params.shape() != header.shape {
            return Err(Error::ModelShape("weights disagree with declared shape".into()));
        }
        file.params.validate()?;
        Ok(file.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
