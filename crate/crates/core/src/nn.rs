//! Dense feed-forward classifiers, written from scratch.
//!
//! Three architectures are supported:
//! - `A`: input -> 1 sigmoid unit (a logistic model),
//! - `B`: input -> hidden (ReLU) -> 1 sigmoid, hidden = half the input width,
//! - `C`: like `B` with inverted dropout on the inputs of the hidden and the
//!   output layer during training.
//!
//! Training is plain mini-batch gradient descent on binary cross-entropy.
//! Everything is deterministic given the seeds: weight init, epoch shuffles,
//! and dropout masks all come from `ChaCha8` streams, so retraining with the
//! same inputs reproduces the weights bit for bit.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{apply_normalizer, extract_features, FeatureError, FeatureSetSpec, Normalizer};
use crate::dataset::Dataset;
use crate::trace::RunTrace;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dropout rate {0} outside [0, 1) or set on an architecture without dropout")]
    BadDropout(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("model/dataset spec mismatch: {detail}")]
    SpecMismatch { detail: String },
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error("model file has schema version {found}, expected {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model file: {detail}")]
    CorruptModel { detail: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The three model architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArchId {
    A,
    B,
    C,
}

impl std::fmt::Display for ArchId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ArchId::A => "A",
            ArchId::B => "B",
            ArchId::C => "C",
        })
    }
}

impl std::str::FromStr for ArchId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(ArchId::A),
            "B" | "b" => Ok(ArchId::B),
            "C" | "c" => Ok(ArchId::C),
            other => Err(format!("unknown architecture `{other}` (expected A, B, or C)")),
        }
    }
}

/// Hidden-layer width: half the input width, rounded up.
pub fn hidden_width(input_dim: usize) -> usize {
    input_dim.div_ceil(2)
}

/// One dense layer; `weights[out][in]`, one bias per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    #[serde(rename = "W")]
    pub weights: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    pub bias: Vec<f64>,
}

impl Layer {
    fn out_dim(&self) -> usize {
        self.weights.len()
    }

    fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

/// Weights plus the architecture they instantiate.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: ArchId,
    pub input_dim: usize,
    /// Inverted-dropout rate; nonzero only for architecture C.
    pub dropout_rate: f64,
    pub layers: Vec<Layer>,
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Fit a z-score normalizer on the training set (on unless the data is
    /// already normalized).
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 8,
            learning_rate: 0.05,
            seed: 0,
            normalize: true,
        }
    }
}

/// A trained model bundled with everything prediction needs: the fitted
/// normalizer and the feature spec its inputs were built with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub normalizer: Normalizer,
    pub spec: FeatureSetSpec,
    pub history: Vec<EpochStats>,
}

fn layer_dims(arch: ArchId, input_dim: usize) -> Vec<(usize, usize)> {
    match arch {
        ArchId::A => vec![(input_dim, 1)],
        ArchId::B | ArchId::C => {
            let hidden = hidden_width(input_dim);
            vec![(input_dim, hidden), (hidden, 1)]
        }
    }
}

/// Build a model with seeded uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`
/// and zero biases. The seed fully determines the weights.
pub fn build_model(arch: ArchId, input_dim: usize, dropout_rate: f64, seed: u64) -> Result<Model, NnError> {
    if input_dim == 0 {
        return Err(NnError::DimensionMismatch { expected: 1, got: 0 });
    }
    let dropout_ok = (0.0..1.0).contains(&dropout_rate)
        && (arch == ArchId::C || dropout_rate == 0.0);
    if !dropout_ok {
        return Err(NnError::BadDropout(dropout_rate));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_dims(arch, input_dim)
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_out)
                .map(|_| (0..fan_in).map(|_| rng.gen_range(-bound..=bound)).collect())
                .collect();
            Layer { weights, bias: vec![0.0; fan_out] }
        })
        .collect();
    Ok(Model { arch, input_dim, dropout_rate, layers })
}

fn sigmoid(z: f64) -> f64 {
    // Clamp keeps the output strictly inside (0, 1).
    let z = z.clamp(-40.0, 40.0);
    1.0 / (1.0 + (-z).exp())
}

/// Binary cross-entropy of a predicted probability against a hard label.
pub fn bce_loss(p: f64, y: u8) -> f64 {
    const EPS: f64 = 1e-12;
    let p = p.clamp(EPS, 1.0 - EPS);
    let y = f64::from(y);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Per-layer input scale factors for one training pass: a dropped component
/// carries 0, a surviving one `1/(1-p)`. `None` means no dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub scales: Vec<Vec<f64>>,
}

/// Draw fresh inverted-dropout masks for one training example.
/// Only architecture C with a nonzero rate produces masks.
pub fn sample_masks<R: Rng>(model: &Model, rng: &mut R) -> Option<DropoutMasks> {
    if model.arch != ArchId::C || model.dropout_rate == 0.0 {
        return None;
    }
    let p = model.dropout_rate;
    let keep_scale = 1.0 / (1.0 - p);
    let scales = model
        .layers
        .iter()
        .map(|layer| {
            (0..layer.in_dim())
                .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep_scale })
                .collect()
        })
        .collect();
    Some(DropoutMasks { scales })
}

struct ForwardCache {
    /// Input actually fed to each layer (after mask scaling).
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    zs: Vec<Vec<f64>>,
    prob: f64,
}

fn forward_cached(model: &Model, x: &[f64], masks: Option<&DropoutMasks>) -> Result<ForwardCache, NnError> {
    if x.len() != model.input_dim {
        return Err(NnError::DimensionMismatch { expected: model.input_dim, got: x.len() });
    }
    let n_layers = model.layers.len();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut zs = Vec::with_capacity(n_layers);
    let mut current: Vec<f64> = x.to_vec();
    for (l, layer) in model.layers.iter().enumerate() {
        if let Some(masks) = masks {
            for (v, scale) in current.iter_mut().zip(&masks.scales[l]) {
                *v *= scale;
            }
        }
        let z: Vec<f64> = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(row, b)| b + row.iter().zip(&current).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        let last = l + 1 == n_layers;
        let next = if last {
            vec![sigmoid(z[0])]
        } else {
            z.iter().map(|&v| v.max(0.0)).collect()
        };
        layer_inputs.push(current);
        zs.push(z);
        current = next;
    }
    Ok(ForwardCache { layer_inputs, zs, prob: current[0] })
}

/// Forward with explicit masks (`None` disables dropout). The deterministic
/// core that training, inference, and the gradient checks all share.
pub fn forward_masked(model: &Model, x: &[f64], masks: Option<&DropoutMasks>) -> Result<f64, NnError> {
    Ok(forward_cached(model, x, masks)?.prob)
}

/// Whether a pass is a training pass (dropout active) or inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Forward pass. `Infer` is deterministic and never touches the RNG; `Train`
/// draws dropout masks for architecture C.
pub fn forward<R: Rng>(model: &Model, x: &[f64], mode: Mode, rng: &mut R) -> Result<f64, NnError> {
    let masks = match mode {
        Mode::Train => sample_masks(model, rng),
        Mode::Infer => None,
    };
    forward_masked(model, x, masks.as_ref())
}

/// Gradients of the loss with respect to every weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    fn zeros(model: &Model) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| Layer {
                    weights: vec![vec![0.0; l.in_dim()]; l.out_dim()],
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for row in &mut layer.weights {
                for w in row {
                    *w *= factor;
                }
            }
            for b in &mut layer.bias {
                *b *= factor;
            }
        }
    }
}

fn accumulate_example(
    model: &Model,
    grads: &mut Gradients,
    x: &[f64],
    y: u8,
    masks: Option<&DropoutMasks>,
) -> Result<f64, NnError> {
    let cache = forward_cached(model, x, masks)?;
    // d(bce)/dz at the sigmoid output.
    let mut delta = vec![cache.prob - f64::from(y)];
    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let input = &cache.layer_inputs[l];
        let grad = &mut grads.layers[l];
        for (j, &d) in delta.iter().enumerate() {
            grad.bias[j] += d;
            for (i, &v) in input.iter().enumerate() {
                grad.weights[j][i] += d * v;
            }
        }
        if l == 0 {
            break;
        }
        // dL/d(masked input) = W^T delta, then back through the mask scale
        // and the previous layer's ReLU.
        let mut d_input = vec![0.0; layer.in_dim()];
        for (j, &d) in delta.iter().enumerate() {
            for (i, w) in layer.weights[j].iter().enumerate() {
                d_input[i] += w * d;
            }
        }
        if let Some(masks) = masks {
            for (d, scale) in d_input.iter_mut().zip(&masks.scales[l]) {
                *d *= scale;
            }
        }
        let prev_z = &cache.zs[l - 1];
        delta = d_input
            .iter()
            .zip(prev_z)
            .map(|(d, &z)| if z > 0.0 { *d } else { 0.0 })
            .collect();
    }
    Ok(cache.prob)
}

/// Loss gradient of a single example under fixed masks. Exposed so the
/// finite-difference checks can freeze the dropout pattern.
pub fn gradients_masked(
    model: &Model,
    x: &[f64],
    y: u8,
    masks: Option<&DropoutMasks>,
) -> Result<Gradients, NnError> {
    let mut grads = Gradients::zeros(model);
    accumulate_example(model, &mut grads, x, y, masks)?;
    Ok(grads)
}

/// Mean gradient over a batch; architecture C draws one fresh mask per
/// example, the same mask the paired forward pass used.
pub fn batch_gradients<R: Rng>(
    model: &Model,
    batch: &[(&[f64], u8)],
    rng: &mut R,
) -> Result<Gradients, NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut grads = Gradients::zeros(model);
    for (x, y) in batch {
        let masks = sample_masks(model, rng);
        accumulate_example(model, &mut grads, x, *y, masks.as_ref())?;
    }
    grads.scale(1.0 / batch.len() as f64);
    Ok(grads)
}

fn apply_update(model: &mut Model, grads: &Gradients, lr: f64) {
    for (layer, grad) in model.layers.iter_mut().zip(&grads.layers) {
        for (row, grow) in layer.weights.iter_mut().zip(&grad.weights) {
            for (w, g) in row.iter_mut().zip(grow) {
                *w -= lr * g;
            }
        }
        for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * g;
        }
    }
}

fn mean_loss_and_accuracy(model: &Model, features: &[Vec<f64>], labels: &[u8]) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &y) in features.iter().zip(labels) {
        let p = forward_masked(model, x, None).expect("dims checked before training");
        loss += bce_loss(p, y);
        let class = u8::from(p >= 0.5);
        correct += usize::from(class == y);
    }
    let n = features.len() as f64;
    (loss / n, correct as f64 / n)
}

/// Train with mini-batch gradient descent.
///
/// A z-score normalizer is fitted on this training set (unless disabled or
/// the data is already normalized) and stored in the result, so prediction
/// is self-contained. History records the post-epoch mean loss and accuracy
/// over the training set, dropout off.
pub fn train(model: &Model, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel, NnError> {
    if ds.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let feature_len = ds.spec.feature_len();
    if feature_len != model.input_dim {
        return Err(NnError::SpecMismatch {
            detail: format!(
                "dataset yields {feature_len} features but model takes {}",
                model.input_dim
            ),
        });
    }
    if cfg.batch_size == 0 || cfg.batch_size > ds.len() {
        return Err(NnError::BadConfig(format!(
            "batch size {} must be in 1..={}",
            cfg.batch_size,
            ds.len()
        )));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(NnError::BadConfig(format!("learning rate {} must be > 0", cfg.learning_rate)));
    }

    let normalizer = if ds.normalized || !cfg.normalize {
        Normalizer::identity(feature_len)
    } else {
        let raw: Vec<_> = ds.examples.iter().map(|e| e.features.clone()).collect();
        fit_normalizer_checked(&raw)?
    };
    let features: Vec<Vec<f64>> = ds
        .examples
        .iter()
        .map(|e| apply_normalizer(&normalizer, &e.features))
        .collect::<Result<_, _>>()?;
    let labels: Vec<u8> = ds.examples.iter().map(|e| e.label).collect();

    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], u8)> = chunk
                .iter()
                .map(|&i| (features[i].as_slice(), labels[i]))
                .collect();
            let grads = batch_gradients(&model, &batch, &mut rng)?;
            apply_update(&mut model, &grads, cfg.learning_rate);
        }
        let (loss, train_acc) = mean_loss_and_accuracy(&model, &features, &labels);
        history.push(EpochStats { epoch, loss, train_acc });
    }
    Ok(TrainedModel { model, normalizer, spec: ds.spec, history })
}

fn fit_normalizer_checked(raw: &[Vec<f64>]) -> Result<Normalizer, NnError> {
    crate::features::fit_normalizer(raw).map_err(NnError::from)
}

/// Classify one run from its first K iterations: extract features per the
/// stored spec, normalize, forward in inference mode. Ties at the threshold
/// go to class 1.
pub fn predict(tm: &TrainedModel, trace: &RunTrace, threshold: f64) -> Result<(u8, f64), NnError> {
    let raw = extract_features(trace, &tm.spec)?;
    let x = apply_normalizer(&tm.normalizer, &raw)?;
    let p = forward_masked(&tm.model, &x, None)?;
    Ok((u8::from(p >= threshold), p))
}

/// On-disk model schema (JSON).
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    arch_id: ArchId,
    input_dim: usize,
    dropout_rate: f64,
    layers: Vec<Layer>,
    normalizer: Normalizer,
    spec: FeatureSetSpec,
    history: Vec<EpochStats>,
}

/// Serialize a trained model to its JSON schema. Weights keep their shortest
/// round-trip decimal form, so values reload bit for bit.
pub fn model_to_json(tm: &TrainedModel) -> String {
    let file = ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        arch_id: tm.model.arch,
        input_dim: tm.model.input_dim,
        dropout_rate: tm.model.dropout_rate,
        layers: tm.model.layers.clone(),
        normalizer: tm.normalizer.clone(),
        spec: tm.spec,
        history: tm.history.clone(),
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

/// Parse and validate a model from its JSON schema.
pub fn model_from_json(text: &str) -> Result<TrainedModel, NnError> {
    let raw: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| NnError::CorruptModel { detail: e.to_string() })?;
    let version = raw
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| NnError::CorruptModel { detail: "missing schema_version".into() })?;
    if version != u64::from(MODEL_SCHEMA_VERSION) {
        return Err(NnError::SchemaVersionMismatch {
            found: version as u32,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(raw)
        .map_err(|e| NnError::CorruptModel { detail: e.to_string() })?;

    let dims = layer_dims(file.arch_id, file.input_dim);
    if file.layers.len() != dims.len() {
        return Err(NnError::CorruptModel {
            detail: format!(
                "architecture {} expects {} layers, file has {}",
                file.arch_id,
                dims.len(),
                file.layers.len()
            ),
        });
    }
    let mut expected_in = file.input_dim;
    for (idx, layer) in file.layers.iter().enumerate() {
        if layer.out_dim() == 0 || layer.bias.len() != layer.out_dim() {
            return Err(NnError::CorruptModel { detail: format!("layer {idx} has inconsistent bias") });
        }
        for row in &layer.weights {
            if row.len() != expected_in {
                return Err(NnError::CorruptModel {
                    detail: format!("layer {idx} expects fan-in {expected_in}, row has {}", row.len()),
                });
            }
        }
        expected_in = layer.out_dim();
    }
    if expected_in != 1 {
        return Err(NnError::CorruptModel { detail: "output layer must have one unit".into() });
    }
    let dropout_ok = (0.0..1.0).contains(&file.dropout_rate)
        && (file.arch_id == ArchId::C || file.dropout_rate == 0.0);
    if !dropout_ok {
        return Err(NnError::BadDropout(file.dropout_rate));
    }
    if file.normalizer.dim() != file.input_dim || file.normalizer.std.len() != file.input_dim {
        return Err(NnError::CorruptModel { detail: "normalizer dimension != input_dim".into() });
    }
    if file.spec.feature_len() != file.input_dim {
        return Err(NnError::CorruptModel {
            detail: format!(
                "spec yields {} features but input_dim is {}",
                file.spec.feature_len(),
                file.input_dim
            ),
        });
    }
    Ok(TrainedModel {
        model: Model {
            arch: file.arch_id,
            input_dim: file.input_dim,
            dropout_rate: file.dropout_rate,
            layers: file.layers,
        },
        normalizer: file.normalizer,
        spec: file.spec,
        history: file.history,
    })
}

pub fn save_model(tm: &TrainedModel, path: impl AsRef<std::path::Path>) -> Result<(), NnError> {
    std::fs::write(path, model_to_json(tm))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<std::path::Path>) -> Result<TrainedModel, NnError> {
    model_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledExample;
    use crate::features::FeatureSet;

    fn toy_dataset(points: Vec<(Vec<f64>, u8)>) -> Dataset {
        // A spec is required by the Dataset type; use sentinel-sized set1/K=1
        // only when the feature length happens to be 6. For arbitrary widths
        // the tests below build matching specs.
        let len = points[0].0.len();
        let spec = match len {
            6 => FeatureSetSpec::new(FeatureSet::Set1, 1),
            12 => FeatureSetSpec::new(FeatureSet::Set1, 2),
            _ => panic!("toy_dataset supports 6- or 12-wide features"),
        };
        Dataset {
            examples: points
                .into_iter()
                .enumerate()
                .map(|(i, (features, label))| LabeledExample {
                    features,
                    label,
                    run_id: format!("t{i}"),
                })
                .collect(),
            spec,
            normalized: true,
        }
    }

    #[test]
    fn architecture_shapes() {
        let b12 = build_model(ArchId::B, 12, 0.0, 1).unwrap();
        assert_eq!(b12.layers.len(), 2);
        assert_eq!(b12.layers[0].weights.len(), 6);
        assert_eq!(b12.layers[0].weights[0].len(), 12);
        assert_eq!(b12.layers[1].weights.len(), 1);
        assert_eq!(b12.layers[1].weights[0].len(), 6);

        let b14 = build_model(ArchId::B, 14, 0.0, 1).unwrap();
        assert_eq!(b14.layers[0].weights.len(), 7);

        let a12 = build_model(ArchId::A, 12, 0.0, 1).unwrap();
        assert_eq!(a12.layers.len(), 1);
        let scalars: usize = a12.layers[0].weights[0].len() + a12.layers[0].bias.len();
        assert_eq!(scalars, 13);
    }

    #[test]
    fn init_is_within_fan_in_bound_and_seeded() {
        let m1 = build_model(ArchId::B, 12, 0.0, 9).unwrap();
        let m2 = build_model(ArchId::B, 12, 0.0, 9).unwrap();
        assert_eq!(m1, m2);
        let bound = 1.0 / (12.0_f64).sqrt();
        for w in &m1.layers[0].weights {
            assert!(w.iter().all(|v| v.abs() <= bound));
        }
        assert!(m1.layers[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn dropout_validation() {
        assert!(matches!(build_model(ArchId::C, 4, 1.0, 0), Err(NnError::BadDropout(_))));
        assert!(matches!(build_model(ArchId::B, 4, 0.3, 0), Err(NnError::BadDropout(_))));
        assert!(build_model(ArchId::C, 4, 0.3, 0).is_ok());
    }

    #[test]
    fn zero_weights_give_half() {
        let mut model = build_model(ArchId::B, 4, 0.0, 0).unwrap();
        for layer in &mut model.layers {
            for row in &mut layer.weights {
                row.iter_mut().for_each(|w| *w = 0.0);
            }
        }
        let p = forward_masked(&model, &[1.0, -2.0, 3.0, 4.0], None).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn infer_is_deterministic() {
        let model = build_model(ArchId::C, 4, 0.4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = [0.3, -1.0, 2.0, 0.1];
        let p1 = forward(&model, &x, Mode::Infer, &mut rng).unwrap();
        let p2 = forward(&model, &x, Mode::Infer, &mut rng).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn bce_analytic_values() {
        assert!((bce_loss(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce_loss(1.0 - 1e-12, 1) < 1e-9);
        assert!((bce_loss(0.9, 0) - 2.302585092994046).abs() < 1e-12);
        assert!(bce_loss(0.0, 1).is_finite());
    }

    fn finite_difference_check(model: &Model, x: &[f64], y: u8, masks: Option<&DropoutMasks>) {
        let grads = gradients_masked(model, x, y, masks).unwrap();
        let h = 1e-5;
        for l in 0..model.layers.len() {
            let out_dim = model.layers[l].weights.len();
            for j in 0..out_dim {
                for i in 0..model.layers[l].weights[j].len() {
                    let mut plus = model.clone();
                    plus.layers[l].weights[j][i] += h;
                    let mut minus = model.clone();
                    minus.layers[l].weights[j][i] -= h;
                    let numeric = (bce_loss(forward_masked(&plus, x, masks).unwrap(), y)
                        - bce_loss(forward_masked(&minus, x, masks).unwrap(), y))
                        / (2.0 * h);
                    let analytic = grads.layers[l].weights[j][i];
                    assert_gradient_close(analytic, numeric);
                }
                let mut plus = model.clone();
                plus.layers[l].bias[j] += h;
                let mut minus = model.clone();
                minus.layers[l].bias[j] -= h;
                let numeric = (bce_loss(forward_masked(&plus, x, masks).unwrap(), y)
                    - bce_loss(forward_masked(&minus, x, masks).unwrap(), y))
                    / (2.0 * h);
                assert_gradient_close(grads.layers[l].bias[j], numeric);
            }
        }
    }

    fn assert_gradient_close(analytic: f64, numeric: f64) {
        if analytic.abs() < 1e-7 && numeric.abs() < 1e-7 {
            return;
        }
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
        assert!(rel < 1e-4, "analytic={analytic} numeric={numeric} rel={rel}");
    }

    #[test]
    fn hand_sized_gradient_matches_finite_differences() {
        let mut model = build_model(ArchId::A, 2, 0.0, 11).unwrap();
        model.layers[0].bias[0] = 0.2;
        finite_difference_check(&model, &[0.7, -1.3], 1, None);
        finite_difference_check(&model, &[0.7, -1.3], 0, None);
    }

    #[test]
    fn duplicated_example_batch_equals_single_gradient() {
        let model = build_model(ArchId::B, 3, 0.0, 2).unwrap();
        let x = [0.5, -0.25, 1.5];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let single = batch_gradients(&model, &[(&x, 1)], &mut rng).unwrap();
        let double = batch_gradients(&model, &[(&x, 1), (&x, 1)], &mut rng).unwrap();
        for (a, b) in single.layers.iter().zip(&double.layers) {
            for (ra, rb) in a.weights.iter().zip(&b.weights) {
                for (wa, wb) in ra.iter().zip(rb) {
                    assert!((wa - wb).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn arch_c_with_zero_rate_matches_arch_b() {
        let b = build_model(ArchId::B, 6, 0.0, 21).unwrap();
        let c = build_model(ArchId::C, 6, 0.0, 21).unwrap();
        assert_eq!(b.layers, c.layers);

        let points: Vec<(Vec<f64>, u8)> = (0..24)
            .map(|i| {
                let t = i as f64 / 4.0;
                let x = vec![t.sin(), t.cos(), t, -t, t * 0.5, 1.0 - t];
                (x, u8::from(i % 2 == 0))
            })
            .collect();
        let ds = toy_dataset(points);
        let cfg = TrainConfig { epochs: 20, batch_size: 6, learning_rate: 0.3, seed: 4, normalize: false };
        let tb = train(&b, &ds, &cfg).unwrap();
        let tc = train(&c, &ds, &cfg).unwrap();
        assert_eq!(tb.model.layers, tc.model.layers);
        assert_eq!(tb.history, tc.history);
    }

    #[test]
    fn zero_epochs_keeps_initial_weights() {
        let model = build_model(ArchId::A, 6, 0.0, 5).unwrap();
        let ds = toy_dataset(vec![
            (vec![1.0; 6], 1),
            (vec![-1.0; 6], 0),
        ]);
        let cfg = TrainConfig { epochs: 0, batch_size: 2, learning_rate: 0.1, seed: 0, normalize: false };
        let tm = train(&model, &ds, &cfg).unwrap();
        assert_eq!(tm.model, model);
        assert!(tm.history.is_empty());
    }

    #[test]
    fn training_is_reproducible() {
        let model = build_model(ArchId::C, 6, 0.2, 13).unwrap();
        let points: Vec<(Vec<f64>, u8)> = (0..40)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                (vec![sign; 6], u8::from(sign > 0.0))
            })
            .collect();
        let ds = toy_dataset(points);
        let cfg = TrainConfig { epochs: 30, batch_size: 8, learning_rate: 0.2, seed: 77, normalize: false };
        let t1 = train(&model, &ds, &cfg).unwrap();
        let t2 = train(&model, &ds, &cfg).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn separable_toy_set_is_learned() {
        // y = 1 iff x1 + x2 > 0, points kept away from the boundary.
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let mut points = Vec::new();
        while points.len() < 200 {
            let x1: f64 = rng.gen_range(-2.0..2.0);
            let x2: f64 = rng.gen_range(-2.0..2.0);
            if (x1 + x2).abs() < 0.2 {
                continue;
            }
            points.push((vec![x1, x2, 0.0, 0.0, 0.0, 0.0], u8::from(x1 + x2 > 0.0)));
        }
        // Separability certificate: the plane (1, 1, 0...) classifies every
        // generated point correctly.
        for (x, y) in &points {
            assert_eq!(u8::from(x[0] + x[1] > 0.0), *y);
        }
        let ds = toy_dataset(points);
        let model = build_model(ArchId::A, 6, 0.0, 1).unwrap();
        let cfg = TrainConfig { epochs: 200, batch_size: 200, learning_rate: 0.5, seed: 2, normalize: false };
        let tm = train(&model, &ds, &cfg).unwrap();
        assert!(tm.history.last().unwrap().train_acc >= 0.99);
    }

    #[test]
    fn model_json_round_trip() {
        let model = build_model(ArchId::C, 12, 0.2, 3).unwrap();
        let ds_points: Vec<(Vec<f64>, u8)> = (0..20)
            .map(|i| ((0..12).map(|j| (i * j) as f64 / 7.0 - 1.0).collect(), u8::from(i % 2 == 0)))
            .collect();
        let ds = toy_dataset(ds_points);
        let cfg = TrainConfig { epochs: 5, batch_size: 4, learning_rate: 0.1, seed: 1, normalize: false };
        let tm = train(&model, &ds, &cfg).unwrap();
        let json = model_to_json(&tm);
        let back = model_from_json(&json).unwrap();
        assert_eq!(tm, back);
        // Bitwise-equal predictions on a fixture input.
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.37 - 2.0).collect();
        let p1 = forward_masked(&tm.model, &x, None).unwrap();
        let p2 = forward_masked(&back.model, &x, None).unwrap();
        assert_eq!(p1.to_bits(), p2.to_bits());
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let model = build_model(ArchId::A, 6, 0.0, 3).unwrap();
        let tm = TrainedModel {
            model,
            normalizer: Normalizer::identity(6),
            spec: FeatureSetSpec::new(FeatureSet::Set1, 1),
            history: vec![],
        };
        let json = model_to_json(&tm).replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(
            model_from_json(&json),
            Err(NnError::SchemaVersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let model = build_model(ArchId::A, 6, 0.0, 3).unwrap();
        let tm = TrainedModel {
            model,
            normalizer: Normalizer::identity(6),
            spec: FeatureSetSpec::new(FeatureSet::Set1, 1),
            history: vec![],
        };
        let json = model_to_json(&tm);
        let truncated = &json[..json.len() / 2];
        assert!(matches!(model_from_json(truncated), Err(NnError::CorruptModel { .. })));
    }

    #[test]
    fn gradient_check_arch_c_with_frozen_masks() {
        let model = build_model(ArchId::C, 4, 0.5, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let masks = sample_masks(&model, &mut rng).unwrap();
        finite_difference_check(&model, &[0.9, -0.4, 1.1, 0.3], 1, Some(&masks));
    }
}
