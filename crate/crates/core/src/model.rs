//! Multi-scale convolutional graph similarity model.
//!
//! Three GCN layers embed the nodes of both graphs (in canonical BFS order).
//! For every selected scale the two embedding matrices are zero-padded to the
//! same height, multiplied into a node-node interaction matrix and optionally
//! resized to `m × m`. Each scale has its own CNN; their flattened outputs
//! are concatenated and a small dense head with a sigmoid produces the
//! similarity. The mean-embedding dot product baseline shares the GCN part.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{training_pairs, validation_pairs, Corpus, DatasetError, LabelSet, LabeledPair, Split};
use crate::graph::{initial_features, normalized_adjacency, Graph, GraphError, Vocab};
use crate::nn::{AdamConfig, AdamState, NnError, ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("no training pairs")]
    EmptyTrainingSet,
    #[error("loss became non-finite at iteration {0}")]
    DivergenceDetected(usize),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("no label for pair ({0}, {1})")]
    MissingLabel(String, String),
    #[error("model file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Interaction matrices, per-scale CNNs and a dense head.
    GSimCnn,
    /// Sigmoid of the dot product of mean final-layer node embeddings.
    EmbAvg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixMode {
    /// Resize every padded interaction matrix to `resize_m × resize_m`.
    Resize,
    /// Keep the padded `max(N1, N2)²` matrix.
    PadOnly,
}

/// `conv(window, stride, ·, out_channels)` followed by ReLU and
/// `maxpool(pool)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub window: usize,
    pub stride: usize,
    pub out_channels: usize,
    pub pool: usize,
}

impl ConvStage {
    pub const fn new(window: usize, stride: usize, out_channels: usize, pool: usize) -> Self {
        ConvStage {
            window,
            stride,
            out_channels,
            pool,
        }
    }
}

/// The five-stage CNN applied to each 10×10 interaction matrix.
pub const DEFAULT_CNN: [ConvStage; 5] = [
    ConvStage::new(6, 1, 16, 2),
    ConvStage::new(6, 1, 32, 2),
    ConvStage::new(5, 1, 64, 2),
    ConvStage::new(5, 1, 128, 3),
    ConvStage::new(5, 1, 128, 3),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Width of the initial node features.
    pub input_dim: usize,
    /// Output widths of the GCN layers.
    pub gcn_dims: Vec<usize>,
    pub resize_m: usize,
    pub cnn: Vec<ConvStage>,
    /// Hidden widths of the dense head followed by the output width 1.
    pub dense_dims: Vec<usize>,
    /// 1-based GCN layers whose embeddings are compared.
    pub scales: Vec<usize>,
    pub matrix_mode: MatrixMode,
    pub init_seed: u64,
}

impl ModelConfig {
    /// Full multi-scale model with resizing.
    pub fn gsimcnn(input_dim: usize) -> ModelConfig {
        ModelConfig {
            kind: ModelKind::GSimCnn,
            input_dim,
            gcn_dims: vec![64, 32, 16],
            resize_m: 10,
            cnn: DEFAULT_CNN.to_vec(),
            dense_dims: vec![32, 1],
            scales: vec![1, 2, 3],
            matrix_mode: MatrixMode::Resize,
            init_seed: 0,
        }
    }

    /// Single scale (last GCN layer) with padding only.
    pub fn l1_pad(input_dim: usize) -> ModelConfig {
        ModelConfig {
            scales: vec![3],
            matrix_mode: MatrixMode::PadOnly,
            ..ModelConfig::gsimcnn(input_dim)
        }
    }

    /// Single scale (last GCN layer) with resizing.
    pub fn l1_resize(input_dim: usize) -> ModelConfig {
        ModelConfig {
            scales: vec![3],
            ..ModelConfig::gsimcnn(input_dim)
        }
    }

    pub fn embavg(input_dim: usize) -> ModelConfig {
        ModelConfig {
            kind: ModelKind::EmbAvg,
            ..ModelConfig::gsimcnn(input_dim)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> ModelConfig {
        self.init_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.input_dim == 0 || self.gcn_dims.is_empty() || self.gcn_dims.contains(&0) {
            return bad(format!("gcn dims {} -> {:?}", self.input_dim, self.gcn_dims));
        }
        if self.kind == ModelKind::EmbAvg {
            return Ok(());
        }
        if self.resize_m == 0 {
            return bad("resize_m must be at least 1".into());
        }
        if self.scales.is_empty() || self.scales.iter().any(|&s| s == 0 || s > self.gcn_dims.len()) {
            return bad(format!("scales {:?}", self.scales));
        }
        if self.cnn.is_empty()
            || self
                .cnn
                .iter()
                .any(|s| s.window == 0 || s.stride == 0 || s.out_channels == 0 || s.pool == 0)
        {
            return bad(format!("cnn stages {:?}", self.cnn));
        }
        if self.dense_dims.last() != Some(&1) || self.dense_dims.contains(&0) {
            return bad(format!("dense head {:?} must end in width 1", self.dense_dims));
        }
        Ok(())
    }

    /// Short method name: `gsimcnn`, `embavg`, `gsimcnn-l1-pad`, ...
    pub fn method_name(&self) -> String {
        if self.kind == ModelKind::EmbAvg {
            return "embavg".into();
        }
        let all: Vec<usize> = (1..=self.gcn_dims.len()).collect();
        let mode = match self.matrix_mode {
            MatrixMode::Resize => "resize",
            MatrixMode::PadOnly => "pad",
        };
        if self.scales == all && self.matrix_mode == MatrixMode::Resize {
            "gsimcnn".into()
        } else if self.scales == [self.gcn_dims.len()] {
            format!("gsimcnn-l1-{mode}")
        } else {
            let scales: Vec<String> = self.scales.iter().map(|s| s.to_string()).collect();
            format!("gsimcnn-s{}-{mode}", scales.join(""))
        }
    }

    /// Spatial size after every conv and pool stage, starting from `input`.
    pub fn spatial_trace(&self, input: usize) -> Vec<usize> {
        let mut trace = vec![input];
        let mut size = input;
        for stage in &self.cnn {
            size = size.div_ceil(stage.stride);
            trace.push(size);
            size = size.div_ceil(stage.pool);
            trace.push(size);
        }
        trace
    }

    /// Width of the concatenated CNN features fed to the dense head. In
    /// pad-only mode the stack is assumed to reduce every matrix to 1×1.
    pub fn feature_width(&self) -> usize {
        let spatial = match self.matrix_mode {
            MatrixMode::Resize => *self.spatial_trace(self.resize_m).last().unwrap(),
            MatrixMode::PadOnly => 1,
        };
        let channels = self.cnn.last().map_or(1, |s| s.out_channels);
        self.scales.len() * channels * spatial * spatial
    }

    /// Largest graph the pad-only CNN stack reduces to a single cell.
    pub fn pad_only_max_nodes(&self) -> usize {
        self.cnn.iter().map(|s| s.stride * s.pool).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    w: ParamId,
    b: ParamId,
}

/// Trainable weights plus their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    gcn: Vec<Layer>,
    /// Per compared scale, one layer per CNN stage.
    cnn: Vec<Vec<Layer>>,
    dense: Vec<Layer>,
}

/// Graph preprocessed for the model: BFS-ordered features and adjacency.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub nodes: usize,
    pub features: Tensor,
    pub adjacency: Tensor,
}

impl PreparedGraph {
    pub fn new(g: &Graph, vocab: &Vocab) -> Result<PreparedGraph, ModelError> {
        let canonical = g.bfs_canonical();
        let n = canonical.node_count();
        let f = initial_features(&canonical, vocab)?;
        Ok(PreparedGraph {
            nodes: n,
            features: Tensor::new(&[f.rows, f.cols], f.values)?,
            adjacency: Tensor::new(&[n, n], normalized_adjacency(&canonical))?,
        })
    }
}

/// `ReLU(Ã · H · W + b)`.
pub fn gcn_layer(tape: &mut Tape<'_>, h: Var, adj: Var, w: Var, b: Var) -> Result<Var, NnError> {
    let hw = tape.matmul(h, w)?;
    let agg = tape.matmul(adj, hw)?;
    let pre = tape.add_row_bias(agg, b)?;
    tape.relu(pre)
}

/// Pads the shorter embedding matrix with zero rows, takes all inner products
/// (graph 1 on rows) and resizes to `m × m` in [`MatrixMode::Resize`].
pub fn interaction_matrix(
    tape: &mut Tape<'_>,
    h1: Var,
    h2: Var,
    m: usize,
    mode: MatrixMode,
) -> Result<Var, NnError> {
    let (n1, d1) = tape.value(h1)?.dims2()?;
    let (n2, d2) = tape.value(h2)?.dims2()?;
    if d1 != d2 {
        return Err(NnError::ShapeMismatch(format!(
            "embedding widths {d1} and {d2}"
        )));
    }
    let n = n1.max(n2);
    let p1 = if n1 < n { tape.pad_rows(h1, n)? } else { h1 };
    let p2 = if n2 < n { tape.pad_rows(h2, n)? } else { h2 };
    let s = tape.matmul_bt(p1, p2)?;
    match mode {
        MatrixMode::Resize => tape.bilinear_resize(s, m),
        MatrixMode::PadOnly => Ok(s),
    }
}

impl Model {
    /// Glorot-uniform weights and zero biases, seeded by `config.init_seed`.
    pub fn init(config: ModelConfig) -> Result<Model, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = ParamStore::default();
        let mut gcn = Vec::new();
        let mut width = config.input_dim;
        for (l, &out) in config.gcn_dims.iter().enumerate() {
            let w = params.insert_glorot(format!("gcn.{l}.w"), &[width, out], width, out, &mut rng);
            let b = params.insert(format!("gcn.{l}.b"), Tensor::zeros(&[out]));
            gcn.push(Layer { w, b });
            width = out;
        }
        let mut cnn = Vec::new();
        let mut dense = Vec::new();
        if config.kind == ModelKind::GSimCnn {
            for &scale in &config.scales {
                let mut stages = Vec::new();
                let mut c_in = 1;
                for (k, stage) in config.cnn.iter().enumerate() {
                    let area = stage.window * stage.window;
                    let w = params.insert_glorot(
                        format!("cnn.s{scale}.{k}.w"),
                        &[stage.window, stage.window, c_in, stage.out_channels],
                        c_in * area,
                        stage.out_channels * area,
                        &mut rng,
                    );
                    let b = params.insert(format!("cnn.s{scale}.{k}.b"), Tensor::zeros(&[stage.out_channels]));
                    stages.push(Layer { w, b });
                    c_in = stage.out_channels;
                }
                cnn.push(stages);
            }
            let mut width = config.feature_width();
            for (l, &out) in config.dense_dims.iter().enumerate() {
                let w = params.insert_glorot(format!("dense.{l}.w"), &[width, out], width, out, &mut rng);
                let b = params.insert(format!("dense.{l}.b"), Tensor::zeros(&[out]));
                dense.push(Layer { w, b });
                width = out;
            }
        }
        Ok(Model {
            config,
            params,
            gcn,
            cnn,
            dense,
        })
    }

    /// Rebuilds a model from its configuration and a parameter set.
    pub fn from_parts(config: ModelConfig, params: ParamStore) -> Result<Model, ModelError> {
        let mut model = Model::init(config)?;
        if model.params.len() != params.len() {
            return Err(ModelError::InvalidConfig(format!(
                "expected {} parameter tensors, found {}",
                model.params.len(),
                params.len()
            )));
        }
        for id in model.params.ids() {
            let name = model.params.name(id).to_string();
            let loaded = params
                .id(&name)
                .map(|pid| params.get(pid))
                .ok_or_else(|| ModelError::InvalidConfig(format!("missing parameter {name}")))?;
            if loaded.shape() != model.params.get(id).shape() {
                return Err(ModelError::InvalidConfig(format!(
                    "parameter {name} has shape {:?}",
                    loaded.shape()
                )));
            }
            *model.params.get_mut(id) = loaded.clone();
        }
        Ok(model)
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        let io = |e: std::io::Error| ModelError::Io(e.to_string());
        fs::create_dir_all(dir).map_err(io)?;
        let config = serde_json::to_string_pretty(&self.config).expect("config serializes");
        fs::write(dir.join("config.json"), config + "\n").map_err(io)?;
        self.params.save(&dir.join("params.json"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Model, ModelError> {
        let text = fs::read_to_string(dir.join("config.json")).map_err(|e| ModelError::Io(e.to_string()))?;
        let config: ModelConfig =
            serde_json::from_str(&text).map_err(|e| ModelError::Io(e.to_string()))?;
        let params = ParamStore::load(&dir.join("params.json"))?;
        Model::from_parts(config, params)
    }

    /// Outputs of every GCN layer for one graph.
    fn embed(&self, tape: &mut Tape<'_>, g: &PreparedGraph) -> Result<Vec<Var>, NnError> {
        let mut h = tape.leaf(g.features.clone());
        let adj = tape.leaf(g.adjacency.clone());
        let mut scales = Vec::with_capacity(self.gcn.len());
        for layer in &self.gcn {
            let (w, b) = (tape.param(layer.w), tape.param(layer.b));
            h = gcn_layer(tape, h, adj, w, b)?;
            scales.push(h);
        }
        Ok(scales)
    }

    /// Interaction matrices of the configured scales, in configuration order.
    pub fn interaction_vars(
        &self,
        tape: &mut Tape<'_>,
        g1: &PreparedGraph,
        g2: &PreparedGraph,
    ) -> Result<Vec<Var>, NnError> {
        let e1 = self.embed(tape, g1)?;
        let e2 = self.embed(tape, g2)?;
        self.config
            .scales
            .iter()
            .map(|&s| interaction_matrix(tape, e1[s - 1], e2[s - 1], self.config.resize_m, self.config.matrix_mode))
            .collect()
    }

    /// Records the full forward pass; returns the `1 × 1` similarity.
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape<'_>,
        g1: &PreparedGraph,
        g2: &PreparedGraph,
    ) -> Result<Var, NnError> {
        if self.config.kind == ModelKind::EmbAvg {
            return self.embavg_on_tape(tape, g1, g2);
        }
        let matrices = self.interaction_vars(tape, g1, g2)?;
        let mut features = Vec::with_capacity(matrices.len());
        for (s, matrix) in matrices.into_iter().enumerate() {
            let (rows, cols) = tape.value(matrix)?.dims2()?;
            let mut x = tape.reshape(matrix, &[1, rows, cols])?;
            for (stage, layer) in self.config.cnn.iter().zip(&self.cnn[s]) {
                let (w, b) = (tape.param(layer.w), tape.param(layer.b));
                x = tape.conv2d(x, w, b, stage.stride)?;
                x = tape.relu(x)?;
                x = tape.maxpool2d(x, stage.pool)?;
            }
            features.push(x);
        }
        let mut x = tape.concat(&features)?;
        let expected = self.config.feature_width();
        let width = tape.value(x)?.len();
        if width != expected {
            return Err(NnError::ShapeMismatch(format!(
                "CNN features have width {width}, dense head expects {expected}"
            )));
        }
        for (l, layer) in self.dense.iter().enumerate() {
            let (w, b) = (tape.param(layer.w), tape.param(layer.b));
            let y = tape.matmul(x, w)?;
            x = tape.add_row_bias(y, b)?;
            if l + 1 < self.dense.len() {
                x = tape.relu(x)?;
            }
        }
        tape.sigmoid(x)
    }

    fn embavg_on_tape(
        &self,
        tape: &mut Tape<'_>,
        g1: &PreparedGraph,
        g2: &PreparedGraph,
    ) -> Result<Var, NnError> {
        let e1 = *self.embed(tape, g1)?.last().unwrap();
        let e2 = *self.embed(tape, g2)?.last().unwrap();
        let m1 = tape.mean_rows(e1)?;
        let m2 = tape.mean_rows(e2)?;
        let dot = tape.matmul_bt(m1, m2)?;
        tape.sigmoid(dot)
    }

    /// Predicted similarity in `(0, 1)`.
    pub fn score(&self, g1: &PreparedGraph, g2: &PreparedGraph) -> Result<f64, ModelError> {
        let mut tape = Tape::with_params(&self.params);
        let out = self.forward_on_tape(&mut tape, g1, g2)?;
        Ok(tape.value(out)?.data()[0])
    }

    /// Convenience wrapper preparing both graphs against `vocab`.
    pub fn forward(&self, g1: &Graph, g2: &Graph, vocab: &Vocab) -> Result<f64, ModelError> {
        self.score(&PreparedGraph::new(g1, vocab)?, &PreparedGraph::new(g2, vocab)?)
    }

    /// Mean-embedding baseline evaluated with this model's GCN weights.
    pub fn embavg_score(&self, g1: &PreparedGraph, g2: &PreparedGraph) -> Result<f64, ModelError> {
        let mut tape = Tape::with_params(&self.params);
        let out = self.embavg_on_tape(&mut tape, g1, g2)?;
        Ok(tape.value(out)?.data()[0])
    }

    /// Interaction matrices `(scale, matrix)` for inspection.
    pub fn interaction_matrices(
        &self,
        g1: &PreparedGraph,
        g2: &PreparedGraph,
    ) -> Result<Vec<(usize, Tensor)>, ModelError> {
        let mut tape = Tape::with_params(&self.params);
        let vars = self.interaction_vars(&mut tape, g1, g2)?;
        let mut out = Vec::new();
        for (&scale, v) in self.config.scales.iter().zip(vars) {
            out.push((scale, tape.value(v)?.clone()));
        }
        Ok(out)
    }

    /// Squared error of one pair and its parameter gradient, accumulated
    /// into `sink`. Returns the squared error.
    pub fn accumulate_pair_gradient(
        &self,
        g1: &PreparedGraph,
        g2: &PreparedGraph,
        target: f64,
        sink: &mut [Tensor],
    ) -> Result<f64, ModelError> {
        let mut tape = Tape::with_params(&self.params);
        let pred = self.forward_on_tape(&mut tape, g1, g2)?;
        let t = tape.leaf(Tensor::new(&[1, 1], vec![target])?);
        let loss = tape.mse_loss(pred, t)?;
        tape.backward_into(loss, sink)?;
        Ok(tape.value(loss)?.data()[0])
    }
}

/// Prepared graphs of a corpus, keyed by id.
pub struct PreparedCorpus {
    graphs: HashMap<String, PreparedGraph>,
}

impl PreparedCorpus {
    pub fn new(corpus: &Corpus) -> Result<PreparedCorpus, ModelError> {
        let graphs = corpus
            .graphs()
            .iter()
            .map(|g| Ok((g.id().to_string(), PreparedGraph::new(g, corpus.vocab())?)))
            .collect::<Result<_, ModelError>>()?;
        Ok(PreparedCorpus { graphs })
    }

    pub fn get(&self, id: &str) -> Result<&PreparedGraph, ModelError> {
        self.graphs
            .get(id)
            .ok_or_else(|| ModelError::Dataset(DatasetError::UnknownGraph(id.to_string())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub adam: AdamConfig,
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            iterations: 2000,
            adam: AdamConfig::default(),
            eval_every: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    /// Mean batch loss since the previous evaluation.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss seen.
    pub model: Model,
    pub history: Vec<HistoryRow>,
    pub best_iteration: Option<usize>,
}

/// Mean squared error of the model over labeled pairs.
pub fn evaluate_loss(model: &Model, prepared: &PreparedCorpus, pairs: &[LabeledPair]) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for p in pairs {
        let s = model.score(prepared.get(&p.id_a)?, prepared.get(&p.id_b)?)?;
        total += (s - p.sim) * (s - p.sim);
    }
    Ok(total / pairs.len().max(1) as f64)
}

/// Mini-batch Adam on the squared error between predicted and true
/// similarity. Batches are drawn from per-epoch shuffles of `train_pairs`,
/// and pair orientation alternates between consecutive samples. Validation
/// loss is measured every `eval_every` iterations and after the last one;
/// the best snapshot is returned.
pub fn train(
    config: ModelConfig,
    corpus: &Corpus,
    train_pairs: &[LabeledPair],
    val_pairs: &[LabeledPair],
    hyper: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    let mut model = Model::init(config)?;
    if hyper.iterations == 0 {
        return Ok(TrainOutcome {
            model,
            history: Vec::new(),
            best_iteration: None,
        });
    }
    if train_pairs.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if hyper.batch_size == 0 || hyper.eval_every == 0 {
        return Err(ModelError::InvalidConfig(format!(
            "batch size {} / eval interval {}",
            hyper.batch_size, hyper.eval_every
        )));
    }
    let prepared = PreparedCorpus::new(corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..train_pairs.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;

    let mut adam = AdamState::new(hyper.adam, model.params.tensors());
    let mut grads = model.params.zeros_like();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let (mut interval_loss, mut interval_batches) = (0.0, 0usize);
    let mut sample = 0usize;

    for iteration in 1..=hyper.iterations {
        grads.iter_mut().for_each(|g| g.data_mut().fill(0.0));
        let mut batch_loss = 0.0;
        for _ in 0..hyper.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let pair = &train_pairs[order[cursor]];
            cursor += 1;
            let (a, b) = if sample % 2 == 0 {
                (&pair.id_a, &pair.id_b)
            } else {
                (&pair.id_b, &pair.id_a)
            };
            sample += 1;
            batch_loss += model.accumulate_pair_gradient(prepared.get(a)?, prepared.get(b)?, pair.sim, &mut grads)?;
        }
        let scale = 1.0 / hyper.batch_size as f64;
        batch_loss *= scale;
        if !batch_loss.is_finite() {
            return Err(ModelError::DivergenceDetected(iteration));
        }
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
        adam.step(model.params.tensors_mut(), &grads)?;
        interval_loss += batch_loss;
        interval_batches += 1;

        if iteration % hyper.eval_every == 0 || iteration == hyper.iterations {
            let train_loss = interval_loss / interval_batches as f64;
            let val_loss = if val_pairs.is_empty() {
                train_loss
            } else {
                evaluate_loss(&model, &prepared, val_pairs)?
            };
            if !val_loss.is_finite() {
                return Err(ModelError::DivergenceDetected(iteration));
            }
            history.push(HistoryRow {
                iteration,
                train_loss,
                val_loss,
            });
            if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
                best = Some((val_loss, iteration, model.params.clone()));
            }
            interval_loss = 0.0;
            interval_batches = 0;
        }
    }
    let (_, best_iteration, params) = best.expect("the last iteration is always evaluated");
    model.params = params;
    Ok(TrainOutcome {
        model,
        history,
        best_iteration: Some(best_iteration),
    })
}

/// Trains on the labeled training and validation pairs of `split`.
pub fn train_on_split(
    config: ModelConfig,
    corpus: &Corpus,
    split: &Split,
    labels: &LabelSet,
    hyper: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    let collect = |pairs: Vec<(String, String)>| -> Result<Vec<LabeledPair>, ModelError> {
        pairs
            .iter()
            .map(|(a, b)| {
                labels
                    .labeled(corpus, a, b)?
                    .ok_or_else(|| ModelError::MissingLabel(a.clone(), b.clone()))
            })
            .collect()
    };
    let train_pairs = collect(training_pairs(split))?;
    let val_pairs = collect(validation_pairs(split))?;
    train(config, corpus, &train_pairs, &val_pairs, hyper)
}
