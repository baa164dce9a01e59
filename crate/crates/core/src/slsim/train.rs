use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::data::{Dataset, Task};
use super::model::{backward_split, client_forward, server_forward_loss, Batch, Gradients, Model, ModelError};
use crate::codecs::{decode, encode, CodecConfig, CodecError, CodecKind};
use crate::tensor::{mix_seed, Tensor};
use crate::wire::frame_len;

/// Loss above which a run counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_clients")]
    pub n_clients: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Cut-layer width.
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Samples per client.
    #[serde(default = "default_shard")]
    pub shard_size: usize,
    /// `None` trains the uncompressed baseline.
    #[serde(default)]
    pub codec: Option<CodecConfig>,
    #[serde(default)]
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
}

fn default_clients() -> usize {
    4
}

fn default_lr() -> f64 {
    0.005
}

fn default_rounds() -> usize {
    1000
}

fn default_batch() -> usize {
    32
}

fn default_hidden() -> usize {
    64
}

fn default_shard() -> usize {
    256
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_clients: default_clients(),
            learning_rate: default_lr(),
            rounds: default_rounds(),
            batch_size: default_batch(),
            hidden: default_hidden(),
            shard_size: default_shard(),
            codec: None,
            task: Task::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.n_clients == 0 {
            return bad("n_clients must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate = {} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return bad("batch_size and hidden must be positive".into());
        }
        if self.shard_size < self.batch_size {
            return bad(format!(
                "shard_size = {} is smaller than batch_size = {}",
                self.shard_size, self.batch_size
            ));
        }
        self.task.validate().map_err(SimError::Config)?;
        if let Some(codec) = &self.codec {
            codec.validate()?;
            codec.retained(self.batch_size * self.hidden)?;
        }
        Ok(())
    }
}

/// Seeded He initialisation for the configured task and width.
pub fn init_model(cfg: &SimConfig) -> Model<f64> {
    Model::init(
        cfg.task.input_dim(),
        cfg.hidden,
        cfg.task.output_dim(),
        mix_seed(cfg.seed, 2),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Mean client loss on the compressed path.
    pub loss: f64,
    /// Mean per-client `‖ẑ − z‖`.
    #[serde(rename = "E")]
    pub e: f64,
    /// `‖ĝˢ − gˢ‖` between the aggregated compressed and ghost gradients.
    pub grad_gap_server: f64,
    pub grad_gap_client: f64,
    /// `‖g‖` of the aggregated ghost gradient.
    pub grad_norm: f64,
    pub bytes_up: u64,
    /// `⟨ĝ, g⟩`; logged, never asserted on.
    #[serde(skip)]
    pub inner_product: f64,
    #[serde(skip)]
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub records: Vec<RoundRecord>,
    pub diverged: bool,
}

pub const TRACE_HEADER: &str = "round,loss,E,grad_gap_server,grad_gap_client,grad_norm,bytes_up";

impl TrainingTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.round, r.loss, r.e, r.grad_gap_server, r.grad_gap_client, r.grad_norm, r.bytes_up
            )
            .expect("string write");
        }
        out
    }

    /// Running average of `E` over the recorded rounds.
    pub fn mean_error(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.e).sum::<f64>() / self.records.len() as f64
    }
}

/// Compressed and reference passes of one client on one batch.
#[derive(Debug, Clone)]
pub struct ClientStep {
    pub loss: f64,
    pub error: f64,
    pub bytes: u64,
    pub compressed: Gradients<f64>,
    pub exact: Gradients<f64>,
}

/// Encodes and decodes `z` with `codec`, or passes it through. Returns the
/// feature map the server sees and the uplink byte count.
pub fn transmit(z: &Tensor<f64>, codec: Option<&CodecConfig>) -> Result<(Tensor<f64>, u64), SimError> {
    match codec {
        None => Ok((z.clone(), 4 * z.len() as u64)),
        Some(cfg) => {
            let payload = encode(z, cfg)?;
            let bytes = frame_len(&payload) as u64;
            Ok((decode(&payload)?, bytes))
        }
    }
}

pub fn client_step(model: &Model<f64>, batch: &Batch<f64>, codec: Option<&CodecConfig>) -> Result<ClientStep, SimError> {
    let z = client_forward(model, &batch.x)?;
    let (z_hat, bytes) = transmit(&z, codec)?;
    let compressed = backward_split(model, batch, &z_hat)?;
    let (error, exact) = if codec.is_some() {
        (z.distance(&z_hat).map_err(ModelError::from)?, backward_split(model, batch, &z)?.grads)
    } else {
        (0.0, compressed.grads.clone())
    };
    Ok(ClientStep {
        loss: compressed.loss,
        error,
        bytes,
        compressed: compressed.grads,
        exact,
    })
}

pub struct Simulation {
    cfg: SimConfig,
    model: Model<f64>,
    shards: Vec<Dataset<f64>>,
    round: usize,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let data = cfg
            .task
            .generate(cfg.n_clients * cfg.shard_size, mix_seed(cfg.seed, 1));
        let shards = data.shard(cfg.n_clients);
        let model = init_model(&cfg);
        Ok(Self {
            cfg,
            model,
            shards,
            round: 0,
        })
    }

    /// Uses the given model and per-client data instead of generated ones.
    pub fn with_data(cfg: SimConfig, model: Model<f64>, shards: Vec<Dataset<f64>>) -> Result<Self, SimError> {
        if shards.len() != cfg.n_clients {
            return Err(SimError::Config(format!(
                "{} shards for {} clients",
                shards.len(),
                cfg.n_clients
            )));
        }
        if let Some(codec) = &cfg.codec {
            codec.validate()?;
        }
        if let Some(s) = shards.iter().find(|s| s.len() < cfg.batch_size) {
            return Err(SimError::Config(format!(
                "shard of {} samples is smaller than batch_size = {}",
                s.len(),
                cfg.batch_size
            )));
        }
        if model.hidden() != cfg.hidden {
            return Err(SimError::Config(format!(
                "model width {} does not match hidden = {}",
                model.hidden(),
                cfg.hidden
            )));
        }
        Ok(Self {
            cfg,
            model,
            shards,
            round: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn model(&self) -> &Model<f64> {
        &self.model
    }

    pub fn shards(&self) -> &[Dataset<f64>] {
        &self.shards
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Codec for `client` in `round`; RT gets a fresh sampling seed per cell.
    fn codec_for(&self, round: u64, client: u64) -> Option<CodecConfig> {
        self.cfg.codec.clone().map(|c| match c.codec {
            CodecKind::Rt => {
                let seed = mix_seed(mix_seed(c.seed, round), client);
                c.with_seed(seed)
            }
            _ => c,
        })
    }

    fn client_batch(&self, client: usize, round: usize) -> Batch<f64> {
        let shard = &self.shards[client];
        let b = self.cfg.batch_size;
        shard.batch((round % shard.batches(b)) * b, b)
    }

    /// One synchronous round: every client sends compressed smashed data,
    /// gradients are averaged in client order and applied with SGD. A
    /// diverged round is flagged and leaves the parameters untouched.
    pub fn train_round(&mut self) -> Result<RoundRecord, SimError> {
        let n = self.cfg.n_clients;
        let mut compressed = Model::zeros(self.model.input_dim(), self.model.hidden(), self.model.output_dim());
        let mut exact = compressed.clone();
        let (mut loss, mut error, mut bytes) = (0.0, 0.0, 0u64);
        for client in 0..n {
            let batch = self.client_batch(client, self.round);
            let codec = self.codec_for(self.round as u64, client as u64);
            let step = client_step(&self.model, &batch, codec.as_ref())?;
            loss += step.loss;
            error += step.error;
            bytes += step.bytes;
            compressed.axpy(1.0, &step.compressed);
            exact.axpy(1.0, &step.exact);
        }
        let inv = 1.0 / n as f64;
        compressed.scale(inv);
        exact.scale(inv);
        let loss = loss * inv;
        let diverged = !loss.is_finite() || loss > DIVERGENCE_LIMIT || !compressed.is_finite();
        let record = RoundRecord {
            round: self.round,
            loss,
            e: error * inv,
            grad_gap_server: compressed.server.distance(&exact.server),
            grad_gap_client: compressed.client.distance(&exact.client),
            grad_norm: exact.norm(),
            bytes_up: bytes,
            inner_product: compressed.dot(&exact),
            diverged,
        };
        if !diverged {
            self.model.axpy(-self.cfg.learning_rate, &compressed);
        }
        self.round += 1;
        Ok(record)
    }

    /// Runs the configured number of rounds, stopping at the first diverged
    /// round (which is kept in the trace).
    pub fn run(&mut self) -> Result<TrainingTrace, SimError> {
        let mut trace = TrainingTrace::default();
        while self.round < self.cfg.rounds {
            let record = self.train_round()?;
            let diverged = record.diverged;
            trace.records.push(record);
            if diverged {
                trace.diverged = true;
                break;
            }
        }
        Ok(trace)
    }

    /// Mean loss over every batch of every client with the current
    /// parameters, through the same compression as training.
    pub fn evaluate_loss(&self) -> Result<f64, SimError> {
        let b = self.cfg.batch_size;
        let mut total = 0.0;
        let mut count = 0usize;
        for (client, shard) in self.shards.iter().enumerate() {
            for j in 0..shard.batches(b) {
                let batch = shard.batch(j * b, b);
                let z = client_forward(&self.model, &batch.x)?;
                let codec = self.codec_for(u64::MAX - j as u64, client as u64);
                let (z_hat, _) = transmit(&z, codec.as_ref())?;
                total += server_forward_loss(&self.model, &z_hat, &batch.y)?;
                count += 1;
            }
        }
        Ok(total / count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub rounds_completed: usize,
    pub diverged: bool,
    pub final_loss: f64,
    pub mean_error: f64,
    pub total_bytes_up: u64,
}

/// Trains to completion and evaluates the final loss.
pub fn train(cfg: &SimConfig) -> Result<(TrainingTrace, RunSummary), SimError> {
    let mut sim = Simulation::new(cfg.clone())?;
    let trace = sim.run()?;
    let final_loss = if trace.diverged { f64::NAN } else { sim.evaluate_loss()? };
    let summary = RunSummary {
        rounds_completed: trace.records.len(),
        diverged: trace.diverged,
        final_loss,
        mean_error: trace.mean_error(),
        total_bytes_up: trace.records.iter().map(|r| r.bytes_up).sum(),
    };
    Ok((trace, summary))
}
