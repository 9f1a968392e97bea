//! Attentional encoder-decoder lemmatizer.
//!
//! Architecture:
//!
//! * one embedding matrix shared by the encoder input, the decoder input and
//!   the output softmax (the softmax weights are its transpose);
//! * a two-layer bidirectional GRU encoder; the second layer reads the
//!   concatenated states of the first, and the annotations are the
//!   concatenated second-layer states;
//! * a conditional GRU as the first decoder layer: a GRU transition on the
//!   previous output embedding, additive attention over the annotations
//!   queried with that state, and a second GRU transition on the attended
//!   context;
//! * a plain GRU as the second decoder layer, reading the context and the
//!   first layer's state;
//! * a `tanh` readout of the second layer's state, the previous embedding and
//!   the context, projected onto the vocabulary through the tied embedding.
//!
//! Everything is generic over [`Real`] so the same graph runs in `f32` for
//! training and in `f64` for gradient checking.

mod checkpoint;
mod decode;
mod gru;
mod network;
mod optim;
mod train;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, TensorRecord, CHECKPOINT_FORMAT,
};
pub use decode::Hypothesis;
pub use gru::Gru;
pub use network::{Batch, ForwardOutput};
pub use optim::{clip_grad_norm, Adam, OptimizerConfig};
pub use train::{
    accuracy_on, train, EarlyStopping, EpochRecord, Lemmatizer, Trainer, TrainingLog,
    TrainingSchedule, ValidationDecision, SMALL_TRAIN_SET,
};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + Debug
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).unwrap()
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn glorot<F: Real>(rows: usize, cols: usize, rng: &mut SeededRng) -> Array2<F> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || F::of(rng.uniform(-bound, bound)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Per-direction encoder state size, decoder state size and attention size.
    pub hidden_dim: usize,
    /// Context width in symbols on each side of the wordform.
    pub context_width: usize,
    pub beam_width: usize,
    pub max_target_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 64,
            hidden_dim: 128,
            context_width: 20,
            beam_width: 1,
            max_target_len: 40,
            seed: 1,
        }
    }
}

impl ModelConfig {
    pub const KEYS: &'static [&'static str] = &[
        "embed_dim",
        "hidden_dim",
        "context_width",
        "beam_width",
        "max_target_len",
        "seed",
    ];

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("model dimensions must be at least 1".into()));
        }
        if self.max_target_len == 0 {
            return Err(Error::Config("max_target_len must be at least 1".into()));
        }
        if self.beam_width == 0 {
            return Err(Error::Config("beam_width must be at least 1".into()));
        }
        Ok(())
    }

    /// Reads `embed_dim`, `hidden_dim`, `context_width`, `beam_width`,
    /// `max_target_len` and `seed`, defaulting any that are absent.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = ModelConfig::default();
        let cfg = ModelConfig {
            embed_dim: kv.get_or("embed_dim", d.embed_dim)?,
            hidden_dim: kv.get_or("hidden_dim", d.hidden_dim)?,
            context_width: kv.get_or("context_width", d.context_width)?,
            beam_width: kv.get_or("beam_width", d.beam_width)?,
            max_target_len: kv.get_or("max_target_len", d.max_target_len)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// All trainable tensors. Gradients and optimizer moments use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<F> {
    /// vocab × embed; also the (transposed) output projection.
    pub embedding: Array2<F>,
    pub enc1_fwd: Gru<F>,
    pub enc1_bwd: Gru<F>,
    pub enc2_fwd: Gru<F>,
    pub enc2_bwd: Gru<F>,
    /// annotation → initial decoder state
    pub init_w: Array2<F>,
    pub init_b: Array1<F>,
    pub dec1: Gru<F>,
    pub att_query: Array2<F>,
    pub att_key: Array2<F>,
    pub att_b: Array1<F>,
    pub att_v: Array1<F>,
    pub dec1_ctx: Gru<F>,
    pub dec2: Gru<F>,
    pub readout_state: Array2<F>,
    pub readout_prev: Array2<F>,
    pub readout_ctx: Array2<F>,
    pub readout_b: Array1<F>,
    pub output_bias: Array1<F>,
    /// Separate softmax weights (vocab × embed). `None` means tied to
    /// `embedding`, which is the only configuration used for training.
    untied_output: Option<Array2<F>>,
}

macro_rules! tensor_fields {
    ($p:expr, $visit:ident) => {{
        $visit!("embedding", $p.embedding);
        $visit!("enc1_fwd.w", $p.enc1_fwd.w);
        $visit!("enc1_fwd.u", $p.enc1_fwd.u);
        $visit!("enc1_fwd.b", $p.enc1_fwd.b);
        $visit!("enc1_bwd.w", $p.enc1_bwd.w);
        $visit!("enc1_bwd.u", $p.enc1_bwd.u);
        $visit!("enc1_bwd.b", $p.enc1_bwd.b);
        $visit!("enc2_fwd.w", $p.enc2_fwd.w);
        $visit!("enc2_fwd.u", $p.enc2_fwd.u);
        $visit!("enc2_fwd.b", $p.enc2_fwd.b);
        $visit!("enc2_bwd.w", $p.enc2_bwd.w);
        $visit!("enc2_bwd.u", $p.enc2_bwd.u);
        $visit!("enc2_bwd.b", $p.enc2_bwd.b);
        $visit!("init_w", $p.init_w);
        $visit!("init_b", $p.init_b);
        $visit!("dec1.w", $p.dec1.w);
        $visit!("dec1.u", $p.dec1.u);
        $visit!("dec1.b", $p.dec1.b);
        $visit!("att_query", $p.att_query);
        $visit!("att_key", $p.att_key);
        $visit!("att_b", $p.att_b);
        $visit!("att_v", $p.att_v);
        $visit!("dec1_ctx.w", $p.dec1_ctx.w);
        $visit!("dec1_ctx.u", $p.dec1_ctx.u);
        $visit!("dec1_ctx.b", $p.dec1_ctx.b);
        $visit!("dec2.w", $p.dec2.w);
        $visit!("dec2.u", $p.dec2.u);
        $visit!("dec2.b", $p.dec2.b);
        $visit!("readout_state", $p.readout_state);
        $visit!("readout_prev", $p.readout_prev);
        $visit!("readout_ctx", $p.readout_ctx);
        $visit!("readout_b", $p.readout_b);
        $visit!("output_bias", $p.output_bias);
    }};
}

impl<F: Real> Parameters<F> {
    /// Glorot-uniform weights drawn in a fixed order from `seed`; zero biases.
    pub fn init(config: &ModelConfig, vocab_size: usize) -> Self {
        let mut rng = SeededRng::new(config.seed);
        let (e, h) = (config.embed_dim, config.hidden_dim);
        let c = 2 * h;
        let a = h;
        let att_bound = (6.0 / (a + 1) as f64).sqrt();
        Parameters {
            embedding: glorot(vocab_size, e, &mut rng),
            enc1_fwd: Gru::new(e, h, &mut rng),
            enc1_bwd: Gru::new(e, h, &mut rng),
            enc2_fwd: Gru::new(c, h, &mut rng),
            enc2_bwd: Gru::new(c, h, &mut rng),
            init_w: glorot(c, h, &mut rng),
            init_b: Array1::zeros(h),
            dec1: Gru::new(e, h, &mut rng),
            att_query: glorot(h, a, &mut rng),
            att_key: glorot(c, a, &mut rng),
            att_b: Array1::zeros(a),
            att_v: Array1::from_shape_simple_fn(a, || F::of(rng.uniform(-att_bound, att_bound))),
            dec1_ctx: Gru::new(c, h, &mut rng),
            dec2: Gru::new(c + h, h, &mut rng),
            readout_state: glorot(h, e, &mut rng),
            readout_prev: glorot(e, e, &mut rng),
            readout_ctx: glorot(c, e, &mut rng),
            readout_b: Array1::zeros(e),
            output_bias: Array1::zeros(vocab_size),
            untied_output: None,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.dec1.hidden()
    }

    /// Softmax weights, embed × vocab. With tied embeddings this is a view
    /// of the embedding storage.
    pub fn output_projection(&self) -> ArrayView2<'_, F> {
        match &self.untied_output {
            Some(w) => w.t(),
            None => self.embedding.t(),
        }
    }

    pub(crate) fn output_rows(&self) -> &Array2<F> {
        self.untied_output.as_ref().unwrap_or(&self.embedding)
    }

    pub fn is_tied(&self) -> bool {
        self.untied_output.is_none()
    }

    /// A copy whose softmax weights are a separate tensor with the same
    /// values, so the two roles of the embedding receive separate gradients.
    pub fn untied_clone(&self) -> Self {
        let mut p = self.clone();
        p.untied_output = Some(self.output_rows().clone());
        p
    }

    /// The separate softmax weights of an untied copy.
    pub fn untied_output(&self) -> Option<&Array2<F>> {
        self.untied_output.as_ref()
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, _, t| t.iter_mut().for_each(|v| *v = F::zero()));
        z
    }

    /// Visits every tensor as `(name, shape, flat values)`, in a fixed order.
    pub fn for_each(&self, mut f: impl FnMut(&str, &[usize], &[F])) {
        macro_rules! visit {
            ($name:expr, $t:expr) => {
                f($name, $t.shape(), $t.as_slice().expect("contiguous"))
            };
        }
        tensor_fields!(self, visit);
        if let Some(w) = &self.untied_output {
            visit!("untied_output", w);
        }
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &[usize], &mut [F])) {
        macro_rules! visit {
            ($name:expr, $t:expr) => {{
                let shape = $t.shape().to_vec();
                f($name, &shape, $t.as_slice_mut().expect("contiguous"))
            }};
        }
        tensor_fields!(self, visit);
        if let Some(w) = &mut self.untied_output {
            visit!("untied_output", w);
        }
    }

    /// `(name, shape)` of every tensor in visiting order.
    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        self.for_each(|name, shape, _| out.push((name.to_owned(), shape.to_vec())));
        out
    }

    pub fn num_parameters(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, _, t| n += t.len());
        n
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|_, _, t| ok &= t.iter().all(|v| v.is_finite()));
        ok
    }

    /// Converts every tensor to another float type.
    pub fn cast<G: Real>(&self) -> Parameters<G> {
        fn c<D: ndarray::Dimension, F: Real, G: Real>(
            a: &ndarray::Array<F, D>,
        ) -> ndarray::Array<G, D> {
            a.mapv(|v| G::of(v.as_f64()))
        }
        fn g<F: Real, G: Real>(x: &Gru<F>) -> Gru<G> {
            Gru {
                w: c(&x.w),
                u: c(&x.u),
                b: c(&x.b),
            }
        }
        Parameters {
            embedding: c(&self.embedding),
            enc1_fwd: g(&self.enc1_fwd),
            enc1_bwd: g(&self.enc1_bwd),
            enc2_fwd: g(&self.enc2_fwd),
            enc2_bwd: g(&self.enc2_bwd),
            init_w: c(&self.init_w),
            init_b: c(&self.init_b),
            dec1: g(&self.dec1),
            att_query: c(&self.att_query),
            att_key: c(&self.att_key),
            att_b: c(&self.att_b),
            att_v: c(&self.att_v),
            dec1_ctx: g(&self.dec1_ctx),
            dec2: g(&self.dec2),
            readout_state: c(&self.readout_state),
            readout_prev: c(&self.readout_prev),
            readout_ctx: c(&self.readout_ctx),
            readout_b: c(&self.readout_b),
            output_bias: c(&self.output_bias),
            untied_output: self.untied_output.as_ref().map(c),
        }
    }
}
