//! Batched forward and backward passes.
//!
//! Sequences in a batch are padded to a common length. Source padding is
//! masked in the recurrences (padded steps carry the state through), in the
//! attention softmax and in the mean that initializes the decoder. Target
//! padding is masked in the loss only; the decoder is causal, so padded steps
//! cannot influence earlier ones.

use ndarray::{concatenate, s, stack, Array1, Array2, Array3, Axis};

use super::gru::GruCache;
use super::{Parameters, Real};
use crate::encoding::SymbolVocab;
use crate::error::{Error, Result};

/// Padded source sequences, stored time-major.
#[derive(Debug, Clone)]
pub(crate) struct SourceBatch<F> {
    /// `ids[t][b]`
    ids: Vec<Vec<usize>>,
    /// time × batch, 1 for real symbols
    mask: Array2<F>,
    lengths: Vec<usize>,
}

impl<F: Real> SourceBatch<F> {
    pub(crate) fn new<S: AsRef<[usize]>>(sources: &[S]) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        if sources.iter().any(|s| s.as_ref().is_empty()) {
            return Err(Error::Input("empty source sequence".into()));
        }
        let (ids, mask) = pad(sources);
        Ok(SourceBatch {
            ids,
            mask,
            lengths: sources.iter().map(|s| s.as_ref().len()).collect(),
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.lengths.len()
    }

    fn steps(&self) -> usize {
        self.ids.len()
    }
}

fn pad<F: Real, S: AsRef<[usize]>>(seqs: &[S]) -> (Vec<Vec<usize>>, Array2<F>) {
    let steps = seqs.iter().map(|s| s.as_ref().len()).max().unwrap_or(0);
    let mut ids = vec![vec![SymbolVocab::PAD_ID; seqs.len()]; steps];
    let mut mask = Array2::zeros((steps, seqs.len()));
    for (b, seq) in seqs.iter().enumerate() {
        for (t, &id) in seq.as_ref().iter().enumerate() {
            ids[t][b] = id;
            mask[[t, b]] = F::one();
        }
    }
    (ids, mask)
}

/// Source/target pairs ready for a training step. Targets must end with
/// end-of-sequence.
#[derive(Debug, Clone)]
pub struct Batch<F> {
    source: SourceBatch<F>,
    target: Vec<Vec<usize>>,
    target_mask: Array2<F>,
}

impl<F: Real> Batch<F> {
    pub fn new<S: AsRef<[usize]>, T: AsRef<[usize]>>(sources: &[S], targets: &[T]) -> Result<Self> {
        if sources.len() != targets.len() {
            return Err(Error::Input("source and target counts differ".into()));
        }
        if targets.iter().any(|t| t.as_ref().is_empty()) {
            return Err(Error::Input("empty target sequence".into()));
        }
        let source = SourceBatch::new(sources)?;
        let (target, target_mask) = pad(targets);
        Ok(Batch {
            source,
            target,
            target_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn target_symbols(&self) -> F {
        self.target_mask.sum()
    }
}

/// Encoder output consumed by the decoder.
#[derive(Debug, Clone)]
pub(crate) struct Encoded<F> {
    /// time × batch × 2·hidden
    ann: Array3<F>,
    /// `ann · att_key + att_b`, time × batch × attention
    keys: Array3<F>,
    mask: Array2<F>,
    /// initial decoder state, batch × hidden
    pub(crate) init: Array2<F>,
}

impl<F: Real> Encoded<F> {
    /// Repeats batch row `row` `k` times (for beam search).
    pub(crate) fn repeat_row(&self, row: usize, k: usize) -> Self {
        let idx = vec![row; k];
        Encoded {
            ann: self.ann.select(Axis(1), &idx),
            keys: self.keys.select(Axis(1), &idx),
            mask: self.mask.select(Axis(1), &idx),
            init: self.init.select(Axis(0), &idx),
        }
    }
}

struct EncoderCache<F> {
    l1f: Vec<GruCache<F>>,
    l1b: Vec<GruCache<F>>,
    l2f: Vec<GruCache<F>>,
    l2b: Vec<GruCache<F>>,
    mean: Array2<F>,
}

struct AttentionCache<F> {
    alpha: Array2<F>,
    pre: Array3<F>,
}

pub(crate) struct StepCache<F> {
    prev: Array2<F>,
    g1: GruCache<F>,
    s1: Array2<F>,
    attention: AttentionCache<F>,
    ctx: Array2<F>,
    g1c: GruCache<F>,
    pub(crate) s: Array2<F>,
    g2: GruCache<F>,
    pub(crate) d: Array2<F>,
    o: Array2<F>,
    pub(crate) log_probs: Array2<F>,
}

pub(crate) struct ForwardCache<F> {
    encoded: Encoded<F>,
    encoder: EncoderCache<F>,
    steps: Vec<StepCache<F>>,
    symbols: F,
}

/// Result of a teacher-forced pass over one example.
#[derive(Debug, Clone)]
pub struct ForwardOutput<F> {
    /// Output distribution over the vocabulary at each target step.
    pub distributions: Vec<Array1<F>>,
    /// Attention weights over source positions at each target step.
    pub attention: Vec<Array1<F>>,
    /// Mean negative log-likelihood per target symbol.
    pub loss: F,
}

fn column<F: Real>(mask: &Array2<F>, t: usize) -> Array2<F> {
    mask.row(t).to_owned().insert_axis(Axis(1))
}

fn scatter_rows<F: Real>(target: &mut Array2<F>, ids: &[usize], rows: &Array2<F>) {
    for (b, &id) in ids.iter().enumerate() {
        let mut r = target.row_mut(id);
        r += &rows.row(b);
    }
}

fn run_direction<F: Real>(
    gru: &super::Gru<F>,
    xs: &[Array2<F>],
    masks: &[Array2<F>],
    reverse: bool,
) -> (Vec<Array2<F>>, Vec<GruCache<F>>) {
    let steps = xs.len();
    let rows = xs[0].nrows();
    let mut h = Array2::zeros((rows, gru.hidden()));
    let mut outs: Vec<Option<Array2<F>>> = vec![None; steps];
    let mut caches: Vec<Option<GruCache<F>>> = (0..steps).map(|_| None).collect();
    let order: Vec<usize> = if reverse {
        (0..steps).rev().collect()
    } else {
        (0..steps).collect()
    };
    for t in order {
        let (next, cache) = gru.step(&xs[t], &h, Some(&masks[t]));
        h = next;
        outs[t] = Some(h.clone());
        caches[t] = Some(cache);
    }
    (
        outs.into_iter().map(Option::unwrap).collect(),
        caches.into_iter().map(Option::unwrap).collect(),
    )
}

fn back_direction<F: Real>(
    gru: &super::Gru<F>,
    caches: &[GruCache<F>],
    d_out: &[Array2<F>],
    reverse: bool,
    grad: &mut super::Gru<F>,
) -> Vec<Array2<F>> {
    let steps = caches.len();
    let mut dx: Vec<Option<Array2<F>>> = vec![None; steps];
    let mut carry = Array2::zeros(d_out[0].raw_dim());
    let order: Vec<usize> = if reverse {
        (0..steps).collect()
    } else {
        (0..steps).rev().collect()
    };
    for t in order {
        let dh = &d_out[t] + &carry;
        let (dxt, dprev) = gru.step_back(&caches[t], &dh, grad);
        dx[t] = Some(dxt);
        carry = dprev;
    }
    dx.into_iter().map(Option::unwrap).collect()
}

fn concat_cols<F: Real>(a: &Array2<F>, b: &Array2<F>) -> Array2<F> {
    concatenate(Axis(1), &[a.view(), b.view()]).expect("row counts match")
}

fn log_softmax_rows<F: Real>(logits: &Array2<F>) -> Array2<F> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(F::neg_infinity(), |m, &v| m.max(v));
        let lse = max + row.mapv(|v| (v - max).exp()).sum().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

impl<F: Real> Parameters<F> {
    fn embed(&self, ids: &[usize]) -> Array2<F> {
        self.embedding.select(Axis(0), ids)
    }

    fn encode_with_cache(&self, src: &SourceBatch<F>) -> (Encoded<F>, EncoderCache<F>) {
        let steps = src.steps();
        let rows = src.len();
        let h = self.hidden_dim();
        let xs: Vec<_> = src.ids.iter().map(|ids| self.embed(ids)).collect();
        let masks: Vec<_> = (0..steps).map(|t| column(&src.mask, t)).collect();

        let (f1, l1f) = run_direction(&self.enc1_fwd, &xs, &masks, false);
        let (b1, l1b) = run_direction(&self.enc1_bwd, &xs, &masks, true);
        let layer1: Vec<_> = f1.iter().zip(&b1).map(|(f, b)| concat_cols(f, b)).collect();
        let (f2, l2f) = run_direction(&self.enc2_fwd, &layer1, &masks, false);
        let (b2, l2b) = run_direction(&self.enc2_bwd, &layer1, &masks, true);
        let ann_steps: Vec<_> = f2.iter().zip(&b2).map(|(f, b)| concat_cols(f, b)).collect();
        let views: Vec<_> = ann_steps.iter().map(|a| a.view()).collect();
        let ann = stack(Axis(0), &views).expect("uniform step shapes");

        let keys = self.project_keys(&ann);

        let mut mean = Array2::zeros((rows, 2 * h));
        for t in 0..steps {
            mean += &(&ann_steps[t] * &masks[t]);
        }
        let inv_len = Array1::from_iter(src.lengths.iter().map(|&l| F::one() / F::of(l as f64)))
            .insert_axis(Axis(1));
        mean *= &inv_len;
        let init = (mean.dot(&self.init_w) + &self.init_b).mapv(F::tanh);

        (
            Encoded {
                ann,
                keys,
                mask: src.mask.clone(),
                init,
            },
            EncoderCache {
                l1f,
                l1b,
                l2f,
                l2b,
                mean,
            },
        )
    }

    fn project_keys(&self, ann: &Array3<F>) -> Array3<F> {
        let (steps, rows, c) = ann.dim();
        let flat = ann
            .view()
            .into_shape_with_order((steps * rows, c))
            .expect("contiguous annotations");
        let keys = flat.dot(&self.att_key) + &self.att_b;
        keys.into_shape_with_order((steps, rows, self.att_key.ncols()))
            .expect("key shape")
    }

    pub(crate) fn encode(&self, src: &SourceBatch<F>) -> Encoded<F> {
        self.encode_with_cache(src).0
    }

    fn attend(&self, enc: &Encoded<F>, query_state: &Array2<F>) -> (Array2<F>, AttentionCache<F>) {
        let (steps, rows, c) = enc.ann.dim();
        let a = self.att_v.len();
        let q = query_state.dot(&self.att_query);
        let pre = (&enc.keys + &q).mapv(F::tanh);
        let scores = pre
            .view()
            .into_shape_with_order((steps * rows, a))
            .expect("contiguous")
            .dot(&self.att_v)
            .into_shape_with_order((steps, rows))
            .expect("score shape");

        let mut alpha = Array2::zeros((steps, rows));
        for b in 0..rows {
            let mut max = F::neg_infinity();
            for t in 0..steps {
                if enc.mask[[t, b]] > F::zero() {
                    max = max.max(scores[[t, b]]);
                }
            }
            let mut total = F::zero();
            for t in 0..steps {
                if enc.mask[[t, b]] > F::zero() {
                    let e = (scores[[t, b]] - max).exp();
                    alpha[[t, b]] = e;
                    total += e;
                }
            }
            for t in 0..steps {
                alpha[[t, b]] /= total;
            }
        }

        let mut ctx = Array2::zeros((rows, c));
        for t in 0..steps {
            ctx += &(&enc.ann.index_axis(Axis(0), t) * &column(&alpha, t));
        }
        (ctx, AttentionCache { alpha, pre })
    }

    #[allow(clippy::too_many_arguments)]
    fn attend_back(
        &self,
        enc: &Encoded<F>,
        cache: &AttentionCache<F>,
        query_state: &Array2<F>,
        d_ctx: &Array2<F>,
        d_ann: &mut Array3<F>,
        d_keys: &mut Array3<F>,
        grads: &mut Parameters<F>,
    ) -> Array2<F> {
        let one = F::one();
        let (steps, rows, _) = enc.ann.dim();
        let a = self.att_v.len();
        let alpha = &cache.alpha;

        let d_alpha = (&enc.ann * d_ctx).sum_axis(Axis(2));
        *d_ann += &(&alpha.view().insert_axis(Axis(2)) * d_ctx);

        let weighted = (alpha * &d_alpha).sum_axis(Axis(0));
        let d_scores = alpha * &(&d_alpha - &weighted);

        let pre_flat = cache
            .pre
            .view()
            .into_shape_with_order((steps * rows, a))
            .expect("contiguous");
        let d_scores_flat = d_scores
            .view()
            .into_shape_with_order(steps * rows)
            .expect("contiguous");
        grads.att_v += &pre_flat.t().dot(&d_scores_flat);

        let d_pre = &d_scores.view().insert_axis(Axis(2)) * &self.att_v;
        let d_raw = d_pre * &cache.pre.mapv(|v| one - v * v);
        *d_keys += &d_raw;
        let dq = d_raw.sum_axis(Axis(0));
        grads.att_query += &query_state.t().dot(&dq);
        dq.dot(&self.att_query.t())
    }

    /// One decoder step from states `(s, d)` given the previous output's
    /// embedding.
    pub(crate) fn decoder_step(
        &self,
        enc: &Encoded<F>,
        prev: Array2<F>,
        s: &Array2<F>,
        d: &Array2<F>,
    ) -> StepCache<F> {
        let (s1, g1) = self.dec1.step(&prev, s, None);
        let (ctx, attention) = self.attend(enc, &s1);
        let (s_new, g1c) = self.dec1_ctx.step(&ctx, &s1, None);
        let (d_new, g2) = self.dec2.step(&concat_cols(&ctx, &s_new), d, None);
        let o = (d_new.dot(&self.readout_state)
            + prev.dot(&self.readout_prev)
            + ctx.dot(&self.readout_ctx)
            + &self.readout_b)
            .mapv(F::tanh);
        let logits = o.dot(&self.output_rows().t()) + &self.output_bias;
        StepCache {
            prev,
            g1,
            s1,
            attention,
            ctx,
            g1c,
            s: s_new,
            g2,
            d: d_new,
            o,
            log_probs: log_softmax_rows(&logits),
        }
    }

    /// Embeddings of the previous outputs; zeros before the first step.
    pub(crate) fn previous_embedding(&self, prev: Option<&[usize]>, rows: usize) -> Array2<F> {
        match prev {
            Some(ids) => self.embed(ids),
            None => Array2::zeros((rows, self.embed_dim())),
        }
    }

    pub(crate) fn forward_batch(&self, batch: &Batch<F>) -> (F, ForwardCache<F>) {
        let (encoded, encoder) = self.encode_with_cache(&batch.source);
        let rows = batch.len();
        let mut s = encoded.init.clone();
        let mut d = encoded.init.clone();
        let mut steps = Vec::with_capacity(batch.target.len());
        let mut nll = F::zero();
        for t in 0..batch.target.len() {
            let prev_ids = (t > 0).then(|| batch.target[t - 1].as_slice());
            let prev = self.previous_embedding(prev_ids, rows);
            let step = self.decoder_step(&encoded, prev, &s, &d);
            for (b, &y) in batch.target[t].iter().enumerate() {
                let m = batch.target_mask[[t, b]];
                if m > F::zero() {
                    nll -= m * step.log_probs[[b, y]];
                }
            }
            s = step.s.clone();
            d = step.d.clone();
            steps.push(step);
        }
        let symbols = batch.target_symbols();
        (
            nll / symbols,
            ForwardCache {
                encoded,
                encoder,
                steps,
                symbols,
            },
        )
    }

    /// Mean per-symbol negative log-likelihood of a batch.
    pub fn loss(&self, batch: &Batch<F>) -> F {
        self.forward_batch(batch).0
    }

    /// Loss and exact gradients with respect to every tensor.
    pub fn loss_and_gradient(&self, batch: &Batch<F>) -> (F, Parameters<F>) {
        let (loss, cache) = self.forward_batch(batch);
        (loss, self.backward_batch(batch, &cache))
    }

    pub(crate) fn backward_batch(
        &self,
        batch: &Batch<F>,
        cache: &ForwardCache<F>,
    ) -> Parameters<F> {
        let one = F::one();
        let mut grads = self.zeros_like();
        let enc = &cache.encoded;
        let (src_steps, rows, c) = enc.ann.dim();
        let h = self.hidden_dim();
        let mut d_ann = Array3::zeros(enc.ann.raw_dim());
        let mut d_keys = Array3::zeros(enc.keys.raw_dim());
        let mut ds_next = Array2::zeros((rows, h));
        let mut dd_next = Array2::zeros((rows, h));
        let out_rows = self.output_rows();

        for t in (0..batch.target.len()).rev() {
            let step = &cache.steps[t];

            let mut d_logits = step.log_probs.mapv(F::exp);
            for (b, &y) in batch.target[t].iter().enumerate() {
                d_logits[[b, y]] -= one;
            }
            let scale = column(&batch.target_mask, t) / cache.symbols;
            d_logits *= &scale;

            grads.output_bias += &d_logits.sum_axis(Axis(0));
            let d_out_rows = d_logits.t().dot(&step.o);
            match &mut grads.untied_output {
                Some(w) => *w += &d_out_rows,
                None => grads.embedding += &d_out_rows,
            }
            let d_o = d_logits.dot(out_rows);
            let d_o_pre = d_o * &step.o.mapv(|v| one - v * v);
            grads.readout_state += &step.d.t().dot(&d_o_pre);
            grads.readout_prev += &step.prev.t().dot(&d_o_pre);
            grads.readout_ctx += &step.ctx.t().dot(&d_o_pre);
            grads.readout_b += &d_o_pre.sum_axis(Axis(0));

            let dd = &dd_next + &d_o_pre.dot(&self.readout_state.t());
            let mut d_prev = d_o_pre.dot(&self.readout_prev.t());
            let mut d_ctx = d_o_pre.dot(&self.readout_ctx.t());

            let (dx2, dd_prev) = self.dec2.step_back(&step.g2, &dd, &mut grads.dec2);
            d_ctx += &dx2.slice(s![.., ..c]);
            let ds = &ds_next + &dx2.slice(s![.., c..]);

            let (dxc, mut ds1) = self.dec1_ctx.step_back(&step.g1c, &ds, &mut grads.dec1_ctx);
            d_ctx += &dxc;

            let dq = self.attend_back(
                enc,
                &step.attention,
                &step.s1,
                &d_ctx,
                &mut d_ann,
                &mut d_keys,
                &mut grads,
            );
            ds1 += &dq;

            let (dxp, ds_prev) = self.dec1.step_back(&step.g1, &ds1, &mut grads.dec1);
            d_prev += &dxp;
            if t > 0 {
                scatter_rows(&mut grads.embedding, &batch.target[t - 1], &d_prev);
            }
            ds_next = ds_prev;
            dd_next = dd_prev;
        }

        // s0 and d0 are both the initial state
        let d_init = ds_next + dd_next;
        let d_init_pre = d_init * &enc.init.mapv(|v| one - v * v);
        grads.init_w += &cache.encoder.mean.t().dot(&d_init_pre);
        grads.init_b += &d_init_pre.sum_axis(Axis(0));
        let d_mean = d_init_pre.dot(&self.init_w.t());
        for t in 0..src_steps {
            for b in 0..rows {
                let m = enc.mask[[t, b]];
                if m > F::zero() {
                    let w = m / F::of(batch.source.lengths[b] as f64);
                    let mut row = d_ann.slice_mut(s![t, b, ..]);
                    row.scaled_add(w, &d_mean.row(b));
                }
            }
        }

        let a = self.att_v.len();
        let ann_flat = enc
            .ann
            .view()
            .into_shape_with_order((src_steps * rows, c))
            .expect("contiguous");
        let d_keys_flat = d_keys
            .view()
            .into_shape_with_order((src_steps * rows, a))
            .expect("contiguous")
            .to_owned();
        grads.att_key += &ann_flat.t().dot(&d_keys_flat);
        grads.att_b += &d_keys_flat.sum_axis(Axis(0));
        let d_ann_from_keys = d_keys_flat.dot(&self.att_key.t());
        d_ann += &d_ann_from_keys
            .into_shape_with_order((src_steps, rows, c))
            .expect("shape");

        let split = |d: &Array3<F>, t: usize, lo: usize, hi: usize| -> Array2<F> {
            d.slice(s![t, .., lo..hi]).to_owned()
        };
        let d_f2: Vec<_> = (0..src_steps).map(|t| split(&d_ann, t, 0, h)).collect();
        let d_b2: Vec<_> = (0..src_steps).map(|t| split(&d_ann, t, h, 2 * h)).collect();
        let e = &cache.encoder;
        let dl1_f = back_direction(&self.enc2_fwd, &e.l2f, &d_f2, false, &mut grads.enc2_fwd);
        let dl1_b = back_direction(&self.enc2_bwd, &e.l2b, &d_b2, true, &mut grads.enc2_bwd);
        let dl1: Vec<Array2<F>> = dl1_f.iter().zip(&dl1_b).map(|(x, y)| x + y).collect();
        let d_f1: Vec<_> = dl1
            .iter()
            .map(|d| d.slice(s![.., ..h]).to_owned())
            .collect();
        let d_b1: Vec<_> = dl1
            .iter()
            .map(|d| d.slice(s![.., h..]).to_owned())
            .collect();
        let dx_f = back_direction(&self.enc1_fwd, &e.l1f, &d_f1, false, &mut grads.enc1_fwd);
        let dx_b = back_direction(&self.enc1_bwd, &e.l1b, &d_b1, true, &mut grads.enc1_bwd);
        for t in 0..src_steps {
            scatter_rows(
                &mut grads.embedding,
                &batch.source.ids[t],
                &(&dx_f[t] + &dx_b[t]),
            );
        }
        grads
    }

    /// Teacher-forced pass over a single example. `target` must end with
    /// end-of-sequence.
    pub fn forward(&self, source: &[usize], target: &[usize]) -> Result<ForwardOutput<F>> {
        let batch = Batch::new(&[source], &[target])?;
        let (loss, cache) = self.forward_batch(&batch);
        Ok(ForwardOutput {
            distributions: cache
                .steps
                .iter()
                .map(|s| s.log_probs.row(0).mapv(F::exp))
                .collect(),
            attention: cache
                .steps
                .iter()
                .map(|s| s.attention.alpha.column(0).to_owned())
                .collect(),
            loss,
        })
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::ModelConfig;
    use crate::rng::SeededRng;

    fn tiny(seed: u64, vocab: usize) -> Parameters<f64> {
        let cfg = ModelConfig {
            embed_dim: 8,
            hidden_dim: 8,
            seed,
            ..ModelConfig::default()
        };
        let mut p = Parameters::<f64>::init(&cfg, vocab);
        // non-zero biases so their gradients are exercised too
        let mut rng = SeededRng::new(seed + 100);
        p.for_each_mut(|name, _, t| {
            if name.ends_with('b') || name == "output_bias" {
                t.iter_mut().for_each(|v| *v = rng.uniform(-0.3, 0.3));
            }
        });
        p
    }

    fn random_batch(rng: &mut SeededRng, vocab: usize) -> Batch<f64> {
        let src = [
            (0..12)
                .map(|_| 3 + rng.below(vocab - 3))
                .collect::<Vec<_>>(),
            (0..7).map(|_| 3 + rng.below(vocab - 3)).collect(),
        ];
        let mut trg: Vec<Vec<usize>> = vec![
            (0..5).map(|_| 3 + rng.below(vocab - 3)).collect(),
            (0..3).map(|_| 3 + rng.below(vocab - 3)).collect(),
        ];
        for t in &mut trg {
            t.push(SymbolVocab::EOS_ID);
        }
        Batch::new(&src, &trg).unwrap()
    }

    fn flat(p: &Parameters<f64>) -> Vec<f64> {
        let mut out = Vec::new();
        p.for_each(|_, _, t| out.extend_from_slice(t));
        out
    }

    fn set(p: &mut Parameters<f64>, index: usize, value: f64) {
        let mut offset = 0;
        p.for_each_mut(|_, _, t| {
            if index >= offset && index < offset + t.len() {
                t[index - offset] = value;
            }
            offset += t.len();
        });
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let vocab = 10;
        let mut rng = SeededRng::new(7);
        let params = tiny(3, vocab);
        let batch = random_batch(&mut rng, vocab);
        let (_, grads) = params.loss_and_gradient(&batch);
        let analytic = flat(&grads);
        let values = flat(&params);
        assert_eq!(analytic.len(), values.len());

        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for index in rng.sample_indices(values.len(), 200) {
            let mut p = params.clone();
            set(&mut p, index, values[index] + h);
            let up = p.loss(&batch);
            set(&mut p, index, values[index] - h);
            let down = p.loss(&batch);
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[index];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
            assert!(
                rel < 1e-4,
                "coordinate {index}: analytic {a} numeric {numeric}"
            );
        }
        assert!(worst < 1e-4);
    }

    #[test]
    fn tied_gradient_sums_both_roles() {
        let vocab = 10;
        let mut rng = SeededRng::new(8);
        let params = tiny(5, vocab);
        let batch = random_batch(&mut rng, vocab);
        let (tied_loss, tied) = params.loss_and_gradient(&batch);
        let untied_params = params.untied_clone();
        let (untied_loss, untied) = untied_params.loss_and_gradient(&batch);
        assert_eq!(tied_loss, untied_loss);
        let output_role = untied.untied_output().unwrap();
        let combined = &untied.embedding + output_role;
        for (a, b) in tied.embedding.iter().zip(combined.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(output_role.iter().any(|v| v.abs() > 1e-6));
        assert!(untied.embedding.iter().any(|v| v.abs() > 1e-6));
    }

    #[test]
    fn gradient_shapes_mirror_parameters() {
        let params = tiny(2, 10);
        let batch = random_batch(&mut SeededRng::new(1), 10);
        let (_, grads) = params.loss_and_gradient(&batch);
        assert_eq!(grads.shapes(), params.shapes());
        grads.for_each(|name, _, t| assert!(!t.is_empty(), "{name}"));
    }

    #[test]
    fn zero_weights_give_uniform_loss() {
        for vocab in [6, 10, 31] {
            let p = tiny(1, vocab).zeros_like();
            let out = p.forward(&[3, 4, 5], &[4, 4, SymbolVocab::EOS_ID]).unwrap();
            assert!((out.loss - (vocab as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_is_deterministic() {
        let p = tiny(4, 10);
        let batch = random_batch(&mut SeededRng::new(2), 10);
        let first = p.loss(&batch);
        let _ = p.loss_and_gradient(&random_batch(&mut SeededRng::new(3), 10));
        assert_eq!(first, p.loss(&batch));
    }

    #[test]
    fn empty_sequences_are_rejected() {
        let p = tiny(4, 10);
        assert!(p.forward(&[], &[SymbolVocab::EOS_ID]).is_err());
        assert!(p.forward(&[3], &[]).is_err());
    }

    #[test]
    fn batch_loss_is_symbol_weighted_mean() {
        let p = tiny(6, 10);
        let a = p
            .forward(&[3, 4, 5, 6], &[7, 8, SymbolVocab::EOS_ID])
            .unwrap();
        let b = p.forward(&[9, 3], &[5, SymbolVocab::EOS_ID]).unwrap();
        let batch = Batch::new(
            &[vec![3, 4, 5, 6], vec![9, 3]],
            &[vec![7, 8, 1], vec![5, 1]],
        )
        .unwrap();
        let joint = p.loss(&batch);
        assert!((joint - (3.0 * a.loss + 2.0 * b.loss) / 5.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn distributions_are_normalized(
            seed in 0u64..1000,
            src in prop::collection::vec(3usize..12, 1..15),
            trg in prop::collection::vec(3usize..12, 0..6),
        ) {
            let p = tiny(seed, 12).cast::<f32>();
            let mut trg = trg;
            trg.push(SymbolVocab::EOS_ID);
            let out = p.forward(&src, &trg).unwrap();
            prop_assert_eq!(out.distributions.len(), trg.len());
            for d in &out.distributions {
                prop_assert!((d.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs() < 1e-6);
            }
            for a in &out.attention {
                prop_assert_eq!(a.len(), src.len());
                prop_assert!((a.iter().map(|&v| v as f64).sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }
}
