use std::cmp::Ordering;

use ndarray::{stack, Array2, ArrayView1, Axis};

use super::network::SourceBatch;
use super::{Parameters, Real};
use crate::encoding::SymbolVocab;
use crate::error::Result;

/// A decoded output sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Output symbol ids, without end-of-sequence.
    pub ids: Vec<usize>,
    /// Total log-probability, including the end-of-sequence step when
    /// `finished`.
    pub log_prob: f64,
    /// Whether end-of-sequence was produced before the length cap.
    pub finished: bool,
}

impl Hypothesis {
    /// Number of scored steps.
    pub fn steps(&self) -> usize {
        self.ids.len() + usize::from(self.finished)
    }

    /// Log-probability per scored step.
    pub fn normalized(&self) -> f64 {
        self.log_prob / self.steps().max(1) as f64
    }
}

/// Index of the largest value; the lowest index wins ties.
fn argmax<F: Real>(row: ArrayView1<'_, F>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl<F: Real> Parameters<F> {
    /// Greedy decoding of several sources at once. Each output stops at
    /// end-of-sequence or after `max_len` symbols.
    pub fn greedy_decode_batch<S: AsRef<[usize]>>(
        &self,
        sources: &[S],
        max_len: usize,
    ) -> Result<Vec<Hypothesis>> {
        if sources.is_empty() {
            return Ok(Vec::new());
        }
        let src = SourceBatch::<F>::new(sources)?;
        let enc = self.encode(&src);
        let rows = src.len();
        let mut hyps = vec![
            Hypothesis {
                ids: Vec::new(),
                log_prob: 0.0,
                finished: false,
            };
            rows
        ];
        let mut s = enc.init.clone();
        let mut d = enc.init.clone();
        let mut prev: Option<Vec<usize>> = None;
        for _ in 0..max_len {
            let emb = self.previous_embedding(prev.as_deref(), rows);
            let step = self.decoder_step(&enc, emb, &s, &d);
            let mut chosen = vec![SymbolVocab::EOS_ID; rows];
            for (b, hyp) in hyps.iter_mut().enumerate() {
                if hyp.finished {
                    continue;
                }
                let row = step.log_probs.row(b);
                let y = argmax(row);
                hyp.log_prob += row[y].as_f64();
                if y == SymbolVocab::EOS_ID {
                    hyp.finished = true;
                } else {
                    hyp.ids.push(y);
                }
                chosen[b] = y;
            }
            if hyps.iter().all(|h| h.finished) {
                break;
            }
            s = step.s;
            d = step.d;
            prev = Some(chosen);
        }
        Ok(hyps)
    }

    pub fn greedy_decode(&self, source: &[usize], max_len: usize) -> Result<Hypothesis> {
        Ok(self.greedy_decode_batch(&[source], max_len)?.remove(0))
    }

    /// Beam search keeping the `k` best partial outputs per step.
    ///
    /// All live hypotheses share a length, so ranking them by total or by
    /// per-step score is the same. Among completed outputs (plus the greedy
    /// output) the one with the highest total log-probability is returned.
    /// `k = 1` reproduces greedy decoding.
    pub fn beam_decode(&self, source: &[usize], k: usize, max_len: usize) -> Result<Hypothesis> {
        let k = k.max(1);
        let greedy = self.greedy_decode(source, max_len)?;
        if k == 1 {
            return Ok(greedy);
        }
        let src = SourceBatch::<F>::new(&[source])?;
        let enc = self.encode(&src);

        struct Live<F> {
            ids: Vec<usize>,
            score: f64,
            s: Array2<F>,
            d: Array2<F>,
        }
        let mut live = vec![Live {
            ids: Vec::new(),
            score: 0.0,
            s: enc.init.clone(),
            d: enc.init.clone(),
        }];
        let mut done: Vec<Hypothesis> = Vec::new();

        for t in 0..max_len {
            let n = live.len();
            let rows_enc = enc.repeat_row(0, n);
            let s = stack_rows(live.iter().map(|l| &l.s));
            let d = stack_rows(live.iter().map(|l| &l.d));
            let prev: Option<Vec<usize>> = (t > 0).then(|| {
                live.iter()
                    .map(|l| *l.ids.last().expect("non-empty"))
                    .collect()
            });
            let emb = self.previous_embedding(prev.as_deref(), n);
            let step = self.decoder_step(&rows_enc, emb, &s, &d);

            let mut candidates: Vec<(f64, usize, usize)> =
                Vec::with_capacity(n * self.vocab_size());
            for (i, l) in live.iter().enumerate() {
                for (y, &lp) in step.log_probs.row(i).iter().enumerate() {
                    candidates.push((l.score + lp.as_f64(), i, y));
                }
            }
            candidates.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .unwrap_or(Ordering::Equal)
                    .then(a.1.cmp(&b.1))
                    .then(a.2.cmp(&b.2))
            });

            let width = k - done.len();
            let mut next = Vec::with_capacity(width);
            for &(score, i, y) in candidates.iter().take(width) {
                if y == SymbolVocab::EOS_ID {
                    done.push(Hypothesis {
                        ids: live[i].ids.clone(),
                        log_prob: score,
                        finished: true,
                    });
                } else {
                    let mut ids = live[i].ids.clone();
                    ids.push(y);
                    next.push(Live {
                        ids,
                        score,
                        s: step.s.row(i).to_owned().insert_axis(Axis(0)),
                        d: step.d.row(i).to_owned().insert_axis(Axis(0)),
                    });
                }
            }
            live = next;
            if live.is_empty() || done.len() >= k {
                break;
            }
        }
        done.extend(live.into_iter().map(|l| Hypothesis {
            ids: l.ids,
            log_prob: l.score,
            finished: false,
        }));
        done.push(greedy);

        let mut best = 0;
        for (i, h) in done.iter().enumerate() {
            if h.log_prob > done[best].log_prob {
                best = i;
            }
        }
        Ok(done.swap_remove(best))
    }

    /// Log-probability of producing `output` and then, if `finished`,
    /// end-of-sequence.
    pub fn sequence_log_prob(
        &self,
        source: &[usize],
        output: &[usize],
        finished: bool,
    ) -> Result<f64> {
        let src = SourceBatch::<F>::new(&[source])?;
        let enc = self.encode(&src);
        let mut s = enc.init.clone();
        let mut d = enc.init.clone();
        let mut total = 0.0;
        let steps = output.len() + usize::from(finished);
        for t in 0..steps {
            let prev = (t > 0).then(|| &output[t - 1..t]);
            let emb = self.previous_embedding(prev, 1);
            let step = self.decoder_step(&enc, emb, &s, &d);
            let y = output.get(t).copied().unwrap_or(SymbolVocab::EOS_ID);
            total += step.log_probs[[0, y]].as_f64();
            s = step.s;
            d = step.d;
        }
        Ok(total)
    }
}

fn stack_rows<'a, F: Real>(rows: impl Iterator<Item = &'a Array2<F>>) -> Array2<F> {
    let views: Vec<_> = rows.map(|r| r.row(0)).collect();
    stack(Axis(0), &views).expect("uniform rows")
}
