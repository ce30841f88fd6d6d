//! The classifier: embeddings, convolutions of every width from 2 to `l`,
//! ReLU, one max-pool shared by all n-grams of all widths, and a linear
//! layer followed by softmax.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedSentence, Vocabulary, MIN_SENTENCE_LEN};
use crate::error::{IcnnError, Result};
use crate::numerics::{axpy, softmax, Matrix, Real};

pub const INIT_RANGE: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub emb_dim: usize,
    pub feat_dim: usize,
    /// Kernel widths are `2..=max_kernel`.
    pub max_kernel: usize,
    pub num_classes: usize,
    /// Threshold below which convolution attribution falls back to a
    /// uniform split.
    pub epsilon: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(num_classes: usize) -> Self {
        Self {
            emb_dim: 50,
            feat_dim: 50,
            max_kernel: 6,
            num_classes,
            epsilon: DEFAULT_EPSILON,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(IcnnError::InvalidConfig(m.to_string()));
        if self.emb_dim == 0 || self.feat_dim == 0 {
            return bad("embedding and feature dimensions must be at least 1");
        }
        if self.max_kernel < 2 {
            return bad("maximum kernel width must be at least 2");
        }
        if self.num_classes < 2 {
            return bad("at least two categories are required");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }

    pub fn widths(&self) -> std::ops::RangeInclusive<usize> {
        2..=self.max_kernel
    }
}

/// Convolution kernel of one width. `weights` has `width * emb_dim` rows
/// (word offset major, embedding component minor) and `feat_dim` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel<F> {
    pub width: usize,
    pub weights: Matrix<F>,
    pub bias: Vec<F>,
}

impl<F: Real> ConvKernel<F> {
    /// Rows of `weights` belonging to word `offset` of the window.
    pub fn word_slice(&self, offset: usize, emb_dim: usize) -> std::ops::Range<usize> {
        offset * emb_dim..(offset + 1) * emb_dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F> {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub labels: Vec<String>,
    pub embeddings: Matrix<F>,
    /// One kernel per width, ascending from 2.
    pub kernels: Vec<ConvKernel<F>>,
    /// `feat_dim × num_classes`.
    pub linear: Matrix<F>,
    pub linear_bias: Vec<F>,
}

/// Uniform `[-0.1, 0.1]` weights from a seeded generator, zero biases.
pub fn init_model<F: Real>(config: ModelConfig, vocab: Vocabulary, labels: Vec<String>) -> Result<ModelParams<F>> {
    config.validate()?;
    if labels.len() != config.num_classes {
        return Err(IcnnError::ShapeMismatch {
            context: "label names",
            expected: config.num_classes,
            actual: labels.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut uniform = |rows: usize, cols: usize| {
        let data = (0..rows * cols)
            .map(|_| F::lit(rng.gen_range(-INIT_RANGE..=INIT_RANGE)))
            .collect();
        Matrix::from_vec(rows, cols, data).expect("sized")
    };
    let (d_e, d_m) = (config.emb_dim, config.feat_dim);
    let embeddings = uniform(vocab.len(), d_e);
    let kernels = config
        .widths()
        .map(|width| ConvKernel {
            width,
            weights: uniform(width * d_e, d_m),
            bias: vec![F::zero(); d_m],
        })
        .collect();
    let linear = uniform(d_m, config.num_classes);
    Ok(ModelParams {
        config,
        vocab,
        labels,
        embeddings,
        kernels,
        linear,
        linear_bias: vec![F::zero(); config.num_classes],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Window {
    pub start: usize,
    pub width: usize,
}

impl Window {
    pub fn contains(&self, pos: usize) -> bool {
        pos >= self.start && pos < self.start + self.width
    }
}

/// Everything the interpretation stack needs from one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTrace<F> {
    pub ids: Vec<u32>,
    /// N-grams ordered by width, then start position.
    pub windows: Vec<Window>,
    /// Convolution outputs before ReLU, one row per n-gram.
    pub pre: Matrix<F>,
    /// Convolution outputs after ReLU.
    pub post: Matrix<F>,
    /// Pooled sentence vector.
    pub sentence: Vec<F>,
    /// For each feature dimension, the first n-gram attaining the maximum.
    pub winners: Vec<usize>,
    pub scores: Vec<F>,
    pub probs: Vec<F>,
}

impl<F: Real> FeatureTrace<F> {
    pub fn num_ngrams(&self) -> usize {
        self.windows.len()
    }

    pub fn predicted(&self) -> usize {
        crate::numerics::argmax(&self.scores)
    }
}

/// Number of n-grams for a sentence of length `len`.
pub fn ngram_count(len: usize, max_kernel: usize) -> usize {
    (2..=max_kernel.min(len)).map(|n| len - n + 1).sum()
}

impl<F: Real> ModelParams<F> {
    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, name: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| IcnnError::UnknownCategory {
                name: name.to_string(),
                valid: self.labels.clone(),
            })
    }

    pub fn kernel(&self, width: usize) -> &ConvKernel<F> {
        &self.kernels[width - 2]
    }

    pub fn encode(&self, text: &str) -> EncodedSentence {
        self.vocab.encode_text(text)
    }

    /// Convolution output of one window before ReLU.
    pub fn convolve(&self, ids: &[u32], window: Window) -> Vec<F> {
        let d_e = self.config.emb_dim;
        let kernel = self.kernel(window.width);
        let mut out = kernel.bias.clone();
        for g in 0..window.width {
            let x = self.embeddings.row(ids[window.start + g] as usize);
            for (q, &xq) in x.iter().enumerate() {
                axpy(xq, kernel.weights.row(g * d_e + q), &mut out);
            }
        }
        out
    }

    pub fn forward(&self, sentence: &EncodedSentence) -> Result<FeatureTrace<F>> {
        self.forward_ids(&sentence.ids)
    }

    pub fn forward_ids(&self, ids: &[u32]) -> Result<FeatureTrace<F>> {
        let w = ids.len();
        if w < MIN_SENTENCE_LEN {
            return Err(IcnnError::SentenceTooShort(w));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.embeddings.rows()) {
            return Err(IcnnError::IndexOutOfRange {
                index: bad as usize,
                len: self.embeddings.rows(),
            });
        }
        let d_m = self.config.feat_dim;
        let windows: Vec<Window> = (2..=self.config.max_kernel.min(w))
            .flat_map(|width| (0..=w - width).map(move |start| Window { start, width }))
            .collect();

        let mut pre = Matrix::zeros(windows.len(), d_m);
        for (t, &window) in windows.iter().enumerate() {
            pre.row_mut(t).copy_from_slice(&self.convolve(ids, window));
        }
        let mut post = pre.clone();
        for v in post.data_mut() {
            *v = v.max(F::zero());
        }

        let mut sentence = post.row(0).to_vec();
        let mut winners = vec![0usize; d_m];
        for t in 1..windows.len() {
            for (j, &h) in post.row(t).iter().enumerate() {
                if h > sentence[j] {
                    sentence[j] = h;
                    winners[j] = t;
                }
            }
        }

        let mut scores = self.linear.vec_mul(&sentence);
        for (s, &b) in scores.iter_mut().zip(&self.linear_bias) {
            *s += b;
        }
        let probs = softmax(&scores)?;
        Ok(FeatureTrace {
            ids: ids.to_vec(),
            windows,
            pre,
            post,
            sentence,
            winners,
            scores,
            probs,
        })
    }

    /// Gradients of `grad_scores · s` with respect to every parameter.
    pub fn backward(&self, trace: &FeatureTrace<F>, grad_scores: &[F]) -> Gradients<F> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(trace, grad_scores, &mut grads);
        grads
    }

    /// Accumulates into `grads` instead of allocating.
    pub fn backward_into(&self, trace: &FeatureTrace<F>, grad_scores: &[F], grads: &mut Gradients<F>) {
        let d_e = self.config.emb_dim;
        for (gb, &gs) in grads.linear_bias.iter_mut().zip(grad_scores) {
            *gb += gs;
        }
        for (k, &vk) in trace.sentence.iter().enumerate() {
            if vk != F::zero() {
                axpy(vk, grad_scores, grads.linear.row_mut(k));
            }
        }
        let grad_sentence = self.linear.mul_vec(grad_scores);

        for (k, (&t, &gv)) in trace.winners.iter().zip(&grad_sentence).enumerate() {
            // Pooling routes to the winner only; ReLU passes positive inputs only.
            if gv == F::zero() || trace.pre.get(t, k) <= F::zero() {
                continue;
            }
            let window = trace.windows[t];
            let ki = window.width - 2;
            grads.kernels[ki].bias[k] += gv;
            for g in 0..window.width {
                let id = trace.ids[window.start + g];
                let x = self.embeddings.row(id as usize);
                let kernel_grad = &mut grads.kernels[ki].weights;
                for (q, &xq) in x.iter().enumerate() {
                    let r = g * d_e + q;
                    let cur = kernel_grad.get(r, k);
                    kernel_grad.set(r, k, cur + xq * gv);
                }
                let emb_grad = grads.embedding_row(id, d_e);
                for (q, eg) in emb_grad.iter_mut().enumerate() {
                    *eg += self.kernels[ki].weights.get(g * d_e + q, k) * gv;
                }
            }
        }
    }

    /// Flattened parameters in declared order: embeddings, then for each
    /// width the kernel weights and bias, then the linear weights and bias.
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = vec![self.embeddings.data()];
        for k in &self.kernels {
            out.push(k.weights.data());
            out.push(&k.bias);
        }
        out.push(self.linear.data());
        out.push(&self.linear_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = vec![self.embeddings.data_mut()];
        for k in &mut self.kernels {
            out.push(k.weights.data_mut());
            out.push(&mut k.bias);
        }
        out.push(self.linear.data_mut());
        out.push(&mut self.linear_bias);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<F> {
        self.tensors().concat()
    }

    pub fn assign_flat(&mut self, flat: &[F]) -> Result<()> {
        let total = self.num_parameters();
        if flat.len() != total {
            return Err(IcnnError::ShapeMismatch {
                context: "flat parameters",
                expected: total,
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            config: self.config,
            vocab: self.vocab.clone(),
            labels: self.labels.clone(),
            embeddings: self.embeddings.cast(),
            kernels: self
                .kernels
                .iter()
                .map(|k| ConvKernel {
                    width: k.width,
                    weights: k.weights.cast(),
                    bias: k.bias.iter().map(|&b| G::lit(b.as_f64())).collect(),
                })
                .collect(),
            linear: self.linear.cast(),
            linear_bias: self.linear_bias.iter().map(|&b| G::lit(b.as_f64())).collect(),
        }
    }
}

/// Parameter gradients. Embedding gradients are kept per touched row.
#[derive(Clone, Debug)]
pub struct Gradients<F> {
    pub embedding_rows: Vec<(u32, Vec<F>)>,
    row_slots: HashMap<u32, usize>,
    pub kernels: Vec<ConvKernel<F>>,
    pub linear: Matrix<F>,
    pub linear_bias: Vec<F>,
}

impl<F: Real> Gradients<F> {
    pub fn zeros_like(params: &ModelParams<F>) -> Self {
        Self {
            embedding_rows: Vec::new(),
            row_slots: HashMap::new(),
            kernels: params
                .kernels
                .iter()
                .map(|k| ConvKernel {
                    width: k.width,
                    weights: Matrix::zeros(k.weights.rows(), k.weights.cols()),
                    bias: vec![F::zero(); k.bias.len()],
                })
                .collect(),
            linear: Matrix::zeros(params.linear.rows(), params.linear.cols()),
            linear_bias: vec![F::zero(); params.linear_bias.len()],
        }
    }

    fn embedding_row(&mut self, id: u32, dim: usize) -> &mut [F] {
        let slot = *self.row_slots.entry(id).or_insert_with(|| {
            self.embedding_rows.push((id, vec![F::zero(); dim]));
            self.embedding_rows.len() - 1
        });
        &mut self.embedding_rows[slot].1
    }

    /// Resets to zero, keeping allocations.
    pub fn clear(&mut self) {
        self.embedding_rows.clear();
        self.row_slots.clear();
        for k in &mut self.kernels {
            k.weights.data_mut().fill(F::zero());
            k.bias.fill(F::zero());
        }
        self.linear.data_mut().fill(F::zero());
        self.linear_bias.fill(F::zero());
    }

    /// Dense gradient in the same order as [`ModelParams::flatten`].
    pub fn flatten(&self, vocab_size: usize, emb_dim: usize) -> Vec<F> {
        let mut out = vec![F::zero(); vocab_size * emb_dim];
        for (id, row) in &self.embedding_rows {
            let base = *id as usize * emb_dim;
            for (o, &g) in out[base..base + emb_dim].iter_mut().zip(row) {
                *o += g;
            }
        }
        for k in &self.kernels {
            out.extend_from_slice(k.weights.data());
            out.extend_from_slice(&k.bias);
        }
        out.extend_from_slice(self.linear.data());
        out.extend_from_slice(&self.linear_bias);
        out
    }

    pub fn is_zero(&self) -> bool {
        let zero = |xs: &[F]| xs.iter().all(|&x| x == F::zero());
        self.embedding_rows.iter().all(|(_, r)| zero(r))
            && self.kernels.iter().all(|k| zero(k.weights.data()) && zero(&k.bias))
            && zero(self.linear.data())
            && zero(&self.linear_bias)
    }
}
