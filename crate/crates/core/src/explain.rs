//! Per-token, per-category attribution.
//!
//! A prediction is decomposed in two directions that meet at the n-gram
//! features:
//!
//! * convolution attribution splits every feature dimension of an n-gram
//!   over the words of its window in proportion to each word's share of the
//!   bias-free convolution sum ([`conv_attribution`]);
//! * n-gram feature analysis keeps, per dimension, only the n-gram that won
//!   max-pooling ([`mask_features`]) and spreads its value over categories
//!   through the linear layer, ignoring the output bias
//!   ([`score_distribution`]).
//!
//! Multiplying the two ([`ngram_word_values`]) and summing over every
//! n-gram that covers a word gives that word's value per category. Because
//! each attribution column sums to one and exactly one n-gram survives per
//! dimension, the values of a sentence add up to `s - b` for every category.

use serde::{Deserialize, Serialize};

use crate::corpus::EncodedSentence;
use crate::error::{IcnnError, Result};
use crate::model::{ConvKernel, FeatureTrace, ModelParams, Window};
use crate::numerics::{Matrix, Real};
use crate::trainer::{forward_document, SentenceWeights};

/// How one n-gram's feature dimensions divide among its words:
/// `width × feat_dim`, columns summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct RelMatrix<F> {
    pub window: Window,
    pub values: Matrix<F>,
}

/// Per-dimension, per-category score contributions of one masked n-gram
/// feature: `feat_dim × num_classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoMatrix<F> {
    pub values: Matrix<F>,
}

impl<F: Real> ScoMatrix<F> {
    /// The n-gram's score vector `M · h'`.
    pub fn scores(&self) -> Vec<F> {
        self.values.column_sums()
    }
}

/// Splits each feature dimension of a window over its words.
///
/// `words` holds the window's embeddings, one row per word. For dimension
/// `k` the share of word `g` is the sum of `x_g ⊙ W[g, :, k]` divided by the
/// sum over the whole window (the convolution output without its bias). If
/// that sum is within `epsilon` of zero every word gets `1 / width`.
pub fn conv_attribution<F: Real>(
    window: Window,
    words: &Matrix<F>,
    kernel: &ConvKernel<F>,
    epsilon: f64,
) -> Result<RelMatrix<F>> {
    let n = window.width;
    let d_e = words.cols();
    let d_m = kernel.bias.len();
    if words.rows() != n || kernel.width != n {
        return Err(IcnnError::ShapeMismatch {
            context: "attribution window width",
            expected: n,
            actual: if words.rows() != n { words.rows() } else { kernel.width },
        });
    }
    if kernel.weights.rows() != n * d_e || kernel.weights.cols() != d_m {
        return Err(IcnnError::ShapeMismatch {
            context: "attribution kernel rows",
            expected: n * d_e,
            actual: kernel.weights.rows(),
        });
    }

    // Row sums of E_k per word, accumulated in f64.
    let mut shares = vec![0.0f64; n * d_m];
    for g in 0..n {
        let x = words.row(g);
        let share = &mut shares[g * d_m..(g + 1) * d_m];
        for (q, &xq) in x.iter().enumerate() {
            let xq = xq.as_f64();
            for (s, &w) in share.iter_mut().zip(kernel.weights.row(g * d_e + q)) {
                *s += xq * w.as_f64();
            }
        }
    }
    let mut values = Matrix::zeros(n, d_m);
    let uniform = F::lit(1.0 / n as f64);
    for k in 0..d_m {
        let total: f64 = (0..n).map(|g| shares[g * d_m + k]).sum();
        if total.abs() > epsilon {
            for g in 0..n {
                values.set(g, k, F::lit(shares[g * d_m + k] / total));
            }
        } else {
            for g in 0..n {
                values.set(g, k, uniform);
            }
        }
    }
    Ok(RelMatrix { window, values })
}

/// Keeps each n-gram feature only in the dimensions where it is the first
/// maximum over all n-grams; zero elsewhere. One row per n-gram.
pub fn mask_features<F: Real>(trace: &FeatureTrace<F>) -> Matrix<F> {
    let mut masked = Matrix::zeros(trace.post.rows(), trace.post.cols());
    for (j, &t) in trace.winners.iter().enumerate() {
        masked.set(t, j, trace.post.get(t, j));
    }
    masked
}

/// `Sco[k, c] = h'[k] · M[k, c]`.
pub fn score_distribution<F: Real>(masked: &[F], linear: &Matrix<F>) -> Result<ScoMatrix<F>> {
    if masked.len() != linear.rows() {
        return Err(IcnnError::ShapeMismatch {
            context: "masked feature length",
            expected: linear.rows(),
            actual: masked.len(),
        });
    }
    let mut values = Matrix::zeros(linear.rows(), linear.cols());
    for (k, &h) in masked.iter().enumerate() {
        if h == F::zero() {
            continue;
        }
        for (dst, &m) in values.row_mut(k).iter_mut().zip(linear.row(k)) {
            *dst = h * m;
        }
    }
    Ok(ScoMatrix { values })
}

/// `Rel · Sco`: row `q` is the value of the window's `q`-th word.
pub fn ngram_word_values<F: Real>(rel: &RelMatrix<F>, sco: &ScoMatrix<F>) -> Result<Matrix<F>> {
    rel.values.matmul(&sco.values)
}

/// Token-by-category attribution of one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributionReport<F> {
    pub tokens: Vec<String>,
    pub labels: Vec<String>,
    /// `tokens × categories`
    pub values: Matrix<F>,
    pub probs: Vec<F>,
    pub scores: Vec<F>,
    pub bias: Vec<F>,
    pub predicted: usize,
    pub pad_mask: Vec<bool>,
}

impl<F: Real> AttributionReport<F> {
    /// Column `c` of the value matrix.
    pub fn category_values(&self, category: usize) -> Vec<F> {
        (0..self.values.rows()).map(|i| self.values.get(i, category)).collect()
    }

    /// `max_c |Σ_i Val[i, c] - (s[c] - b[c])|`
    pub fn conservation_error(&self) -> f64 {
        let totals = self.values.column_sums();
        totals
            .iter()
            .zip(self.scores.iter().zip(&self.bias))
            .map(|(&t, (&s, &b))| (t.as_f64() - (s.as_f64() - b.as_f64())).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_record(&self) -> ReportRecord {
        ReportRecord {
            tokens: self.tokens.clone(),
            labels: self.labels.clone(),
            values: self.values.data().iter().map(|v| v.as_f64()).collect(),
            probs: self.probs.iter().map(|v| v.as_f64()).collect(),
            scores: self.scores.iter().map(|v| v.as_f64()).collect(),
            bias: self.bias.iter().map(|v| v.as_f64()).collect(),
            predicted: self.labels[self.predicted].clone(),
            pad_mask: self.pad_mask.clone(),
        }
    }
}

/// JSON form of an [`AttributionReport`]. `values` is row-major
/// `tokens × labels`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub tokens: Vec<String>,
    pub labels: Vec<String>,
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    pub scores: Vec<f64>,
    pub bias: Vec<f64>,
    pub predicted: String,
    pub pad_mask: Vec<bool>,
}

impl ReportRecord {
    pub fn conservation_error(&self) -> f64 {
        let n_t = self.labels.len();
        (0..n_t)
            .map(|c| {
                let total: f64 = self.values.iter().skip(c).step_by(n_t).sum();
                (total - (self.scores[c] - self.bias[c])).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Full pipeline for one encoded sentence.
pub fn explain<F: Real>(params: &ModelParams<F>, sentence: &EncodedSentence) -> Result<AttributionReport<F>> {
    let trace = params.forward(sentence)?;
    explain_trace(params, sentence, &trace)
}

pub fn explain_trace<F: Real>(
    params: &ModelParams<F>,
    sentence: &EncodedSentence,
    trace: &FeatureTrace<F>,
) -> Result<AttributionReport<F>> {
    let d_e = params.config.emb_dim;
    let n_t = params.num_classes();
    let masked = mask_features(trace);
    let mut values = Matrix::zeros(sentence.len(), n_t);

    for (t, &window) in trace.windows.iter().enumerate() {
        // N-grams that won no dimension contribute nothing.
        if masked.row(t).iter().all(|&h| h == F::zero()) {
            continue;
        }
        let sco = score_distribution(masked.row(t), &params.linear)?;
        let mut words = Matrix::zeros(window.width, d_e);
        for g in 0..window.width {
            words
                .row_mut(g)
                .copy_from_slice(params.embeddings.row(trace.ids[window.start + g] as usize));
        }
        let rel = conv_attribution(window, &words, params.kernel(window.width), params.config.epsilon)?;
        let word_values = ngram_word_values(&rel, &sco)?;
        for q in 0..window.width {
            for (dst, &v) in values.row_mut(window.start + q).iter_mut().zip(word_values.row(q)) {
                *dst += v;
            }
        }
    }

    Ok(AttributionReport {
        tokens: sentence.tokens.clone(),
        labels: params.labels.clone(),
        values,
        probs: trace.probs.clone(),
        scores: trace.scores.clone(),
        bias: params.linear_bias.clone(),
        predicted: trace.predicted(),
        pad_mask: sentence.pad_mask(),
    })
}

/// Attribution of a multi-sentence input.
#[derive(Clone, Debug)]
pub struct DocumentAttribution<F> {
    pub sentences: Vec<AttributionReport<F>>,
    pub weights: SentenceWeights<F>,
    /// Mixed probabilities.
    pub probs: Vec<F>,
    pub predicted: usize,
    /// Sentence values scaled by their weight and stacked in order.
    pub values: Matrix<F>,
}

impl<F: Real> DocumentAttribution<F> {
    pub fn tokens(&self) -> Vec<String> {
        self.sentences.iter().flat_map(|r| r.tokens.iter().cloned()).collect()
    }

    pub fn pad_mask(&self) -> Vec<bool> {
        self.sentences.iter().flat_map(|r| r.pad_mask.iter().copied()).collect()
    }

    /// `max_c |Σ_i Val[i, c] - Σ_k α_k (s_k[c] - b[c])|`
    pub fn conservation_error(&self) -> f64 {
        let totals = self.values.column_sums();
        totals
            .iter()
            .enumerate()
            .map(|(c, &t)| {
                let expected: f64 = self
                    .sentences
                    .iter()
                    .zip(&self.weights.alpha)
                    .map(|(r, &a)| a.as_f64() * (r.scores[c].as_f64() - r.bias[c].as_f64()))
                    .sum();
                (t.as_f64() - expected).abs()
            })
            .fold(0.0, f64::max)
    }

    /// The document as one report: stacked tokens, scaled values, mixed
    /// probabilities and weighted scores.
    pub fn to_report(&self) -> AttributionReport<F> {
        let first = &self.sentences[0];
        let n_t = first.labels.len();
        let mut scores = vec![F::zero(); n_t];
        for (r, &a) in self.sentences.iter().zip(&self.weights.alpha) {
            for (s, &v) in scores.iter_mut().zip(&r.scores) {
                *s += a * v;
            }
        }
        AttributionReport {
            tokens: self.tokens(),
            labels: first.labels.clone(),
            values: self.values.clone(),
            probs: self.probs.clone(),
            scores,
            bias: first.bias.clone(),
            predicted: self.predicted,
            pad_mask: self.pad_mask(),
        }
    }
}

pub fn explain_document<F: Real>(
    params: &ModelParams<F>,
    sentences: &[EncodedSentence],
) -> Result<DocumentAttribution<F>> {
    let doc = forward_document(params, sentences)?;
    let reports = sentences
        .iter()
        .zip(&doc.traces)
        .map(|(s, t)| explain_trace(params, s, t))
        .collect::<Result<Vec<_>>>()?;
    let total_tokens: usize = reports.iter().map(|r| r.tokens.len()).sum();
    let mut values = Matrix::zeros(total_tokens, params.num_classes());
    let mut row = 0;
    for (report, &alpha) in reports.iter().zip(&doc.weights.alpha) {
        for i in 0..report.values.rows() {
            for (dst, &v) in values.row_mut(row).iter_mut().zip(report.values.row(i)) {
                *dst = alpha * v;
            }
            row += 1;
        }
    }
    let predicted = crate::numerics::argmax(&doc.probs);
    Ok(DocumentAttribution {
        sentences: reports,
        weights: doc.weights,
        probs: doc.probs,
        predicted,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_support::{hand_model, tiny_model};
    use crate::model::{ConvKernel, Window};

    fn kernel(width: usize, rows: Vec<Vec<f64>>) -> ConvKernel<f64> {
        let cols = rows[0].len();
        ConvKernel {
            width,
            weights: Matrix::from_rows(&rows).unwrap(),
            bias: vec![0.0; cols],
        }
    }

    fn window2() -> Window {
        Window { start: 0, width: 2 }
    }

    #[test]
    fn rel_ratio_branch() {
        let words = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        // W[:, :, 0] = [[1, 0], [0, 1]] laid out as (word, component) rows.
        let k = kernel(2, vec![vec![1.0], vec![0.0], vec![0.0], vec![1.0]]);
        let rel = conv_attribution(window2(), &words, &k, 1e-6).unwrap();
        assert!((rel.values.get(0, 0) - 0.2).abs() < 1e-12);
        assert!((rel.values.get(1, 0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn rel_fallback_branch() {
        let words = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let k = kernel(2, vec![vec![1.0], vec![0.0], vec![0.0], vec![-0.25]]);
        let rel = conv_attribution(window2(), &words, &k, 1e-6).unwrap();
        assert_eq!(rel.values.data(), &[0.5, 0.5]);
    }

    #[test]
    fn rel_shape_errors() {
        let words = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let k = kernel(2, vec![vec![1.0], vec![0.0], vec![0.0], vec![1.0]]);
        assert!(conv_attribution(window2(), &words, &k, 1e-6).is_err());
    }

    #[test]
    fn masking_examples() {
        let m = tiny_model(0);
        let trace = m.forward_ids(&[3, 7]).unwrap();
        assert_eq!(mask_features(&trace).data(), trace.post.data());

        // One dimension with values 0.2, 0.9, 0.9 over three n-grams.
        let mut trace = m.forward_ids(&[3, 7, 9, 4]).unwrap();
        trace.post = Matrix::zeros(3, 1);
        trace.post.data_mut().copy_from_slice(&[0.2, 0.9, 0.9]);
        trace.windows.truncate(3);
        trace.winners = vec![1];
        trace.sentence = vec![0.9];
        let masked = mask_features(&trace);
        assert_eq!(masked.data(), &[0.0, 0.9, 0.0]);
    }

    #[test]
    fn score_distribution_example() {
        let m = Matrix::from_rows(&[vec![2.0, -1.0], vec![3.0, 5.0]]).unwrap();
        let sco = score_distribution(&[1.0, 0.0], &m).unwrap();
        assert_eq!(sco.values.data(), &[2.0, -1.0, 0.0, 0.0]);
        assert_eq!(sco.scores(), vec![2.0, -1.0]);
        assert_eq!(score_distribution(&[0.0, 0.0], &m).unwrap().values.data(), &[0.0; 4]);
        assert!(score_distribution(&[1.0], &m).is_err());
    }

    #[test]
    fn word_values_example() {
        let rel = RelMatrix {
            window: window2(),
            values: Matrix::from_rows(&[vec![0.2], vec![0.8]]).unwrap(),
        };
        let sco = ScoMatrix {
            values: Matrix::from_rows(&[vec![2.0, -1.0]]).unwrap(),
        };
        let v = ngram_word_values(&rel, &sco).unwrap();
        let expected: [f64; 4] = [0.4, -0.2, 1.6, -0.8];
        for (a, b) in v.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }

        let uniform = RelMatrix {
            window: window2(),
            values: Matrix::from_rows(&[vec![0.5], vec![0.5]]).unwrap(),
        };
        let v = ngram_word_values(&uniform, &sco).unwrap();
        assert_eq!(v.row(0), v.row(1));
        assert_eq!(v.column_sums(), vec![2.0, -1.0]);
    }

    #[test]
    fn hand_model_conservation() {
        let m = hand_model();
        let sentence = EncodedSentence {
            ids: vec![2, 3],
            tokens: vec!["a".into(), "b".into()],
        };
        let report = explain(&m, &sentence).unwrap();
        let col0 = report.category_values(0);
        assert!((col0.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        // x = 1 and 2 with unit weights: shares 1/3 and 2/3.
        assert!((col0[0] - 1.0).abs() < 1e-12);
        assert!((col0[1] - 2.0).abs() < 1e-12);
        assert!(report.conservation_error() < 1e-12);
    }

    #[test]
    fn document_reductions() {
        let m = tiny_model(6);
        let s = EncodedSentence {
            ids: vec![4, 9, 13, 2],
            tokens: (0..4).map(|i| format!("t{i}")).collect(),
        };
        let single = explain(&m, &s).unwrap();
        let doc = explain_document(&m, std::slice::from_ref(&s)).unwrap();
        assert_eq!(doc.weights.alpha, vec![1.0]);
        assert_eq!(doc.values, single.values);

        let doc = explain_document(&m, &[s.clone(), s.clone()]).unwrap();
        assert_eq!(doc.weights.alpha, vec![0.5, 0.5]);
        let w = s.len();
        for i in 0..w {
            assert_eq!(doc.values.row(i), doc.values.row(i + w));
            for c in 0..2 {
                assert!((doc.values.get(i, c) - 0.5 * single.values.get(i, c)).abs() < 1e-15);
            }
        }
        assert!(doc.conservation_error() < 1e-12);
        let merged = doc.to_report();
        assert_eq!(merged.tokens.len(), 2 * w);
    }

    #[test]
    fn record_round_trip_keeps_conservation() {
        let m = tiny_model(2).cast::<f32>();
        let s = m.encode("w3 w5 w7 w11 w13");
        let report = explain(&m, &s).unwrap();
        let json = serde_json::to_string(&report.to_record()).unwrap();
        let back: ReportRecord = serde_json::from_str(&json).unwrap();
        assert!(back.conservation_error() <= 1e-3);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        for field in ["tokens", "labels", "values", "probs", "scores", "predicted", "pad_mask"] {
            assert!(value.get(field).is_some(), "missing {field}");
        }
    }

    mod props {
        use super::super::*;
        use crate::model::test_support::tiny_model;
        use crate::model::ConvKernel;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rel_columns_sum_to_one(
                width in 2usize..6,
                d_e in 1usize..5,
                d_m in 1usize..5,
                data in prop::collection::vec(-1.0f64..1.0, 200),
                zero_col in any::<bool>(),
            ) {
                let words = Matrix::from_vec(width, d_e, data[..width * d_e].to_vec()).unwrap();
                let mut weights = Matrix::from_vec(width * d_e, d_m, data[50..50 + width * d_e * d_m].to_vec()).unwrap();
                if zero_col {
                    for r in 0..weights.rows() { weights.set(r, 0, 0.0); }
                }
                let kernel = ConvKernel { width, weights, bias: vec![0.3; d_m] };
                let rel = conv_attribution(Window { start: 0, width }, &words, &kernel, 1e-6).unwrap();
                for s in rel.values.column_sums() {
                    prop_assert!((s - 1.0).abs() <= 1e-5, "column sum {}", s);
                }
            }

            #[test]
            fn conservation_holds(seed in 0u64..300, ids in prop::collection::vec(0u32..20, 2..10)) {
                let m = tiny_model(seed);
                let s = EncodedSentence { tokens: vec![String::new(); ids.len()], ids };
                let report = explain(&m, &s).unwrap();
                prop_assert!(report.conservation_error() <= 1e-9);

                let trace = m.forward(&s).unwrap();
                let masked = mask_features(&trace);
                let mut total = [0.0; 2];
                for t in 0..trace.num_ngrams() {
                    let sco = score_distribution(masked.row(t), &m.linear).unwrap();
                    for (acc, v) in total.iter_mut().zip(sco.scores()) { *acc += v; }
                }
                for (c, t) in total.iter().enumerate() {
                    prop_assert!((t - (trace.scores[c] - m.linear_bias[c])).abs() <= 1e-9);
                }
                prop_assert_eq!(masked.column_sums(), trace.sentence.clone());
            }
        }
    }
}
