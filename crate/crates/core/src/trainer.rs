//! Training loops, multi-sentence weighting and evaluation.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_vocab, split_sentences, tokenize, Dataset, EncodedSentence, LabeledText, TokenizerMode, Vocabulary,
};
use crate::error::{IcnnError, Result};
use crate::model::{init_model, FeatureTrace, Gradients, ModelConfig, ModelParams};
use crate::numerics::{adam_step, argmax, cross_entropy_with_grad, log_sum_exp, softmax, AdamConfig, AdamState, Real};
use crate::serialize::save_model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Each example is one sentence.
    Single,
    /// Examples are split into sentences whose predictions are mixed with
    /// score-derived weights.
    MultiSentence,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub mode: TrainMode,
    pub tokenizer: TokenizerMode,
    pub min_freq: usize,
    /// Fraction of the training set held out (seeded) for per-epoch accuracy.
    pub holdout_fraction: f64,
    /// Written after every epoch when set.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            lr: 1e-3,
            seed: 42,
            mode: TrainMode::Single,
            tokenizer: TokenizerMode::Word,
            min_freq: 1,
            holdout_fraction: 0.1,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(IcnnError::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(IcnnError::InvalidConfig("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(IcnnError::InvalidConfig("holdout fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Accuracy on the held-out slice, when there is one.
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: ModelParams<f32>,
    pub history: Vec<EpochRecord>,
    /// Per-step losses of the first epoch.
    pub first_epoch_losses: Vec<f64>,
}

/// Per-sentence mixture weights: softmax over sentences of each sentence's
/// largest score.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceWeights<F> {
    pub alpha: Vec<F>,
    pub scores: Vec<Vec<F>>,
    pub probs: Vec<Vec<F>>,
}

pub fn sentence_weights<F: Real>(scores: &[Vec<F>]) -> Result<SentenceWeights<F>> {
    if scores.is_empty() {
        return Err(IcnnError::EmptyInput);
    }
    let maxima: Vec<F> = scores
        .iter()
        .map(|s| s.iter().copied().fold(F::neg_infinity(), F::max))
        .collect();
    let alpha = softmax(&maxima)?;
    let probs = scores.iter().map(|s| softmax(s)).collect::<Result<Vec<_>>>()?;
    Ok(SentenceWeights {
        alpha,
        scores: scores.to_vec(),
        probs,
    })
}

#[derive(Clone, Debug)]
pub struct DocumentForward<F> {
    pub probs: Vec<F>,
    pub weights: SentenceWeights<F>,
    pub traces: Vec<FeatureTrace<F>>,
}

/// Mixes per-sentence probabilities with [`sentence_weights`].
pub fn forward_document<F: Real>(params: &ModelParams<F>, sentences: &[EncodedSentence]) -> Result<DocumentForward<F>> {
    if sentences.is_empty() {
        return Err(IcnnError::EmptyInput);
    }
    let traces = sentences
        .iter()
        .map(|s| params.forward(s))
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<Vec<F>> = traces.iter().map(|t| t.scores.clone()).collect();
    let weights = sentence_weights(&scores)?;
    let mut probs = vec![F::zero(); params.num_classes()];
    for (a, trace) in weights.alpha.iter().zip(&traces) {
        for (p, &pk) in probs.iter_mut().zip(&trace.probs) {
            *p += *a * pk;
        }
    }
    Ok(DocumentForward { probs, weights, traces })
}

/// Splits `text` into sentences and encodes each; an input with no
/// sentences becomes one padded empty sentence.
pub fn encode_document(text: &str, vocab: &Vocabulary) -> Vec<EncodedSentence> {
    let mut out: Vec<EncodedSentence> = split_sentences(text)
        .iter()
        .map(|s| tokenize(s, vocab.mode()))
        .filter(|t| !t.is_empty())
        .map(|t| vocab.encode(&t))
        .collect();
    if out.is_empty() {
        out.push(vocab.encode(&[]));
    }
    out
}

/// `-log(Σ_k α_k p_k[gold])` with the given weights held constant.
pub fn mixture_loss<F: Real>(traces: &[FeatureTrace<F>], alpha: &[F], gold: usize) -> F {
    let terms: Vec<F> = traces
        .iter()
        .zip(alpha)
        .map(|(t, &a)| a.ln() + t.scores[gold] - log_sum_exp(&t.scores))
        .collect();
    -log_sum_exp(&terms)
}

/// Loss and score gradients for one document. The weights are treated as
/// constants: sentence `k` receives `r_k (p_k - onehot(gold))` with
/// responsibility `r_k = α_k p_k[gold] / Σ_j α_j p_j[gold]`.
pub fn mixture_loss_and_score_grads<F: Real>(
    traces: &[FeatureTrace<F>],
    alpha: &[F],
    gold: usize,
) -> Result<(F, Vec<Vec<F>>)> {
    if traces.len() == 1 {
        let (loss, grad) = cross_entropy_with_grad(&traces[0].scores, gold)?;
        return Ok((loss, vec![grad]));
    }
    if let Some(t) = traces.iter().find(|t| gold >= t.scores.len()) {
        return Err(IcnnError::IndexOutOfRange {
            index: gold,
            len: t.scores.len(),
        });
    }
    let log_terms: Vec<F> = traces
        .iter()
        .zip(alpha)
        .map(|(t, &a)| a.ln() + t.scores[gold] - log_sum_exp(&t.scores))
        .collect();
    let log_total = log_sum_exp(&log_terms);
    let grads = traces
        .iter()
        .zip(&log_terms)
        .map(|(t, &lt)| {
            let r = (lt - log_total).exp();
            let mut g: Vec<F> = t.probs.iter().map(|&p| r * p).collect();
            g[gold] -= r;
            g
        })
        .collect();
    Ok((-log_total, grads))
}

struct Optimizer {
    states: Vec<AdamState<f32>>,
    emb_grad: Vec<f32>,
}

impl Optimizer {
    fn new(params: &ModelParams<f32>, config: AdamConfig) -> Self {
        Self {
            states: params
                .tensors()
                .iter()
                .map(|t| AdamState::new(t.len(), config))
                .collect(),
            emb_grad: vec![0.0; params.embeddings.data().len()],
        }
    }

    fn step(&mut self, params: &mut ModelParams<f32>, grads: &Gradients<f32>) -> Result<()> {
        let d_e = params.config.emb_dim;
        for (id, row) in &grads.embedding_rows {
            let base = *id as usize * d_e;
            self.emb_grad[base..base + d_e].copy_from_slice(row);
        }
        let mut grad_tensors: Vec<&[f32]> = vec![&self.emb_grad];
        for k in &grads.kernels {
            grad_tensors.push(k.weights.data());
            grad_tensors.push(&k.bias);
        }
        grad_tensors.push(grads.linear.data());
        grad_tensors.push(&grads.linear_bias);

        for ((p, g), state) in params.tensors_mut().into_iter().zip(grad_tensors).zip(&mut self.states) {
            adam_step(p, g, state)?;
        }
        for (id, _) in &grads.embedding_rows {
            let base = *id as usize * d_e;
            self.emb_grad[base..base + d_e].fill(0.0);
        }
        Ok(())
    }
}

struct Prepared {
    documents: Vec<Vec<EncodedSentence>>,
    gold: Vec<usize>,
}

fn prepare(examples: &[LabeledText], params: &ModelParams<f32>, mode: TrainMode) -> Result<Prepared> {
    let mut documents = Vec::with_capacity(examples.len());
    let mut gold = Vec::with_capacity(examples.len());
    for ex in examples {
        gold.push(
            params
                .labels
                .iter()
                .position(|l| *l == ex.label)
                .ok_or_else(|| IcnnError::UnknownLabel(ex.label.clone()))?,
        );
        documents.push(match mode {
            TrainMode::Single => vec![params.encode(&ex.text)],
            TrainMode::MultiSentence => encode_document(&ex.text, &params.vocab),
        });
    }
    Ok(Prepared { documents, gold })
}

/// Predicted class for an encoded document.
pub fn predict_document<F: Real>(params: &ModelParams<F>, sentences: &[EncodedSentence]) -> Result<(usize, Vec<F>)> {
    let probs = if sentences.len() == 1 {
        params.forward(&sentences[0])?.probs
    } else {
        forward_document(params, sentences)?.probs
    };
    Ok((argmax(&probs), probs))
}

pub fn train(dataset: &Dataset, config: &TrainConfig, model_config: ModelConfig) -> Result<TrainOutcome> {
    train_with(dataset, config, model_config, |_| {})
}

/// Like [`train`], calling `on_epoch` after each epoch.
pub fn train_with<C>(
    dataset: &Dataset,
    config: &TrainConfig,
    model_config: ModelConfig,
    mut on_epoch: C,
) -> Result<TrainOutcome>
where
    C: FnMut(&EpochRecord),
{
    config.validate()?;
    if dataset.is_empty() {
        return Err(IcnnError::EmptyDataset);
    }
    let mut model_config = model_config;
    model_config.num_classes = dataset.labels.len();
    let vocab = build_vocab(&dataset.examples, config.tokenizer, config.min_freq);
    let mut params: ModelParams<f32> = init_model(model_config, vocab, dataset.labels.clone())?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let holdout_len = (dataset.len() as f64 * config.holdout_fraction).floor() as usize;
    let (held, train_idx) = order.split_at(holdout_len);
    let pick = |idx: &[usize]| idx.iter().map(|&i| dataset.examples[i].clone()).collect::<Vec<_>>();
    let train_set = prepare(&pick(train_idx), &params, config.mode)?;
    let held_set = prepare(&pick(held), &params, config.mode)?;

    let mut optimizer = Optimizer::new(
        &params,
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    );
    let mut grads = Gradients::zeros_like(&params);
    let mut history = Vec::with_capacity(config.epochs);
    let mut first_epoch_losses = Vec::new();
    let mut steps: Vec<usize> = (0..train_set.documents.len()).collect();

    for epoch in 1..=config.epochs {
        steps.shuffle(&mut rng);
        let mut total = 0.0f64;
        for &i in &steps {
            let sentences = &train_set.documents[i];
            let gold = train_set.gold[i];
            let traces = sentences
                .iter()
                .map(|s| params.forward(s))
                .collect::<Result<Vec<_>>>()?;
            let alpha = if traces.len() == 1 {
                vec![1.0]
            } else {
                let scores: Vec<Vec<f32>> = traces.iter().map(|t| t.scores.clone()).collect();
                sentence_weights(&scores)?.alpha
            };
            let (loss, score_grads) = mixture_loss_and_score_grads(&traces, &alpha, gold)?;
            grads.clear();
            for (trace, gs) in traces.iter().zip(&score_grads) {
                params.backward_into(trace, gs, &mut grads);
            }
            optimizer.step(&mut params, &grads)?;
            total += loss as f64;
            if epoch == 1 {
                first_epoch_losses.push(loss as f64);
            }
        }
        let accuracy = if held_set.documents.is_empty() {
            None
        } else {
            Some(accuracy_on(&params, &held_set)?)
        };
        let record = EpochRecord {
            epoch,
            loss: total / steps.len().max(1) as f64,
            accuracy,
        };
        on_epoch(&record);
        history.push(record);
        if let Some(path) = &config.checkpoint {
            save_model(&params, path)?;
        }
    }
    Ok(TrainOutcome {
        model: params,
        history,
        first_epoch_losses,
    })
}

fn accuracy_on(params: &ModelParams<f32>, set: &Prepared) -> Result<f64> {
    let mut correct = 0usize;
    for (doc, &gold) in set.documents.iter().zip(&set.gold) {
        if predict_document(params, doc)?.0 == gold {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.documents.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub labels: Vec<String>,
    /// `confusion[gold][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(params: &ModelParams<f32>, dataset: &Dataset, mode: TrainMode) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(IcnnError::EmptyDataset);
    }
    let set = prepare(&dataset.examples, params, mode)?;
    let n = params.num_classes();
    let mut confusion = vec![vec![0usize; n]; n];
    let mut correct = 0;
    for (doc, &gold) in set.documents.iter().zip(&set.gold) {
        let (pred, _) = predict_document(params, doc)?;
        confusion[gold][pred] += 1;
        if pred == gold {
            correct += 1;
        }
    }
    Ok(Evaluation {
        accuracy: correct as f64 / dataset.len() as f64,
        correct,
        total: dataset.len(),
        labels: params.labels.clone(),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_support::tiny_model;
    use crate::numerics::finite_difference_gradcheck;
    use crate::serialize::encode_model;

    fn enc(ids: &[u32]) -> EncodedSentence {
        EncodedSentence {
            ids: ids.to_vec(),
            tokens: ids.iter().map(|i| format!("w{i}")).collect(),
        }
    }

    #[test]
    fn weights_examples() {
        let w = sentence_weights(&[vec![2.0f64, 1.0], vec![0.5, 2.0]]).unwrap();
        assert!((w.alpha[0] - 0.5).abs() < 1e-12 && (w.alpha[1] - 0.5).abs() < 1e-12);

        let w = sentence_weights(&[vec![1.0f64, -3.0], vec![0.0, -1.0]]).unwrap();
        // e / (e + 1)
        assert!((w.alpha[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((w.alpha[1] - 0.268_941_421_369_995_1).abs() < 1e-12);

        let w = sentence_weights(&[vec![4.0f64, 1.0]]).unwrap();
        assert_eq!(w.alpha, vec![1.0]);

        assert!(sentence_weights::<f64>(&[]).is_err());
    }

    #[test]
    fn document_forward_properties() {
        let m = tiny_model(4);
        let s = enc(&[3, 8, 12, 5]);
        let single = m.forward(&s).unwrap();
        let doc = forward_document(&m, &[s.clone(), s.clone()]).unwrap();
        for (a, b) in doc.probs.iter().zip(&single.probs) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(forward_document(&m, &[]).is_err());
    }

    #[test]
    fn mixture_of_opposite_certainties() {
        // Equal weights, p_1 = [1, 0], p_2 = [0, 1].
        let mut p = vec![0.0f64; 2];
        let alpha = [0.5, 0.5];
        for (a, pk) in alpha.iter().zip([[1.0, 0.0], [0.0, 1.0]]) {
            for c in 0..2 {
                p[c] += a * pk[c];
            }
        }
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn frozen_alpha_gradcheck() {
        let sentences = [enc(&[2, 5, 9, 11, 3]), enc(&[7, 4, 16]), enc(&[19, 6, 2, 10])];
        for seed in 0..4 {
            let m = tiny_model(seed);
            let gold = (seed % 2) as usize;
            let traces: Vec<_> = sentences.iter().map(|s| m.forward(s).unwrap()).collect();
            let scores: Vec<Vec<f64>> = traces.iter().map(|t| t.scores.clone()).collect();
            let alpha = sentence_weights(&scores).unwrap().alpha;
            let (loss, gs) = mixture_loss_and_score_grads(&traces, &alpha, gold).unwrap();
            assert!((loss - mixture_loss(&traces, &alpha, gold)).abs() < 1e-12);
            let mut grads = Gradients::zeros_like(&m);
            for (t, g) in traces.iter().zip(&gs) {
                m.backward_into(t, g, &mut grads);
            }
            let analytic = grads.flatten(m.vocab.len(), m.config.emb_dim);
            let mut probe = m.clone();
            let err = finite_difference_gradcheck(
                |flat| {
                    probe.assign_flat(flat).unwrap();
                    let ts: Vec<_> = sentences.iter().map(|s| probe.forward(s).unwrap()).collect();
                    mixture_loss(&ts, &alpha, gold)
                },
                &m.flatten(),
                &analytic,
                1e-6,
            );
            assert!(err <= 1e-4, "seed {seed}: rel err {err}");
        }
    }

    #[test]
    fn single_sentence_mixture_is_cross_entropy() {
        let m = tiny_model(1);
        let t = m.forward(&enc(&[4, 9, 2])).unwrap();
        let (loss, g) = mixture_loss_and_score_grads(std::slice::from_ref(&t), &[1.0], 0).unwrap();
        let (ce, ce_g) = cross_entropy_with_grad(&t.scores, 0).unwrap();
        assert_eq!(loss, ce);
        assert_eq!(g[0], ce_g);
    }

    fn tiny_dataset() -> Dataset {
        Dataset::from_examples(vec![
            LabeledText::new("NUM", "how long is the river"),
            LabeledText::new("LOC", "where is the river"),
            LabeledText::new("NUM", "how many people live there"),
            LabeledText::new("HUM", "who wrote the book"),
        ])
    }

    fn small_model_config() -> ModelConfig {
        ModelConfig {
            emb_dim: 8,
            feat_dim: 8,
            max_kernel: 3,
            ..ModelConfig::new(2)
        }
    }

    #[test]
    fn memorizes_single_example() {
        let ds = Dataset::from_examples(vec![LabeledText::new("A", "how long did it take")]);
        let mut ds = ds;
        ds.labels.push("B".into());
        let cfg = TrainConfig {
            epochs: 50,
            lr: 1e-2,
            ..TrainConfig::default()
        };
        let out = train(&ds, &cfg, ModelConfig::new(2)).unwrap();
        let trace = out.model.forward(&out.model.encode("how long did it take")).unwrap();
        assert_eq!(trace.predicted(), 0);
        assert!(trace.probs[0] >= 0.99, "p = {:?}", trace.probs);
        assert_eq!(out.history.len(), 50);
        assert!(out.history.iter().all(|r| r.accuracy.is_none()));
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let a = train(&tiny_dataset(), &cfg, small_model_config()).unwrap();
        let b = train(&tiny_dataset(), &cfg, small_model_config()).unwrap();
        assert_eq!(encode_model(&a.model), encode_model(&b.model));
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn multi_sentence_on_single_sentence_documents_matches_single_mode() {
        let single = TrainConfig {
            epochs: 3,
            holdout_fraction: 0.0,
            ..TrainConfig::default()
        };
        let multi = TrainConfig {
            mode: TrainMode::MultiSentence,
            ..single.clone()
        };
        let a = train(&tiny_dataset(), &single, small_model_config()).unwrap();
        let b = train(&tiny_dataset(), &multi, small_model_config()).unwrap();
        assert_eq!(encode_model(&a.model), encode_model(&b.model));
    }

    #[test]
    fn train_errors() {
        let cfg = TrainConfig::default();
        assert!(matches!(
            train(&Dataset::default(), &cfg, ModelConfig::new(2)),
            Err(IcnnError::EmptyDataset)
        ));
        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train(&tiny_dataset(), &bad, small_model_config()).is_err());
        let mut ds = tiny_dataset();
        ds.labels.truncate(1);
        assert!(matches!(
            train(&ds, &cfg, small_model_config()),
            Err(IcnnError::InvalidConfig(_)) | Err(IcnnError::UnknownLabel(_))
        ));
    }

    #[test]
    fn evaluation_counts() {
        let cfg = TrainConfig {
            epochs: 30,
            lr: 1e-2,
            holdout_fraction: 0.0,
            ..TrainConfig::default()
        };
        let ds = tiny_dataset();
        let out = train(&ds, &cfg, small_model_config()).unwrap();
        let ev = evaluate(&out.model, &ds, TrainMode::Single).unwrap();
        assert_eq!(ev.accuracy, 1.0);
        for (i, row) in ev.confusion.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if i != j {
                    assert_eq!(c, 0);
                }
            }
        }
        assert_eq!(ev.confusion.iter().flatten().sum::<usize>(), ds.len());
        assert!(matches!(
            evaluate(&out.model, &Dataset::default(), TrainMode::Single),
            Err(IcnnError::EmptyDataset)
        ));
        let unknown = Dataset::from_examples(vec![LabeledText::new("ZZZ", "what")]);
        assert!(matches!(
            evaluate(&out.model, &unknown, TrainMode::Single),
            Err(IcnnError::UnknownLabel(_))
        ));
    }

    #[test]
    fn document_encoding() {
        let vocab = build_vocab(&[LabeledText::new("x", "a b. c d!")], TokenizerMode::Word, 1);
        let doc = encode_document("a b. c d!", &vocab);
        assert_eq!(doc.len(), 2);
        assert_eq!(encode_document("", &vocab).len(), 1);
    }

    mod props {
        use super::super::*;
        use crate::model::test_support::tiny_model;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn alpha_is_a_distribution_and_permutation_equivariant(
                scores in prop::collection::vec(prop::collection::vec(-30.0f64..30.0, 3), 1..6),
                rot in 0usize..6,
            ) {
                let w = sentence_weights(&scores).unwrap();
                let total: f64 = w.alpha.iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-6);
                prop_assert!(w.alpha.iter().all(|&a| a > 0.0));
                let mut rotated = scores.clone();
                let r = rot % scores.len();
                rotated.rotate_left(r);
                let wr = sentence_weights(&rotated).unwrap();
                let mut expected = w.alpha.clone();
                expected.rotate_left(r);
                for (a, b) in wr.alpha.iter().zip(&expected) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }

            #[test]
            fn document_probs_are_convex_combination(
                seed in 0u64..200,
                docs in prop::collection::vec(prop::collection::vec(0u32..20, 2..7), 1..5),
            ) {
                let m = tiny_model(seed);
                let sentences: Vec<EncodedSentence> = docs
                    .iter()
                    .map(|ids| EncodedSentence { ids: ids.clone(), tokens: vec![String::new(); ids.len()] })
                    .collect();
                let doc = forward_document(&m, &sentences).unwrap();
                let total: f64 = doc.probs.iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-6);
                for c in 0..2 {
                    let lo = doc.traces.iter().map(|t| t.probs[c]).fold(f64::INFINITY, f64::min);
                    let hi = doc.traces.iter().map(|t| t.probs[c]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(doc.probs[c] >= lo - 1e-12 && doc.probs[c] <= hi + 1e-12);
                }
            }
        }
    }
}
