//! Turning an attribution into a token pattern and finding the training
//! samples that best exhibit it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Dataset, TokenizerMode, Vocabulary, UNK_ID};
use crate::error::{IcnnError, Result};
use crate::explain::AttributionReport;
use crate::model::ModelParams;
use crate::numerics::Real;

pub const DEFAULT_RATIO: f64 = 0.1;

/// Tokens with a strong positive value for one category, in sentence order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub category: usize,
    pub category_name: String,
    pub tokens: Vec<String>,
    pub values: Vec<f64>,
    /// Positions of the tokens in the source sentence.
    pub positions: Vec<usize>,
}

impl Pattern {
    /// Drops tokens outside the vocabulary. They cannot occur in any
    /// training sample, so they only dilute retrieval.
    pub fn known_only(mut self, vocab: &Vocabulary) -> Self {
        let keep: Vec<bool> = self.tokens.iter().map(|t| vocab.id(t) != UNK_ID).collect();
        let mut flags = keep.iter();
        self.tokens.retain(|_| *flags.next().unwrap());
        let mut flags = keep.iter();
        self.values.retain(|_| *flags.next().unwrap());
        let mut flags = keep.iter();
        self.positions.retain(|_| *flags.next().unwrap());
        self
    }
}

/// Keeps non-padding tokens whose value on `category` exceeds `ratio` times
/// the largest positive value.
pub fn extract_pattern<F: Real>(report: &AttributionReport<F>, category: usize, ratio: f64) -> Result<Pattern> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(IcnnError::InvalidConfig(format!(
            "pattern ratio must be in (0, 1), got {ratio}"
        )));
    }
    if category >= report.labels.len() {
        return Err(IcnnError::IndexOutOfRange {
            index: category,
            len: report.labels.len(),
        });
    }
    let name = report.labels[category].clone();
    let values: Vec<f64> = report.category_values(category).iter().map(|v| v.as_f64()).collect();
    let max = values
        .iter()
        .zip(&report.pad_mask)
        .filter(|(_, &pad)| !pad)
        .map(|(&v, _)| v)
        .fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(IcnnError::EmptyPattern(name));
    }
    let threshold = ratio * max;
    let mut pattern = Pattern {
        category,
        category_name: name,
        tokens: Vec::new(),
        values: Vec::new(),
        positions: Vec::new(),
    };
    for (i, (&v, &pad)) in values.iter().zip(&report.pad_mask).enumerate() {
        if !pad && v > threshold {
            pattern.tokens.push(report.tokens[i].clone());
            pattern.values.push(v);
            pattern.positions.push(i);
        }
    }
    Ok(pattern)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexedSample {
    pub id: usize,
    pub text: String,
    pub label: String,
    pub tokens: Vec<String>,
}

/// Tokenized training samples with a token → sample id inverted map.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingIndex {
    pub mode: TokenizerMode,
    samples: Vec<IndexedSample>,
    postings: BTreeMap<String, Vec<usize>>,
}

impl TrainingIndex {
    pub fn samples(&self) -> &[IndexedSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Ids of samples containing `token`, ascending.
    pub fn postings(&self, token: &str) -> &[usize] {
        self.postings.get(token).map_or(&[], Vec::as_slice)
    }
}

pub fn build_index(dataset: &Dataset, mode: TokenizerMode) -> Result<TrainingIndex> {
    if dataset.is_empty() {
        return Err(IcnnError::EmptyDataset);
    }
    let mut postings: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let samples: Vec<IndexedSample> = dataset
        .examples
        .iter()
        .enumerate()
        .map(|(id, ex)| {
            let tokens = tokenize(&ex.text, mode);
            let distinct: BTreeSet<&String> = tokens.iter().collect();
            for tok in distinct {
                postings.entry(tok.clone()).or_default().push(id);
            }
            IndexedSample {
                id,
                text: ex.text.clone(),
                label: ex.label.clone(),
                tokens,
            }
        })
        .collect();
    Ok(TrainingIndex {
        mode,
        samples,
        postings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievedSample {
    pub id: usize,
    pub text: String,
    pub label: String,
    pub suitability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub category: String,
    pub pattern: Vec<String>,
    pub samples: Vec<RetrievedSample>,
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Number of distinct pattern tokens present, plus one if the whole
/// pattern appears as a contiguous run.
pub fn suitability(pattern: &[String], sample_tokens: &[String]) -> f64 {
    let distinct: BTreeSet<&String> = pattern.iter().collect();
    let present = distinct.iter().filter(|t| sample_tokens.contains(t)).count() as f64;
    let bonus = if contains_run(sample_tokens, pattern) { 1.0 } else { 0.0 };
    present + bonus
}

/// Top `k` samples by suitability, ties broken by `tie_score` (descending)
/// and then by id. Samples sharing no token with the pattern are never
/// returned.
pub fn retrieve_with<T>(
    pattern: &Pattern,
    index: &TrainingIndex,
    k: usize,
    mut tie_score: T,
) -> Result<Vec<RetrievedSample>>
where
    T: FnMut(&IndexedSample) -> f64,
{
    if k == 0 {
        return Err(IcnnError::InvalidConfig("k must be at least 1".into()));
    }
    if pattern.tokens.is_empty() {
        return Err(IcnnError::EmptyPattern(pattern.category_name.clone()));
    }
    let candidates: BTreeSet<usize> = pattern
        .tokens
        .iter()
        .flat_map(|t| index.postings(t).iter().copied())
        .collect();
    let mut scored: Vec<(f64, f64, usize)> = candidates
        .into_iter()
        .map(|id| {
            let sample = &index.samples[id];
            (suitability(&pattern.tokens, &sample.tokens), tie_score(sample), id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(suit, _, id)| {
            let s = &index.samples[id];
            RetrievedSample {
                id,
                text: s.text.clone(),
                label: s.label.clone(),
                suitability: suit,
            }
        })
        .collect())
}

/// [`retrieve_with`] using the model's score for the pattern's category as
/// the tie-breaker.
pub fn retrieve<F: Real>(
    pattern: &Pattern,
    index: &TrainingIndex,
    k: usize,
    model: &ModelParams<F>,
) -> Result<RetrievalResult> {
    let category = pattern.category;
    let samples = retrieve_with(pattern, index, k, |sample| {
        let encoded = model.vocab.encode(&sample.tokens);
        model
            .forward(&encoded)
            .map(|t| t.scores[category].as_f64())
            .unwrap_or(f64::NEG_INFINITY)
    })?;
    Ok(RetrievalResult {
        category: pattern.category_name.clone(),
        pattern: pattern.tokens.clone(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledText;
    use crate::numerics::Matrix;

    fn report(tokens: &[&str], num: &[f64]) -> AttributionReport<f64> {
        let n = tokens.len();
        let mut values = Matrix::zeros(n, 2);
        for (i, &v) in num.iter().enumerate() {
            values.set(i, 0, v);
            values.set(i, 1, -v);
        }
        AttributionReport {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            labels: vec!["NUM".into(), "LOC".into()],
            values,
            probs: vec![0.9, 0.1],
            scores: vec![1.0, -1.0],
            bias: vec![0.0, 0.0],
            predicted: 0,
            pad_mask: tokens.iter().map(|&t| t == "<pad>").collect(),
        }
    }

    #[test]
    fn pattern_threshold() {
        let r = report(&["how", "long", "did"], &[2.0, 1.5, -0.1]);
        let p = extract_pattern(&r, 0, 0.1).unwrap();
        assert_eq!(p.tokens, vec!["how", "long"]);
        assert_eq!(p.positions, vec![0, 1]);
        assert_eq!(p.category_name, "NUM");
    }

    #[test]
    fn pattern_errors() {
        let r = report(&["a", "b"], &[-1.0, 0.0]);
        assert!(matches!(extract_pattern(&r, 0, 0.1), Err(IcnnError::EmptyPattern(_))));
        let r = report(&["a", "<pad>"], &[-1.0, 5.0]);
        assert!(matches!(extract_pattern(&r, 0, 0.1), Err(IcnnError::EmptyPattern(_))));
        assert!(extract_pattern(&r, 0, 1.0).is_err());
        assert!(extract_pattern(&r, 5, 0.1).is_err());
    }

    #[test]
    fn unknown_tokens_dropped() {
        let vocab =
            Vocabulary::from_tokens(TokenizerMode::Word, vec!["<pad>".into(), "<unk>".into(), "how".into()]).unwrap();
        let r = report(&["how", "zzq", "qqx"], &[1.0, 2.0, 0.5]);
        let p = extract_pattern(&r, 0, 0.1).unwrap().known_only(&vocab);
        assert_eq!(p.tokens, vec!["how"]);
        assert_eq!(p.values, vec![1.0]);
        assert_eq!(p.positions, vec![0]);
        let r = report(&["zzq", "qqx"], &[1.0, 2.0]);
        assert!(extract_pattern(&r, 0, 0.1)
            .unwrap()
            .known_only(&vocab)
            .tokens
            .is_empty());
    }

    fn corpus() -> Dataset {
        Dataset::from_examples(vec![
            LabeledText::new("NUM", "how long is the nile"),
            LabeledText::new("NUM", "how many people are there"),
            LabeledText::new("ENTY", "the cat sat"),
            LabeledText::new("NUM", "long ago how"),
        ])
    }

    fn pattern(tokens: &[&str]) -> Pattern {
        Pattern {
            category: 0,
            category_name: "NUM".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            values: vec![1.0; tokens.len()],
            positions: (0..tokens.len()).collect(),
        }
    }

    #[test]
    fn index_postings() {
        let idx = build_index(&corpus(), TokenizerMode::Word).unwrap();
        assert_eq!(idx.postings("long"), &[0, 3]);
        assert_eq!(idx.postings("absent"), &[] as &[usize]);
        assert_eq!(build_index(&corpus(), TokenizerMode::Word).unwrap(), idx);
        assert!(matches!(
            build_index(&Dataset::default(), TokenizerMode::Word),
            Err(IcnnError::EmptyDataset)
        ));
    }

    #[test]
    fn retrieval_ranking() {
        let idx = build_index(&corpus(), TokenizerMode::Word).unwrap();
        let res = retrieve_with(&pattern(&["how", "long"]), &idx, 10, |_| 0.0).unwrap();
        let ids: Vec<usize> = res.iter().map(|r| r.id).collect();
        assert_eq!(ids, vec![0, 3, 1]);
        assert_eq!(res[0].suitability, 3.0);
        assert_eq!(res[1].suitability, 2.0);
        assert_eq!(res[2].suitability, 1.0);

        let top = retrieve_with(&pattern(&["how", "long"]), &idx, 1, |_| 0.0).unwrap();
        assert_eq!(top.len(), 1);
        assert!(retrieve_with(&pattern(&["how"]), &idx, 0, |_| 0.0).is_err());
        assert!(retrieve_with(&pattern(&[]), &idx, 3, |_| 0.0).is_err());
    }

    #[test]
    fn ties_use_model_score_then_id() {
        let idx = build_index(&corpus(), TokenizerMode::Word).unwrap();
        let res = retrieve_with(&pattern(&["how"]), &idx, 10, |s| if s.id == 3 { 1.0 } else { 0.0 }).unwrap();
        let ids: Vec<usize> = res.iter().map(|r| r.id).collect();
        assert_eq!(ids, vec![3, 0, 1]);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pattern_is_scale_invariant(vals in prop::collection::vec(-5.0f64..5.0, 2..10), scale in 0.01f64..100.0) {
                let tokens: Vec<String> = (0..vals.len()).map(|i| format!("t{i}")).collect();
                let mk = |vs: &[f64]| {
                    let mut values = crate::numerics::Matrix::zeros(vs.len(), 2);
                    for (i, &v) in vs.iter().enumerate() { values.set(i, 0, v); }
                    AttributionReport {
                        tokens: tokens.clone(),
                        labels: vec!["a".into(), "b".into()],
                        values,
                        probs: vec![0.5, 0.5],
                        scores: vec![0.0, 0.0],
                        bias: vec![0.0, 0.0],
                        predicted: 0,
                        pad_mask: vec![false; vs.len()],
                    }
                };
                let scaled: Vec<f64> = vals.iter().map(|v| v * scale).collect();
                let a = extract_pattern(&mk(&vals), 0, 0.1).map(|p| p.tokens).ok();
                let b = extract_pattern(&mk(&scaled), 0, 0.1).map(|p| p.tokens).ok();
                prop_assert_eq!(a, b);
            }

            #[test]
            fn retrieval_never_returns_zero_overlap(
                docs in prop::collection::vec("[abcde ]{1,20}", 1..12),
                pat in prop::collection::vec("[a-f]", 1..4),
            ) {
                let ds = Dataset::from_examples(docs.iter().map(|d| crate::corpus::LabeledText::new("x", d.clone())).collect());
                let idx = build_index(&ds, TokenizerMode::Word).unwrap();
                let p = Pattern {
                    category: 0,
                    category_name: "x".into(),
                    values: vec![1.0; pat.len()],
                    positions: (0..pat.len()).collect(),
                    tokens: pat.clone(),
                };
                for r in retrieve_with(&p, &idx, 5, |_| 0.0).unwrap() {
                    let toks = &idx.samples()[r.id].tokens;
                    prop_assert!(pat.iter().any(|t| toks.contains(t)));
                    prop_assert!(r.suitability >= 1.0);
                }
            }

            #[test]
            fn adding_a_pattern_token_never_lowers_suitability(
                sample in prop::collection::vec("[a-d]", 0..8),
                pat in prop::collection::vec("[a-d]", 1..4),
                extra in 0usize..4,
                at in 0usize..9,
            ) {
                let before = suitability(&pat, &sample);
                let tok = pat[extra % pat.len()].clone();
                let mut appended = sample.clone();
                appended.push(tok.clone());
                let mut inserted = sample.clone();
                inserted.insert(at.min(inserted.len()), tok);
                let overlap = |s: &[String]| {
                    let d: BTreeSet<&String> = pat.iter().collect();
                    d.iter().filter(|t| s.contains(t)).count()
                };
                prop_assert!(overlap(&inserted) >= overlap(&sample));
                prop_assert!(suitability(&pat, &appended) >= before);
            }
        }
    }
}
