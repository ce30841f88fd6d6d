//! Browser front end: trains a small model on the bundled questions (or
//! loads a saved one) and answers three queries as JSON strings: a token
//! heatmap, pattern retrieval and per-sentence weights.

use icnn::corpus::{parse_dataset, tokenize};
use icnn::patterns::{build_index, extract_pattern, retrieve, TrainingIndex, DEFAULT_RATIO};
use icnn::trainer::encode_document;
use icnn::{
    decode_model, encode_model, explain, forward_document, train, Dataset, DatasetFormat, IcnnError, ModelConfig,
    ModelParams, Result, TrainConfig,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// The demo state without any JavaScript types, so it can be tested natively.
pub struct Session {
    model: ModelParams<f32>,
    index: TrainingIndex,
}

fn toy_dataset() -> Dataset {
    parse_dataset(
        icnn::TOY_QUESTIONS.as_bytes(),
        DatasetFormat::Trec,
        "toy_questions.label".as_ref(),
    )
    .expect("bundled data parses")
}

impl Session {
    /// Trains on the bundled questions with a reduced model size so the page
    /// stays responsive.
    pub fn train_toy(epochs: usize) -> Result<Self> {
        let data = toy_dataset();
        let config = TrainConfig {
            epochs,
            ..TrainConfig::default()
        };
        let model_config = ModelConfig {
            emb_dim: 24,
            feat_dim: 24,
            max_kernel: 4,
            ..ModelConfig::new(data.labels.len())
        };
        let model = train(&data, &config, model_config)?.model;
        let index = build_index(&data, model.vocab.mode())?;
        Ok(Self { model, index })
    }

    /// A saved model. Retrieval searches the bundled questions.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let model = decode_model(bytes)?;
        let index = build_index(&toy_dataset(), model.vocab.mode())?;
        Ok(Self { model, index })
    }

    pub fn model_bytes(&self) -> Vec<u8> {
        encode_model(&self.model)
    }

    pub fn labels(&self) -> &[String] {
        &self.model.labels
    }

    fn category(&self, name: Option<&str>, predicted: usize) -> Result<usize> {
        match name {
            Some(n) if !n.is_empty() => self.model.label_index(n),
            _ => Ok(predicted),
        }
    }

    fn report(&self, text: &str) -> Result<icnn::AttributionReport<f32>> {
        if tokenize(text, self.model.vocab.mode()).is_empty() {
            return Err(IcnnError::EmptyInput);
        }
        explain(&self.model, &self.model.encode(text))
    }

    /// Heatmap for one category (default: predicted). Values are normalised
    /// by the largest magnitude so the page only has to pick colours.
    pub fn explain(&self, text: &str, category: Option<&str>) -> Result<Value> {
        let report = self.report(text)?;
        let c = self.category(category, report.predicted)?;
        let values: Vec<f64> = report.category_values(c).iter().map(|&v| v as f64).collect();
        let max = values
            .iter()
            .zip(&report.pad_mask)
            .filter(|(_, &pad)| !pad)
            .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
        let tokens: Vec<Value> = report
            .tokens
            .iter()
            .zip(&values)
            .zip(&report.pad_mask)
            .filter(|(_, &pad)| !pad)
            .map(|((t, &v), _)| {
                json!({
                    "token": t,
                    "value": v,
                    "heat": if max > 0.0 { v / max } else { 0.0 },
                })
            })
            .collect();
        Ok(json!({
            "category": report.labels[c],
            "predicted": report.labels[report.predicted],
            "labels": report.labels,
            "probs": report.probs,
            "tokens": tokens,
            "conservation_error": report.conservation_error(),
        }))
    }

    /// Pattern for one category and the `k` best matching questions. An
    /// empty pattern is reported as `"pattern": []`, not as an error.
    pub fn samples(&self, text: &str, category: Option<&str>, k: usize) -> Result<Value> {
        let report = self.report(text)?;
        let c = self.category(category, report.predicted)?;
        let pattern = match extract_pattern(&report, c, DEFAULT_RATIO) {
            Ok(p) => p.known_only(&self.model.vocab),
            Err(IcnnError::EmptyPattern(_)) => {
                return Ok(json!({ "category": report.labels[c], "pattern": [], "samples": [] }));
            }
            Err(e) => return Err(e),
        };
        if pattern.tokens.is_empty() {
            return Ok(json!({ "category": report.labels[c], "pattern": [], "samples": [] }));
        }
        let found = retrieve(&pattern, &self.index, k, &self.model)?;
        let samples: Vec<Value> = found
            .samples
            .iter()
            .map(|s| json!({ "text": s.text, "label": s.label, "suitability": s.suitability }))
            .collect();
        Ok(json!({
            "category": found.category,
            "pattern": found.pattern,
            "samples": samples,
        }))
    }

    /// Per-sentence weights and predictions for a multi-sentence text.
    pub fn sentences(&self, text: &str) -> Result<Value> {
        if tokenize(text, self.model.vocab.mode()).is_empty() {
            return Err(IcnnError::EmptyInput);
        }
        let doc = encode_document(text, &self.model.vocab);
        let out = forward_document(&self.model, &doc)?;
        let labels = &self.model.labels;
        let sentences: Vec<Value> = doc
            .iter()
            .zip(&out.weights.alpha)
            .zip(&out.traces)
            .map(|((s, &a), t)| {
                let words: Vec<&str> = s
                    .tokens
                    .iter()
                    .zip(s.pad_mask())
                    .filter(|(_, pad)| !pad)
                    .map(|(t, _)| t.as_str())
                    .collect();
                json!({
                    "text": words.join(" "),
                    "weight": a,
                    "predicted": labels[t.predicted()],
                    "probs": t.probs,
                })
            })
            .collect();
        let predicted = icnn::numerics::argmax(&out.probs);
        Ok(json!({
            "labels": labels,
            "sentences": sentences,
            "probs": out.probs,
            "predicted": labels[predicted],
        }))
    }
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(epochs: usize) -> std::result::Result<Demo, JsError> {
        Ok(Demo {
            session: js(Session::train_toy(epochs))?,
        })
    }

    #[wasm_bindgen(js_name = fromBytes)]
    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Demo, JsError> {
        Ok(Demo {
            session: js(Session::from_bytes(bytes))?,
        })
    }

    #[wasm_bindgen(js_name = modelBytes)]
    pub fn model_bytes(&self) -> Vec<u8> {
        self.session.model_bytes()
    }

    pub fn labels(&self) -> String {
        serde_json::to_string(self.session.labels()).unwrap_or_default()
    }

    pub fn explain(&self, text: &str, category: Option<String>) -> std::result::Result<String, JsError> {
        js(self.session.explain(text, category.as_deref())).map(|v| v.to_string())
    }

    pub fn samples(&self, text: &str, category: Option<String>, k: usize) -> std::result::Result<String, JsError> {
        js(self.session.samples(text, category.as_deref(), k)).map(|v| v.to_string())
    }

    pub fn sentences(&self, text: &str) -> std::result::Result<String, JsError> {
        js(self.session.sentences(text)).map(|v| v.to_string())
    }
}
