//! Sentence encoders and the intent/summary overlap score.
//!
//! The built-in encoder is a seeded feature-hashing vectorizer over word
//! unigrams and character 3-grams: no model download, fully
//! deterministic, and good enough for ordinal retrieval. Real sentence
//! encoders plug in through the same line-protocol adapter the counters
//! use; token-count results barely move across encoders, so the default
//! keeps the benchmark self-contained.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::adapter::EmbedAdapter;
use crate::hash::{content_hash, fnv1a_seeded};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("encoder unavailable: {0}")]
    EncoderUnavailable(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// An L2-normalized embedding. A vector of all zeros (empty input) keeps
/// norm 0 and scores 0 against everything.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    norm: f64,
}

impl EmbeddingVector {
    /// Wrap raw values, normalizing to unit length unless the vector is
    /// all zeros.
    pub fn new(mut values: Vec<f64>) -> Self {
        let norm_sq: f64 = values.iter().map(|v| v * v).sum();
        if norm_sq > 0.0 {
            let norm = norm_sq.sqrt();
            for v in &mut values {
                *v /= norm;
            }
            Self { values, norm: 1.0 }
        } else {
            Self { values, norm: 0.0 }
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            norm: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Inner product. Both vectors are unit-or-zero, so this equals the
    /// cosine for non-degenerate inputs. Four independent accumulators
    /// in a fixed combination order keep the result deterministic while
    /// letting the reduction vectorize.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let a = &self.values;
        let b = &other.values;
        let mut acc = [0.0f64; 4];
        for (ca, cb) in a.chunks_exact(4).zip(b.chunks_exact(4)) {
            acc[0] += ca[0] * cb[0];
            acc[1] += ca[1] * cb[1];
            acc[2] += ca[2] * cb[2];
            acc[3] += ca[3] * cb[3];
        }
        let tail: f64 = a
            .chunks_exact(4)
            .remainder()
            .iter()
            .zip(b.chunks_exact(4).remainder())
            .map(|(x, y)| x * y)
            .sum();
        (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
    }
}

/// Cosine similarity between a query embedding and a tool-summary
/// embedding; 0 when either side has zero norm.
pub fn iso_score(query: &EmbeddingVector, tool: &EmbeddingVector) -> Result<f64, EmbedError> {
    if query.dim() != tool.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: query.dim(),
            actual: tool.dim(),
        });
    }
    if query.is_zero() || tool.is_zero() {
        return Ok(0.0);
    }
    Ok(query.dot(tool) / (query.norm() * tool.norm()))
}

enum EncoderImpl {
    HashedNgram {
        seed: u64,
    },
    /// Word unigrams only, term-frequency weighted. A lexical-overlap
    /// stand-in used by the encoder-swap ablation.
    Lexical {
        seed: u64,
    },
    External(Box<dyn EmbedAdapter>),
}

/// A named, deterministic string-to-vector encoder.
pub struct Encoder {
    name: String,
    dim: usize,
    imp: EncoderImpl,
    cache: Mutex<HashMap<u64, EmbeddingVector>>,
}

impl Encoder {
    /// The built-in seeded feature-hashing encoder.
    pub fn hashed_ngram(dim: usize, seed: u64) -> Arc<Self> {
        assert!(dim >= 16, "hashed n-gram encoder needs dim >= 16");
        Arc::new(Self {
            name: format!("hashed-ngram-{dim}"),
            dim,
            imp: EncoderImpl::HashedNgram { seed },
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Unigram bag-of-words variant, no character n-grams.
    pub fn lexical(dim: usize, seed: u64) -> Arc<Self> {
        assert!(dim >= 16, "lexical encoder needs dim >= 16");
        Arc::new(Self {
            name: format!("lexical-unigram-{dim}"),
            dim,
            imp: EncoderImpl::Lexical { seed },
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Delegate to an external embedding adapter of known dimension.
    pub fn external(name: &str, dim: usize, adapter: Box<dyn EmbedAdapter>) -> Arc<Self> {
        Arc::new(Self {
            name: name.to_string(),
            dim,
            imp: EncoderImpl::External(adapter),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encode(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let key = content_hash(text);
        if let Some(v) = self.cache.lock().expect("encoder cache").get(&key) {
            return Ok(v.clone());
        }
        let vector = match &self.imp {
            EncoderImpl::HashedNgram { seed } => hashed_ngram_vector(text, self.dim, *seed),
            EncoderImpl::Lexical { seed } => lexical_vector(text, self.dim, *seed),
            EncoderImpl::External(adapter) => {
                let raw = adapter
                    .embed(text)
                    .map_err(|e| EmbedError::EncoderUnavailable(e.to_string()))?;
                if raw.len() != self.dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.dim,
                        actual: raw.len(),
                    });
                }
                EmbeddingVector::new(raw)
            }
        };
        self.cache
            .lock()
            .expect("encoder cache")
            .insert(key, vector.clone());
        Ok(vector)
    }
}

/// Lowercase and split on non-alphanumerics.
fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Weight of a whole-word feature relative to one character trigram.
/// Trigrams exist as morphological backoff (shared stems still
/// correlate); exact word matches must dominate them, otherwise the
/// "-ing"/"-tion" suffix inventory of any English-like corpus puts a
/// high similarity floor under every pair of texts.
const UNIGRAM_WEIGHT: f64 = 4.0;

/// Connectives carry no intent; matching on them is noise.
const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "and", "as", "at", "by", "for", "from", "in", "of", "on", "or", "the", "to",
    "under", "with",
];

fn word_weight(word: &str) -> f64 {
    if FUNCTION_WORDS.contains(&word) {
        1.0
    } else {
        UNIGRAM_WEIGHT
    }
}

fn hashed_ngram_vector(text: &str, dim: usize, seed: u64) -> EmbeddingVector {
    let mut values = vec![0.0f64; dim];
    let mut any = false;
    let mut add_feature = |feature: &[u8], weight: f64| {
        let mixed = crate::hash::mix(fnv1a_seeded(seed, feature));
        let bucket = (mixed % dim as u64) as usize;
        let sign = if mixed >> 63 == 0 { 1.0 } else { -1.0 };
        values[bucket] += sign * weight;
        any = true;
    };
    for word in words(text) {
        add_feature(word.as_bytes(), word_weight(&word));
        let chars: Vec<char> = word.chars().collect();
        if chars.len() >= 3 {
            for gram in chars.windows(3) {
                let gram: String = gram.iter().collect();
                add_feature(format!("3g:{gram}").as_bytes(), 1.0);
            }
        }
    }
    if !any {
        return EmbeddingVector::zeros(dim);
    }
    EmbeddingVector::new(values)
}

fn lexical_vector(text: &str, dim: usize, seed: u64) -> EmbeddingVector {
    let mut values = vec![0.0f64; dim];
    let mut any = false;
    for word in words(text) {
        let mixed = crate::hash::mix(fnv1a_seeded(seed, word.as_bytes()));
        let bucket = (mixed % dim as u64) as usize;
        let sign = if mixed >> 63 == 0 { 1.0 } else { -1.0 };
        values[bucket] += sign;
        any = true;
    }
    if !any {
        return EmbeddingVector::zeros(dim);
    }
    EmbeddingVector::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(enc: &Encoder, a: &str, b: &str) -> f64 {
        iso_score(&enc.encode(a).unwrap(), &enc.encode(b).unwrap()).unwrap()
    }

    #[test]
    fn encode_is_deterministic() {
        let enc = Encoder::hashed_ngram(128, 42);
        assert_eq!(enc.encode("x").unwrap(), enc.encode("x").unwrap());
        let enc2 = Encoder::hashed_ngram(128, 42);
        assert_eq!(
            enc.encode("abc def").unwrap(),
            enc2.encode("abc def").unwrap()
        );
    }

    #[test]
    fn empty_input_is_zero_vector() {
        let enc = Encoder::hashed_ngram(64, 1);
        let v = enc.encode("").unwrap();
        assert!(v.is_zero());
        assert_eq!(v.norm(), 0.0);
        assert!(enc.encode("   --- ").unwrap().is_zero());
    }

    #[test]
    fn normalized_output() {
        let enc = Encoder::hashed_ngram(384, 42);
        let v = enc.encode("search github issues").unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-6);
        let len: f64 = v.values().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((len - 1.0).abs() < 1e-9);
    }

    #[test]
    fn related_text_scores_above_unrelated() {
        let enc = Encoder::hashed_ngram(384, 42);
        let near = cosine(
            &enc,
            "search github issues",
            "search github issues by label",
        );
        let far = cosine(&enc, "search github issues", "delete slack channel");
        assert!(
            near > far,
            "expected related > unrelated, got {near} vs {far}"
        );
    }

    #[test]
    fn iso_analytic_cases() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]);
        let b = EmbeddingVector::new(vec![1.0, 0.0]);
        assert!((iso_score(&a, &b).unwrap() - 1.0).abs() < 1e-12);

        let c = EmbeddingVector::new(vec![0.0, 1.0]);
        assert!(iso_score(&a, &c).unwrap().abs() < 1e-12);

        let d = EmbeddingVector::new(vec![1.0, 1.0]);
        assert!((iso_score(&a, &d).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn iso_dimension_mismatch() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]);
        let b = EmbeddingVector::new(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            iso_score(&a, &b),
            Err(EmbedError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_vector_scores_zero() {
        let z = EmbeddingVector::zeros(4);
        let a = EmbeddingVector::new(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(iso_score(&z, &a).unwrap(), 0.0);
        assert_eq!(iso_score(&a, &z).unwrap(), 0.0);
    }

    struct FixedEmbed(Vec<f64>);
    impl EmbedAdapter for FixedEmbed {
        fn embed(&self, _text: &str) -> Result<Vec<f64>, crate::adapter::AdapterError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn external_encoder_normalizes() {
        let enc = Encoder::external("ext", 3, Box::new(FixedEmbed(vec![3.0, 0.0, 4.0])));
        let v = enc.encode("anything").unwrap();
        assert!((v.values()[0] - 0.6).abs() < 1e-12);
        assert!((v.values()[2] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn external_encoder_unit_vector_passthrough() {
        let enc = Encoder::external("ext", 2, Box::new(FixedEmbed(vec![1.0, 0.0])));
        let v = enc.encode("q").unwrap();
        assert_eq!(v.values(), &[1.0, 0.0]);
    }

    #[test]
    fn encode_is_safe_under_concurrent_callers() {
        let enc = Encoder::hashed_ngram(128, 42);
        let reference = enc.encode("search github issues by label").unwrap();
        let mut handles = Vec::new();
        for t in 0..4 {
            let enc = Arc::clone(&enc);
            handles.push(std::thread::spawn(move || {
                for i in 0..200 {
                    enc.encode(&format!("query {t} {i}")).unwrap();
                    let again = enc.encode("search github issues by label").unwrap();
                    assert!((again.norm() - 1.0).abs() < 1e-9);
                }
                enc.encode("search github issues by label").unwrap()
            }));
        }
        for handle in handles {
            assert_eq!(handle.join().unwrap(), reference);
        }
    }

    #[test]
    fn external_encoder_wrong_dimension() {
        let enc = Encoder::external("ext", 4, Box::new(FixedEmbed(vec![1.0, 0.0])));
        assert!(matches!(
            enc.encode("q"),
            Err(EmbedError::DimensionMismatch {
                expected: 4,
                actual: 2
            })
        ));
    }
}
