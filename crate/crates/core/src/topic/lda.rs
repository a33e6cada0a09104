use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Symmetric document-topic prior. `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub inference_iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: 20,
            alpha: None,
            beta: 0.01,
            iterations: 500,
            inference_iterations: 100,
            seed: 42,
        }
    }
}

impl LdaConfig {
    pub fn alpha_for(&self, k: usize) -> f64 {
        self.alpha.unwrap_or(50.0 / k as f64)
    }
}

/// Documents as word ids over a sorted vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicCorpus {
    pub vocab: Vec<String>,
    pub docs: Vec<Vec<u32>>,
}

impl TopicCorpus {
    /// Keeps words that occur in at least `min_df` documents. Word ids
    /// follow lexicographic order so the corpus is independent of input
    /// hash order.
    pub fn build<S: AsRef<str>>(docs: &[Vec<S>], min_df: usize) -> Self {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let unique: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for w in unique {
                *df.entry(w).or_insert(0) += 1;
            }
        }
        let vocab: Vec<String> = df
            .into_iter()
            .filter(|&(_, n)| n >= min_df)
            .map(|(w, _)| w.to_string())
            .collect();
        let index: HashMap<&str, u32> = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i as u32))
            .collect();
        let docs = docs
            .iter()
            .map(|d| d.iter().filter_map(|w| index.get(w.as_ref()).copied()).collect())
            .collect();
        Self { vocab, docs }
    }

    pub fn from_ids(vocab: Vec<String>, docs: Vec<Vec<u32>>) -> Self {
        Self { vocab, docs }
    }

    pub fn n_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// Number of documents containing each word.
    pub fn document_frequency(&self) -> Vec<u32> {
        let mut df = vec![0u32; self.vocab.len()];
        let mut seen = vec![usize::MAX; self.vocab.len()];
        for (d, doc) in self.docs.iter().enumerate() {
            for &w in doc {
                if seen[w as usize] != d {
                    seen[w as usize] = d;
                    df[w as usize] += 1;
                }
            }
        }
        df
    }
}

/// Trained topic-word counts.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: Vec<String>,
    /// Row-major `k x vocab.len()` counts.
    pub topic_word: Vec<u32>,
    pub topic_totals: Vec<u64>,
    pub seed: u64,
    pub iterations: usize,
    word_index: HashMap<String, u32>,
}

impl TopicModel {
    pub fn new(
        k: usize,
        alpha: f64,
        beta: f64,
        vocab: Vec<String>,
        topic_word: Vec<u32>,
        seed: u64,
        iterations: usize,
    ) -> Result<Self> {
        let v = vocab.len();
        if topic_word.len() != k * v {
            return Err(Error::Dimension {
                expected: k * v,
                actual: topic_word.len(),
            });
        }
        let topic_totals = (0..k)
            .map(|t| topic_word[t * v..(t + 1) * v].iter().map(|&c| u64::from(c)).sum())
            .collect();
        let word_index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Ok(Self {
            k,
            alpha,
            beta,
            vocab,
            topic_word,
            topic_totals,
            seed,
            iterations,
            word_index,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.word_index.get(word).copied()
    }

    pub fn count(&self, topic: usize, word: u32) -> u32 {
        self.topic_word[topic * self.vocab.len() + word as usize]
    }

    /// Smoothed topic-word distribution `(n_kw + beta) / (n_k + V beta)`.
    pub fn phi(&self, topic: usize) -> Vec<f64> {
        let v = self.vocab.len();
        let denom = self.topic_totals[topic] as f64 + v as f64 * self.beta;
        self.topic_word[topic * v..(topic + 1) * v]
            .iter()
            .map(|&c| (f64::from(c) + self.beta) / denom)
            .collect()
    }

    /// Word ids of the `n` most probable words in `topic`, most probable first.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<u32> {
        let v = self.vocab.len();
        let row = &self.topic_word[topic * v..(topic + 1) * v];
        let mut ids: Vec<u32> = (0..v as u32).collect();
        ids.sort_by(|&a, &b| row[b as usize].cmp(&row[a as usize]).then(a.cmp(&b)));
        ids.truncate(n);
        ids
    }
}

/// Point on the topic simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicDistribution(pub Vec<f64>);

impl TopicDistribution {
    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }
}

/// Collapsed Gibbs sampler state. [`train_lda`] drives it for the
/// configured number of sweeps; tests can step it manually.
pub struct LdaSampler<'c> {
    corpus: &'c TopicCorpus,
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    sweeps: usize,
    assignments: Vec<Vec<u16>>,
    doc_topic: Vec<u32>,
    topic_word: Vec<u32>,
    topic_totals: Vec<u64>,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl<'c> LdaSampler<'c> {
    /// Validates the configuration and assigns every token a uniformly random topic.
    pub fn new(corpus: &'c TopicCorpus, config: &LdaConfig) -> Result<Self> {
        let k = config.k;
        let alpha = config.alpha_for(k);
        if k < 2 {
            return Err(Error::Topic(format!("topic count must be at least 2, got {k}")));
        }
        if k > usize::from(u16::MAX) {
            return Err(Error::Topic(format!("topic count {k} too large")));
        }
        if !(alpha > 0.0 && config.beta > 0.0) {
            return Err(Error::Topic("alpha and beta must be positive".into()));
        }
        let n_tokens = corpus.n_tokens();
        if corpus.docs.is_empty() || n_tokens == 0 {
            return Err(Error::Topic("empty corpus".into()));
        }
        if k > n_tokens {
            return Err(Error::Topic(format!("{k} topics exceed {n_tokens} corpus tokens")));
        }
        let v = corpus.vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut doc_topic = vec![0u32; corpus.docs.len() * k];
        let mut topic_word = vec![0u32; k * v];
        let mut topic_totals = vec![0u64; k];
        let assignments = corpus
            .docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let t = rng.gen_range(0..k);
                        doc_topic[d * k + t] += 1;
                        topic_word[t * v + w as usize] += 1;
                        topic_totals[t] += 1;
                        t as u16
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            corpus,
            k,
            alpha,
            beta: config.beta,
            seed: config.seed,
            sweeps: 0,
            assignments,
            doc_topic,
            topic_word,
            topic_totals,
            rng,
            weights: vec![0.0; k],
        })
    }

    /// Resamples every token's topic once from its full conditional.
    pub fn sweep(&mut self) {
        let k = self.k;
        let v = self.corpus.vocab.len();
        let vbeta = v as f64 * self.beta;
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            let dt = &mut self.doc_topic[d * k..(d + 1) * k];
            for (i, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let old = self.assignments[d][i] as usize;
                dt[old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_totals[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (f64::from(dt[t]) + self.alpha)
                        * (f64::from(self.topic_word[t * v + w]) + self.beta)
                        / (self.topic_totals[t] as f64 + vbeta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.gen::<f64>() * total;
                let new = self.weights.partition_point(|&c| c <= u).min(k - 1);

                dt[new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_totals[new] += 1;
                self.assignments[d][i] = new as u16;
            }
        }
        self.sweeps += 1;
    }

    pub fn topic_totals(&self) -> &[u64] {
        &self.topic_totals
    }

    pub fn topic_word(&self) -> &[u32] {
        &self.topic_word
    }

    pub fn doc_topic(&self, doc: usize) -> &[u32] {
        &self.doc_topic[doc * self.k..(doc + 1) * self.k]
    }

    pub fn assignments(&self) -> &[Vec<u16>] {
        &self.assignments
    }

    pub fn into_model(self) -> TopicModel {
        TopicModel::new(
            self.k,
            self.alpha,
            self.beta,
            self.corpus.vocab.clone(),
            self.topic_word,
            self.seed,
            self.sweeps,
        )
        .expect("sampler counts have k x V shape")
    }
}

pub fn train_lda(corpus: &TopicCorpus, config: &LdaConfig) -> Result<TopicModel> {
    let mut sampler = LdaSampler::new(corpus, config)?;
    for _ in 0..config.iterations {
        sampler.sweep();
    }
    Ok(sampler.into_model())
}

/// Topic proportions of a new document with the model's topic-word counts
/// held fixed. Words outside the model vocabulary are ignored; a document
/// with no known words gets the uniform distribution.
///
/// The estimate `(n_dk + alpha) / (n_d + K alpha)` is averaged over the last
/// quarter of the sweeps.
pub fn infer<S: AsRef<str>>(
    model: &TopicModel,
    doc_tokens: &[S],
    iterations: usize,
    seed: u64,
) -> TopicDistribution {
    let k = model.k;
    let words: Vec<u32> = doc_tokens
        .iter()
        .filter_map(|w| model.word_id(w.as_ref()))
        .collect();
    if words.is_empty() || iterations == 0 {
        return TopicDistribution::uniform(k);
    }
    let v = model.vocab_size();
    let vbeta = v as f64 * model.beta;
    let inv_denoms: Vec<f64> = model
        .topic_totals
        .iter()
        .map(|&n| 1.0 / (n as f64 + vbeta))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u32; k];
    let mut z: Vec<usize> = words
        .iter()
        .map(|_| {
            let t = rng.gen_range(0..k);
            counts[t] += 1;
            t
        })
        .collect();

    let burn_in = iterations - (iterations / 4).max(1);
    let mut theta = vec![0.0; k];
    let mut samples = 0usize;
    let mut weights = vec![0.0; k];
    let norm = words.len() as f64 + k as f64 * model.alpha;
    for sweep in 0..iterations {
        for (i, &w) in words.iter().enumerate() {
            counts[z[i]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (f64::from(counts[t]) + model.alpha)
                    * (f64::from(model.topic_word[t * v + w as usize]) + model.beta)
                    * inv_denoms[t];
                weights[t] = total;
            }
            let u = rng.gen::<f64>() * total;
            let new = weights.partition_point(|&c| c <= u).min(k - 1);
            counts[new] += 1;
            z[i] = new;
        }
        if sweep >= burn_in {
            for t in 0..k {
                theta[t] += (f64::from(counts[t]) + model.alpha) / norm;
            }
            samples += 1;
        }
    }
    debug_assert!(samples > 0);
    // Normalising by the sum rather than the sample count removes rounding drift.
    let sum: f64 = theta.iter().sum();
    TopicDistribution(theta.into_iter().map(|x| x / sum).collect())
}
