use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lda::{train_lda, LdaConfig, TopicCorpus, TopicModel};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Coherence {
    pub per_topic: Vec<f64>,
    pub mean: f64,
}

/// UMass coherence of every topic over `corpus`.
///
/// For the top `top_n` words `v_1..v_M` of a topic (most probable first) the
/// score is `sum_{m=2..M} sum_{l<m} ln((D(v_m, v_l) + 1) / D(v_l))`, where
/// `D` counts documents containing all the given words. Pairs whose
/// higher-ranked word never occurs are skipped.
pub fn umass_coherence(model: &TopicModel, corpus: &TopicCorpus, top_n: usize) -> Coherence {
    let top: Vec<Vec<u32>> = (0..model.k).map(|t| model.top_words(t, top_n)).collect();
    let wanted: HashSet<u32> = top.iter().flatten().copied().collect();
    // For each wanted word, the sorted list of documents containing it.
    let mut postings: std::collections::HashMap<u32, Vec<u32>> =
        wanted.iter().map(|&w| (w, Vec::new())).collect();
    for (d, doc) in corpus.docs.iter().enumerate() {
        let mut seen: Vec<u32> = doc.iter().copied().filter(|w| wanted.contains(w)).collect();
        seen.sort_unstable();
        seen.dedup();
        for w in seen {
            postings.get_mut(&w).expect("wanted word").push(d as u32);
        }
    }
    let co_df = |a: u32, b: u32| -> usize {
        let (pa, pb) = (&postings[&a], &postings[&b]);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    };

    let per_topic: Vec<f64> = top
        .iter()
        .map(|words| {
            let mut score = 0.0;
            for m in 1..words.len() {
                for l in 0..m {
                    let d_l = postings[&words[l]].len();
                    if d_l == 0 {
                        continue;
                    }
                    score += ((co_df(words[m], words[l]) + 1) as f64 / d_l as f64).ln();
                }
            }
            score
        })
        .collect();
    let mean = per_topic.iter().sum::<f64>() / per_topic.len().max(1) as f64;
    Coherence { per_topic, mean }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceRow {
    pub k: usize,
    pub mean: f64,
    pub per_topic: Vec<f64>,
}

pub struct KSelection {
    pub best_k: usize,
    pub table: Vec<CoherenceRow>,
    pub models: Vec<TopicModel>,
}

impl KSelection {
    pub fn best_model(&self) -> &TopicModel {
        self.models
            .iter()
            .find(|m| m.k == self.best_k)
            .expect("best k is in the grid")
    }

    /// `k,mean_coherence,min_topic,max_topic` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,mean_coherence,min_topic_coherence,max_topic_coherence\n");
        for row in &self.table {
            let min = row.per_topic.iter().copied().fold(f64::INFINITY, f64::min);
            let max = row.per_topic.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            out.push_str(&format!("{},{:.6},{:.6},{:.6}\n", row.k, row.mean, min, max));
        }
        out
    }
}

/// Trains one model per grid value (in parallel) and keeps the one with the
/// highest mean coherence; ties go to the smaller `k`.
pub fn select_k(
    corpus: &TopicCorpus,
    k_grid: &[usize],
    config: &LdaConfig,
    top_n: usize,
) -> Result<KSelection> {
    if k_grid.is_empty() {
        return Err(Error::Config("empty topic-count grid".into()));
    }
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let trained: Vec<(TopicModel, Coherence)> = grid
        .par_iter()
        .map(|&k| {
            let cfg = LdaConfig { k, ..config.clone() };
            let model = train_lda(corpus, &cfg)?;
            let c = umass_coherence(&model, corpus, top_n);
            Ok((model, c))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, (_, c)) in trained.iter().enumerate() {
        if c.mean > trained[best].1.mean {
            best = i;
        }
    }
    let best_k = grid[best];
    let table = trained
        .iter()
        .map(|(m, c)| CoherenceRow {
            k: m.k,
            mean: c.mean,
            per_topic: c.per_topic.clone(),
        })
        .collect();
    let models = trained.into_iter().map(|(m, _)| m).collect();
    Ok(KSelection {
        best_k,
        table,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    /// Direct document-set counting over the raw corpus.
    fn oracle(model: &TopicModel, corpus: &TopicCorpus, top_n: usize) -> Vec<f64> {
        let sets: Vec<BTreeSet<u32>> = corpus.docs.iter().map(|d| d.iter().copied().collect()).collect();
        let df = |ws: &[u32]| sets.iter().filter(|s| ws.iter().all(|w| s.contains(w))).count();
        (0..model.k)
            .map(|t| {
                let top = model.top_words(t, top_n);
                let mut total = 0.0;
                for m in 1..top.len() {
                    for l in 0..m {
                        let dl = df(&[top[l]]);
                        if dl > 0 {
                            total += ((df(&[top[m], top[l]]) + 1) as f64 / dl as f64).ln();
                        }
                    }
                }
                total
            })
            .collect()
    }

    fn model(k: usize, v: usize, counts: Vec<u32>) -> TopicModel {
        let vocab = (0..v).map(|i| format!("w{i}")).collect();
        TopicModel::new(k, 0.1, 0.01, vocab, counts, 0, 0).unwrap()
    }

    #[test]
    fn hand_example() {
        // topic 0 ranks w0 > w1 > w2; w0 in docs {0,1,2}, w1 in {0,1}, w2 in {1}
        let corpus = TopicCorpus::from_ids(
            (0..3).map(|i| format!("w{i}")).collect(),
            vec![vec![0, 1], vec![0, 1, 2], vec![0]],
        );
        let m = model(1, 3, vec![9, 5, 1]);
        let c = umass_coherence(&m, &corpus, 3);
        // ln(3/3) + ln(2/3) + ln(2/2)
        let want = (3.0f64 / 3.0).ln() + (2.0f64 / 3.0).ln() + (2.0f64 / 2.0).ln();
        assert!((c.per_topic[0] - want).abs() < 1e-12);
        assert_eq!(c.mean, c.per_topic[0]);
    }

    #[test]
    fn select_k_keeps_the_best_row() {
        let docs: Vec<Vec<String>> = (0..30)
            .map(|d| (0..12).map(|i| format!("b{}x{}", d % 3, (d + i) % 5)).collect())
            .collect();
        let corpus = TopicCorpus::build(&docs, 1);
        let cfg = LdaConfig {
            iterations: 30,
            ..Default::default()
        };
        let sel = select_k(&corpus, &[6, 2, 3, 3], &cfg, 5).unwrap();
        assert_eq!(sel.table.iter().map(|r| r.k).collect::<Vec<_>>(), [2, 3, 6]);
        let max = sel.table.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
        let first_max = sel.table.iter().find(|r| r.mean == max).unwrap().k;
        assert_eq!(sel.best_k, first_max);
        assert_eq!(sel.best_model().k, sel.best_k);
        assert_eq!(sel.to_csv().lines().count(), 4);
        assert!(select_k(&corpus, &[], &cfg, 5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_document_set_oracle(
            docs in prop::collection::vec(prop::collection::vec(0u32..8, 0..10), 1..12),
            counts in prop::collection::vec(0u32..20, 16),
            top_n in 1usize..8,
        ) {
            let corpus = TopicCorpus::from_ids((0..8).map(|i| format!("w{i}")).collect(), docs);
            let m = model(2, 8, counts);
            let got = umass_coherence(&m, &corpus, top_n);
            let want = oracle(&m, &corpus, top_n);
            for (g, w) in got.per_topic.iter().zip(&want) {
                prop_assert!((g - w).abs() < 1e-9);
            }
            // every term is ln of a ratio at most (D_l + 1) / D_l
            prop_assert!(got.per_topic.iter().all(|&s| s <= (top_n * top_n) as f64 * 2f64.ln()));
        }
    }
}
