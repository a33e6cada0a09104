//! Shallow answer features: metadata, surface linguistics, vocabulary
//! likelihood, readability, HTML tag counts and within-thread ranks.

use std::collections::HashMap;
use std::sync::OnceLock;

use log::warn;
use regex::Regex;

use crate::corpus::{Post, Thread};
use crate::text::{count_syllables, split_sentences, strip_html, tag_name, tokenize};

/// Flesch-Kincaid grade level.
pub fn flesch_kincaid(awps: f64, asps: f64) -> f64 {
    0.39 * awps + 11.8 * asps - 15.59
}

/// Add-one smoothed unigram model over the text of one thread.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VocabularyModel {
    counts: HashMap<String, u64>,
    total: u64,
}

impl VocabularyModel {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut model = Self::default();
        model.extend(tokens);
        model
    }

    pub fn extend<I, S>(&mut self, tokens: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for t in tokens {
            *self.counts.entry(t.into()).or_insert(0) += 1;
            self.total += 1;
        }
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn unique(&self) -> usize {
        self.counts.len()
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, c)| (w.as_str(), *c))
    }

    /// `(count(w) + 1) / (total + unique + 1)`: one extra slot is reserved for
    /// all unseen words, so the probabilities of known words plus one unseen
    /// word sum to one.
    pub fn probability(&self, word: &str) -> f64 {
        (self.count(word) + 1) as f64 / (self.total + self.unique() as u64 + 1) as f64
    }
}

/// Token counts over the question, every answer and every comment of a thread.
pub fn build_thread_vocabulary(thread: &Thread) -> VocabularyModel {
    let mut vocab = VocabularyModel::from_tokens(tokenize(&thread.question.body_text));
    for a in &thread.answers {
        vocab.extend(tokenize(&a.body_text));
    }
    for c in thread.all_comments() {
        vocab.extend(tokenize(&c.text));
    }
    vocab
}

/// `(1/U) * sum_w C(w) ln P(w)` over the unique words of `tokens`, with
/// `U` the number of unique words. Zero for empty input.
pub fn normalized_log_likelihood_with<F>(tokens: &[String], probability: F) -> f64
where
    F: Fn(&str) -> f64,
{
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    if counts.is_empty() {
        return 0.0;
    }
    // Sorted so the floating-point sum does not depend on hash order.
    let mut words: Vec<(&str, u64)> = counts.into_iter().collect();
    words.sort_unstable();
    let sum: f64 = words
        .iter()
        .map(|(w, c)| *c as f64 * probability(w).ln())
        .sum();
    sum / words.len() as f64
}

pub fn normalized_log_likelihood(answer_text: &str, vocab: &VocabularyModel) -> f64 {
    normalized_log_likelihood_with(&tokenize(answer_text), |w| vocab.probability(w))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TagCounts {
    pub quote: u32,
    pub contains: u32,
    pub strong: u32,
}

/// Counts `<blockquote>` elements, those whose text also appears in the
/// question, and `<strong>`/`<b>` elements.
///
/// Quotes whose text is empty after normalisation never count as contained.
/// An unclosed blockquote runs to the end of the answer.
pub fn html_tag_features(answer_html: &str, question_text: &str) -> TagCounts {
    let question = crate::text::collapse_whitespace(question_text);
    let mut counts = TagCounts::default();
    // byte offsets where the content of currently open blockquotes starts
    let mut open_quotes: Vec<usize> = Vec::new();
    let mut quote_spans: Vec<(usize, usize)> = Vec::new();
    let mut open_strong = 0i64;

    let mut pos = 0;
    while let Some(rel) = answer_html[pos..].find('<') {
        let start = pos + rel;
        let Some(rel_end) = answer_html[start..].find('>') else {
            break;
        };
        let end = start + rel_end;
        let inner = &answer_html[start + 1..end];
        let closing = inner.trim_start().starts_with('/');
        match (tag_name(inner).as_str(), closing) {
            ("blockquote", false) => {
                counts.quote += 1;
                open_quotes.push(end + 1);
            }
            ("blockquote", true) => match open_quotes.pop() {
                Some(content_start) => quote_spans.push((content_start, start)),
                None => warn!("closing </blockquote> without opening tag"),
            },
            ("strong" | "b", false) => {
                counts.strong += 1;
                open_strong += 1;
            }
            ("strong" | "b", true) => open_strong -= 1,
            _ => {}
        }
        pos = end + 1;
    }
    if !open_quotes.is_empty() || open_strong != 0 {
        warn!("unbalanced quote/strong tags in answer; counted opening tags");
    }
    for content_start in open_quotes {
        quote_spans.push((content_start, answer_html.len()));
    }
    for (s, e) in quote_spans {
        let quoted = strip_html(&answer_html[s..e]);
        if !quoted.is_empty() && question.contains(&quoted) {
            counts.contains += 1;
        }
    }
    counts
}

fn bare_url() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:https?|ftp)://[^\s<>]+").expect("valid regex"))
}

fn anchor_href() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)<a\s[^>]*href\s*=").expect("valid regex"))
}

pub fn contains_hyperlink(answer: &Post) -> bool {
    anchor_href().is_match(&answer.body_html) || bare_url().is_match(&answer.body_text)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShallowFeatures {
    pub age_seconds: f64,
    pub rating_score: f64,
    pub length_chars: f64,
    pub word_count: f64,
    pub sentence_count: f64,
    pub longest_sentence_chars: f64,
    pub avg_words_per_sentence: f64,
    pub avg_chars_per_word: f64,
    pub contains_hyperlink: f64,
    pub answer_count_in_thread: f64,
    pub ll_n: f64,
    pub flesch_kincaid: f64,
    pub quote_count: f64,
    pub contains_count: f64,
    pub strong_count: f64,
}

impl ShallowFeatures {
    pub const NAMES: [&'static str; 15] = [
        "age",
        "rating_score",
        "length",
        "word_count",
        "sentence_count",
        "longest_sentence",
        "awps",
        "avg_chars_per_word",
        "contains_hyperlink",
        "answer_count",
        "ll_n",
        "flesch_kincaid",
        "quote_count",
        "contains_count",
        "strong_count",
    ];

    /// Values in the order of [`Self::NAMES`].
    pub fn values(&self) -> [f64; 15] {
        [
            self.age_seconds,
            self.rating_score,
            self.length_chars,
            self.word_count,
            self.sentence_count,
            self.longest_sentence_chars,
            self.avg_words_per_sentence,
            self.avg_chars_per_word,
            self.contains_hyperlink,
            self.answer_count_in_thread,
            self.ll_n,
            self.flesch_kincaid,
            self.quote_count,
            self.contains_count,
            self.strong_count,
        ]
    }
}

/// Surface statistics of a text, independent of its thread.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TextStats {
    pub length_chars: usize,
    pub word_count: usize,
    pub sentence_count: usize,
    pub longest_sentence_chars: usize,
    pub word_chars: usize,
    pub syllables: usize,
}

impl TextStats {
    pub fn of(text: &str) -> Self {
        let words = tokenize(text);
        let sentences = split_sentences(text);
        Self {
            length_chars: text.chars().count(),
            word_count: words.len(),
            sentence_count: sentences.len(),
            longest_sentence_chars: sentences.iter().map(|s| s.chars().count()).max().unwrap_or(0),
            word_chars: words.iter().map(|w| w.chars().count()).sum(),
            syllables: words.iter().map(|w| count_syllables(w)).sum(),
        }
    }

    pub fn awps(&self) -> f64 {
        ratio(self.word_count, self.sentence_count)
    }

    pub fn asps(&self) -> f64 {
        ratio(self.syllables, self.word_count)
    }

    pub fn avg_chars_per_word(&self) -> f64 {
        ratio(self.word_chars, self.word_count)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// All shallow features for every answer of `thread`, in answer order.
pub fn extract_shallow(thread: &Thread) -> Vec<ShallowFeatures> {
    let vocab = build_thread_vocabulary(thread);
    let n = thread.answers.len() as f64;
    thread
        .answers
        .iter()
        .map(|a| {
            let stats = TextStats::of(&a.body_text);
            let tags = html_tag_features(&a.body_html, &thread.question.body_text);
            let age = (a.creation_time - thread.question.creation_time).num_milliseconds() as f64 / 1000.0;
            if age < 0.0 {
                warn!("answer {} predates its question by {}s", a.post_id, -age);
            }
            ShallowFeatures {
                age_seconds: age,
                rating_score: a.score as f64,
                length_chars: stats.length_chars as f64,
                word_count: stats.word_count as f64,
                sentence_count: stats.sentence_count as f64,
                longest_sentence_chars: stats.longest_sentence_chars as f64,
                avg_words_per_sentence: stats.awps(),
                avg_chars_per_word: stats.avg_chars_per_word(),
                contains_hyperlink: f64::from(u8::from(contains_hyperlink(a))),
                answer_count_in_thread: n,
                ll_n: normalized_log_likelihood(&a.body_text, &vocab),
                flesch_kincaid: flesch_kincaid(stats.awps(), stats.asps()),
                quote_count: f64::from(tags.quote),
                contains_count: f64::from(tags.contains),
                strong_count: f64::from(tags.strong),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// Default rank direction: answer age ranks earlier answers first, every
/// other feature ranks larger values first.
pub fn default_direction(feature: &str) -> Direction {
    match feature {
        "age" => Direction::LowerBetter,
        _ => Direction::HigherBetter,
    }
}

/// Rank 1 is best. Tied values share the smallest rank of their block.
/// NaN (missing) values get no rank and do not affect the others.
pub fn rank_within_thread(values: &[f64], direction: Direction) -> Vec<Option<usize>> {
    values
        .iter()
        .map(|&v| {
            if v.is_nan() {
                return None;
            }
            let better = values
                .iter()
                .filter(|&&o| match direction {
                    Direction::HigherBetter => o > v,
                    Direction::LowerBetter => o < v,
                })
                .count();
            Some(better + 1)
        })
        .collect()
}

/// Rank divided by the number of answers in the thread.
pub fn percent_rank(ranks: &[Option<usize>], n_answers: usize) -> Vec<Option<f64>> {
    let n = n_answers.max(1) as f64;
    ranks.iter().map(|r| r.map(|r| r as f64 / n)).collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    use super::*;
    use crate::corpus::PostKind;

    fn post(id: i64, kind: PostKind, html: &str, secs: i64) -> Post {
        Post {
            post_id: id,
            kind,
            body_text: strip_html(html),
            body_html: html.to_string(),
            creation_time: Utc.timestamp_opt(1_500_000_000 + secs, 0).unwrap(),
            score: id,
            owner: None,
            accepted_answer_id: None,
            parent_id: None,
        }
    }

    fn thread(question: &str, answers: &[&str]) -> Thread {
        Thread {
            question: post(0, PostKind::Question, question, 0),
            answers: answers
                .iter()
                .enumerate()
                .map(|(i, a)| post(i as i64 + 1, PostKind::Answer, a, 3600 * (i as i64 + 1)))
                .collect(),
            comments_by_answer: BTreeMap::new(),
            comments_on_question: vec![],
        }
    }

    #[test]
    fn flesch_kincaid_examples() {
        assert!((flesch_kincaid(10.0, 1.5) - 6.01).abs() < 1e-12);
        assert!((flesch_kincaid(0.0, 0.0) + 15.59).abs() < 1e-12);
        assert!((flesch_kincaid(20.0, 2.0) - 15.81).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_counts() {
        let v = VocabularyModel::from_tokens(["a", "b", "a"]);
        assert_eq!((v.count("a"), v.count("b"), v.total(), v.unique()), (2, 1, 3, 2));
        let empty = thread("", &[""]);
        let v = build_thread_vocabulary(&empty);
        assert_eq!((v.total(), v.unique()), (0, 0));
    }

    #[test]
    fn smoothed_probabilities_sum_to_one_with_unseen_slot() {
        let v = VocabularyModel::from_tokens(["a", "b", "a", "c"]);
        let total: f64 = ["a", "b", "c", "zzz"].iter().map(|w| v.probability(w)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ll_n_hand_example() {
        let tokens: Vec<String> = ["a", "a", "b"].iter().map(|s| s.to_string()).collect();
        let p = |w: &str| if w == "a" { 0.5 } else { 0.25 };
        let got = normalized_log_likelihood_with(&tokens, p);
        assert!((got - (-1.3863)).abs() < 1e-4, "{got}");
        assert_eq!(normalized_log_likelihood_with(&[], p), 0.0);
    }

    #[test]
    fn ll_n_prefers_frequent_thread_words() {
        let t = thread("salary salary raise", &["salary salary salary", "zebra yak quokka"]);
        let vocab = build_thread_vocabulary(&t);
        // Same repetition structure, so only the word probabilities differ.
        let frequent = normalized_log_likelihood("salary salary salary", &vocab);
        let oov = normalized_log_likelihood("unicorn unicorn unicorn", &vocab);
        assert!(frequent > oov);
        assert!(normalized_log_likelihood("salary", &vocab) > normalized_log_likelihood("unicorn", &vocab));
    }

    #[test]
    fn tag_feature_examples() {
        let c = html_tag_features("<blockquote>foo bar</blockquote>", "I said foo bar here");
        assert_eq!(c, TagCounts { quote: 1, contains: 1, strong: 0 });
        let c = html_tag_features("<blockquote><p>baz</p></blockquote>", "nothing");
        assert_eq!(c, TagCounts { quote: 1, contains: 0, strong: 0 });
        let c = html_tag_features("<strong>x</strong><b>y</b><br>", "");
        assert_eq!(c.strong, 2);
        let c = html_tag_features("<blockquote>  foo\n  bar ", "foo bar");
        assert_eq!(c, TagCounts { quote: 1, contains: 1, strong: 0 });
        let c = html_tag_features("<blockquote></blockquote>", "anything");
        assert_eq!(c.contains, 0);
    }

    #[test]
    fn extract_shallow_examples() {
        let t = thread(
            "How?",
            &["One two. Three.", "<a href=\"http://x\">x</a>", "see https://example.com", "plain"],
        );
        let f = extract_shallow(&t);
        assert_eq!(f.len(), 4);
        assert_eq!(f[0].age_seconds, 3600.0);
        assert_eq!(f[0].word_count, 3.0);
        assert_eq!(f[0].sentence_count, 2.0);
        assert_eq!(f[0].avg_words_per_sentence, 1.5);
        assert!(f.iter().all(|x| x.answer_count_in_thread == 4.0));
        let links: Vec<f64> = f.iter().map(|x| x.contains_hyperlink).collect();
        assert_eq!(links, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(extract_shallow(&t), f);
    }

    #[test]
    fn rank_examples() {
        let r = rank_within_thread(&[5.0, 9.0, 9.0, 1.0], Direction::HigherBetter);
        assert_eq!(r, vec![Some(3), Some(1), Some(1), Some(4)]);
        assert_eq!(rank_within_thread(&[7.0], Direction::HigherBetter), vec![Some(1)]);
        let r = rank_within_thread(&[10.0, 5.0, f64::NAN], Direction::LowerBetter);
        assert_eq!(r, vec![Some(2), Some(1), None]);
    }

    #[test]
    fn percent_rank_examples() {
        let pr = percent_rank(&[Some(1), Some(2), Some(3), Some(4)], 4);
        assert_eq!(pr, vec![Some(0.25), Some(0.5), Some(0.75), Some(1.0)]);
        assert_eq!(percent_rank(&[Some(1)], 1), vec![Some(1.0)]);
    }

    proptest! {
        #[test]
        fn rank_is_invariant_under_monotone_transform(vals in prop::collection::vec(-20.0f64..20.0, 1..12)) {
            let exp: Vec<f64> = vals.iter().map(|v| v.exp()).collect();
            prop_assert_eq!(
                rank_within_thread(&vals, Direction::HigherBetter),
                rank_within_thread(&exp, Direction::HigherBetter)
            );
        }

        #[test]
        fn percent_rank_of_distinct_values_is_permutation(n in 1usize..15, seed in any::<u64>()) {
            let vals: Vec<f64> = (0..n).map(|i| ((i as u64 * 2654435761 + seed) % 1000003) as f64 + i as f64 * 1e-6).collect();
            let ranks = rank_within_thread(&vals, Direction::HigherBetter);
            let mut pr: Vec<f64> = percent_rank(&ranks, n).into_iter().map(Option::unwrap).collect();
            prop_assert!(pr.iter().all(|&p| p > 0.0 && p <= 1.0));
            pr.sort_by(f64::total_cmp);
            let expected: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
            prop_assert_eq!(pr, expected);
        }

        #[test]
        fn flesch_kincaid_strictly_increasing(a in 0.0f64..100.0, b in 0.0f64..10.0, d in 1e-3f64..5.0) {
            prop_assert!(flesch_kincaid(a + d, b) > flesch_kincaid(a, b));
            prop_assert!(flesch_kincaid(a, b + d) > flesch_kincaid(a, b));
        }

        #[test]
        fn contains_never_exceeds_quotes(parts in prop::collection::vec(("[a-c ]{0,6}", 0u8..4), 0..8), q in "[a-c ]{0,20}") {
            let html: String = parts.iter().map(|(t, k)| match k {
                0 => format!("<blockquote>{t}</blockquote>"),
                1 => format!("<strong>{t}</strong>"),
                2 => format!("<blockquote>{t}"),
                _ => t.clone(),
            }).collect();
            let c = html_tag_features(&html, &q);
            prop_assert!(c.contains <= c.quote);
        }

        #[test]
        fn ll_n_non_positive(words in prop::collection::vec("[a-e]{1,3}", 0..30), extra in prop::collection::vec("[a-g]{1,3}", 0..10)) {
            let vocab = VocabularyModel::from_tokens(words.iter().cloned());
            prop_assert!(normalized_log_likelihood(&extra.join(" "), &vocab) <= 0.0);
        }
    }
}
