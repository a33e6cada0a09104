//! Text utilities shared by the feature extractors: HTML stripping, word
//! tokenization, sentence splitting and syllable counting.

use std::collections::HashSet;
use std::sync::OnceLock;

/// English stop-word list used when building topic-model documents.
/// One lowercase word per line; see `stopwords.txt` next to this file.
pub const STOPWORDS_TXT: &str = include_str!("stopwords.txt");

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_TXT
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

const INLINE_TAGS: &[&str] = &[
    "a", "abbr", "b", "code", "del", "em", "i", "kbd", "s", "span", "strike", "strong", "sub",
    "sup", "u",
];

/// Removes HTML tags, decodes entities and collapses runs of whitespace.
///
/// Block-level tags become a single space so adjacent paragraphs do not
/// merge into one word. Text inside `<code>` and `<pre>` is kept.
pub fn strip_html(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut rest = html;
    while let Some(open) = rest.find('<') {
        out.push_str(&rest[..open]);
        let after = &rest[open..];
        match after.find('>') {
            Some(close) => {
                let name = tag_name(&after[1..close]);
                if !INLINE_TAGS.contains(&name.as_str()) {
                    out.push(' ');
                }
                rest = &after[close + 1..];
            }
            None => {
                // A lone '<' is literal text.
                out.push_str(after);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    let decoded = html_escape::decode_html_entities(&out);
    collapse_whitespace(&decoded)
}

/// Lowercase element name of the inside of a tag (`/p`, `a href=".."`, `br/`).
pub(crate) fn tag_name(inner: &str) -> String {
    inner
        .trim_start_matches('/')
        .trim_start()
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Words are maximal runs of alphanumeric characters and apostrophes,
/// lowercased. Leading and trailing apostrophes are trimmed and runs made
/// only of apostrophes are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|w| w.trim_matches('\''))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Splits on `.`, `!` or `?` when followed by whitespace or end of text.
/// There is no abbreviation handling: "e.g. this" splits after "e.g.".
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = match chars.peek() {
                None => true,
                Some((_, next)) => next.is_whitespace(),
            };
            if boundary {
                let end = i + c.len_utf8();
                push_sentence(&mut sentences, &text[start..end]);
                start = end;
            }
        }
    }
    push_sentence(&mut sentences, &text[start..]);
    sentences
}

fn push_sentence(out: &mut Vec<String>, raw: &str) {
    let s = raw.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Heuristic syllable count: vowel groups, minus one for a silent trailing
/// `e` (but not `-le`), never less than one.
pub fn count_syllables(word: &str) -> usize {
    let w = word.to_lowercase();
    let mut groups = 0usize;
    let mut prev_vowel = false;
    for c in w.chars() {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    if w.ends_with('e') && !w.ends_with("le") && groups > 0 {
        groups -= 1;
    }
    groups.max(1)
}

/// Tokens for topic modelling: the regular tokenizer minus stop words and
/// purely numeric tokens.
pub fn topic_tokens(text: &str) -> Vec<String> {
    let stop = stopwords();
    tokenize(text)
        .into_iter()
        .filter(|w| !stop.contains(w.as_str()))
        .filter(|w| !w.chars().all(|c| c.is_numeric() || c == '\''))
        .collect()
}
