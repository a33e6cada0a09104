//! Plain-text topic model file.
//!
//! ```text
//! cqa-lda 1
//! k <K>
//! alpha <f64>
//! beta <f64>
//! seed <u64>
//! iterations <n>
//! vocab <V>
//! <word> <count topic 0> ... <count topic K-1>     (V lines)
//! ```
//!
//! Words never contain whitespace (they come from the tokenizer).

use std::fmt::Write as _;
use std::path::Path;

use super::lda::TopicModel;
use crate::error::{Error, Result};

const MAGIC: &str = "cqa-lda 1";

pub fn write_model(path: &Path, model: &TopicModel) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "k {}", model.k);
    let _ = writeln!(out, "alpha {}", model.alpha);
    let _ = writeln!(out, "beta {}", model.beta);
    let _ = writeln!(out, "seed {}", model.seed);
    let _ = writeln!(out, "iterations {}", model.iterations);
    let _ = writeln!(out, "vocab {}", model.vocab_size());
    for (w, word) in model.vocab.iter().enumerate() {
        out.push_str(word);
        for t in 0..model.k {
            let _ = write!(out, " {}", model.count(t, w as u32));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn header<T: std::str::FromStr>(line: Option<&str>, key: &str) -> Result<T> {
    let line = line.ok_or_else(|| Error::Format(format!("missing `{key}` line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::Format(format!("expected `{key}`, found `{line}`")));
    }
    parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad value in `{line}`")))
}

pub fn read_model(path: &Path) -> Result<TopicModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Format(format!("{}: not a topic model file", path.display())));
    }
    let k: usize = header(lines.next(), "k")?;
    let alpha: f64 = header(lines.next(), "alpha")?;
    let beta: f64 = header(lines.next(), "beta")?;
    let seed: u64 = header(lines.next(), "seed")?;
    let iterations: usize = header(lines.next(), "iterations")?;
    let v: usize = header(lines.next(), "vocab")?;
    let mut vocab = Vec::with_capacity(v);
    let mut topic_word = vec![0u32; k * v];
    for w in 0..v {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("expected {v} vocabulary lines, got {w}")))?;
        let mut parts = line.split(' ');
        vocab.push(parts.next().unwrap_or_default().to_string());
        for t in 0..k {
            topic_word[t * v + w] = parts
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad counts on line `{line}`")))?;
        }
    }
    TopicModel::new(k, alpha, beta, vocab, topic_word, seed, iterations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_rejections() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let m = TopicModel::new(2, 0.25, 0.01, vec!["a".into(), "b".into(), "c".into()], vec![1, 0, 4, 2, 7, 0], 9, 100)
            .unwrap();
        write_model(&p, &m).unwrap();
        assert_eq!(read_model(&p).unwrap(), m);

        std::fs::write(&p, "cqa-lda 1\nk 2\nalpha x\n").unwrap();
        assert!(matches!(read_model(&p), Err(Error::Format(_))));
        std::fs::write(&p, "something else\n").unwrap();
        assert!(matches!(read_model(&p), Err(Error::Format(_))));
        std::fs::write(&p, "cqa-lda 1\nk 2\nalpha 1\nbeta 1\nseed 0\niterations 1\nvocab 2\na 1 2\n").unwrap();
        assert!(matches!(read_model(&p), Err(Error::Format(_))));
    }
}
