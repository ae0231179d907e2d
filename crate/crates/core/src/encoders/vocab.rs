use std::collections::HashMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use crate::data::{preprocess, Corpus, Sentence};
use crate::error::{Error, Result};

pub const UNK_WORD: &str = "<unk>";
pub const UNK_CHAR: char = '\u{fffd}';
pub const BOS: &str = "<bos>";

/// Word, character and label id maps.
///
/// Word and char id 0 is the unknown symbol. Labels occupy `0..K` and the
/// begin-of-sequence symbol is label id `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    word_ids: HashMap<String, usize>,
    chars: Vec<char>,
    char_ids: HashMap<char, usize>,
    labels: Vec<String>,
    label_ids: HashMap<String, usize>,
    /// Training-corpus frequencies of normalized tokens, in first-occurrence order.
    pub counts: IndexMap<String, usize>,
}

/// A sentence mapped to ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSentence {
    pub words: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
    pub labels: Option<Vec<usize>>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn gold(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Data("sentence has no gold labels".into()))
    }
}

/// Build vocabularies from a training corpus. Normalized tokens seen at most
/// `unk_max_freq` times map to the unknown word.
pub fn build_vocab(corpus: &Corpus, unk_max_freq: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Empty("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut counts: IndexMap<String, usize> = IndexMap::new();
    let mut chars: Vec<char> = vec![UNK_CHAR];
    let mut char_ids: HashMap<char, usize> = HashMap::from([(UNK_CHAR, 0)]);
    let mut labels: Vec<String> = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    for s in &corpus.sentences {
        for tok in s.normalized_tokens() {
            for c in tok.chars() {
                char_ids.entry(c).or_insert_with(|| {
                    chars.push(c);
                    chars.len() - 1
                });
            }
            *counts.entry(tok).or_insert(0) += 1;
        }
        for t in &s.tags {
            if t == BOS {
                return Err(Error::Data(format!("{} cannot be used as a gold tag", BOS)));
            }
            label_ids.entry(t.clone()).or_insert_with(|| {
                labels.push(t.clone());
                labels.len() - 1
            });
        }
    }
    if labels.is_empty() {
        return Err(Error::Data("training corpus has no tags".into()));
    }
    labels.push(BOS.to_string());
    label_ids.insert(BOS.to_string(), labels.len() - 1);

    let mut words = vec![UNK_WORD.to_string()];
    let mut word_ids = HashMap::from([(UNK_WORD.to_string(), 0)]);
    for (w, &c) in &counts {
        if c > unk_max_freq && !word_ids.contains_key(w) {
            word_ids.insert(w.clone(), words.len());
            words.push(w.clone());
        }
    }
    Ok(Vocabulary {
        words,
        word_ids,
        chars,
        char_ids,
        labels,
        label_ids,
        counts,
    })
}

impl Vocabulary {
    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn num_chars(&self) -> usize {
        self.chars.len()
    }

    /// K, the number of predictable labels (excludes `<bos>`).
    pub fn num_labels(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn bos(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn label(&self, id: usize) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    /// Predictable labels in id order.
    pub fn labels(&self) -> &[String] {
        &self.labels[..self.labels.len() - 1]
    }

    /// Id of a raw token after normalization; unknown tokens map to 0.
    pub fn word_id(&self, token: &str) -> usize {
        self.word_ids.get(&preprocess(token)).copied().unwrap_or(0)
    }

    pub fn char_ids(&self, token: &str) -> Vec<usize> {
        preprocess(token)
            .chars()
            .map(|c| self.char_ids.get(&c).copied().unwrap_or(0))
            .collect()
    }

    pub fn label_id(&self, tag: &str) -> Option<usize> {
        self.label_ids.get(tag).copied().filter(|&i| i < self.bos())
    }

    pub fn encode(&self, s: &Sentence) -> Result<EncodedSentence> {
        let labels = if s.tags.is_empty() {
            None
        } else {
            Some(
                s.tags
                    .iter()
                    .map(|t| {
                        self.label_id(t).ok_or_else(|| {
                            Error::Data(format!("tag {:?} is not in the label vocabulary", t))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        Ok(EncodedSentence {
            words: s.tokens.iter().map(|t| self.word_id(t)).collect(),
            chars: s.tokens.iter().map(|t| self.char_ids(t)).collect(),
            labels,
        })
    }

    pub fn encode_corpus(&self, corpus: &Corpus) -> Result<Vec<EncodedSentence>> {
        corpus.sentences.iter().map(|s| self.encode(s)).collect()
    }

    pub fn decode_labels(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.label(i).unwrap_or(UNK_WORD).to_string())
            .collect()
    }

    /// Plain-text form: three sections of one entry per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("ncrft-vocab 1\n");
        out.push_str(&format!("words {}\n", self.words.len()));
        for w in &self.words {
            out.push_str(w);
            out.push('\n');
        }
        out.push_str(&format!("chars {}\n", self.chars.len()));
        for c in &self.chars {
            out.push(*c);
            out.push('\n');
        }
        out.push_str(&format!("labels {}\n", self.labels.len()));
        for l in &self.labels {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(format!("vocabulary file: {}", m));
        let mut lines = text.split('\n');
        if lines.next() != Some("ncrft-vocab 1") {
            return Err(bad("bad magic line"));
        }
        let mut section = |name: &str| -> Result<Vec<String>> {
            let head = lines.next().ok_or_else(|| bad("truncated"))?;
            let count: usize = head
                .strip_prefix(name)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| bad(&format!("expected {} header, got {:?}", name, head)))?;
            (0..count)
                .map(|_| lines.next().map(str::to_string).ok_or_else(|| bad("truncated")))
                .collect()
        };
        let words = section("words")?;
        let chars: Vec<char> = section("chars")?
            .into_iter()
            .map(|s| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(bad("char entry is not a single character")),
                }
            })
            .collect::<Result<_>>()?;
        let labels = section("labels")?;
        if labels.len() < 2 || labels.last().map(String::as_str) != Some(BOS) {
            return Err(bad("label section must end with <bos>"));
        }
        Ok(Vocabulary {
            word_ids: words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect(),
            char_ids: chars.iter().enumerate().map(|(i, &c)| (c, i)).collect(),
            label_ids: labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect(),
            words,
            chars,
            labels,
            counts: IndexMap::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_text(&text)
    }
}

/// Read a whitespace-separated embedding file (`token v1 v2 ...` per line).
pub fn load_embeddings(path: &Path) -> Result<(usize, HashMap<String, Vec<f64>>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut dim = None;
    let mut table = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(tok) = parts.next() else { continue };
        let vals: Vec<f64> = parts
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("bad float {:?}", v),
                })
            })
            .collect::<Result<_>>()?;
        let d = *dim.get_or_insert(vals.len());
        if vals.len() != d || d == 0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected {} values, found {}", d, vals.len()),
            });
        }
        table.insert(tok.to_string(), vals);
    }
    let dim = dim.ok_or_else(|| Error::Data(format!("{}: no embeddings", path.display())))?;
    Ok((dim, table))
}
