//! CoNLL column files, token normalization, BIO/BIOES conversion and
//! mini-batching.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::numerics::RngState;

/// One labeled (or unlabeled) sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    /// All whitespace-separated columns of every token line.
    pub columns: Vec<Vec<String>>,
    pub tokens: Vec<String>,
    /// Gold tags; empty when the source has no tag column.
    pub tags: Vec<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, tags: Vec<String>) -> Self {
        let columns = tokens
            .iter()
            .zip(&tags)
            .map(|(w, t)| vec![w.clone(), t.clone()])
            .collect();
        Sentence {
            columns,
            tokens,
            tags,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn normalized_tokens(&self) -> Vec<String> {
        self.tokens.iter().map(|t| preprocess(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagScheme {
    Raw,
    Bio,
    Bioes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub source: Option<PathBuf>,
    pub scheme: TagScheme,
    /// Comment lines found at the top of the file, without the leading `#`.
    pub header: Vec<String>,
}

impl Corpus {
    pub fn from_sentences(sentences: Vec<Sentence>) -> Self {
        let scheme = detect_scheme(sentences.iter().flat_map(|s| s.tags.iter()));
        Corpus {
            sentences,
            source: None,
            scheme,
            header: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Convert BIO tags to BIOES in place. No-op for other schemes.
    pub fn to_bioes(&mut self) -> Result<()> {
        if self.scheme != TagScheme::Bio {
            return Ok(());
        }
        for s in &mut self.sentences {
            s.tags = bio_to_bioes(&s.tags)?;
        }
        self.scheme = TagScheme::Bioes;
        Ok(())
    }
}

/// Classify a tag inventory: any tag outside `O`/`X-*` shapes makes it raw.
pub fn detect_scheme<'a>(tags: impl IntoIterator<Item = &'a String>) -> TagScheme {
    let mut seen_es = false;
    let mut any = false;
    for t in tags {
        any = true;
        match tag_shape(t) {
            Some(('E', _)) | Some(('S', _)) => seen_es = true,
            Some(_) => {}
            None => return TagScheme::Raw,
        }
    }
    match (any, seen_es) {
        (false, _) => TagScheme::Raw,
        (true, true) => TagScheme::Bioes,
        (true, false) => TagScheme::Bio,
    }
}

/// Split a tag into its prefix letter and type; `O` maps to `('O', "")`.
pub fn tag_shape(tag: &str) -> Option<(char, &str)> {
    if tag == "O" {
        return Some(('O', ""));
    }
    let mut chars = tag.chars();
    let p = chars.next()?;
    if !matches!(p, 'B' | 'I' | 'E' | 'S') || chars.next() != Some('-') || tag.len() < 3 {
        return None;
    }
    Some((p, &tag[2..]))
}

/// Read whitespace-separated columns; blank lines end sentences and
/// `-DOCSTART-` lines are skipped. `#` lines before the first token are
/// treated as a header.
pub fn read_conll(path: &Path, token_col: usize, tag_col: Option<usize>) -> Result<Corpus> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_conll(&text, path, token_col, tag_col)
}

pub fn parse_conll(
    text: &str,
    path: &Path,
    token_col: usize,
    tag_col: Option<usize>,
) -> Result<Corpus> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let needed = token_col.max(tag_col.unwrap_or(0)) + 1;
    let mut sentences = Vec::new();
    let mut header = Vec::new();
    let mut current = Sentence {
        columns: Vec::new(),
        tokens: Vec::new(),
        tags: Vec::new(),
    };
    let mut width: Option<usize> = None;
    let mut seen_token = false;

    for (i, raw) in text.split('\n').enumerate() {
        let lineno = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if !seen_token && line.starts_with('#') {
            header.push(line[1..].trim().to_string());
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::replace(
                    &mut current,
                    Sentence {
                        columns: Vec::new(),
                        tokens: Vec::new(),
                        tags: Vec::new(),
                    },
                ));
            }
            continue;
        }
        if trimmed.starts_with("-DOCSTART-") {
            continue;
        }
        seen_token = true;
        let cols: Vec<String> = trimmed.split_whitespace().map(str::to_string).collect();
        match width {
            None => {
                if cols.len() < needed {
                    return Err(perr(
                        lineno,
                        format!("expected at least {} columns, found {}", needed, cols.len()),
                    ));
                }
                width = Some(cols.len());
            }
            Some(w) if w != cols.len() => {
                return Err(perr(
                    lineno,
                    format!("ragged row: {} columns where {} expected", cols.len(), w),
                ));
            }
            _ => {}
        }
        current.tokens.push(cols[token_col].clone());
        if let Some(t) = tag_col {
            current.tags.push(cols[t].clone());
        }
        current.columns.push(cols);
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    if sentences.is_empty() {
        return Err(Error::Data(format!("{}: no sentences", path.display())));
    }
    let mut corpus = Corpus::from_sentences(sentences);
    corpus.source = Some(path.to_path_buf());
    corpus.header = header;
    Ok(corpus)
}

/// Write `token tag` lines with blank-line sentence separators.
pub fn write_conll(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut out = Vec::new();
    for h in &corpus.header {
        writeln!(out, "# {}", h).expect("vec write");
    }
    for s in &corpus.sentences {
        for (w, t) in s.tokens.iter().zip(&s.tags) {
            writeln!(out, "{} {}", w, t).expect("vec write");
        }
        writeln!(out).expect("vec write");
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Replace every ASCII digit with `0`.
pub fn preprocess(token: &str) -> String {
    token
        .chars()
        .map(|c| if c.is_ascii_digit() { '0' } else { c })
        .collect()
}

/// BIO → BIOES. `I-X` that does not continue an open `X` span starts a new one.
pub fn bio_to_bioes(tags: &[String]) -> Result<Vec<String>> {
    let mut repaired: Vec<(char, &str)> = Vec::with_capacity(tags.len());
    for t in tags {
        let (p, ty) = tag_shape(t)
            .filter(|(p, _)| matches!(p, 'O' | 'B' | 'I'))
            .ok_or_else(|| Error::Data(format!("not a BIO tag: {:?}", t)))?;
        let p = match (p, repaired.last()) {
            ('I', Some(&(pp, pty))) if (pp == 'B' || pp == 'I') && pty == ty => 'I',
            ('I', _) => 'B',
            (p, _) => p,
        };
        repaired.push((p, ty));
    }
    let out = (0..repaired.len())
        .map(|i| {
            let (p, ty) = repaired[i];
            let continues = matches!(repaired.get(i + 1), Some(&('I', _)));
            match (p, continues) {
                ('O', _) => "O".to_string(),
                ('B', false) => format!("S-{}", ty),
                ('B', true) => format!("B-{}", ty),
                ('I', false) => format!("E-{}", ty),
                (_, _) => format!("I-{}", ty),
            }
        })
        .collect();
    Ok(out)
}

/// BIOES → BIO (`S` → `B`, `E` → `I`).
pub fn bioes_to_bio(tags: &[String]) -> Result<Vec<String>> {
    tags.iter()
        .map(|t| match tag_shape(t) {
            Some(('O', _)) => Ok("O".to_string()),
            Some(('S', ty)) | Some(('B', ty)) => Ok(format!("B-{}", ty)),
            Some(('E', ty)) | Some(('I', ty)) => Ok(format!("I-{}", ty)),
            _ => Err(Error::Data(format!("not a BIOES tag: {:?}", t))),
        })
        .collect()
}

/// Sentence indices grouped into batches for one epoch. The last batch may
/// be partial.
pub fn batch_iter(
    len: usize,
    batch_size: usize,
    shuffle: bool,
    rng: &mut RngState,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..len).collect();
    if shuffle {
        rng.shuffle(&mut order);
    }
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Move `count` randomly chosen sentences out of `corpus` into a new corpus.
pub fn split_off_random(corpus: &mut Corpus, count: usize, rng: &mut RngState) -> Result<Corpus> {
    if count >= corpus.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} of {} sentences",
            count,
            corpus.len()
        )));
    }
    let mut idx: Vec<usize> = (0..corpus.len()).collect();
    rng.shuffle(&mut idx);
    let mut chosen: Vec<usize> = idx[..count].to_vec();
    chosen.sort_unstable();
    let mut held = Vec::with_capacity(count);
    for &i in chosen.iter().rev() {
        held.push(corpus.sentences.remove(i));
    }
    held.reverse();
    let mut out = Corpus::from_sentences(held);
    out.scheme = corpus.scheme;
    Ok(out)
}
