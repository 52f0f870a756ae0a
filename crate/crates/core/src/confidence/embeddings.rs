use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::prelude::*;

use crate::seed;
use crate::{Error, Result};

pub const UNKNOWN: &str = "<unk>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OovPolicy {
    Zero,
    /// Use the row of this word.
    Row(String),
}

/// Word vectors of one shared dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    zero: Vec<f64>,
    pub oov: OovPolicy,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            zero: vec![0.0; dim],
            oov: OovPolicy::Zero,
        }
    }

    /// Insert or overwrite; returns true when `word` was already present.
    pub fn insert(&mut self, word: &str, v: &[f64]) -> Result<bool> {
        if v.len() != self.dim {
            return Err(Error::Format(format!(
                "vector for `{word}` has dimension {}, table has {}",
                v.len(),
                self.dim
            )));
        }
        match self.index.get(word) {
            Some(&i) => {
                self.vectors[i * self.dim..(i + 1) * self.dim].copy_from_slice(v);
                Ok(true)
            }
            None => {
                self.index.insert(word.to_string(), self.words.len());
                self.words.push(word.to_string());
                self.vectors.extend_from_slice(v);
                Ok(false)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word) || self.index.contains_key(&word.to_lowercase())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        let i = self
            .index
            .get(word)
            .or_else(|| self.index.get(&word.to_lowercase()))?;
        Some(&self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Row index after case folding and the OOV policy; `None` means the
    /// zero vector.
    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index
            .get(word)
            .or_else(|| self.index.get(&word.to_lowercase()))
            .or_else(|| match &self.oov {
                OovPolicy::Zero => None,
                OovPolicy::Row(w) => self.index.get(w),
            })
            .copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Total lookup: exact, then lowercased, then the OOV policy.
    pub fn lookup(&self, word: &str) -> &[f64] {
        self.get(word).unwrap_or_else(|| match &self.oov {
            OovPolicy::Zero => &self.zero,
            OovPolicy::Row(w) => self.get(w).unwrap_or(&self.zero),
        })
    }

    /// `word v1 ... vd` per line. The dimension comes from the first row;
    /// a repeated word keeps its last vector.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (n, line) in text.lines().enumerate() {
            let mut it = line.split(' ').filter(|s| !s.is_empty());
            let Some(word) = it.next() else { continue };
            let v = it
                .map(|x| x.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::Format(format!("{origin}:{}: invalid number", n + 1)))?;
            if v.is_empty() {
                return Err(Error::Format(format!("{origin}:{}: `{word}` has no vector", n + 1)));
            }
            let t = table.get_or_insert_with(|| EmbeddingTable::new(v.len()));
            if v.len() != t.dim {
                return Err(Error::Format(format!(
                    "{origin}:{}: dimension {} differs from {}",
                    n + 1,
                    v.len(),
                    t.dim
                )));
            }
            if t.insert(word, &v)? {
                log::warn!("{origin}:{}: duplicate word `{word}`, keeping the last vector", n + 1);
            }
        }
        table.ok_or_else(|| Error::Format(format!("{origin}: no embeddings")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn format(&self) -> String {
        let mut s = String::new();
        for (i, w) in self.words.iter().enumerate() {
            s.push_str(w);
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.format()).map_err(|e| Error::io(path, e))
    }
}

/// Sparse ternary random index vector of `word` (8 non-zeros).
fn index_vector(key: &str, dim: usize, seed: u64) -> Vec<(usize, f64)> {
    let mut rng = seed::rng(seed::derive(seed, key));
    (0..8.min(dim))
        .map(|_| (rng.gen_range(0..dim), if rng.gen_bool(0.5) { 1.0 } else { -1.0 }))
        .collect()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Three distributional tables built by random indexing over `sentences`:
/// left-context, right-context and character trigram profiles. Words in
/// `extra` that never occur get zero context vectors.
pub fn synthetic_embeddings(
    sentences: &[Vec<String>],
    extra: &[String],
    dim: usize,
    seed: u64,
) -> Result<Vec<(String, EmbeddingTable)>> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be at least 1".into()));
    }
    let mut left: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut right: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut cache: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
    let mut idx = |w: &str| -> Vec<(usize, f64)> {
        cache
            .entry(w.to_string())
            .or_insert_with(|| index_vector(&format!("ctx:{w}"), dim, seed))
            .clone()
    };
    for s in sentences {
        let words: Vec<String> = s.iter().map(|w| w.to_lowercase()).collect();
        for (i, w) in words.iter().enumerate() {
            let prev = if i == 0 { "<s>" } else { words[i - 1].as_str() };
            let next = words.get(i + 1).map_or("</s>", String::as_str);
            for (acc, ctx) in [(&mut left, prev), (&mut right, next)] {
                let v = acc.entry(w.clone()).or_insert_with(|| vec![0.0; dim]);
                for (k, x) in idx(ctx) {
                    v[k] += x;
                }
            }
        }
    }
    let mut vocab: Vec<String> = left.keys().cloned().collect();
    vocab.extend(extra.iter().map(|w| w.to_lowercase()));
    vocab.sort();
    vocab.dedup();
    let mut tables = Vec::new();
    for (name, acc) in [("left", &left), ("right", &right)] {
        let mut t = EmbeddingTable::new(dim);
        for w in &vocab {
            let v = acc.get(w).cloned().unwrap_or_else(|| vec![0.0; dim]);
            t.insert(w, &normalized(v))?;
        }
        tables.push((name.to_string(), t));
    }
    let mut chars = EmbeddingTable::new(dim);
    for w in &vocab {
        let padded: Vec<char> = format!("#{w}#").chars().collect();
        let mut v = vec![0.0; dim];
        for tri in padded.windows(3.min(padded.len())) {
            let key: String = tri.iter().collect();
            for (k, x) in index_vector(&format!("chr:{key}"), dim, seed) {
                v[k] += x;
            }
        }
        chars.insert(w, &normalized(v))?;
    }
    tables.push(("chars".to_string(), chars));
    Ok(tables)
}
