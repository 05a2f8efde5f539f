//! Token and sentence embeddings plus instruction object extraction.
//!
//! Pretrained embedding models are replaced by plain-text tables shipped with
//! the crate. Lookups are total: a token missing from the table falls back to
//! a deterministic unit vector derived from the token's hash, so schemas and
//! instructions never fail to embed.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::domain::DomainSchema;
use crate::rng::Rng;

pub const WORD_DIM: usize = 300;
pub const SENT_DIM: usize = 384;

#[derive(Debug, Error)]
pub enum LangError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty instruction text")]
    EmptyText,
}

/// Word embedding table: `token<TAB>v1 v2 ... v_dim` per line.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector width mismatch");
        self.vectors.insert(token.to_string(), vector);
    }

    pub fn parse(text: &str, dim: usize) -> Result<Self, LangError> {
        let mut table = EmbeddingTable::new(dim);
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (token, rest) = line.split_once('\t').ok_or_else(|| LangError::Parse {
                line: i + 1,
                message: "expected token<TAB>floats".into(),
            })?;
            let values: Vec<f64> = rest
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| LangError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if values.len() != dim {
                return Err(LangError::Parse {
                    line: i + 1,
                    message: format!("expected {dim} floats, got {}", values.len()),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(LangError::Parse {
                    line: i + 1,
                    message: "non-finite embedding component".into(),
                });
            }
            table.vectors.insert(token.to_string(), values);
        }
        Ok(table)
    }

    pub fn load(path: &Path, dim: usize) -> Result<Self, LangError> {
        Self::parse(&std::fs::read_to_string(path)?, dim)
    }

    /// The curated table bundled with the crate.
    pub fn builtin() -> Self {
        Self::parse(include_str!("../assets/embeddings.tsv"), WORD_DIM)
            .expect("bundled embedding table is valid")
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// Total lookup: file vector when present, otherwise a deterministic
    /// seeded-hash unit vector.
    pub fn embed(&self, token: &str) -> Vec<f64> {
        if let Some(v) = self.vectors.get(token) {
            return v.clone();
        }
        let mut rng = Rng::new(fnv1a(token.as_bytes()));
        let mut v: Vec<f64> = (0..self.dim).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        for x in &mut v {
            *x /= norm;
        }
        v
    }

    pub fn cosine(&self, a: &str, b: &str) -> f64 {
        cosine(&self.embed(a), &self.embed(b))
    }

    /// Candidates ranked by cosine similarity to `token`, most similar first.
    /// Ties break on the candidate token so ordering is reproducible.
    pub fn rank_by_similarity(&self, token: &str, candidates: &[String]) -> Vec<(String, f64)> {
        let anchor = self.embed(token);
        let mut scored: Vec<(String, f64)> = candidates
            .iter()
            .map(|c| (c.clone(), cosine(&anchor, &self.embed(c))))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb).max(1e-12)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Instruction sentence encoder.
///
/// The default backend averages token embeddings and maps them through a
/// fixed seeded random projection; a precomputed backend serves stored
/// vectors keyed by instruction id byte-exactly.
pub struct SentenceEncoder {
    table: EmbeddingTable,
    projection: Vec<f64>, // SENT_DIM x word_dim, row-major
    out_dim: usize,
    precomputed: BTreeMap<String, Vec<f64>>,
}

impl SentenceEncoder {
    const PROJECTION_SEED: u64 = 0x5e17_ce0d;

    pub fn new(table: EmbeddingTable) -> Self {
        Self::with_out_dim(table, SENT_DIM)
    }

    pub fn with_out_dim(table: EmbeddingTable, out_dim: usize) -> Self {
        let in_dim = table.dim();
        let mut rng = Rng::new(Self::PROJECTION_SEED);
        let scale = 1.0 / (in_dim as f64).sqrt();
        let projection = (0..out_dim * in_dim)
            .map(|_| rng.normal() * scale)
            .collect();
        SentenceEncoder {
            table,
            projection,
            out_dim,
            precomputed: BTreeMap::new(),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    /// Register precomputed vectors: `instruction_id<TAB>floats` per line.
    pub fn load_precomputed(&mut self, text: &str) -> Result<(), LangError> {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, rest) = line.split_once('\t').ok_or_else(|| LangError::Parse {
                line: i + 1,
                message: "expected id<TAB>floats".into(),
            })?;
            let values: Vec<f64> = rest
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| LangError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if values.len() != self.out_dim {
                return Err(LangError::Parse {
                    line: i + 1,
                    message: format!("expected {} floats, got {}", self.out_dim, values.len()),
                });
            }
            self.precomputed.insert(id.to_string(), values);
        }
        Ok(())
    }

    /// Encode an instruction. A registered id wins; otherwise the mean of the
    /// token embeddings is pushed through the fixed projection. Token order
    /// does not change the mean-backend output.
    pub fn encode(&self, id: Option<&str>, text: &str) -> Result<Vec<f64>, LangError> {
        if let Some(id) = id {
            if let Some(v) = self.precomputed.get(id) {
                return Ok(v.clone());
            }
        }
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(LangError::EmptyText);
        }
        // Summation in sorted token order keeps the bag-of-words mean
        // bit-identical under token permutation.
        tokens.sort();
        let in_dim = self.table.dim();
        let mut mean = vec![0.0; in_dim];
        for t in &tokens {
            for (m, v) in mean.iter_mut().zip(self.table.embed(t)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= tokens.len() as f64;
        }
        let mut out = vec![0.0; self.out_dim];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.projection[i * in_dim..(i + 1) * in_dim];
            *o = row.iter().zip(&mean).map(|(w, m)| w * m).sum();
        }
        Ok(out)
    }
}

/// Lowercased word tokens; hyphens stay inside tokens so forms like
/// "coffee-table" survive.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '_'))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

/// Surface-form to class-token alias map: `surface_form<TAB>class_token`.
/// Multi-word surfaces are allowed.
#[derive(Debug, Clone, Default)]
pub struct AliasMap {
    entries: BTreeMap<String, String>,
}

impl AliasMap {
    pub fn parse(text: &str) -> Result<Self, LangError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, class) = line.split_once('\t').ok_or_else(|| LangError::Parse {
                line: i + 1,
                message: "expected surface<TAB>class".into(),
            })?;
            entries.insert(surface.trim().to_lowercase(), class.trim().to_string());
        }
        Ok(AliasMap { entries })
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../assets/aliases.tsv")).expect("bundled alias file is valid")
    }

    pub fn resolve(&self, surface: &str) -> Option<&str> {
        self.entries.get(surface).map(|s| s.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Surface forms mapping to a class, shortest first; includes the class
    /// token itself.
    pub fn surfaces_for<'a>(&'a self, class: &'a str) -> Vec<&'a str> {
        let mut out: Vec<&str> = self
            .entries
            .iter()
            .filter(|(_, c)| c.as_str() == class)
            .map(|(s, _)| s.as_str())
            .collect();
        out.push(class);
        out.sort_by_key(|s| s.len());
        out
    }
}

/// Nouns extracted from an instruction, with optional instance groundings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstructionObjects {
    /// Matched surface tokens, in order of appearance, deduplicated.
    pub tokens: Vec<String>,
    /// Class token each surface resolves to.
    pub classes: Vec<String>,
    /// Surface token -> instance id, when supplied with the datum.
    pub groundings: BTreeMap<String, String>,
}

/// Lexicon-match instruction nouns against schema class tokens plus the alias
/// map. Bigrams are tried before unigrams so "wash basin" wins over "basin".
/// A trailing plural `s` is stripped when that produces a match.
pub fn extract_goal_objects(
    text: &str,
    schema: &DomainSchema,
    aliases: &AliasMap,
    groundings: Option<&BTreeMap<String, String>>,
) -> InstructionObjects {
    let words = tokenize(text);
    let lookup = |surface: &str| -> Option<String> {
        if let Some(class) = aliases.resolve(surface) {
            return schema.class(class).ok().map(|_| class.to_string());
        }
        if schema.class(surface).is_ok() {
            return Some(surface.to_string());
        }
        None
    };
    let lookup_with_plural = |surface: &str| -> Option<String> {
        lookup(surface).or_else(|| {
            surface
                .strip_suffix('s')
                .filter(|b| b.len() > 1)
                .and_then(lookup)
        })
    };

    let mut tokens = Vec::new();
    let mut classes = Vec::new();
    let mut push = |surface: String, class: String| {
        if !tokens.contains(&surface) {
            tokens.push(surface);
            classes.push(class);
        }
    };

    let mut i = 0;
    while i < words.len() {
        if i + 1 < words.len() {
            let bigram = format!("{} {}", words[i], words[i + 1]);
            if let Some(class) = lookup_with_plural(&bigram) {
                push(bigram, class);
                i += 2;
                continue;
            }
        }
        if let Some(class) = lookup_with_plural(&words[i]) {
            push(words[i].clone(), class);
        }
        i += 1;
    }

    let groundings = match groundings {
        Some(map) => map
            .iter()
            .filter(|(token, _)| tokens.contains(token))
            .map(|(t, id)| (t.clone(), id.clone()))
            .collect(),
        None => BTreeMap::new(),
    };

    InstructionObjects {
        tokens,
        classes,
        groundings,
    }
}
