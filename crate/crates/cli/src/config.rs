//! Resolved run configuration: flags and environment (folded together by
//! clap) override the config file, which overrides defaults. The resolved
//! values are echoed into every output artifact.

use std::path::Path;
use std::sync::Arc;

use anyhow::{Context as _, Result};
use serde::{Deserialize, Serialize};

use goalnet_core::domain::{DomainSchema, SchemaSet};
use goalnet_core::lang::{AliasMap, EmbeddingTable, SentenceEncoder, SENT_DIM, WORD_DIM};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub planner_prob: Option<f64>,
    pub patience: Option<usize>,
    pub tau: Option<f64>,
    pub max_depth: Option<usize>,
    pub max_expansions: Option<usize>,
    pub workers: Option<usize>,
}

/// Fully resolved settings plus loaded shared resources.
pub struct Context {
    pub seed: u64,
    pub file: FileConfig,
    pub schemas: SchemaSet,
    pub encoder: SentenceEncoder,
    pub aliases: AliasMap,
    /// Provenance echo: where each shared input came from.
    pub sources: Sources,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sources {
    pub config_file: Option<String>,
    pub schema_dir: Option<String>,
    pub embeddings: String,
    pub aliases: String,
    pub sentence_vectors: Option<String>,
}

impl Context {
    pub fn resolve(cli: &crate::Cli) -> Result<Self> {
        let file: FileConfig = match &cli.config {
            Some(path) => serde_json::from_str(
                &std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?,
            )
            .with_context(|| format!("parsing config {}", path.display()))?,
            None => FileConfig::default(),
        };
        let seed = cli.seed.or(file.seed).unwrap_or(0);

        let schemas = match &cli.schema_dir {
            Some(dir) => load_schema_dir(dir)?,
            None => SchemaSet::builtin(),
        };
        let table = match &cli.embeddings {
            Some(path) => EmbeddingTable::load(path, WORD_DIM)
                .with_context(|| format!("loading embeddings {}", path.display()))?,
            None => EmbeddingTable::builtin(),
        };
        let mut encoder = SentenceEncoder::with_out_dim(table, SENT_DIM);
        if let Some(path) = &cli.sentence_vectors {
            encoder
                .load_precomputed(
                    &std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?,
                )
                .with_context(|| format!("parsing sentence vectors {}", path.display()))?;
        }
        let aliases = match &cli.aliases {
            Some(path) => AliasMap::parse(
                &std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?,
            )?,
            None => AliasMap::builtin(),
        };
        let sources = Sources {
            config_file: cli.config.as_ref().map(|p| p.display().to_string()),
            schema_dir: cli.schema_dir.as_ref().map(|p| p.display().to_string()),
            embeddings: cli
                .embeddings
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "builtin".into()),
            aliases: cli
                .aliases
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "builtin".into()),
            sentence_vectors: cli.sentence_vectors.as_ref().map(|p| p.display().to_string()),
        };
        Ok(Context {
            seed,
            file,
            schemas,
            encoder,
            aliases,
            sources,
        })
    }
}

fn load_schema_dir(dir: &Path) -> Result<SchemaSet> {
    let mut schemas: Vec<Arc<DomainSchema>> = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading schema dir {}", dir.display()))?
        .collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            schemas.push(
                DomainSchema::from_json(&text)
                    .with_context(|| format!("parsing schema {}", path.display()))?,
            );
        }
    }
    Ok(SchemaSet::new(schemas)?)
}
