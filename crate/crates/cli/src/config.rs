//! Run configuration: one JSON document, overridden field by field by flags.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, flags.
//! Relative paths in a config file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use milestone_core::baseline::{
    CachedEmbedder, EmbeddingProvider, HttpEmbedder, StubEmbedder, ThresholdTable, DEFAULT_THRESHOLD,
};
use milestone_core::gateway::{DEFAULT_BASE_URL, DEFAULT_TPM};
use milestone_core::prompting::PuzzleSpec;
use milestone_core::segmentation::{TokenCounter, DEFAULT_TOKEN_BUDGET};
use milestone_core::transcript::{load_ground_truth, load_transcripts, GroundTruth, Transcript};
use serde::{Deserialize, Serialize};

use crate::fail::{Failure, Outcome, Tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CounterKind {
    Bpe,
    Words,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    /// Deterministic hashed trigrams, seeded by `seed`.
    Stub,
    /// An OpenAI-compatible embeddings endpoint, cached when `embedding_cache` is set.
    Http,
    /// Precomputed vectors from `embedding_cache` only.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Puzzle definition; the bundled puzzle when absent.
    pub puzzle_spec: Option<PathBuf>,
    pub transcripts_dir: Option<PathBuf>,
    pub ground_truth_dir: Option<PathBuf>,
    pub backend: BackendKind,
    pub model: String,
    pub base_url: String,
    pub mock_script: Option<PathBuf>,
    pub token_budget: usize,
    pub token_counter: CounterKind,
    /// BPE merge table; the bundled table when absent.
    pub merges: Option<PathBuf>,
    pub trials: usize,
    pub tpm: u64,
    /// Per-milestone baseline thresholds; every milestone at 0.5 when absent.
    pub thresholds: Option<PathBuf>,
    pub k: Vec<usize>,
    pub embedder: EmbedderKind,
    pub embedding_model: String,
    pub embedding_dimension: usize,
    pub embedding_cache: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            puzzle_spec: None,
            transcripts_dir: None,
            ground_truth_dir: None,
            backend: BackendKind::Http,
            model: "gpt-3.5-turbo".into(),
            base_url: DEFAULT_BASE_URL.into(),
            mock_script: None,
            token_budget: DEFAULT_TOKEN_BUDGET,
            token_counter: CounterKind::Bpe,
            merges: None,
            trials: 10,
            tpm: DEFAULT_TPM,
            thresholds: None,
            k: vec![1, 5],
            embedder: EmbedderKind::Stub,
            embedding_model: "text-embedding-3-small".into(),
            embedding_dimension: 1536,
            embedding_cache: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Outcome<Self> {
        let text = std::fs::read_to_string(path).config(format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_json(&text).config(format!("parsing config {}", path.display()))?;
        cfg.rebase(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for p in [
            &mut self.puzzle_spec,
            &mut self.transcripts_dir,
            &mut self.ground_truth_dir,
            &mut self.mock_script,
            &mut self.merges,
            &mut self.thresholds,
            &mut self.embedding_cache,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
        join(&mut self.output_dir);
    }

    pub fn validate(&self) -> Outcome<()> {
        if self.token_budget == 0 {
            return Err(Failure::config("token_budget must be positive"));
        }
        if self.trials == 0 {
            return Err(Failure::config("trials must be at least 1"));
        }
        if self.tpm == 0 {
            return Err(Failure::config("tpm must be positive"));
        }
        if self.k.is_empty() || self.k.contains(&0) {
            return Err(Failure::config("k must be a non-empty list of positive integers"));
        }
        let inputs = [
            ("puzzle_spec", &self.puzzle_spec),
            ("transcripts_dir", &self.transcripts_dir),
            ("ground_truth_dir", &self.ground_truth_dir),
            ("mock_script", &self.mock_script),
            ("merges", &self.merges),
            ("thresholds", &self.thresholds),
        ];
        for (name, path) in inputs {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Failure::config(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        if self.embedder == EmbedderKind::File && self.embedding_cache.as_ref().is_none_or(|p| !p.exists()) {
            return Err(Failure::config("embedder `file` needs an existing embedding_cache"));
        }
        Ok(())
    }

    pub fn puzzle(&self) -> Outcome<PuzzleSpec> {
        match &self.puzzle_spec {
            None => Ok(PuzzleSpec::bundled()),
            Some(p) => {
                let text = std::fs::read_to_string(p).config(format!("reading {}", p.display()))?;
                PuzzleSpec::from_json(&text).config(format!("puzzle spec {}", p.display()))
            }
        }
    }

    pub fn counter(&self) -> Outcome<TokenCounter> {
        match (&self.merges, self.token_counter) {
            (_, CounterKind::Words) => Ok(TokenCounter::Words),
            (Some(p), CounterKind::Bpe) => {
                TokenCounter::from_merges_file(p).config(format!("merge table {}", p.display()))
            }
            (None, CounterKind::Bpe) => Ok(TokenCounter::bundled()),
        }
    }

    pub fn transcripts(&self) -> Outcome<Vec<Transcript>> {
        let dir = self
            .transcripts_dir
            .as_ref()
            .ok_or_else(|| Failure::config("no transcripts directory (set transcripts_dir or --transcripts)"))?;
        let ts = load_transcripts(dir).data(format!("loading transcripts from {}", dir.display()))?;
        if ts.is_empty() {
            return Err(Failure::data(format!("{} holds no transcripts", dir.display())));
        }
        Ok(ts)
    }

    pub fn ground_truth(&self) -> Outcome<Vec<GroundTruth>> {
        let dir = self
            .ground_truth_dir
            .as_ref()
            .ok_or_else(|| Failure::config("no ground truth directory (set ground_truth_dir or --ground-truth)"))?;
        load_ground_truth(dir).data(format!("loading ground truth from {}", dir.display()))
    }

    pub fn threshold_table(&self, spec: &PuzzleSpec) -> Outcome<ThresholdTable> {
        let table = match &self.thresholds {
            None => ThresholdTable::uniform(spec, DEFAULT_THRESHOLD),
            Some(p) => ThresholdTable::load(p).config(format!("thresholds {}", p.display()))?,
        };
        table.check_complete(spec).config("thresholds")?;
        Ok(table)
    }

    pub fn embedder(&self) -> Outcome<Embedder> {
        Ok(match self.embedder {
            EmbedderKind::Stub => Embedder::Plain(Box::new(StubEmbedder::new(self.seed))),
            EmbedderKind::File => {
                let path = self.embedding_cache.as_ref().expect("validated");
                Embedder::Cached(CachedEmbedder::open(path, None).data("embedding cache")?)
            }
            EmbedderKind::Http => {
                let key = std::env::var(milestone_core::gateway::API_KEY_ENV).unwrap_or_default();
                let http = HttpEmbedder::new(&self.base_url, key, &self.embedding_model, self.embedding_dimension)
                    .backend("embedding client")?;
                match &self.embedding_cache {
                    Some(path) => {
                        Embedder::Cached(CachedEmbedder::open(path, Some(Box::new(http))).data("embedding cache")?)
                    }
                    None => Embedder::Plain(Box::new(http)),
                }
            }
        })
    }
}

pub enum Embedder {
    Plain(Box<dyn EmbeddingProvider>),
    Cached(CachedEmbedder),
}

impl Embedder {
    pub fn provider(&self) -> &dyn EmbeddingProvider {
        match self {
            Embedder::Plain(p) => p.as_ref(),
            Embedder::Cached(c) => c,
        }
    }

    pub fn finish(&self) -> Outcome<()> {
        match self {
            Embedder::Plain(_) => Ok(()),
            Embedder::Cached(c) => c.save().data("saving embedding cache"),
        }
    }
}

/// Flags shared by `detect` and `baseline`. Each one overrides the config field
/// of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub puzzle_spec: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub transcripts: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub ground_truth: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    /// Tokens per chunk of rendered transcript.
    #[arg(long)]
    pub token_budget: Option<usize>,
    #[arg(long, value_enum)]
    pub token_counter: Option<CounterKind>,
    /// Count with the offline word approximation instead of BPE.
    #[arg(long)]
    pub fallback_counter: bool,
    #[arg(long)]
    pub merges: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Tokens per minute shared by all requests.
    #[arg(long)]
    pub tpm: Option<u64>,
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Comma-separated top-k values.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub embedder: Option<EmbedderKind>,
    #[arg(long)]
    pub embedding_model: Option<String>,
    #[arg(long)]
    pub embedding_dimension: Option<usize>,
    #[arg(long)]
    pub embedding_cache: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Teams processed at once; 1 runs sequentially.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl RunArgs {
    pub fn resolve(&self) -> Outcome<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut RunConfig) {
        fn set<T: Clone>(field: &mut T, flag: &Option<T>) {
            if let Some(v) = flag {
                *field = v.clone();
            }
        }
        fn set_some<T: Clone>(field: &mut Option<T>, flag: &Option<T>) {
            if flag.is_some() {
                field.clone_from(flag);
            }
        }
        set_some(&mut cfg.puzzle_spec, &self.puzzle_spec);
        set_some(&mut cfg.transcripts_dir, &self.transcripts);
        set_some(&mut cfg.ground_truth_dir, &self.ground_truth);
        set(&mut cfg.backend, &self.backend);
        set(&mut cfg.model, &self.model);
        set(&mut cfg.base_url, &self.base_url);
        set_some(&mut cfg.mock_script, &self.mock_script);
        set(&mut cfg.token_budget, &self.token_budget);
        set(&mut cfg.token_counter, &self.token_counter);
        if self.fallback_counter {
            cfg.token_counter = CounterKind::Words;
        }
        set_some(&mut cfg.merges, &self.merges);
        set(&mut cfg.trials, &self.trials);
        set(&mut cfg.tpm, &self.tpm);
        set_some(&mut cfg.thresholds, &self.thresholds);
        set(&mut cfg.k, &self.k);
        set(&mut cfg.embedder, &self.embedder);
        set(&mut cfg.embedding_model, &self.embedding_model);
        set(&mut cfg.embedding_dimension, &self.embedding_dimension);
        set_some(&mut cfg.embedding_cache, &self.embedding_cache);
        set(&mut cfg.output_dir, &self.out);
        set(&mut cfg.seed, &self.seed);
    }

    pub fn pool(&self) -> Outcome<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.jobs {
            if n == 0 {
                return Err(Failure::config("--jobs must be at least 1"));
            }
            builder = builder.num_threads(n);
        }
        builder.build().config("thread pool")
    }

    pub fn execution(&self) -> milestone_core::Execution {
        match self.jobs {
            Some(1) => milestone_core::Execution::Sequential,
            _ => milestone_core::Execution::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        cfg.backend = BackendKind::Mock;
        cfg.mock_script = Some("mock.json".into());
        cfg.k = vec![3];
        cfg.embedder = EmbedderKind::File;
        cfg.token_counter = CounterKind::Words;
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_take_defaults() {
        let cfg = RunConfig::from_json(r#"{"trials": 3}"#).unwrap();
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.token_budget, 3600);
        assert_eq!(cfg.k, vec![1, 5]);
        assert!(RunConfig::from_json(r#"{"trails": 3}"#).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = RunConfig::from_json(r#"{"transcripts_dir": "t", "output_dir": "/abs"}"#).unwrap();
        cfg.rebase(Path::new("/etc/run"));
        assert_eq!(cfg.transcripts_dir, Some(PathBuf::from("/etc/run/t")));
        assert_eq!(cfg.output_dir, PathBuf::from("/abs"));
    }

    #[test]
    fn flags_override_config() {
        let mut cfg = RunConfig::from_json(r#"{"trials": 3, "k": [2]}"#).unwrap();
        let args = RunArgs {
            trials: Some(7),
            fallback_counter: true,
            ..RunArgs::default()
        };
        args.apply(&mut cfg);
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.k, vec![2]);
        assert_eq!(cfg.token_counter, CounterKind::Words);
    }

    #[test]
    fn invariants_are_checked() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        cfg.trials = 1;
        cfg.token_budget = 0;
        assert!(cfg.validate().is_err());
        cfg.token_budget = 10;
        cfg.thresholds = Some("/nonexistent/thresholds.json".into());
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.kind, crate::fail::Kind::Config);
    }
}
