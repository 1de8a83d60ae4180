//! Declarative run configs, the standard benchmark corpus, and the
//! multi-seed comparison of every pipeline.

mod bench;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::distill::{run_supervised, stage_seed, teacher_labels_from, DistillData, DistillError, PipelineConfig, PipelineKind};
use crate::teachersim::{
    make_teacher_labels, sample_corpus, sample_grammar, AnnotatedExample, GrammarConfig, NoiseConfig, TeacherSimError,
};

pub use bench::{median, run_bench, thread_pool, BenchError, BenchReport, BenchRow};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    TeacherSim(#[from] TeacherSimError),
    #[error("supervised teacher failed")]
    Teacher(#[from] DistillError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Sizes and sentence lengths of the three pools drawn from the grammar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    /// Gold examples withheld for supervised training.
    pub labeled: usize,
    /// Sentences the teacher labels.
    pub unlabeled: usize,
    pub test: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            labeled: 250,
            unlabeled: 5000,
            test: 1000,
            min_len: 4,
            max_len: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisKind {
    Buckets,
    Delta,
    Disparity,
    SizeSweep,
    SftSweep,
}

impl AnalysisKind {
    pub const ALL: [AnalysisKind; 5] = [
        AnalysisKind::Buckets,
        AnalysisKind::Delta,
        AnalysisKind::Disparity,
        AnalysisKind::SizeSweep,
        AnalysisKind::SftSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::Buckets => "buckets",
            AnalysisKind::Delta => "delta",
            AnalysisKind::Disparity => "disparity",
            AnalysisKind::SizeSweep => "size-sweep",
            AnalysisKind::SftSweep => "sft-sweep",
        }
    }
}

impl std::str::FromStr for AnalysisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AnalysisKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown analysis {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub select: Vec<AnalysisKind>,
    pub buckets: usize,
    /// Epoch-end checkpoints recorded by the curve analyses.
    pub epochs: usize,
    pub sizes: Vec<usize>,
    pub labeled_sizes: Vec<usize>,
    pub pakd_labeled: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            select: vec![AnalysisKind::Buckets, AnalysisKind::Delta],
            buckets: 20,
            epochs: 10,
            sizes: vec![250, 500, 1000, 2000, 4000],
            labeled_sizes: vec![50, 100, 250, 500, 750],
            pakd_labeled: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub seeds: Vec<u64>,
    pub pipelines: Vec<PipelineKind>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seeds: vec![1, 2, 3, 4, 5],
            pipelines: PipelineKind::ALL.to_vec(),
        }
    }
}

/// Where the labels of the distillation pool come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TeacherSource {
    /// Gold trees corrupted by the configured noise tiers.
    #[default]
    Simulated,
    /// Decodes of a student trained on the first `teacher.labeled` gold
    /// examples.
    Supervised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeacherConfig {
    pub source: TeacherSource,
    /// Gold examples the supervised teacher trains on.
    pub labeled: usize,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        TeacherConfig {
            source: TeacherSource::Simulated,
            labeled: 50,
        }
    }
}

/// Everything a run depends on. Two runs with equal configs produce equal
/// outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: String,
    pub grammar: GrammarConfig,
    pub corpus: CorpusConfig,
    pub noise: NoiseConfig,
    pub teacher: TeacherConfig,
    pub pipeline: PipelineConfig,
    pub analysis: AnalysisConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::standard()
    }
}

impl RunConfig {
    /// The standard benchmark: a fixed grammar, 250 gold examples, 5000
    /// teacher-labeled sentences split evenly between a clean tier and a
    /// heavily rotated one, and 1000 test sentences.
    pub fn standard() -> Self {
        RunConfig {
            seed: 1,
            out: "out".into(),
            grammar: standard_grammar(),
            corpus: CorpusConfig::default(),
            noise: NoiseConfig::two_tier(0),
            teacher: TeacherConfig::default(),
            pipeline: PipelineConfig::default(),
            analysis: AnalysisConfig::default(),
            bench: BenchConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.noise.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let c = &self.corpus;
        if c.min_len == 0 || c.min_len > c.max_len {
            return invalid(format!("length bounds [{}, {}]", c.min_len, c.max_len));
        }
        let r = self.pipeline.r_percent;
        if !(r > 0.0 && r <= 100.0) {
            return invalid(format!("r_percent {r} outside (0, 100]"));
        }
        if self.pipeline.beta < 0.0 || self.pipeline.beta.fract() != 0.0 {
            return invalid(format!("beta {} is not a non-negative integer", self.pipeline.beta));
        }
        if self.teacher.source == TeacherSource::Supervised
            && (self.teacher.labeled == 0 || self.teacher.labeled > c.labeled)
        {
            return invalid(format!(
                "teacher.labeled {} must lie in [1, corpus.labeled = {}]",
                self.teacher.labeled, c.labeled
            ));
        }
        if self.bench.seeds.is_empty() {
            return invalid("bench.seeds is empty".into());
        }
        Ok(())
    }

    /// Hex SHA-256 of the config's canonical JSON form, shortened to 16
    /// characters.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configs serialize");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    /// Hash of only the settings that determine generated and annotated
    /// corpora.
    pub fn data_hash(&self) -> String {
        let json = serde_json::to_string(&(&self.grammar, &self.corpus, &self.noise, &self.teacher, self.seed))
            .expect("configs serialize");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

pub fn standard_grammar() -> GrammarConfig {
    GrammarConfig {
        nonterminals: 40,
        vocab_size: 1000,
        rules_per_nonterminal: 1,
        lexical_leak: 0.01,
        ..GrammarConfig::default()
    }
}

/// The three pools of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpora {
    pub labeled: Vec<AnnotatedExample>,
    /// Teacher-labeled sentences; gold is kept for analysis.
    pub train: Vec<AnnotatedExample>,
    pub test: Vec<AnnotatedExample>,
}

impl Corpora {
    pub fn data(&self) -> DistillData<'_> {
        DistillData {
            train: &self.train,
            labeled: &self.labeled,
            test: &self.test,
        }
    }
}

const POOL_LABELED: u64 = 11;
const POOL_UNLABELED: u64 = 12;
const POOL_TEST: u64 = 13;
const POOL_NOISE: u64 = 14;

/// Gold-only pools of one seeded run, before any teacher has labeled the
/// unlabeled pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Pools {
    pub labeled: Vec<AnnotatedExample>,
    pub unlabeled: Vec<AnnotatedExample>,
    pub test: Vec<AnnotatedExample>,
}

pub fn sample_pools(grammar: &GrammarConfig, corpus: &CorpusConfig, seed: u64) -> Result<Pools, TeacherSimError> {
    let g = sample_grammar(grammar)?;
    let bounds = (corpus.min_len, corpus.max_len);
    let pool = |n: usize, tag: u64, prefix: &str| -> Result<Vec<AnnotatedExample>, TeacherSimError> {
        if n == 0 {
            Ok(Vec::new())
        } else {
            sample_corpus(&g, n, bounds, stage_seed(seed, tag), prefix)
        }
    };
    Ok(Pools {
        labeled: pool(corpus.labeled, POOL_LABELED, "l")?,
        unlabeled: pool(corpus.unlabeled, POOL_UNLABELED, "u")?,
        test: pool(corpus.test, POOL_TEST, "t")?,
    })
}

/// The noise config actually applied for run `seed`: its own seed is mixed
/// with the run seed so different runs draw different corruptions.
pub fn run_noise(noise: &NoiseConfig, seed: u64) -> NoiseConfig {
    NoiseConfig {
        seed: stage_seed(seed ^ noise.seed, POOL_NOISE),
        ..noise.clone()
    }
}

/// Draws the labeled, unlabeled and test pools for `seed` and applies the
/// simulated teacher to the unlabeled pool.
pub fn build_corpora(
    grammar: &GrammarConfig,
    corpus: &CorpusConfig,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Corpora, TeacherSimError> {
    let pools = sample_pools(grammar, corpus, seed)?;
    Ok(Corpora {
        train: make_teacher_labels(&pools.unlabeled, &run_noise(noise, seed))?,
        labeled: pools.labeled,
        test: pools.test,
    })
}

impl RunConfig {
    /// Teacher labels for the unlabeled pool of run `seed`, from whichever
    /// teacher the config selects.
    pub fn annotate(&self, pools: &Pools, seed: u64) -> Result<Vec<AnnotatedExample>, DataError> {
        match self.teacher.source {
            TeacherSource::Simulated => Ok(make_teacher_labels(&pools.unlabeled, &run_noise(&self.noise, seed))?),
            TeacherSource::Supervised => {
                let k = self.teacher.labeled.min(pools.labeled.len());
                let data = DistillData {
                    train: &[],
                    labeled: &pools.labeled[..k],
                    test: &[],
                };
                let pipeline = PipelineConfig {
                    seed,
                    ..self.pipeline.clone()
                };
                let (teacher, _) = run_supervised(data, &pipeline)?;
                Ok(teacher_labels_from(&teacher, &pools.unlabeled))
            }
        }
    }

    pub fn corpora(&self, seed: u64) -> Result<Corpora, DataError> {
        let pools = sample_pools(&self.grammar, &self.corpus, seed)?;
        Ok(Corpora {
            train: self.annotate(&pools, seed)?,
            labeled: pools.labeled,
            test: pools.test,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_config_round_trips_through_toml() {
        let cfg = RunConfig::standard();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sed = 3\n"), Err(ConfigError::Parse(_))));
        assert!(RunConfig::from_toml("[pipeline]\nrpercent = 3\n").is_err());
        assert!(RunConfig::from_toml("[corpus]\nlabeled = 10\nextra = 1\n").is_err());
    }

    #[test]
    fn partial_configs_take_standard_defaults() {
        let cfg = RunConfig::from_toml("seed = 9\n[pipeline]\nr_percent = 30.0\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.pipeline.r_percent, 30.0);
        assert_eq!(cfg.corpus, CorpusConfig::default());
        assert_eq!(cfg.grammar, standard_grammar());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(
            RunConfig::from_toml("[pipeline]\nr_percent = 0.0\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(RunConfig::from_toml("[corpus]\nmin_len = 5\nmax_len = 4\n").is_err());
        assert!(RunConfig::from_toml("[pipeline]\nbeta = 1.5\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::standard();
        let b = RunConfig { seed: 2, ..a.clone() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let c = RunConfig { out: "elsewhere".into(), ..a.clone() };
        assert_eq!(a.data_hash(), c.data_hash());
    }

    #[test]
    fn corpora_are_deterministic_and_disjoint_by_seed() {
        let cfg = RunConfig {
            corpus: CorpusConfig {
                labeled: 20,
                unlabeled: 50,
                test: 20,
                ..CorpusConfig::default()
            },
            ..RunConfig::standard()
        };
        let a = cfg.corpora(1).unwrap();
        assert_eq!(a, cfg.corpora(1).unwrap());
        assert_ne!(a.train, cfg.corpora(2).unwrap().train);
        assert_eq!((a.labeled.len(), a.train.len(), a.test.len()), (20, 50, 20));
        assert!(a.train.iter().all(|e| e.teacher.is_some() && e.noise_tier.is_some()));
        let built = build_corpora(&cfg.grammar, &cfg.corpus, &cfg.noise, 1).unwrap();
        assert_eq!(a, built);
    }

    #[test]
    fn supervised_teacher_labels_every_sentence() {
        let mut cfg = RunConfig::standard();
        cfg.corpus = CorpusConfig {
            labeled: 30,
            unlabeled: 40,
            test: 0,
            ..CorpusConfig::default()
        };
        cfg.pipeline.final_epochs = 2;
        cfg.teacher = TeacherConfig {
            source: TeacherSource::Supervised,
            labeled: 20,
        };
        cfg.validate().unwrap();
        let c = cfg.corpora(3).unwrap();
        assert_eq!(c.train.len(), 40);
        assert!(c.train.iter().all(|e| e.teacher.is_some() && e.noise_tier.is_none() && e.gold.is_some()));
        cfg.teacher.labeled = 31;
        assert!(cfg.validate().is_err());
    }
}
