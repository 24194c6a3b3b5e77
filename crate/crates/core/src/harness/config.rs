use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::corpus::{SplitSpec, SynthParams};
use crate::dsp::{PreprocessConfig, PreprocessKeys};
use crate::error::{Error, Result};
use crate::features::FrontendSpec;
use crate::gmm::TrainConfig;
use crate::svm::{CvGrid, KernelKind};

/// The bundled sweep over every front-end row, both kernels.
pub const DEFAULT_CONFIG: &str = include_str!("default.toml");

#[derive(Clone, Debug, PartialEq)]
pub enum CorpusSource {
    Dir(PathBuf),
    Synth(SynthParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontendEntry {
    pub label: String,
    pub spec: FrontendSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmConfig {
    pub kernels: Vec<KernelKind>,
    pub linear_grid: CvGrid,
    pub rbf_grid: CvGrid,
    pub rbf_conventional: bool,
}

impl SvmConfig {
    pub fn grid(&self, kind: KernelKind) -> &CvGrid {
        match kind {
            KernelKind::Linear => &self.linear_grid,
            KernelKind::Rbf => &self.rbf_grid,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus: CorpusSource,
    pub split: SplitSpec,
    pub preprocess: PreprocessConfig,
    pub frontends: Vec<FrontendEntry>,
    pub gmm: TrainConfig,
    pub svm: SvmConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    corpus: RawCorpus,
    #[serde(default)]
    split: SplitSpec,
    #[serde(default)]
    preprocess: PreprocessKeys,
    #[serde(default)]
    gmm: TrainConfig,
    #[serde(default)]
    svm: RawSvm,
    #[serde(default)]
    frontend: Vec<RawFrontend>,
}

fn default_seed() -> u64 {
    42
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorpus {
    path: Option<PathBuf>,
    seed: Option<u64>,
    speakers: Option<usize>,
    utterances: Option<usize>,
    duration_s: Option<f64>,
    sample_rate: Option<u32>,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSvm {
    kernels: Vec<KernelKind>,
    folds: usize,
    grid: String,
    linear_grid: Option<String>,
    rbf_grid: Option<String>,
    rbf_conventional: bool,
}

impl Default for RawSvm {
    fn default() -> Self {
        Self {
            kernels: vec![KernelKind::Linear, KernelKind::Rbf],
            folds: 10,
            grid: CvGrid::default().to_string(),
            linear_grid: None,
            rbf_grid: None,
            rbf_conventional: false,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrontend {
    spec: String,
    label: Option<String>,
}

impl ExperimentConfig {
    /// Parses the TOML experiment format. Relative corpus paths resolve
    /// against `base_dir` when given.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let corpus = match raw.corpus.path {
            Some(p) => {
                let synth_keys = raw.corpus.speakers.is_some()
                    || raw.corpus.utterances.is_some()
                    || raw.corpus.duration_s.is_some()
                    || raw.corpus.sample_rate.is_some()
                    || raw.corpus.seed.is_some();
                if synth_keys {
                    return Err(Error::Config(
                        "[corpus] takes either `path` or synthesis keys, not both".into(),
                    ));
                }
                CorpusSource::Dir(match base_dir {
                    Some(b) if p.is_relative() => b.join(p),
                    _ => p,
                })
            }
            None => {
                let d = SynthParams::default();
                CorpusSource::Synth(SynthParams {
                    seed: raw.corpus.seed.unwrap_or(raw.seed),
                    speakers: raw.corpus.speakers.unwrap_or(d.speakers),
                    utterances: raw.corpus.utterances.unwrap_or(d.utterances),
                    duration_s: raw.corpus.duration_s.unwrap_or(d.duration_s),
                    sample_rate: raw.corpus.sample_rate.unwrap_or(d.sample_rate),
                })
            }
        };
        let grid = |s: &str| -> Result<CvGrid> {
            let mut g: CvGrid = s.parse()?;
            g.folds = raw.svm.folds;
            g.seed = raw.seed;
            g.validate()?;
            Ok(g)
        };
        let svm = SvmConfig {
            linear_grid: grid(raw.svm.linear_grid.as_deref().unwrap_or(&raw.svm.grid))?,
            rbf_grid: grid(raw.svm.rbf_grid.as_deref().unwrap_or(&raw.svm.grid))?,
            kernels: raw.svm.kernels,
            rbf_conventional: raw.svm.rbf_conventional,
        };
        if svm.kernels.is_empty() {
            return Err(Error::Config(
                "[svm] kernels must list at least one kernel".into(),
            ));
        }
        let frontends = raw
            .frontend
            .into_iter()
            .map(|f| {
                let spec: FrontendSpec = f.spec.parse()?;
                spec.validate()?;
                Ok(FrontendEntry {
                    label: f.label.unwrap_or_else(|| spec.to_string()),
                    spec,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if frontends.is_empty() {
            return Err(Error::Config(
                "at least one [[frontend]] entry is required".into(),
            ));
        }
        let mut gmm = raw.gmm;
        gmm.seed = raw.seed;
        gmm.validate()?;
        Ok(Self {
            seed: raw.seed,
            corpus,
            split: raw.split,
            preprocess: raw.preprocess.try_into()?,
            frontends,
            gmm,
            svm,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent())
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_toml(DEFAULT_CONFIG, None).expect("bundled configuration is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_parses() {
        let c = ExperimentConfig::default();
        assert_eq!(c.seed, 42);
        assert_eq!(c.frontends.len(), 13);
        let dims: Vec<usize> = c.frontends[..6].iter().map(|f| f.spec.dim()).collect();
        assert_eq!(dims, vec![12, 13, 24, 36, 39, 12]);
        assert_eq!(c.gmm.mixtures, 128);
        assert_eq!(c.gmm.relevance, 16.0);
        assert_eq!(c.svm.kernels, vec![KernelKind::Linear, KernelKind::Rbf]);
        assert_eq!(c.svm.rbf_grid.folds, 10);
        assert_eq!(c.split, SplitSpec::default());
        assert_eq!(c.preprocess, PreprocessConfig::default());
        assert!(matches!(c.corpus, CorpusSource::Synth(ref p) if *p == SynthParams::default()));
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::from_toml("seed = 7\n[[frontend]]\nspec = \"plp,d1\"\n", None)
            .unwrap();
        assert_eq!(c.frontends[0].label, "plp,d1");
        assert_eq!(c.gmm.seed, 7);
        assert_eq!(c.svm.linear_grid.seed, 7);
        assert!(matches!(c.corpus, CorpusSource::Synth(ref p) if p.seed == 7));
    }

    #[test]
    fn path_resolves_relative_to_config() {
        let c = ExperimentConfig::from_toml(
            "[corpus]\npath = \"wavs\"\n[[frontend]]\nspec = \"mfcc\"\n",
            Some(Path::new("/data/exp")),
        )
        .unwrap();
        assert_eq!(c.corpus, CorpusSource::Dir(PathBuf::from("/data/exp/wavs")));
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "",
            "[[frontend]]\nspec = \"mfcc,zz\"\n",
            "bogus = 1\n[[frontend]]\nspec = \"mfcc\"\n",
            "[svm]\nkernels = []\n[[frontend]]\nspec = \"mfcc\"\n",
            "[svm]\nfolds = 1\n[[frontend]]\nspec = \"mfcc\"\n",
            "[gmm]\nmixtures = 0\n[[frontend]]\nspec = \"mfcc\"\n",
            "[corpus]\npath = \"x\"\nspeakers = 3\n[[frontend]]\nspec = \"mfcc\"\n",
            "[preprocess]\nshift_ms = 30.0\n[[frontend]]\nspec = \"mfcc\"\n",
        ] {
            assert!(ExperimentConfig::from_toml(bad, None).is_err(), "{bad:?}");
        }
    }
}
