//! End-to-end evaluation: corpus split, front-end sweep, UBM, supervectors,
//! cross-validated SVMs and identification-rate tables.

mod config;
mod report;

use std::fmt;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;

pub use config::{CorpusSource, ExperimentConfig, FrontendEntry, SvmConfig, DEFAULT_CONFIG};
pub use report::{csv_string, markdown_table, write_csv, CSV_HEADER};

use crate::corpus::{load_corpus_dir, split_train_test, synthesize_corpus, Corpus};
use crate::dsp::{self, FrameMatrix};
use crate::error::{Error, Result};
use crate::features::assemble_frontend;
use crate::gmm::{map_adapt_means, supervector, train_ubm};
use crate::svm::{cross_validate, KernelKind, KernelSpec, MulticlassSvm};

/// Percentage with exactly two decimals, stored as hundredths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(pub u64);

impl Percent {
    pub fn value(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IdentificationRate {
    pub percent: Percent,
    pub correct: usize,
    pub trials: usize,
}

/// `100 * correct / trials`, rounded to two decimals with halves away from zero.
pub fn identification_rate<S: PartialEq>(
    predictions: &[S],
    truth: &[S],
) -> Result<IdentificationRate> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty);
    }
    let correct = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(rate_from_counts(correct, truth.len()))
}

/// Rounded percentage from integer counts; `trials` must be positive.
pub fn rate_from_counts(correct: usize, trials: usize) -> IdentificationRate {
    let (k, n) = (correct as u64, trials as u64);
    IdentificationRate {
        percent: Percent((20_000 * k + n) / (2 * n)),
        correct,
        trials,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub feature: String,
    pub dim: usize,
    pub kernel: KernelKind,
    pub c: f64,
    /// `None` for the linear kernel.
    pub sigma: Option<f64>,
    pub rate: IdentificationRate,
}

#[derive(Debug, Default)]
pub struct ExperimentOutcome {
    pub rows: Vec<ResultRow>,
    /// Front-ends that failed, each tagged with the stage that failed.
    pub failures: Vec<Error>,
}

fn tag<'a>(frontend: &'a str, stage: &'static str) -> impl Fn(Error) -> Error + 'a {
    move |e| Error::Stage {
        frontend: frontend.to_string(),
        stage,
        source: Box::new(e),
    }
}

pub fn load_corpus(source: &CorpusSource) -> Result<Corpus<f64>> {
    match source {
        CorpusSource::Dir(p) => load_corpus_dir(p),
        CorpusSource::Synth(params) => synthesize_corpus(params),
    }
}

struct Prepared {
    train_frames: Vec<FrameMatrix<f64>>,
    train_labels: Vec<String>,
    test_frames: Vec<FrameMatrix<f64>>,
    test_labels: Vec<String>,
    sample_rate: u32,
}

fn prepare(cfg: &ExperimentConfig, corpus: &Corpus<f64>) -> Result<Prepared> {
    let (train, test) = split_train_test(corpus, cfg.split, cfg.seed)?;
    let frames = |c: &Corpus<f64>| -> Result<Vec<FrameMatrix<f64>>> {
        c.utterances()
            .par_iter()
            .map(|u| {
                dsp::preprocess(&u.waveform, &cfg.preprocess).map_err(|e| Error::Stage {
                    frontend: format!("{}/{}", u.speaker, u.id),
                    stage: "preprocess",
                    source: Box::new(e),
                })
            })
            .collect()
    };
    let labels = |c: &Corpus<f64>| c.utterances().iter().map(|u| u.speaker.clone()).collect();
    Ok(Prepared {
        train_frames: frames(&train)?,
        train_labels: labels(&train),
        test_frames: frames(&test)?,
        test_labels: labels(&test),
        sample_rate: corpus.sample_rate().ok_or(Error::Empty)?,
    })
}

fn stack(mats: &[Array2<f64>]) -> Result<Array2<f64>> {
    let views: Vec<ArrayView2<f64>> = mats.iter().map(|m| m.view()).collect();
    concatenate(Axis(0), &views).map_err(|e| Error::ShapeMismatch(e.to_string()))
}

fn run_frontend(
    cfg: &ExperimentConfig,
    data: &Prepared,
    entry: &FrontendEntry,
) -> Result<Vec<ResultRow>> {
    let label = entry.label.as_str();
    let fe = assemble_frontend::<f64>(&entry.spec, &cfg.preprocess, data.sample_rate)
        .map_err(tag(label, "frontend"))?;
    let extract = |frames: &[FrameMatrix<f64>]| -> Result<Vec<Array2<f64>>> {
        frames
            .par_iter()
            .map(|f| fe.extract_frames(f).map(|m| m.into_values()))
            .collect::<Result<Vec<_>>>()
            .map_err(tag(label, "extract"))
    };
    let train = extract(&data.train_frames)?;
    let test = extract(&data.test_frames)?;
    let pooled = stack(&train).map_err(tag(label, "ubm"))?;
    let ubm = train_ubm(&pooled, &cfg.gmm).map_err(tag(label, "ubm"))?;
    log::info!(
        "{label}: UBM on {} frames, {} EM iterations, converged {}",
        pooled.nrows(),
        ubm.trace.log_likelihoods.len() - 1,
        ubm.trace.converged
    );
    let ubm = ubm.model;
    let supervectors = |feats: &[Array2<f64>]| -> Result<Array2<f64>> {
        let rows = feats
            .par_iter()
            .map(|f| {
                let adapted = map_adapt_means(&ubm, f, cfg.gmm.relevance)?;
                Ok(supervector(&adapted, &ubm, cfg.gmm.scaling)?.values)
            })
            .collect::<Result<Vec<Vec<f64>>>>()
            .map_err(tag(label, "adapt"))?;
        let dim = rows[0].len();
        Array2::from_shape_vec((rows.len(), dim), rows.concat())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))
    };
    let sv_train = supervectors(&train)?;
    let sv_test = supervectors(&test)?;

    let mut out = Vec::new();
    for &kind in &cfg.svm.kernels {
        let cv = cross_validate(
            &sv_train,
            &data.train_labels,
            cfg.svm.grid(kind),
            kind,
            cfg.svm.rbf_conventional,
        )
        .map_err(tag(label, "cv"))?;
        let kernel = match kind {
            KernelKind::Linear => KernelSpec::linear(),
            KernelKind::Rbf => KernelSpec {
                kind,
                sigma: cv.best.sigma,
                conventional: cfg.svm.rbf_conventional,
            },
        };
        let model = MulticlassSvm::train(&sv_train, &data.train_labels, kernel, cv.best.c)
            .map_err(tag(label, "svm"))?;
        if !model.all_converged() {
            log::warn!("{label}/{kind}: some pairwise SVMs hit the iteration cap");
        }
        let predictions = sv_test
            .rows()
            .into_iter()
            .map(|r| {
                model
                    .predict(r.as_slice().expect("standard layout"))
                    .map(|p| p.label)
            })
            .collect::<Result<Vec<String>>>()
            .map_err(tag(label, "identify"))?;
        let rate =
            identification_rate(&predictions, &data.test_labels).map_err(tag(label, "identify"))?;
        log::info!(
            "{label}/{kind}: C={} sigma={} cv={:.4} IR={}",
            cv.best.c,
            cv.best.sigma,
            cv.best.mean_accuracy,
            rate.percent
        );
        out.push(ResultRow {
            feature: entry.label.clone(),
            dim: entry.spec.dim(),
            kernel: kind,
            c: cv.best.c,
            sigma: (kind == KernelKind::Rbf).then_some(cv.best.sigma),
            rate,
        });
    }
    Ok(out)
}

/// Runs every front-end of `cfg` on an already loaded corpus. Front-end
/// failures are collected rather than aborting the sweep; rows keep config
/// order whatever the scheduling.
pub fn run_on_corpus(cfg: &ExperimentConfig, corpus: &Corpus<f64>) -> Result<ExperimentOutcome> {
    let data = prepare(cfg, corpus)?;
    let results: Vec<Result<Vec<ResultRow>>> = cfg
        .frontends
        .par_iter()
        .map(|entry| run_frontend(cfg, &data, entry))
        .collect();
    let mut outcome = ExperimentOutcome::default();
    for r in results {
        match r {
            Ok(rows) => outcome.rows.extend(rows),
            Err(e) => {
                log::error!("{e}");
                outcome.failures.push(e);
            }
        }
    }
    Ok(outcome)
}

/// Loads or synthesizes the corpus, then runs the sweep on `jobs` worker
/// threads (0 = all cores). Output does not depend on `jobs`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParam(e.to_string()))?;
    pool.install(|| {
        let corpus = load_corpus(&cfg.corpus)?;
        run_on_corpus(cfg, &corpus)
    })
}
