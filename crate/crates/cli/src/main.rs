//! `svid`: batch command line for the speaker identification pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use svid::corpus::{load_corpus_dir, save_corpus_dir, synthesize_corpus, SynthParams};
use svid::dsp::PreprocessConfig;
use svid::features::{assemble_frontend, read_features, write_features, FrontendSpec};
use svid::gmm::{
    map_adapt_means, read_gmm, read_supervector, supervector, train_ubm, write_gmm,
    write_supervector, Scaling, TrainConfig,
};
use svid::harness::{markdown_table, run_experiment, write_csv, ExperimentConfig};
use svid::svm::{
    cross_validate, read_svm, write_svm, CvGrid, KernelKind, KernelSpec, MulticlassSvm,
};
use svid::{Error, Result};

const FEATURE_EXT: &str = "feat";
const SUPERVECTOR_EXT: &str = "sv";

const EXIT_USAGE: u8 = 1;
const EXIT_PARTIAL: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "svid",
    version,
    about = "GMM-supervector / SVM speaker identification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus as <out>/<speaker>/<utterance>.wav
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 14)]
        speakers: usize,
        #[arg(long, default_value_t = 10)]
        utterances: usize,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long, default_value_t = 16000)]
        rate: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Extract features for every utterance of a corpus directory
    Extract {
        /// Front-end, e.g. `mfcc`, `mfcc,d2,e`, `plp,d2,rasta`
        #[arg(long)]
        frontend: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a UBM on all feature files under a directory
    TrainUbm {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        mixtures: usize,
        #[arg(long, default_value_t = 50)]
        max_iters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// MAP-adapt the UBM to each feature file and write supervectors
    Adapt {
        #[arg(long)]
        ubm: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16.0)]
        relevance: f64,
        #[arg(long, default_value_t = Scaling::Plain)]
        scaling: Scaling,
    },
    /// Train a one-vs-one SVM on supervectors, speakers taken from directory names
    TrainSvm {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = KernelKind::Linear)]
        kernel: KernelKind,
        /// Cross-validation folds
        #[arg(long, default_value_t = 10)]
        cv: usize,
        /// Search grid, e.g. `C=0.1,1,10,100;sigma=auto`
        #[arg(long)]
        grid: Option<String>,
        /// Use exp(-d/(2 sigma^2)) instead of exp(-d/sigma)
        #[arg(long)]
        conventional: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Print the predicted speaker of a supervector file, or of every file under a directory
    Identify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run a full front-end x kernel sweep and write the results CSV
    Evaluate {
        /// Experiment TOML; the bundled sweep when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads, 0 for all cores
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Also write a markdown table here
        #[arg(long)]
        markdown: Option<PathBuf>,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SVID_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("svid: {e}");
            ExitCode::from(if e.is_io_or_format() {
                EXIT_IO
            } else {
                EXIT_USAGE
            })
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Synth {
            out,
            speakers,
            utterances,
            duration,
            rate,
            seed,
        } => {
            let params = SynthParams {
                seed,
                speakers,
                utterances,
                duration_s: duration,
                sample_rate: rate,
            };
            let corpus = synthesize_corpus::<f64>(&params)?;
            save_corpus_dir(&out, &corpus)?;
            log::info!("wrote {} utterances to {}", corpus.len(), out.display());
        }
        Command::Extract {
            frontend,
            input,
            out,
        } => {
            let spec: FrontendSpec = frontend.parse()?;
            spec.validate()?;
            let corpus = load_corpus_dir::<f64>(&input)?;
            let rate = corpus.sample_rate().ok_or(Error::Empty)?;
            let fe = assemble_frontend::<f64>(&spec, &PreprocessConfig::default(), rate)?;
            corpus.utterances().par_iter().try_for_each(|u| {
                let f = fe.extract(&u.waveform)?;
                let path = tree_path(&out, &u.speaker, &u.id, FEATURE_EXT)?;
                write_features(path, &f)
            })?;
            log::info!("{} feature files ({} dims)", corpus.len(), spec.dim());
        }
        Command::TrainUbm {
            input,
            out,
            mixtures,
            max_iters,
            seed,
        } => {
            let cfg = TrainConfig {
                mixtures,
                max_iters,
                seed,
                ..TrainConfig::default()
            };
            cfg.validate()?;
            let files = list_tree(&input, FEATURE_EXT)?;
            let mats = files
                .par_iter()
                .map(|e| read_features::<f64>(&e.path).map(|f| f.into_values()))
                .collect::<Result<Vec<_>>>()?;
            let views: Vec<_> = mats.iter().map(|m| m.view()).collect();
            let pooled = ndarray_concat(&views)?;
            let trained = train_ubm(&pooled, &cfg)?;
            log::info!(
                "UBM K={} on {} frames, converged {}",
                mixtures,
                pooled.nrows(),
                trained.trace.converged
            );
            write_gmm(&out, &trained.model)?;
        }
        Command::Adapt {
            ubm,
            input,
            out,
            relevance,
            scaling,
        } => {
            if !(relevance > 0.0 && relevance.is_finite()) {
                return Err(Error::InvalidParam("relevance must be positive".into()));
            }
            let ubm = read_gmm::<f64>(&ubm)?;
            let files = list_tree(&input, FEATURE_EXT)?;
            files.par_iter().try_for_each(|e| {
                let f = read_features::<f64>(&e.path)?;
                let adapted = map_adapt_means(&ubm, f.values(), relevance)?;
                let sv = supervector(&adapted, &ubm, scaling)?;
                write_supervector(tree_path(&out, &e.speaker, &e.id, SUPERVECTOR_EXT)?, &sv)
            })?;
            log::info!("{} supervectors", files.len());
        }
        Command::TrainSvm {
            input,
            out,
            kernel,
            cv,
            grid,
            conventional,
            seed,
        } => {
            let mut grid: CvGrid = match grid {
                Some(g) => g.parse()?,
                None => CvGrid::default(),
            };
            grid.folds = cv;
            grid.seed = seed;
            grid.validate()?;
            let (x, labels, _) = load_supervectors(&input)?;
            let result = cross_validate(&x, &labels, &grid, kernel, conventional)?;
            let spec = match kernel {
                KernelKind::Linear => KernelSpec::linear(),
                KernelKind::Rbf if conventional => KernelSpec::rbf_conventional(result.best.sigma),
                KernelKind::Rbf => KernelSpec::rbf(result.best.sigma),
            };
            log::info!(
                "selected C={} sigma={} (cv accuracy {:.4})",
                result.best.c,
                result.best.sigma,
                result.best.mean_accuracy
            );
            let model = MulticlassSvm::train(&x, &labels, spec, result.best.c)?;
            write_svm(&out, &model)?;
        }
        Command::Identify { model, input } => {
            let model = read_svm::<f64>(&model)?;
            if input.is_dir() {
                let (x, _, names) = load_supervectors(&input)?;
                for (row, name) in x.rows().into_iter().zip(names) {
                    let p = model.predict(row.as_slice().expect("standard layout"))?;
                    println!("{name}\t{}", p.label);
                }
            } else {
                let sv = read_supervector::<f64>(&input)?;
                println!("{}", model.predict(&sv.values)?.label);
            }
        }
        Command::Evaluate {
            config,
            out,
            jobs,
            markdown,
            seed,
        } => {
            let mut text = match &config {
                Some(p) => fs::read_to_string(p).map_err(|e| io_err(p, e))?,
                None => svid::harness::DEFAULT_CONFIG.to_string(),
            };
            if let Some(s) = seed {
                text = format!("seed = {s}\n{}", strip_seed(&text));
            }
            let base = config.as_deref().and_then(Path::parent);
            let cfg = ExperimentConfig::from_toml(&text, base)?;
            let outcome = run_experiment(&cfg, jobs)?;
            write_csv(&out, &outcome.rows)?;
            if let Some(md) = markdown {
                if !outcome.rows.is_empty() {
                    let table = markdown_table(&outcome.rows)?;
                    fs::write(&md, table).map_err(|e| io_err(&md, e))?;
                }
            }
            let sidecar = errors_path(&out);
            if outcome.failures.is_empty() {
                if sidecar.exists() {
                    fs::remove_file(&sidecar).map_err(|e| io_err(&sidecar, e))?;
                }
            } else {
                let lines: String = outcome.failures.iter().map(|e| format!("{e}\n")).collect();
                fs::write(&sidecar, lines).map_err(|e| io_err(&sidecar, e))?;
                eprintln!(
                    "svid: {} front-end(s) failed, see {}",
                    outcome.failures.len(),
                    sidecar.display()
                );
                return Ok(EXIT_PARTIAL);
            }
        }
    }
    Ok(0)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn errors_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".errors");
    PathBuf::from(s)
}

/// Drops a top-level `seed = ...` line so a command-line seed can replace it.
fn strip_seed(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_table = false;
    for line in text.lines() {
        let t = line.trim_start();
        if t.starts_with('[') {
            in_table = true;
        }
        let is_seed = t
            .strip_prefix("seed")
            .is_some_and(|rest| rest.trim_start().starts_with('='));
        if !(is_seed && !in_table) {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

fn ndarray_concat(views: &[ndarray::ArrayView2<'_, f64>]) -> Result<ndarray::Array2<f64>> {
    if views.is_empty() {
        return Err(Error::Empty);
    }
    ndarray::concatenate(ndarray::Axis(0), views).map_err(|e| Error::ShapeMismatch(e.to_string()))
}

struct TreeEntry {
    speaker: String,
    id: String,
    path: PathBuf,
}

fn tree_path(root: &Path, speaker: &str, id: &str, ext: &str) -> Result<PathBuf> {
    let dir = root.join(speaker);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir.join(format!("{id}.{ext}")))
}

/// Files `<root>/<speaker>/<id>.<ext>`, sorted by speaker then id.
fn list_tree(root: &Path, ext: &str) -> Result<Vec<TreeEntry>> {
    let mut out = Vec::new();
    let rd = fs::read_dir(root).map_err(|e| io_err(root, e))?;
    for spk in rd {
        let spk = spk.map_err(|e| io_err(root, e))?.path();
        if !spk.is_dir() {
            continue;
        }
        let speaker = spk
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        for f in fs::read_dir(&spk).map_err(|e| io_err(&spk, e))? {
            let path = f.map_err(|e| io_err(&spk, e))?.path();
            if path.extension().is_some_and(|e| e == ext) {
                let id = path
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                out.push(TreeEntry {
                    speaker: speaker.clone(),
                    id,
                    path,
                });
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no .{ext} files in <speaker>/ subdirectories"),
            ),
        });
    }
    out.sort_by(|a, b| (&a.speaker, &a.id).cmp(&(&b.speaker, &b.id)));
    Ok(out)
}

/// Stacked supervectors, speaker labels and `speaker/id` names.
fn load_supervectors(root: &Path) -> Result<(ndarray::Array2<f64>, Vec<String>, Vec<String>)> {
    let files = list_tree(root, SUPERVECTOR_EXT)?;
    let svs = files
        .iter()
        .map(|e| read_supervector::<f64>(&e.path))
        .collect::<Result<Vec<_>>>()?;
    let dim = svs[0].len();
    if let Some(bad) = svs.iter().position(|s| s.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            got: svs[bad].len(),
        });
    }
    let flat: Vec<f64> = svs.into_iter().flat_map(|s| s.values).collect();
    let x = ndarray::Array2::from_shape_vec((files.len(), dim), flat)
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let labels = files.iter().map(|e| e.speaker.clone()).collect();
    let names = files
        .iter()
        .map(|e| format!("{}/{}", e.speaker, e.id))
        .collect();
    Ok((x, labels, names))
}
