use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::ingest::{self, DatasetStatistics};
use crate::metrics::{self, EvaluationInput};
use crate::model::SparseMatrix;
use crate::recommenders::{recommend_all, KnnModel, NmfConfig, NmfModel, Recommender};
use crate::stats::{self, GroupReport, PopFreqSeries};
use crate::stratify::{self, Group};
use crate::synth;

use super::config::{Algorithm, ConfigError, DataSource, PopularitySource, RunConfig};

const STAGING_DIR: &str = ".incomplete";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Synth,
    Split,
    Stratify,
    Train(Algorithm),
    Recommend(Algorithm),
    Evaluate(Algorithm),
    Report,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Ingest => f.write_str("ingest"),
            Stage::Synth => f.write_str("synth"),
            Stage::Split => f.write_str("split"),
            Stage::Stratify => f.write_str("stratify"),
            Stage::Train(a) => write!(f, "train {}", a.key()),
            Stage::Recommend(a) => write!(f, "recommend {}", a.key()),
            Stage::Evaluate(a) => write!(f, "evaluate {}", a.key()),
            Stage::Report => f.write_str("report"),
            Stage::Write => f.write_str("write"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} failed: {source}")]
    Stage { stage: Stage, source: Error },
}

impl PipelineError {
    /// 2 for configuration problems, 3 for unreadable or malformed input,
    /// 4 for everything that fails later.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage {
                stage: Stage::Ingest,
                ..
            } => 3,
            PipelineError::Stage { .. } => 4,
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError::Stage { stage, source })
    }
}

/// Outcome of one algorithm.
#[derive(Debug, Clone)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    pub report: GroupReport<f64>,
    pub correlation: PopFreqSeries<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub statistics: DatasetStatistics,
    pub group_sizes: [usize; 3],
    pub results: Vec<AlgorithmResult>,
    /// Every file written, manifest last.
    pub files: Vec<OutputFile>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: std::collections::BTreeMap<&'static str, String>,
    seed: u64,
    inputs: Vec<OutputFile>,
    outputs: &'a [OutputFile],
    notes: &'a [String],
}

/// Run the full audit and write its artifacts into `config.output_dir`.
///
/// Files are assembled in a staging directory and moved into place only
/// after every stage succeeded; on failure the staging directory is removed.
pub fn run_audit(config: &RunConfig) -> Result<RunSummary, PipelineError> {
    let mut notes = Vec::new();
    let mut inputs = Vec::new();
    let dataset = match &config.source {
        DataSource::Files {
            ratings,
            genres,
            columns,
        } => {
            log::info!("loading {}", ratings.display());
            let loaded = ingest::load_dataset(ratings, genres.as_deref(), config.range, *columns)
                .at(Stage::Ingest)?;
            if loaded.unknown_genre_items > 0 {
                notes.push(format!(
                    "{} genre-file item(s) without ratings ignored",
                    loaded.unknown_genre_items
                ));
            }
            for path in std::iter::once(ratings).chain(genres) {
                inputs.push(checksum_file(path).at(Stage::Ingest)?);
            }
            loaded.dataset
        }
        DataSource::Synth(synth_config) => {
            log::info!("generating synthetic data");
            synth::generate(synth_config).at(Stage::Synth)?
        }
    };
    let statistics = ingest::compute_statistics(&dataset).at(Stage::Ingest)?;
    log::info!(
        "{} users, {} items, {} ratings",
        statistics.users,
        statistics.items,
        statistics.ratings
    );

    let (train, test) =
        ingest::train_test_split(&dataset, config.test_fraction, config.seed).at(Stage::Split)?;
    let reference = match config.popularity {
        PopularitySource::Train => &train,
        PopularitySource::Full => {
            notes.push("popularity computed on train and test ratings".into());
            &dataset
        }
    };
    let profile = stratify::popularity_profile(reference).at(Stage::Stratify)?;
    let groups = stratify::split_groups(&profile).at(Stage::Stratify)?;
    let matrix = SparseMatrix::from_dataset(&train);

    let mut outputs: Vec<(String, Vec<u8>)> = Vec::new();
    outputs.push(("dataset_statistics.csv".into(), statistics_csv(&statistics)));
    let mut buf = Vec::new();
    stratify::write_groups_csv(&mut buf, &train, &profile, &groups)
        .map_err(csv_error)
        .at(Stage::Write)?;
    outputs.push(("groups.csv".into(), buf));

    let mut results = Vec::new();
    for &algorithm in config.algorithms.algorithms() {
        log::info!("training {}", algorithm.label());
        let model: Box<dyn Recommender<f64>> = match algorithm {
            Algorithm::UserKnn => Box::new(
                KnnModel::fit(&matrix, config.k, train.range()).at(Stage::Train(algorithm))?,
            ),
            Algorithm::Nmf => {
                let nmf_config = NmfConfig {
                    factors: config.factors,
                    iterations: config.iterations,
                    seed: config.seed,
                };
                Box::new(
                    NmfModel::fit(&matrix, nmf_config, train.range())
                        .at(Stage::Train(algorithm))?,
                )
            }
        };
        let lists =
            recommend_all(model.as_ref(), config.n, &matrix).at(Stage::Recommend(algorithm))?;
        let correlation =
            stats::pop_freq_correlation(&lists, reference).at(Stage::Recommend(algorithm))?;
        if correlation.spearman.is_none() {
            notes.push(format!(
                "{}: popularity/frequency correlation undefined",
                algorithm.key()
            ));
        }
        let input = EvaluationInput {
            train: &train,
            test: &test,
            profile: &profile,
            groups: &groups,
            lists: &lists,
            alpha: config.alpha,
        };
        let rows =
            metrics::evaluate_users(model.as_ref(), &input).at(Stage::Evaluate(algorithm))?;
        let without_mc = rows.iter().filter(|r| r.mc.is_none()).count();
        if without_mc > 0 {
            notes.push(format!(
                "{}: {without_mc} user(s) without genre-tagged profile or list left out of MC",
                algorithm.key()
            ));
        }
        let report = stats::build_group_report(algorithm.label(), &rows).at(Stage::Report)?;

        let key = algorithm.key();
        let mut buf = Vec::new();
        metrics::write_user_metrics_csv(&mut buf, &train, &rows)
            .map_err(csv_error)
            .at(Stage::Write)?;
        outputs.push((format!("{key}_user_metrics.csv"), buf));
        let mut buf = Vec::new();
        metrics::write_user_lift_csv(&mut buf, &train, &rows)
            .map_err(csv_error)
            .at(Stage::Write)?;
        outputs.push((format!("{key}_user_lift.csv"), buf));
        let mut buf = Vec::new();
        stats::write_pop_freq_csv(&mut buf, &train, &correlation)
            .map_err(csv_error)
            .at(Stage::Write)?;
        outputs.push((format!("{key}_popularity_frequency.csv"), buf));

        results.push(AlgorithmResult {
            algorithm,
            report,
            correlation,
        });
    }

    let reports: Vec<GroupReport<f64>> = results.iter().map(|r| r.report.clone()).collect();
    let mut buf = Vec::new();
    stats::write_report_csv(&mut buf, &reports)
        .map_err(csv_error)
        .at(Stage::Write)?;
    outputs.push(("report.csv".into(), buf));
    outputs.push((
        "report.md".into(),
        stats::render_markdown(&reports).into_bytes(),
    ));

    let mut files: Vec<OutputFile> = outputs
        .iter()
        .map(|(name, bytes)| OutputFile {
            name: name.clone(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        })
        .collect();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: config.to_pairs(),
        seed: config.seed,
        inputs,
        outputs: &files,
        notes: &notes,
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    manifest_bytes.push(b'\n');
    files.push(OutputFile {
        name: MANIFEST_FILE.into(),
        bytes: manifest_bytes.len(),
        sha256: hex::encode(Sha256::digest(&manifest_bytes)),
    });
    outputs.push((MANIFEST_FILE.into(), manifest_bytes));

    write_outputs(&config.output_dir, &outputs).at(Stage::Write)?;
    log::info!(
        "wrote {} files to {}",
        outputs.len(),
        config.output_dir.display()
    );

    Ok(RunSummary {
        output_dir: config.output_dir.clone(),
        statistics,
        group_sizes: [Group::LowPop, Group::MedPop, Group::HighPop]
            .map(|g| groups.members(g).len()),
        results,
        files,
    })
}

/// One-row CSV with the fields of [`DatasetStatistics`].
pub fn statistics_csv(statistics: &DatasetStatistics) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.serialize(statistics).expect("in-memory write");
    writer.into_inner().expect("in-memory write")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Write {
        path: PathBuf::from("<buffer>"),
        source: std::io::Error::other(e),
    }
}

fn checksum_file(path: &Path) -> crate::Result<OutputFile> {
    let bytes = fs::read(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    Ok(OutputFile {
        name: path.display().to_string(),
        bytes: bytes.len(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn write_outputs(dir: &Path, outputs: &[(String, Vec<u8>)]) -> crate::Result<()> {
    let write_err = |path: &Path| {
        let path = path.to_owned();
        move |source| Error::Write { path, source }
    };
    let staging = dir.join(STAGING_DIR);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(write_err(&staging))?;
    }
    fs::create_dir_all(&staging).map_err(write_err(&staging))?;
    let result = (|| {
        for (name, bytes) in outputs {
            let path = staging.join(name);
            fs::write(&path, bytes).map_err(write_err(&path))?;
        }
        for (name, _) in outputs {
            let target = dir.join(name);
            fs::rename(staging.join(name), &target).map_err(write_err(&target))?;
        }
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
        return result;
    }
    fs::remove_dir(&staging).map_err(write_err(&staging))
}
