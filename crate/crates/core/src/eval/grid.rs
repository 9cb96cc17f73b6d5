//! Multi-dataset, multi-seed experiment grid with ablation rows.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DatasetSplit;
use crate::encoders::{EncoderConfig, EncoderKind};
use crate::error::{Error, Result};
use crate::featurize::{ContextualVectors, InputConfig, InputMode};
use crate::gcn::GcnConfig;
use crate::model::{train, ModelConfig, TowModel, TrainConfig, WordVectors};

use super::{score_labels, EvalReport};

/// Components removed from the full model in an ablation row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Gcn,
    GcnPost,
    GcnPostPosn,
    GcnPosn,
}

impl Ablation {
    pub fn removes_post(self) -> bool {
        matches!(self, Ablation::GcnPost | Ablation::GcnPostPosn)
    }

    pub fn removes_posn(self) -> bool {
        matches!(self, Ablation::GcnPostPosn | Ablation::GcnPosn)
    }

    /// Whether the ablation is meaningful for `mode` (mode B has no POST).
    pub fn applies_to(self, mode: InputMode) -> bool {
        !(self.removes_post() && mode == InputMode::Contextual)
    }

    pub fn apply(self, config: &ModelConfig) -> ModelConfig {
        let mut c = config.clone();
        c.gcn.layers = 0;
        if self.removes_post() {
            c.input.use_post = false;
        }
        if self.removes_posn() {
            c.input.use_posn = false;
        }
        c
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::Gcn => "--- GCN",
            Ablation::GcnPost => "--- GCN, POST",
            Ablation::GcnPostPosn => "--- GCN, POST, POSN",
            Ablation::GcnPosn => "--- GCN, POSN",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub datasets: Vec<String>,
    pub encoders: Vec<EncoderKind>,
    pub modes: Vec<InputMode>,
    /// GCN off / on.
    pub gcn: Vec<bool>,
    /// Candidate GCN depths; the best on dev is kept per run.
    pub gcn_layers: Vec<usize>,
    pub seeds: Vec<u64>,
    pub ablations: Vec<Ablation>,
    /// Encoder of the full model the ablation rows start from.
    pub ablation_encoder: EncoderKind,
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            datasets: vec![],
            encoders: EncoderKind::ALL.to_vec(),
            modes: vec![InputMode::Glove],
            gcn: vec![false, true],
            gcn_layers: (1..=5).collect(),
            seeds: (1..=5).collect(),
            ablations: vec![],
            ablation_encoder: EncoderKind::BiLstm,
            jobs: None,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("datasets", self.datasets.is_empty()),
            ("encoders", self.encoders.is_empty()),
            ("modes", self.modes.is_empty()),
            ("gcn", self.gcn.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((axis, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("grid axis `{axis}` is empty")));
        }
        let needs_k = self.gcn.contains(&true) || !self.ablations.is_empty();
        if needs_k && (self.gcn_layers.is_empty() || self.gcn_layers.contains(&0)) {
            return Err(Error::Config("gcn_layers needs positive candidates".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        Ok(())
    }
}

/// Model and training settings shared by every grid cell. Each cell takes
/// the input config of its mode and the encoder config of its kind.
#[derive(Clone, Debug)]
pub struct GridBase {
    pub glove_input: InputConfig,
    pub contextual_input: InputConfig,
    /// Per-kind overrides; kinds not listed use their defaults.
    pub encoders: Vec<EncoderConfig>,
    pub gcn_normalize: bool,
    pub glove_train: TrainConfig,
    pub contextual_train: TrainConfig,
    pub word_vectors: WordVectors,
}

impl Default for GridBase {
    fn default() -> Self {
        GridBase {
            glove_input: InputConfig::glove(),
            contextual_input: InputConfig::contextual(0),
            encoders: vec![],
            gcn_normalize: false,
            glove_train: TrainConfig::glove(),
            contextual_train: TrainConfig::contextual(),
            word_vectors: WordVectors::Random,
        }
    }
}

impl GridBase {
    pub fn model_config(&self, kind: EncoderKind, mode: InputMode, gcn: bool) -> ModelConfig {
        let input = match mode {
            InputMode::Glove => self.glove_input.clone(),
            InputMode::Contextual => self.contextual_input.clone(),
        };
        let encoder = self
            .encoders
            .iter()
            .find(|e| e.kind == kind)
            .cloned()
            .unwrap_or_else(|| EncoderConfig::for_kind(kind));
        ModelConfig {
            input,
            encoder,
            gcn: GcnConfig {
                layers: usize::from(gcn),
                normalize: self.gcn_normalize,
            },
        }
    }

    fn train_config(&self, mode: InputMode, seed: u64) -> TrainConfig {
        let mut t = match mode {
            InputMode::Glove => self.glove_train.clone(),
            InputMode::Contextual => self.contextual_train.clone(),
        };
        t.seed = seed;
        t
    }
}

/// One benchmark: a training split, a test split and, for mode B, their
/// contextual vectors.
#[derive(Clone, Debug)]
pub struct GridDataset {
    pub name: String,
    pub train: DatasetSplit,
    pub test: DatasetSplit,
    pub train_contextual: Option<ContextualVectors>,
    pub test_contextual: Option<ContextualVectors>,
}

/// A table row: one model configuration evaluated on every dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub label: String,
    pub mode: InputMode,
    pub ablation: Option<Ablation>,
    pub config: ModelConfig,
}

/// Rows of the grid in table order: per mode, every encoder with and
/// without GCN, then the ablations of the full model.
pub fn grid_rows(spec: &GridSpec, base: &GridBase) -> Vec<GridRow> {
    let mut rows = Vec::new();
    for &mode in &spec.modes {
        for &kind in &spec.encoders {
            for &gcn in &spec.gcn {
                let config = base.model_config(kind, mode, gcn);
                rows.push(GridRow {
                    label: config.display_name(),
                    mode,
                    ablation: None,
                    config,
                });
            }
        }
        let ablations: Vec<Ablation> = spec
            .ablations
            .iter()
            .copied()
            .filter(|a| a.applies_to(mode))
            .collect();
        if ablations.is_empty() {
            continue;
        }
        let full = base.model_config(spec.ablation_encoder, mode, true);
        if !rows.iter().any(|r| r.ablation.is_none() && r.config == full) {
            rows.push(GridRow {
                label: full.display_name(),
                mode,
                ablation: None,
                config: full.clone(),
            });
        }
        for a in ablations {
            rows.push(GridRow {
                label: a.to_string(),
                mode,
                ablation: Some(a),
                config: a.apply(&full),
            });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// GCN depth picked on dev, when the row uses a GCN.
    pub gcn_layers: Option<usize>,
    pub best_epoch: usize,
    pub dev: EvalReport,
    pub test: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub message: String,
}

/// Mean over seeds of the per-seed test scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Population standard deviation of F1 across seeds.
    pub f1_std: f64,
}

impl MeanScores {
    pub fn of(reports: &[&EvalReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
        let f1 = mean(|r| r.f1);
        let var = reports.iter().map(|r| (r.f1 - f1).powi(2)).sum::<f64>() / n;
        Some(MeanScores {
            precision: mean(|r| r.precision),
            recall: mean(|r| r.recall),
            f1,
            f1_std: var.sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub dataset: String,
    pub runs: Vec<SeedResult>,
    pub failures: Vec<SeedFailure>,
    /// `None` when every seed failed.
    pub mean: Option<MeanScores>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    #[serde(flatten)]
    pub row: GridRow,
    pub cells: Vec<CellReport>,
    /// Mean F1 across datasets; `None` if any cell has no result.
    pub avg_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub datasets: Vec<String>,
    pub seeds: Vec<u64>,
    pub gcn_layer_candidates: Vec<usize>,
    pub rows: Vec<RowReport>,
}

impl GridReport {
    pub fn row(&self, label: &str, mode: InputMode) -> Option<&RowReport> {
        self.rows.iter().find(|r| r.row.label == label && r.row.mode == mode)
    }

    pub fn num_failures(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| &r.cells)
            .map(|c| c.failures.len())
            .sum()
    }
}

impl RowReport {
    pub fn cell(&self, dataset: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.dataset == dataset)
    }
}

/// Trains on `data.train` (selecting the GCN depth on dev when the row has a
/// GCN) and scores the selected model on `data.test`.
pub fn run_cell(
    config: &ModelConfig,
    data: &GridDataset,
    base: &GridBase,
    gcn_layers: &[usize],
    seed: u64,
) -> Result<SeedResult> {
    let mut config = config.clone();
    if config.input.mode == InputMode::Contextual {
        match (&data.train_contextual, &data.test_contextual) {
            (Some(train), Some(test)) if train.dim == test.dim => config.input.contextual_dim = train.dim,
            (Some(_), Some(_)) => {
                return Err(Error::Precondition(format!(
                    "dataset {}: train and test contextual widths differ",
                    data.name
                )))
            }
            _ => {
                return Err(Error::Precondition(format!(
                    "dataset {} has no contextual vectors",
                    data.name
                )))
            }
        }
    }
    let candidates: Vec<Option<usize>> = if config.gcn.enabled() {
        gcn_layers.iter().map(|&k| Some(k)).collect()
    } else {
        vec![None]
    };
    let train_config = base.train_config(config.input.mode, seed);
    let mut best: Option<(Option<usize>, crate::model::TrainOutcome)> = None;
    for k in candidates {
        let mut c = config.clone();
        if let Some(k) = k {
            c.gcn.layers = k;
        }
        let model = TowModel::initialize(c, &[&data.train, &data.test], &base.word_vectors, seed)?;
        let outcome = train(model, &data.train, &train_config, data.train_contextual.as_ref())?;
        if best.as_ref().is_none_or(|(_, b)| outcome.best_dev.f1 > b.best_dev.f1) {
            best = Some((k, outcome));
        }
    }
    let (k, outcome) = best.expect("at least one candidate");
    let preds = outcome
        .model
        .predict_all(&data.test.instances, data.test_contextual.as_ref())?;
    let test = score_labels(&preds, &data.test.instances)?;
    Ok(SeedResult {
        seed,
        gcn_layers: k,
        best_epoch: outcome.best_epoch,
        dev: outcome.best_dev,
        test,
    })
}

/// Runs every (row, dataset, seed) combination in a pool of `spec.jobs`
/// threads. A failing run is recorded in its cell and the grid continues.
pub fn run_grid(spec: &GridSpec, base: &GridBase, datasets: &[GridDataset]) -> Result<GridReport> {
    spec.validate()?;
    let data: Vec<&GridDataset> = spec
        .datasets
        .iter()
        .map(|name| {
            datasets
                .iter()
                .find(|d| &d.name == name)
                .ok_or_else(|| Error::Config(format!("grid dataset {name} was not loaded")))
        })
        .collect::<Result<_>>()?;
    let rows = grid_rows(spec, base);

    let tasks: Vec<(usize, usize, u64)> = (0..rows.len())
        .flat_map(|r| (0..data.len()).flat_map(move |d| spec.seeds.iter().map(move |&s| (r, d, s))))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = spec.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<SeedResult>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(r, d, seed)| {
                let res = run_cell(&rows[r].config, data[d], base, &spec.gcn_layers, seed);
                match &res {
                    Ok(s) => log::info!(
                        "{} on {} seed {seed}: test F1 {:.2}",
                        rows[r].label,
                        data[d].name,
                        s.test.f1 * 100.0
                    ),
                    Err(e) => log::warn!("{} on {} seed {seed} failed: {e}", rows[r].label, data[d].name),
                }
                res
            })
            .collect()
    });

    let mut results = results.into_iter();
    let mut reports = Vec::with_capacity(rows.len());
    for row in rows {
        let mut cells = Vec::with_capacity(data.len());
        for d in &data {
            let mut runs = Vec::new();
            let mut failures = Vec::new();
            for &seed in &spec.seeds {
                match results.next().expect("one result per task") {
                    Ok(r) => runs.push(r),
                    Err(e) => failures.push(SeedFailure {
                        seed,
                        message: e.to_string(),
                    }),
                }
            }
            let mean = MeanScores::of(&runs.iter().map(|r| &r.test).collect::<Vec<_>>());
            cells.push(CellReport {
                dataset: d.name.clone(),
                runs,
                failures,
                mean,
            });
        }
        let avg_f1 = cells
            .iter()
            .map(|c| c.mean.as_ref().map(|m| m.f1))
            .collect::<Option<Vec<f64>>>()
            .map(|f| f.iter().sum::<f64>() / f.len() as f64);
        reports.push(RowReport { row, cells, avg_f1 });
    }
    Ok(GridReport {
        datasets: spec.datasets.clone(),
        seeds: spec.seeds.clone(),
        gcn_layer_candidates: spec.gcn_layers.clone(),
        rows: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_rows_follow_full_model() {
        let spec = GridSpec {
            datasets: vec!["x".into()],
            encoders: vec![EncoderKind::BiLstm],
            modes: vec![InputMode::Glove, InputMode::Contextual],
            gcn: vec![false],
            ablations: vec![Ablation::Gcn, Ablation::GcnPostPosn, Ablation::GcnPosn],
            ..GridSpec::default()
        };
        let rows = grid_rows(&spec, &GridBase::default());
        let labels: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(
            labels,
            vec![
                "BiLSTM(G)",
                "BiLSTM+GCN(G)",
                "--- GCN",
                "--- GCN, POST, POSN",
                "--- GCN, POSN",
                "BiLSTM(B)",
                "BiLSTM+GCN(B)",
                "--- GCN",
                "--- GCN, POSN",
            ]
        );
        let stripped = &rows[3].config;
        assert!(!stripped.gcn.enabled() && !stripped.input.use_post && !stripped.input.use_posn);
        assert_eq!(rows[3].config.encoder, rows[1].config.encoder);
    }

    #[test]
    fn empty_axis_rejected() {
        let spec = GridSpec::default();
        assert!(matches!(spec.validate(), Err(Error::Config(m)) if m.contains("datasets")));
    }

    #[test]
    fn mean_scores() {
        let a = EvalReport::from_counts(2, 2, 2);
        let b = EvalReport::from_counts(2, 2, 0);
        let m = MeanScores::of(&[&a, &b]).unwrap();
        assert_eq!(m.f1, 0.5);
        assert_eq!(m.f1_std, 0.5);
        assert!(MeanScores::of(&[]).is_none());
    }
}
