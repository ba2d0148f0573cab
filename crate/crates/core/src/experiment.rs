//! Experiment configuration, named presets and end-to-end runners that turn a
//! config into trained models, per-run metrics CSVs and summary tables.
//!
//! Every random choice in a run comes from one root seed, split by name into
//! independent streams (data, initialization, batching, autoencoder), so any
//! sub-run can be reproduced on its own.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::mnist::{MnistFiles, MnistItem};
use crate::data::phase::{
    generate_phase_dataset_in, PhaseDataset, DEFAULT_H_RANGE, DEFAULT_TEST_COUNT,
    DEFAULT_TRAIN_COUNT,
};
use crate::data::{mnist_amplitude, mnist_binary, Dataset};
use crate::error::{Error, Result};
use crate::grad::GradientMethod;
use crate::losses::KdConfig;
use crate::qae::{compress_dataset, train_qae, QaeModel};
use crate::rng::derive_seed;
use crate::sim::QuantumInput;
use crate::train::{
    read_metrics_csv, train_kd, train_plain, train_self_kd, write_metrics_csv, MetricsRow,
    QnnModel, Schedule, Teacher, TrainCheckpoint, TrainConfig, TrainOutcome,
};

/// Which dataset a run trains on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "phase7")]
    Phase7,
    #[serde(rename = "phase15")]
    Phase15,
    #[serde(rename = "mnist-binary")]
    MnistBinary,
    #[serde(rename = "mnist-10class")]
    Mnist10Class,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::Phase7,
        Task::Phase15,
        Task::MnistBinary,
        Task::Mnist10Class,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Phase7 => "phase7",
            Task::Phase15 => "phase15",
            Task::MnistBinary => "mnist-binary",
            Task::Mnist10Class => "mnist-10class",
        }
    }

    /// Register size of the uncompressed inputs.
    pub fn data_qubits(self) -> usize {
        match self {
            Task::Phase7 => 7,
            Task::Phase15 | Task::MnistBinary => 15,
            Task::Mnist10Class => 10,
        }
    }

    pub fn n_classes(self, digits: &[u8]) -> usize {
        match self {
            Task::Phase7 | Task::Phase15 => 2,
            Task::MnistBinary => digits.len(),
            Task::Mnist10Class => 10,
        }
    }

    pub fn is_mnist(self) -> bool {
        matches!(self, Task::MnistBinary | Task::Mnist10Class)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::config("task", format!("unknown task `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Plain,
    Kd,
    SelfKd,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Plain, Mode::Kd, Mode::SelfKd];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Plain => "plain",
            Mode::Kd => "kd",
            Mode::SelfKd => "self-kd",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config("mode", format!("unknown mode `{s}`")))
    }
}

/// Register size and number of ansatz layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub qubits: usize,
    pub layers: usize,
}

impl Geometry {
    pub fn new(qubits: usize, layers: usize) -> Self {
        Geometry { qubits, layers }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSettings {
    /// Phase tasks: samples generated. MNIST: cap on training images after
    /// digit filtering, 0 for all of them.
    pub train_count: usize,
    pub test_count: usize,
    /// Range of the sampled `h2` coupling for phase tasks.
    pub h_range: (f64, f64),
    pub mnist_dir: Option<PathBuf>,
    pub digits: Vec<u8>,
    /// Rescale PCA outputs to [0, 1] before thresholding.
    pub min_max: bool,
    /// Where generated ground-state datasets are cached between runs.
    pub cache_dir: Option<PathBuf>,
}

impl Default for DataSettings {
    fn default() -> Self {
        DataSettings {
            train_count: DEFAULT_TRAIN_COUNT,
            test_count: DEFAULT_TEST_COUNT,
            h_range: DEFAULT_H_RANGE,
            mnist_dir: None,
            digits: vec![1, 5],
            min_max: false,
            cache_dir: None,
        }
    }
}

/// Autoencoder used to shrink inputs for a smaller student.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaeSettings {
    pub latent: usize,
    pub depth: usize,
    pub iterations: usize,
    /// Optimizer settings; the seed is replaced by the run's `qae-init` stream.
    pub optimizer: TrainConfig,
}

impl Default for QaeSettings {
    fn default() -> Self {
        QaeSettings {
            latent: 2,
            depth: 1,
            iterations: 600,
            optimizer: TrainConfig::default(),
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: Task,
    pub mode: Mode,
    pub student: Geometry,
    pub teacher: Option<Geometry>,
    /// A saved teacher; takes precedence over training one from `teacher`.
    pub teacher_checkpoint: Option<PathBuf>,
    /// Teacher optimizer settings when they differ from `train`.
    pub teacher_train: Option<TrainConfig>,
    /// When set, the student reads autoencoder-compressed inputs.
    pub compress: Option<QaeSettings>,
    pub kd: KdConfig,
    pub train: TrainConfig,
    pub data: DataSettings,
    /// Student depths visited by a sweep.
    pub layers: Vec<usize>,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "custom".into(),
            task: Task::Phase7,
            mode: Mode::Plain,
            student: Geometry::new(7, 1),
            teacher: None,
            teacher_checkpoint: None,
            teacher_train: None,
            compress: None,
            kd: KdConfig::new(2.0, 0.8).expect("valid defaults"),
            train: TrainConfig::default(),
            data: DataSettings::default(),
            layers: Vec::new(),
            out_dir: PathBuf::from("runs"),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Register size the student's inputs live on.
    pub fn student_input_qubits(&self) -> usize {
        match &self.compress {
            Some(q) => q.latent,
            None => self.task.data_qubits(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.task.n_classes(&self.data.digits)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if let Some(t) = &self.teacher_train {
            t.validate()?;
        }
        self.kd.validate()?;
        let n_classes = self.n_classes();
        let data_q = self.task.data_qubits();
        if self.student.qubits != self.student_input_qubits() {
            return Err(Error::config(
                "student.qubits",
                format!(
                    "{} qubits cannot read {}-qubit inputs",
                    self.student.qubits,
                    self.student_input_qubits()
                ),
            ));
        }
        if self.student.layers == 0 {
            return Err(Error::config("student.layers", "must be ≥ 1"));
        }
        if n_classes < 2 || n_classes > self.student.qubits {
            return Err(Error::config(
                "data.digits",
                format!(
                    "{n_classes} classes need between 2 and {} readout qubits",
                    self.student.qubits
                ),
            ));
        }
        if self.task == Task::MnistBinary && self.data.digits.len() != 2 {
            return Err(Error::config(
                "data.digits",
                "binary MNIST needs exactly two digits",
            ));
        }
        if self.data.digits.iter().any(|&d| d > 9) {
            return Err(Error::config("data.digits", "digits are 0 to 9"));
        }
        if !self.task.is_mnist() && (self.data.train_count == 0 || self.data.test_count == 0) {
            return Err(Error::config(
                "data.train_count",
                "phase tasks need nonempty train and test sets",
            ));
        }
        if let Some(q) = &self.compress {
            if self.task.is_mnist() {
                return Err(Error::config(
                    "compress",
                    "autoencoder compression applies to phase tasks",
                ));
            }
            if q.latent == 0 || q.latent >= data_q {
                return Err(Error::config(
                    "compress.latent",
                    format!("must lie in [1, {data_q})"),
                ));
            }
            if q.depth == 0 || q.iterations == 0 {
                return Err(Error::config(
                    "compress",
                    "depth and iterations must be ≥ 1",
                ));
            }
            q.optimizer.validate()?;
        }
        match self.mode {
            Mode::Kd => {
                if self.teacher.is_none() && self.teacher_checkpoint.is_none() {
                    return Err(Error::config(
                        "teacher",
                        "kd mode needs a teacher geometry or teacher_checkpoint",
                    ));
                }
                if let Some(t) = &self.teacher {
                    if t.qubits != data_q || t.layers == 0 {
                        return Err(Error::config(
                            "teacher",
                            format!("teacher must read the {data_q}-qubit inputs with ≥ 1 layer"),
                        ));
                    }
                }
            }
            Mode::SelfKd => {
                if self.compress.is_some() {
                    return Err(Error::config(
                        "compress",
                        "self-distillation shares one input representation",
                    ));
                }
            }
            Mode::Plain => {}
        }
        Ok(())
    }

    /// Config for a sibling run: same data and seeds, different student.
    pub fn with_student(&self, student: Geometry, mode: Mode) -> Self {
        ExperimentConfig {
            student,
            mode,
            ..self.clone()
        }
    }
}

/// Independent seeds for each random stream of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSeeds {
    pub data_train: u64,
    pub data_test: u64,
    pub teacher_init: u64,
    pub teacher_batches: u64,
    pub student_init: u64,
    pub student_batches: u64,
    pub qae_init: u64,
}

impl RunSeeds {
    pub fn from_root(root: u64) -> Self {
        RunSeeds {
            data_train: derive_seed(root, "data-train"),
            data_test: derive_seed(root, "data-test"),
            teacher_init: derive_seed(root, "teacher-init"),
            teacher_batches: derive_seed(root, "teacher-batches"),
            student_init: derive_seed(root, "student-init"),
            student_batches: derive_seed(root, "student-batches"),
            qae_init: derive_seed(root, "qae-init"),
        }
    }
}

pub const PRESETS: &[&str] = &[
    "table1-teacher",
    "table1-student1",
    "table1-student1-kd",
    "table1-student2",
    "table1-student2-kd",
    "qae",
    "fig3-teacher",
    "fig3",
    "fig3-reduced",
    "fig4-teacher",
    "fig4",
    "fig4-subset",
    "fig5",
    "fig5-reduced",
];

/// Autoencoder settings used by the Table 1 compressed student.
pub fn table1_qae() -> QaeSettings {
    QaeSettings {
        latent: 2,
        depth: 3,
        iterations: 600,
        optimizer: TrainConfig {
            learning_rate: 0.02,
            gradient: GradientMethod::Adjoint,
            ..TrainConfig::default()
        },
    }
}

fn iterations(n: usize, eval_every: usize) -> TrainConfig {
    TrainConfig {
        schedule: Schedule::Iterations(n),
        batch_size: 64,
        eval_every,
        gradient: GradientMethod::Adjoint,
        cache_teacher_logits: true,
        ..TrainConfig::default()
    }
}

/// A named, fully specified experiment.
pub fn preset(name: &str, seed: u64) -> Result<ExperimentConfig> {
    let table1 = ExperimentConfig {
        name: name.into(),
        task: Task::Phase7,
        mode: Mode::Plain,
        student: Geometry::new(7, 2),
        teacher: Some(Geometry::new(7, 2)),
        kd: KdConfig::new(2.0, 0.8)?,
        train: iterations(50, 1),
        seed,
        ..ExperimentConfig::default()
    };
    let compressed = ExperimentConfig {
        student: Geometry::new(2, 2),
        compress: Some(table1_qae()),
        ..table1.clone()
    };
    let fig3 = ExperimentConfig {
        name: name.into(),
        task: Task::Phase15,
        mode: Mode::Kd,
        student: Geometry::new(15, 1),
        teacher: Some(Geometry::new(15, 10)),
        kd: KdConfig::new(2.0, 0.8)?,
        train: iterations(50, 10),
        layers: vec![1, 2, 3],
        seed,
        ..ExperimentConfig::default()
    };
    let fig4 = ExperimentConfig {
        name: name.into(),
        task: Task::MnistBinary,
        mode: Mode::Kd,
        student: Geometry::new(15, 4),
        teacher: Some(Geometry::new(15, 10)),
        kd: KdConfig::new(2.0, 0.8)?,
        train: iterations(350, 50),
        data: DataSettings {
            train_count: 0,
            test_count: 0,
            ..DataSettings::default()
        },
        layers: vec![4, 5, 6, 7, 8],
        seed,
        ..ExperimentConfig::default()
    };
    let fig5 = ExperimentConfig {
        name: name.into(),
        task: Task::Mnist10Class,
        mode: Mode::SelfKd,
        student: Geometry::new(10, 4),
        kd: KdConfig::new(1.0, 0.5)?,
        train: TrainConfig {
            schedule: Schedule::Epochs(31),
            eval_every: 1,
            ..iterations(0, 1)
        },
        data: DataSettings {
            train_count: 0,
            test_count: 0,
            ..DataSettings::default()
        },
        seed,
        ..ExperimentConfig::default()
    };
    let cfg = match name {
        "table1-teacher" => table1,
        "table1-student1" => compressed,
        "table1-student1-kd" => ExperimentConfig {
            mode: Mode::Kd,
            ..compressed
        },
        "table1-student2" => ExperimentConfig {
            student: Geometry::new(7, 1),
            ..table1
        },
        "table1-student2-kd" => ExperimentConfig {
            mode: Mode::Kd,
            student: Geometry::new(7, 1),
            ..table1
        },
        "qae" => compressed,
        "fig3-teacher" => ExperimentConfig {
            mode: Mode::Plain,
            student: Geometry::new(15, 10),
            ..fig3
        },
        "fig3" => fig3,
        "fig3-reduced" => ExperimentConfig {
            data: DataSettings {
                train_count: 200,
                ..fig3.data.clone()
            },
            ..fig3
        },
        "fig4-teacher" => ExperimentConfig {
            mode: Mode::Plain,
            student: Geometry::new(15, 10),
            ..fig4
        },
        "fig4" => fig4,
        "fig4-subset" => ExperimentConfig {
            data: DataSettings {
                train_count: 2000,
                ..fig4.data.clone()
            },
            ..fig4
        },
        "fig5" => fig5,
        "fig5-reduced" => ExperimentConfig {
            data: DataSettings {
                train_count: 6000,
                test_count: 2000,
                ..fig5.data.clone()
            },
            ..fig5
        },
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{other}`; known: {}", PRESETS.join(", ")),
            ))
        }
    };
    Ok(cfg)
}

/// Training and test sets in the task's native representation.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub train: Dataset<f64>,
    pub test: Dataset<f64>,
}

/// Loads a cached ground-state dataset or generates and caches it.
pub fn phase_dataset(
    n: usize,
    count: usize,
    seed: u64,
    h_range: (f64, f64),
    cache_dir: Option<&Path>,
) -> Result<PhaseDataset> {
    let Some(dir) = cache_dir else {
        return generate_phase_dataset_in(n, count, seed, h_range);
    };
    let path = dir.join(format!(
        "phase_n{n}_c{count}_s{seed}_h{}-{}.bin",
        h_range.0, h_range.1
    ));
    if path.exists() {
        let cached = PhaseDataset::load(&path)?;
        if cached.n_qubits == n
            && cached.samples.len() == count
            && cached.seed == seed
            && cached.h_range == h_range
        {
            return Ok(cached);
        }
    }
    let fresh = generate_phase_dataset_in(n, count, seed, h_range)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    fresh.save(&path)?;
    Ok(fresh)
}

fn mnist_files(cfg: &ExperimentConfig) -> Result<MnistFiles> {
    let dir = cfg.data.mnist_dir.as_ref().ok_or_else(|| {
        Error::config(
            "data.mnist_dir",
            "MNIST tasks need the directory holding the IDX files",
        )
    })?;
    let files = MnistFiles::in_dir(dir);
    if !files.exist() {
        return Err(Error::Data(format!(
            "MNIST IDX files not found in {} (expected {})",
            dir.display(),
            crate::data::mnist::EXPECTED_SHA256
                .iter()
                .map(|f| f.0)
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    Ok(files)
}

fn first_n(items: Vec<MnistItem>, n: usize) -> Vec<MnistItem> {
    if n == 0 {
        items
    } else {
        items.into_iter().take(n).collect()
    }
}

/// Builds the datasets a config trains and evaluates on.
pub fn load_task_data(cfg: &ExperimentConfig) -> Result<TaskData> {
    let seeds = RunSeeds::from_root(cfg.seed);
    let d = &cfg.data;
    match cfg.task {
        Task::Phase7 | Task::Phase15 => {
            let n = cfg.task.data_qubits();
            let cache = d.cache_dir.as_deref();
            let train = phase_dataset(n, d.train_count, seeds.data_train, d.h_range, cache)?;
            let test = phase_dataset(n, d.test_count, seeds.data_test, d.h_range, cache)?;
            Ok(TaskData {
                train: Dataset::from_states(train.labelled_states()?, 2)?,
                test: Dataset::from_states(test.labelled_states()?, 2)?,
            })
        }
        Task::MnistBinary => {
            let files = mnist_files(cfg)?;
            let keep = |items: Vec<MnistItem>, n| {
                first_n(
                    items
                        .into_iter()
                        .filter(|x| d.digits.contains(&x.digit))
                        .collect(),
                    n,
                )
            };
            let train = keep(files.load_train()?, d.train_count);
            let test = keep(files.load_test()?, d.test_count);
            let b = mnist_binary(&train, &test, &d.digits, cfg.task.data_qubits(), d.min_max)?;
            Ok(TaskData {
                train: b.train,
                test: b.test,
            })
        }
        Task::Mnist10Class => {
            let files = mnist_files(cfg)?;
            let train = first_n(files.load_train()?, d.train_count);
            let test = first_n(files.load_test()?, d.test_count);
            let n = cfg.task.data_qubits();
            Ok(TaskData {
                train: mnist_amplitude(&train, n)?,
                test: mnist_amplitude(&test, n)?,
            })
        }
    }
}

/// A trained autoencoder and the fidelity it reached.
#[derive(Clone, Debug)]
pub struct QaeRun {
    pub model: QaeModel<f64>,
    pub fidelity_trace: Vec<f64>,
}

impl QaeRun {
    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity_trace.last().expect("trace is nonempty")
    }
}

fn pure_states(set: &Dataset<f64>) -> Result<Vec<crate::StateVector>> {
    set.inputs
        .iter()
        .map(|x| match x.pure_state()? {
            Some(s) => Ok(s.into_owned()),
            None => Err(Error::Data("autoencoder inputs must be pure states".into())),
        })
        .collect()
}

/// Trains the autoencoder of `settings` on the training states.
pub fn train_autoencoder(data: &TaskData, settings: &QaeSettings, seed: u64) -> Result<QaeRun> {
    let states = pure_states(&data.train)?;
    let cfg = TrainConfig {
        seed: RunSeeds::from_root(seed).qae_init,
        ..settings.optimizer.clone()
    };
    let out = train_qae(
        &states,
        settings.latent,
        settings.depth,
        settings.iterations,
        &cfg,
    )?;
    Ok(QaeRun {
        model: out.model,
        fidelity_trace: out.fidelity_trace,
    })
}

fn compress_set(qae: &QaeModel<f64>, set: &Dataset<f64>) -> Result<Dataset<f64>> {
    let samples: Vec<_> = pure_states(set)?
        .into_iter()
        .zip(set.labels.iter().copied())
        .collect();
    Dataset::from_densities(compress_dataset(qae, &samples)?, set.n_classes)
}

/// Student-side datasets: the task data, compressed when `qae` is given.
pub fn student_data(data: &TaskData, qae: Option<&QaeModel<f64>>) -> Result<TaskData> {
    match qae {
        None => Ok(data.clone()),
        Some(q) => Ok(TaskData {
            train: compress_set(q, &data.train)?,
            test: compress_set(q, &data.test)?,
        }),
    }
}

/// One finished training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: Task,
    pub mode: Mode,
    pub role: String,
    pub qubits: usize,
    pub layers: usize,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub metrics_file: String,
}

impl RunRecord {
    pub fn kd(&self) -> bool {
        self.mode != Mode::Plain && self.role == "student"
    }
}

/// `{task}_{mode}_{role}_q{qubits}_l{layers}_s{seed}`.
pub fn run_stem(task: Task, mode: Mode, role: &str, g: Geometry, seed: u64) -> String {
    format!("{task}_{mode}_{role}_q{}_l{}_s{seed}", g.qubits, g.layers)
}

fn parse_stem(stem: &str) -> Option<(Task, Mode, String, usize, usize, u64)> {
    let parts: Vec<&str> = stem.split('_').collect();
    let [task, mode, role, q, l, s] = parts.as_slice() else {
        return None;
    };
    Some((
        task.parse().ok()?,
        mode.parse().ok()?,
        (*role).to_string(),
        q.strip_prefix('q')?.parse().ok()?,
        l.strip_prefix('l')?.parse().ok()?,
        s.strip_prefix('s')?.parse().ok()?,
    ))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the metrics CSV and checkpoint of `out` and returns its record.
pub fn record_run(
    cfg: &ExperimentConfig,
    mode: Mode,
    role: &str,
    geometry: Geometry,
    out: &TrainOutcome<f64>,
) -> Result<RunRecord> {
    ensure_dir(&cfg.out_dir)?;
    let stem = run_stem(cfg.task, mode, role, geometry, cfg.seed);
    let csv = format!("{stem}.csv");
    write_metrics_csv(&cfg.out_dir.join(&csv), &out.metrics)?;
    TrainCheckpoint::from_outcome(out).save(&cfg.out_dir.join(format!("{stem}.ckpt.json")))?;
    let last = out.metrics.last().expect("at least one metrics row");
    Ok(RunRecord {
        task: cfg.task,
        mode,
        role: role.to_string(),
        qubits: geometry.qubits,
        layers: geometry.layers,
        seed: cfg.seed,
        train_acc: last.train_acc,
        test_acc: last.test_acc,
        metrics_file: csv,
    })
}

fn student_cfg(cfg: &ExperimentConfig) -> TrainConfig {
    TrainConfig {
        seed: RunSeeds::from_root(cfg.seed).student_batches,
        ..cfg.train.clone()
    }
}

fn teacher_cfg(cfg: &ExperimentConfig) -> TrainConfig {
    TrainConfig {
        seed: RunSeeds::from_root(cfg.seed).teacher_batches,
        ..cfg
            .teacher_train
            .clone()
            .unwrap_or_else(|| cfg.train.clone())
    }
}

/// A frozen teacher, plus its training record when it was trained here.
pub struct TeacherRun {
    pub model: QnnModel<f64>,
    pub record: Option<RunRecord>,
}

/// Loads the configured teacher checkpoint or trains a teacher on `data`.
pub fn obtain_teacher(cfg: &ExperimentConfig, data: &TaskData) -> Result<TeacherRun> {
    if let Some(path) = &cfg.teacher_checkpoint {
        let model = TrainCheckpoint::<f64>::load(path)?.model;
        if model.n_qubits() != cfg.task.data_qubits() || model.n_classes() != cfg.n_classes() {
            return Err(Error::config(
                "teacher_checkpoint",
                format!(
                    "{} holds a {}-qubit, {}-class model; the task needs {} qubits and {} classes",
                    path.display(),
                    model.n_qubits(),
                    model.n_classes(),
                    cfg.task.data_qubits(),
                    cfg.n_classes()
                ),
            ));
        }
        return Ok(TeacherRun {
            model,
            record: None,
        });
    }
    let g = cfg
        .teacher
        .ok_or_else(|| Error::config("teacher", "no teacher geometry or checkpoint"))?;
    let seeds = RunSeeds::from_root(cfg.seed);
    let init =
        QnnModel::hardware_efficient(g.qubits, g.layers, cfg.n_classes(), seeds.teacher_init)?;
    let out = train_plain(init, &data.train, &data.test, &teacher_cfg(cfg))?;
    let record = record_run(cfg, Mode::Plain, "teacher", g, &out)?;
    Ok(TeacherRun {
        model: out.model,
        record: Some(record),
    })
}

/// Trains the configured student, distilling from `teacher` when given.
pub fn train_student(
    cfg: &ExperimentConfig,
    data: &TaskData,
    student_sets: &TaskData,
    teacher: Option<&QnnModel<f64>>,
) -> Result<RunRecord> {
    let seeds = RunSeeds::from_root(cfg.seed);
    let g = cfg.student;
    let init =
        QnnModel::hardware_efficient(g.qubits, g.layers, cfg.n_classes(), seeds.student_init)?;
    let tc = student_cfg(cfg);
    let (mode, out) = match teacher {
        None => (
            Mode::Plain,
            train_plain(init, &student_sets.train, &student_sets.test, &tc)?,
        ),
        Some(t) => {
            let teacher = Teacher {
                model: t,
                inputs: &data.train.inputs,
            };
            let out = train_kd(
                init,
                teacher,
                &student_sets.train,
                &student_sets.test,
                &cfg.kd,
                &tc,
            )?;
            (Mode::Kd, out)
        }
    };
    record_run(cfg, mode, "student", g, &out)
}

/// Saves a trained autoencoder and its fidelity trace next to the run.
pub fn record_qae(cfg: &ExperimentConfig, qae: &QaeRun) -> Result<PathBuf> {
    ensure_dir(&cfg.out_dir)?;
    let stem = format!(
        "{}_qae_q{}to{}_s{}",
        cfg.task,
        qae.model.n_total(),
        qae.model.n_latent,
        cfg.seed
    );
    let path = cfg.out_dir.join(format!("{stem}.json"));
    qae.model.save(&path)?;
    let mut w = csv::Writer::from_path(cfg.out_dir.join(format!("{stem}_trace.csv")))
        .map_err(|e| Error::Data(e.to_string()))?;
    w.write_record(["iteration", "fidelity"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for (i, f) in qae.fidelity_trace.iter().enumerate() {
        w.write_record([i.to_string(), f.to_string()])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Outcome of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub records: Vec<RunRecord>,
    pub qae_fidelity: Option<f64>,
    pub self_kd: Option<SelfKdReport>,
}

/// Runs `cfg.mode` end to end and writes every artifact under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = load_task_data(cfg)?;
    if cfg.mode == Mode::SelfKd {
        let report = run_self_kd_on(cfg, &data)?;
        let records = vec![report.teacher.clone(), report.student.clone()];
        write_summary(&cfg.out_dir.join("summary.csv"), &records)?;
        return Ok(ExperimentReport {
            records,
            qae_fidelity: None,
            self_kd: Some(report),
        });
    }
    let mut records = Vec::new();
    let teacher = match cfg.mode {
        Mode::Kd => {
            let t = obtain_teacher(cfg, &data)?;
            records.extend(t.record.clone());
            Some(t.model)
        }
        _ => None,
    };
    let qae = cfg
        .compress
        .as_ref()
        .map(|q| train_autoencoder(&data, q, cfg.seed))
        .transpose()?;
    if let Some(q) = &qae {
        record_qae(cfg, q)?;
    }
    let sets = student_data(&data, qae.as_ref().map(|q| &q.model))?;
    records.push(train_student(cfg, &data, &sets, teacher.as_ref())?);
    write_summary(&cfg.out_dir.join("summary.csv"), &records)?;
    Ok(ExperimentReport {
        records,
        qae_fidelity: qae.map(|q| q.final_fidelity()),
        self_kd: None,
    })
}

/// Only the autoencoder stage of `cfg`.
pub fn run_qae(cfg: &ExperimentConfig) -> Result<QaeRun> {
    cfg.validate()?;
    let settings = cfg
        .compress
        .as_ref()
        .ok_or_else(|| Error::config("compress", "no autoencoder configured"))?;
    let data = load_task_data(cfg)?;
    let qae = train_autoencoder(&data, settings, cfg.seed)?;
    record_qae(cfg, &qae)?;
    Ok(qae)
}

/// Plain and distilled students at every depth in `cfg.layers`, sharing one
/// teacher. Writes `sweep_summary.csv`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    if cfg.layers.is_empty() {
        return Err(Error::config("layers", "a sweep needs at least one depth"));
    }
    if cfg.layers.contains(&0) {
        return Err(Error::config("layers", "depths must be ≥ 1"));
    }
    let kd_cfg = ExperimentConfig {
        mode: Mode::Kd,
        ..cfg.clone()
    };
    kd_cfg.validate()?;
    let data = load_task_data(cfg)?;
    let teacher = obtain_teacher(&kd_cfg, &data)?;
    let qae = cfg
        .compress
        .as_ref()
        .map(|q| train_autoencoder(&data, q, cfg.seed))
        .transpose()?;
    let sets = student_data(&data, qae.as_ref().map(|q| &q.model))?;
    let mut records: Vec<RunRecord> = teacher.record.iter().cloned().collect();
    for &layers in &cfg.layers {
        let run = cfg.with_student(Geometry::new(cfg.student.qubits, layers), Mode::Plain);
        records.push(train_student(&run, &data, &sets, None)?);
        records.push(train_student(&run, &data, &sets, Some(&teacher.model))?);
    }
    write_summary(&cfg.out_dir.join("sweep_summary.csv"), &records)?;
    Ok(records)
}

/// Results of the five Table 1 runs for one seed.
#[derive(Clone, Debug)]
pub struct Table1Report {
    pub teacher: RunRecord,
    pub student1: RunRecord,
    pub student1_kd: RunRecord,
    pub student2: RunRecord,
    pub student2_kd: RunRecord,
    pub qae_fidelity: f64,
}

/// Every Table 1 row for `seed`, sharing data, teacher and autoencoder. Each
/// row matches what its own preset produces.
pub fn run_table1(seed: u64, out_dir: &Path) -> Result<Table1Report> {
    let at = |name: &str| -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            out_dir: out_dir.to_path_buf(),
            ..preset(name, seed)?
        })
    };
    let base = at("table1-student2-kd")?;
    let data = load_task_data(&base)?;
    let teacher = obtain_teacher(&base, &data)?;
    let s1 = at("table1-student1")?;
    let qae = train_autoencoder(
        &data,
        s1.compress.as_ref().expect("compressed preset"),
        seed,
    )?;
    record_qae(&s1, &qae)?;
    let compressed = student_data(&data, Some(&qae.model))?;
    let student1 = train_student(&s1, &data, &compressed, None)?;
    let student1_kd = train_student(
        &at("table1-student1-kd")?,
        &data,
        &compressed,
        Some(&teacher.model),
    )?;
    let student2 = train_student(&at("table1-student2")?, &data, &data, None)?;
    let student2_kd = train_student(&base, &data, &data, Some(&teacher.model))?;
    let report = Table1Report {
        teacher: teacher.record.expect("teacher trained here"),
        student1,
        student1_kd,
        student2,
        student2_kd,
        qae_fidelity: qae.final_fidelity(),
    };
    write_summary(
        &out_dir.join("table1_summary.csv"),
        &[
            report.teacher.clone(),
            report.student1.clone(),
            report.student1_kd.clone(),
            report.student2.clone(),
            report.student2_kd.clone(),
        ],
    )?;
    Ok(report)
}

/// First epoch whose test accuracy is within `tol` of `target`.
pub fn convergence_epoch(rows: &[MetricsRow], target: f64, tol: f64) -> Option<usize> {
    rows.iter()
        .find(|r| r.test_acc >= target - tol)
        .map(|r| r.epoch)
}

/// Self-distillation traces and convergence epochs.
#[derive(Clone, Debug)]
pub struct SelfKdReport {
    pub teacher: RunRecord,
    pub student: RunRecord,
    pub teacher_metrics: Vec<MetricsRow>,
    pub student_metrics: Vec<MetricsRow>,
    /// Epoch at which the teacher first comes within 1 point of its final accuracy.
    pub teacher_epochs: Option<usize>,
    /// Epoch at which the student first comes within 1 point of the teacher's final accuracy.
    pub student_epochs: Option<usize>,
}

fn run_self_kd_on(cfg: &ExperimentConfig, data: &TaskData) -> Result<SelfKdReport> {
    let g = cfg.student;
    let out = train_self_kd(
        g.qubits,
        g.layers,
        &data.train,
        &data.test,
        &cfg.kd,
        &student_cfg(cfg),
    )?;
    let teacher = record_run(cfg, Mode::SelfKd, "teacher", g, &out.teacher)?;
    let student = record_run(cfg, Mode::SelfKd, "student", g, &out.student)?;
    let target = out.teacher.final_test_acc;
    Ok(SelfKdReport {
        teacher_epochs: convergence_epoch(&out.teacher.metrics, target, 0.01),
        student_epochs: convergence_epoch(&out.student.metrics, target, 0.01),
        teacher,
        student,
        teacher_metrics: out.teacher.metrics,
        student_metrics: out.student.metrics,
    })
}

/// Teacher pretraining followed by same-architecture distillation.
pub fn run_self_kd(cfg: &ExperimentConfig) -> Result<SelfKdReport> {
    let cfg = ExperimentConfig {
        mode: Mode::SelfKd,
        ..cfg.clone()
    };
    cfg.validate()?;
    let data = load_task_data(&cfg)?;
    let report = run_self_kd_on(&cfg, &data)?;
    write_summary(
        &cfg.out_dir.join("summary.csv"),
        &[report.teacher.clone(), report.student.clone()],
    )?;
    Ok(report)
}

pub const SUMMARY_HEADER: &str =
    "task,mode,role,qubits,layers,seed,kd,train_acc,test_acc,metrics_file";

fn summary_row(r: &RunRecord) -> [String; 10] {
    [
        r.task.to_string(),
        r.mode.to_string(),
        r.role.clone(),
        r.qubits.to_string(),
        r.layers.to_string(),
        r.seed.to_string(),
        r.kd().to_string(),
        r.train_acc.to_string(),
        r.test_acc.to_string(),
        r.metrics_file.clone(),
    ]
}

pub fn write_summary(path: &Path, records: &[RunRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    w.write_record(SUMMARY_HEADER.split(','))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    for r in records {
        w.write_record(summary_row(r))
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const REPORT_HEADER: &str =
    "task,mode,role,qubits,layers,seed,rows,final_step,final_epoch,final_train_loss,final_train_acc,final_test_acc,best_test_acc";

/// One aggregated run in a report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub task: Task,
    pub mode: Mode,
    pub role: String,
    pub qubits: usize,
    pub layers: usize,
    pub seed: u64,
    pub rows: usize,
    pub last: MetricsRow,
    pub best_test_acc: f64,
}

/// Reads every per-run metrics CSV in `dir` (files named by [`run_stem`];
/// others are ignored), sorted by (task, mode, role, layers, qubits, seed).
pub fn collect_report(dir: &Path) -> Result<Vec<ReportRow>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let Some((task, mode, role, qubits, layers, seed)) = parse_stem(stem) else {
            continue;
        };
        let rows = read_metrics_csv(&path)?;
        let Some(last) = rows.last().cloned() else {
            return Err(Error::Parse(format!("{}: no metrics rows", path.display())));
        };
        let best = rows
            .iter()
            .map(|r| r.test_acc)
            .fold(f64::NEG_INFINITY, f64::max);
        found.insert(
            (task, mode, role.clone(), layers, qubits, seed),
            ReportRow {
                task,
                mode,
                role,
                qubits,
                layers,
                seed,
                rows: rows.len(),
                last,
                best_test_acc: best,
            },
        );
    }
    Ok(found.into_values().collect())
}

/// Aggregates `dir` into `dir/report.csv` and returns the rows.
pub fn write_report(dir: &Path) -> Result<Vec<ReportRow>> {
    let rows = collect_report(dir)?;
    let path = dir.join("report.csv");
    let mut w = csv::Writer::from_path(&path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(REPORT_HEADER.split(',')).map_err(err)?;
    for r in &rows {
        w.write_record([
            r.task.to_string(),
            r.mode.to_string(),
            r.role.clone(),
            r.qubits.to_string(),
            r.layers.to_string(),
            r.seed.to_string(),
            r.rows.to_string(),
            r.last.step.to_string(),
            r.last.epoch.to_string(),
            r.last.train_loss.to_string(),
            r.last.train_acc.to_string(),
            r.last.test_acc.to_string(),
            r.best_test_acc.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

/// Test accuracy of a saved model on the config's test set.
pub fn evaluate_checkpoint(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<f64> {
    let model = TrainCheckpoint::<f64>::load(checkpoint)?.model;
    let data = load_task_data(cfg)?;
    let test = match (&cfg.compress, model.n_qubits() == cfg.task.data_qubits()) {
        (_, true) => data.test,
        (Some(settings), false) => {
            let qae = train_autoencoder(&data, settings, cfg.seed)?;
            compress_set(&qae.model, &data.test)?
        }
        (None, false) => {
            return Err(Error::Dimension {
                expected: cfg.task.data_qubits(),
                got: model.n_qubits(),
            })
        }
    };
    crate::train::evaluate(&model, &test)
}

/// Whether every input of `set` is held as a compact bit string.
pub fn is_compact(set: &Dataset<f64>) -> bool {
    set.inputs
        .iter()
        .all(|x| matches!(x, QuantumInput::PhaseBits(_)))
}
