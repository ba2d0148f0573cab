//! Command-line surface and config resolution (flags > file > preset > defaults).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qnnkd::experiment::{preset, ExperimentConfig, Mode};
use qnnkd::grad::GradientMethod;
use qnnkd::{Error, Result};
use serde_json::Value;

#[derive(Debug, Parser)]
#[command(
    name = "qnnkd",
    version,
    about = "Quantum neural network distillation experiments"
)]
pub struct Cli {
    /// Worker threads for per-sample parallelism (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate and cache a ground-state phase dataset.
    GenerateData(GenerateArgs),
    /// Train the autoencoder configured for a run and save it.
    TrainQae(RunArgs),
    /// Train one model (plain or distilled) end to end.
    Train(RunArgs),
    /// Train plain and distilled students over a list of depths.
    Sweep(RunArgs),
    /// Pretrain a teacher, then distill it into an identical student.
    SelfDistill(RunArgs),
    /// Test accuracy of a saved checkpoint.
    Evaluate(EvaluateArgs),
    /// Aggregate the per-run metrics CSVs of a directory.
    Report(ReportArgs),
    /// Print the resolved config of a run without running it.
    ShowConfig(RunArgs),
    /// List the named presets.
    Presets,
    /// Print the expected MNIST file names and checksums, and verify a directory.
    MnistFiles(MnistArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// phase7 or phase15.
    #[arg(long, default_value = "phase7")]
    pub task: String,
    /// Override the register size of the task.
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Seed of the coupling draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Named experiment to start from (see `presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON config; its fields override the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for metrics, checkpoints and summaries.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// plain, kd or self-kd.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub teacher_checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Comma-separated student depths for a sweep.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long)]
    pub train_count: Option<usize>,
    #[arg(long)]
    pub test_count: Option<usize>,
    /// adjoint or parameter-shift.
    #[arg(long)]
    pub gradient: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding per-run metrics CSVs.
    #[arg(long)]
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MnistArgs {
    /// Directory to verify against the expected checksums.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

/// Overlays `patch` onto `base`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn parse_gradient(s: &str) -> Result<GradientMethod> {
    match s {
        "adjoint" => Ok(GradientMethod::Adjoint),
        "parameter-shift" => Ok(GradientMethod::ParameterShift),
        other => Err(Error::Config {
            field: "gradient".into(),
            reason: format!("unknown method `{other}`; use adjoint or parameter-shift"),
        }),
    }
}

impl RunArgs {
    /// Preset (or defaults), then the config file, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let base = match &self.preset {
            Some(name) => preset(name, self.seed.unwrap_or(0))?,
            None => ExperimentConfig::default(),
        };
        let mut cfg = match &self.config {
            None => base,
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                    field: "config".into(),
                    reason: format!("{}: {e}", path.display()),
                })?;
                let patch: Value = serde_json::from_str(&text).map_err(|e| Error::Config {
                    field: "config".into(),
                    reason: format!("{}: {e}", path.display()),
                })?;
                let mut value = serde_json::to_value(&base).expect("config serializes");
                merge(&mut value, patch);
                serde_json::from_value(value).map_err(|e| Error::Config {
                    field: "config".into(),
                    reason: format!("{}: {e}", path.display()),
                })?
            }
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(mode) = &self.mode {
            cfg.mode = mode.parse::<Mode>()?;
        }
        if let Some(path) = &self.teacher_checkpoint {
            cfg.teacher_checkpoint = Some(path.clone());
        }
        if let Some(dir) = &self.mnist_dir {
            cfg.data.mnist_dir = Some(dir.clone());
        }
        if let Some(dir) = &self.cache_dir {
            cfg.data.cache_dir = Some(dir.clone());
        }
        if let Some(layers) = &self.layers {
            cfg.layers = layers.clone();
        }
        if let Some(n) = self.train_count {
            cfg.data.train_count = n;
        }
        if let Some(n) = self.test_count {
            cfg.data.test_count = n;
        }
        if let Some(g) = &self.gradient {
            cfg.train.gradient = parse_gradient(g)?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qnnkd::experiment::Task;

    #[test]
    fn flags_beat_file_beat_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"seed": 4, "data": {"train_count": 30}, "out_dir": "from-file"}"#,
        )
        .unwrap();
        let args = RunArgs {
            preset: Some("table1-student2".into()),
            config: Some(path),
            out: Some("from-flag".into()),
            ..RunArgs::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.task, Task::Phase7);
        assert_eq!(cfg.student.layers, 1);
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.data.train_count, 30);
        // untouched nested fields keep the preset's values
        assert_eq!(cfg.data.test_count, 200);
        assert_eq!(cfg.out_dir, PathBuf::from("from-flag"));
    }

    #[test]
    fn bad_values_name_their_field() {
        let args = RunArgs {
            mode: Some("teach".into()),
            ..RunArgs::default()
        };
        assert!(matches!(args.resolve(), Err(Error::Config { field, .. }) if field == "mode"));
        let args = RunArgs {
            gradient: Some("backprop".into()),
            ..RunArgs::default()
        };
        assert!(matches!(args.resolve(), Err(Error::Config { field, .. }) if field == "gradient"));
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from([
            "qnnkd",
            "--threads",
            "2",
            "sweep",
            "--preset",
            "fig3",
            "--layers",
            "1,2",
        ])
        .unwrap();
        assert_eq!(cli.threads, Some(2));
        match cli.command {
            Command::Sweep(a) => assert_eq!(a.resolve().unwrap().layers, vec![1, 2]),
            other => panic!("{other:?}"),
        }
    }
}
