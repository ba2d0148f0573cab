//! `qnnkd` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
//! non-convergence.

mod args;

use std::io::{Read, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use qnnkd::data::mnist::EXPECTED_SHA256;
use qnnkd::experiment::{
    collect_report, evaluate_checkpoint, phase_dataset, run_experiment, run_qae, run_self_kd,
    run_sweep, write_report, Task,
};
use qnnkd::{Error, Result};
use sha2::{Digest, Sha256};

use args::{Cli, Command, GenerateArgs, MnistArgs};

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::Size(_)
        | Error::Contract(_)
        | Error::Dimension { .. }
        | Error::IndexOutOfRange { .. } => 2,
        Error::NonConvergence { .. } => 4,
        Error::Parse(_) | Error::Data(_) | Error::Io { .. } | Error::Json { .. } => 3,
    }
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let task: Task = a.task.parse()?;
    if task.is_mnist() {
        return Err(Error::Config {
            field: "task".into(),
            reason: "MNIST data is read from IDX files; see `mnist-files`".into(),
        });
    }
    let n = a.qubits.unwrap_or(task.data_qubits());
    let set = phase_dataset(
        n,
        a.count,
        a.seed,
        qnnkd::data::phase::DEFAULT_H_RANGE,
        Some(&a.out),
    )?;
    let ones = set.samples.iter().filter(|s| s.label == 1).count();
    println!(
        "{} samples on {n} qubits in {} ({ones} labelled 1)",
        set.samples.len(),
        a.out.display()
    );
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn mnist_files(a: &MnistArgs) -> Result<()> {
    let mut bad = 0;
    for (name, expected) in EXPECTED_SHA256 {
        match &a.dir {
            None => println!("{name}  sha256 {expected}"),
            Some(dir) => {
                let path = dir.join(name);
                let status = if path.exists() {
                    if sha256_file(&path)? == expected {
                        "ok"
                    } else {
                        "MISMATCH"
                    }
                } else {
                    "missing"
                };
                if status != "ok" {
                    bad += 1;
                }
                println!("{name}  sha256 {expected}  {status}");
            }
        }
    }
    if bad > 0 {
        return Err(Error::Data(format!(
            "{bad} MNIST file(s) missing or corrupted"
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config {
                field: "threads".into(),
                reason: e.to_string(),
            })?;
    }
    match cli.command {
        Command::GenerateData(a) => generate(&a)?,
        Command::TrainQae(a) => {
            let cfg = a.resolve()?;
            let q = run_qae(&cfg)?;
            println!(
                "autoencoder {}→{}: average fidelity {:.4} after {} iterations",
                q.model.n_total(),
                q.model.n_latent,
                q.final_fidelity(),
                q.fidelity_trace.len() - 1
            );
        }
        Command::Train(a) => {
            let cfg = a.resolve()?;
            let report = run_experiment(&cfg)?;
            if let Some(f) = report.qae_fidelity {
                println!("autoencoder fidelity {f:.4}");
            }
            for r in &report.records {
                println!(
                    "{} {} {} q{} l{} seed {}: train acc {:.4}, test acc {:.4}",
                    r.task, r.mode, r.role, r.qubits, r.layers, r.seed, r.train_acc, r.test_acc
                );
            }
        }
        Command::Sweep(a) => {
            let cfg = a.resolve()?;
            for r in run_sweep(&cfg)? {
                println!(
                    "{} l{} {}: train acc {:.4}, test acc {:.4}",
                    r.role,
                    r.layers,
                    if r.kd() { "kd" } else { "no-kd" },
                    r.train_acc,
                    r.test_acc
                );
            }
            println!(
                "summary: {}",
                cfg.out_dir.join("sweep_summary.csv").display()
            );
        }
        Command::SelfDistill(a) => {
            let cfg = a.resolve()?;
            let r = run_self_kd(&cfg)?;
            let show = |e: Option<usize>| e.map_or("never".to_string(), |e| e.to_string());
            println!(
                "teacher final {:.4} (converged at epoch {}), student final {:.4} (within 1 point of teacher at epoch {})",
                r.teacher.test_acc,
                show(r.teacher_epochs),
                r.student.test_acc,
                show(r.student_epochs)
            );
        }
        Command::Evaluate(a) => {
            let cfg = a.run.resolve()?;
            let acc = evaluate_checkpoint(&cfg, &a.checkpoint)?;
            println!("test accuracy {acc:.4}");
        }
        Command::Report(a) => {
            if !a.dir.is_dir() {
                return Err(Error::Data(format!(
                    "{} is not a directory",
                    a.dir.display()
                )));
            }
            let rows = write_report(&a.dir)?;
            println!(
                "{} runs aggregated into {}",
                rows.len(),
                a.dir.join("report.csv").display()
            );
            debug_assert_eq!(collect_report(&a.dir)?.len(), rows.len());
        }
        Command::ShowConfig(a) => println!("{}", a.resolve()?.to_json()),
        Command::Presets => {
            let mut out = std::io::stdout().lock();
            for name in qnnkd::experiment::PRESETS {
                // a closed pipe (`| head`) is not an error worth reporting
                if writeln!(out, "{name}").is_err() {
                    break;
                }
            }
        }
        Command::MnistFiles(a) => mnist_files(&a)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
