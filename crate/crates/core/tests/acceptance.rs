//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Environment:
//! - `QNNKD_FULL=1` runs criteria 3 to 5 at full scale instead of their reduced modes.
//! - `QNNKD_MNIST_DIR` points at the IDX files (default `data/mnist` in the workspace).
//! - `QNNKD_ACCEPTANCE_ONLY=1,2,6` restricts the run to the listed criteria.
//! - `QNNKD_ACCEPTANCE_STRICT=1` makes any FAIL a nonzero exit.
//! - `QNNKD_ACCEPTANCE_OUT` overrides where run artifacts go.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use qnnkd::circuit::{ParamCircuit, ParamVector};
use qnnkd::data::eigen::{dense_ground_state, lanczos, residual, LanczosOptions};
use qnnkd::data::zxz::{build_zxz, ZxzParams};
use qnnkd::experiment::{
    preset, run_experiment, run_self_kd, run_sweep, run_table1, ExperimentConfig, RunRecord,
    Table1Report,
};
use qnnkd::grad::{finite_difference, logit_jacobian, logits};
use qnnkd::losses::{cross_entropy, kd_loss, kl_divergence, softmax, softmax_t, KdConfig};
use qnnkd::qae::QaeModel;
use qnnkd::sim::{GateKind, GateSpec, Pauli, PauliString, QuantumInput, StateVector};
use qnnkd::train::Schedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Line {
    id: u8,
    title: &'static str,
    verdict: Verdict,
    detail: String,
}

struct Env {
    full: bool,
    out: PathBuf,
    cache: PathBuf,
    mnist: PathBuf,
    only: Option<Vec<u8>>,
}

impl Env {
    fn from_process() -> Self {
        let flag = |k: &str| std::env::var(k).is_ok_and(|v| v == "1" || v == "true");
        let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
        let out = std::env::var_os("QNNKD_ACCEPTANCE_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance"));
        let mnist = std::env::var_os("QNNKD_MNIST_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| manifest.join("../../data/mnist"));
        let only = std::env::var("QNNKD_ACCEPTANCE_ONLY")
            .ok()
            .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
        Env {
            full: flag("QNNKD_FULL"),
            cache: out.join("cache"),
            out,
            mnist,
            only,
        }
    }

    fn wants(&self, id: u8) -> bool {
        self.only.as_ref().is_none_or(|v| v.contains(&id))
    }

    fn config(&self, name: &str, seed: u64, sub: &str) -> ExperimentConfig {
        let mut cfg = preset(name, seed).expect("preset exists");
        cfg.out_dir = self.out.join(sub);
        cfg.data.cache_dir = Some(self.cache.clone());
        cfg.data.mnist_dir = Some(self.mnist.clone());
        cfg
    }

    fn has_mnist(&self) -> bool {
        qnnkd::data::mnist::MnistFiles::in_dir(&self.mnist).exist()
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn find(records: &[RunRecord], layers: usize, kd: bool) -> &RunRecord {
    records
        .iter()
        .find(|r| r.role == "student" && r.layers == layers && r.kd() == kd)
        .expect("sweep covers every depth with and without distillation")
}

// ---------------------------------------------------------------- criterion 1

const TABLE1_TARGETS: [(&str, f64); 5] = [
    ("teacher 7q2L", 0.983),
    ("student2 7q1L", 0.860),
    ("student2 7q1L KD", 0.998),
    ("student1 2q2L", 0.523),
    ("student1 2q2L KD", 0.817),
];

fn table1_row(r: &Table1Report) -> [f64; 5] {
    [
        r.teacher.test_acc,
        r.student2.test_acc,
        r.student2_kd.test_acc,
        r.student1.test_acc,
        r.student1_kd.test_acc,
    ]
}

fn criterion1(reports: &[Table1Report]) -> Line {
    let mut detail = Vec::new();
    let mut ok = true;
    for (i, (label, target)) in TABLE1_TARGETS.iter().enumerate() {
        let per_seed: Vec<f64> = reports.iter().map(|r| table1_row(r)[i]).collect();
        let best = per_seed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hit = (best - target).abs() <= 0.07;
        ok &= hit;
        detail.push(format!(
            "{label}: best {} vs {} [{}]{}",
            pct(best),
            pct(*target),
            per_seed
                .iter()
                .map(|&x| pct(x))
                .collect::<Vec<_>>()
                .join(" "),
            if hit { "" } else { " OUT" }
        ));
    }
    for (seed, r) in reports.iter().enumerate() {
        let s1 = r.student1_kd.test_acc > r.student1.test_acc;
        let s2 = r.student2_kd.test_acc > r.student2.test_acc;
        ok &= s1 && s2;
        if !(s1 && s2) {
            detail.push(format!(
                "seed {seed}: KD > no-KD fails for{}{}",
                if s1 { "" } else { " student1" },
                if s2 { "" } else { " student2" }
            ));
        }
    }
    Line {
        id: 1,
        title: "Table 1 best-of-3 within 7 points, KD beats no-KD on every seed",
        verdict: verdict(ok),
        detail: detail.join("; "),
    }
}

// ---------------------------------------------------------------- criterion 2

fn criterion2(fidelity: f64) -> Line {
    Line {
        id: 2,
        title: "autoencoder 7 to 2 qubits, 600 iterations: fidelity 0.897 +/- 0.05",
        verdict: verdict((fidelity - 0.897).abs() <= 0.05),
        detail: format!("average fidelity {fidelity:.4}"),
    }
}

// ---------------------------------------------------------------- criterion 3

fn criterion3(env: &Env) -> Line {
    let name = if env.full { "fig3" } else { "fig3-reduced" };
    let mut cfg = env.config(name, 0, name);
    cfg.layers = vec![2, 3];
    let title = "15-qubit depth sweep: KD gains >= 5 points at depth 2, less at depth 3";
    match run_sweep(&cfg) {
        Err(e) => Line {
            id: 3,
            title,
            verdict: Verdict::Fail,
            detail: format!("{name}: {e}"),
        },
        Ok(records) => {
            let teacher = records.iter().find(|r| r.role == "teacher");
            let gap = |l| find(&records, l, true).test_acc - find(&records, l, false).test_acc;
            let (g2, g3) = (gap(2), gap(3));
            Line {
                id: 3,
                title,
                verdict: verdict(g2 >= 0.05 && g3 < g2),
                detail: format!(
                    "{name}: teacher {}; depth 2 KD {} vs {} (gap {}); depth 3 KD {} vs {} (gap {})",
                    teacher.map_or("-".into(), |t| pct(t.test_acc)),
                    pct(find(&records, 2, true).test_acc),
                    pct(find(&records, 2, false).test_acc),
                    pct(g2),
                    pct(find(&records, 3, true).test_acc),
                    pct(find(&records, 3, false).test_acc),
                    pct(g3),
                ),
            }
        }
    }
}

// ---------------------------------------------------------------- criterion 4

fn criterion4(env: &Env) -> Line {
    let title = "binary MNIST depth sweep: KD >= no-KD at depths 4-7";
    if !env.has_mnist() {
        return Line {
            id: 4,
            title,
            verdict: Verdict::Skip,
            detail: format!("no MNIST IDX files in {}", env.mnist.display()),
        };
    }
    let name = if env.full { "fig4" } else { "fig4-subset" };
    let mut cfg = env.config(name, 0, name);
    // the subset mode only has to keep the ordering
    cfg.layers = if env.full {
        vec![4, 5, 6, 7, 8]
    } else {
        vec![4, 5, 6, 7]
    };
    let records = match run_sweep(&cfg) {
        Ok(r) => r,
        Err(e) => {
            return Line {
                id: 4,
                title,
                verdict: Verdict::Fail,
                detail: format!("{name}: {e}"),
            }
        }
    };
    let mut ok = true;
    let mut detail = vec![name.to_string()];
    for l in 4..=7 {
        let (kd, plain) = (
            find(&records, l, true).test_acc,
            find(&records, l, false).test_acc,
        );
        ok &= kd >= plain;
        detail.push(format!("depth {l} KD {} vs {}", pct(kd), pct(plain)));
    }
    let teacher = records
        .iter()
        .find(|r| r.role == "teacher")
        .map(|t| t.test_acc);
    if let Some(t) = teacher {
        detail.push(format!("teacher {}", pct(t)));
    }
    if env.full {
        // plateau: the best no-KD accuracy below depth 8 sits near 0.92
        let plateau = (4..=7)
            .map(|l| find(&records, l, false).test_acc)
            .fold(f64::NEG_INFINITY, f64::max);
        let t = teacher.expect("sweep trains its teacher");
        let (kd8, plain8) = (
            find(&records, 8, true).test_acc,
            find(&records, 8, false).test_acc,
        );
        let plateau_ok = (plateau - 0.92).abs() <= 0.03;
        let depth8_ok = (kd8 - t).abs() <= 0.02 && (plain8 - t).abs() <= 0.02;
        ok &= plateau_ok && depth8_ok;
        detail.push(format!(
            "no-KD plateau {} (near 92.0: {plateau_ok}); depth 8 KD {} no-KD {} vs teacher (within 2: {depth8_ok})",
            pct(plateau),
            pct(kd8),
            pct(plain8)
        ));
    }
    Line {
        id: 4,
        title,
        verdict: verdict(ok),
        detail: detail.join("; "),
    }
}

// ---------------------------------------------------------------- criterion 5

fn criterion5(env: &Env) -> Line {
    let title = "10-class self-distillation: student converges much faster than teacher";
    if !env.has_mnist() {
        return Line {
            id: 5,
            title,
            verdict: Verdict::Skip,
            detail: format!("no MNIST IDX files in {}", env.mnist.display()),
        };
    }
    let name = if env.full { "fig5" } else { "fig5-reduced" };
    let r = match run_self_kd(&env.config(name, 0, name)) {
        Ok(r) => r,
        Err(e) => {
            return Line {
                id: 5,
                title,
                verdict: Verdict::Fail,
                detail: format!("{name}: {e}"),
            }
        }
    };
    let show = |e: Option<usize>| e.map_or("never".to_string(), |e| e.to_string());
    let ok = match (r.teacher_epochs, r.student_epochs) {
        (Some(t), Some(s)) if env.full => 4 * s <= t,
        (Some(t), Some(s)) => 2 * s <= t,
        _ => false,
    };
    Line {
        id: 5,
        title,
        verdict: verdict(ok),
        detail: format!(
            "{name}: teacher final {} converged at epoch {}; student final {} within 1 point of teacher at epoch {}; needs {}",
            pct(r.teacher.test_acc),
            show(r.teacher_epochs),
            pct(r.student.test_acc),
            show(r.student_epochs),
            if env.full { "student <= 25% of teacher epochs" } else { "speedup >= 2x" }
        ),
    }
}

// ---------------------------------------------------------------- criterion 6

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector<f64> {
    let amps = (0..1 << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    StateVector::normalized(amps).unwrap()
}

fn l2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Worst norm-wise relative error of shift-rule gradients against central differences.
fn shift_rule_vs_finite_differences() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut worst = 0.0f64;
    for instance in 0..50 {
        let n = 2 + instance % 4;
        let circuit = ParamCircuit::hardware_efficient(n, 1 + instance % 3).unwrap();
        let params = ParamVector(
            (0..circuit.n_params())
                .map(|_| rng.random_range(-3.1..3.1))
                .collect(),
        );
        let input = QuantumInput::Pure(random_state(n, &mut rng));
        let obs = vec![PauliString::z(0), PauliString::single(n - 1, Pauli::X)];
        let w = [0.9, -0.6];
        let jac = logit_jacobian(&circuit, &params, &input, &obs).unwrap();
        let shift: Vec<f64> = (0..params.len())
            .map(|l| w[0] * jac.get(0, l) + w[1] * jac.get(1, l))
            .collect();
        let fd = finite_difference(
            |p| {
                let l = logits(&circuit, p, &input, &obs).unwrap();
                w[0] * l[0] + w[1] * l[1]
            },
            &params,
            1e-5,
        )
        .unwrap();
        let err = l2(shift.iter().zip(&fd).map(|(a, b)| a - b)) / l2(shift.iter().copied());
        worst = worst.max(err);
    }
    worst
}

fn norm_drift() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let n = 8;
    let kinds = [GateKind::Rx, GateKind::Ry, GateKind::Rz];
    let mut slots = 0;
    let gates: Vec<GateSpec> = (0..10_000)
        .map(|i| {
            let a = rng.random_range(0..n);
            if i % 4 == 3 {
                GateSpec::cnot(a, (a + 1 + rng.random_range(0..n - 1)) % n)
            } else {
                slots += 1;
                GateSpec::rotation(kinds[i % 3], a, slots - 1)
            }
        })
        .collect();
    let circuit = ParamCircuit::new(n, gates, slots).unwrap();
    let params = ParamVector((0..slots).map(|_| rng.random_range(-3.2..3.2)).collect());
    let out = circuit
        .evaluate(&params, &random_state(n, &mut rng))
        .unwrap();
    (out.norm_sqr() - 1.0).abs()
}

/// (softmax normalization, worst negative KL, worst KL(P||P), worst |kd(alpha=0) - CE|).
fn loss_checks() -> (f64, f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let (mut norm, mut neg, mut self_kl, mut kd0) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..2000 {
        let k = rng.random_range(2..=10);
        let a: Vec<f64> = (0..k).map(|_| rng.random_range(-20.0..20.0)).collect();
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(-20.0..20.0)).collect();
        let t = rng.random_range(0.2..8.0);
        let p = softmax_t(&a, t);
        let q = softmax(&b);
        norm = norm.max((p.iter().sum::<f64>() - 1.0).abs());
        neg = neg.max(-kl_divergence(&p, &q).unwrap());
        self_kl = self_kl.max(kl_divergence(&p, &p).unwrap().abs());
        let label = rng.random_range(0..k);
        let kd = kd_loss(&a, &b, label, &KdConfig::new(t, 0.0).unwrap()).unwrap();
        let ce = cross_entropy(&[softmax(&a)], &[label]).unwrap();
        kd0 = kd0.max((kd - ce).abs());
    }
    (norm, neg, self_kl, kd0)
}

/// Worst violation of hermiticity, unit trace and positivity over random reductions.
fn partial_trace_checks() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..=7);
        let keep: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if keep.is_empty() || keep.len() == n {
            continue;
        }
        let rho = random_state(n, &mut rng).partial_trace(&keep).unwrap();
        let d = rho.dim();
        let m = DMatrix::from_fn(d, d, |i, j| rho.get(i, j));
        let herm = (&m - m.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let trace = (m.trace() - Complex64::new(1.0, 0.0)).norm();
        let min_eig = rho
            .eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(herm).max(trace).max(-min_eig);
    }
    worst
}

/// (worst residual, worst iterative-vs-dense energy gap) for n = 3..=8.
fn ground_state_checks() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(65);
    let (mut res, mut gap) = (0.0f64, 0.0f64);
    for n in 3..=8 {
        for _ in 0..4 {
            let h = build_zxz(&ZxzParams {
                n,
                h1: rng.random_range(-1.0..1.0),
                h2: rng.random_range(0.0..2.0),
                j: rng.random_range(0.3..1.5),
            })
            .unwrap();
            let it = lanczos(&h, &LanczosOptions::default()).unwrap();
            let dense = dense_ground_state(&h).unwrap();
            res = res.max(residual(&h, it.energy, &it.vector));
            gap = gap.max((it.energy - dense.energy).abs());
        }
    }
    (res, gap)
}

/// Largest |F - 1| of the identity autoencoder on psi_A (x) |0>_B inputs.
fn qae_identity_check() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst = 0.0f64;
    for (n, k) in [(3, 1), (4, 2), (5, 2), (7, 2)] {
        let model = QaeModel::<f64>::identity(n, k, 2).unwrap();
        for _ in 0..5 {
            let psi = random_state(k, &mut rng).adjoin_zeros(n - k).unwrap();
            worst = worst.max((model.fidelity(&psi).unwrap() - 1.0).abs());
        }
    }
    worst
}

fn csv_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                PathBuf::from(p.file_name().unwrap()),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// Reruns shrunken presets and compares every CSV byte.
fn determinism_check(env: &Env) -> Result<usize, String> {
    let mut compared = 0;
    for name in ["table1-student1-kd", "table1-student2-kd", "table1-teacher"] {
        let mut outs = Vec::new();
        for run in 0..2 {
            let mut cfg = env.config(name, 11, &format!("determinism/{name}-{run}"));
            cfg.data.train_count = 40;
            cfg.data.test_count = 10;
            cfg.train.schedule = Schedule::Iterations(4);
            cfg.train.batch_size = 8;
            if let Some(q) = &mut cfg.compress {
                q.iterations = 4;
            }
            if let Some(t) = &mut cfg.teacher {
                t.layers = t.layers.min(2);
            }
            let _ = std::fs::remove_dir_all(&cfg.out_dir);
            run_experiment(&cfg).map_err(|e| format!("{name}: {e}"))?;
            outs.push(csv_bytes(&cfg.out_dir));
        }
        if outs[0] != outs[1] || outs[0].is_empty() {
            return Err(format!("{name}: CSV bytes differ between reruns"));
        }
        compared += outs[0].len();
    }
    Ok(compared)
}

fn criterion6(env: &Env) -> Line {
    let grad = shift_rule_vs_finite_differences();
    let drift = norm_drift();
    let (sm, neg_kl, self_kl, kd0) = loss_checks();
    let pt = partial_trace_checks();
    let (res, gap) = ground_state_checks();
    let qae = qae_identity_check();
    let det = determinism_check(env);
    let checks = [
        ("shift vs FD rel err", grad, 1e-6),
        ("norm drift", drift, 1e-12),
        ("softmax norm", sm, 1e-12),
        ("KL negativity", neg_kl.max(0.0), 0.0),
        ("KL(P||P)", self_kl, 1e-12),
        ("kd(alpha=0) - CE", kd0, 1e-12),
        ("partial trace", pt, 1e-10),
        ("ground residual", res, 1e-8),
        ("lanczos vs dense", gap, 1e-8),
        ("QAE identity |F-1|", qae, 1e-12),
    ];
    let mut ok = det.is_ok();
    let mut detail: Vec<String> = checks
        .iter()
        .map(|(name, value, tol)| {
            ok &= value <= tol;
            format!(
                "{name} {value:.1e}{}",
                if value <= tol { "" } else { " OUT" }
            )
        })
        .collect();
    detail.push(match det {
        Ok(n) => format!("{n} CSV files bitwise identical on rerun"),
        Err(e) => e,
    });
    Line {
        id: 6,
        title: "property suite",
        verdict: verdict(ok),
        detail: detail.join("; "),
    }
}

// ---------------------------------------------------------------- driver

fn report(line: &Line, started: Instant) {
    let tag = match line.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Skip => "SKIP",
    };
    println!(
        "{tag} criterion {}: {} ({:.0}s) | {}",
        line.id,
        line.title,
        started.elapsed().as_secs_f64(),
        line.detail
    );
}

fn main() {
    let env = Env::from_process();
    std::fs::create_dir_all(&env.out).expect("acceptance output directory");
    println!(
        "acceptance: {} mode, artifacts in {}",
        if env.full { "full" } else { "reduced" },
        env.out.display()
    );
    let mut lines = Vec::new();
    let mut run = |id: u8, f: &mut dyn FnMut() -> Vec<Line>| {
        if env.wants(id) {
            let t = Instant::now();
            for line in f() {
                report(&line, t);
                lines.push(line);
            }
        }
    };
    run(1, &mut || {
        let reports: Result<Vec<_>, _> = (0..3)
            .map(|seed| run_table1(seed, &env.out.join(format!("table1/s{seed}"))))
            .collect();
        match reports {
            Ok(r) => {
                let mut out = vec![criterion1(&r)];
                if env.wants(2) {
                    out.push(criterion2(r[0].qae_fidelity));
                }
                out
            }
            Err(e) => vec![Line {
                id: 1,
                title: "Table 1",
                verdict: Verdict::Fail,
                detail: e.to_string(),
            }],
        }
    });
    if !env.wants(1) {
        run(2, &mut || {
            let cfg = env.config("qae", 0, "qae");
            vec![match qnnkd::experiment::run_qae(&cfg) {
                Ok(q) => criterion2(q.final_fidelity()),
                Err(e) => Line {
                    id: 2,
                    title: "autoencoder fidelity",
                    verdict: Verdict::Fail,
                    detail: e.to_string(),
                },
            }]
        });
    }
    run(3, &mut || vec![criterion3(&env)]);
    run(4, &mut || vec![criterion4(&env)]);
    run(5, &mut || vec![criterion5(&env)]);
    run(6, &mut || vec![criterion6(&env)]);

    let count = |v| lines.iter().filter(|l| l.verdict == v).count();
    let failed = count(Verdict::Fail);
    println!(
        "acceptance summary: {} passed, {failed} failed, {} skipped",
        count(Verdict::Pass),
        count(Verdict::Skip)
    );
    let strict = std::env::var("QNNKD_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
