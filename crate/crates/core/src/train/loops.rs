//! Plain, distillation and self-distillation training loops.
//!
//! A step samples a batch, computes per-sample gradients in parallel, reduces
//! them in batch order (so results do not depend on thread count) and takes
//! one Adam step at the scheduled learning rate.

use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cone::{cone_model, reduce_all, with_inputs, worthwhile};
use super::model::{evaluate, QnnModel};
use super::optim::{lr_at, AdamState, LrUnit, Schedule, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grad::sample_gradient;
use crate::losses::{
    argmax, cross_entropy, cross_entropy_dlogits, kd_loss, kd_loss_dlogits, softmax, KdConfig,
};
use crate::rng::stream_rng;
use crate::scalar::Real;
use crate::sim::QuantumInput;

pub const METRICS_HEADER: &str = "step,epoch,train_loss,train_acc,test_acc,lr";

/// One logged evaluation point. Train loss and accuracy average the batches
/// since the previous row; the learning rate is the one used by the last step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub lr: f64,
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = r
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != METRICS_HEADER {
        return Err(Error::Parse(format!(
            "{}: unexpected header `{headers}`",
            path.display()
        )));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), i + 2)))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T: Real> {
    pub model: QnnModel<T>,
    pub metrics: Vec<MetricsRow>,
    pub adam: AdamState<T>,
    pub batch_rng: ChaCha8Rng,
    pub final_test_acc: f64,
}

/// Frozen teacher plus the inputs it consumes, aligned with the student's
/// training set.
pub struct Teacher<'a, T: Real> {
    pub model: &'a QnnModel<T>,
    pub inputs: &'a [QuantumInput<T>],
}

enum Objective<'a, T: Real> {
    Plain,
    Kd {
        kd: KdConfig,
        teacher: Teacher<'a, T>,
        cache: Option<Vec<Vec<T>>>,
    },
}

impl<T: Real> Objective<'_, T> {
    fn teacher_logits(&self, i: usize) -> Result<Option<Vec<T>>> {
        match self {
            Objective::Plain => Ok(None),
            Objective::Kd { cache: Some(c), .. } => Ok(Some(c[i].clone())),
            Objective::Kd { teacher, .. } => teacher.model.forward(&teacher.inputs[i]).map(Some),
        }
    }
}

pub fn train_plain<T: Real>(
    model: QnnModel<T>,
    train: &Dataset<T>,
    test: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    match reduced_problem(&model, train, test, cfg)? {
        Some((small, tr, te)) => Ok(restore(model, run(small, &tr, &te, cfg, Objective::Plain)?)),
        None => run(model, train, test, cfg, Objective::Plain),
    }
}

/// The student, training set and test set restricted to the student's light
/// cone, when `cfg.light_cone` is on and the restriction pays off.
fn reduced_problem<T: Real>(
    model: &QnnModel<T>,
    train: &Dataset<T>,
    test: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<Option<(QnnModel<T>, Dataset<T>, Dataset<T>)>> {
    if !cfg.light_cone {
        return Ok(None);
    }
    let Some(reduced) = cone_model(model)? else {
        return Ok(None);
    };
    let Some(first) = train.inputs.first() else {
        return Ok(None);
    };
    if !worthwhile(first, &model.ansatz, &reduced, cfg.gradient, false)? {
        return Ok(None);
    }
    let (Some(tr), Some(te)) = (
        reduce_all(&train.inputs, &reduced.cone)?,
        reduce_all(&test.inputs, &reduced.cone)?,
    ) else {
        return Ok(None);
    };
    Ok(Some((
        reduced.model,
        with_inputs(train, tr),
        with_inputs(test, te),
    )))
}

/// Puts trained parameters back on the full-register model.
fn restore<T: Real>(full: QnnModel<T>, out: TrainOutcome<T>) -> TrainOutcome<T> {
    TrainOutcome {
        model: QnnModel {
            params: out.model.params.clone(),
            ..full
        },
        ..out
    }
}

/// Distills a frozen teacher into `student`. `teacher.inputs[i]` must be the
/// teacher's view of `train.inputs[i]`.
pub fn train_kd<T: Real>(
    student: QnnModel<T>,
    teacher: Teacher<'_, T>,
    train: &Dataset<T>,
    test: &Dataset<T>,
    kd: &KdConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    kd.validate()?;
    if teacher.inputs.len() != train.len() {
        return Err(Error::Data(format!(
            "teacher view has {} samples, student view {}",
            teacher.inputs.len(),
            train.len()
        )));
    }
    if teacher.model.n_classes() != student.n_classes() {
        return Err(Error::Dimension {
            expected: student.n_classes(),
            got: teacher.model.n_classes(),
        });
    }
    if let Some(x) = teacher.inputs.first() {
        if x.n_qubits() != teacher.model.n_qubits() {
            return Err(Error::Data(format!(
                "teacher expects {} qubits, its inputs have {}",
                teacher.model.n_qubits(),
                x.n_qubits()
            )));
        }
    }
    // the teacher only runs forward, so it may shrink to its own cone
    let mut small_teacher = None;
    if cfg.light_cone {
        if let (Some(reduced), Some(first)) = (cone_model(teacher.model)?, teacher.inputs.first()) {
            if worthwhile(first, &teacher.model.ansatz, &reduced, cfg.gradient, true)? {
                if let Some(inputs) = reduce_all(teacher.inputs, &reduced.cone)? {
                    small_teacher = Some((reduced.model, inputs));
                }
            }
        }
    }
    let teacher = match &small_teacher {
        Some((model, inputs)) => Teacher { model, inputs },
        None => teacher,
    };
    let cache = if cfg.cache_teacher_logits {
        Some(
            teacher
                .inputs
                .par_iter()
                .map(|x| teacher.model.forward(x))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let objective = Objective::Kd {
        kd: *kd,
        teacher,
        cache,
    };
    match reduced_problem(&student, train, test, cfg)? {
        Some((small, tr, te)) => Ok(restore(student, run(small, &tr, &te, cfg, objective)?)),
        None => run(student, train, test, cfg, objective),
    }
}

#[derive(Clone, Debug)]
pub struct SelfKdOutcome<T: Real> {
    pub teacher: TrainOutcome<T>,
    pub student: TrainOutcome<T>,
}

/// Pretrains a teacher, then distills it into a fresh copy of the same
/// architecture. Teacher and student draw their initial parameters from
/// different streams of `cfg.seed`.
pub fn train_self_kd<T: Real>(
    n_qubits: usize,
    depth: usize,
    train: &Dataset<T>,
    test: &Dataset<T>,
    kd: &KdConfig,
    cfg: &TrainConfig,
) -> Result<SelfKdOutcome<T>> {
    let seeds = (
        crate::rng::derive_seed(cfg.seed, "self-kd-teacher"),
        crate::rng::derive_seed(cfg.seed, "self-kd-student"),
    );
    let teacher = QnnModel::hardware_efficient(n_qubits, depth, train.n_classes, seeds.0)?;
    let teacher = train_plain(teacher, train, test, cfg)?;
    let student = QnnModel::hardware_efficient(n_qubits, depth, train.n_classes, seeds.1)?;
    let student = train_kd(
        student,
        Teacher {
            model: &teacher.model,
            inputs: &train.inputs,
        },
        train,
        test,
        kd,
        cfg,
    )?;
    Ok(SelfKdOutcome { teacher, student })
}

fn check_sets<T: Real>(model: &QnnModel<T>, train: &Dataset<T>, test: &Dataset<T>) -> Result<()> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data(
            "training and test sets must be nonempty".into(),
        ));
    }
    for set in [train, test] {
        if set.n_qubits() != Some(model.n_qubits()) {
            return Err(Error::Dimension {
                expected: model.n_qubits(),
                got: set.n_qubits().unwrap_or(0),
            });
        }
        if set.n_classes != model.n_classes() {
            return Err(Error::Dimension {
                expected: model.n_classes(),
                got: set.n_classes,
            });
        }
    }
    Ok(())
}

struct StepStats {
    loss: f64,
    correct: usize,
    samples: usize,
}

fn step<T: Real>(
    model: &mut QnnModel<T>,
    adam: &mut AdamState<T>,
    train: &Dataset<T>,
    batch: &[usize],
    objective: &Objective<'_, T>,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<StepStats> {
    let per_sample: Vec<(T, bool, Vec<T>)> = batch
        .par_iter()
        .map(|&i| {
            let label = train.labels[i];
            let teacher = objective.teacher_logits(i)?;
            let (logits, grad) = sample_gradient(
                cfg.gradient,
                &model.ansatz,
                &model.params,
                &train.inputs[i],
                &model.observables,
                |l| match (objective, &teacher) {
                    (Objective::Kd { kd, .. }, Some(t)) => kd_loss_dlogits(l, t, label, kd),
                    _ => cross_entropy_dlogits(l, label),
                },
            )?;
            let loss = match (objective, &teacher) {
                (Objective::Kd { kd, .. }, Some(t)) => kd_loss(&logits, t, label, kd)?,
                _ => cross_entropy(&[softmax(&logits)], &[label])?,
            };
            Ok((loss, argmax(&logits) == label, grad))
        })
        .collect::<Result<_>>()?;
    let n = T::lit(batch.len() as f64);
    let mut grad = vec![T::zero(); model.params.len()];
    let mut loss = T::zero();
    let mut correct = 0;
    for (l, hit, g) in per_sample {
        loss += l;
        correct += usize::from(hit);
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    adam.step_with_lr(&mut model.params, &grad, lr, cfg)?;
    Ok(StepStats {
        loss: (loss / n).to_f64_lossy(),
        correct,
        samples: batch.len(),
    })
}

#[derive(Default)]
struct Window {
    loss_sum: f64,
    steps: usize,
    correct: usize,
    samples: usize,
}

impl Window {
    fn add(&mut self, s: &StepStats) {
        self.loss_sum += s.loss;
        self.steps += 1;
        self.correct += s.correct;
        self.samples += s.samples;
    }

    fn flush<T: Real>(
        &mut self,
        model: &QnnModel<T>,
        test: &Dataset<T>,
        step: usize,
        epoch: usize,
        lr: f64,
    ) -> Result<MetricsRow> {
        let row = MetricsRow {
            step,
            epoch,
            train_loss: self.loss_sum / self.steps.max(1) as f64,
            train_acc: self.correct as f64 / self.samples.max(1) as f64,
            test_acc: evaluate(model, test)?,
            lr,
        };
        *self = Window::default();
        Ok(row)
    }
}

fn run<T: Real>(
    mut model: QnnModel<T>,
    train: &Dataset<T>,
    test: &Dataset<T>,
    cfg: &TrainConfig,
    objective: Objective<'_, T>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    check_sets(&model, train, test)?;
    let mut adam = AdamState::new(model.params.len());
    let mut rng = stream_rng(cfg.seed, "batching");
    let mut metrics = Vec::new();
    let mut window = Window::default();
    let batch_size = cfg.batch_size.min(train.len());
    match cfg.schedule {
        Schedule::Iterations(iters) => {
            for it in 0..iters {
                let lr = lr_at(adam.t as usize, cfg);
                let batch = index::sample(&mut rng, train.len(), batch_size).into_vec();
                window.add(&step(
                    &mut model, &mut adam, train, &batch, &objective, lr, cfg,
                )?);
                let done = it + 1;
                let due = cfg.eval_every > 0 && done % cfg.eval_every == 0;
                if due || done == iters {
                    metrics.push(window.flush(&model, test, done, 0, lr)?);
                }
            }
        }
        Schedule::Epochs(epochs) => {
            let mut order: Vec<usize> = (0..train.len()).collect();
            for epoch in 0..epochs {
                order.shuffle(&mut rng);
                let scheduled = |t: u64| match cfg.lr_unit {
                    LrUnit::Step => lr_at(t as usize, cfg),
                    LrUnit::Epoch => lr_at(epoch, cfg),
                };
                let mut lr = scheduled(adam.t);
                for batch in order.chunks(cfg.batch_size) {
                    lr = scheduled(adam.t);
                    window.add(&step(
                        &mut model, &mut adam, train, batch, &objective, lr, cfg,
                    )?);
                }
                if cfg.eval_every > 0 || epoch + 1 == epochs {
                    metrics.push(window.flush(&model, test, adam.t as usize, epoch + 1, lr)?);
                }
            }
        }
    }
    let final_test_acc = metrics
        .last()
        .map(|r| r.test_acc)
        .expect("at least one row");
    Ok(TrainOutcome {
        model,
        metrics,
        adam,
        batch_rng: rng,
        final_test_acc,
    })
}
