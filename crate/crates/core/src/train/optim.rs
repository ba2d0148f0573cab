//! Adam with bias correction, the step learning-rate schedule and parameter
//! initialization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::ParamVector;
use crate::error::{Error, Result};
use crate::grad::GradientMethod;
use crate::rng::stream_rng;
use crate::scalar::Real;

/// How long a training run lasts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Fixed number of optimizer steps, each on a fresh random batch.
    Iterations(usize),
    /// Full passes over a shuffled training set.
    Epochs(usize),
}

/// What the learning-rate schedule counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrUnit {
    /// Optimizer steps.
    #[default]
    Step,
    /// Completed epochs; only meaningful for epoch schedules.
    Epoch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub lr_gamma: f64,
    pub lr_step: usize,
    /// Unit of `lr_step`.
    pub lr_unit: LrUnit,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub gradient: GradientMethod,
    /// Evaluate on the test set every this many steps (iteration schedule).
    /// Epoch schedules evaluate once per epoch. 0 = final evaluation only.
    pub eval_every: usize,
    /// Precompute frozen-teacher logits once instead of per batch.
    pub cache_teacher_logits: bool,
    /// Train on the readout's light cone when that is exact and cheaper.
    pub light_cone: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
            lr_gamma: 0.5,
            lr_step: 100,
            lr_unit: LrUnit::Step,
            batch_size: 64,
            schedule: Schedule::Iterations(50),
            seed: 0,
            gradient: GradientMethod::ParameterShift,
            eval_every: 1,
            cache_teacher_logits: false,
            light_cone: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) {
            return Err(Error::config("beta1", "must lie in (0, 1)"));
        }
        if !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(Error::config("beta2", "must lie in (0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be ≥ 1"));
        }
        if self.lr_step == 0 {
            return Err(Error::config("lr_step", "must be ≥ 1"));
        }
        match self.schedule {
            Schedule::Iterations(0) | Schedule::Epochs(0) => {
                Err(Error::config("schedule", "must run at least one step"))
            }
            Schedule::Iterations(_) if self.lr_unit == LrUnit::Epoch => Err(Error::config(
                "lr_unit",
                "epoch-counted decay needs an epoch schedule",
            )),
            _ => Ok(()),
        }
    }
}

/// `lr · γ^⌊step / lr_step⌋`.
pub fn lr_at(step: usize, cfg: &TrainConfig) -> f64 {
    cfg.learning_rate * cfg.lr_gamma.powi((step / cfg.lr_step) as i32)
}

/// I.i.d. uniform on `[-0.1π, 0.1π]`.
pub fn init_params<T: Real>(n_params: usize, seed: u64) -> ParamVector<T> {
    let mut rng = stream_rng(seed, "init-params");
    let bound = 0.1 * std::f64::consts::PI;
    ParamVector(
        (0..n_params)
            .map(|_| T::lit(rng.random_range(-bound..=bound)))
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AdamState<T: Real> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    /// Number of steps taken so far.
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            t: 0,
        }
    }

    /// One in-place update at the scheduled learning rate for the current step.
    pub fn step(
        &mut self,
        params: &mut ParamVector<T>,
        grad: &[T],
        cfg: &TrainConfig,
    ) -> Result<()> {
        self.step_with_lr(params, grad, lr_at(self.t as usize, cfg), cfg)
    }

    /// One in-place update at an explicit learning rate.
    pub fn step_with_lr(
        &mut self,
        params: &mut ParamVector<T>,
        grad: &[T],
        lr: f64,
        cfg: &TrainConfig,
    ) -> Result<()> {
        if grad.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::Dimension {
                expected: params.len(),
                got: grad.len(),
            });
        }
        let lr = T::lit(lr);
        self.t += 1;
        let b1 = T::lit(cfg.beta1);
        let b2 = T::lit(cfg.beta2);
        let wd = T::lit(cfg.weight_decay);
        let eps = T::lit(cfg.epsilon);
        let bc1 = T::one() - b1.powi(self.t as i32);
        let bc2 = T::one() - b2.powi(self.t as i32);
        for (((p, &g), m), v) in params
            .0
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            let g = g + wd * *p;
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Pure form of [`AdamState::step`].
pub fn adam_step<T: Real>(
    state: &AdamState<T>,
    params: &ParamVector<T>,
    grad: &[T],
    cfg: &TrainConfig,
) -> Result<(AdamState<T>, ParamVector<T>)> {
    let mut s = state.clone();
    let mut p = params.clone();
    s.step(&mut p, grad, cfg)?;
    Ok((s, p))
}
