//! Self-describing JSON checkpoint of a training run.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loops::TrainOutcome;
use super::model::QnnModel;
use super::optim::AdamState;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainCheckpoint<T: Real> {
    /// Circuit, parameters and readouts.
    pub model: QnnModel<T>,
    pub adam: AdamState<T>,
    /// Batch-sampling generator, positioned after the last step.
    pub batch_rng: ChaCha8Rng,
}

impl<T: Real> TrainCheckpoint<T> {
    pub fn from_outcome(out: &TrainOutcome<T>) -> Self {
        TrainCheckpoint {
            model: out.model.clone(),
            adam: out.adam.clone(),
            batch_rng: out.batch_rng.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: TrainCheckpoint<T> = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        let model =
            QnnModel::from_json(&serde_json::to_string(&raw.model).expect("model serializes"))?;
        if raw.adam.m.len() != model.params.len() || raw.adam.v.len() != model.params.len() {
            return Err(Error::Data(format!(
                "{}: optimizer state does not match {} parameters",
                path.display(),
                model.params.len()
            )));
        }
        Ok(TrainCheckpoint { model, ..raw })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};

    #[test]
    fn round_trip_preserves_rng_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        rng.next_u64();
        let ck = TrainCheckpoint {
            model: QnnModel::<f64>::hardware_efficient(3, 1, 2, 0).unwrap(),
            adam: AdamState::new(9),
            batch_rng: rng.clone(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let mut back = TrainCheckpoint::<f64>::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.batch_rng.next_u64(), rng.next_u64());
    }

    #[test]
    fn mismatched_optimizer_state_is_rejected() {
        let ck = TrainCheckpoint {
            model: QnnModel::<f64>::hardware_efficient(3, 1, 2, 0).unwrap(),
            adam: AdamState::new(4),
            batch_rng: ChaCha8Rng::seed_from_u64(0),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        assert!(TrainCheckpoint::<f64>::load(&path).is_err());
    }
}
