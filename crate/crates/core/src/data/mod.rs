//! Dataset builders: ZXZ ground states with phase labels and MNIST pipelines.

pub mod eigen;
pub mod encode;
pub mod mnist;
pub mod pca;
pub mod phase;
pub mod zxz;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sim::state::MAX_QUBITS;
use crate::sim::{DensityMatrix, QuantumInput, StateVector};

use self::encode::{amplitude_encode, binarize};
use self::mnist::MnistItem;
use self::pca::{pca_fit, MinMaxScaler, PcaModel};

/// Encoded inputs with class labels.
#[derive(Clone, Debug)]
pub struct Dataset<T: Real> {
    pub inputs: Vec<QuantumInput<T>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl<T: Real> Dataset<T> {
    pub fn new(inputs: Vec<QuantumInput<T>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Dimension {
                expected: inputs.len(),
                got: labels.len(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Data(format!(
                "label {l} outside {n_classes} classes"
            )));
        }
        if let Some(first) = inputs.first() {
            let n = first.n_qubits();
            if inputs.iter().any(|x| x.n_qubits() != n) {
                return Err(Error::Data("inputs have mixed register sizes".into()));
            }
        }
        Ok(Dataset {
            inputs,
            labels,
            n_classes,
        })
    }

    pub fn from_states(samples: Vec<(StateVector<T>, usize)>, n_classes: usize) -> Result<Self> {
        let (inputs, labels) = samples
            .into_iter()
            .map(|(s, l)| (QuantumInput::Pure(s), l))
            .unzip();
        Self::new(inputs, labels, n_classes)
    }

    /// Phase-encoded bit strings, stored compactly.
    pub fn from_bits(samples: Vec<(Vec<u8>, usize)>, n_classes: usize) -> Result<Self> {
        if let Some((b, _)) = samples
            .iter()
            .find(|(b, _)| b.is_empty() || b.len() > MAX_QUBITS)
        {
            return Err(Error::Size(format!(
                "{} qubits for a bit-string input",
                b.len()
            )));
        }
        let (inputs, labels) = samples
            .into_iter()
            .map(|(b, l)| (QuantumInput::PhaseBits(b), l))
            .unzip();
        Self::new(inputs, labels, n_classes)
    }

    pub fn from_densities(
        samples: Vec<(DensityMatrix<T>, usize)>,
        n_classes: usize,
    ) -> Result<Self> {
        let (inputs, labels) = samples
            .into_iter()
            .map(|(s, l)| (QuantumInput::Mixed(s), l))
            .unzip();
        Self::new(inputs, labels, n_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.inputs.first().map(|x| x.n_qubits())
    }

    /// First `n` samples (all of them if fewer).
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Dataset {
            inputs: self.inputs[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            n_classes: self.n_classes,
        }
    }
}

/// Binary MNIST features: PCA to `k` components, threshold, phase-encode.
#[derive(Clone, Debug)]
pub struct BinaryMnist<T: Real> {
    pub pca: PcaModel,
    pub scaler: Option<MinMaxScaler>,
    pub train: Dataset<T>,
    pub test: Dataset<T>,
}

pub fn mnist_binary<T: Real>(
    train: &[MnistItem],
    test: &[MnistItem],
    digits: &[u8],
    k: usize,
    min_max: bool,
) -> Result<BinaryMnist<T>> {
    let train = mnist::filter_digits(train, digits);
    let test = mnist::filter_digits(test, digits);
    let pixels: Vec<Vec<f64>> = train.iter().map(|x| x.0.clone()).collect();
    let pca = pca_fit(&pixels, k)?;
    let project = |set: &[(Vec<f64>, usize)]| -> Result<Vec<Vec<f64>>> {
        set.par_iter().map(|(x, _)| pca.transform(x)).collect()
    };
    let ztrain = project(&train)?;
    let ztest = project(&test)?;
    let scaler = if min_max {
        Some(MinMaxScaler::fit(&ztrain)?)
    } else {
        None
    };
    let encode = |z: &[Vec<f64>], set: &[(Vec<f64>, usize)]| -> Result<Dataset<T>> {
        // bit strings stand in for their product states until a circuit needs them
        let bits = z
            .iter()
            .zip(set)
            .map(|(zi, (_, label))| {
                let features = match &scaler {
                    Some(s) => s.transform(zi),
                    None => zi.clone(),
                };
                (binarize(&features), *label)
            })
            .collect();
        Dataset::from_bits(bits, digits.len())
    };
    Ok(BinaryMnist {
        train: encode(&ztrain, &train)?,
        test: encode(&ztest, &test)?,
        pca,
        scaler,
    })
}

/// Ten-class MNIST with every image amplitude-encoded on `n` qubits.
pub fn mnist_amplitude<T: Real>(items: &[MnistItem], n: usize) -> Result<Dataset<T>> {
    let states = items
        .par_iter()
        .map(|it| Ok((amplitude_encode(&it.pixels, n)?, usize::from(it.digit))))
        .collect::<Result<Vec<_>>>()?;
    Dataset::from_states(states, 10)
}
