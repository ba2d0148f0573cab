//! Quantum autoencoder: encode on AB, trace out B, decode on AB′ with the
//! same parameters, and train to maximize average reconstruction fidelity.
//!
//! Training uses a closed form of the fidelity. With `φ = U(θ)ψ`, write
//! `φ_r` for the block of amplitudes whose B bits equal `r` and `χ = φ_0`.
//! Then `⟨ψ|U†(ρ_comp ⊗ |0⟩⟨0|)U|ψ⟩ = Σ_r |⟨χ|φ_r⟩|²`, which needs one
//! statevector pass per sample. The public [`QaeModel::fidelity`] still goes
//! through explicit density-matrix decoding.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binio::ByteCursor;
use crate::circuit::{ParamCircuit, ParamVector};
use crate::error::{Error, Result};
use crate::grad::{shifted_params, AdjointPass, GradientMethod};
use crate::scalar::{czero, Real, C};
use crate::sim::{fidelity_pure, DensityMatrix, StateVector};
use crate::train::optim::{init_params, AdamState, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QaeModel<T: Real> {
    pub ansatz: ParamCircuit,
    pub params: ParamVector<T>,
    pub n_latent: usize,
}

impl<T: Real> QaeModel<T> {
    pub fn new(ansatz: ParamCircuit, params: ParamVector<T>, n_latent: usize) -> Result<Self> {
        if n_latent == 0 || n_latent >= ansatz.n_qubits() {
            return Err(Error::Contract(format!(
                "latent size {n_latent} must lie in [1, {})",
                ansatz.n_qubits()
            )));
        }
        ansatz.check_params(&params)?;
        Ok(QaeModel {
            ansatz,
            params,
            n_latent,
        })
    }

    /// Default autoencoder ansatz with all parameters zero (U = I).
    pub fn identity(n_total: usize, n_latent: usize, depth: usize) -> Result<Self> {
        let ansatz = ParamCircuit::qae_ansatz(n_total, n_latent, depth)?;
        let params = ParamVector::zeros(ansatz.n_params());
        Self::new(ansatz, params, n_latent)
    }

    pub fn n_total(&self) -> usize {
        self.ansatz.n_qubits()
    }

    fn check_input(&self, input: &StateVector<T>) -> Result<()> {
        if input.n_qubits() != self.n_total() {
            return Err(Error::Dimension {
                expected: self.n_total(),
                got: input.n_qubits(),
            });
        }
        Ok(())
    }

    /// `tr_B[U ψψ† U†]`.
    pub fn compress(&self, input: &StateVector<T>) -> Result<DensityMatrix<T>> {
        self.check_input(input)?;
        let phi = self.ansatz.evaluate(&self.params, input)?;
        let keep: Vec<usize> = (0..self.n_latent).collect();
        phi.partial_trace(&keep)
    }

    /// `U† (ρ ⊗ |0⟩⟨0|_B′) U`.
    pub fn reconstruct(&self, latent: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
        if latent.n_qubits() != self.n_latent {
            return Err(Error::Dimension {
                expected: self.n_latent,
                got: latent.n_qubits(),
            });
        }
        let padded = latent.tensor_zeros(self.n_total() - self.n_latent)?;
        self.ansatz
            .inverse()
            .evaluate_density(&self.params, &padded)
    }

    /// `⟨ψ|ρ′|ψ⟩` by explicit compression and decoding.
    pub fn fidelity(&self, input: &StateVector<T>) -> Result<T> {
        let rho = self.reconstruct(&self.compress(input)?)?;
        fidelity_pure(input, &rho)
    }

    /// Same value as [`Self::fidelity`] from a single forward pass.
    pub fn fidelity_fast(&self, input: &StateVector<T>) -> Result<T> {
        self.check_input(input)?;
        let phi = self.ansatz.evaluate(&self.params, input)?;
        Ok(block_fidelity(
            phi.amplitudes(),
            phi.amplitudes(),
            1 << self.n_latent,
        ))
    }

    /// Mean reconstruction fidelity over `dataset`.
    pub fn average_fidelity(&self, dataset: &[StateVector<T>]) -> Result<T> {
        if dataset.is_empty() {
            return Err(Error::Data("average fidelity of an empty dataset".into()));
        }
        let per: Vec<T> = dataset
            .par_iter()
            .map(|psi| self.fidelity(psi))
            .collect::<Result<_>>()?;
        Ok(mean(&per))
    }

    /// Mean fidelity and its gradient by `method`.
    pub fn fidelity_and_gradient_by(
        &self,
        dataset: &[StateVector<T>],
        method: GradientMethod,
    ) -> Result<(T, Vec<T>)> {
        match method {
            GradientMethod::ParameterShift => self.fidelity_and_gradient(dataset),
            GradientMethod::Adjoint => self.fidelity_and_gradient_adjoint(dataset),
        }
    }

    /// The fidelity is a function of `φ = Uψ` alone, so one reverse sweep
    /// with cotangent `∂F/∂φ*` gives the whole gradient. Writing
    /// `z_r = ⟨φ_0|φ_r⟩`, that cotangent is `z_r φ_0` on block `r`, plus
    /// `Σ_r z_r* φ_r` on block 0.
    pub fn fidelity_and_gradient_adjoint(&self, dataset: &[StateVector<T>]) -> Result<(T, Vec<T>)> {
        if dataset.is_empty() {
            return Err(Error::Data("fidelity gradient of an empty dataset".into()));
        }
        let dim_a = 1usize << self.n_latent;
        let per: Vec<(T, Vec<T>)> = dataset
            .par_iter()
            .map(|psi| {
                self.check_input(psi)?;
                let pass = AdjointPass::forward(&self.ansatz, &self.params, psi, &[])?;
                let phi = pass.final_state();
                let chi = &phi[..dim_a];
                let z: Vec<C<T>> = phi
                    .chunks_exact(dim_a)
                    .map(|block| {
                        chi.iter()
                            .zip(block)
                            .fold(czero::<T>(), |acc, (c, b)| acc + c.conj() * b)
                    })
                    .collect();
                let f = z.iter().map(|v| v.norm_sqr()).sum();
                let mut lambda = vec![czero::<T>(); phi.len()];
                for (lam, &zr) in lambda.chunks_exact_mut(dim_a).zip(&z) {
                    for (l, c) in lam.iter_mut().zip(chi) {
                        *l = *c * zr;
                    }
                }
                for (block, zr) in phi.chunks_exact(dim_a).zip(&z) {
                    for (l, b) in lambda[..dim_a].iter_mut().zip(block) {
                        *l += *b * zr.conj();
                    }
                }
                Ok((f, pass.backward_cotangent(lambda)?))
            })
            .collect::<Result<_>>()?;
        Ok(average(per, self.ansatz.n_params()))
    }

    /// Mean fidelity and its gradient. Each slot appears once in the encoder
    /// and once in the decoder, so the exact derivative is the sum of the two
    /// shift-rule terms, both built from the same pair of shifted states.
    pub fn fidelity_and_gradient(&self, dataset: &[StateVector<T>]) -> Result<(T, Vec<T>)> {
        if dataset.is_empty() {
            return Err(Error::Data("fidelity gradient of an empty dataset".into()));
        }
        for psi in dataset {
            self.check_input(psi)?;
        }
        let dim_a = 1usize << self.n_latent;
        let n_params = self.ansatz.n_params();
        let shifted: Vec<(_, _)> = (0..n_params)
            .map(|l| {
                Ok((
                    self.ansatz.bind(&shifted_params(&self.params, l, 1)?)?,
                    self.ansatz.bind(&shifted_params(&self.params, l, -1)?)?,
                ))
            })
            .collect::<Result<_>>()?;
        let base = self.ansatz.bind(&self.params)?;
        let half = T::lit(0.5);
        let per: Vec<(T, Vec<T>)> = dataset
            .par_iter()
            .map(|psi| {
                let phi = psi.run(&base)?;
                let phi = phi.amplitudes();
                let f = block_fidelity(phi, phi, dim_a);
                let mut g = Vec::with_capacity(n_params);
                for (plus, minus) in &shifted {
                    let p = psi.run(plus)?;
                    let m = psi.run(minus)?;
                    let (p, m) = (p.amplitudes(), m.amplitudes());
                    let enc = block_fidelity(p, phi, dim_a) - block_fidelity(m, phi, dim_a);
                    let dec = block_fidelity(phi, p, dim_a) - block_fidelity(phi, m, dim_a);
                    g.push(half * (enc + dec));
                }
                Ok((f, g))
            })
            .collect::<Result<_>>()?;
        Ok(average(per, n_params))
    }
}

/// Mean of per-sample fidelities and gradients, summed in dataset order.
fn average<T: Real>(per: Vec<(T, Vec<T>)>, n_params: usize) -> (T, Vec<T>) {
    let n = T::lit(per.len() as f64);
    let mut f = T::zero();
    let mut grad = vec![T::zero(); n_params];
    for (fi, gi) in per {
        f += fi;
        for (a, b) in grad.iter_mut().zip(gi) {
            *a += b;
        }
    }
    (f / n, grad.into_iter().map(|g| g / n).collect())
}

/// `Σ_r |⟨χ|enc_r⟩|²` with `χ` the B = 0 block of `dec`.
fn block_fidelity<T: Real>(enc: &[C<T>], dec: &[C<T>], dim_a: usize) -> T {
    let chi = &dec[..dim_a];
    enc.chunks_exact(dim_a)
        .map(|block| {
            let mut z = czero::<T>();
            for (c, b) in chi.iter().zip(block) {
                z += c.conj() * b;
            }
            z.norm_sqr()
        })
        .sum()
}

fn mean<T: Real>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::lit(values.len() as f64)
}

#[derive(Clone, Debug)]
pub struct QaeTrainResult<T: Real> {
    pub model: QaeModel<T>,
    /// Average fidelity before each optimizer step, then after the last one.
    pub fidelity_trace: Vec<T>,
}

/// Full-batch Adam on `1 − F̄`, initialized from `cfg.seed`, with gradients
/// by `cfg.gradient`.
pub fn train_qae<T: Real>(
    dataset: &[StateVector<T>],
    n_latent: usize,
    depth: usize,
    iterations: usize,
    cfg: &TrainConfig,
) -> Result<QaeTrainResult<T>> {
    if iterations == 0 {
        return Err(Error::config("iterations", "must be ≥ 1"));
    }
    cfg.validate()?;
    let n_total = dataset
        .first()
        .ok_or_else(|| Error::Data("QAE training set is empty".into()))?
        .n_qubits();
    let ansatz = ParamCircuit::qae_ansatz(n_total, n_latent, depth)?;
    let params = init_params(ansatz.n_params(), cfg.seed);
    let mut model = QaeModel::new(ansatz, params, n_latent)?;
    let mut adam = AdamState::new(model.ansatz.n_params());
    let mut trace = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let (f, g) = model.fidelity_and_gradient_by(dataset, cfg.gradient)?;
        trace.push(f);
        let loss_grad: Vec<T> = g.into_iter().map(|x| -x).collect();
        adam.step(&mut model.params, &loss_grad, cfg)?;
    }
    trace.push(mean(
        &dataset
            .par_iter()
            .map(|psi| model.fidelity_fast(psi))
            .collect::<Result<Vec<T>>>()?,
    ));
    Ok(QaeTrainResult {
        model,
        fidelity_trace: trace,
    })
}

/// Replaces each input by its latent density matrix; labels pass through.
pub fn compress_dataset<T: Real>(
    model: &QaeModel<T>,
    samples: &[(StateVector<T>, usize)],
) -> Result<Vec<(DensityMatrix<T>, usize)>> {
    samples
        .par_iter()
        .map(|(psi, label)| Ok((model.compress(psi)?, *label)))
        .collect()
}

impl<T: Real> QaeModel<T> {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: QaeModel<T> = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        let ansatz = ParamCircuit::new(
            raw.ansatz.n_qubits(),
            raw.ansatz.gates().to_vec(),
            raw.ansatz.n_params(),
        )?;
        Self::new(ansatz, raw.params, raw.n_latent)
    }
}

const LATENT_MAGIC: &[u8; 8] = b"QKDLATNT";

/// Header: magic, `n_latent` (u32), count (u64), one u32 label per record;
/// then each matrix row-major as little-endian f64 (re, im) pairs.
pub fn write_compressed<W: Write>(
    mut w: W,
    records: &[(DensityMatrix<f64>, usize)],
) -> std::io::Result<()> {
    let n_latent = records.first().map_or(0, |r| r.0.n_qubits());
    w.write_all(LATENT_MAGIC)?;
    w.write_all(&(n_latent as u32).to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for (_, label) in records {
        w.write_all(&(*label as u32).to_le_bytes())?;
    }
    for (rho, _) in records {
        for z in rho.entries() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_compressed<R: Read>(mut r: R) -> Result<Vec<(DensityMatrix<f64>, usize)>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Data(format!("reading latent cache: {e}")))?;
    let mut cur = ByteCursor::new(&bytes);
    if cur.take(8)? != LATENT_MAGIC {
        return Err(Error::Parse("latent cache: bad magic".into()));
    }
    let n_latent = cur.u32()? as usize;
    let count = cur.u64()? as usize;
    let labels: Vec<usize> = (0..count)
        .map(|_| cur.u32().map(|l| l as usize))
        .collect::<Result<_>>()?;
    let dim = 1usize << n_latent;
    let mut out = Vec::with_capacity(count);
    for label in labels {
        let entries = (0..dim * dim)
            .map(|_| Ok(C::new(cur.f64()?, cur.f64()?)))
            .collect::<Result<Vec<_>>>()?;
        out.push((DensityMatrix::from_entries(n_latent, entries)?, label));
    }
    if !cur.is_empty() {
        return Err(Error::Parse("latent cache: trailing bytes".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::finite_difference;
    use crate::scalar::cone;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector<f64> {
        let amps = (0..1 << n)
            .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        StateVector::normalized(amps).unwrap()
    }

    fn random_model(n: usize, k: usize, depth: usize, seed: u64) -> QaeModel<f64> {
        let ansatz = ParamCircuit::qae_ansatz(n, k, depth).unwrap();
        let params = init_params::<f64>(ansatz.n_params(), seed);
        let params = ParamVector(params.0.iter().map(|x| x * 10.0).collect());
        QaeModel::new(ansatz, params, k).unwrap()
    }

    /// ψ_A ⊗ |0…0⟩_B.
    fn compressible(n: usize, k: usize, rng: &mut ChaCha8Rng) -> StateVector<f64> {
        random_state(k, rng).adjoin_zeros(n - k).unwrap()
    }

    #[test]
    fn latent_size_is_validated() {
        assert!(QaeModel::<f64>::identity(3, 0, 1).is_err());
        assert!(QaeModel::<f64>::identity(3, 3, 1).is_err());
        assert!(QaeModel::<f64>::identity(3, 2, 1).is_ok());
    }

    #[test]
    fn identity_model_on_zero_state() {
        let m = QaeModel::<f64>::identity(4, 2, 1).unwrap();
        let zero = StateVector::zero_state(4).unwrap();
        let latent = m.compress(&zero).unwrap();
        assert_eq!(latent.n_qubits(), 2);
        assert!((latent.get(0, 0) - cone()).norm() < 1e-15);
        assert!((latent.purity() - 1.0).abs() < 1e-14);
        let back = m.reconstruct(&latent).unwrap();
        let expected = DensityMatrix::basis_projector(4, 0).unwrap();
        assert!(back.max_abs_diff(&expected).unwrap() < 1e-14);
    }

    #[test]
    fn bell_pair_compresses_to_mixed_state() {
        // (|00⟩ + |11⟩)/√2 through a random 2→1 model keeps some entanglement
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell =
            StateVector::from_amplitudes(vec![C::new(h, 0.0), czero(), czero(), C::new(h, 0.0)])
                .unwrap();
        let m = random_model(2, 1, 1, 11);
        let latent = m.compress(&bell).unwrap();
        latent.check_invariants(1e-10).unwrap();
        let p = latent.purity();
        assert!(p < 1.0 - 1e-3, "purity {p}");
    }

    #[test]
    fn compress_and_reconstruct_keep_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..5 {
            let m = random_model(5, 2, 2, seed);
            let psi = random_state(5, &mut rng);
            let latent = m.compress(&psi).unwrap();
            latent.check_invariants(1e-10).unwrap();
            let back = m.reconstruct(&latent).unwrap();
            back.check_invariants(1e-10).unwrap();
            assert!((back.trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn size_mismatches_are_errors() {
        let m = QaeModel::<f64>::identity(4, 2, 1).unwrap();
        assert!(m.compress(&StateVector::zero_state(3).unwrap()).is_err());
        assert!(m
            .reconstruct(&DensityMatrix::maximally_mixed(3).unwrap())
            .is_err());
    }

    #[test]
    fn fast_fidelity_matches_density_decoding() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..6 {
            let m = random_model(5, 2, 1, seed);
            let psi = random_state(5, &mut rng);
            let slow = m.fidelity(&psi).unwrap();
            let fast = m.fidelity_fast(&psi).unwrap();
            assert!((slow - fast).abs() < 1e-12, "{slow} vs {fast}");
            assert!((0.0..=1.0 + 1e-12).contains(&slow));
        }
    }

    #[test]
    fn identity_params_reproduce_compressible_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = QaeModel::<f64>::identity(5, 2, 1).unwrap();
        let data: Vec<_> = (0..8).map(|_| compressible(5, 2, &mut rng)).collect();
        let f = m.average_fidelity(&data).unwrap();
        assert!((f - 1.0).abs() < 1e-10, "{f}");
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let m = QaeModel::<f64>::identity(3, 1, 1).unwrap();
        assert!(m.average_fidelity(&[]).is_err());
    }

    #[test]
    fn fidelity_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_model(4, 2, 1, 3);
        let data: Vec<_> = (0..3).map(|_| random_state(4, &mut rng)).collect();
        let (_, g) = m.fidelity_and_gradient(&data).unwrap();
        let fd = finite_difference(
            |p| {
                let mm = QaeModel::new(m.ansatz.clone(), p.clone(), 2).unwrap();
                mm.average_fidelity(&data).unwrap()
            },
            &m.params,
            1e-5,
        )
        .unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn adjoint_fidelity_gradient_matches_shift_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (n, k, depth) in [(4, 2, 1), (5, 2, 2), (3, 1, 2)] {
            let m = random_model(n, k, depth, 11);
            let data: Vec<_> = (0..4).map(|_| random_state(n, &mut rng)).collect();
            let (fa, ga) = m.fidelity_and_gradient_adjoint(&data).unwrap();
            let (fs, gs) = m.fidelity_and_gradient(&data).unwrap();
            assert!((fa - fs).abs() < 1e-12);
            for (a, b) in ga.iter().zip(&gs) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn training_reaches_a_compressible_optimum() {
        // a single ψ_A ⊗ |0⟩_B state: the identity is optimal, reachable from small init
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = vec![compressible(3, 1, &mut rng)];
        let cfg = TrainConfig::default();
        let res = train_qae(&data, 1, 1, 200, &cfg).unwrap();
        let last = *res.fidelity_trace.last().unwrap();
        assert!(last >= 0.999, "final fidelity {last}");
        assert_eq!(res.fidelity_trace.len(), 201);
    }

    #[test]
    fn zero_iterations_is_an_error() {
        let data = vec![StateVector::<f64>::zero_state(3).unwrap()];
        assert!(train_qae(&data, 1, 1, 0, &TrainConfig::default()).is_err());
    }

    #[test]
    fn compress_dataset_preserves_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_model(4, 2, 1, 0);
        assert!(compress_dataset(&m, &[]).unwrap().is_empty());
        let samples: Vec<_> = (0..5).map(|i| (random_state(4, &mut rng), i % 2)).collect();
        let out = compress_dataset(&m, &samples).unwrap();
        assert_eq!(
            out.iter().map(|r| r.1).collect::<Vec<_>>(),
            vec![0, 1, 0, 1, 0]
        );
        assert!(out.iter().all(|r| r.0.n_qubits() == 2));
    }

    #[test]
    fn latent_cache_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_model(4, 2, 1, 0);
        let samples: Vec<_> = (0..3).map(|i| (random_state(4, &mut rng), i)).collect();
        let out = compress_dataset(&m, &samples).unwrap();
        let mut buf = Vec::new();
        write_compressed(&mut buf, &out).unwrap();
        let back = read_compressed(&buf[..]).unwrap();
        assert_eq!(back, out);
        assert!(read_compressed(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qae.json");
        let m = random_model(4, 2, 1, 0);
        m.save(&path).unwrap();
        assert_eq!(QaeModel::<f64>::load(&path).unwrap(), m);
    }
}
