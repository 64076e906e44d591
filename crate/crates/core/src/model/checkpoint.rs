//! Binary checkpoints: model structure, parameters and optional training state.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::autoencoder::{build_autoencoder, AutoencoderModel, BasisPlan, ModelConfig};
use super::optim::Adam;
use super::train::TrainState;
use crate::autodiff::Tensor;
use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::sampling::SamplingHierarchy;

const MAGIC: &[u8; 4] = b"VCCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Fingerprint of the hierarchy the model was built on.
    pub fingerprint: u64,
    pub config: ModelConfig,
    /// Parameter tensors in registration order.
    pub params: Vec<Tensor>,
    pub train: Option<TrainState>,
}

fn write_tensor(w: &mut ByteWriter, t: &Tensor) {
    w.index_list(t.shape());
    w.f64_list(t.data());
}

fn read_tensor(r: &mut ByteReader) -> Result<Tensor> {
    let shape = r.index_list()?;
    let data = r.f64_list()?;
    Tensor::new(shape, data).map_err(|e| Error::Corrupt(format!("bad tensor: {e}")))
}

impl Checkpoint {
    pub fn capture(model: &AutoencoderModel, train: Option<&TrainState>) -> Self {
        Checkpoint {
            fingerprint: model.fingerprint(),
            config: model.net.config(0),
            params: model.params.iter().map(|(_, p)| p.value.clone()).collect(),
            train: train.cloned(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u64(self.fingerprint);
        w.index_list(&self.config.channels);
        let basis = match &self.config.basis {
            BasisPlan::PerBlock(v) => v.clone(),
            BasisPlan::Uniform(m) => vec![*m; self.config.channels.len() - 1],
            BasisPlan::Auto => Vec::new(),
        };
        w.index_list(&basis);
        w.u32(self.config.residual as u32 | (self.config.normalize_basis as u32) << 1);
        w.index(self.params.len());
        for p in &self.params {
            write_tensor(&mut w, p);
        }
        match &self.train {
            None => w.u32(0),
            Some(s) => {
                w.u32(1);
                w.u64(s.adam.step);
                w.f64(s.adam.beta1);
                w.f64(s.adam.beta2);
                w.f64(s.adam.eps);
                for (m, v) in s.adam.m.iter().zip(&s.adam.v) {
                    write_tensor(&mut w, m);
                    write_tensor(&mut w, v);
                }
                w.u64(s.epoch as u64);
                w.u64(s.batch_in_epoch as u64);
                w.u64(s.total_steps as u64);
                w.f64(s.epoch_loss_sum);
                w.f64(s.epoch_l1_sum);
                w.u64(s.epoch_batches as u64);
                w.bytes(&s.rng.get_seed());
                w.u64(s.rng.get_stream());
                let pos = s.rng.get_word_pos();
                w.u64(pos as u64);
                w.u64((pos >> 64) as u64);
            }
        }
        w.into_inner()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data);
        r.expect_magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Corrupt(format!("unsupported checkpoint version {version}")));
        }
        let fingerprint = r.u64()?;
        let channels = r.index_list()?;
        let basis = r.index_list()?;
        let flags = r.u32()?;
        if flags > 3 {
            return Err(Error::Corrupt(format!("unknown checkpoint flags {flags:#x}")));
        }
        let n = r.index()?;
        let params = (0..n).map(|_| read_tensor(&mut r)).collect::<Result<Vec<_>>>()?;
        let train = match r.u32()? {
            0 => None,
            1 => {
                let step = r.u64()?;
                let (beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?);
                let mut m = Vec::with_capacity(n);
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    m.push(read_tensor(&mut r)?);
                    v.push(read_tensor(&mut r)?);
                }
                let epoch = r.u64()? as usize;
                let batch_in_epoch = r.u64()? as usize;
                let total_steps = r.u64()? as usize;
                let epoch_loss_sum = r.f64()?;
                let epoch_l1_sum = r.f64()?;
                let epoch_batches = r.u64()? as usize;
                let mut seed = [0u8; 32];
                for chunk in seed.chunks_mut(8) {
                    chunk.copy_from_slice(&r.u64()?.to_le_bytes());
                }
                let stream = r.u64()?;
                let pos = r.u64()? as u128 | (r.u64()? as u128) << 64;
                let mut rng = ChaCha8Rng::from_seed(seed);
                rng.set_stream(stream);
                rng.set_word_pos(pos);
                Some(TrainState {
                    adam: Adam {
                        beta1,
                        beta2,
                        eps,
                        step,
                        m,
                        v,
                    },
                    epoch,
                    batch_in_epoch,
                    total_steps,
                    rng,
                    epoch_loss_sum,
                    epoch_l1_sum,
                    epoch_batches,
                })
            }
            t => return Err(Error::Corrupt(format!("unknown training-state tag {t}"))),
        };
        r.finish()?;
        Ok(Checkpoint {
            fingerprint,
            config: ModelConfig {
                channels,
                basis: if basis.is_empty() {
                    BasisPlan::Auto
                } else {
                    BasisPlan::PerBlock(basis)
                },
                residual: flags & 1 != 0,
                normalize_basis: flags & 2 != 0,
                seed: 0,
            },
            params,
            train,
        })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Rebuilds the model on `hierarchy`, which must be the one it was trained on.
    pub fn restore(&self, hierarchy: &SamplingHierarchy) -> Result<(AutoencoderModel, Option<TrainState>)> {
        let found = hierarchy.fingerprint();
        if found != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint,
                found,
            });
        }
        let mut model = build_autoencoder(hierarchy, &self.config)?;
        if model.params.len() != self.params.len() {
            return Err(Error::Corrupt(format!(
                "checkpoint has {} parameter tensors, model needs {}",
                self.params.len(),
                model.params.len()
            )));
        }
        let ids: Vec<_> = model.params.ids().collect();
        for (id, t) in ids.into_iter().zip(&self.params) {
            let slot = model.params.value_mut(id);
            if !slot.same_shape(t) {
                return Err(Error::Corrupt(format!(
                    "parameter shape {:?} does not match model shape {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t.clone();
        }
        if let Some(s) = &self.train {
            let shapes_ok = s.adam.m.len() == self.params.len()
                && s.adam
                    .m
                    .iter()
                    .zip(&s.adam.v)
                    .zip(&self.params)
                    .all(|((m, v), p)| m.same_shape(p) && v.same_shape(p));
            if !shapes_ok {
                return Err(Error::Corrupt("optimizer state does not match the parameters".into()));
            }
        }
        Ok((model, self.train.clone()))
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &AutoencoderModel, train: Option<&TrainState>) -> Result<()> {
    Checkpoint::capture(model, train).write_file(path)
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
    hierarchy: &SamplingHierarchy,
) -> Result<(AutoencoderModel, Option<TrainState>)> {
    Checkpoint::read_file(path)?.restore(hierarchy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshTopology;
    use crate::sampling::{build_hierarchy, LevelSpec};

    fn setup() -> (SamplingHierarchy, AutoencoderModel) {
        let path = MeshTopology::from_edges(6, (0..5).map(|i| (i, i + 1))).unwrap();
        let h = build_hierarchy(&path, &[LevelSpec::new(2, 1)], 3).unwrap();
        let mut cfg = ModelConfig::new(vec![3, 4, 3]);
        cfg.seed = 11;
        let m = build_autoencoder(&h, &cfg).unwrap();
        (h, m)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let (h, m) = setup();
        let mut state = TrainState::fresh(&m, 5);
        state.epoch = 2;
        state.batch_in_epoch = 1;
        state.adam.step = 9;
        state.adam.m[0].data_mut()[0] = 0.25;
        let bytes = Checkpoint::capture(&m, Some(&state)).to_bytes();
        let ck = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(ck.train.as_ref(), Some(&state));
        let (m2, s2) = ck.restore(&h).unwrap();
        assert_eq!(Checkpoint::capture(&m2, s2.as_ref()).to_bytes(), bytes);
    }

    #[test]
    fn wrong_hierarchy_rejected() {
        let (_, m) = setup();
        let other = MeshTopology::from_edges(6, (0..5).map(|i| (i, i + 1)).chain([(0, 5)])).unwrap();
        let h2 = build_hierarchy(&other, &[LevelSpec::new(2, 1)], 3).unwrap();
        let ck = Checkpoint::capture(&m, None);
        assert!(matches!(ck.restore(&h2), Err(Error::FingerprintMismatch { .. })));
    }

    #[test]
    fn truncation_is_corrupt() {
        let (_, m) = setup();
        let bytes = Checkpoint::capture(&m, None).to_bytes();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Corrupt(_))
        ));
    }
}
