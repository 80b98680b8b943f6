use std::path::Path;

use masi_core::codec::{Container, Decoder, Encoder, FileKind};
use masi_core::{CoreError, Framework};
use masi_numerics::{ParamStore, Tensor};

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};
use crate::network::Model;

/// A trained model with the digest of the dictionary its indices refer to
/// (zero for the metric framework).
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Model,
    pub dictionary_digest: u64,
}

fn corrupt(e: CoreError) -> ModelError {
    ModelError::Core(e)
}

fn encode_config(c: &ModelConfig, digest: u64) -> Vec<u8> {
    let mut e = Encoder::new();
    e.u8(c.framework.tag())
        .usize(c.n_star)
        .usize(c.dict_size)
        .usize(c.t_history)
        .usize(c.t_future)
        .usize(c.hidden)
        .usize(c.embed_dim)
        .usize(c.batch)
        .f64(c.lr)
        .usize(c.epochs)
        .u64(c.seed)
        .f64(c.clip_norm)
        .u64(digest);
    e.finish()
}

fn decode_config(bytes: &[u8]) -> Result<(ModelConfig, u64)> {
    let mut d = Decoder::new(bytes);
    let tag = d.u8()?;
    let framework = Framework::from_tag(tag)
        .ok_or_else(|| ModelError::Core(CoreError::Corruption(format!("unknown framework tag {tag}"))))?;
    let config = ModelConfig {
        framework,
        n_star: d.usize()?,
        dict_size: d.usize()?,
        t_history: d.usize()?,
        t_future: d.usize()?,
        hidden: d.usize()?,
        embed_dim: d.usize()?,
        batch: d.usize()?,
        lr: d.f64()?,
        epochs: d.usize()?,
        seed: d.u64()?,
        clip_norm: d.f64()?,
    };
    let digest = d.u64()?;
    d.expect_end()?;
    Ok((config, digest))
}

impl Checkpoint {
    pub fn to_container(&self) -> Container {
        let mut c = Container::new(FileKind::Checkpoint);
        c.push("config", encode_config(self.model.config(), self.dictionary_digest));
        let mut e = Encoder::new();
        e.usize(self.model.params().len());
        for (_, name, t) in self.model.params().iter() {
            e.str(name).usizes(t.shape()).f64s(t.data());
        }
        c.push("params", e.finish());
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let (config, dictionary_digest) = decode_config(c.section("config")?)?;
        let mut d = Decoder::new(c.section("params")?);
        let n = d.usize()?;
        let mut store = ParamStore::new();
        for _ in 0..n {
            let name = d.str()?;
            let shape = d.usizes()?;
            let data = d.f64s()?;
            let t = Tensor::new(shape, data)
                .map_err(|e| corrupt(CoreError::Corruption(format!("parameter {name}: {e}"))))?;
            store
                .add(name.clone(), t)
                .map_err(|e| corrupt(CoreError::Corruption(format!("parameter {name}: {e}"))))?;
        }
        d.expect_end()?;
        let model = Model::from_params(config, store)?;
        Ok(Checkpoint {
            model,
            dictionary_digest,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(self.to_container().write(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let c = Container::read(path, FileKind::Checkpoint)?;
        Self::from_container(&c)
    }

    /// Fails unless the checkpoint was trained for `framework` with a
    /// dictionary of digest `digest`.
    pub fn ensure_compatible(&self, framework: Framework, digest: u64) -> Result<()> {
        let own = self.model.config().framework;
        if own != framework {
            return Err(ModelError::Compatibility(format!(
                "checkpoint is a {} model, dataset is {}",
                own.name(),
                framework.name()
            )));
        }
        if self.dictionary_digest != digest {
            return Err(ModelError::Compatibility(format!(
                "dictionary digest {:016x} differs from the checkpoint's {:016x}",
                digest, self.dictionary_digest
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(framework: Framework) -> Model {
        let mut c = ModelConfig::defaults(framework, 2, 7, 3);
        c.t_history = 2;
        c.hidden = 5;
        c.embed_dim = 3;
        c.seed = 3;
        Model::new(c).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for fw in [Framework::Qtc6, Framework::Ts] {
            let ck = Checkpoint {
                model: small(fw),
                dictionary_digest: 0xdead_beef,
            };
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.ckpt");
            ck.save(&path).unwrap();
            let back = Checkpoint::load(&path).unwrap();
            assert_eq!(back.dictionary_digest, 0xdead_beef);
            assert_eq!(back.model.config(), ck.model.config());
            for ((_, a, x), (_, b, y)) in back.model.params().iter().zip(ck.model.params().iter()) {
                assert_eq!(a, b);
                assert_eq!(x.shape(), y.shape());
                assert!(x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
        }
    }

    #[test]
    fn mismatches_are_compatibility_errors() {
        let ck = Checkpoint {
            model: small(Framework::Qtc4),
            dictionary_digest: 9,
        };
        ck.ensure_compatible(Framework::Qtc4, 9).unwrap();
        assert!(matches!(ck.ensure_compatible(Framework::Qtc6, 9), Err(ModelError::Compatibility(_))));
        assert!(matches!(ck.ensure_compatible(Framework::Qtc4, 8), Err(ModelError::Compatibility(_))));
        let bytes = ck.to_container().to_bytes();
        assert!(matches!(
            Container::from_bytes(&bytes, FileKind::Dataset),
            Err(CoreError::Compatibility(_))
        ));
    }
}
