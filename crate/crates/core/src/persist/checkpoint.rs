//! Checkpoint file format ("MTCK").
//!
//! Carries everything a training run needs to continue exactly where it
//! stopped: the architecture echo, every named parameter tensor, the
//! batch-norm running statistics, the per-parameter optimizer state, the
//! iteration counter, and the four-word generator state. All numbers are
//! little-endian; a CRC-32 of everything before it closes the file. A
//! restored run is step-identical to one that never stopped.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{MultiTaskNet, NetConfig, WidthScale};
use crate::optim::{ParamState, RmsProp, RmsPropConfig};
use crate::persist::bytes::{Reader, Writer};
use crate::persist::crc32::crc32;
use crate::rng::Rng;
use crate::train::{TrainData, Trainer};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MTCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// In-memory image of a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub width_scale: (u32, u32),
    pub opt_config: RmsPropConfig,
    pub params: Vec<NamedTensor>,
    pub buffers: Vec<(String, Vec<f64>)>,
    pub opt_state: Vec<(String, ParamState)>,
    pub iteration: u64,
    pub rng_state: [u64; 4],
}

impl Checkpoint {
    pub fn capture(trainer: &Trainer) -> Checkpoint {
        let ws = trainer.net.config.width_scale;
        Checkpoint {
            width_scale: (ws.num, ws.den),
            opt_config: trainer.opt.config,
            params: trainer
                .net
                .named_parameters()
                .into_iter()
                .map(|(name, t)| NamedTensor { name, shape: t.shape().to_vec(), data: t.to_vec() })
                .collect(),
            buffers: trainer.net.named_buffers(),
            opt_state: trainer
                .opt
                .state_entries()
                .map(|(n, s)| (n.clone(), s.clone()))
                .collect(),
            iteration: trainer.opt.iteration(),
            rng_state: trainer.rng.state(),
        }
    }

    /// Rebuild the network this checkpoint describes.
    pub fn build_net(&self) -> Result<MultiTaskNet> {
        let config = NetConfig { width_scale: WidthScale::new(self.width_scale.0, self.width_scale.1)? };
        let mut net = MultiTaskNet::new(config, 0);
        let expected = net.named_parameters();
        if expected.len() != self.params.len() {
            return Err(Error::parse(format!(
                "checkpoint has {} parameters, architecture expects {}",
                self.params.len(),
                expected.len()
            )));
        }
        for ((name, tensor), stored) in expected.into_iter().zip(&self.params) {
            if name != stored.name || tensor.shape() != &stored.shape[..] {
                return Err(Error::parse(format!(
                    "parameter mismatch: expected {name} {:?}, found {} {:?}",
                    tensor.shape(),
                    stored.name,
                    stored.shape
                )));
            }
            tensor.set_data(&stored.data);
        }
        for (name, values) in &self.buffers {
            net.set_buffer(name, values)?;
        }
        Ok(net)
    }

    /// Rebuild a full trainer; data and batch size come from the caller (the
    /// checkpoint stores model/optimizer/generator state, not datasets).
    pub fn into_trainer(self, batch_size: usize, data: TrainData) -> Result<Trainer> {
        let net = self.build_net()?;
        let opt = RmsProp::restore(self.opt_config, self.iteration, self.opt_state);
        let rng = Rng::from_state(self.rng_state);
        Ok(Trainer::from_parts(net, opt, rng, batch_size, data))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(&CHECKPOINT_MAGIC);
        w.u16(CHECKPOINT_VERSION);
        w.u32(self.width_scale.0);
        w.u32(self.width_scale.1);
        w.f64(self.opt_config.learning_rate);
        w.f64(self.opt_config.momentum);
        w.f64(self.opt_config.decay);
        w.f64(self.opt_config.epsilon);
        w.u64(self.opt_config.schedule_period);
        w.f64(self.opt_config.schedule_factor);

        w.u32(self.params.len() as u32);
        for p in &self.params {
            w.str16(&p.name);
            w.u8(p.shape.len() as u8);
            for &d in &p.shape {
                w.u32(d as u32);
            }
            w.f64_slice(&p.data);
        }

        w.u32(self.buffers.len() as u32);
        for (name, values) in &self.buffers {
            w.str16(name);
            w.u32(values.len() as u32);
            w.f64_slice(values);
        }

        w.u32(self.opt_state.len() as u32);
        for (name, st) in &self.opt_state {
            w.str16(name);
            w.u32(st.momentum.len() as u32);
            w.f64_slice(&st.accum);
            w.f64_slice(&st.momentum);
        }

        w.u64(self.iteration);
        for &s in &self.rng_state {
            w.u64(s);
        }

        let crc = crc32(w.bytes());
        w.u32(crc);
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
        if bytes.len() < 10 {
            return Err(Error::Truncated { expected: 10, found: bytes.len() as u64 });
        }
        let mut r = Reader::new(bytes);
        let magic = r.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic {
                expected: CHECKPOINT_MAGIC,
                found: magic.try_into().unwrap(),
            });
        }
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::BadVersion { expected: CHECKPOINT_VERSION, found: version });
        }

        // Verify the trailing CRC over everything before it.
        let body_len = bytes.len() - 4;
        let stored_crc = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
        let actual_crc = crc32(&bytes[..body_len]);
        if stored_crc != actual_crc {
            return Err(Error::CrcMismatch { expected: stored_crc, found: actual_crc });
        }

        let ws_num = r.u32()?;
        let ws_den = r.u32()?;
        let opt_config = RmsPropConfig {
            learning_rate: r.f64()?,
            momentum: r.f64()?,
            decay: r.f64()?,
            epsilon: r.f64()?,
            schedule_period: r.u64()?,
            schedule_factor: r.f64()?,
        };

        let n_params = r.u32()? as usize;
        let mut params = Vec::with_capacity(n_params.min(1024));
        for _ in 0..n_params {
            let name = r.str16()?;
            let rank = r.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let numel: usize = shape.iter().product();
            if numel * 8 > r.remaining() {
                return Err(Error::Truncated {
                    expected: (r.position() + numel * 8) as u64,
                    found: bytes.len() as u64,
                });
            }
            let data = r.f64_vec(numel)?;
            params.push(NamedTensor { name, shape, data });
        }

        let n_buffers = r.u32()? as usize;
        let mut buffers = Vec::with_capacity(n_buffers.min(1024));
        for _ in 0..n_buffers {
            let name = r.str16()?;
            let len = r.u32()? as usize;
            buffers.push((name, r.f64_vec(len)?));
        }

        let n_state = r.u32()? as usize;
        let mut opt_state = Vec::with_capacity(n_state.min(1024));
        for _ in 0..n_state {
            let name = r.str16()?;
            let len = r.u32()? as usize;
            let accum = r.f64_vec(len)?;
            let momentum = r.f64_vec(len)?;
            opt_state.push((name, ParamState { accum, momentum }));
        }

        let iteration = r.u64()?;
        let rng_state = [r.u64()?, r.u64()?, r.u64()?, r.u64()?];
        Ok(Checkpoint {
            width_scale: (ws_num, ws_den),
            opt_config,
            params,
            buffers,
            opt_state,
            iteration,
            rng_state,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path)?;
        Checkpoint::decode(&bytes)
    }
}
