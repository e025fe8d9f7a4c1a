//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "3DSN"  u32 version
//! u32 len, config text (TOML: [model] and [train] tables)
//! u64 epoch, u64 step, u64 global_step, u64 gen_adam_t, u64 disc_adam_t
//! u32 count, then per parameter:
//!     u32 len, name   u8 group (0 gen, 1 disc, 2 buffer)   u32 rows, u32 cols
//!     rows·cols f32 values
//! u32 count, then per generator-optimizer entry: u32 len, name, m values, v values
//! u32 count, then the same for the discriminator optimizer
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, Optimizers, Progress, TrainConfig, Trainer};
use crate::autodiff::Mat;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, StyleTransferModel};
use crate::nets::{Group, ParameterStore};

pub const MAGIC: &[u8; 4] = b"3DSN";
pub const VERSION: u32 = 1;

/// Everything needed to rebuild a [`Trainer`].
pub type Checkpoint = Trainer;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigSnapshot {
    model: ModelConfig,
    train: TrainConfig,
}

fn group_byte(g: Group) -> u8 {
    match g {
        Group::Generator => 0,
        Group::Discriminator => 1,
        Group::Buffer => 2,
    }
}

pub(crate) struct Writer(pub(crate) Vec<u8>);

impl Writer {
    pub(crate) fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub(crate) fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
    pub(crate) fn floats(&mut self, m: &Mat<f32>) {
        for x in &m.data {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
}

pub(crate) struct Reader<'a> {
    pub(crate) buf: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::CorruptCheckpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    pub(crate) fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::CorruptCheckpoint("invalid utf-8".into()))
    }
    pub(crate) fn floats_into(&mut self, m: &mut Mat<f32>) -> Result<()> {
        let raw = self.take(m.data.len() * 4)?;
        for (x, b) in m.data.iter_mut().zip(raw.chunks_exact(4)) {
            *x = f32::from_le_bytes(b.try_into().expect("4 bytes"));
        }
        if !m.all_finite() {
            return Err(Error::CorruptCheckpoint("non-finite value".into()));
        }
        Ok(())
    }
}

/// Parameter records in store order.
pub(crate) fn write_params(w: &mut Writer, store: &ParameterStore<f32>) {
    w.u32(store.len() as u32);
    for id in store.ids() {
        w.bytes(store.name(id).as_bytes());
        w.0.push(group_byte(store.group(id)));
        let m = store.get(id);
        w.u32(m.rows as u32);
        w.u32(m.cols as u32);
        w.floats(m);
    }
}

/// Overwrites `store` from records that must match it name-for-name.
pub(crate) fn read_params(r: &mut Reader<'_>, store: &mut ParameterStore<f32>) -> Result<()> {
    let count = r.u32()? as usize;
    if count != store.len() {
        return Err(Error::CorruptCheckpoint(format!("{count} parameters, model has {}", store.len())));
    }
    for id in store.ids().collect::<Vec<_>>() {
        let name = r.string()?;
        let group = r.u8()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        if name != store.name(id) || group != group_byte(store.group(id)) {
            return Err(Error::CorruptCheckpoint(format!("unexpected parameter record {name}")));
        }
        if (rows, cols) != store.get(id).shape() {
            return Err(Error::CorruptCheckpoint(format!("{name}: shape {rows}x{cols} does not match the model")));
        }
        let mut m = Mat::zeros(rows, cols);
        r.floats_into(&mut m)?;
        store.set(id, m)?;
    }
    Ok(())
}

pub fn to_bytes(trainer: &Trainer) -> Result<Vec<u8>> {
    let snapshot = ConfigSnapshot { model: trainer.model.config.clone(), train: trainer.config.clone() };
    let text = toml::to_string(&snapshot).map_err(|e| Error::Config(e.to_string()))?;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.bytes(text.as_bytes());
    let p = trainer.progress;
    for v in [p.epoch as u64, p.step as u64, p.global_step, trainer.optimizers.generator.t, trainer.optimizers.discriminator.t] {
        w.u64(v);
    }
    let store = &trainer.model.store;
    write_params(&mut w, store);
    for st in [&trainer.optimizers.generator, &trainer.optimizers.discriminator] {
        w.u32(st.ids.len() as u32);
        for ((&id, m), v) in st.ids.iter().zip(&st.m).zip(&st.v) {
            w.bytes(store.name(id).as_bytes());
            w.floats(m);
            w.floats(v);
        }
    }
    Ok(w.0)
}

fn read_moments(r: &mut Reader<'_>, store: &ParameterStore<f32>, st: &mut AdamState<f32>) -> Result<()> {
    let count = r.u32()? as usize;
    if count != st.ids.len() {
        return Err(Error::CorruptCheckpoint(format!("{count} optimizer entries, expected {}", st.ids.len())));
    }
    for k in 0..count {
        let name = r.string()?;
        if name != store.name(st.ids[k]) {
            return Err(Error::CorruptCheckpoint(format!("optimizer entry {name} out of order")));
        }
        r.floats_into(&mut st.m[k])?;
        r.floats_into(&mut st.v[k])?;
    }
    Ok(())
}

pub fn from_bytes(buf: &[u8]) -> Result<Trainer> {
    if buf.len() < 4 || &buf[..4] != MAGIC {
        return Err(Error::NotACheckpoint);
    }
    let mut r = Reader { buf, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::CheckpointVersion { found: version, expected: VERSION });
    }
    let text = r.string()?;
    let snapshot: ConfigSnapshot =
        toml::from_str(&text).map_err(|e| Error::CorruptCheckpoint(format!("config: {e}")))?;
    let mut model = StyleTransferModel::<f32>::new(snapshot.model, 0)?;
    let mut trainer = Trainer::new(model.clone(), snapshot.train)?;
    let epoch = r.u64()? as usize;
    let step = r.u64()? as usize;
    let global_step = r.u64()?;
    let gen_t = r.u64()?;
    let disc_t = r.u64()?;

    read_params(&mut r, &mut model.store)?;
    let mut opt = Optimizers::new(&model);
    read_moments(&mut r, &model.store, &mut opt.generator)?;
    read_moments(&mut r, &model.store, &mut opt.discriminator)?;
    opt.generator.t = gen_t;
    opt.discriminator.t = disc_t;
    if r.pos != buf.len() {
        return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    trainer.model = model;
    trainer.optimizers = opt;
    trainer.progress = Progress { epoch, step, global_step };
    Ok(trainer)
}

pub fn save_checkpoint(trainer: &Trainer, path: &Path) -> Result<()> {
    let bytes = to_bytes(trainer)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Trainer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
