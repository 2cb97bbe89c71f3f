//! Binary model container, little-endian throughout.
//!
//! Layout: magic `ALSEGSVM`, `u32` version, `u64` payload length,
//! `u64` FNV-1a checksum of the payload, then the payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Diagnostics, Platt, SvmModel, TrainingSet};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, Scaler};

pub const MODEL_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"ALSEGSVM";
const HEADER: usize = 8 + 4 + 8 + 8;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Default)]
struct Out(Vec<u8>);

impl Out {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }

    fn bytes(&mut self, b: &[u8]) {
        self.usize(b.len());
        self.0.extend_from_slice(b);
    }
}

struct In<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> In<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::CorruptModel("unexpected end of payload".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A count that must fit in the remaining bytes at `unit` bytes each.
    fn count(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.at) as u64;
        if n.saturating_mul(unit.max(1) as u64) > left {
            return Err(Error::CorruptModel(format!("count {n} exceeds payload")));
        }
        Ok(n as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn text(&mut self) -> Result<&'a str> {
        let n = self.count(1)?;
        std::str::from_utf8(self.take(n)?).map_err(|e| Error::CorruptModel(e.to_string()))
    }
}

pub fn model_to_bytes(model: &SvmModel, train: &TrainingSet) -> Vec<u8> {
    let mut p = Out::default();
    p.bytes(model.config.to_text().as_bytes());
    let len = model.scaler.len;
    p.usize(len);
    p.usize(model.scaler.groups.len());
    for (g, (m, s)) in model.scaler.groups.iter().zip(model.scaler.means.iter().zip(&model.scaler.stds)) {
        p.usize(g.start);
        p.usize(g.end);
        p.f64(*m);
        p.f64(*s);
    }
    p.f64(model.gamma);
    p.f64(model.nu);
    p.f64(model.b);
    match model.platt {
        Some(pl) => {
            p.0.push(1);
            p.f64(pl.a);
            p.f64(pl.b);
        }
        None => p.0.push(0),
    }
    let d = &model.diagnostics;
    p.f64(d.objective);
    p.f64(d.margin);
    p.u64(d.iterations);
    p.u64(d.kernel_evals);
    p.usize(model.support.len());
    for ((sv, c), i) in model.support.iter().zip(&model.coef).zip(&model.support_indices) {
        p.usize(*i);
        p.f64(*c);
        p.f64s(sv);
    }
    p.usize(train.len());
    for (v, &l) in train.samples.iter().zip(&train.labels) {
        p.0.push(l as u8);
        p.f64s(v);
    }
    let payload = p.0;
    let mut out = Vec::with_capacity(HEADER + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&fnv1a(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<(SvmModel, TrainingSet)> {
    if bytes.len() < HEADER {
        return Err(Error::CorruptModel("file shorter than header".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::CorruptModel("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let plen = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let sum = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let payload = &bytes[HEADER..];
    if payload.len() as u64 != plen {
        return Err(Error::CorruptModel(format!("payload has {} bytes, header says {plen}", payload.len())));
    }
    if fnv1a(payload) != sum {
        return Err(Error::CorruptModel("checksum mismatch".into()));
    }
    let mut r = In { buf: payload, at: 0 };
    let config = FeatureConfig::from_text(r.text()?).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let len = r.u64()? as usize;
    if len != config.layout().len {
        return Err(Error::CorruptModel("scaler length does not match feature config".into()));
    }
    let ng = r.count(32)?;
    let mut scaler = Scaler {
        groups: Vec::with_capacity(ng),
        means: Vec::with_capacity(ng),
        stds: Vec::with_capacity(ng),
        len,
    };
    for _ in 0..ng {
        let (s, e) = (r.u64()? as usize, r.u64()? as usize);
        if s > e || e > len {
            return Err(Error::CorruptModel("scaler group out of range".into()));
        }
        scaler.groups.push(s..e);
        scaler.means.push(r.f64()?);
        scaler.stds.push(r.f64()?);
    }
    let gamma = r.f64()?;
    let nu = r.f64()?;
    let b = r.f64()?;
    let platt = match r.u8()? {
        0 => None,
        1 => Some(Platt { a: r.f64()?, b: r.f64()? }),
        t => return Err(Error::CorruptModel(format!("bad calibration tag {t}"))),
    };
    let diagnostics = Diagnostics {
        objective: r.f64()?,
        margin: r.f64()?,
        iterations: r.u64()?,
        kernel_evals: r.u64()?,
    };
    let nsv = r.count(16 + 8 * len)?;
    let mut model = SvmModel {
        config,
        scaler,
        support: Vec::with_capacity(nsv),
        support_indices: Vec::with_capacity(nsv),
        coef: Vec::with_capacity(nsv),
        b,
        gamma,
        nu,
        platt,
        diagnostics,
    };
    for _ in 0..nsv {
        model.support_indices.push(r.u64()? as usize);
        model.coef.push(r.f64()?);
        model.support.push(r.f64s(len)?);
    }
    let n = r.count(1 + 8 * len)?;
    let mut train = TrainingSet::new();
    for _ in 0..n {
        let l = r.u8()? as i8;
        if l != 1 && l != -1 {
            return Err(Error::CorruptModel(format!("bad label {l}")));
        }
        train.push(r.f64s(len)?, l);
    }
    if r.at != payload.len() {
        return Err(Error::CorruptModel("trailing bytes".into()));
    }
    Ok((model, train))
}

/// Writes to a temporary sibling and renames it into place.
pub fn serialize_model(model: &SvmModel, train: &TrainingSet, path: &Path) -> Result<()> {
    let tmp = path.with_extension("partial");
    let bytes = model_to_bytes(model, train);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn deserialize_model(path: &Path) -> Result<(SvmModel, TrainingSet)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
