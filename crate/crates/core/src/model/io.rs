//! Binary model file, all integers and floats little-endian:
//!
//! ```text
//! magic      6 bytes  "IFLOW1"
//! version    u32      1
//! dim        u32
//! dt         f64
//! latent     u8       0 = linear, 1 = cycle
//! margin     f64
//! shift      dim × f64
//! scale      dim × f64
//! n_layers   u32
//! layer      u8 tag, then
//!              0 coupling:   u32 n + n × u32 active indices,
//!                            u32 n + n × u32 passive indices,
//!                            u32 n + n × u32 scale-net widths,
//!                            u32 n + n × u32 translate-net widths
//!              1 orthogonal: u32 reflection count
//! n_flow     u64, then n_flow × f64 flow parameters
//! n_latent   u64, then n_latent × f64 latent parameters
//! ```

use super::{ImitationModel, Normalizer};
use crate::error::{Error, Result};
use crate::flows::{FlowStack, LayerSpec};
use crate::latent::{Latent, LatentKind};
use std::io::{Read, Write};

pub const MAGIC: &[u8; 6] = b"IFLOW1";
pub const VERSION: u32 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.0.write_all(&[v])?)
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::ModelFormat(format!("{v} does not fit in u32")))?;
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: usize) -> Result<()> {
        Ok(self.0.write_all(&(v as u64).to_le_bytes())?)
    }
    fn f64s(&mut self, v: &[f64]) -> Result<()> {
        for x in v {
            self.0.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }
    fn list(&mut self, v: &[usize]) -> Result<()> {
        self.u32(v.len())?;
        v.iter().try_for_each(|&x| self.u32(x))
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::ModelFormat("truncated file".into()),
            _ => Error::Io(e),
        })?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }
    fn u64(&mut self) -> Result<usize> {
        usize::try_from(u64::from_le_bytes(self.bytes()?)).map_err(|_| Error::ModelFormat("length overflow".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn list(&mut self, limit: usize) -> Result<Vec<usize>> {
        let n = self.u32()?;
        if n > limit {
            return Err(Error::ModelFormat(format!("list of {n} entries exceeds {limit}")));
        }
        (0..n).map(|_| self.u32()).collect()
    }
}

pub fn write_model<W: Write>(w: W, model: &ImitationModel<f64>) -> Result<()> {
    let mut w = Writer(w);
    w.0.write_all(MAGIC)?;
    w.u32(VERSION as usize)?;
    w.u32(model.dim())?;
    w.f64s(&[model.dt()])?;
    w.u8(match model.latent().kind() {
        LatentKind::Linear => 0,
        LatentKind::Cycle => 1,
    })?;
    w.f64s(&[model.latent().margin()])?;
    w.f64s(model.normalizer().shift())?;
    w.f64s(model.normalizer().scale())?;
    let specs = model.flow().specs();
    w.u32(specs.len())?;
    for spec in &specs {
        match spec {
            LayerSpec::Coupling { active, passive, scale_widths, translate_widths } => {
                w.u8(0)?;
                w.list(active)?;
                w.list(passive)?;
                w.list(scale_widths)?;
                w.list(translate_widths)?;
            }
            LayerSpec::Orthogonal { reflections } => {
                w.u8(1)?;
                w.u32(*reflections)?;
            }
        }
    }
    let fp = model.flow().params();
    w.u64(fp.len())?;
    w.f64s(&fp)?;
    let lp = model.latent().params();
    w.u64(lp.len())?;
    w.f64s(&lp)?;
    Ok(())
}

const MAX_LIST: usize = 1 << 16;

pub fn read_model<R: Read>(r: R) -> Result<ImitationModel<f64>> {
    let mut r = Reader(r);
    if &r.bytes::<6>()? != MAGIC {
        return Err(Error::ModelFormat("missing IFLOW1 header".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let dim = r.u32()?;
    if dim == 0 || dim > MAX_LIST {
        return Err(Error::ModelFormat(format!("bad dimension {dim}")));
    }
    let dt = r.f64()?;
    let kind = match r.u8()? {
        0 => LatentKind::Linear,
        1 => LatentKind::Cycle,
        t => return Err(Error::ModelFormat(format!("unknown latent tag {t}"))),
    };
    let margin = r.f64()?;
    let shift = r.f64s(dim)?;
    let scale = r.f64s(dim)?;
    let n_layers = r.u32()?;
    if n_layers > MAX_LIST {
        return Err(Error::ModelFormat(format!("{n_layers} layers")));
    }
    let specs = (0..n_layers)
        .map(|_| {
            Ok(match r.u8()? {
                0 => LayerSpec::Coupling {
                    active: r.list(MAX_LIST)?,
                    passive: r.list(MAX_LIST)?,
                    scale_widths: r.list(MAX_LIST)?,
                    translate_widths: r.list(MAX_LIST)?,
                },
                1 => LayerSpec::Orthogonal { reflections: r.u32()? },
                t => return Err(Error::ModelFormat(format!("unknown layer tag {t}"))),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let expected: usize = specs.iter().map(|s| s.num_params(dim)).sum();
    let nf = r.u64()?;
    if nf != expected {
        return Err(Error::ModelFormat(format!("{nf} flow parameters for layers needing {expected}")));
    }
    let fp = r.f64s(nf)?;
    let nl = r.u64()?;
    if nl != Latent::<f64>::num_params_for(kind, dim) {
        return Err(Error::ModelFormat(format!("{nl} latent parameters for a {kind} latent of dim {dim}")));
    }
    let lp = r.f64s(nl)?;
    let mut rest = Vec::new();
    r.0.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::ModelFormat(format!("{} trailing bytes", rest.len())));
    }
    let flow = FlowStack::from_specs(dim, &specs, &fp).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let latent = Latent::from_raw(kind, dim, margin, &lp).map_err(|e| Error::ModelFormat(e.to_string()))?;
    ImitationModel::new(flow, latent, Normalizer::new(shift, scale)?, dt)
}
