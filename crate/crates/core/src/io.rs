//! Binary containers: `SPH1` signals, `SPEC` spectra and `CKPT` checkpoints.
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Bandwidth;
use crate::network::{ParameterStore, Tensor};
use crate::sft::{coeff_index, SpectralCoeffs, SphericalSignal};

pub const SPH_MAGIC: &[u8; 4] = b"SPH1";
pub const SPEC_MAGIC: &[u8; 4] = b"SPEC";
pub const CKPT_MAGIC: &[u8; 4] = b"CKPT";
pub const CKPT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }
}

struct Reader<R> {
    inner: R,
    what: &'static str,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {} file", self.what)),
            _ => Error::Io(e),
        })?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let got = self.bytes::<4>()?;
        if &got != expect {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(expect)
            )));
        }
        Ok(())
    }

    fn bandwidth(&mut self) -> Result<Bandwidth> {
        let b = self.u32()?;
        Bandwidth::new(b).map_err(|e| Error::Format(format!("{} header: {e}", self.what)))
    }

    fn finish(&mut self) -> Result<()> {
        let mut rest = [0u8; 1];
        match self.inner.read(&mut rest)? {
            0 => Ok(()),
            _ => Err(Error::Format(format!("trailing bytes after {} payload", self.what))),
        }
    }
}

pub fn write_sph(mut w: impl Write, signal: &SphericalSignal, dtype: Dtype) -> Result<()> {
    w.write_all(SPH_MAGIC)?;
    w.write_all(&signal.bandwidth().get().to_le_bytes())?;
    w.write_all(&(signal.channels() as u32).to_le_bytes())?;
    w.write_all(&[dtype.code()])?;
    for &v in signal.values() {
        match dtype {
            Dtype::F32 => w.write_all(&(v as f32).to_le_bytes())?,
            Dtype::F64 => w.write_all(&v.to_le_bytes())?,
        }
    }
    Ok(())
}

pub fn read_sph(r: impl Read) -> Result<SphericalSignal> {
    let mut r = Reader { inner: r, what: "SPH1" };
    r.magic(SPH_MAGIC)?;
    let b = r.bandwidth()?;
    let channels = r.u32()? as usize;
    if channels == 0 {
        return Err(Error::Format("SPH1 file with zero channels".into()));
    }
    let dtype = r.u8()?;
    let n = channels * b.samples();
    let values = match dtype {
        0 => (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?,
        1 => (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?,
        d => return Err(Error::Format(format!("unknown SPH1 dtype {d}"))),
    };
    r.finish()?;
    SphericalSignal::from_values(b, channels, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_spec(mut w: impl Write, coeffs: &SpectralCoeffs) -> Result<()> {
    w.write_all(SPEC_MAGIC)?;
    w.write_all(&coeffs.bandwidth().get().to_le_bytes())?;
    w.write_all(&(coeffs.channels() as u32).to_le_bytes())?;
    w.write_all(&[coeffs.real_origin() as u8])?;
    let b = coeffs.bandwidth().degrees();
    for c in 0..coeffs.channels() {
        for l in 0..b {
            let lo = if coeffs.real_origin() { 0 } else { -(l as i64) };
            for m in lo..=l as i64 {
                let v = coeffs.get(c, l, m);
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_spec(r: impl Read) -> Result<SpectralCoeffs> {
    let mut r = Reader { inner: r, what: "SPEC" };
    r.magic(SPEC_MAGIC)?;
    let b = r.bandwidth()?;
    let channels = r.u32()? as usize;
    if channels == 0 {
        return Err(Error::Format("SPEC file with zero channels".into()));
    }
    let real_origin = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(Error::Format(format!("bad real_origin flag {v}"))),
    };
    let nb = b.degrees();
    let mut data = vec![Complex64::new(0.0, 0.0); channels * nb * nb];
    for c in 0..channels {
        let ch = &mut data[c * nb * nb..(c + 1) * nb * nb];
        for l in 0..nb {
            let lo = if real_origin { 0 } else { -(l as i64) };
            for m in lo..=l as i64 {
                let v = Complex64::new(r.f64()?, r.f64()?);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::Format("non-finite coefficient".into()));
                }
                ch[coeff_index(l, m)] = v;
                if real_origin && m > 0 {
                    let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                    ch[coeff_index(l, -m)] = v.conj() * s;
                }
            }
        }
    }
    r.finish()?;
    let mut coeffs = SpectralCoeffs::from_coeffs(b, channels, data, real_origin)?;
    if real_origin {
        coeffs.enforce_real_symmetry();
    }
    Ok(coeffs)
}

fn write_tensor(w: &mut impl Write, name: &str, shape: &[usize], data: &[f64]) -> Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Names under which ADAM state is stored next to the parameters.
const ADAM_STEP: &str = "adam.step";
const ADAM_M: &str = "adam.m/";
const ADAM_V: &str = "adam.v/";

pub fn write_ckpt(mut w: impl Write, params: &ParameterStore) -> Result<()> {
    let mut entries: Vec<(String, Vec<usize>, Vec<f64>)> = params
        .tensors()
        .iter()
        .map(|(k, t)| (k.clone(), t.shape.clone(), t.data.clone()))
        .collect();
    if params.adam_step() > 0 {
        entries.push((ADAM_STEP.into(), vec![1], vec![params.adam_step() as f64]));
        for (k, t) in params.tensors() {
            if let Some((m, v)) = params.adam_moments(k) {
                entries.push((format!("{ADAM_M}{k}"), t.shape.clone(), m.to_vec()));
                entries.push((format!("{ADAM_V}{k}"), t.shape.clone(), v.to_vec()));
            }
        }
    }
    w.write_all(CKPT_MAGIC)?;
    w.write_all(&CKPT_VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, shape, data) in &entries {
        write_tensor(&mut w, name, shape, data)?;
    }
    Ok(())
}

pub fn read_ckpt(r: impl Read) -> Result<ParameterStore> {
    let mut r = Reader { inner: r, what: "CKPT" };
    r.magic(CKPT_MAGIC)?;
    let version = r.u32()?;
    if version != CKPT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()?;
    let mut store = ParameterStore::default();
    let mut step = 0;
    let (mut ms, mut vs) = (BTreeMap::new(), BTreeMap::new());
    for _ in 0..count {
        let len = r.u32()? as usize;
        if len > 4096 {
            return Err(Error::Format(format!("tensor name of {len} bytes")));
        }
        let mut name = vec![0u8; len];
        r.inner.read_exact(&mut name).map_err(|_| Error::Format("truncated CKPT file".into()))?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let ndim = r.u32()? as usize;
        if ndim > 8 {
            return Err(Error::Format(format!("tensor {name} has {ndim} dimensions")));
        }
        let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
        if let Some(k) = name.strip_prefix(ADAM_M) {
            ms.insert(k.to_string(), data);
        } else if let Some(k) = name.strip_prefix(ADAM_V) {
            vs.insert(k.to_string(), data);
        } else if name == ADAM_STEP {
            step = data.first().copied().unwrap_or(0.0) as u64;
        } else {
            store.insert(name, Tensor { shape, data });
        }
    }
    r.finish()?;
    store.set_adam_state(step, ms, vs);
    Ok(store)
}

pub fn save_sph(path: impl AsRef<Path>, signal: &SphericalSignal, dtype: Dtype) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_sph(&mut w, signal, dtype)?;
    w.flush()?;
    Ok(())
}

pub fn load_sph(path: impl AsRef<Path>) -> Result<SphericalSignal> {
    read_sph(BufReader::new(File::open(path)?))
}

pub fn save_spec(path: impl AsRef<Path>, coeffs: &SpectralCoeffs) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_spec(&mut w, coeffs)?;
    w.flush()?;
    Ok(())
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<SpectralCoeffs> {
    read_spec(BufReader::new(File::open(path)?))
}

pub fn write_checkpoint(path: impl AsRef<Path>, params: &ParameterStore) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ckpt(&mut w, params)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ParameterStore> {
    read_ckpt(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;
    use crate::synth::{random_bandlimited_signal, random_real_coeffs};

    fn bw(b: u32) -> Bandwidth {
        Bandwidth::new(b).unwrap()
    }

    #[test]
    fn sph_round_trip() {
        let s = random_bandlimited_signal(bw(4), 2, 1);
        let mut buf = Vec::new();
        write_sph(&mut buf, &s, Dtype::F64).unwrap();
        assert_eq!(buf.len(), 13 + 2 * 64 * 8);
        assert_eq!(&buf[..4], b"SPH1");
        assert_eq!(read_sph(&buf[..]).unwrap(), s);
        let mut small = Vec::new();
        write_sph(&mut small, &s, Dtype::F32).unwrap();
        assert_eq!(small.len(), 13 + 2 * 64 * 4);
        assert!(read_sph(&small[..]).unwrap().max_abs_diff(&s) < 1e-6);
    }

    #[test]
    fn sph_rejects_corruption() {
        let s = random_bandlimited_signal(bw(2), 1, 1);
        let mut buf = Vec::new();
        write_sph(&mut buf, &s, Dtype::F64).unwrap();
        assert!(matches!(read_sph(&buf[..buf.len() - 1]), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_sph(&bad[..]), Err(Error::Format(_))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_sph(&extra[..]).is_err());
        let mut dtype = buf;
        dtype[12] = 7;
        assert!(read_sph(&dtype[..]).is_err());
    }

    #[test]
    fn spec_round_trip_both_layouts() {
        let c = random_real_coeffs(bw(5), 2, 3);
        let mut buf = Vec::new();
        write_spec(&mut buf, &c).unwrap();
        assert_eq!(buf.len(), 13 + 2 * 15 * 16);
        assert_eq!(read_spec(&buf[..]).unwrap(), c);
        let mut full = c.clone();
        full.set_real_origin(false);
        full.set(0, 1, -1, Complex64::new(0.25, 9.0));
        let mut buf = Vec::new();
        write_spec(&mut buf, &full).unwrap();
        assert_eq!(buf.len(), 13 + 2 * 25 * 16);
        assert_eq!(read_spec(&buf[..]).unwrap(), full);
        assert!(read_spec(&buf[..buf.len() - 8]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = NetworkConfig::toy(bw(8), 1, 3);
        let p = ParameterStore::init(&cfg, 3).unwrap();
        let mut buf = Vec::new();
        write_ckpt(&mut buf, &p).unwrap();
        let q = read_ckpt(&buf[..]).unwrap();
        q.check(&cfg).unwrap();
        for (name, t) in p.tensors() {
            let u = q.get(name).unwrap();
            assert_eq!(u.shape, t.shape);
            for (a, b) in t.data.iter().zip(&u.data) {
                assert_eq!(*b, *a as f32 as f64);
            }
        }
        assert!(read_ckpt(&buf[..buf.len() - 2]).is_err());
    }
}
