//! Binary containers for signals (`SSIG`) and spectra (`SSPC`).
//!
//! Layout: 4-byte magic, version `u8 = 1`, domain tag `u8` (1 = S², 2 =
//! SO(3)), bandwidth `u16`, channels `u16`, then little-endian `f64` values in
//! storage order (spectra as interleaved `re, im`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gft::{Domain, S2Signal, S2Spectrum, SO3Signal, SO3Spectrum};
use crate::harmonics::so3_coeff_count;

pub const SIGNAL_MAGIC: [u8; 4] = *b"SSIG";
pub const SPECTRUM_MAGIC: [u8; 4] = *b"SSPC";
pub const VERSION: u8 = 1;

/// A signal on either domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Signal {
    S2(S2Signal),
    SO3(SO3Signal),
}

/// A spectrum on either domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Spectrum {
    S2(S2Spectrum),
    SO3(SO3Spectrum),
}

impl Signal {
    pub fn domain(&self) -> Domain {
        match self {
            Signal::S2(_) => Domain::S2,
            Signal::SO3(_) => Domain::SO3,
        }
    }

    pub fn bandwidth(&self) -> usize {
        match self {
            Signal::S2(s) => s.bandwidth(),
            Signal::SO3(s) => s.bandwidth(),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            Signal::S2(s) => s.channels(),
            Signal::SO3(s) => s.channels(),
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Signal::S2(s) => s.values(),
            Signal::SO3(s) => s.values(),
        }
    }
}

impl Spectrum {
    pub fn domain(&self) -> Domain {
        match self {
            Spectrum::S2(_) => Domain::S2,
            Spectrum::SO3(_) => Domain::SO3,
        }
    }

    pub fn bandwidth(&self) -> usize {
        match self {
            Spectrum::S2(s) => s.bandwidth(),
            Spectrum::SO3(s) => s.bandwidth(),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            Spectrum::S2(s) => s.channels(),
            Spectrum::SO3(s) => s.channels(),
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        match self {
            Spectrum::S2(s) => s.coeffs(),
            Spectrum::SO3(s) => s.coeffs(),
        }
    }
}

/// Reader that tracks its byte offset so format errors can say where.
pub struct ByteReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> ByteReader<R> {
    pub fn new(inner: R) -> Self {
        ByteReader { inner, offset: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) => {
                    return Err(Error::Truncated {
                        offset: self.offset + filled as u64,
                        needed: (buf.len() - filled) as u64,
                    })
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.read_exact(&mut buf)?;
        Ok(buf)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u16_le(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u32_be(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub fn f64_le(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; n * 8];
        self.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let at = self.offset;
        let found = self.array::<4>()?;
        if found != expected {
            return Err(Error::BadMagic {
                offset: at,
                expected: u32::from_be_bytes(expected),
                found: u32::from_be_bytes(found),
            });
        }
        Ok(())
    }

    /// Fails unless the stream is exhausted.
    pub fn expect_end(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        loop {
            match self.inner.read(&mut probe) {
                Ok(0) => return Ok(()),
                Ok(_) => {
                    return Err(Error::Format {
                        offset: self.offset,
                        reason: "trailing bytes".into(),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn format(&self, at: u64, reason: impl Into<String>) -> Error {
        Error::Format {
            offset: at,
            reason: reason.into(),
        }
    }
}

pub(crate) fn put_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn header<W: Write>(w: &mut W, magic: [u8; 4], domain: Domain, bandwidth: usize, channels: usize) -> Result<()> {
    let b = u16::try_from(bandwidth).map_err(|_| Error::BandwidthOutOfRange(bandwidth))?;
    let k = u16::try_from(channels).map_err(|_| Error::Shape(format!("{channels} channels exceed u16")))?;
    w.write_all(&magic)?;
    w.write_all(&[VERSION, domain.tag()])?;
    w.write_all(&b.to_le_bytes())?;
    w.write_all(&k.to_le_bytes())?;
    Ok(())
}

fn read_header<R: Read>(r: &mut ByteReader<R>, magic: [u8; 4]) -> Result<(Domain, usize, usize)> {
    r.magic(magic)?;
    let at = r.offset();
    let version = r.u8()?;
    if version != VERSION {
        return Err(r.format(at, format!("unsupported version {version}")));
    }
    let at = r.offset();
    let tag = r.u8()?;
    let domain = Domain::from_tag(tag).ok_or_else(|| r.format(at, format!("unknown domain tag {tag}")))?;
    let at = r.offset();
    let b = r.u16_le()? as usize;
    if b == 0 || b > crate::gft::MAX_BANDWIDTH {
        return Err(r.format(at, format!("bandwidth {b} out of range")));
    }
    let k = r.u16_le()? as usize;
    Ok((domain, b, k))
}

pub fn write_signal<W: Write>(w: &mut W, signal: &Signal) -> Result<()> {
    header(w, SIGNAL_MAGIC, signal.domain(), signal.bandwidth(), signal.channels())?;
    put_f64s(w, signal.values())
}

/// Reads one signal record, leaving the reader just past it.
pub fn read_signal<R: Read>(r: &mut ByteReader<R>) -> Result<Signal> {
    let (domain, b, k) = read_header(r, SIGNAL_MAGIC)?;
    let at = r.offset();
    let n = 2 * b;
    let wrap = |e: Error| match e {
        Error::Shape(reason) => Error::Format { offset: at, reason },
        e => e,
    };
    match domain {
        Domain::S2 => {
            let v = r.f64s(k * n * n)?;
            S2Signal::from_vec(b, k, v).map(Signal::S2).map_err(wrap)
        }
        Domain::SO3 => {
            let v = r.f64s(k * n * n * n)?;
            SO3Signal::from_vec(b, k, v).map(Signal::SO3).map_err(wrap)
        }
    }
}

pub fn write_spectrum<W: Write>(w: &mut W, spectrum: &Spectrum) -> Result<()> {
    header(
        w,
        SPECTRUM_MAGIC,
        spectrum.domain(),
        spectrum.bandwidth(),
        spectrum.channels(),
    )?;
    let flat: Vec<f64> = spectrum.coeffs().iter().flat_map(|z| [z.re, z.im]).collect();
    put_f64s(w, &flat)
}

pub fn read_spectrum<R: Read>(r: &mut ByteReader<R>) -> Result<Spectrum> {
    let (domain, b, k) = read_header(r, SPECTRUM_MAGIC)?;
    let per = match domain {
        Domain::S2 => b * b,
        Domain::SO3 => so3_coeff_count(b),
    };
    let at = r.offset();
    let flat = r.f64s(2 * k * per)?;
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(r.format(at, "non-finite coefficient"));
    }
    let coeffs: Vec<Complex64> = flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    Ok(match domain {
        Domain::S2 => Spectrum::S2(S2Spectrum::from_vec(b, k, coeffs)?),
        Domain::SO3 => Spectrum::SO3(SO3Spectrum::from_vec(b, k, coeffs)?),
    })
}

pub(crate) fn open(path: &Path) -> Result<ByteReader<BufReader<File>>> {
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    Ok(ByteReader::new(BufReader::new(f)))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    Ok(BufWriter::new(f))
}

pub fn save_signal(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    let mut w = create(path.as_ref())?;
    write_signal(&mut w, signal)?;
    w.flush()?;
    Ok(())
}

pub fn load_signal(path: impl AsRef<Path>) -> Result<Signal> {
    let mut r = open(path.as_ref())?;
    let s = read_signal(&mut r)?;
    r.expect_end()?;
    Ok(s)
}

pub fn save_spectrum(path: impl AsRef<Path>, spectrum: &Spectrum) -> Result<()> {
    let mut w = create(path.as_ref())?;
    write_spectrum(&mut w, spectrum)?;
    w.flush()?;
    Ok(())
}

pub fn load_spectrum(path: impl AsRef<Path>) -> Result<Spectrum> {
    let mut r = open(path.as_ref())?;
    let s = read_spectrum(&mut r)?;
    r.expect_end()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn signal_round_trip() {
        let s = Signal::S2(S2Signal::from_fn(3, 2, |c, t, p| c as f64 + t * p).unwrap());
        let mut buf = Vec::new();
        write_signal(&mut buf, &s).unwrap();
        assert_eq!(&buf[..4], b"SSIG");
        assert_eq!(buf.len(), 10 + 2 * 36 * 8);
        let back = read_signal(&mut ByteReader::new(&buf[..])).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn spectrum_round_trip() {
        let s = Spectrum::SO3(SO3Spectrum::random_real(3, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap());
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &s).unwrap();
        assert_eq!(buf[5], 2);
        let back = read_spectrum(&mut ByteReader::new(&buf[..])).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn header_bytes() {
        let s = Signal::SO3(SO3Signal::zeros(2, 3).unwrap());
        let mut buf = Vec::new();
        write_signal(&mut buf, &s).unwrap();
        assert_eq!(&buf[..10], &[b'S', b'S', b'I', b'G', 1, 2, 2, 0, 3, 0]);
    }

    #[test]
    fn errors_report_offsets() {
        let s = Signal::S2(S2Signal::zeros(2, 1).unwrap());
        let mut buf = Vec::new();
        write_signal(&mut buf, &s).unwrap();
        let short = &buf[..buf.len() - 3];
        match read_signal(&mut ByteReader::new(short)) {
            Err(Error::Truncated { offset, needed }) => assert_eq!((offset, needed), (buf.len() as u64 - 3, 3)),
            other => panic!("{other:?}"),
        }
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_signal(&mut ByteReader::new(&bad[..])),
            Err(Error::BadMagic { offset: 0, .. })
        ));
        let mut bad = buf.clone();
        bad[5] = 9;
        assert!(matches!(
            read_signal(&mut ByteReader::new(&bad[..])),
            Err(Error::Format { offset: 5, .. })
        ));
        assert!(matches!(
            read_spectrum(&mut ByteReader::new(&buf[..])),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn files_and_trailing_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ssig");
        let s = Signal::S2(S2Signal::from_fn(2, 1, |_, t, _| t).unwrap());
        save_signal(&p, &s).unwrap();
        assert_eq!(load_signal(&p).unwrap(), s);
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.push(0);
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(load_signal(&p), Err(Error::Format { .. })));
        assert!(matches!(
            load_signal(dir.path().join("missing")),
            Err(Error::File { .. })
        ));
    }
}
