//! MNIST ingestion and spherical MNIST construction.
//!
//! Digits are projected onto the northern cap: image coordinates in
//! `[-1, 1]²` map to colatitude `β = r π/2` and longitude `φ = atan2(y, x)`,
//! sampled bilinearly. Stored examples are band-limited by a forward and
//! inverse transform, then optionally rotated exactly in the spectrum.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gft::{S2Grid, S2Signal, S2Transform};
use crate::io::{read_signal, write_signal, ByteReader, Signal};
use crate::rotation::rotate_s2_spectrum;
use crate::Rotation;

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const DATASET_MAGIC: [u8; 4] = *b"SMNI";
pub const DATASET_VERSION: u8 = 1;

/// Smallest bandwidth at which a projected digit is resolvable.
pub const MIN_PROJECTION_BANDWIDTH: usize = 8;

pub type Image = [u8; IMAGE_PIXELS];

/// Paths of an IDX image file and its label file.
#[derive(Clone, Debug)]
pub struct MnistPaths {
    pub images: PathBuf,
    pub labels: PathBuf,
}

impl MnistPaths {
    /// `<prefix>-images-idx3-ubyte[.gz]` and `<prefix>-labels-idx1-ubyte[.gz]`
    /// under `dir`, preferring uncompressed files.
    pub fn in_dir(dir: impl AsRef<Path>, prefix: &str) -> Self {
        let pick = |stem: String| {
            let raw = dir.as_ref().join(&stem);
            if raw.exists() {
                raw
            } else {
                dir.as_ref().join(stem + ".gz")
            }
        };
        MnistPaths {
            images: pick(format!("{prefix}-images-idx3-ubyte")),
            labels: pick(format!("{prefix}-labels-idx1-ubyte")),
        }
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut raw))
        .map_err(|e| Error::file(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::file(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn idx_magic(r: &mut ByteReader<&[u8]>, expected: u32) -> Result<()> {
    let found = r.u32_be()?;
    if found != expected {
        return Err(Error::BadMagic {
            offset: 0,
            expected,
            found,
        });
    }
    Ok(())
}

/// Parses a decompressed IDX3 image file of 28×28 images.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Image>> {
    let mut r = ByteReader::new(bytes);
    idx_magic(&mut r, IMAGES_MAGIC)?;
    let count = r.u32_be()? as usize;
    for _ in 0..2 {
        let at = r.offset();
        let side = r.u32_be()? as usize;
        if side != IMAGE_SIDE {
            return Err(Error::Format {
                offset: at,
                reason: format!("image side {side}, expected {IMAGE_SIDE}"),
            });
        }
    }
    let mut images = Vec::with_capacity(count);
    for _ in 0..count {
        images.push(r.array::<IMAGE_PIXELS>()?);
    }
    r.expect_end()?;
    Ok(images)
}

/// Parses a decompressed IDX1 label file; labels must lie in `0..=9`.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = ByteReader::new(bytes);
    idx_magic(&mut r, LABELS_MAGIC)?;
    let count = r.u32_be()? as usize;
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.offset();
        let label = r.u8()?;
        if label > 9 {
            return Err(Error::Format {
                offset: at,
                reason: format!("label {label} out of range"),
            });
        }
        labels.push(label);
    }
    r.expect_end()?;
    Ok(labels)
}

/// Loads an IDX image/label pair; gzip-compressed files are accepted.
pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Vec<(Image, u8)>> {
    let images = parse_idx_images(&read_maybe_gz(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read_maybe_gz(labels_path.as_ref())?)?;
    if images.len() != labels.len() {
        return Err(Error::CountMismatch {
            images: images.len() as u32,
            labels: labels.len() as u32,
        });
    }
    Ok(images.into_iter().zip(labels).collect())
}

fn bilinear(image: &Image, row: f64, col: f64) -> f64 {
    let max = (IMAGE_SIDE - 1) as f64;
    let (row, col) = (row.clamp(0.0, max), col.clamp(0.0, max));
    let (r0, c0) = (row.floor() as usize, col.floor() as usize);
    let (r1, c1) = ((r0 + 1).min(IMAGE_SIDE - 1), (c0 + 1).min(IMAGE_SIDE - 1));
    let (fr, fc) = (row - r0 as f64, col - c0 as f64);
    let px = |r: usize, c: usize| image[r * IMAGE_SIDE + c] as f64;
    let top = (1.0 - fc) * px(r0, c0) + fc * px(r0, c1);
    let bottom = (1.0 - fc) * px(r1, c0) + fc * px(r1, c1);
    (1.0 - fr) * top + fr * bottom
}

/// Samples a digit on the northern cap of the `2b × 2b` grid, pixel values
/// scaled to `[0, 1]`; the southern hemisphere is zero.
pub fn project_to_sphere(image: &Image, b: usize) -> Result<S2Signal> {
    if b < MIN_PROJECTION_BANDWIDTH {
        return Err(Error::domain(format!(
            "projection needs bandwidth >= {MIN_PROJECTION_BANDWIDTH}, got {b}"
        )));
    }
    let half = ((IMAGE_SIDE - 1) as f64) / 2.0;
    S2Signal::from_fn(b, 1, |_, beta, phi| {
        if beta > std::f64::consts::FRAC_PI_2 {
            return 0.0;
        }
        let r = beta / std::f64::consts::FRAC_PI_2;
        let (x, y) = (r * phi.cos(), r * phi.sin());
        bilinear(image, (1.0 - y) * half, (x + 1.0) * half) / 255.0
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSphericalExample {
    pub signal: S2Signal,
    pub label: u8,
    pub rotation_applied: Option<Rotation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphericalDataset {
    pub bandwidth: usize,
    pub examples: Vec<LabeledSphericalExample>,
}

/// Projects, band-limits and optionally rotates every digit. Rotations are
/// drawn in example order from a generator seeded by `seed`.
pub fn build_examples(digits: &[(Image, u8)], b: usize, rotate: bool, seed: u64) -> Result<SphericalDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotations: Vec<Option<Rotation>> = digits
        .iter()
        .map(|_| rotate.then(|| Rotation::random(&mut rng)))
        .collect();
    let transform = S2Transform::new(b)?;
    let examples = digits
        .par_iter()
        .zip(&rotations)
        .map(|((image, label), rotation)| {
            let raw = project_to_sphere(image, b)?;
            let mut spectrum = transform.forward(&raw)?;
            if let Some(q) = rotation {
                spectrum = rotate_s2_spectrum(&spectrum, q)?;
            }
            Ok(LabeledSphericalExample {
                signal: transform.inverse(&spectrum)?,
                label: *label,
                rotation_applied: *rotation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SphericalDataset { bandwidth: b, examples })
}

/// Loads MNIST, keeps the first `limit` digits and writes the spherical
/// dataset to `out_path`.
pub fn build_dataset(
    paths: &MnistPaths,
    b: usize,
    rotate: bool,
    seed: u64,
    limit: Option<usize>,
    out_path: impl AsRef<Path>,
) -> Result<SphericalDataset> {
    let mut digits = load_mnist_idx(&paths.images, &paths.labels)?;
    if let Some(n) = limit {
        digits.truncate(n);
    }
    let dataset = build_examples(&digits, b, rotate, seed)?;
    dataset.save(out_path)?;
    Ok(dataset)
}

impl SphericalDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn label_counts(&self) -> [usize; 10] {
        let mut counts = [0; 10];
        for e in &self.examples {
            counts[e.label as usize] += 1;
        }
        counts
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let b = u16::try_from(self.bandwidth).map_err(|_| Error::BandwidthOutOfRange(self.bandwidth))?;
        w.write_all(&DATASET_MAGIC)?;
        w.write_all(&[DATASET_VERSION])?;
        w.write_all(&b.to_le_bytes())?;
        w.write_all(&(self.examples.len() as u32).to_le_bytes())?;
        for e in &self.examples {
            w.write_all(&[e.label])?;
            match e.rotation_applied {
                Some(q) => {
                    w.write_all(&[1])?;
                    let (a, be, g) = q.angles();
                    crate::io::put_f64s(w, &[a, be, g])?;
                }
                None => w.write_all(&[0])?,
            }
            write_signal(w, &Signal::S2(e.signal.clone()))?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut ByteReader<R>) -> Result<Self> {
        r.magic(DATASET_MAGIC)?;
        let at = r.offset();
        let version = r.u8()?;
        if version != DATASET_VERSION {
            return Err(Error::Format {
                offset: at,
                reason: format!("unsupported version {version}"),
            });
        }
        let bandwidth = r.u16_le()? as usize;
        let count = r.u32_le()? as usize;
        let mut examples = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let at = r.offset();
            let label = r.u8()?;
            if label > 9 {
                return Err(Error::Format {
                    offset: at,
                    reason: format!("label {label} out of range"),
                });
            }
            let at = r.offset();
            let rotation_applied = match r.u8()? {
                0 => None,
                1 => {
                    let (a, be, g) = (r.f64_le()?, r.f64_le()?, r.f64_le()?);
                    Some(Rotation::new(a, be, g))
                }
                flag => {
                    return Err(Error::Format {
                        offset: at,
                        reason: format!("rotation flag {flag}"),
                    })
                }
            };
            let at = r.offset();
            let signal = match read_signal(r)? {
                Signal::S2(s) if s.bandwidth() == bandwidth && s.channels() == 1 => s,
                other => {
                    return Err(Error::Format {
                        offset: at,
                        reason: format!(
                            "expected one-channel S² signal at bandwidth {bandwidth}, found {:?} b={} K={}",
                            other.domain(),
                            other.bandwidth(),
                            other.channels()
                        ),
                    })
                }
            };
            examples.push(LabeledSphericalExample {
                signal,
                label,
                rotation_applied,
            });
        }
        r.expect_end()?;
        Ok(SphericalDataset { bandwidth, examples })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = crate::io::create(path.as_ref())?;
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = crate::io::open(path.as_ref())?;
        SphericalDataset::read(&mut r)
    }
}

/// Fraction of quadrature energy on the southern hemisphere.
pub fn southern_energy_fraction(signal: &S2Signal) -> f64 {
    let grid = S2Grid::new(signal.bandwidth()).expect("valid bandwidth");
    let n = grid.size();
    let mut south = 0.0;
    for (j, &t) in grid.thetas.iter().enumerate() {
        if t > std::f64::consts::FRAC_PI_2 {
            south += grid.weights[j] * signal.channel(0)[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>();
        }
    }
    let total = signal.energy();
    if total == 0.0 {
        0.0
    } else {
        south / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sha2::{Digest, Sha256};
    use std::f64::consts::FRAC_PI_2;

    fn data_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
    }

    fn idx_images(images: &[Image]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        v.extend_from_slice(&(images.len() as u32).to_be_bytes());
        v.extend_from_slice(&28u32.to_be_bytes());
        v.extend_from_slice(&28u32.to_be_bytes());
        for im in images {
            v.extend_from_slice(im);
        }
        v
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    #[test]
    fn label_header_and_values() {
        let labels = parse_idx_labels(&idx_labels(&[7, 0, 9])).unwrap();
        assert_eq!(labels, vec![7, 0, 9]);
        let mut big = LABELS_MAGIC.to_be_bytes().to_vec();
        big.extend_from_slice(&60000u32.to_be_bytes());
        big.extend(std::iter::repeat_n(3u8, 60000));
        assert_eq!(parse_idx_labels(&big).unwrap().len(), 60000);
    }

    #[test]
    fn distinct_errors_with_offsets() {
        let mut bad = idx_labels(&[1]);
        bad[3] = 0x03;
        assert!(matches!(
            parse_idx_labels(&bad),
            Err(Error::BadMagic {
                offset: 0,
                found: 0x803,
                ..
            })
        ));
        let short = idx_images(&[[0; IMAGE_PIXELS]; 2]);
        match parse_idx_images(&short[..short.len() - 10]) {
            Err(Error::Truncated { offset, needed }) => {
                assert_eq!(offset, short.len() as u64 - 10);
                assert_eq!(needed, 10);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_idx_labels(&idx_labels(&[3, 12])),
            Err(Error::Format { offset: 9, .. })
        ));

        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        std::fs::write(&ip, idx_images(&[[0; IMAGE_PIXELS]; 2])).unwrap();
        std::fs::write(&lp, idx_labels(&[1, 2, 3])).unwrap();
        assert!(matches!(
            load_mnist_idx(&ip, &lp),
            Err(Error::CountMismatch { images: 2, labels: 3 })
        ));
    }

    #[test]
    fn first_training_image_digest() {
        let paths = MnistPaths::in_dir(data_dir(), "train");
        let digits = load_mnist_idx(&paths.images, &paths.labels).unwrap();
        assert_eq!(digits.len(), 9000);
        let digest = Sha256::digest(digits[0].0);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, "8e6d2fb4994b915e991b5c50f99c2a9481d605e02ef97f20523e7c52f91b3e1a");
        assert_eq!(digits[0].1, 8);
    }

    #[test]
    fn projection_examples() {
        let zero = [0u8; IMAGE_PIXELS];
        assert!(project_to_sphere(&zero, 8).unwrap().values().iter().all(|v| *v == 0.0));
        assert!(project_to_sphere(&zero, 7).is_err());

        let full = [255u8; IMAGE_PIXELS];
        let s = project_to_sphere(&full, 10).unwrap();
        let grid = S2Grid::new(10).unwrap();
        for (j, &t) in grid.thetas.iter().enumerate() {
            for k in 0..grid.size() {
                let expect = if t < FRAC_PI_2 { 1.0 } else { 0.0 };
                assert_eq!(s.get(0, j, k), expect);
            }
        }

        let mut center = [0u8; IMAGE_PIXELS];
        for r in 12..16 {
            for c in 12..16 {
                center[r * IMAGE_SIDE + c] = 200;
            }
        }
        let s = project_to_sphere(&center, 10).unwrap();
        for k in 0..20 {
            assert!((s.get(0, 0, k) - 200.0 / 255.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_monotone_and_northern() {
        let paths = MnistPaths::in_dir(data_dir(), "t10k");
        let digits = load_mnist_idx(&paths.images, &paths.labels).unwrap();
        for (image, _) in digits.iter().take(20) {
            let s = project_to_sphere(image, 10).unwrap();
            assert_eq!(southern_energy_fraction(&s), 0.0);
            let brighter: Image = std::array::from_fn(|i| image[i].saturating_add(40));
            let t = project_to_sphere(&brighter, 10).unwrap();
            assert!(s.values().iter().zip(t.values()).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn dataset_build_is_deterministic_and_energy_preserving() {
        let paths = MnistPaths::in_dir(data_dir(), "t10k");
        let digits: Vec<_> = load_mnist_idx(&paths.images, &paths.labels)
            .unwrap()
            .into_iter()
            .take(30)
            .collect();
        let plain = build_examples(&digits, 8, false, 3).unwrap();
        assert!(plain.examples.iter().all(|e| e.rotation_applied.is_none()));
        let rotated = build_examples(&digits, 8, true, 3).unwrap();
        for (p, r) in plain.examples.iter().zip(&rotated.examples) {
            assert!(r.rotation_applied.is_some());
            let (ep, er) = (p.signal.energy(), r.signal.energy());
            assert!((ep - er).abs() < 1e-8 * ep);
        }
        let mut counts = [0; 10];
        digits.iter().for_each(|(_, l)| counts[*l as usize] += 1);
        assert_eq!(rotated.label_counts(), counts);

        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        rotated.save(&a).unwrap();
        build_examples(&digits, 8, true, 3).unwrap().save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let back = SphericalDataset::load(&a).unwrap();
        assert_eq!(back, rotated);
        let bytes = std::fs::read(&a).unwrap();
        assert_eq!(&bytes[..4], b"SMNI");
        assert_eq!(u32::from_le_bytes(bytes[7..11].try_into().unwrap()), 30);
    }
}
