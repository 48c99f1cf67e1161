//! `SCKP` checkpoints: magic, version `u8`, a `u32`-length-prefixed UTF-8
//! manifest, then one little-endian `f64` blob.
//!
//! Manifest lines are `#config <json>`, `#meta <json>`, then one line per
//! layer: `index kind shape offset bytes`. Filter banks store their full
//! spectra as interleaved `re, im` (shape `out x in x coeffs`); Linear
//! layers store weights then biases (shape `out x in`).

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{LayerSpec, ModelConfig};
use super::model::{Layer, Model};
use crate::conv::FilterBank;
use crate::error::{Error, Result};
use crate::gft::Domain;
use crate::io::{put_f64s, ByteReader};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SCKP";
pub const CHECKPOINT_VERSION: u8 = 1;

/// Largest accepted deviation from real-signal symmetry in stored filters.
const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub meta: TrainingMeta,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub index: usize,
    pub kind: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub bytes: usize,
}

fn layer_blob(layer: &Layer) -> (Vec<usize>, Vec<f64>) {
    match layer {
        Layer::S2Conv(f) | Layer::So3Conv(f) => (
            vec![f.out_channels(), f.in_channels(), f.pair_len()],
            f.coeffs().iter().flat_map(|z| [z.re, z.im]).collect(),
        ),
        Layer::Linear {
            dim_in,
            dim_out,
            weights,
            bias,
        } => (vec![*dim_out, *dim_in], weights.iter().chain(bias).copied().collect()),
        Layer::Relu | Layer::Softmax => (Vec::new(), Vec::new()),
    }
}

fn shape_text(shape: &[usize]) -> String {
    if shape.is_empty() {
        "-".into()
    } else {
        shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
    }
}

impl Checkpoint {
    pub fn new(model: Model, meta: TrainingMeta) -> Self {
        Checkpoint { model, meta }
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let config = serde_json::to_string(self.model.config()).map_err(|e| Error::Config(e.to_string()))?;
        let meta = serde_json::to_string(&self.meta).map_err(|e| Error::Config(e.to_string()))?;
        let mut manifest = format!("#config {config}\n#meta {meta}\n");
        let mut blob = Vec::new();
        for (i, (layer, spec)) in self.model.layers().iter().zip(&self.model.config().layers).enumerate() {
            let (shape, values) = layer_blob(layer);
            manifest.push_str(&format!(
                "{i} {} {} {} {}\n",
                spec.name(),
                shape_text(&shape),
                blob.len() * 8,
                values.len() * 8
            ));
            blob.extend(values);
        }
        w.write_all(&CHECKPOINT_MAGIC)?;
        w.write_all(&[CHECKPOINT_VERSION])?;
        w.write_all(&(manifest.len() as u32).to_le_bytes())?;
        w.write_all(manifest.as_bytes())?;
        put_f64s(w, &blob)
    }

    pub fn read<R: Read>(r: &mut ByteReader<R>) -> Result<Self> {
        r.magic(CHECKPOINT_MAGIC)?;
        let at = r.offset();
        let version = r.u8()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                offset: at,
                reason: format!("unsupported version {version}"),
            });
        }
        let len = r.u32_le()? as usize;
        let manifest_at = r.offset();
        let mut text = vec![0u8; len];
        r.read_exact(&mut text)?;
        let fmt_err = |reason: String| Error::Format {
            offset: manifest_at,
            reason,
        };
        let text = String::from_utf8(text).map_err(|_| fmt_err("manifest is not UTF-8".into()))?;
        let (config, meta, entries) = parse_manifest(&text).map_err(fmt_err)?;
        let blob_at = r.offset();
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        let total: usize = entries.iter().map(|e| e.bytes).sum();
        if rest.len() != total {
            return Err(Error::Format {
                offset: blob_at,
                reason: format!("blob has {} bytes, manifest describes {total}", rest.len()),
            });
        }
        let values: Vec<f64> = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut layers = Vec::with_capacity(entries.len());
        for (entry, spec) in entries.iter().zip(&config.layers) {
            let v = &values[entry.offset / 8..(entry.offset + entry.bytes) / 8];
            let bad = |reason: String| Error::Format {
                offset: blob_at + entry.offset as u64,
                reason,
            };
            layers.push(build_layer(spec, &entry.shape, v).map_err(|e| bad(e.to_string()))?);
        }
        let model = Model::from_layers(config, layers)?;
        Ok(Checkpoint { model, meta })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = crate::io::create(path.as_ref())?;
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = crate::io::open(path.as_ref())?;
        Checkpoint::read(&mut r)
    }
}

impl<R: Read> ByteReader<R> {
    fn read_to_end(&mut self, out: &mut Vec<u8>) -> Result<()> {
        let mut chunk = [0u8; 8];
        loop {
            match self.read_exact(&mut chunk) {
                Ok(()) => out.extend_from_slice(&chunk),
                Err(Error::Truncated { needed, .. }) => {
                    out.extend_from_slice(&chunk[..8 - needed as usize]);
                    return Ok(());
                }
                Err(e) => return Err(e),
            }
        }
    }
}

fn parse_manifest(text: &str) -> std::result::Result<(ModelConfig, TrainingMeta, Vec<ManifestEntry>), String> {
    let mut config = None;
    let mut meta = None;
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if let Some(json) = line.strip_prefix("#config ") {
            config = Some(serde_json::from_str::<ModelConfig>(json).map_err(|e| format!("line {}: {e}", n + 1))?);
        } else if let Some(json) = line.strip_prefix("#meta ") {
            meta = Some(serde_json::from_str::<TrainingMeta>(json).map_err(|e| format!("line {}: {e}", n + 1))?);
        } else if !line.is_empty() {
            let parts: Vec<&str> = line.split(' ').collect();
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| format!("line {}: bad number `{s}`", n + 1))
            };
            if parts.len() != 5 {
                return Err(format!("line {}: expected 5 fields", n + 1));
            }
            let shape = if parts[2] == "-" {
                Vec::new()
            } else {
                parts[2].split('x').map(num).collect::<std::result::Result<_, _>>()?
            };
            entries.push(ManifestEntry {
                index: num(parts[0])?,
                kind: parts[1].to_string(),
                shape,
                offset: num(parts[3])?,
                bytes: num(parts[4])?,
            });
        }
    }
    let config = config.ok_or("missing #config line")?;
    let meta = meta.ok_or("missing #meta line")?;
    if entries.len() != config.layers.len() {
        return Err(format!(
            "{} layer entries for {} layers",
            entries.len(),
            config.layers.len()
        ));
    }
    let mut next = 0;
    for (i, (e, spec)) in entries.iter().zip(&config.layers).enumerate() {
        if e.index != i || e.kind != spec.name() {
            return Err(format!(
                "entry {i} is `{} {}`, expected `{i} {}`",
                e.index,
                e.kind,
                spec.name()
            ));
        }
        if e.offset != next || e.bytes % 8 != 0 {
            return Err(format!("entry {i} does not continue the blob at byte {next}"));
        }
        next += e.bytes;
    }
    Ok((config, meta, entries))
}

fn build_layer(spec: &LayerSpec, shape: &[usize], v: &[f64]) -> Result<Layer> {
    let complex = |v: &[f64]| {
        v.chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect::<Vec<_>>()
    };
    let check_shape = |expected: Vec<usize>| {
        let count: usize = expected.iter().product::<usize>() * if expected.len() == 3 { 2 } else { 1 };
        if shape != expected.as_slice() {
            Err(Error::Shape(format!("shape {shape:?}, expected {expected:?}")))
        } else if count != v.len() && !expected.is_empty() {
            Err(Error::Shape(format!("{} values for shape {expected:?}", v.len())))
        } else {
            Ok(())
        }
    };
    match *spec {
        LayerSpec::S2Conv { b_out, k_in, k_out, .. } => {
            check_shape(vec![k_out, k_in, b_out * b_out])?;
            let bank = FilterBank::from_vec(Domain::S2, b_out, k_in, k_out, complex(v))?;
            if bank.to_s2()?.real_symmetry_error() > SYMMETRY_TOLERANCE {
                return Err(Error::Shape("S² filters are not real".into()));
            }
            Ok(Layer::S2Conv(bank))
        }
        LayerSpec::So3Conv { b_out, k_in, k_out, .. } => {
            check_shape(vec![k_out, k_in, crate::harmonics::so3_coeff_count(b_out)])?;
            let bank = FilterBank::from_vec(Domain::SO3, b_out, k_in, k_out, complex(v))?;
            if bank.to_so3()?.real_symmetry_error() > SYMMETRY_TOLERANCE {
                return Err(Error::Shape("SO(3) filters are not real".into()));
            }
            Ok(Layer::So3Conv(bank))
        }
        LayerSpec::Linear { dim_in, dim_out } => {
            if shape != [dim_out, dim_in] || v.len() != dim_out * dim_in + dim_out {
                return Err(Error::Shape(format!("linear shape {shape:?} with {} values", v.len())));
            }
            Ok(Layer::Linear {
                dim_in,
                dim_out,
                weights: v[..dim_in * dim_out].to_vec(),
                bias: v[dim_in * dim_out..].to_vec(),
            })
        }
        LayerSpec::Relu | LayerSpec::Softmax => {
            check_shape(Vec::new())?;
            if !v.is_empty() {
                return Err(Error::Shape("parameterless layer with data".into()));
            }
            Ok(if matches!(spec, LayerSpec::Relu) {
                Layer::Relu
            } else {
                Layer::Softmax
            })
        }
    }
}
