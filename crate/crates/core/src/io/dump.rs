//! Gradient-dump file format: a JSON manifest plus raw little-endian f64
//! payloads, one train file and one validation file per block.
//!
//! Train file layout: example `i` of a `d x r` block occupies bytes
//! `[8*d*r*i, 8*d*r*(i+1))`, row-major. Validation files hold a single
//! averaged gradient of the same shape.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{BlockSpec, GradientDump};
use crate::fisher::GradientBlock;
use crate::linalg::DenseMatrix;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestBlock {
    pub name: String,
    pub d: usize,
    pub r: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DumpManifest {
    pub format_version: u32,
    pub n_examples: usize,
    pub blocks: Vec<ManifestBlock>,
    /// Block name -> path, relative to the manifest location.
    pub val_grad_files: BTreeMap<String, String>,
    pub train_grad_files: BTreeMap<String, String>,
    pub dtype: String,
    pub layout: String,
}

impl DumpManifest {
    fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported format_version {} (supported: {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.dtype != "f64le" {
            return Err(Error::Manifest(format!(
                "unsupported dtype '{}'",
                self.dtype
            )));
        }
        if self.layout != "row-major" {
            return Err(Error::Manifest(format!(
                "unsupported layout '{}'",
                self.layout
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for b in &self.blocks {
            if b.d == 0 || b.r == 0 {
                return Err(Error::Manifest(format!(
                    "block '{}' has zero dimension",
                    b.name
                )));
            }
            if !seen.insert(&b.name) {
                return Err(Error::Manifest(format!(
                    "duplicate block name '{}'",
                    b.name
                )));
            }
            if !self.val_grad_files.contains_key(&b.name) {
                return Err(Error::Manifest(format!(
                    "block '{}' missing val_grad_files entry",
                    b.name
                )));
            }
            if !self.train_grad_files.contains_key(&b.name) {
                return Err(Error::Manifest(format!(
                    "block '{}' missing train_grad_files entry",
                    b.name
                )));
            }
        }
        Ok(())
    }
}

fn read_f64le_file(path: &Path, expected_values: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    let expected_bytes = 8 * expected_values as u64;
    if bytes.len() as u64 != expected_bytes {
        return Err(Error::SizeMismatch {
            path: path.display().to_string(),
            expected: expected_bytes,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Writes a payload atomically: temp file in the same directory, then rename.
fn write_f64le_file(path: &Path, values: &[f64]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        let mut buf = Vec::with_capacity(values.len() * 8);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads and fully validates a dump: exact byte sizes, finite entries.
pub fn read_dump(manifest_path: &Path) -> Result<GradientDump> {
    let manifest: DumpManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    manifest.validate()?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let n = manifest.n_examples;

    let mut val = Vec::with_capacity(manifest.blocks.len());
    let mut train: Vec<Vec<GradientBlock>> = vec![Vec::new(); n];
    for b in &manifest.blocks {
        let per_example = b.d * b.r;
        let val_path = base.join(&manifest.val_grad_files[&b.name]);
        let vv = read_f64le_file(&val_path, per_example)?;
        check_finite(&vv, &b.name, None)?;
        val.push(GradientBlock::new(
            b.name.clone(),
            DenseMatrix::from_vec_unchecked(b.d, b.r, vv),
        )?);

        let train_path = base.join(&manifest.train_grad_files[&b.name]);
        let tv = read_f64le_file(&train_path, per_example * n)?;
        for (i, chunk) in tv.chunks_exact(per_example).enumerate() {
            check_finite(chunk, &b.name, Some(i))?;
            train[i].push(GradientBlock::new(
                b.name.clone(),
                DenseMatrix::from_vec_unchecked(b.d, b.r, chunk.to_vec()),
            )?);
        }
    }
    let blocks = manifest
        .blocks
        .iter()
        .map(|b| BlockSpec {
            name: b.name.clone(),
            d: b.d,
            r: b.r,
        })
        .collect();
    let ids = (0..n).map(|i| i.to_string()).collect();
    GradientDump::new(blocks, train, val, ids)
}

fn check_finite(values: &[f64], block: &str, example: Option<usize>) -> Result<()> {
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient {
            block: block.to_string(),
            example: example.unwrap_or(0),
            index: pos,
        });
    }
    Ok(())
}

/// Serializes a dump into `dir` and returns the manifest path.
///
/// Stored shapes follow the in-memory convention (long dimension first); a
/// read-back therefore reproduces the dump bit for bit.
pub fn write_dump(dump: &GradientDump, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let n = dump.n_examples();
    let mut blocks = Vec::new();
    let mut val_files = BTreeMap::new();
    let mut train_files = BTreeMap::new();
    for (l, spec) in dump.blocks().iter().enumerate() {
        let vg = dump.val_gradient(l);
        let (d, r) = (vg.d(), vg.r());
        blocks.push(ManifestBlock {
            name: spec.name.clone(),
            d,
            r,
        });
        let val_name = format!("{}.val.bin", spec.name);
        let train_name = format!("{}.train.bin", spec.name);
        write_f64le_file(&dir.join(&val_name), vg.values().data())?;
        let mut payload = Vec::with_capacity(n * d * r);
        for i in 0..n {
            payload.extend_from_slice(dump.train_gradient(i, l).values().data());
        }
        write_f64le_file(&dir.join(&train_name), &payload)?;
        val_files.insert(spec.name.clone(), val_name);
        train_files.insert(spec.name.clone(), train_name);
    }
    let manifest = DumpManifest {
        format_version: FORMAT_VERSION,
        n_examples: n,
        blocks,
        val_grad_files: val_files,
        train_grad_files: train_files,
        dtype: "f64le".into(),
        layout: "row-major".into(),
    };
    let manifest_path = dir.join("manifest.json");
    let tmp = manifest_path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_string_pretty(&manifest)?)?;
    fs::rename(&tmp, &manifest_path)?;
    Ok(manifest_path)
}

/// Synthesizes a random dump for testing pipelines end to end.
pub fn generate_dump(
    n_examples: usize,
    blocks: &[(String, usize, usize)],
    seed: u64,
) -> Result<GradientDump> {
    if n_examples == 0 || blocks.is_empty() {
        return Err(Error::InvalidConfig(
            "gen-dump needs at least one example and one block".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<BlockSpec> = blocks
        .iter()
        .map(|(name, d, r)| BlockSpec {
            name: name.clone(),
            d: *d,
            r: *r,
        })
        .collect();
    let mut draw = |d: usize, r: usize, name: &str| -> Result<GradientBlock> {
        let data: Vec<f64> = (0..d * r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GradientBlock::new(name, DenseMatrix::from_vec(d, r, data)?)
    };
    let mut train = Vec::with_capacity(n_examples);
    for _ in 0..n_examples {
        let mut ex = Vec::with_capacity(specs.len());
        for s in &specs {
            ex.push(draw(s.d, s.r, &s.name)?);
        }
        train.push(ex);
    }
    let val = specs
        .iter()
        .map(|s| draw(s.d, s.r, &s.name))
        .collect::<Result<Vec<_>>>()?;
    let ids = (0..n_examples).map(|i| i.to_string()).collect();
    GradientDump::new(specs, train, val, ids)
}
