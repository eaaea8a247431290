use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scaler::ScalerParams;
use crate::{DataError, Result};

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn get(&self, split: SplitName) -> &[String] {
        match split {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Deterministic shuffled split. Rounding favors the training split: the
/// validation and test sizes are floors of their fractions, training takes
/// the remainder.
pub fn split_dataset(
    sample_ids: &[String],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SplitAssignment> {
    let (ft, fv, fe) = fractions;
    if ft < 0.0 || fv < 0.0 || fe < 0.0 || (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(DataError::BadFractions(fractions));
    }
    let n = sample_ids.len();
    if n < 3 {
        return Err(DataError::TooFewSamples(n));
    }
    let mut ids = sample_ids.to_vec();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let n_val = (fv * n as f64).floor() as usize;
    let n_test = (fe * n as f64).floor() as usize;
    let n_train = n - n_val - n_test;
    for (name, frac, count) in [
        ("train", ft, n_train),
        ("val", fv, n_val),
        ("test", fe, n_test),
    ] {
        if frac > 0.0 && count == 0 {
            return Err(DataError::EmptySplit(name));
        }
    }
    let test = ids.split_off(n - n_test);
    let val = ids.split_off(n_train);
    Ok(SplitAssignment {
        train: ids,
        val,
        test,
    })
}

/// Per-field metadata: units, the output transform applied to targets, and
/// (for fields also consumed as model inputs) the input transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldInfo {
    pub name: String,
    pub units: String,
    pub output_scaler: ScalerParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_scaler: Option<ScalerParams>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub generator: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub files: BTreeMap<String, FileRef>,
}

/// Self-describing record of a rasterized dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    /// (n_y, n_x)
    pub resolution: (usize, usize),
    pub pixel_size: f64,
    pub fields: Vec<FieldInfo>,
    pub splits: SplitAssignment,
    pub seeds: Seeds,
    /// Hash of the generating configuration.
    pub provenance: String,
    pub samples: Vec<SampleEntry>,
}

impl DatasetManifest {
    pub fn field(&self, name: &str) -> Result<&FieldInfo> {
        self.fields
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| DataError::UnknownField(name.to_string()))
    }

    /// Splits must be pairwise disjoint and jointly cover every sample.
    pub fn validate(&self) -> Result<()> {
        if self.version != DATASET_VERSION {
            return Err(DataError::VersionMismatch {
                got: self.version,
                expected: DATASET_VERSION,
            });
        }
        let mut seen = BTreeSet::new();
        for id in self
            .splits
            .train
            .iter()
            .chain(&self.splits.val)
            .chain(&self.splits.test)
        {
            if !seen.insert(id.clone()) {
                return Err(DataError::InvalidManifest(format!(
                    "sample {id:?} assigned to more than one split"
                )));
            }
        }
        let all: BTreeSet<String> = self.samples.iter().map(|s| s.id.clone()).collect();
        if seen != all {
            return Err(DataError::InvalidManifest(
                "splits do not exactly cover the sample set".into(),
            ));
        }
        Ok(())
    }
}

/// In-memory dataset: manifest plus per-sample field images.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    /// sample id -> field name -> row-major values (n_y * n_x).
    pub samples: BTreeMap<String, BTreeMap<String, Vec<f32>>>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

impl Dataset {
    pub fn field_of(&self, sample: &str, field: &str) -> Result<&[f32]> {
        self.samples
            .get(sample)
            .and_then(|s| s.get(field))
            .map(|v| v.as_slice())
            .ok_or_else(|| DataError::MissingFile {
                sample: sample.to_string(),
                field: field.to_string(),
                path: String::new(),
            })
    }

    /// Writes `manifest.json` and `samples/<id>/<field>.f32` arrays with
    /// SHA-256 checksums recorded in the manifest.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.manifest.samples = self
            .samples
            .keys()
            .map(|id| SampleEntry {
                id: id.clone(),
                files: BTreeMap::new(),
            })
            .collect();
        self.manifest.validate()?;
        std::fs::create_dir_all(dir.join("samples"))?;
        let mut entries = Vec::new();
        for (id, fields) in &self.samples {
            let sdir = dir.join("samples").join(id);
            std::fs::create_dir_all(&sdir)?;
            let mut files = BTreeMap::new();
            for (name, values) in fields {
                let rel = format!("samples/{id}/{name}.f32");
                let bytes = f32_bytes(values);
                std::fs::File::create(dir.join(&rel))?.write_all(&bytes)?;
                files.insert(
                    name.clone(),
                    FileRef {
                        path: rel,
                        sha256: sha256_hex(&bytes),
                    },
                );
            }
            entries.push(SampleEntry {
                id: id.clone(),
                files,
            });
        }
        self.manifest.samples = entries;
        serde_json::to_writer_pretty(
            std::io::BufWriter::new(std::fs::File::create(dir.join("manifest.json"))?),
            &self.manifest,
        )?;
        Ok(())
    }

    /// Loads and fully validates a dataset directory: manifest schema,
    /// split invariants, checksums, and array lengths.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: DatasetManifest = serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(dir.join("manifest.json"))?,
        ))?;
        manifest.validate()?;
        let expect_len = manifest.resolution.0 * manifest.resolution.1;
        let mut samples = BTreeMap::new();
        for entry in &manifest.samples {
            let mut fields = BTreeMap::new();
            for (name, fref) in &entry.files {
                let path = dir.join(&fref.path);
                let mut bytes = Vec::new();
                std::fs::File::open(&path)
                    .map_err(|_| DataError::MissingFile {
                        sample: entry.id.clone(),
                        field: name.clone(),
                        path: fref.path.clone(),
                    })?
                    .read_to_end(&mut bytes)?;
                if sha256_hex(&bytes) != fref.sha256 {
                    return Err(DataError::ChecksumMismatch {
                        sample: entry.id.clone(),
                        field: name.clone(),
                    });
                }
                let values: Vec<f32> = bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                if values.len() != expect_len {
                    return Err(DataError::InvalidManifest(format!(
                        "sample {:?} field {name:?}: {} values, expected {expect_len}",
                        entry.id,
                        values.len()
                    )));
                }
                fields.insert(name.clone(), values);
            }
            samples.insert(entry.id.clone(), fields);
        }
        Ok(Dataset { manifest, samples })
    }
}
