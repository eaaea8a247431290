use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Element, Result, TensorError};

/// Role of a parameter. Running statistics are excluded from gradient
/// updates and from L2 regularization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamRole {
    ConvKernel,
    Bias,
    BnScale,
    BnShift,
    BnRunningStat,
}

#[derive(Debug, Clone)]
pub struct Parameter<T> {
    pub name: String,
    pub role: ParamRole,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T> Parameter<T> {
    pub fn is_trainable(&self) -> bool {
        self.role != ParamRole::BnRunningStat
    }
}

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Ordered parameter registry. Registration order defines the checkpoint
/// layout, so a rebuilt model with the same architecture loads checkpoints
/// written by another instance.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
    names: HashSet<String>,
}

impl<T: Element> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            names: HashSet::new(),
        }
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        role: ParamRole,
        shape: Vec<usize>,
        data: Vec<T>,
    ) -> ParamId {
        let name = name.into();
        assert!(
            self.names.insert(name.clone()),
            "duplicate parameter name {name:?}"
        );
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "parameter {name:?}: shape {shape:?} vs data length {}",
            data.len()
        );
        self.params.push(Parameter {
            name,
            role,
            shape,
            data,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Number of trainable scalars (conv kernels, biases, bn scale/shift).
    pub fn trainable_scalars(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.is_trainable())
            .map(|p| p.data.len())
            .sum()
    }

    /// Writes `weights.bin` (little-endian 32-bit floats, parameters
    /// concatenated in registration order) and `weights.json` (ordered
    /// name/role/shape/offset index) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut bin = std::io::BufWriter::new(std::fs::File::create(dir.join("weights.bin"))?);
        let mut index = Vec::with_capacity(self.params.len());
        let mut offset = 0u64;
        for p in &self.params {
            index.push(WeightsEntry {
                name: p.name.clone(),
                role: p.role,
                shape: p.shape.clone(),
                byte_offset: offset,
            });
            for &v in &p.data {
                bin.write_all(&(v.to_f64() as f32).to_le_bytes())?;
            }
            offset += 4 * p.data.len() as u64;
        }
        bin.flush()?;
        serde_json::to_writer_pretty(
            std::io::BufWriter::new(std::fs::File::create(dir.join("weights.json"))?),
            &index,
        )?;
        Ok(())
    }

    /// Restores values from a checkpoint written by [`ParamStore::save`];
    /// the store must already hold the same parameters in the same order.
    pub fn load_into(&mut self, dir: &Path) -> Result<()> {
        let index: Vec<WeightsEntry> = serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(dir.join("weights.json"))?,
        ))?;
        if index.len() != self.params.len() {
            return Err(TensorError::Param(format!(
                "checkpoint has {} parameters, model has {}",
                index.len(),
                self.params.len()
            )));
        }
        let mut bin = std::io::BufReader::new(std::fs::File::open(dir.join("weights.bin"))?);
        let mut offset = 0u64;
        for (entry, p) in index.iter().zip(self.params.iter_mut()) {
            if entry.name != p.name || entry.role != p.role || entry.shape != p.shape {
                return Err(TensorError::Param(format!(
                    "checkpoint entry {:?} does not match model parameter {:?}",
                    entry.name, p.name
                )));
            }
            if entry.byte_offset != offset {
                return Err(TensorError::Param(format!(
                    "checkpoint entry {:?}: bad byte offset {} (expected {offset})",
                    entry.name, entry.byte_offset
                )));
            }
            let mut buf = [0u8; 4];
            for v in p.data.iter_mut() {
                bin.read_exact(&mut buf)?;
                *v = T::from_f64(f32::from_le_bytes(buf) as f64);
            }
            offset += 4 * p.data.len() as u64;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightsEntry {
    name: String,
    role: ParamRole,
    shape: Vec<usize>,
    byte_offset: u64,
}
