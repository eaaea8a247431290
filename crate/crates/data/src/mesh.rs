use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{is_convex, polygon_area, Rect};
use crate::{DataError, Result};

/// Field results on convex polygonal cells, with one value per cell per
/// field. The bounding box is the rasterization target domain.
#[derive(Debug, Clone)]
pub struct UnstructuredMesh {
    pub cells: Vec<Vec<[f64; 2]>>,
    pub fields: BTreeMap<String, Vec<f64>>,
    pub bbox: Rect,
}

impl UnstructuredMesh {
    /// Validates convexity and positive area of every cell.
    pub fn new(cells: Vec<Vec<[f64; 2]>>, fields: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut bbox = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (i, c) in cells.iter().enumerate() {
            if c.len() < 3 {
                return Err(DataError::DegeneratePolygon {
                    index: i,
                    reason: format!("{} vertices", c.len()),
                });
            }
            if polygon_area(c) <= 0.0 {
                return Err(DataError::DegeneratePolygon {
                    index: i,
                    reason: "zero area".into(),
                });
            }
            if !is_convex(c) {
                return Err(DataError::DegeneratePolygon {
                    index: i,
                    reason: "not convex".into(),
                });
            }
            for p in c {
                bbox.x0 = bbox.x0.min(p[0]);
                bbox.y0 = bbox.y0.min(p[1]);
                bbox.x1 = bbox.x1.max(p[0]);
                bbox.y1 = bbox.y1.max(p[1]);
            }
        }
        for (name, vals) in &fields {
            if vals.len() != cells.len() {
                return Err(DataError::FieldLength {
                    field: name.clone(),
                    got: vals.len(),
                    cells: cells.len(),
                });
            }
        }
        Ok(UnstructuredMesh {
            cells,
            fields,
            bbox,
        })
    }

    /// Uniform rectangle-cell mesh: nx columns by ny rows of dx-by-dy cells
    /// anchored at `origin`, cell (i, j) at index j*nx + i.
    pub fn structured(
        nx: usize,
        ny: usize,
        origin: (f64, f64),
        dx: f64,
        dy: f64,
        fields: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self> {
        let mut cells = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x0 = origin.0 + i as f64 * dx;
                let y0 = origin.1 + j as f64 * dy;
                cells.push(vec![
                    [x0, y0],
                    [x0 + dx, y0],
                    [x0 + dx, y0 + dy],
                    [x0, y0 + dy],
                ]);
            }
        }
        Self::new(cells, fields)
    }

    pub fn field(&self, name: &str) -> Result<&[f64]> {
        self.fields
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| DataError::UnknownField(name.to_string()))
    }

    /// Writes `mesh.json` plus one `cells_<field>.f32` array per field.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let desc = match self.structured_desc() {
            Some(d) => d,
            None => MeshDesc::Polygons {
                cells: self.cells.clone(),
            },
        };
        serde_json::to_writer(
            std::io::BufWriter::new(std::fs::File::create(dir.join("mesh.json"))?),
            &desc,
        )?;
        for (name, vals) in &self.fields {
            let mut w = std::io::BufWriter::new(std::fs::File::create(
                dir.join(format!("cells_{name}.f32")),
            )?);
            for &v in vals {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let desc: MeshDesc = serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(dir.join("mesh.json"))?,
        ))?;
        let mut fields = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let fname = entry.file_name().to_string_lossy().to_string();
            if let Some(name) = fname
                .strip_prefix("cells_")
                .and_then(|s| s.strip_suffix(".f32"))
            {
                let mut bytes = Vec::new();
                std::fs::File::open(entry.path())?.read_to_end(&mut bytes)?;
                let vals = bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                    .collect();
                fields.insert(name.to_string(), vals);
            }
        }
        match desc {
            MeshDesc::Structured {
                nx,
                ny,
                origin,
                dx,
                dy,
            } => Self::structured(nx, ny, origin, dx, dy, fields),
            MeshDesc::Polygons { cells } => Self::new(cells, fields),
        }
    }

    fn structured_desc(&self) -> Option<MeshDesc> {
        // Recognize the layout produced by `structured` so big solver grids
        // round-trip through a compact descriptor instead of vertex soup.
        let first = self.cells.first()?;
        if first.len() != 4 {
            return None;
        }
        let dx = first[1][0] - first[0][0];
        let dy = first[3][1] - first[0][1];
        let origin = (first[0][0], first[0][1]);
        let nx = ((self.bbox.width() / dx).round()) as usize;
        let ny = ((self.bbox.height() / dy).round()) as usize;
        if nx * ny != self.cells.len() {
            return None;
        }
        for (idx, c) in self.cells.iter().enumerate() {
            let (i, j) = (idx % nx, idx / nx);
            let x0 = origin.0 + i as f64 * dx;
            let y0 = origin.1 + j as f64 * dy;
            if c.len() != 4 || c[0] != [x0, y0] || c[2] != [x0 + dx, y0 + dy] {
                return None;
            }
        }
        Some(MeshDesc::Structured {
            nx,
            ny,
            origin,
            dx,
            dy,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum MeshDesc {
    Structured {
        nx: usize,
        ny: usize,
        origin: (f64, f64),
        dx: f64,
        dy: f64,
    },
    Polygons {
        cells: Vec<Vec<[f64; 2]>>,
    },
}
