use serde::{Deserialize, Serialize};

use crate::geom::{circle_polygon, clip_polygon_rect, polygon_area, Rect};
use crate::mesh::UnstructuredMesh;
use crate::{DataError, Result};

/// Rows for a square-pixel grid of `n_x` columns spanning a domain with the
/// given height/width ratio: round-to-nearest with ties to even (the even
/// rule keeps the published 50->95, 100->190, 200->380, 400->761 chain).
pub fn grid_rows(n_x: usize, height_over_width: f64) -> usize {
    (n_x as f64 * height_over_width).round_ties_even() as usize
}

/// Square-pixel raster geometry anchored at the domain's lower-left corner.
/// The pixel edge is width / n_x in both axes; the top sliver of a domain
/// whose aspect ratio is not an exact multiple is covered partially, which
/// the area weighting handles.
#[derive(Debug, Clone, Copy)]
pub struct GridGeom {
    pub n_x: usize,
    pub n_y: usize,
    pub pixel: f64,
    pub origin: (f64, f64),
}

impl GridGeom {
    pub fn new(bbox: &Rect, n_x: usize) -> Result<Self> {
        if n_x < 2 {
            return Err(DataError::GridTooSmall(n_x));
        }
        let pixel = bbox.width() / n_x as f64;
        let n_y = grid_rows(n_x, bbox.height() / bbox.width());
        Ok(GridGeom {
            n_x,
            n_y,
            pixel,
            origin: (bbox.x0, bbox.y0),
        })
    }

    pub fn pixel_rect(&self, row: usize, col: usize) -> Rect {
        let x0 = self.origin.0 + col as f64 * self.pixel;
        let y0 = self.origin.1 + row as f64 * self.pixel;
        Rect::new(x0, y0, x0 + self.pixel, y0 + self.pixel)
    }

    /// Pixel index ranges overlapped by a bounding box (clamped to grid).
    fn overlapped(&self, bb: &Rect) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let c0 = ((bb.x0 - self.origin.0) / self.pixel).floor().max(0.0) as usize;
        let r0 = ((bb.y0 - self.origin.1) / self.pixel).floor().max(0.0) as usize;
        if c0 >= self.n_x || r0 >= self.n_y {
            return None;
        }
        let c1 = (((bb.x1 - self.origin.0) / self.pixel).ceil() as usize).min(self.n_x);
        let r1 = (((bb.y1 - self.origin.1) / self.pixel).ceil() as usize).min(self.n_y);
        (c1 > c0 && r1 > r0).then_some((r0..r1, c0..c1))
    }
}

/// Image-like structured field: `n_y` rows by `n_x` columns of 32-bit
/// values on physically square pixels, row 0 at the domain bottom.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridField {
    pub name: String,
    pub units: String,
    pub n_y: usize,
    pub n_x: usize,
    /// Pixel edge length (identical in x and y).
    pub pixel_size: f64,
    pub origin: (f64, f64),
    pub values: Vec<f32>,
    pub geometry_channel: bool,
}

impl GridField {
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.n_x + col]
    }
}

/// Area-weighted average of cell values per pixel: sum A(cell ∩ pixel) *
/// value / sum A(cell ∩ pixel) over the overlapping cells. Pixels with zero
/// covered area are an error.
pub fn rasterize_values(
    mesh: &UnstructuredMesh,
    field: &str,
    geom: &GridGeom,
) -> Result<Vec<f64>> {
    let values = mesh.field(field)?;
    let npix = geom.n_x * geom.n_y;
    let mut weighted = vec![0.0f64; npix];
    let mut covered = vec![0.0f64; npix];

    for (cell, &value) in mesh.cells.iter().zip(values) {
        let mut bb = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in cell {
            bb.x0 = bb.x0.min(p[0]);
            bb.y0 = bb.y0.min(p[1]);
            bb.x1 = bb.x1.max(p[0]);
            bb.y1 = bb.y1.max(p[1]);
        }
        let Some((rows, cols)) = geom.overlapped(&bb) else {
            continue;
        };
        for row in rows {
            for col in cols.clone() {
                let clipped = clip_polygon_rect(cell, &geom.pixel_rect(row, col));
                if clipped.len() >= 3 {
                    let a = polygon_area(&clipped);
                    weighted[row * geom.n_x + col] += a * value;
                    covered[row * geom.n_x + col] += a;
                }
            }
        }
    }

    let floor = 1e-9 * geom.pixel * geom.pixel;
    let mut out = Vec::with_capacity(npix);
    for (i, (&w, &a)) in weighted.iter().zip(&covered).enumerate() {
        if a <= floor {
            return Err(DataError::UncoveredPixel {
                row: i / geom.n_x,
                col: i % geom.n_x,
            });
        }
        out.push(w / a);
    }
    Ok(out)
}

/// [`rasterize_values`] packaged as a 32-bit [`GridField`].
pub fn rasterize(
    mesh: &UnstructuredMesh,
    field: &str,
    n_x: usize,
    units: &str,
) -> Result<GridField> {
    let geom = GridGeom::new(&mesh.bbox, n_x)?;
    let values = rasterize_values(mesh, field, &geom)?;
    Ok(GridField {
        name: field.to_string(),
        units: units.to_string(),
        n_y: geom.n_y,
        n_x: geom.n_x,
        pixel_size: geom.pixel,
        origin: geom.origin,
        values: values.into_iter().map(|v| v as f32).collect(),
        geometry_channel: false,
    })
}

/// Anti-aliased solid-indicator image of a set of disks: each pixel holds
/// its solid area fraction in [0, 1] (1 inside a pin, 0 in the fluid).
/// Coverage within 1e-12 of 0 or 1 snaps exactly so downstream masking
/// annihilates solid pixels exactly.
pub fn geometry_to_image(
    circles: &[(f64, f64, f64)],
    domain: &Rect,
    n_x: usize,
) -> Result<GridField> {
    let geom = GridGeom::new(domain, n_x)?;
    let mut covered = vec![0.0f64; geom.n_x * geom.n_y];
    for &(cx, cy, r) in circles {
        let poly = circle_polygon(cx, cy, r, 128);
        let bb = Rect::new(cx - r * 1.01, cy - r * 1.01, cx + r * 1.01, cy + r * 1.01);
        let Some((rows, cols)) = geom.overlapped(&bb) else {
            continue;
        };
        for row in rows {
            for col in cols.clone() {
                let clipped = clip_polygon_rect(&poly, &geom.pixel_rect(row, col));
                if clipped.len() >= 3 {
                    covered[row * geom.n_x + col] += polygon_area(&clipped);
                }
            }
        }
    }
    let pixel_area = geom.pixel * geom.pixel;
    let values = covered
        .into_iter()
        .map(|a| {
            let frac = (a / pixel_area).clamp(0.0, 1.0);
            let snapped = if frac <= 1e-12 {
                0.0
            } else if frac >= 1.0 - 1e-12 {
                1.0
            } else {
                frac
            };
            snapped as f32
        })
        .collect();
    Ok(GridField {
        name: "geometry".to_string(),
        units: "solid fraction".to_string(),
        n_y: geom.n_y,
        n_x: geom.n_x,
        pixel_size: geom.pixel,
        origin: geom.origin,
        values,
        geometry_channel: true,
    })
}
