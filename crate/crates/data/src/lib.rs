//! Field-data pipeline: area-weighted rasterization of unstructured
//! polygonal results onto square-pixel image grids, geometry-image
//! rendering, data transforms, dataset splits, and the on-disk dataset
//! format.
//!
//! A pixel's value is the area-weighted average of the overlapping cells'
//! values; pixels no cell covers are a hard error (they signal a
//! mesh/domain mismatch rather than data).

mod dataset;
mod error;
mod geom;
mod mesh;
mod raster;
mod scaler;

pub use dataset::{
    split_dataset, Dataset, DatasetManifest, FieldInfo, SampleEntry, Seeds, SplitAssignment,
    SplitName,
};
pub use error::{DataError, Result};
pub use geom::{circle_polygon, clip_polygon_rect, polygon_area, Rect};
pub use mesh::UnstructuredMesh;
pub use raster::{geometry_to_image, grid_rows, rasterize, rasterize_values, GridField, GridGeom};
pub use scaler::{fit_scaler, ScalerKind, ScalerParams};
