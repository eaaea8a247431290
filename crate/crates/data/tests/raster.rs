//! Rasterization contracts: constant fields, equal-area symmetry,
//! conservation on exact partitions, monotone bounds, a stratified
//! Monte-Carlo area-sampling oracle, and geometry images.

use std::collections::BTreeMap;

use cht_data::{
    geometry_to_image, grid_rows, rasterize, rasterize_values, DataError, GridGeom, Rect,
    UnstructuredMesh,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square_mesh_fields(values: Vec<f64>) -> BTreeMap<String, Vec<f64>> {
    let mut m = BTreeMap::new();
    m.insert("f".to_string(), values);
    m
}

/// Jittered structured triangulation of the unit square: a partition into
/// convex triangles with irregular interior vertices.
fn jittered_triangulation(n: usize, seed: u64) -> (Vec<Vec<[f64; 2]>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1.0 / n as f64;
    let mut pts = vec![[0.0f64; 2]; (n + 1) * (n + 1)];
    for j in 0..=n {
        for i in 0..=n {
            let mut x = i as f64 * h;
            let mut y = j as f64 * h;
            if i > 0 && i < n {
                x += rng.gen_range(-0.3..0.3) * h;
            }
            if j > 0 && j < n {
                y += rng.gen_range(-0.3..0.3) * h;
            }
            pts[j * (n + 1) + i] = [x, y];
        }
    }
    let mut cells = Vec::new();
    let mut values = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let p00 = pts[j * (n + 1) + i];
            let p10 = pts[j * (n + 1) + i + 1];
            let p01 = pts[(j + 1) * (n + 1) + i];
            let p11 = pts[(j + 1) * (n + 1) + i + 1];
            cells.push(vec![p00, p10, p11]);
            values.push(rng.gen_range(0.0..1.0));
            cells.push(vec![p00, p11, p01]);
            values.push(rng.gen_range(0.0..1.0));
        }
    }
    (cells, values)
}

#[test]
fn published_row_counts() {
    let ratio = 761.0 / 400.0;
    assert_eq!(grid_rows(50, ratio), 95);
    assert_eq!(grid_rows(100, ratio), 190);
    assert_eq!(grid_rows(200, ratio), 380); // 380.5 rounds to even
    assert_eq!(grid_rows(400, ratio), 761);
}

#[test]
fn constant_field_rasterizes_to_constant() {
    let (cells, values) = jittered_triangulation(6, 1);
    let mesh =
        UnstructuredMesh::new(cells, square_mesh_fields(vec![2.5; values.len()])).unwrap();
    let grid = rasterize(&mesh, "f", 5, "-").unwrap();
    for &v in &grid.values {
        assert!((v - 2.5).abs() < 1e-6);
    }
}

#[test]
fn diagonal_split_averages_by_area() {
    // two big triangles with values 1 and 3 over the unit square: pixels on
    // the diagonal are split into equal halves and average to 2
    let cells = vec![
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
        vec![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    ];
    let mesh = UnstructuredMesh::new(cells, square_mesh_fields(vec![1.0, 3.0])).unwrap();
    let grid = rasterize(&mesh, "f", 2, "-").unwrap();
    assert_eq!(grid.n_y, 2);
    // rows from the bottom: (0,0) lower-right triangle's side is below
    assert_eq!(grid.at(0, 1), 1.0);
    assert_eq!(grid.at(1, 0), 3.0);
    assert_eq!(grid.at(0, 0), 2.0);
    assert_eq!(grid.at(1, 1), 2.0);
}

/// When mesh cells exactly partition the grid, the (equal-pixel-area) mean
/// of all pixels equals the area-weighted mean of all cells to 1e-9.
#[test]
fn rasterization_is_conservative_on_partitions() {
    for seed in 0..5 {
        let (cells, values) = jittered_triangulation(7, seed);
        let areas: Vec<f64> = cells.iter().map(|c| cht_data::polygon_area(c)).collect();
        let mesh = UnstructuredMesh::new(cells, square_mesh_fields(values.clone())).unwrap();
        let geom = GridGeom::new(&mesh.bbox, 4).unwrap();
        let pix = rasterize_values(&mesh, "f", &geom).unwrap();

        let cell_mean: f64 = areas
            .iter()
            .zip(&values)
            .map(|(a, v)| a * v)
            .sum::<f64>()
            / areas.iter().sum::<f64>();
        let pixel_mean: f64 = pix.iter().sum::<f64>() / pix.len() as f64;
        assert!(
            (pixel_mean - cell_mean).abs() <= 1e-9 * cell_mean.abs().max(1.0),
            "seed {seed}: {pixel_mean} vs {cell_mean}"
        );
    }
}

#[test]
fn rasterization_is_monotone() {
    for seed in 5..10 {
        let (cells, values) = jittered_triangulation(6, seed);
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        let mesh = UnstructuredMesh::new(cells, square_mesh_fields(values)).unwrap();
        let geom = GridGeom::new(&mesh.bbox, 5).unwrap();
        for v in rasterize_values(&mesh, "f", &geom).unwrap() {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}

fn point_in_convex(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = poly.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
        if cross != 0.0 {
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
    }
    true
}

/// Independent area-sampling oracle: stratified jittered points per pixel,
/// each attributed to its containing cell; the sample mean approximates the
/// area-weighted average.
fn mc_pixel_values(
    mesh: &UnstructuredMesh,
    values: &[f64],
    geom: &GridGeom,
    points_per_pixel: usize,
    seed: u64,
) -> Vec<f64> {
    // bin cells for point location
    let bins = 24usize;
    let mut grid_bins: Vec<Vec<usize>> = vec![Vec::new(); bins * bins];
    let (w, h) = (mesh.bbox.width(), mesh.bbox.height());
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in cell {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        let bx0 = (((x0 - mesh.bbox.x0) / w * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        let bx1 = (((x1 - mesh.bbox.x0) / w * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        let by0 = (((y0 - mesh.bbox.y0) / h * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        let by1 = (((y1 - mesh.bbox.y0) / h * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        for by in by0..=by1 {
            for bx in bx0..=bx1 {
                grid_bins[by * bins + bx].push(ci);
            }
        }
    }
    let locate = |x: f64, y: f64| -> Option<usize> {
        let bx = (((x - mesh.bbox.x0) / w * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        let by = (((y - mesh.bbox.y0) / h * bins as f64).floor().max(0.0) as usize).min(bins - 1);
        grid_bins[by * bins + bx]
            .iter()
            .copied()
            .find(|&ci| point_in_convex(&mesh.cells[ci], x, y))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = (points_per_pixel as f64).sqrt().round() as usize;
    let mut out = Vec::with_capacity(geom.n_x * geom.n_y);
    for row in 0..geom.n_y {
        for col in 0..geom.n_x {
            let r = geom.pixel_rect(row, col);
            let mut sum = 0.0;
            let mut hits = 0usize;
            for sy in 0..k {
                for sx in 0..k {
                    let x = r.x0 + (sx as f64 + rng.gen_range(0.0..1.0)) / k as f64 * geom.pixel;
                    let y = r.y0 + (sy as f64 + rng.gen_range(0.0..1.0)) / k as f64 * geom.pixel;
                    if let Some(ci) = locate(x, y) {
                        sum += values[ci];
                        hits += 1;
                    }
                }
            }
            assert!(hits > 0, "oracle found no covered points in pixel");
            out.push(sum / hits as f64);
        }
    }
    out
}

/// Clipping rasterizer vs the Monte-Carlo oracle at 1e6 points/pixel:
/// agreement within 1e-3 absolute on unit-scale values, 20 random meshes.
#[test]
fn monte_carlo_oracle_agreement() {
    for seed in 0..20 {
        let (cells, values) = jittered_triangulation(5, 100 + seed);
        let mesh = UnstructuredMesh::new(cells, square_mesh_fields(values.clone())).unwrap();
        let geom = GridGeom::new(&mesh.bbox, 3).unwrap();
        let exact = rasterize_values(&mesh, "f", &geom).unwrap();
        let mc = mc_pixel_values(&mesh, &values, &geom, 1_000_000, 999 + seed);
        for (i, (a, b)) in exact.iter().zip(&mc).enumerate() {
            assert!(
                (a - b).abs() < 1e-3,
                "seed {seed} pixel {i}: exact {a} vs mc {b}"
            );
        }
    }
}

#[test]
fn uncovered_pixel_is_an_error() {
    // two distant cells leave the middle of the bounding box uncovered
    let cells = vec![
        vec![[0.0, 0.0], [0.2, 0.0], [0.2, 1.0], [0.0, 1.0]],
        vec![[0.8, 0.0], [1.0, 0.0], [1.0, 1.0], [0.8, 1.0]],
    ];
    let mesh = UnstructuredMesh::new(cells, square_mesh_fields(vec![1.0, 2.0])).unwrap();
    assert!(matches!(
        rasterize(&mesh, "f", 5, "-"),
        Err(DataError::UncoveredPixel { .. })
    ));
}

#[test]
fn degenerate_and_nonconvex_cells_are_rejected() {
    let zero_area = vec![vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]];
    assert!(matches!(
        UnstructuredMesh::new(zero_area, square_mesh_fields(vec![1.0])),
        Err(DataError::DegeneratePolygon { .. })
    ));
    let reflex = vec![vec![
        [0.0, 0.0],
        [2.0, 0.0],
        [2.0, 2.0],
        [1.0, 0.5],
        [0.0, 2.0],
    ]];
    assert!(matches!(
        UnstructuredMesh::new(reflex, square_mesh_fields(vec![1.0])),
        Err(DataError::DegeneratePolygon { .. })
    ));
}

#[test]
fn geometry_image_pin_interior_and_fluid() {
    let domain = Rect::new(0.0, 0.0, 1.0, 1.0);
    let circles = [(0.5, 0.5, 0.25)];
    let img = geometry_to_image(&circles, &domain, 16).unwrap();
    // pixel centered in the pin is exactly solid
    assert_eq!(img.at(8, 8), 1.0);
    // corner pixel is exactly fluid
    assert_eq!(img.at(0, 0), 0.0);
    for &v in &img.values {
        assert!((0.0..=1.0).contains(&v));
    }
}

/// Total solid mass times pixel area matches the analytic disk area to 0.5%
/// at n_x = 200.
#[test]
fn geometry_image_mass_matches_analytic_area() {
    let domain = Rect::new(0.0, 0.0, 0.25, 0.25 * 761.0 / 400.0);
    let circles = [
        (0.06, 0.10, 0.012),
        (0.12, 0.25, 0.015),
        (0.19, 0.08, 0.008),
        (0.08, 0.38, 0.013),
        (0.18, 0.33, 0.010),
    ];
    let img = geometry_to_image(&circles, &domain, 200).unwrap();
    let pixel_area = img.pixel_size * img.pixel_size;
    let mass: f64 = img.values.iter().map(|&v| v as f64).sum::<f64>() * pixel_area;
    let analytic: f64 = circles
        .iter()
        .map(|&(_, _, r)| std::f64::consts::PI * r * r)
        .sum();
    assert!(
        (mass - analytic).abs() <= 0.005 * analytic,
        "mass {mass} vs analytic {analytic}"
    );
}
