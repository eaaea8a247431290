use cht_data::Rect;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{DomainSpec, Result, SolverError};

/// Geometric sampling constraints for pin-fin layouts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutConstraints {
    pub n_pins: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Minimum surface-to-surface gap between pins (m).
    pub margin: f64,
    /// Minimum gap between a pin surface and any channel edge (m).
    pub wall_margin: f64,
}

impl Default for LayoutConstraints {
    fn default() -> Self {
        LayoutConstraints {
            n_pins: 34,
            r_min: 0.005,
            r_max: 0.015,
            margin: 0.005,
            wall_margin: 0.004,
        }
    }
}

/// One pin-fin channel geometry: non-overlapping disks fully inside the
/// channel rectangle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PinLayout {
    pub centers: Vec<(f64, f64)>,
    pub radii: Vec<f64>,
    pub channel: Rect,
}

impl PinLayout {
    pub fn empty(channel: Rect) -> Self {
        PinLayout {
            centers: Vec::new(),
            radii: Vec::new(),
            channel,
        }
    }

    pub fn n_pins(&self) -> usize {
        self.radii.len()
    }

    pub fn circles(&self) -> Vec<(f64, f64, f64)> {
        self.centers
            .iter()
            .zip(&self.radii)
            .map(|(&(x, y), &r)| (x, y, r))
            .collect()
    }

    pub fn contains_solid(&self, x: f64, y: f64) -> bool {
        self.centers.iter().zip(&self.radii).any(|(&(cx, cy), &r)| {
            let (dx, dy) = (x - cx, y - cy);
            dx * dx + dy * dy <= r * r
        })
    }

    /// Narrowest surface gap: pin-pin and pin-to-top/bottom-wall distances.
    pub fn narrowest_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..self.n_pins() {
            let (xi, yi) = self.centers[i];
            let ri = self.radii[i];
            gap = gap.min(yi - self.channel.y0 - ri);
            gap = gap.min(self.channel.y1 - yi - ri);
            for j in i + 1..self.n_pins() {
                let (xj, yj) = self.centers[j];
                let d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                gap = gap.min(d - ri - self.radii[j]);
            }
        }
        gap
    }

    /// Pairwise-distance and containment check with the given margins.
    pub fn is_valid(&self, margin: f64, wall_margin: f64) -> bool {
        for i in 0..self.n_pins() {
            let (x, y) = self.centers[i];
            let r = self.radii[i];
            if x - r < self.channel.x0 + wall_margin
                || x + r > self.channel.x1 - wall_margin
                || y - r < self.channel.y0 + wall_margin
                || y + r > self.channel.y1 - wall_margin
            {
                return false;
            }
            for j in i + 1..self.n_pins() {
                let (xj, yj) = self.centers[j];
                let d = ((x - xj).powi(2) + (y - yj).powi(2)).sqrt();
                if d <= r + self.radii[j] + margin {
                    return false;
                }
            }
        }
        true
    }
}

/// Pushes overlapping pins apart along their center line until the margin
/// holds (or gives up). Centers are clamped back into the wall box after
/// every pass.
fn repair(layout: &mut PinLayout, c: &LayoutConstraints) -> bool {
    let slack = 1.05;
    for _ in 0..300 {
        let mut moved = false;
        for i in 0..layout.n_pins() {
            for j in i + 1..layout.n_pins() {
                let (xi, yi) = layout.centers[i];
                let (xj, yj) = layout.centers[j];
                let need = layout.radii[i] + layout.radii[j] + c.margin * slack;
                let (dx, dy) = (xj - xi, yj - yi);
                let d = (dx * dx + dy * dy).sqrt();
                if d < need {
                    moved = true;
                    // push apart symmetrically; coincident centers separate
                    // along x
                    let (ux, uy) = if d > 1e-12 {
                        (dx / d, dy / d)
                    } else {
                        (1.0, 0.0)
                    };
                    let push = 0.5 * (need - d) + 1e-6;
                    layout.centers[i] = (xi - ux * push, yi - uy * push);
                    layout.centers[j] = (xj + ux * push, yj + uy * push);
                }
            }
        }
        for i in 0..layout.n_pins() {
            let r = layout.radii[i];
            let (x, y) = layout.centers[i];
            layout.centers[i] = (
                x.clamp(
                    layout.channel.x0 + c.wall_margin + r,
                    layout.channel.x1 - c.wall_margin - r,
                ),
                y.clamp(
                    layout.channel.y0 + c.wall_margin + r,
                    layout.channel.y1 - c.wall_margin - r,
                ),
            );
        }
        if !moved && layout.is_valid(c.margin, c.wall_margin) {
            return true;
        }
    }
    layout.is_valid(c.margin, c.wall_margin)
}

/// Latin-hypercube layout sampling with iterative-separation repair.
/// Deterministic per seed; raw samples that cannot be repaired are rejected
/// and resampled.
pub fn sample_layouts(
    n: usize,
    seed: u64,
    domain: &DomainSpec,
    constraints: &LayoutConstraints,
) -> Result<Vec<PinLayout>> {
    let c = constraints;
    let channel = domain.channel();
    if c.r_min <= 0.0 || c.r_max < c.r_min || c.margin < 0.0 || c.wall_margin < 0.0 {
        return Err(SolverError::InvalidArg(format!("bad constraints {c:?}")));
    }
    // packing bound: disks of radius r_max + margin/2 must fit loosely into
    // the wall-inset box
    let inset_area = (channel.width() - 2.0 * c.wall_margin)
        * (channel.height() - 2.0 * c.wall_margin);
    let disk = std::f64::consts::PI * (c.r_max + 0.5 * c.margin).powi(2);
    if c.n_pins as f64 * disk > 0.55 * inset_area {
        return Err(SolverError::Infeasible(format!(
            "total pin area {:.4} m^2 exceeds the packing bound {:.4} m^2",
            c.n_pins as f64 * disk,
            0.55 * inset_area
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = 3 * c.n_pins;
    // stratified unit samples: dims x n, one permuted stratum per sample
    let mut strata = vec![0usize; dims * n];
    for d in 0..dims {
        let row = &mut strata[d * n..(d + 1) * n];
        for (k, s) in row.iter_mut().enumerate() {
            *s = k;
        }
        for k in (1..n).rev() {
            let j = rng.gen_range(0..=k);
            row.swap(k, j);
        }
    }
    let unit = |rng: &mut ChaCha8Rng, stratum: usize, n: usize| {
        (stratum as f64 + rng.gen_range(0.0..1.0)) / n as f64
    };

    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let draw = |rng: &mut ChaCha8Rng, d: usize| unit(rng, strata[d * n + s], n);
        let mut layout = PinLayout::empty(channel);
        for p in 0..c.n_pins {
            let r = c.r_min + draw(&mut rng, 3 * p + 2) * (c.r_max - c.r_min);
            let x0 = channel.x0 + c.wall_margin + r;
            let x1 = channel.x1 - c.wall_margin - r;
            let y0 = channel.y0 + c.wall_margin + r;
            let y1 = channel.y1 - c.wall_margin - r;
            let x = x0 + draw(&mut rng, 3 * p) * (x1 - x0);
            let y = y0 + draw(&mut rng, 3 * p + 1) * (y1 - y0);
            layout.centers.push((x, y));
            layout.radii.push(r);
        }
        let mut ok = repair(&mut layout, c);
        let mut attempts = 0usize;
        while !ok {
            attempts += 1;
            if attempts > 50 {
                return Err(SolverError::RepairFailed { attempts });
            }
            // plain uniform resample of the unrepairable layout
            layout = PinLayout::empty(channel);
            for _ in 0..c.n_pins {
                let r = rng.gen_range(c.r_min..=c.r_max);
                let x = rng.gen_range(channel.x0 + c.wall_margin + r..channel.x1 - c.wall_margin - r);
                let y = rng.gen_range(channel.y0 + c.wall_margin + r..channel.y1 - c.wall_margin - r);
                layout.centers.push((x, y));
                layout.radii.push(r);
            }
            ok = repair(&mut layout, c);
        }
        out.push(layout);
    }
    Ok(out)
}
