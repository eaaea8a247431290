use cht_data::{GridField, GridGeom, Rect};
use libm::erf;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Result, SolverError};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bump {
    pub cx: f64,
    pub cy: f64,
    pub sigma: f64,
    pub weight: f64,
}

/// Heat flux q0(x, y) on the heated plate (W/m^2): a normalized sum of
/// Gaussian bumps whose base integral over the plate equals `total_power`,
/// multiplied by a dimensionless scale factor. Non-negative everywhere and
/// deterministic per seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluxField {
    pub bumps: Vec<Bump>,
    /// Multiplier that normalizes the base profile to `total_power`.
    pub norm: f64,
    pub scale_factor: f64,
    /// Base (scale 1) integral over the plate, in W.
    pub total_power: f64,
    pub domain: Rect,
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn bump_integral(b: &Bump, d: &Rect) -> f64 {
    // separable truncated-Gaussian integral via erf
    let ix = erf((d.x1 - b.cx) / (b.sigma * SQRT2)) - erf((d.x0 - b.cx) / (b.sigma * SQRT2));
    let iy = erf((d.y1 - b.cy) / (b.sigma * SQRT2)) - erf((d.y0 - b.cy) / (b.sigma * SQRT2));
    b.weight * b.sigma * b.sigma * (std::f64::consts::PI / 2.0) * ix * iy
}

impl FluxField {
    /// The q0 = 0 profile.
    pub fn zero(domain: Rect) -> Self {
        FluxField {
            bumps: Vec::new(),
            norm: 0.0,
            scale_factor: 1.0,
            total_power: 0.0,
            domain,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.is_empty() || self.norm == 0.0 || self.scale_factor == 0.0
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        let base: f64 = self
            .bumps
            .iter()
            .map(|b| {
                let dx = x - b.cx;
                let dy = y - b.cy;
                b.weight * (-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma)).exp()
            })
            .sum();
        self.scale_factor * self.norm * base
    }

    /// Analytic integral of q0 over the plate: total_power * scale_factor.
    pub fn integral(&self) -> f64 {
        let base: f64 = self.bumps.iter().map(|b| bump_integral(b, &self.domain)).sum();
        self.scale_factor * self.norm * base
    }

    /// Returns the same profile at a different scale factor.
    pub fn with_scale(&self, scale_factor: f64) -> Self {
        FluxField {
            scale_factor,
            ..self.clone()
        }
    }

    /// Samples the profile at pixel centers of an n_x-column grid.
    pub fn sample_grid(&self, n_x: usize) -> Result<GridField> {
        let geom = GridGeom::new(&self.domain, n_x).map_err(SolverError::Data)?;
        let mut values = Vec::with_capacity(geom.n_x * geom.n_y);
        for row in 0..geom.n_y {
            for col in 0..geom.n_x {
                let r = geom.pixel_rect(row, col);
                values.push(self.value(0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1)) as f32);
            }
        }
        Ok(GridField {
            name: "q0".to_string(),
            units: "W/m^2".to_string(),
            n_y: geom.n_y,
            n_x: geom.n_x,
            pixel_size: geom.pixel,
            origin: geom.origin,
            values,
            geometry_channel: false,
        })
    }
}

/// Draws a smooth non-negative flux profile: 3-6 Gaussian bumps placed in
/// the plate interior, normalized so the base integral equals
/// `total_power`, then multiplied by `scale_factor`.
pub fn gen_flux(
    seed: u64,
    scale_factor: f64,
    domain: &Rect,
    total_power: f64,
) -> Result<FluxField> {
    if !(scale_factor > 0.0) {
        return Err(SolverError::InvalidArg(format!(
            "scale_factor must be > 0, got {scale_factor}"
        )));
    }
    if !(total_power > 0.0) {
        return Err(SolverError::InvalidArg(format!(
            "total_power must be > 0, got {total_power}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_bumps = rng.gen_range(3..=6);
    let smin = 0.05 * domain.width().min(domain.height());
    let smax = 0.18 * domain.width().min(domain.height());
    let bumps: Vec<Bump> = (0..n_bumps)
        .map(|_| Bump {
            cx: domain.x0 + rng.gen_range(0.1..0.9) * domain.width(),
            cy: domain.y0 + rng.gen_range(0.1..0.9) * domain.height(),
            sigma: rng.gen_range(smin..smax),
            weight: rng.gen_range(0.5..1.5),
        })
        .collect();
    let mut flux = FluxField {
        bumps,
        norm: 1.0,
        scale_factor,
        total_power,
        domain: *domain,
    };
    let base: f64 = flux.bumps.iter().map(|b| bump_integral(b, domain)).sum();
    flux.norm = total_power / base;
    Ok(flux)
}

/// Accumulated heat: integral of the plate power over [0, t_final] minus
/// the advected outlet enthalpy, trapezoidal in time over the outlet
/// temperature series (t, T_outlet) spanning exactly [0, t_final].
pub fn accumulated_heat(
    flux: &FluxField,
    t_outlet_series: &[(f64, f64)],
    t_inlet: f64,
    mdot: f64,
    cp: f64,
    t_final: f64,
) -> Result<f64> {
    if t_final < 0.0 {
        return Err(SolverError::NegativeTimeSpan(t_final));
    }
    if t_final > 0.0 {
        let ok = t_outlet_series.len() >= 2
            && t_outlet_series.windows(2).all(|w| w[1].0 > w[0].0)
            && t_outlet_series[0].0.abs() <= 1e-12 * t_final.max(1.0)
            && (t_outlet_series[t_outlet_series.len() - 1].0 - t_final).abs()
                <= 1e-9 * t_final.max(1.0);
        if !ok {
            return Err(SolverError::InvalidArg(
                "outlet series must be strictly increasing and span [0, t_final]".into(),
            ));
        }
    }
    let supplied = flux.integral() * t_final;
    let mut advected = 0.0;
    for w in t_outlet_series.windows(2) {
        let (t0, y0) = w[0];
        let (t1, y1) = w[1];
        advected += 0.5 * ((y0 - t_inlet) + (y1 - t_inlet)) * (t1 - t0);
    }
    Ok(supplied - mdot * cp * advected)
}
