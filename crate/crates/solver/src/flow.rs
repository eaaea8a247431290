use std::collections::BTreeMap;

use cht_data::UnstructuredMesh;

use crate::{DomainSpec, PinLayout, Result, SolverError};

/// SIMPLE iteration controls. The defaults converge the desk-scale cases in
/// a few hundred outer iterations.
#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub max_outer: usize,
    /// Normalized residual target for the converged flag.
    pub tol: f64,
    pub alpha_u: f64,
    pub alpha_p: f64,
    pub momentum_sweeps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            max_outer: 4000,
            tol: 1e-6,
            alpha_u: 0.7,
            alpha_p: 0.3,
            momentum_sweeps: 3,
        }
    }
}

/// Steady solution fields on the structured solver grid. Velocities are
/// kept both staggered (faces, for conservative re-solves) and
/// cell-centered (for rasterization); solid cells carry zero p/u/v.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub solid: Vec<bool>,
    pub p: Vec<f64>,
    pub u_cell: Vec<f64>,
    pub v_cell: Vec<f64>,
    pub t: Option<Vec<f64>>,
    /// x-velocity at vertical faces, (nx+1) * ny.
    pub u_face: Vec<f64>,
    /// y-velocity at horizontal faces, nx * (ny+1).
    pub v_face: Vec<f64>,
    pub converged: bool,
    pub residuals: Vec<f64>,
}

impl SolveResult {
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Velocity magnitude per cell (zero in solids).
    pub fn vel_magnitude(&self) -> Vec<f64> {
        self.u_cell
            .iter()
            .zip(&self.v_cell)
            .map(|(&u, &v)| (u * u + v * v).sqrt())
            .collect()
    }

    /// Rectangle-cell mesh carrying p, u, v, velocity magnitude, and (when
    /// solved) temperature.
    pub fn mesh(&self) -> Result<UnstructuredMesh> {
        let mut fields = BTreeMap::new();
        fields.insert("p".to_string(), self.p.clone());
        fields.insert("u".to_string(), self.u_cell.clone());
        fields.insert("v".to_string(), self.v_cell.clone());
        fields.insert("vel".to_string(), self.vel_magnitude());
        if let Some(t) = &self.t {
            fields.insert("T".to_string(), t.clone());
        }
        Ok(UnstructuredMesh::structured(
            self.nx,
            self.ny,
            (0.0, 0.0),
            self.dx,
            self.dy,
            fields,
        )?)
    }

    /// Net volumetric flux (per depth) through the transverse cut at face
    /// column `i`.
    pub fn cut_flux(&self, i: usize) -> f64 {
        (0..self.ny)
            .map(|j| self.u_face[j * (self.nx + 1) + i] * self.dy)
            .sum()
    }
}

pub(crate) struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn new(domain: &DomainSpec, grid_n: usize) -> Self {
        let nx = grid_n;
        let ny = ((grid_n as f64) * domain.l_y / domain.l_x).round() as usize;
        Grid {
            nx,
            ny,
            dx: domain.l_x / nx as f64,
            dy: domain.l_y / ny as f64,
        }
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ui(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn vi(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn solid_mask(&self, layout: &PinLayout) -> Vec<bool> {
        let mut solid = vec![false; self.nx * self.ny];
        for j in 0..self.ny {
            for i in 0..self.nx {
                let x = (i as f64 + 0.5) * self.dx;
                let y = (j as f64 + 0.5) * self.dy;
                solid[self.c(i, j)] = layout.contains_solid(x, y);
            }
        }
        solid
    }
}

struct Coeffs {
    ae: Vec<f64>,
    aw: Vec<f64>,
    an: Vec<f64>,
    as_: Vec<f64>,
    ap: Vec<f64>,
    b: Vec<f64>,
}

impl Coeffs {
    fn zeros(len: usize) -> Self {
        Coeffs {
            ae: vec![0.0; len],
            aw: vec![0.0; len],
            an: vec![0.0; len],
            as_: vec![0.0; len],
            ap: vec![0.0; len],
            b: vec![0.0; len],
        }
    }
}

/// Steady 2-D incompressible laminar flow around the pin layout: SIMPLE
/// pressure-velocity coupling, first-order upwind convection, central
/// diffusion, solid cells blanked with no-slip staircase boundaries,
/// parabolic mass-flow inlet on the left edge, pressure outlet on the right.
///
/// The converged flag requires the normalized momentum and mass residuals
/// to drop below `opts.tol` within the iteration cap; callers exclude
/// unconverged samples downstream.
pub fn solve_flow(
    layout: &PinLayout,
    domain: &DomainSpec,
    grid_n: usize,
    opts: &FlowOptions,
) -> Result<SolveResult> {
    domain.validate()?;
    let g = Grid::new(domain, grid_n);
    let (nx, ny, dx, dy) = (g.nx, g.ny, g.dx, g.dy);
    if layout.n_pins() > 0 {
        let gap = layout.narrowest_gap();
        let need = 3.0 * dx.max(dy);
        if gap < need {
            return Err(SolverError::GapUnderResolved { gap, need });
        }
    }
    let solid = g.solid_mask(layout);
    let fluid = |i: usize, j: usize| !solid[g.c(i, j)];

    let (rho, mu) = (domain.rho, domain.mu);
    let q2d = domain.volumetric_flow() / domain.height; // m^2/s per depth
    let u_ref = domain.mean_velocity();
    let mass_scale = q2d.abs().max(1e-30);
    let mom_scale = (rho * q2d * u_ref).abs().max(1e-30);

    // face classification: active (unknown) vs fixed
    let mut u_face = vec![0.0f64; (nx + 1) * ny];
    let mut v_face = vec![0.0f64; nx * (ny + 1)];
    let mut u_active = vec![false; (nx + 1) * ny];
    let mut v_active = vec![false; nx * (ny + 1)];
    for j in 0..ny {
        for i in 1..nx {
            u_active[g.ui(i, j)] = fluid(i - 1, j) && fluid(i, j);
        }
        // inlet profile at the face centroid
        if fluid(0, j) {
            u_face[g.ui(0, j)] = domain.inlet_profile((j as f64 + 0.5) * dy);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            v_active[g.vi(i, j)] = fluid(i, j - 1) && fluid(i, j);
        }
    }
    // initial guess: inlet profile everywhere the face is active
    for j in 0..ny {
        let prof = domain.inlet_profile((j as f64 + 0.5) * dy);
        for i in 1..nx {
            if u_active[g.ui(i, j)] {
                u_face[g.ui(i, j)] = prof;
            }
        }
        if fluid(nx - 1, j) {
            u_face[g.ui(nx, j)] = prof;
        }
    }

    let mut p = vec![0.0f64; nx * ny];

    // fluid-cell index map for the pressure system
    let fluid_ids: Vec<usize> = (0..nx * ny).filter(|&c| !solid[c]).collect();
    let mut cell_to_eq = vec![usize::MAX; nx * ny];
    for (eq, &c) in fluid_ids.iter().enumerate() {
        cell_to_eq[c] = eq;
    }

    let mut cu = Coeffs::zeros((nx + 1) * ny);
    let mut cv = Coeffs::zeros(nx * (ny + 1));
    let mut residuals = Vec::new();
    let mut converged = false;

    let n_eq = fluid_ids.len();
    let mut pc = PressureSolver::new(n_eq);

    for _outer in 0..opts.max_outer {
        // ---- u momentum assembly + residual
        let mut res_u = 0.0f64;
        for j in 0..ny {
            for i in 1..nx {
                let f = g.ui(i, j);
                if !u_active[f] {
                    continue;
                }
                let fe = rho * dy * 0.5 * (u_face[g.ui(i, j)] + u_face[g.ui(i + 1, j)]);
                let fw = rho * dy * 0.5 * (u_face[g.ui(i - 1, j)] + u_face[g.ui(i, j)]);
                let fn_ = rho * dx * 0.5 * (v_face[g.vi(i - 1, j + 1)] + v_face[g.vi(i, j + 1)]);
                let fs = rho * dx * 0.5 * (v_face[g.vi(i - 1, j)] + v_face[g.vi(i, j)]);
                let de = mu * dy / dx;
                let dn = mu * dx / dy;
                cu.ae[f] = de + (-fe).max(0.0);
                cu.aw[f] = de + fw.max(0.0);
                cu.an[f] = dn + (-fn_).max(0.0);
                cu.as_[f] = dn + fs.max(0.0);
                cu.ap[f] = cu.ae[f] + cu.aw[f] + cu.an[f] + cu.as_[f] + (fe - fw + fn_ - fs);
                cu.b[f] = (p[g.c(i - 1, j)] - p[g.c(i, j)]) * dy;

                let un = if j + 1 < ny { u_face[g.ui(i, j + 1)] } else { -u_face[f] };
                let us = if j > 0 { u_face[g.ui(i, j - 1)] } else { -u_face[f] };
                let r = cu.ap[f] * u_face[f]
                    - cu.ae[f] * u_face[g.ui(i + 1, j)]
                    - cu.aw[f] * u_face[g.ui(i - 1, j)]
                    - cu.an[f] * un
                    - cu.as_[f] * us
                    - cu.b[f];
                res_u += r.abs();
            }
        }
        res_u /= mom_scale;

        // ---- v momentum assembly + residual
        let mut res_v = 0.0f64;
        for j in 1..ny {
            for i in 0..nx {
                let f = g.vi(i, j);
                if !v_active[f] {
                    continue;
                }
                let fn_ = rho * dx * 0.5 * (v_face[g.vi(i, j)] + v_face[g.vi(i, j + 1)]);
                let fs = rho * dx * 0.5 * (v_face[g.vi(i, j - 1)] + v_face[g.vi(i, j)]);
                let fe = rho * dy * 0.5 * (u_face[g.ui(i + 1, j - 1)] + u_face[g.ui(i + 1, j)]);
                let fw = rho * dy * 0.5 * (u_face[g.ui(i, j - 1)] + u_face[g.ui(i, j)]);
                let de = mu * dy / dx;
                let dn = mu * dx / dy;
                cv.ae[f] = de + (-fe).max(0.0);
                cv.aw[f] = de + fw.max(0.0);
                cv.an[f] = dn + (-fn_).max(0.0);
                cv.as_[f] = dn + fs.max(0.0);
                cv.ap[f] = cv.ae[f] + cv.aw[f] + cv.an[f] + cv.as_[f] + (fe - fw + fn_ - fs);
                cv.b[f] = (p[g.c(i, j - 1)] - p[g.c(i, j)]) * dx;

                let ve = if i + 1 < nx { v_face[g.vi(i + 1, j)] } else { v_face[f] };
                let vw = if i > 0 { v_face[g.vi(i - 1, j)] } else { -v_face[f] };
                let r = cv.ap[f] * v_face[f]
                    - cv.ae[f] * ve
                    - cv.aw[f] * vw
                    - cv.an[f] * v_face[g.vi(i, j + 1)]
                    - cv.as_[f] * v_face[g.vi(i, j - 1)]
                    - cv.b[f];
                res_v += r.abs();
            }
        }
        res_v /= mom_scale;

        // ---- damped Jacobi momentum sweeps (under-relaxed)
        let inv_alpha = 1.0 / opts.alpha_u;
        let relax = (1.0 - opts.alpha_u) * inv_alpha;
        let u_anchor = u_face.clone();
        for _ in 0..opts.momentum_sweeps {
            let u_old = u_face.clone();
            for j in 0..ny {
                for i in 1..nx {
                    let f = g.ui(i, j);
                    if !u_active[f] {
                        continue;
                    }
                    let un = if j + 1 < ny { u_old[g.ui(i, j + 1)] } else { -u_old[f] };
                    let us = if j > 0 { u_old[g.ui(i, j - 1)] } else { -u_old[f] };
                    let num = cu.ae[f] * u_old[g.ui(i + 1, j)]
                        + cu.aw[f] * u_old[g.ui(i - 1, j)]
                        + cu.an[f] * un
                        + cu.as_[f] * us
                        + cu.b[f]
                        + relax * cu.ap[f] * u_anchor[f];
                    u_face[f] = num / (cu.ap[f] * inv_alpha);
                }
            }
        }
        let v_anchor = v_face.clone();
        for _ in 0..opts.momentum_sweeps {
            let v_old = v_face.clone();
            for j in 1..ny {
                for i in 0..nx {
                    let f = g.vi(i, j);
                    if !v_active[f] {
                        continue;
                    }
                    let ve = if i + 1 < nx { v_old[g.vi(i + 1, j)] } else { v_old[f] };
                    let vw = if i > 0 { v_old[g.vi(i - 1, j)] } else { -v_old[f] };
                    let num = cv.ae[f] * ve
                        + cv.aw[f] * vw
                        + cv.an[f] * v_old[g.vi(i, j + 1)]
                        + cv.as_[f] * v_old[g.vi(i, j - 1)]
                        + cv.b[f]
                        + relax * cv.ap[f] * v_anchor[f];
                    v_face[f] = num / (cv.ap[f] * inv_alpha);
                }
            }
        }

        // ---- outlet: zero-gradient, then scale to the inlet flux
        let q_in: f64 = (0..ny).map(|j| u_face[g.ui(0, j)] * dy).sum();
        for j in 0..ny {
            u_face[g.ui(nx, j)] = if fluid(nx - 1, j) { u_face[g.ui(nx - 1, j)] } else { 0.0 };
        }
        let q_out: f64 = (0..ny).map(|j| u_face[g.ui(nx, j)] * dy).sum();
        if q_out.abs() > 1e-14 {
            let s = q_in / q_out;
            for j in 0..ny {
                u_face[g.ui(nx, j)] *= s;
            }
        }

        // ---- pressure correction
        // face coefficients d = area / relaxed a_P; fixed faces get 0
        let d_of_u = |f: usize| -> f64 {
            if u_active[f] {
                dy / (cu.ap[f] * inv_alpha)
            } else {
                0.0
            }
        };
        let d_of_v = |f: usize| -> f64 {
            if v_active[f] {
                dx / (cv.ap[f] * inv_alpha)
            } else {
                0.0
            }
        };

        let mut res_mass = 0.0f64;
        for (eq, &c) in fluid_ids.iter().enumerate() {
            let (i, j) = (c % nx, c / nx);
            let de = if i + 1 == nx {
                // pressure outlet: anchor through the neighboring face
                if u_active[g.ui(nx - 1, j)] {
                    dy / (cu.ap[g.ui(nx - 1, j)] * inv_alpha)
                } else {
                    0.0
                }
            } else {
                d_of_u(g.ui(i + 1, j))
            };
            let dw = d_of_u(g.ui(i, j));
            let dn = d_of_v(g.vi(i, j + 1));
            let ds = d_of_v(g.vi(i, j));

            let div = (u_face[g.ui(i + 1, j)] - u_face[g.ui(i, j)]) * dy
                + (v_face[g.vi(i, j + 1)] - v_face[g.vi(i, j)]) * dx;
            res_mass += div.abs();

            let mut diag = dy * de + dy * dw + dx * dn + dx * ds;
            let mut east = 0.0;
            if i + 1 < nx && !solid[g.c(i + 1, j)] {
                east = -dy * de;
            }
            let mut west = 0.0;
            if i > 0 && !solid[g.c(i - 1, j)] {
                west = -dy * dw;
            }
            let mut north = 0.0;
            if j + 1 < ny && !solid[g.c(i, j + 1)] {
                north = -dx * dn;
            }
            let mut south = 0.0;
            if j > 0 && !solid[g.c(i, j - 1)] {
                south = -dx * ds;
            }
            if diag == 0.0 {
                // isolated fluid pocket: pin its correction to zero
                diag = 1.0;
                east = 0.0;
                west = 0.0;
                north = 0.0;
                south = 0.0;
            }
            pc.set_row(eq, diag, east, west, north, south, -div);
        }
        res_mass /= mass_scale;

        pc.solve(&fluid_ids, &cell_to_eq, nx, 200, 0.05);

        // ---- corrections
        for (eq, &c) in fluid_ids.iter().enumerate() {
            p[c] += opts.alpha_p * pc.x[eq];
        }
        let pprime = |i: usize, j: usize| -> f64 {
            let c = g.c(i, j);
            if solid[c] {
                0.0
            } else {
                pc.x[cell_to_eq[c]]
            }
        };
        for j in 0..ny {
            for i in 1..nx {
                let f = g.ui(i, j);
                if u_active[f] {
                    u_face[f] += d_of_u(f) * (pprime(i - 1, j) - pprime(i, j));
                }
            }
            // outlet faces corrected against the zero outlet pressure
            if fluid(nx - 1, j) && u_active[g.ui(nx - 1, j)] {
                let d = dy / (cu.ap[g.ui(nx - 1, j)] * inv_alpha);
                u_face[g.ui(nx, j)] += d * pprime(nx - 1, j);
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let f = g.vi(i, j);
                if v_active[f] {
                    v_face[f] += d_of_v(f) * (pprime(i, j - 1) - pprime(i, j));
                }
            }
        }

        let res = res_u.max(res_v).max(res_mass);
        residuals.push(res);
        if res < opts.tol {
            converged = true;
            break;
        }
    }

    // cell-centered fields (solids zeroed; p referenced to outlet)
    let mut u_cell = vec![0.0; nx * ny];
    let mut v_cell = vec![0.0; nx * ny];
    let mut p_out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let c = g.c(i, j);
            if solid[c] {
                continue;
            }
            u_cell[c] = 0.5 * (u_face[g.ui(i, j)] + u_face[g.ui(i + 1, j)]);
            v_cell[c] = 0.5 * (v_face[g.vi(i, j)] + v_face[g.vi(i, j + 1)]);
            p_out[c] = p[c];
        }
    }

    Ok(SolveResult {
        nx,
        ny,
        dx,
        dy,
        solid,
        p: p_out,
        u_cell,
        v_cell,
        t: None,
        u_face,
        v_face,
        converged,
        residuals,
    })
}

/// Five-band SPD solver: Jacobi-preconditioned conjugate gradients over the
/// fluid-cell subset.
struct PressureSolver {
    diag: Vec<f64>,
    east: Vec<f64>,
    west: Vec<f64>,
    north: Vec<f64>,
    south: Vec<f64>,
    rhs: Vec<f64>,
    pub x: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    d: Vec<f64>,
    q: Vec<f64>,
}

impl PressureSolver {
    fn new(n: usize) -> Self {
        PressureSolver {
            diag: vec![0.0; n],
            east: vec![0.0; n],
            west: vec![0.0; n],
            north: vec![0.0; n],
            south: vec![0.0; n],
            rhs: vec![0.0; n],
            x: vec![0.0; n],
            r: vec![0.0; n],
            z: vec![0.0; n],
            d: vec![0.0; n],
            q: vec![0.0; n],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn set_row(&mut self, eq: usize, diag: f64, e: f64, w: f64, n: f64, s: f64, rhs: f64) {
        self.diag[eq] = diag;
        self.east[eq] = e;
        self.west[eq] = w;
        self.north[eq] = n;
        self.south[eq] = s;
        self.rhs[eq] = rhs;
    }

    fn apply(
        &self,
        v: &[f64],
        out: &mut [f64],
        fluid_ids: &[usize],
        cell_to_eq: &[usize],
        nx: usize,
    ) {
        for (eq, &c) in fluid_ids.iter().enumerate() {
            let (i, j) = (c % nx, c / nx);
            let mut acc = self.diag[eq] * v[eq];
            if self.east[eq] != 0.0 {
                acc += self.east[eq] * v[cell_to_eq[j * nx + i + 1]];
            }
            if self.west[eq] != 0.0 {
                acc += self.west[eq] * v[cell_to_eq[j * nx + i - 1]];
            }
            if self.north[eq] != 0.0 {
                acc += self.north[eq] * v[cell_to_eq[(j + 1) * nx + i]];
            }
            if self.south[eq] != 0.0 {
                acc += self.south[eq] * v[cell_to_eq[(j - 1) * nx + i]];
            }
            out[eq] = acc;
        }
    }

    /// Solves to the given relative residual (or iteration cap), starting
    /// from x = 0.
    fn solve(
        &mut self,
        fluid_ids: &[usize],
        cell_to_eq: &[usize],
        nx: usize,
        max_iter: usize,
        rel_tol: f64,
    ) {
        let n = self.diag.len();
        self.x[..n].fill(0.0);
        self.r.copy_from_slice(&self.rhs);
        let b_norm: f64 = self.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b_norm == 0.0 {
            return;
        }
        for eq in 0..n {
            self.z[eq] = self.r[eq] / self.diag[eq];
        }
        self.d.copy_from_slice(&self.z);
        let mut rz: f64 = self.r.iter().zip(&self.z).map(|(a, b)| a * b).sum();
        for _ in 0..max_iter {
            let mut q = std::mem::take(&mut self.q);
            self.apply(&self.d, &mut q, fluid_ids, cell_to_eq, nx);
            self.q = q;
            let dq: f64 = self.d.iter().zip(&self.q).map(|(a, b)| a * b).sum();
            if dq <= 0.0 {
                break;
            }
            let alpha = rz / dq;
            let mut r_norm = 0.0f64;
            for eq in 0..n {
                self.x[eq] += alpha * self.d[eq];
                self.r[eq] -= alpha * self.q[eq];
                r_norm += self.r[eq] * self.r[eq];
            }
            if r_norm.sqrt() <= rel_tol * b_norm {
                break;
            }
            for eq in 0..n {
                self.z[eq] = self.r[eq] / self.diag[eq];
            }
            let rz_new: f64 = self.r.iter().zip(&self.z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for eq in 0..n {
                self.d[eq] = self.z[eq] + beta * self.d[eq];
            }
        }
    }
}
