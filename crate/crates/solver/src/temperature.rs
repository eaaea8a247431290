use crate::{DomainSpec, FluxField, Result, SolveResult, SolverError};

/// Steady conjugate temperature field over fluid and solid cells: upwind
/// advection with the flow's face velocities (zero at and inside solids, so
/// solid cells conduct), harmonic-mean face conductivity for the
/// solid-fluid interface flux balance, the plate heat flux as a volumetric
/// source q0 / H, advective-only inlet at the inlet temperature, advective
/// outflow, adiabatic walls.
pub fn solve_temperature(
    flow: &SolveResult,
    flux: &FluxField,
    domain: &DomainSpec,
) -> Result<SolveResult> {
    if !flow.converged {
        return Err(SolverError::FlowNotConverged);
    }
    domain.validate()?;
    let (nx, ny, dx, dy) = (flow.nx, flow.ny, flow.dx, flow.dy);
    let n = nx * ny;
    let c = |i: usize, j: usize| j * nx + i;
    let ui = |i: usize, j: usize| j * (nx + 1) + i;
    let vi = |i: usize, j: usize| j * nx + i;

    let mut out = flow.clone();
    if flux.is_zero() {
        out.t = Some(vec![domain.t_inlet; n]);
        return Ok(out);
    }

    let rho_cp = domain.rho * domain.cp;
    let k_of = |cell: usize| if flow.solid[cell] { domain.k_solid } else { domain.k_fluid };
    let harm = |a: f64, b: f64| 2.0 * a * b / (a + b);

    // five-band assembly: flux form sum_f [F+ T_P - F- T_nb] - conduction
    let mut diag = vec![0.0f64; n];
    let mut east = vec![0.0f64; n];
    let mut west = vec![0.0f64; n];
    let mut north = vec![0.0f64; n];
    let mut south = vec![0.0f64; n];
    let mut rhs = vec![0.0f64; n];

    for j in 0..ny {
        for i in 0..nx {
            let p = c(i, j);
            let kp = k_of(p);
            // east face
            if i + 1 < nx {
                let g = harm(kp, k_of(c(i + 1, j))) * dy / dx;
                let f = rho_cp * flow.u_face[ui(i + 1, j)] * dy;
                diag[p] += g + f.max(0.0);
                east[p] = -(g + (-f).max(0.0));
            } else {
                // outlet: advective outflow only
                let f = rho_cp * flow.u_face[ui(nx, j)] * dy;
                diag[p] += f.max(0.0);
                rhs[p] += (-f).max(0.0) * domain.t_inlet;
            }
            // west face
            if i > 0 {
                let g = harm(kp, k_of(c(i - 1, j))) * dy / dx;
                let f = -rho_cp * flow.u_face[ui(i, j)] * dy; // outward normal -x
                diag[p] += g + f.max(0.0);
                west[p] = -(g + (-f).max(0.0));
            } else {
                // inlet: inflow enthalpy at the inlet temperature
                let f = -rho_cp * flow.u_face[ui(0, j)] * dy;
                diag[p] += f.max(0.0);
                rhs[p] += (-f).max(0.0) * domain.t_inlet;
            }
            // north face
            if j + 1 < ny {
                let g = harm(kp, k_of(c(i, j + 1))) * dx / dy;
                let f = rho_cp * flow.v_face[vi(i, j + 1)] * dx;
                diag[p] += g + f.max(0.0);
                north[p] = -(g + (-f).max(0.0));
            }
            // south face
            if j > 0 {
                let g = harm(kp, k_of(c(i, j - 1))) * dx / dy;
                let f = -rho_cp * flow.v_face[vi(i, j)] * dx;
                diag[p] += g + f.max(0.0);
                south[p] = -(g + (-f).max(0.0));
            }
            // plate heat flux as a per-depth volumetric source
            let x = (i as f64 + 0.5) * dx;
            let y = (j as f64 + 0.5) * dy;
            rhs[p] += flux.value(x, y) * dx * dy / domain.height;
        }
    }

    let apply = |v: &[f64], out: &mut [f64]| {
        for j in 0..ny {
            for i in 0..nx {
                let p = c(i, j);
                let mut acc = diag[p] * v[p];
                if i + 1 < nx {
                    acc += east[p] * v[p + 1];
                }
                if i > 0 {
                    acc += west[p] * v[p - 1];
                }
                if j + 1 < ny {
                    acc += north[p] * v[p + nx];
                }
                if j > 0 {
                    acc += south[p] * v[p - nx];
                }
                out[p] = acc;
            }
        }
    };

    // Jacobi-preconditioned BiCGSTAB from a uniform inlet-temperature guess
    let mut x = vec![domain.t_inlet; n];
    let mut r = vec![0.0f64; n];
    apply(&x, &mut r);
    for p in 0..n {
        r[p] = rhs[p] - r[p];
    }
    let b_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let tol = 1e-12;
    let mut converged = r.iter().map(|v| v * v).sum::<f64>().sqrt() <= tol * b_norm;

    if !converged {
        let r_hat = r.clone();
        let mut rho_prev = 1.0f64;
        let mut alpha = 1.0f64;
        let mut omega = 1.0f64;
        let mut v = vec![0.0f64; n];
        let mut pvec = vec![0.0f64; n];
        let mut s = vec![0.0f64; n];
        let mut t = vec![0.0f64; n];
        let mut phat = vec![0.0f64; n];
        let mut shat = vec![0.0f64; n];
        for iter in 0..20_000 {
            let rho: f64 = r_hat.iter().zip(&r).map(|(a, b)| a * b).sum();
            if rho.abs() < 1e-300 {
                break;
            }
            if iter == 0 {
                pvec.copy_from_slice(&r);
            } else {
                let beta = (rho / rho_prev) * (alpha / omega);
                for p in 0..n {
                    pvec[p] = r[p] + beta * (pvec[p] - omega * v[p]);
                }
            }
            for p in 0..n {
                phat[p] = pvec[p] / diag[p];
            }
            apply(&phat, &mut v);
            let rhv: f64 = r_hat.iter().zip(&v).map(|(a, b)| a * b).sum();
            if rhv.abs() < 1e-300 {
                break;
            }
            alpha = rho / rhv;
            for p in 0..n {
                s[p] = r[p] - alpha * v[p];
            }
            if s.iter().map(|v| v * v).sum::<f64>().sqrt() <= tol * b_norm {
                for p in 0..n {
                    x[p] += alpha * phat[p];
                }
                converged = true;
                break;
            }
            for p in 0..n {
                shat[p] = s[p] / diag[p];
            }
            apply(&shat, &mut t);
            let tt: f64 = t.iter().map(|v| v * v).sum();
            if tt < 1e-300 {
                break;
            }
            omega = t.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / tt;
            for p in 0..n {
                x[p] += alpha * phat[p] + omega * shat[p];
                r[p] = s[p] - omega * t[p];
            }
            if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= tol * b_norm {
                converged = true;
                break;
            }
            rho_prev = rho;
        }
    }

    out.t = Some(x);
    out.converged = flow.converged && converged;
    Ok(out)
}

/// Flux-weighted outlet bulk temperature of a solved field.
pub fn outlet_bulk_temperature(result: &SolveResult) -> f64 {
    let t = result.t.as_ref().expect("temperature field");
    let nx = result.nx;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..result.ny {
        let u = result.u_face[j * (nx + 1) + nx];
        num += u * t[j * nx + nx - 1];
        den += u;
    }
    if den.abs() > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}
