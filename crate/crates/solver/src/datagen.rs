use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{
    gen_flux, sample_layouts, solve_flow, solve_temperature, DomainSpec, FlowOptions, FluxField,
    LayoutConstraints, PinLayout, Result, SolveResult, SolverError,
};

/// Dataset-generation configuration; serialized verbatim into the output
/// directory and hashed for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    /// Number of layouts to sample (non-converged ones are excluded later).
    pub n: usize,
    pub seed: u64,
    pub grid_n: usize,
    pub flux_scale: f64,
    /// Base plate power in W before scaling.
    pub total_power: f64,
    pub domain: DomainSpec,
    pub constraints: LayoutConstraints,
    pub flow: FlowOptionsConfig,
}

/// Serializable subset of [`FlowOptions`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowOptionsConfig {
    pub max_outer: usize,
    pub tol: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n: 64,
            seed: 0,
            grid_n: 256,
            flux_scale: 1.0,
            total_power: 750.0,
            domain: DomainSpec::default(),
            constraints: LayoutConstraints::default(),
            flow: FlowOptionsConfig {
                max_outer: 4000,
                tol: 1e-6,
            },
        }
    }
}

impl GenConfig {
    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            max_outer: self.flow.max_outer,
            tol: self.flow.tol,
            ..FlowOptions::default()
        }
    }

    pub fn provenance(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        format!("{:x}", h.finalize())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleStatus {
    pub id: String,
    pub converged: bool,
    pub final_residual: Option<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSummary {
    pub statuses: Vec<SampleStatus>,
    pub converged_ids: Vec<String>,
    pub provenance: String,
}

fn write_faces(dir: &Path, result: &SolveResult) -> Result<()> {
    let meta = serde_json::json!({
        "nx": result.nx, "ny": result.ny, "dx": result.dx, "dy": result.dy,
    });
    std::fs::write(dir.join("faces.json"), serde_json::to_string(&meta)?)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("faces.bin"))?);
    for &v in result.u_face.iter().chain(&result.v_face) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one sample end to end and writes its directory. Returns the status
/// (failures are recorded, never silently dropped).
fn run_sample(
    id: &str,
    layout: &PinLayout,
    flux: &FluxField,
    cfg: &GenConfig,
    dir: &Path,
) -> SampleStatus {
    let start = Instant::now();
    std::fs::create_dir_all(dir).expect("sample dir");
    let layout_json = std::fs::File::create(dir.join("layout.json")).expect("layout file");
    serde_json::to_writer(std::io::BufWriter::new(layout_json), layout).expect("layout json");

    let mut status = SampleStatus {
        id: id.to_string(),
        converged: false,
        final_residual: None,
        iterations: 0,
        wall_time_s: 0.0,
        error: None,
    };
    let run = || -> Result<(SolveResult, bool)> {
        let flow = solve_flow(layout, &cfg.domain, cfg.grid_n, &cfg.flow_options())?;
        if !flow.converged {
            return Ok((flow, false));
        }
        let full = solve_temperature(&flow, flux, &cfg.domain)?;
        let ok = full.converged;
        Ok((full, ok))
    };
    match run() {
        Ok((result, ok)) => {
            status.converged = ok;
            status.final_residual = result.residuals.last().copied();
            status.iterations = result.residuals.len();
            let mesh = result.mesh().expect("mesh");
            mesh.save(dir).expect("mesh save");
            write_faces(dir, &result).expect("faces");
        }
        Err(e) => status.error = Some(e.to_string()),
    }
    status.wall_time_s = start.elapsed().as_secs_f64();
    let f = std::fs::File::create(dir.join("status.json")).expect("status file");
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), &status).expect("status json");
    status
}

/// Generates `cfg.n` samples under `out`: `config.json`, `flux.json`,
/// `summary.json`, and one `samples/<id>/` directory per layout with the
/// mesh + cell fields, staggered face velocities, layout, and status.
/// Samples solve in parallel across `jobs` workers; each solve is
/// single-threaded and deterministic.
pub fn generate(cfg: &GenConfig, out: &Path, jobs: usize) -> Result<GenSummary> {
    std::fs::create_dir_all(out.join("samples"))?;
    let layouts = sample_layouts(cfg.n, cfg.seed, &cfg.domain, &cfg.constraints)?;
    let flux = gen_flux(
        cfg.seed,
        cfg.flux_scale,
        &cfg.domain.channel(),
        cfg.total_power,
    )?;
    serde_json::to_writer_pretty(
        std::io::BufWriter::new(std::fs::File::create(out.join("config.json"))?),
        cfg,
    )?;
    serde_json::to_writer_pretty(
        std::io::BufWriter::new(std::fs::File::create(out.join("flux.json"))?),
        &flux,
    )?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SolverError::InvalidArg(format!("thread pool: {e}")))?;
    let statuses: Vec<SampleStatus> = pool.install(|| {
        layouts
            .par_iter()
            .enumerate()
            .map(|(idx, layout)| {
                let id = format!("{idx:04}");
                run_sample(&id, layout, &flux, cfg, &out.join("samples").join(&id))
            })
            .collect()
    });

    let converged_ids = statuses
        .iter()
        .filter(|s| s.converged)
        .map(|s| s.id.clone())
        .collect();
    let summary = GenSummary {
        statuses,
        converged_ids,
        provenance: cfg.provenance(),
    };
    serde_json::to_writer_pretty(
        std::io::BufWriter::new(std::fs::File::create(out.join("summary.json"))?),
        &summary,
    )?;
    Ok(summary)
}

/// Reconstructs a converged flow result from a sample directory (staggered
/// faces, solid mask from the layout, cell fields from the mesh), so the
/// temperature equation can be re-solved under a different flux.
pub fn load_flow(sample_dir: &Path, cfg: &GenConfig) -> Result<SolveResult> {
    let layout: PinLayout = serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(sample_dir.join("layout.json"))?,
    ))?;
    let status: SampleStatus = serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(sample_dir.join("status.json"))?,
    ))?;
    let meta: serde_json::Value = serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(sample_dir.join("faces.json"))?,
    ))?;
    let nx = meta["nx"].as_u64().unwrap() as usize;
    let ny = meta["ny"].as_u64().unwrap() as usize;
    let dx = meta["dx"].as_f64().unwrap();
    let dy = meta["dy"].as_f64().unwrap();

    let mut bytes = Vec::new();
    std::fs::File::open(sample_dir.join("faces.bin"))?.read_to_end(&mut bytes)?;
    let mut vals = bytes.chunks_exact(8).map(|c| {
        f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
    });
    let u_face: Vec<f64> = (&mut vals).take((nx + 1) * ny).collect();
    let v_face: Vec<f64> = vals.collect();
    if u_face.len() != (nx + 1) * ny || v_face.len() != nx * (ny + 1) {
        return Err(SolverError::InvalidArg("faces.bin truncated".into()));
    }

    let grid = crate::flow::Grid::new(&cfg.domain, cfg.grid_n);
    if grid.nx != nx || grid.ny != ny {
        return Err(SolverError::InvalidArg(format!(
            "stored grid {nx}x{ny} does not match config grid {}x{}",
            grid.nx, grid.ny
        )));
    }
    let solid = grid.solid_mask(&layout);

    let mesh = cht_data::UnstructuredMesh::load(sample_dir)?;
    Ok(SolveResult {
        nx,
        ny,
        dx,
        dy,
        solid,
        p: mesh.field("p")?.to_vec(),
        u_cell: mesh.field("u")?.to_vec(),
        v_cell: mesh.field("v")?.to_vec(),
        t: mesh.fields.get("T").cloned(),
        u_face,
        v_face,
        converged: status.converged,
        residuals: vec![status.final_residual.unwrap_or(f64::NAN)],
    })
}
