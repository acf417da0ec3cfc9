use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::binding::{compute_weights, BindingError, BindingTable, WeightOptions};
use crate::geometry::{
    convex_hull, load_obj_file, proxy, simplify_hull, tetrahedralize_and_mass, write_obj_file, ControlMesh,
    ControlMeshError, Hull, HullError, ObjError, SimplifyError, SurfaceMesh, Vec3,
};
use crate::vehicle::{assemble, VehicleError, VehicleWorld};

use super::config::{parse_scenario, ConfigError, MeshSource, Scenario};
use super::snapshot::{encode_snapshot, DeformationSnapshot, SnapshotError};

/// Inset applied to vertices created by proxy refinement (m).
const REFINE_INSET: f64 = 0.002;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("mesh {path}: {source}")]
    Mesh { path: PathBuf, source: ObjError },
    #[error("convex hull: {0}")]
    Hull(#[from] HullError),
    #[error("level of detail: {0}")]
    Simplify(#[from] SimplifyError),
    #[error("control mesh: {0}")]
    Control(#[from] ControlMeshError),
    #[error("binding: {0}")]
    Binding(#[from] BindingError),
    #[error("simulation: {0}")]
    Vehicle(#[from] VehicleError),
    #[error("snapshot: {0}")]
    Snapshot(#[from] SnapshotError),
    #[error("{0}")]
    Invalid(String),
}

impl HarnessError {
    /// Process exit code: 1 for bad input, 2 for I/O failures, 3 for a diverged solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io { .. } => 2,
            HarnessError::Mesh {
                source: ObjError::Io(_),
                ..
            } => 2,
            HarnessError::Vehicle(e) if e.is_divergence() => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}

/// Every stage of turning a render mesh into a control shell.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub surface: SurfaceMesh,
    pub hull: Hull,
    pub lod: Hull,
    pub control: ControlMesh,
    pub binding: BindingTable,
    /// Requested budget when it exceeded the hull and was clamped.
    pub clamped_from: Option<usize>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, HarnessError> {
    let text = fs::read_to_string(path).map_err(HarnessError::io(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, base).map_err(|source| HarnessError::Config {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_surface(source: &MeshSource) -> Result<SurfaceMesh, HarnessError> {
    match source {
        MeshSource::File(path) => load_obj_file(path).map_err(|source| HarnessError::Mesh {
            path: path.clone(),
            source,
        }),
        MeshSource::Proxy { stations, ring, refine } => {
            let coarse = proxy::car_proxy(*stations, *ring);
            Ok(proxy::refine(&coarse, *refine, REFINE_INSET))
        }
    }
}

/// Reduces `hull` to `budget` vertices (clamped to what the hull has) and
/// tetrahedralizes it with `mass` spread over the solid.
pub fn control_from_hull(hull: &Hull, budget: usize, mass: f64) -> Result<(Hull, ControlMesh, Option<usize>), HarnessError> {
    let available = hull.vertex_count();
    let (target, clamped_from) = if budget > available {
        log::warn!("control budget {budget} exceeds the {available} hull vertices; clamped");
        (available, Some(budget))
    } else {
        (budget, None)
    };
    let lod = simplify_hull(hull, target)?;
    let control = tetrahedralize_and_mass(&lod, mass)?;
    Ok((lod, control, clamped_from))
}

pub fn build_pipeline(surface: SurfaceMesh, budget: usize, mass: f64, alpha: f64) -> Result<Pipeline, HarnessError> {
    let hull = convex_hull(&surface.vertices)?;
    let (lod, control, clamped_from) = control_from_hull(&hull, budget, mass)?;
    let binding = compute_weights(&surface.vertices, &control.rest_points, alpha, WeightOptions::dense())?;
    Ok(Pipeline {
        surface,
        hull,
        lod,
        control,
        binding,
        clamped_from,
    })
}

/// Builds the scenario's vehicle at its initial state with its obstacles.
pub fn build_world(scenario: &Scenario) -> Result<VehicleWorld, HarnessError> {
    let surface = load_surface(&scenario.mesh)?;
    let p = build_pipeline(surface, scenario.control_points, scenario.mass, scenario.alpha)?;
    let mut world = assemble(
        &p.surface,
        &p.control,
        p.binding,
        scenario.core.clone(),
        scenario.material,
        scenario.initial,
    )?;
    world.set_obstacles(scenario.obstacles.clone());
    Ok(world)
}

/// Surface implied by `snapshot` for the scenario's vehicle, built from
/// scratch: the mesh is reloaded and the control shell rebuilt.
pub fn reconstruct_surface(scenario: &Scenario, snapshot: &DeformationSnapshot) -> Result<Vec<Vec3>, HarnessError> {
    let world = build_world(scenario)?;
    let model = world.model();
    if snapshot.deltas.len() != model.control_rest.len() {
        return Err(HarnessError::Invalid(format!(
            "snapshot has {} deltas, vehicle has {} control points",
            snapshot.deltas.len(),
            model.control_rest.len()
        )));
    }
    Ok(model.settled_surface(&snapshot.isometry(), &snapshot.delta_vectors())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    pub frames_exported: usize,
    pub plastic_events: usize,
    pub max_strain: f64,
    pub final_speed: f64,
    pub snapshot: DeformationSnapshot,
}

pub const REPORT_FILE: &str = "report.tsv";
pub const TIMING_FILE: &str = "timing.tsv";
pub const FINAL_OBJ: &str = "final.obj";
pub const FINAL_SNAPSHOT: &str = "final.crsn";

pub fn frame_file_name(frame: u64) -> String {
    format!("frame_{frame:04}.obj")
}

/// Runs `scenario`, writing into `out_dir`:
///
/// - `frame_NNNN.obj` every `cadence` frames (live deformed surface),
/// - `report.tsv`, one deterministic row per frame,
/// - `timing.tsv`, per-frame wall times in µs,
/// - `final.obj`, the surface settled into its final rest shape,
/// - `final.crsn`, the final deformation snapshot.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<RunSummary, HarnessError> {
    fs::create_dir_all(out_dir).map_err(HarnessError::io(out_dir))?;
    let mut world = build_world(scenario)?;
    let triangles = world.model().triangles.clone();

    let report_path = out_dir.join(REPORT_FILE);
    let timing_path = out_dir.join(TIMING_FILE);
    let create = |path: &Path| fs::File::create(path).map(BufWriter::new).map_err(HarnessError::io(path));
    let mut report = create(&report_path)?;
    let mut timing = create(&timing_path)?;
    writeln!(report, "{}", crate::vehicle::FrameReport::HEADER).map_err(HarnessError::io(&report_path))?;
    writeln!(timing, "frame\tstep_us\tsync_us").map_err(HarnessError::io(&timing_path))?;

    let steps = scenario.steps();
    let mut frames_exported = 0;
    let mut max_strain: f64 = 0.0;
    for _ in 0..steps {
        if let Some(event) = scenario.drive_at(world.clock()) {
            world.drive(event.throttle, event.steer);
        }
        let frame = match world.step() {
            Ok(frame) => frame,
            Err(e) => {
                report.flush().map_err(HarnessError::io(&report_path))?;
                return Err(e.into());
            }
        };
        max_strain = max_strain.max(frame.max_strain);
        writeln!(report, "{}", frame.row()).map_err(HarnessError::io(&report_path))?;
        writeln!(
            timing,
            "{}\t{}\t{}",
            frame.frame,
            frame.step_time.as_micros(),
            frame.sync_time.as_micros()
        )
        .map_err(HarnessError::io(&timing_path))?;
        if frame.frame % scenario.cadence as u64 == 0 {
            let path = out_dir.join(frame_file_name(frame.frame));
            write_obj_file(&path, world.surface(), &triangles).map_err(HarnessError::io(&path))?;
            frames_exported += 1;
        }
    }
    report.flush().map_err(HarnessError::io(&report_path))?;
    timing.flush().map_err(HarnessError::io(&timing_path))?;

    let final_obj = out_dir.join(FINAL_OBJ);
    write_obj_file(&final_obj, &world.settled_surface(), &triangles).map_err(HarnessError::io(&final_obj))?;
    let snapshot = DeformationSnapshot::capture(&world, 0);
    let snapshot_path = out_dir.join(FINAL_SNAPSHOT);
    fs::write(&snapshot_path, encode_snapshot(&snapshot)).map_err(HarnessError::io(&snapshot_path))?;

    Ok(RunSummary {
        steps,
        frames_exported,
        plastic_events: world.plastic_events_total(),
        max_strain,
        final_speed: world.core().speed(),
        snapshot,
    })
}
