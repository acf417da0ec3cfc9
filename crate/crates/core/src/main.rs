use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crumple::binding::{compute_weights, encode_binding, WeightOptions, DEFAULT_ALPHA};
use crumple::geometry::{
    convex_hull, load_obj_file, proxy, simplify_hull, tetrahedralize_and_mass, write_obj_file, SurfaceMesh,
};
use crumple::harness::{
    bench_scaling, decode_snapshot, load_scenario, run_scenario, HarnessError, DeformationSnapshot,
};

#[derive(Parser)]
#[command(name = "crumple", version, about = "Real-time vehicle body deformation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convex hull of a mesh, optionally reduced to N vertices.
    Hull {
        mesh: PathBuf,
        #[arg(long)]
        points: Option<usize>,
        #[arg(short, long, default_value = "hull.obj")]
        output: PathBuf,
    },
    /// Binding weights of a mesh against a control hull.
    Bind {
        mesh: PathBuf,
        hull: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(short, long, default_value = "binding.crbw")]
        output: PathBuf,
    },
    /// Run a scenario file and export frames, report and snapshot.
    Simulate {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Time frames per control budget on a fixed mesh.
    Bench {
        mesh: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        budgets: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
    /// Deformation snapshot tools.
    Snapshot {
        #[command(subcommand)]
        action: SnapshotAction,
    },
    /// Write the built-in car proxy mesh.
    Proxy {
        #[arg(long, default_value_t = 31)]
        stations: usize,
        #[arg(long, default_value_t = 32)]
        ring: usize,
        /// Subdivide every triangle into refine² pieces.
        #[arg(long, default_value_t = 1)]
        refine: usize,
        #[arg(short, long, default_value = "car.obj")]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum SnapshotAction {
    /// Print a snapshot in readable form.
    Decode { file: PathBuf },
}

fn load_mesh(path: &Path) -> Result<SurfaceMesh, HarnessError> {
    load_obj_file(path).map_err(|source| HarnessError::Mesh {
        path: path.to_path_buf(),
        source,
    })
}

fn hull(mesh: &Path, points: Option<usize>, output: &Path) -> Result<(), HarnessError> {
    let surface = load_mesh(mesh)?;
    let mut hull = convex_hull(&surface.vertices)?;
    let full = hull.vertex_count();
    if let Some(target) = points {
        if target > full {
            log::warn!("requested {target} points, hull has {full}; keeping all");
        } else {
            hull = simplify_hull(&hull, target)?;
        }
    }
    write_obj_file(output, &hull.points, &hull.triangles).map_err(HarnessError::io(output))?;
    println!(
        "{} input vertices, hull {} vertices, kept {} ({} triangles, volume {:.6} m³) -> {}",
        surface.vertices.len(),
        full,
        hull.vertex_count(),
        hull.triangles.len(),
        hull.volume(),
        output.display()
    );
    Ok(())
}

fn bind(mesh: &Path, hull_path: &Path, alpha: f64, output: &Path) -> Result<(), HarnessError> {
    let surface = load_mesh(mesh)?;
    let cage = load_mesh(hull_path)?;
    let hull = convex_hull(&cage.vertices)?;
    let control = tetrahedralize_and_mass(&hull, 1.0)?;
    let table = compute_weights(&surface.vertices, &control.rest_points, alpha, WeightOptions::dense())?;
    fs::write(output, encode_binding(&table)).map_err(HarnessError::io(output))?;
    println!(
        "{} vertices bound to {} control points ({} weights, alpha {alpha}) -> {}",
        table.vertex_count(),
        table.control_count(),
        table.nonzeros(),
        output.display()
    );
    Ok(())
}

fn simulate(scenario_path: &Path, out: &Path) -> Result<(), HarnessError> {
    let scenario = load_scenario(scenario_path)?;
    let summary = run_scenario(&scenario, out)?;
    println!(
        "{} steps, {} frames exported, {} plastic events, max strain {:.4}, final speed {:.4} m/s -> {}",
        summary.steps,
        summary.frames_exported,
        summary.plastic_events,
        summary.max_strain,
        summary.final_speed,
        out.display()
    );
    Ok(())
}

fn bench(mesh: &Path, budgets: &[usize], steps: usize) -> Result<(), HarnessError> {
    let surface = load_mesh(mesh)?;
    let rows = bench_scaling(&surface, budgets, steps)?;
    let mut out = std::io::stdout().lock();
    let io = |e| HarnessError::Io {
        path: "<stdout>".into(),
        source: e,
    };
    writeln!(out, "# {} vertices, {steps} timed steps per budget", surface.vertices.len()).map_err(io)?;
    writeln!(out, "budget\tmean_step_us\tmean_bind_apply_us").map_err(io)?;
    for row in rows {
        if row.clamped() {
            writeln!(out, "# warning: budget {} clamped to hull size {}", row.requested, row.budget).map_err(io)?;
        }
        writeln!(out, "{}\t{:.1}\t{:.1}", row.budget, row.mean_step_us, row.mean_bind_apply_us).map_err(io)?;
    }
    Ok(())
}

fn dump(s: &DeformationSnapshot) {
    println!("vehicle  {}", s.vehicle_id);
    println!("frame    {}", s.frame);
    println!("clock    {} s", s.clock);
    let [x, y, z, qx, qy, qz, qw] = s.pose;
    println!("position {x} {y} {z}");
    println!("rotation {qx} {qy} {qz} {qw} (x y z w)");
    println!("nodes    {}", s.deltas.len());
    for (i, [dx, dy, dz]) in s.deltas.iter().enumerate() {
        let len = (dx * dx + dy * dy + dz * dz).sqrt();
        println!("{i:5}  {dx:+.6e} {dy:+.6e} {dz:+.6e}  |{len:.6e}|");
    }
}

fn write_proxy(stations: usize, ring: usize, refine: usize, output: &Path) -> Result<(), HarnessError> {
    if stations < 2 || ring < 3 || refine == 0 {
        return Err(HarnessError::Invalid("need stations ≥ 2, ring ≥ 3, refine ≥ 1".into()));
    }
    let mesh = proxy::refine(&proxy::car_proxy(stations, ring), refine, 0.002);
    write_obj_file(output, &mesh.vertices, &mesh.triangles).map_err(HarnessError::io(output))?;
    println!("{} vertices, {} triangles -> {}", mesh.vertices.len(), mesh.triangles.len(), output.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Hull { mesh, points, output } => hull(&mesh, points, &output),
        Command::Bind {
            mesh,
            hull,
            alpha,
            output,
        } => bind(&mesh, &hull, alpha, &output),
        Command::Simulate { scenario, out } => simulate(&scenario, &out),
        Command::Bench { mesh, budgets, steps } => bench(&mesh, &budgets, steps),
        Command::Snapshot {
            action: SnapshotAction::Decode { file },
        } => {
            let bytes = fs::read(&file).map_err(HarnessError::io(&file))?;
            dump(&decode_snapshot(&bytes)?);
            Ok(())
        }
        Command::Proxy {
            stations,
            ring,
            refine,
            output,
        } => write_proxy(stations, ring, refine, &output),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
