//! Scenario files, pipeline assembly, frame export, snapshots and benchmarks.

mod bench;
mod config;
mod run;
pub mod snapshot;

pub use bench::{bench_scaling, BenchRow, WARMUP_STEPS};
pub use config::{parse_scenario, ConfigError, DriveEvent, MeshSource, Scenario};
pub use run::{
    build_pipeline, build_world, control_from_hull, frame_file_name, load_scenario, load_surface,
    reconstruct_surface, run_scenario, HarnessError, Pipeline, RunSummary, FINAL_OBJ, FINAL_SNAPSHOT,
    REPORT_FILE, TIMING_FILE,
};
pub use snapshot::{decode_snapshot, encode_snapshot, DeformationSnapshot, SnapshotError};
