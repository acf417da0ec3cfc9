use std::time::Duration;

use crate::binding::{compute_weights, WeightOptions, DEFAULT_ALPHA};
use crate::geometry::{convex_hull, SurfaceMesh};
use crate::vehicle::{assemble, CoreConfig, InitialState, MaterialConfig};

use super::run::{control_from_hull, HarnessError};

/// Steps run before timing starts.
pub const WARMUP_STEPS: usize = 50;
const BENCH_MASS: f64 = 1200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub requested: usize,
    /// Hull vertices actually used; below `requested` when clamped.
    pub budget: usize,
    pub mean_step_us: f64,
    pub mean_bind_apply_us: f64,
}

impl BenchRow {
    pub fn clamped(&self) -> bool {
        self.budget != self.requested
    }
}

fn micros(total: Duration, n: usize) -> f64 {
    total.as_secs_f64() * 1e6 / n as f64
}

/// Times `steps` frames of a coasting vehicle per control budget, after
/// warm-up. Budgets must be ascending and at least 4.
pub fn bench_scaling(surface: &SurfaceMesh, budgets: &[usize], steps: usize) -> Result<Vec<BenchRow>, HarnessError> {
    if budgets.is_empty() {
        return Err(HarnessError::Invalid("no budgets given".into()));
    }
    if budgets.iter().any(|&b| b < 4) {
        return Err(HarnessError::Invalid("every budget must be at least 4".into()));
    }
    if budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(HarnessError::Invalid("budgets must be ascending".into()));
    }
    if steps == 0 {
        return Err(HarnessError::Invalid("steps must be at least 1".into()));
    }
    let hull = convex_hull(&surface.vertices)?;
    let mut rows = Vec::with_capacity(budgets.len());
    for &requested in budgets {
        let (lod, control, _) = control_from_hull(&hull, requested, BENCH_MASS)?;
        let binding = compute_weights(&surface.vertices, &control.rest_points, DEFAULT_ALPHA, WeightOptions::dense())?;
        let mut world = assemble(
            surface,
            &control,
            binding,
            CoreConfig::default(),
            MaterialConfig::default(),
            InitialState::default(),
        )?;
        for _ in 0..WARMUP_STEPS {
            world.step()?;
        }
        let (mut step_total, mut sync_total) = (Duration::ZERO, Duration::ZERO);
        for _ in 0..steps {
            let report = world.step()?;
            step_total += report.step_time;
            sync_total += report.sync_time;
        }
        rows.push(BenchRow {
            requested,
            budget: lod.vertex_count(),
            mean_step_us: micros(step_total, steps),
            mean_bind_apply_us: micros(sync_total, steps),
        });
    }
    Ok(rows)
}
