//! Coupling between the control cage and the render surface.
//!
//! Every surface vertex `v` stores normalized inverse-distance weights
//! `φᵢ ∝ 1 / ‖cᵢ − v‖^α` against the control rest positions. A deformed
//! vertex is `v + Σᵢ φᵢ (cᵢ − cᵢ⁰)`. Weights are computed once against the
//! rest cage and never refreshed.

mod sidecar;

use rayon::prelude::*;

use crate::geometry::Vec3;

pub use sidecar::{decode_binding, encode_binding, SidecarError, BINDING_MAGIC, BINDING_VERSION};

/// Exponent used when a configuration does not name one.
pub const DEFAULT_ALPHA: f64 = 3.5;
/// Vertex-to-control distance below which the vertex is glued to that control.
pub const COINCIDENT_DISTANCE: f64 = 1e-9;
/// Weight floor used by [`WeightOptions::sparse`].
pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BindingError {
    #[error("no control points to bind against")]
    NoControls,
    #[error("alpha must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("control points {0} and {1} coincide")]
    CoincidentControls(usize, usize),
    #[error("binding was built for {expected_vertices} vertices / {expected_controls} controls, got {vertices} / {controls}")]
    Stale {
        expected_vertices: usize,
        expected_controls: usize,
        vertices: usize,
        controls: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightOptions {
    /// Drop normalized weights below this value and renormalize. `None` keeps
    /// the full dense coupling.
    pub floor: Option<f64>,
}

impl WeightOptions {
    pub fn dense() -> Self {
        WeightOptions { floor: None }
    }

    pub fn sparse() -> Self {
        WeightOptions {
            floor: Some(DEFAULT_WEIGHT_FLOOR),
        }
    }
}

/// Per-vertex runs of `(control, weight)` pairs in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct BindingTable {
    alpha: f64,
    vertex_count: usize,
    control_count: usize,
    offsets: Vec<usize>,
    controls: Vec<u32>,
    weights: Vec<f64>,
}

impl BindingTable {
    pub(crate) fn from_parts(
        alpha: f64,
        control_count: usize,
        offsets: Vec<usize>,
        controls: Vec<u32>,
        weights: Vec<f64>,
    ) -> Self {
        BindingTable {
            alpha,
            vertex_count: offsets.len() - 1,
            control_count,
            offsets,
            controls,
            weights,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `(vertex count, control count)` the table was computed for.
    pub fn built_against(&self) -> (usize, usize) {
        (self.vertex_count, self.control_count)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn control_count(&self) -> usize {
        self.control_count
    }

    /// Total stored `(control, weight)` pairs.
    pub fn nonzeros(&self) -> usize {
        self.weights.len()
    }

    pub fn vertex_weights(&self, vertex: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[vertex]..self.offsets[vertex + 1];
        self.controls[range.clone()]
            .iter()
            .zip(&self.weights[range])
            .map(|(&c, &w)| (c as usize, w))
    }

    pub fn weight_sum(&self, vertex: usize) -> f64 {
        self.vertex_weights(vertex).map(|(_, w)| w).sum()
    }

    pub fn check(&self, vertices: usize, controls: usize) -> Result<(), BindingError> {
        if vertices != self.vertex_count || controls != self.control_count {
            return Err(BindingError::Stale {
                expected_vertices: self.vertex_count,
                expected_controls: self.control_count,
                vertices,
                controls,
            });
        }
        Ok(())
    }

    fn displaced(&self, vertex: usize, rest: &Vec3, displacement: &[Vec3]) -> Vec3 {
        let mut out = *rest;
        for (c, w) in self.vertex_weights(vertex) {
            out += displacement[c] * w;
        }
        out
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub(crate) fn raw_controls(&self) -> &[u32] {
        &self.controls
    }

    pub(crate) fn raw_weights(&self) -> &[f64] {
        &self.weights
    }
}

fn vertex_weights(
    vertex: &Vec3,
    controls: &[Vec3],
    alpha: f64,
    floor: Option<f64>,
    distances: &mut Vec<f64>,
    out_controls: &mut Vec<u32>,
    out_weights: &mut Vec<f64>,
) {
    distances.clear();
    distances.extend(controls.iter().map(|c| (c - vertex).norm()));
    let (nearest, d_min) = distances
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });

    if d_min < COINCIDENT_DISTANCE {
        out_controls.push(nearest as u32);
        out_weights.push(1.0);
        return;
    }

    // (d_min / d)^α is the raw weight rescaled by d_min^α; the scale cancels
    // in the normalization and keeps every term in [0, 1].
    let start = out_weights.len();
    for (c, &d) in distances.iter().enumerate() {
        out_controls.push(c as u32);
        out_weights.push((d_min / d).powf(alpha));
    }
    normalize(&mut out_weights[start..]);

    if let Some(floor) = floor {
        let mut keep = start;
        for k in start..out_weights.len() {
            if out_weights[k] >= floor {
                out_controls[keep] = out_controls[k];
                out_weights[keep] = out_weights[k];
                keep += 1;
            }
        }
        out_controls.truncate(keep);
        out_weights.truncate(keep);
        normalize(&mut out_weights[start..]);
    }
}

fn normalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    for w in weights {
        *w /= sum;
    }
}

/// Builds the binding table of `surface` against `control_rest`.
pub fn compute_weights(
    surface: &[Vec3],
    control_rest: &[Vec3],
    alpha: f64,
    options: WeightOptions,
) -> Result<BindingTable, BindingError> {
    if control_rest.is_empty() {
        return Err(BindingError::NoControls);
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(BindingError::BadAlpha(alpha));
    }
    for i in 0..control_rest.len() {
        for j in i + 1..control_rest.len() {
            if (control_rest[i] - control_rest[j]).norm() < COINCIDENT_DISTANCE {
                return Err(BindingError::CoincidentControls(i, j));
            }
        }
    }

    let mut offsets = Vec::with_capacity(surface.len() + 1);
    let mut controls = Vec::with_capacity(surface.len() * control_rest.len());
    let mut weights = Vec::with_capacity(surface.len() * control_rest.len());
    let mut scratch = Vec::with_capacity(control_rest.len());
    offsets.push(0);
    for v in surface {
        vertex_weights(
            v,
            control_rest,
            alpha,
            options.floor,
            &mut scratch,
            &mut controls,
            &mut weights,
        );
        offsets.push(weights.len());
    }
    Ok(BindingTable::from_parts(
        alpha,
        control_rest.len(),
        offsets,
        controls,
        weights,
    ))
}

fn control_displacements(
    binding: &BindingTable,
    surface_rest: &[Vec3],
    control_rest: &[Vec3],
    control_current: &[Vec3],
) -> Result<Vec<Vec3>, BindingError> {
    binding.check(surface_rest.len(), control_rest.len())?;
    binding.check(surface_rest.len(), control_current.len())?;
    Ok(control_current
        .iter()
        .zip(control_rest)
        .map(|(c, c0)| c - c0)
        .collect())
}

/// Writes `v + Σ φ (c − c⁰)` for every rest vertex into `out`.
pub fn apply_deformation_into(
    surface_rest: &[Vec3],
    binding: &BindingTable,
    control_rest: &[Vec3],
    control_current: &[Vec3],
    out: &mut Vec<Vec3>,
) -> Result<(), BindingError> {
    let displacement = control_displacements(binding, surface_rest, control_rest, control_current)?;
    out.clear();
    out.extend(
        surface_rest
            .iter()
            .enumerate()
            .map(|(j, v)| binding.displaced(j, v, &displacement)),
    );
    Ok(())
}

pub fn apply_deformation(
    surface_rest: &[Vec3],
    binding: &BindingTable,
    control_rest: &[Vec3],
    control_current: &[Vec3],
) -> Result<Vec<Vec3>, BindingError> {
    let mut out = Vec::with_capacity(surface_rest.len());
    apply_deformation_into(surface_rest, binding, control_rest, control_current, &mut out)?;
    Ok(out)
}

/// Same result as [`apply_deformation`], vertices split across the rayon pool.
/// Each vertex is computed independently so the output is bit-identical.
pub fn apply_deformation_parallel(
    surface_rest: &[Vec3],
    binding: &BindingTable,
    control_rest: &[Vec3],
    control_current: &[Vec3],
) -> Result<Vec<Vec3>, BindingError> {
    let displacement = control_displacements(binding, surface_rest, control_rest, control_current)?;
    Ok(surface_rest
        .par_iter()
        .enumerate()
        .map(|(j, v)| binding.displaced(j, v, &displacement))
        .collect())
}
