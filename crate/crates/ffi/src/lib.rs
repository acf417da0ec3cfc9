//! C interface to the crumple vehicle simulation.
//!
//! Vehicles are opaque handles created from a scenario file and released
//! with [`crumple_vehicle_free`]. Every call returns a [`CrumpleStatus`];
//! on failure a description is kept per thread and can be read with
//! [`crumple_last_error_message`]. No call unwinds across the boundary.
//!
//! Arrays are flat `double` buffers: positions as `x, y, z` triples, poses
//! as `x, y, z, qx, qy, qz, qw`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use crumple::geometry::ObjError;
use crumple::harness::{
    build_world, decode_snapshot, encode_snapshot, load_scenario, DeformationSnapshot, DriveEvent, HarnessError,
    Scenario,
};
use crumple::vehicle::{FrameReport, VehicleWorld};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrumpleStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Output buffer shorter than required; nothing was written.
    BufferTooSmall = 3,
    Io = 4,
    Config = 5,
    /// The mesh or control shell could not be built.
    Geometry = 6,
    /// The solver produced non-finite state; the vehicle should be dropped.
    Diverged = 7,
    Snapshot = 8,
    Panic = 9,
}

/// Per-frame statistics filled in by [`crumple_vehicle_step`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CrumpleFrame {
    pub frame: u64,
    pub clock: f64,
    pub max_strain: f64,
    pub plastic_events: u64,
    pub would_break: u64,
    pub contacts: u64,
    pub core_speed: f64,
}

impl From<&FrameReport> for CrumpleFrame {
    fn from(r: &FrameReport) -> Self {
        CrumpleFrame {
            frame: r.frame,
            clock: r.clock,
            max_strain: r.max_strain,
            plastic_events: r.plastic_events as u64,
            would_break: r.would_break as u64,
            contacts: r.contacts as u64,
            core_speed: r.core_speed,
        }
    }
}

/// Opaque vehicle handle.
pub struct CrumpleVehicle {
    world: VehicleWorld,
    scenario: Scenario,
    scheduled: Option<DriveEvent>,
}

impl CrumpleVehicle {
    fn apply_schedule(&mut self) {
        let due = self.scenario.drive_at(self.world.clock());
        if due != self.scheduled {
            if let Some(e) = due {
                self.world.drive(e.throttle, e.steer);
            }
            self.scheduled = due;
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: CrumpleStatus, message: impl Into<String>) -> CrumpleStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    status
}

fn harness_status(e: &HarnessError) -> CrumpleStatus {
    match e {
        HarnessError::Io { .. }
        | HarnessError::Mesh {
            source: ObjError::Io(_),
            ..
        } => CrumpleStatus::Io,
        HarnessError::Config { .. } => CrumpleStatus::Config,
        HarnessError::Vehicle(v) if v.is_divergence() => CrumpleStatus::Diverged,
        HarnessError::Snapshot(_) => CrumpleStatus::Snapshot,
        HarnessError::Mesh { .. }
        | HarnessError::Hull(_)
        | HarnessError::Simplify(_)
        | HarnessError::Control(_)
        | HarnessError::Binding(_)
        | HarnessError::Vehicle(_) => CrumpleStatus::Geometry,
        HarnessError::Invalid(_) => CrumpleStatus::InvalidArgument,
    }
}

fn guard(body: impl FnOnce() -> Result<(), CrumpleStatus>) -> CrumpleStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CrumpleStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CrumpleStatus::Panic, format!("internal panic: {what}"))
        }
    }
}

unsafe fn vehicle<'a>(v: *const CrumpleVehicle) -> Result<&'a CrumpleVehicle, CrumpleStatus> {
    v.as_ref().ok_or_else(|| fail(CrumpleStatus::NullPointer, "vehicle handle is null"))
}

unsafe fn vehicle_mut<'a>(v: *mut CrumpleVehicle) -> Result<&'a mut CrumpleVehicle, CrumpleStatus> {
    v.as_mut().ok_or_else(|| fail(CrumpleStatus::NullPointer, "vehicle handle is null"))
}

unsafe fn out_slice<'a, T>(out: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], CrumpleStatus> {
    if out.is_null() {
        return Err(fail(CrumpleStatus::NullPointer, format!("{what} buffer is null")));
    }
    if len < needed {
        return Err(fail(
            CrumpleStatus::BufferTooSmall,
            format!("{what} buffer holds {len}, need {needed}"),
        ));
    }
    Ok(slice::from_raw_parts_mut(out, needed))
}

fn write_points(points: &[crumple::Vec3], out: &mut [f64]) {
    for (dst, p) in out.chunks_exact_mut(3).zip(points) {
        dst.copy_from_slice(&[p.x, p.y, p.z]);
    }
}

/// Loads a scenario file and builds its vehicle at the initial state.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_from_scenario(path: *const c_char, out: *mut *mut CrumpleVehicle) -> CrumpleStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(fail(CrumpleStatus::NullPointer, "path or out is null"));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(CrumpleStatus::InvalidArgument, "path is not UTF-8"))?;
        let build = || -> Result<CrumpleVehicle, HarnessError> {
            let scenario = load_scenario(Path::new(path))?;
            let world = build_world(&scenario)?;
            Ok(CrumpleVehicle {
                world,
                scenario,
                scheduled: None,
            })
        };
        let vehicle = build().map_err(|e| fail(harness_status(&e), e.to_string()))?;
        *out = Box::into_raw(Box::new(vehicle));
        Ok(())
    })
}

/// Releases a vehicle. Null is ignored.
///
/// # Safety
/// `v` must come from [`crumple_vehicle_from_scenario`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_free(v: *mut CrumpleVehicle) {
    if !v.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(v))));
    }
}

/// Advances one frame. Scheduled `[drive]` events from the scenario are
/// applied as the clock reaches them. `frame_out` may be null.
///
/// # Safety
/// `v` must be a live handle; `frame_out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_step(v: *mut CrumpleVehicle, frame_out: *mut CrumpleFrame) -> CrumpleStatus {
    guard(|| {
        let v = vehicle_mut(v)?;
        v.apply_schedule();
        let report = v.world.step().map_err(|e| {
            let status = if e.is_divergence() {
                CrumpleStatus::Diverged
            } else {
                CrumpleStatus::Geometry
            };
            fail(status, e.to_string())
        })?;
        if let Some(out) = frame_out.as_mut() {
            *out = CrumpleFrame::from(&report);
        }
        Ok(())
    })
}

/// Sets throttle in [-1, 1] (clamped) and steering angle in radians. Holds
/// until changed or until the next scheduled drive event.
///
/// # Safety
/// `v` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_drive(v: *mut CrumpleVehicle, throttle: f64, steer: f64) -> CrumpleStatus {
    guard(|| {
        let v = vehicle_mut(v)?;
        if !throttle.is_finite() || !steer.is_finite() {
            return Err(fail(CrumpleStatus::InvalidArgument, "throttle and steer must be finite"));
        }
        v.world.drive(throttle, steer);
        Ok(())
    })
}

/// Number of surface vertices, 0 for a null handle.
///
/// # Safety
/// `v` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_vertex_count(v: *const CrumpleVehicle) -> usize {
    v.as_ref().map_or(0, |v| v.world.surface().len())
}

/// Number of control nodes, 0 for a null handle.
///
/// # Safety
/// `v` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_control_count(v: *const CrumpleVehicle) -> usize {
    v.as_ref().map_or(0, |v| v.world.nodes().len())
}

/// Copies the deformed surface in world space; `len` counts doubles and
/// must be at least `3 * vertex_count`.
///
/// # Safety
/// `v` must be a live handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_copy_surface(v: *const CrumpleVehicle, out: *mut f64, len: usize) -> CrumpleStatus {
    guard(|| {
        let v = vehicle(v)?;
        let surface = v.world.surface();
        let dst = out_slice(out, len, 3 * surface.len(), "surface")?;
        write_points(surface, dst);
        Ok(())
    })
}

/// Writes the rigid core pose as `x, y, z, qx, qy, qz, qw` into `out[7]`.
///
/// # Safety
/// `v` must be a live handle and `out` valid for 7 doubles.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_pose(v: *const CrumpleVehicle, out: *mut f64) -> CrumpleStatus {
    guard(|| {
        let v = vehicle(v)?;
        let dst = out_slice(out, 7, 7, "pose")?;
        let pose = v.world.core().pose();
        let t = pose.translation.vector;
        let q = pose.rotation.quaternion();
        dst.copy_from_slice(&[t.x, t.y, t.z, q.i, q.j, q.k, q.w]);
        Ok(())
    })
}

/// Simulated time in seconds, or NaN for a null handle.
///
/// # Safety
/// `v` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_clock(v: *const CrumpleVehicle) -> f64 {
    v.as_ref().map_or(f64::NAN, |v| v.world.clock())
}

/// Encoded size in bytes of this vehicle's deformation snapshot.
///
/// # Safety
/// `v` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_snapshot_size(v: *const CrumpleVehicle) -> usize {
    v.as_ref()
        .map_or(0, |v| DeformationSnapshot::capture(&v.world, 0).encoded_len())
}

/// Encodes the current deformation snapshot into `buf`; the byte count is
/// stored in `written` when it is not null.
///
/// # Safety
/// `v` must be a live handle, `buf` valid for `len` bytes, `written` null or writable.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_encode_snapshot(
    v: *const CrumpleVehicle,
    vehicle_id: u32,
    buf: *mut u8,
    len: usize,
    written: *mut usize,
) -> CrumpleStatus {
    guard(|| {
        let v = vehicle(v)?;
        let bytes = encode_snapshot(&DeformationSnapshot::capture(&v.world, vehicle_id));
        let dst = out_slice(buf, len, bytes.len(), "snapshot")?;
        dst.copy_from_slice(&bytes);
        if let Some(w) = written.as_mut() {
            *w = bytes.len();
        }
        Ok(())
    })
}

/// Surface described by an encoded snapshot, using this vehicle's mesh and
/// control shell: the settled shape placed at the snapshot pose. `len`
/// counts doubles and must be at least `3 * vertex_count`.
///
/// # Safety
/// `v` must be a live handle, `bytes` valid for `bytes_len` bytes and `out` for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn crumple_vehicle_surface_from_snapshot(
    v: *const CrumpleVehicle,
    bytes: *const u8,
    bytes_len: usize,
    out: *mut f64,
    len: usize,
) -> CrumpleStatus {
    guard(|| {
        let v = vehicle(v)?;
        if bytes.is_null() {
            return Err(fail(CrumpleStatus::NullPointer, "snapshot bytes are null"));
        }
        let snapshot = decode_snapshot(slice::from_raw_parts(bytes, bytes_len))
            .map_err(|e| fail(CrumpleStatus::Snapshot, e.to_string()))?;
        let model = v.world.model();
        if snapshot.deltas.len() != model.control_rest.len() {
            return Err(fail(
                CrumpleStatus::Snapshot,
                format!(
                    "snapshot has {} deltas, vehicle has {} control nodes",
                    snapshot.deltas.len(),
                    model.control_rest.len()
                ),
            ));
        }
        let surface = model
            .settled_surface(&snapshot.isometry(), &snapshot.delta_vectors())
            .map_err(|e| fail(CrumpleStatus::Snapshot, e.to_string()))?;
        let dst = out_slice(out, len, 3 * surface.len(), "surface")?;
        write_points(&surface, dst);
        Ok(())
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to fit) and returns the full message length plus one. Pass a
/// null `buf` to query the size.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn crumple_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}
