#ifndef CRUMPLE_H
#define CRUMPLE_H

#include <stddef.h>
#include <stdint.h>

// Result of every call.
typedef enum CrumpleStatus {
  CRUMPLE_STATUS_OK = 0,
  CRUMPLE_STATUS_NULL_POINTER = 1,
  CRUMPLE_STATUS_INVALID_ARGUMENT = 2,
  // Output buffer shorter than required; nothing was written.
  CRUMPLE_STATUS_BUFFER_TOO_SMALL = 3,
  CRUMPLE_STATUS_IO = 4,
  CRUMPLE_STATUS_CONFIG = 5,
  // The mesh or control shell could not be built.
  CRUMPLE_STATUS_GEOMETRY = 6,
  // The solver produced non-finite state; the vehicle should be dropped.
  CRUMPLE_STATUS_DIVERGED = 7,
  CRUMPLE_STATUS_SNAPSHOT = 8,
  CRUMPLE_STATUS_PANIC = 9,
} CrumpleStatus;

// Opaque vehicle handle.
typedef struct CrumpleVehicle CrumpleVehicle;

// Per-frame statistics filled in by [`crumple_vehicle_step`].
typedef struct CrumpleFrame {
  uint64_t frame;
  double clock;
  double max_strain;
  uint64_t plastic_events;
  uint64_t would_break;
  uint64_t contacts;
  double core_speed;
} CrumpleFrame;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads a scenario file and builds its vehicle at the initial state.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum CrumpleStatus crumple_vehicle_from_scenario(const char *path, struct CrumpleVehicle **out);

// Releases a vehicle. Null is ignored.
//
// # Safety
// `v` must come from [`crumple_vehicle_from_scenario`] and not be used afterwards.
void crumple_vehicle_free(struct CrumpleVehicle *v);

// Advances one frame. Scheduled `[drive]` events from the scenario are
// applied as the clock reaches them. `frame_out` may be null.
//
// # Safety
// `v` must be a live handle; `frame_out` null or writable.
enum CrumpleStatus crumple_vehicle_step(struct CrumpleVehicle *v, struct CrumpleFrame *frame_out);

// Sets throttle in [-1, 1] (clamped) and steering angle in radians. Holds
// until changed or until the next scheduled drive event.
//
// # Safety
// `v` must be a live handle.
enum CrumpleStatus crumple_vehicle_drive(struct CrumpleVehicle *v, double throttle, double steer);

// Number of surface vertices, 0 for a null handle.
//
// # Safety
// `v` must be null or a live handle.
size_t crumple_vehicle_vertex_count(const struct CrumpleVehicle *v);

// Number of control nodes, 0 for a null handle.
//
// # Safety
// `v` must be null or a live handle.
size_t crumple_vehicle_control_count(const struct CrumpleVehicle *v);

// Copies the deformed surface in world space; `len` counts doubles and
// must be at least `3 * vertex_count`.
//
// # Safety
// `v` must be a live handle and `out` valid for `len` doubles.
enum CrumpleStatus crumple_vehicle_copy_surface(const struct CrumpleVehicle *v,
                                                double *out,
                                                size_t len);

// Writes the rigid core pose as `x, y, z, qx, qy, qz, qw` into `out[7]`.
//
// # Safety
// `v` must be a live handle and `out` valid for 7 doubles.
enum CrumpleStatus crumple_vehicle_pose(const struct CrumpleVehicle *v, double *out);

// Simulated time in seconds, or NaN for a null handle.
//
// # Safety
// `v` must be null or a live handle.
double crumple_vehicle_clock(const struct CrumpleVehicle *v);

// Encoded size in bytes of this vehicle's deformation snapshot.
//
// # Safety
// `v` must be null or a live handle.
size_t crumple_vehicle_snapshot_size(const struct CrumpleVehicle *v);

// Encodes the current deformation snapshot into `buf`; the byte count is
// stored in `written` when it is not null.
//
// # Safety
// `v` must be a live handle, `buf` valid for `len` bytes, `written` null or writable.
enum CrumpleStatus crumple_vehicle_encode_snapshot(const struct CrumpleVehicle *v,
                                                   uint32_t vehicle_id,
                                                   uint8_t *buf,
                                                   size_t len,
                                                   size_t *written);

// Surface described by an encoded snapshot, using this vehicle's mesh and
// control shell: the settled shape placed at the snapshot pose. `len`
// counts doubles and must be at least `3 * vertex_count`.
//
// # Safety
// `v` must be a live handle, `bytes` valid for `bytes_len` bytes and `out` for `len` doubles.
enum CrumpleStatus crumple_vehicle_surface_from_snapshot(const struct CrumpleVehicle *v,
                                                         const uint8_t *bytes,
                                                         size_t bytes_len,
                                                         double *out,
                                                         size_t len);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to fit) and returns the full message length plus one. Pass a
// null `buf` to query the size.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t crumple_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRUMPLE_H */
