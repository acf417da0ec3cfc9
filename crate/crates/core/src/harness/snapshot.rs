//! Deformation snapshots: the per-node rest-shape deltas plus core pose.
//!
//! Little-endian layout:
//!
//! ```text
//! "CRSN"        4 bytes
//! version       u16
//! vehicle id    u32
//! frame         u32
//! clock         f64
//! pose          7 × f32   position x, y, z, then quaternion x, y, z, w
//! count         u32
//! deltas        count × 3 × f32
//! ```

use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion};

use crate::geometry::Vec3;
use crate::vehicle::VehicleWorld;

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"CRSN";
pub const SNAPSHOT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8 + 28 + 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SnapshotError {
    #[error("not a deformation snapshot (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u16),
    #[error("snapshot truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("snapshot has {0} trailing bytes")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationSnapshot {
    pub vehicle_id: u32,
    pub frame: u32,
    pub clock: f64,
    /// Position then quaternion (x, y, z, w).
    pub pose: [f32; 7],
    pub deltas: Vec<[f32; 3]>,
}

impl DeformationSnapshot {
    pub fn capture(world: &VehicleWorld, vehicle_id: u32) -> Self {
        let core = world.core();
        let q = core.orientation.quaternion();
        let p = core.position;
        DeformationSnapshot {
            vehicle_id,
            frame: world.frame() as u32,
            clock: world.clock(),
            pose: [
                p.x as f32, p.y as f32, p.z as f32, q.i as f32, q.j as f32, q.k as f32, q.w as f32,
            ],
            deltas: world
                .deltas()
                .iter()
                .map(|d| [d.x as f32, d.y as f32, d.z as f32])
                .collect(),
        }
    }

    pub fn isometry(&self) -> Isometry3<f64> {
        let [x, y, z, qx, qy, qz, qw] = self.pose.map(f64::from);
        let rotation = UnitQuaternion::from_quaternion(Quaternion::new(qw, qx, qy, qz));
        Isometry3::from_parts(Translation3::new(x, y, z), rotation)
    }

    pub fn delta_vectors(&self) -> Vec<Vec3> {
        self.deltas
            .iter()
            .map(|d| Vec3::new(d[0].into(), d[1].into(), d[2].into()))
            .collect()
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.deltas.len() * 12
    }
}

pub fn encode_snapshot(s: &DeformationSnapshot) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.encoded_len());
    out.extend_from_slice(&SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&s.vehicle_id.to_le_bytes());
    out.extend_from_slice(&s.frame.to_le_bytes());
    out.extend_from_slice(&s.clock.to_le_bytes());
    for v in s.pose {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(s.deltas.len() as u32).to_le_bytes());
    for d in &s.deltas {
        for v in d {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<DeformationSnapshot, SnapshotError> {
    let truncated = |needed| SnapshotError::Truncated {
        needed,
        available: bytes.len(),
    };
    if bytes.len() < 4 {
        return Err(truncated(4));
    }
    if bytes[..4] != SNAPSHOT_MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let f32_at = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    let vehicle_id = u32_at(6);
    let frame = u32_at(10);
    let clock = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
    let pose = std::array::from_fn(|k| f32_at(22 + 4 * k));
    let count = u32_at(50) as usize;
    let needed = count
        .checked_mul(12)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(truncated(usize::MAX))?;
    if bytes.len() < needed {
        return Err(truncated(needed));
    }
    if bytes.len() > needed {
        return Err(SnapshotError::TrailingBytes(bytes.len() - needed));
    }
    let deltas = (0..count)
        .map(|i| {
            let at = HEADER_LEN + 12 * i;
            [f32_at(at), f32_at(at + 4), f32_at(at + 8)]
        })
        .collect();
    Ok(DeformationSnapshot {
        vehicle_id,
        frame,
        clock,
        pose,
        deltas,
    })
}
