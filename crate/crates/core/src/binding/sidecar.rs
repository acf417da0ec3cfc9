//! Binary sidecar for binding tables.
//!
//! Little-endian layout:
//!
//! ```text
//! "CRBW"            4 bytes
//! version           u16
//! alpha             f64
//! vertex count      u32
//! control count     u32
//! per vertex:
//!   run length      u32
//!   run × (control u32, weight f64)
//! ```

use super::BindingTable;

pub const BINDING_MAGIC: [u8; 4] = *b"CRBW";
pub const BINDING_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SidecarError {
    #[error("not a binding sidecar (bad magic)")]
    BadMagic,
    #[error("unsupported binding sidecar version {0}")]
    UnsupportedVersion(u16),
    #[error("binding sidecar truncated")]
    Truncated,
    #[error("binding sidecar has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("vertex {vertex} references control {control}, table has {count}")]
    ControlOutOfRange {
        vertex: usize,
        control: u32,
        count: usize,
    },
}

pub fn encode_binding(table: &BindingTable) -> Vec<u8> {
    let mut out = Vec::with_capacity(22 + table.vertex_count() * 4 + table.nonzeros() * 12);
    out.extend_from_slice(&BINDING_MAGIC);
    out.extend_from_slice(&BINDING_VERSION.to_le_bytes());
    out.extend_from_slice(&table.alpha().to_le_bytes());
    out.extend_from_slice(&(table.vertex_count() as u32).to_le_bytes());
    out.extend_from_slice(&(table.control_count() as u32).to_le_bytes());
    let offsets = table.offsets();
    for v in 0..table.vertex_count() {
        let range = offsets[v]..offsets[v + 1];
        out.extend_from_slice(&(range.len() as u32).to_le_bytes());
        for k in range {
            out.extend_from_slice(&table.raw_controls()[k].to_le_bytes());
            out.extend_from_slice(&table.raw_weights()[k].to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], SidecarError> {
        if self.bytes.len() < N {
            return Err(SidecarError::Truncated);
        }
        let (head, tail) = self.bytes.split_at(N);
        self.bytes = tail;
        Ok(head.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16, SidecarError> {
        self.take().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Result<u32, SidecarError> {
        self.take().map(u32::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64, SidecarError> {
        self.take().map(f64::from_le_bytes)
    }
}

pub fn decode_binding(bytes: &[u8]) -> Result<BindingTable, SidecarError> {
    let mut r = Reader { bytes };
    if r.take::<4>()? != BINDING_MAGIC {
        return Err(SidecarError::BadMagic);
    }
    let version = r.u16()?;
    if version != BINDING_VERSION {
        return Err(SidecarError::UnsupportedVersion(version));
    }
    let alpha = r.f64()?;
    let vertex_count = r.u32()? as usize;
    let control_count = r.u32()? as usize;

    // Cap preallocation by what the remaining bytes could possibly hold.
    let mut offsets = Vec::with_capacity((vertex_count + 1).min(r.bytes.len() / 4 + 1));
    let mut controls = Vec::new();
    let mut weights = Vec::new();
    offsets.push(0);
    for vertex in 0..vertex_count {
        let run = r.u32()? as usize;
        if r.bytes.len() < run * 12 {
            return Err(SidecarError::Truncated);
        }
        for _ in 0..run {
            let control = r.u32()?;
            if control as usize >= control_count {
                return Err(SidecarError::ControlOutOfRange {
                    vertex,
                    control,
                    count: control_count,
                });
            }
            controls.push(control);
            weights.push(r.f64()?);
        }
        offsets.push(controls.len());
    }
    if !r.bytes.is_empty() {
        return Err(SidecarError::TrailingBytes(r.bytes.len()));
    }
    Ok(BindingTable::from_parts(
        alpha,
        control_count,
        offsets,
        controls,
        weights,
    ))
}
