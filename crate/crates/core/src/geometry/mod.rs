//! Mesh ingestion, convex hulls, hull level-of-detail and the control cage.

mod control;
mod hull;
pub mod obj;
pub mod proxy;
mod simplify;

pub use control::{tet_volume, tetrahedralize_and_mass, ControlMesh, ControlMeshError};
pub use hull::{convex_hull, surface_volume, Degeneracy, Hull, HullError, RELATIVE_EPSILON};
pub use obj::{load_obj, load_obj_file, write_obj, write_obj_file, ObjError};
pub use simplify::{simplify_hull, SimplifyError};

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {index}, mesh has {count}")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("triangle {0} repeats a vertex")]
    DegenerateTriangle(usize),
    #[error("mesh has no vertices")]
    Empty,
}

/// High-resolution render surface.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub normals: Option<Vec<Vec3>>,
}

impl SurfaceMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mesh = SurfaceMesh {
            vertices,
            triangles,
            normals: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.vertices.is_empty() {
            return Err(MeshError::Empty);
        }
        let count = self.vertices.len();
        for (k, t) in self.triangles.iter().enumerate() {
            if let Some(&index) = t.iter().find(|&&i| i >= count) {
                return Err(MeshError::IndexOutOfRange {
                    triangle: k,
                    index,
                    count,
                });
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(MeshError::DegenerateTriangle(k));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        hull::bounds(&self.vertices)
    }

    /// Area-weighted vertex normals.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut normals = vec![Vec3::zeros(); self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i]);
            let n = (b - a).cross(&(c - a));
            for &i in t {
                normals[i] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }
}
