use super::hull::{unique_edges, Hull};
use super::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlMeshError {
    #[error("total mass must be positive and finite, got {0}")]
    BadMass(f64),
    #[error("hull encloses no volume")]
    DegenerateSolid,
    #[error("hull tetrahedron {0} has non-positive volume; surface is not convex around its centroid")]
    InvertedTetrahedron(usize),
}

/// Coarse control cage: hull nodes plus one interior centroid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMesh {
    /// Rest positions; hull nodes first, the centroid last.
    pub rest_points: Vec<Vec3>,
    /// Hull-triangle edges (each once) followed by one spoke per hull node.
    pub edges: Vec<[usize; 2]>,
    pub hull_triangles: Vec<[usize; 3]>,
    pub centroid_index: usize,
    /// `[a, b, c, centroid]` for every hull triangle, in the same order.
    pub tetrahedra: Vec<[usize; 4]>,
    pub node_masses: Vec<f64>,
}

impl ControlMesh {
    pub fn node_count(&self) -> usize {
        self.rest_points.len()
    }

    pub fn hull_node_count(&self) -> usize {
        self.centroid_index
    }

    pub fn total_mass(&self) -> f64 {
        self.node_masses.iter().sum()
    }

    pub fn tetrahedron_volume(&self, tet: usize) -> f64 {
        let [a, b, c, o] = self.tetrahedra[tet].map(|i| self.rest_points[i]);
        tet_volume(&a, &b, &c, &o)
    }
}

/// Signed volume of the tetrahedron with base `a b c` (outward winding) and apex `o` inside.
pub fn tet_volume(a: &Vec3, b: &Vec3, c: &Vec3, o: &Vec3) -> f64 {
    (a - o).dot(&(b - o).cross(&(c - o))) / 6.0
}

/// Fans the hull into tetrahedra around the mean of its vertices and lumps
/// `total_mass` onto the nodes: each tetrahedron carries mass in proportion
/// to its volume, split evenly across its four corners.
pub fn tetrahedralize_and_mass(hull: &Hull, total_mass: f64) -> Result<ControlMesh, ControlMeshError> {
    if !(total_mass.is_finite() && total_mass > 0.0) {
        return Err(ControlMeshError::BadMass(total_mass));
    }
    let hull_nodes = hull.points.len();
    let centroid = hull.points.iter().sum::<Vec3>() / hull_nodes as f64;
    let mut rest_points = hull.points.clone();
    rest_points.push(centroid);
    let centroid_index = hull_nodes;

    let tetrahedra: Vec<[usize; 4]> = hull
        .triangles
        .iter()
        .map(|t| [t[0], t[1], t[2], centroid_index])
        .collect();
    let volumes: Vec<f64> = tetrahedra
        .iter()
        .map(|t| {
            let [a, b, c, o] = t.map(|i| rest_points[i]);
            tet_volume(&a, &b, &c, &o)
        })
        .collect();
    let total_volume: f64 = volumes.iter().sum();
    if !(total_volume > 0.0) {
        return Err(ControlMeshError::DegenerateSolid);
    }
    if let Some(bad) = volumes.iter().position(|&v| v <= 0.0) {
        return Err(ControlMeshError::InvertedTetrahedron(bad));
    }

    let mut node_masses = vec![0.0; rest_points.len()];
    for (tet, vol) in tetrahedra.iter().zip(&volumes) {
        let share = total_mass * (vol / total_volume) / 4.0;
        for &node in tet {
            node_masses[node] += share;
        }
    }

    let mut edges = unique_edges(&hull.triangles);
    edges.extend((0..hull_nodes).map(|i| [i, centroid_index]));

    Ok(ControlMesh {
        rest_points,
        edges,
        hull_triangles: hull.triangles.clone(),
        centroid_index,
        tetrahedra,
        node_masses,
    })
}
