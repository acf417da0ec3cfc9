//! Quickhull in three dimensions.
//!
//! Faces are kept as outward-wound index triples. Adjacency is a map from
//! directed edge `(a, b)` to the face that owns it; the neighbour across that
//! edge owns `(b, a)`.

use std::collections::HashMap;

use super::Vec3;

/// Plane-side tolerance relative to the bounding-box diagonal.
pub const RELATIVE_EPSILON: f64 = 1e-9;

/// Smallest |det| of three incident face normals for a vertex to be a corner.
const CORNER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    Coincident,
    Collinear,
    Coplanar,
}

impl std::fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Degeneracy::Coincident => "all points coincide",
            Degeneracy::Collinear => "points are collinear",
            Degeneracy::Coplanar => "points are coplanar",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HullError {
    #[error("convex hull needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("cannot build a 3D hull: {0}")]
    Degenerate(Degeneracy),
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
}

impl HullError {
    /// True for the "not enough dimensions" family of failures.
    pub fn is_dimensionality(&self) -> bool {
        matches!(self, HullError::TooFewPoints(_) | HullError::Degenerate(_))
    }
}

/// Closed convex triangulated surface.
#[derive(Debug, Clone, PartialEq)]
pub struct Hull {
    /// Hull vertices, ordered by their index in the input.
    pub points: Vec<Vec3>,
    /// For each hull vertex, its index in the point list the hull was built from.
    pub source_indices: Vec<usize>,
    /// Outward (counter-clockwise seen from outside) triangles into `points`.
    pub triangles: Vec<[usize; 3]>,
}

impl Hull {
    pub fn vertex_count(&self) -> usize {
        self.points.len()
    }

    /// Enclosed volume by the divergence theorem.
    pub fn volume(&self) -> f64 {
        surface_volume(&self.points, &self.triangles)
    }

    /// Undirected edges, each once, in order of first appearance.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        unique_edges(&self.triangles)
    }

    /// Largest signed distance of `p` above any face plane.
    pub fn max_plane_distance(&self, p: &Vec3) -> f64 {
        self.triangles
            .iter()
            .filter_map(|t| {
                let [a, b, c] = t.map(|i| self.points[i]);
                let n = (b - a).cross(&(c - a));
                let len = n.norm();
                (len > 0.0).then(|| n.dot(&(p - a)) / len)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Signed volume enclosed by a closed, consistently wound triangle surface.
pub fn surface_volume(points: &[Vec3], triangles: &[[usize; 3]]) -> f64 {
    triangles
        .iter()
        .map(|t| points[t[0]].dot(&points[t[1]].cross(&points[t[2]])))
        .sum::<f64>()
        / 6.0
}

pub(crate) fn unique_edges(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let key = [a.min(b), a.max(b)];
            if seen.insert(key) {
                edges.push(key);
            }
        }
    }
    edges
}

struct Face {
    vertices: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], vertices: [usize; 3]) -> Self {
        let [a, b, c] = vertices.map(|i| points[i]);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let normal = if len > 0.0 { n / len } else { Vec3::zeros() };
        Face {
            vertices,
            normal,
            offset: normal.dot(&a),
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    fn directed_edges(&self) -> [(usize, usize); 3] {
        let [a, b, c] = self.vertices;
        [(a, b), (b, c), (c, a)]
    }
}

struct Builder<'a> {
    points: &'a [Vec3],
    eps: f64,
    faces: Vec<Face>,
    edge_owner: HashMap<(usize, usize), usize>,
}

impl<'a> Builder<'a> {
    fn add_face(&mut self, vertices: [usize; 3]) -> usize {
        let id = self.faces.len();
        let face = Face::new(self.points, vertices);
        for e in face.directed_edges() {
            self.edge_owner.insert(e, id);
        }
        self.faces.push(face);
        id
    }

    /// Puts `p` in the outside set of the face it is farthest above.
    fn assign(&mut self, p: usize, candidates: &[usize]) {
        let mut best: Option<(usize, f64)> = None;
        for &f in candidates {
            let d = self.faces[f].distance(&self.points[p]);
            if d > self.eps && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((f, d));
            }
        }
        if let Some((f, _)) = best {
            self.faces[f].outside.push(p);
        }
    }

    fn farthest_outside(&self, face: usize) -> usize {
        let f = &self.faces[face];
        let mut best = f.outside[0];
        let mut best_d = f.distance(&self.points[best]);
        for &p in &f.outside[1..] {
            let d = f.distance(&self.points[p]);
            if d > best_d || (d == best_d && p < best) {
                best = p;
                best_d = d;
            }
        }
        best
    }

    fn add_point(&mut self, start_face: usize, eye: usize) {
        let eye_pos = self.points[eye];

        // Flood the visible region from the face that owns the eye point.
        let mut visible = vec![start_face];
        let mut is_visible: HashMap<usize, bool> = HashMap::new();
        is_visible.insert(start_face, true);
        let mut cursor = 0;
        while cursor < visible.len() {
            let f = visible[cursor];
            cursor += 1;
            for (a, b) in self.faces[f].directed_edges() {
                let Some(&g) = self.edge_owner.get(&(b, a)) else {
                    continue;
                };
                if is_visible.contains_key(&g) {
                    continue;
                }
                let sees = self.faces[g].distance(&eye_pos) > self.eps;
                is_visible.insert(g, sees);
                if sees {
                    visible.push(g);
                }
            }
        }

        let mut horizon = Vec::new();
        for &f in &visible {
            for (a, b) in self.faces[f].directed_edges() {
                let twin = self.edge_owner[&(b, a)];
                if !is_visible[&twin] {
                    horizon.push((a, b));
                }
            }
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            let face = &mut self.faces[f];
            face.alive = false;
            orphans.extend(face.outside.drain(..).filter(|&p| p != eye));
            for e in face.directed_edges() {
                if self.edge_owner.get(&e) == Some(&f) {
                    self.edge_owner.remove(&e);
                }
            }
        }

        let new_faces: Vec<usize> = horizon
            .iter()
            .map(|&(a, b)| self.add_face([a, b, eye]))
            .collect();

        orphans.sort_unstable();
        for p in orphans {
            self.assign(p, &new_faces);
        }
    }
}

/// Index maximizing `key`, with values within `eps` of the maximum treated as
/// tied and broken by `tie`, then lexicographically. When `key` is linear the
/// tied points span a face and the winner is one of its corners, so it is a
/// true hull vertex rather than a point in the middle of an edge or face.
fn pick(points: &[Vec3], eps: f64, key: impl Fn(&Vec3) -> f64, tie: impl Fn(&Vec3) -> f64) -> (usize, f64) {
    let best = points.iter().map(&key).fold(f64::NEG_INFINITY, f64::max);
    let rank = |p: &Vec3| (tie(p), p.x, p.y, p.z);
    let mut winner = None;
    for (i, p) in points.iter().enumerate() {
        if key(p) < best - eps {
            continue;
        }
        match winner {
            Some(w) if rank(&points[w]).partial_cmp(&rank(p)) != Some(std::cmp::Ordering::Less) => {}
            _ => winner = Some(i),
        }
    }
    let winner = winner.expect("points are non-empty and finite");
    (winner, key(&points[winner]))
}

fn initial_simplex(points: &[Vec3], eps: f64) -> Result<[usize; 4], HullError> {
    // Extreme points along each axis; the farthest pair among them seeds the line.
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        extremes.push(pick(points, eps, |p| -p[axis], |_| 0.0).0);
        extremes.push(pick(points, eps, |p| p[axis], |_| 0.0).0);
    }
    let mut pair = (extremes[0], extremes[1]);
    let mut best = -1.0;
    for (k, &i) in extremes.iter().enumerate() {
        for &j in &extremes[k + 1..] {
            let d = (points[i] - points[j]).norm_squared();
            if d > best {
                best = d;
                pair = (i, j);
            }
        }
    }
    let (i0, i1) = pair;
    if best.sqrt() <= eps {
        return Err(HullError::Degenerate(Degeneracy::Coincident));
    }

    // Among points equally far from the line, the one furthest along it.
    let axis = (points[i1] - points[i0]).normalize();
    let (i2, d2) = pick(
        points,
        eps,
        |p| {
            let v = p - points[i0];
            (v - axis * v.dot(&axis)).norm()
        },
        |p| (p - points[i0]).dot(&axis),
    );
    if d2 <= eps {
        return Err(HullError::Degenerate(Degeneracy::Collinear));
    }

    let normal = (points[i1] - points[i0])
        .cross(&(points[i2] - points[i0]))
        .normalize();
    let (i3, d3) = pick(points, eps, |p| normal.dot(&(p - points[i0])).abs(), |_| 0.0);
    if d3 <= eps {
        return Err(HullError::Degenerate(Degeneracy::Coplanar));
    }
    Ok([i0, i1, i2, i3])
}

/// Live faces (input indices) and their unit normals.
fn quickhull(points: &[Vec3], eps: f64) -> Result<Vec<([usize; 3], Vec3)>, HullError> {
    let [i0, i1, i2, i3] = initial_simplex(points, eps)?;
    let mut builder = Builder {
        points,
        eps,
        faces: Vec::new(),
        edge_owner: HashMap::new(),
    };

    let above = Face::new(points, [i0, i1, i2]).distance(&points[i3]) > 0.0;
    let seed = if above {
        [[i0, i2, i1], [i0, i1, i3], [i1, i2, i3], [i2, i0, i3]]
    } else {
        [[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i2, i3, i0]]
    };
    let seed_faces: Vec<usize> = seed.iter().map(|&t| builder.add_face(t)).collect();
    for p in 0..points.len() {
        if p != i0 && p != i1 && p != i2 && p != i3 {
            builder.assign(p, &seed_faces);
        }
    }

    let mut cursor = 0;
    while cursor < builder.faces.len() {
        let face = &builder.faces[cursor];
        if face.alive && !face.outside.is_empty() {
            let eye = builder.farthest_outside(cursor);
            builder.add_point(cursor, eye);
            // The face may have died; re-scan from the start of the live set.
            continue;
        }
        cursor += 1;
    }

    Ok(builder
        .faces
        .into_iter()
        .filter(|f| f.alive)
        .map(|f| (f.vertices, f.normal))
        .collect())
}

/// Indices used by `faces` that are corners of the hull. A vertex in the
/// middle of an edge or face has incident normals spanning fewer than three
/// dimensions.
fn corners(faces: &[([usize; 3], Vec3)]) -> (Vec<usize>, bool) {
    let mut incident: HashMap<usize, Vec<Vec3>> = HashMap::new();
    for (tri, normal) in faces {
        for &v in tri {
            incident.entry(v).or_default().push(*normal);
        }
    }
    let mut kept = Vec::with_capacity(incident.len());
    let mut dropped = false;
    for (v, normals) in incident {
        let spans = normals.iter().enumerate().any(|(i, a)| {
            normals[i + 1..].iter().enumerate().any(|(j, b)| {
                let ab = a.cross(b);
                normals[i + j + 2..].iter().any(|c| ab.dot(c).abs() > CORNER_TOLERANCE)
            })
        });
        if spans {
            kept.push(v);
        } else {
            dropped = true;
        }
    }
    kept.sort_unstable();
    (kept, dropped)
}

/// Builds the convex hull of `points`.
///
/// Points within `1e-9 ×` bounding-box diagonal of a face plane count as
/// inside, so points lying on the hull surface are not hull vertices.
pub fn convex_hull(points: &[Vec3]) -> Result<Hull, HullError> {
    if let Some(bad) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(HullError::NonFinite(bad));
    }
    if points.len() < 4 {
        return Err(HullError::TooFewPoints(points.len()));
    }
    let (lo, hi) = bounds(points);
    let eps = RELATIVE_EPSILON * (hi - lo).norm();

    let mut faces = quickhull(points, eps)?;
    let (kept, dropped) = corners(&faces);
    if dropped {
        // Points that ended up on an edge or inside a face of the final hull:
        // rebuild from the true corners only.
        let subset: Vec<Vec3> = kept.iter().map(|&i| points[i]).collect();
        faces = quickhull(&subset, eps)?
            .into_iter()
            .map(|(t, n)| (t.map(|k| kept[k]), n))
            .collect();
    }
    let live: Vec<[usize; 3]> = faces.into_iter().map(|(t, _)| t).collect();
    let mut used: Vec<usize> = live.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let mut triangles: Vec<[usize; 3]> = live
        .iter()
        .map(|t| {
            let t = t.map(|i| remap[&i]);
            // Canonical rotation: smallest index first, winding kept.
            let r = (0..3).min_by_key(|&k| t[k]).unwrap_or(0);
            [t[r], t[(r + 1) % 3], t[(r + 2) % 3]]
        })
        .collect();
    triangles.sort_unstable();

    Ok(Hull {
        points: used.iter().map(|&i| points[i]).collect(),
        source_indices: used,
        triangles,
    })
}

pub(crate) fn bounds(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}
