//! Procedural car-shaped test surfaces.
//!
//! Body frame: +x forward, +y up, +z to the right. The body is a loft of
//! boxy super-ellipse rings whose roof line steps up over the cabin, closed
//! by two end caps.

use std::collections::HashMap;

use super::{surface_volume, SurfaceMesh, Vec3};

pub const LENGTH: f64 = 4.2;
pub const WIDTH: f64 = 1.8;

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Roof height above the floor at longitudinal position `x`.
fn roof(x: f64) -> f64 {
    let cabin = smoothstep(0.9, 0.5, x) * smoothstep(-1.5, -1.0, x);
    0.85 + 0.55 * cabin
}

/// Longitudinal taper of ring size toward the bumpers.
fn taper(x: f64) -> f64 {
    let u = (2.0 * x / LENGTH).abs();
    1.0 - 0.35 * u.powi(6)
}

fn superellipse(theta: f64, exponent: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let f = |v: f64| v.signum() * v.abs().powf(2.0 / exponent);
    (f(c), f(s))
}

/// Lofted car body with `stations × ring + 2` vertices.
pub fn car_proxy(stations: usize, ring: usize) -> SurfaceMesh {
    assert!(stations >= 2 && ring >= 3, "car proxy needs at least 2 stations and 3 ring points");
    let mut vertices = Vec::with_capacity(stations * ring + 2);
    for k in 0..stations {
        let x = -LENGTH / 2.0 + LENGTH * k as f64 / (stations - 1) as f64;
        let s = taper(x);
        let height = roof(x) * s;
        let centre_y = height / 2.0;
        for j in 0..ring {
            let theta = std::f64::consts::TAU * j as f64 / ring as f64;
            let (cz, cy) = superellipse(theta, 4.0);
            vertices.push(Vec3::new(x, centre_y + cy * height / 2.0, cz * WIDTH * s / 2.0));
        }
    }
    let ring_at = |k: usize, j: usize| k * ring + (j % ring);

    let mut triangles = Vec::with_capacity(2 * stations * ring);
    for k in 0..stations - 1 {
        for j in 0..ring {
            let (a, b, c, d) = (ring_at(k, j), ring_at(k, j + 1), ring_at(k + 1, j + 1), ring_at(k + 1, j));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    for (station, bulge) in [(0, -0.12), (stations - 1, 0.12)] {
        let ring_pts = &vertices[station * ring..(station + 1) * ring];
        let mut cap = ring_pts.iter().sum::<Vec3>() / ring as f64;
        cap.x += bulge;
        let centre = vertices.len();
        vertices.push(cap);
        for j in 0..ring {
            let (a, b) = (ring_at(station, j), ring_at(station, j + 1));
            triangles.push(if station == 0 { [centre, b, a] } else { [centre, a, b] });
        }
    }

    if surface_volume(&vertices, &triangles) < 0.0 {
        for t in &mut triangles {
            t.swap(1, 2);
        }
    }
    SurfaceMesh {
        vertices,
        triangles,
        normals: None,
    }
}

/// Splits every triangle into `factor²` smaller ones. New vertices are pulled
/// `inset` metres toward the vertex centroid, which puts any that landed on a
/// hull face strictly inside; the hull of the result equals the coarse hull.
pub fn refine(mesh: &SurfaceMesh, factor: usize, inset: f64) -> SurfaceMesh {
    assert!(factor >= 1);
    if factor == 1 {
        return mesh.clone();
    }
    let centre = mesh.vertices.iter().sum::<Vec3>() / mesh.vertices.len() as f64;
    let pull = |p: Vec3| {
        let towards = centre - p;
        let len = towards.norm();
        if len > 0.0 {
            p + towards * (inset.min(len) / len)
        } else {
            p
        }
    };

    let mut vertices = mesh.vertices.clone();
    // Interior points of each undirected edge, ordered from the lower index.
    let mut edge_points: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut edge_run = |vertices: &mut Vec<Vec3>, a: usize, b: usize| -> Vec<usize> {
        let key = (a.min(b), a.max(b));
        let run = edge_points
            .entry(key)
            .or_insert_with(|| {
                let (p, q) = (vertices[key.0], vertices[key.1]);
                (1..factor)
                    .map(|s| {
                        let t = s as f64 / factor as f64;
                        vertices.push(pull(p + (q - p) * t));
                        vertices.len() - 1
                    })
                    .collect()
            })
            .clone();
        if a < b {
            run
        } else {
            run.into_iter().rev().collect()
        }
    };

    let mut triangles = Vec::with_capacity(mesh.triangles.len() * factor * factor);
    for &[a, b, c] in &mesh.triangles {
        let ab = edge_run(&mut vertices, a, b);
        let ac = edge_run(&mut vertices, a, c);
        let bc = edge_run(&mut vertices, b, c);
        // grid[i][j]: point at a + i/f (b − a) + j/f (c − a), i + j ≤ f.
        let mut grid = vec![Vec::with_capacity(factor + 1); factor + 1];
        let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        for (i, row) in grid.iter_mut().enumerate() {
            for j in 0..=factor - i {
                row.push(match (i, j) {
                    (0, 0) => a,
                    (i, 0) if i == factor => b,
                    (0, j) if j == factor => c,
                    (i, 0) => ab[i - 1],
                    (0, j) => ac[j - 1],
                    (i, j) if i + j == factor => bc[j - 1],
                    (i, j) => {
                        let (u, v) = (i as f64 / factor as f64, j as f64 / factor as f64);
                        vertices.push(pull(pa + (pb - pa) * u + (pc - pa) * v));
                        vertices.len() - 1
                    }
                });
            }
        }
        for i in 0..factor {
            for j in 0..factor - i {
                triangles.push([grid[i][j], grid[i + 1][j], grid[i][j + 1]]);
                if i + j + 1 < factor {
                    triangles.push([grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]);
                }
            }
        }
    }
    SurfaceMesh {
        vertices,
        triangles,
        normals: None,
    }
}
