//! Level-of-detail reduction of a convex hull to a control-point budget.
//!
//! Vertices are removed one at a time, always the one whose removal costs
//! the least enclosed volume, and the survivors are re-hulled after every
//! removal so the result is convex at each stage.
//!
//! The volume lost by deleting vertex `v` with link `L` (its neighbours on
//! the hull) is `vol(conv(L ∪ {v})) − vol(conv(L))`: the faces that appear
//! after removal only use link vertices. A removal only changes costs of the
//! vertices whose link changed, so costs are cached and refreshed lazily.

use std::collections::{BTreeSet, HashMap};

use super::hull::{convex_hull, Hull};
use super::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimplifyError {
    #[error("control-point target {0} is below the 4-point minimum")]
    TargetTooSmall(usize),
    #[error("control-point target {target} exceeds the {available} hull vertices")]
    TargetTooLarge { target: usize, available: usize },
}

fn volume_or_zero(points: &[Vec3]) -> f64 {
    convex_hull(points).map(|h| h.volume()).unwrap_or(0.0)
}

fn removal_cost(points: &[Vec3], vertex: usize, link: &BTreeSet<usize>) -> f64 {
    let mut around: Vec<Vec3> = link.iter().map(|&i| points[i]).collect();
    let without = volume_or_zero(&around);
    around.push(points[vertex]);
    (volume_or_zero(&around) - without).max(0.0)
}

fn links(hull: &Hull) -> Vec<BTreeSet<usize>> {
    let mut link = vec![BTreeSet::new(); hull.points.len()];
    for t in &hull.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            link[a].insert(b);
            link[b].insert(a);
        }
    }
    link
}

/// Reduces `hull` to `target` vertices.
///
/// `source_indices` of the result index the same point list as the input
/// hull's. If no further vertex can be removed without collapsing the solid
/// the loop stops early; compare `vertex_count()` against the request.
pub fn simplify_hull(hull: &Hull, target: usize) -> Result<Hull, SimplifyError> {
    if target < 4 {
        return Err(SimplifyError::TargetTooSmall(target));
    }
    if target > hull.vertex_count() {
        return Err(SimplifyError::TargetTooLarge {
            target,
            available: hull.vertex_count(),
        });
    }

    let mut current = hull.clone();
    // Keyed by original source index so entries survive re-indexing.
    let mut cache: HashMap<usize, (BTreeSet<usize>, f64)> = HashMap::new();

    while current.vertex_count() > target {
        let link = links(&current);
        let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(current.vertex_count());
        for (v, neighbours) in link.iter().enumerate() {
            let key = current.source_indices[v];
            let neighbour_keys: BTreeSet<usize> =
                neighbours.iter().map(|&n| current.source_indices[n]).collect();
            let cost = match cache.get(&key) {
                Some((cached_link, cost)) if *cached_link == neighbour_keys => *cost,
                _ => {
                    let cost = removal_cost(&current.points, v, neighbours);
                    cache.insert(key, (neighbour_keys, cost));
                    cost
                }
            };
            ranked.push((cost, v));
        }
        ranked.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(current.source_indices[a.1].cmp(&current.source_indices[b.1]))
        });

        let mut next = None;
        for &(_, victim) in &ranked {
            let keep: Vec<usize> = (0..current.vertex_count()).filter(|&i| i != victim).collect();
            let survivors: Vec<Vec3> = keep.iter().map(|&i| current.points[i]).collect();
            match convex_hull(&survivors) {
                Ok(h) if h.vertex_count() >= target => {
                    let source_indices = h
                        .source_indices
                        .iter()
                        .map(|&k| current.source_indices[keep[k]])
                        .collect();
                    cache.remove(&current.source_indices[victim]);
                    next = Some(Hull {
                        source_indices,
                        ..h
                    });
                    break;
                }
                _ => continue,
            }
        }
        match next {
            Some(h) => current = h,
            None => {
                log::warn!(
                    "hull simplification stopped at {} vertices (requested {target})",
                    current.vertex_count()
                );
                break;
            }
        }
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn icosahedron() -> Vec<Vec3> {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v = Vec::new();
        for a in [-1.0, 1.0] {
            for b in [-phi, phi] {
                v.push(Vec3::new(0.0, a, b));
                v.push(Vec3::new(a, b, 0.0));
                v.push(Vec3::new(b, 0.0, a));
            }
        }
        v
    }

    #[test]
    fn identity_when_target_equals_count() {
        let cube: Vec<Vec3> = (0..8)
            .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
            .collect();
        let hull = convex_hull(&cube).unwrap();
        assert_eq!(simplify_hull(&hull, 8).unwrap(), hull);
    }

    #[test]
    fn icosahedron_to_tetrahedron() {
        let hull = convex_hull(&icosahedron()).unwrap();
        assert_eq!(hull.vertex_count(), 12);
        let reduced = simplify_hull(&hull, 4).unwrap();
        assert_eq!(reduced.vertex_count(), 4);
        assert_eq!(reduced.triangles.len(), 4);
        assert!(reduced.volume() > 0.0);
        assert!(reduced.volume() <= hull.volume());
        for (p, &s) in reduced.points.iter().zip(&reduced.source_indices) {
            assert_eq!(*p, hull.points[s]);
        }
    }

    #[test]
    fn bad_targets() {
        let hull = convex_hull(&icosahedron()).unwrap();
        assert_eq!(
            simplify_hull(&hull, 3).unwrap_err(),
            SimplifyError::TargetTooSmall(3)
        );
        assert_eq!(
            simplify_hull(&hull, 13).unwrap_err(),
            SimplifyError::TargetTooLarge {
                target: 13,
                available: 12
            }
        );
    }

    #[test]
    fn removal_cost_of_pyramid_apex() {
        // Square pyramid: removing the apex loses the whole solid.
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.5, 0.5, 3.0),
        ];
        let link: BTreeSet<usize> = (0..4).collect();
        assert!((removal_cost(&pts, 4, &link) - 1.0).abs() < 1e-12);
    }
}
