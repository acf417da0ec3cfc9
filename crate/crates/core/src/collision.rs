//! Static obstacles and positional contact resolution for control nodes.

use nalgebra::UnitQuaternion;

use crate::dynamics::NodeState;
use crate::geometry::Vec3;

/// Penetrations shallower than this are treated as touching, not inside.
pub const CONTACT_SLOP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObstacleError {
    #[error("half-space normal must be unit length (|n| = {0})")]
    NormalNotUnit(f64),
    #[error("sphere radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("box half-extents must be positive")]
    BadExtents,
    #[error("friction must be in [0, 1], got {0}")]
    BadFriction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    HalfSpace {
        point: Vec3,
        normal: Vec3,
    },
    Sphere {
        center: Vec3,
        radius: f64,
    },
    Box {
        center: Vec3,
        half_extents: Vec3,
        orientation: UnitQuaternion<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub shape: Shape,
    pub friction: f64,
}

impl Obstacle {
    pub fn half_space(point: Vec3, normal: Vec3, friction: f64) -> Result<Self, ObstacleError> {
        Obstacle {
            shape: Shape::HalfSpace { point, normal },
            friction,
        }
        .validated()
    }

    pub fn sphere(center: Vec3, radius: f64, friction: f64) -> Result<Self, ObstacleError> {
        Obstacle {
            shape: Shape::Sphere { center, radius },
            friction,
        }
        .validated()
    }

    pub fn cuboid(
        center: Vec3,
        half_extents: Vec3,
        orientation: UnitQuaternion<f64>,
        friction: f64,
    ) -> Result<Self, ObstacleError> {
        Obstacle {
            shape: Shape::Box {
                center,
                half_extents,
                orientation,
            },
            friction,
        }
        .validated()
    }

    fn validated(self) -> Result<Self, ObstacleError> {
        if !(0.0..=1.0).contains(&self.friction) {
            return Err(ObstacleError::BadFriction(self.friction));
        }
        match self.shape {
            Shape::HalfSpace { normal, .. } => {
                let len = normal.norm();
                if (len - 1.0).abs() > 1e-9 {
                    return Err(ObstacleError::NormalNotUnit(len));
                }
            }
            Shape::Sphere { radius, .. } => {
                if !(radius > 0.0) {
                    return Err(ObstacleError::BadRadius(radius));
                }
            }
            Shape::Box { half_extents, .. } => {
                if !half_extents.iter().all(|&h| h > 0.0) {
                    return Err(ObstacleError::BadExtents);
                }
            }
        }
        Ok(self)
    }

    /// If `p` is strictly inside, the nearest surface point, outward normal
    /// there, and penetration depth.
    pub fn penetration(&self, p: &Vec3) -> Option<(Vec3, Vec3, f64)> {
        let hit = match self.shape {
            Shape::HalfSpace { point, normal } => {
                let depth = -(p - point).dot(&normal);
                (p + normal * depth, normal, depth)
            }
            Shape::Sphere { center, radius } => {
                let offset = p - center;
                let dist = offset.norm();
                let normal = if dist > 0.0 { offset / dist } else { Vec3::y() };
                (center + normal * radius, normal, radius - dist)
            }
            Shape::Box {
                center,
                half_extents,
                orientation,
            } => {
                let local = orientation.inverse_transform_vector(&(p - center));
                // Shallowest face wins; ties resolve in x, y, z order.
                let mut axis = 0;
                let mut depth = f64::INFINITY;
                for k in 0..3 {
                    let d = half_extents[k] - local[k].abs();
                    if d < depth {
                        depth = d;
                        axis = k;
                    }
                }
                let sign = if local[axis] < 0.0 { -1.0 } else { 1.0 };
                let mut surface = local;
                surface[axis] = sign * half_extents[axis];
                let mut local_normal = Vec3::zeros();
                local_normal[axis] = sign;
                (
                    center + orientation * surface,
                    orientation * local_normal,
                    depth,
                )
            }
        };
        (hit.2 > CONTACT_SLOP).then_some(hit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub node: usize,
    pub obstacle: usize,
    pub depth: f64,
    /// Outward surface normal at the contact.
    pub normal: Vec3,
    pub friction: f64,
}

/// Pushes every penetrating node out to the nearest surface point of the
/// obstacle and scales its tangential motion since the last step by
/// `1 − friction`. Obstacles are processed in list order.
pub fn resolve_contacts(nodes: &mut [NodeState], obstacles: &[Obstacle]) -> Vec<Contact> {
    let mut contacts = Vec::new();
    for (index, node) in nodes.iter_mut().enumerate() {
        if node.is_pinned() {
            continue;
        }
        for (id, obstacle) in obstacles.iter().enumerate() {
            let Some((surface, normal, depth)) = obstacle.penetration(&node.position) else {
                continue;
            };
            node.position = surface;
            let motion = node.position - node.prev_position;
            let normal_part = normal * motion.dot(&normal);
            let tangential = motion - normal_part;
            node.prev_position = node.position - normal_part - tangential * (1.0 - obstacle.friction);
            contacts.push(Contact {
                node: index,
                obstacle: id,
                depth,
                normal,
                friction: obstacle.friction,
            });
        }
    }
    contacts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ground(friction: f64) -> Obstacle {
        Obstacle::half_space(Vec3::zeros(), Vec3::y(), friction).unwrap()
    }

    #[test]
    fn above_ground_untouched() {
        let mut nodes = vec![NodeState::new(Vec3::new(0.0, 0.5, 0.0), 1.0)];
        assert!(resolve_contacts(&mut nodes, &[ground(0.5)]).is_empty());
        assert_eq!(nodes[0].position, Vec3::new(0.0, 0.5, 0.0));
    }

    #[test]
    fn below_ground_projected() {
        let mut nodes = vec![NodeState::new(Vec3::new(0.3, -0.1, 0.0), 1.0)];
        let contacts = resolve_contacts(&mut nodes, &[ground(0.0)]);
        assert_eq!(contacts.len(), 1);
        assert!((contacts[0].depth - 0.1).abs() < 1e-15);
        assert_eq!(nodes[0].position, Vec3::new(0.3, 0.0, 0.0));
    }

    #[test]
    fn inside_sphere_projected_radially() {
        let mut nodes = vec![NodeState::new(Vec3::new(0.5, 0.0, 0.0), 1.0)];
        let sphere = Obstacle::sphere(Vec3::zeros(), 1.0, 0.0).unwrap();
        let contacts = resolve_contacts(&mut nodes, &[sphere]);
        assert!((nodes[0].position - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((contacts[0].depth - 0.5).abs() < 1e-15);
    }

    #[test]
    fn box_uses_shallowest_face_then_axis_order() {
        let rot = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), std::f64::consts::FRAC_PI_2);
        let post = Obstacle::cuboid(Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0), rot, 0.0).unwrap();
        // Local x maps to world −z; a point 0.1 inside the local +x face.
        let p = rot * Vec3::new(0.9, 0.0, 0.0);
        let mut nodes = vec![NodeState::new(p, 1.0)];
        let contacts = resolve_contacts(&mut nodes, &[post]);
        assert!((contacts[0].depth - 0.1).abs() < 1e-12);
        assert!((nodes[0].position - rot * Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);

        // Equal penetration on x and y: x wins.
        let cube = Obstacle::cuboid(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0), UnitQuaternion::identity(), 0.0).unwrap();
        let mut nodes = vec![NodeState::new(Vec3::new(0.5, 0.5, 0.0), 1.0)];
        resolve_contacts(&mut nodes, &[cube]);
        assert_eq!(nodes[0].position, Vec3::new(1.0, 0.5, 0.0));
    }

    #[test]
    fn friction_extremes() {
        let mut sliding = NodeState::new(Vec3::new(0.2, -0.05, 0.0), 1.0);
        sliding.prev_position = Vec3::new(0.0, 0.0, 0.0);
        let mut grip = vec![sliding];
        resolve_contacts(&mut grip, &[ground(1.0)]);
        let motion = grip[0].position - grip[0].prev_position;
        assert!(motion.x.abs() < 1e-15 && motion.z.abs() < 1e-15);

        let mut slick = vec![sliding];
        resolve_contacts(&mut slick, &[ground(0.0)]);
        let motion = slick[0].position - slick[0].prev_position;
        assert!((motion.x - 0.2).abs() < 1e-15);
    }

    #[test]
    fn invalid_obstacles() {
        assert!(Obstacle::half_space(Vec3::zeros(), Vec3::new(0.0, 2.0, 0.0), 0.0).is_err());
        assert!(Obstacle::sphere(Vec3::zeros(), 0.0, 0.0).is_err());
        assert!(Obstacle::cuboid(Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0), UnitQuaternion::identity(), 0.0).is_err());
        assert!(Obstacle::sphere(Vec3::zeros(), 1.0, 1.5).is_err());
    }

    fn arb_point() -> impl Strategy<Value = Vec3> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn arb_obstacles() -> impl Strategy<Value = Vec<Obstacle>> {
        let shape = prop_oneof![
            (arb_point(), arb_point(), 0.0..=1.0f64).prop_filter_map("zero normal", |(p, n, f)| {
                (n.norm() > 1e-3).then(|| Obstacle::half_space(p, n.normalize(), f).unwrap())
            }),
            (arb_point(), 0.2..2.0f64, 0.0..=1.0f64).prop_map(|(c, r, f)| Obstacle::sphere(c, r, f).unwrap()),
            (arb_point(), 0.2..2.0f64, 0.2..2.0f64, 0.2..2.0f64, -3.0..3.0f64, 0.0..=1.0f64).prop_map(
                |(c, hx, hy, hz, angle, f)| {
                    let rot = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), angle);
                    Obstacle::cuboid(c, Vec3::new(hx, hy, hz), rot, f).unwrap()
                }
            ),
        ];
        prop::collection::vec(shape, 1..2)
    }

    proptest! {
        // With one obstacle the projection must leave no penetration, and a
        // second pass must find nothing.
        #[test]
        fn projection_is_complete_and_idempotent(
            points in prop::collection::vec(arb_point(), 1..20),
            obstacles in arb_obstacles(),
        ) {
            let mut nodes: Vec<NodeState> = points.iter().map(|&p| NodeState::new(p, 1.0)).collect();
            resolve_contacts(&mut nodes, &obstacles);
            for n in &nodes {
                for o in &obstacles {
                    let inside = o.penetration(&n.position).map(|h| h.2).unwrap_or(0.0);
                    prop_assert!(inside < 1e-9);
                }
            }
            let snapshot = nodes.clone();
            prop_assert!(resolve_contacts(&mut nodes, &obstacles).is_empty());
            prop_assert_eq!(nodes, snapshot);
        }
    }
}
