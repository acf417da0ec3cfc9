//! The assembled vehicle: a rigid core carrying a deformable control shell
//! that drives the render surface.
//!
//! Body frame: origin at the centre of mass of the control nodes, +x
//! forward, +y up, +z right. Shell nodes are tied to the core by attachment
//! springs toward `pose · body_rest`; contacts on nodes are fed back into the
//! core as impulses, while the shell's deformation itself stays cosmetic.

use std::time::{Duration, Instant};

use nalgebra::{Isometry3, Matrix3, Translation3, UnitQuaternion};

use crate::binding::{apply_deformation_into, BindingError, BindingTable};
use crate::collision::{resolve_contacts, Contact, Obstacle};
use crate::dynamics::{
    Attachments, DistanceConstraint, DynamicsError, Material, NodeState, Shell, SolverParams,
};
use crate::geometry::{ControlMesh, SurfaceMesh, Vec3};

/// Impulse passes over the contact set per frame.
const IMPULSE_PASSES: usize = 16;
/// Fraction of attachment-target penetration removed per frame.
const POSITION_RELAXATION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VehicleError {
    #[error("assembly: {0}")]
    Assembly(String),
    #[error(transparent)]
    Binding(#[from] BindingError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl VehicleError {
    pub fn is_divergence(&self) -> bool {
        matches!(self, VehicleError::Dynamics(DynamicsError::Diverged { .. }))
    }
}

/// Wheel order used throughout: front-left, front-right, rear-left, rear-right.
pub type WheelOffsets = [Vec3; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct CoreConfig {
    /// Principal inertia about the body axes. Derived from node masses when absent.
    pub inertia: Option<Vec3>,
    /// Body-frame wheel contact points. Derived from the surface bounds when absent.
    pub wheel_offsets: Option<WheelOffsets>,
    pub max_drive_force: f64,
    pub gravity: Vec3,
}

impl Default for CoreConfig {
    fn default() -> Self {
        CoreConfig {
            inertia: None,
            wheel_offsets: None,
            max_drive_force: 6000.0,
            gravity: Vec3::new(0.0, -9.81, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialConfig {
    pub shell: Material,
    pub attachment_stiffness: f64,
    /// Body-frame gap at which a node's rest point starts to flow (m).
    pub attachment_yield: f64,
    pub solver: SolverParams,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        MaterialConfig {
            shell: Material::default(),
            attachment_stiffness: 0.9,
            attachment_yield: 0.05,
            solver: SolverParams::default(),
        }
    }
}

/// Initial placement and motion of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    /// Maps mesh coordinates to world coordinates.
    pub pose: Isometry3<f64>,
    /// Velocity of the centre of mass.
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState {
            pose: Isometry3::identity(),
            linear_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidCore {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vec3,
    /// World-frame angular velocity (rad/s).
    pub angular_velocity: Vec3,
    pub mass: f64,
    /// Principal inertia about the body axes (kg·m²).
    pub inertia: Vec3,
    pub wheel_offsets: WheelOffsets,
}

impl RigidCore {
    pub fn pose(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn speed(&self) -> f64 {
        self.linear_velocity.norm()
    }

    fn inverse_inertia_world(&self) -> Matrix3<f64> {
        let r = self.orientation.to_rotation_matrix().into_inner();
        let inv = Matrix3::from_diagonal(&self.inertia.map(|i| 1.0 / i));
        r * inv * r.transpose()
    }

    fn point_velocity(&self, r: &Vec3) -> Vec3 {
        self.linear_velocity + self.angular_velocity.cross(r)
    }

    fn apply_impulse(&mut self, impulse: &Vec3, r: &Vec3, inv_inertia: &Matrix3<f64>) {
        self.linear_velocity += impulse / self.mass;
        self.angular_velocity += inv_inertia * r.cross(impulse);
    }

    /// Inverse effective mass of the core at offset `r` along `dir`.
    fn inverse_effective_mass(&self, r: &Vec3, dir: &Vec3, inv_inertia: &Matrix3<f64>) -> f64 {
        1.0 / self.mass + (inv_inertia * r.cross(dir)).cross(r).dot(dir)
    }

    /// Semi-implicit Euler: velocities first, then pose from the new velocities.
    fn integrate(&mut self, force: &Vec3, torque: &Vec3, dt: f64) {
        let inv_inertia = self.inverse_inertia_world();
        self.linear_velocity += force / self.mass * dt;
        self.angular_velocity += inv_inertia * torque * dt;
        self.position += self.linear_velocity * dt;
        let spin = UnitQuaternion::from_scaled_axis(self.angular_velocity * dt);
        self.orientation = UnitQuaternion::new_normalize((spin * self.orientation).into_inner());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriveInput {
    pub throttle: f64,
    pub steer: f64,
}

/// Rest geometry shared by a running world and anyone reconstructing its
/// surface from a snapshot. All positions are in the body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleModel {
    pub surface_rest: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub control_rest: Vec<Vec3>,
    pub binding: BindingTable,
    /// Mesh-space point that became the body origin.
    pub center_of_mass: Vec3,
}

impl VehicleModel {
    /// Body-frame surface for body-frame control positions `controls`.
    pub fn body_surface_into(&self, controls: &[Vec3], out: &mut Vec<Vec3>) -> Result<(), BindingError> {
        apply_deformation_into(&self.surface_rest, &self.binding, &self.control_rest, controls, out)
    }

    /// World-space surface of a shell at rest in its (possibly dented)
    /// rest shape `control_rest + deltas`, placed at `pose`.
    pub fn settled_surface(&self, pose: &Isometry3<f64>, deltas: &[Vec3]) -> Result<Vec<Vec3>, BindingError> {
        let controls: Vec<Vec3> = self
            .control_rest
            .iter()
            .zip(deltas)
            .map(|(c, d)| c + d)
            .collect();
        let mut out = Vec::new();
        self.body_binding_check(deltas.len())?;
        self.body_surface_into(&controls, &mut out)?;
        for v in &mut out {
            *v = pose.transform_point(&(*v).into()).coords;
        }
        Ok(out)
    }

    fn body_binding_check(&self, controls: usize) -> Result<(), BindingError> {
        self.binding.check(self.surface_rest.len(), controls)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub frame: u64,
    pub clock: f64,
    pub max_strain: f64,
    pub plastic_events: usize,
    pub would_break: usize,
    pub contacts: usize,
    pub core_speed: f64,
    /// Wall time of core + shell phases.
    pub step_time: Duration,
    /// Wall time of the surface refresh.
    pub sync_time: Duration,
}

impl FrameReport {
    /// Tab-separated deterministic columns (no timings).
    pub fn row(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.9e}\t{}\t{}\t{}\t{:.9e}",
            self.frame,
            self.clock,
            self.max_strain,
            self.plastic_events,
            self.would_break,
            self.contacts,
            self.core_speed
        )
    }

    pub const HEADER: &'static str =
        "frame\tclock_s\tmax_strain\tplastic_events\twould_break\tcontacts\tcore_speed_mps";
}

#[derive(Debug, Clone)]
pub struct VehicleWorld {
    model: VehicleModel,
    core: RigidCore,
    shell: Shell,
    attachment_stiffness: f64,
    attachment_yield: f64,
    obstacles: Vec<Obstacle>,
    gravity: Vec3,
    max_drive_force: f64,
    drive: DriveInput,
    clock: f64,
    frame: u64,
    plastic_total: usize,
    surface: Vec<Vec3>,
    accelerations: Vec<Vec3>,
    contact_slots: Vec<Option<Contact>>,
    scratch: Vec<Vec3>,
}

fn default_wheels(surface: &[Vec3]) -> WheelOffsets {
    let (mut lo, mut hi) = (surface[0], surface[0]);
    for v in surface {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let front = 0.7 * hi.x;
    let rear = 0.7 * lo.x;
    let half_track = 0.4 * (hi.z - lo.z);
    let mid_z = 0.5 * (hi.z + lo.z);
    [
        Vec3::new(front, lo.y, mid_z - half_track),
        Vec3::new(front, lo.y, mid_z + half_track),
        Vec3::new(rear, lo.y, mid_z - half_track),
        Vec3::new(rear, lo.y, mid_z + half_track),
    ]
}

fn point_mass_inertia(points: &[Vec3], masses: &[f64]) -> Vec3 {
    let mut inertia = Vec3::zeros();
    for (p, m) in points.iter().zip(masses) {
        inertia.x += m * (p.y * p.y + p.z * p.z);
        inertia.y += m * (p.x * p.x + p.z * p.z);
        inertia.z += m * (p.x * p.x + p.y * p.y);
    }
    inertia
}

/// Builds a world from a surface, its control cage and their binding.
pub fn assemble(
    surface: &SurfaceMesh,
    control: &ControlMesh,
    binding: BindingTable,
    core: CoreConfig,
    material: MaterialConfig,
    initial: InitialState,
) -> Result<VehicleWorld, VehicleError> {
    let assembly = |msg: String| VehicleError::Assembly(msg);
    let nodes = control.node_count();
    if binding.built_against() != (surface.vertices.len(), nodes) {
        let (v, c) = binding.built_against();
        return Err(assembly(format!(
            "binding built for {v} vertices / {c} controls, vehicle has {} / {nodes}",
            surface.vertices.len()
        )));
    }
    if control.node_masses.len() != nodes {
        return Err(assembly("node mass count differs from control point count".into()));
    }
    if !(material.attachment_stiffness > 0.0 && material.attachment_stiffness <= 1.0) {
        return Err(assembly("attachment stiffness must be in (0, 1]".into()));
    }
    if !(material.attachment_yield > 0.0) {
        return Err(assembly("attachment yield must be positive".into()));
    }
    if !(core.max_drive_force >= 0.0) {
        return Err(assembly("max drive force must be non-negative".into()));
    }
    let mass = control.total_mass();
    let com = control
        .rest_points
        .iter()
        .zip(&control.node_masses)
        .map(|(p, m)| p * *m)
        .sum::<Vec3>()
        / mass;

    let control_rest: Vec<Vec3> = control.rest_points.iter().map(|p| p - com).collect();
    let surface_rest: Vec<Vec3> = surface.vertices.iter().map(|p| p - com).collect();

    let inertia = core
        .inertia
        .unwrap_or_else(|| point_mass_inertia(&control_rest, &control.node_masses));
    if !inertia.iter().all(|&i| i > 0.0 && i.is_finite()) {
        return Err(assembly(format!("inertia must be positive, got {inertia:?}")));
    }
    let wheel_offsets = core.wheel_offsets.unwrap_or_else(|| default_wheels(&surface_rest));

    let rigid = RigidCore {
        position: initial.pose.transform_point(&com.into()).coords,
        orientation: initial.pose.rotation,
        linear_velocity: initial.linear_velocity,
        angular_velocity: initial.angular_velocity,
        mass,
        inertia,
        wheel_offsets,
    };

    let dt = material.solver.dt;
    let shell_nodes: Vec<NodeState> = control_rest
        .iter()
        .zip(&control.node_masses)
        .map(|(rest, m)| {
            let world = initial.pose.transform_point(&(rest + com).into()).coords;
            let r = world - rigid.position;
            let velocity = rigid.point_velocity(&r);
            NodeState {
                position: world,
                prev_position: world - velocity * dt,
                inverse_mass: 1.0 / m,
                body_rest: *rest,
                body_rest_initial: *rest,
            }
        })
        .collect();
    let constraints = control
        .edges
        .iter()
        .map(|&[a, b]| {
            let length = (control_rest[a] - control_rest[b]).norm();
            DistanceConstraint::new(a, b, length, material.shell)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let shell = Shell::new(shell_nodes, constraints, material.solver)?;

    let model = VehicleModel {
        surface_rest,
        triangles: surface.triangles.clone(),
        control_rest,
        binding,
        center_of_mass: com,
    };
    let mut world = VehicleWorld {
        accelerations: vec![core.gravity; nodes],
        contact_slots: vec![None; nodes],
        model,
        core: rigid,
        shell,
        attachment_stiffness: material.attachment_stiffness,
        attachment_yield: material.attachment_yield,
        obstacles: Vec::new(),
        gravity: core.gravity,
        max_drive_force: core.max_drive_force,
        drive: DriveInput::default(),
        clock: 0.0,
        frame: 0,
        plastic_total: 0,
        surface: Vec::new(),
        scratch: Vec::new(),
    };
    world.sync_surface()?;
    Ok(world)
}

impl VehicleWorld {
    pub fn model(&self) -> &VehicleModel {
        &self.model
    }

    pub fn core(&self) -> &RigidCore {
        &self.core
    }

    pub fn shell(&self) -> &Shell {
        &self.shell
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.shell.nodes
    }

    pub fn constraints(&self) -> &[DistanceConstraint] {
        &self.shell.constraints
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn set_obstacles(&mut self, obstacles: Vec<Obstacle>) {
        self.obstacles = obstacles;
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn dt(&self) -> f64 {
        self.shell.params.dt
    }

    pub fn plastic_events_total(&self) -> usize {
        self.plastic_total
    }

    /// World-space deformed surface as of the last step.
    pub fn surface(&self) -> &[Vec3] {
        &self.surface
    }

    pub fn drive_input(&self) -> DriveInput {
        self.drive
    }

    /// Sets the throttle (clamped to −1..1) and front-wheel steering angle.
    pub fn drive(&mut self, throttle: f64, steer: f64) {
        self.drive = DriveInput {
            throttle: throttle.clamp(-1.0, 1.0),
            steer,
        };
    }

    /// Per-node `body_rest − body_rest_initial`.
    pub fn deltas(&self) -> Vec<Vec3> {
        self.shell.nodes.iter().map(NodeState::deviation).collect()
    }

    /// Surface of the shell settled into its current rest shape.
    pub fn settled_surface(&self) -> Vec<Vec3> {
        self.model
            .settled_surface(&self.core.pose(), &self.deltas())
            .expect("binding matches the model it was assembled with")
    }

    /// Places the core at `pose` with the given velocities and puts every
    /// node exactly on its attachment target, moving with the body.
    pub fn set_motion(&mut self, pose: Isometry3<f64>, linear: Vec3, angular: Vec3) {
        self.core.position = pose.translation.vector;
        self.core.orientation = pose.rotation;
        self.core.linear_velocity = linear;
        self.core.angular_velocity = angular;
        let dt = self.dt();
        for node in &mut self.shell.nodes {
            let world = pose.transform_point(&node.body_rest.into()).coords;
            let velocity = self.core.point_velocity(&(world - self.core.position));
            node.position = world;
            node.prev_position = world - velocity * dt;
        }
        self.sync_surface().expect("binding matches the model it was assembled with");
    }

    /// World-space wheel forces and their application points.
    pub fn wheel_forces(&self) -> [(Vec3, Vec3); 4] {
        let pose = self.core.pose();
        let share = self.drive.throttle * self.max_drive_force / 4.0;
        let steer = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), self.drive.steer);
        let forward = Vec3::x();
        std::array::from_fn(|w| {
            let dir_body = if w < 2 { steer * forward } else { forward };
            let point = pose.transform_point(&self.core.wheel_offsets[w].into()).coords;
            (point, pose.rotation * dir_body * share)
        })
    }

    fn integrate_core(&mut self, dt: f64) {
        let mut force = self.gravity * self.core.mass;
        let mut torque = Vec3::zeros();
        if self.drive.throttle != 0.0 {
            for (point, f) in self.wheel_forces() {
                force += f;
                torque += (point - self.core.position).cross(&f);
            }
        }
        self.core.integrate(&force, &torque, dt);
    }

    /// Feeds this frame's node contacts back into the core: impulses that
    /// cancel the core's approach velocity at each contact (with Coulomb
    /// friction), each node limited to what its attachment can carry before
    /// yielding, then a positional correction of the core pose.
    fn contact_response(&mut self, dt: f64) {
        struct Row {
            r: Vec3,
            normal: Vec3,
            friction: f64,
            cap: f64,
            k_normal: f64,
            normal_impulse: f64,
            friction_impulse: Vec3,
        }
        let inv_inertia = self.core.inverse_inertia_world();
        let max_deviation = self.shell.params.max_deviation;
        let mut rows: Vec<Row> = Vec::new();
        for (node, slot) in self.shell.nodes.iter().zip(&self.contact_slots) {
            let Some(contact) = slot else { continue };
            let r = node.position - self.core.position;
            let bottomed = node.deviation().norm() >= max_deviation * (1.0 - 1e-9);
            let cap = if bottomed {
                f64::INFINITY
            } else {
                node.mass() * self.attachment_yield / dt
            };
            rows.push(Row {
                k_normal: self.core.inverse_effective_mass(&r, &contact.normal, &inv_inertia),
                r,
                normal: contact.normal,
                friction: contact.friction,
                cap,
                normal_impulse: 0.0,
                friction_impulse: Vec3::zeros(),
            });
        }
        if rows.is_empty() {
            return;
        }

        // Jacobi passes: every row sees the same core velocity and the
        // updates are averaged, so the result does not depend on node order.
        let share = 1.0 / rows.len() as f64;
        for _ in 0..IMPULSE_PASSES {
            let before = self.core.clone();
            let mut impulses = Vec::with_capacity(rows.len());
            for row in &mut rows {
                let approach = before.point_velocity(&row.r).dot(&row.normal);
                let total = (row.normal_impulse - approach / row.k_normal).clamp(0.0, row.cap);
                let delta = share * (total - row.normal_impulse);
                row.normal_impulse += delta;
                impulses.push((row.normal * delta, row.r));
            }
            for (impulse, r) in impulses.drain(..) {
                self.core.apply_impulse(&impulse, &r, &inv_inertia);
            }

            let before = self.core.clone();
            for row in &mut rows {
                if row.friction == 0.0 {
                    continue;
                }
                let u = before.point_velocity(&row.r);
                let slip = u - row.normal * u.dot(&row.normal);
                let speed = slip.norm();
                if speed <= 1e-12 {
                    continue;
                }
                let t = slip / speed;
                let k_t = before.inverse_effective_mass(&row.r, &t, &inv_inertia);
                let mut wanted = row.friction_impulse - t * (speed / k_t);
                let limit = row.friction * row.normal_impulse;
                let len = wanted.norm();
                if len > limit {
                    wanted *= limit / len;
                }
                let delta = (wanted - row.friction_impulse) * share;
                row.friction_impulse += delta;
                impulses.push((delta, row.r));
            }
            for (impulse, r) in impulses {
                self.core.apply_impulse(&impulse, &r, &inv_inertia);
            }
        }

        // Positional pass on the core pose, same scheme: move attachment
        // targets that ended up inside an obstacle back out by a fraction of
        // their depth, without touching velocities.
        let pose = self.core.pose();
        let mut lifts: Vec<(Vec3, Vec3, f64, f64, f64)> = Vec::new();
        for (node, slot) in self.shell.nodes.iter().zip(&self.contact_slots) {
            let Some(contact) = slot else { continue };
            let target = pose.transform_point(&node.body_rest.into()).coords;
            let r = target - self.core.position;
            let depth = (node.position - target).dot(&contact.normal);
            let k = self.core.inverse_effective_mass(&r, &contact.normal, &inv_inertia);
            lifts.push((r, contact.normal, POSITION_RELAXATION * depth, k, 0.0));
        }
        let (mut shift, mut turn) = (Vec3::zeros(), Vec3::zeros());
        for _ in 0..IMPULSE_PASSES {
            let (shift0, turn0) = (shift, turn);
            for (r, normal, wanted, k, total) in &mut lifts {
                let moved = (shift0 + turn0.cross(r)).dot(normal);
                let next = (*total + (*wanted - moved) / *k).max(0.0);
                let delta = share * (next - *total);
                *total += delta;
                shift += *normal * (delta / self.core.mass);
                turn += inv_inertia * r.cross(&(*normal * delta));
            }
        }
        self.core.position += shift;
        let spin = UnitQuaternion::from_scaled_axis(turn);
        self.core.orientation = UnitQuaternion::new_normalize((spin * self.core.orientation).into_inner());
    }

    fn sync_surface(&mut self) -> Result<(), BindingError> {
        let pose = self.core.pose();
        self.scratch.clear();
        self.scratch.extend(
            self.shell
                .nodes
                .iter()
                .map(|n| pose.inverse_transform_point(&n.position.into()).coords),
        );
        self.model.body_surface_into(&self.scratch, &mut self.surface)?;
        for v in &mut self.surface {
            *v = pose.transform_point(&(*v).into()).coords;
        }
        Ok(())
    }

    /// Advances one frame: core integration, shell solve against obstacles
    /// with attachment coupling, contact feedback to the core, and a refresh
    /// of the deformed surface.
    pub fn step(&mut self) -> Result<FrameReport, VehicleError> {
        let started = Instant::now();
        let dt = self.dt();
        self.integrate_core(dt);

        let attachments = Attachments {
            frame: self.core.pose(),
            stiffness: self.attachment_stiffness,
            yield_distance: self.attachment_yield,
        };
        self.contact_slots.fill(None);
        let obstacles = &self.obstacles;
        let slots = &mut self.contact_slots;
        let outcome = self
            .shell
            .solve_step(&self.accelerations, Some(&attachments), |nodes| {
                if obstacles.is_empty() {
                    return;
                }
                for contact in resolve_contacts(nodes, obstacles) {
                    slots[contact.node] = Some(contact);
                }
            })?;
        let contacts = self.contact_slots.iter().filter(|c| c.is_some()).count();
        self.contact_response(dt);
        let step_time = started.elapsed();

        let sync_started = Instant::now();
        self.sync_surface()?;
        let sync_time = sync_started.elapsed();

        self.frame += 1;
        self.clock = self.frame as f64 * dt;
        self.plastic_total += outcome.plastic_events.len();
        Ok(FrameReport {
            frame: self.frame,
            clock: self.clock,
            max_strain: outcome.max_strain,
            plastic_events: outcome.plastic_events.len(),
            would_break: outcome.would_break.len(),
            contacts,
            core_speed: self.core.speed(),
            step_time,
            sync_time,
        })
    }
}
