//! Position-based shell dynamics.
//!
//! Nodes are point masses integrated with position Verlet; their velocity is
//! implied by `position − prev_position`. Distance constraints are projected
//! Gauss–Seidel style in construction order. Constraints strained past their
//! yield strain take a new rest length (plastic flow), and attachment springs
//! to a rigid frame migrate each node's body-frame rest point the same way.

use nalgebra::Isometry3;

use crate::geometry::Vec3;

/// Strain is computed against `rest_length`; rest lengths never drop below this.
const MIN_REST_LENGTH: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("simulation diverged at step {step}: node {node} has a non-finite position")]
    Diverged { step: u64, node: usize },
    #[error("invalid solver parameters: {0}")]
    BadParams(&'static str),
    #[error("invalid constraint between {a} and {b}: {reason}")]
    BadConstraint {
        a: usize,
        b: usize,
        reason: &'static str,
    },
    #[error("expected {expected} accelerations, got {got}")]
    AccelerationCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState {
    pub position: Vec3,
    pub prev_position: Vec3,
    /// `1 / mass`; zero pins the node.
    pub inverse_mass: f64,
    /// Rest location in the vehicle body frame. Moves under plastic flow.
    pub body_rest: Vec3,
    /// Original body-frame rest location. Never changes.
    pub body_rest_initial: Vec3,
}

impl NodeState {
    /// A node at rest at `position` whose body frame coincides with the world.
    pub fn new(position: Vec3, inverse_mass: f64) -> Self {
        NodeState {
            position,
            prev_position: position,
            inverse_mass,
            body_rest: position,
            body_rest_initial: position,
        }
    }

    pub fn is_pinned(&self) -> bool {
        self.inverse_mass == 0.0
    }

    pub fn mass(&self) -> f64 {
        if self.is_pinned() {
            f64::INFINITY
        } else {
            1.0 / self.inverse_mass
        }
    }

    pub fn velocity(&self, dt: f64) -> Vec3 {
        (self.position - self.prev_position) / dt
    }

    /// `body_rest − body_rest_initial`.
    pub fn deviation(&self) -> Vec3 {
        self.body_rest - self.body_rest_initial
    }
}

/// Elastic/plastic response shared by a group of constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Fraction of the violation removed per projection, in (0, 1].
    pub stiffness: f64,
    /// Strain magnitude where elastic behaviour ends.
    pub yield_strain: f64,
    /// Strain magnitude where the constraint would fracture. Fracture is not
    /// simulated; crossing it is only reported.
    pub break_strain: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material {
            stiffness: 1.0,
            yield_strain: 0.02,
            break_strain: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceConstraint {
    pub a: usize,
    pub b: usize,
    pub rest_length: f64,
    pub initial_rest_length: f64,
    pub stiffness: f64,
    pub yield_strain: f64,
    pub break_strain: f64,
}

impl DistanceConstraint {
    pub fn new(a: usize, b: usize, rest_length: f64, material: Material) -> Result<Self, DynamicsError> {
        let bad = |reason| Err(DynamicsError::BadConstraint { a, b, reason });
        if a == b {
            return bad("endpoints coincide");
        }
        if !(rest_length > 0.0 && rest_length.is_finite()) {
            return bad("rest length must be positive");
        }
        if !(material.stiffness > 0.0 && material.stiffness <= 1.0) {
            return bad("stiffness must be in (0, 1]");
        }
        if !(material.yield_strain > 0.0 && material.yield_strain < material.break_strain) {
            return bad("need 0 < yield strain < break strain");
        }
        Ok(DistanceConstraint {
            a,
            b,
            rest_length,
            initial_rest_length: rest_length,
            stiffness: material.stiffness,
            yield_strain: material.yield_strain,
            break_strain: material.break_strain,
        })
    }

    pub fn current_length(&self, nodes: &[NodeState]) -> f64 {
        (nodes[self.a].position - nodes[self.b].position).norm()
    }

    pub fn strain_at(&self, length: f64) -> f64 {
        (length - self.rest_length) / self.rest_length
    }

    pub fn strain(&self, nodes: &[NodeState]) -> f64 {
        self.strain_at(self.current_length(nodes))
    }

    pub fn is_plastically_deformed(&self) -> bool {
        self.rest_length != self.initial_rest_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub dt: f64,
    pub iterations: usize,
    /// Largest allowed distance between a node's body rest and its original rest.
    pub max_deviation: f64,
    /// Fraction of implicit velocity removed each step, in [0, 1).
    pub damping: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            dt: 1.0 / 120.0,
            iterations: 8,
            max_deviation: 0.35,
            damping: 0.02,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DynamicsError::BadParams("dt must be positive"));
        }
        if self.iterations == 0 {
            return Err(DynamicsError::BadParams("iterations must be at least 1"));
        }
        if !(self.max_deviation > 0.0) {
            return Err(DynamicsError::BadParams("max deviation must be positive"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(DynamicsError::BadParams("damping must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Springs pulling every node toward `frame · body_rest`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attachments {
    pub frame: Isometry3<f64>,
    pub stiffness: f64,
    /// Body-frame distance past which a node's rest point flows toward it.
    pub yield_distance: f64,
}

impl Attachments {
    pub fn target(&self, node: &NodeState) -> Vec3 {
        self.frame.transform_point(&node.body_rest.into()).coords
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlasticEvent {
    Constraint {
        index: usize,
        old_rest_length: f64,
        new_rest_length: f64,
    },
    Attachment {
        node: usize,
        old_body_rest: Vec3,
        new_body_rest: Vec3,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub plastic_events: Vec<PlasticEvent>,
    /// Constraints whose strain passed `break_strain` this step.
    pub would_break: Vec<usize>,
    /// Projections skipped because both endpoints coincided.
    pub degenerate_projections: usize,
    /// Largest |strain| over all constraints, measured before plastic updates.
    pub max_strain: f64,
}

/// Position Verlet with velocity damping. Pinned nodes do not move.
pub fn integrate_verlet(nodes: &mut [NodeState], accelerations: &[Vec3], dt: f64, damping: f64) {
    let dt2 = dt * dt;
    for (node, a) in nodes.iter_mut().zip(accelerations) {
        if node.is_pinned() {
            continue;
        }
        let current = node.position;
        node.position = current + (current - node.prev_position) * (1.0 - damping) + a * dt2;
        node.prev_position = current;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Moved,
    /// Both endpoints pinned; nothing can move.
    Immovable,
    /// Endpoints coincide so the correction direction is undefined.
    Degenerate,
}

/// Moves the endpoints of `c` along their axis toward the rest length,
/// split by inverse mass and scaled by `stiffness`.
pub fn project_distance(nodes: &mut [NodeState], c: &DistanceConstraint, stiffness: f64) -> Projection {
    let (pa, pb) = (nodes[c.a].position, nodes[c.b].position);
    let (wa, wb) = (nodes[c.a].inverse_mass, nodes[c.b].inverse_mass);
    let w = wa + wb;
    if w == 0.0 {
        return Projection::Immovable;
    }
    let delta = pa - pb;
    let length = delta.norm();
    if length < f64::EPSILON * c.rest_length.max(1.0) {
        return Projection::Degenerate;
    }
    let correction = delta * ((length - c.rest_length) / length * stiffness / w);
    nodes[c.a].position -= correction * wa;
    nodes[c.b].position += correction * wb;
    Projection::Moved
}

/// Elastic/plastic update for a constraint currently at `current_length`.
///
/// Inside the elastic range nothing changes. Past yield the rest length is
/// rewritten so exactly `yield_strain` of elastic strain remains, and `true`
/// is returned.
pub fn apply_plasticity(c: &mut DistanceConstraint, current_length: f64) -> bool {
    let strain = c.strain_at(current_length);
    if strain.abs() <= c.yield_strain {
        return false;
    }
    let new_rest = current_length / (1.0 + strain.signum() * c.yield_strain);
    c.rest_length = new_rest.max(MIN_REST_LENGTH);
    true
}

/// Pulls `body_rest` back onto the closed ball of radius `max_deviation`
/// around `body_rest_initial`. Returns whether it moved.
pub fn clamp_deviation(node: &mut NodeState, max_deviation: f64) -> bool {
    let d = node.deviation();
    let len = d.norm();
    if len <= max_deviation {
        return false;
    }
    node.body_rest = node.body_rest_initial + d * (max_deviation / len);
    true
}

/// Pulls a node toward `target` (treated as infinitely heavy).
pub fn project_attachment(node: &mut NodeState, target: &Vec3, stiffness: f64) {
    if !node.is_pinned() {
        node.position += (target - node.position) * stiffness;
    }
}

/// Lets the node's body rest flow toward the node's body-frame position when
/// they are more than `yield_distance` apart, leaving exactly that much gap.
pub fn attachment_plasticity(node: &mut NodeState, frame: &Isometry3<f64>, yield_distance: f64) -> bool {
    let local = frame.inverse_transform_point(&node.position.into()).coords;
    let gap = local - node.body_rest;
    let len = gap.norm();
    if len <= yield_distance {
        return false;
    }
    node.body_rest += gap * (1.0 - yield_distance / len);
    true
}

/// Control-node shell: nodes, their distance constraints and solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub nodes: Vec<NodeState>,
    pub constraints: Vec<DistanceConstraint>,
    pub params: SolverParams,
    steps: u64,
}

impl Shell {
    pub fn new(
        nodes: Vec<NodeState>,
        constraints: Vec<DistanceConstraint>,
        params: SolverParams,
    ) -> Result<Self, DynamicsError> {
        params.validate()?;
        for c in &constraints {
            if c.a >= nodes.len() || c.b >= nodes.len() {
                return Err(DynamicsError::BadConstraint {
                    a: c.a,
                    b: c.b,
                    reason: "endpoint out of range",
                });
            }
        }
        Ok(Shell {
            nodes,
            constraints,
            params,
            steps: 0,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn max_strain(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.strain(&self.nodes).abs())
            .fold(0.0, f64::max)
    }

    /// One solver step:
    ///
    /// 1. Verlet integration under `accelerations`.
    /// 2. `collide` once on the predicted positions.
    /// 3. `iterations` rounds of distance projections, then attachment
    ///    projections, then `collide` again so contacts are honoured at the
    ///    end of every round.
    /// 4. Plastic update of every distance constraint, then of every
    ///    attachment, then the deviation clamp.
    pub fn solve_step<C>(
        &mut self,
        accelerations: &[Vec3],
        attachments: Option<&Attachments>,
        mut collide: C,
    ) -> Result<StepOutcome, DynamicsError>
    where
        C: FnMut(&mut [NodeState]),
    {
        if accelerations.len() != self.nodes.len() {
            return Err(DynamicsError::AccelerationCount {
                expected: self.nodes.len(),
                got: accelerations.len(),
            });
        }
        let params = self.params;
        let mut outcome = StepOutcome::default();

        integrate_verlet(&mut self.nodes, accelerations, params.dt, params.damping);
        collide(&mut self.nodes);

        for _ in 0..params.iterations {
            for c in &self.constraints {
                if project_distance(&mut self.nodes, c, c.stiffness) == Projection::Degenerate {
                    outcome.degenerate_projections += 1;
                }
            }
            if let Some(att) = attachments {
                for node in &mut self.nodes {
                    let target = att.target(node);
                    project_attachment(node, &target, att.stiffness);
                }
            }
            collide(&mut self.nodes);
        }

        for (index, c) in self.constraints.iter_mut().enumerate() {
            let length = (self.nodes[c.a].position - self.nodes[c.b].position).norm();
            let strain = c.strain_at(length).abs();
            outcome.max_strain = outcome.max_strain.max(strain);
            if strain > c.break_strain {
                outcome.would_break.push(index);
            }
            let old = c.rest_length;
            if apply_plasticity(c, length) {
                outcome.plastic_events.push(PlasticEvent::Constraint {
                    index,
                    old_rest_length: old,
                    new_rest_length: c.rest_length,
                });
            }
        }
        if let Some(att) = attachments {
            for (index, node) in self.nodes.iter_mut().enumerate() {
                let old = node.body_rest;
                if attachment_plasticity(node, &att.frame, att.yield_distance) {
                    clamp_deviation(node, params.max_deviation);
                    outcome.plastic_events.push(PlasticEvent::Attachment {
                        node: index,
                        old_body_rest: old,
                        new_body_rest: node.body_rest,
                    });
                }
            }
        }
        for node in &mut self.nodes {
            clamp_deviation(node, params.max_deviation);
        }

        self.steps += 1;
        if let Some(node) = self
            .nodes
            .iter()
            .position(|n| !n.position.iter().all(|v| v.is_finite()))
        {
            return Err(DynamicsError::Diverged {
                step: self.steps,
                node,
            });
        }
        Ok(outcome)
    }
}
