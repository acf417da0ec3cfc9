use std::path::Path;

use crumple::harness::{build_world, parse_scenario, Scenario};

fn scenario(extra: &str) -> Scenario {
    let text = format!(
        "
[mesh]
proxy = 13, 12

[vehicle]
mass = 1000
control_points = 20

[solver]
dt = 1/100
duration = 2

[obstacle.ground]
type = halfspace
point = 0, 0, 0
normal = 0, 1, 0
friction = 0.2
{extra}"
    );
    parse_scenario(&text, Path::new(".")).unwrap()
}

#[test]
fn resting_on_the_ground_leaves_no_dent() {
    let s = scenario("");
    let mut world = build_world(&s).unwrap();
    for _ in 0..s.steps() {
        world.step().unwrap();
    }
    assert_eq!(world.plastic_events_total(), 0);
    let worst = world.deltas().iter().map(|d| d.norm()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "rest drifted by {worst}");
    assert!(world.core().speed() < 1e-3, "speed {}", world.core().speed());
}

#[test]
fn straight_throttle_keeps_heading() {
    let s = scenario("[drive]\nevent = 0, 1, 0\n");
    let mut world = build_world(&s).unwrap();
    world.drive(1.0, 0.0);
    for _ in 0..s.steps() {
        world.step().unwrap();
    }
    let v = world.core().linear_velocity;
    assert!(v.x > 1.0, "no acceleration: {v:?}");
    assert!(v.z.abs() < 1e-6 * v.x, "drifted sideways: {v:?}");
    assert!(world.core().angular_velocity.y.abs() < 1e-6, "yawed");
}

#[test]
fn steering_turns_opposite_ways() {
    let mut yaw = Vec::new();
    for steer in [0.3, -0.3] {
        let s = scenario("");
        let mut world = build_world(&s).unwrap();
        world.drive(1.0, steer);
        for _ in 0..s.steps() {
            world.step().unwrap();
        }
        yaw.push(world.core().angular_velocity.y);
    }
    assert!(yaw[0].abs() > 1e-3, "steering had no effect: {yaw:?}");
    assert!(yaw[0].signum() != yaw[1].signum(), "{yaw:?}");
    assert!((yaw[0] + yaw[1]).abs() < 1e-6 * yaw[0].abs().max(1.0), "{yaw:?}");
}

#[test]
fn ramming_a_barrier_dents_only_the_front() {
    let s = scenario(
        "
[initial]
velocity = 12, 0, 0

[obstacle.barrier]
type = box
center = 2.9, 0.5, 0
half_extents = 0.2, 1, 3
",
    );
    let mut world = build_world(&s).unwrap();
    for _ in 0..150 {
        world.step().unwrap();
    }
    assert!(world.plastic_events_total() > 0);
    let rest = &world.model().control_rest;
    let deltas = world.deltas();
    let (mut front, mut rear, mut push) = (0.0f64, 0.0f64, 0.0);
    for (r, d) in rest.iter().zip(&deltas) {
        if r.x > 0.5 {
            push += d.x;
            front = front.max(d.norm());
        } else if r.x < -0.5 {
            rear = rear.max(d.norm());
        }
    }
    assert!(front > 0.02, "front dent {front}");
    assert!(rear < 0.5 * front, "front {front}, rear {rear}");
    assert!(push < 0.0, "front pushed forward by {push}");
}
