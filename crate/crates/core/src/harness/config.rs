//! Scenario files.
//!
//! INI-style `key = value` lines under `[section]` headers; `#` and `;`
//! start comments. Vectors are comma-separated. Sections and keys:
//!
//! ```text
//! [mesh]          path = car.obj            (relative to the scenario file)
//!                 proxy = 31, 32            (built-in car proxy: stations, ring)
//!                 refine = 1                (proxy subdivision factor)
//! [vehicle]       mass, control_points, alpha, inertia = ix, iy, iz,
//!                 max_drive_force, wheel_fl / wheel_fr / wheel_rl / wheel_rr = x, y, z
//! [material]      stiffness, yield_strain, break_strain, max_deviation,
//!                 attachment_stiffness, attachment_yield
//! [initial]       position, orientation = qx, qy, qz, qw, velocity, angular_velocity
//! [solver]        dt (number or a/b), iterations, damping, gravity = gx, gy, gz,
//!                 duration, cadence
//! [obstacle.NAME] type = halfspace | sphere | box, friction,
//!                 halfspace: point, normal   sphere: center, radius
//!                 box: center, half_extents, orientation = qx, qy, qz, qw
//! [drive]         event = time, throttle, steer    (repeatable)
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ini::{Ini, ParseOption, Properties};
use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion};

use crate::binding::DEFAULT_ALPHA;
use crate::collision::Obstacle;
use crate::dynamics::Material;
use crate::geometry::Vec3;
use crate::vehicle::{CoreConfig, InitialState, MaterialConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at {0}")]
    Syntax(String),
    #[error("[{section}] is missing `{key}`")]
    Missing { section: String, key: String },
    #[error("[{section}] {key}: {message}")]
    Invalid {
        section: String,
        key: String,
        message: String,
    },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("[{section}] unknown key `{key}`")]
    UnknownKey { section: String, key: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    File(PathBuf),
    Proxy {
        stations: usize,
        ring: usize,
        refine: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveEvent {
    pub time: f64,
    pub throttle: f64,
    pub steer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mesh: MeshSource,
    pub mass: f64,
    /// Hull vertices kept for the control shell (the centroid node is extra).
    pub control_points: usize,
    pub alpha: f64,
    pub material: MaterialConfig,
    pub core: CoreConfig,
    pub initial: InitialState,
    pub obstacles: Vec<Obstacle>,
    /// Sorted by time; the latest event at or before the clock is in force.
    pub drive: Vec<DriveEvent>,
    pub duration: f64,
    /// Export every `cadence`-th frame.
    pub cadence: usize,
}

impl Scenario {
    pub fn steps(&self) -> u64 {
        (self.duration / self.material.solver.dt).round() as u64
    }

    pub fn drive_at(&self, clock: f64) -> Option<DriveEvent> {
        self.drive.iter().rev().find(|e| e.time <= clock + 1e-12).copied()
    }
}

struct Section<'a> {
    name: String,
    props: &'a Properties,
}

impl<'a> Section<'a> {
    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            section: self.name.clone(),
            key: key.into(),
            message: message.into(),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for (key, _) in self.props.iter() {
            if !allowed.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    section: self.name.clone(),
                    key: key.into(),
                });
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.props.get(key).map(str::trim)
    }

    fn required(&self, key: &str) -> Result<&'a str, ConfigError> {
        self.raw(key).ok_or_else(|| ConfigError::Missing {
            section: self.name.clone(),
            key: key.into(),
        })
    }

    fn number_from(&self, key: &str, text: &str) -> Result<f64, ConfigError> {
        let value = match text.split_once('/') {
            Some((num, den)) => {
                let num: f64 = num.trim().parse().map_err(|_| self.invalid(key, format!("`{text}` is not a number")))?;
                let den: f64 = den.trim().parse().map_err(|_| self.invalid(key, format!("`{text}` is not a number")))?;
                num / den
            }
            None => text
                .parse()
                .map_err(|_| self.invalid(key, format!("`{text}` is not a number")))?,
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.invalid(key, format!("`{text}` is not finite")))
        }
    }

    fn number(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.raw(key).map_or(Ok(default), |t| self.number_from(key, t))
    }

    fn count(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        self.raw(key).map_or(Ok(default), |t| {
            t.parse()
                .map_err(|_| self.invalid(key, format!("`{t}` is not a non-negative integer")))
        })
    }

    fn list_from(&self, key: &str, text: &str) -> Result<Vec<f64>, ConfigError> {
        text.split(',').map(|p| self.number_from(key, p.trim())).collect()
    }

    fn fixed<const N: usize>(&self, key: &str, text: &str) -> Result<[f64; N], ConfigError> {
        let values = self.list_from(key, text)?;
        values
            .try_into()
            .map_err(|v: Vec<f64>| self.invalid(key, format!("expected {N} values, got {}", v.len())))
    }

    fn vector(&self, key: &str) -> Result<Option<Vec3>, ConfigError> {
        self.raw(key)
            .map(|t| self.fixed::<3>(key, t).map(Vec3::from))
            .transpose()
    }

    fn quaternion(&self, key: &str) -> Result<Option<UnitQuaternion<f64>>, ConfigError> {
        let Some(text) = self.raw(key) else {
            return Ok(None);
        };
        let [x, y, z, w] = self.fixed::<4>(key, text)?;
        let q = Quaternion::new(w, x, y, z);
        if q.norm() < 1e-12 {
            return Err(self.invalid(key, "zero quaternion"));
        }
        Ok(Some(UnitQuaternion::from_quaternion(q)))
    }
}


fn section_keys(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "mesh" => &["path", "proxy", "refine"],
        "vehicle" => &[
            "mass",
            "control_points",
            "alpha",
            "inertia",
            "max_drive_force",
            "wheel_fl",
            "wheel_fr",
            "wheel_rl",
            "wheel_rr",
        ],
        "material" => &[
            "stiffness",
            "yield_strain",
            "break_strain",
            "max_deviation",
            "attachment_stiffness",
            "attachment_yield",
        ],
        "initial" => &["position", "orientation", "velocity", "angular_velocity"],
        "solver" => &["dt", "iterations", "damping", "gravity", "duration", "cadence"],
        "drive" => &["event"],
        _ if name.starts_with("obstacle.") => &[
            "type",
            "friction",
            "point",
            "normal",
            "center",
            "radius",
            "half_extents",
            "orientation",
        ],
        _ => return None,
    })
}

/// Parses scenario text. Relative mesh paths resolve against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, ConfigError> {
    let options = ParseOption {
        enabled_escape: false,
        enabled_quote: true,
        ..ParseOption::default()
    };
    let ini = Ini::load_from_str_opt(text, options).map_err(|e| ConfigError::Syntax(e.to_string()))?;

    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    for (name, props) in ini.iter() {
        let name = name.unwrap_or("").trim().to_string();
        if name.is_empty() {
            if props.iter().next().is_some() {
                return Err(ConfigError::UnknownSection("<top level>".into()));
            }
            continue;
        }
        let allowed = section_keys(&name).ok_or_else(|| ConfigError::UnknownSection(name.clone()))?;
        let section = Section {
            name: name.clone(),
            props,
        };
        section.check_keys(allowed)?;
        sections.insert(name, section);
    }
    let empty = Properties::new();
    let get = |name: &str| -> Section {
        match sections.get(name) {
            Some(s) => Section {
                name: s.name.clone(),
                props: s.props,
            },
            None => Section {
                name: name.into(),
                props: &empty,
            },
        }
    };

    let mesh_section = get("mesh");
    let mesh = match (mesh_section.raw("path"), mesh_section.raw("proxy")) {
        (Some(_), Some(_)) => return Err(mesh_section.invalid("proxy", "give either path or proxy, not both")),
        (Some(path), None) => MeshSource::File(base_dir.join(path)),
        (None, Some(text)) => {
            let [stations, ring] = mesh_section.fixed::<2>("proxy", text)?;
            if stations < 2.0 || ring < 3.0 || stations.fract() != 0.0 || ring.fract() != 0.0 {
                return Err(mesh_section.invalid("proxy", "need integer stations ≥ 2 and ring ≥ 3"));
            }
            let refine = mesh_section.count("refine", 1)?;
            if refine == 0 {
                return Err(mesh_section.invalid("refine", "must be at least 1"));
            }
            MeshSource::Proxy {
                stations: stations as usize,
                ring: ring as usize,
                refine,
            }
        }
        (None, None) => {
            return Err(ConfigError::Missing {
                section: "mesh".into(),
                key: "path".into(),
            })
        }
    };

    let vehicle = get("vehicle");
    let mass = vehicle.number_from("mass", vehicle.required("mass")?)?;
    if mass <= 0.0 {
        return Err(vehicle.invalid("mass", "must be positive"));
    }
    let control_points = vehicle.count("control_points", 32)?;
    if control_points < 4 {
        return Err(vehicle.invalid("control_points", "must be at least 4"));
    }
    let alpha = vehicle.number("alpha", DEFAULT_ALPHA)?;
    if alpha <= 0.0 {
        return Err(vehicle.invalid("alpha", "must be positive"));
    }
    let inertia = vehicle.vector("inertia")?;
    if inertia.is_some_and(|i| i.iter().any(|&v| v <= 0.0)) {
        return Err(vehicle.invalid("inertia", "components must be positive"));
    }
    let wheels = ["wheel_fl", "wheel_fr", "wheel_rl", "wheel_rr"]
        .map(|k| vehicle.vector(k))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let wheel_offsets = match wheels.iter().filter(|w| w.is_some()).count() {
        0 => None,
        4 => Some(std::array::from_fn(|i| wheels[i].unwrap())),
        _ => return Err(vehicle.invalid("wheel_fl", "give all four wheel offsets or none")),
    };
    let defaults = CoreConfig::default();
    let max_drive_force = vehicle.number("max_drive_force", defaults.max_drive_force)?;
    if max_drive_force < 0.0 {
        return Err(vehicle.invalid("max_drive_force", "must be non-negative"));
    }

    let solver = get("solver");
    let gravity = solver.vector("gravity")?.unwrap_or(defaults.gravity);
    let core = CoreConfig {
        inertia,
        wheel_offsets,
        max_drive_force,
        gravity,
    };

    let material_section = get("material");
    let base = MaterialConfig::default();
    let shell = Material {
        stiffness: material_section.number("stiffness", base.shell.stiffness)?,
        yield_strain: material_section.number("yield_strain", base.shell.yield_strain)?,
        break_strain: material_section.number("break_strain", base.shell.break_strain)?,
    };
    let mut params = base.solver;
    params.max_deviation = material_section.number("max_deviation", params.max_deviation)?;
    params.dt = solver.number("dt", params.dt)?;
    params.iterations = solver.count("iterations", params.iterations)?;
    params.damping = solver.number("damping", params.damping)?;
    params
        .validate()
        .map_err(|e| solver.invalid("dt", e.to_string()))?;
    let material = MaterialConfig {
        shell,
        attachment_stiffness: material_section.number("attachment_stiffness", base.attachment_stiffness)?,
        attachment_yield: material_section.number("attachment_yield", base.attachment_yield)?,
        solver: params,
    };

    let duration = solver.number_from("duration", solver.required("duration")?)?;
    if duration <= 0.0 {
        return Err(solver.invalid("duration", "must be positive"));
    }
    let cadence = solver.count("cadence", 1)?;
    if cadence == 0 {
        return Err(solver.invalid("cadence", "must be at least 1"));
    }

    let init = get("initial");
    let initial = InitialState {
        pose: Isometry3::from_parts(
            Translation3::from(init.vector("position")?.unwrap_or_else(Vec3::zeros)),
            init.quaternion("orientation")?.unwrap_or_else(UnitQuaternion::identity),
        ),
        linear_velocity: init.vector("velocity")?.unwrap_or_else(Vec3::zeros),
        angular_velocity: init.vector("angular_velocity")?.unwrap_or_else(Vec3::zeros),
    };

    let mut obstacles = Vec::new();
    for (name, section) in &sections {
        if !name.starts_with("obstacle.") {
            continue;
        }
        obstacles.push(parse_obstacle(section)?);
    }

    let drive_section = get("drive");
    let mut drive = Vec::new();
    for text in drive_section.props.get_all("event") {
        let [time, throttle, steer] = drive_section.fixed::<3>("event", text.trim())?;
        if !(-1.0..=1.0).contains(&throttle) {
            return Err(drive_section.invalid("event", format!("throttle {throttle} outside −1..1")));
        }
        drive.push(DriveEvent { time, throttle, steer });
    }
    drive.sort_by(|a, b| a.time.total_cmp(&b.time));

    Ok(Scenario {
        mesh,
        mass,
        control_points,
        alpha,
        material,
        core,
        initial,
        obstacles,
        drive,
        duration,
        cadence,
    })
}

fn parse_obstacle(s: &Section) -> Result<Obstacle, ConfigError> {
    let friction = s.number("friction", 0.0)?;
    let need = |key: &str| -> Result<Vec3, ConfigError> {
        s.vector(key)?.ok_or_else(|| ConfigError::Missing {
            section: s.name.clone(),
            key: key.into(),
        })
    };
    let kind = s.required("type")?;
    let built = match kind {
        "halfspace" => {
            let normal = need("normal")?;
            if normal.norm() < 1e-12 {
                return Err(s.invalid("normal", "zero normal"));
            }
            Obstacle::half_space(need("point")?, normal.normalize(), friction)
        }
        "sphere" => Obstacle::sphere(need("center")?, s.number_from("radius", s.required("radius")?)?, friction),
        "box" => Obstacle::cuboid(
            need("center")?,
            need("half_extents")?,
            s.quaternion("orientation")?.unwrap_or_else(UnitQuaternion::identity),
            friction,
        ),
        other => return Err(s.invalid("type", format!("unknown obstacle type `{other}`"))),
    };
    built.map_err(|e| s.invalid("type", e.to_string()))
}
