use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::schema::SceneSchema;
use crate::error::{Error, Result};
use crate::kv::{format_list, KvMap};

pub type Vec2 = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn square(half: f64) -> Self {
        Self {
            min: [-half, -half],
            max: [half, half],
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (0..2).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

/// World parameters for the 2D circle simulator. Lengths are world units,
/// velocities world units per step.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsParams {
    /// Initial velocities are aimed at a uniform point of this box.
    pub colliding_position_range: Aabb,
    pub summon_radius: f64,
    pub min_summon_distance: f64,
    pub max_initial_speed: f64,
    pub ground_friction: f64,
    /// Seconds per step; only enters the friction decay `1 - ground_friction * dt`.
    pub dt: f64,
    /// Default coefficient of restitution.
    pub restitution: f64,
    /// Per-class restitution override, indexed by class id. Empty means
    /// every class uses `restitution`.
    pub class_restitution: Vec<f64>,
    pub object_radius_range: (f64, f64),
    /// Walls sit at `±arena_half_extent` on both axes.
    pub arena_half_extent: f64,
    /// Rejection-sampling budget per object.
    pub placement_attempts: usize,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            colliding_position_range: Aabb::square(1.0),
            summon_radius: 5.0,
            min_summon_distance: 2.0,
            max_initial_speed: 1.25,
            ground_friction: 0.3,
            dt: 0.25,
            restitution: 1.0,
            class_restitution: Vec::new(),
            object_radius_range: (0.8, 1.0),
            arena_half_extent: 5.0,
            placement_attempts: 10_000,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.min_summon_distance < 2.0 * self.summon_radius) {
            errs.push("physics.min_summon_distance must be < 2 * summon_radius".to_string());
        }
        if !(self.max_initial_speed > 0.0) {
            errs.push("physics.max_initial_speed must be > 0".to_string());
        }
        for (i, e) in std::iter::once(self.restitution)
            .chain(self.class_restitution.iter().copied())
            .enumerate()
        {
            if !(0.0..=1.0).contains(&e) {
                errs.push(format!("physics restitution #{i} = {e} outside [0, 1]"));
            }
        }
        let (rmin, rmax) = self.object_radius_range;
        if !(rmin > 0.0 && rmin <= rmax) {
            errs.push("physics.object_radius_range must satisfy 0 < min <= max".to_string());
        }
        if !(self.arena_half_extent > rmax) {
            errs.push("physics.arena_half_extent must exceed the largest radius".to_string());
        }
        if !(self.ground_friction >= 0.0 && self.dt > 0.0) {
            errs.push("physics.ground_friction must be >= 0 and dt > 0".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn restitution_of(&self, class_id: usize) -> f64 {
        self.class_restitution
            .get(class_id)
            .copied()
            .unwrap_or(self.restitution)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        let r = &self.colliding_position_range;
        kv.insert(
            "colliding_position_range",
            format_list(&[r.min[0], r.min[1], r.max[0], r.max[1]]),
        );
        kv.insert("summon_radius", self.summon_radius);
        kv.insert("min_summon_distance", self.min_summon_distance);
        kv.insert("max_initial_speed", self.max_initial_speed);
        kv.insert("ground_friction", self.ground_friction);
        kv.insert("dt", self.dt);
        kv.insert("restitution", self.restitution);
        kv.insert("class_restitution", format_list(&self.class_restitution));
        kv.insert(
            "object_radius_range",
            format_list(&[self.object_radius_range.0, self.object_radius_range.1]),
        );
        kv.insert("arena_half_extent", self.arena_half_extent);
        kv.insert("placement_attempts", self.placement_attempts);
        kv
    }

    pub fn from_kv(kv: &KvMap) -> std::result::Result<Self, String> {
        let box4 = kv.parse_list::<f64>("colliding_position_range")?;
        let radii = kv.parse_list::<f64>("object_radius_range")?;
        if box4.len() != 4 || radii.len() != 2 {
            return Err("colliding_position_range needs 4 values, object_radius_range 2".into());
        }
        Ok(Self {
            colliding_position_range: Aabb {
                min: [box4[0], box4[1]],
                max: [box4[2], box4[3]],
            },
            summon_radius: kv.parse_value("summon_radius")?,
            min_summon_distance: kv.parse_value("min_summon_distance")?,
            max_initial_speed: kv.parse_value("max_initial_speed")?,
            ground_friction: kv.parse_value("ground_friction")?,
            dt: kv.parse_value("dt")?,
            restitution: kv.parse_value("restitution")?,
            class_restitution: kv.parse_list("class_restitution")?,
            object_radius_range: (radii[0], radii[1]),
            arena_half_extent: kv.parse_value("arena_half_extent")?,
            placement_attempts: kv.parse_value("placement_attempts")?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub color: [u8; 3],
    pub class_id: usize,
    pub slot_id: usize,
}

impl ObjectState {
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * (self.velocity[0].powi(2) + self.velocity[1].powi(2))
    }
}

/// Contact between two objects during a step, by slot id (`a < b`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Contact {
    pub slot_a: usize,
    pub slot_b: usize,
}

const PALETTE: [[u8; 3]; 8] = [
    [220, 60, 50],
    [50, 160, 70],
    [60, 90, 220],
    [230, 200, 50],
    [180, 70, 200],
    [50, 190, 200],
    [240, 140, 40],
    [200, 200, 200],
];

fn dist(a: Vec2, b: Vec2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Places every foreground slot of `schema` with collision-aimed velocities.
///
/// Positions are uniform over the summoning disk (restricted to the arena),
/// pairwise separated by at least `min_summon_distance` and never overlapping.
/// Each velocity points at a uniform target inside `colliding_position_range`
/// with speed uniform in `(0.3, 1.0] * max_initial_speed`.
pub fn sample_scene(
    schema: &SceneSchema,
    physics: &PhysicsParams,
    rng_seed: u64,
) -> Result<Vec<ObjectState>> {
    physics.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let slot_classes = schema.slot_classes();
    let mut placed: Vec<ObjectState> = Vec::with_capacity(schema.n_foreground());
    let (rmin, rmax) = physics.object_radius_range;
    let half = physics.arena_half_extent;

    for (slot, &class_id) in slot_classes.iter().enumerate().skip(1) {
        // Counts per violated constraint, used for the error message.
        let mut violations = [0usize; 3];
        let mut accepted = None;
        for _ in 0..physics.placement_attempts {
            let radius = if rmax > rmin { rng.random_range(rmin..=rmax) } else { rmin };
            let rho = physics.summon_radius * rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let p = [rho * theta.cos(), rho * theta.sin()];
            if p[0].abs() + radius > half || p[1].abs() + radius > half {
                violations[0] += 1;
                continue;
            }
            if placed
                .iter()
                .any(|o| dist(o.position, p) < physics.min_summon_distance)
            {
                violations[1] += 1;
                continue;
            }
            if placed.iter().any(|o| dist(o.position, p) < o.radius + radius) {
                violations[2] += 1;
                continue;
            }
            accepted = Some((p, radius));
            break;
        }
        let Some((position, radius)) = accepted else {
            let names = ["inside_arena", "min_summon_distance", "no_overlap"];
            let worst = (0..3).max_by_key(|&i| violations[i]).unwrap_or(0);
            return Err(Error::Generation {
                constraint: format!("{} (slot {slot})", names[worst]),
                attempts: physics.placement_attempts,
            });
        };

        let r = &physics.colliding_position_range;
        let target = [
            r.min[0] + (r.max[0] - r.min[0]) * rng.random::<f64>(),
            r.min[1] + (r.max[1] - r.min[1]) * rng.random::<f64>(),
        ];
        let mut dir = [target[0] - position[0], target[1] - position[1]];
        let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        if norm < 1e-12 {
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            dir = [a.cos(), a.sin()];
        } else {
            dir = [dir[0] / norm, dir[1] / norm];
        }
        let speed = physics.max_initial_speed * (1.0 - 0.7 * rng.random::<f64>());
        let color = PALETTE[rng.random_range(0..PALETTE.len())];
        placed.push(ObjectState {
            position,
            velocity: [dir[0] * speed, dir[1] * speed],
            radius,
            color,
            class_id,
            slot_id: slot,
        });
    }
    Ok(placed)
}

/// Advances the world by one step. See [`step_physics_with_contacts`].
pub fn step_physics(states: &[ObjectState], physics: &PhysicsParams) -> Vec<ObjectState> {
    step_physics_with_contacts(states, physics).0
}

/// One simulation step: free motion, wall reflection, pairwise equal-mass
/// impulses scaled by restitution, then ground friction.
///
/// Overlapping pairs are first projected apart along their center line so
/// fast objects cannot stay interpenetrated.
pub fn step_physics_with_contacts(
    states: &[ObjectState],
    physics: &PhysicsParams,
) -> (Vec<ObjectState>, Vec<Contact>) {
    let mut next = states.to_vec();
    let half = physics.arena_half_extent;

    for o in next.iter_mut() {
        o.position[0] += o.velocity[0];
        o.position[1] += o.velocity[1];
        let e = physics.restitution_of(o.class_id);
        for axis in 0..2 {
            let lo = -half + o.radius;
            let hi = half - o.radius;
            if o.position[axis] < lo {
                o.position[axis] = lo;
                if o.velocity[axis] < 0.0 {
                    o.velocity[axis] = -o.velocity[axis] * e;
                }
            } else if o.position[axis] > hi {
                o.position[axis] = hi;
                if o.velocity[axis] > 0.0 {
                    o.velocity[axis] = -o.velocity[axis] * e;
                }
            }
        }
    }

    let mut contacts = Vec::new();
    for i in 0..next.len() {
        for j in (i + 1)..next.len() {
            let (left, right) = next.split_at_mut(j);
            let (a, b) = (&mut left[i], &mut right[0]);
            let d = dist(a.position, b.position);
            let reach = a.radius + b.radius;
            if d >= reach {
                continue;
            }
            contacts.push(Contact {
                slot_a: a.slot_id.min(b.slot_id),
                slot_b: a.slot_id.max(b.slot_id),
            });
            let n = if d > 1e-12 {
                [(b.position[0] - a.position[0]) / d, (b.position[1] - a.position[1]) / d]
            } else {
                [1.0, 0.0]
            };
            let push = 0.5 * (reach - d);
            for axis in 0..2 {
                a.position[axis] -= n[axis] * push;
                b.position[axis] += n[axis] * push;
            }
            let ua = a.velocity[0] * n[0] + a.velocity[1] * n[1];
            let ub = b.velocity[0] * n[0] + b.velocity[1] * n[1];
            if ua - ub > 0.0 {
                let e = 0.5
                    * (physics.restitution_of(a.class_id) + physics.restitution_of(b.class_id));
                let ua_new = 0.5 * ((1.0 - e) * ua + (1.0 + e) * ub);
                let ub_new = 0.5 * ((1.0 - e) * ub + (1.0 + e) * ua);
                for axis in 0..2 {
                    a.velocity[axis] = (a.velocity[axis] - ua * n[axis]) + ua_new * n[axis];
                    b.velocity[axis] = (b.velocity[axis] - ub * n[axis]) + ub_new * n[axis];
                }
            }
        }
    }

    let decay = (1.0 - physics.ground_friction * physics.dt).max(0.0);
    if decay != 1.0 {
        for o in next.iter_mut() {
            o.velocity[0] *= decay;
            o.velocity[1] *= decay;
        }
    }
    (next, contacts)
}
