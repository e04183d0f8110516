//! Dataset presets mirroring the slot structure of the three interacting
//! synthetic datasets: two balls (N=3, m=2), three balls (N=4, m=2), and a
//! two-class scene with two objects per class (N=5, m=3).

use std::fmt;
use std::str::FromStr;

use super::dataset::DatasetSpec;
use super::physics::{Aabb, PhysicsParams};
use super::render::ClipSpec;
use super::schema::SceneSchema;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PresetName {
    Bounce2,
    Bounce3,
    BounceRealIsh,
}

impl PresetName {
    pub const ALL: [PresetName; 3] = [Self::Bounce2, Self::Bounce3, Self::BounceRealIsh];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bounce2 => "bounce2",
            Self::Bounce3 => "bounce3",
            Self::BounceRealIsh => "bounce-real-ish",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected bounce2, bounce3, bounce-real-ish)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetPreset {
    pub name: PresetName,
    pub schema: SceneSchema,
    pub physics: PhysicsParams,
    pub clip_spec: ClipSpec,
}

impl DatasetPreset {
    pub fn spec(&self, n_clips: usize, seed: u64) -> DatasetSpec {
        DatasetSpec {
            name: self.name.to_string(),
            schema: self.schema.clone(),
            physics: self.physics.clone(),
            clip_spec: self.clip_spec.clone(),
            n_clips,
            seed,
        }
    }
}

/// Builds a preset at `resolution` x `resolution` pixels (32 or 64 are the
/// intended sizes; any power of two >= 32 is accepted downstream).
pub fn preset(name: PresetName, resolution: usize) -> DatasetPreset {
    // One world unit of velocity per step corresponds to 4 units per second.
    let dt = 0.25;
    let (schema, physics) = match name {
        PresetName::Bounce2 | PresetName::Bounce3 => {
            let n = if name == PresetName::Bounce2 { 2 } else { 3 };
            let physics = PhysicsParams {
                colliding_position_range: Aabb::square(1.0),
                summon_radius: 5.0,
                min_summon_distance: 2.0,
                max_initial_speed: 5.0 * dt,
                ground_friction: 0.3,
                dt,
                restitution: 1.0,
                class_restitution: vec![1.0, 0.8],
                object_radius_range: (1.2, 1.5),
                arena_half_extent: 4.0,
                placement_attempts: 10_000,
            };
            (SceneSchema::single_class("ball", n), physics)
        }
        PresetName::BounceRealIsh => {
            let schema = SceneSchema::new(
                vec!["background".into(), "bottle".into(), "pot".into()],
                vec![1, 2, 2],
            )
            .expect("valid schema");
            let physics = PhysicsParams {
                colliding_position_range: Aabb::square(1.0),
                summon_radius: 8.0,
                min_summon_distance: 4.0,
                max_initial_speed: 7.0 * dt,
                ground_friction: 0.3,
                dt,
                restitution: 1.0,
                class_restitution: vec![1.0, 1.0, 1.0],
                object_radius_range: (1.4, 1.9),
                arena_half_extent: 8.0,
                placement_attempts: 10_000,
            };
            (schema, physics)
        }
    };
    let clip_spec = ClipSpec {
        n_frames: 10,
        height: resolution,
        width: resolution,
        world_to_pixel: resolution as f64 / (2.0 * physics.arena_half_extent),
    };
    DatasetPreset {
        name,
        schema,
        physics,
        clip_spec,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_structure_matches_reference_datasets() {
        let expect = [(PresetName::Bounce2, 3, 2), (PresetName::Bounce3, 4, 2), (PresetName::BounceRealIsh, 5, 3)];
        for (name, n, m) in expect {
            let p = preset(name, 32);
            assert_eq!(p.schema.n_slots(), n, "{name}");
            assert_eq!(p.schema.n_classes(), m, "{name}");
            assert!(p.physics.validate().is_ok());
            assert!(p.clip_spec.validate().is_ok());
        }
    }

    #[test]
    fn names_parse() {
        for p in PresetName::ALL {
            assert_eq!(p.as_str().parse::<PresetName>().unwrap(), p);
        }
        assert!("clevr".parse::<PresetName>().is_err());
    }
}
