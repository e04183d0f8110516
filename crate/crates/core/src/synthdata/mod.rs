//! Seeded multi-object bouncing-scene videos with exact panoptic masks.

mod container;
mod dataset;
mod physics;
mod presets;
mod render;
mod schema;

pub use container::{clip_file_name, Clip, CLIP_FORMAT_VERSION, CLIP_MAGIC};
pub use dataset::{
    clip_seed, generate_dataset, simulate_clip, ClipTracks, ContactEvent, Dataset, DatasetSpec,
    TrackPoint, CONTACTS_FILE, MANIFEST_FILE, TRACKS_FILE,
};
pub use physics::{
    sample_scene, step_physics, step_physics_with_contacts, Aabb, Contact, ObjectState,
    PhysicsParams, Vec2,
};
pub use presets::{preset, DatasetPreset, PresetName};
pub use render::{render_frame, ClipSpec, Frame, PanopticMask, BACKGROUND_RGB};
pub use schema::SceneSchema;
