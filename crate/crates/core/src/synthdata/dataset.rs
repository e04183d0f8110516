use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::container::{clip_file_name, Clip};
use super::physics::{sample_scene, step_physics_with_contacts, PhysicsParams};
use super::render::{render_frame, ClipSpec};
use super::schema::SceneSchema;
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::kv::KvMap;

pub const MANIFEST_FILE: &str = "manifest";
pub const TRACKS_FILE: &str = "tracks.csv";
pub const CONTACTS_FILE: &str = "contacts.csv";
pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Everything that determines a generated dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub name: String,
    pub schema: SceneSchema,
    pub physics: PhysicsParams,
    pub clip_spec: ClipSpec,
    pub n_clips: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for r in [self.physics.validate(), self.clip_spec.validate()] {
            if let Err(Error::Config(v)) = r {
                errs.extend(v);
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Canonical description without the hash itself.
    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("format_version", DATASET_FORMAT_VERSION);
        kv.insert("name", &self.name);
        kv.insert("n_clips", self.n_clips);
        kv.insert("seed", self.seed);
        kv.extend(&self.schema.to_kv().with_prefix("schema."));
        kv.extend(&self.physics.to_kv().with_prefix("physics."));
        kv.extend(&self.clip_spec.to_kv().with_prefix("clip_spec."));
        kv
    }

    pub fn config_hash(&self) -> String {
        self.to_kv().hash()
    }

    pub fn from_kv(kv: &KvMap) -> std::result::Result<Self, String> {
        Ok(Self {
            name: kv.parse_value("name")?,
            schema: SceneSchema::from_kv(&kv.section("schema."))?,
            physics: PhysicsParams::from_kv(&kv.section("physics."))?,
            clip_spec: ClipSpec::from_kv(&kv.section("clip_spec."))?,
            n_clips: kv.parse_value("n_clips")?,
            seed: kv.parse_value("seed")?,
        })
    }
}

/// Independent per-clip stream seed derived from the dataset seed and the
/// clip index (splitmix64 finalizer over both).
pub fn clip_seed(seed: u64, clip_index: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(clip_index as u64 ^ 0xC11F_0000_0000_0000))
}

/// Object center of one slot at one frame, in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPoint {
    pub frame: usize,
    pub slot: usize,
    pub class_id: usize,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContactEvent {
    /// Index of the frame produced by the step in which the contact happened.
    pub frame: usize,
    pub slot_a: usize,
    pub slot_b: usize,
}

/// Ground-truth side information for one clip.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClipTracks {
    pub points: Vec<TrackPoint>,
    pub contacts: Vec<ContactEvent>,
}

/// Simulates and renders one clip.
pub fn simulate_clip(spec: &DatasetSpec, clip_index: usize) -> Result<(Clip, ClipTracks)> {
    let mut states = sample_scene(&spec.schema, &spec.physics, clip_seed(spec.seed, clip_index))?;
    let cs = &spec.clip_spec;
    let mut frames = Vec::with_capacity(cs.n_frames);
    let mut masks = Vec::with_capacity(cs.n_frames);
    let mut tracks = ClipTracks::default();
    for t in 0..cs.n_frames {
        if t > 0 {
            let (next, contacts) = step_physics_with_contacts(&states, &spec.physics);
            states = next;
            tracks.contacts.extend(contacts.into_iter().map(|c| ContactEvent {
                frame: t,
                slot_a: c.slot_a,
                slot_b: c.slot_b,
            }));
        }
        let (frame, mask) = render_frame(&states, cs, &spec.schema);
        frames.push(frame);
        masks.push(mask);
        for o in &states {
            let (x, y) = cs.world_to_pixel_coords(o.position);
            tracks.points.push(TrackPoint {
                frame: t,
                slot: o.slot_id,
                class_id: o.class_id,
                x,
                y,
                radius: o.radius * cs.world_to_pixel,
            });
        }
    }
    let clip = Clip {
        frames,
        masks,
        n_slots: spec.schema.n_slots(),
    };
    Ok((clip, tracks))
}

/// Writes a dataset directory: `manifest`, one `clip_%06d.ocv` per clip and
/// the `tracks.csv` / `contacts.csv` sidecars. Output bytes depend only on
/// `spec`, never on `exec`.
pub fn generate_dataset(spec: &DatasetSpec, out: &Path, exec: Execution) -> Result<Dataset> {
    spec.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let tracks = try_map_indexed(spec.n_clips, exec, |i| {
        let (clip, tracks) = simulate_clip(spec, i)?;
        clip.write(&out.join(clip_file_name(i)))?;
        Ok::<_, Error>(tracks)
    })?;

    let mut tracks_csv = String::from("clip,frame,slot,class,x,y,radius\n");
    let mut contacts_csv = String::from("clip,frame,slot_a,slot_b\n");
    for (i, t) in tracks.iter().enumerate() {
        for p in &t.points {
            let _ = writeln!(
                tracks_csv,
                "{i},{},{},{},{:.6},{:.6},{:.6}",
                p.frame, p.slot, p.class_id, p.x, p.y, p.radius
            );
        }
        for c in &t.contacts {
            let _ = writeln!(contacts_csv, "{i},{},{},{}", c.frame, c.slot_a, c.slot_b);
        }
    }
    write_text(&out.join(TRACKS_FILE), &tracks_csv)?;
    write_text(&out.join(CONTACTS_FILE), &contacts_csv)?;

    let mut manifest = spec.to_kv();
    manifest.insert("config_hash", spec.config_hash());
    write_text(&out.join(MANIFEST_FILE), &manifest.canonical())?;
    Dataset::open(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A generated dataset on disk.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub spec: DatasetSpec,
    pub config_hash: String,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let kv = KvMap::parse(&text).map_err(|m| Error::format(&path, m))?;
        let version: u32 = kv.parse_value("format_version").map_err(|m| Error::format(&path, m))?;
        if version != DATASET_FORMAT_VERSION {
            return Err(Error::format(&path, format!("unsupported format_version {version}")));
        }
        let spec = DatasetSpec::from_kv(&kv).map_err(|m| Error::format(&path, m))?;
        let config_hash = kv
            .get("config_hash")
            .ok_or_else(|| Error::format(&path, "missing config_hash"))?
            .to_string();
        if config_hash != spec.config_hash() {
            return Err(Error::format(&path, "config_hash does not match manifest contents"));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            spec,
            config_hash,
        })
    }

    pub fn n_clips(&self) -> usize {
        self.spec.n_clips
    }

    pub fn schema(&self) -> &SceneSchema {
        &self.spec.schema
    }

    pub fn clip_path(&self, index: usize) -> PathBuf {
        self.dir.join(clip_file_name(index))
    }

    pub fn load_clip(&self, index: usize) -> Result<Clip> {
        if index >= self.n_clips() {
            return Err(Error::Missing(format!(
                "clip {index} requested from a dataset of {} clips",
                self.n_clips()
            )));
        }
        let clip = Clip::read(&self.clip_path(index))?;
        if clip.n_slots != self.schema().n_slots() {
            return Err(Error::SchemaMismatch(format!(
                "clip {index} has {} slots, manifest schema has {}",
                clip.n_slots,
                self.schema().n_slots()
            )));
        }
        Ok(clip)
    }

    /// Per-clip ground-truth tracks and contacts from the sidecar files.
    pub fn tracks(&self) -> Result<Vec<ClipTracks>> {
        let mut out = vec![ClipTracks::default(); self.n_clips()];
        let path = self.dir.join(TRACKS_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|_| Error::Missing(format!("centroid sidecar {}", path.display())))?;
        for (n, line) in text.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::format(&path, format!("line {}", n + 1));
            if f.len() != 7 {
                return Err(bad());
            }
            let clip: usize = f[0].parse().map_err(|_| bad())?;
            let p = TrackPoint {
                frame: f[1].parse().map_err(|_| bad())?,
                slot: f[2].parse().map_err(|_| bad())?,
                class_id: f[3].parse().map_err(|_| bad())?,
                x: f[4].parse().map_err(|_| bad())?,
                y: f[5].parse().map_err(|_| bad())?,
                radius: f[6].parse().map_err(|_| bad())?,
            };
            out.get_mut(clip).ok_or_else(bad)?.points.push(p);
        }
        let path = self.dir.join(CONTACTS_FILE);
        if let Ok(text) = fs::read_to_string(&path) {
            for (n, line) in text.lines().enumerate().skip(1) {
                let f: Vec<usize> = line
                    .split(',')
                    .map(|s| s.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::format(&path, format!("line {}", n + 1)))?;
                if f.len() != 4 || f[0] >= out.len() {
                    return Err(Error::format(&path, format!("line {}", n + 1)));
                }
                out[f[0]].contacts.push(ContactEvent {
                    frame: f[1],
                    slot_a: f[2],
                    slot_b: f[3],
                });
            }
        }
        Ok(out)
    }
}
