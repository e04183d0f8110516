use super::physics::ObjectState;
use super::schema::SceneSchema;
use crate::error::{Error, Result};
use crate::kv::KvMap;

/// Background color shared by every preset.
pub const BACKGROUND_RGB: [u8; 3] = [46, 46, 58];

/// An RGB frame quantized to 8 bits per channel, row-major HWC.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width * 3],
        }
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        let mut f = Self::zeros(height, width);
        for px in f.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        f
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Values in `[0, 1]`, HWC order.
    pub fn to_unit(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32 / 255.0).collect()
    }

    /// Quantizes HWC values in `[0, 1]` (clamped) to 8 bits.
    pub fn from_unit(height: usize, width: usize, values: &[f32]) -> Result<Self> {
        if values.len() != height * width * 3 {
            return Err(Error::Shape(format!(
                "expected {} values for a {height}x{width} frame, got {}",
                height * width * 3,
                values.len()
            )));
        }
        let data = values
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        Ok(Self { height, width, data })
    }
}

/// Per-pixel slot ids, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PanopticMask {
    pub height: usize,
    pub width: usize,
    pub ids: Vec<u8>,
}

impl PanopticMask {
    pub fn filled(height: usize, width: usize, slot: u8) -> Self {
        Self {
            height,
            width,
            ids: vec![slot; height * width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.ids[row * self.width + col]
    }

    pub fn count(&self, slot: u8) -> usize {
        self.ids.iter().filter(|&&s| s == slot).count()
    }

    /// Pixel-space centroid `(x, y)` of a slot, if it covers any pixel.
    pub fn centroid(&self, slot: u8) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for (i, &s) in self.ids.iter().enumerate() {
            if s == slot {
                sx += (i % self.width) as f64 + 0.5;
                sy += (i / self.width) as f64 + 0.5;
                n += 1;
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipSpec {
    /// T + M.
    pub n_frames: usize,
    pub height: usize,
    pub width: usize,
    /// Pixels per world unit.
    pub world_to_pixel: f64,
}

impl ClipSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.height != self.width || !self.height.is_power_of_two() || self.height < 32 {
            errs.push(format!(
                "clip_spec: height = width must be a power of two >= 32, got {}x{}",
                self.height, self.width
            ));
        }
        if self.n_frames < 10 {
            errs.push(format!("clip_spec.n_frames must be >= 10, got {}", self.n_frames));
        }
        if self.n_frames > u16::MAX as usize {
            errs.push("clip_spec.n_frames exceeds the container limit".into());
        }
        if !(self.world_to_pixel > 0.0) {
            errs.push("clip_spec.world_to_pixel must be > 0".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// World point to fractional pixel coordinates `(x = column, y = row)`.
    /// The world origin maps to the canvas center, world +y points up.
    pub fn world_to_pixel_coords(&self, p: [f64; 2]) -> (f64, f64) {
        (
            self.width as f64 / 2.0 + p[0] * self.world_to_pixel,
            self.height as f64 / 2.0 - p[1] * self.world_to_pixel,
        )
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("n_frames", self.n_frames);
        kv.insert("height", self.height);
        kv.insert("width", self.width);
        kv.insert("world_to_pixel", self.world_to_pixel);
        kv
    }

    pub fn from_kv(kv: &KvMap) -> std::result::Result<Self, String> {
        Ok(Self {
            n_frames: kv.parse_value("n_frames")?,
            height: kv.parse_value("height")?,
            width: kv.parse_value("width")?,
            world_to_pixel: kv.parse_value("world_to_pixel")?,
        })
    }
}

/// Rasterizes the scene. Objects are painted in ascending slot order, so a
/// higher slot occludes a lower one; every pixel not claimed by an object
/// belongs to the background slot 0.
pub fn render_frame(
    states: &[ObjectState],
    clip: &ClipSpec,
    schema: &SceneSchema,
) -> (Frame, PanopticMask) {
    let (h, w) = (clip.height, clip.width);
    let mut frame = Frame::filled(h, w, BACKGROUND_RGB);
    let mut mask = PanopticMask::filled(h, w, 0);
    let n_slots = schema.n_slots();

    let mut order: Vec<&ObjectState> = states.iter().filter(|o| o.slot_id < n_slots).collect();
    order.sort_by_key(|o| o.slot_id);

    for o in order {
        let (cx, cy) = clip.world_to_pixel_coords(o.position);
        let r = o.radius * clip.world_to_pixel;
        let r2 = r * r;
        let row_lo = ((cy - r).floor().max(0.0)) as usize;
        let row_hi = ((cy + r).ceil().min(h as f64)) as usize;
        let col_lo = ((cx - r).floor().max(0.0)) as usize;
        let col_hi = ((cx + r).ceil().min(w as f64)) as usize;
        for row in row_lo..row_hi {
            let dy = row as f64 + 0.5 - cy;
            for col in col_lo..col_hi {
                let dx = col as f64 + 0.5 - cx;
                let d2 = dx * dx + dy * dy;
                if d2 > r2 {
                    continue;
                }
                let shade = 1.0 - 0.35 * d2 / r2;
                let rgb = o.color.map(|c| (c as f64 * shade).round() as u8);
                frame.set_pixel(row, col, rgb);
                mask.ids[row * w + col] = o.slot_id as u8;
            }
        }
    }
    (frame, mask)
}
