//! Per-slot masked instances and their additive recomposition.
//!
//! A frame is split into one masked image per schema slot: instance `k`
//! keeps the frame's pixels where the panoptic mask says `k` and is zero
//! elsewhere. Because the mask is a partition, summing the instances gives
//! back the frame exactly.

use crate::error::{Error, Result};
use crate::synthdata::{Clip, Frame, PanopticMask, SceneSchema};

/// One slot's masked pixels at one time step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedInstanceFrame {
    /// HWC, zero wherever `mask` is false.
    pub pixels: Frame,
    pub mask: Vec<bool>,
    pub class_id: usize,
    pub slot_id: usize,
}

impl MaskedInstanceFrame {
    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }
}

/// Per-slot instance sequences of a clip, in schema slot order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecomposedClip {
    /// `slots[k][t]`.
    pub slots: Vec<Vec<MaskedInstanceFrame>>,
}

impl DecomposedClip {
    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn n_frames(&self) -> usize {
        self.slots.first().map_or(0, Vec::len)
    }

    /// All slots at time `t`.
    pub fn at(&self, t: usize) -> Vec<&MaskedInstanceFrame> {
        self.slots.iter().map(|s| &s[t]).collect()
    }
}

/// Produces frame → panoptic mask with persistent slot ids.
///
/// Learned segmenters would implement this; the bundled backend replays the
/// generator's ground truth.
pub trait Segmenter {
    fn segment(&mut self, t: usize, frame: &Frame) -> Result<PanopticMask>;
}

/// Ground-truth masks recorded alongside a generated clip.
pub struct GroundTruthSegmenter<'a> {
    masks: &'a [PanopticMask],
}

impl<'a> GroundTruthSegmenter<'a> {
    pub fn new(masks: &'a [PanopticMask]) -> Self {
        Self { masks }
    }
}

impl Segmenter for GroundTruthSegmenter<'_> {
    fn segment(&mut self, t: usize, frame: &Frame) -> Result<PanopticMask> {
        let m = self
            .masks
            .get(t)
            .ok_or_else(|| Error::Missing(format!("no ground-truth mask for frame {t}")))?;
        if m.height != frame.height || m.width != frame.width {
            return Err(Error::Shape(format!(
                "mask {}x{} vs frame {}x{}",
                m.height, m.width, frame.height, frame.width
            )));
        }
        Ok(m.clone())
    }
}

/// Splits `frame` into exactly `schema.n_slots()` masked instances. Slots
/// with no pixels come back all-zero with an empty mask.
pub fn decompose_frame(
    frame: &Frame,
    mask: &PanopticMask,
    schema: &SceneSchema,
) -> Result<Vec<MaskedInstanceFrame>> {
    if mask.height != frame.height || mask.width != frame.width {
        return Err(Error::Shape(format!(
            "mask {}x{} vs frame {}x{}",
            mask.height, mask.width, frame.height, frame.width
        )));
    }
    let n = schema.n_slots();
    if let Some(&bad) = mask.ids.iter().find(|&&s| s as usize >= n) {
        return Err(Error::SchemaMismatch(format!(
            "mask contains slot id {bad} but the schema has {n} slots"
        )));
    }
    let (h, w) = (frame.height, frame.width);
    let mut out: Vec<MaskedInstanceFrame> = schema
        .slot_classes()
        .into_iter()
        .enumerate()
        .map(|(slot_id, class_id)| MaskedInstanceFrame {
            pixels: Frame::zeros(h, w),
            mask: vec![false; h * w],
            class_id,
            slot_id,
        })
        .collect();
    for (p, &slot) in mask.ids.iter().enumerate() {
        let inst = &mut out[slot as usize];
        inst.mask[p] = true;
        inst.pixels.data[3 * p..3 * p + 3].copy_from_slice(&frame.data[3 * p..3 * p + 3]);
    }
    Ok(out)
}

/// Pixelwise sum of instances. With partition masks this reproduces the
/// source frame bit-exactly; overlapping inputs saturate at 255.
pub fn recompose(instances: &[MaskedInstanceFrame]) -> Result<Frame> {
    let first = instances
        .first()
        .ok_or_else(|| Error::Shape("cannot recompose zero instances".into()))?;
    let (h, w) = (first.pixels.height, first.pixels.width);
    let mut out = Frame::zeros(h, w);
    for inst in instances {
        if inst.pixels.height != h || inst.pixels.width != w {
            return Err(Error::Shape(format!(
                "instance {} is {}x{}, expected {h}x{w}",
                inst.slot_id, inst.pixels.height, inst.pixels.width
            )));
        }
        for (acc, &v) in out.data.iter_mut().zip(&inst.pixels.data) {
            *acc = acc.saturating_add(v);
        }
    }
    Ok(out)
}

/// Options for [`track_slots`].
#[derive(Clone, Copy, Debug, Default)]
pub struct TrackOptions {
    /// Largest centroid displacement (pixels) a slot may make between two
    /// consecutive frames where it is visible. `None` disables the check.
    pub max_centroid_jump: Option<f64>,
}

/// Decomposes every frame of a clip, keeping slot identity fixed over time.
pub fn track_slots(
    frames: &[Frame],
    segmenter: &mut dyn Segmenter,
    schema: &SceneSchema,
    options: TrackOptions,
) -> Result<DecomposedClip> {
    let n = schema.n_slots();
    let mut slots: Vec<Vec<MaskedInstanceFrame>> = vec![Vec::with_capacity(frames.len()); n];
    let mut last_centroid: Vec<Option<(f64, f64)>> = vec![None; n];
    for (t, frame) in frames.iter().enumerate() {
        let mask = segmenter.segment(t, frame)?;
        if let Some(limit) = options.max_centroid_jump {
            for (slot, last) in last_centroid.iter_mut().enumerate().skip(1) {
                let c = mask.centroid(slot as u8);
                if let (Some(a), Some(b)) = (*last, c) {
                    let jump = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                    if jump > limit {
                        return Err(Error::Tracking(format!(
                            "slot {slot} jumped {jump:.1} px between frames {} and {t}",
                            t - 1
                        )));
                    }
                }
                *last = c;
            }
        }
        for inst in decompose_frame(frame, &mask, schema)? {
            slots[inst.slot_id].push(inst);
        }
    }
    Ok(DecomposedClip { slots })
}

/// Convenience wrapper for generated clips with ground-truth masks.
pub fn decompose_clip(clip: &Clip, schema: &SceneSchema) -> Result<DecomposedClip> {
    if clip.masks.len() != clip.frames.len() {
        return Err(Error::Shape(format!(
            "{} frames but {} masks",
            clip.frames.len(),
            clip.masks.len()
        )));
    }
    let mut seg = GroundTruthSegmenter::new(&clip.masks);
    track_slots(&clip.frames, &mut seg, schema, TrackOptions::default())
}
