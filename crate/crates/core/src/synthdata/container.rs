//! Binary clip files (`clip_%06d.ocv`).
//!
//! Layout, little-endian: magic `OCVP`, u16 format version, u16 frame count,
//! u16 height, u16 width, u16 slot count, then every frame as row-major RGB
//! u8, then every mask as row-major slot-id u8.

use std::fs;
use std::path::Path;

use super::render::{Frame, PanopticMask};
use crate::error::{Error, Result};

pub const CLIP_MAGIC: &[u8; 4] = b"OCVP";
pub const CLIP_FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 14;

/// A clip of frames with their panoptic masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clip {
    pub frames: Vec<Frame>,
    pub masks: Vec<PanopticMask>,
    pub n_slots: usize,
}

impl Clip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.frames.first().map_or(0, |f| f.height)
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, |f| f.width)
    }

    /// A clip without meaningful masks (e.g. model predictions): every pixel
    /// is assigned to slot 0.
    pub fn from_frames(frames: Vec<Frame>) -> Self {
        let masks = frames
            .iter()
            .map(|f| PanopticMask::filled(f.height, f.width, 0))
            .collect();
        Self {
            frames,
            masks,
            n_slots: 1,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let (h, w) = (self.height(), self.width());
        if self.masks.len() != self.frames.len() {
            return Err(Error::Shape(format!(
                "{} frames but {} masks",
                self.frames.len(),
                self.masks.len()
            )));
        }
        for (f, m) in self.frames.iter().zip(&self.masks) {
            if f.height != h || f.width != w || m.height != h || m.width != w {
                return Err(Error::Shape("frames and masks must share one size".into()));
            }
        }
        let as_u16 = |v: usize, what: &str| {
            u16::try_from(v).map_err(|_| Error::Shape(format!("{what} {v} exceeds u16")))
        };
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * h * w * 4);
        out.extend_from_slice(CLIP_MAGIC);
        out.extend_from_slice(&CLIP_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&as_u16(self.len(), "frame count")?.to_le_bytes());
        out.extend_from_slice(&as_u16(h, "height")?.to_le_bytes());
        out.extend_from_slice(&as_u16(w, "width")?.to_le_bytes());
        out.extend_from_slice(&as_u16(self.n_slots, "slot count")?.to_le_bytes());
        for f in &self.frames {
            out.extend_from_slice(&f.data);
        }
        for m in &self.masks {
            out.extend_from_slice(&m.ids);
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[0..4] != CLIP_MAGIC {
            return Err(Error::format(path, "missing OCVP magic"));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
        let version = u16_at(4) as u16;
        if version != CLIP_FORMAT_VERSION {
            return Err(Error::format(path, format!("unsupported clip version {version}")));
        }
        let (n, h, w, n_slots) = (u16_at(6), u16_at(8), u16_at(10), u16_at(12));
        let expected = HEADER_LEN + n * h * w * 4;
        if bytes.len() != expected {
            return Err(Error::format(
                path,
                format!("expected {expected} bytes, found {}", bytes.len()),
            ));
        }
        let frame_bytes = h * w * 3;
        let mask_bytes = h * w;
        let body = &bytes[HEADER_LEN..];
        let frames = (0..n)
            .map(|t| Frame {
                height: h,
                width: w,
                data: body[t * frame_bytes..(t + 1) * frame_bytes].to_vec(),
            })
            .collect();
        let masks_start = n * frame_bytes;
        let masks: Vec<PanopticMask> = (0..n)
            .map(|t| {
                let s = masks_start + t * mask_bytes;
                PanopticMask {
                    height: h,
                    width: w,
                    ids: body[s..s + mask_bytes].to_vec(),
                }
            })
            .collect();
        if masks.iter().flat_map(|m| &m.ids).any(|&s| s as usize >= n_slots.max(1)) {
            return Err(Error::format(path, "mask slot id out of range"));
        }
        Ok(Self {
            frames,
            masks,
            n_slots,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

pub fn clip_file_name(index: usize) -> String {
    format!("clip_{index:06}.ocv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_clip() -> impl Strategy<Value = Clip> {
        (1usize..4, 1usize..6, 1usize..6, 1usize..5).prop_flat_map(|(n, h, w, slots)| {
            (
                proptest::collection::vec(any::<u8>(), n * h * w * 3),
                proptest::collection::vec(0..slots as u8, n * h * w),
            )
                .prop_map(move |(rgb, ids)| Clip {
                    frames: rgb
                        .chunks(h * w * 3)
                        .map(|c| Frame { height: h, width: w, data: c.to_vec() })
                        .collect(),
                    masks: ids
                        .chunks(h * w)
                        .map(|c| PanopticMask { height: h, width: w, ids: c.to_vec() })
                        .collect(),
                    n_slots: slots,
                })
        })
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(clip in arb_clip()) {
            let bytes = clip.encode().unwrap();
            prop_assert_eq!(Clip::decode(&bytes, Path::new("mem")).unwrap(), clip);
        }
    }

    #[test]
    fn header_layout_is_little_endian() {
        let clip = Clip {
            frames: vec![Frame::zeros(2, 3)],
            masks: vec![PanopticMask::filled(2, 3, 1)],
            n_slots: 2,
        };
        let b = clip.encode().unwrap();
        assert_eq!(&b[..14], &[b'O', b'C', b'V', b'P', 1, 0, 1, 0, 2, 0, 3, 0, 2, 0]);
        assert_eq!(b.len(), 14 + 18 + 6);
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        let clip = Clip {
            frames: vec![Frame::zeros(2, 2)],
            masks: vec![PanopticMask::filled(2, 2, 0)],
            n_slots: 1,
        };
        let b = clip.encode().unwrap();
        assert!(Clip::decode(&b[..b.len() - 1], Path::new("x")).is_err());
        assert!(Clip::decode(b"NOPE0000000000", Path::new("x")).is_err());
    }
}
