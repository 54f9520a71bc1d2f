use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::FingerId;

const MAGIC: &[u8; 4] = b"MTFT";
const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 12;
pub const RECORD_LEN: usize = 6;
pub const MAX_MINUTIAE: usize = 1024;

/// Untyped minutia. The angle is stored in units of 2π/65536, the template's on-disk
/// resolution, so encoding never loses information.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Minutia {
    pub x: u16,
    pub y: u16,
    pub angle: u16,
}

impl Minutia {
    /// `angle` in radians, in pixel coordinates (x right, y down); any value is wrapped.
    pub fn new(x: u16, y: u16, angle: f64) -> Self {
        Self {
            x,
            y,
            angle: quantize_angle(angle),
        }
    }

    /// Angle in radians within `[0, 2π)`.
    pub fn radians(&self) -> f64 {
        self.angle as f64 * TAU / 65536.0
    }
}

pub fn quantize_angle(a: f64) -> u16 {
    ((a.rem_euclid(TAU) / TAU * 65536.0).round() as u32 % 65536) as u16
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinutiaTemplate {
    pub finger_id: FingerId,
    pub width: u16,
    pub height: u16,
    minutiae: Vec<Minutia>,
}

impl MinutiaTemplate {
    /// Sorts by `(y, x)`; positions must lie inside the image and the count may not
    /// exceed 1024.
    pub fn new(finger_id: FingerId, width: u16, height: u16, mut minutiae: Vec<Minutia>) -> Result<Self> {
        if minutiae.len() > MAX_MINUTIAE {
            return Err(Error::Parse(format!("{} minutiae exceed the limit of {MAX_MINUTIAE}", minutiae.len())));
        }
        if let Some(m) = minutiae.iter().find(|m| m.x >= width || m.y >= height) {
            return Err(Error::Parse(format!("minutia ({}, {}) outside {width}x{height}", m.x, m.y)));
        }
        minutiae.sort_by_key(|m| (m.y, m.x, m.angle));
        Ok(Self {
            finger_id,
            width,
            height,
            minutiae,
        })
    }

    pub fn minutiae(&self) -> &[Minutia] {
        &self.minutiae
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }
}

pub fn encode_template(t: &MinutiaTemplate) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * t.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(t.finger_id.code());
    out.extend_from_slice(&t.width.to_le_bytes());
    out.extend_from_slice(&t.height.to_le_bytes());
    out.extend_from_slice(&(t.len() as u16).to_le_bytes());
    for m in t.minutiae() {
        out.extend_from_slice(&m.x.to_le_bytes());
        out.extend_from_slice(&m.y.to_le_bytes());
        out.extend_from_slice(&m.angle.to_le_bytes());
    }
    out
}

pub fn decode_template(bytes: &[u8]) -> Result<MinutiaTemplate> {
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse(format!("template truncated: {} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Parse("bad template magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Parse(format!("unsupported template version {}", bytes[4])));
    }
    let finger_id = FingerId::new(bytes[5]).map_err(|_| Error::Parse(format!("invalid finger id {}", bytes[5])))?;
    let (width, height, count) = (u16_at(6), u16_at(8), u16_at(10) as usize);
    let expected = HEADER_LEN + RECORD_LEN * count;
    if bytes.len() != expected {
        return Err(Error::Parse(format!("template length {} does not match {count} minutiae ({expected} bytes)", bytes.len())));
    }
    let minutiae = (0..count)
        .map(|k| {
            let o = HEADER_LEN + RECORD_LEN * k;
            Minutia {
                x: u16_at(o),
                y: u16_at(o + 2),
                angle: u16_at(o + 4),
            }
        })
        .collect::<Vec<_>>();
    if minutiae.windows(2).any(|p| (p[0].y, p[0].x, p[0].angle) > (p[1].y, p[1].x, p[1].angle)) {
        return Err(Error::Parse("minutiae not sorted by (y, x)".into()));
    }
    MinutiaTemplate::new(finger_id, width, height, minutiae)
}

pub fn write_template(t: &MinutiaTemplate, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_template(t)).map_err(|e| Error::io(path, e))
}

pub fn read_template(path: impl AsRef<Path>) -> Result<MinutiaTemplate> {
    let path = path.as_ref();
    decode_template(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
