//! ASCII PGM (P2) export of depth images in millimetres. Background pixels
//! are written as 0. Link ids are not stored.

use std::fmt::Write as _;
use std::path::Path;

use articflow_core::camera::DepthImage;

use crate::error::{read_to_string, write_bytes, Error, Result};

/// Largest encodable depth, 65.535 m.
pub const MAX_DEPTH_MM: u32 = 65_535;

pub fn depth_to_pgm(depth: &DepthImage) -> Result<String> {
    let mut mm = Vec::with_capacity(depth.depths().len());
    for &d in depth.depths() {
        if d.is_infinite() {
            mm.push(0u32);
            continue;
        }
        let v = (d * 1000.0).round();
        if !(v >= 1.0 && v <= MAX_DEPTH_MM as f64) {
            return Err(Error::Format(format!("depth {d} m cannot be encoded in 16-bit millimetres")));
        }
        mm.push(v as u32);
    }
    let maxval = mm.iter().copied().max().unwrap_or(0).max(1);
    let mut out = format!("P2\n# depth in millimetres, 0 = background\n{} {}\n{maxval}\n", depth.width, depth.height);
    for row in mm.chunks(depth.width.max(1) as usize) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a P2 image back into depths in metres; 0 becomes background.
pub fn depth_from_pgm(text: &str) -> Result<DepthImage> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::Format("not an ASCII PGM (expected P2)".to_string()));
    }
    let mut num = |what: &str| -> Result<u32> {
        let t = tokens.next().ok_or_else(|| Error::Format(format!("PGM truncated before {what}")))?;
        t.parse().map_err(|_| Error::Format(format!("invalid PGM {what} `{t}`")))
    };
    let (w, h, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if maxval == 0 || maxval > MAX_DEPTH_MM {
        return Err(Error::Format(format!("invalid PGM maxval {maxval}")));
    }
    let mut img = DepthImage::background(w, h);
    for v in 0..h {
        for u in 0..w {
            let mm = num("pixel")?;
            if mm > maxval {
                return Err(Error::Format(format!("pixel value {mm} exceeds maxval {maxval}")));
            }
            if mm > 0 {
                img.set(u, v, mm as f64 / 1000.0, None);
            }
        }
    }
    if tokens.next().is_some() {
        return Err(Error::Format("trailing data after PGM pixels".to_string()));
    }
    Ok(img)
}

pub fn write_pgm(path: &Path, depth: &DepthImage) -> Result<()> {
    write_bytes(path, depth_to_pgm(depth)?.as_bytes())
}

pub fn read_pgm(path: &Path) -> Result<DepthImage> {
    depth_from_pgm(&read_to_string(path)?)
}
