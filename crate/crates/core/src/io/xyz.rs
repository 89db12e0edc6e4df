//! Plain-text XYZ point clouds: one `x y z` triple per line, `#` comments.

use std::fmt::Write as _;
use std::path::Path;

use glam::DVec3;

use crate::error::{Error, Result};

pub fn parse_xyz(text: &str, path: &Path) -> Result<Vec<DVec3>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 coordinates, found {}", fields.len())));
        }
        let mut p = [0.0f64; 3];
        for (slot, f) in p.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| err(format!("not a number: `{f}`")))?;
            if !slot.is_finite() {
                return Err(err(format!("non-finite coordinate `{f}`")));
            }
        }
        out.push(DVec3::from_array(p));
    }
    Ok(out)
}

pub fn load_pointcloud(path: &Path) -> Result<Vec<DVec3>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyz(&text, path)
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn format_xyz(points: &[DVec3]) -> String {
    let mut s = String::with_capacity(points.len() * 72);
    for p in points {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
    }
    s
}

pub fn save_pointcloud(path: &Path, points: &[DVec3]) -> Result<()> {
    std::fs::write(path, format_xyz(points)).map_err(|e| Error::io(path, e))
}
