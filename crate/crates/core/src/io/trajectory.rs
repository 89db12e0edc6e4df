//! Trajectory CSV (`t,agent,x,y,z,vx,vy,vz`) plus a `key = value` sidecar.
//!
//! Rows are frame-major. The velocity on a row is the one applied when
//! leaving that frame; the final frame has none and stores zeros. Preferred
//! velocities are not stored, and reading a file sets them equal to the
//! applied ones.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use glam::DVec3;

use super::config::read_entries;
use crate::error::{Error, Result};
use crate::sampling::{TrajectoryLog, TrajectoryMeta};

pub const HEADER: &str = "t,agent,x,y,z,vx,vy,vz";

/// Sidecar path next to a trajectory CSV.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

pub fn format_csv(log: &TrajectoryLog) -> String {
    let mut s = String::with_capacity(log.positions.len() * log.agents() * 96);
    s.push_str(HEADER);
    s.push('\n');
    for (k, frame) in log.positions.iter().enumerate() {
        let vel = log.applied_velocities.get(k);
        for (i, p) in frame.iter().enumerate() {
            let v = vel.map_or(DVec3::ZERO, |v| v[i]);
            let _ = writeln!(s, "{},{i},{},{},{},{},{},{}", log.times[k], p.x, p.y, p.z, v.x, v.y, v.z);
        }
    }
    s
}

pub fn format_meta(log: &TrajectoryLog) -> String {
    format!(
        "algorithm = {}\nseed = {}\nsteps = {}\nagents = {}\ndt = {}\nkappa = {}\nlength_scale = {}\n",
        log.meta.algorithm,
        log.meta.seed,
        log.steps(),
        log.agents(),
        log.dt,
        log.meta.kappa,
        log.meta.length_scale
    )
}

/// Write the CSV and its sidecar.
pub fn write_trajectory(path: &Path, log: &TrajectoryLog) -> Result<()> {
    std::fs::write(path, format_csv(log)).map_err(|e| Error::io(path, e))?;
    let meta = meta_path(path);
    std::fs::write(&meta, format_meta(log)).map_err(|e| Error::io(&meta, e))
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryLog> {
    let mpath = meta_path(path);
    let mut meta = TrajectoryMeta {
        algorithm: String::new(),
        seed: 0,
        kappa: 0.0,
        length_scale: 1.0,
    };
    let (mut steps, mut agents, mut dt) = (None, None, None);
    for e in read_entries(&mpath)? {
        let bad = || Error::Parse {
            path: mpath.clone(),
            line: e.line,
            msg: format!("bad value `{}` for `{}`", e.value, e.key),
        };
        match e.key.as_str() {
            "algorithm" => meta.algorithm = e.value.clone(),
            "seed" => meta.seed = e.value.parse().map_err(|_| bad())?,
            "steps" => steps = Some(e.value.parse::<usize>().map_err(|_| bad())?),
            "agents" => agents = Some(e.value.parse::<usize>().map_err(|_| bad())?),
            "dt" => dt = Some(e.value.parse::<f64>().map_err(|_| bad())?),
            "kappa" => meta.kappa = e.value.parse().map_err(|_| bad())?,
            "length_scale" => meta.length_scale = e.value.parse().map_err(|_| bad())?,
            _ => {}
        }
    }
    let missing = |k: &str| Error::Parse {
        path: mpath.clone(),
        line: 0,
        msg: format!("missing key `{k}`"),
    };
    let steps = steps.ok_or_else(|| missing("steps"))?;
    let agents = agents.ok_or_else(|| missing("agents"))?;
    let dt = dt.ok_or_else(|| missing("dt"))?;

    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected header `{HEADER}`"),
            })
        }
    }
    let frames = steps + 1;
    let mut times = vec![0.0; frames];
    let mut positions = vec![vec![DVec3::ZERO; agents]; frames];
    let mut velocities = vec![vec![DVec3::ZERO; agents]; steps];
    let mut rows = 0;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", f.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err(format!("not a number: `{s}`")));
        let (k, i) = (rows / agents.max(1), rows % agents.max(1));
        if k >= frames {
            return Err(err("more rows than steps and agents allow".into()));
        }
        if f[1].trim().parse::<usize>().ok() != Some(i) {
            return Err(err(format!("expected agent {i}, found `{}`", f[1])));
        }
        times[k] = num(f[0])?;
        positions[k][i] = DVec3::new(num(f[2])?, num(f[3])?, num(f[4])?);
        if k < steps {
            velocities[k][i] = DVec3::new(num(f[5])?, num(f[6])?, num(f[7])?);
        }
        rows += 1;
    }
    if rows != frames * agents {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("expected {} rows, found {rows}", frames * agents),
        });
    }
    Ok(TrajectoryLog {
        times,
        dt,
        positions,
        preferred_velocities: velocities.clone(),
        applied_velocities: velocities,
        meta,
    })
}
