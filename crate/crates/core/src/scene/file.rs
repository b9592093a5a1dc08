//! Scene files: one `key = value` per line, `#` comments, repeated `wall` lines.
//!
//! ```text
//! width = 8
//! depth = 8
//! height = 3
//! resolution = 0.5
//! absorption = 0.4 0.4 0.5 0.5 0.3 0.6
//! max order = 8
//! seed = 11
//! wall = 4.25 0 4.25 5
//! ```

use super::{SceneSpec, Wall};
use crate::error::{Error, Result};

fn floats(value: &str, key: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Format(format!("`{key}`: cannot parse `{t}` as a number")))
        })
        .collect()
}

pub fn parse_scene_spec(text: &str) -> Result<SceneSpec> {
    let mut spec = SceneSpec::open(0.0, 0.0, 0.0, 0.0);
    let mut seen = std::collections::HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let one = |k: &str| -> Result<f64> {
            let v = floats(value, k)?;
            match v.as_slice() {
                [x] => Ok(*x),
                _ => Err(Error::Format(format!("`{k}` expects one number"))),
            }
        };
        match key {
            "width" => spec.width = one(key)?,
            "depth" => spec.depth = one(key)?,
            "height" => spec.height = one(key)?,
            "resolution" => spec.resolution = one(key)?,
            "max order" => spec.max_order = one(key)? as u32,
            "seed" => {
                spec.seed = value
                    .parse()
                    .map_err(|_| Error::Format(format!("bad seed `{value}`")))?
            }
            "absorption" => {
                let v = floats(value, key)?;
                spec.absorption = match v.len() {
                    1 => [v[0]; 6],
                    6 => [v[0], v[1], v[2], v[3], v[4], v[5]],
                    n => return Err(Error::Format(format!("absorption expects 1 or 6 values, got {n}"))),
                };
            }
            "wall" => {
                let v = floats(value, key)?;
                if v.len() != 4 {
                    return Err(Error::Format("wall expects x0 y0 x1 y1".into()));
                }
                spec.walls.push(Wall { a: [v[0], v[1]], b: [v[2], v[3]] });
            }
            other => return Err(Error::Format(format!("unknown scene key `{other}`"))),
        }
        if key != "wall" && !seen.insert(key.to_string()) {
            return Err(Error::Format(format!("duplicate scene key `{key}`")));
        }
    }
    for required in ["width", "depth", "height", "resolution"] {
        if !seen.contains(required) {
            return Err(Error::Format(format!("scene file lacks `{required}`")));
        }
    }
    Ok(spec)
}

pub fn write_scene_spec(spec: &SceneSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("width = {}\n", spec.width));
    out.push_str(&format!("depth = {}\n", spec.depth));
    out.push_str(&format!("height = {}\n", spec.height));
    out.push_str(&format!("resolution = {}\n", spec.resolution));
    let abs: Vec<String> = spec.absorption.iter().map(|a| a.to_string()).collect();
    out.push_str(&format!("absorption = {}\n", abs.join(" ")));
    out.push_str(&format!("max order = {}\n", spec.max_order));
    out.push_str(&format!("seed = {}\n", spec.seed));
    for w in &spec.walls {
        out.push_str(&format!("wall = {} {} {} {}\n", w.a[0], w.a[1], w.b[0], w.b[1]));
    }
    out
}
