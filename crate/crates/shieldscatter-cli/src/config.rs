//! Scene configuration: defaults, config file, command-line flags, layered
//! in that order.
//!
//! The scene file is plain `key = value` text; `#` starts a comment. Valid
//! keys: `carrier_frequency`, `sample_rate`, `tag_count`, `tag_radius`,
//! `tag_position` (repeatable, `x,y`), `ap_position`, `user_position`,
//! `attacker_position`, `tag_bitrate`, `snr_db`, `dynamic_fading_std`,
//! `direct_path_attenuation`.

use std::path::Path;

use shieldscatter::channel::default_tag_ring;
use shieldscatter::{Error, Result, SceneConfig};

/// Scene-level command-line overrides shared by the subcommands.
#[derive(Debug, Clone, Copy, Default)]
pub struct SceneFlags {
    pub snr_db: Option<f64>,
    pub tag_count: Option<usize>,
    pub fading_std: Option<f64>,
}

fn parse_pair(value: &str, key: &str) -> Result<[f64; 2]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::InvalidConfig(format!(
            "{key} expects `x,y`, got {value:?}"
        )));
    }
    let x = parts[0]
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: bad number {:?}", parts[0])))?;
    let y = parts[1]
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: bad number {:?}", parts[1])))?;
    Ok([x, y])
}

fn parse_num(value: &str, key: &str) -> Result<f64> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: bad number {value:?}")))
}

/// Apply a scene file on top of `scene`.
pub fn apply_scene_file(scene: &mut SceneConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let mut explicit_positions: Vec<[f64; 2]> = Vec::new();
    let mut tag_radius: Option<f64> = None;
    let mut tag_count_set = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{}:{}: expected `key = value`, got {raw:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "carrier_frequency" => scene.carrier_frequency = parse_num(value, key)?,
            "sample_rate" => scene.sample_rate = parse_num(value, key)?,
            "tag_count" => {
                scene.tag_count = parse_num(value, key)? as usize;
                tag_count_set = true;
            }
            "tag_radius" => tag_radius = Some(parse_num(value, key)?),
            "tag_position" => explicit_positions.push(parse_pair(value, key)?),
            "ap_position" => scene.ap_position = parse_pair(value, key)?,
            "user_position" => scene.user_position = parse_pair(value, key)?,
            "attacker_position" => scene.attacker_position = parse_pair(value, key)?,
            "tag_bitrate" => scene.tag_bitrate = parse_num(value, key)?,
            "snr_db" => scene.snr_db = parse_num(value, key)?,
            "dynamic_fading_std" => scene.dynamic_fading_std = parse_num(value, key)?,
            "direct_path_attenuation" => scene.direct_path_attenuation = parse_num(value, key)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "{}:{}: unknown key {other:?} (see the scene file schema in the README)",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }

    if !explicit_positions.is_empty() {
        if !tag_count_set {
            scene.tag_count = explicit_positions.len();
        }
        scene.tag_positions = explicit_positions;
    } else if tag_count_set || tag_radius.is_some() {
        let ring = default_tag_ring(scene.tag_count);
        scene.tag_positions = match tag_radius {
            Some(r) => ring
                .iter()
                .map(|p| {
                    let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
                    [p[0] / norm * r, p[1] / norm * r]
                })
                .collect(),
            None => ring,
        };
    }
    Ok(())
}

/// Resolve the scene: defaults, then the optional file, then flags.
pub fn resolve_scene(file: Option<&Path>, flags: SceneFlags) -> Result<SceneConfig> {
    let mut scene = SceneConfig::default();
    if let Some(path) = file {
        apply_scene_file(&mut scene, path)?;
    }
    if let Some(snr) = flags.snr_db {
        scene.snr_db = snr;
    }
    if let Some(std) = flags.fading_std {
        scene.dynamic_fading_std = std;
    }
    if let Some(count) = flags.tag_count {
        if count != scene.tag_count {
            scene.tag_count = count;
            scene.tag_positions = default_tag_ring(count);
        }
    }
    scene.validate()?;
    Ok(scene)
}
