//! Flat `section.key = value` configuration files.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{GlobalParams, DEFAULT_GTS_COUNTS};
use crate::construction::ConstructionConfig;
use crate::database::{DatabaseConfig, PartitionGrid};
use crate::geometry::ObjectClass;
use crate::hpr::{EHprParams, SHprParams};
use crate::placement::PlacementConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    None,
    Cda,
    Drcpo,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::None => "none",
            Mode::Cda => "cda",
            Mode::Drcpo => "drcpo",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Mode::None),
            "cda" => Ok(Mode::Cda),
            "drcpo" => Ok(Mode::Drcpo),
            _ => Err(format!("unknown mode `{s}` (expected none, cda or drcpo)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub seed: u64,
    pub database: DatabaseConfig,
    pub construction: ConstructionConfig,
    pub placement: PlacementConfig,
    pub s_hpr: SHprParams,
    pub e_hpr: EHprParams,
    /// Applies the global flip/scale/rotation after the DR.CPO stages.
    pub drcpo_global: bool,
    pub global: GlobalParams,
    pub gts_counts: [usize; 3],
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Drcpo,
            seed: 0,
            database: DatabaseConfig::default(),
            construction: ConstructionConfig::default(),
            placement: PlacementConfig::default(),
            s_hpr: SHprParams::default(),
            e_hpr: EHprParams::default(),
            drcpo_global: false,
            global: GlobalParams::default(),
            gts_counts: DEFAULT_GTS_COUNTS,
        }
    }
}

/// Keys with their descriptions, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("mode", "none | cda | drcpo"),
    ("seed", "master seed; frame seeds are derived from it and the frame id"),
    ("database.k", "completion candidates kept per object"),
    ("database.grid.car", "partition grid NXxNYxNZ"),
    ("database.grid.pedestrian", "partition grid NXxNYxNZ"),
    ("database.grid.cyclist", "partition grid NXxNYxNZ"),
    ("construction.threshold", "share of cells at or above the mean density for a whole body"),
    ("construction.max_iterations", "complementing passes at most"),
    ("construction.dedup_epsilon", "voxel size in meters for removing duplicate points (0 disables)"),
    ("placement.x_range", "lo,hi in meters"),
    ("placement.y_range", "lo,hi in meters"),
    ("placement.rotation_range", "lo,hi in radians"),
    ("placement.count.car", "objects added per frame"),
    ("placement.count.pedestrian", "objects added per frame"),
    ("placement.count.cyclist", "objects added per frame"),
    ("placement.max_attempts", "poses tried per object before it is dropped"),
    ("s_hpr.multiplier.car", "flip radius as a multiple of the box diagonal"),
    ("s_hpr.multiplier.pedestrian", "flip radius as a multiple of the box diagonal"),
    ("s_hpr.multiplier.cyclist", "flip radius as a multiple of the box diagonal"),
    ("e_hpr.radius", "flip radius in meters"),
    ("e_hpr.z", "viewpoint height in meters"),
    ("e_hpr.min_points", "labels with fewer surviving points are deleted"),
    ("hpr.jitter", "perturbation in meters for degenerate hulls"),
    ("global.drcpo", "also apply the global transform in drcpo mode (true | false)"),
    ("global.flip_probability", "probability of mirroring y"),
    ("global.scale_range", "lo,hi"),
    ("global.rotation_range", "lo,hi in radians"),
    ("gts.count.car", "objects pasted per frame in cda mode"),
    ("gts.count.pedestrian", "objects pasted per frame in cda mode"),
    ("gts.count.cyclist", "objects pasted per frame in cda mode"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("bad value `{value}` for {key}"))
}

fn parse_range(key: &str, value: &str) -> Result<(f64, f64), String> {
    let (a, b) = value.split_once(',').ok_or_else(|| format!("{key} must be lo,hi"))?;
    Ok((parse(key, a.trim())?, parse(key, b.trim())?))
}

fn class_key(key: &str) -> Option<(&str, ObjectClass)> {
    let (prefix, name) = key.rsplit_once('.')?;
    let class = match name {
        "car" => ObjectClass::Car,
        "pedestrian" => ObjectClass::Pedestrian,
        "cyclist" => ObjectClass::Cyclist,
        _ => return None,
    };
    Some((prefix, class))
}

impl PipelineConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if let Some((prefix, class)) = class_key(key) {
            let i = class.index();
            match prefix {
                "database.grid" => self.database.grids.0[i] = value.parse::<PartitionGrid>()?,
                "placement.count" => self.placement.objects_per_class[i] = parse(key, value)?,
                "s_hpr.multiplier" => self.s_hpr.radius_multiplier[i] = parse(key, value)?,
                "gts.count" => self.gts_counts[i] = parse(key, value)?,
                _ => return Err(format!("unknown key `{key}`")),
            }
            return Ok(());
        }
        match key {
            "mode" => self.mode = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "database.k" => self.database.k = parse(key, value)?,
            "construction.threshold" => self.construction.whole_body_threshold = parse(key, value)?,
            "construction.max_iterations" => self.construction.max_iterations = parse(key, value)?,
            "construction.dedup_epsilon" => self.construction.dedup_epsilon = parse(key, value)?,
            "placement.x_range" => self.placement.x_range = parse_range(key, value)?,
            "placement.y_range" => self.placement.y_range = parse_range(key, value)?,
            "placement.rotation_range" => self.placement.rotation_range = parse_range(key, value)?,
            "placement.max_attempts" => self.placement.max_attempts = parse(key, value)?,
            "e_hpr.radius" => self.e_hpr.radius = parse(key, value)?,
            "e_hpr.z" => self.e_hpr.z = parse(key, value)?,
            "e_hpr.min_points" => self.e_hpr.min_points_per_label = parse(key, value)?,
            "hpr.jitter" => {
                let j = parse(key, value)?;
                self.e_hpr.jitter = j;
                self.s_hpr.jitter = j;
            }
            "global.drcpo" => self.drcpo_global = parse(key, value)?,
            "global.flip_probability" => self.global.flip_probability = parse(key, value)?,
            "global.scale_range" => self.global.scale_range = parse_range(key, value)?,
            "global.rotation_range" => self.global.rotation_range = parse_range(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        let range = |(a, b): (f64, f64)| format!("{a},{b}");
        if let Some((prefix, class)) = class_key(key) {
            let i = class.index();
            return match prefix {
                "database.grid" => self.database.grids.0[i].to_string(),
                "placement.count" => self.placement.objects_per_class[i].to_string(),
                "s_hpr.multiplier" => self.s_hpr.radius_multiplier[i].to_string(),
                "gts.count" => self.gts_counts[i].to_string(),
                _ => unreachable!("{key}"),
            };
        }
        match key {
            "mode" => self.mode.to_string(),
            "seed" => self.seed.to_string(),
            "database.k" => self.database.k.to_string(),
            "construction.threshold" => self.construction.whole_body_threshold.to_string(),
            "construction.max_iterations" => self.construction.max_iterations.to_string(),
            "construction.dedup_epsilon" => self.construction.dedup_epsilon.to_string(),
            "placement.x_range" => range(self.placement.x_range),
            "placement.y_range" => range(self.placement.y_range),
            "placement.rotation_range" => range(self.placement.rotation_range),
            "placement.max_attempts" => self.placement.max_attempts.to_string(),
            "e_hpr.radius" => self.e_hpr.radius.to_string(),
            "e_hpr.z" => self.e_hpr.z.to_string(),
            "e_hpr.min_points" => self.e_hpr.min_points_per_label.to_string(),
            "hpr.jitter" => self.e_hpr.jitter.to_string(),
            "global.drcpo" => self.drcpo_global.to_string(),
            "global.flip_probability" => self.global.flip_probability.to_string(),
            "global.scale_range" => range(self.global.scale_range),
            "global.rotation_range" => range(self.global.rotation_range),
            _ => unreachable!("{key}"),
        }
    }

    /// Parses a config file body. Unset keys keep their defaults; unknown
    /// keys and repeated keys are errors.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax { line: n + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(syntax(format!("`{key}` set twice")));
            }
            cfg.set(key, value).map_err(syntax)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key with its effective value; [`Self::from_text`] reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    /// Key reference with defaults, for `--help`.
    pub fn describe_defaults() -> String {
        let d = Self::default();
        let mut out = String::new();
        for (key, help) in KEYS {
            let _ = writeln!(out, "  {key} = {}    # {help}", d.get(key));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.database.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.construction.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.placement.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")))
            }
        };
        for m in self.s_hpr.radius_multiplier {
            positive("s_hpr.multiplier", m)?;
        }
        positive("e_hpr.radius", self.e_hpr.radius)?;
        if !(self.e_hpr.jitter >= 0.0 && self.e_hpr.jitter.is_finite()) {
            return Err(ConfigError::Invalid("hpr.jitter must be finite and >= 0".into()));
        }
        if !self.e_hpr.z.is_finite() {
            return Err(ConfigError::Invalid("e_hpr.z must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.global.flip_probability) {
            return Err(ConfigError::Invalid("global.flip_probability must be in [0, 1]".into()));
        }
        for (name, (lo, hi)) in [("global.scale_range", self.global.scale_range), ("global.rotation_range", self.global.rotation_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(ConfigError::Invalid(format!("{name} must be a finite interval")));
            }
        }
        if self.global.scale_range.0 <= 0.0 {
            return Err(ConfigError::Invalid("global.scale_range must be positive".into()));
        }
        Ok(())
    }
}
