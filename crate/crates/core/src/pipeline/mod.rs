//! Per-frame augmentation: construction, placement, object- and frame-level
//! hidden point removal, or the conventional baseline.

mod config;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{global_augment, gts_sample};
use crate::construction::construct_whole_body;
use crate::database::GtDatabase;
use crate::geometry::{from_canonical, ObjectClass};
use crate::hpr::{e_hpr, s_hpr};
use crate::io::Frame;
use crate::placement::{place_all, Placeable};
use crate::seeding::sub_rng;

pub use config::{ConfigError, Mode, PipelineConfig, KEYS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("mode `{0}` needs a ground-truth database")]
    MissingDatabase(Mode),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Raw,
    Constructed,
    Placed,
    SHpr,
    EHpr,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Raw, Stage::Constructed, Stage::Placed, Stage::SHpr, Stage::EHpr];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Constructed => "constructed",
            Stage::Placed => "placed",
            Stage::SHpr => "s-hpr",
            Stage::EHpr => "e-hpr",
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub construction: f64,
    pub placement: f64,
    pub s_hpr: f64,
    pub e_hpr: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub frame_id: String,
    /// Objects per class in the output frame.
    pub objects: [usize; 3],
    pub total_points: usize,
    pub input_points: usize,
    /// Objects per class that made it into the frame (placed or pasted).
    pub added: [usize; 3],
    /// Constructions that failed and were dropped.
    pub construction_failures: usize,
    /// Complementing passes summed over constructed objects.
    pub construction_iterations: u64,
    /// Placed objects removed because no point survived self-occlusion.
    pub s_hpr_dropped: usize,
    /// Labels deleted by frame-level occlusion.
    pub e_hpr_dropped: usize,
    pub timings: StageTimings,
}

fn seconds_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Augments one frame. The output depends only on the arguments.
pub fn augment_frame(
    frame: &Frame,
    db: Option<&GtDatabase>,
    config: &PipelineConfig,
    frame_seed: u64,
) -> Result<(Frame, FrameStats), PipelineError> {
    run(frame, db, config, frame_seed, None)
}

/// Like [`augment_frame`] in drcpo mode, additionally returning the frame
/// after every stage.
pub fn augment_frame_staged(
    frame: &Frame,
    db: &GtDatabase,
    config: &PipelineConfig,
    frame_seed: u64,
) -> Result<Vec<(Stage, Frame)>, PipelineError> {
    let mut stages = Vec::with_capacity(Stage::ALL.len());
    let cfg = PipelineConfig { mode: Mode::Drcpo, ..config.clone() };
    run(frame, Some(db), &cfg, frame_seed, Some(&mut stages))?;
    Ok(stages)
}

fn run(
    frame: &Frame,
    db: Option<&GtDatabase>,
    config: &PipelineConfig,
    frame_seed: u64,
    mut stages: Option<&mut Vec<(Stage, Frame)>>,
) -> Result<(Frame, FrameStats), PipelineError> {
    let start = Instant::now();
    let mut stats = FrameStats { frame_id: frame.frame_id.clone(), input_points: frame.total_points(), ..Default::default() };
    let out = match config.mode {
        Mode::None => frame.clone(),
        Mode::Cda => {
            let db = db.ok_or(PipelineError::MissingDatabase(Mode::Cda))?;
            let mut out = frame.clone();
            let t = Instant::now();
            stats.added = gts_sample(&mut out, db, &mut sub_rng(frame_seed, "gts", 0), config.gts_counts);
            stats.timings.placement = seconds_since(t);
            global_augment(&out, &mut sub_rng(frame_seed, "global", 0), &config.global)
        }
        Mode::Drcpo => {
            let db = db.ok_or(PipelineError::MissingDatabase(Mode::Drcpo))?;
            if let Some(s) = stages.as_deref_mut() {
                s.push((Stage::Raw, frame.clone()));
            }
            drcpo(frame, db, config, frame_seed, &mut stats, stages)
        }
    };
    stats.objects = out.class_counts();
    stats.total_points = out.total_points();
    stats.timings.total = seconds_since(start);
    Ok((out, stats))
}

fn drcpo(
    frame: &Frame,
    db: &GtDatabase,
    config: &PipelineConfig,
    frame_seed: u64,
    stats: &mut FrameStats,
    mut stages: Option<&mut Vec<(Stage, Frame)>>,
) -> Frame {
    let t = Instant::now();
    let mut lists: [Vec<Placeable>; 3] = Default::default();
    let mut slot = 0u64;
    // Constructed objects at their source poses, for the staged view only.
    let mut shown = stages.is_some().then(|| frame.clone());
    for class in ObjectClass::ALL {
        let members = db.class_members(class);
        for _ in 0..config.placement.objects_per_class[class.index()] {
            let mut rng = sub_rng(frame_seed, "construct", slot);
            slot += 1;
            if members.is_empty() {
                stats.construction_failures += 1;
                continue;
            }
            let source = members[rng.gen_range(0..members.len())];
            match construct_whole_body(source, db, &config.construction, &mut rng) {
                Ok(c) => {
                    stats.construction_iterations += c.iterations as u64;
                    if let Some(shown) = shown.as_mut() {
                        shown.objects.push(from_canonical(&c.object, &db.object(source).pose));
                    }
                    lists[class.index()].push(Placeable { object: c.object, source_cz: db.object(source).pose.z });
                }
                Err(e) => {
                    log::debug!("frame {}: construction of object {source} failed: {e}", frame.frame_id);
                    stats.construction_failures += 1;
                }
            }
        }
    }
    stats.timings.construction = seconds_since(t);
    if let (Some(s), Some(shown)) = (stages.as_deref_mut(), shown) {
        s.push((Stage::Constructed, shown));
    }

    let t = Instant::now();
    let mut out = frame.clone();
    let report = place_all(&mut out, lists, &config.placement, &mut sub_rng(frame_seed, "place", 0));
    stats.timings.placement = seconds_since(t);
    if let Some(s) = stages.as_deref_mut() {
        s.push((Stage::Placed, out.clone()));
    }

    let t = Instant::now();
    let placed = out.objects.split_off(report.first_placed);
    for obj in placed {
        match s_hpr(&obj, [0.0; 3], &config.s_hpr) {
            Ok(visible) => {
                stats.added[visible.class.index()] += 1;
                out.objects.push(visible);
            }
            Err(_) => stats.s_hpr_dropped += 1,
        }
    }
    stats.timings.s_hpr = seconds_since(t);
    if let Some(s) = stages.as_deref_mut() {
        s.push((Stage::SHpr, out.clone()));
    }

    let t = Instant::now();
    let before = out.objects.len();
    let mut out = e_hpr(&out, &config.e_hpr);
    stats.e_hpr_dropped = before - out.objects.len();
    stats.timings.e_hpr = seconds_since(t);
    if let Some(s) = stages.as_deref_mut() {
        s.push((Stage::EHpr, out.clone()));
    }

    if config.drcpo_global {
        out = global_augment(&out, &mut sub_rng(frame_seed, "global", 0), &config.global);
    }
    out
}
