//! The end-to-end pipeline: sample frame pairs per scene, match predictions
//! to ground truth in every touched frame, associate instances across each
//! pair, score them, and aggregate — plus the frame-local average-precision
//! pass over the same corpus.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, EvalConfig};
use crate::matching::{associate_pair, match_frame};
use crate::metrics::{
    aggregate, chamfer_ap, instance_stability, one_sided_stability, ApReport, InstanceStability,
    StabilityReport, AP_THRESHOLDS,
};
use crate::sampling::sample_pairs;
use crate::seq::Sequence;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(
        "no evaluable frame pairs: all {skipped_scenes} scene(s) are shorter than m + 1 = {} frames",
        m + 1
    )]
    NoEvaluablePairs { skipped_scenes: usize, m: u32 },
}

/// Scored instances of one scene, kept around for debugging and tests.
#[derive(Debug, Clone)]
pub struct SceneEval {
    pub scene_id: String,
    pub instances: Vec<InstanceStability>,
    pub pair_count: u64,
}

/// The complete result of one run.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub stability: StabilityReport,
    pub ap: ApReport,
}

/// Scores every instance of one scene across its sampled frame pairs.
/// Returns `None` when the scene is too short for the configured window.
pub fn eval_scene(seq: &Sequence, config: &EvalConfig) -> Option<SceneEval> {
    let samples = sample_pairs(&seq.scene_id, seq.frames.len(), config.m, config.seed).ok()?;

    // Each frame can appear in several pairs; match it once.
    let touched: BTreeSet<usize> = samples
        .iter()
        .flat_map(|s| [s.anchor, s.partner()])
        .collect();
    let matches: BTreeMap<usize, _> = touched
        .into_iter()
        .map(|i| (i, match_frame(&seq.frames[i], config)))
        .collect();

    let mut instances = Vec::new();
    for sample in &samples {
        let current = sample.partner();
        let history = sample.anchor;
        let assoc = associate_pair(
            &seq.frames[current],
            &seq.frames[history],
            &matches[&current],
            &matches[&history],
        );
        for pair in &assoc.matched {
            instances.push(instance_stability(pair, config));
        }
        for inst in &assoc.one_sided {
            instances.push(one_sided_stability(inst, config));
        }
    }
    Some(SceneEval {
        scene_id: seq.scene_id.clone(),
        instances,
        pair_count: samples.len() as u64,
    })
}

/// Runs the full evaluation over a corpus. Scenes are processed in parallel
/// but merged in scene-id order with compensated accumulation, so the result
/// is independent of thread scheduling. Scenes shorter than `m + 1` frames
/// are skipped and counted; a corpus where every scene is skipped is an
/// error.
pub fn evaluate(sequences: &[Sequence], config: &EvalConfig) -> Result<EvalOutput, EvalError> {
    config.validate()?;

    let mut ordered: Vec<&Sequence> = sequences.iter().collect();
    ordered.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));

    let per_scene: Vec<Option<SceneEval>> = ordered
        .par_iter()
        .map(|seq| eval_scene(seq, config))
        .collect();

    let mut instances = Vec::new();
    let mut pair_count = 0u64;
    let mut skipped = 0u64;
    for scene in per_scene.into_iter() {
        match scene {
            Some(s) => {
                pair_count += s.pair_count;
                instances.extend(s.instances);
            }
            None => skipped += 1,
        }
    }
    if pair_count == 0 {
        return Err(EvalError::NoEvaluablePairs {
            skipped_scenes: skipped as usize,
            m: config.m,
        });
    }

    let stability = aggregate(&instances, pair_count, skipped, config);
    let frames: Vec<_> = ordered.iter().flat_map(|s| s.frames.iter()).collect();
    let ap = chamfer_ap(&frames, &AP_THRESHOLDS, config);
    Ok(EvalOutput { stability, ap })
}
