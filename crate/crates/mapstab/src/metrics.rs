//! The stability metrics. Per matched instance: presence (detection
//! consistency), localization (lateral agreement), shape (curvature
//! agreement), and their weighted combination; per corpus: class means, their
//! macro average (mAS), plus a Chamfer-based average precision so stability
//! can be contrasted with one-shot accuracy on the same run.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::{EvalConfig, LocMap};
use crate::geometry::{
    clip_to_range, curvature, resample_pair, transform_polyline, ResampledPair,
};
use crate::matching::{chamfer_cost, ClassLabel, MatchedInstancePair, OneSidedInstance};
use crate::seq::Frame;

/// Chamfer gates (meters) that the average-precision metric sweeps.
pub const AP_THRESHOLDS: [f64; 3] = [0.5, 1.0, 1.5];

/// Detection-consistency score for one instance across a frame pair: 1.0
/// when both sides land on the same side of `tau` (detected twice or missed
/// twice), 0.5 when the detection flickers. A missing score counts as 0, so
/// an unmatched side reads as "missed".
pub fn presence(score_current: Option<f64>, score_history: Option<f64>, tau: f64) -> f64 {
    let detected_current = score_current.unwrap_or(0.0) >= tau;
    let detected_history = score_history.unwrap_or(0.0) >= tau;
    if detected_current == detected_history {
        1.0
    } else {
        0.5
    }
}

/// Localization agreement of an aligned pair: the mean |Δy| across the common
/// grid, mapped through `loc_map` so 0 m → 1.0 and β m → 0.0 (linear) or
/// β/2 m → 0.5 (both maps).
pub fn loc_stability(pair: &ResampledPair, beta: f64, loc_map: LocMap) -> f64 {
    let n = pair.len() as f64;
    let d = pair
        .y_current()
        .iter()
        .zip(pair.y_history())
        .map(|(c, h)| (c - h).abs())
        .sum::<f64>()
        / n;
    match loc_map {
        LocMap::Linear => (1.0 - d / beta).clamp(0.0, 1.0),
        LocMap::Exp => (-d * 2.0 * std::f64::consts::LN_2 / beta).exp(),
    }
}

/// Shape agreement of an aligned pair: 1 − |Δκ|/π where κ is each side's
/// mean turning angle. Needs at least one interior vertex, so a 2-point grid
/// has no shape score.
pub fn shape_stability(pair: &ResampledPair) -> Option<f64> {
    if pair.len() < 3 {
        return None;
    }
    let kappa_current = curvature(&pair.current_points())
        .expect("strictly increasing grid xs cannot produce zero-length segments");
    let kappa_history = curvature(&pair.history_points())
        .expect("strictly increasing grid xs cannot produce zero-length segments");
    Some(1.0 - (kappa_current - kappa_history).abs() / PI)
}

/// All scores of one ground-truth instance over one sampled frame pair.
/// `loc`/`shape` are absent when no aligned geometry exists (one-sided match,
/// history clipped out of the window, or no x-overlap after alignment);
/// absent sub-metrics contribute 0 to `stability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStability {
    pub gt_track_id: String,
    pub class: ClassLabel,
    pub presence: f64,
    pub loc: Option<f64>,
    pub shape: Option<f64>,
    pub stability: f64,
    pub one_sided: bool,
}

fn combine(presence: f64, loc: Option<f64>, shape: Option<f64>, config: &EvalConfig) -> f64 {
    presence * (config.omega * loc.unwrap_or(0.0) + (1.0 - config.omega) * shape.unwrap_or(0.0))
}

/// Scores one instance matched on both sides of a pair. The history-side
/// geometry is carried into the current ego frame (through the world frame),
/// clipped to the evaluation window there, and resampled together with the
/// current-side geometry onto a shared lateral grid.
pub fn instance_stability(pair: &MatchedInstancePair, config: &EvalConfig) -> InstanceStability {
    let presence = presence(pair.current.score, pair.history.score, config.tau);
    let history_in_current = transform_polyline(
        &pair.history.geometry,
        &pair.pose_history,
        &pair.pose_current,
    );
    let aligned = clip_to_range(&history_in_current, &config.range)
        .and_then(|clipped| resample_pair(&pair.current.geometry, &clipped, config.n_samples));
    let (loc, shape) = match &aligned {
        Some(resampled) => (
            Some(loc_stability(resampled, config.beta, config.loc_map)),
            shape_stability(resampled),
        ),
        None => (None, None),
    };
    InstanceStability {
        gt_track_id: pair.gt_track_id.clone(),
        class: pair.class.clone(),
        presence,
        loc,
        shape,
        stability: combine(presence, loc, shape, config),
        one_sided: false,
    }
}

/// Scores an instance matched in only one frame of a pair while its ground
/// truth existed in both. The unmatched side reads as a miss (score 0), so
/// presence is 0.5 when the matched side clears `tau` and 1.0 when it does
/// not; with no second geometry to align, loc and shape are absent and the
/// combined stability is 0.
pub fn one_sided_stability(inst: &OneSidedInstance, config: &EvalConfig) -> InstanceStability {
    let presence = if inst.matched_in_current {
        presence(inst.matched_score, None, config.tau)
    } else {
        presence(None, inst.matched_score, config.tau)
    };
    InstanceStability {
        gt_track_id: inst.gt_track_id.clone(),
        class: inst.class.clone(),
        presence,
        loc: None,
        shape: None,
        stability: 0.0,
        one_sided: true,
    }
}

/// Compensated (Kahan) accumulator: keeps class means invariant to the order
/// instances arrive in, which threading must not be allowed to change.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Per-class aggregate of instance scores. Means run over every scored
/// instance of the class, with absent loc/shape contributing 0 (mirroring how
/// they enter the combined score); `stability_mean_matched` restricts to
/// two-sided instances and is absent when the class has none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStability {
    pub presence_mean: f64,
    pub loc_mean: f64,
    pub shape_mean: f64,
    pub stability_mean: f64,
    pub stability_mean_matched: Option<f64>,
    pub instance_count: u64,
    pub one_sided_count: u64,
}

/// Corpus-level stability result: per-class aggregates plus their macro
/// averages. All scores are on a 0–1 scale; presentation layers may rescale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: EvalConfig,
    pub per_class: BTreeMap<ClassLabel, ClassStability>,
    /// Macro average of per-class stability means; absent when nothing was
    /// scored.
    pub mas: Option<f64>,
    /// Same macro average over two-sided instances only, skipping classes
    /// with none.
    pub mas_matched_only: Option<f64>,
    pub pair_count: u64,
    pub skipped_scene_count: u64,
}

#[derive(Default)]
struct ClassAccumulator {
    presence: KahanSum,
    loc: KahanSum,
    shape: KahanSum,
    stability: KahanSum,
    stability_matched: KahanSum,
    count: u64,
    matched_count: u64,
    one_sided_count: u64,
}

/// Folds instance scores into per-class means and the macro averages.
/// Accumulation is compensated and keyed by class, so the result is
/// insensitive (to ~1e-12) to instance order.
pub fn aggregate(
    instances: &[InstanceStability],
    pair_count: u64,
    skipped_scene_count: u64,
    config: &EvalConfig,
) -> StabilityReport {
    let mut acc: BTreeMap<ClassLabel, ClassAccumulator> = BTreeMap::new();
    for inst in instances {
        let a = acc.entry(inst.class.clone()).or_default();
        a.presence.add(inst.presence);
        a.loc.add(inst.loc.unwrap_or(0.0));
        a.shape.add(inst.shape.unwrap_or(0.0));
        a.stability.add(inst.stability);
        a.count += 1;
        if inst.one_sided {
            a.one_sided_count += 1;
        } else {
            a.stability_matched.add(inst.stability);
            a.matched_count += 1;
        }
    }

    let mut per_class = BTreeMap::new();
    let mut mas_sum = KahanSum::default();
    let mut matched_sum = KahanSum::default();
    let mut matched_classes = 0u64;
    for (class, a) in &acc {
        let n = a.count as f64;
        let stability_mean = a.stability.value() / n;
        let stability_mean_matched = (a.matched_count > 0)
            .then(|| a.stability_matched.value() / a.matched_count as f64);
        mas_sum.add(stability_mean);
        if let Some(m) = stability_mean_matched {
            matched_sum.add(m);
            matched_classes += 1;
        }
        per_class.insert(
            class.clone(),
            ClassStability {
                presence_mean: a.presence.value() / n,
                loc_mean: a.loc.value() / n,
                shape_mean: a.shape.value() / n,
                stability_mean,
                stability_mean_matched,
                instance_count: a.count,
                one_sided_count: a.one_sided_count,
            },
        );
    }

    let class_count = per_class.len() as f64;
    StabilityReport {
        config: config.clone(),
        per_class,
        mas: (class_count > 0.0).then(|| mas_sum.value() / class_count),
        mas_matched_only: (matched_classes > 0)
            .then(|| matched_sum.value() / matched_classes as f64),
        pair_count,
        skipped_scene_count,
    }
}

/// Average precision per class under Chamfer gates, for contrasting
/// frame-local accuracy with temporal stability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub thresholds: Vec<f64>,
    /// AP per class averaged over thresholds; only classes with ground truth
    /// appear (a class that is never annotated cannot be scored).
    pub per_class: BTreeMap<ClassLabel, f64>,
    /// Macro average over scored classes; absent when no class has ground
    /// truth.
    pub map: Option<f64>,
}

/// Computes Chamfer-gated average precision over every frame given.
/// Predictions rank globally by descending confidence; each one greedily
/// claims the cheapest still-unclaimed same-class ground truth in its own
/// frame and counts as a true positive when that cost clears the gate.
/// Precision is interpolated at 101 recall points and averaged over
/// `thresholds`.
pub fn chamfer_ap(frames: &[&Frame], thresholds: &[f64], config: &EvalConfig) -> ApReport {
    let classes: BTreeSet<ClassLabel> = frames
        .iter()
        .flat_map(|f| f.ground_truth.iter().map(|e| e.class.clone()))
        .collect();

    let mut per_class = BTreeMap::new();
    for class in &classes {
        let gts_per_frame: Vec<Vec<usize>> = frames
            .iter()
            .map(|f| {
                (0..f.ground_truth.len())
                    .filter(|&i| f.ground_truth[i].class == *class)
                    .collect()
            })
            .collect();
        let preds_per_frame: Vec<Vec<usize>> = frames
            .iter()
            .map(|f| {
                (0..f.predictions.len())
                    .filter(|&i| f.predictions[i].class == *class)
                    .collect()
            })
            .collect();

        // Global slot per ground-truth instance so matched-flags are flat.
        let mut slot_base = vec![0usize; frames.len()];
        let mut total_gt = 0usize;
        for (f, gts) in gts_per_frame.iter().enumerate() {
            slot_base[f] = total_gt;
            total_gt += gts.len();
        }

        // One cost matrix per frame, shared across thresholds.
        let costs: Vec<Vec<Vec<f64>>> = frames
            .iter()
            .enumerate()
            .map(|(f, frame)| {
                preds_per_frame[f]
                    .iter()
                    .map(|&p| {
                        gts_per_frame[f]
                            .iter()
                            .map(|&g| {
                                chamfer_cost(
                                    &frame.predictions[p].geometry,
                                    &frame.ground_truth[g].geometry,
                                    config.n_samples,
                                )
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        // (frame, local pred index) ranked by confidence; index order breaks
        // ties so ranking is deterministic.
        let mut ranked: Vec<(usize, usize, f64)> = Vec::new();
        for (f, preds) in preds_per_frame.iter().enumerate() {
            for (local, &p) in preds.iter().enumerate() {
                ranked.push((f, local, frames[f].predictions[p].score.unwrap_or(0.0)));
            }
        }
        ranked.sort_by(|a, b| {
            b.2.total_cmp(&a.2)
                .then_with(|| a.0.cmp(&b.0))
                .then_with(|| a.1.cmp(&b.1))
        });

        if total_gt == 0 {
            continue;
        }
        let mut ap_sum = 0.0;
        for &gate in thresholds {
            let mut matched = vec![false; total_gt];
            let mut tp = 0usize;
            let mut curve: Vec<(f64, f64)> = Vec::with_capacity(ranked.len());
            for (rank, &(f, local, _)) in ranked.iter().enumerate() {
                let row = &costs[f][local];
                let mut best: Option<(usize, f64)> = None;
                for (g_local, &c) in row.iter().enumerate() {
                    if !matched[slot_base[f] + g_local]
                        && best.map_or(true, |(_, bc)| c < bc)
                    {
                        best = Some((g_local, c));
                    }
                }
                if let Some((g_local, c)) = best {
                    if c <= gate {
                        matched[slot_base[f] + g_local] = true;
                        tp += 1;
                    }
                }
                curve.push((tp as f64 / total_gt as f64, tp as f64 / (rank + 1) as f64));
            }
            ap_sum += ap_101(&curve);
        }
        per_class.insert(class.clone(), ap_sum / thresholds.len() as f64);
    }

    let map = (!per_class.is_empty())
        .then(|| per_class.values().sum::<f64>() / per_class.len() as f64);
    ApReport {
        thresholds: thresholds.to_vec(),
        per_class,
        map,
    }
}

/// 101-point interpolated AP over a (recall, precision) curve in ranking
/// order: at each recall level r ∈ {0, 0.01, …, 1} take the maximum precision
/// among points with recall ≥ r, then average.
fn ap_101(curve: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        let p = curve
            .iter()
            .filter(|(recall, _)| *recall >= r - 1e-12)
            .map(|(_, precision)| *precision)
            .fold(0.0, f64::max);
        total += p;
    }
    total / 101.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2D, PolyLine2D, RigidPose2D};
    use crate::matching::{ElementView, MapElement};
    use approx::assert_abs_diff_eq;

    fn grid(xs: Vec<f64>, y_current: Vec<f64>, y_history: Vec<f64>) -> ResampledPair {
        ResampledPair::from_parts(xs, y_current, y_history).unwrap()
    }

    fn line(points: &[(f64, f64)]) -> PolyLine2D {
        PolyLine2D::new(points.iter().map(|&(x, y)| Point2D { x, y }).collect()).unwrap()
    }

    #[test]
    fn presence_truth_table() {
        let tau = 0.3;
        assert_eq!(presence(Some(0.9), Some(0.8), tau), 1.0);
        assert_eq!(presence(Some(0.1), Some(0.2), tau), 1.0);
        assert_eq!(presence(Some(0.9), Some(0.1), tau), 0.5);
        assert_eq!(presence(Some(0.1), Some(0.9), tau), 0.5);
        // threshold is inclusive
        assert_eq!(presence(Some(0.3), Some(0.3), tau), 1.0);
        assert_eq!(presence(Some(0.3), Some(0.29), tau), 0.5);
        // absent scores read as 0 = missed
        assert_eq!(presence(None, None, tau), 1.0);
        assert_eq!(presence(Some(0.9), None, tau), 0.5);
        assert_eq!(presence(Some(0.1), None, tau), 1.0);
    }

    #[test]
    fn loc_anchors_under_linear_map() {
        let beta = 15.0;
        for (dev, expected) in [(0.0, 1.0), (7.5, 0.5), (15.0, 0.0), (30.0, 0.0)] {
            let pair = grid(vec![0.0, 1.0], vec![dev, dev], vec![0.0, 0.0]);
            assert_eq!(loc_stability(&pair, beta, LocMap::Linear), expected);
        }
    }

    #[test]
    fn loc_exp_map_shares_the_half_point_and_never_hits_zero() {
        let pair = grid(vec![0.0, 1.0], vec![7.5, 7.5], vec![0.0, 0.0]);
        assert_abs_diff_eq!(loc_stability(&pair, 15.0, LocMap::Exp), 0.5, epsilon = 1e-12);
        let far = grid(vec![0.0, 1.0], vec![500.0, 500.0], vec![0.0, 0.0]);
        let v = loc_stability(&far, 15.0, LocMap::Exp);
        assert!(v > 0.0 && v < 1e-9);
    }

    #[test]
    fn loc_uses_mean_absolute_deviation() {
        // deviations 0, 3, -3 → mean |Δ| = 2 → 1 − 2/15
        let pair = grid(vec![0.0, 1.0, 2.0], vec![0.0, 3.0, -3.0], vec![0.0; 3]);
        assert_abs_diff_eq!(
            loc_stability(&pair, 15.0, LocMap::Linear),
            1.0 - 2.0 / 15.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn shape_anchors() {
        // straight vs straight: both zero curvature
        let pair = grid(vec![0.0, 1.0, 2.0], vec![0.0; 3], vec![5.0; 3]);
        assert_eq!(shape_stability(&pair).unwrap(), 1.0);
        // right-angle tent vs straight: |Δκ| = π/2 exactly
        let pair = grid(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], vec![0.0; 3]);
        assert_abs_diff_eq!(shape_stability(&pair).unwrap(), 0.5, epsilon = 1e-12);
        // two-point grid has no interior vertex
        let pair = grid(vec![0.0, 1.0], vec![0.0; 2], vec![0.0; 2]);
        assert_eq!(shape_stability(&pair), None);
    }

    fn matched_pair(
        current: PolyLine2D,
        history: PolyLine2D,
        pose_current: RigidPose2D,
        pose_history: RigidPose2D,
        scores: (f64, f64),
    ) -> MatchedInstancePair {
        MatchedInstancePair {
            gt_track_id: "t0".into(),
            class: ClassLabel::Divider,
            current: ElementView {
                geometry: current,
                score: Some(scores.0),
            },
            history: ElementView {
                geometry: history,
                score: Some(scores.1),
            },
            pose_current,
            pose_history,
        }
    }

    #[test]
    fn instance_stability_on_identical_static_pair_is_perfect() {
        let g = line(&[(-10.0, 2.0), (10.0, 2.0)]);
        let pair = matched_pair(
            g.clone(),
            g,
            RigidPose2D::new(0.0, 0.0, 0.0),
            RigidPose2D::new(0.0, 0.0, 0.0),
            (0.9, 0.9),
        );
        let config = EvalConfig::default();
        let s = instance_stability(&pair, &config);
        assert_eq!(s.presence, 1.0);
        assert_abs_diff_eq!(s.loc.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.shape.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.stability, 1.0, epsilon = 1e-12);
        assert!(!s.one_sided);
    }

    #[test]
    fn instance_stability_transforms_history_into_the_current_frame() {
        // Same world-frame lane line seen from two ego positions 2 m apart.
        // In each frame's own coordinates the line differs, but aligned into
        // the current frame they coincide: loc must be exactly 1.
        let pose_history = RigidPose2D::new(0.0, 0.0, 0.0);
        let pose_current = RigidPose2D::new(2.0, 0.0, 0.0);
        let history = line(&[(0.0, 1.0), (10.0, 1.0)]); // world x 0..10
        let current = line(&[(-2.0, 1.0), (8.0, 1.0)]); // same line, ego moved +2
        let pair = matched_pair(current, history, pose_current, pose_history, (0.9, 0.9));
        let config = EvalConfig::default();
        let s = instance_stability(&pair, &config);
        assert_abs_diff_eq!(s.loc.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.stability, 1.0, epsilon = 1e-12);

        // Without the transform the two geometries are offset in x but still
        // overlap; shifting the current line laterally by 1.5 m must surface
        // in loc exactly.
        let shifted = line(&[(-2.0, 2.5), (8.0, 2.5)]);
        let pair = matched_pair(
            shifted,
            line(&[(0.0, 1.0), (10.0, 1.0)]),
            pose_current,
            pose_history,
            (0.9, 0.9),
        );
        let s = instance_stability(&pair, &config);
        assert_abs_diff_eq!(s.loc.unwrap(), 1.0 - 1.5 / 15.0, epsilon = 1e-12);
    }

    #[test]
    fn instance_stability_without_overlap_zero_fills() {
        // History lands outside the window after alignment: ego jumped 100 m.
        let pair = matched_pair(
            line(&[(0.0, 0.0), (5.0, 0.0)]),
            line(&[(0.0, 0.0), (5.0, 0.0)]),
            RigidPose2D::new(100.0, 0.0, 0.0),
            RigidPose2D::new(0.0, 0.0, 0.0),
            (0.9, 0.9),
        );
        let config = EvalConfig::default();
        let s = instance_stability(&pair, &config);
        assert_eq!(s.loc, None);
        assert_eq!(s.shape, None);
        assert_eq!(s.presence, 1.0);
        assert_eq!(s.stability, 0.0);
    }

    #[test]
    fn combined_score_weights_loc_and_shape() {
        // Current tilted line: loc deviation known, shape differs from straight.
        let config = EvalConfig::default();
        let pair = matched_pair(
            line(&[(-10.0, 0.0), (0.0, 4.0), (10.0, 0.0)]),
            line(&[(-10.0, 0.0), (10.0, 0.0)]),
            RigidPose2D::new(0.0, 0.0, 0.0),
            RigidPose2D::new(0.0, 0.0, 0.0),
            (0.9, 0.1), // flicker: presence 0.5
        );
        let s = instance_stability(&pair, &config);
        let expected = 0.5 * (0.7 * s.loc.unwrap() + 0.3 * s.shape.unwrap());
        assert_abs_diff_eq!(s.stability, expected, epsilon = 1e-12);
    }

    #[test]
    fn one_sided_instances_score_zero_stability() {
        let config = EvalConfig::default();
        let inst = OneSidedInstance {
            gt_track_id: "t0".into(),
            class: ClassLabel::Boundary,
            matched_score: Some(0.9),
            matched_in_current: true,
        };
        let s = one_sided_stability(&inst, &config);
        assert_eq!(s.presence, 0.5); // detected once, missed once
        assert_eq!(s.stability, 0.0);
        assert_eq!(s.loc, None);
        assert!(s.one_sided);

        // A low-confidence one-sided match reads as missed on both sides.
        let inst = OneSidedInstance {
            matched_score: Some(0.1),
            ..inst
        };
        let s = one_sided_stability(&inst, &config);
        assert_eq!(s.presence, 1.0);
        assert_eq!(s.stability, 0.0);
    }

    fn inst(class: ClassLabel, stability: f64, one_sided: bool) -> InstanceStability {
        InstanceStability {
            gt_track_id: "t".into(),
            class,
            presence: 1.0,
            loc: (!one_sided).then_some(stability),
            shape: (!one_sided).then_some(stability),
            stability,
            one_sided,
        }
    }

    #[test]
    fn aggregate_means_per_class_then_macro_averages() {
        let config = EvalConfig::default();
        let instances = vec![
            inst(ClassLabel::Divider, 1.0, false),
            inst(ClassLabel::Divider, 0.5, false),
            inst(ClassLabel::Boundary, 0.8, false),
            inst(ClassLabel::Boundary, 0.0, true),
        ];
        let report = aggregate(&instances, 10, 1, &config);
        let divider = &report.per_class[&ClassLabel::Divider];
        assert_abs_diff_eq!(divider.stability_mean, 0.75, epsilon = 1e-12);
        assert_eq!(divider.instance_count, 2);
        assert_eq!(divider.one_sided_count, 0);
        let boundary = &report.per_class[&ClassLabel::Boundary];
        assert_abs_diff_eq!(boundary.stability_mean, 0.4, epsilon = 1e-12);
        assert_eq!(boundary.one_sided_count, 1);
        assert_abs_diff_eq!(boundary.stability_mean_matched.unwrap(), 0.8, epsilon = 1e-12);
        // mAS = mean(0.75, 0.4); matched-only = mean(0.75, 0.8)
        assert_abs_diff_eq!(report.mas.unwrap(), 0.575, epsilon = 1e-12);
        assert_abs_diff_eq!(report.mas_matched_only.unwrap(), 0.775, epsilon = 1e-12);
        assert_eq!(report.pair_count, 10);
        assert_eq!(report.skipped_scene_count, 1);
    }

    #[test]
    fn aggregate_of_nothing_has_no_mas() {
        let report = aggregate(&[], 0, 3, &EvalConfig::default());
        assert_eq!(report.mas, None);
        assert_eq!(report.mas_matched_only, None);
        assert!(report.per_class.is_empty());
    }

    fn frame_with(preds: Vec<MapElement>, gts: Vec<MapElement>) -> Frame {
        Frame {
            frame_index: 0,
            timestamp: 0.0,
            ego_pose: RigidPose2D::new(0.0, 0.0, 0.0),
            predictions: preds,
            ground_truth: gts,
        }
    }

    fn pred(id: &str, class: ClassLabel, points: &[(f64, f64)], score: f64) -> MapElement {
        MapElement {
            id: id.into(),
            class,
            geometry: line(points),
            score: Some(score),
            gt_track_id: None,
        }
    }

    fn gt(id: &str, class: ClassLabel, points: &[(f64, f64)]) -> MapElement {
        MapElement {
            id: id.into(),
            class,
            geometry: line(points),
            score: None,
            gt_track_id: Some(id.into()),
        }
    }

    #[test]
    fn ap_one_of_two_ground_truths_matched() {
        // One exact prediction, two ground truths: precision stays 1 while
        // recall caps at 0.5 → 51 of 101 recall points carry precision 1.
        let frame = frame_with(
            vec![pred("p0", ClassLabel::Divider, &[(0.0, 0.0), (5.0, 0.0)], 0.9)],
            vec![
                gt("a", ClassLabel::Divider, &[(0.0, 0.0), (5.0, 0.0)]),
                gt("b", ClassLabel::Divider, &[(0.0, 8.0), (5.0, 8.0)]),
            ],
        );
        let report = chamfer_ap(&[&frame], &AP_THRESHOLDS, &EvalConfig::default());
        assert_abs_diff_eq!(
            report.per_class[&ClassLabel::Divider],
            51.0 / 101.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ap_threshold_sweep_grades_a_constant_offset() {
        // Prediction offset 1.2 m: misses gates 0.5 and 1.0, clears 1.5
        // → AP (0 + 0 + 1)/3.
        let frame = frame_with(
            vec![pred("p0", ClassLabel::Divider, &[(0.0, 1.2), (5.0, 1.2)], 0.9)],
            vec![gt("a", ClassLabel::Divider, &[(0.0, 0.0), (5.0, 0.0)])],
        );
        let report = chamfer_ap(&[&frame], &AP_THRESHOLDS, &EvalConfig::default());
        assert_abs_diff_eq!(
            report.per_class[&ClassLabel::Divider],
            1.0 / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(report.map.unwrap(), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn ap_ranks_by_confidence_and_separates_classes() {
        // Low-confidence false positive ranked after the true positive does
        // not dent interpolated precision; the divider FP cannot consume the
        // boundary GT.
        let frame = frame_with(
            vec![
                pred("fp", ClassLabel::Divider, &[(0.0, 9.0), (5.0, 9.0)], 0.3),
                pred("tp", ClassLabel::Divider, &[(0.0, 0.0), (5.0, 0.0)], 0.8),
                pred("b", ClassLabel::Boundary, &[(0.0, 4.0), (5.0, 4.0)], 0.9),
            ],
            vec![
                gt("a", ClassLabel::Divider, &[(0.0, 0.0), (5.0, 0.0)]),
                gt("c", ClassLabel::Boundary, &[(0.0, 4.0), (5.0, 4.0)]),
            ],
        );
        let report = chamfer_ap(&[&frame], &AP_THRESHOLDS, &EvalConfig::default());
        assert_abs_diff_eq!(report.per_class[&ClassLabel::Divider], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.per_class[&ClassLabel::Boundary], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.map.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ap_class_with_gt_but_no_predictions_scores_zero() {
        let frame = frame_with(
            vec![],
            vec![gt("a", ClassLabel::Crosswalk, &[(0.0, 0.0), (5.0, 0.0)])],
        );
        let report = chamfer_ap(&[&frame], &AP_THRESHOLDS, &EvalConfig::default());
        assert_eq!(report.per_class[&ClassLabel::Crosswalk], 0.0);
        assert_eq!(report.map, Some(0.0));
    }

    #[test]
    fn ap_ignores_classes_without_ground_truth() {
        let frame = frame_with(
            vec![pred("p", ClassLabel::Divider, &[(0.0, 0.0), (5.0, 0.0)], 0.9)],
            vec![gt("a", ClassLabel::Boundary, &[(0.0, 4.0), (5.0, 4.0)])],
        );
        let report = chamfer_ap(&[&frame], &AP_THRESHOLDS, &EvalConfig::default());
        assert!(!report.per_class.contains_key(&ClassLabel::Divider));
        assert!(report.per_class.contains_key(&ClassLabel::Boundary));
    }

    #[test]
    fn empty_corpus_has_no_map() {
        let report = chamfer_ap(&[], &AP_THRESHOLDS, &EvalConfig::default());
        assert_eq!(report.map, None);
        assert!(report.per_class.is_empty());
    }
}
