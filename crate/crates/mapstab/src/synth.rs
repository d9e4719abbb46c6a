//! Synthetic scenes with knob-controlled imperfections. Ground truth comes
//! from world-anchored template elements observed through a moving ego
//! window (so ego-motion compensation is exercised nontrivially);
//! predictions are ground-truth copies degraded by independently seeded
//! perturbations, each designed to move one sub-metric by a hand-computable
//! amount.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{clip_to_range, PerceptionRange, Point2D, PolyLine2D, RigidPose2D, DUPLICATE_TOL};
use crate::matching::{ClassLabel, MapElement};
use crate::rng;
use crate::seq::{Frame, Sequence};

/// Confidence assigned to a flickered detection: far below any sensible
/// detection threshold, far above zero so the element still exists.
pub const FLICKER_SCORE: f64 = 0.05;

/// Scripted ego trajectory, advanced one pose per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EgoPath {
    /// Constant heading +x from the origin, `speed` meters per frame.
    Straight { speed: f64 },
    /// Counter-clockwise circle of `radius` meters, `speed` meters of arc
    /// per frame, starting at the origin heading +x.
    Arc { radius: f64, speed: f64 },
}

impl EgoPath {
    pub fn pose_at(&self, frame: usize) -> RigidPose2D {
        let f = frame as f64;
        match *self {
            EgoPath::Straight { speed } => RigidPose2D::new(speed * f, 0.0, 0.0),
            EgoPath::Arc { radius, speed } => {
                let phi = speed * f / radius;
                RigidPose2D::new(radius * phi.sin(), radius * (1.0 - phi.cos()), phi)
            }
        }
    }
}

/// One world-frame map element template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateElement {
    pub class: ClassLabel,
    pub points: Vec<Point2D>,
}

/// A complete scripted scene: what the world contains and how the ego moves
/// through it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scene_id: String,
    /// Number of frames.
    pub length: usize,
    pub ego_path: EgoPath,
    pub elements: Vec<TemplateElement>,
    pub range: PerceptionRange,
    /// Seconds between frames; timestamps are informational only.
    pub frame_dt: f64,
    /// Default stream key for perturbation when none is given explicitly.
    pub seed: u64,
}

/// Renders the ground-truth sequence: per frame, every template is brought
/// into the ego frame and clipped to the perception window; survivors keep a
/// stable track id across frames. Prediction lists stay empty.
///
/// Panics if a template polyline is invalid (fewer than 2 points or
/// coincident consecutive vertices) — scenario construction is programmer
/// input, not runtime data.
pub fn generate_gt(spec: &ScenarioSpec) -> Sequence {
    for (idx, tpl) in spec.elements.iter().enumerate() {
        PolyLine2D::new(tpl.points.clone())
            .unwrap_or_else(|e| panic!("template element {idx} is not a valid polyline: {e}"));
    }
    let mut frames = Vec::with_capacity(spec.length);
    for f in 0..spec.length {
        let pose = spec.ego_path.pose_at(f);
        let mut ground_truth = Vec::new();
        for (idx, tpl) in spec.elements.iter().enumerate() {
            let ego_points: Vec<Point2D> =
                tpl.points.iter().map(|p| pose.point_from_world(*p)).collect();
            let poly = PolyLine2D::new(ego_points)
                .expect("rigid transform preserves template validity");
            if let Some(clipped) = clip_to_range(&poly, &spec.range) {
                ground_truth.push(MapElement {
                    id: format!("g{}", ground_truth.len()),
                    class: tpl.class.clone(),
                    geometry: clipped,
                    score: None,
                    gt_track_id: Some(format!("t{idx}")),
                });
            }
        }
        frames.push(Frame {
            frame_index: f as u64,
            timestamp: f as f64 * spec.frame_dt,
            ego_pose: pose,
            predictions: Vec::new(),
            ground_truth,
        });
    }
    Sequence {
        scene_id: spec.scene_id.clone(),
        frames,
    }
}

/// The imperfection knobs. Each targets one sub-metric: `flicker_prob` →
/// presence, `jitter_sigma`/`drift_sigma`/`offset_bias` → localization,
/// `shape_noise` → shape, `dropout_prob` → one-sided matches. All default to
/// "off", so `PerturbationSpec::default()` yields perfect clones at
/// confidence `score_base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationSpec {
    /// Per element per frame: probability the confidence drops to
    /// [`FLICKER_SCORE`] instead of `score_base`.
    pub flicker_prob: f64,
    /// Std-dev (meters) of i.i.d. lateral noise added to every vertex,
    /// redrawn every frame (per-frame perception noise in the ego frame —
    /// world-frame noise would cancel under ego compensation).
    pub jitter_sigma: f64,
    /// Hinge angle (radians) at the polyline's arc-length midpoint. Applied
    /// with probability 1/2 per element per frame, sign ± equiprobable:
    /// turning angles are unsigned, so bending every frame by the same
    /// magnitude would leave the shape score untouched.
    pub shape_noise: f64,
    /// Per element per frame: probability the prediction is omitted.
    pub dropout_prob: f64,
    /// Confidence of an unflickered prediction.
    pub score_base: f64,
    /// Std-dev (meters) of a per-element lateral random-walk step per frame:
    /// slowly varying systematic error, so lateral disagreement grows with
    /// the gap between compared frames (unlike `jitter_sigma`, which is
    /// gap-independent).
    pub drift_sigma: f64,
    /// Constant lateral offset (meters) applied every frame: consistently
    /// wrong geometry that one-shot accuracy punishes but temporal
    /// comparison cannot see.
    pub offset_bias: f64,
    /// Restrict perturbation to these classes; elements of other classes
    /// come through as perfect clones. `None` perturbs everything.
    pub classes: Option<BTreeSet<ClassLabel>>,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            flicker_prob: 0.0,
            jitter_sigma: 0.0,
            shape_noise: 0.0,
            dropout_prob: 0.0,
            score_base: 0.9,
            drift_sigma: 0.0,
            offset_bias: 0.0,
            classes: None,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("flicker_prob", self.flicker_prob),
            ("dropout_prob", self.dropout_prob),
            ("score_base", self.score_base),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        for (name, v) in [
            ("jitter_sigma", self.jitter_sigma),
            ("shape_noise", self.shape_noise),
            ("drift_sigma", self.drift_sigma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !self.offset_bias.is_finite() {
            return Err("offset_bias must be finite".into());
        }
        Ok(())
    }

    fn applies_to(&self, class: &ClassLabel) -> bool {
        self.classes.as_ref().map_or(true, |s| s.contains(class))
    }
}

/// Derives a prediction sequence from a ground-truth sequence: every GT
/// element becomes a prediction (same clipped ego-frame geometry) degraded
/// per `pert`, with its track id stripped — matching has to rediscover
/// identity. Deterministic in `(seed, scene_id, pert)`; ground truth is
/// carried over untouched.
pub fn perturb(gt: &Sequence, pert: &PerturbationSpec, seed: u64) -> Sequence {
    let mut rng = rng::stream(seed, &gt.scene_id, "perturbation");
    let jitter = Normal::new(0.0, pert.jitter_sigma).expect("validated sigma");
    let drift_step = Normal::new(0.0, pert.drift_sigma).expect("validated sigma");

    // Random-walk state per track, advanced once per frame for every track
    // (visible or not) in sorted order, so a track's walk is a function of
    // time alone.
    let mut drift: BTreeMap<String, f64> = BTreeMap::new();
    if pert.drift_sigma > 0.0 {
        for frame in &gt.frames {
            for e in &frame.ground_truth {
                if let Some(id) = &e.gt_track_id {
                    drift.entry(id.clone()).or_insert(0.0);
                }
            }
        }
    }

    let mut frames = Vec::with_capacity(gt.frames.len());
    for frame in &gt.frames {
        for walk in drift.values_mut() {
            *walk += drift_step.sample(&mut rng);
        }
        let mut predictions = Vec::new();
        for e in &frame.ground_truth {
            let applies = pert.applies_to(&e.class);
            if applies && pert.dropout_prob > 0.0 && rng.gen_bool(pert.dropout_prob) {
                continue;
            }
            let mut points = e.geometry.points().to_vec();
            if applies {
                let walk = e
                    .gt_track_id
                    .as_ref()
                    .and_then(|id| drift.get(id))
                    .copied()
                    .unwrap_or(0.0);
                let lateral = walk + pert.offset_bias;
                if lateral != 0.0 {
                    for p in &mut points {
                        p.y += lateral;
                    }
                }
                if pert.jitter_sigma > 0.0 {
                    for p in &mut points {
                        p.y += jitter.sample(&mut rng);
                    }
                }
                if pert.shape_noise > 0.0 && rng.gen_bool(0.5) {
                    let angle = if rng.gen_bool(0.5) {
                        pert.shape_noise
                    } else {
                        -pert.shape_noise
                    };
                    bend_at_midpoint(&mut points, angle);
                }
            }
            let score = if applies && pert.flicker_prob > 0.0 && rng.gen_bool(pert.flicker_prob)
            {
                FLICKER_SCORE
            } else {
                pert.score_base
            };
            predictions.push(MapElement {
                id: format!("p{}", predictions.len()),
                class: e.class.clone(),
                geometry: PolyLine2D::new(points)
                    .expect("lateral noise and hinge rotation preserve vertex separation"),
                score: Some(score),
                gt_track_id: None,
            });
        }
        frames.push(Frame {
            frame_index: frame.frame_index,
            timestamp: frame.timestamp,
            ego_pose: frame.ego_pose,
            predictions,
            ground_truth: frame.ground_truth.clone(),
        });
    }
    Sequence {
        scene_id: gt.scene_id.clone(),
        frames,
    }
}

/// Rotates everything past the arc-length midpoint around it by `angle`. The
/// midpoint becomes a vertex (inserted unless one already sits there), so a
/// straight segment turns into a hinge whose interior turning angle is
/// exactly |angle|.
fn bend_at_midpoint(points: &mut Vec<Point2D>, angle: f64) {
    let total: f64 = points.windows(2).map(|w| w[0].dist(&w[1])).sum();
    let half = total / 2.0;
    let mut acc = 0.0;
    for i in 0..points.len() - 1 {
        let seg = points[i].dist(&points[i + 1]);
        if acc + seg >= half - 1e-12 {
            let t = ((half - acc) / seg).clamp(0.0, 1.0);
            let pivot = Point2D {
                x: points[i].x + t * (points[i + 1].x - points[i].x),
                y: points[i].y + t * (points[i + 1].y - points[i].y),
            };
            let pivot_idx = if pivot.dist(&points[i]) <= DUPLICATE_TOL {
                i
            } else if pivot.dist(&points[i + 1]) <= DUPLICATE_TOL {
                i + 1
            } else {
                points.insert(i + 1, pivot);
                i + 1
            };
            let (sin, cos) = angle.sin_cos();
            for p in &mut points[pivot_idx + 1..] {
                let dx = p.x - pivot.x;
                let dy = p.y - pivot.y;
                p.x = pivot.x + cos * dx - sin * dy;
                p.y = pivot.y + sin * dx + cos * dy;
            }
            return;
        }
        acc += seg;
    }
}

/// Ready-made scenario families. All geometry is piecewise-straight
/// (collinear vertices or 2-point dashes), so clipping to a different vertex
/// subset never changes the interpolated line — clone predictions score
/// exactly 1.0 on every sub-metric, and every knob's effect is measurable
/// from a clean baseline.
pub mod presets {
    use super::*;

    fn collinear_line(class: ClassLabel, y: f64, x_from: f64, x_to: f64, step: f64) -> TemplateElement {
        let n = ((x_to - x_from) / step).round() as usize;
        TemplateElement {
            class,
            points: (0..=n)
                .map(|i| Point2D {
                    x: x_from + i as f64 * step,
                    y,
                })
                .collect(),
        }
    }

    fn dash(class: ClassLabel, from: (f64, f64), to: (f64, f64)) -> TemplateElement {
        TemplateElement {
            class,
            points: vec![
                Point2D {
                    x: from.0,
                    y: from.1,
                },
                Point2D { x: to.0, y: to.1 },
            ],
        }
    }

    fn spec(scene_id: &str, length: usize, ego_path: EgoPath, elements: Vec<TemplateElement>) -> ScenarioSpec {
        ScenarioSpec {
            scene_id: scene_id.to_string(),
            length,
            ego_path,
            elements,
            range: PerceptionRange::standard(),
            frame_dt: 0.5,
            seed: 0,
        }
    }

    /// Straight road: full-length lane lines (divider center, boundaries at
    /// ±7 m) plus road-crossing crosswalk dashes every 15 m.
    pub fn straight_corridor(scene_id: &str, length: usize, speed: f64) -> ScenarioSpec {
        let x_to = speed * (length.max(1) - 1) as f64 + 20.0;
        let mut elements = vec![
            collinear_line(ClassLabel::Divider, 0.0, -20.0, x_to, 2.0),
            collinear_line(ClassLabel::Boundary, -7.0, -20.0, x_to, 2.0),
            collinear_line(ClassLabel::Boundary, 7.0, -20.0, x_to, 2.0),
        ];
        let mut x = -15.0;
        while x < x_to {
            elements.push(dash(ClassLabel::Crosswalk, (x, -2.0), (x + 1.0, 2.0)));
            x += 15.0;
        }
        spec(scene_id, length, EgoPath::Straight { speed }, elements)
    }

    /// Curved road: tangential 2-point dashes along three concentric rows
    /// (divider on the path, boundaries ±7 m), sparse tilted crosswalk
    /// dashes between them.
    pub fn arc_corridor(scene_id: &str, length: usize, radius: f64, speed: f64) -> ScenarioSpec {
        assert!(radius > 20.0, "arc presets need a generous radius");
        let s_to = speed * (length.max(1) - 1) as f64 + 20.0;
        // World position of arc coordinate s at radial offset r (ego y ≈ −r),
        // on the circle centered (0, radius).
        let at = |s: f64, r: f64| -> Point2D {
            let phi = s / radius;
            let rho = radius + r;
            Point2D {
                x: rho * phi.sin(),
                y: radius - rho * phi.cos(),
            }
        };
        let tangent_dash = |class: ClassLabel, s: f64, r: f64, len: f64, tilt: f64| {
            let phi = s / radius + tilt;
            let c = at(s, r);
            let (dy, dx) = phi.sin_cos();
            dash(
                class,
                (c.x - 0.5 * len * dx, c.y - 0.5 * len * dy),
                (c.x + 0.5 * len * dx, c.y + 0.5 * len * dy),
            )
        };
        let mut elements = Vec::new();
        let mut s = -18.0;
        while s < s_to {
            elements.push(tangent_dash(ClassLabel::Divider, s, 0.0, 3.0, 0.0));
            elements.push(tangent_dash(ClassLabel::Boundary, s, -7.0, 3.0, 0.0));
            elements.push(tangent_dash(ClassLabel::Boundary, s, 7.0, 3.0, 0.0));
            s += 6.0;
        }
        let mut s = -12.0;
        while s < s_to {
            elements.push(tangent_dash(ClassLabel::Crosswalk, s, 3.5, 4.0, 0.35));
            s += 18.0;
        }
        spec(scene_id, length, EgoPath::Arc { radius, speed }, elements)
    }

    /// Field of short 2-point dashes in three class rows. Two-point
    /// geometry cannot bend under vertex jitter (shape stays exactly 1), and
    /// the 1 m dash length keeps a midpoint hinge's lateral footprint tiny —
    /// the preset for exercising one knob's sub-metric in isolation.
    pub fn dash_field(scene_id: &str, length: usize, speed: f64) -> ScenarioSpec {
        let x_to = speed * (length.max(1) - 1) as f64 + 20.0;
        let mut elements = Vec::new();
        let mut x = -18.0;
        while x < x_to {
            elements.push(dash(ClassLabel::Divider, (x, 0.0), (x + 1.0, 0.0)));
            elements.push(dash(ClassLabel::Boundary, (x, -7.0), (x + 1.0, -7.0)));
            elements.push(dash(ClassLabel::Boundary, (x, 7.0), (x + 1.0, 7.0)));
            elements.push(dash(ClassLabel::Crosswalk, (x, 3.2), (x + 1.0, 3.8)));
            x += 10.0;
        }
        spec(scene_id, length, EgoPath::Straight { speed }, elements)
    }

    /// Exactly one full-length line per class: the minimal scene for
    /// system-level experiments (drift, bias) where per-class matching must
    /// stay unambiguous under large lateral error.
    pub fn parallel_lanes(scene_id: &str, length: usize, speed: f64) -> ScenarioSpec {
        let x_to = speed * (length.max(1) - 1) as f64 + 20.0;
        spec(
            scene_id,
            length,
            EgoPath::Straight { speed },
            vec![
                collinear_line(ClassLabel::Divider, 0.0, -20.0, x_to, 2.0),
                collinear_line(ClassLabel::Boundary, -7.0, -20.0, x_to, 2.0),
                collinear_line(ClassLabel::Crosswalk, 7.0, -20.0, x_to, 2.0),
            ],
        )
    }
}
