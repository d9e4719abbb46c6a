//! Cross-cutting properties checked against independent oracles: the matcher
//! against an exhaustive assignment search, aggregation and matching against
//! order invariance, file I/O against round-tripping, and the perturbation
//! knobs against closed-form expectations.

mod common;

use std::collections::BTreeSet;

use common::oracle_assignment;
use mapstab::config::EvalConfig;
use mapstab::eval::evaluate;
use mapstab::geometry::{PerceptionRange, Point2D, PolyLine2D, RigidPose2D};
use mapstab::io::{load_sequences, load_split, write_sequences, SequenceParts};
use mapstab::matching::{assignment_cost, hungarian, match_frame, ClassLabel, MapElement};
use mapstab::metrics::{aggregate, InstanceStability};
use mapstab::seq::Frame;
use mapstab::synth::{
    generate_gt, perturb, presets, EgoPath, PerturbationSpec, ScenarioSpec, TemplateElement,
};
use proptest::prelude::*;

fn identity_pose() -> RigidPose2D {
    RigidPose2D {
        x: 0.0,
        y: 0.0,
        yaw: 0.0,
    }
}

/// Rectangular cost matrices up to 7x7 mixing small integer costs (so sums
/// are exact in f64 regardless of order) with forbidden pairs.
fn cost_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    let entry = prop_oneof![
        4 => (0u32..=100).prop_map(f64::from),
        1 => Just(f64::INFINITY),
    ];
    (1usize..=7, 1usize..=7).prop_flat_map(move |(rows, cols)| {
        proptest::collection::vec(proptest::collection::vec(entry.clone(), cols), rows)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matcher_agrees_with_exhaustive_assignment_oracle(cost in cost_matrix()) {
        let pairs = hungarian(&cost);

        let mut rows_seen = BTreeSet::new();
        let mut cols_seen = BTreeSet::new();
        for &(r, c) in &pairs {
            prop_assert!(r < cost.len() && c < cost[0].len());
            prop_assert!(rows_seen.insert(r), "row {r} assigned twice");
            prop_assert!(cols_seen.insert(c), "column {c} assigned twice");
            prop_assert!(cost[r][c].is_finite(), "forbidden pair ({r},{c}) chosen");
        }

        let (cardinality, best_cost) = oracle_assignment(&cost);
        prop_assert_eq!(pairs.len(), cardinality);
        // Integer entries make both sums exact, so exact equality is fair.
        prop_assert_eq!(assignment_cost(&cost, &pairs), best_cost);
    }
}

fn lateral_line(id: String, y: f64, gt_track_id: Option<String>) -> MapElement {
    let score = if gt_track_id.is_some() { None } else { Some(0.9) };
    MapElement {
        id,
        class: ClassLabel::Divider,
        geometry: PolyLine2D::new(vec![
            Point2D { x: -10.0, y },
            Point2D { x: 10.0, y: y + 0.1 },
        ])
        .unwrap(),
        score,
        gt_track_id,
    }
}

proptest! {
    /// Matching reads elements by identity, not by list position: shuffling
    /// the prediction list changes neither the matched (prediction, track)
    /// pairs nor the assignment cost.
    #[test]
    fn matching_ignores_prediction_order(
        lateral_errors in proptest::collection::vec(
            proptest::option::weighted(0.75, -1.0f64..1.0),
            1..=4,
        ),
        extra in 0usize..=2,
        ranks in proptest::collection::vec(any::<u32>(), 6),
    ) {
        // One GT line per slot at y = 4i; a prediction next to it when the
        // slot drew Some; distractors far outside the match gate.
        let mut predictions = Vec::new();
        let ground_truth: Vec<MapElement> = lateral_errors
            .iter()
            .enumerate()
            .map(|(i, _)| {
                lateral_line(format!("g{i}"), 4.0 * i as f64, Some(format!("t{i}")))
            })
            .collect();
        for (i, dy) in lateral_errors.iter().enumerate() {
            if let Some(dy) = dy {
                predictions.push(lateral_line(format!("pred-{i}"), 4.0 * i as f64 + dy, None));
            }
        }
        for k in 0..extra {
            predictions.push(lateral_line(format!("far-{k}"), 30.0 + 5.0 * k as f64, None));
        }

        let frame = |preds: Vec<MapElement>| Frame {
            frame_index: 0,
            timestamp: 0.0,
            ego_pose: identity_pose(),
            predictions: preds,
            ground_truth: ground_truth.clone(),
        };
        let mut shuffled = predictions.clone();
        let mut keyed: Vec<(u32, usize)> = shuffled
            .iter()
            .enumerate()
            .map(|(i, _)| (ranks[i], i))
            .collect();
        keyed.sort();
        shuffled = keyed.iter().map(|&(_, i)| shuffled[i].clone()).collect();

        let config = EvalConfig::default();
        let original = match_frame(&frame(predictions), &config);
        let permuted = match_frame(&frame(shuffled), &config);

        let pair_set = |m: &mapstab::matching::FrameMatch| -> BTreeSet<(String, String)> {
            m.pairs
                .iter()
                .map(|p| (p.pred_id.clone(), p.gt_track_id.clone()))
                .collect()
        };
        prop_assert_eq!(pair_set(&original), pair_set(&permuted));
        let total = |m: &mapstab::matching::FrameMatch| -> f64 {
            m.pairs.iter().map(|p| p.cost).sum()
        };
        prop_assert!((total(&original) - total(&permuted)).abs() < 1e-12);
        let unmatched = |m: &mapstab::matching::FrameMatch| -> BTreeSet<String> {
            m.unmatched_predictions.iter().cloned().collect()
        };
        prop_assert_eq!(unmatched(&original), unmatched(&permuted));
    }
}

fn instance() -> impl Strategy<Value = InstanceStability> {
    (
        0usize..3,
        prop_oneof![Just(1.0), Just(0.5)],
        proptest::option::of(0.0f64..=1.0),
        proptest::option::of(0.0f64..=1.0),
        0.0f64..=1.0,
        any::<bool>(),
        0u32..40,
    )
        .prop_map(|(class, presence, loc, shape, stability, one_sided, track)| {
            let class = [
                ClassLabel::Divider,
                ClassLabel::Boundary,
                ClassLabel::Crosswalk,
            ][class]
                .clone();
            InstanceStability {
                gt_track_id: format!("t{track}"),
                class,
                presence,
                loc,
                shape,
                stability,
                one_sided,
            }
        })
}

fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() < 1e-12,
        _ => false,
    }
}

proptest! {
    /// Report aggregation is a set operation: instance order never shifts a
    /// mean by more than accumulated-rounding noise.
    #[test]
    fn aggregation_ignores_instance_order(
        instances in proptest::collection::vec(instance(), 0..60),
        ranks in proptest::collection::vec(any::<u32>(), 60),
    ) {
        let mut keyed: Vec<(u32, usize)> = instances
            .iter()
            .enumerate()
            .map(|(i, _)| (ranks[i], i))
            .collect();
        keyed.sort();
        let permuted: Vec<InstanceStability> =
            keyed.iter().map(|&(_, i)| instances[i].clone()).collect();

        let config = EvalConfig::default();
        let a = aggregate(&instances, 10, 0, &config);
        let b = aggregate(&permuted, 10, 0, &config);

        prop_assert_eq!(
            a.per_class.keys().collect::<Vec<_>>(),
            b.per_class.keys().collect::<Vec<_>>()
        );
        for (class, ca) in &a.per_class {
            let cb = &b.per_class[class];
            prop_assert!((ca.presence_mean - cb.presence_mean).abs() < 1e-12);
            prop_assert!((ca.loc_mean - cb.loc_mean).abs() < 1e-12);
            prop_assert!((ca.shape_mean - cb.shape_mean).abs() < 1e-12);
            prop_assert!((ca.stability_mean - cb.stability_mean).abs() < 1e-12);
            prop_assert!(close_opt(ca.stability_mean_matched, cb.stability_mean_matched));
            prop_assert_eq!(ca.instance_count, cb.instance_count);
            prop_assert_eq!(ca.one_sided_count, cb.one_sided_count);
        }
        prop_assert!(close_opt(a.mas, b.mas));
        prop_assert!(close_opt(a.mas_matched_only, b.mas_matched_only));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Write → read is the identity, and splitting a corpus into prediction
    /// and ground-truth files loses nothing.
    #[test]
    fn file_roundtrip_preserves_sequences(
        seed in any::<u64>(),
        jitter in 0.0f64..1.0,
        flicker in 0.0f64..0.5,
        dropout in 0.0f64..0.3,
        length in 3usize..8,
    ) {
        let pert = PerturbationSpec {
            jitter_sigma: jitter,
            flicker_prob: flicker,
            dropout_prob: dropout,
            ..PerturbationSpec::default()
        };
        let sequences: Vec<_> = (0..2)
            .map(|i| {
                let spec = presets::parallel_lanes(&format!("scene-{i}"), length, 2.0);
                perturb(&generate_gt(&spec), &pert, seed)
            })
            .collect();

        let dir = tempfile::tempdir().unwrap();
        let combined = dir.path().join("combined.jsonl");
        let pred = dir.path().join("pred.jsonl");
        let gt = dir.path().join("gt.jsonl");
        write_sequences(&combined, &sequences, SequenceParts::Combined).unwrap();
        write_sequences(&pred, &sequences, SequenceParts::PredictionsOnly).unwrap();
        write_sequences(&gt, &sequences, SequenceParts::GroundTruthOnly).unwrap();

        let from_combined = load_sequences(&combined).unwrap();
        prop_assert_eq!(&from_combined, &sequences);
        let from_split = load_split(&pred, &gt).unwrap();
        prop_assert_eq!(&from_split, &sequences);
    }
}

/// Static ego plus a template whose vertices sit exactly on the resample
/// grid turns lateral jitter into a closed form: each grid ordinate differs
/// by the difference of two independent N(0, sigma^2) draws, so the mean
/// absolute deviation is E|N(0, 2 sigma^2)| = 2 sigma / sqrt(pi) and the
/// localization score is 1 minus that over beta.
#[test]
fn jitter_localization_matches_analytic_expectation() {
    let sigma = 0.5;
    let config = EvalConfig::default();
    let n = config.n_samples;

    let lo = -14.85;
    let hi = 14.85;
    let step = (hi - lo) / (n - 1) as f64;
    let points: Vec<Point2D> = (0..n)
        .map(|i| Point2D {
            x: if i == n - 1 { hi } else { lo + step * i as f64 },
            y: 0.0,
        })
        .collect();
    let spec = ScenarioSpec {
        scene_id: "jitter-oracle".into(),
        length: 50,
        ego_path: EgoPath::Straight { speed: 0.0 },
        elements: vec![TemplateElement {
            class: ClassLabel::Divider,
            points,
        }],
        range: PerceptionRange::standard(),
        frame_dt: 0.1,
        seed: 0,
    };
    let pert = PerturbationSpec {
        jitter_sigma: sigma,
        ..PerturbationSpec::default()
    };
    let seq = perturb(&generate_gt(&spec), &pert, 11);

    let report = evaluate(&[seq], &config).unwrap().stability;
    let divider = &report.per_class[&ClassLabel::Divider];
    assert_eq!(divider.one_sided_count, 0, "jitter must not break matching");

    let expected = 1.0 - (2.0 * sigma / std::f64::consts::PI.sqrt()) / config.beta;
    // Per pair: mean of n i.i.d. folded normals; pairs share frames, which
    // inflates the standard error of the 48-pair mean by at most sqrt(3).
    let var_fold = 2.0 * sigma * sigma * (1.0 - 2.0 / std::f64::consts::PI);
    let se_pair = (var_fold / n as f64).sqrt() / config.beta;
    let tolerance = 3.0 * se_pair / (48.0f64).sqrt() * 3.0f64.sqrt();
    let measured = divider.loc_mean;
    assert!(
        (measured - expected).abs() < tolerance,
        "loc mean {measured} vs expected {expected} (tolerance {tolerance})"
    );
}

/// Score flicker hits presence and nothing else: each side of a pair drops
/// below tau independently with probability p, so presence averages
/// 1 - p(1 - p). Geometry is untouched, so localization and shape stay 1.
#[test]
fn flicker_presence_matches_enumeration() {
    let p = 0.3;
    let pert = PerturbationSpec {
        flicker_prob: p,
        ..PerturbationSpec::default()
    };
    let sequences: Vec<_> = (0..6)
        .map(|i| {
            let spec = presets::parallel_lanes(&format!("flick-{i}"), 50, 2.0);
            perturb(&generate_gt(&spec), &pert, 0)
        })
        .collect();

    let config = EvalConfig::default();
    let report = evaluate(&sequences, &config).unwrap().stability;

    let mut presence_sum = 0.0;
    let mut classes = 0.0;
    for class_stats in report.per_class.values() {
        presence_sum += class_stats.presence_mean;
        classes += 1.0;
        let loc = class_stats.loc_mean;
        let shape = class_stats.shape_mean;
        assert!((loc - 1.0).abs() < 1e-9, "flicker moved localization: {loc}");
        assert!((shape - 1.0).abs() < 1e-9, "flicker moved shape: {shape}");
    }
    let measured = presence_sum / classes;

    let expected = 1.0 - p * (1.0 - p);
    // presence = 1 - B/2 with B ~ Bernoulli(2p(1-p)) per instance pair.
    let q = 2.0 * p * (1.0 - p);
    let per_obs_sd = 0.5 * (q * (1.0 - q)).sqrt();
    let observations = (6 * 48 * 3) as f64;
    let tolerance = 3.0 * per_obs_sd / observations.sqrt() * 3.0f64.sqrt();
    assert!(
        (measured - expected).abs() < tolerance,
        "presence mean {measured} vs expected {expected} (tolerance {tolerance})"
    );
}
