//! Identity across frames: per-frame assignment of predictions to ground
//! truth (Chamfer cost + Hungarian), and ground-truth-mediated association
//! of predictions across a frame pair.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::config::EvalConfig;
use crate::geometry::{PolyLine2D, Point2D, RigidPose2D};
use crate::seq::Frame;

/// Semantic class of a map element. The three standard classes order before
/// any custom label, so reports list them first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Divider,
    Boundary,
    Crosswalk,
    #[serde(untagged)]
    Other(String),
}

impl ClassLabel {
    pub fn name(&self) -> &str {
        match self {
            ClassLabel::Divider => "divider",
            ClassLabel::Boundary => "boundary",
            ClassLabel::Crosswalk => "crosswalk",
            ClassLabel::Other(s) => s,
        }
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "divider" => ClassLabel::Divider,
            "boundary" => ClassLabel::Boundary,
            "crosswalk" => ClassLabel::Crosswalk,
            other => ClassLabel::Other(other.to_string()),
        })
    }
}

/// One vectorized map element. Predictions carry a confidence `score` and no
/// `gt_track_id`; ground truth carries a `gt_track_id` and no score.
#[derive(Debug, Clone, PartialEq)]
pub struct MapElement {
    pub id: String,
    pub class: ClassLabel,
    pub geometry: PolyLine2D,
    pub score: Option<f64>,
    pub gt_track_id: Option<String>,
}

/// Symmetric Chamfer distance between two polylines, each densified to
/// `resolution` arc-length-uniform points: the mean nearest-neighbor
/// distance in each direction, averaged.
pub fn chamfer_cost(a: &PolyLine2D, b: &PolyLine2D, resolution: usize) -> f64 {
    let pa = a.densify(resolution);
    let pb = b.densify(resolution);
    (mean_nn(&pa, &pb) + mean_nn(&pb, &pa)) / 2.0
}

fn mean_nn(from: &[Point2D], to: &[Point2D]) -> f64 {
    let mut sum = 0.0;
    for p in from {
        let mut best = f64::INFINITY;
        for q in to {
            let d2 = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
            if d2 < best {
                best = d2;
            }
        }
        sum += best.sqrt();
    }
    sum / from.len() as f64
}

/// Minimum-cost one-to-one assignment on an n×m matrix where
/// `f64::INFINITY` marks forbidden pairs. Among all assignments of maximum
/// cardinality over finite entries, returns one of minimum total cost; rows
/// and columns with no finite entry stay unassigned. Ties break
/// deterministically toward low indices (fixed ascending scan order), so
/// identical inputs always produce identical output. Returns (row, col)
/// pairs sorted by row.
///
/// Successive shortest augmenting paths: each round runs Bellman-Ford over
/// the residual graph from every unmatched row and augments along the
/// cheapest path to a free column. Shortest-path augmentation keeps every
/// intermediate matching cost-optimal for its size, so stopping when no
/// path remains yields the max-cardinality optimum; Bellman-Ford (rather
/// than Dijkstra with potentials) keeps negative costs legal at matrix
/// sizes where the extra passes are irrelevant.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    assert!(
        cost.iter().all(|row| row.len() == m),
        "cost matrix must be rectangular"
    );
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut col_of: Vec<Option<usize>> = vec![None; n];
    let mut row_of: Vec<Option<usize>> = vec![None; m];

    loop {
        let mut dist_row = vec![f64::INFINITY; n];
        let mut dist_col = vec![f64::INFINITY; m];
        let mut parent_of_col = vec![usize::MAX; m]; // row that reaches the column
        for (i, d) in dist_row.iter_mut().enumerate() {
            if col_of[i].is_none() {
                *d = 0.0;
            }
        }
        // Longest simple alternating path touches n+m nodes; the residual
        // graph of a cost-optimal matching has no negative cycle, so this
        // many passes always reach a fixpoint.
        for _ in 0..=n + m {
            let mut changed = false;
            for i in 0..n {
                if !dist_row[i].is_finite() {
                    continue;
                }
                for j in 0..m {
                    let c = cost[i][j];
                    if !c.is_finite() || col_of[i] == Some(j) {
                        continue;
                    }
                    let nd = dist_row[i] + c;
                    if nd < dist_col[j] {
                        dist_col[j] = nd;
                        parent_of_col[j] = i;
                        changed = true;
                    }
                }
            }
            for j in 0..m {
                if !dist_col[j].is_finite() {
                    continue;
                }
                if let Some(r) = row_of[j] {
                    let nd = dist_col[j] - cost[r][j];
                    if nd < dist_row[r] {
                        dist_row[r] = nd;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut target: Option<usize> = None;
        for j in 0..m {
            if row_of[j].is_none() && dist_col[j].is_finite() {
                if target.map_or(true, |t| dist_col[j] < dist_col[t]) {
                    target = Some(j);
                }
            }
        }
        let Some(mut j) = target else { break };
        // Flip the alternating path: each step matches (parent row → j) and
        // moves on to the column that row previously occupied.
        loop {
            let i = parent_of_col[j];
            let freed = col_of[i];
            col_of[i] = Some(j);
            row_of[j] = Some(i);
            match freed {
                Some(prev) => j = prev,
                None => break, // reached a row that was unmatched
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = col_of
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| (i, j)))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Total cost of an assignment on `cost`.
pub fn assignment_cost(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| cost[i][j]).sum()
}

/// One matched (prediction, ground truth) pair within a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub pred_id: String,
    pub gt_track_id: String,
    pub cost: f64,
}

/// Assignment of one frame's predictions to its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMatch {
    pub frame_index: u64,
    pub pairs: Vec<MatchPair>,
    pub unmatched_predictions: Vec<String>,
    pub unmatched_gt: Vec<String>,
}

impl FrameMatch {
    /// gt_track_id → prediction index lookup is frequent downstream.
    pub fn gt_to_pred(&self) -> BTreeMap<&str, &str> {
        self.pairs
            .iter()
            .map(|p| (p.gt_track_id.as_str(), p.pred_id.as_str()))
            .collect()
    }
}

/// Matches one frame's predictions to its ground truth: Chamfer cost within
/// a class, cross-class pairs forbidden, assignments costlier than
/// `config.match_gate` discarded to unmatched. Because cross-class cost is
/// infinite the assignment decomposes exactly into per-class subproblems,
/// which is how it is computed.
pub fn match_frame(frame: &Frame, config: &EvalConfig) -> FrameMatch {
    let mut pairs = Vec::new();
    let mut matched_preds = vec![false; frame.predictions.len()];
    let mut matched_gt = vec![false; frame.ground_truth.len()];

    let classes: BTreeSet<&ClassLabel> = frame
        .predictions
        .iter()
        .map(|e| &e.class)
        .chain(frame.ground_truth.iter().map(|e| &e.class))
        .collect();

    for class in classes {
        let pred_idx: Vec<usize> = (0..frame.predictions.len())
            .filter(|&i| frame.predictions[i].class == *class)
            .collect();
        let gt_idx: Vec<usize> = (0..frame.ground_truth.len())
            .filter(|&i| frame.ground_truth[i].class == *class)
            .collect();
        if pred_idx.is_empty() || gt_idx.is_empty() {
            continue;
        }
        let cost: Vec<Vec<f64>> = pred_idx
            .iter()
            .map(|&pi| {
                gt_idx
                    .iter()
                    .map(|&gi| {
                        chamfer_cost(
                            &frame.predictions[pi].geometry,
                            &frame.ground_truth[gi].geometry,
                            config.n_samples,
                        )
                    })
                    .collect()
            })
            .collect();
        for (r, c) in hungarian(&cost) {
            if cost[r][c] > config.match_gate {
                continue;
            }
            let pi = pred_idx[r];
            let gi = gt_idx[c];
            matched_preds[pi] = true;
            matched_gt[gi] = true;
            pairs.push(MatchPair {
                pred_id: frame.predictions[pi].id.clone(),
                gt_track_id: frame.ground_truth[gi]
                    .gt_track_id
                    .clone()
                    .expect("ground-truth elements carry track ids (validated on load)"),
                cost: cost[r][c],
            });
        }
    }

    FrameMatch {
        frame_index: frame.frame_index,
        pairs,
        unmatched_predictions: frame
            .predictions
            .iter()
            .zip(&matched_preds)
            .filter(|(_, &m)| !m)
            .map(|(e, _)| e.id.clone())
            .collect(),
        unmatched_gt: frame
            .ground_truth
            .iter()
            .zip(&matched_gt)
            .filter(|(_, &m)| !m)
            .map(|(e, _)| e.gt_track_id.clone().unwrap_or_else(|| e.id.clone()))
            .collect(),
    }
}

/// A prediction's view of one map element: geometry plus confidence.
#[derive(Debug, Clone)]
pub struct ElementView {
    pub geometry: PolyLine2D,
    pub score: Option<f64>,
}

/// One ground-truth instance matched in both frames of a sampled pair, with
/// the prediction that represents it on each side.
#[derive(Debug, Clone)]
pub struct MatchedInstancePair {
    pub gt_track_id: String,
    pub class: ClassLabel,
    pub current: ElementView,
    pub history: ElementView,
    pub pose_current: RigidPose2D,
    pub pose_history: RigidPose2D,
}

/// A ground-truth instance present in both frames but matched in only one:
/// the model detected it on one side of the pair and dropped it on the
/// other.
#[derive(Debug, Clone)]
pub struct OneSidedInstance {
    pub gt_track_id: String,
    pub class: ClassLabel,
    pub matched_score: Option<f64>,
    pub matched_in_current: bool,
}

/// The cross-frame association for one sampled pair.
#[derive(Debug, Clone, Default)]
pub struct PairAssociation {
    pub matched: Vec<MatchedInstancePair>,
    pub one_sided: Vec<OneSidedInstance>,
}

/// Transfers ground-truth identity across a frame pair: a gt_track_id
/// matched in both frames yields a [`MatchedInstancePair`]; one matched in a
/// single frame counts as one-sided only if its ground truth exists in both
/// frames (an instance whose ground truth itself left the window between the
/// frames is not evaluable and is skipped); instances matched in neither
/// frame are skipped. Output is ordered by gt_track_id.
pub fn associate_pair(
    current: &Frame,
    history: &Frame,
    current_match: &FrameMatch,
    history_match: &FrameMatch,
) -> PairAssociation {
    let pred_by_id = |frame: &Frame, id: &str| -> ElementView {
        let e = frame
            .predictions
            .iter()
            .find(|e| e.id == id)
            .expect("matched prediction id exists in its frame");
        ElementView {
            geometry: e.geometry.clone(),
            score: e.score,
        }
    };
    fn gt_ids(frame: &Frame) -> BTreeSet<&str> {
        frame
            .ground_truth
            .iter()
            .filter_map(|e| e.gt_track_id.as_deref())
            .collect()
    }

    let cur_map = current_match.gt_to_pred();
    let hist_map = history_match.gt_to_pred();
    let gt_current = gt_ids(current);
    let gt_history = gt_ids(history);

    let mut out = PairAssociation::default();
    let all_ids: BTreeSet<&str> = cur_map.keys().chain(hist_map.keys()).copied().collect();
    for id in all_ids {
        let class = current
            .ground_truth
            .iter()
            .chain(&history.ground_truth)
            .find(|e| e.gt_track_id.as_deref() == Some(id))
            .map(|e| e.class.clone())
            .expect("matched gt id exists in one of the frames");
        match (cur_map.get(id), hist_map.get(id)) {
            (Some(&cur_pred), Some(&hist_pred)) => out.matched.push(MatchedInstancePair {
                gt_track_id: id.to_string(),
                class,
                current: pred_by_id(current, cur_pred),
                history: pred_by_id(history, hist_pred),
                pose_current: current.ego_pose,
                pose_history: history.ego_pose,
            }),
            (Some(&cur_pred), None) => {
                if gt_history.contains(id) {
                    out.one_sided.push(OneSidedInstance {
                        gt_track_id: id.to_string(),
                        class,
                        matched_score: pred_by_id(current, cur_pred).score,
                        matched_in_current: true,
                    });
                }
            }
            (None, Some(&hist_pred)) => {
                if gt_current.contains(id) {
                    out.one_sided.push(OneSidedInstance {
                        gt_track_id: id.to_string(),
                        class,
                        matched_score: pred_by_id(history, hist_pred).score,
                        matched_in_current: false,
                    });
                }
            }
            (None, None) => unreachable!("id came from one of the match maps"),
        }
    }
    out
}
