//! Planar primitives: points, polylines, SE(2) poses, the perception window,
//! and the alignment kernel (transform → clip → resample) that every
//! geometric sub-metric is built on.
//!
//! Conventions: the ego frame has x pointing along the resampling axis and y
//! lateral to it; yaw is counter-clockwise radians in (−π, π]. All lengths
//! are meters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two vertices closer than this (Euclidean, meters) count as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-9;

/// Minimum usable x-overlap (meters) for resampling a pair of polylines.
pub const MIN_SPAN: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("polyline needs at least 2 vertices, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("consecutive duplicate vertices at index {0} (closer than {DUPLICATE_TOL} m)")]
    DuplicateVertex(usize),
    #[error("curvature needs at least 3 points, got {0}")]
    TooFewForCurvature(usize),
    #[error("zero-length segment at index {0}")]
    DegenerateSegment(usize),
    #[error("invalid perception range: {0}")]
    InvalidRange(String),
    #[error("resampled rows must have equal length >= 2 and strictly increasing xs")]
    MalformedResample,
}

/// A point in the ego-frame ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    pub fn dist(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for Point2D {
    fn from((x, y): (f64, f64)) -> Self {
        Point2D { x, y }
    }
}

impl From<Point2D> for (f64, f64) {
    fn from(p: Point2D) -> Self {
        (p.x, p.y)
    }
}

/// An ordered, open polyline with at least two vertices, finite coordinates,
/// and no consecutive duplicate vertices. Closed elements (e.g. crosswalk
/// rings) are represented by repeating the first vertex at the end, which is
/// fine because only *consecutive* duplicates are degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PolyLine2D {
    points: Vec<Point2D>,
}

impl PolyLine2D {
    pub fn new(points: Vec<Point2D>) -> Result<Self, GeometryError> {
        if points.len() < 2 {
            return Err(GeometryError::TooFewPoints(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
        }
        for i in 1..points.len() {
            if points[i - 1].dist(&points[i]) <= DUPLICATE_TOL {
                return Err(GeometryError::DuplicateVertex(i));
            }
        }
        Ok(PolyLine2D { points })
    }

    pub fn points(&self) -> &[Point2D] {
        &self.points
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(&w[1])).sum()
    }

    /// `resolution` points equally spaced by arc length, endpoints included.
    pub fn densify(&self, resolution: usize) -> Vec<Point2D> {
        assert!(resolution >= 2, "densify needs resolution >= 2");
        let total = self.arc_length();
        let step = total / (resolution - 1) as f64;
        let mut out = Vec::with_capacity(resolution);
        out.push(self.points[0]);
        let mut seg = 0; // current segment index
        let mut seg_start = 0.0; // arc length at points[seg]
        for i in 1..resolution - 1 {
            let target = step * i as f64;
            loop {
                let seg_len = self.points[seg].dist(&self.points[seg + 1]);
                if seg_start + seg_len >= target || seg + 2 == self.points.len() {
                    let t = ((target - seg_start) / seg_len).clamp(0.0, 1.0);
                    let a = self.points[seg];
                    let b = self.points[seg + 1];
                    out.push(Point2D::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
                    break;
                }
                seg_start += seg_len;
                seg += 1;
            }
        }
        out.push(*self.points.last().unwrap());
        out
    }
}

impl TryFrom<Vec<(f64, f64)>> for PolyLine2D {
    type Error = GeometryError;

    fn try_from(raw: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        PolyLine2D::new(raw.into_iter().map(Point2D::from).collect())
    }
}

impl From<PolyLine2D> for Vec<(f64, f64)> {
    fn from(poly: PolyLine2D) -> Self {
        poly.points.into_iter().map(<(f64, f64)>::from).collect()
    }
}

/// An SE(2) ego pose: world position plus heading, yaw normalized to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPose2D {
    pub x: f64,
    pub y: f64,
    #[serde(deserialize_with = "deserialize_yaw")]
    pub yaw: f64,
}

fn deserialize_yaw<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(normalize_angle(f64::deserialize(d)?))
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

impl RigidPose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        RigidPose2D {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn identity() -> Self {
        RigidPose2D::new(0.0, 0.0, 0.0)
    }

    /// Ego-frame point → world frame.
    pub fn point_to_world(&self, p: Point2D) -> Point2D {
        let (s, c) = self.yaw.sin_cos();
        Point2D::new(c * p.x - s * p.y + self.x, s * p.x + c * p.y + self.y)
    }

    /// World-frame point → ego frame.
    pub fn point_from_world(&self, p: Point2D) -> Point2D {
        let (s, c) = self.yaw.sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        Point2D::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// `self ∘ inner`: the pose of `inner`'s frame as seen through `self`,
    /// i.e. `compose(a, b).point_to_world(p) == a.point_to_world(b.point_to_world(p))`.
    pub fn compose(&self, inner: &RigidPose2D) -> RigidPose2D {
        let t = self.point_to_world(Point2D::new(inner.x, inner.y));
        RigidPose2D::new(t.x, t.y, self.yaw + inner.yaw)
    }

    pub fn inverse(&self) -> RigidPose2D {
        let origin = self.point_from_world(Point2D::new(0.0, 0.0));
        RigidPose2D::new(origin.x, origin.y, -self.yaw)
    }
}

/// Re-expresses a polyline observed in the `from` ego frame in the `to` ego
/// frame, via the world frame.
pub fn transform_polyline(poly: &PolyLine2D, from: &RigidPose2D, to: &RigidPose2D) -> PolyLine2D {
    let points = poly
        .points()
        .iter()
        .map(|p| to.point_from_world(from.point_to_world(*p)))
        .collect();
    // A rigid map preserves pairwise distances, so validity carries over.
    PolyLine2D::new(points).expect("rigid transform preserves vertex separation")
}

/// The axis-aligned ego-frame window map elements are evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionRange {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl PerceptionRange {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, GeometryError> {
        let all = [x_min, x_max, y_min, y_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidRange("non-finite bound".into()));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::InvalidRange(format!(
                "empty extent: x [{x_min}, {x_max}], y [{y_min}, {y_max}]"
            )));
        }
        Ok(PerceptionRange {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    /// The standard 30 m × 60 m evaluation window.
    pub fn standard() -> Self {
        PerceptionRange {
            x_min: -15.0,
            x_max: 15.0,
            y_min: -30.0,
            y_max: 30.0,
        }
    }

    pub fn contains(&self, p: &Point2D) -> bool {
        self.x_min <= p.x && p.x <= self.x_max && self.y_min <= p.y && p.y <= self.y_max
    }
}

impl Default for PerceptionRange {
    fn default() -> Self {
        PerceptionRange::standard()
    }
}

/// Point-retention clipping: keeps the subsequence of vertices inside the
/// window (bounds inclusive). Segments are not split at the boundary, so a
/// vertex-sparse polyline can vanish even when an edge crosses the window.
/// Retention can bring formerly non-adjacent coincident vertices next to
/// each other; such runs collapse to their first vertex. Returns `None` when
/// fewer than two vertices survive.
pub fn clip_to_range(poly: &PolyLine2D, range: &PerceptionRange) -> Option<PolyLine2D> {
    let mut kept: Vec<Point2D> = Vec::new();
    for p in poly.points() {
        if range.contains(p) {
            match kept.last() {
                Some(last) if last.dist(p) <= DUPLICATE_TOL => {}
                _ => kept.push(*p),
            }
        }
    }
    if kept.len() < 2 {
        return None;
    }
    Some(PolyLine2D::new(kept).expect("retained subsequence is valid"))
}

/// Two polylines sampled at a shared, strictly increasing x grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledPair {
    xs: Vec<f64>,
    y_current: Vec<f64>,
    y_history: Vec<f64>,
}

impl ResampledPair {
    /// Builds a pair from raw rows; mostly useful for tests and tooling
    /// (the pipeline goes through [`resample_pair`]).
    pub fn from_parts(
        xs: Vec<f64>,
        y_current: Vec<f64>,
        y_history: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let n = xs.len();
        if n < 2 || y_current.len() != n || y_history.len() != n {
            return Err(GeometryError::MalformedResample);
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GeometryError::MalformedResample);
        }
        if xs
            .iter()
            .chain(&y_current)
            .chain(&y_history)
            .any(|v| !v.is_finite())
        {
            return Err(GeometryError::MalformedResample);
        }
        Ok(ResampledPair {
            xs,
            y_current,
            y_history,
        })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn y_current(&self) -> &[f64] {
        &self.y_current
    }

    pub fn y_history(&self) -> &[f64] {
        &self.y_history
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn current_points(&self) -> Vec<Point2D> {
        self.xs
            .iter()
            .zip(&self.y_current)
            .map(|(&x, &y)| Point2D::new(x, y))
            .collect()
    }

    pub fn history_points(&self) -> Vec<Point2D> {
        self.xs
            .iter()
            .zip(&self.y_history)
            .map(|(&x, &y)| Point2D::new(x, y))
            .collect()
    }
}

/// Sorts vertices by x and merges groups of (near-)equal x by averaging
/// their y, yielding a strict function y(x). Returns parallel (xs, ys).
fn monotonize(poly: &PolyLine2D) -> (Vec<f64>, Vec<f64>) {
    let mut pts: Vec<Point2D> = poly.points().to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut xs = Vec::with_capacity(pts.len());
    let mut ys = Vec::with_capacity(pts.len());
    let mut i = 0;
    while i < pts.len() {
        let group_x = pts[i].x;
        let mut sum_y = 0.0;
        let mut count = 0usize;
        while i < pts.len() && pts[i].x - group_x <= DUPLICATE_TOL {
            sum_y += pts[i].y;
            count += 1;
            i += 1;
        }
        xs.push(group_x);
        ys.push(sum_y / count as f64);
    }
    (xs, ys)
}

/// Piecewise-linear y at `x` for a monotonized (xs, ys) table; `x` must lie
/// within [xs[0], xs[last]] up to floating-point slack.
fn interpolate_y(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    // First index with xs[idx] >= x; the segment is [idx-1, idx].
    let idx = xs.partition_point(|&v| v < x);
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let t = (x - x0) / (x1 - x0);
    ys[idx - 1] + t * (ys[idx] - ys[idx - 1])
}

/// Samples both polylines at `n` equally spaced x positions spanning their
/// common x-range [max(min x), min(max x)], after monotonizing each into a
/// function of x. Returns `None` when the common range is narrower than
/// [`MIN_SPAN`] (disjoint spans, or a near-vertical polyline).
pub fn resample_pair(current: &PolyLine2D, history: &PolyLine2D, n: usize) -> Option<ResampledPair> {
    assert!(n >= 2, "resample_pair needs n >= 2");
    let (cx, cy) = monotonize(current);
    let (hx, hy) = monotonize(history);
    let lo = cx[0].max(hx[0]);
    let hi = cx[cx.len() - 1].min(hx[hx.len() - 1]);
    if !(hi - lo).is_finite() || hi - lo < MIN_SPAN {
        return None;
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut xs = Vec::with_capacity(n);
    let mut y_current = Vec::with_capacity(n);
    let mut y_history = Vec::with_capacity(n);
    for i in 0..n {
        let x = if i == n - 1 { hi } else { lo + step * i as f64 };
        xs.push(x);
        y_current.push(interpolate_y(&cx, &cy, x));
        y_history.push(interpolate_y(&hx, &hy, x));
    }
    Some(ResampledPair {
        xs,
        y_current,
        y_history,
    })
}

/// Mean absolute turning angle of an ordered point list: for each interior
/// vertex, the angle between the incoming and outgoing segment directions
/// (arccos of the normalized dot product, clamped into [−1, 1]), averaged
/// over the len−2 interior vertices. Straight lines give 0; the tightest
/// possible reversal gives π.
pub fn curvature(points: &[Point2D]) -> Result<f64, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::TooFewForCurvature(points.len()));
    }
    let mut sum = 0.0;
    for j in 0..points.len() - 2 {
        let v1 = (points[j + 1].x - points[j].x, points[j + 1].y - points[j].y);
        let v2 = (
            points[j + 2].x - points[j + 1].x,
            points[j + 2].y - points[j + 1].y,
        );
        let n1 = v1.0.hypot(v1.1);
        let n2 = v2.0.hypot(v2.1);
        if n1 == 0.0 || n2 == 0.0 {
            return Err(GeometryError::DegenerateSegment(j + 1));
        }
        let cos = ((v1.0 * v2.0 + v1.1 * v2.1) / (n1 * n2)).clamp(-1.0, 1.0);
        sum += cos.acos();
    }
    Ok(sum / (points.len() - 2) as f64)
}
