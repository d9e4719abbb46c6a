//! In-memory sequence model: frames of predictions and ground truth under an
//! ego pose, grouped per scene. The wire format lives in [`crate::io`].

use crate::geometry::RigidPose2D;
use crate::matching::MapElement;

/// One timestamped observation of the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_index: u64,
    pub timestamp: f64,
    pub ego_pose: RigidPose2D,
    pub predictions: Vec<MapElement>,
    pub ground_truth: Vec<MapElement>,
}

/// All frames of one scene, ordered by strictly increasing `frame_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub scene_id: String,
    pub frames: Vec<Frame>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
