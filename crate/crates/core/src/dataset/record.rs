use serde::{Deserialize, Serialize};
use xdisp_sim::{AnchorPose, ClothSpec, Vec3};

use crate::error::{CoreError, Result};

/// One successful demonstration.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoRecord {
    /// Settled cloth before manipulation, one point per mesh vertex.
    pub p_a: Vec<Vec3>,
    /// Cloth just before release, index-aligned with `p_a`.
    pub p_a_goal: Vec<Vec3>,
    /// Anchor surface samples.
    pub p_b: Vec<Vec3>,
    pub meta: RecordMeta,
}

/// Everything about a record except its point arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub cloth: ClothSpec,
    pub anchor_pose: AnchorPose,
    pub gripper_indices: [usize; 2],
    pub loop_vertex_ids: Vec<Vec<usize>>,
    /// Hole the demonstration hung the cloth by.
    pub hole: usize,
    pub goal: Vec3,
}

impl DemoRecord {
    pub fn validate(&self) -> Result<()> {
        let n = self.p_a.len();
        if n == 0 {
            return Err(CoreError::Empty("action cloud"));
        }
        if self.p_b.is_empty() {
            return Err(CoreError::Empty("anchor cloud"));
        }
        if self.p_a_goal.len() != n {
            return Err(CoreError::Shape {
                op: "demo record",
                expected: vec![n, 3],
                got: vec![self.p_a_goal.len(), 3],
            });
        }
        let bad = self
            .meta
            .gripper_indices
            .iter()
            .chain(self.meta.loop_vertex_ids.iter().flatten())
            .find(|&&i| i >= n);
        if let Some(&i) = bad {
            return Err(CoreError::Config(format!(
                "vertex index {i} out of range for {n} points"
            )));
        }
        if self.meta.hole >= self.meta.loop_vertex_ids.len() {
            return Err(CoreError::Config(format!(
                "hole {} but only {} loops",
                self.meta.hole,
                self.meta.loop_vertex_ids.len()
            )));
        }
        Ok(())
    }
}

/// Per-point `goal - initial`.
pub fn compute_gt_displacements(demo: &DemoRecord) -> Result<Vec<Vec3>> {
    displacements(&demo.p_a, &demo.p_a_goal)
}

pub fn displacements(from: &[Vec3], to: &[Vec3]) -> Result<Vec<Vec3>> {
    if from.len() != to.len() {
        return Err(CoreError::Shape {
            op: "displacements",
            expected: vec![from.len(), 3],
            got: vec![to.len(), 3],
        });
    }
    Ok(from
        .iter()
        .zip(to)
        .map(|(a, b)| [b[0] - a[0], b[1] - a[1], b[2] - a[2]])
        .collect())
}
