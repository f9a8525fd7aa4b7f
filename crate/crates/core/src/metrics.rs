//! Point-wise and distributional goal-prediction errors, and success rates.
//! All clouds are compared index-wise in the world frame.

use std::io::Write;

use serde::{Deserialize, Serialize};
use xdisp_sim::{EpisodeResult, Vec3};

use crate::error::{CoreError, Result};

/// Root mean squared Euclidean distance between corresponding points.
pub fn rmse(pred: &[Vec3], gt: &[Vec3]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(CoreError::Shape {
            op: "rmse",
            expected: vec![gt.len(), 3],
            got: vec![pred.len(), 3],
        });
    }
    if gt.is_empty() {
        return Err(CoreError::Empty("point cloud"));
    }
    let mut sum = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        sum += (p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2) + (p[2] - g[2]).powi(2);
    }
    Ok((sum / gt.len() as f64).sqrt())
}

fn min_rmse(target: &[Vec3], candidates: &[Vec<Vec3>], what: &'static str) -> Result<f64> {
    if candidates.is_empty() {
        return Err(CoreError::Empty(what));
    }
    let mut best = f64::INFINITY;
    for c in candidates {
        best = best.min(rmse(c, target)?);
    }
    Ok(best)
}

/// One ground-truth goal with the predictions sampled for its conditioning
/// input.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageCase {
    pub gt: Vec<Vec3>,
    pub predictions: Vec<Vec<Vec3>>,
}

/// Mean over ground truths of the best prediction's RMSE.
pub fn coverage_rmse(cases: &[CoverageCase]) -> Result<f64> {
    if cases.is_empty() {
        return Err(CoreError::Empty("coverage cases"));
    }
    let mut sum = 0.0;
    for c in cases {
        sum += min_rmse(&c.gt, &c.predictions, "prediction set")?;
    }
    Ok(sum / cases.len() as f64)
}

/// The valid goals for one cloth and every prediction conditioned on it.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionGroup {
    pub references: Vec<Vec<Vec3>>,
    pub predictions: Vec<Vec<Vec3>>,
}

/// Each prediction scores its nearest reference; scores are averaged per
/// cloth, then over cloths.
pub fn precision_rmse(groups: &[PrecisionGroup]) -> Result<f64> {
    if groups.is_empty() {
        return Err(CoreError::Empty("precision groups"));
    }
    let mut total = 0.0;
    for g in groups {
        if g.predictions.is_empty() {
            return Err(CoreError::Empty("prediction set"));
        }
        let mut sum = 0.0;
        for p in &g.predictions {
            sum += min_rmse(p, &g.references, "reference set")?;
        }
        total += sum / g.predictions.len() as f64;
    }
    Ok(total / groups.len() as f64)
}

pub fn success_fraction(flags: &[bool]) -> Result<f64> {
    if flags.is_empty() {
        return Err(CoreError::Empty("episode results"));
    }
    Ok(flags.iter().filter(|&&s| s).count() as f64 / flags.len() as f64)
}

pub fn success_rate(results: &[EpisodeResult]) -> Result<f64> {
    let flags: Vec<bool> = results.iter().map(|r| r.success).collect();
    success_fraction(&flags)
}

/// One line of a metrics report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub regime: String,
    pub variant: String,
    pub metric: String,
    pub value: f64,
    pub n: usize,
    pub seed: u64,
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CoreError::io("metrics csv", e))?;
    Ok(())
}
