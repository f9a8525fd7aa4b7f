use xdisp_sim::Vec3;

use crate::error::{CoreError, Result};

fn dist2(a: Vec3, b: Vec3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Greedy furthest-point sampling. Each step adds the point whose distance
/// to the selected set is largest, lowest index on ties.
pub fn fps_downsample(points: &[Vec3], k: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if k > n {
        return Err(CoreError::Config(format!(
            "cannot sample {k} of {n} points"
        )));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    if start >= n {
        return Err(CoreError::Config(format!(
            "start index {start} out of range for {n} points"
        )));
    }
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut nearest = vec![f64::INFINITY; n];
    let mut cur = start;
    loop {
        chosen.push(cur);
        taken[cur] = true;
        if chosen.len() == k {
            return Ok(chosen);
        }
        let mut best = None::<(usize, f64)>;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let d = dist2(points[i], points[cur]);
            if d < nearest[i] {
                nearest[i] = d;
            }
            if best.is_none_or(|(_, bd)| nearest[i] > bd) {
                best = Some((i, nearest[i]));
            }
        }
        cur = best.expect("k <= n leaves a candidate").0;
    }
}

pub fn gather(points: &[Vec3], idx: &[usize]) -> Vec<Vec3> {
    idx.iter().map(|&i| points[i]).collect()
}
