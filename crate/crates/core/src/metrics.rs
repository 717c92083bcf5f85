//! Evaluation metrics: head-motion diversity and landmark distance.

use crate::error::{Error, Result};
use crate::face::Point2;
use crate::pose::PoseFrame;

fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Per trajectory: population std over time of each Euler channel, averaged
/// over the three channels; then averaged over trajectories.
pub fn diversity_metric(trajectories: &[Vec<PoseFrame>]) -> Result<f64> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Empty("no trajectories".into()))?;
    if first.len() < 2 {
        return Err(Error::Domain(format!(
            "trajectories need at least 2 frames, got {}",
            first.len()
        )));
    }
    let mut total = 0.0;
    for traj in trajectories {
        if traj.len() != first.len() {
            return Err(Error::shape("trajectory length", first.len(), traj.len()));
        }
        total += (0..3)
            .map(|c| population_std(traj.iter().map(move |f| f.euler[c])))
            .sum::<f64>()
            / 3.0;
    }
    Ok(total / trajectories.len() as f64)
}

/// Per-channel population std of the Euler angles of one trajectory
/// (roll, pitch, yaw).
pub fn channel_std(trajectory: &[PoseFrame]) -> [f64; 3] {
    std::array::from_fn(|c| population_std(trajectory.iter().map(move |f| f.euler[c])))
}

/// Mean Euclidean distance between corresponding landmarks over all frames
/// and points.
pub fn lmd_metric(predicted: &[Vec<Point2>], target: &[Vec<Point2>]) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(Error::shape("landmark frames", target.len(), predicted.len()));
    }
    if predicted.is_empty() {
        return Err(Error::Empty("no landmark frames".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, t) in predicted.iter().zip(target) {
        if p.len() != t.len() {
            return Err(Error::shape("landmarks per frame", t.len(), p.len()));
        }
        for (a, b) in p.iter().zip(t) {
            total += (a[0] - b[0]).hypot(a[1] - b[1]);
        }
        count += p.len();
    }
    if count == 0 {
        return Err(Error::Empty("no landmarks".into()));
    }
    Ok(total / count as f64)
}
