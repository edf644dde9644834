//! Per-run trajectory recording.

use serde::{Deserialize, Serialize};

/// Iteration counts up to this are recorded in full.
pub const DENSE_RECORD_LIMIT: u64 = 10_000;
const GEOMETRIC_RATIO: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iter: u64,
    pub oracle_calls: u64,
    /// Raw objective value of the tracked output point.
    pub f_value: f64,
    pub f_gap: Option<f64>,
    pub dist_sq: Option<f64>,
}

/// Which iterations to record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecordPolicy {
    /// Nothing except the final point.
    FinalOnly,
    /// Every iteration for `N ≤ 10⁴`, otherwise iterations `⌈1.05^j⌉` plus the last.
    #[default]
    Auto,
    /// Every iteration.
    Every,
}

/// Precomputed record cadence for a run of `n` iterations.
#[derive(Debug, Clone)]
pub struct Cadence {
    dense: bool,
    next: u64,
    j: i32,
    n: u64,
    none: bool,
}

impl Cadence {
    pub fn new(policy: RecordPolicy, n: u64) -> Self {
        let dense = match policy {
            RecordPolicy::Every => true,
            RecordPolicy::Auto => n <= DENSE_RECORD_LIMIT,
            RecordPolicy::FinalOnly => false,
        };
        Cadence {
            dense,
            next: 0,
            j: -1,
            n,
            none: policy == RecordPolicy::FinalOnly,
        }
    }

    /// Whether iteration `k` is recorded. Must be called with increasing `k`.
    pub fn hit(&mut self, k: u64) -> bool {
        if k == self.n {
            return true;
        }
        if self.none {
            return k == 0;
        }
        if self.dense {
            return true;
        }
        if k < self.next {
            return false;
        }
        while self.next <= k {
            self.j += 1;
            self.next = GEOMETRIC_RATIO.powi(self.j).ceil() as u64;
        }
        true
    }
}

/// Trajectory of one run (or one restart stage).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunRecord {
    pub points: Vec<TrajectoryPoint>,
    /// `max_k ‖w^k − x*‖` over the tracked sequence (z for SSTM, x for SGD).
    pub max_dist: Option<f64>,
    pub oracle_calls: u64,
    pub iterations: u64,
    /// The run stopped on a non-finite or exploding iterate.
    pub diverged: bool,
    /// Iterates left the ball on which the smoothness certificate holds.
    pub left_certified_ball: bool,
}

impl RunRecord {
    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    pub fn observe_dist(&mut self, d_sq: Option<f64>) {
        if let Some(d) = d_sq {
            let d = d.sqrt();
            self.max_dist = Some(self.max_dist.map_or(d, |m| m.max(d)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_for_short_runs() {
        let mut c = Cadence::new(RecordPolicy::Auto, 50);
        assert!((0..=50).all(|k| c.hit(k)));
    }

    #[test]
    fn geometric_for_long_runs() {
        let n = 1_000_000;
        let mut c = Cadence::new(RecordPolicy::Auto, n);
        let hits: Vec<u64> = (0..=n).filter(|&k| c.hit(k)).collect();
        assert_eq!(hits[0], 0);
        assert_eq!(*hits.last().unwrap(), n);
        assert!(hits.len() < 400, "{}", hits.len());
        assert!(hits.windows(2).all(|w| w[0] < w[1]));
        assert!(hits.contains(&1) && hits.contains(&2));
    }

    #[test]
    fn final_only() {
        let mut c = Cadence::new(RecordPolicy::FinalOnly, 10);
        let hits: Vec<u64> = (0..=10).filter(|&k| c.hit(k)).collect();
        assert_eq!(hits, vec![0, 10]);
    }
}
