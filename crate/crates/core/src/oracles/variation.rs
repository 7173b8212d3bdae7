//! Discrete total variation of a trajectory.

use crate::numerics::{norm, Trajectory};

/// `Σ_k ‖z(t_{k+1}) − z(t_k)‖`.
pub fn total_variation(traj: &Trajectory) -> f64 {
    total_variation_of(&traj.states)
}

pub fn total_variation_of(states: &[Vec<f64>]) -> f64 {
    states
        .windows(2)
        .map(|w| norm(&w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect::<Vec<_>>()))
        .sum()
}
