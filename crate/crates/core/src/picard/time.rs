use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{SpectralField, TorusGrid};
use crate::ops::heat_semigroup;

/// Minimum number of intervals on any solve grid.
pub const MIN_INTERVALS: usize = 8;

/// Increasing time nodes starting at `t_0 = 0`.
///
/// Uniform grids come from [`TimeGrid::uniform`]; jump-driven noise inserts
/// extra nodes, so the general case allows arbitrary spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, nt: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Input(format!("time horizon must be positive, got {horizon}")));
        }
        if nt < MIN_INTERVALS {
            return Err(Error::Input(format!(
                "time grid needs at least {MIN_INTERVALS} intervals, got {nt}"
            )));
        }
        let step = horizon / nt as f64;
        let mut nodes: Vec<f64> = (0..=nt).map(|j| j as f64 * step).collect();
        nodes[nt] = horizon;
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < MIN_INTERVALS + 1 {
            return Err(Error::Input(format!(
                "time grid needs at least {} nodes, got {}",
                MIN_INTERVALS + 1,
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Input("time grid must start at t = 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::Input("time nodes must be finite and strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Length of interval `[t_j, t_{j+1}]`.
    pub fn step(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.step(0);
        (0..self.intervals()).all(|j| (self.step(j) - h).abs() <= 1e-12 * h)
    }

    /// Nodes up to and including `t_end`, or `None` if fewer than
    /// [`MIN_INTERVALS`] intervals remain.
    pub fn truncated(&self, t_end: f64) -> Option<TimeGrid> {
        let count = self.nodes.partition_point(|&t| t <= t_end * (1.0 + 1e-14));
        if count < MIN_INTERVALS + 1 {
            return None;
        }
        Some(TimeGrid {
            nodes: self.nodes[..count].to_vec(),
        })
    }

    /// Grid with the given times added as nodes (duplicates merged).
    pub fn with_inserted(&self, times: &[f64]) -> TimeGrid {
        let mut nodes = self.nodes.clone();
        nodes.extend(times.iter().copied().filter(|&t| t > 0.0 && t <= self.horizon()));
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
        TimeGrid { nodes }
    }
}

/// Field states sampled at every node of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: TimeGrid,
    states: Vec<SpectralField>,
}

impl Trajectory {
    pub fn new(times: TimeGrid, states: Vec<SpectralField>) -> Result<Self> {
        if states.len() != times.len() {
            return Err(Error::Input(format!(
                "trajectory has {} states for {} nodes",
                states.len(),
                times.len()
            )));
        }
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.grid() != first.grid()) {
                return Err(Error::Input("trajectory states live on different grids".into()));
            }
        }
        Ok(Self { times, states })
    }

    pub fn zeros(grid: TorusGrid, times: TimeGrid) -> Self {
        let states = vec![SpectralField::zeros(grid); times.len()];
        Self { times, states }
    }

    /// `t ↦ e^{-tA} x` on every node.
    pub fn heat_flow(x: &SpectralField, times: TimeGrid) -> Self {
        let states = times
            .nodes()
            .iter()
            .map(|&t| heat_semigroup(t, x).expect("nodes are nonnegative"))
            .collect();
        Self { times, states }
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    pub fn state(&self, j: usize) -> &SpectralField {
        &self.states[j]
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().unwrap()
    }

    pub fn grid(&self) -> &TorusGrid {
        self.states[0].grid()
    }

    pub fn into_states(self) -> Vec<SpectralField> {
        self.states
    }

    pub fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        if self.times != other.times {
            return Err(Error::Input("trajectories use different time grids".into()));
        }
        if self.grid() != other.grid() {
            return Err(Error::Input("trajectories use different spatial grids".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.states.iter().all(|s| s.is_finite())
    }

    pub fn add(&self, other: &Trajectory) -> Result<Trajectory> {
        self.check_compatible(other)?;
        let states = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Trajectory {
            times: self.times.clone(),
            states,
        })
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        self.add(&other.scaled(-1.0))
    }

    pub fn scaled(&self, factor: f64) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(|s| s.scaled(factor)).collect(),
        }
    }

    /// `‖u(t_j)‖_p` for every node.
    pub fn lp_norms(&self, p: f64) -> Result<Vec<f64>> {
        self.states.par_iter().map(|s| s.lp_norm(p)).collect()
    }

    /// `sup_j ‖u(t_j)‖_p`.
    pub fn sup_lp(&self, p: f64) -> Result<f64> {
        Ok(self.lp_norms(p)?.into_iter().fold(0.0, f64::max))
    }

    /// `sup_j ‖u(t_j) - v(t_j)‖_p`.
    pub fn sup_lp_distance(&self, other: &Trajectory, p: f64) -> Result<f64> {
        self.check_compatible(other)?;
        let dists: Vec<f64> = self
            .states
            .par_iter()
            .zip(other.states.par_iter())
            .map(|(a, b)| a.sub(b).lp_norm(p))
            .collect::<Result<_>>()?;
        Ok(dists.into_iter().fold(0.0, f64::max))
    }

    /// Restriction to the first `count` nodes.
    pub fn prefix(&self, times: &TimeGrid) -> Result<Trajectory> {
        let count = times.len();
        if count > self.times.len() || self.times.nodes()[..count] != *times.nodes() {
            return Err(Error::Input("time grid is not a prefix of the trajectory grid".into()));
        }
        Ok(Trajectory {
            times: times.clone(),
            states: self.states[..count].to_vec(),
        })
    }
}
