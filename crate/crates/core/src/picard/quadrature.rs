//! Exponential product quadrature for `∫_0^t e^{-(t-s)A} N(s) ds` with `N`
//! reconstructed piecewise linearly between nodes.

use std::collections::HashMap;

use super::time::TimeGrid;
use crate::field::{SpectralField, TorusGrid};

/// Weights of one interval of length `h` for one decay rate `λ`:
/// `∫_0^h e^{-λ(h-s)} [N_0 (1 - s/h) + N_1 s/h] ds = left N_0 + right N_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalWeights {
    pub decay: f64,
    pub left: f64,
    pub right: f64,
}

impl IntervalWeights {
    pub fn new(lambda: f64, h: f64) -> Self {
        let z = lambda * h;
        let decay = (-z).exp();
        if z < 1e-3 {
            // Taylor series for small z
            let right = 0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0 + z.powi(4) / 720.0;
            let phi1 = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0 + z.powi(4) / 120.0;
            return Self {
                decay,
                left: h * (phi1 - right),
                right: h * right,
            };
        }
        let phi1 = -(-z).exp_m1() / z;
        let right = (z + (-z).exp_m1()) / (z * z);
        Self {
            decay,
            left: h * (phi1 - right),
            right: h * right,
        }
    }
}

/// Cached per-mode weights for every interval of a time grid.
#[derive(Debug, Clone)]
pub struct DuhamelQuadrature {
    grid: TorusGrid,
    times: TimeGrid,
    /// One weight table (per mode) per distinct step length.
    tables: Vec<Vec<IntervalWeights>>,
    /// Table index of each interval.
    interval_table: Vec<usize>,
}

impl DuhamelQuadrature {
    pub fn new(grid: TorusGrid, times: TimeGrid) -> Self {
        let k_squared: Vec<f64> = (0..grid.len()).map(|f| grid.k_squared(f)).collect();
        let mut lookup: HashMap<u64, usize> = HashMap::new();
        let mut tables = Vec::new();
        let mut interval_table = Vec::with_capacity(times.intervals());
        for j in 0..times.intervals() {
            let h = times.step(j);
            let idx = *lookup.entry(h.to_bits()).or_insert_with(|| {
                tables.push(k_squared.iter().map(|&l| IntervalWeights::new(l, h)).collect());
                tables.len() - 1
            });
            interval_table.push(idx);
        }
        Self {
            grid,
            times,
            tables,
            interval_table,
        }
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Integral at every node. `left[j]` is the integrand at `t_j` and
    /// `right[j]` its left limit at `t_{j+1}`; both have one entry per interval.
    pub fn integrate_intervals(
        &self,
        left: &[&SpectralField],
        right: &[&SpectralField],
    ) -> Vec<SpectralField> {
        let nint = self.times.intervals();
        assert_eq!(left.len(), nint);
        assert_eq!(right.len(), nint);
        let dim = self.grid.dim();
        let mut out = Vec::with_capacity(nint + 1);
        let mut acc = SpectralField::zeros(self.grid);
        out.push(acc.clone());
        for j in 0..nint {
            let table = &self.tables[self.interval_table[j]];
            {
                let a = acc.coeffs_mut();
                for c in 0..dim {
                    let l = &left[j].component(c);
                    let r = &right[j].component(c);
                    for (flat, w) in table.iter().enumerate() {
                        a[c][flat] = a[c][flat] * w.decay + l[flat] * w.left + r[flat] * w.right;
                    }
                }
            }
            out.push(acc.clone());
        }
        out
    }

    /// Integral at every node of a continuous integrand sampled at the nodes.
    pub fn integrate(&self, values: &[SpectralField]) -> Vec<SpectralField> {
        let n = self.times.intervals();
        let left: Vec<&SpectralField> = values[..n].iter().collect();
        let right: Vec<&SpectralField> = values[1..].iter().collect();
        self.integrate_intervals(&left, &right)
    }
}

/// `∫_0^t e^{-λ(t-s)} c(s) ds` for scalar samples, same rule as above.
pub fn integrate_scalar(lambda: f64, times: &TimeGrid, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; times.len()];
    for j in 0..times.intervals() {
        let w = IntervalWeights::new(lambda, times.step(j));
        out[j + 1] = out[j] * w.decay + values[j] * w.left + values[j + 1] * w.right;
    }
    out
}
