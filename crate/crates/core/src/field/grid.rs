use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Uniform collocation grid on the periodic box `[0, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    length: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Input(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::Input(format!(
                "modes per axis must be even and at least 8, got {n}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Input(format!("box length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    /// Box of edge `2π`, so wavevectors are integers.
    pub fn periodic(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, n, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of collocation points, `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Quadrature weight of one collocation point, `(L/N)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Same box with a different number of modes per axis.
    pub fn with_modes(&self, n: usize) -> Result<Self> {
        Self::new(self.dim, n, self.length)
    }

    /// `2π / L`, the physical wavenumber of unit mode index.
    pub fn wavenumber_unit(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Signed mode index along one axis in FFT ordering.
    #[inline]
    pub fn signed_index(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Signed mode indices of a flat coefficient position (unused axes are 0).
    #[inline]
    pub fn mode_index(&self, flat: usize) -> [i64; 3] {
        let n = self.n;
        let mut out = [0i64; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = self.signed_index(rem % n);
            rem /= n;
        }
        out
    }

    /// Flat position of a signed mode index, wrapping modulo `N`.
    pub fn flat_index(&self, index: &[i64]) -> usize {
        let n = self.n as i64;
        index[..self.dim]
            .iter()
            .fold(0usize, |acc, &k| acc * self.n + k.rem_euclid(n) as usize)
    }

    /// Physical wavevector of a flat coefficient position.
    #[inline]
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let idx = self.mode_index(flat);
        let unit = self.wavenumber_unit();
        [idx[0] as f64 * unit, idx[1] as f64 * unit, idx[2] as f64 * unit]
    }

    #[inline]
    pub fn k_squared(&self, flat: usize) -> f64 {
        let k = self.wavevector(flat);
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    /// True if any axis sits on the Nyquist index `-N/2`.
    #[inline]
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let half = (self.n / 2) as i64;
        self.mode_index(flat)[..self.dim].iter().any(|&k| k == -half)
    }

    /// Largest absolute mode index over all axes.
    #[inline]
    pub fn max_abs_index(&self, flat: usize) -> i64 {
        self.mode_index(flat)[..self.dim]
            .iter()
            .map(|k| k.abs())
            .max()
            .unwrap_or(0)
    }

    /// Physical coordinates of a flat collocation point.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let h = self.spacing();
        let mut out = [0.0; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = (rem % self.n) as f64 * h;
            rem /= self.n;
        }
        out
    }

    /// Flat position of the mode `-k`.
    pub fn negated(&self, flat: usize) -> usize {
        let idx = self.mode_index(flat);
        self.flat_index(&[-idx[0], -idx[1], -idx[2]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(TorusGrid::new(1, 16, 1.0).is_err());
        assert!(TorusGrid::new(2, 15, 1.0).is_err());
        assert!(TorusGrid::new(2, 6, 1.0).is_err());
        assert!(TorusGrid::new(3, 8, 0.0).is_err());
        assert!(TorusGrid::new(3, 8, 1.0).is_ok());
    }

    #[test]
    fn index_round_trip() {
        let grid = TorusGrid::periodic(3, 8).unwrap();
        for flat in 0..grid.len() {
            let idx = grid.mode_index(flat);
            assert_eq!(grid.flat_index(&idx), flat);
            assert!(idx.iter().all(|&k| (-4..4).contains(&k)));
        }
        let flat = grid.flat_index(&[1, -2, 3]);
        assert_eq!(grid.mode_index(grid.negated(flat)), [-1, 2, -3]);
    }

    #[test]
    fn integer_wavevectors_on_2pi_box() {
        let grid = TorusGrid::periodic(2, 16).unwrap();
        let flat = grid.flat_index(&[3, -5]);
        let k = grid.wavevector(flat);
        assert!((k[0] - 3.0).abs() < 1e-15 && (k[1] + 5.0).abs() < 1e-15);
        assert!((grid.k_squared(flat) - 34.0).abs() < 1e-12);
    }
}
