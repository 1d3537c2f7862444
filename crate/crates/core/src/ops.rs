//! Heat semigroup, Leray projection, convection and Forchheimer damping as
//! Fourier multipliers and dealiased pseudospectral products.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{PhysicalField, SpectralField, TorusGrid};

/// Magnitudes below this are treated as `u = 0` in the damping derivative.
pub const ZERO_MAGNITUDE: f64 = 1e-14;

/// Per-mode multipliers for `e^{-tA}` and `𝒫` on a fixed grid.
#[derive(Debug, Clone)]
pub struct MultiplierTable {
    grid: TorusGrid,
    k_squared: Vec<f64>,
    wavevectors: Vec<[f64; 3]>,
}

impl MultiplierTable {
    pub fn new(grid: TorusGrid) -> Self {
        let wavevectors: Vec<[f64; 3]> = (0..grid.len()).map(|f| grid.wavevector(f)).collect();
        let k_squared = wavevectors
            .iter()
            .map(|k| k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
            .collect();
        Self {
            grid,
            k_squared,
            wavevectors,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn k_squared(&self) -> &[f64] {
        &self.k_squared
    }

    /// `e^{-|k|^2 t}` for every mode.
    pub fn heat_factors(&self, t: f64) -> Vec<f64> {
        self.k_squared.iter().map(|k2| (-k2 * t).exp()).collect()
    }

    /// `I - k k^T / |k|^2`, identity on the mean mode and zero on Nyquist modes.
    pub fn leray_tensor(&self, flat: usize) -> [[f64; 3]; 3] {
        let dim = self.grid.dim();
        let k = self.wavevectors[flat];
        let k2 = self.k_squared[flat];
        let mut out = [[0.0; 3]; 3];
        if self.grid.is_nyquist(flat) {
            return out;
        }
        for (i, row) in out.iter_mut().enumerate().take(dim) {
            for (j, entry) in row.iter_mut().enumerate().take(dim) {
                let delta = if i == j { 1.0 } else { 0.0 };
                *entry = if k2 > 0.0 { delta - k[i] * k[j] / k2 } else { delta };
            }
        }
        out
    }

    pub fn project_in_place(&self, field: &mut SpectralField) {
        let dim = self.grid.dim();
        let coeffs = field.coeffs_mut();
        for flat in 0..self.grid.len() {
            let k2 = self.k_squared[flat];
            if k2 == 0.0 {
                continue;
            }
            if self.grid.is_nyquist(flat) {
                for comp in coeffs.iter_mut() {
                    comp[flat] = Complex64::new(0.0, 0.0);
                }
                continue;
            }
            let k = self.wavevectors[flat];
            let mut dot = Complex64::new(0.0, 0.0);
            for c in 0..dim {
                dot += coeffs[c][flat] * k[c];
            }
            let dot = dot / k2;
            for c in 0..dim {
                coeffs[c][flat] -= dot * k[c];
            }
        }
    }

    pub fn heat_in_place(&self, field: &mut SpectralField, t: f64) {
        if t == 0.0 {
            return;
        }
        let factors = self.heat_factors(t);
        for comp in field.coeffs_mut() {
            for (c, f) in comp.iter_mut().zip(&factors) {
                *c *= *f;
            }
        }
    }
}

/// `e^{-tA} g`, the per-mode multiplier `e^{-|k|^2 t}`.
pub fn heat_semigroup(t: f64, g: &SpectralField) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("heat semigroup needs t >= 0, got {t}")));
    }
    let mut out = g.clone();
    if t > 0.0 {
        let grid = *g.grid();
        for comp in out.coeffs_mut() {
            for (flat, c) in comp.iter_mut().enumerate() {
                *c *= (-grid.k_squared(flat) * t).exp();
            }
        }
    }
    Ok(out)
}

/// Helmholtz-Hodge projection onto divergence-free fields. Nyquist modes are dropped.
pub fn leray_project(g: &SpectralField) -> SpectralField {
    let mut out = g.clone();
    project_in_place(&mut out);
    out
}

pub(crate) fn project_in_place(field: &mut SpectralField) {
    let grid = *field.grid();
    let dim = grid.dim();
    let coeffs = field.coeffs_mut();
    for flat in 0..grid.len() {
        let k = grid.wavevector(flat);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            continue;
        }
        if grid.is_nyquist(flat) {
            for comp in coeffs.iter_mut() {
                comp[flat] = Complex64::new(0.0, 0.0);
            }
            continue;
        }
        let mut dot = Complex64::new(0.0, 0.0);
        for c in 0..dim {
            dot += coeffs[c][flat] * k[c];
        }
        let dot = dot / k2;
        for c in 0..dim {
            coeffs[c][flat] -= dot * k[c];
        }
    }
}

/// Modes kept by the 2/3 rule: `3 |k_i| < N` on every axis.
fn in_two_thirds_band(grid: &TorusGrid, flat: usize) -> bool {
    3 * grid.max_abs_index(flat) < grid.n() as i64
}

/// `B(u, v) = 𝒫[(u·∇)v]`, dealiased by the 2/3 rule.
pub fn convection(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.check_same_grid(v)?;
    let grid = *u.grid();
    let dim = grid.dim();
    let u = u.filtered(in_two_thirds_band);
    let v = v.filtered(in_two_thirds_band);
    let u_phys = u.inverse();

    let mut product = vec![vec![0.0; grid.len()]; dim];
    for j in 0..dim {
        // ∂_j v, all components
        let mut grad = SpectralField::zeros(grid);
        {
            let coeffs = grad.coeffs_mut();
            for flat in 0..grid.len() {
                if grid.is_nyquist(flat) {
                    continue;
                }
                let kj = grid.wavevector(flat)[j];
                for c in 0..dim {
                    coeffs[c][flat] = v.component(c)[flat] * Complex64::new(0.0, kj);
                }
            }
        }
        let grad_phys = grad.inverse();
        let uj = u_phys.component(j);
        for (i, out) in product.iter_mut().enumerate() {
            for ((o, a), b) in out.iter_mut().zip(uj).zip(grad_phys.component(i)) {
                *o += a * b;
            }
        }
    }
    let mut out = SpectralField::forward(&PhysicalField::new(grid, product)?).filtered(in_two_thirds_band);
    project_in_place(&mut out);
    Ok(out)
}

/// Evaluates a pointwise map on the 2x oversampled grid and truncates back.
fn oversampled_map(
    inputs: &[&SpectralField],
    f: impl Fn(&[&[f64]], usize, &mut [f64]),
) -> Result<SpectralField> {
    let grid = *inputs[0].grid();
    let dim = grid.dim();
    let fine_n = 2 * grid.n();
    let fine: Vec<PhysicalField> = inputs
        .iter()
        .map(|g| g.resampled(fine_n).map(|s| s.inverse()))
        .collect::<Result<_>>()?;
    let fine_grid = *fine[0].grid();
    let mut out = vec![vec![0.0; fine_grid.len()]; dim];
    let mut value = vec![0.0; dim];
    let views: Vec<Vec<&[f64]>> = fine
        .iter()
        .map(|p| p.components().iter().map(|c| c.as_slice()).collect())
        .collect();
    let flat_views: Vec<&[f64]> = views.iter().flatten().copied().collect();
    for j in 0..fine_grid.len() {
        f(&flat_views, j, &mut value);
        for c in 0..dim {
            out[c][j] = value[c];
        }
    }
    let spectral = SpectralField::forward(&PhysicalField::new(fine_grid, out)?);
    let mut coarse = spectral.resampled(grid.n())?;
    project_in_place(&mut coarse);
    Ok(coarse)
}

fn check_exponent(r: f64) -> Result<()> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(Error::Domain(format!("damping exponent must be >= 1, got {r}")));
    }
    Ok(())
}

/// `C(u) = 𝒫[|u|^{r-1} u]`.
pub fn damping(u: &SpectralField, r: f64) -> Result<SpectralField> {
    check_exponent(r)?;
    if r == 1.0 {
        return Ok(leray_project(u));
    }
    let dim = u.grid().dim();
    oversampled_map(&[u], |comps, j, out| {
        let mag2: f64 = comps.iter().map(|c| c[j] * c[j]).sum();
        let w = mag2.sqrt().powf(r - 1.0);
        for c in 0..dim {
            out[c] = w * comps[c][j];
        }
    })
}

/// Gateaux derivative `C'(u) v = 𝒫[|u|^{r-1} v + (r-1)|u|^{r-3} u (u·v)]`,
/// with the integrand set to zero where `|u|` vanishes.
pub fn damping_derivative(u: &SpectralField, v: &SpectralField, r: f64) -> Result<SpectralField> {
    check_exponent(r)?;
    u.check_same_grid(v)?;
    if r == 1.0 {
        return Ok(leray_project(v));
    }
    let dim = u.grid().dim();
    oversampled_map(&[u, v], |comps, j, out| {
        let (us, vs) = comps.split_at(dim);
        let mag = us.iter().map(|c| c[j] * c[j]).sum::<f64>().sqrt();
        if mag < ZERO_MAGNITUDE {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let w = mag.powf(r - 1.0);
        let dot: f64 = (0..dim).map(|c| us[c][j] * vs[c][j]).sum::<f64>() / (mag * mag);
        for c in 0..dim {
            out[c] = w * (vs[c][j] + (r - 1.0) * dot * us[c][j]);
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PhysicalField;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::periodic(2, n).unwrap()
    }

    fn field(g: TorusGrid, f: impl Fn(&[f64]) -> Vec<f64>) -> SpectralField {
        SpectralField::forward(&PhysicalField::from_fn(g, f))
    }

    fn taylor_green(g: TorusGrid, amp: f64) -> SpectralField {
        field(g, |x| {
            vec![
                amp * x[0].sin() * x[1].cos(),
                -amp * x[0].cos() * x[1].sin(),
            ]
        })
    }

    #[test]
    fn heat_semigroup_identity_and_eigenmode() {
        let g = grid(16);
        let shear = field(g, |x| vec![x[1].sin(), 0.0]);
        assert_eq!(heat_semigroup(0.0, &shear).unwrap(), shear);
        let decayed = heat_semigroup(1.0, &shear).unwrap();
        assert!(decayed.sub(&shear.scaled((-1.0f64).exp())).max_abs() < 1e-12 * shear.max_abs());
        let one = field(g, |_| vec![1.0, 0.0]);
        assert_eq!(heat_semigroup(3.0, &one).unwrap(), one);
        assert!(matches!(heat_semigroup(-1e-3, &one), Err(Error::Domain(_))));
    }

    #[test]
    fn leray_annihilates_gradients_and_fixes_solenoidal_fields() {
        let g = grid(16);
        let grad = field(g, |x| vec![-x[0].sin(), 0.0]);
        assert!(leray_project(&grad).max_abs() < 1e-12 * grad.max_abs());
        let shear = field(g, |x| vec![x[1].sin(), 0.0]);
        assert!(leray_project(&shear).sub(&shear).max_abs() < 1e-12 * shear.max_abs());
    }

    #[test]
    fn leray_by_hand_on_first_axis_mode() {
        let g = grid(8);
        let mut f = SpectralField::zeros(g);
        let one = Complex64::new(1.0, 0.0);
        f.set_mode(&[1, 0], &[one, one]);
        let p = leray_project(&f);
        let m = p.mode(&[1, 0]);
        assert!(m[0].norm() < 1e-15);
        assert!((m[1] - one).norm() < 1e-15);
    }

    #[test]
    fn multiplier_table_agrees_with_free_functions() {
        let g = grid(8);
        let table = MultiplierTable::new(g);
        let f = field(g, |x| vec![(x[0] + 2.0 * x[1]).cos(), x[0].sin()]);
        let mut a = f.clone();
        table.project_in_place(&mut a);
        table.heat_in_place(&mut a, 0.3);
        let b = heat_semigroup(0.3, &leray_project(&f)).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-13 * f.max_abs());
        let flat = g.flat_index(&[1, 2]);
        let t = table.leray_tensor(flat);
        for i in 0..2 {
            for j in 0..2 {
                let sq: f64 = (0..2).map(|m| t[i][m] * t[m][j]).sum();
                assert!((sq - t[i][j]).abs() < 1e-14);
                assert_eq!(t[i][j], t[j][i]);
            }
        }
        let h = table.heat_factors(0.0);
        assert!(h.iter().all(|&v| v == 1.0));
        let h = table.heat_factors(0.5);
        assert!(h.iter().enumerate().all(|(f, &v)| v > 0.0 && v <= 1.0 && (v == 1.0) == (f == 0)));
    }

    #[test]
    fn convection_of_constant_and_taylor_green_vanish() {
        let g = grid(32);
        let u = taylor_green(g, 1.0);
        let c = field(g, |_| vec![0.7, -0.2]);
        assert!(convection(&u, &c).unwrap().max_abs() < 1e-12);
        let b = convection(&u, &u).unwrap();
        assert!(b.l2_norm() < 1e-10, "{}", b.l2_norm());
    }

    #[test]
    fn damping_cubic_shear_identity() {
        let g = grid(32);
        let u = field(g, |x| vec![x[1].sin(), 0.0]);
        let expected = field(g, |x| vec![0.75 * x[1].sin() - 0.25 * (3.0 * x[1]).sin(), 0.0]);
        let got = damping(&u, 3.0).unwrap();
        assert!(got.sub(&expected).l2_norm() < 1e-10);
    }

    #[test]
    fn damping_linear_and_zero_cases() {
        let g = grid(16);
        let u = taylor_green(g, 0.4);
        assert!(damping(&u, 1.0).unwrap().sub(&u).max_abs() < 1e-12 * u.max_abs());
        let zero = SpectralField::zeros(g);
        for r in [1.5, 2.0, 3.0, 4.5] {
            assert_eq!(damping(&zero, r).unwrap().max_abs(), 0.0);
        }
        assert!(matches!(damping(&u, 0.5), Err(Error::Domain(_))));
        assert!(matches!(damping_derivative(&u, &u, 0.9), Err(Error::Domain(_))));
    }

    #[test]
    fn damping_derivative_special_branches() {
        let g = grid(16);
        let v = field(g, |x| vec![x[1].cos(), x[0].sin()]);
        let zero = SpectralField::zeros(g);
        let d1 = damping_derivative(&zero, &v, 1.0).unwrap();
        assert!(d1.sub(&leray_project(&v)).max_abs() < 1e-13 * v.max_abs());
        for r in [1.2, 2.0, 2.9] {
            assert_eq!(damping_derivative(&zero, &v, r).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn damping_derivative_matches_central_difference() {
        let g = grid(16);
        let u = taylor_green(g, 0.8).add(&field(g, |x| vec![0.3 * (2.0 * x[1]).sin(), 0.0]));
        let v = field(g, |x| vec![x[1].cos(), 0.0]).add(&taylor_green(g, 0.2));
        let eps = 1e-5;
        let fd = damping(&u.axpy(eps, &v), 3.0)
            .unwrap()
            .sub(&damping(&u.axpy(-eps, &v), 3.0).unwrap())
            .scaled(0.5 / eps);
        let exact = damping_derivative(&u, &v, 3.0).unwrap();
        assert!(fd.sub(&exact).l2_norm() < 1e-8);
    }
}
