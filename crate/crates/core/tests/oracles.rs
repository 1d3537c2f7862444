//! Operator and solver outputs against independent closed forms and refined grids.

use cbf_mild::config::taylor_green;
use cbf_mild::field::{NonlinearTerms, PhysicalField, SolverParams, SpectralField, TorusGrid};
use cbf_mild::ops::{convection, leray_project};
use cbf_mild::picard::{mild_rhs_g, picard_solve, PicardOptions, TimeGrid, Trajectory};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sample(grid: TorusGrid, band: usize, seed: u64) -> SpectralField {
    SpectralField::random_solenoidal(grid, band, 0.5, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `(u·∇)v` evaluated on a 4x finer grid, brought back and cut to the 2/3 band.
fn convection_on_fine_grid(u: &SpectralField, v: &SpectralField) -> SpectralField {
    let grid = *u.grid();
    let dim = grid.dim();
    let m = 4 * grid.n();
    let (uf, vf) = (u.resampled(m).unwrap(), v.resampled(m).unwrap());
    let fine = *uf.grid();
    let up = uf.inverse();
    let mut product = vec![vec![0.0; fine.len()]; dim];
    for j in 0..dim {
        let coeffs: Vec<Vec<Complex64>> = (0..dim)
            .map(|c| {
                (0..fine.len())
                    .map(|f| vf.component(c)[f] * Complex64::new(0.0, fine.wavevector(f)[j]))
                    .collect()
            })
            .collect();
        let dv = SpectralField::from_coeffs(fine, coeffs).unwrap().inverse();
        for (c, out) in product.iter_mut().enumerate() {
            for (f, o) in out.iter_mut().enumerate() {
                *o += up.component(j)[f] * dv.component(c)[f];
            }
        }
    }
    let back = SpectralField::forward(&PhysicalField::new(fine, product).unwrap())
        .resampled(grid.n())
        .unwrap()
        .filtered(|g, f| 3 * g.max_abs_index(f) < g.n() as i64);
    leray_project(&back)
}

#[test]
fn convection_matches_refined_grid_product() {
    for (dim, n, band) in [(2, 16, 5), (3, 8, 2)] {
        let g = TorusGrid::periodic(dim, n).unwrap();
        let (u, v) = (sample(g, band, 1), sample(g, band, 2));
        let got = convection(&u, &v).unwrap();
        let want = convection_on_fine_grid(&u, &v);
        assert!(got.sub(&want).max_abs() <= 1e-12 * want.max_abs(), "d={dim}");
    }
}

#[test]
fn convection_on_a_shear_pair_by_hand() {
    // u = (cos y, 0), v = (0, sin x): (u·∇)v = (0, cos x cos y), whose projection
    // on the four |k|^2 = 2 modes keeps half of the y component and adds (1/2) sin x sin y to x
    let g = TorusGrid::periodic(2, 16).unwrap();
    let f = |h: &dyn Fn(&[f64]) -> Vec<f64>| SpectralField::forward(&PhysicalField::from_fn(g, h));
    let u = f(&|x| vec![x[1].cos(), 0.0]);
    let v = f(&|x| vec![0.0, x[0].sin()]);
    let want = f(&|x| vec![0.5 * x[0].sin() * x[1].sin(), 0.5 * x[0].cos() * x[1].cos()]);
    assert!(convection(&u, &v).unwrap().sub(&want).max_abs() <= 1e-12 * want.max_abs());
}

/// `∫_0^t e^{-λ(t-s)} (1 + s) ds`.
fn linear_moment(lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        return t + 0.5 * t * t;
    }
    let i0 = -(-lambda * t).exp_m1() / lambda;
    i0 + t / lambda - i0 / lambda
}

#[test]
fn duhamel_term_of_a_scaled_profile_has_closed_form() {
    // u(s) = sqrt(1 + s) w makes B(u, u) = (1 + s) B(w, w) linear in s
    let g = TorusGrid::periodic(2, 16).unwrap();
    let w = sample(g, 3, 3);
    let b = convection(&w, &w).unwrap();
    let params = SolverParams::new(g, 3.0, 6.0, 0.5, 8).with_terms(NonlinearTerms {
        convection: true,
        damping: false,
    });
    let times = TimeGrid::from_nodes(vec![0.0, 0.01, 0.05, 0.07, 0.2, 0.21, 0.35, 0.42, 0.5]).unwrap();
    let states = times.nodes().iter().map(|&s| w.scaled((1.0 + s).sqrt())).collect();
    let u = Trajectory::new(times.clone(), states).unwrap();
    let got = mild_rhs_g(&u, None, &params).unwrap();
    for (j, &t) in times.nodes().iter().enumerate() {
        let coeffs: Vec<Vec<Complex64>> = (0..2)
            .map(|c| (0..g.len()).map(|f| -b.component(c)[f] * linear_moment(g.k_squared(f), t)).collect())
            .collect();
        let want = SpectralField::from_coeffs(g, coeffs).unwrap();
        let err = got.state(j).sub(&want).max_abs();
        assert!(err <= 1e-8 * b.max_abs().max(1e-300), "t = {t}: {err:e}");
    }
}

#[test]
fn fixed_point_converges_at_second_order_in_the_step() {
    let g = TorusGrid::periodic(2, 16).unwrap();
    let x = taylor_green(g, 0.1).add(&sample(g, 3, 4).scaled(0.05));
    let finals: Vec<SpectralField> = [8, 16, 32]
        .iter()
        .map(|&nt| {
            let params = SolverParams::new(g, 3.0, 6.0, 0.1, nt).with_constant(1.0);
            picard_solve(&x, None, &params, &PicardOptions::default()).unwrap().0.last().clone()
        })
        .collect();
    let d1 = finals[0].sub(&finals[1]).lp_norm(6.0).unwrap();
    let d2 = finals[1].sub(&finals[2]).lp_norm(6.0).unwrap();
    assert!(d1 / d2 > 3.0 && d1 / d2 < 5.0, "ratio {}", d1 / d2);
}

#[test]
fn iterates_stay_solenoidal_and_bounded() {
    let g = TorusGrid::periodic(3, 8).unwrap();
    let x = sample(g, 2, 5);
    let x = x.scaled(0.05 / x.lp_norm(6.0).unwrap());
    let params = SolverParams::new(g, 3.0, 6.0, 0.05, 8).with_constant(1.0);
    let (u, trace) = picard_solve(&x, None, &params, &PicardOptions::default()).unwrap();
    assert!(u.states().iter().all(|s| s.divergence_residual() <= 1e-12));
    let budget = trace.budget.expect("budget");
    assert!(!trace.beyond_budget);
    assert!(trace.sup_norms.iter().all(|&f| f <= budget.k_bound));
    assert!(trace.measured_contraction().unwrap() <= budget.rho);
}
