//! Existence-time calculators built from the contraction and smallness
//! conditions of the fixed-point argument.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ModelExponents;

/// Relative width at which the feasibility bisection stops.
pub const BISECTION_RTOL: f64 = 1e-12;
/// Smallest horizon the calculators will certify.
pub const MIN_HORIZON: f64 = 1e-12;

/// How the iterate bound `K` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BoundChoice {
    /// `K(T) = min{1/(4C T^a), (1/(4C T^b))^{1/(r-1)}}` from the recurrence.
    Recurrence,
    /// A fixed `K`; the ball condition `f0 + C T^a K^2 + C T^b K^r <= K` is then
    /// required in addition to `f0 < K/2` and `rho < 1`.
    Pinned(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceBudget {
    /// Iterate bound `K`.
    pub k_bound: f64,
    /// Seed norm `‖x‖_p + C ∫_0^T ‖f‖_p`.
    pub f0: f64,
    /// `C (K T^a + K^{r-1} T^b)` at `t_star`.
    pub rho: f64,
    pub t_star: f64,
    pub constant: f64,
}

/// The two time powers `T^{1/2 - d/2p}` and `T^{1 - d(r-1)/2p}`.
pub fn time_powers(exp: &ModelExponents, t: f64) -> (f64, f64) {
    (t.powf(exp.convection()), t.powf(exp.damping()))
}

/// `K(T)` from the nonlinear recurrence.
pub fn recurrence_bound(exp: &ModelExponents, constant: f64, t: f64) -> f64 {
    let (ta, tb) = time_powers(exp, t);
    let first = 1.0 / (4.0 * constant * ta);
    let base = 1.0 / (4.0 * constant * tb);
    let second = if exp.r == 1.0 {
        // limit of base^{1/(r-1)} as r -> 1
        if base > 1.0 {
            f64::INFINITY
        } else if base == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        base.powf(1.0 / (exp.r - 1.0))
    };
    first.min(second)
}

/// `C (K T^a + K^{r-1} T^b)`.
pub fn contraction_factor(exp: &ModelExponents, constant: f64, k: f64, t: f64) -> f64 {
    let (ta, tb) = time_powers(exp, t);
    constant * (k * ta + k.powf(exp.r - 1.0) * tb)
}

/// Largest `t` in `[t_min, t_max]` with `feasible(t)`, assuming feasibility
/// is monotone (holds below a threshold). `None` if `t_min` is infeasible.
pub fn largest_feasible_time(feasible: impl Fn(f64) -> bool, t_min: f64, t_max: f64) -> Option<f64> {
    if !feasible(t_min) {
        return None;
    }
    if feasible(t_max) {
        return Some(t_max);
    }
    let (mut lo, mut hi) = (t_min, t_max);
    while hi - lo > BISECTION_RTOL * hi {
        // geometric midpoint while the bracket spans decades
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

fn check_inputs(f0: f64, constant: f64, t_max: f64) -> Result<()> {
    if !(f0 >= 0.0 && f0.is_finite()) {
        return Err(Error::Domain(format!("seed norm f0 must be finite and >= 0, got {f0}")));
    }
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::Domain(format!("estimate constant must be positive, got {constant}")));
    }
    if !(t_max >= MIN_HORIZON && t_max.is_finite()) {
        return Err(Error::Domain(format!("T_max must be at least {MIN_HORIZON}, got {t_max}")));
    }
    Ok(())
}

/// Largest admissible `T* <= t_max` for seed norm `f0` and constant `C`.
pub fn existence_time(
    f0: f64,
    constant: f64,
    exp: &ModelExponents,
    t_max: f64,
    choice: BoundChoice,
) -> Result<ExistenceBudget> {
    check_inputs(f0, constant, t_max)?;
    let bound_at = |t: f64| match choice {
        BoundChoice::Recurrence => recurrence_bound(exp, constant, t),
        BoundChoice::Pinned(k) => k,
    };
    let feasible = |t: f64| {
        let k = bound_at(t);
        if !(f0 < 0.5 * k) || !(contraction_factor(exp, constant, k, t) < 1.0) {
            return false;
        }
        match choice {
            BoundChoice::Recurrence => true,
            BoundChoice::Pinned(k) => {
                let (ta, tb) = time_powers(exp, t);
                f0 + constant * ta * k * k + constant * tb * k.powf(exp.r) <= k
            }
        }
    };
    if let BoundChoice::Pinned(k) = choice {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("pinned bound K must be positive, got {k}")));
        }
    }
    let t_star = largest_feasible_time(feasible, MIN_HORIZON, t_max).ok_or_else(|| {
        let threshold = 0.5 * bound_at(MIN_HORIZON);
        Error::Infeasible(format!(
            "seed norm f0 = {f0} admits no existence time >= {MIN_HORIZON}; requires f0 < {threshold}"
        ))
    })?;
    let k_bound = bound_at(t_star);
    Ok(ExistenceBudget {
        k_bound,
        f0,
        rho: contraction_factor(exp, constant, k_bound, t_star),
        t_star,
        constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_root() -> f64 {
        ((5f64.sqrt() - 1.0) / 2.0).powi(4)
    }

    #[test]
    fn pinned_critical_case_hits_closed_form_root() {
        let exp = ModelExponents::new(3, 6.0, 3.0).unwrap();
        let b = existence_time(0.0, 1.0, &exp, 1.0, BoundChoice::Pinned(1.0)).unwrap();
        assert!((b.t_star - golden_root()).abs() < 1e-10, "{}", b.t_star);
        assert!((b.t_star - 0.1458980338).abs() < 1e-9);
        assert!(b.rho < 1.0 && b.rho > 1.0 - 1e-9);
    }

    #[test]
    fn zero_seed_accepts_small_horizons_and_rho_vanishes() {
        let exp = ModelExponents::new(3, 6.0, 3.0).unwrap();
        let b = existence_time(0.0, 1.0, &exp, 1e-3, BoundChoice::Recurrence).unwrap();
        assert_eq!(b.t_star, 1e-3);
        let mut last = f64::INFINITY;
        for t in [1e-2, 1e-4, 1e-6, 1e-8] {
            let rho = contraction_factor(&exp, 1.0, 1.0, t);
            assert!(rho < last);
            last = rho;
        }
        assert!(last < 1e-1);
    }

    #[test]
    fn recurrence_bound_keeps_rho_at_most_half() {
        let exp = ModelExponents::new(2, 6.0, 3.0).unwrap();
        for t in [1e-6, 1e-3, 0.1, 1.0, 10.0] {
            let k = recurrence_bound(&exp, 1.3, t);
            assert!(contraction_factor(&exp, 1.3, k, t) <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn smallness_threshold_matches_recurrence_root() {
        // f0 < K(T)/2 fails exactly where K(T) = 2 f0
        let exp = ModelExponents::new(2, 6.0, 3.0).unwrap();
        let f0 = 0.3;
        let b = existence_time(f0, 2.0, &exp, 10.0, BoundChoice::Recurrence).unwrap();
        assert!((recurrence_bound(&exp, 2.0, b.t_star) - 2.0 * f0).abs() < 1e-9);
    }

    #[test]
    fn larger_constant_never_lengthens_budget() {
        let exp = ModelExponents::new(3, 7.0, 2.5).unwrap();
        for f0 in [0.1, 1.0, 5.0] {
            let a = existence_time(f0, 1.0, &exp, 1.0, BoundChoice::Recurrence).unwrap();
            let b = existence_time(f0, 2.0, &exp, 1.0, BoundChoice::Recurrence).unwrap();
            assert!(b.t_star <= a.t_star);
        }
    }

    #[test]
    fn huge_seed_is_infeasible() {
        let exp = ModelExponents::new(3, 6.0, 3.0).unwrap();
        let err = existence_time(1e9, 1.0, &exp, 1.0, BoundChoice::Recurrence).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
        assert!(err.to_string().contains("requires f0 <"));
    }

    #[test]
    fn linear_damping_limit() {
        let exp = ModelExponents::new(2, 3.0, 1.0).unwrap();
        assert_eq!(recurrence_bound(&exp, 1.0, 1.0), 0.0);
        assert!(recurrence_bound(&exp, 1.0, 0.01).is_finite());
    }
}
