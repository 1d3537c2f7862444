use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::picard::TimeGrid;

/// Largest tanh-sinh abscissa parameter; the nodes there sit about 1e-167
/// (relative) from the endpoints.
const TANH_SINH_T_MAX: f64 = 5.5;
const TANH_SINH_MAX_LEVEL: usize = 12;

/// `∫_a^b f` by tanh-sinh quadrature, halving the step until two levels
/// agree to `tol` (relative to the integral, absolute below 1).
/// Integrable endpoint singularities are allowed; `f` is never evaluated at
/// `a` or `b`.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let half = std::f64::consts::FRAC_PI_2;
    let width = b - a;
    let term = |t: f64| -> f64 {
        let s = half * t.sinh();
        let w = half * t.cosh() / s.cosh().powi(2);
        if w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        let x = if t < 0.0 {
            a + width / (1.0 + (-2.0 * s).exp())
        } else {
            b - width / (1.0 + (2.0 * s).exp())
        };
        if x <= a.min(b) || x >= a.max(b) {
            return 0.0;
        }
        0.5 * width * w * f(x)
    };
    let mut h = 1.0;
    let mut sum = term(0.0);
    let mut k = 1;
    while k as f64 * h <= TANH_SINH_T_MAX {
        sum += term(k as f64 * h) + term(-(k as f64) * h);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..TANH_SINH_MAX_LEVEL {
        h /= 2.0;
        let mut k = 1;
        while k as f64 * h <= TANH_SINH_T_MAX {
            sum += term(k as f64 * h) + term(-(k as f64) * h);
            k += 2;
        }
        let next = sum * h;
        if !next.is_finite() {
            return Err(Error::Numeric("tanh-sinh quadrature produced a non-finite value".into()));
        }
        if (next - estimate).abs() <= tol * next.abs().max(1.0) {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::Numeric(format!(
        "tanh-sinh quadrature did not reach tolerance {tol} on [{a}, {b}]"
    )))
}

/// `c_H = sqrt(H(2H-1) / B(2-2H, H-1/2))`.
pub fn kernel_normalization(hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    Ok((hurst * (2.0 * hurst - 1.0) / beta(2.0 - 2.0 * hurst, hurst - 0.5)).sqrt())
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::Domain(format!("kernel representation needs 1/2 < H < 1, got {hurst}")));
    }
    Ok(())
}

const KERNEL_TOL: f64 = 1e-13;

/// `K_H(t,s) = c_H s^{1/2-H} ∫_s^t (u-s)^{H-3/2} u^{H-1/2} du`, zero for `s >= t`.
///
/// With `α = H - 1/2` and `u = s + w^{1/α}` the inner integral becomes
/// `(1/α) ∫_0^{(t-s)^α} (s + w^{1/α})^α dw`, free of the endpoint singularity.
pub fn kernel_value(hurst: f64, t: f64, s: f64) -> Result<f64> {
    let c = kernel_normalization(hurst)?;
    kernel_with(c, hurst, t, s)
}

fn kernel_with(c: f64, hurst: f64, t: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) || s >= t {
        return Ok(0.0);
    }
    let alpha = hurst - 0.5;
    let upper = (t - s).powf(alpha);
    let inner = tanh_sinh(|w| (s + w.powf(1.0 / alpha)).powf(alpha), 0.0, upper, KERNEL_TOL)? / alpha;
    Ok(c * s.powf(-alpha) * inner)
}

/// `|∫_0^{t∧s} K_H(t,u) K_H(s,u) du - R_H(t,s)|`.
pub fn fbm_kernel_identity_check(hurst: f64, t: f64, s: f64, tol: f64) -> Result<f64> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::Domain(format!("identity check needs t, s > 0, got ({t}, {s})")));
    }
    let c = kernel_normalization(hurst)?;
    let lo = t.min(s);
    let failure = std::cell::Cell::new(None);
    let integrand = |u: f64| match (kernel_with(c, hurst, t, u), kernel_with(c, hurst, s, u)) {
        (Ok(a), Ok(b)) => a * b,
        (Err(e), _) | (_, Err(e)) => {
            failure.set(Some(e.to_string()));
            f64::NAN
        }
    };
    let lhs = tanh_sinh(integrand, 0.0, lo, tol);
    if let Some(msg) = failure.take() {
        return Err(Error::Numeric(msg));
    }
    Ok((lhs? - super::fbm::fbm_covariance(hurst, t, s)).abs())
}

/// `K_H(t_j, s_i)` at interval midpoints `s_i = (t_i + t_{i+1})/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmKernelTable {
    pub hurst: f64,
    pub normalization: f64,
    pub times: TimeGrid,
    pub midpoints: Vec<f64>,
    /// `values[j][i]`, zero when `s_i >= t_j`.
    pub values: Vec<Vec<f64>>,
}

impl FbmKernelTable {
    pub fn new(hurst: f64, times: &TimeGrid) -> Result<Self> {
        let c = kernel_normalization(hurst)?;
        let nodes = times.nodes();
        let midpoints: Vec<f64> = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let values = nodes
            .iter()
            .map(|&t| midpoints.iter().map(|&s| kernel_with(c, hurst, t, s)).collect())
            .collect::<Result<_>>()?;
        Ok(Self {
            hurst,
            normalization: c,
            times: times.clone(),
            midpoints,
            values,
        })
    }
}
