//! Measured constants under sample doubling and a narrowing time window.

use cbf_mild::field::TorusGrid;
use cbf_mild::lab::{
    measure_B_constant, measure_C_constants, measure_gradient_constant, measure_heat_constant, ConstantReport,
    LabSettings, SampleSource,
};

fn doubled(f: impl Fn(usize) -> ConstantReport) {
    let (a, b) = (f(200), f(400));
    assert!(a.value.is_finite() && a.value > 0.0);
    assert!(b.value >= a.value, "sup over a superset");
    assert!((b.value - a.value) / a.value < 0.05, "{} -> {}", a.value, b.value);
}

#[test]
fn heat_and_gradient_constants_are_stable() {
    let s = LabSettings::new(TorusGrid::periodic(2, 16).unwrap(), 1e-3, 1.0, 1);
    doubled(|n| measure_heat_constant(2.0, 4.0, &SampleSource::Random { count: n }, &s).unwrap());
    doubled(|n| measure_gradient_constant(2.0, 4.0, &SampleSource::Random { count: n }, &s).unwrap());
}

#[test]
fn convection_constant_is_stable() {
    let s = LabSettings::new(TorusGrid::periodic(2, 16).unwrap(), 1e-3, 1.0, 2);
    doubled(|n| measure_B_constant(4.0, &SampleSource::Random { count: n }, &s).unwrap());
}

#[test]
fn damping_constants_are_stable_in_three_dimensions() {
    let s = LabSettings::new(TorusGrid::periodic(3, 8).unwrap(), 1e-3, 1.0, 3);
    doubled(|n| measure_C_constants(6.0, 3.0, &SampleSource::Random { count: n }, &s).unwrap().0);
    doubled(|n| measure_C_constants(6.0, 3.0, &SampleSource::Random { count: n }, &s).unwrap().1);
}

#[test]
fn constants_do_not_grow_as_t_min_increases() {
    let grid = TorusGrid::periodic(2, 16).unwrap();
    let src = SampleSource::Random { count: 24 };
    let mut last = f64::INFINITY;
    for t_min in [1e-4, 1e-3, 1e-2, 1e-1] {
        let s = LabSettings::new(grid, t_min, 1.0, 4);
        let v = measure_gradient_constant(2.0, 4.0, &src, &s).unwrap().value;
        assert!(v <= last * (1.0 + 1e-9), "t_min {t_min}: {v} > {last}");
        last = v;
    }
}
