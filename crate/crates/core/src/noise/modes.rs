use num_complex::Complex64;

use super::spec::NoiseSpec;
use crate::field::{is_upper_half, SpectralField, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Cos,
    Sin,
    Mean,
}

/// One real scalar coordinate of the noise: `a(t) cos(k·x) e`, `a(t) sin(k·x) e`
/// or `a(t) e` for the mean, with `e ⊥ k` a unit polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub flat: usize,
    pub index: [i64; 3],
    pub k_squared: f64,
    pub phi: f64,
    pub polarization: [f64; 3],
    pub polarization_index: usize,
    pub part: Part,
}

impl Slot {
    /// CSV column stem, e.g. `k1_-2_p0_cos`.
    pub fn label(&self, dim: usize) -> String {
        let k: Vec<String> = self.index[..dim].iter().map(|i| i.to_string()).collect();
        let part = match self.part {
            Part::Cos => "cos",
            Part::Sin => "sin",
            Part::Mean => "mean",
        };
        format!("k{}_p{}_{}", k.join("_"), self.polarization_index, part)
    }
}

/// Retained scalar coordinates of a diagonal noise coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModes {
    grid: TorusGrid,
    slots: Vec<Slot>,
}

fn polarizations(k: [f64; 3], dim: usize) -> Vec<[f64; 3]> {
    let norm = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    if dim == 2 {
        return vec![[-k[1] / norm, k[0] / norm, 0.0]];
    }
    let n = [k[0] / norm, k[1] / norm, k[2] / norm];
    // axis least aligned with k
    let mut axis = [0.0; 3];
    let pick = (0..3)
        .min_by(|&a, &b| n[a].abs().partial_cmp(&n[b].abs()).unwrap())
        .unwrap();
    axis[pick] = 1.0;
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let e1 = cross(n, axis);
    let l = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    let e1 = [e1[0] / l, e1[1] / l, e1[2] / l];
    let e2 = cross(n, e1);
    vec![e1, e2]
}

impl NoiseModes {
    pub fn new(spec: &NoiseSpec) -> Self {
        let grid = spec.grid;
        let dim = grid.dim();
        let mut slots = Vec::new();
        if spec.is_off() {
            return Self { grid, slots };
        }
        let kmax = spec.phi.kmax.min(grid.n() / 2 - 1) as i64;
        if spec.phi.include_mean {
            for a in 0..dim {
                let mut e = [0.0; 3];
                e[a] = 1.0;
                slots.push(Slot {
                    flat: 0,
                    index: [0; 3],
                    k_squared: 0.0,
                    phi: spec.phi.coefficient(0.0),
                    polarization: e,
                    polarization_index: a,
                    part: Part::Mean,
                });
            }
        }
        for flat in 0..grid.len() {
            let index = grid.mode_index(flat);
            let m = grid.max_abs_index(flat);
            if m == 0 || m > kmax || !is_upper_half(&index[..dim]) {
                continue;
            }
            let k_squared = grid.k_squared(flat);
            let phi = spec.phi.coefficient(k_squared);
            for (a, e) in polarizations(grid.wavevector(flat), dim).into_iter().enumerate() {
                for part in [Part::Cos, Part::Sin] {
                    slots.push(Slot {
                        flat,
                        index,
                        k_squared,
                        phi,
                        polarization: e,
                        polarization_index: a,
                        part,
                    });
                }
            }
        }
        Self { grid, slots }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Index of the first slot with the given wave index, polarization and part.
    pub fn find(&self, index: &[i64], polarization: usize, part: Part) -> Option<usize> {
        let dim = self.grid.dim();
        self.slots.iter().position(|s| {
            s.index[..dim] == index[..dim] && s.polarization_index == polarization && s.part == part
        })
    }

    /// `Σ_k φ_k^2` over slots, a squared Hilbert-Schmidt norm of `Φ`.
    pub fn phi_squared_sum(&self) -> f64 {
        self.slots.iter().map(|s| s.phi * s.phi).sum()
    }

    /// Field with the given real amplitudes on every slot.
    pub fn synthesize(&self, amplitudes: &[f64]) -> SpectralField {
        debug_assert_eq!(amplitudes.len(), self.slots.len());
        let dim = self.grid.dim();
        let npts = self.grid.len() as f64;
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); self.grid.len()]; dim];
        for (slot, &a) in self.slots.iter().zip(amplitudes) {
            let value = match slot.part {
                Part::Mean => Complex64::new(npts * a, 0.0),
                Part::Cos => Complex64::new(0.5 * npts * a, 0.0),
                Part::Sin => Complex64::new(0.0, -0.5 * npts * a),
            };
            let neg = self.grid.negated(slot.flat);
            for c in 0..dim {
                let v = value * slot.polarization[c];
                coeffs[c][slot.flat] += v;
                if slot.part != Part::Mean {
                    coeffs[c][neg] += v.conj();
                }
            }
        }
        SpectralField::from_coeffs(self.grid, coeffs).expect("shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::PhiSpec;

    #[test]
    fn polarizations_are_orthonormal_and_transverse() {
        for k in [[1.0, 2.0, -3.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]] {
            let e = polarizations(k, 3);
            let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            assert!((dot(e[0], e[0]) - 1.0).abs() < 1e-15);
            assert!((dot(e[1], e[1]) - 1.0).abs() < 1e-15);
            assert!(dot(e[0], e[1]).abs() < 1e-15);
            assert!(dot(e[0], k).abs() < 1e-14 && dot(e[1], k).abs() < 1e-14);
        }
    }

    #[test]
    fn synthesized_fields_are_solenoidal_and_real() {
        for dim in [2, 3] {
            let grid = TorusGrid::periodic(dim, 8).unwrap();
            let spec = NoiseSpec::wiener(grid, PhiSpec::new(1.0, 0.5, 3)).unwrap();
            let modes = NoiseModes::new(&spec);
            let amps: Vec<f64> = (0..modes.len()).map(|i| (i as f64 * 0.37).sin()).collect();
            let w = modes.synthesize(&amps);
            assert!(w.divergence_residual() < 1e-12);
            assert!(w.conjugate_symmetry_defect() < 1e-12);
        }
    }

    #[test]
    fn cos_slot_is_a_cosine() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let spec = NoiseSpec::wiener(grid, PhiSpec::new(1.0, 0.0, 1)).unwrap();
        let modes = NoiseModes::new(&spec);
        let i = modes.find(&[1, 0], 0, Part::Cos).unwrap();
        let mut amps = vec![0.0; modes.len()];
        amps[i] = 2.0;
        let phys = modes.synthesize(&amps).inverse();
        for j in 0..grid.len() {
            let x = grid.point(j);
            // polarization of k = (1, 0) is (0, 1)
            assert!((phys.component(1)[j] - 2.0 * x[0].cos()).abs() < 1e-13);
            assert!(phys.component(0)[j].abs() < 1e-13);
        }
    }

    #[test]
    fn mean_slots_only_on_request() {
        let grid = TorusGrid::periodic(2, 8).unwrap();
        let mut phi = PhiSpec::new(1.0, 0.0, 1);
        assert!(NoiseModes::new(&NoiseSpec::wiener(grid, phi).unwrap()).find(&[0, 0], 0, Part::Mean).is_none());
        phi.include_mean = true;
        assert!(NoiseModes::new(&NoiseSpec::wiener(grid, phi).unwrap()).find(&[0, 0], 0, Part::Mean).is_some());
    }
}
