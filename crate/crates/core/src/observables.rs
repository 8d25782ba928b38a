//! Scalar and distributional diagnostics of states, density matrices and series.

use std::f64::consts::PI;

use faer::{Mat, Side};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::classical::GridSpec;
use crate::error::{Error, Result};
use crate::hilbert::{coherent_state_zphi, CMat, CVec, TwoSpinSystem, C64};
use crate::model::{wrap_phase, ModelParams, Spin};

/// Tolerance below which negative eigenvalues are treated as round-off.
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Eigenvalues of a Hermitian matrix (lower triangle is read), ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    let n = a.nrows();
    let m = Mat::<C64>::from_fn(n, n, |i, j| a[(i, j)]);
    let mut ev = m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

fn checked_spectrum(rho: &CMat) -> Result<Vec<f64>> {
    let ev = hermitian_eigenvalues(rho)?;
    if let Some(bad) = ev.iter().find(|l| **l < -POSITIVITY_TOL) {
        return Err(Error::Positivity(*bad));
    }
    Ok(ev.into_iter().map(|l| l.max(0.0)).collect())
}

/// `-Tr(rho ln rho)` in nats.
pub fn von_neumann_entropy(rho: &CMat) -> Result<f64> {
    Ok(checked_spectrum(rho)?.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum())
}

/// `Tr(rho^2)`.
pub fn purity(rho: &CMat) -> Result<f64> {
    let ev = checked_spectrum(rho)?;
    Ok(ev.iter().map(|p| p * p).sum())
}

/// Sum of `|rho_nm|` over `n != m`.
pub fn off_diagonal_mass(rho: &CMat) -> f64 {
    rho.indexed_iter().filter(|((i, j), _)| i != j).map(|(_, v)| v.norm()).sum()
}

/// Phase grid point `phi_m = -pi + 2 pi m / (2S + 1)`.
pub fn phase_grid(spin: Spin) -> Vec<f64> {
    let d = spin.dim();
    (0..d).map(|m| -PI + 2.0 * PI * m as f64 / d as f64).collect()
}

/// Phase state `|phi_m> = (2S+1)^(-1/2) sum_n e^(i n phi_m) |n>`, where `n = -m`
/// labels the imbalance eigenstates so that a coherent state at azimuth `phi`
/// has its phase distribution peaked at `phi`.
pub fn phase_state(m: usize, spin: Spin) -> CVec {
    let d = spin.dim();
    let phi = phase_grid(spin)[m];
    let norm = 1.0 / (d as f64).sqrt();
    CVec::from_iter((0..d).map(|k| C64::from_polar(norm, -spin.m(k) * phi)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDistribution {
    pub grid: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Mean phase, computed after centring the window on the mode; in `(-pi, pi]`.
    pub mean: f64,
    pub variance: f64,
    /// Index of the mode the window was centred on.
    pub mode: usize,
    /// True when the centred window differs from the native grid ordering.
    pub shifted: bool,
}

/// Discrete phase distribution `p(phi_m) = <phi_m|rho|phi_m>` and its moments.
pub fn phase_statistics(rho: &CMat, spin: Spin) -> Result<PhaseDistribution> {
    let d = spin.dim();
    if rho.dim() != (d, d) {
        return Err(Error::InvalidParameter(format!("expected a {d}x{d} single-spin matrix")));
    }
    let grid = phase_grid(spin);
    let mut probabilities = Vec::with_capacity(d);
    for m in 0..d {
        let v = phase_state(m, spin);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..d {
                row += rho[(i, j)] * v[j];
            }
            acc += v[i].conj() * row;
        }
        probabilities.push(acc.re);
    }
    let mut mode = 0;
    for (m, p) in probabilities.iter().enumerate() {
        if *p > probabilities[mode] + 1e-12 {
            mode = m;
        }
    }
    let half = (d - 1) / 2;
    let step = 2.0 * PI / d as f64;
    let offsets: Vec<f64> = (0..d)
        .map(|m| {
            let o = (m + d - mode) % d;
            let o = if o > half { o as f64 - d as f64 } else { o as f64 };
            grid[mode] + o * step
        })
        .collect();
    let mean_local: f64 = offsets.iter().zip(&probabilities).map(|(x, p)| x * p).sum();
    let variance = offsets.iter().zip(&probabilities).map(|(x, p)| (x - mean_local).powi(2) * p).sum();
    Ok(PhaseDistribution { grid, probabilities, mean: wrap_phase(mean_local), variance, mode, shifted: mode != half })
}

/// Husimi function on a cell-centred `(z, phi)` grid, stored `nz x nphi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub grid: GridSpec,
    pub z: Vec<f64>,
    pub phi: Vec<f64>,
    pub values: Vec<f64>,
    pub spin: Spin,
}

impl HusimiGrid {
    pub fn get(&self, iz: usize, ip: usize) -> f64 {
        self.values[iz * self.grid.nphi + ip]
    }

    /// Grid quadrature of `Q` with the spin-coherent measure `(2S+1)/(4 pi) dOmega`,
    /// including the `pi` from the `1/pi` prefactor.
    pub fn normalization(&self) -> f64 {
        let cell = (2.0 / self.grid.nz as f64) * (2.0 * PI / self.grid.nphi as f64);
        let measure = (self.spin.dim() as f64) / (4.0 * PI) * cell * PI;
        self.values.iter().sum::<f64>() * measure
    }

    /// `(sum Q)^2 / sum Q^2`: effective number of cells covered.
    pub fn participation_ratio(&self) -> f64 {
        let s: f64 = self.values.iter().sum();
        let s2: f64 = self.values.iter().map(|q| q * q).sum();
        s * s / s2
    }

    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        (best / self.grid.nphi, best % self.grid.nphi)
    }
}

/// `Q(z, phi) = (1/pi) <z,phi|rho|z,phi>` at every grid node.
pub fn husimi_q(rho: &CMat, spin: Spin, grid: GridSpec) -> Result<HusimiGrid> {
    let d = spin.dim();
    if rho.dim() != (d, d) {
        return Err(Error::InvalidParameter(format!("expected a {d}x{d} single-spin matrix")));
    }
    let z: Vec<f64> = (0..grid.nz).map(|i| grid.z_center(i)).collect();
    let phi: Vec<f64> = (0..grid.nphi).map(|i| grid.phi_center(i)).collect();
    let mut values = Vec::with_capacity(grid.cells());
    let mut row = vec![C64::new(0.0, 0.0); d];
    for &zz in &z {
        for &pp in &phi {
            let c = coherent_state_zphi(zz, pp, spin)?;
            for (i, r) in row.iter_mut().enumerate() {
                *r = (0..d).map(|j| rho[(i, j)] * c[j]).sum();
            }
            let q: C64 = (0..d).map(|i| c[i].conj() * row[i]).sum();
            values.push(q.re / PI);
        }
    }
    Ok(HusimiGrid { grid, z, phi, values, spin })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Resolution `2 pi / t_max` of the underlying record.
    pub resolution: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: f64,
    pub magnitude: f64,
}

impl Spectrum {
    /// Local maxima sorted by decreasing magnitude, refined by a parabola
    /// through the three neighbouring bins.
    pub fn peaks(&self) -> Vec<Peak> {
        let m = &self.magnitude;
        if m.len() < 3 {
            return Vec::new();
        }
        let bin = self.omega[1] - self.omega[0];
        let mut out = Vec::new();
        for k in 1..m.len() - 1 {
            if m[k] > m[k - 1] && m[k] >= m[k + 1] {
                let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
                let den = a - 2.0 * b + c;
                let delta = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
                out.push(Peak { omega: self.omega[k] + delta * bin, magnitude: b - 0.25 * (a - c) * delta });
            }
        }
        out.sort_by(|x, y| y.magnitude.total_cmp(&x.magnitude));
        out
    }

    /// Peaks whose magnitude exceeds `fraction` of the largest peak.
    pub fn dominant_peaks(&self, fraction: f64) -> Vec<Peak> {
        let peaks = self.peaks();
        let Some(top) = peaks.first().map(|p| p.magnitude) else {
            return peaks;
        };
        peaks.into_iter().filter(|p| p.magnitude >= fraction * top).collect()
    }
}

pub const ZERO_PADDING: usize = 4;

/// Hann-windowed magnitude spectrum with four-fold zero padding. The mean is
/// removed before windowing.
pub fn fourier_spectrum(series: &[f64], times: &[f64]) -> Result<Spectrum> {
    let n = series.len();
    if n != times.len() {
        return Err(Error::InvalidParameter("series and time grid lengths differ".into()));
    }
    if n < 4 {
        return Err(Error::InsufficientData("need at least four samples".into()));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::InvalidParameter("fourier_spectrum needs a uniform time grid".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let window: Vec<f64> = (0..n).map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / (n - 1) as f64).cos())).collect();
    let wsum: f64 = window.iter().sum();
    let len = ZERO_PADDING * n;
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for k in 0..n {
        buf[k] = C64::new((series[k] - mean) * window[k], 0.0);
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2;
    let omega = (0..=half).map(|k| 2.0 * PI * k as f64 / (len as f64 * dt)).collect();
    let magnitude = buf[..=half].iter().map(|v| v.norm() / wsum).collect();
    Ok(Spectrum { omega, magnitude, resolution: 2.0 * PI / (times[n - 1] - times[0]) })
}

/// Normalized population and current observables of the two species.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationObservables {
    pub z1: f64,
    pub z2: f64,
    pub z_plus: f64,
    pub z_minus: f64,
    /// Standard deviation of `(S1z - S2z) / 2S`.
    pub delta_z_minus: f64,
    pub current1: f64,
    pub current2: f64,
}

impl PopulationObservables {
    /// Assemble from raw moments `<S_iz>`, `<S_iy>` and `<(S1z - S2z)^2>`.
    pub fn from_moments(sz: [f64; 2], sy: [f64; 2], diff_sq: f64, p: &ModelParams) -> Self {
        let s = p.spin.value();
        let z1 = sz[0] / s;
        let z2 = sz[1] / s;
        let z_minus = 0.5 * (z1 - z2);
        let var = (diff_sq / (4.0 * s * s) - z_minus * z_minus).max(0.0);
        Self { z1, z2, z_plus: 0.5 * (z1 + z2), z_minus, delta_z_minus: var.sqrt(), current1: -p.j * sy[0] / s, current2: -p.j * sy[1] / s }
    }
}

/// Observables of a normalized two-spin pure state.
pub fn population_from_state(psi: &[C64], p: &ModelParams) -> PopulationObservables {
    let sys = TwoSpinSystem::new(p);
    let (sz1, sp1) = sys.spin_moments(crate::hilbert::Species::One, psi);
    let (sz2, sp2) = sys.spin_moments(crate::hilbert::Species::Two, psi);
    PopulationObservables::from_moments([sz1, sz2], [sp1.im, sp2.im], sys.sz_difference_sq(psi), p)
}

/// Observables of a two-spin density matrix.
pub fn population_from_density(rho: &CMat, p: &ModelParams) -> PopulationObservables {
    let spin = p.spin;
    let d = spin.dim();
    let lad = crate::hilbert::ladder_coefficients(spin);
    let mut sz = [0.0; 2];
    let mut sp = [C64::new(0.0, 0.0); 2];
    let mut diff_sq = 0.0;
    for a in 0..d {
        for b in 0..d {
            let idx = a * d + b;
            let pop = rho[(idx, idx)].re;
            let (ma, mb) = (spin.m(a), spin.m(b));
            sz[0] += pop * ma;
            sz[1] += pop * mb;
            diff_sq += pop * (ma - mb) * (ma - mb);
            // <S+> = sum <k|S+|k+1> rho[k+1, k]
            if a + 1 < d {
                sp[0] += rho[(idx + d, idx)] * lad[a];
            }
            if b + 1 < d {
                sp[1] += rho[(idx + 1, idx)] * lad[b];
            }
        }
    }
    PopulationObservables::from_moments(sz, [sp[0].im, sp[1].im], diff_sq, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_state, product_state, projector};

    fn mixed(d: usize) -> CMat {
        CMat::eye(d).mapv(|v| v / d as f64)
    }

    #[test]
    fn entropy_and_purity_references() {
        let spin = Spin::new(10.0).unwrap();
        let pure = projector(&coherent_state(0.4, 0.3, spin).unwrap());
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-10);
        assert!((purity(&pure).unwrap() - 1.0).abs() < 1e-10);
        let m = mixed(21);
        assert!((von_neumann_entropy(&m).unwrap() - 21f64.ln()).abs() < 1e-12);
        assert!((purity(&m).unwrap() - 1.0 / 21.0).abs() < 1e-12);
        let mut half = CMat::zeros((5, 5));
        half[(0, 0)] = C64::new(0.5, 0.0);
        half[(3, 3)] = C64::new(0.5, 0.0);
        assert!((von_neumann_entropy(&half).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((purity(&half).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_eigenvalue_is_rejected() {
        let mut bad = CMat::zeros((2, 2));
        bad[(0, 0)] = C64::new(1.1, 0.0);
        bad[(1, 1)] = C64::new(-0.1, 0.0);
        assert!(matches!(von_neumann_entropy(&bad), Err(Error::Positivity(_))));
    }

    #[test]
    fn phase_states_are_orthonormal() {
        let spin = Spin::new(3.5).unwrap();
        let d = spin.dim();
        for a in 0..d {
            for b in 0..d {
                let va = phase_state(a, spin);
                let vb = phase_state(b, spin);
                let o: C64 = va.iter().zip(vb.iter()).map(|(x, y)| x.conj() * y).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((o - C64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn number_state_has_uniform_phase() {
        let spin = Spin::new(10.0).unwrap();
        let mut rho = CMat::zeros((21, 21));
        rho[(4, 4)] = C64::new(1.0, 0.0);
        let pd = phase_statistics(&rho, spin).unwrap();
        assert!(pd.probabilities.iter().all(|p| (p - 1.0 / 21.0).abs() < 1e-12));
        // Independent grid-sum oracle with the mean removed.
        let g = phase_grid(spin);
        let mean = g.iter().sum::<f64>() / 21.0;
        let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 21.0;
        assert!((pd.variance - var).abs() < 1e-10);
        assert!((var - PI * PI / 3.0 * (1.0 - 1.0 / 441.0)).abs() < 1e-12);
    }

    #[test]
    fn phase_eigenstate_has_zero_variance() {
        let spin = Spin::new(2.0).unwrap();
        for m in 0..5 {
            let rho = projector(&phase_state(m, spin));
            let pd = phase_statistics(&rho, spin).unwrap();
            assert!(pd.variance < 1e-12);
            assert!(wrap_phase(pd.mean - phase_grid(spin)[m]).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_state_phase_matches_classical_phase() {
        let spin = Spin::new(10.0).unwrap();
        let rho = projector(&coherent_state(PI / 2.0, 2.9, spin).unwrap());
        let pd = phase_statistics(&rho, spin).unwrap();
        assert!(wrap_phase(pd.mean - 2.9).abs() < 0.1, "mean {}", pd.mean);
        assert!(pd.shifted);
    }

    #[test]
    fn husimi_references() {
        let spin = Spin::new(3.0).unwrap();
        let grid = GridSpec::new(200, 200).unwrap();
        let mixed_q = husimi_q(&mixed(7), spin, GridSpec::new(5, 5).unwrap()).unwrap();
        assert!(mixed_q.values.iter().all(|q| (q - 1.0 / (7.0 * PI)).abs() < 1e-12));
        let (z0, p0) = (grid.z_center(120), grid.phi_center(33));
        let rho = projector(&coherent_state_zphi(z0, p0, spin).unwrap());
        let h = husimi_q(&rho, spin, grid).unwrap();
        assert_eq!(h.argmax(), (120, 33));
        assert!((h.get(120, 33) - 1.0 / PI).abs() < 1e-12);
        assert!((h.normalization() - 1.0).abs() < 0.01);
        assert!(h.values.iter().all(|q| *q >= -1e-15));
    }

    #[test]
    fn sinusoid_peak() {
        let t: Vec<f64> = (0..4000).map(|k| k as f64 * 0.1).collect();
        let x: Vec<f64> = t.iter().map(|t| (1.2 * t).sin()).collect();
        let s = fourier_spectrum(&x, &t).unwrap();
        let p = s.peaks()[0];
        assert!((p.omega - 1.2).abs() < s.resolution, "{p:?}");
        assert!((p.omega - 1.2).abs() < 1e-3);
    }

    #[test]
    fn nonuniform_grid_rejected() {
        let t = [0.0, 1.0, 2.5, 3.0, 4.0];
        assert!(fourier_spectrum(&[0.0; 5], &t).is_err());
    }

    #[test]
    fn populations_of_top_state() {
        let p = ModelParams::new(1.0, 0.5, 0.2, 0.0, 2.0).unwrap();
        let top = coherent_state(0.0, 0.0, p.spin).unwrap();
        let psi = product_state(&top, &top);
        let o = population_from_state(psi.as_slice().unwrap(), &p);
        assert_eq!((o.z1, o.z2, o.z_minus), (1.0, 1.0, 0.0));
        let o2 = population_from_density(&projector(&psi), &p);
        assert_eq!((o2.z1, o2.z2, o2.z_minus), (1.0, 1.0, 0.0));
    }

    #[test]
    fn coherent_state_populations_and_current() {
        let p = ModelParams::new(1.3, 0.5, 0.2, 0.0, 3.0).unwrap();
        let (t1, f1, t2, f2) = (0.8, 1.9, 2.2, -0.6);
        let psi = product_state(&coherent_state(t1, f1, p.spin).unwrap(), &coherent_state(t2, f2, p.spin).unwrap());
        let a = population_from_state(psi.as_slice().unwrap(), &p);
        let b = population_from_density(&projector(&psi), &p);
        for o in [a, b] {
            assert!((o.z1 - t1.cos()).abs() < 1e-10 && (o.z2 - t2.cos()).abs() < 1e-10);
            assert!((o.current1 + 1.3 * t1.sin() * f1.sin()).abs() < 1e-10);
            assert!((o.current2 + 1.3 * t2.sin() * f2.sin()).abs() < 1e-10);
        }
        assert!((a.delta_z_minus - b.delta_z_minus).abs() < 1e-10);
    }
}
