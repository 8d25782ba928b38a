//! Dicke-basis spin algebra, two-spin operators, coherent states and the
//! direct Lindblad integrator.
//!
//! Single-spin basis index `k` carries `m = S - k`. Two-spin index is
//! `k1 * (2S + 1) + k2` (species 1 major).

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Spin};
use crate::ode::{Dopri5, OdeSystem};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    One,
    Two,
}

impl Species {
    pub fn index(self) -> usize {
        match self {
            Species::One => 0,
            Species::Two => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Species::One => Species::Two,
            Species::Two => Species::One,
        }
    }
}

/// `<k|S+|k+1>` for `k = 0..2S`, i.e. `sqrt(S(S+1) - m(m-1))` with `m = S - k`.
pub fn ladder_coefficients(spin: Spin) -> Vec<f64> {
    let s = spin.value();
    (0..spin.dim() - 1)
        .map(|k| {
            let m = spin.m(k);
            (s * (s + 1.0) - m * (m - 1.0)).sqrt()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinOperators {
    pub spin: Spin,
    pub sx: CMat,
    pub sy: CMat,
    pub sz: CMat,
    pub sp: CMat,
    pub sm: CMat,
}

pub fn build_spin_operators(spin: Spin) -> SpinOperators {
    let d = spin.dim();
    let lad = ladder_coefficients(spin);
    let mut sp = CMat::zeros((d, d));
    for (k, c) in lad.iter().enumerate() {
        sp[(k, k + 1)] = C64::new(*c, 0.0);
    }
    let sm = sp.t().to_owned();
    let sx = (&sp + &sm).mapv(|v| v * 0.5);
    let sy = (&sp - &sm).mapv(|v| v / (2.0 * I));
    let sz = CMat::from_diag(&Array1::from_iter((0..d).map(|k| C64::new(spin.m(k), 0.0))));
    SpinOperators { spin, sx, sy, sz, sp, sm }
}

pub fn identity(n: usize) -> CMat {
    CMat::eye(n)
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
            block.zip_mut_with(b, |o, v| *o = aij * v);
        }
    }
    out
}

/// Lift a single-spin operator onto the two-spin space.
pub fn embed(op: &CMat, species: Species) -> CMat {
    let id = identity(op.nrows());
    match species {
        Species::One => kron(op, &id),
        Species::Two => kron(&id, op),
    }
}

/// `H = -J (S1x + S2x) + (V/S) S1z S2z + omega_z (S1z + S2z)`.
pub fn build_hamiltonian(p: &ModelParams) -> CMat {
    let ops = build_spin_operators(p.spin);
    let s = p.spin.value();
    let sx1 = embed(&ops.sx, Species::One);
    let sx2 = embed(&ops.sx, Species::Two);
    let sz1 = embed(&ops.sz, Species::One);
    let sz2 = embed(&ops.sz, Species::Two);
    let mut h = (&sx1 + &sx2).mapv(|v| -p.j * v);
    h = h + sz1.dot(&sz2).mapv(|v| v * (p.v / s));
    h + (&sz1 + &sz2).mapv(|v| v * p.omega_z)
}

/// Jump operators `sqrt(gamma/S) S_i-` for both species.
pub fn jump_operators(p: &ModelParams) -> [CMat; 2] {
    let ops = build_spin_operators(p.spin);
    let f = (p.gamma / p.spin.value()).sqrt();
    let sm = ops.sm.mapv(|v| v * f);
    [embed(&sm, Species::One), embed(&sm, Species::Two)]
}

/// Image of a two-spin basis index under the species swap.
pub fn swap_index(spin: Spin, a: usize) -> usize {
    let d = spin.dim();
    (a % d) * d + a / d
}

pub fn swap_operator(spin: Spin) -> CMat {
    let n = spin.dim() * spin.dim();
    let mut p = CMat::zeros((n, n));
    for a in 0..n {
        p[(swap_index(spin, a), a)] = C64::new(1.0, 0.0);
    }
    p
}

/// Spin coherent state `|theta, phi>` in closed binomial form, evaluated in
/// log space so that large `S` does not underflow. The phase convention puts
/// the azimuth of `<S>` at `phi`, matching the mean-field variables.
pub fn coherent_state(theta: f64, phi: f64, spin: Spin) -> Result<CVec> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta = {theta} outside [0, pi]")));
    }
    let n = spin.twice() as usize;
    let (sh, ch) = (0.5 * theta).sin_cos();
    let mut out = CVec::zeros(n + 1);
    if sh == 0.0 {
        out[0] = C64::new(1.0, 0.0);
        return Ok(out);
    }
    if ch <= 0.0 {
        out[n] = C64::from_polar(1.0, n as f64 * phi);
        return Ok(out);
    }
    let (ls, lc) = (sh.ln(), ch.ln());
    let mut ln_binom = 0.0;
    for k in 0..=n {
        let ln_amp = 0.5 * ln_binom + (n - k) as f64 * lc + k as f64 * ls;
        out[k] = C64::from_polar(ln_amp.exp(), k as f64 * phi);
        ln_binom += ((n - k) as f64 / (k + 1) as f64).ln();
    }
    Ok(out)
}

/// Coherent state parameterized by `z = cos(theta)`.
pub fn coherent_state_zphi(z: f64, phi: f64, spin: Spin) -> Result<CVec> {
    if !(-1.0..=1.0).contains(&z) {
        return Err(Error::InvalidParameter(format!("z = {z} outside [-1, 1]")));
    }
    coherent_state(z.acos(), phi, spin)
}

/// Two-spin product state `a (x) b`.
pub fn product_state(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

/// Matrix-free two-spin operators used by the trajectory integrator.
#[derive(Clone, Debug)]
pub struct TwoSpinSystem {
    pub spin: Spin,
    d: usize,
    ladder: Vec<f64>,
    m: Vec<f64>,
    j: f64,
    diag_h: Vec<f64>,
    decay: [Vec<f64>; 2],
    jump_amp: f64,
}

impl TwoSpinSystem {
    pub fn new(p: &ModelParams) -> Self {
        let spin = p.spin;
        let d = spin.dim();
        let s = spin.value();
        let m: Vec<f64> = (0..d).map(|k| spin.m(k)).collect();
        let mut diag_h = vec![0.0; d * d];
        let mut decay = [vec![0.0; d * d], vec![0.0; d * d]];
        let single: Vec<f64> = m.iter().map(|&mi| p.gamma / s * (s * (s + 1.0) - mi * (mi - 1.0))).collect();
        for a in 0..d {
            for b in 0..d {
                let idx = a * d + b;
                diag_h[idx] = p.v / s * m[a] * m[b] + p.omega_z * (m[a] + m[b]);
                decay[0][idx] = single[a];
                decay[1][idx] = single[b];
            }
        }
        Self { spin, d, ladder: ladder_coefficients(spin), m, j: p.j, diag_h, decay, jump_amp: (p.gamma / s).sqrt() }
    }

    pub fn dim(&self) -> usize {
        self.d * self.d
    }

    pub fn single_dim(&self) -> usize {
        self.d
    }

    /// Largest single-channel rate `<O^dag O>` over all states.
    pub fn max_channel_rate(&self) -> f64 {
        self.decay[0].iter().cloned().fold(0.0, f64::max)
    }

    /// `out = H psi`.
    pub fn apply_hamiltonian(&self, psi: &[C64], out: &mut [C64]) {
        let d = self.d;
        let hj = -0.5 * self.j;
        for a in 0..d {
            for b in 0..d {
                let idx = a * d + b;
                let mut acc = psi[idx] * self.diag_h[idx];
                let mut hop = C64::new(0.0, 0.0);
                if a + 1 < d {
                    hop += psi[idx + d] * self.ladder[a];
                }
                if a > 0 {
                    hop += psi[idx - d] * self.ladder[a - 1];
                }
                if b + 1 < d {
                    hop += psi[idx + 1] * self.ladder[b];
                }
                if b > 0 {
                    hop += psi[idx - 1] * self.ladder[b - 1];
                }
                acc += hop * hj;
                out[idx] = acc;
            }
        }
    }

    /// `out = -i H_NH psi` with `H_NH = H - (i/2) sum O^dag O`.
    pub fn nonhermitian_derivative(&self, psi: &[C64], out: &mut [C64]) {
        self.apply_hamiltonian(psi, out);
        for idx in 0..out.len() {
            let loss = 0.5 * (self.decay[0][idx] + self.decay[1][idx]);
            out[idx] = -I * out[idx] - psi[idx] * loss;
        }
    }

    /// `<psi|O_i^dag O_i|psi>` (unnormalized).
    pub fn channel_rate(&self, species: Species, psi: &[C64]) -> f64 {
        psi.iter().zip(&self.decay[species.index()]).map(|(c, r)| c.norm_sqr() * r).sum()
    }

    /// `out = O_i psi`.
    pub fn apply_jump(&self, species: Species, psi: &[C64], out: &mut [C64]) {
        let d = self.d;
        out.fill(C64::new(0.0, 0.0));
        for a in 0..d {
            for b in 0..d {
                let idx = a * d + b;
                match species {
                    Species::One if a + 1 < d => out[idx + d] = psi[idx] * (self.ladder[a] * self.jump_amp),
                    Species::Two if b + 1 < d => out[idx + 1] = psi[idx] * (self.ladder[b] * self.jump_amp),
                    _ => {}
                }
            }
        }
    }

    /// `<S_iz>` and `<S_i+>` of a normalized state.
    pub fn spin_moments(&self, species: Species, psi: &[C64]) -> (f64, C64) {
        let d = self.d;
        let mut sz = 0.0;
        let mut sp = C64::new(0.0, 0.0);
        for a in 0..d {
            for b in 0..d {
                let idx = a * d + b;
                let (k, stride) = match species {
                    Species::One => (a, d),
                    Species::Two => (b, 1),
                };
                sz += psi[idx].norm_sqr() * self.m[k];
                if k + 1 < d {
                    sp += psi[idx].conj() * psi[idx + stride] * self.ladder[k];
                }
            }
        }
        (sz, sp)
    }

    /// `<(S1z - S2z)^2>` of a normalized state.
    pub fn sz_difference_sq(&self, psi: &[C64]) -> f64 {
        let d = self.d;
        let mut acc = 0.0;
        for a in 0..d {
            for b in 0..d {
                let diff = self.m[a] - self.m[b];
                acc += psi[a * d + b].norm_sqr() * diff * diff;
            }
        }
        acc
    }
}

/// Lindblad generator with dense operators.
#[derive(Clone, Debug)]
pub struct Lindblad {
    pub h: CMat,
    pub jumps: Vec<CMat>,
    jdag_j: CMat,
}

impl Lindblad {
    pub fn new(h: CMat, jumps: Vec<CMat>) -> Self {
        let n = h.nrows();
        let mut jdag_j = CMat::zeros((n, n));
        for o in &jumps {
            jdag_j = jdag_j + adjoint(o).dot(o);
        }
        Self { h, jumps, jdag_j }
    }

    pub fn from_params(p: &ModelParams) -> Self {
        let [o1, o2] = jump_operators(p);
        Self::new(build_hamiltonian(p), vec![o1, o2])
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// `-i[H, rho] + sum O rho O^dag - (1/2){O^dag O, rho}`.
    pub fn rhs(&self, rho: &CMat) -> CMat {
        let heff = &self.h - &self.jdag_j.mapv(|v| v * 0.5 * I);
        let hr = heff.dot(rho);
        // -i H_eff rho + i rho H_eff^dag
        let mut out = hr.mapv(|v| -I * v);
        let rh = adjoint(&hr);
        out = out + rh.mapv(|v| I * v);
        for o in &self.jumps {
            out = out + o.dot(rho).dot(&adjoint(o));
        }
        out
    }

    /// Integrate the master equation, returning `rho` at each grid time
    /// (`rho0` sits at `t_grid[0]`).
    pub fn evolve(&self, rho0: &CMat, t_grid: &[f64], rtol: f64) -> Result<Vec<CMat>> {
        check_density(rho0, 1e-10)?;
        if t_grid.is_empty() {
            return Ok(Vec::new());
        }
        let n = self.dim();
        let sys = LindbladFlow { model: self, n };
        let mut y = vec![0.0; 2 * n * n];
        for (k, v) in rho0.iter().enumerate() {
            y[k] = v.re;
            y[n * n + k] = v.im;
        }
        let out = Dopri5::new(rtol, rtol * 1e-2).solve_grid(&sys, t_grid[0], &y, t_grid)?;
        Ok(out.iter().map(|v| unflatten_density(v, n)).collect())
    }
}

struct LindbladFlow<'a> {
    model: &'a Lindblad,
    n: usize,
}

fn unflatten_density(y: &[f64], n: usize) -> CMat {
    CMat::from_shape_fn((n, n), |(i, j)| C64::new(y[i * n + j], y[n * n + i * n + j]))
}

impl OdeSystem for LindbladFlow<'_> {
    fn dim(&self) -> usize {
        2 * self.n * self.n
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n;
        let d = self.model.rhs(&unflatten_density(y, n));
        for (k, v) in d.iter().enumerate() {
            dy[k] = v.re;
            dy[n * n + k] = v.im;
        }
    }
}

pub fn adjoint(a: &CMat) -> CMat {
    a.t().mapv(|v| v.conj())
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

/// `|psi><psi|`.
pub fn projector(psi: &CVec) -> CMat {
    let n = psi.len();
    CMat::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj())
}

/// Hermiticity, unit trace and numerical positivity (`lambda_min >= -1e-8`).
pub fn check_density(rho: &CMat, tol: f64) -> Result<()> {
    let (r, c) = rho.dim();
    if r != c {
        return Err(Error::InvalidParameter(format!("density matrix is {r}x{c}")));
    }
    let herm = rho.indexed_iter().map(|((i, j), v)| (v - rho[(j, i)].conj()).norm()).fold(0.0, f64::max);
    if herm > tol {
        return Err(Error::InvalidParameter(format!("density matrix not Hermitian ({herm:e})")));
    }
    let tr = trace(rho);
    if (tr - C64::new(1.0, 0.0)).norm() > tol {
        return Err(Error::InvalidParameter(format!("density matrix trace {tr}")));
    }
    let min = crate::observables::hermitian_eigenvalues(rho)?.into_iter().fold(f64::INFINITY, f64::min);
    if min < -1e-8 {
        return Err(Error::Positivity(min));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(a: &CMat) -> f64 {
        a.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn commutator(a: &CMat, b: &CMat) -> CMat {
        a.dot(b) - b.dot(a)
    }

    #[test]
    fn spin_half_sz() {
        let ops = build_spin_operators(Spin::new(0.5).unwrap());
        assert_eq!(ops.sz[(0, 0)].re, 0.5);
        assert_eq!(ops.sz[(1, 1)].re, -0.5);
    }

    #[test]
    fn algebra_identities() {
        for twice in 1..=12 {
            let spin = Spin::from_twice(twice).unwrap();
            let ops = build_spin_operators(spin);
            let c = commutator(&ops.sx, &ops.sy) - ops.sz.mapv(|v| I * v);
            assert!(max_abs(&c) < 1e-13);
            let s = spin.value();
            let casimir =
                ops.sx.dot(&ops.sx) + ops.sy.dot(&ops.sy) + ops.sz.dot(&ops.sz) - identity(spin.dim()).mapv(|v| v * s * (s + 1.0));
            assert!(max_abs(&casimir) < 1e-12);
            assert!(max_abs(&(&ops.sm - &adjoint(&ops.sp))) == 0.0);
        }
    }

    #[test]
    fn lowering_spin_one_top_state() {
        let ops = build_spin_operators(Spin::new(1.0).unwrap());
        assert!((ops.sm[(1, 0)].re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_hermitian_and_exchange_symmetric() {
        let p = ModelParams::new(1.0, 0.7, 0.2, 0.3, 1.5).unwrap();
        let h = build_hamiltonian(&p);
        assert_eq!(max_abs(&(&h - &adjoint(&h))), 0.0);
        let pi = swap_operator(p.spin);
        assert!(max_abs(&commutator(&h, &pi)) < 1e-14);
    }

    #[test]
    fn ground_energy_of_free_spins() {
        let p = ModelParams::new(1.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        let e = crate::observables::hermitian_eigenvalues(&build_hamiltonian(&p)).unwrap();
        let min = e.into_iter().fold(f64::INFINITY, f64::min);
        assert!((min + 2.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_state_expectations() {
        for twice in [1u32, 4, 20, 400] {
            let spin = Spin::from_twice(twice).unwrap();
            let ops = build_spin_operators(spin);
            for (theta, phi) in [(0.0, 0.0), (0.7, 1.1), (2.0, -2.5), (std::f64::consts::PI, 0.4)] {
                let c = coherent_state(theta, phi, spin).unwrap();
                let norm: f64 = c.iter().map(|v| v.norm_sqr()).sum();
                assert!((norm - 1.0).abs() < 1e-12);
                if twice <= 20 {
                    let sz = c.iter().zip(ops.sz.diag()).map(|(a, m)| a.norm_sqr() * m.re).sum::<f64>();
                    assert!((sz - spin.value() * theta.cos()).abs() < 1e-10);
                    let sx: C64 = c.iter().zip(ops.sx.dot(&c).iter()).map(|(a, b)| a.conj() * b).sum();
                    let sy: C64 = c.iter().zip(ops.sy.dot(&c).iter()).map(|(a, b)| a.conj() * b).sum();
                    let s = spin.value();
                    assert!((sx.re - s * theta.sin() * phi.cos()).abs() < 1e-10);
                    assert!((sy.re - s * theta.sin() * phi.sin()).abs() < 1e-10);
                }
            }
        }
        let top = coherent_state(0.0, 1.0, Spin::new(2.0).unwrap()).unwrap();
        assert_eq!(top[0], C64::new(1.0, 0.0));
    }

    #[test]
    fn structured_operators_match_dense() {
        let p = ModelParams::new(1.0, 0.9, 0.3, 0.4, 1.5).unwrap();
        let sys = TwoSpinSystem::new(&p);
        let n = sys.dim();
        let psi: Vec<C64> = (0..n).map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.91).cos())).collect();
        let v = CVec::from(psi.clone());
        let mut out = vec![C64::new(0.0, 0.0); n];
        sys.apply_hamiltonian(&psi, &mut out);
        let dense = build_hamiltonian(&p).dot(&v);
        assert!(out.iter().zip(dense.iter()).all(|(a, b)| (a - b).norm() < 1e-12));
        let jumps = jump_operators(&p);
        for (s, o) in [Species::One, Species::Two].into_iter().zip(&jumps) {
            sys.apply_jump(s, &psi, &mut out);
            let dense = o.dot(&v);
            assert!(out.iter().zip(dense.iter()).all(|(a, b)| (a - b).norm() < 1e-12));
            let rate: C64 = v.iter().zip(adjoint(o).dot(o).dot(&v).iter()).map(|(a, b)| a.conj() * b).sum();
            assert!((sys.channel_rate(s, &psi) - rate.re).abs() < 1e-10);
        }
    }

    #[test]
    fn lindblad_preserves_trace_and_reduces_to_unitary() {
        let p = ModelParams::new(1.0, 0.5, 0.2, 0.1, 1.0).unwrap();
        let l = Lindblad::from_params(&p);
        let n = l.dim();
        let a = CMat::from_shape_fn((n, n), |(i, j)| C64::new(((i * 7 + j * 3) as f64).sin(), ((i + 2 * j) as f64).cos()));
        let rho = a.dot(&adjoint(&a));
        let rho = &rho / trace(&rho);
        assert!(trace(&l.rhs(&rho)).norm() < 1e-12);

        let closed = Lindblad::from_params(&ModelParams { gamma: 0.0, ..p });
        let unitary = (closed.h.dot(&rho) - rho.dot(&closed.h)).mapv(|v| -I * v);
        assert!(max_abs(&(closed.rhs(&rho) - unitary)) < 1e-12);
    }

    #[test]
    fn two_level_decay_oracle() {
        // J = V = 0, S = 1/2: each species decays |up> -> |down> at rate gamma/S.
        let p = ModelParams { j: 1.0, v: 0.0, gamma: 0.3, omega_z: 0.0, spin: Spin::new(0.5).unwrap() };
        let mut model = Lindblad::from_params(&p);
        model.h.fill(C64::new(0.0, 0.0));
        let up = coherent_state(0.0, 0.0, p.spin).unwrap();
        let rho0 = projector(&product_state(&up, &up));
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let out = model.evolve(&rho0, &grid, 1e-10).unwrap();
        let sz1 = embed(&build_spin_operators(p.spin).sz, Species::One);
        let rate = p.gamma / 0.5;
        let mut prev = f64::INFINITY;
        for (t, rho) in grid.iter().zip(&out) {
            let sz = trace(&sz1.dot(rho)).re;
            assert!((sz - ((-rate * t).exp() - 0.5)).abs() < 1e-8);
            assert!(sz <= prev);
            prev = sz;
        }
    }

    #[test]
    fn lindblad_is_exchange_covariant() {
        let p = ModelParams::new(1.0, 1.1, 0.2, 0.3, 1.0).unwrap();
        let l = Lindblad::from_params(&p);
        let pi = swap_operator(p.spin);
        let n = l.dim();
        let rho = CMat::from_shape_fn((n, n), |(i, j)| C64::new(((i + 3 * j) as f64).cos(), ((2 * i + j) as f64).sin()));
        let lhs = l.rhs(&pi.dot(&rho).dot(&pi));
        let rhs = pi.dot(&l.rhs(&rho)).dot(&pi);
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
    }
}
