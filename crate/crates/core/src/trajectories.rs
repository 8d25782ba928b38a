//! Stochastic wave-function unraveling of the two-spin master equation.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CMat, CVec, Species, TwoSpinSystem, C64};
use crate::model::{ModelParams, Spin};
use crate::observables::{hermitian_eigenvalues, PopulationObservables};
use crate::parallel::{add_assign, chunked_reduce};
use crate::seeding::{stream, StreamRng};

/// Bound on `dt * max <O^dag O>` for a single channel.
pub const MAX_STEP_PROBABILITY: f64 = 0.05;

/// Total jump probability per step that aborts a trajectory.
pub const JUMP_PROBABILITY_LIMIT: f64 = 0.1;

const TRAJECTORY_CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpScheme {
    /// One uniform variate per step, jump with probability `dt * sum <O^dag O>`.
    FirstOrder,
    /// Unnormalized no-jump evolution until the squared norm falls below a
    /// uniform threshold.
    NormWaitingTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub scheme: JumpScheme,
    /// Accumulate the full two-spin density matrix (memory grows as `(2S+1)^4`).
    #[serde(default)]
    pub full_density: bool,
}

impl TrajectoryConfig {
    pub fn new(dt: f64, n_traj: usize, seed: u64) -> Self {
        Self { dt, n_traj, seed, scheme: JumpScheme::FirstOrder, full_density: false }
    }

    pub fn validate(&self, sys: &TwoSpinSystem) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter("n_traj must be positive".into()));
        }
        let p = self.dt * sys.max_channel_rate();
        if p > MAX_STEP_PROBABILITY {
            return Err(Error::StepSize(format!("dt * max<O^dag O> = {p:.4} exceeds {MAX_STEP_PROBABILITY}")));
        }
        Ok(())
    }
}

/// Output times as step counts; every time must be a non-negative multiple of `dt`.
fn output_steps(t_grid: &[f64], dt: f64) -> Result<Vec<usize>> {
    let mut steps = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let k = (t / dt).round();
        if t < 0.0 || (t / dt - k).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!("output time {t} is not a multiple of dt = {dt}")));
        }
        let k = k as usize;
        if steps.last().is_some_and(|last| k <= *last) {
            return Err(Error::InvalidParameter("output grid must be strictly increasing".into()));
        }
        steps.push(k);
    }
    Ok(steps)
}

fn norm_sqr(psi: &[C64]) -> f64 {
    psi.iter().map(|c| c.norm_sqr()).sum()
}

fn normalize(psi: &mut [C64]) {
    let n = norm_sqr(psi).sqrt();
    psi.iter_mut().for_each(|c| *c /= n);
}

/// Scratch space for the classical RK4 step of `d psi/dt = -i H_NH psi`.
struct Rk4 {
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self { k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z }
    }

    fn step(&mut self, sys: &TwoSpinSystem, psi: &mut [C64], dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        sys.nonhermitian_derivative(psi, k1);
        for (t, (p, k)) in self.tmp.iter_mut().zip(psi.iter().zip(k1.iter())) {
            *t = p + k * (0.5 * dt);
        }
        sys.nonhermitian_derivative(&self.tmp, k2);
        for (t, (p, k)) in self.tmp.iter_mut().zip(psi.iter().zip(k2.iter())) {
            *t = p + k * (0.5 * dt);
        }
        sys.nonhermitian_derivative(&self.tmp, k3);
        for (t, (p, k)) in self.tmp.iter_mut().zip(psi.iter().zip(k3.iter())) {
            *t = p + k * dt;
        }
        sys.nonhermitian_derivative(&self.tmp, k4);
        for i in 0..psi.len() {
            psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
}

/// Single-trajectory propagator that owns its scratch buffers.
struct Propagator<'a> {
    sys: &'a TwoSpinSystem,
    dt: f64,
    scheme: JumpScheme,
    rk: Rk4,
    scratch: Vec<C64>,
    threshold: f64,
    jumps: [u64; 2],
}

impl<'a> Propagator<'a> {
    fn new(sys: &'a TwoSpinSystem, dt: f64, scheme: JumpScheme, rng: &mut StreamRng) -> Self {
        let n = sys.dim();
        let threshold = match scheme {
            JumpScheme::FirstOrder => 0.0,
            JumpScheme::NormWaitingTime => rng.random::<f64>(),
        };
        Self { sys, dt, scheme, rk: Rk4::new(n), scratch: vec![C64::new(0.0, 0.0); n], threshold, jumps: [0; 2] }
    }

    fn jump(&mut self, psi: &mut [C64], species: Species) {
        self.sys.apply_jump(species, psi, &mut self.scratch);
        psi.copy_from_slice(&self.scratch);
        normalize(psi);
        self.jumps[species.index()] += 1;
    }

    /// Advance one step of size `dt`. For the first-order scheme `psi` is
    /// normalized on entry and exit; for the waiting-time scheme it carries
    /// the no-jump norm and the caller normalizes before measuring.
    fn step(&mut self, psi: &mut [C64], rng: &mut StreamRng) -> Result<()> {
        match self.scheme {
            JumpScheme::FirstOrder => {
                let p1 = self.dt * self.sys.channel_rate(Species::One, psi);
                let p2 = self.dt * self.sys.channel_rate(Species::Two, psi);
                if p1 + p2 > JUMP_PROBABILITY_LIMIT {
                    return Err(Error::StepSize(format!("jump probability {:.4} in one step", p1 + p2)));
                }
                let u: f64 = rng.random();
                if u < p1 + p2 {
                    let species = if u < p1 { Species::One } else { Species::Two };
                    self.jump(psi, species);
                } else {
                    self.rk.step(self.sys, psi, self.dt);
                    normalize(psi);
                }
            }
            JumpScheme::NormWaitingTime => {
                self.rk.step(self.sys, psi, self.dt);
                if norm_sqr(psi) <= self.threshold {
                    let r1 = self.sys.channel_rate(Species::One, psi);
                    let r2 = self.sys.channel_rate(Species::Two, psi);
                    let u: f64 = rng.random::<f64>() * (r1 + r2);
                    let species = if u < r1 { Species::One } else { Species::Two };
                    self.jump(psi, species);
                    self.threshold = rng.random::<f64>();
                }
            }
        }
        Ok(())
    }
}

/// One stored point of a single trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub time: f64,
    pub state: CVec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPath {
    pub points: Vec<PathPoint>,
    /// Jumps per channel over the whole run.
    pub jumps: [u64; 2],
}

/// Propagate one trajectory from the normalized `psi0` and store the
/// normalized state at each time of `t_grid`.
pub fn evolve_trajectory(
    psi0: &CVec,
    p: &ModelParams,
    cfg: &TrajectoryConfig,
    t_grid: &[f64],
    rng: &mut StreamRng,
) -> Result<TrajectoryPath> {
    let sys = TwoSpinSystem::new(p);
    cfg.validate(&sys)?;
    check_initial(psi0, &sys)?;
    let steps = output_steps(t_grid, cfg.dt)?;
    let mut psi: Vec<C64> = psi0.to_vec();
    let mut prop = Propagator::new(&sys, cfg.dt, cfg.scheme, rng);
    let mut points = Vec::with_capacity(steps.len());
    let mut step = 0;
    for (&target, &t) in steps.iter().zip(t_grid) {
        while step < target {
            prop.step(&mut psi, rng)?;
            step += 1;
        }
        let mut out = CVec::from(psi.clone());
        let n = out.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        out.mapv_inplace(|c| c / n);
        points.push(PathPoint { time: t, state: out });
    }
    Ok(TrajectoryPath { points, jumps: prop.jumps })
}

fn check_initial(psi0: &CVec, sys: &TwoSpinSystem) -> Result<()> {
    if psi0.len() != sys.dim() {
        return Err(Error::InvalidParameter(format!("state length {} != {}", psi0.len(), sys.dim())));
    }
    let n = psi0.iter().map(|c| c.norm_sqr()).sum::<f64>();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("initial state has squared norm {n}")));
    }
    Ok(())
}

/// Ensemble means of scalar observables at one output time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    /// `<S_iz>`.
    pub sz: [f64; 2],
    /// `<S_iy>`.
    pub sy: [f64; 2],
    /// `<(S1z - S2z)^2>`.
    pub diff_sq: f64,
    /// `sum_i <O_i^dag O_i>`.
    pub jump_rate: f64,
}

impl MomentPoint {
    pub fn populations(&self, p: &ModelParams) -> PopulationObservables {
        PopulationObservables::from_moments(self.sz, self.sy, self.diff_sq, p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub spin: Spin,
    pub n_traj: usize,
    /// Full two-spin density matrices, when requested.
    pub rho: Option<Vec<CMat>>,
    pub rho1: Vec<CMat>,
    pub rho2: Vec<CMat>,
    pub moments: Vec<MomentPoint>,
    /// Jumps per trajectory and channel over the whole run.
    pub jump_counts: Vec<[u64; 2]>,
}

impl EnsembleResult {
    /// Total jumps per channel.
    pub fn total_jumps(&self) -> [u64; 2] {
        self.jump_counts.iter().fold([0, 0], |a, c| [a[0] + c[0], a[1] + c[1]])
    }

    pub fn reduced(&self, species: Species) -> &[CMat] {
        match species {
            Species::One => &self.rho1,
            Species::Two => &self.rho2,
        }
    }
}

const N_MOMENTS: usize = 6;

struct Layout {
    d: usize,
    full: bool,
}

impl Layout {
    fn reduced_len(&self) -> usize {
        2 * self.d * self.d
    }

    fn full_len(&self) -> usize {
        if self.full {
            2 * self.d.pow(4)
        } else {
            0
        }
    }

    fn per_time(&self) -> usize {
        2 * self.reduced_len() + self.full_len() + N_MOMENTS
    }

    /// Add `|psi><psi|` and its partial traces into `acc`.
    fn record(&self, sys: &TwoSpinSystem, psi: &[C64], acc: &mut [f64]) {
        let d = self.d;
        let (r1, rest) = acc.split_at_mut(self.reduced_len());
        let (r2, rest) = rest.split_at_mut(self.reduced_len());
        let (full, moments) = rest.split_at_mut(self.full_len());
        // rho1[a, a'] = sum_b psi[a, b] conj(psi[a', b]); rho2 analogous.
        for a in 0..d {
            for a2 in 0..d {
                let mut s1 = C64::new(0.0, 0.0);
                let mut s2 = C64::new(0.0, 0.0);
                for b in 0..d {
                    s1 += psi[a * d + b] * psi[a2 * d + b].conj();
                    s2 += psi[b * d + a] * psi[b * d + a2].conj();
                }
                let k = 2 * (a * d + a2);
                r1[k] += s1.re;
                r1[k + 1] += s1.im;
                r2[k] += s2.re;
                r2[k + 1] += s2.im;
            }
        }
        if self.full {
            let n = d * d;
            for i in 0..n {
                for j in 0..n {
                    let v = psi[i] * psi[j].conj();
                    full[2 * (i * n + j)] += v.re;
                    full[2 * (i * n + j) + 1] += v.im;
                }
            }
        }
        let (sz1, sp1) = sys.spin_moments(Species::One, psi);
        let (sz2, sp2) = sys.spin_moments(Species::Two, psi);
        moments[0] += sz1;
        moments[1] += sz2;
        moments[2] += sp1.im;
        moments[3] += sp2.im;
        moments[4] += sys.sz_difference_sq(psi);
        moments[5] += sys.channel_rate(Species::One, psi) + sys.channel_rate(Species::Two, psi);
    }
}

fn unpack(buf: &[f64], n: usize, scale: f64) -> CMat {
    Array2::from_shape_fn((n, n), |(i, j)| C64::new(buf[2 * (i * n + j)], buf[2 * (i * n + j) + 1]) * scale)
}

/// Average `n_traj` trajectories started from `psi0`. Trajectory `k` draws
/// from the stream `(seed, "trajectory", k)`, so results do not depend on
/// the thread count.
pub fn ensemble_evolve(psi0: &CVec, p: &ModelParams, cfg: &TrajectoryConfig, t_grid: &[f64]) -> Result<EnsembleResult> {
    p.validate()?;
    let sys = TwoSpinSystem::new(p);
    cfg.validate(&sys)?;
    check_initial(psi0, &sys)?;
    let steps = output_steps(t_grid, cfg.dt)?;
    let layout = Layout { d: sys.single_dim(), full: cfg.full_density };
    let per_time = layout.per_time();
    let n_t = steps.len();
    let (sums, jump_counts) = chunked_reduce(
        cfg.n_traj,
        TRAJECTORY_CHUNK,
        |range| {
            let mut acc = vec![0.0; n_t * per_time];
            let mut counts = Vec::with_capacity(range.len());
            let mut psi = vec![C64::new(0.0, 0.0); sys.dim()];
            let mut normed = psi.clone();
            for k in range {
                let mut rng = stream(cfg.seed, "trajectory", k as u64);
                psi.copy_from_slice(psi0.as_slice().expect("contiguous state"));
                let mut prop = Propagator::new(&sys, cfg.dt, cfg.scheme, &mut rng);
                let mut step = 0;
                for (ti, &target) in steps.iter().enumerate() {
                    while step < target {
                        prop.step(&mut psi, &mut rng)?;
                        step += 1;
                    }
                    normed.copy_from_slice(&psi);
                    normalize(&mut normed);
                    layout.record(&sys, &normed, &mut acc[ti * per_time..(ti + 1) * per_time]);
                }
                counts.push(prop.jumps);
            }
            Ok((acc, counts))
        },
        |a, b| {
            add_assign(&mut a.0, &b.0);
            a.1.extend(b.1);
        },
    )?
    .expect("n_traj > 0");

    let d = layout.d;
    let scale = 1.0 / cfg.n_traj as f64;
    let mut result = EnsembleResult {
        times: t_grid.to_vec(),
        spin: p.spin,
        n_traj: cfg.n_traj,
        rho: cfg.full_density.then(|| Vec::with_capacity(n_t)),
        rho1: Vec::with_capacity(n_t),
        rho2: Vec::with_capacity(n_t),
        moments: Vec::with_capacity(n_t),
        jump_counts,
    };
    for ti in 0..n_t {
        let block = &sums[ti * per_time..(ti + 1) * per_time];
        let (r1, rest) = block.split_at(layout.reduced_len());
        let (r2, rest) = rest.split_at(layout.reduced_len());
        let (full, m) = rest.split_at(layout.full_len());
        result.rho1.push(unpack(r1, d, scale));
        result.rho2.push(unpack(r2, d, scale));
        if let Some(rho) = result.rho.as_mut() {
            rho.push(unpack(full, d * d, scale));
        }
        result.moments.push(MomentPoint {
            sz: [m[0] * scale, m[1] * scale],
            sy: [m[2] * scale, m[3] * scale],
            diff_sq: m[4] * scale,
            jump_rate: m[5] * scale,
        });
    }
    Ok(result)
}

/// Partial trace of a two-spin density matrix onto `species`.
pub fn reduced_density(rho: &CMat, species: Species, spin: Spin) -> Result<CMat> {
    let d = spin.dim();
    if rho.nrows() != d * d || rho.ncols() != d * d {
        return Err(Error::InvalidParameter(format!("expected a {0}x{0} matrix", d * d)));
    }
    Ok(Array2::from_shape_fn((d, d), |(i, j)| {
        (0..d)
            .map(|b| match species {
                Species::One => rho[(i * d + b, j * d + b)],
                Species::Two => rho[(b * d + i, b * d + j)],
            })
            .sum()
    }))
}

/// Trace distance `||a - b||_1 / 2` of two Hermitian matrices.
pub fn trace_distance(a: &CMat, b: &CMat) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidParameter("matrix shapes differ".into()));
    }
    let diff = a - b;
    Ok(0.5 * hermitian_eigenvalues(&diff)?.iter().map(|l| l.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_state, coherent_state_zphi, product_state, projector, Lindblad};
    use crate::observables::purity;

    fn top_state(spin: Spin) -> CVec {
        let mut v = CVec::zeros(spin.dim());
        v[0] = C64::new(1.0, 0.0);
        v
    }

    fn params(s: f64, v: f64, gamma: f64) -> ModelParams {
        ModelParams::classical(v, gamma).with_spin(Spin::new(s).unwrap())
    }

    #[test]
    fn unitary_limit_keeps_norm_and_follows_schrodinger() {
        let p = params(2.0, 0.5, 0.0);
        let psi0 = product_state(&coherent_state(0.7, 0.3, p.spin).unwrap(), &coherent_state(2.0, -1.0, p.spin).unwrap());
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 10.0).collect();
        let path = evolve_trajectory(&psi0, &p, &TrajectoryConfig::new(0.01, 1, 0), &grid, &mut stream(0, "t", 0)).unwrap();
        assert_eq!(path.jumps, [0, 0]);
        for pt in &path.points {
            assert!((pt.state.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let exact = Lindblad::from_params(&p).evolve(&projector(&psi0), &[0.0, 10.0], 1e-11).unwrap();
        let td = trace_distance(&projector(&path.points[1].state), &exact[1]).unwrap();
        assert!(td < 1e-4, "trace distance {td}");
    }

    #[test]
    fn top_state_jump_probability() {
        // <S+ S-> = 2S on |S,S>, so dt <O^dag O> = 2 gamma dt per species.
        for s in [0.5, 2.0, 7.0] {
            let p = params(s, 0.5, 0.2);
            let sys = TwoSpinSystem::new(&p);
            let psi = product_state(&top_state(p.spin), &top_state(p.spin));
            for sp in [Species::One, Species::Two] {
                assert!((sys.channel_rate(sp, psi.as_slice().unwrap()) - 0.4).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dark_channel_never_fires() {
        let p = params(2.0, 0.5, 0.2);
        let sys = TwoSpinSystem::new(&p);
        let mut bottom = CVec::zeros(p.spin.dim());
        bottom[p.spin.dim() - 1] = C64::new(1.0, 0.0);
        let psi = product_state(&bottom, &top_state(p.spin));
        assert_eq!(sys.channel_rate(Species::One, psi.as_slice().unwrap()), 0.0);
    }

    #[test]
    fn single_trajectory_is_pure() {
        let p = params(1.0, 0.5, 0.2);
        let psi0 = product_state(&coherent_state(1.0, 0.0, p.spin).unwrap(), &coherent_state(1.0, 0.0, p.spin).unwrap());
        let mut cfg = TrajectoryConfig::new(0.01, 1, 3);
        cfg.full_density = true;
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let r = ensemble_evolve(&psi0, &p, &cfg, &grid).unwrap();
        for rho in r.rho.as_ref().unwrap() {
            assert!((purity(rho).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ensemble_traces_and_hermiticity() {
        let p = params(1.5, 1.2, 0.3);
        let psi0 = product_state(&coherent_state(0.4, 0.0, p.spin).unwrap(), &coherent_state(2.4, 1.0, p.spin).unwrap());
        let mut cfg = TrajectoryConfig::new(0.01, 50, 1);
        cfg.full_density = true;
        let r = ensemble_evolve(&psi0, &p, &cfg, &[0.0, 1.0, 2.0]).unwrap();
        for (t, rho) in r.rho.as_ref().unwrap().iter().enumerate() {
            crate::hilbert::check_density(rho, 1e-10).unwrap();
            for sp in [Species::One, Species::Two] {
                let red = reduced_density(rho, sp, p.spin).unwrap();
                let acc = &r.reduced(sp)[t];
                assert!((&red - acc).iter().all(|v| v.norm() < 1e-12));
            }
        }
    }

    #[test]
    fn reduced_of_product_and_entangled() {
        let spin = Spin::new(0.5).unwrap();
        let a = coherent_state(0.9, 0.4, spin).unwrap();
        let b = coherent_state(2.0, -0.3, spin).unwrap();
        let rho = projector(&product_state(&a, &b));
        let r1 = reduced_density(&rho, Species::One, spin).unwrap();
        assert!((purity(&r1).unwrap() - 1.0).abs() < 1e-12);
        assert!((&r1 - &projector(&a)).iter().all(|v| v.norm() < 1e-12));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = CVec::from(vec![C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, 0.0)]);
        let rho = projector(&singlet);
        for sp in [Species::One, Species::Two] {
            let r = reduced_density(&rho, sp, spin).unwrap();
            assert!((r[(0, 0)].re - 0.5).abs() < 1e-15 && (r[(1, 1)].re - 0.5).abs() < 1e-15);
            assert!(r[(0, 1)].norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_coarse_step() {
        let p = params(10.0, 0.5, 0.2);
        let psi0 = product_state(&top_state(p.spin), &top_state(p.spin));
        let cfg = TrajectoryConfig::new(0.05, 1, 0);
        assert!(matches!(ensemble_evolve(&psi0, &p, &cfg, &[0.0]), Err(Error::StepSize(_))));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let p = params(1.0, 0.5, 0.2);
        let psi0 = product_state(&coherent_state_zphi(0.3, 0.0, p.spin).unwrap(), &coherent_state_zphi(0.3, 0.0, p.spin).unwrap());
        let cfg = TrajectoryConfig::new(0.01, 40, 7);
        let run = |n| crate::parallel::thread_pool(n).unwrap().install(|| ensemble_evolve(&psi0, &p, &cfg, &[0.0, 1.0, 3.0]).unwrap());
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn both_schemes_track_lindblad_at_spin_one() {
        let p = params(1.0, 0.5, 0.4);
        let psi0 = product_state(&coherent_state(0.5, 0.0, p.spin).unwrap(), &coherent_state(0.5, 0.0, p.spin).unwrap());
        let grid = [0.0, 1.0, 2.0, 4.0];
        let exact = Lindblad::from_params(&p).evolve(&projector(&psi0), &grid, 1e-10).unwrap();
        for scheme in [JumpScheme::FirstOrder, JumpScheme::NormWaitingTime] {
            let cfg = TrajectoryConfig { dt: 0.005, n_traj: 2000, seed: 5, scheme, full_density: true };
            let r = ensemble_evolve(&psi0, &p, &cfg, &grid).unwrap();
            for (a, b) in r.rho.as_ref().unwrap().iter().zip(&exact) {
                let td = trace_distance(a, b).unwrap();
                assert!(td < 0.05, "{scheme:?}: trace distance {td}");
            }
        }
    }

    #[test]
    fn jump_record_matches_rate() {
        let p = params(1.0, 0.5, 0.4);
        let psi0 = product_state(&top_state(p.spin), &coherent_state(1.2, 0.3, p.spin).unwrap());
        let cfg = TrajectoryConfig::new(0.005, 1000, 9);
        let grid: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let r = ensemble_evolve(&psi0, &p, &cfg, &grid).unwrap();
        // Expected jumps per trajectory: time integral of the ensemble rate (trapezoid).
        let expected: f64 = r.moments.windows(2).map(|w| 0.05 * (w[0].jump_rate + w[1].jump_rate)).sum();
        let per: Vec<f64> = r.jump_counts.iter().map(|c| (c[0] + c[1]) as f64).collect();
        let n = per.len() as f64;
        let mean = per.iter().sum::<f64>() / n;
        let se = (per.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean}, expected {expected}, se {se}");
    }
}
