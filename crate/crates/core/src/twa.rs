//! Truncated Wigner sampling: Gaussian initial ensembles on the spheres and
//! Stratonovich (Heun) integration of the stochastic spin equations.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classical::{cartesian_drift, decorrelation, perturb, tangent_basis, Region};
use crate::error::{Error, Result};
use crate::fit::{fit_decay_rate, fit_growth_rate, RateFit};
use crate::model::{BlochPair, ClassicalState, ModelParams, Spin};
use crate::parallel::{add_assign, chunked_reduce};
use crate::seeding::{derive_seed, stream};

/// Largest admissible step in units of `1/J`.
pub const MAX_DT: f64 = 1e-3;

/// Per-step norm drift (before renormalization) that flags a too-large step.
pub const NORM_DRIFT_LIMIT: f64 = 1e-4;

const SAMPLE_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwaEnsemble {
    pub samples: Vec<BlochPair>,
    pub spin: Spin,
    pub seed: u64,
    pub center: ClassicalState,
}

fn sample_spin<R: Rng + ?Sized>(center: &[f64; 3], sigma: f64, rng: &mut R) -> [f64; 3] {
    let (e1, e2) = tangent_basis(center);
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    let mut s = [0.0; 3];
    for c in 0..3 {
        s[c] = center[c] + sigma * (g1 * e1[c] + g2 * e2[c]);
    }
    let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    s.map(|v| v / n)
}

/// Gaussian ensemble around `center`: tangent-plane standard deviation
/// `1/sqrt(2S)` per direction, then projected onto the unit sphere.
pub fn sample_initial(center: &ClassicalState, spin: Spin, n_samples: usize, seed: u64) -> Result<TwaEnsemble> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let sigma = 1.0 / (2.0 * spin.value()).sqrt();
    let c = center.to_bloch();
    let samples = (0..n_samples)
        .map(|k| {
            let mut rng = stream(seed, "twa-sample", k as u64);
            [sample_spin(&c[0], sigma, &mut rng), sample_spin(&c[1], sigma, &mut rng)]
        })
        .collect();
    Ok(TwaEnsemble { samples, spin, seed, center: *center })
}

fn noise_term(s: &BlochPair, amp: f64, dw: &[f64; 4]) -> BlochPair {
    let mut out = [[0.0; 3]; 2];
    for i in 0..2 {
        let [x, y, z] = s[i];
        let (w1, w2) = (dw[2 * i], dw[2 * i + 1]);
        out[i] = [amp * z * w1, -amp * z * w2, -amp * x * w1 + amp * y * w2];
    }
    out
}

/// One Heun step with Wiener increments `dw` (each of variance `dt`); both
/// spins are renormalized afterwards.
pub fn heun_step(s: &mut BlochPair, p: &ModelParams, amp: f64, dt: f64, dw: &[f64; 4]) -> Result<()> {
    let f0 = cartesian_drift(s, p);
    let g0 = noise_term(s, amp, dw);
    let mut pred = *s;
    for i in 0..2 {
        for c in 0..3 {
            pred[i][c] += f0[i][c] * dt + g0[i][c];
        }
    }
    let f1 = cartesian_drift(&pred, p);
    let g1 = noise_term(&pred, amp, dw);
    for i in 0..2 {
        for c in 0..3 {
            s[i][c] += 0.5 * (f0[i][c] + f1[i][c]) * dt + 0.5 * (g0[i][c] + g1[i][c]);
        }
        let n = (s[i][0] * s[i][0] + s[i][1] * s[i][1] + s[i][2] * s[i][2]).sqrt();
        if (n - 1.0).abs() > NORM_DRIFT_LIMIT {
            return Err(Error::StepSize(format!("spin norm drifted by {:e} in one step", n - 1.0)));
        }
        for c in 0..3 {
            s[i][c] /= n;
        }
    }
    Ok(())
}

fn draw_increments<R: Rng + ?Sized>(rng: &mut R, sqrt_dt: f64) -> [f64; 4] {
    let mut dw = [0.0; 4];
    for w in dw.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *w = g * sqrt_dt;
    }
    dw
}

/// Map output times onto step indices of size `dt` (times must be multiples of `dt`).
fn output_steps(t_grid: &[f64], dt: f64) -> Result<Vec<usize>> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::StepSize(format!("dt = {dt} must lie in (0, {MAX_DT}]")));
    }
    let mut steps = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let k = (t / dt).round();
        if t < 0.0 || (t / dt - k).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!("output time {t} is not a non-negative multiple of dt")));
        }
        steps.push(k as usize);
    }
    if steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("output grid must be strictly increasing".into()));
    }
    Ok(steps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwaRun {
    pub times: Vec<f64>,
    pub mean: Vec<BlochPair>,
    pub variance: Vec<BlochPair>,
    /// Mean and variance of `s_minus = (s1 - s2) / 2`.
    pub minus_mean: Vec<[f64; 3]>,
    pub minus_variance: Vec<[f64; 3]>,
    pub n_samples: usize,
}

impl TwaRun {
    /// Phase of the mean spin of `species` (0 or 1) at every output time.
    pub fn mean_phase(&self, species: usize) -> Vec<f64> {
        self.mean.iter().map(|m| m[species][1].atan2(m[species][0])).collect()
    }
}

const MOMENTS: usize = 18;

fn record_moments(acc: &mut [f64], s: &BlochPair) {
    for i in 0..2 {
        for c in 0..3 {
            acc[3 * i + c] += s[i][c];
            acc[6 + 3 * i + c] += s[i][c] * s[i][c];
        }
    }
    for c in 0..3 {
        let m = 0.5 * (s[0][c] - s[1][c]);
        acc[12 + c] += m;
        acc[15 + c] += m * m;
    }
}

/// Stochastic evolution of every sample; the ensemble sits at `t = 0` and
/// `t_grid` must consist of multiples of `dt`. The noise amplitude is
/// `sqrt(gamma / S)` with `S` taken from the ensemble.
pub fn evolve_twa(ens: &TwaEnsemble, p: &ModelParams, dt: f64, t_grid: &[f64], seed: u64) -> Result<TwaRun> {
    p.validate()?;
    let steps = output_steps(t_grid, dt)?;
    let n_t = steps.len();
    let n = ens.samples.len();
    let amp = (p.gamma / ens.spin.value()).sqrt();
    let sqrt_dt = dt.sqrt();
    let sums = chunked_reduce(
        n,
        SAMPLE_CHUNK,
        |range| {
            let mut acc = vec![0.0; n_t * MOMENTS];
            for k in range {
                let mut rng = stream(seed, "twa-noise", k as u64);
                let mut s = ens.samples[k];
                let mut step = 0;
                for (ti, &target) in steps.iter().enumerate() {
                    while step < target {
                        let dw = draw_increments(&mut rng, sqrt_dt);
                        heun_step(&mut s, p, amp, dt, &dw)?;
                        step += 1;
                    }
                    record_moments(&mut acc[ti * MOMENTS..(ti + 1) * MOMENTS], &s);
                }
            }
            Ok(acc)
        },
        |a, b| add_assign(a, &b),
    )?
    .ok_or_else(|| Error::InsufficientData("empty ensemble".into()))?;
    let nf = n as f64;
    let var = |sum: f64, sq: f64| (sq / nf - (sum / nf).powi(2)).max(0.0) * nf / (nf - 1.0);
    let mut run = TwaRun {
        times: t_grid.to_vec(),
        mean: Vec::with_capacity(n_t),
        variance: Vec::with_capacity(n_t),
        minus_mean: Vec::with_capacity(n_t),
        minus_variance: Vec::with_capacity(n_t),
        n_samples: n,
    };
    for ti in 0..n_t {
        let m = &sums[ti * MOMENTS..(ti + 1) * MOMENTS];
        let mut mean = [[0.0; 3]; 2];
        let mut variance = [[0.0; 3]; 2];
        for i in 0..2 {
            for c in 0..3 {
                mean[i][c] = m[3 * i + c] / nf;
                variance[i][c] = var(m[3 * i + c], m[6 + 3 * i + c]);
            }
        }
        run.mean.push(mean);
        run.variance.push(variance);
        run.minus_mean.push([0, 1, 2].map(|c| m[12 + c] / nf));
        run.minus_variance.push([0, 1, 2].map(|c| var(m[12 + c], m[15 + c])));
    }
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSeries {
    pub times: Vec<f64>,
    /// `sum_a Var(s_minus,a)`.
    pub f: Vec<f64>,
    pub components: Vec<[f64; 3]>,
}

impl FluctuationSeries {
    pub fn growth_rate(&self) -> Result<RateFit> {
        fit_growth_rate(&self.times, &self.f)
    }
}

/// Fluctuation measure of one TWA run.
pub fn fluctuation_measure(run: &TwaRun) -> FluctuationSeries {
    FluctuationSeries {
        times: run.times.clone(),
        f: run.minus_variance.iter().map(|v| v.iter().sum()).collect(),
        components: run.minus_variance.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationConfig {
    pub spin: Spin,
    pub n_centers: usize,
    pub n_samples: usize,
    pub dt: f64,
}

/// Fluctuation measure averaged over ensembles centred at points drawn
/// uniformly from the symmetric class.
pub fn mean_fluctuation(p: &ModelParams, cfg: &FluctuationConfig, t_grid: &[f64], seed: u64) -> Result<FluctuationSeries> {
    if cfg.n_centers == 0 {
        return Err(Error::InvalidParameter("need at least one centre".into()));
    }
    let mut acc: Option<FluctuationSeries> = None;
    for c in 0..cfg.n_centers {
        let center = Region::SymmetricClass.sample(&mut stream(seed, "twa-center", c as u64));
        let ens = sample_initial(&center, cfg.spin, cfg.n_samples, derive_seed(seed, "twa-ensemble", c as u64))?;
        let run = evolve_twa(&ens, p, cfg.dt, t_grid, derive_seed(seed, "twa-run", c as u64))?;
        let f = fluctuation_measure(&run);
        match acc.as_mut() {
            None => acc = Some(f),
            Some(a) => {
                add_assign(&mut a.f, &f.f);
                for (x, y) in a.components.iter_mut().zip(&f.components) {
                    add_assign(x, y);
                }
            }
        }
    }
    let mut out = acc.expect("at least one centre");
    let k = cfg.n_centers as f64;
    out.f.iter_mut().for_each(|v| *v /= k);
    out.components.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v /= k));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwaDecorrelatorConfig {
    pub spin: Spin,
    pub n_members: usize,
    pub epsilon: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwaDecorrelator {
    pub times: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub growth: RateFit,
    pub decay: RateFit,
}

impl TwaDecorrelator {
    pub fn mean(&self) -> Vec<f64> {
        self.d1.iter().zip(&self.d2).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Decorrelator of TWA copies driven by common noise. Each member draws a
/// centre from `region`, one Wigner sample around it, and a copy rotated by
/// `epsilon`; both copies then consume the same Wiener increments.
pub fn twa_decorrelator(
    p: &ModelParams,
    region: &Region,
    cfg: &TwaDecorrelatorConfig,
    t_grid: &[f64],
    seed: u64,
) -> Result<TwaDecorrelator> {
    p.validate()?;
    region.validate()?;
    if cfg.n_members == 0 || !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidParameter("need members and a positive epsilon".into()));
    }
    let steps = output_steps(t_grid, cfg.dt)?;
    let n_t = steps.len();
    let amp = (p.gamma / cfg.spin.value()).sqrt();
    let sigma = 1.0 / (2.0 * cfg.spin.value()).sqrt();
    let sqrt_dt = cfg.dt.sqrt();
    let sums = chunked_reduce(
        cfg.n_members,
        SAMPLE_CHUNK,
        |range| {
            let mut acc = vec![0.0; 2 * n_t];
            for k in range {
                let mut rng = stream(seed, "twa-decorrelator", k as u64);
                let c = region.sample(&mut rng).to_bloch();
                let mut a = [sample_spin(&c[0], sigma, &mut rng), sample_spin(&c[1], sigma, &mut rng)];
                let mut b = [perturb(&a[0], cfg.epsilon, &mut rng), perturb(&a[1], cfg.epsilon, &mut rng)];
                let mut noise = stream(seed, "twa-decorrelator-noise", k as u64);
                let mut step = 0;
                for (ti, &target) in steps.iter().enumerate() {
                    while step < target {
                        let dw = draw_increments(&mut noise, sqrt_dt);
                        heun_step(&mut a, p, amp, cfg.dt, &dw)?;
                        heun_step(&mut b, p, amp, cfg.dt, &dw)?;
                        step += 1;
                    }
                    acc[ti] += decorrelation(&a[0], &b[0]);
                    acc[n_t + ti] += decorrelation(&a[1], &b[1]);
                }
            }
            Ok(acc)
        },
        |x, y| add_assign(x, &y),
    )?
    .expect("non-empty ensemble");
    let nf = cfg.n_members as f64;
    let d1: Vec<f64> = sums[..n_t].iter().map(|v| v / nf).collect();
    let d2: Vec<f64> = sums[n_t..].iter().map(|v| v / nf).collect();
    let mean: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok(TwaDecorrelator { times: t_grid.to_vec(), growth: fit_growth_rate(t_grid, &mean)?, decay: fit_decay_rate(t_grid, &mean)?, d1, d2 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dwell {
    /// First output time with `|<s_minus,z>| <= threshold`, if any.
    pub time: Option<f64>,
    pub minus_z: Vec<f64>,
    pub times: Vec<f64>,
}

/// How long an ensemble started at the antisymmetric self-trapped point
/// (FP-IV) keeps its population imbalance `|<s_minus,z>|` above `threshold`.
pub fn fp4_dwell(p: &ModelParams, spin: Spin, n_samples: usize, dt: f64, t_grid: &[f64], threshold: f64, seed: u64) -> Result<Dwell> {
    let set = crate::model::fixed_points(p)?;
    let fp = set.first(crate::model::Family::FpIV).ok_or_else(|| Error::Domain(format!("no FP-IV at V = {}, gamma = {}", p.v, p.gamma)))?;
    let ens = sample_initial(&fp.location, spin, n_samples, derive_seed(seed, "fp4-ensemble", 0))?;
    let run = evolve_twa(&ens, p, dt, t_grid, derive_seed(seed, "fp4-run", 0))?;
    let minus_z: Vec<f64> = run.minus_mean.iter().map(|m| m[2]).collect();
    let time = minus_z.iter().position(|m| m.abs() <= threshold).map(|i| t_grid[i]);
    Ok(Dwell { time, minus_z, times: t_grid.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{evolve_classical, EvolveOptions};

    #[test]
    fn huge_spin_concentrates_on_center() {
        let c = ClassicalState::new(0.3, 1.0, -0.4, -2.0);
        let ens = sample_initial(&c, Spin::new(1e8).unwrap(), 100, 3).unwrap();
        let cb = c.to_bloch();
        for s in &ens.samples {
            assert!(crate::model::bloch_distance(s, &cb) < 1e-3);
        }
    }

    #[test]
    fn tangent_variance_matches_width() {
        let spin = Spin::new(1000.0).unwrap();
        let c = ClassicalState::symmetric(0.2, 0.7);
        let n = 100_000;
        let ens = sample_initial(&c, spin, n, 11).unwrap();
        let cb = c.to_bloch();
        let (e1, e2) = tangent_basis(&cb[0]);
        let proj = |v: &[f64; 3], e: &[f64; 3]| v[0] * e[0] + v[1] * e[1] + v[2] * e[2];
        for e in [e1, e2] {
            let xs: Vec<f64> = ens.samples.iter().map(|s| proj(&s[0], &e)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            assert!((var * 2000.0 - 1.0).abs() < 0.05, "variance {var}");
        }
        let mean_z: f64 = ens.samples.iter().map(|s| s[0][2]).sum::<f64>() / n as f64;
        assert!((mean_z - 0.2).abs() < 4.0 / (2000.0 * n as f64).sqrt());
    }

    #[test]
    fn zero_dissipation_matches_mean_field() {
        let p = ModelParams::classical(1.3, 0.0);
        let c = ClassicalState::new(0.3, 0.2, -0.1, 1.0);
        let ens = TwaEnsemble { samples: vec![c.to_bloch(); 2], spin: Spin::new(10.0).unwrap(), seed: 0, center: c };
        let run = evolve_twa(&ens, &p, 1e-4, &[0.0, 10.0], 5).unwrap();
        let tr = evolve_classical(&c, &p, &[0.0, 10.0], &EvolveOptions::default()).unwrap();
        let d = crate::model::bloch_distance(&run.mean[1], &tr.bloch[1]);
        assert!(d < 1e-6, "distance {d}");
    }

    #[test]
    fn duplicated_samples_have_zero_fluctuation() {
        let c = ClassicalState::symmetric(0.5, 0.1);
        let ens = TwaEnsemble { samples: vec![c.to_bloch(); 8], spin: Spin::new(50.0).unwrap(), seed: 0, center: c };
        let run = evolve_twa(&ens, &ModelParams::classical(0.5, 0.0), 1e-3, &[0.0, 1.0], 1).unwrap();
        assert!(fluctuation_measure(&run).f.iter().all(|f| *f == 0.0));
    }

    #[test]
    fn initial_fluctuation_bound() {
        let spin = Spin::new(100.0).unwrap();
        let ens = sample_initial(&ClassicalState::symmetric(-0.3, 2.0), spin, 4000, 9).unwrap();
        let run = evolve_twa(&ens, &ModelParams::classical(0.5, 0.2), 1e-3, &[0.0], 1).unwrap();
        let f0 = fluctuation_measure(&run).f[0];
        assert!(f0 <= 1.5 / spin.value() * 1.05, "F(0) = {f0}");
    }

    #[test]
    fn rejects_large_step() {
        let c = ClassicalState::symmetric(0.0, 0.0);
        let ens = sample_initial(&c, Spin::new(10.0).unwrap(), 2, 0).unwrap();
        assert!(matches!(evolve_twa(&ens, &ModelParams::classical(0.5, 0.2), 0.01, &[0.0], 0), Err(Error::StepSize(_))));
    }

    #[test]
    fn seed_determinism_across_threads() {
        let c = ClassicalState::symmetric(0.1, 0.4);
        let ens = sample_initial(&c, Spin::new(100.0).unwrap(), 100, 4).unwrap();
        let p = ModelParams::classical(1.7, 0.2);
        let grid = [0.0, 0.5, 1.0];
        let run = |threads| crate::parallel::thread_pool(threads).unwrap().install(|| evolve_twa(&ens, &p, 1e-3, &grid, 8).unwrap());
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn common_noise_copies_stay_close_in_regular_regime() {
        let p = ModelParams::classical(0.5, 0.2);
        let cfg = TwaDecorrelatorConfig { spin: Spin::new(1000.0).unwrap(), n_members: 8, epsilon: 1e-6, dt: 1e-3 };
        let r = twa_decorrelator(&p, &Region::SymmetricClass, &cfg, &[0.0, 1.0], 2).unwrap();
        assert!(r.mean()[1] < 1e-9);
        assert!((r.mean()[0] / 0.5e-12 - 1.0).abs() < 1e-6);
    }
}
