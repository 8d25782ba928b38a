//! Mean-field dynamics on two Bloch spheres and trajectory-level diagnostics.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{bloch_vector, wrap_phase, BlochPair, ClassicalState, ModelParams};
use crate::ode::{Dopri5, OdeSystem};
use crate::parallel::{add_assign, chunked_reduce};
use crate::seeding::{stream, StreamRng};

/// Deterministic mean-field drift on the unit spheres.
pub fn cartesian_drift(s: &BlochPair, p: &ModelParams) -> BlochPair {
    let mut out = [[0.0; 3]; 2];
    for i in 0..2 {
        let [x, y, z] = s[i];
        let zo = s[1 - i][2];
        out[i] = [
            -p.v * y * zo + p.gamma * x * z - p.omega_z * y,
            p.j * z + p.v * x * zo + p.gamma * y * z + p.omega_z * x,
            -p.j * y - p.gamma * (x * x + y * y),
        ];
    }
    out
}

fn normalize(v: &mut [f64]) {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    for c in v.iter_mut() {
        *c /= n;
    }
}

/// The mean-field flow in the Cartesian chart, state `[s1x, s1y, s1z, s2x, s2y, s2z]`.
pub struct CartesianFlow<'a> {
    pub params: &'a ModelParams,
}

impl OdeSystem for CartesianFlow<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let s = [[y[0], y[1], y[2]], [y[3], y[4], y[5]]];
        let d = cartesian_drift(&s, self.params);
        dy[..3].copy_from_slice(&d[0]);
        dy[3..].copy_from_slice(&d[1]);
    }

    // Per-species partial sums keep swapped runs bit-identical.
    fn error_norm(&self, e: &[f64]) -> f64 {
        let a = e[0] + e[1] + e[2];
        let b = e[3] + e[4] + e[5];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        ((lo + hi) / 6.0).sqrt()
    }

    fn project(&self, y: &mut [f64]) -> bool {
        normalize(&mut y[..3]);
        normalize(&mut y[3..]);
        true
    }
}

/// The flow in canonical `(z1, phi1, z2, phi2)` variables. Singular at `|z| = 1`.
pub struct CanonicalFlow<'a> {
    pub params: &'a ModelParams,
}

impl OdeSystem for CanonicalFlow<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let x = ClassicalState { z1: y[0], phi1: y[1], z2: y[2], phi2: y[3] };
        match crate::model::canonical_rhs(&x, self.params) {
            Ok(d) => dy.copy_from_slice(&d),
            Err(_) => dy.fill(f64::NAN),
        }
    }

    fn error_norm(&self, e: &[f64]) -> f64 {
        let a = e[0] + e[1];
        let b = e[2] + e[3];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        ((lo + hi) / 4.0).sqrt()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    #[default]
    Cartesian,
    Canonical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub chart: Chart,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, chart: Chart::Cartesian }
    }
}

impl EvolveOptions {
    pub fn with_tol(rtol: f64) -> Self {
        Self { rtol, atol: rtol * 1e-2, ..Self::default() }
    }

    fn solver(&self) -> Dopri5 {
        Dopri5::new(self.rtol, self.atol)
    }
}

/// A sampled mean-field trajectory. States are stored as Bloch vectors; the
/// tag records the chart the integration actually ran in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub bloch: Vec<BlochPair>,
    pub chart: Chart,
}

impl Trajectory {
    pub fn states(&self) -> Vec<ClassicalState> {
        self.bloch.iter().map(ClassicalState::from_bloch).collect()
    }

    pub fn last(&self) -> Option<&BlochPair> {
        self.bloch.last()
    }

    /// `z_plus = (z1 + z2) / 2` and `z_minus = (z1 - z2) / 2` per time.
    pub fn z_plus(&self) -> Vec<f64> {
        self.bloch.iter().map(|s| 0.5 * (s[0][2] + s[1][2])).collect()
    }

    pub fn z_minus(&self) -> Vec<f64> {
        self.bloch.iter().map(|s| 0.5 * (s[0][2] - s[1][2])).collect()
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn flatten(s: &BlochPair) -> [f64; 6] {
    [s[0][0], s[0][1], s[0][2], s[1][0], s[1][1], s[1][2]]
}

fn unflatten(y: &[f64]) -> BlochPair {
    [[y[0], y[1], y[2]], [y[3], y[4], y[5]]]
}

/// Integrate Bloch vectors from `t0` to each time of `grid` in the Cartesian chart.
pub fn evolve_bloch(s0: &BlochPair, p: &ModelParams, t0: f64, grid: &[f64], opts: &EvolveOptions) -> Result<Vec<BlochPair>> {
    let flow = CartesianFlow { params: p };
    let mut y0 = flatten(s0);
    flow.project(&mut y0);
    let out = opts.solver().solve_grid(&flow, t0, &y0, grid)?;
    Ok(out.iter().map(|y| unflatten(y)).collect())
}

/// Advance a Bloch pair in place from `t0` to `t1`.
pub fn advance_bloch(s: &mut BlochPair, p: &ModelParams, t0: f64, t1: f64, opts: &EvolveOptions) -> Result<()> {
    let flow = CartesianFlow { params: p };
    let mut y = flatten(s);
    opts.solver().solve_to(&flow, t0, &mut y, t1)?;
    *s = unflatten(&y);
    Ok(())
}

/// Integrate the mean-field equations; `x0` is the state at `t_grid[0]`.
pub fn evolve_classical(x0: &ClassicalState, p: &ModelParams, t_grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    p.validate()?;
    check_grid(t_grid)?;
    if !x0.is_physical() {
        return Err(Error::InvalidParameter(format!("initial state outside the sphere: {x0:?}")));
    }
    if opts.chart == Chart::Canonical {
        match evolve_canonical(x0, p, t_grid, opts) {
            Ok(tr) => return Ok(tr),
            Err(e) => log::warn!("canonical chart failed ({e}); switching to the Cartesian chart"),
        }
    }
    let bloch = evolve_bloch(&x0.to_bloch(), p, t_grid[0], t_grid, opts)?;
    Ok(Trajectory { times: t_grid.to_vec(), bloch, chart: Chart::Cartesian })
}

fn evolve_canonical(x0: &ClassicalState, p: &ModelParams, t_grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    let flow = CanonicalFlow { params: p };
    let out = opts.solver().solve_grid(&flow, t_grid[0], &x0.to_array(), t_grid)?;
    let bloch = out.iter().map(|y| ClassicalState::new(y[0], y[1], y[2], y[3]).to_bloch()).collect();
    Ok(Trajectory { times: t_grid.to_vec(), bloch, chart: Chart::Canonical })
}

/// Mean-field energy per spin, `-J(s1x + s2x) + V s1z s2z + omega_z (s1z + s2z)`.
pub fn mean_field_energy(s: &BlochPair, p: &ModelParams) -> f64 {
    -p.j * (s[0][0] + s[1][0]) + p.v * s[0][2] * s[1][2] + p.omega_z * (s[0][2] + s[1][2])
}

/// Normalized Josephson current of each species, `-J s_y`.
pub fn atomic_current(s: &BlochPair, p: &ModelParams) -> [f64; 2] {
    [-p.j * s[0][1], -p.j * s[1][1]]
}

/// Time average of the current over a trajectory (trapezoidal rule).
pub fn mean_current(tr: &Trajectory, p: &ModelParams) -> Result<[f64; 2]> {
    if tr.times.len() < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    let mut acc = [0.0; 2];
    for k in 1..tr.times.len() {
        let dt = tr.times[k] - tr.times[k - 1];
        let a = atomic_current(&tr.bloch[k - 1], p);
        let b = atomic_current(&tr.bloch[k], p);
        for i in 0..2 {
            acc[i] += 0.5 * dt * (a[i] + b[i]);
        }
    }
    let span = tr.times[tr.times.len() - 1] - tr.times[0];
    Ok([acc[0] / span, acc[1] / span])
}

fn log_argument(z: f64, phi: f64, p: &ModelParams) -> Result<Complex64> {
    if z.abs() >= 1.0 {
        return Err(Error::Domain(format!("|z_plus| = {} must be below 1", z.abs())));
    }
    let denom = Complex64::new(p.gamma, -p.v);
    if denom.norm() == 0.0 {
        return Err(Error::Singular("gamma = V = 0".into()));
    }
    let w = Complex64::i() * (1.0 - z * z).sqrt() * Complex64::from_polar(1.0, -phi) + p.j / denom;
    if w.norm() == 0.0 {
        return Err(Error::Singular("logarithm argument vanishes".into()));
    }
    Ok(w)
}

/// The orbit invariant of the symmetric class, principal branch of the logarithm.
/// Along the reduced flow `d ln w / dt = z (gamma - iV)`, so the prefactor must
/// be `-V + i gamma` for the real part to be constant.
pub fn conserved_r(z_plus: f64, phi_plus: f64, p: &ModelParams) -> Result<f64> {
    let w = log_argument(z_plus, phi_plus, p)?;
    let c = Complex64::new(-p.v, p.gamma);
    Ok(2.0 * (c * w.ln()).re)
}

/// Evaluates the invariant along an orbit, continuing the logarithm branch
/// so the value has no jumps when the orbit winds.
#[derive(Clone, Debug, Default)]
pub struct ConservedRTracker {
    arg: Option<f64>,
}

impl ConservedRTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next(&mut self, z_plus: f64, phi_plus: f64, p: &ModelParams) -> Result<f64> {
        let w = log_argument(z_plus, phi_plus, p)?;
        let raw = w.arg();
        let arg = match self.arg {
            None => raw,
            Some(prev) => prev + wrap_phase(raw - prev),
        };
        self.arg = Some(arg);
        Ok(2.0 * (-p.v * w.norm().ln() - p.gamma * arg))
    }
}

/// `(z_plus, phi_plus)` of a Bloch pair.
pub fn plus_coordinates(s: &BlochPair) -> (f64, f64) {
    let x = ClassicalState::from_bloch(s);
    (0.5 * (x.z1 + x.z2), x.phi1 + 0.5 * wrap_phase(x.phi2 - x.phi1))
}

/// Branch-continuous invariant along a trajectory.
pub fn conserved_r_series(tr: &Trajectory, p: &ModelParams) -> Result<Vec<f64>> {
    let mut tracker = ConservedRTracker::new();
    tr.bloch
        .iter()
        .map(|s| {
            let (z, phi) = plus_coordinates(s);
            tracker.next(z, phi, p)
        })
        .collect()
}

/// Phase-space region from which ensemble members are drawn uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    /// Both spins uniform on their spheres.
    Sphere,
    /// Uniform on the sphere with both species at the same point.
    SymmetricClass,
    /// Uniform in `z_i`, `phi_i` within the given intervals.
    Box { z1: (f64, f64), phi1: (f64, f64), z2: (f64, f64), phi2: (f64, f64) },
    /// A single point.
    Point { state: ClassicalState },
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        if let Region::Box { z1, phi1, z2, phi2 } = self {
            let ok_z = |r: &(f64, f64)| r.0 < r.1 && r.0 >= -1.0 && r.1 <= 1.0;
            let ok_phi = |r: &(f64, f64)| r.0 < r.1 && r.0.is_finite() && r.1.is_finite();
            if !(ok_z(z1) && ok_z(z2) && ok_phi(phi1) && ok_phi(phi2)) {
                return Err(Error::InvalidParameter(format!("empty or invalid region {self:?}")));
            }
        }
        if let Region::Point { state } = self {
            if !state.is_physical() {
                return Err(Error::InvalidParameter(format!("point outside the sphere: {state:?}")));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ClassicalState {
        let mut u = |a: f64, b: f64| a + (b - a) * rng.random::<f64>();
        match self {
            Region::Sphere => {
                let (z1, p1, z2, p2) = (u(-1.0, 1.0), u(-PI, PI), u(-1.0, 1.0), u(-PI, PI));
                ClassicalState::new(z1, p1, z2, p2)
            }
            Region::SymmetricClass => {
                let (z, phi) = (u(-1.0, 1.0), u(-PI, PI));
                ClassicalState::symmetric(z, phi)
            }
            Region::Box { z1, phi1, z2, phi2 } => {
                let a = u(z1.0, z1.1);
                let b = u(phi1.0, phi1.1);
                let c = u(z2.0, z2.1);
                let d = u(phi2.0, phi2.1);
                ClassicalState::new(a, b, c, d)
            }
            Region::Point { state } => *state,
        }
    }
}

/// Unit vector tangent to the sphere at `s`, uniformly random in the tangent plane.
pub(crate) fn random_tangent<R: Rng + ?Sized>(s: &[f64; 3], rng: &mut R) -> [f64; 3] {
    let (e1, e2) = tangent_basis(s);
    let a = 2.0 * PI * rng.random::<f64>();
    let (sa, ca) = a.sin_cos();
    [ca * e1[0] + sa * e2[0], ca * e1[1] + sa * e2[1], ca * e1[2] + sa * e2[2]]
}

/// Orthonormal tangent basis `(e_theta, e_phi)` at a unit vector.
pub(crate) fn tangent_basis(s: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let z = s[2].clamp(-1.0, 1.0);
    let phi = s[1].atan2(s[0]);
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (sp, cp) = phi.sin_cos();
    ([z * cp, z * sp, -r], [-sp, cp, 0.0])
}

/// Rotate a unit vector by angle `eps` towards a random tangent direction.
pub fn perturb<R: Rng + ?Sized>(s: &[f64; 3], eps: f64, rng: &mut R) -> [f64; 3] {
    let u = random_tangent(s, rng);
    let (se, ce) = eps.sin_cos();
    [ce * s[0] + se * u[0], ce * s[1] + se * u[1], ce * s[2] + se * u[2]]
}

/// `1 - a.b` for unit vectors, evaluated as `|a - b|^2 / 2` to keep precision
/// when the vectors are close.
pub fn decorrelation(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d: f64 = (0..3).map(|c| (a[c] - b[c]).powi(2)).sum();
    0.5 * d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecorrelatorConfig {
    pub n_members: usize,
    pub epsilon: f64,
    pub options: EvolveOptions,
}

impl Default for DecorrelatorConfig {
    fn default() -> Self {
        Self { n_members: 64, epsilon: 1e-6, options: EvolveOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecorrelatorSeries {
    pub times: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub epsilon: f64,
    pub ensemble_size: usize,
}

impl DecorrelatorSeries {
    /// Species-averaged decorrelator.
    pub fn mean(&self) -> Vec<f64> {
        self.d1.iter().zip(&self.d2).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

const MEMBER_CHUNK: usize = 8;

/// Ensemble-averaged decorrelator of paired mean-field trajectories.
pub fn decorrelator(region: &Region, p: &ModelParams, t_grid: &[f64], cfg: &DecorrelatorConfig, seed: u64) -> Result<DecorrelatorSeries> {
    p.validate()?;
    region.validate()?;
    check_grid(t_grid)?;
    if cfg.n_members == 0 {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let n_t = t_grid.len();
    let sums = chunked_reduce(
        cfg.n_members,
        MEMBER_CHUNK,
        |range| {
            let mut acc = vec![0.0; 2 * n_t];
            for k in range {
                let mut rng = stream(seed, "decorrelator", k as u64);
                let x = region.sample(&mut rng);
                let a0 = x.to_bloch();
                let b0 = [perturb(&a0[0], cfg.epsilon, &mut rng), perturb(&a0[1], cfg.epsilon, &mut rng)];
                let a = evolve_bloch(&a0, p, t_grid[0], t_grid, &cfg.options)?;
                let b = evolve_bloch(&b0, p, t_grid[0], t_grid, &cfg.options)?;
                for t in 0..n_t {
                    acc[t] += decorrelation(&a[t][0], &b[t][0]);
                    acc[n_t + t] += decorrelation(&a[t][1], &b[t][1]);
                }
            }
            Ok(acc)
        },
        |a, b| add_assign(a, &b),
    )?
    .expect("non-empty ensemble");
    let norm = cfg.n_members as f64;
    Ok(DecorrelatorSeries {
        times: t_grid.to_vec(),
        d1: sums[..n_t].iter().map(|v| v / norm).collect(),
        d2: sums[n_t..].iter().map(|v| v / norm).collect(),
        epsilon: cfg.epsilon,
        ensemble_size: cfg.n_members,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovConfig {
    pub n_members: usize,
    pub d0: f64,
    pub renormalization_interval: f64,
    pub transient: f64,
    pub total_time: f64,
    pub options: EvolveOptions,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            n_members: 16,
            d0: 1e-8,
            renormalization_interval: 1.0,
            transient: 50.0,
            total_time: 2000.0,
            options: EvolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// Ensemble-mean maximal exponent.
    pub lambda: f64,
    pub std: f64,
    pub per_member: Vec<f64>,
    pub discarded: usize,
    pub transient_discard: f64,
    pub renormalization_interval: f64,
}

fn pair_distance(a: &BlochPair, b: &BlochPair) -> f64 {
    crate::model::bloch_distance(a, b)
}

fn member_lyapunov(x: &ClassicalState, p: &ModelParams, cfg: &LyapunovConfig, rng: &mut StreamRng) -> Result<f64> {
    let opts = &cfg.options;
    let mut a = x.to_bloch();
    advance_bloch(&mut a, p, 0.0, cfg.transient, opts)?;
    let mut b = a;
    let dirs = [random_tangent(&a[0], rng), random_tangent(&a[1], rng)];
    let scale = cfg.d0 / 2f64.sqrt();
    for i in 0..2 {
        for c in 0..3 {
            b[i][c] += scale * dirs[i][c];
        }
    }
    let steps = ((cfg.total_time - cfg.transient) / cfg.renormalization_interval).round() as usize;
    let mut t = cfg.transient;
    let mut log_sum = 0.0;
    let d_start = pair_distance(&a, &b);
    let mut d_ref = d_start;
    for _ in 0..steps {
        let t1 = t + cfg.renormalization_interval;
        advance_bloch(&mut a, p, t, t1, opts)?;
        advance_bloch(&mut b, p, t, t1, opts)?;
        let d = pair_distance(&a, &b);
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Integrator { t: t1, reason: "shadow trajectory collapsed".into() });
        }
        log_sum += (d / d_ref).ln();
        let f = cfg.d0 / d;
        for i in 0..2 {
            for c in 0..3 {
                b[i][c] = a[i][c] + f * (b[i][c] - a[i][c]);
            }
            normalize(&mut b[i]);
        }
        d_ref = pair_distance(&a, &b);
        t = t1;
    }
    Ok(log_sum / (steps as f64 * cfg.renormalization_interval))
}

/// Maximal Lyapunov exponent by shadow-trajectory renormalization.
pub fn lyapunov_exponent(region: &Region, p: &ModelParams, cfg: &LyapunovConfig, seed: u64) -> Result<LyapunovResult> {
    p.validate()?;
    region.validate()?;
    let span = cfg.total_time - cfg.transient;
    if !(cfg.renormalization_interval > 0.0 && span >= 10.0 * cfg.renormalization_interval) {
        return Err(Error::InvalidParameter("integration time must be at least ten renormalization intervals".into()));
    }
    if cfg.n_members == 0 || !(cfg.d0 > 0.0) {
        return Err(Error::InvalidParameter("need members and a positive d0".into()));
    }
    let outcomes = chunked_reduce(
        cfg.n_members,
        1,
        |range| {
            let k = range.start;
            let mut rng = stream(seed, "lyapunov", k as u64);
            let x = region.sample(&mut rng);
            Ok(vec![member_lyapunov(&x, p, cfg, &mut rng).map_err(|e| e.to_string())])
        },
        |a, b| a.extend(b),
    )?
    .expect("non-empty ensemble");
    let mut per_member = Vec::new();
    let mut discarded = 0;
    for o in outcomes {
        match o {
            Ok(l) => per_member.push(l),
            Err(e) => {
                log::warn!("Lyapunov member discarded: {e}");
                discarded += 1;
            }
        }
    }
    if per_member.is_empty() {
        return Err(Error::InsufficientData("every Lyapunov member failed".into()));
    }
    let n = per_member.len() as f64;
    let lambda = per_member.iter().sum::<f64>() / n;
    let var = per_member.iter().map(|l| (l - lambda).powi(2)).sum::<f64>() / n;
    Ok(LyapunovResult {
        lambda,
        std: var.sqrt(),
        per_member,
        discarded,
        transient_discard: cfg.transient,
        renormalization_interval: cfg.renormalization_interval,
    })
}

/// Uniform `(z, phi)` grid with cell-centred coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nz: usize,
    pub nphi: usize,
}

impl GridSpec {
    pub fn new(nz: usize, nphi: usize) -> Result<Self> {
        if nz == 0 || nphi == 0 {
            return Err(Error::InvalidParameter("grid must have at least one cell per axis".into()));
        }
        Ok(Self { nz, nphi })
    }

    pub fn cells(&self) -> usize {
        self.nz * self.nphi
    }

    /// `(iz, iphi)` of the cell containing `(z, phi)`.
    pub fn cell_of(&self, z: f64, phi: f64) -> (usize, usize) {
        let iz = (((z + 1.0) / 2.0) * self.nz as f64).floor().clamp(0.0, (self.nz - 1) as f64) as usize;
        let u = (wrap_phase(phi) + PI) / (2.0 * PI);
        let ip = (u * self.nphi as f64).floor().clamp(0.0, (self.nphi - 1) as f64) as usize;
        (iz, ip)
    }

    pub fn z_center(&self, iz: usize) -> f64 {
        -1.0 + (iz as f64 + 0.5) * 2.0 / self.nz as f64
    }

    pub fn phi_center(&self, ip: usize) -> f64 {
        -PI + (ip as f64 + 0.5) * 2.0 * PI / self.nphi as f64
    }
}

/// Normalized histogram over `(z1, phi1)`, stored row-major in `(iz, iphi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceHistogram {
    pub grid: GridSpec,
    pub probabilities: Vec<f64>,
}

impl PhaseSpaceHistogram {
    pub fn from_states(states: &[ClassicalState], grid: GridSpec) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InsufficientData("no states to histogram".into()));
        }
        let mut probabilities = vec![0.0; grid.cells()];
        let w = 1.0 / states.len() as f64;
        for s in states {
            let (iz, ip) = grid.cell_of(s.z1, s.phi1);
            probabilities[iz * grid.nphi + ip] += w;
        }
        Ok(Self { grid, probabilities })
    }

    pub fn get(&self, iz: usize, ip: usize) -> f64 {
        self.probabilities[iz * self.grid.nphi + ip]
    }

    /// `1 / sum p^2`: the effective number of occupied cells.
    pub fn participation_ratio(&self) -> f64 {
        1.0 / self.probabilities.iter().map(|p| p * p).sum::<f64>()
    }

    pub fn occupied_cells(&self) -> Vec<(usize, usize)> {
        (0..self.grid.nz).flat_map(|iz| (0..self.grid.nphi).map(move |ip| (iz, ip))).filter(|&(iz, ip)| self.get(iz, ip) > 0.0).collect()
    }

    /// Whether every occupied cell is within `radius` cells (periodic in phi) of `(z, phi)`.
    pub fn concentrated_near(&self, z: f64, phi: f64, radius: usize) -> bool {
        let (cz, cp) = self.grid.cell_of(z, phi);
        self.occupied_cells().iter().all(|&(iz, ip)| {
            let dz = iz.abs_diff(cz);
            let dp = ip.abs_diff(cp);
            let dp = dp.min(self.grid.nphi - dp);
            dz <= radius && dp <= radius
        })
    }
}

/// Evolve an ensemble drawn from `region` to `t_snapshot` and histogram species 1.
pub fn phase_space_density(
    region: &Region,
    n_members: usize,
    p: &ModelParams,
    t_snapshot: f64,
    grid: GridSpec,
    seed: u64,
    opts: &EvolveOptions,
) -> Result<PhaseSpaceHistogram> {
    p.validate()?;
    region.validate()?;
    if n_members == 0 {
        return Err(Error::InvalidParameter("empty ensemble".into()));
    }
    let states = chunked_reduce(
        n_members,
        MEMBER_CHUNK,
        |range| {
            let mut out = Vec::with_capacity(range.len());
            for k in range {
                let mut rng = stream(seed, "phase-space", k as u64);
                let mut s = region.sample(&mut rng).to_bloch();
                if t_snapshot > 0.0 {
                    advance_bloch(&mut s, p, 0.0, t_snapshot, opts)?;
                }
                out.push(ClassicalState::from_bloch(&s));
            }
            Ok(out)
        },
        |a, b| a.extend(b),
    )?
    .expect("non-empty ensemble");
    PhaseSpaceHistogram::from_states(&states, grid)
}

/// Bloch pair of a symmetric-class state at `(z, phi)`.
pub fn symmetric_bloch(z: f64, phi: f64) -> BlochPair {
    let s = bloch_vector(z, phi);
    [s, s]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixed_points, Family};

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
    }

    #[test]
    fn canonical_derivative_at_origin() {
        let p = ModelParams::classical(0.5, 0.2);
        let d = crate::model::canonical_rhs(&ClassicalState::symmetric(0.0, 0.0), &p).unwrap();
        assert!((d[0] + 0.2).abs() < 1e-15 && d[1].abs() < 1e-15);
    }

    #[test]
    fn drift_is_tangent() {
        let p = ModelParams::classical(1.3, 0.4).with_tilt(0.3);
        let s = ClassicalState::new(0.3, 1.0, -0.7, -2.0).to_bloch();
        let d = cartesian_drift(&s, &p);
        for i in 0..2 {
            let dot: f64 = (0..3).map(|c| s[i][c] * d[i][c]).sum();
            assert!(dot.abs() < 1e-15);
        }
    }

    #[test]
    fn cartesian_and_canonical_charts_agree() {
        let p = ModelParams::classical(0.8, 0.1).with_tilt(0.2);
        let x0 = ClassicalState::new(0.2, 0.5, -0.3, 1.0);
        let g = grid(5.0, 10);
        let a = evolve_classical(&x0, &p, &g, &EvolveOptions::default()).unwrap();
        let opts = EvolveOptions { chart: Chart::Canonical, ..EvolveOptions::default() };
        let b = evolve_classical(&x0, &p, &g, &opts).unwrap();
        assert_eq!(b.chart, Chart::Canonical);
        for (sa, sb) in a.bloch.iter().zip(&b.bloch) {
            assert!(crate::model::bloch_distance(sa, sb) < 1e-8);
        }
    }

    #[test]
    fn conserved_r_reference_value() {
        let p = ModelParams::classical(0.5, 0.2);
        let r = conserved_r(0.0, 0.0, &p).unwrap();
        // Independent evaluation: w = i + 1/(0.2 - 0.5 i), R = 2 Re[(-0.5 + 0.2 i) ln w].
        let wr: f64 = 0.2 / 0.29;
        let wi: f64 = 1.0 + 0.5 / 0.29;
        let (ln_abs, arg) = ((wr * wr + wi * wi).sqrt().ln(), wi.atan2(wr));
        assert!((r - 2.0 * (-0.5 * ln_abs - 0.2 * arg)).abs() < 1e-14);
    }

    #[test]
    fn conserved_r_is_stationary_under_reduced_flow() {
        // Central difference along the two-dimensional symmetric-class equations.
        let p = ModelParams::classical(0.5, 0.2);
        for (z, phi) in [(0.3f64, 0.4f64), (-0.6, 2.0), (0.1, -2.5)] {
            let rho: f64 = (1.0f64 - z * z).sqrt();
            let dz = -p.j * rho * phi.sin() - p.gamma * (1.0 - z * z);
            let dphi = p.j * z * phi.cos() / rho + p.v * z;
            let h = 1e-6;
            let ahead = conserved_r(z + h * dz, phi + h * dphi, &p).unwrap();
            let behind = conserved_r(z - h * dz, phi - h * dphi, &p).unwrap();
            assert!(((ahead - behind) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn conserved_r_rejects_pole() {
        let p = ModelParams::classical(0.5, 0.2);
        assert!(conserved_r(1.0, 0.0, &p).is_err());
        assert!(matches!(conserved_r(0.0, 0.0, &ModelParams::classical(0.0, 0.0)), Err(Error::Singular(_))));
    }

    #[test]
    fn current_at_fixed_points() {
        let p = ModelParams::classical(1.7, 0.2);
        let set = fixed_points(&p).unwrap();
        let fp1 = set.first(Family::FpI).unwrap().location.to_bloch();
        let fp3 = set.first(Family::FpIII).unwrap().location.to_bloch();
        assert!((atomic_current(&fp1, &p)[0] - 0.2).abs() < 1e-14);
        let expected = 0.2 / (1.7 * 1.7 + 0.04);
        assert!((atomic_current(&fp3, &p)[1] - expected).abs() < 1e-14);
        assert_eq!(atomic_current(&symmetric_bloch(0.4, 0.0), &p), [0.0, 0.0]);
    }

    #[test]
    fn perturbation_has_requested_angle() {
        let mut rng = stream(1, "t", 0);
        let s = bloch_vector(0.3, 2.0);
        let b = perturb(&s, 1e-3, &mut rng);
        assert!((decorrelation(&s, &b) - (1.0 - 1e-3f64.cos())).abs() < 1e-15);
        assert!(((b[0] * b[0] + b[1] * b[1] + b[2] * b[2]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_of_point_ensemble_is_single_cell() {
        let x = ClassicalState::symmetric(0.1, 0.3);
        let h = PhaseSpaceHistogram::from_states(&[x; 10], GridSpec::new(20, 20).unwrap()).unwrap();
        assert_eq!(h.occupied_cells().len(), 1);
        assert!((h.participation_ratio() - 1.0).abs() < 1e-12);
        assert!((h.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_region_is_rejected() {
        let r = Region::Box { z1: (0.5, 0.5), phi1: (0.0, 1.0), z2: (0.0, 1.0), phi2: (0.0, 1.0) };
        let p = ModelParams::classical(1.0, 0.1);
        assert!(decorrelator(&r, &p, &[0.0, 1.0], &DecorrelatorConfig::default(), 0).is_err());
    }
}
