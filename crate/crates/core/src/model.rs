//! Model parameters, mean-field fixed points and their linear stability.
//!
//! Canonical variables are ordered `(z1, phi1, z2, phi2)` everywhere in this
//! module. Phases are stored in `(-pi, pi]`.

use std::f64::consts::PI;
use std::fmt;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Real parts with magnitude below `STABILITY_TOL * J` count as zero.
pub const STABILITY_TOL: f64 = 1e-8;

/// Maximum equations-of-motion residual accepted for a fixed point.
pub const FIXED_POINT_RESIDUAL: f64 = 1e-10;

/// Largest `|z|` used when converting between charts.
pub const Z_CLAMP: f64 = 1.0 - 1e-12;

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Spin magnitude `S`, stored as the integer `2S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub fn new(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("spin magnitude must be a positive half-integer, got {s}")));
        }
        Self::from_twice(twice.round() as u32)
    }

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidParameter("spin magnitude must be >= 1/2".into()));
        }
        Ok(Self { twice })
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Dimension `2S + 1` of the single-spin Hilbert space.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Magnetic quantum number of basis index `k` (`m = S - k`).
    pub fn m(self, k: usize) -> f64 {
        self.value() - k as f64
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl Serialize for Spin {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Spin {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = f64::deserialize(deserializer)?;
        Spin::new(s).map_err(serde::de::Error::custom)
    }
}

/// Physical couplings of the coupled-top model. All rates are in units of `J`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Hopping amplitude.
    #[serde(rename = "J", default = "default_j")]
    pub j: f64,
    /// Interspecies coupling.
    #[serde(rename = "V")]
    pub v: f64,
    /// Incoherent hopping rate.
    pub gamma: f64,
    /// Tilt between the wells.
    #[serde(default)]
    pub omega_z: f64,
    /// Collective spin magnitude, `N = 2S` atoms per species.
    #[serde(rename = "S", default = "default_spin")]
    pub spin: Spin,
}

fn default_j() -> f64 {
    1.0
}

fn default_spin() -> Spin {
    Spin { twice: 1 }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { j: 1.0, v: 0.0, gamma: 0.0, omega_z: 0.0, spin: default_spin() }
    }
}

impl ModelParams {
    pub fn new(j: f64, v: f64, gamma: f64, omega_z: f64, s: f64) -> Result<Self> {
        let p = Self { j, v, gamma, omega_z, spin: Spin::new(s)? };
        p.validate()?;
        Ok(p)
    }

    /// `J = 1`, no tilt, `S = 1/2`.
    pub fn classical(v: f64, gamma: f64) -> Self {
        Self { v, gamma, ..Self::default() }
    }

    pub fn with_tilt(mut self, omega_z: f64) -> Self {
        self.omega_z = omega_z;
        self
    }

    pub fn with_spin(mut self, spin: Spin) -> Self {
        self.spin = spin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.j, self.v, self.gamma, self.omega_z].iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        if self.j <= 0.0 {
            return Err(Error::InvalidParameter(format!("J must be positive, got {}", self.j)));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Mean-field state: population imbalance and relative phase of each species.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub z1: f64,
    pub phi1: f64,
    pub z2: f64,
    pub phi2: f64,
}

/// Two unit Bloch vectors `[s1, s2]`.
pub type BlochPair = [[f64; 3]; 2];

pub fn bloch_vector(z: f64, phi: f64) -> [f64; 3] {
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

/// `(z, phi)` of a (not necessarily normalized) Bloch vector.
pub fn bloch_angles(s: &[f64; 3]) -> (f64, f64) {
    let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    let z = (s[2] / norm).clamp(-Z_CLAMP, Z_CLAMP);
    (z, s[1].atan2(s[0]))
}

impl ClassicalState {
    pub fn new(z1: f64, phi1: f64, z2: f64, phi2: f64) -> Self {
        Self { z1, phi1: wrap_phase(phi1), z2, phi2: wrap_phase(phi2) }
    }

    /// Both species at the same point (the symmetric dynamical class).
    pub fn symmetric(z: f64, phi: f64) -> Self {
        Self::new(z, phi, z, phi)
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.z1, self.phi1, self.z2, self.phi2]
    }

    pub fn from_bloch(s: &BlochPair) -> Self {
        let (z1, phi1) = bloch_angles(&s[0]);
        let (z2, phi2) = bloch_angles(&s[1]);
        Self { z1, phi1, z2, phi2 }
    }

    pub fn to_bloch(&self) -> BlochPair {
        [bloch_vector(self.z1, self.phi1), bloch_vector(self.z2, self.phi2)]
    }

    /// Exchange the two species.
    pub fn swapped(&self) -> Self {
        Self { z1: self.z2, phi1: self.phi2, z2: self.z1, phi2: self.phi1 }
    }

    pub fn is_physical(&self) -> bool {
        self.z1.abs() <= 1.0 && self.z2.abs() <= 1.0 && self.phi1.is_finite() && self.phi2.is_finite()
    }

    /// Euclidean distance between the Bloch-vector pairs (free of phase-wrap
    /// and pole ambiguities).
    pub fn distance(&self, other: &Self) -> f64 {
        bloch_distance(&self.to_bloch(), &other.to_bloch())
    }

    /// Max-norm distance in canonical coordinates with wrapped phase differences.
    pub fn canonical_distance(&self, other: &Self) -> f64 {
        let dz1 = (self.z1 - other.z1).abs();
        let dz2 = (self.z2 - other.z2).abs();
        let dp1 = wrap_phase(self.phi1 - other.phi1).abs();
        let dp2 = wrap_phase(self.phi2 - other.phi2).abs();
        dz1.max(dz2).max(dp1).max(dp2)
    }
}

pub fn bloch_distance(a: &BlochPair, b: &BlochPair) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        for c in 0..3 {
            let d = a[i][c] - b[i][c];
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// Canonical equations of motion including the tilt, `d/dt (z1, phi1, z2, phi2)`.
pub fn canonical_rhs(x: &ClassicalState, p: &ModelParams) -> Result<[f64; 4]> {
    let zs = [x.z1, x.z2];
    let phis = [x.phi1, x.phi2];
    let mut out = [0.0; 4];
    for i in 0..2 {
        let z = zs[i];
        let one_minus = 1.0 - z * z;
        if one_minus <= 0.0 {
            return Err(Error::Pole(format!("species {} has z = {z}", i + 1)));
        }
        let r = one_minus.sqrt();
        let (s, c) = phis[i].sin_cos();
        out[2 * i] = -p.j * r * s - p.gamma * one_minus;
        out[2 * i + 1] = p.j * z * c / r + p.v * zs[1 - i] + p.omega_z;
    }
    Ok(out)
}

/// Closed-form Jacobian of [`canonical_rhs`], rows and columns ordered
/// `(z1, phi1, z2, phi2)`.
pub fn jacobian(x: &ClassicalState, p: &ModelParams) -> Result<[[f64; 4]; 4]> {
    let zs = [x.z1, x.z2];
    let phis = [x.phi1, x.phi2];
    let mut jac = [[0.0; 4]; 4];
    for i in 0..2 {
        let z = zs[i];
        let one_minus = 1.0 - z * z;
        if one_minus <= 0.0 {
            return Err(Error::Pole(format!("Jacobian undefined at z{} = {z}; use the Cartesian chart", i + 1)));
        }
        let r = one_minus.sqrt();
        let (s, c) = phis[i].sin_cos();
        let (zi, pi, zo) = (2 * i, 2 * i + 1, 2 * (1 - i));
        jac[zi][zi] = p.j * z * s / r + 2.0 * p.gamma * z;
        jac[zi][pi] = -p.j * r * c;
        jac[pi][zi] = p.j * c / (one_minus * r);
        jac[pi][pi] = -p.j * z * s / r;
        jac[pi][zo] = p.v;
    }
    Ok(jac)
}

/// Central finite-difference Jacobian, used to validate [`jacobian`].
pub fn jacobian_fd(x: &ClassicalState, p: &ModelParams, h: f64) -> Result<[[f64; 4]; 4]> {
    let base = x.to_array();
    let mut jac = [[0.0; 4]; 4];
    for col in 0..4 {
        let mut plus = base;
        let mut minus = base;
        plus[col] += h;
        minus[col] -= h;
        let fp = canonical_rhs(&raw_state(plus), p)?;
        let fm = canonical_rhs(&raw_state(minus), p)?;
        for row in 0..4 {
            jac[row][col] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn raw_state(x: [f64; 4]) -> ClassicalState {
    ClassicalState { z1: x[0], phi1: x[1], z2: x[2], phi2: x[3] }
}

/// Linear-stability class of a fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityClass {
    /// All real parts vanish.
    Center,
    /// All real parts negative.
    Attractor,
    /// At least one positive real part.
    Unstable,
    /// No positive real part, but a mix of vanishing and negative ones.
    Marginal,
}

/// Classify eigenvalues with the tolerance `STABILITY_TOL * j`.
pub fn classify(eigenvalues: &[Complex64], j: f64) -> StabilityClass {
    let tol = STABILITY_TOL * j;
    if eigenvalues.iter().any(|l| l.re > tol) {
        StabilityClass::Unstable
    } else if eigenvalues.iter().all(|l| l.re < -tol) {
        StabilityClass::Attractor
    } else if eigenvalues.iter().all(|l| l.re.abs() < tol) {
        StabilityClass::Center
    } else {
        StabilityClass::Marginal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub eigenvalues: Vec<Complex64>,
    pub classification: StabilityClass,
}

impl Stability {
    pub fn max_real(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn eigenvalues_4x4(m: &[[f64; 4]; 4]) -> Result<Vec<Complex64>> {
    let mat = Mat::<f64>::from_fn(4, 4, |i, j| m[i][j]);
    mat.eigenvalues().map_err(|_| Error::Eigen)
}

/// Eigenvalues of the 4x4 Jacobian at `x` and the resulting class.
pub fn linear_stability(x: &ClassicalState, p: &ModelParams) -> Result<Stability> {
    let jac = jacobian(x, p)?;
    let mut eigenvalues = eigenvalues_4x4(&jac)?;
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let classification = classify(&eigenvalues, p.j);
    Ok(Stability { eigenvalues, classification })
}

/// `V_c = sqrt(J^2 - gamma^2)`: the coupling at which the antisymmetric
/// Josephson mode softens.
pub fn critical_coupling(p: &ModelParams) -> Result<f64> {
    if p.gamma >= p.j {
        return Err(Error::Domain(format!("gamma = {} >= J = {}: the oscillatory phase does not exist", p.gamma, p.j)));
    }
    Ok((p.j * p.j - p.gamma * p.gamma).sqrt())
}

/// Frequency of a small-amplitude normal mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeFrequency {
    Oscillating(f64),
    /// The mode is exponentially unstable with this growth rate.
    Unstable {
        growth_rate: f64,
    },
}

impl ModeFrequency {
    pub fn frequency(self) -> Option<f64> {
        match self {
            ModeFrequency::Oscillating(w) => Some(w),
            ModeFrequency::Unstable { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalModes {
    pub omega_plus: ModeFrequency,
    pub omega_minus: ModeFrequency,
}

/// Small-oscillation frequencies about FP-I/FP-II, in units of `J`:
/// `omega_pm = (1/J) sqrt(a (a +- V))` with `a = sqrt(J^2 - gamma^2)`.
pub fn oscillation_frequencies(p: &ModelParams) -> Result<NormalModes> {
    let a = critical_coupling(p)?;
    let mode = |inner: f64| {
        if inner >= 0.0 {
            ModeFrequency::Oscillating(inner.sqrt() / p.j)
        } else {
            ModeFrequency::Unstable { growth_rate: (-inner).sqrt() / p.j }
        }
    };
    Ok(NormalModes { omega_plus: mode(a * (a + p.v)), omega_minus: mode(a * (a - p.v)) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "FP-I")]
    FpI,
    #[serde(rename = "FP-II")]
    FpII,
    #[serde(rename = "FP-III")]
    FpIII,
    #[serde(rename = "FP-IV")]
    FpIV,
    #[serde(rename = "numeric")]
    Numeric,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::FpI => "FP-I",
            Family::FpII => "FP-II",
            Family::FpIII => "FP-III",
            Family::FpIV => "FP-IV",
            Family::Numeric => "numeric",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub family: Family,
    pub location: ClassicalState,
    pub eigenvalues: Vec<Complex64>,
    pub classification: StabilityClass,
}

impl FixedPoint {
    fn analyze(family: Family, location: ClassicalState, p: &ModelParams) -> Result<Self> {
        let res = residual(&location, p)?;
        if res >= FIXED_POINT_RESIDUAL {
            return Err(Error::Domain(format!("{family} residual {res:e} exceeds tolerance")));
        }
        let st = linear_stability(&location, p)?;
        Ok(Self { family, location, eigenvalues: st.eigenvalues, classification: st.classification })
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Seed of the numeric root search that did not produce a fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: ClassicalState,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub points: Vec<FixedPoint>,
    /// Non-converged seeds of the numeric search (empty for the analytic path).
    pub failed_seeds: Vec<SeedFailure>,
}

impl FixedPointSet {
    pub fn family(&self, family: Family) -> impl Iterator<Item = &FixedPoint> {
        self.points.iter().filter(move |fp| fp.family == family)
    }

    pub fn first(&self, family: Family) -> Option<&FixedPoint> {
        self.family(family).next()
    }

    pub fn has_attractor(&self) -> bool {
        self.points.iter().any(|fp| fp.classification == StabilityClass::Attractor)
    }
}

/// Max-norm of the canonical equations of motion.
pub fn residual(x: &ClassicalState, p: &ModelParams) -> Result<f64> {
    Ok(canonical_rhs(x, p)?.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Self-trapped imbalance `sqrt(1 - J^2/(V^2 + gamma^2))`, when it exists.
pub fn self_trapped_imbalance(p: &ModelParams) -> Option<f64> {
    let g2 = p.v * p.v + p.gamma * p.gamma;
    (g2 > p.j * p.j).then(|| (1.0 - p.j * p.j / g2).sqrt())
}

/// Fixed points of the mean-field flow.
///
/// Without tilt the analytic families are returned: FP-I and FP-II (when
/// `gamma < J`) and, for `V^2 + gamma^2 > J^2`, FP-III (the symmetric
/// self-trapped branch with `z < 0`; both signs when `gamma = 0`) and the two
/// FP-IV points. With tilt, a damped Newton search runs from a 16^3 lattice of
/// seeds and every non-converged seed is reported.
pub fn fixed_points(p: &ModelParams) -> Result<FixedPointSet> {
    p.validate()?;
    if p.omega_z != 0.0 {
        return numeric_fixed_points(p);
    }
    let mut points = Vec::new();
    if p.gamma < p.j {
        let alpha = (p.gamma / p.j).asin();
        let fp1 = ClassicalState::symmetric(0.0, PI + alpha);
        let fp2 = ClassicalState::symmetric(0.0, -alpha);
        points.push(FixedPoint::analyze(Family::FpI, fp1, p)?);
        points.push(FixedPoint::analyze(Family::FpII, fp2, p)?);
    }
    if let Some(zs) = self_trapped_imbalance(p) {
        let phi_sym = (-p.gamma).atan2(-p.v);
        let phi_anti = (-p.gamma).atan2(p.v);
        points.push(FixedPoint::analyze(Family::FpIII, ClassicalState::symmetric(-zs, phi_sym), p)?);
        if p.gamma == 0.0 {
            points.push(FixedPoint::analyze(Family::FpIII, ClassicalState::symmetric(zs, phi_sym), p)?);
        }
        points.push(FixedPoint::analyze(Family::FpIV, ClassicalState::new(zs, phi_anti, -zs, phi_anti), p)?);
        points.push(FixedPoint::analyze(Family::FpIV, ClassicalState::new(-zs, phi_anti, zs, phi_anti), p)?);
    }
    Ok(FixedPointSet { points, failed_seeds: Vec::new() })
}

const LATTICE: usize = 16;
const DEDUP_RADIUS: f64 = 1e-6;

fn numeric_fixed_points(p: &ModelParams) -> Result<FixedPointSet> {
    let mut set = FixedPointSet::default();
    let cell = |k: usize, lo: f64, hi: f64| lo + (k as f64 + 0.5) * (hi - lo) / LATTICE as f64;
    for a in 0..LATTICE {
        for b in 0..LATTICE {
            for c in 0..LATTICE {
                let phi = cell(c, -PI, PI);
                let seed = ClassicalState::new(cell(a, -1.0, 1.0), phi, cell(b, -1.0, 1.0), phi);
                match find_fixed_point(&seed, p) {
                    Ok(root) => {
                        if set.points.iter().all(|fp| fp.location.canonical_distance(&root) >= DEDUP_RADIUS) {
                            set.points.push(FixedPoint::analyze(Family::Numeric, root, p)?);
                        }
                    }
                    Err(e) => set.failed_seeds.push(SeedFailure { seed, reason: e.to_string() }),
                }
            }
        }
    }
    set.points.sort_by(|a, b| a.location.to_array().partial_cmp(&b.location.to_array()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(set)
}

/// Damped Newton iteration on the canonical equations of motion.
pub fn find_fixed_point(seed: &ClassicalState, p: &ModelParams) -> Result<ClassicalState> {
    const MAX_ITER: usize = 200;
    const TARGET: f64 = 1e-13;
    let mut x = seed.to_array();
    let norm = |f: &[f64; 4]| f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut f = canonical_rhs(&raw_state(x), p)?;
    for _ in 0..MAX_ITER {
        if norm(&f) < TARGET {
            return Ok(ClassicalState::from_array(x));
        }
        let jac = jacobian(&raw_state(x), p)?;
        let step = solve4(jac, f).ok_or_else(|| Error::Singular("Jacobian is singular".into()))?;
        let mut mu = 1.0;
        loop {
            let mut trial = x;
            for k in 0..4 {
                trial[k] -= mu * step[k];
            }
            let inside = trial[0].abs() < Z_CLAMP && trial[2].abs() < Z_CLAMP;
            if inside {
                let ft = canonical_rhs(&raw_state(trial), p)?;
                if norm(&ft) < norm(&f) || mu < 1e-4 {
                    x = trial;
                    x[1] = wrap_phase(x[1]);
                    x[3] = wrap_phase(x[3]);
                    f = ft;
                    break;
                }
            } else if mu < 1e-4 {
                return Err(Error::Pole("Newton iterate left the open chart".into()));
            }
            mu *= 0.5;
        }
    }
    if norm(&f) < FIXED_POINT_RESIDUAL {
        return Ok(ClassicalState::from_array(x));
    }
    Err(Error::Domain(format!("Newton did not converge (residual {:e})", norm(&f))))
}

/// Gaussian elimination with partial pivoting on a 4x4 system.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut acc = b[row];
        for k in row + 1..4 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Largest real part of the FP-IV stability eigenvalues at coupling `v`.
pub fn fp4_max_real(base: &ModelParams, v: f64) -> Result<f64> {
    let p = ModelParams { v, omega_z: 0.0, ..*base };
    let set = fixed_points(&p)?;
    set.first(Family::FpIV).map(FixedPoint::max_real).ok_or_else(|| Error::Domain(format!("FP-IV does not exist at V = {v}")))
}

/// Coupling `V~_c` above which FP-IV turns unstable, located by a dense scan
/// of `bracket` followed by bisection to `1e-6`.
pub fn fp4_stability_boundary(base: &ModelParams, bracket: (f64, f64)) -> Result<f64> {
    base.validate()?;
    critical_coupling(base)?;
    let (lo, hi) = bracket;
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("empty bracket [{lo}, {hi}]")));
    }
    let threshold = (base.j * base.j - base.gamma * base.gamma).max(0.0).sqrt();
    let start = lo.max(threshold * (1.0 + 1e-9) + 1e-12);
    const SCAN: usize = 400;
    let tol = STABILITY_TOL * base.j;
    let mut scanned = Vec::with_capacity(SCAN + 1);
    let mut prev: Option<f64> = None;
    for k in 0..=SCAN {
        let v = start + (hi - start) * k as f64 / SCAN as f64;
        let m = fp4_max_real(base, v)?;
        scanned.push((v, m));
        if m > tol {
            if let Some(v_stable) = prev {
                let (mut a, mut b) = (v_stable, v);
                while b - a > 1e-7 {
                    let mid = 0.5 * (a + b);
                    if fp4_max_real(base, mid)? > tol {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                return Ok(0.5 * (a + b));
            }
        } else {
            prev = Some(v);
        }
    }
    Err(Error::Bracket { scanned })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64, gamma: f64) -> ModelParams {
        ModelParams::classical(v, gamma)
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_phase(0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn spin_validation() {
        assert!(Spin::new(0.5).is_ok());
        assert!(Spin::new(10.0).is_ok());
        assert!(Spin::new(0.3).is_err());
        assert!(Spin::new(0.0).is_err());
        assert_eq!(Spin::new(2.5).unwrap().dim(), 6);
        assert_eq!(Spin::new(1.5).unwrap().to_string(), "3/2");
    }

    #[test]
    fn critical_coupling_values() {
        assert_eq!(critical_coupling(&p(0.0, 0.0)).unwrap(), 1.0);
        let vc = critical_coupling(&p(0.0, 0.2)).unwrap();
        assert!((vc - 0.979_795_897_113_271_2).abs() < 1e-12);
        assert!(matches!(critical_coupling(&p(0.0, 1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn critical_coupling_matches_softening_of_omega_minus() {
        // Bisect the coupling at which the antisymmetric mode stops oscillating.
        let (mut a, mut b) = (0.0, 2.0);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            match oscillation_frequencies(&p(mid, 0.2)).unwrap().omega_minus {
                ModeFrequency::Oscillating(w) if w > 0.0 => a = mid,
                _ => b = mid,
            }
        }
        assert!((0.5 * (a + b) - critical_coupling(&p(0.0, 0.2)).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn frequencies_closed_system() {
        let m = oscillation_frequencies(&p(0.0, 0.0)).unwrap();
        assert_eq!(m.omega_plus, ModeFrequency::Oscillating(1.0));
        assert_eq!(m.omega_minus, ModeFrequency::Oscillating(1.0));
    }

    #[test]
    fn frequencies_vanish_at_critical_coupling() {
        let vc = critical_coupling(&p(0.0, 0.2)).unwrap();
        let m = oscillation_frequencies(&p(vc, 0.2)).unwrap();
        assert_eq!(m.omega_minus.frequency(), Some(0.0));
        let above = oscillation_frequencies(&p(1.2, 0.2)).unwrap();
        assert!(matches!(above.omega_minus, ModeFrequency::Unstable { growth_rate } if growth_rate > 0.0));
    }

    #[test]
    fn fp1_eigenvalues_match_normal_modes() {
        let params = p(0.5, 0.2);
        let set = fixed_points(&params).unwrap();
        let fp1 = set.first(Family::FpI).unwrap();
        assert_eq!(fp1.classification, StabilityClass::Center);
        let mut im: Vec<f64> = fp1.eigenvalues.iter().map(|l| l.im.abs()).collect();
        im.sort_by(f64::total_cmp);
        let m = oscillation_frequencies(&params).unwrap();
        let wp = m.omega_plus.frequency().unwrap();
        let wm = m.omega_minus.frequency().unwrap();
        assert!((im[0] - wm).abs() < 1e-8 && (im[1] - wm).abs() < 1e-8);
        assert!((im[2] - wp).abs() < 1e-8 && (im[3] - wp).abs() < 1e-8);
        assert!((wp - 1.204_116).abs() < 2e-6);
    }

    #[test]
    fn fp1_and_fp2_locations() {
        let set = fixed_points(&p(0.5, 0.2)).unwrap();
        let fp1 = set.first(Family::FpI).unwrap().location;
        let fp2 = set.first(Family::FpII).unwrap().location;
        assert_eq!(fp1.z1, 0.0);
        assert!((wrap_phase(fp1.phi1 - 3.342_950)).abs() < 1e-6);
        assert!((fp2.phi1 + 0.201_358).abs() < 1e-6);
        assert_eq!(set.first(Family::FpIII), None);
    }

    #[test]
    fn fp3_location_and_attractor() {
        let params = p(1.7, 0.2);
        let set = fixed_points(&params).unwrap();
        let fp3 = set.first(Family::FpIII).unwrap();
        assert!((fp3.location.z1 + 0.811_606).abs() < 1e-6);
        assert_eq!(fp3.location.z1, fp3.location.z2);
        assert!(wrap_phase(fp3.location.phi1 - 3.258_702).abs() < 2e-5);
        assert_eq!(fp3.classification, StabilityClass::Attractor);
        assert!(residual(&fp3.location, &params).unwrap() < 1e-12);
    }

    #[test]
    fn closed_system_pitchfork_branches() {
        let set = fixed_points(&p(2.0, 0.0)).unwrap();
        let zs: Vec<f64> = set.family(Family::FpIII).map(|fp| fp.location.z1).collect();
        assert_eq!(zs.len(), 2);
        let expected = (1.0_f64 - 0.25).sqrt();
        assert!(zs.iter().any(|z| (z - expected).abs() < 1e-12));
        assert!(zs.iter().any(|z| (z + expected).abs() < 1e-12));
    }

    #[test]
    fn fp1_unstable_above_critical_coupling() {
        let set = fixed_points(&p(1.2, 0.2)).unwrap();
        let fp1 = set.first(Family::FpI).unwrap();
        assert_eq!(fp1.classification, StabilityClass::Unstable);
        let real: Vec<&Complex64> = fp1.eigenvalues.iter().filter(|l| l.im.abs() < 1e-9).collect();
        assert_eq!(real.len(), 2);
        assert!((real[0].re + real[1].re).abs() < 1e-9);
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let params = p(1.3, 0.25).with_tilt(0.4);
        for x in
            [ClassicalState::new(0.3, 0.7, -0.5, 2.0), ClassicalState::new(-0.8, -2.9, 0.1, 0.2), ClassicalState::new(0.0, 1.0, 0.95, -1.0)]
        {
            let a = jacobian(&x, &params).unwrap();
            let n = jacobian_fd(&x, &params, 1e-6).unwrap();
            for r in 0..4 {
                for c in 0..4 {
                    assert!((a[r][c] - n[r][c]).abs() < 1e-7, "entry ({r},{c}): {} vs {}", a[r][c], n[r][c]);
                }
            }
        }
    }

    #[test]
    fn jacobian_pole_is_reported() {
        let x = ClassicalState::new(1.0, 0.0, 0.0, 0.0);
        assert!(matches!(jacobian(&x, &p(0.5, 0.2)), Err(Error::Pole(_))));
    }

    #[test]
    fn fixed_point_set_is_exchange_invariant() {
        for params in [p(0.5, 0.2), p(1.7, 0.2), p(2.0, 0.0)] {
            let set = fixed_points(&params).unwrap();
            for fp in &set.points {
                let swapped = fp.location.swapped();
                assert!(set.points.iter().any(|q| q.location.canonical_distance(&swapped) < 1e-12));
            }
        }
    }

    #[test]
    fn fp4_center_just_above_critical_coupling() {
        let m = fp4_max_real(&p(0.0, 0.2), 1.05).unwrap();
        assert!(m.abs() < 1e-8, "max Re = {m}");
    }

    #[test]
    fn tilted_fixed_points_have_small_residual() {
        let params = p(1.7, 0.2).with_tilt(0.5);
        let set = fixed_points(&params).unwrap();
        assert!(!set.points.is_empty());
        for fp in &set.points {
            assert_eq!(fp.family, Family::Numeric);
            assert!(residual(&fp.location, &params).unwrap() < FIXED_POINT_RESIDUAL);
        }
        for (i, a) in set.points.iter().enumerate() {
            for b in &set.points[i + 1..] {
                assert!(a.location.canonical_distance(&b.location) >= DEDUP_RADIUS);
            }
        }
        assert!(set.failed_seeds.len() < LATTICE.pow(3));
    }

    #[test]
    fn numeric_search_recovers_analytic_points_without_tilt() {
        let params = p(1.7, 0.2);
        let numeric = numeric_fixed_points(&params).unwrap();
        let analytic = fixed_points(&params).unwrap();
        for fp in &analytic.points {
            assert!(numeric.points.iter().any(|q| q.location.canonical_distance(&fp.location) < 1e-8), "{} not found", fp.family);
        }
    }
}
