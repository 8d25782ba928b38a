//! Adaptive Dormand-Prince 5(4) integrator with dense output.

use crate::error::{Error, Result};

/// A first-order system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Reduce the squared, tolerance-scaled local errors to a single norm.
    fn error_norm(&self, scaled_sq: &[f64]) -> f64 {
        (scaled_sq.iter().sum::<f64>() / scaled_sq.len() as f64).sqrt()
    }

    /// Called on every accepted state. Return `true` if `y` was modified.
    fn project(&self, _y: &mut [f64]) -> bool {
        false
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    /// First trial step; estimated from the initial slope when `None`.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_max: f64::INFINITY, h_init: None, max_steps: 50_000_000 }
    }
}

/// Integration statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

struct Work {
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    err: Vec<f64>,
    dense: [Vec<f64>; 5],
}

impl Work {
    fn new(n: usize) -> Self {
        let v = || vec![0.0; n];
        Self { k: [v(), v(), v(), v(), v(), v(), v()], ytmp: v(), ynew: v(), err: v(), dense: [v(), v(), v(), v(), v()] }
    }
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tolerances must be positive (rtol {}, atol {})", self.rtol, self.atol)));
        }
        Ok(())
    }

    /// Integrate from `(t0, y)` to `t1` in place.
    pub fn solve_to<S: OdeSystem>(&self, sys: &S, t0: f64, y: &mut [f64], t1: f64) -> Result<OdeStats> {
        self.integrate(sys, t0, y, t1, &[], |_, _| {})
    }

    /// Integrate from `(t0, y0)` and return the state at every time of `grid`
    /// (non-decreasing, all `>= t0`) using dense output.
    pub fn solve_grid<S: OdeSystem>(&self, sys: &S, t0: f64, y0: &[f64], grid: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(grid.len());
        let mut y = y0.to_vec();
        let t_end = grid.last().copied().unwrap_or(t0);
        self.integrate(sys, t0, &mut y, t_end, grid, |_, v| out.push(v.to_vec()))?;
        Ok(out)
    }

    /// Core loop. `emit` is called for every entry of `grid` in order.
    pub fn integrate<S, F>(&self, sys: &S, t0: f64, y: &mut [f64], t1: f64, grid: &[f64], mut emit: F) -> Result<OdeStats>
    where
        S: OdeSystem,
        F: FnMut(f64, &[f64]),
    {
        self.check()?;
        let n = sys.dim();
        if y.len() != n {
            return Err(Error::InvalidParameter(format!("state has length {}, system dim {n}", y.len())));
        }
        if t1 < t0 {
            return Err(Error::InvalidParameter(format!("backward integration from {t0} to {t1}")));
        }
        if grid.windows(2).any(|w| w[1] < w[0]) || grid.first().is_some_and(|&g| g < t0) || grid.last().is_some_and(|&g| g > t1) {
            return Err(Error::InvalidParameter("output grid must be sorted and inside the interval".into()));
        }
        let mut stats = OdeStats::default();
        let mut gi = 0;
        while gi < grid.len() && grid[gi] <= t0 {
            emit(grid[gi], y);
            gi += 1;
        }
        if t1 == t0 {
            return Ok(stats);
        }
        let mut w = Work::new(n);
        let mut t = t0;
        sys.rhs(t, y, &mut w.k[0]);
        stats.evaluations += 1;
        let mut h = match self.h_init {
            Some(h) => h.min(t1 - t),
            None => self.initial_step(sys, t, y, t1, &mut w, &mut stats),
        };
        let mut reject_streak = false;
        let h_floor = |t: f64| 16.0 * f64::EPSILON * t.abs().max(1.0);
        loop {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::Integrator { t, reason: "maximum number of steps exceeded".into() });
            }
            let last = t + h >= t1 - h_floor(t1);
            if last {
                h = t1 - t;
            }
            let err = self.attempt(sys, t, y, h, &mut w);
            stats.evaluations += 6;
            if !err.is_finite() || err > 1.0 {
                stats.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
                h *= fac;
                reject_streak = true;
                if h < h_floor(t) {
                    return Err(Error::Integrator { t, reason: "step size underflow".into() });
                }
                continue;
            }
            stats.accepted += 1;
            self.build_dense(y, h, &mut w);
            let t_new = if last { t1 } else { t + h };
            while gi < grid.len() && grid[gi] <= t_new {
                let theta = ((grid[gi] - t) / h).clamp(0.0, 1.0);
                dense_eval(&w.dense, theta, &mut w.ytmp);
                sys.project(&mut w.ytmp);
                emit(grid[gi], &w.ytmp);
                gi += 1;
            }
            y.copy_from_slice(&w.ynew);
            t = t_new;
            if sys.project(y) {
                sys.rhs(t, y, &mut w.k[0]);
                stats.evaluations += 1;
            } else {
                let k7 = std::mem::take(&mut w.k[6]);
                w.k[6] = std::mem::replace(&mut w.k[0], k7);
            }
            if last {
                return Ok(stats);
            }
            let mut fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
            if reject_streak {
                fac = fac.min(1.0);
            }
            reject_streak = false;
            h = (h * fac).min(self.h_max);
        }
    }

    fn initial_step<S: OdeSystem>(&self, sys: &S, t: f64, y: &[f64], t1: f64, w: &mut Work, stats: &mut OdeStats) -> f64 {
        let n = y.len();
        let scale: Vec<f64> = y.iter().map(|v| self.atol + self.rtol * v.abs()).collect();
        let rms = |v: &[f64]| {
            let sq: Vec<f64> = v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).collect();
            sys.error_norm(&sq)
        };
        let d0 = rms(y);
        let d1 = rms(&w.k[0]);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(t1 - t).min(self.h_max);
        for i in 0..n {
            w.ytmp[i] = y[i] + h0 * w.k[0][i];
        }
        sys.rhs(t + h0, &w.ytmp, &mut w.k[1]);
        stats.evaluations += 1;
        let diff: Vec<f64> = (0..n).map(|i| w.k[1][i] - w.k[0][i]).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(self.h_max).min(t1 - t)
    }

    /// One trial step; fills `w.ynew` and the stage derivatives, returns the error norm.
    fn attempt<S: OdeSystem>(&self, sys: &S, t: f64, y: &[f64], h: f64, w: &mut Work) -> f64 {
        let n = y.len();
        let Work { k, ytmp, ynew, err, .. } = w;
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k[0][i];
        }
        sys.rhs(t + C2 * h, ytmp, &mut k[1]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        sys.rhs(t + C3 * h, ytmp, &mut k[2]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        sys.rhs(t + C4 * h, ytmp, &mut k[3]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        sys.rhs(t + C5 * h, ytmp, &mut k[4]);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        sys.rhs(t + h, ytmp, &mut k[5]);
        for i in 0..n {
            ynew[i] = y[i] + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        sys.rhs(t + h, ynew, &mut k[6]);
        for i in 0..n {
            let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
            err[i] = (e / sc).powi(2);
        }
        sys.error_norm(err)
    }

    fn build_dense(&self, y: &[f64], h: f64, w: &mut Work) {
        let Work { k, ynew, dense, .. } = w;
        for i in 0..y.len() {
            let ydiff = ynew[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            dense[0][i] = y[i];
            dense[1][i] = ydiff;
            dense[2][i] = bspl;
            dense[3][i] = ydiff - h * k[6][i] - bspl;
            dense[4][i] = h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        }
    }
}

fn dense_eval(d: &[Vec<f64>; 5], theta: f64, out: &mut [f64]) {
    let t1 = 1.0 - theta;
    for i in 0..out.len() {
        out[i] = d[0][i] + theta * (d[1][i] + t1 * (d[2][i] + theta * (d[3][i] + t1 * d[4][i])));
    }
}
