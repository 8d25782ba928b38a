//! Liouvillian superoperator, exchange-symmetry sectors and complex-plane
//! level statistics.
//!
//! Vectorization is column stacking: `vec(A rho B) = (B^T kron A) vec(rho)`,
//! so the entry `rho[k, l]` sits at index `l * D + k`.

use std::f64::consts::PI;

use faer::Mat;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::hilbert::{adjoint, build_hamiltonian, identity, jump_operators, kron, swap_index, CMat, C64};
use crate::model::{ModelParams, Spin};

/// Default memory budget for a dense superoperator.
pub const DEFAULT_BUDGET_BYTES: u64 = 1 << 30;

/// Tolerance on `||[L, Pi_s]||_max`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues closer than this are merged before computing statistics.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Eigenvalues with modulus below this are treated as steady-state modes.
pub const ZERO_MODE_TOL: f64 = 1e-8;

/// Minimum number of eigenvalues for statistics.
pub const MIN_EIGENVALUES: usize = 200;

pub const DEFAULT_NEIGHBOURS: usize = 30;

/// Fraction of lowest-density points dropped after unfolding.
pub const EDGE_FRACTION: f64 = 0.05;

fn superoperator_bytes(spin: Spin) -> u64 {
    let n = spin.dim().pow(4) as u64;
    n.saturating_mul(n).saturating_mul(std::mem::size_of::<C64>() as u64)
}

/// Dense Liouvillian `L` with `d vec(rho)/dt = L vec(rho)`.
pub fn build_liouvillian(p: &ModelParams, budget_bytes: u64) -> Result<CMat> {
    p.validate()?;
    let required = superoperator_bytes(p.spin);
    if required > budget_bytes {
        return Err(Error::SizeBudget { required, budget: budget_bytes });
    }
    let h = build_hamiltonian(p);
    let d = h.nrows();
    let id = identity(d);
    let mut l = (kron(&id, &h) - kron(&h.t().to_owned(), &id)).mapv(|v| v * C64::new(0.0, -1.0));
    for o in jump_operators(p) {
        let odo = adjoint(&o).dot(&o);
        l = l + kron(&o.mapv(|v| v.conj()), &o) - kron(&id, &odo).mapv(|v| v * 0.5) - kron(&odo.t().to_owned(), &id).mapv(|v| v * 0.5);
    }
    Ok(l)
}

/// `vec` in column-stacking order.
pub fn vectorize(rho: &CMat) -> Vec<C64> {
    let d = rho.nrows();
    (0..d * d).map(|i| rho[(i % d, i / d)]).collect()
}

pub fn unvectorize(v: &[C64], d: usize) -> CMat {
    Array2::from_shape_fn((d, d), |(k, l)| v[l * d + k])
}

/// Image of superoperator index `l * D + k` under `Pi_s = Pi kron Pi`.
fn sector_permutation(spin: Spin) -> Vec<usize> {
    let d = spin.dim().pow(2);
    (0..d * d)
        .map(|i| {
            let (k, l) = (i % d, i / d);
            swap_index(spin, l) * d + swap_index(spin, k)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ExchangeBlocks {
    pub plus: CMat,
    pub minus: CMat,
    /// `||[L, Pi_s]||_max`.
    pub commutator: f64,
}

/// Split `L` into its `Pi_s = +1` and `-1` blocks.
pub fn exchange_sectors(l: &CMat, spin: Spin) -> Result<ExchangeBlocks> {
    let perm = sector_permutation(spin);
    let n = perm.len();
    if l.nrows() != n || l.ncols() != n {
        return Err(Error::InvalidParameter(format!("superoperator must be {n}x{n}")));
    }
    // (Pi L Pi)[a, b] = L[pi a, pi b] since Pi is an involutive permutation.
    let mut commutator: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            commutator = commutator.max((l[(perm[a], perm[b])] - l[(a, b)]).norm());
        }
    }
    if commutator > SYMMETRY_TOL {
        return Err(Error::Symmetry(commutator));
    }
    // Sparse orthonormal bases: fixed indices and (e_a +- e_pa)/sqrt(2).
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut plus: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut minus: Vec<Vec<(usize, f64)>> = Vec::new();
    for a in 0..n {
        let b = perm[a];
        if b == a {
            plus.push(vec![(a, 1.0)]);
        } else if a < b {
            plus.push(vec![(a, h), (b, h)]);
            minus.push(vec![(a, h), (b, -h)]);
        }
    }
    let project = |basis: &[Vec<(usize, f64)>]| {
        Array2::from_shape_fn((basis.len(), basis.len()), |(i, j)| {
            let mut acc = C64::new(0.0, 0.0);
            for &(r, cr) in &basis[i] {
                for &(c, cc) in &basis[j] {
                    acc += l[(r, c)] * (cr * cc);
                }
            }
            acc
        })
    };
    Ok(ExchangeBlocks { plus: project(&plus), minus: project(&minus), commutator })
}

/// Sector sizes `(+1, -1)` of `Pi_s` at spin `S`.
pub fn sector_dimensions(spin: Spin) -> (usize, usize) {
    let d = spin.dim();
    let big = d * d;
    // Pi_s fixes (k, l) iff both two-spin states are swap-symmetric.
    let fixed = d * d;
    let moving = big * big - fixed;
    (fixed + moving / 2, moving / 2)
}

/// Sparse matrix stored both by rows and by columns.
struct Sparse {
    rows: Vec<Vec<(usize, C64)>>,
    cols: Vec<Vec<(usize, C64)>>,
}

impl Sparse {
    fn from_dense(m: &CMat) -> Self {
        let n = m.nrows();
        let mut rows = vec![Vec::new(); n];
        let mut cols = vec![Vec::new(); n];
        for ((r, c), v) in m.indexed_iter() {
            if v.norm() > 0.0 {
                rows[r].push((c, *v));
                cols[c].push((r, *v));
            }
        }
        Self { rows, cols }
    }
}

/// One element of the real sector basis: a Hermitian matrix
/// `c * sum_q coeff_q E_q` with `c = 1` (symmetric part) or `c = i`
/// (antisymmetric part) and `E_q = |k><l|` at superoperator index `q`.
struct HermitianBasis {
    entries: Vec<(usize, f64)>,
    imaginary: bool,
}

fn hermitian_sector_basis(spin: Spin, parity: i8) -> Vec<HermitianBasis> {
    let d = spin.dim().pow(2);
    let sw = |a: usize| swap_index(spin, a);
    let mut seen = vec![false; d * d];
    let mut basis = Vec::new();
    for l in 0..d {
        for k in 0..d {
            let q = l * d + k;
            if seen[q] {
                continue;
            }
            // Orbit under P: (k, l) -> (swap k, swap l) and X: (k, l) -> (l, k).
            let images = [(k, l, 1.0, 1.0), (sw(k), sw(l), parity as f64, 1.0), (l, k, 1.0, -1.0), (sw(l), sw(k), parity as f64, -1.0)];
            for &(a, b, _, _) in &images {
                seen[b * d + a] = true;
            }
            for t in [1.0, -1.0] {
                let mut acc: Vec<(usize, f64)> = Vec::with_capacity(4);
                for &(a, b, chi_p, chi_x) in &images {
                    let w = chi_p * if chi_x < 0.0 { t } else { 1.0 };
                    let idx = b * d + a;
                    match acc.iter_mut().find(|e| e.0 == idx) {
                        Some(e) => e.1 += w,
                        None => acc.push((idx, w)),
                    }
                }
                acc.retain(|e| e.1.abs() > 0.5);
                if acc.is_empty() {
                    continue;
                }
                let norm = acc.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
                acc.iter_mut().for_each(|e| e.1 /= norm);
                acc.sort_by_key(|e| e.0);
                basis.push(HermitianBasis { entries: acc, imaginary: t < 0.0 });
            }
        }
    }
    basis
}

/// Real matrix of `L` restricted to the `Pi_s = parity` sector, in an
/// orthonormal basis of Hermitian matrices. Since `L` maps Hermitian
/// matrices to Hermitian matrices, every element `Tr(h_a L(h_b))` is real.
pub fn sector_block(p: &ModelParams, parity: i8) -> Result<Mat<f64>> {
    p.validate()?;
    if parity != 1 && parity != -1 {
        return Err(Error::InvalidParameter(format!("parity must be +1 or -1, got {parity}")));
    }
    let spin = p.spin;
    let d = spin.dim().pow(2);
    let basis = hermitian_sector_basis(spin, parity);
    let n = basis.len();
    let expected = if parity == 1 { sector_dimensions(spin).0 } else { sector_dimensions(spin).1 };
    if n != expected {
        return Err(Error::Symmetry(n as f64 - expected as f64));
    }
    let bytes = (n * n * std::mem::size_of::<f64>()) as u64;
    if bytes > 4 * DEFAULT_BUDGET_BYTES {
        return Err(Error::SizeBudget { required: bytes, budget: 4 * DEFAULT_BUDGET_BYTES });
    }
    let mut inverse: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d * d];
    for (a, b) in basis.iter().enumerate() {
        for &(q, c) in &b.entries {
            inverse[q].push((a, c));
        }
    }
    let h = Sparse::from_dense(&build_hamiltonian(p));
    let jumps: Vec<Sparse> = jump_operators(p).iter().map(Sparse::from_dense).collect();
    let gamma_diag: Vec<f64> = {
        let ops = jump_operators(p);
        (0..d).map(|k| ops.iter().map(|o| (0..d).map(|r| o[(r, k)].norm_sqr()).sum::<f64>()).sum()).collect()
    };
    let mi = C64::new(0.0, -1.0);
    let mut out = Mat::<f64>::zeros(n, n);
    let mut scratch = vec![C64::new(0.0, 0.0); d * d];
    let mut touched: Vec<usize> = Vec::new();
    for (b, hb) in basis.iter().enumerate() {
        let cb = if hb.imaginary { C64::new(0.0, 1.0) } else { C64::new(1.0, 0.0) };
        let add = |q: usize, v: C64, scratch: &mut Vec<C64>, touched: &mut Vec<usize>| {
            if scratch[q] == C64::new(0.0, 0.0) {
                touched.push(q);
            }
            scratch[q] += v;
        };
        for &(q, coeff) in &hb.entries {
            let (k, l) = (q % d, q / d);
            let w = cb * coeff;
            // -i H E_kl
            for &(r, v) in &h.cols[k] {
                add(l * d + r, mi * v * w, &mut scratch, &mut touched);
            }
            // +i E_kl H
            for &(c, v) in &h.rows[l] {
                add(c * d + k, -mi * v * w, &mut scratch, &mut touched);
            }
            // O E_kl O^dag
            for o in &jumps {
                for &(r, vr) in &o.cols[k] {
                    for &(c, vc) in &o.cols[l] {
                        add(c * d + r, vr * vc.conj() * w, &mut scratch, &mut touched);
                    }
                }
            }
            add(q, -0.5 * (gamma_diag[k] + gamma_diag[l]) * w, &mut scratch, &mut touched);
        }
        for &q in &touched {
            let v = scratch[q];
            for &(a, ca) in &inverse[q] {
                let conj_c = if basis[a].imaginary { C64::new(0.0, -1.0) } else { C64::new(1.0, 0.0) };
                out[(a, b)] += (conj_c * ca * v).re;
            }
            scratch[q] = C64::new(0.0, 0.0);
        }
        touched.clear();
    }
    Ok(out)
}

/// Eigenvalues of a dense complex matrix.
pub fn complex_eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let n = m.nrows();
    let a = Mat::<C64>::from_fn(n, n, |i, j| m[(i, j)]);
    a.eigenvalues().map_err(|_| Error::Eigen)
}

/// Eigenvalues of a dense real matrix.
pub fn real_eigenvalues(m: &Mat<f64>) -> Result<Vec<C64>> {
    m.eigenvalues().map_err(|_| Error::Eigen)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorSpectrum {
    pub parity: i8,
    pub eigenvalues: Vec<C64>,
}

/// Spectrum of one exchange sector (real-block route).
pub fn sector_spectrum(p: &ModelParams, parity: i8) -> Result<SectorSpectrum> {
    let block = sector_block(p, parity)?;
    Ok(SectorSpectrum { parity, eigenvalues: real_eigenvalues(&block)? })
}

/// Largest distance when matching two multisets greedily by nearest neighbour.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let mut best = (f64::INFINITY, 0);
        for (j, y) in b.iter().enumerate() {
            if !used[j] {
                let d = (x - y).norm();
                if d < best.0 {
                    best = (d, j);
                }
            }
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}

/// Points used for statistics of a Liouvillian sector: the zero mode is
/// removed, near-degenerate eigenvalues are merged and only the upper half
/// plane is kept (the spectrum is symmetric under conjugation).
pub fn prepare_spectrum(eigenvalues: &[C64]) -> Vec<C64> {
    let mut pts: Vec<C64> = eigenvalues.iter().copied().filter(|z| z.norm() > ZERO_MODE_TOL && z.im > DEGENERACY_TOL).collect();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut out: Vec<C64> = Vec::with_capacity(pts.len());
    for z in pts {
        // Sorted by real part, so a duplicate can only be among recent entries.
        let dup = out.iter().rev().take_while(|w| z.re - w.re < DEGENERACY_TOL).any(|w| (z - w).norm() < DEGENERACY_TOL);
        if !dup {
            out.push(z);
        }
    }
    out
}

/// Squared distances from point `i` to all others, partially sorted so that
/// the first `k` entries are the `k` smallest.
fn neighbour_distances(points: &[C64], i: usize, k: usize, buf: &mut Vec<(f64, usize)>) {
    buf.clear();
    let z = points[i];
    buf.extend(points.iter().enumerate().filter(|(j, _)| *j != i).map(|(j, w)| ((w - z).norm_sqr(), j)));
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < buf.len() {
        buf.select_nth_unstable_by(k, cmp);
    }
    let m = k.min(buf.len());
    buf[..m].sort_by(cmp);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unfolded {
    /// Unfolded nearest-neighbour spacings of the kept points, mean 1.
    pub spacings: Vec<f64>,
    /// Indices (into the input) of the kept points.
    pub kept: Vec<usize>,
}

/// Nearest-neighbour spacings unfolded with the local density `k / (pi R_k^2)`
/// from the `k` nearest neighbours. The lowest-density `EDGE_FRACTION` of
/// points is dropped and the rest rescaled to unit mean.
pub fn unfold_spacings(points: &[C64], k: usize) -> Result<Unfolded> {
    if k == 0 || points.len() < k + 2 {
        return Err(Error::InsufficientData(format!("{} points for k = {k}", points.len())));
    }
    let mut buf = Vec::with_capacity(points.len());
    let mut raw: Vec<(f64, f64, usize)> = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        neighbour_distances(points, i, k, &mut buf);
        let nn = buf[0].0.sqrt();
        let rk2 = buf[k - 1].0;
        let density = k as f64 / (PI * rk2);
        raw.push((density, nn * density.sqrt(), i));
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let drop = (EDGE_FRACTION * raw.len() as f64).floor() as usize;
    let mut kept: Vec<(usize, f64)> = raw[drop..].iter().map(|r| (r.2, r.1)).collect();
    kept.sort_by_key(|e| e.0);
    let mean = kept.iter().map(|e| e.1).sum::<f64>() / kept.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::InsufficientData("all spacings vanish".into()));
    }
    Ok(Unfolded { spacings: kept.iter().map(|e| e.1 / mean).collect(), kept: kept.iter().map(|e| e.0).collect() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStatistics {
    pub ratios: Vec<C64>,
    pub mean_r: f64,
    pub mean_cos: f64,
}

/// Complex spacing ratios `(E_NN - E) / (E_NNN - E)`. Equal distances are
/// ordered by point index.
pub fn complex_spacing_ratios(points: &[C64]) -> Result<RatioStatistics> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points", points.len())));
    }
    let mut buf = Vec::with_capacity(points.len());
    let mut ratios = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        neighbour_distances(points, i, 2, &mut buf);
        let z = points[i];
        let den = points[buf[1].1] - z;
        if den.norm() == 0.0 {
            return Err(Error::InsufficientData("coincident points; merge degeneracies first".into()));
        }
        ratios.push((points[buf[0].1] - z) / den);
    }
    let n = ratios.len() as f64;
    let mean_r = ratios.iter().map(|r| r.norm()).sum::<f64>() / n;
    let mean_cos = ratios.iter().map(|r| r.arg().cos()).sum::<f64>() / n;
    Ok(RatioStatistics { ratios, mean_r, mean_cos })
}

/// Mean `cos(arg r)` over the points whose next-nearest neighbour is closer
/// than the edge of a known support. Edge points see all their neighbours on
/// the inward side, which biases the ratio angle; this is the minus-sampling
/// estimate of the bulk value. Returns the mean and the number of points kept.
pub fn border_corrected_mean_cos(points: &[C64], edge_distance: impl Fn(C64) -> f64) -> Result<(f64, usize)> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points", points.len())));
    }
    let mut buf = Vec::with_capacity(points.len());
    let (mut sum, mut kept) = (0.0, 0usize);
    for (i, &z) in points.iter().enumerate() {
        neighbour_distances(points, i, 2, &mut buf);
        if buf[1].0.sqrt() < edge_distance(z) {
            let r = (points[buf[0].1] - z) / (points[buf[1].1] - z);
            sum += r.arg().cos();
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::InsufficientData("no point is farther from the edge than from its neighbours".into()));
    }
    Ok((sum / kept as f64, kept))
}

/// Distance to the edge of the unit square, the support of `poisson_cloud`.
pub fn unit_square_edge_distance(z: C64) -> f64 {
    z.re.min(1.0 - z.re).min(z.im).min(1.0 - z.im)
}

/// Distance to the edge of the disk of radius `sqrt(n)`, the limiting
/// support of `ginibre_spectrum(n)`.
pub fn ginibre_edge_distance(n: usize) -> impl Fn(C64) -> f64 {
    let r = (n as f64).sqrt();
    move |z| r - z.norm()
}

/// Kolmogorov-Smirnov distance of a sample to a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// CDF of the unit-mean 2D Poisson spacing density `(pi/2) s exp(-pi s^2 / 4)`.
pub fn poisson_2d_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        1.0 - (-PI * s * s / 4.0).exp()
    }
}

/// Large-N Ginibre nearest-neighbour spacing distribution, rescaled to unit
/// mean and tabulated.
#[derive(Clone, Debug)]
pub struct GinibreSpacing {
    step: f64,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl GinibreSpacing {
    pub fn new() -> Self {
        // Unscaled density p(s) = prod_n Q_n(s^2) * sum_n 2 s^{2n+1} e^{-s^2} / (n! Q_n(s^2)),
        // Q_n(x) = e^{-x} sum_{k<=n} x^k / k!.
        let h = 1e-3;
        let n_grid = 6000;
        let n_max = 200;
        let raw: Vec<f64> = (0..=n_grid)
            .map(|g| {
                let s = g as f64 * h;
                let x = s * s;
                let mut pmf = (-x).exp();
                let mut q = pmf;
                let mut log_prod = 0.0;
                let mut sum = 0.0;
                for n in 1..=n_max {
                    pmf *= x / n as f64;
                    q += pmf;
                    log_prod += q.min(1.0).ln();
                    sum += 2.0 * s * pmf / q;
                }
                log_prod.exp() * sum
            })
            .collect();
        let integrate = |f: &dyn Fn(usize) -> f64| (1..=n_grid).map(|g| 0.5 * h * (f(g - 1) + f(g))).sum::<f64>();
        let norm = integrate(&|g| raw[g]);
        let mean = integrate(&|g| g as f64 * h * raw[g]) / norm;
        // Unit-mean density on the same grid: P(u) = mean * p(mean * u) / norm.
        let interp = |s: f64| {
            let x = s / h;
            let i = x.floor() as usize;
            if i >= n_grid {
                return 0.0;
            }
            let f = x - i as f64;
            raw[i] * (1.0 - f) + raw[i + 1] * f
        };
        let density: Vec<f64> = (0..=n_grid).map(|g| mean * interp(mean * g as f64 * h) / norm).collect();
        let mut cdf = vec![0.0; n_grid + 1];
        for g in 1..=n_grid {
            cdf[g] = cdf[g - 1] + 0.5 * h * (density[g - 1] + density[g]);
        }
        Self { step: h, density, cdf }
    }

    fn lookup(table: &[f64], step: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return table[0];
        }
        let x = s / step;
        let i = x.floor() as usize;
        if i + 1 >= table.len() {
            return *table.last().expect("non-empty table");
        }
        let f = x - i as f64;
        table[i] * (1.0 - f) + table[i + 1] * f
    }

    pub fn density(&self, s: f64) -> f64 {
        if s >= self.step * (self.density.len() - 1) as f64 {
            return 0.0;
        }
        Self::lookup(&self.density, self.step, s)
    }

    pub fn cdf(&self, s: f64) -> f64 {
        Self::lookup(&self.cdf, self.step, s).min(1.0)
    }
}

impl Default for GinibreSpacing {
    fn default() -> Self {
        Self::new()
    }
}

/// Exponent `beta` of `P(s) ~ s^beta` at small spacings, from a log-log fit
/// of the empirical CDF (which scales as `s^(beta+1)`) over `[lo, hi]`.
pub fn small_spacing_exponent(spacings: &[f64], lo: f64, hi: f64) -> Result<f64> {
    let mut s = spacings.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        s.iter().enumerate().filter(|(_, v)| **v >= lo && **v <= hi).map(|(i, v)| (v.ln(), ((i as f64 + 0.5) / n).ln())).unzip();
    if xs.len() < 5 {
        return Err(Error::InsufficientData(format!("{} spacings in [{lo}, {hi}]", xs.len())));
    }
    Ok(linear_fit(&xs, &ys)?.slope - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    PoissonLike,
    GinibreLike,
    Inconclusive,
}

pub const POISSON_MAX: f64 = 0.08;
pub const GINIBRE_MIN: f64 = 0.16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralStatistics {
    pub n_points: usize,
    pub mean_r: f64,
    pub mean_cos: f64,
    pub ks_poisson: f64,
    pub ks_ginibre: f64,
    pub regime: Regime,
}

/// Decision on `-<cos theta>`.
pub fn classify_regime(mean_cos: f64) -> Regime {
    let a = -mean_cos;
    if a <= POISSON_MAX {
        Regime::PoissonLike
    } else if a >= GINIBRE_MIN {
        Regime::GinibreLike
    } else {
        Regime::Inconclusive
    }
}

/// Ratio statistics and KS distances of a point cloud (already prepared).
pub fn spectral_statistics(points: &[C64], reference: &GinibreSpacing) -> Result<SpectralStatistics> {
    if points.len() < MIN_EIGENVALUES {
        return Err(Error::InsufficientData(format!("{} eigenvalues, need {MIN_EIGENVALUES}", points.len())));
    }
    let ratios = complex_spacing_ratios(points)?;
    let unfolded = unfold_spacings(points, DEFAULT_NEIGHBOURS)?;
    Ok(SpectralStatistics {
        n_points: points.len(),
        mean_r: ratios.mean_r,
        mean_cos: ratios.mean_cos,
        ks_poisson: ks_distance(&unfolded.spacings, poisson_2d_cdf),
        ks_ginibre: ks_distance(&unfolded.spacings, |s| reference.cdf(s)),
        regime: classify_regime(ratios.mean_cos),
    })
}

/// Eigenvalues of an `n x n` matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre_spectrum<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<C64>> {
    let mut m = CMat::zeros((n, n));
    for v in m.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
    }
    complex_eigenvalues(&m)
}

/// `n` i.i.d. points uniform in the unit square.
pub fn poisson_cloud<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.random(), rng.random())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{check_density, Lindblad};
    use crate::seeding::stream;

    fn params(s: f64, v: f64, gamma: f64, wz: f64) -> ModelParams {
        ModelParams::classical(v, gamma).with_spin(Spin::new(s).unwrap()).with_tilt(wz)
    }

    fn random_density<R: Rng>(d: usize, rng: &mut R) -> CMat {
        let a = CMat::from_shape_fn((d, d), |_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let rho = a.dot(&adjoint(&a));
        let tr: C64 = (0..d).map(|i| rho[(i, i)]).sum();
        rho.mapv(|v| v / tr)
    }

    #[test]
    fn superoperator_matches_lindblad_rhs() {
        let p = params(1.0, 0.7, 0.3, 0.4);
        let l = build_liouvillian(&p, DEFAULT_BUDGET_BYTES).unwrap();
        let lind = Lindblad::from_params(&p);
        let mut rng = stream(1, "rho", 0);
        for _ in 0..20 {
            let rho = random_density(9, &mut rng);
            let v = vectorize(&rho);
            let lv: Vec<C64> = (0..81).map(|i| (0..81).map(|j| l[(i, j)] * v[j]).sum()).collect();
            let diff = &unvectorize(&lv, 9) - &lind.rhs(&rho);
            assert!(diff.iter().all(|x| x.norm() < 1e-12));
        }
    }

    #[test]
    fn trace_preservation_and_spectrum_properties() {
        let p = params(1.0, 0.5, 0.2, 0.0);
        let l = build_liouvillian(&p, DEFAULT_BUDGET_BYTES).unwrap();
        let vec_id = vectorize(&identity(9));
        for j in 0..81 {
            let s: C64 = (0..81).map(|i| vec_id[i].conj() * l[(i, j)]).sum();
            assert!(s.norm() < 1e-12);
        }
        let ev = complex_eigenvalues(&l).unwrap();
        assert!(ev.iter().all(|z| z.re < 1e-8));
        assert!(ev.iter().any(|z| z.norm() < 1e-10));
        let conj: Vec<C64> = ev.iter().map(|z| z.conj()).collect();
        assert!(multiset_distance(&ev, &conj) < 1e-8);
    }

    #[test]
    fn trace_equals_eigenvalue_sum() {
        let p = params(2.0, 0.5, 0.2, 0.0);
        let l = build_liouvillian(&p, DEFAULT_BUDGET_BYTES).unwrap();
        let tr: C64 = (0..l.nrows()).map(|i| l[(i, i)]).sum();
        let sum: C64 = complex_eigenvalues(&l).unwrap().iter().sum();
        assert!((tr - sum).norm() < 1e-8, "{tr} vs {sum}");
    }

    #[test]
    fn unitary_limit_is_commutator() {
        let p = params(1.0, 0.9, 0.0, 0.3);
        let l = build_liouvillian(&p, DEFAULT_BUDGET_BYTES).unwrap();
        let energies = crate::observables::hermitian_eigenvalues(&build_hamiltonian(&p)).unwrap();
        let expected: Vec<C64> = energies.iter().flat_map(|a| energies.iter().map(move |b| C64::new(0.0, -(a - b)))).collect();
        assert!(multiset_distance(&complex_eigenvalues(&l).unwrap(), &expected) < 1e-8);
    }

    #[test]
    fn steady_state_is_a_density_matrix() {
        let p = params(1.0, 1.7, 0.2, 0.5);
        let l = build_liouvillian(&p, DEFAULT_BUDGET_BYTES).unwrap();
        // Null vector by relaxing the master equation: exp(L t) for long t.
        let lind = Lindblad::from_params(&p);
        let mut rho = identity(9).mapv(|v| v / 9.0);
        rho = lind.evolve(&rho, &[0.0, 400.0], 1e-10).unwrap().pop().unwrap();
        let v = vectorize(&rho);
        let lv: f64 = (0..81).map(|i| (0..81).map(|j| l[(i, j)] * v[j]).sum::<C64>().norm()).fold(0.0, f64::max);
        assert!(lv < 1e-8, "residual {lv}");
        check_density(&rho, 1e-8).unwrap();
    }

    #[test]
    fn size_budget_is_enforced() {
        let p = params(5.0, 0.5, 0.2, 0.0);
        match build_liouvillian(&p, DEFAULT_BUDGET_BYTES) {
            Err(Error::SizeBudget { required, .. }) => assert_eq!(required, 14641u64 * 14641 * 16),
            other => panic!("expected size error, got {other:?}"),
        }
    }

    #[test]
    fn sector_sizes_and_merge() {
        let p = params(1.0, 1.7, 0.2, 0.5);
        let l = build_liouvillian(&p, DEFAULT_BUDGET_BYTES).unwrap();
        let blocks = exchange_sectors(&l, p.spin).unwrap();
        assert_eq!((blocks.plus.nrows(), blocks.minus.nrows()), (45, 36));
        assert_eq!(sector_dimensions(p.spin), (45, 36));
        assert!(blocks.commutator < SYMMETRY_TOL);
        let mut merged = complex_eigenvalues(&blocks.plus).unwrap();
        merged.extend(complex_eigenvalues(&blocks.minus).unwrap());
        assert!(multiset_distance(&merged, &complex_eigenvalues(&l).unwrap()) < 1e-8);
    }

    #[test]
    fn sector_permutation_is_involution() {
        let perm = sector_permutation(Spin::new(1.5).unwrap());
        assert!(perm.iter().enumerate().all(|(i, &j)| perm[j] == i));
    }

    #[test]
    fn broken_symmetry_is_detected() {
        let p = params(1.0, 0.5, 0.2, 0.0);
        let mut l = build_liouvillian(&p, DEFAULT_BUDGET_BYTES).unwrap();
        l[(1, 2)] += C64::new(1e-6, 0.0);
        assert!(matches!(exchange_sectors(&l, p.spin), Err(Error::Symmetry(_))));
    }

    #[test]
    fn real_blocks_reproduce_complex_blocks() {
        for (s, v, g, wz) in [(1.0, 1.7, 0.2, 0.5), (1.5, 0.5, 0.3, 0.0), (2.0, 1.2, 0.2, 0.3)] {
            let p = params(s, v, g, wz);
            let l = build_liouvillian(&p, DEFAULT_BUDGET_BYTES).unwrap();
            let blocks = exchange_sectors(&l, p.spin).unwrap();
            for (parity, block) in [(1i8, &blocks.plus), (-1, &blocks.minus)] {
                let real = sector_spectrum(&p, parity).unwrap().eigenvalues;
                let direct = complex_eigenvalues(block).unwrap();
                assert!(multiset_distance(&real, &direct) < 1e-8, "S={s} parity {parity}");
            }
        }
    }

    #[test]
    fn poisson_cloud_statistics() {
        let mut rng = stream(3, "poisson", 0);
        let pts = poisson_cloud(10_000, &mut rng);
        let un = unfold_spacings(&pts, DEFAULT_NEIGHBOURS).unwrap();
        let mean = un.spacings.iter().sum::<f64>() / un.spacings.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
        let ks = ks_distance(&un.spacings, poisson_2d_cdf);
        assert!(ks < 0.03, "KS {ks}");
        let r = complex_spacing_ratios(&pts).unwrap();
        assert!(r.mean_cos.abs() < 0.02, "<cos> = {}", r.mean_cos);
        assert!(r.ratios.iter().all(|x| x.norm() <= 1.0));
    }

    #[test]
    fn ginibre_reference_is_normalized() {
        let g = GinibreSpacing::new();
        assert!((g.cdf(6.0) - 1.0).abs() < 1e-6);
        let h = 1e-3;
        let mean: f64 = (0..5000).map(|i| (i as f64 + 0.5) * h * g.density((i as f64 + 0.5) * h) * h).sum();
        assert!((mean - 1.0).abs() < 1e-4, "mean {mean}");
        // Cubic repulsion: density ratio between s and 2s tends to 8.
        let ratio = g.density(0.02) / g.density(0.01);
        assert!((ratio - 8.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn ratios_invariant_under_affine_maps() {
        let mut rng = stream(5, "affine", 0);
        let pts = poisson_cloud(500, &mut rng);
        let (a, b) = (C64::new(-0.3, 2.0), C64::new(5.0, -1.0));
        let moved: Vec<C64> = pts.iter().map(|z| a * z + b).collect();
        let r1 = complex_spacing_ratios(&pts).unwrap();
        let r2 = complex_spacing_ratios(&moved).unwrap();
        for (x, y) in r1.ratios.iter().zip(&r2.ratios) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn prepare_removes_zero_mode_and_duplicates() {
        let eig = vec![C64::new(0.0, 0.0), C64::new(-1.0, 2.0), C64::new(-1.0, 2.0 + 1e-12), C64::new(-1.0, -2.0), C64::new(-0.5, 0.0)];
        assert_eq!(prepare_spectrum(&eig), vec![C64::new(-1.0, 2.0)]);
    }

    #[test]
    fn border_correction_without_edge_keeps_everything() {
        let pts = poisson_cloud(500, &mut stream(3, "border", 0));
        let all = complex_spacing_ratios(&pts).unwrap().mean_cos;
        let (m, kept) = border_corrected_mean_cos(&pts, |_| f64::INFINITY).unwrap();
        assert_eq!(kept, 500);
        assert!((m - all).abs() < 1e-15);
        let (_, kept) = border_corrected_mean_cos(&pts, unit_square_edge_distance).unwrap();
        assert!(kept > 400 && kept < 500, "{kept}");
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(classify_regime(-0.05), Regime::PoissonLike);
        assert_eq!(classify_regime(-0.24), Regime::GinibreLike);
        assert_eq!(classify_regime(-0.12), Regime::Inconclusive);
    }
}
