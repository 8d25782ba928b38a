//! Shared fixtures for the benchmarks.

use bjj_core::hilbert::{coherent_state_zphi, product_state};
use bjj_core::{ModelParams, Spin};

pub fn params(v: f64, spin: f64) -> ModelParams {
    ModelParams::classical(v, 0.2).with_spin(Spin::new(spin).expect("valid spin"))
}

pub fn product_coherent(p: &ModelParams, z: f64, phi: f64) -> bjj_core::hilbert::CVec {
    let a = coherent_state_zphi(z, phi, p.spin).expect("valid state");
    product_state(&a, &a)
}

pub fn grid(t_max: f64, step: f64) -> Vec<f64> {
    let n = (t_max / step).round() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}
