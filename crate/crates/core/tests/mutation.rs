//! The frequency checks must notice a corrupted closed form.

use bjj_core::acceptance::{c1_critical_coupling, c2_oscillation_frequency};
use bjj_core::model::{critical_coupling, ModeFrequency, ModelParams, NormalModes};
use bjj_core::Result;

/// The `V` term enters with the wrong sign, which exchanges the two modes.
fn flipped(p: &ModelParams) -> Result<NormalModes> {
    let a = critical_coupling(p)?;
    let mode = |inner: f64| {
        if inner >= 0.0 {
            ModeFrequency::Oscillating(inner.sqrt() / p.j)
        } else {
            ModeFrequency::Unstable { growth_rate: (-inner).sqrt() / p.j }
        }
    };
    Ok(NormalModes { omega_plus: mode(a * (a - p.v)), omega_minus: mode(a * (a + p.v)) })
}

/// Off by one percent in the overall scale.
fn scaled(p: &ModelParams) -> Result<NormalModes> {
    let m = bjj_core::model::oscillation_frequencies(p)?;
    let s = |f: ModeFrequency| match f {
        ModeFrequency::Oscillating(w) => ModeFrequency::Oscillating(1.01 * w),
        ModeFrequency::Unstable { growth_rate } => ModeFrequency::Unstable { growth_rate: 1.01 * growth_rate },
    };
    Ok(NormalModes { omega_plus: s(m.omega_plus), omega_minus: s(m.omega_minus) })
}

#[test]
fn sign_flip_fails_both_frequency_checks() {
    assert!(!c1_critical_coupling(flipped).unwrap().passed);
    assert!(!c2_oscillation_frequency(flipped).unwrap().passed);
}

#[test]
fn one_percent_scale_error_fails_grid_comparison() {
    assert!(!c1_critical_coupling(scaled).unwrap().passed);
}

#[test]
fn true_closed_form_passes() {
    assert!(c1_critical_coupling(bjj_core::model::oscillation_frequencies).unwrap().passed);
    assert!(c2_oscillation_frequency(bjj_core::model::oscillation_frequencies).unwrap().passed);
}
