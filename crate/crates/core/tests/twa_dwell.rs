use bjj_core::model::{fixed_points, Family};
use bjj_core::twa::fp4_dwell;
use bjj_core::{ModelParams, Spin};

// Sampling noise lets the ensemble leave the classically stable center; this slows
// as the spin grows.
#[test]
fn antisymmetric_self_trapping_lasts_longer_at_larger_spin() {
    let p = ModelParams::classical(1.7, 0.2);
    assert!(fixed_points(&p).unwrap().first(Family::FpIV).is_some());
    let grid: Vec<f64> = (0..=200).map(|k| k as f64).collect();
    let dwell = |s: f64| fp4_dwell(&p, Spin::new(s).unwrap(), 200, 1e-3, &grid, 0.5, 3).unwrap().time;
    let small = dwell(200.0).expect("S=200 escapes within the window");
    match dwell(1000.0) {
        Some(large) => assert!(large > 1.5 * small, "{small} vs {large}"),
        None => assert!(small < 150.0, "{small}"),
    }
}
