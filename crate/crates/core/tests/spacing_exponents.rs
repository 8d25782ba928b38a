use bjj_core::seeding::stream;
use bjj_core::spectra::{ginibre_spectrum, poisson_cloud, small_spacing_exponent, unfold_spacings, GinibreSpacing};

const LO: f64 = 0.05;
const HI: f64 = 0.3;

/// Log-log slope of the analytic reference CDF, minus one.
fn reference_exponent() -> f64 {
    let r = GinibreSpacing::new();
    let (a, b) = (0.1, 0.2);
    (r.cdf(b) / r.cdf(a)).ln() / (b / a).ln() - 1.0
}

#[test]
fn reference_density_is_cubic_at_small_spacing() {
    let beta = reference_exponent();
    assert!((beta - 3.0).abs() < 0.1, "{beta}");
}

#[test]
fn sampled_ginibre_spacings_repel_cubically() {
    let mut all = Vec::new();
    for rep in 0..200 {
        let ev = ginibre_spectrum(300, &mut stream(7, "ginibre-small", rep)).unwrap();
        all.extend(unfold_spacings(&ev, 30).unwrap().spacings);
    }
    let beta = small_spacing_exponent(&all, LO, HI).unwrap();
    assert!((beta - reference_exponent()).abs() < 0.4, "{beta}");
}

#[test]
fn poisson_spacings_grow_linearly() {
    let points = poisson_cloud(20_000, &mut stream(7, "poisson-small", 0));
    let spacings = unfold_spacings(&points, 30).unwrap().spacings;
    let beta = small_spacing_exponent(&spacings, LO, HI).unwrap();
    assert!((beta - 1.0).abs() < 0.2, "{beta}");
}
