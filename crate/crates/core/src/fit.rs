//! Least-squares fits and exponential-rate extraction from time series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("x and y lengths differ".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Fit(format!("need at least two points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared, n })
}

/// Exponential rate fitted to `ln(series)` over an automatically chosen window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
    pub r_squared: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateFit {
    Fitted(RateEstimate),
    /// The series never spans the window bounds (no exponential regime).
    NoWindow {
        lower: f64,
        upper: f64,
    },
}

impl RateFit {
    pub fn rate(&self) -> Option<f64> {
        match self {
            RateFit::Fitted(e) => Some(e.rate),
            RateFit::NoWindow { .. } => None,
        }
    }
}

const MIN_POINTS: usize = 3;

fn check_series(times: &[f64], series: &[f64]) -> Result<()> {
    if times.len() != series.len() {
        return Err(Error::InvalidParameter("times and series lengths differ".into()));
    }
    if series.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    Ok(())
}

fn argmax(series: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in series.iter().enumerate() {
        if *v > series[best] {
            best = i;
        }
    }
    best
}

fn fit_window(times: &[f64], series: &[f64], lo: usize, hi: usize) -> Result<RateEstimate> {
    let window = &series[lo..=hi];
    if let Some(bad) = window.iter().find(|v| **v <= 0.0) {
        return Err(Error::Fit(format!("non-positive value {bad} inside the fit window")));
    }
    let logs: Vec<f64> = window.iter().map(|v| v.ln()).collect();
    let f = linear_fit(&times[lo..=hi], &logs)?;
    Ok(RateEstimate { rate: f.slope, t_start: times[lo], t_end: times[hi], points: f.n, r_squared: f.r_squared })
}

/// Growth rate over the window from the first time the series exceeds ten
/// times its initial value up to the last time before the peak that it is
/// still below a tenth of the peak.
pub fn fit_growth_rate(times: &[f64], series: &[f64]) -> Result<RateFit> {
    check_series(times, series)?;
    let peak_idx = argmax(series);
    let lower = 10.0 * series[0];
    let upper = 0.1 * series[peak_idx];
    if !(lower < upper) {
        return Ok(RateFit::NoWindow { lower, upper });
    }
    let Some(lo) = series[..=peak_idx].iter().position(|v| *v >= lower) else {
        return Ok(RateFit::NoWindow { lower, upper });
    };
    let Some(hi) = series[..=peak_idx].iter().rposition(|v| *v <= upper) else {
        return Ok(RateFit::NoWindow { lower, upper });
    };
    if hi < lo || hi - lo + 1 < MIN_POINTS {
        return Ok(RateFit::NoWindow { lower, upper });
    }
    fit_window(times, series, lo, hi).map(RateFit::Fitted)
}

/// Decay rate after the peak: from the first time the series falls below a
/// tenth of the peak down to the last time it is above ten times its final
/// value. The returned rate is positive for a decaying series.
pub fn fit_decay_rate(times: &[f64], series: &[f64]) -> Result<RateFit> {
    check_series(times, series)?;
    let peak_idx = argmax(series);
    let upper = 0.1 * series[peak_idx];
    let lower = 10.0 * series[series.len() - 1];
    if !(lower < upper) {
        return Ok(RateFit::NoWindow { lower, upper });
    }
    let tail = &series[peak_idx..];
    let Some(lo) = tail.iter().position(|v| *v <= upper) else {
        return Ok(RateFit::NoWindow { lower, upper });
    };
    let Some(hi) = tail.iter().rposition(|v| *v >= lower) else {
        return Ok(RateFit::NoWindow { lower, upper });
    };
    if hi < lo || hi - lo + 1 < MIN_POINTS {
        return Ok(RateFit::NoWindow { lower, upper });
    }
    let mut est = fit_window(times, series, peak_idx + lo, peak_idx + hi)?;
    est.rate = -est.rate;
    Ok(RateFit::Fitted(est))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn growth_then_saturation() {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 0.1).collect();
        // Logistic curve: exponential with rate 0.8 until saturation at 1.
        let s: Vec<f64> = t.iter().map(|t| 1e-10 * (0.8 * t).exp() / (1.0 + 1e-10 * (0.8 * t).exp())).collect();
        let f = fit_growth_rate(&t, &s).unwrap();
        assert!((f.rate().unwrap() - 0.8).abs() < 0.01, "{f:?}");
    }

    #[test]
    fn decay_after_peak() {
        let t: Vec<f64> = (0..300).map(|k| k as f64 * 0.1).collect();
        let s: Vec<f64> = t.iter().map(|t| if *t < 5.0 { t / 5.0 } else { (-0.5 * (t - 5.0)).exp() }).collect();
        let f = fit_decay_rate(&t, &s).unwrap();
        assert!((f.rate().unwrap() - 0.5).abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn flat_series_has_no_window() {
        let t: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let s = vec![1.0; 50];
        assert!(matches!(fit_growth_rate(&t, &s).unwrap(), RateFit::NoWindow { .. }));
    }

    #[test]
    fn non_positive_inside_window_is_an_error() {
        let t: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let s = [1e-6, 1e-4, -1.0, 1e-3, 1e-2, 1.0];
        assert!(matches!(fit_growth_rate(&t, &s), Err(Error::Fit(_))));
    }
}
