//! Curve fitting for sweep results.
//!
//! Two families: ordinary least squares for `y = a·x + b`, and a damped
//! Gauss-Newton (Levenberg-Marquardt) fit of the saturating form
//! `y = g1·tanh(g2·x) + g3`. The tanh fit multi-starts over a grid of
//! curvature guesses and always includes the flat model `g1 = 0,
//! g3 = mean(y)` as a candidate, so its residual never exceeds the flat
//! fit's.

use nalgebra::{Matrix3, Vector3};

use crate::{Error, Result};

/// Which model a [`FitResult`] contains.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FitKind {
    /// `y = coeffs[0]·x + coeffs[1]`.
    Linear,
    /// `y = coeffs[0]·tanh(coeffs[1]·x) + coeffs[2]`.
    Tanh,
}

impl std::fmt::Display for FitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitKind::Linear => write!(f, "linear"),
            FitKind::Tanh => write!(f, "tanh"),
        }
    }
}

/// A fitted model with its residual sum of squares.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub kind: FitKind,
    pub coeffs: Vec<f64>,
    pub rss: f64,
    pub converged: bool,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        match self.kind {
            FitKind::Linear => self.coeffs[0] * x + self.coeffs[1],
            FitKind::Tanh => self.coeffs[0] * (self.coeffs[1] * x).tanh() + self.coeffs[2],
        }
    }
}

fn check_input(x: &[f64], y: &[f64], min_points: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < min_points {
        return Err(Error::Fit(format!("need at least {min_points} points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data point".into()));
    }
    Ok(())
}

fn rss_of(x: &[f64], y: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (f(xi) - yi) * (f(xi) - yi)).sum()
}

/// Least-squares line through the data, computed in centered closed form.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<FitResult> {
    check_input(x, y, 2)?;
    let n = x.len() as f64;
    let x_mean = x.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&xi| (xi - x_mean) * (xi - x_mean)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("x values are all identical".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(&xi, &yi)| (xi - x_mean) * (yi - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let rss = rss_of(x, y, |xi| slope * xi + intercept);
    Ok(FitResult { kind: FitKind::Linear, coeffs: vec![slope, intercept], rss, converged: true })
}

/// For a fixed curvature `g2`, the optimal `(g1, g3)` are linear in the basis
/// `[tanh(g2·x), 1]`; solve that 2x2 system exactly.
fn amplitude_offset_for(x: &[f64], y: &[f64], g2: f64) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let t: Vec<f64> = x.iter().map(|&xi| (g2 * xi).tanh()).collect();
    let st: f64 = t.iter().sum();
    let stt: f64 = t.iter().map(|ti| ti * ti).sum();
    let sy: f64 = y.iter().sum();
    let sty: f64 = t.iter().zip(y).map(|(ti, &yi)| ti * yi).sum();
    let det = stt * n - st * st;
    if det.abs() < 1e-12 {
        return None;
    }
    let g1 = (sty * n - st * sy) / det;
    let g3 = (stt * sy - st * sty) / det;
    Some((g1, g3))
}

/// One Levenberg-Marquardt descent from the given start. Returns the refined
/// parameters, their residual, and whether the stop was a convergence test
/// rather than the iteration cap.
fn lm_tanh(x: &[f64], y: &[f64], start: [f64; 3]) -> ([f64; 3], f64, bool) {
    let model = |g: &[f64; 3], xi: f64| g[0] * (g[1] * xi).tanh() + g[2];
    let mut g = start;
    let mut rss = rss_of(x, y, |xi| model(&g, xi));
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..200 {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&xi, &yi) in x.iter().zip(y) {
            let th = (g[1] * xi).tanh();
            let sech2 = 1.0 - th * th;
            let jac = Vector3::new(th, g[0] * xi * sech2, 1.0);
            let r = model(&g, xi) - yi;
            jtj += jac * jac.transpose();
            jtr += jac * r;
        }
        let mut stepped = false;
        // Retry with heavier damping until a step lowers the residual.
        for _ in 0..25 {
            let damped = jtj + Matrix3::identity() * lambda;
            let Some(delta) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [g[0] + delta[0], g[1] + delta[1], g[2] + delta[2]];
            let trial_rss = rss_of(x, y, |xi| model(&trial, xi));
            if trial_rss.is_finite() && trial_rss < rss {
                let gain = rss - trial_rss;
                g = trial;
                rss = trial_rss;
                lambda = (lambda / 10.0).max(1e-12);
                stepped = true;
                if gain < 1e-12 * (1.0 + rss) || delta.norm() < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !stepped {
            // No improving direction left: a (possibly local) minimum.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    (g, rss, converged)
}

/// Fits `y = g1·tanh(g2·x) + g3`.
///
/// The sign ambiguity `(g1, g2) -> (-g1, -g2)` is resolved toward `g2 >= 0`.
pub fn tanh_fit(x: &[f64], y: &[f64]) -> Result<FitResult> {
    // Three parameters: demand at least one extra point over the exact case.
    check_input(x, y, 4)?;
    let n = x.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    // Flat fallback: guarantees the reported fit is never worse than a
    // constant.
    let flat = [0.0, 1.0, y_mean];
    let mut best = (flat, rss_of(x, y, |_| y_mean), true);
    for g2 in [0.05, 0.1, 0.2, 0.5, 1.0] {
        let Some((g1, g3)) = amplitude_offset_for(x, y, g2) else { continue };
        let (g, rss, converged) = lm_tanh(x, y, [g1, g2, g3]);
        if rss < best.1 {
            best = (g, rss, converged);
        }
    }
    let (mut g, rss, converged) = best;
    if g[1] < 0.0 {
        g[0] = -g[0];
        g[1] = -g[1];
    }
    Ok(FitResult { kind: FitKind::Tanh, coeffs: g.to_vec(), rss, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_is_exact_on_collinear_points() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|xi| 2.0 * xi + 1.0).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.coeffs[0] - 2.0).abs() < 1e-12);
        assert!((fit.coeffs[1] - 1.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
        assert!(fit.converged);
    }

    #[test]
    fn linear_fit_matches_hand_computed_values() {
        // Centered formulas by hand: slope 9.5/5 = 1.9, intercept 0.9,
        // residuals [0.1, 0.2, -0.7, 0.4] so rss = 0.7.
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 4.0, 7.0];
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.coeffs[0] - 1.9).abs() < 1e-12);
        assert!((fit.coeffs[1] - 0.9).abs() < 1e-12);
        assert!((fit.rss - 0.7).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_rejects_bad_input() {
        assert!(linear_fit(&[1.0, 2.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(linear_fit(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn tanh_fit_recovers_exact_parameters() {
        let truth = [3.5, 0.37, 0.62];
        let x: Vec<f64> = (1..=8).map(|i| 2.0 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&xi| truth[0] * (truth[1] * xi).tanh() + truth[2]).collect();
        let fit = tanh_fit(&x, &y).unwrap();
        assert!(fit.converged);
        assert!(fit.rss < 1e-12, "rss {}", fit.rss);
        for (c, t) in fit.coeffs.iter().zip(truth) {
            assert!((c - t).abs() < 1e-5, "coeffs {:?}", fit.coeffs);
        }
    }

    #[test]
    fn tanh_fit_handles_noise() {
        // Deterministic pseudo-noise, small against the signal.
        let truth = [2.0, 0.5, 1.0];
        let x: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                truth[0] * (truth[1] * xi).tanh() + truth[2] + 0.01 * ((i as f64 * 2.7).sin())
            })
            .collect();
        let fit = tanh_fit(&x, &y).unwrap();
        assert!((fit.coeffs[0] - truth[0]).abs() < 0.1);
        assert!((fit.coeffs[1] - truth[1]).abs() < 0.1);
        assert!((fit.coeffs[2] - truth[2]).abs() < 0.1);
    }

    #[test]
    fn tanh_fit_never_beats_flat_on_flat_data() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.5; 5];
        let fit = tanh_fit(&x, &y).unwrap();
        assert!(fit.rss < 1e-18);
        assert!((fit.predict(3.0) - 2.5).abs() < 1e-9);
    }

    #[test]
    fn tanh_fit_rss_is_bounded_by_flat_residual() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [0.3, 1.9, 0.2, 2.1, 0.4, 1.8];
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let flat_rss: f64 = y.iter().map(|yi| (yi - mean) * (yi - mean)).sum();
        let fit = tanh_fit(&x, &y).unwrap();
        assert!(fit.rss <= flat_rss + 1e-12, "rss {} flat {}", fit.rss, flat_rss);
    }

    #[test]
    fn tanh_fit_canonicalizes_curvature_sign() {
        let x: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&xi| 1.5 * (0.4 * xi).tanh() + 0.2).collect();
        let fit = tanh_fit(&x, &y).unwrap();
        assert!(fit.coeffs[1] >= 0.0);
        assert!(fit.coeffs[0] > 0.0);
    }

    #[test]
    fn predict_matches_model_formula() {
        let lin = FitResult { kind: FitKind::Linear, coeffs: vec![2.0, -1.0], rss: 0.0, converged: true };
        assert!((lin.predict(3.0) - 5.0).abs() < 1e-12);
        let tanh = FitResult { kind: FitKind::Tanh, coeffs: vec![2.0, 0.5, 1.0], rss: 0.0, converged: true };
        assert!((tanh.predict(2.0) - (2.0 * 1.0f64.tanh() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn kind_display_names() {
        assert_eq!(FitKind::Linear.to_string(), "linear");
        assert_eq!(FitKind::Tanh.to_string(), "tanh");
    }
}
