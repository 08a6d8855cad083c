//! Exponent fits on IDS curves.
//!
//! `Lifshitz` fits the slope of `log|log N|` against `log E`, `VanHove` the
//! slope of `log N` against `log E`. Independently of the kind, both model
//! families `N = A E^s` and `N = A exp(-c E^{-κ})` are fitted to `log N` and
//! compared by residual standard error (residual sum of squares over the
//! degrees of freedom), so the three-parameter family gains nothing from its
//! extra parameter alone.

use serde::{Deserialize, Serialize};

use super::{IdsCurve, IdsError};

pub const MIN_FIT_POINTS: usize = 5;
const KAPPA_RANGE: (f64, f64) = (0.1, 4.0);
const KAPPA_GRID: usize = 60;
/// Fraction of nonzero values required in the default window.
const DEFAULT_WINDOW_FILL: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Lifshitz,
    #[serde(rename = "vanhove")]
    VanHove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelPreference {
    Exponential,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: FitKind,
    pub side: Option<Side>,
    pub exponent: f64,
    pub intercept: f64,
    pub window: [f64; 2],
    /// RMS residual of the exponent fit in its transformed coordinates.
    pub residual: f64,
    pub model_preference: ModelPreference,
    pub power_residual: f64,
    pub exponential_residual: f64,
    pub exponential_kappa: f64,
    pub points_used: usize,
    /// Points in the window dropped because `N = 0`.
    pub excluded: usize,
}

struct Line {
    slope: f64,
    intercept: f64,
    ssr: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ssr = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Line { slope, intercept, ssr }
}

/// Residual sum of squares of `z = a - c E^{-κ}` with `c >= 0`.
fn exponential_ssr(energies: &[f64], z: &[f64], kappa: f64) -> f64 {
    let w: Vec<f64> = energies.iter().map(|e| e.powf(-kappa)).collect();
    let line = least_squares(&w, z);
    if line.slope <= 0.0 {
        return line.ssr;
    }
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    z.iter().map(|v| (v - mean).powi(2)).sum()
}

/// Best `(κ, ssr)` over `κ ∈ [0.1, 4]`: log-grid search, then golden section
/// between the neighbours of the best grid point.
fn fit_exponential(energies: &[f64], z: &[f64]) -> (f64, f64) {
    let (lo, hi) = (KAPPA_RANGE.0.ln(), KAPPA_RANGE.1.ln());
    let at = |i: usize| (lo + (hi - lo) * i as f64 / (KAPPA_GRID - 1) as f64).exp();
    let (best, _) = (0..KAPPA_GRID)
        .map(|i| (i, exponential_ssr(energies, z, at(i))))
        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
    let mut a = at(best.saturating_sub(1)).ln();
    let mut b = at((best + 1).min(KAPPA_GRID - 1)).ln();
    let f = |t: f64| exponential_ssr(energies, z, t.exp());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let candidates = [(at(best), exponential_ssr(energies, z, at(best))), (c.exp(), fc), (d.exp(), fd)];
    candidates.into_iter().fold((0.0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
}

fn in_window(e: f64, window: [f64; 2]) -> bool {
    let slack = 1e-12;
    e >= window[0] * (1.0 - slack) && e <= window[1] * (1.0 + slack)
}

/// The lowest decade `[E_i, 10 E_i]` inside the grid in which at least 80%
/// of the values are nonzero and at least [`MIN_FIT_POINTS`] are positive.
/// A grid spanning less than a decade is its own only candidate.
pub fn default_window(energies: &[f64], values: &[f64]) -> Option<[f64; 2]> {
    let last = *energies.last()?;
    let qualifies = |w: [f64; 2]| {
        let inside: Vec<f64> = energies
            .iter()
            .zip(values)
            .filter(|(e, _)| in_window(**e, w))
            .map(|(_, v)| *v)
            .collect();
        let nonzero = inside.iter().filter(|v| **v > 0.0).count();
        nonzero >= MIN_FIT_POINTS && nonzero as f64 >= DEFAULT_WINDOW_FILL * inside.len() as f64
    };
    if 10.0 * energies[0] > last * (1.0 + 1e-12) {
        let w = [energies[0], last];
        return qualifies(w).then_some(w);
    }
    energies
        .iter()
        .take_while(|&&e| 10.0 * e <= last * (1.0 + 1e-12))
        .map(|&e| [e, 10.0 * e])
        .find(|&w| qualifies(w))
}

/// Fits `values(energies)` inside `window`.
pub fn fit_points(
    energies: &[f64],
    values: &[f64],
    kind: FitKind,
    window: [f64; 2],
) -> Result<FitResult, IdsError> {
    if energies.len() != values.len() {
        return Err(IdsError::MalformedCurve("energies and values differ in length".into()));
    }
    if !(window[0] > 0.0 && window[0] < window[1]) {
        return Err(IdsError::DegenerateWindow(format!("window [{}, {}] is empty", window[0], window[1])));
    }
    let mut excluded = 0;
    let mut es = Vec::new();
    let mut ns = Vec::new();
    for (&e, &n) in energies.iter().zip(values) {
        if !in_window(e, window) {
            continue;
        }
        if n > 0.0 {
            es.push(e);
            ns.push(n);
        } else {
            excluded += 1;
        }
    }
    if es.len() < MIN_FIT_POINTS {
        return Err(IdsError::DegenerateWindow(format!(
            "{} positive points in window (need {MIN_FIT_POINTS}), {excluded} zero points excluded",
            es.len()
        )));
    }
    if kind == FitKind::Lifshitz && ns.iter().any(|&n| n >= 1.0) {
        return Err(IdsError::DegenerateWindow("log|log N| is undefined for N >= 1".into()));
    }
    let x: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let z: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = match kind {
        FitKind::Lifshitz => z.iter().map(|v| v.abs().ln()).collect(),
        FitKind::VanHove => z.clone(),
    };
    let count = es.len() as f64;
    let line = least_squares(&x, &y);
    let power = least_squares(&x, &z);
    let power_residual = (power.ssr / (count - 2.0)).sqrt();
    let (kappa, exp_ssr) = fit_exponential(&es, &z);
    let exponential_residual = (exp_ssr / (count - 3.0)).sqrt();
    Ok(FitResult {
        kind,
        side: None,
        exponent: line.slope,
        intercept: line.intercept,
        window,
        residual: (line.ssr / count).sqrt(),
        model_preference: if exponential_residual < power_residual {
            ModelPreference::Exponential
        } else {
            ModelPreference::Power
        },
        power_residual,
        exponential_residual,
        exponential_kappa: kappa,
        points_used: es.len(),
        excluded,
    })
}

/// Fits one side of `curve`; `window` defaults to [`default_window`].
pub fn fit_exponent(
    curve: &IdsCurve,
    kind: FitKind,
    side: Side,
    window: Option<[f64; 2]>,
) -> Result<FitResult, IdsError> {
    let values = curve.values(side);
    let window = match window {
        Some(w) => w,
        None => default_window(&curve.energies, values)
            .ok_or_else(|| IdsError::DegenerateWindow("no decade of the grid is at least 80% nonzero".into()))?,
    };
    let mut fit = fit_points(&curve.energies, values, kind, window)?;
    fit.side = Some(side);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::geometric_grid;

    #[test]
    fn synthetic_lifshitz_slope() {
        let e = geometric_grid(0.01, 1.0, 30).unwrap();
        let n: Vec<f64> = e.iter().map(|x| (-x.powf(-0.5)).exp()).collect();
        let fit = fit_points(&e, &n, FitKind::Lifshitz, [0.01, 1.0]).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-6, "{}", fit.exponent);
        assert!(fit.residual < 1e-9);
        assert_eq!(fit.model_preference, ModelPreference::Exponential);
        assert!((fit.exponential_kappa - 0.5).abs() < 1e-3);
    }

    #[test]
    fn synthetic_van_hove_slope() {
        let e = geometric_grid(0.01, 1.0, 30).unwrap();
        let n: Vec<f64> = e.iter().map(|x| 0.1 * x).collect();
        let fit = fit_points(&e, &n, FitKind::VanHove, [0.01, 1.0]).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-6);
        assert_eq!(fit.model_preference, ModelPreference::Power);
    }

    #[test]
    fn zeros_are_excluded_and_counted() {
        let e = geometric_grid(0.1, 1.0, 10).unwrap();
        let mut n: Vec<f64> = e.iter().map(|x| 0.1 * x * x).collect();
        n[0] = 0.0;
        n[1] = 0.0;
        let fit = fit_points(&e, &n, FitKind::VanHove, [0.1, 1.0]).unwrap();
        assert_eq!(fit.excluded, 2);
        assert_eq!(fit.points_used, 8);
        assert!((fit.exponent - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_windows() {
        let e = geometric_grid(0.1, 1.0, 10).unwrap();
        let n = vec![0.5; 10];
        assert!(matches!(fit_points(&e, &n, FitKind::VanHove, [0.1, 0.2]), Err(IdsError::DegenerateWindow(_))));
        assert!(matches!(fit_points(&e, &n, FitKind::VanHove, [1.0, 0.1]), Err(IdsError::DegenerateWindow(_))));
        let big = vec![2.0; 10];
        assert!(matches!(fit_points(&e, &big, FitKind::Lifshitz, [0.1, 1.0]), Err(IdsError::DegenerateWindow(_))));
    }

    #[test]
    fn default_window_skips_sparse_low_end() {
        let e = geometric_grid(0.01, 10.0, 31).unwrap();
        let n: Vec<f64> = e.iter().map(|&x| if x < 0.095 { 0.0 } else { x }).collect();
        let w = default_window(&e, &n).unwrap();
        // Two zeros out of eleven points still meet the 80% fill.
        assert!((w[0] - 10f64.powf(-1.2)).abs() < 1e-12, "{w:?}");
        assert!((w[1] / w[0] - 10.0).abs() < 1e-12);
        assert!(default_window(&e, &vec![0.0; 31]).is_none());
    }
}
