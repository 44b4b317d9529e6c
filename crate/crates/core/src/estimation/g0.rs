use super::report::{FitReport, ParamUnit, StageRecord};
use crate::error::{ensure_positive, Error, Result};
use crate::model::ordinary;

/// One damping measurement: intracavity photons and total damping (rad/s),
/// with an optional relative weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingPoint {
    pub n_d: f64,
    pub gamma_m: f64,
    pub weight: f64,
}

impl DampingPoint {
    pub fn new(n_d: f64, gamma_m: f64) -> Self {
        DampingPoint {
            n_d,
            gamma_m,
            weight: 1.0,
        }
    }
}

/// Weighted regression `γm = γi + (4g0²/κ)·n_d`; reports the vacuum
/// coupling `g0_pm = sqrt(slope·κ/4)`, the full-mode `g0 = 2·g0_pm` and the
/// intercept, all in Hz.
///
/// Standard errors are scaled by the residual variance, so only relative
/// weights matter.
pub fn fit_g0_slope(points: &[DampingPoint], kappa_plus: f64) -> Result<FitReport> {
    ensure_positive("kappa_plus", kappa_plus)?;
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| !(p.weight > 0.0) || !p.n_d.is_finite() || !p.gamma_m.is_finite())
    {
        return Err(Error::Fit(
            "points need finite values and positive weights".into(),
        ));
    }
    let sw: f64 = points.iter().map(|p| p.weight).sum();
    let mx = points.iter().map(|p| p.weight * p.n_d).sum::<f64>() / sw;
    let my = points.iter().map(|p| p.weight * p.gamma_m).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.weight * (p.n_d - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("photon numbers must not all coincide".into()));
    }
    let sxy: f64 = points
        .iter()
        .map(|p| p.weight * (p.n_d - mx) * (p.gamma_m - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2: f64 = points
        .iter()
        .map(|p| p.weight * (p.gamma_m - intercept - slope * p.n_d).powi(2))
        .sum();
    let s2 = chi2 / (points.len() - 2) as f64;
    // normalize so the residual variance, not the weight scale, sets the errors
    let slope_err = (s2 / sxx).sqrt();
    let intercept_err = (s2 * (1.0 / sw + mx * mx / sxx)).sqrt();

    let mut report = FitReport::new("g0slope");
    report.residual_norm = chi2.sqrt() / sw.sqrt();
    report.stage_log.push(
        StageRecord::new("regression")
            .input(format!("{} points", points.len()))
            .output("slope", slope)
            .output("intercept", intercept),
    );
    if slope < 0.0 {
        report.set("slope", slope, slope_err, ParamUnit::Dimensionless);
        return Ok(report.degenerate(format!(
            "damping decreases with photon number (slope {slope:.3e} rad/s per photon)"
        )));
    }
    let g0_pm = (slope * kappa_plus / 4.0).sqrt();
    let g0_pm_err = if g0_pm > 0.0 {
        slope_err * kappa_plus / (8.0 * g0_pm)
    } else {
        (slope_err * kappa_plus / 4.0).sqrt()
    };
    report.set("g0_pm", ordinary(g0_pm), ordinary(g0_pm_err), ParamUnit::Hz);
    report.set(
        "g0",
        2.0 * ordinary(g0_pm),
        2.0 * ordinary(g0_pm_err),
        ParamUnit::Hz,
    );
    report.set(
        "gamma_i_intercept",
        ordinary(intercept),
        ordinary(intercept_err),
        ParamUnit::Hz,
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::angular;

    fn sweep(g0_pm_hz: f64, gamma_i_hz: f64) -> Vec<DampingPoint> {
        let k = angular(230e3);
        let g0 = angular(g0_pm_hz);
        [0.5e5, 1.0e5, 1.42e5, 2.0e5, 3.0e5, 4.3e5]
            .iter()
            .map(|&n| DampingPoint::new(n, angular(gamma_i_hz) + 4.0 * g0 * g0 * n / k))
            .collect()
    }

    #[test]
    fn recovers_coupling() {
        let r = fit_g0_slope(&sweep(17.3, 68.0), angular(230e3)).unwrap();
        assert!(((r.value("g0_pm").unwrap() - 17.3) / 17.3).abs() < 1e-9);
        assert!((r.value("g0").unwrap() - 34.6).abs() < 1e-6);
        assert!((r.value("gamma_i_intercept").unwrap() - 68.0).abs() < 1e-6);
    }

    #[test]
    fn flat_sweep_gives_zero_coupling() {
        let pts: Vec<_> = (1..=4).map(|i| DampingPoint::new(i as f64, 5.0)).collect();
        let r = fit_g0_slope(&pts, 1.0).unwrap();
        assert_eq!(r.value("g0_pm").unwrap(), 0.0);
        assert!((angular(r.value("gamma_i_intercept").unwrap()) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn weight_scale_invariance() {
        let mut pts = sweep(17.3, 68.0);
        for (i, p) in pts.iter_mut().enumerate() {
            p.gamma_m *= 1.0 + 0.01 * (i as f64 - 2.5);
            p.weight = 1.0 + i as f64;
        }
        let a = fit_g0_slope(&pts, 1.4e6).unwrap();
        for p in pts.iter_mut() {
            p.weight *= 1e6;
        }
        let b = fit_g0_slope(&pts, 1.4e6).unwrap();
        for name in ["g0_pm", "gamma_i_intercept"] {
            let (x, y) = (a.get(name).unwrap(), b.get(name).unwrap());
            assert!((x.value - y.value).abs() <= 1e-12 * x.value.abs());
            assert!((x.stderr - y.stderr).abs() <= 1e-9 * x.stderr.abs());
        }
    }

    #[test]
    fn negative_slope_is_degenerate() {
        let pts: Vec<_> = (1..=4)
            .map(|i| DampingPoint::new(i as f64, 10.0 - i as f64))
            .collect();
        assert!(fit_g0_slope(&pts, 1.0).unwrap().is_degenerate());
    }
}
