//! Mechanical frequency jitter: blurring kernels, trace convolution and the
//! linewidth decomposition into coherent, fast-jitter and slow-jitter parts.

use std::f64::consts::{LN_2, PI};

use super::trace::SpectrumTrace;
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::model::angular;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JitterShape {
    #[default]
    Gaussian,
    Lorentzian,
}

impl JitterShape {
    pub fn as_str(&self) -> &'static str {
        match self {
            JitterShape::Gaussian => "gaussian",
            JitterShape::Lorentzian => "lorentzian",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Some(JitterShape::Gaussian),
            "lorentzian" => Some(JitterShape::Lorentzian),
            _ => None,
        }
    }
}

/// Distribution of the instantaneous mechanical frequency about its mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterKernel {
    pub shape: JitterShape,
    /// Full width at half maximum in Hz.
    pub fwhm: f64,
}

impl JitterKernel {
    pub fn gaussian(fwhm_hz: f64) -> Self {
        JitterKernel {
            shape: JitterShape::Gaussian,
            fwhm: fwhm_hz,
        }
    }

    pub fn lorentzian(fwhm_hz: f64) -> Self {
        JitterKernel {
            shape: JitterShape::Lorentzian,
            fwhm: fwhm_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("fwhm", self.fwhm)
    }

    /// Probability density (1/Hz) at frequency offset `x` (Hz).
    pub fn density(&self, x: f64) -> f64 {
        match self.shape {
            JitterShape::Gaussian => {
                let sigma = self.fwhm / (2.0 * (2.0 * LN_2).sqrt());
                (-(x * x) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
            }
            JitterShape::Lorentzian => {
                let hw = self.fwhm / 2.0;
                hw / (PI * (x * x + hw * hw))
            }
        }
    }

    /// Quadrature nodes `(angular offset, weight)` with weights summing to 1.
    ///
    /// Gaussian kernels use a trapezoid rule over ±6σ; Lorentzian kernels use
    /// the midpoint rule after the substitution `x = (Γ/2)·tan θ`, which turns
    /// the density into a uniform one on `(-π/2, π/2)`.
    pub fn quadrature(&self, nodes: usize) -> Vec<(f64, f64)> {
        if self.fwhm == 0.0 || nodes < 2 {
            return vec![(0.0, 1.0)];
        }
        match self.shape {
            JitterShape::Gaussian => {
                let sigma = self.fwhm / (2.0 * (2.0 * LN_2).sqrt());
                let span = 6.0 * sigma;
                let step = 2.0 * span / (nodes - 1) as f64;
                let mut q: Vec<(f64, f64)> = (0..nodes)
                    .map(|i| {
                        let x = -span + step * i as f64;
                        let edge = if i == 0 || i + 1 == nodes { 0.5 } else { 1.0 };
                        (angular(x), edge * (-(x * x) / (2.0 * sigma * sigma)).exp())
                    })
                    .collect();
                let total: f64 = q.iter().map(|p| p.1).sum();
                q.iter_mut().for_each(|p| p.1 /= total);
                q
            }
            JitterShape::Lorentzian => {
                let hw = self.fwhm / 2.0;
                let w = 1.0 / nodes as f64;
                (0..nodes)
                    .map(|i| {
                        let theta = -PI / 2.0 + PI * (i as f64 + 0.5) * w;
                        (angular(hw * theta.tan()), w)
                    })
                    .collect()
            }
        }
    }

    /// Discrete kernel on a grid of spacing `dx` (Hz), normalized so that
    /// `sum(w) == 1`. Returned as weights for offsets `-half..=half`.
    pub fn sampled(&self, dx: f64, max_half: usize) -> Vec<f64> {
        if self.fwhm == 0.0 {
            return vec![1.0];
        }
        let half = match self.shape {
            JitterShape::Gaussian => {
                let sigma = self.fwhm / (2.0 * (2.0 * LN_2).sqrt());
                ((8.0 * sigma / dx).ceil() as usize).min(max_half)
            }
            JitterShape::Lorentzian => max_half,
        };
        // integrate the density over each cell so narrow kernels stay normalized
        let cell = |j: isize| -> f64 {
            let x = j as f64 * dx;
            let sub = 8;
            (0..sub)
                .map(|s| {
                    let u = x - dx / 2.0 + dx * (s as f64 + 0.5) / sub as f64;
                    self.density(u)
                })
                .sum::<f64>()
                / sub as f64
        };
        let h = half as isize;
        let mut w: Vec<f64> = (-h..=h).map(cell).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }
}

/// Convolve a uniformly sampled trace with a unit-area jitter kernel.
///
/// Samples outside the trace are treated as zero. Non-uniform grids are
/// rejected; use [`super::resample_uniform`] first.
pub fn jitter_convolve(trace: &SpectrumTrace, kernel: &JitterKernel) -> Result<SpectrumTrace> {
    trace.validate()?;
    kernel.validate()?;
    let dx = trace
        .uniform_spacing(1e-6)
        .ok_or_else(|| Error::InvalidTrace("jitter convolution needs a uniform grid".into()))?;
    let span = trace.freqs[trace.len() - 1] - trace.freqs[0];
    if kernel.fwhm >= span / 4.0 {
        return Err(Error::param(
            "fwhm",
            format!(
                "kernel width {} must be below a quarter of the span {span}",
                kernel.fwhm
            ),
        ));
    }
    if kernel.fwhm == 0.0 {
        return Ok(trace.clone());
    }
    let n = trace.len();
    let w = kernel.sampled(dx, n - 1);
    let half = (w.len() / 2) as isize;
    let values = (0..n as isize)
        .map(|i| {
            let lo = (i - half).max(0);
            let hi = (i + half).min(n as isize - 1);
            (lo..=hi)
                .map(|j| trace.values[j as usize] * w[(i - j + half) as usize])
                .sum()
        })
        .collect();
    let mut out = trace.clone();
    out.values = values;
    Ok(out)
}

/// Result of [`jitter_decompose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterDecomposition {
    /// `γ̃m / γm`.
    pub ratio: f64,
    /// `γ̃m`, in the units of the supplied `gamma_m`.
    pub broadened_linewidth: f64,
    /// Narrowband area exceeded the reference tone area.
    pub unphysical: bool,
}

/// Fast-jitter broadening from the areas of the broadband and narrowband
/// response peaks and of the reference tone:
/// `γ̃m/γm ≈ 1 + (S_bb/S_δ)(1 - S_nb/S_δ)`.
pub fn jitter_decompose(
    area_bb: f64,
    area_nb: f64,
    area_delta: f64,
    gamma_m: f64,
) -> Result<JitterDecomposition> {
    ensure_non_negative("area_bb", area_bb)?;
    ensure_non_negative("area_nb", area_nb)?;
    ensure_positive("area_delta", area_delta)?;
    ensure_non_negative("gamma_m", gamma_m)?;
    let unphysical = area_nb > area_delta;
    if unphysical {
        log::warn!(
            "narrowband area {area_nb} exceeds reference tone area {area_delta}; broadening ratio drops below 1"
        );
    }
    let ratio = 1.0 + (area_bb / area_delta) * (1.0 - area_nb / area_delta);
    Ok(JitterDecomposition {
        ratio,
        broadened_linewidth: ratio * gamma_m,
        unphysical,
    })
}

/// Fractions of a measured total linewidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterBudget {
    /// Back-action plus intrinsic damping.
    pub coherent: f64,
    /// Fast (broadband) jitter broadening.
    pub fast: f64,
    /// Remainder attributed to slow jitter.
    pub slow: f64,
}

/// Split `total_linewidth` given the coherent linewidth and the fast-jitter
/// broadening ratio from [`jitter_decompose`].
pub fn jitter_budget(
    total_linewidth: f64,
    coherent_linewidth: f64,
    ratio: f64,
) -> Result<JitterBudget> {
    ensure_positive("total_linewidth", total_linewidth)?;
    ensure_non_negative("coherent_linewidth", coherent_linewidth)?;
    let coherent = coherent_linewidth / total_linewidth;
    let fast = (ratio - 1.0) * coherent;
    Ok(JitterBudget {
        coherent,
        fast,
        slow: 1.0 - coherent - fast,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::trace::{linspace, peak_fwhm, TraceKind};

    fn lorentz_trace(fwhm: f64, span: f64, n: usize) -> SpectrumTrace {
        let f = linspace(-span / 2.0, span / 2.0, n);
        let hw = fwhm / 2.0;
        let v = f.iter().map(|x| hw / (PI * (x * x + hw * hw))).collect();
        SpectrumTrace::new(f, v, TraceKind::Npsd).unwrap()
    }

    #[test]
    fn kernels_are_normalized() {
        for k in [JitterKernel::gaussian(3.0), JitterKernel::lorentzian(3.0)] {
            let w = k.sampled(0.1, 2000);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            let q = k.quadrature(64);
            assert!((q.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_width_is_identity() {
        let t = lorentz_trace(1.0, 40.0, 401);
        let out = jitter_convolve(&t, &JitterKernel::gaussian(0.0)).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn lorentzian_widths_add() {
        let t = lorentz_trace(1.0, 400.0, 4001);
        let out = jitter_convolve(&t, &JitterKernel::lorentzian(2.0)).unwrap();
        let w = peak_fwhm(&out.freqs, &out.values).unwrap();
        assert!((w - 3.0).abs() / 3.0 < 0.01, "fwhm {w}");
    }

    #[test]
    fn convolution_preserves_area_and_never_narrows() {
        let t = lorentz_trace(2.0, 2000.0, 8001);
        let a0 = t.area();
        let w0 = peak_fwhm(&t.freqs, &t.values).unwrap();
        let out = jitter_convolve(&t, &JitterKernel::gaussian(4.7)).unwrap();
        assert!(((out.area() - a0) / a0).abs() < 1e-4);
        assert!(peak_fwhm(&out.freqs, &out.values).unwrap() >= w0);
        // Lorentzian tails carry ~fwhm/(π·span) of the mass past the window edges
        let out = jitter_convolve(&t, &JitterKernel::lorentzian(4.7)).unwrap();
        assert!(((out.area() - a0) / a0).abs() < 2e-3);
        assert!(peak_fwhm(&out.freqs, &out.values).unwrap() >= w0);
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let t = SpectrumTrace::new(vec![0.0, 1.0, 3.0, 4.0, 5.0], vec![0.0; 5], TraceKind::Npsd)
            .unwrap();
        assert!(jitter_convolve(&t, &JitterKernel::gaussian(0.1)).is_err());
        let t = lorentz_trace(1.0, 40.0, 401);
        assert!(jitter_convolve(&t, &JitterKernel::gaussian(10.0)).is_err());
    }

    #[test]
    fn decomposition_limits() {
        let d = jitter_decompose(0.0, 0.3, 1.0, 2.0).unwrap();
        assert_eq!(d.ratio, 1.0);
        let d = jitter_decompose(5.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(d.ratio, 1.0);
        let d = jitter_decompose(1.0, 2.0, 1.0, 2.0).unwrap();
        assert!(d.unphysical && d.ratio < 1.0);
        assert!(jitter_decompose(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(jitter_decompose(-1.0, 0.0, 1.0, 1.0).is_err());
    }
}
