use crate::error::{Error, Result};

/// What the values of a [`SpectrumTrace`] represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// `|S11|`, dimensionless.
    Reflection,
    /// `1/|S11|²`, dimensionless.
    InversePower,
    /// Output noise power spectral density.
    Npsd,
}

impl TraceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceKind::Reflection => "reflection",
            TraceKind::InversePower => "inverse",
            TraceKind::Npsd => "npsd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reflection" => Some(TraceKind::Reflection),
            "inverse" => Some(TraceKind::InversePower),
            "npsd" => Some(TraceKind::Npsd),
            _ => None,
        }
    }
}

/// Units of PSD values. Reflection traces are always dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsdUnits {
    /// Normalized so the vacuum floor is 1.
    #[default]
    Quanta,
    /// Detected power spectral density after the amplifier chain.
    WattsPerHz,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMeta {
    /// Drive detuning from the even supermode, `Delta_{r+,d}/2π` in Hz.
    pub drive_detuning_hz: Option<f64>,
    /// Odd-mode intracavity photon number of the drive.
    pub n_d: Option<f64>,
    /// Gain of the detection chain in dB.
    pub gain_db: Option<f64>,
    pub psd_units: PsdUnits,
}

/// Sampled frequency-domain data. Frequencies are ordinary (Hz) and strictly
/// increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: TraceKind,
    pub meta: TraceMeta,
}

impl SpectrumTrace {
    pub fn new(freqs: Vec<f64>, values: Vec<f64>, kind: TraceKind) -> Result<Self> {
        let trace = SpectrumTrace {
            freqs,
            values,
            kind,
            meta: TraceMeta::default(),
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn with_meta(mut self, meta: TraceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.values.len() {
            return Err(Error::InvalidTrace(format!(
                "{} frequencies but {} values",
                self.freqs.len(),
                self.values.len()
            )));
        }
        if self.freqs.len() < 2 {
            return Err(Error::InvalidTrace("need at least two samples".into()));
        }
        if let Some(i) = self.freqs.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTrace(format!(
                "frequencies not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = self
            .values
            .iter()
            .chain(&self.freqs)
            .position(|v| !v.is_finite())
        {
            return Err(Error::InvalidTrace(format!("non-finite sample at {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Sample spacing when the grid is uniform to relative `tol`.
    pub fn uniform_spacing(&self, tol: f64) -> Option<f64> {
        let n = self.freqs.len();
        let step = (self.freqs[n - 1] - self.freqs[0]) / (n - 1) as f64;
        let ok = self
            .freqs
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= tol * step.abs());
        ok.then_some(step)
    }

    /// Trapezoidal integral of the values over frequency (Hz).
    pub fn area(&self) -> f64 {
        trapezoid(&self.freqs, &self.values)
    }

    /// Index and value of the smallest sample.
    pub fn argmin(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            )
    }

    pub fn argmax(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            )
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Uniform grid of `points` samples spanning `[start, stop]`.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        stop
                    } else {
                        start + step * i as f64
                    }
                })
                .collect()
        }
    }
}

/// Linearly interpolate a trace onto a uniform grid with `points` samples
/// spanning the same range.
pub fn resample_uniform(trace: &SpectrumTrace, points: usize) -> Result<SpectrumTrace> {
    trace.validate()?;
    if points < 2 {
        return Err(Error::InvalidTrace(
            "resampling needs at least two points".into(),
        ));
    }
    let grid = linspace(trace.freqs[0], trace.freqs[trace.len() - 1], points);
    let mut j = 0;
    let values = grid
        .iter()
        .map(|&f| {
            while j + 2 < trace.len() && trace.freqs[j + 1] < f {
                j += 1;
            }
            let (x0, x1) = (trace.freqs[j], trace.freqs[j + 1]);
            let t = ((f - x0) / (x1 - x0)).clamp(0.0, 1.0);
            trace.values[j] + t * (trace.values[j + 1] - trace.values[j])
        })
        .collect();
    Ok(SpectrumTrace {
        freqs: grid,
        values,
        kind: trace.kind,
        meta: trace.meta.clone(),
    })
}

/// Full width at half maximum of the highest peak, with linear
/// interpolation of the half-maximum crossings. `None` if either crossing
/// lies outside the trace.
pub fn peak_fwhm(freqs: &[f64], values: &[f64]) -> Option<f64> {
    let (imax, vmax) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
    let half = vmax / 2.0;
    let left = (0..imax).rev().find(|&i| values[i] < half)?;
    let right = (imax + 1..values.len()).find(|&i| values[i] < half)?;
    let cross = |a: usize, b: usize| {
        let t = (half - values[a]) / (values[b] - values[a]);
        freqs[a] + t * (freqs[b] - freqs[a])
    };
    Some(cross(right - 1, right) - cross(left + 1, left))
}
