use super::trace::{SpectrumTrace, TraceKind};
use crate::error::{Error, Result};

/// `1/|S11|²` of a reflection trace.
pub fn inverse_response(trace: &SpectrumTrace) -> Result<SpectrumTrace> {
    trace.validate()?;
    if trace.kind != TraceKind::Reflection {
        return Err(Error::InvalidTrace(format!(
            "inverse response needs a reflection trace, got {}",
            trace.kind.as_str()
        )));
    }
    if let Some(i) = trace.values.iter().position(|&v| v <= 0.0) {
        return Err(Error::InvalidTrace(format!(
            "reflection magnitude {} at index {i} cannot be inverted",
            trace.values[i]
        )));
    }
    let mut out = trace.clone();
    out.values = trace.values.iter().map(|v| 1.0 / (v * v)).collect();
    out.kind = TraceKind::InversePower;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    /// Parabolically refined position.
    pub freq: f64,
    pub value: f64,
}

/// Interior local maxima found by three-point comparison, refined with a
/// parabola through the neighbours. On a flat top the lowest-frequency
/// sample wins.
pub fn local_maxima(freqs: &[f64], values: &[f64]) -> Vec<Peak> {
    let n = values.len().min(freqs.len());
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] && values[i] >= values[i + 1] {
            // skip the rest of a plateau so each flat top yields one peak
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                peaks.push(refine(freqs, values, i));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn refine(freqs: &[f64], values: &[f64], i: usize) -> Peak {
    let (x0, x1, x2) = (freqs[i - 1], freqs[i], freqs[i + 1]);
    let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
    // parabola through three (possibly unevenly spaced) points
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let a = (d1 - d0) / (x2 - x0);
    if a >= 0.0 || !a.is_finite() {
        return Peak {
            index: i,
            freq: x1,
            value: y1,
        };
    }
    let b = d0 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y1 + (xv - x1) * (d0 + a * (xv - x0));
    Peak {
        index: i,
        freq: xv,
        value: yv.max(y1),
    }
}

/// Highest local maximum on each side of `center` (Hz), searched within
/// `half_window`. Returns `None` unless both sides hold a peak.
pub fn peak_pair(trace: &SpectrumTrace, center: f64, half_window: f64) -> Option<(Peak, Peak)> {
    let peaks = local_maxima(&trace.freqs, &trace.values);
    let best = |side: &dyn Fn(f64) -> bool| {
        peaks
            .iter()
            .filter(|p| (p.freq - center).abs() <= half_window && side(p.freq))
            .fold(None::<Peak>, |acc, p| match acc {
                Some(a) if a.value >= p.value => Some(a),
                _ => Some(*p),
            })
    };
    let lower = best(&|f| f < center)?;
    let upper = best(&|f| f > center)?;
    Some((lower, upper))
}
