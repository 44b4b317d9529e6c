//! Plain-text trace files: `# key=value` header lines followed by a
//! tab-separated numeric body, one `x<TAB>y` row per sample.
//!
//! ```text
//! # kind=reflection
//! # x_unit=Hz
//! # drive_detuning_hz=424700000.0
//! 10785500000.0<TAB>0.98
//! ```
//!
//! Numbers are written in their shortest round-trip form, so
//! `parse(serialize(x)) == x` holds bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;

use super::{read_text, write_atomic};
use crate::dynamics::{RingdownTrace, Segment, SegmentLabel};
use crate::error::{Error, Result};
use crate::spectra::{PsdUnits, SpectrumTrace, TraceKind, TraceMeta};

pub const RINGDOWN_KIND: &str = "ringdown";
pub const HEATING_KIND: &str = "heating";
pub const OVERLAY_KIND: &str = "overlay";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceFile {
    /// Header entries in file order; unknown keys are kept verbatim.
    pub header: IndexMap<String, String>,
    /// Body columns, all of equal length.
    pub columns: Vec<Vec<f64>>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl TraceFile {
    pub fn new(columns: Vec<Vec<f64>>) -> Self {
        TraceFile {
            header: IndexMap::new(),
            columns,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.header.insert(key.to_string(), value.into());
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.set(key, fmt_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    Error::InvalidTrace(format!("header `{key}`: `{v}` is not a number"))
                })
            })
            .transpose()
    }

    pub fn kind(&self) -> Option<&str> {
        self.get("kind")
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, i: usize) -> Result<&[f64]> {
        self.columns
            .get(i)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidTrace(format!("trace file has no column {i}")))
    }

    fn check(&self) -> Result<()> {
        for (k, v) in &self.header {
            if k.is_empty() || k.contains(['=', '\n', '\r']) || k.trim() != k {
                return Err(Error::InvalidTrace(format!("invalid header key `{k}`")));
            }
            if v.contains(['\n', '\r']) {
                return Err(Error::InvalidTrace(format!(
                    "header `{k}` spans several lines"
                )));
            }
        }
        let n = self.rows();
        if self.columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidTrace("columns differ in length".into()));
        }
        if !self.columns.is_empty() && self.columns.len() < 2 {
            return Err(Error::InvalidTrace(
                "a trace body needs at least two columns".into(),
            ));
        }
        Ok(())
    }

    pub fn serialize(&self) -> Result<String> {
        self.check()?;
        let mut s = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(s, "# {k}={v}");
        }
        for row in 0..self.rows() {
            let line: Vec<String> = self.columns.iter().map(|c| fmt_f64(c[row])).collect();
            let _ = writeln!(s, "{}", line.join("\t"));
        }
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, Path::new("<trace>"))
    }

    fn parse_named(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut out = TraceFile::default();
        let mut in_body = false;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if let Some(rest) = line.strip_prefix('#') {
                if in_body {
                    return Err(err(lineno, "header line after the data body".into()));
                }
                let rest = rest.strip_prefix(' ').unwrap_or(rest);
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| err(lineno, format!("expected `# key=value`, got `{line}`")))?;
                if out.header.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(err(lineno, format!("duplicate header key `{k}`")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            in_body = true;
            let fields: Vec<&str> = line.split('\t').collect();
            if out.columns.is_empty() {
                if fields.len() < 2 {
                    return Err(err(
                        lineno,
                        "expected at least two tab-separated columns".into(),
                    ));
                }
                out.columns = vec![Vec::new(); fields.len()];
            } else if fields.len() != out.columns.len() {
                return Err(err(
                    lineno,
                    format!(
                        "expected {} columns, found {}",
                        out.columns.len(),
                        fields.len()
                    ),
                ));
            }
            for (col, f) in out.columns.iter_mut().zip(&fields) {
                col.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| err(lineno, format!("`{f}` is not a number")))?,
                );
            }
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_named(&read_text(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.serialize()?.as_bytes())
    }

    pub fn from_spectrum(trace: &SpectrumTrace) -> Self {
        let mut f = TraceFile::new(vec![trace.freqs.clone(), trace.values.clone()])
            .with("kind", trace.kind.as_str())
            .with("x_unit", "Hz");
        let y_unit = match (trace.kind, trace.meta.psd_units) {
            (TraceKind::Npsd, PsdUnits::Quanta) => "quanta",
            (TraceKind::Npsd, PsdUnits::WattsPerHz) => "W/Hz",
            _ => "1",
        };
        f.set("y_unit", y_unit);
        if let Some(d) = trace.meta.drive_detuning_hz {
            f.set_f64("drive_detuning_hz", d);
        }
        if let Some(n) = trace.meta.n_d {
            f.set_f64("n_d", n);
        }
        if let Some(g) = trace.meta.gain_db {
            f.set_f64("gain_db", g);
        }
        f
    }

    pub fn to_spectrum(&self) -> Result<SpectrumTrace> {
        let kind_str = self
            .kind()
            .ok_or_else(|| Error::InvalidTrace("missing `kind` header".into()))?;
        let kind = TraceKind::parse(kind_str)
            .ok_or_else(|| Error::InvalidTrace(format!("`{kind_str}` is not a spectrum kind")))?;
        if let Some(u) = self.get("x_unit").filter(|u| *u != "Hz") {
            return Err(Error::InvalidTrace(format!(
                "spectrum x unit must be Hz, got `{u}`"
            )));
        }
        let psd_units = match self.get("y_unit") {
            Some("W/Hz") => PsdUnits::WattsPerHz,
            _ => PsdUnits::Quanta,
        };
        let meta = TraceMeta {
            drive_detuning_hz: self.get_f64("drive_detuning_hz")?,
            n_d: self.get_f64("n_d")?,
            gain_db: self.get_f64("gain_db")?,
            psd_units,
        };
        Ok(
            SpectrumTrace::new(self.column(0)?.to_vec(), self.column(1)?.to_vec(), kind)?
                .with_meta(meta),
        )
    }

    pub fn from_ringdown(trace: &RingdownTrace) -> Self {
        let mut f = TraceFile::new(vec![trace.times.clone(), trace.power.clone()])
            .with("kind", RINGDOWN_KIND)
            .with("x_unit", "s")
            .with("y_unit", "arb");
        if !trace.segments.is_empty() {
            let segs: Vec<String> = trace
                .segments
                .iter()
                .map(|s| format!("{}:{}:{}", s.label.as_str(), s.start, s.end))
                .collect();
            f.set("segments", segs.join(","));
        }
        f
    }

    pub fn to_ringdown(&self) -> Result<RingdownTrace> {
        self.expect_kind(RINGDOWN_KIND)?;
        let mut trace = RingdownTrace::new(self.column(0)?.to_vec(), self.column(1)?.to_vec())?;
        if let Some(s) = self.get("segments") {
            for item in s.split(',') {
                let bad = || Error::InvalidTrace(format!("malformed segment `{item}`"));
                let mut parts = item.split(':');
                let label = parts.next().and_then(SegmentLabel::parse).ok_or_else(bad)?;
                let start = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
                let end = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
                if parts.next().is_some() || start > end || end > trace.len() {
                    return Err(bad());
                }
                trace.segments.push(Segment { label, start, end });
            }
        }
        Ok(trace)
    }

    /// Occupancy time series after the pump turn-on.
    pub fn from_heating(times: &[f64], occupancy: &[f64]) -> Self {
        TraceFile::new(vec![times.to_vec(), occupancy.to_vec()])
            .with("kind", HEATING_KIND)
            .with("x_unit", "s")
            .with("y_unit", "quanta")
    }

    pub fn to_heating(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.expect_kind(HEATING_KIND)?;
        Ok((self.column(0)?.to_vec(), self.column(1)?.to_vec()))
    }

    /// Three-column data/model overlay for plotting.
    pub fn overlay(x: &[f64], data: &[f64], model: &[f64], x_unit: &str) -> Self {
        TraceFile::new(vec![x.to_vec(), data.to_vec(), model.to_vec()])
            .with("kind", OVERLAY_KIND)
            .with("x_unit", x_unit)
            .with("columns", "x,data,model")
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        match self.kind() {
            Some(k) if k == kind => Ok(()),
            other => Err(Error::InvalidTrace(format!(
                "expected a {kind} trace, found kind {}",
                other.unwrap_or("<none>")
            ))),
        }
    }
}
