use std::fmt::Write as _;

use indexmap::IndexMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamUnit {
    Hz,
    Dimensionless,
}

impl ParamUnit {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParamUnit::Hz => "Hz",
            ParamUnit::Dimensionless => "1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Hz" => Some(ParamUnit::Hz),
            "1" => Some(ParamUnit::Dimensionless),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParam {
    pub value: f64,
    pub stderr: f64,
    pub unit: ParamUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Converged,
    MaxIter,
    Degenerate,
}

impl Convergence {
    pub fn as_str(&self) -> &'static str {
        match self {
            Convergence::Converged => "converged",
            Convergence::MaxIter => "max_iter",
            Convergence::Degenerate => "degenerate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "converged" => Some(Convergence::Converged),
            "max_iter" => Some(Convergence::MaxIter),
            "degenerate" => Some(Convergence::Degenerate),
            _ => None,
        }
    }
}

/// One step of a multi-stage fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageRecord {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: IndexMap<String, f64>,
    pub note: Option<String>,
}

impl StageRecord {
    pub fn new(name: impl Into<String>) -> Self {
        StageRecord {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn input(mut self, name: impl Into<String>) -> Self {
        self.inputs.push(name.into());
        self
    }

    pub fn output(mut self, name: impl Into<String>, value: f64) -> Self {
        self.outputs.insert(name.into(), value);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub pipeline: String,
    pub params: IndexMap<String, FitParam>,
    pub residual_norm: f64,
    pub stage_log: Vec<StageRecord>,
    pub convergence: Convergence,
    /// Human-readable explanation, mostly for degenerate outcomes.
    pub diagnosis: Option<String>,
}

/// Name, value, stderr and unit of a parameter block being parsed.
type PendingParam = (String, Option<f64>, Option<f64>, Option<ParamUnit>);

impl FitReport {
    pub fn new(pipeline: impl Into<String>) -> Self {
        FitReport {
            pipeline: pipeline.into(),
            params: IndexMap::new(),
            residual_norm: 0.0,
            stage_log: Vec::new(),
            convergence: Convergence::Converged,
            diagnosis: None,
        }
    }

    pub fn set(&mut self, name: &str, value: f64, stderr: f64, unit: ParamUnit) {
        self.params.insert(
            name.to_string(),
            FitParam {
                value,
                stderr: stderr.abs(),
                unit,
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<&FitParam> {
        self.params.get(name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.params.get(name).map(|p| p.value)
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.params.get(name).map(|p| p.stderr)
    }

    pub fn is_degenerate(&self) -> bool {
        self.convergence == Convergence::Degenerate
    }

    pub fn degenerate(mut self, diagnosis: impl Into<String>) -> Self {
        self.convergence = Convergence::Degenerate;
        self.diagnosis = Some(diagnosis.into());
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[report]");
        let _ = writeln!(s, "pipeline: {}", self.pipeline);
        let _ = writeln!(s, "convergence: {}", self.convergence.as_str());
        let _ = writeln!(s, "residual_norm: {}", self.residual_norm);
        if let Some(d) = &self.diagnosis {
            let _ = writeln!(s, "diagnosis: {}", one_line(d));
        }
        for (name, p) in &self.params {
            let _ = writeln!(s, "\n[param {name}]");
            let _ = writeln!(s, "value: {}", p.value);
            let _ = writeln!(s, "stderr: {}", p.stderr);
            let _ = writeln!(s, "unit: {}", p.unit.as_str());
        }
        for st in &self.stage_log {
            let _ = writeln!(s, "\n[stage {}]", st.name);
            for i in &st.inputs {
                let _ = writeln!(s, "input: {}", one_line(i));
            }
            for (k, v) in &st.outputs {
                let _ = writeln!(s, "output {k}: {v}");
            }
            if let Some(n) = &st.note {
                let _ = writeln!(s, "note: {}", one_line(n));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        enum Block {
            None,
            Report,
            Param,
            Stage,
        }
        let err = |line: usize, message: String| Error::Parse {
            path: "<report>".into(),
            line,
            message,
        };
        let mut report = FitReport::new("");
        let mut block = Block::None;
        let mut pending: Option<PendingParam> = None;
        let flush = |report: &mut FitReport,
                     pending: &mut Option<PendingParam>,
                     line: usize|
         -> Result<()> {
            if let Some((name, v, e, u)) = pending.take() {
                match (v, e, u) {
                    (Some(value), Some(stderr), Some(unit)) => {
                        report.params.insert(
                            name,
                            FitParam {
                                value,
                                stderr,
                                unit,
                            },
                        );
                    }
                    _ => return Err(err(line, format!("param `{name}` is incomplete"))),
                }
            }
            Ok(())
        };
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(head) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                flush(&mut report, &mut pending, lineno)?;
                block = if head == "report" {
                    Block::Report
                } else if let Some(name) = head.strip_prefix("param ") {
                    pending = Some((name.to_string(), None, None, None));
                    Block::Param
                } else if let Some(name) = head.strip_prefix("stage ") {
                    report.stage_log.push(StageRecord::new(name));
                    Block::Stage
                } else {
                    return Err(err(lineno, format!("unknown block `{head}`")));
                };
                continue;
            }
            let (key, value) = line
                .split_once(": ")
                .or_else(|| line.strip_suffix(':').map(|k| (k, "")))
                .ok_or_else(|| err(lineno, format!("expected `key: value`, got `{line}`")))?;
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| err(lineno, format!("`{v}` is not a number")))
            };
            match &block {
                Block::None => return Err(err(lineno, "content before first block".into())),
                Block::Report => match key {
                    "pipeline" => report.pipeline = value.to_string(),
                    "convergence" => {
                        report.convergence = Convergence::parse(value)
                            .ok_or_else(|| err(lineno, format!("unknown convergence `{value}`")))?
                    }
                    "residual_norm" => report.residual_norm = num(value)?,
                    "diagnosis" => report.diagnosis = Some(value.to_string()),
                    _ => return Err(err(lineno, format!("unknown report key `{key}`"))),
                },
                Block::Param => {
                    let p = pending.as_mut().expect("param block has pending entry");
                    match key {
                        "value" => p.1 = Some(num(value)?),
                        "stderr" => p.2 = Some(num(value)?),
                        "unit" => {
                            p.3 =
                                Some(ParamUnit::parse(value).ok_or_else(|| {
                                    err(lineno, format!("unknown unit `{value}`"))
                                })?)
                        }
                        _ => return Err(err(lineno, format!("unknown param key `{key}`"))),
                    }
                }
                Block::Stage => {
                    let st = report.stage_log.last_mut().expect("stage block has record");
                    if key == "input" {
                        st.inputs.push(value.to_string());
                    } else if key == "note" {
                        st.note = Some(value.to_string());
                    } else if let Some(name) = key.strip_prefix("output ") {
                        st.outputs.insert(name.to_string(), num(value)?);
                    } else {
                        return Err(err(lineno, format!("unknown stage key `{key}`")));
                    }
                }
            }
        }
        flush(&mut report, &mut pending, text.lines().count())?;
        Ok(report)
    }
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FitReport {
        let mut r = FitReport::new("eit");
        r.set("kappa_plus", 230e3 + 1.0 / 3.0, 7e3, ParamUnit::Hz);
        r.set("cooperativity", 28.5, 7.3, ParamUnit::Dimensionless);
        r.set("g", 0.1 + 0.2, f64::INFINITY, ParamUnit::Hz);
        r.residual_norm = 1.234_567_890_123e-3;
        r.stage_log.push(
            StageRecord::new("lorentzian")
                .input("trace_00")
                .input("trace_01")
                .output("kappa_e_plus", 85.3e3)
                .note("shared external rate"),
        );
        r.stage_log.push(StageRecord::new("peaks"));
        r
    }

    #[test]
    fn text_round_trip_is_exact() {
        let r = sample();
        let back = FitReport::from_text(&r.to_text()).unwrap();
        assert_eq!(back, r);
        let d = sample().degenerate("single peak at 10 Hz");
        assert_eq!(FitReport::from_text(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn stderr_is_non_negative() {
        let mut r = FitReport::new("x");
        r.set("a", 1.0, -2.0, ParamUnit::Hz);
        assert_eq!(r.stderr("a"), Some(2.0));
    }

    #[test]
    fn malformed_text_reports_line() {
        let e = FitReport::from_text("[report]\npipeline: x\n[param a]\nvalue: abc\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }));
        assert!(FitReport::from_text("[param a]\nvalue: 1\n").is_err());
    }
}
