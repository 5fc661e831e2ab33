//! File formats: model, evidence, emission and trajectory JSON, trace CSV.
//!
//! Loading validates every field and reports failures with a JSON pointer
//! to the offending value.

use std::fs;
use std::path::{Path, PathBuf};

use mjp_core::simulate::EmissionModel;
use mjp_core::{
    uniform_distribution, validate_distribution, Evidence, MjpError, Observation, RateMatrix,
    StateSpace, Trajectory,
};
use mjp_core::raoteh::ChainTrace;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: invalid value at {pointer}: {message}")]
    Validation {
        path: PathBuf,
        pointer: String,
        message: String,
    },
}

impl IoError {
    pub fn pointer(&self) -> Option<&str> {
        match self {
            IoError::Validation { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: usize,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
}

/// A validated model: state space, generator and initial law.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub space: StateSpace,
    pub q: RateMatrix,
    pub nu: Vec<f64>,
}

impl Model {
    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            states: self.space.size(),
            q: self.q.rows(),
            labels: self.space.labels().map(<[String]>::to_vec),
            nu: Some(self.nu.clone()),
        }
    }
}

fn rate_pointer(e: &MjpError) -> String {
    match e {
        MjpError::NotSquare { row, .. } | MjpError::BadRowSum { row, .. } => format!("/Q/{row}"),
        MjpError::NegativeOffDiagonal { row, col, .. } | MjpError::NonFiniteRate { row, col } => {
            format!("/Q/{row}/{col}")
        }
        _ => "/Q".into(),
    }
}

pub fn model_from_file(path: &Path, raw: ModelFile) -> Result<Model, IoError> {
    let invalid = |pointer: &str, message: String| IoError::Validation {
        path: path.to_path_buf(),
        pointer: pointer.into(),
        message,
    };
    let space = StateSpace::new(raw.states, raw.labels).map_err(|e| match e {
        MjpError::TooFewStates(_) => invalid("/states", e.to_string()),
        _ => invalid("/labels", e.to_string()),
    })?;
    if raw.q.len() != raw.states {
        return Err(invalid(
            "/Q",
            format!("expected {} rows, found {}", raw.states, raw.q.len()),
        ));
    }
    let q = RateMatrix::new(&raw.q).map_err(|e| invalid(&rate_pointer(&e), e.to_string()))?;
    let nu = match raw.nu {
        Some(nu) => {
            validate_distribution(&nu, raw.states).map_err(|e| invalid("/nu", e.to_string()))?;
            nu
        }
        None => uniform_distribution(raw.states),
    };
    Ok(Model { space, q, nu })
}

pub fn load_model(path: &Path) -> Result<Model, IoError> {
    let raw: ModelFile = parse(path, &read(path)?)?;
    model_from_file(path, raw)
}

pub fn save_model(path: &Path, model: &Model) -> Result<(), IoError> {
    write(path, &to_json(&model.to_file()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub t: f64,
    pub lik: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lik_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub obs: Vec<ObservationRecord>,
}

/// Evidence plus the observation window recorded alongside it, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceData {
    pub evidence: Evidence,
    pub window: Option<(f64, f64)>,
}

pub fn evidence_from_file(path: &Path, raw: EvidenceFile, n_states: usize) -> Result<EvidenceData, IoError> {
    let invalid = |pointer: String, message: String| IoError::Validation {
        path: path.to_path_buf(),
        pointer,
        message,
    };
    let window = match (raw.t_min, raw.t_max) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() && a < b => Some((a, b)),
        (None, None) => None,
        (Some(_), Some(_)) => return Err(invalid("/t_max".into(), "t_max must exceed t_min".into())),
        (None, Some(_)) => return Err(invalid("/t_min".into(), "missing while t_max is set".into())),
        (Some(_), None) => return Err(invalid("/t_max".into(), "missing while t_min is set".into())),
    };
    let mut obs = Vec::with_capacity(raw.obs.len());
    let mut prev = f64::NEG_INFINITY;
    for (j, r) in raw.obs.into_iter().enumerate() {
        if !r.t.is_finite() || r.t < prev {
            return Err(invalid(
                format!("/obs/{j}/t"),
                "observation times must be finite and nondecreasing".into(),
            ));
        }
        if let Some((a, b)) = window {
            if r.t < a || r.t > b {
                return Err(invalid(format!("/obs/{j}/t"), format!("outside the window [{a}, {b}]")));
            }
        }
        prev = r.t;
        if r.lik.len() != n_states {
            return Err(invalid(
                format!("/obs/{j}/lik"),
                format!("expected {n_states} entries, found {}", r.lik.len()),
            ));
        }
        if r.lik.iter().any(|&l| !l.is_finite() || l < 0.0) {
            return Err(invalid(
                format!("/obs/{j}/lik"),
                "entries must be finite and nonnegative".into(),
            ));
        }
        let max = r.lik.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(invalid(
                format!("/obs/{j}/lik"),
                "needs at least one positive entry".into(),
            ));
        }
        let o = match r.lik_max {
            Some(m) if !(m.is_finite() && m >= max) => {
                return Err(invalid(
                    format!("/obs/{j}/lik_max"),
                    format!("must be at least the largest likelihood {max}"),
                ))
            }
            Some(m) => Observation::with_bound(r.t, r.lik, m),
            None => Observation::new(r.t, r.lik),
        };
        obs.push(o);
    }
    let evidence = Evidence::new(obs, n_states).map_err(|e| invalid("/obs".into(), e.to_string()))?;
    Ok(EvidenceData { evidence, window })
}

pub fn load_evidence(path: &Path, n_states: usize) -> Result<EvidenceData, IoError> {
    let raw: EvidenceFile = parse(path, &read(path)?)?;
    evidence_from_file(path, raw, n_states)
}

pub fn evidence_to_file(ev: &Evidence, window: Option<(f64, f64)>) -> EvidenceFile {
    EvidenceFile {
        t_min: window.map(|w| w.0),
        t_max: window.map(|w| w.1),
        obs: ev
            .observations()
            .iter()
            .map(|o| ObservationRecord {
                t: o.t,
                lik: o.lik.clone(),
                lik_max: Some(o.lik_max),
            })
            .collect(),
    }
}

pub fn save_evidence(path: &Path, ev: &Evidence, window: Option<(f64, f64)>) -> Result<(), IoError> {
    write(path, &to_json(&evidence_to_file(ev, window)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub t_min: f64,
    pub t_max: f64,
    pub s0: usize,
    pub jumps: Vec<(f64, usize)>,
}

pub fn trajectory_to_file(x: &Trajectory) -> TrajectoryFile {
    TrajectoryFile {
        t_min: x.t_min(),
        t_max: x.t_max(),
        s0: x.initial_state(),
        jumps: x.jumps().to_vec(),
    }
}

pub fn load_trajectory(path: &Path, n_states: usize) -> Result<Trajectory, IoError> {
    let raw: TrajectoryFile = parse(path, &read(path)?)?;
    let invalid = |pointer: String, e: MjpError| IoError::Validation {
        path: path.to_path_buf(),
        pointer,
        message: e.to_string(),
    };
    let x = Trajectory::new(raw.t_min, raw.t_max, raw.s0, raw.jumps).map_err(|e| {
        let pointer = match e {
            MjpError::InvalidWindow { .. } => "/t_max",
            _ => "/jumps",
        };
        invalid(pointer.into(), e)
    })?;
    x.check_states(n_states).map_err(|e| invalid("/s0".into(), e))?;
    Ok(x)
}

pub fn save_trajectory(path: &Path, x: &Trajectory) -> Result<(), IoError> {
    write(path, &to_json(&trajectory_to_file(x)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionFile {
    pub e: Vec<Vec<f64>>,
}

pub fn load_emission(path: &Path, n_states: usize) -> Result<EmissionModel, IoError> {
    let raw: EmissionFile = parse(path, &read(path)?)?;
    let invalid = |pointer: String, message: String| IoError::Validation {
        path: path.to_path_buf(),
        pointer,
        message,
    };
    if raw.e.len() != n_states {
        return Err(invalid(
            "/e".into(),
            format!("expected {n_states} rows, found {}", raw.e.len()),
        ));
    }
    EmissionModel::new(&raw.e).map_err(|e| {
        let pointer = match e {
            MjpError::BadRowSum { row, .. } => format!("/e/{row}"),
            _ => "/e".into(),
        };
        invalid(pointer, e.to_string())
    })
}

/// Trace CSV: `sweep,n_jumps,log_evidence,probe_0,..`, one row per
/// recorded sweep after burn-in.
pub fn trace_to_csv(trace: &ChainTrace) -> String {
    let mut out = String::from("sweep,n_jumps,log_evidence");
    for k in 0..trace.probe_times.len() {
        out.push_str(&format!(",probe_{k}"));
    }
    out.push('\n');
    for m in trace.burn_in..trace.len() {
        out.push_str(&format!("{},{},{}", m + 1, trace.n_jumps[m], trace.log_evidence[m]));
        for s in &trace.probe_states[m] {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
    }
    out
}

/// Reads a trace CSV back. Probe times are not stored in the file, so
/// they are reported as NaN.
pub fn load_trace_csv(path: &Path, n_states: Option<usize>) -> Result<ChainTrace, IoError> {
    let text = read(path)?;
    let bad = |line: usize, message: String| IoError::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| bad(1, "empty file".into()))?
        .split(',')
        .collect();
    if header.len() < 3 || header[..3] != ["sweep", "n_jumps", "log_evidence"] {
        return Err(bad(1, "expected header sweep,n_jumps,log_evidence,...".into()));
    }
    let n_probes = header.len() - 3;
    let mut trace = ChainTrace {
        n_states: 0,
        burn_in: 0,
        probe_times: vec![f64::NAN; n_probes],
        n_jumps: Vec::new(),
        log_evidence: Vec::new(),
        probe_states: Vec::new(),
        trajectories: None,
    };
    let mut max_state = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(bad(i + 2, format!("expected {} fields", header.len())));
        }
        trace
            .n_jumps
            .push(fields[1].parse().map_err(|e| bad(i + 2, format!("n_jumps: {e}")))?);
        trace
            .log_evidence
            .push(fields[2].parse().map_err(|e| bad(i + 2, format!("log_evidence: {e}")))?);
        let states = fields[3..]
            .iter()
            .map(|f| f.parse::<usize>().map_err(|e| bad(i + 2, format!("probe: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        max_state = states.iter().copied().fold(max_state, usize::max);
        trace.probe_states.push(states);
    }
    trace.n_states = n_states.unwrap_or(max_state + 1).max(max_state + 1);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PathBuf {
        PathBuf::from("test.json")
    }

    #[test]
    fn model_row_sum_pointer() {
        let raw = ModelFile {
            states: 2,
            q: vec![vec![-1.0, 1.1], vec![1.0, -1.0]],
            labels: None,
            nu: None,
        };
        let err = model_from_file(&p(), raw).unwrap_err();
        assert_eq!(err.pointer(), Some("/Q/0"));
    }

    #[test]
    fn model_defaults_nu_to_uniform() {
        let raw = ModelFile {
            states: 2,
            q: vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
            labels: Some(vec!["off".into(), "on".into()]),
            nu: None,
        };
        let m = model_from_file(&p(), raw).unwrap();
        assert_eq!(m.nu, vec![0.5, 0.5]);
        assert_eq!(m.space.label(1), "on");
    }

    #[test]
    fn model_pointer_for_other_fields() {
        let base = ModelFile {
            states: 2,
            q: vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
            labels: None,
            nu: Some(vec![0.5, 0.6]),
        };
        assert_eq!(model_from_file(&p(), base.clone()).unwrap_err().pointer(), Some("/nu"));
        let raw = ModelFile {
            q: vec![vec![-1.0, 1.0], vec![-1.0, 1.0]],
            nu: None,
            ..base.clone()
        };
        assert_eq!(model_from_file(&p(), raw).unwrap_err().pointer(), Some("/Q/1/0"));
        let raw = ModelFile {
            states: 3,
            nu: None,
            ..base.clone()
        };
        assert_eq!(model_from_file(&p(), raw).unwrap_err().pointer(), Some("/Q"));
        let raw = ModelFile {
            labels: Some(vec!["a".into()]),
            nu: None,
            ..base
        };
        assert_eq!(model_from_file(&p(), raw).unwrap_err().pointer(), Some("/labels"));
    }

    #[test]
    fn evidence_pointers() {
        let rec = |t: f64, lik: Vec<f64>| ObservationRecord { t, lik, lik_max: None };
        let raw = EvidenceFile {
            t_min: None,
            t_max: None,
            obs: vec![rec(0.5, vec![0.2, 0.3]), rec(1.0, vec![0.0, 0.0])],
        };
        let err = evidence_from_file(&p(), raw, 2).unwrap_err();
        assert_eq!(err.pointer(), Some("/obs/1/lik"));

        let raw = EvidenceFile {
            t_min: Some(0.0),
            t_max: Some(2.0),
            obs: vec![rec(2.5, vec![0.2, 0.3])],
        };
        assert_eq!(evidence_from_file(&p(), raw, 2).unwrap_err().pointer(), Some("/obs/0/t"));

        let raw = EvidenceFile {
            t_min: None,
            t_max: None,
            obs: vec![ObservationRecord {
                t: 0.5,
                lik: vec![0.2, 0.3],
                lik_max: Some(0.25),
            }],
        };
        assert_eq!(
            evidence_from_file(&p(), raw, 2).unwrap_err().pointer(),
            Some("/obs/0/lik_max")
        );
    }

    #[test]
    fn trace_csv_round_trip() {
        let trace = ChainTrace {
            n_states: 3,
            burn_in: 1,
            probe_times: vec![1.0, 2.0],
            n_jumps: vec![3, 4, 5],
            log_evidence: vec![-1.5, -0.1 - 0.2, -2.25],
            probe_states: vec![vec![0, 1], vec![2, 2], vec![1, 0]],
            trajectories: None,
        };
        let csv = trace_to_csv(&trace);
        assert!(csv.starts_with("sweep,n_jumps,log_evidence,probe_0,probe_1\n2,4,"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write(&path, &csv).unwrap();
        let back = load_trace_csv(&path, Some(3)).unwrap();
        assert_eq!(back.n_jumps, vec![4, 5]);
        assert_eq!(back.log_evidence, vec![-0.1 - 0.2, -2.25]);
        assert_eq!(back.probe_states, vec![vec![2, 2], vec![1, 0]]);
    }
}
