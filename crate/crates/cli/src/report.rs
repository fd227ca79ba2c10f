use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use strobust::envelope::{format_value, Envelope};
use strobust::monitor::{Binding, Explanation};
use strobust::predicate::Norm;

/// `inf` entries become the string `"inf"`; JSON has no infinity.
pub fn envelope_json(e: &Envelope) -> Vec<Value> {
    e.dx()
        .iter()
        .map(|&v| {
            if v.is_finite() {
                Value::from(v)
            } else {
                Value::from(format_value(v))
            }
        })
        .collect()
}

#[derive(Serialize)]
pub struct Report {
    spec_hash: String,
    t: i64,
    dt_max: u64,
    dt_max_effective: u64,
    norm: String,
    root_envelope: Vec<Value>,
    subformulas: BTreeMap<String, Vec<Value>>,
    violated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<BTreeMap<String, f64>>,
}

impl Report {
    pub fn new(spec_text: &str, ex: &Explanation, norm: Norm, total: Option<Duration>) -> Self {
        let ev = &ex.evaluation;
        let timing_ms = total.map(|total| {
            let mut m: BTreeMap<String, f64> = ev
                .timing
                .iter()
                .map(|(k, d)| (k.to_string(), d.as_secs_f64() * 1e3))
                .collect();
            m.insert("total".into(), total.as_secs_f64() * 1e3);
            m
        });
        Report {
            spec_hash: format!("{:x}", Sha256::digest(spec_text.as_bytes())),
            t: ev.t,
            dt_max: ev.dt_max,
            dt_max_effective: ev.dt_max_effective,
            norm: norm.to_string(),
            root_envelope: envelope_json(&ev.root),
            subformulas: ex
                .subformulas
                .iter()
                .map(|(l, e)| (l.clone(), envelope_json(e)))
                .collect(),
            violated: ev.root.is_violated(),
            timing_ms,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// `dt,binding,dx` with `violated` where the root has no entry.
pub fn write_binding(path: &Path, rows: &[Binding]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "dt,binding,dx")?;
    for b in rows {
        let dx = b.dx.map_or_else(|| "violated".to_string(), format_value);
        writeln!(out, "{},{},{}", b.dt, b.label, dx)?;
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}
