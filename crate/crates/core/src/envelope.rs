//! Robustness envelopes: dense step-function Pareto fronts over `(Δx, Δt)`.
//!
//! An [`Envelope`] stores one admissible `Δx` per `Δt = 0..=k`. Entries are
//! non-negative and non-increasing; `+∞` is allowed. The empty envelope means
//! the point `(0, 0)` is not admissible, i.e. the specification is violated.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("entry at dt={dt} is {value}; entries must be non-negative and not NaN")]
    InvalidEntry { dt: usize, value: f64 },
    #[error("entry at dt={dt} increases ({prev} -> {value})")]
    NotMonotone { dt: usize, prev: f64, value: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One Pareto point `(Δx, Δt)` under the product order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationLevel {
    pub dx: f64,
    pub dt: u64,
}

impl PerturbationLevel {
    pub fn new(dx: f64, dt: u64) -> Self {
        PerturbationLevel { dx, dt }
    }

    /// `self ≽ other`.
    pub fn dominates(&self, other: &PerturbationLevel) -> bool {
        self.dx >= other.dx && self.dt >= other.dt
    }

    /// `self ≻ other`: dominates and differs.
    pub fn strictly_dominates(&self, other: &PerturbationLevel) -> bool {
        self.dominates(other) && self != other
    }
}

impl fmt::Display for PerturbationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(dx={}, dt={})", self.dx, self.dt)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Envelope {
    dx: Vec<f64>,
}

impl Envelope {
    pub fn new(dx: Vec<f64>) -> Result<Self, EnvelopeError> {
        for (dt, &v) in dx.iter().enumerate() {
            if v.is_nan() || v < 0.0 {
                return Err(EnvelopeError::InvalidEntry { dt, value: v });
            }
            if dt > 0 && v > dx[dt - 1] {
                return Err(EnvelopeError::NotMonotone {
                    dt,
                    prev: dx[dt - 1],
                    value: v,
                });
            }
        }
        Ok(Envelope { dx })
    }

    /// Caller guarantees the envelope invariants.
    pub(crate) fn from_vec_unchecked(dx: Vec<f64>) -> Self {
        debug_assert!(Envelope::new(dx.clone()).is_ok(), "invalid envelope {dx:?}");
        Envelope { dx }
    }

    /// Reads a dense table row, cutting at the first absent (`-∞`) entry.
    pub(crate) fn from_row(row: &[f64]) -> Self {
        let k = row
            .iter()
            .position(|v| *v == f64::NEG_INFINITY)
            .unwrap_or(row.len());
        Self::from_vec_unchecked(row[..k].to_vec())
    }

    pub fn empty() -> Self {
        Envelope { dx: Vec::new() }
    }

    /// The envelope of `⊤`: `+∞` at every level up to `dt_max`.
    pub fn top(dt_max: u64) -> Self {
        Envelope {
            dx: vec![f64::INFINITY; dt_max as usize + 1],
        }
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn len(&self) -> usize {
        self.dx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dx.is_empty()
    }

    /// Alias of [`is_empty`](Self::is_empty) for reporting.
    pub fn is_violated(&self) -> bool {
        self.dx.is_empty()
    }

    pub fn get(&self, dt: usize) -> Option<f64> {
        self.dx.get(dt).copied()
    }

    pub fn is_monotone(&self) -> bool {
        self.dx.windows(2).all(|w| w[0] >= w[1]) && self.dx.iter().all(|v| *v >= 0.0)
    }

    /// Whether `p` lies in the downward closure of the step set.
    pub fn admits(&self, p: &PerturbationLevel) -> bool {
        usize::try_from(p.dt)
            .ok()
            .and_then(|dt| self.dx.get(dt))
            .is_some_and(|&dx| p.dx <= dx)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "dt,dx")?;
        for (dt, v) in self.dx.iter().enumerate() {
            writeln!(w, "{dt},{}", format_value(*v))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), EnvelopeError> {
        let path = path.as_ref();
        let io_err = |source| EnvelopeError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(io_err)?;
        std::fs::write(path, buf).map_err(io_err)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, EnvelopeError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let bad = |line: usize, msg: String| EnvelopeError::Parse { line, msg };
        let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "dt" || &headers[1] != "dx" {
            return Err(bad(1, "header must be `dt,dx`".into()));
        }
        let mut dx = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                bad(line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != 2 {
                return Err(bad(line, format!("expected 2 fields, found {}", rec.len())));
            }
            let dt: usize = rec[0]
                .parse()
                .map_err(|_| bad(line, format!("bad dt `{}`", &rec[0])))?;
            if dt != dx.len() {
                return Err(bad(line, format!("expected dt={}, found {dt}", dx.len())));
            }
            let v =
                parse_value(&rec[1]).ok_or_else(|| bad(line, format!("bad dx `{}`", &rec[1])))?;
            dx.push(v);
        }
        Envelope::new(dx)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, EnvelopeError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| EnvelopeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.dx.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(&format_value(*v))?;
        }
        f.write_str("]")
    }
}

/// Shortest round-trip decimal, `inf` for `+∞`.
pub fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

pub fn parse_value(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" | "∞" => Some(f64::INFINITY),
        _ => s.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

/// Lower envelope: pointwise minimum on the common prefix.
pub fn env_min(e1: &Envelope, e2: &Envelope) -> Envelope {
    Envelope {
        dx: e1.dx.iter().zip(&e2.dx).map(|(a, b)| a.min(*b)).collect(),
    }
}

/// Upper envelope: pointwise maximum of the defined entries.
pub fn env_max(e1: &Envelope, e2: &Envelope) -> Envelope {
    let (long, short) = if e1.len() >= e2.len() {
        (e1, e2)
    } else {
        (e2, e1)
    };
    let mut dx = long.dx.clone();
    for (v, s) in dx.iter_mut().zip(&short.dx) {
        *v = v.max(*s);
    }
    Envelope { dx }
}

/// Strict Pareto points of the step set, ordered by increasing `Δt`.
pub fn pareto_strict(e: &Envelope) -> Vec<PerturbationLevel> {
    let k = e.dx.len();
    (0..k)
        .filter(|&dt| dt + 1 == k || e.dx[dt] != e.dx[dt + 1])
        .map(|dt| PerturbationLevel::new(e.dx[dt], dt as u64))
        .collect()
}

/// Points of `domain` with no strict dominator in `domain`, deduplicated and
/// sorted by `(Δt, Δx)`.
pub fn raster_maximal_points(domain: &[PerturbationLevel]) -> Vec<PerturbationLevel> {
    let mut pts: Vec<PerturbationLevel> = domain.to_vec();
    pts.sort_by(|p, q| p.dt.cmp(&q.dt).then(p.dx.total_cmp(&q.dx)));
    pts.dedup();
    // Sweep from the largest Δt down; a point survives iff its Δx beats every
    // Δx seen at a strictly larger Δt and it is the largest Δx at its own Δt.
    let mut out = Vec::new();
    let mut best_above = f64::NEG_INFINITY;
    let mut i = pts.len();
    while i > 0 {
        let dt = pts[i - 1].dt;
        let mut j = i;
        while j > 0 && pts[j - 1].dt == dt {
            j -= 1;
        }
        let top = pts[i - 1];
        if top.dx > best_above {
            out.push(top);
            best_above = top.dx;
        }
        i = j;
    }
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> Envelope {
        Envelope::new(v.to_vec()).unwrap()
    }

    fn pts(v: &[(f64, u64)]) -> Vec<PerturbationLevel> {
        v.iter()
            .map(|&(dx, dt)| PerturbationLevel::new(dx, dt))
            .collect()
    }

    const INF: f64 = f64::INFINITY;

    #[test]
    fn min_examples() {
        assert_eq!(env_min(&e(&[3., 2.]), &e(&[4., 1., 1.])), e(&[3., 1.]));
        assert_eq!(
            env_min(&Envelope::empty(), &e(&[5., 5.])),
            Envelope::empty()
        );
        assert_eq!(env_min(&e(&[INF, INF]), &e(&[2.])), e(&[2.]));
    }

    #[test]
    fn max_examples() {
        assert_eq!(env_max(&e(&[3., 2.]), &e(&[4., 1., 1.])), e(&[4., 2., 1.]));
        assert_eq!(env_max(&Envelope::empty(), &e(&[5.])), e(&[5.]));
        assert_eq!(env_max(&e(&[1.]), &e(&[0., 0., 0.])), e(&[1., 0., 0.]));
    }

    #[test]
    fn pareto_examples() {
        assert_eq!(pareto_strict(&e(&[2., 2., 1.])), pts(&[(2., 1), (1., 2)]));
        assert_eq!(pareto_strict(&e(&[5.])), pts(&[(5., 0)]));
        assert_eq!(
            pareto_strict(&e(&[3., 2., 1.])),
            pts(&[(3., 0), (2., 1), (1., 2)])
        );
        assert!(pareto_strict(&Envelope::empty()).is_empty());
    }

    #[test]
    fn raster_examples() {
        assert_eq!(
            raster_maximal_points(&pts(&[(1., 0), (0., 1), (0., 0)])),
            pts(&[(1., 0), (0., 1)])
        );
        assert!(raster_maximal_points(&[]).is_empty());
        assert_eq!(
            raster_maximal_points(&pts(&[(2., 2), (1., 1)])),
            pts(&[(2., 2)])
        );
        assert_eq!(
            raster_maximal_points(&pts(&[(1., 1), (1., 1), (1., 0)])),
            pts(&[(1., 1)])
        );
    }

    #[test]
    fn validation() {
        assert!(matches!(
            Envelope::new(vec![1., 2.]),
            Err(EnvelopeError::NotMonotone { dt: 1, .. })
        ));
        assert!(matches!(
            Envelope::new(vec![-1.]),
            Err(EnvelopeError::InvalidEntry { dt: 0, .. })
        ));
        assert!(Envelope::new(vec![f64::NAN]).is_err());
        assert!(Envelope::new(vec![INF, INF, 3., 0.]).is_ok());
    }

    #[test]
    fn admits_is_downward_closure() {
        let env = e(&[3., 1.]);
        assert!(env.admits(&PerturbationLevel::new(3., 0)));
        assert!(env.admits(&PerturbationLevel::new(0.5, 1)));
        assert!(!env.admits(&PerturbationLevel::new(1.5, 1)));
        assert!(!env.admits(&PerturbationLevel::new(0., 2)));
        assert!(!Envelope::empty().admits(&PerturbationLevel::new(0., 0)));
    }

    #[test]
    fn from_row_cuts_at_absent() {
        let r = [INF, 2., f64::NEG_INFINITY, f64::NEG_INFINITY];
        assert_eq!(Envelope::from_row(&r), e(&[INF, 2.]));
        assert_eq!(Envelope::from_row(&[f64::NEG_INFINITY]), Envelope::empty());
    }

    #[test]
    fn csv_round_trip() {
        for env in [e(&[INF, 2.5, 0.1, 0.]), Envelope::empty()] {
            let mut buf = Vec::new();
            env.write_csv(&mut buf).unwrap();
            assert_eq!(Envelope::read_csv(buf.as_slice()).unwrap(), env);
        }
        let mut buf = Vec::new();
        e(&[INF, 0.1]).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "dt,dx\n0,inf\n1,0.1\n");
        assert!(Envelope::read_csv("dt,dx\n0,1\n2,1\n".as_bytes()).is_err());
        assert!(Envelope::read_csv("dt,dx\n0,1\n1,2\n".as_bytes()).is_err());
        assert!(Envelope::read_csv("t,dx\n".as_bytes()).is_err());
    }
}
