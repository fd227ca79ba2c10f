//! Discrete-time signals on a finite integer domain.
//!
//! A [`Signal`] stores one row of `n` real values per integer time index in
//! `[t_lo; t_hi]`. Accesses outside the recorded domain are governed by a
//! [`PaddingPolicy`]: `Strict` rejects them, `Clamp` holds the boundary row.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("time {time} is outside the signal domain [{t_lo}; {t_hi}]")]
    OutOfDomain { time: i64, t_lo: i64, t_hi: i64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid signal: {0}")]
    Invalid(String),
    #[error("shift has {got} components, signal has {expected} dimensions")]
    ShiftDimension { expected: usize, got: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// What happens when a time index outside `[t_lo; t_hi]` is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaddingPolicy {
    #[default]
    Strict,
    Clamp,
}

impl FromStr for PaddingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(PaddingPolicy::Strict),
            "clamp" => Ok(PaddingPolicy::Clamp),
            other => Err(format!(
                "unknown padding policy `{other}` (expected strict|clamp)"
            )),
        }
    }
}

impl fmt::Display for PaddingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PaddingPolicy::Strict => f.write_str("strict"),
            PaddingPolicy::Clamp => f.write_str("clamp"),
        }
    }
}

/// Per-dimension time shift `δt`; component `i` is sampled at `t - deltas[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TemporalShift {
    pub deltas: Vec<i64>,
}

impl TemporalShift {
    pub fn new(deltas: Vec<i64>) -> Self {
        TemporalShift { deltas }
    }

    pub fn zero(n: usize) -> Self {
        TemporalShift { deltas: vec![0; n] }
    }
}

/// An immutable n-dimensional trace on `[t_lo; t_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
    t_lo: i64,
    t_hi: i64,
    n: usize,
    padding: PaddingPolicy,
}

impl Signal {
    /// Builds a signal from rows starting at `t_lo`.
    pub fn from_rows(t_lo: i64, rows: Vec<Vec<f64>>) -> Result<Self, SignalError> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() {
            return Err(SignalError::Invalid("signal has no rows".into()));
        }
        if n == 0 {
            return Err(SignalError::Invalid("signal has zero dimensions".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SignalError::Invalid(format!(
                    "row {i} has {} values, expected {n}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(SignalError::Invalid(format!(
                    "row {i} contains non-finite value {v}"
                )));
            }
            values.extend_from_slice(row);
        }
        let t_hi = t_lo + rows.len() as i64 - 1;
        Ok(Signal {
            values,
            t_lo,
            t_hi,
            n,
            padding: PaddingPolicy::Strict,
        })
    }

    /// One-dimensional convenience constructor.
    pub fn from_scalars(t_lo: i64, xs: &[f64]) -> Result<Self, SignalError> {
        Self::from_rows(t_lo, xs.iter().map(|&x| vec![x]).collect())
    }

    pub fn with_padding(mut self, padding: PaddingPolicy) -> Self {
        self.padding = padding;
        self
    }

    pub fn t_lo(&self) -> i64 {
        self.t_lo
    }

    pub fn t_hi(&self) -> i64 {
        self.t_hi
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        (self.t_hi - self.t_lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn padding(&self) -> PaddingPolicy {
        self.padding
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.t_lo && t <= self.t_hi
    }

    /// Maps a requested time to a stored row index under the padding policy.
    #[inline]
    pub fn resolve(&self, t: i64) -> Result<usize, SignalError> {
        if self.contains(t) {
            return Ok((t - self.t_lo) as usize);
        }
        match self.padding {
            PaddingPolicy::Clamp => Ok((t.clamp(self.t_lo, self.t_hi) - self.t_lo) as usize),
            PaddingPolicy::Strict => Err(SignalError::OutOfDomain {
                time: t,
                t_lo: self.t_lo,
                t_hi: self.t_hi,
            }),
        }
    }

    #[inline]
    pub fn row(&self, idx: usize) -> &[f64] {
        &self.values[idx * self.n..(idx + 1) * self.n]
    }

    /// Component `dim` at time `t`.
    #[inline]
    pub fn component(&self, t: i64, dim: usize) -> Result<f64, SignalError> {
        let idx = self.resolve(t)?;
        Ok(self.values[idx * self.n + dim])
    }

    /// `x(t)`.
    pub fn sample(&self, t: i64) -> Result<Vec<f64>, SignalError> {
        let idx = self.resolve(t)?;
        Ok(self.row(idx).to_vec())
    }

    /// `x_δt(t)`: component `i` taken at `t - δt_i`.
    pub fn sample_shifted(&self, t: i64, shift: &TemporalShift) -> Result<Vec<f64>, SignalError> {
        if shift.deltas.len() != self.n {
            return Err(SignalError::ShiftDimension {
                expected: self.n,
                got: shift.deltas.len(),
            });
        }
        shift
            .deltas
            .iter()
            .enumerate()
            .map(|(i, d)| self.component(t - d, i))
            .collect()
    }

    /// Reads a signal CSV (`t,x1,...,xn`, unit time step).
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, SignalError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| SignalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SignalError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| SignalError::Parse {
                line: 1,
                msg: e.to_string(),
            })?
            .clone();
        check_header(&headers)?;
        let n = headers.len() - 1;

        let mut t_lo = None;
        let mut prev: Option<i64> = None;
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| SignalError::Parse {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.len() != n + 1 {
                return Err(SignalError::Parse {
                    line,
                    msg: format!("expected {} fields, found {}", n + 1, record.len()),
                });
            }
            let t: i64 = record[0].parse().map_err(|_| SignalError::Parse {
                line,
                msg: format!("time `{}` is not an integer", &record[0]),
            })?;
            if let Some(p) = prev {
                if t != p + 1 {
                    return Err(SignalError::Parse {
                        line,
                        msg: format!("times must increase by exactly 1 (got {p} then {t})"),
                    });
                }
            } else {
                t_lo = Some(t);
            }
            prev = Some(t);
            let mut row = Vec::with_capacity(n);
            for field in record.iter().skip(1) {
                let v: f64 = field.parse().map_err(|_| SignalError::Parse {
                    line,
                    msg: format!("value `{field}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(SignalError::Parse {
                        line,
                        msg: format!("value `{field}` is not finite"),
                    });
                }
                row.push(v);
            }
            rows.push(row);
        }
        let t_lo = t_lo.ok_or_else(|| SignalError::Parse {
            line: 2,
            msg: "signal file has no data rows".into(),
        })?;
        Self::from_rows(t_lo, rows)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), SignalError> {
        let path = path.as_ref();
        let io_err = |source| SignalError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }

    /// Writes shortest round-trip decimal representations.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.n).map(|i| format!("x{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, t) in (self.t_lo..=self.t_hi).enumerate() {
            write!(w, "{t}")?;
            for v in self.row(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn check_header(headers: &csv::StringRecord) -> Result<(), SignalError> {
    let bad = |msg: String| SignalError::Parse { line: 1, msg };
    if headers.len() < 2 {
        return Err(bad("header must be `t,x1,...,xn` with n >= 1".into()));
    }
    if &headers[0] != "t" {
        return Err(bad(format!(
            "first column must be `t`, found `{}`",
            &headers[0]
        )));
    }
    for (i, h) in headers.iter().enumerate().skip(1) {
        if h != format!("x{i}") {
            return Err(bad(format!("column {} must be `x{i}`, found `{h}`", i + 1)));
        }
    }
    Ok(())
}
