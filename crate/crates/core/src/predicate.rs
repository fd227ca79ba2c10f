//! Predicate-level envelopes: the `Δt` sweep over temporal shells with
//! per-shift robust spatial margins.

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use thiserror::Error;

use crate::envelope::Envelope;
use crate::signal::{PaddingPolicy, Signal, SignalError};
use crate::spec::{Formula, Orientation, PredicateFunction, PredicateKind, Region, SpecError};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("formula reads {needed} signal dimensions, signal has {available}")]
    Dimension { needed: usize, available: usize },
    #[error("window [{a};{b}] does not fit a sequence of length {len}")]
    WindowOutOfRange { a: usize, b: usize, len: usize },
}

/// Vector norm bounding `‖δx̄‖`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    L2,
    Linf,
}

impl FromStr for Norm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Norm::L2),
            "linf" => Ok(Norm::Linf),
            _ => Err(format!("unknown norm `{s}` (expected l2 or linf)")),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub dt_max: u64,
    pub norm: Norm,
    pub bisection_tol: f64,
    pub bisection_hi: f64,
    /// Replace sliding-window and until sweeps by direct scans.
    pub naive: bool,
    /// Share leaf envelopes between structurally equal predicates.
    pub memoize: bool,
    /// Build the worst shift coordinate by coordinate for predicates whose
    /// margin is monotone in one key per coordinate (linear, box, ball,
    /// halfspace, unions of those). Other predicates enumerate shells.
    pub decompose: bool,
    /// Record which child times each operator reads.
    pub instrument: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            dt_max: 50,
            norm: Norm::L2,
            bisection_tol: 1e-9,
            bisection_hi: 1e6,
            naive: false,
            memoize: true,
            decompose: true,
            instrument: false,
        }
    }
}

impl MonitorConfig {
    pub fn with_dt_max(mut self, dt_max: u64) -> Self {
        self.dt_max = dt_max;
        self
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    /// Checks the numeric fields and that every signed-distance predicate
    /// has an exact margin under the configured norm.
    pub fn validate(&self, formula: &Formula) -> Result<(), MonitorError> {
        if !(self.bisection_tol > 0.0 && self.bisection_tol.is_finite()) {
            return Err(MonitorError::Config(
                "bisection_tol must be positive".into(),
            ));
        }
        if !(self.bisection_hi > 0.0 && self.bisection_hi.is_finite()) {
            return Err(MonitorError::Config("bisection_hi must be positive".into()));
        }
        for p in formula.predicates() {
            check_norm(p, self.norm)?;
        }
        Ok(())
    }
}

fn check_norm(p: &PredicateFunction, norm: Norm) -> Result<(), MonitorError> {
    if let (Norm::Linf, PredicateKind::SignedDistance { region, .. }) = (norm, p.kind()) {
        if !region.supports_chebyshev() {
            return Err(MonitorError::Config(format!(
                "`{p}` needs the l2 norm; only boxes and halfspaces have a max-norm distance"
            )));
        }
    }
    Ok(())
}

/// Calls `f` on every offset of `[-Δ;Δ]^s \ [-Δ+1;Δ-1]^s` exactly once.
///
/// Offsets are grouped by the first coordinate `j` with `|o_j| = Δ`:
/// coordinates before `j` stay in the open interior, those after range freely.
pub fn for_each_shell_offset<F>(level: u64, s: usize, mut f: F) -> ControlFlow<()>
where
    F: FnMut(&[i64]) -> ControlFlow<()>,
{
    let d = level as i64;
    let mut off = vec![0i64; s];
    if d == 0 {
        return f(&off);
    }
    let mut lo = vec![0i64; s];
    let mut hi = vec![0i64; s];
    for j in 0..s {
        for sign in [-1i64, 1] {
            for i in 0..s {
                (lo[i], hi[i]) = match i.cmp(&j) {
                    std::cmp::Ordering::Less => (-d + 1, d - 1),
                    std::cmp::Ordering::Equal => (sign * d, sign * d),
                    std::cmp::Ordering::Greater => (-d, d),
                };
                off[i] = lo[i];
            }
            loop {
                f(&off)?;
                // Odometer step; the last coordinate varies fastest.
                let mut i = s;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    if off[i] < hi[i] {
                        off[i] += 1;
                        break;
                    }
                    off[i] = lo[i];
                }
                if off.iter().zip(&lo).all(|(o, l)| o == l) {
                    break;
                }
            }
        }
    }
    ControlFlow::Continue(())
}

/// The temporal shell at `level` over `s` dimensions, in enumeration order.
pub fn shell_offsets(level: u64, s: usize) -> impl Iterator<Item = Vec<i64>> {
    let mut out = Vec::new();
    let _ = for_each_shell_offset(level, s, |o| {
        out.push(o.to_vec());
        ControlFlow::Continue(())
    });
    out.into_iter()
}

/// Largest `Δx` found by bisection such that `lower_bound(Δx) >= 0`, where
/// `lower_bound` is non-increasing. Returns `hi` if the bound never fails and
/// `lower_bound(0)` if it fails already at zero.
pub fn bisect_margin(lower_bound: impl Fn(f64) -> f64, hi: f64, tol: f64) -> f64 {
    let at_zero = lower_bound(0.0);
    if at_zero < 0.0 {
        return at_zero;
    }
    if lower_bound(hi) >= 0.0 {
        return hi;
    }
    let (mut lo, mut up) = (0.0, hi);
    while up - lo > tol {
        let mid = 0.5 * (lo + up);
        if lower_bound(mid) >= 0.0 {
            lo = mid;
        } else {
            up = mid;
        }
    }
    lo
}

/// Predicate prepared for repeated margin queries under a fixed norm.
#[derive(Debug)]
pub(crate) struct MarginFn<'a> {
    pred: &'a PredicateFunction,
    norm: Norm,
    /// Dual norm of the linear coefficients, or the Lipschitz constant.
    scale: f64,
}

impl<'a> MarginFn<'a> {
    pub(crate) fn new(pred: &'a PredicateFunction, norm: Norm) -> Result<Self, MonitorError> {
        check_norm(pred, norm)?;
        let scale = match pred.kind() {
            PredicateKind::Linear { coeffs, .. } => match norm {
                Norm::L2 => coeffs.iter().map(|c| c * c).sum::<f64>().sqrt(),
                Norm::Linf => coeffs.iter().map(|c| c.abs()).sum(),
            },
            PredicateKind::Lipschitz { constant, .. } => *constant,
            PredicateKind::SignedDistance { .. } => 1.0,
        };
        Ok(MarginFn { pred, norm, scale })
    }

    /// `SR` at the (already shifted) state `z`; negative iff `h^μ(z) < 0`.
    #[inline]
    pub(crate) fn margin(&self, z: &[f64]) -> f64 {
        match self.pred.kind() {
            PredicateKind::Linear { .. } => self.pred.evaluate(z) / self.scale,
            PredicateKind::SignedDistance {
                region,
                dims,
                orientation,
            } => {
                let sd = match self.norm {
                    Norm::L2 => region.signed_distance(z, dims),
                    Norm::Linf => region
                        .chebyshev_signed_distance(z, dims)
                        .expect("norm checked at construction"),
                };
                match orientation {
                    Orientation::Avoid => sd,
                    Orientation::Reach => -sd,
                }
            }
            PredicateKind::Lipschitz { .. } => {
                let h = self.pred.evaluate(z);
                if h < 0.0 {
                    h
                } else {
                    h / self.scale
                }
            }
        }
    }
}

/// Robust spatial margin `SR` of `p` at state `z`.
///
/// Linear predicates use the dual norm of the coefficients, signed-distance
/// predicates return the distance itself, and Lipschitz predicates return
/// `h(z)/L`, the exact solution of bisecting the certified bound `h(z) - L·Δx`.
pub fn spatial_margin(
    p: &PredicateFunction,
    z: &[f64],
    cfg: &MonitorConfig,
) -> Result<f64, MonitorError> {
    Ok(MarginFn::new(p, cfg.norm)?.margin(z))
}

/// Why a predicate sweep stopped before `dt_max`.
#[derive(Debug, Clone, PartialEq)]
pub enum Stop {
    /// Some shift at `level` drives the predicate negative.
    Violated {
        level: u64,
        shift: Vec<i64>,
        margin: f64,
    },
    /// Strict padding ran out of samples at `level`.
    OutOfDomain { level: u64, time: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateOutcome {
    pub envelope: Envelope,
    pub stop: Option<Stop>,
}

/// Predicate envelope at `t` by the level sweep.
///
/// Shifts range over the predicate's support dimensions only; the shift
/// vector in a [`Stop::Violated`] is indexed like `p.support()`.
pub fn predicate_envelope(
    p: &PredicateFunction,
    sig: &Signal,
    t: i64,
    cfg: &MonitorConfig,
) -> Result<PredicateOutcome, MonitorError> {
    if p.min_dim() > sig.dim() {
        return Err(MonitorError::Dimension {
            needed: p.min_dim(),
            available: sig.dim(),
        });
    }
    let margin = MarginFn::new(p, cfg.norm)?;
    sweep(&margin, p.support(), sig, t, cfg.dt_max, cfg.decompose)
}

/// Same sweep with shells over all `n` signal dimensions.
pub fn predicate_envelope_full_shell(
    p: &PredicateFunction,
    sig: &Signal,
    t: i64,
    cfg: &MonitorConfig,
) -> Result<PredicateOutcome, MonitorError> {
    let margin = MarginFn::new(p, cfg.norm)?;
    let dims: Vec<usize> = (0..sig.dim()).collect();
    sweep(&margin, &dims, sig, t, cfg.dt_max, cfg.decompose)
}

/// Per-coordinate key a margin is non-decreasing in.
#[derive(Debug, Clone, Copy)]
enum Key {
    /// `c·v`.
    Scaled(f64),
    /// `max(lo - v, v - hi)`: positive outside the slab, minus the depth inside.
    Gap(f64, f64),
    /// `|v - c|`.
    Dist(f64),
}

#[derive(Debug, Clone, Copy)]
struct CoordKey {
    dim: usize,
    key: Key,
    negate: bool,
}

impl CoordKey {
    #[inline]
    fn eval(&self, v: f64) -> f64 {
        let k = match self.key {
            Key::Scaled(c) => c * v,
            Key::Gap(lo, hi) => (lo - v).max(v - hi),
            Key::Dist(c) => (v - c).abs(),
        };
        if self.negate {
            -k
        } else {
            k
        }
    }
}

/// Pieces whose minimum is the margin; each piece is non-decreasing in every
/// one of its coordinate keys, so its minimum over a product of shift windows
/// sits at the per-coordinate key minima.
type Piece = Vec<CoordKey>;

fn region_pieces(region: &Region, dims: &[usize], reach: bool, out: &mut Vec<Piece>) -> bool {
    let piece = match region {
        Region::Box { lo, hi } => dims
            .iter()
            .enumerate()
            .map(|(k, &dim)| CoordKey {
                dim,
                key: Key::Gap(lo[k], hi[k]),
                negate: reach,
            })
            .collect(),
        Region::Ball { center, .. } => dims
            .iter()
            .enumerate()
            .map(|(k, &dim)| CoordKey {
                dim,
                key: Key::Dist(center[k]),
                negate: reach,
            })
            .collect(),
        Region::Halfspace(h) => dims
            .iter()
            .enumerate()
            .map(|(k, &dim)| CoordKey {
                dim,
                key: Key::Scaled(h.normal[k]),
                negate: reach,
            })
            .collect(),
        Region::UnionOfConvex(members) => {
            return !reach && members.iter().all(|m| region_pieces(m, dims, reach, out));
        }
        Region::ConvexPolytope(_) => return false,
    };
    out.push(piece);
    true
}

impl MarginFn<'_> {
    fn pieces(&self) -> Option<Vec<Piece>> {
        match self.pred.kind() {
            PredicateKind::Linear { coeffs, .. } => Some(vec![self
                .pred
                .support()
                .iter()
                .map(|&dim| CoordKey {
                    dim,
                    key: Key::Scaled(coeffs[dim]),
                    negate: false,
                })
                .collect()]),
            PredicateKind::SignedDistance {
                region,
                dims,
                orientation,
            } => {
                let mut out = Vec::new();
                region_pieces(region, dims, *orientation == Orientation::Reach, &mut out)
                    .then_some(out)
            }
            PredicateKind::Lipschitz { .. } => None,
        }
    }
}

pub(crate) fn sweep(
    margin: &MarginFn<'_>,
    dims: &[usize],
    sig: &Signal,
    t: i64,
    dt_max: u64,
    decompose: bool,
) -> Result<PredicateOutcome, MonitorError> {
    let row = sig.resolve(t)?;
    let mut z = sig.row(row).to_vec();
    let reach = match sig.padding() {
        PaddingPolicy::Strict => (t - sig.t_lo()).min(sig.t_hi() - t) as u64,
        PaddingPolicy::Clamp => u64::MAX,
    };
    // cols[k][span + o] is dimension dims[k] at time t - o.
    let span = dt_max.min(reach) as i64;
    let cols: Vec<Vec<f64>> = dims
        .iter()
        .map(|&d| {
            (-span..=span)
                .map(|o| sig.component(t - o, d))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    type Argmin = (usize, i64, f64);
    // Running argmin `(column, offset, key)` of every coordinate key. Falls
    // back to shell enumeration when a key reads an unshifted dimension.
    let pieces = if decompose { margin.pieces() } else { None };
    let mut decomposed: Option<Vec<(Piece, Vec<Argmin>)>> = pieces.and_then(|ps| {
        ps.into_iter()
            .map(|p| {
                let row = p
                    .iter()
                    .map(|ck| {
                        let k = dims.iter().position(|&d| d == ck.dim)?;
                        Some((k, 0, ck.eval(cols[k][span as usize])))
                    })
                    .collect::<Option<Vec<_>>>()?;
                Some((p, row))
            })
            .collect()
    });

    let mut dx: Vec<f64> = Vec::with_capacity(dt_max as usize + 1);
    let mut prev = f64::INFINITY;
    for level in 0..=dt_max {
        if level > reach {
            let time = if t - sig.t_lo() < sig.t_hi() - t {
                t - level as i64
            } else {
                t + level as i64
            };
            return Ok(PredicateOutcome {
                envelope: Envelope::from_vec_unchecked(dx),
                stop: Some(Stop::OutOfDomain { level, time }),
            });
        }
        let mut best = f64::INFINITY;
        let mut bad: Option<(Vec<i64>, f64)> = None;
        if let Some(ps) = decomposed.as_mut() {
            let l = level as i64;
            for (p, row) in ps.iter_mut() {
                for (ck, (k, off, val)) in p.iter().zip(row.iter_mut()) {
                    for o in [-l, l] {
                        let v = ck.eval(cols[*k][(span + o) as usize]);
                        if v < *val {
                            (*off, *val) = (o, v);
                        }
                    }
                }
                for &(k, off, _) in row.iter() {
                    z[dims[k]] = cols[k][(span + off) as usize];
                }
                let sr = margin.margin(&z);
                let shift = || {
                    let mut s = vec![0i64; dims.len()];
                    row.iter().for_each(|&(k, off, _)| s[k] = off);
                    s
                };
                for &(k, _, _) in row.iter() {
                    z[dims[k]] = cols[k][span as usize];
                }
                if sr < 0.0 {
                    if bad.as_ref().is_none_or(|(_, m)| sr < *m) {
                        bad = Some((shift(), sr));
                    }
                } else {
                    best = best.min(sr);
                }
            }
        } else {
            let _ = for_each_shell_offset(level, dims.len(), |off| {
                for (k, &d) in dims.iter().enumerate() {
                    z[d] = cols[k][(span + off[k]) as usize];
                }
                let sr = margin.margin(&z);
                if sr < 0.0 {
                    bad = Some((off.to_vec(), sr));
                    return ControlFlow::Break(());
                }
                best = best.min(sr);
                ControlFlow::Continue(())
            });
        }
        if let Some((shift, m)) = bad {
            return Ok(PredicateOutcome {
                envelope: Envelope::from_vec_unchecked(dx),
                stop: Some(Stop::Violated {
                    level,
                    shift,
                    margin: m,
                }),
            });
        }
        prev = prev.min(best);
        dx.push(prev);
    }
    Ok(PredicateOutcome {
        envelope: Envelope::from_vec_unchecked(dx),
        stop: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec;
    use std::collections::BTreeSet;
    use std::sync::Arc;

    fn pred(text: &str, n: usize) -> PredicateFunction {
        match parse_spec(text, n).unwrap() {
            Formula::Predicate(p) => p,
            other => panic!("not a predicate: {other}"),
        }
    }

    fn ramp() -> Signal {
        Signal::from_scalars(-5, &(-5..=5).map(|v| v as f64).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn shell_counts() {
        assert_eq!(shell_offsets(0, 2).collect::<Vec<_>>(), vec![vec![0, 0]]);
        assert_eq!(shell_offsets(1, 2).count(), 8);
        assert_eq!(shell_offsets(2, 3).count(), 98);
        for s in 1..=3usize {
            for l in 1..=4u64 {
                let expect = (2 * l + 1).pow(s as u32) - (2 * l - 1).pow(s as u32);
                let got: BTreeSet<Vec<i64>> = shell_offsets(l, s).collect();
                assert_eq!(got.len() as u64, expect);
                assert!(got
                    .iter()
                    .all(|o| o.iter().map(|v| v.abs()).max() == Some(l as i64)));
            }
        }
    }

    #[test]
    fn linear_margins_use_dual_norm() {
        let cfg = MonitorConfig::default();
        assert_eq!(
            spatial_margin(&pred("x1 >= 0", 1), &[2.0], &cfg).unwrap(),
            2.0
        );
        let p = pred("3*x1 + 4*x2 >= 0", 2);
        assert_eq!(spatial_margin(&p, &[1.0, 1.0], &cfg).unwrap(), 7.0 / 5.0);
        let linf = cfg.clone().with_norm(Norm::Linf);
        assert_eq!(spatial_margin(&p, &[1.0, 1.0], &linf).unwrap(), 1.0);
        assert!(spatial_margin(&p, &[-1.0, 0.0], &cfg).unwrap() < 0.0);
    }

    #[test]
    fn signed_distance_margin() {
        let cfg = MonitorConfig::default();
        let p = pred("sd_out(box([0,1],[0,1])) >= 0", 2);
        assert_eq!(spatial_margin(&p, &[3.0, 1.0], &cfg).unwrap(), 2.0);
        assert_eq!(spatial_margin(&p, &[0.5, 0.5], &cfg).unwrap(), -0.5);
        let linf = cfg.clone().with_norm(Norm::Linf);
        assert_eq!(spatial_margin(&p, &[3.0, 2.5], &linf).unwrap(), 2.0);
        let ball = pred("sd_out(ball([0,0]; 1)) >= 0", 2);
        assert!(matches!(
            spatial_margin(&ball, &[3.0, 0.0], &linf),
            Err(MonitorError::Config(_))
        ));
    }

    #[test]
    fn lipschitz_margin_is_certified() {
        let eval: crate::spec::Evaluator = Arc::new(|z: &[f64]| 1.0 - z[0] * z[0]);
        let p = PredicateFunction::lipschitz("bump", vec![0], 4.0, eval.clone()).unwrap();
        let cfg = MonitorConfig::default();
        let m = spatial_margin(&p, &[0.0], &cfg).unwrap();
        assert_eq!(m, 0.25);
        // Dense grid: the predicate holds on the whole 0.25-ball...
        let worst = (0..=1000)
            .map(|i| -0.25 + 0.5 * i as f64 / 1000.0)
            .map(|d| eval(&[d]))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(worst, 0.9375);
        // ...and the grid-certified largest radius is 1, never below the report.
        let certified = (0..=2000)
            .map(|i| i as f64 / 1000.0)
            .take_while(|&r| eval(&[r]) >= 0.0 && eval(&[-r]) >= 0.0)
            .last()
            .unwrap();
        assert_eq!(certified, 1.0);
        assert!(m <= certified);
        let b = bisect_margin(
            |dx| eval(&[0.0]) - 4.0 * dx,
            cfg.bisection_hi,
            cfg.bisection_tol,
        );
        assert!((b - m).abs() <= cfg.bisection_tol);
    }

    #[test]
    fn ramp_envelope_stops_at_violation() {
        let cfg = MonitorConfig::default().with_dt_max(5);
        let out = predicate_envelope(&pred("x1 >= 0", 1), &ramp(), 2, &cfg).unwrap();
        assert_eq!(out.envelope.dx(), &[2.0, 1.0, 0.0]);
        assert_eq!(
            out.stop,
            Some(Stop::Violated {
                level: 3,
                shift: vec![3],
                margin: -1.0
            })
        );
    }

    #[test]
    fn constant_signal_is_shift_invariant() {
        let sig = Signal::from_scalars(-3, &[5.0; 7]).unwrap();
        let cfg = MonitorConfig::default().with_dt_max(3);
        let out = predicate_envelope(&pred("x1 >= 0", 1), &sig, 0, &cfg).unwrap();
        assert_eq!(out.envelope.dx(), &[5.0; 4]);
        assert_eq!(out.stop, None);
    }

    #[test]
    fn violated_at_zero_is_empty() {
        let cfg = MonitorConfig::default().with_dt_max(3);
        let out = predicate_envelope(&pred("x1 >= 0", 1), &ramp(), -1, &cfg).unwrap();
        assert!(out.envelope.is_empty());
    }

    #[test]
    fn strict_padding_truncates_with_notice() {
        let sig = Signal::from_scalars(0, &[5.0; 4]).unwrap();
        let cfg = MonitorConfig::default().with_dt_max(3);
        let out = predicate_envelope(&pred("x1 >= 0", 1), &sig, 1, &cfg).unwrap();
        assert_eq!(out.envelope.dx(), &[5.0, 5.0]);
        assert_eq!(out.stop, Some(Stop::OutOfDomain { level: 2, time: -1 }));
        let clamp = sig.with_padding(PaddingPolicy::Clamp);
        let out = predicate_envelope(&pred("x1 >= 0", 1), &clamp, 1, &cfg).unwrap();
        assert_eq!(out.envelope.dx(), &[5.0; 4]);
        assert!(predicate_envelope(
            &pred("x1 >= 0", 1),
            &Signal::from_scalars(0, &[1.0]).unwrap(),
            4,
            &cfg
        )
        .is_err());
    }

    #[test]
    fn support_restriction_matches_full_shell() {
        let rows: Vec<Vec<f64>> = (0..15)
            .map(|t| {
                let t = t as f64;
                vec![(t * 0.7).sin() * 3.0, 10.0 - t * 0.5, (t * 1.3).cos()]
            })
            .collect();
        let sig = Signal::from_rows(0, rows).unwrap();
        let cfg = MonitorConfig::default().with_dt_max(3);
        for text in [
            "x2 >= 0",
            "x1 + 4 >= 0",
            "sd_out(box([-0.5,0.5]) @ x3) >= 0",
        ] {
            let p = pred(text, 3);
            for t in 0..15 {
                let a = predicate_envelope(&p, &sig, t, &cfg).unwrap();
                let b = predicate_envelope_full_shell(&p, &sig, t, &cfg).unwrap();
                assert_eq!(a.envelope, b.envelope, "{text} at t={t}");
            }
        }
    }

    #[test]
    fn decomposed_sweep_matches_enumeration() {
        let rows: Vec<Vec<f64>> = (0..21)
            .map(|t| {
                let t = t as f64;
                vec![(t * 0.7).sin() * 3.0, 2.0 - t * 0.25, (t * 1.3).cos() * 2.0]
            })
            .collect();
        let sig = Signal::from_rows(0, rows).unwrap();
        let specs = [
            "x2 >= 0",
            "0.5*x1 - 2*x3 + 3 >= 0",
            "sd_out(box([-0.5,0.5],[0,1])) >= 0",
            "sd_in(box([-4,4],[-3,3],[-3,3])) >= 0",
            "sd_out(ball([0,1,0]; 1.5)) >= 0",
            "sd_in(ball([0,0]; 4) @ x1, x3) >= 0",
            "sd_out(halfspace([1,-1]; 2)) >= 0",
            "sd_in(halfspace([1,0,2]; 1)) >= 0",
            "sd_out(union(box([0,1],[0,1]), ball([-2,2]; 1))) >= 0",
        ];
        for norm in [Norm::L2, Norm::Linf] {
            for text in specs {
                let p = pred(text, 3);
                let fast = MonitorConfig::default().with_dt_max(6).with_norm(norm);
                if fast.validate(&Formula::Predicate(p.clone())).is_err() {
                    continue;
                }
                let slow = MonitorConfig {
                    decompose: false,
                    ..fast.clone()
                };
                for t in 0..21 {
                    let a = predicate_envelope(&p, &sig, t, &fast);
                    let b = predicate_envelope(&p, &sig, t, &slow);
                    match (a, b) {
                        (Ok(a), Ok(b)) => {
                            assert_eq!(a.envelope, b.envelope, "{text} {norm} t={t}");
                            let level = |s: &Option<Stop>| match s {
                                Some(Stop::Violated { level, .. }) => Some(*level),
                                Some(Stop::OutOfDomain { level, .. }) => Some(*level + 1000),
                                None => None,
                            };
                            assert_eq!(level(&a.stop), level(&b.stop));
                        }
                        (a, b) => assert_eq!(a.is_err(), b.is_err()),
                    }
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let f = parse_spec(
            "sd_out(ball([0,0]; 1)) >= 0 && sd_out(box([0,1],[0,1])) >= 0",
            2,
        )
        .unwrap();
        assert!(MonitorConfig::default().validate(&f).is_ok());
        assert!(MonitorConfig::default()
            .with_norm(Norm::Linf)
            .validate(&f)
            .is_err());
        let bad = MonitorConfig {
            bisection_tol: 0.0,
            ..MonitorConfig::default()
        };
        assert!(bad.validate(&f).is_err());
    }
}
