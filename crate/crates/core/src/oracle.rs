//! Ground truth for tests: qualitative semantics, brute-force admissible
//! perturbation sets on a grid, the classical scalar spatial robustness, and
//! a ray-cast certificate for signed-distance predicate envelopes.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use thiserror::Error;

use crate::envelope::{raster_maximal_points, Envelope, PerturbationLevel};
use crate::monitor::until_naive;
use crate::predicate::{for_each_shell_offset, MonitorError};
use crate::signal::{Signal, SignalError, TemporalShift};
use crate::spec::{
    required_times, Formula, Interval, Orientation, PredicateFunction, PredicateKind, Region,
    SpecError,
};

pub const MAX_DIM: usize = 2;
pub const MAX_ROWS: usize = 10;
pub const MAX_DT: u64 = 2;
pub const MIN_STEP: f64 = 0.25;
pub const MAX_GRID_POINTS: usize = 400;
/// Largest number of joint perturbation choices tried for one `(Δx, Δt, δt)`.
pub const MAX_COMBINATIONS: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
}

/// Read access to a (possibly perturbed) trace.
pub trait Trace {
    fn state(&self, t: i64) -> Result<Vec<f64>, SignalError>;
    /// Upper bound used to clip unbounded windows.
    fn t_hi(&self) -> i64;
}

impl Trace for Signal {
    fn state(&self, t: i64) -> Result<Vec<f64>, SignalError> {
        self.sample(t)
    }

    fn t_hi(&self) -> i64 {
        Signal::t_hi(self)
    }
}

/// A spatial perturbation `δx` (zero outside its keys) and a shift `δt`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerturbationSample {
    pub dx_signal: BTreeMap<i64, Vec<f64>>,
    pub dt: TemporalShift,
}

/// `x_{δx,δt}(t) = x_δt(t) + δx(t)`: shift first, then displace.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedSignal<'a> {
    pub base: &'a Signal,
    pub sample: &'a PerturbationSample,
}

impl Trace for PerturbedSignal<'_> {
    fn state(&self, t: i64) -> Result<Vec<f64>, SignalError> {
        let mut z = self.base.sample_shifted(t, &self.sample.dt)?;
        if let Some(d) = self.sample.dx_signal.get(&t) {
            for (v, dv) in z.iter_mut().zip(d) {
                *v += dv;
            }
        }
        Ok(z)
    }

    fn t_hi(&self) -> i64 {
        self.base.t_hi()
    }
}

/// Whether `(trace, t)` satisfies `root`, by direct recursion.
pub fn qualitative(root: &Formula, trace: &impl Trace, t: i64) -> Result<bool, OracleError> {
    let t_hi = trace.t_hi();
    let mut atom = |p: &PredicateFunction, t: i64| -> Result<bool, OracleError> {
        Ok(p.evaluate(&trace.state(t)?) >= 0.0)
    };
    holds(root, t, t_hi, &mut atom)
}

fn window(iv: &Interval, t: i64, t_hi: i64) -> Result<Option<(i64, i64)>, OracleError> {
    Ok(iv.window(t, Some(t_hi))?)
}

fn holds<F>(f: &Formula, t: i64, t_hi: i64, atom: &mut F) -> Result<bool, OracleError>
where
    F: FnMut(&PredicateFunction, i64) -> Result<bool, OracleError>,
{
    Ok(match f {
        Formula::True => true,
        Formula::Predicate(p) => atom(p, t)?,
        Formula::And(cs) => {
            for c in cs {
                if !holds(c, t, t_hi, atom)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(cs) => {
            for c in cs {
                if holds(c, t, t_hi, atom)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Always(iv, c) => {
            if let Some((lo, hi)) = window(iv, t, t_hi)? {
                for s in lo..=hi {
                    if !holds(c, s, t_hi, atom)? {
                        return Ok(false);
                    }
                }
            }
            true
        }
        Formula::Eventually(iv, c) => {
            if let Some((lo, hi)) = window(iv, t, t_hi)? {
                for s in lo..=hi {
                    if holds(c, s, t_hi, atom)? {
                        return Ok(true);
                    }
                }
            }
            false
        }
        Formula::Until(iv, l, r) => {
            let Some((lo, hi)) = window(iv, t, t_hi)? else {
                return Ok(false);
            };
            for s in lo..=hi {
                if !holds(r, s, t_hi, atom)? {
                    continue;
                }
                let mut prefix = true;
                for u in t..=s {
                    if !holds(l, u, t_hi, atom)? {
                        prefix = false;
                        break;
                    }
                }
                if prefix {
                    return Ok(true);
                }
            }
            false
        }
    })
}

/// Classical scalar spatial robustness: signed depth of the state in each
/// predicate's satisfying set, combined by min/max over the formula.
pub fn classical_spatial(root: &Formula, sig: &Signal, t: i64) -> Result<f64, OracleError> {
    let t_hi = sig.t_hi();
    let value = |p: &PredicateFunction, t: i64| -> Result<f64, OracleError> {
        let z = sig.sample(t)?;
        match p.kind() {
            PredicateKind::Linear { coeffs, .. } => {
                let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
                Ok(p.evaluate(&z) / norm)
            }
            PredicateKind::SignedDistance { .. } => Ok(p.evaluate(&z)),
            PredicateKind::Lipschitz { name, .. } => Err(OracleError::Unsupported(format!(
                "Lipschitz predicate `{name}` has no exact distance to its satisfying set"
            ))),
        }
    };
    classical_rec(root, t, t_hi, &value)
}

fn classical_rec<F>(f: &Formula, t: i64, t_hi: i64, value: &F) -> Result<f64, OracleError>
where
    F: Fn(&PredicateFunction, i64) -> Result<f64, OracleError>,
{
    Ok(match f {
        Formula::True => f64::INFINITY,
        Formula::Predicate(p) => value(p, t)?,
        Formula::And(cs) => {
            let mut v = f64::INFINITY;
            for c in cs {
                v = v.min(classical_rec(c, t, t_hi, value)?);
            }
            v
        }
        Formula::Or(cs) => {
            let mut v = f64::NEG_INFINITY;
            for c in cs {
                v = v.max(classical_rec(c, t, t_hi, value)?);
            }
            v
        }
        Formula::Always(iv, c) => {
            let mut v = f64::INFINITY;
            if let Some((lo, hi)) = window(iv, t, t_hi)? {
                for s in lo..=hi {
                    v = v.min(classical_rec(c, s, t_hi, value)?);
                }
            }
            v
        }
        Formula::Eventually(iv, c) => {
            let mut v = f64::NEG_INFINITY;
            if let Some((lo, hi)) = window(iv, t, t_hi)? {
                for s in lo..=hi {
                    v = v.max(classical_rec(c, s, t_hi, value)?);
                }
            }
            v
        }
        Formula::Until(iv, l, r) => {
            let Some((lo, hi)) = window(iv, t, t_hi)? else {
                return Ok(f64::NEG_INFINITY);
            };
            let left = (t..=hi)
                .map(|s| classical_rec(l, s, t_hi, value))
                .collect::<Result<Vec<_>, _>>()?;
            let right = (t..=hi)
                .map(|s| {
                    if s >= lo {
                        classical_rec(r, s, t_hi, value)
                    } else {
                        Ok(f64::NEG_INFINITY)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            until_naive(&left, &right, (lo - t) as usize)
        }
    })
}

/// Grid `0, step, 2·step, ..., cap` of spatial levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DxGrid {
    pub step: f64,
    pub cap: f64,
}

impl DxGrid {
    pub fn new(step: f64, cap: f64) -> Self {
        DxGrid { step, cap }
    }

    fn count(&self) -> usize {
        (self.cap / self.step).floor() as usize + 1
    }

    pub fn level(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    /// Largest grid level not above `dx` (and not above the cap).
    pub fn floor(&self, dx: f64) -> f64 {
        if dx >= self.cap {
            return self.level(self.count() - 1);
        }
        self.level((dx / self.step).floor() as usize)
    }
}

fn check_budget(
    root: &Formula,
    sig: &Signal,
    dt_max: u64,
    grid: &DxGrid,
) -> Result<(), OracleError> {
    let over = |msg: String| Err(OracleError::BudgetExceeded(msg));
    if sig.dim() > MAX_DIM {
        return over(format!(
            "signal has {} dimensions (max {MAX_DIM})",
            sig.dim()
        ));
    }
    if sig.len() > MAX_ROWS {
        return over(format!("signal has {} rows (max {MAX_ROWS})", sig.len()));
    }
    if dt_max > MAX_DT {
        return over(format!("dt_max is {dt_max} (max {MAX_DT})"));
    }
    if grid.step.is_nan() || grid.step < MIN_STEP {
        return over(format!("grid step {} is below {MIN_STEP}", grid.step));
    }
    if grid.cap.is_nan() || grid.cap < 0.0 {
        return over(format!("grid cap {} is negative", grid.cap));
    }
    if grid.count() > MAX_GRID_POINTS {
        return over(format!(
            "grid has {} levels (max {MAX_GRID_POINTS})",
            grid.count()
        ));
    }
    for p in root.predicates() {
        let ok = match p.kind() {
            PredicateKind::Linear { .. } => true,
            PredicateKind::SignedDistance { region, .. } => region.supports_chebyshev(),
            PredicateKind::Lipschitz { .. } => false,
        };
        if !ok {
            return Err(OracleError::Unsupported(format!(
                "`{p}`: only linear, box and halfspace predicates have extreme-point worst cases"
            )));
        }
    }
    Ok(())
}

/// Centers of avoided boxes, per dimension, that a worst-case displacement
/// may aim at.
fn box_targets(root: &Formula, n: usize) -> Vec<Vec<f64>> {
    fn collect(r: &Region, dims: &[usize], out: &mut [Vec<f64>]) {
        match r {
            Region::Box { lo, hi } => {
                for (k, &d) in dims.iter().enumerate() {
                    out[d].push(0.5 * (lo[k] + hi[k]));
                }
            }
            Region::UnionOfConvex(ms) => ms.iter().for_each(|m| collect(m, dims, out)),
            _ => {}
        }
    }
    let mut out = vec![Vec::new(); n];
    for p in root.predicates() {
        if let PredicateKind::SignedDistance {
            region,
            dims,
            orientation: Orientation::Avoid,
        } = p.kind()
        {
            collect(region, dims, &mut out);
        }
    }
    out
}

/// Grid-rasterized maximal admissible `(Δx, Δt)` points.
///
/// A level is admitted when the perturbed signal satisfies `root` at `t` for
/// every `δt ∈ [-Δt;Δt]^n` and every displacement drawn, per queried time,
/// from the box vertices `{±Δx}^n` combined with the clamped centers of
/// avoided boxes. Choices whose predicate valuation is implied by another
/// choice's valuation are skipped, since positive formulas are monotone in
/// their atoms.
pub fn brute_force_str(
    root: &Formula,
    sig: &Signal,
    t: i64,
    dt_max: u64,
    grid: DxGrid,
) -> Result<Vec<PerturbationLevel>, OracleError> {
    check_budget(root, sig, dt_max, &grid)?;
    let n = sig.dim();
    let required = required_times(root, t, Some(sig.t_hi()))?;
    let nodes = root.preorder();
    let mut times = BTreeSet::new();
    for (node, ts) in nodes.iter().zip(&required) {
        if matches!(node, Formula::Predicate(_)) {
            times.extend(ts.iter().copied());
        }
    }
    let times: Vec<i64> = times.into_iter().collect();
    let preds = root.predicates();
    let targets = box_targets(root, n);

    let mut admitted = Vec::new();
    for dt in 0..=dt_max {
        let mut any = false;
        for k in 0..grid.count() {
            let dx = grid.level(k);
            if !admissible(root, sig, t, dt, dx, &times, &preds, &targets)? {
                break;
            }
            admitted.push(PerturbationLevel::new(dx, dt));
            any = true;
        }
        if !any {
            break;
        }
    }
    Ok(raster_maximal_points(&admitted))
}

#[allow(clippy::too_many_arguments)]
fn admissible(
    root: &Formula,
    sig: &Signal,
    t: i64,
    dt: u64,
    dx: f64,
    times: &[i64],
    preds: &[&PredicateFunction],
    targets: &[Vec<f64>],
) -> Result<bool, OracleError> {
    let n = sig.dim();
    let d = dt as i64;
    let mut shifts = vec![Vec::new()];
    for _ in 0..n {
        shifts = shifts
            .into_iter()
            .flat_map(|s: Vec<i64>| {
                (-d..=d).map(move |v| {
                    let mut s = s.clone();
                    s.push(v);
                    s
                })
            })
            .collect();
    }
    for deltas in shifts {
        let shift = TemporalShift::new(deltas);
        // Minimal-valuation displacement choices per queried time.
        let mut choices: Vec<Vec<Vec<f64>>> = Vec::with_capacity(times.len());
        for &s in times {
            let base = sig.sample_shifted(s, &shift)?;
            let axes: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut vs = vec![-dx, dx];
                    for &c in &targets[i] {
                        vs.push((c - base[i]).clamp(-dx, dx));
                    }
                    vs.sort_by(f64::total_cmp);
                    vs.dedup();
                    vs
                })
                .collect();
            let mut cands: Vec<(Vec<bool>, Vec<f64>)> = Vec::new();
            for delta in cartesian(&axes) {
                let z: Vec<f64> = base.iter().zip(&delta).map(|(b, v)| b + v).collect();
                let val: Vec<bool> = preds.iter().map(|p| p.evaluate(&z) >= 0.0).collect();
                cands.push((val, delta));
            }
            choices.push(minimal_valuations(cands));
        }
        let total = choices
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
            .filter(|&c| c <= MAX_COMBINATIONS);
        if total.is_none() {
            return Err(OracleError::BudgetExceeded(format!(
                "more than {MAX_COMBINATIONS} displacement combinations at Δt={dt}, Δx={dx}"
            )));
        }
        let mut pick = vec![0usize; times.len()];
        loop {
            let sample = PerturbationSample {
                dx_signal: times
                    .iter()
                    .zip(&pick)
                    .enumerate()
                    .map(|(i, (&s, &p))| (s, choices[i][p].clone()))
                    .collect(),
                dt: shift.clone(),
            };
            let trace = PerturbedSignal {
                base: sig,
                sample: &sample,
            };
            if !qualitative(root, &trace, t)? {
                return Ok(false);
            }
            let mut i = 0;
            loop {
                if i == pick.len() {
                    break;
                }
                pick[i] += 1;
                if pick[i] < choices[i].len() {
                    break;
                }
                pick[i] = 0;
                i += 1;
            }
            if i == pick.len() {
                break;
            }
        }
    }
    Ok(true)
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                axis.iter().map(move |&v| {
                    let mut p = p.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Keeps one displacement per minimal valuation (fewest satisfied atoms).
fn minimal_valuations(mut cands: Vec<(Vec<bool>, Vec<f64>)>) -> Vec<Vec<f64>> {
    let implied = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(x, y)| *x || !*y);
    cands.sort_by(|a, b| a.0.cmp(&b.0));
    cands.dedup_by(|a, b| a.0 == b.0);
    let vals: Vec<Vec<bool>> = cands.iter().map(|c| c.0.clone()).collect();
    cands
        .into_iter()
        .enumerate()
        .filter(|(i, (v, _))| {
            !vals
                .iter()
                .enumerate()
                .any(|(j, w)| j != *i && w != v && implied(v, w))
        })
        .map(|(_, (_, d))| d)
        .collect()
}

/// First strict Pareto point of `env` not dominated by any oracle point,
/// after flooring its `Δx` to the grid.
pub fn first_undominated(
    env: &Envelope,
    oracle: &[PerturbationLevel],
    grid: &DxGrid,
) -> Option<PerturbationLevel> {
    crate::envelope::pareto_strict(env).into_iter().find(|p| {
        let q = PerturbationLevel::new(grid.floor(p.dx), p.dt);
        !oracle.iter().any(|o| o.dominates(&q))
    })
}

/// Number of ray directions in the first pass of the certificate.
pub const CERT_DIRECTIONS: usize = 720;

/// Distance from `z` to the nearest state where `p` fails, found by casting
/// rays in the plane of a two-dimensional support and refining the best
/// direction by golden-section search. Negative when `p` fails at `z`.
pub fn ray_cast_margin(p: &PredicateFunction, z: &[f64], tol: f64) -> Result<f64, OracleError> {
    let dims = p.support().to_vec();
    if dims.len() != 2 {
        return Err(OracleError::Unsupported(
            "ray-cast certificates need a two-dimensional support".into(),
        ));
    }
    let h0 = p.evaluate(z);
    if h0 < 0.0 {
        return Ok(h0);
    }
    let reach = |theta: f64, limit: f64| first_failure(p, z, &dims, theta, tol, limit);
    let step = std::f64::consts::TAU / CERT_DIRECTIONS as f64;
    let (mut best_theta, mut best) = (0.0, f64::INFINITY);
    for i in 0..CERT_DIRECTIONS {
        let theta = i as f64 * step;
        // Rays longer than the best so far cannot lower the minimum.
        let r = reach(theta, best);
        if r < best {
            best = r;
            best_theta = theta;
        }
    }
    if !best.is_finite() {
        return Ok(best);
    }
    // Golden-section refinement of the angle around the best direction.
    let limit = 2.0 * best + 1.0;
    let reach = |theta: f64| reach(theta, limit);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best_theta - step, best_theta + step);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (reach(c), reach(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = reach(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = reach(d);
        }
    }
    Ok(best.min(fc).min(fd))
}

/// Distance along the ray at angle `theta` to the first point where `p` fails,
/// or `∞` when there is none within `limit`.
fn first_failure(
    p: &PredicateFunction,
    z: &[f64],
    dims: &[usize],
    theta: f64,
    tol: f64,
    limit: f64,
) -> f64 {
    const FAR: f64 = 1e4;
    // Floor on the march step. A ray sliding along the boundary (h ~ 0 and
    // not decreasing) creeps with a doubling step, since a ray inside a
    // supporting hyperplane of a convex region never reaches its interior.
    // Sign changes are still bisected to full precision.
    const MIN_MARCH: f64 = 1e-7;
    // Rays grazing a face converge geometrically with ratio `1 - sin(angle)`;
    // giving up on them only drops directions that cannot beat a steeper one.
    const MAX_MARCH: usize = 50_000;
    let (c, s) = (theta.cos(), theta.sin());
    let mut y = z.to_vec();
    let mut at = |r: f64| {
        y[dims[0]] = z[dims[0]] + r * c;
        y[dims[1]] = z[dims[1]] + r * s;
        p.evaluate(&y)
    };
    // March with steps the 1-Lipschitz bound guarantees stay on the safe side.
    let mut r = 0.0;
    let mut h = at(0.0);
    let mut creep = MIN_MARCH;
    for _ in 0..MAX_MARCH {
        if h < 0.0 {
            return r;
        }
        let step = if h >= MIN_MARCH {
            creep = MIN_MARCH;
            h
        } else {
            let s = creep;
            creep *= 2.0;
            s
        };
        let stepped = r + step;
        if stepped > FAR || r > limit {
            return f64::INFINITY;
        }
        let next = at(stepped);
        if next < 0.0 {
            // Bisect the sign change between r and stepped.
            let (mut lo, mut hi) = (r, stepped);
            while hi - lo > tol * 1e-3 {
                let mid = 0.5 * (lo + hi);
                if at(mid) < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
        // Approaching the boundary, not just rounding noise along a face.
        if h - next > 1e-3 * step {
            creep = MIN_MARCH;
        }
        r = stepped;
        h = next;
    }
    f64::INFINITY
}

/// Predicate envelope built from ray-cast margins over the same shells.
pub fn certified_predicate_envelope(
    p: &PredicateFunction,
    sig: &Signal,
    t: i64,
    dt_max: u64,
    tol: f64,
) -> Result<Envelope, OracleError> {
    let dims = p.support().to_vec();
    let mut dx = Vec::new();
    let mut prev = f64::INFINITY;
    for level in 0..=dt_max {
        let mut best = f64::INFINITY;
        let mut failed: Option<OracleError> = None;
        let mut violated = false;
        let _ = for_each_shell_offset(level, dims.len(), |off| {
            let mut deltas = vec![0i64; sig.dim()];
            for (k, &d) in dims.iter().enumerate() {
                deltas[d] = off[k];
            }
            let result = sig
                .sample_shifted(t, &TemporalShift::new(deltas))
                .map_err(OracleError::from)
                .and_then(|z| ray_cast_margin(p, &z, tol));
            match result {
                Ok(m) if m < 0.0 => {
                    violated = true;
                    ControlFlow::Break(())
                }
                Ok(m) => {
                    best = best.min(m);
                    ControlFlow::Continue(())
                }
                Err(e) => {
                    failed = Some(e);
                    ControlFlow::Break(())
                }
            }
        });
        if let Some(e) = failed {
            return Err(e);
        }
        if violated {
            break;
        }
        prev = prev.min(best);
        dx.push(prev);
    }
    Envelope::new(dx).map_err(|e| OracleError::Unsupported(e.to_string()))
}
