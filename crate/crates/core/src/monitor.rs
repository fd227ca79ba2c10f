//! Specification-level propagation of envelopes through the parse tree.
//!
//! Every node gets a dense table with one row per required time and one
//! column per `Δt` level. Absent entries are `-∞`, so `min` with an absent
//! entry is absent and `max` ignores it; an envelope is a row cut at its
//! first absent entry.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::envelope::Envelope;
use crate::predicate::{sweep, MarginFn, MonitorConfig, MonitorError, Stop};
use crate::signal::{PaddingPolicy, Signal, SignalError};
use crate::spec::{required_times, Formula, Interval};

const ABSENT: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

impl Extremum {
    #[inline]
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Extremum::Min => a.min(b),
            Extremum::Max => a.max(b),
        }
    }

    /// Whether `a` makes `b` useless for every later window.
    #[inline]
    fn covers(self, a: f64, b: f64) -> bool {
        match self {
            Extremum::Min => a <= b,
            Extremum::Max => a >= b,
        }
    }
}

/// Extremum of `values[lo..=hi]` for each range. Starts and ends must both be
/// non-decreasing and every range non-empty.
pub(crate) fn sliding_ranges(
    values: &[f64],
    ranges: &[(usize, usize)],
    mode: Extremum,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(ranges.len());
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 0usize;
    for &(lo, hi) in ranges {
        debug_assert!(lo <= hi && hi < values.len());
        while next <= hi {
            let v = values[next];
            while deque.back().is_some_and(|&j| mode.covers(v, values[j])) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        while deque.front().is_some_and(|&j| j < lo) {
            deque.pop_front();
        }
        out.push(values[*deque.front().expect("non-empty window")]);
    }
    out
}

fn naive_ranges(values: &[f64], ranges: &[(usize, usize)], mode: Extremum) -> Vec<f64> {
    ranges
        .iter()
        .map(|&(lo, hi)| {
            values[lo + 1..=hi]
                .iter()
                .fold(values[lo], |acc, &v| mode.pick(acc, v))
        })
        .collect()
}

fn window_ranges(len: usize, a: usize, b: usize) -> Result<Vec<(usize, usize)>, MonitorError> {
    if a > b || b >= len {
        return Err(MonitorError::WindowOutOfRange { a, b, len });
    }
    Ok((0..len - b).map(|i| (i + a, i + b)).collect())
}

/// `out[i] = extremum(values[i+a ..= i+b])` with a monotone deque.
pub fn sliding_extremum(
    values: &[f64],
    a: usize,
    b: usize,
    mode: Extremum,
) -> Result<Vec<f64>, MonitorError> {
    Ok(sliding_ranges(
        values,
        &window_ranges(values.len(), a, b)?,
        mode,
    ))
}

/// Direct per-window scan with the same contract as [`sliding_extremum`].
pub fn sliding_extremum_naive(
    values: &[f64],
    a: usize,
    b: usize,
    mode: Extremum,
) -> Result<Vec<f64>, MonitorError> {
    Ok(naive_ranges(
        values,
        &window_ranges(values.len(), a, b)?,
        mode,
    ))
}

/// `max_{k∈[a;b]} min(min_{j≤k} left[j], right[k])` by one prefix-minimum
/// sweep, with `b = left.len() - 1`. Returns `-∞` when no `k` qualifies.
pub fn until_prefix_min(left: &[f64], right: &[f64], a: usize) -> f64 {
    debug_assert_eq!(left.len(), right.len());
    let mut m = f64::INFINITY;
    let mut best = f64::NEG_INFINITY;
    for k in 0..left.len() {
        m = m.min(left[k]);
        if k >= a {
            best = best.max(m.min(right[k]));
        }
    }
    best
}

/// Double loop with the same contract as [`until_prefix_min`].
pub fn until_naive(left: &[f64], right: &[f64], a: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for k in a..left.len() {
        let mut m = right[k];
        for &l in &left[..=k] {
            m = m.min(l);
        }
        best = best.max(m);
    }
    best
}

/// Per-node envelopes indexed by evaluation time.
#[derive(Debug, Clone)]
struct Table {
    times: Vec<i64>,
    first: i64,
    /// Row of time `first + i`, or `u32::MAX` when not required.
    index: Vec<u32>,
    width: usize,
    vals: Vec<f64>,
}

impl Table {
    fn new(times: &BTreeSet<i64>, width: usize) -> Self {
        let times: Vec<i64> = times.iter().copied().collect();
        let first = times.first().copied().unwrap_or(0);
        let span = times.last().map_or(0, |l| (l - first + 1) as usize);
        let mut index = vec![u32::MAX; span];
        for (i, t) in times.iter().enumerate() {
            index[(t - first) as usize] = i as u32;
        }
        Table {
            vals: vec![ABSENT; times.len() * width],
            times,
            first,
            index,
            width,
        }
    }

    fn pos(&self, t: i64) -> usize {
        let i = self.index[(t - self.first) as usize];
        debug_assert_ne!(i, u32::MAX, "time {t} not in table");
        i as usize
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vals[i * self.width..(i + 1) * self.width]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.vals[i * self.width..(i + 1) * self.width]
    }

    fn column(&self, level: usize) -> Vec<f64> {
        (0..self.times.len())
            .map(|i| self.vals[i * self.width + level])
            .collect()
    }
}

/// A leaf predicate sweep that stopped at a violating shift.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub node: usize,
    pub time: i64,
    pub stop: Stop,
}

/// Full result of evaluating a formula at one time.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub root: Envelope,
    pub t: i64,
    pub dt_max: u64,
    /// `dt_max` after limiting shells to the recorded domain under strict padding.
    pub dt_max_effective: u64,
    tables: Vec<Table>,
    children: Vec<Vec<usize>>,
    /// Child times each node read, when instrumentation is on.
    pub reads: Option<Vec<BTreeSet<i64>>>,
    pub truncations: Vec<Truncation>,
    /// Time spent in each node kind, excluding children.
    pub timing: BTreeMap<&'static str, Duration>,
}

impl Evaluation {
    pub fn node_count(&self) -> usize {
        self.tables.len()
    }

    /// Preorder ids of a node's children.
    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Times at which `node` was evaluated.
    pub fn times(&self, node: usize) -> &[i64] {
        &self.tables[node].times
    }

    pub fn envelope(&self, node: usize, t: i64) -> Option<Envelope> {
        let table = &self.tables[node];
        let off = t.checked_sub(table.first)?;
        let i = *table.index.get(usize::try_from(off).ok()?)?;
        (i != u32::MAX).then(|| Envelope::from_row(table.row(i as usize)))
    }

    /// All `(time, envelope)` pairs stored for `node`.
    pub fn table(&self, node: usize) -> Vec<(i64, Envelope)> {
        let table = &self.tables[node];
        (0..table.times.len())
            .map(|i| (table.times[i], Envelope::from_row(table.row(i))))
            .collect()
    }
}

fn child_ids(root: &Formula) -> Vec<Vec<usize>> {
    fn walk(f: &Formula, out: &mut Vec<Vec<usize>>) -> usize {
        let id = out.len();
        out.push(Vec::new());
        let ids: Vec<usize> = f.children().into_iter().map(|c| walk(c, out)).collect();
        out[id] = ids;
        id
    }
    let mut out = Vec::new();
    walk(root, &mut out);
    out
}

/// Largest level whose shells stay inside the domain at every leaf time.
fn effective_dt_max(
    nodes: &[&Formula],
    required: &[BTreeSet<i64>],
    sig: &Signal,
    dt_max: u64,
) -> Result<u64, MonitorError> {
    if sig.padding() == PaddingPolicy::Clamp {
        return Ok(dt_max);
    }
    let mut eff = dt_max;
    for (node, times) in nodes.iter().zip(required) {
        if !matches!(node, Formula::Predicate(_)) {
            continue;
        }
        let (Some(&lo), Some(&hi)) = (times.first(), times.last()) else {
            continue;
        };
        for t in [lo, hi] {
            if !sig.contains(t) {
                return Err(SignalError::OutOfDomain {
                    time: t,
                    t_lo: sig.t_lo(),
                    t_hi: sig.t_hi(),
                }
                .into());
            }
        }
        eff = eff
            .min((lo - sig.t_lo()) as u64)
            .min((sig.t_hi() - hi) as u64);
    }
    Ok(eff)
}

/// Evaluates `root` at `t` and keeps every node's table.
pub fn evaluate(
    root: &Formula,
    sig: &Signal,
    t: i64,
    cfg: &MonitorConfig,
) -> Result<Evaluation, MonitorError> {
    cfg.validate(root)?;
    if root.min_dim() > sig.dim() {
        return Err(MonitorError::Dimension {
            needed: root.min_dim(),
            available: sig.dim(),
        });
    }
    let nodes = root.preorder();
    let children = child_ids(root);
    let required = required_times(root, t, Some(sig.t_hi()))?;
    let eff = effective_dt_max(&nodes, &required, sig, cfg.dt_max)?;
    let width = eff as usize + 1;

    let mut engine = Engine {
        nodes: &nodes,
        children: &children,
        required: &required,
        sig,
        cfg,
        eff,
        width,
        tables: (0..nodes.len()).map(|_| None).collect(),
        reads: cfg.instrument.then(|| vec![BTreeSet::new(); nodes.len()]),
        truncations: Vec::new(),
        timing: BTreeMap::new(),
        memo: HashMap::new(),
        canon: canonical_leaves(&nodes),
    };
    engine.eval(0)?;
    if let Some(reads) = engine.reads.as_mut() {
        reads[0].insert(t);
    }
    let Engine {
        tables,
        reads,
        truncations,
        timing,
        ..
    } = engine;
    let tables: Vec<Table> = tables.into_iter().map(|t| t.expect("evaluated")).collect();
    let root_env = Envelope::from_row(tables[0].row(0));
    Ok(Evaluation {
        root: root_env,
        t,
        dt_max: cfg.dt_max,
        dt_max_effective: eff,
        tables,
        children,
        reads,
        truncations,
        timing,
    })
}

/// The envelope of `root` at `t`.
pub fn monitor(
    root: &Formula,
    sig: &Signal,
    t: i64,
    cfg: &MonitorConfig,
) -> Result<Envelope, MonitorError> {
    Ok(evaluate(root, sig, t, cfg)?.root)
}

/// Maps each predicate node to the first node holding an equal predicate.
fn canonical_leaves(nodes: &[&Formula]) -> Vec<usize> {
    (0..nodes.len())
        .map(|i| match nodes[i] {
            Formula::Predicate(p) => (0..i)
                .find(|&j| matches!(nodes[j], Formula::Predicate(q) if q == p))
                .unwrap_or(i),
            _ => i,
        })
        .collect()
}

struct Engine<'a> {
    nodes: &'a [&'a Formula],
    children: &'a [Vec<usize>],
    required: &'a [BTreeSet<i64>],
    sig: &'a Signal,
    cfg: &'a MonitorConfig,
    eff: u64,
    width: usize,
    tables: Vec<Option<Table>>,
    reads: Option<Vec<BTreeSet<i64>>>,
    truncations: Vec<Truncation>,
    timing: BTreeMap<&'static str, Duration>,
    memo: HashMap<(usize, i64), Vec<f64>>,
    canon: Vec<usize>,
}

impl Engine<'_> {
    fn eval(&mut self, id: usize) -> Result<(), MonitorError> {
        for &c in &self.children[id] {
            self.eval(c)?;
        }
        let start = Instant::now();
        let mut table = Table::new(&self.required[id], self.width);
        match self.nodes[id] {
            Formula::True => table.vals.fill(f64::INFINITY),
            Formula::Predicate(_) => self.leaf(id, &mut table)?,
            Formula::And(_) => self.pointwise(id, &mut table, Extremum::Min),
            Formula::Or(_) => self.pointwise(id, &mut table, Extremum::Max),
            Formula::Always(iv, _) => self.window(id, iv, &mut table, Extremum::Min)?,
            Formula::Eventually(iv, _) => self.window(id, iv, &mut table, Extremum::Max)?,
            Formula::Until(iv, _, _) => self.until(id, iv, &mut table)?,
        }
        *self.timing.entry(self.nodes[id].kind_name()).or_default() += start.elapsed();
        self.tables[id] = Some(table);
        Ok(())
    }

    fn record(&mut self, child: usize, times: impl IntoIterator<Item = i64>) {
        if let Some(reads) = self.reads.as_mut() {
            reads[child].extend(times);
        }
    }

    fn leaf(&mut self, id: usize, table: &mut Table) -> Result<(), MonitorError> {
        let Formula::Predicate(p) = self.nodes[id] else {
            unreachable!()
        };
        let key = if self.cfg.memoize { self.canon[id] } else { id };
        let todo: Vec<i64> = table
            .times
            .iter()
            .copied()
            .filter(|t| !self.memo.contains_key(&(key, *t)))
            .collect();
        let margin = MarginFn::new(p, self.cfg.norm)?;
        let (sig, eff) = (self.sig, self.eff);
        let outcomes = todo
            .par_iter()
            .map(|&t| sweep(&margin, p.support(), sig, t, eff, self.cfg.decompose))
            .collect::<Result<Vec<_>, _>>()?;
        for (&t, out) in todo.iter().zip(outcomes) {
            let mut row = out.envelope.dx().to_vec();
            row.resize(self.width, ABSENT);
            if let Some(stop) = out.stop {
                log::debug!("predicate node {id} at t={t}: {stop:?}");
                self.truncations.push(Truncation {
                    node: id,
                    time: t,
                    stop,
                });
            }
            self.memo.insert((key, t), row);
        }
        for i in 0..table.times.len() {
            let t = table.times[i];
            let row = if self.cfg.memoize {
                self.memo[&(key, t)].clone()
            } else {
                self.memo.remove(&(key, t)).expect("computed above")
            };
            table.row_mut(i).copy_from_slice(&row);
        }
        Ok(())
    }

    fn child(&self, id: usize) -> &Table {
        self.tables[id]
            .as_ref()
            .expect("children are evaluated first")
    }

    fn pointwise(&mut self, id: usize, table: &mut Table, mode: Extremum) {
        let init = match mode {
            Extremum::Min => f64::INFINITY,
            Extremum::Max => ABSENT,
        };
        table.vals.fill(init);
        for &c in &self.children[id] {
            let child = self.child(c);
            for i in 0..table.times.len() {
                let src = child.row(child.pos(table.times[i]));
                for (v, s) in table.row_mut(i).iter_mut().zip(src) {
                    *v = mode.pick(*v, *s);
                }
            }
        }
        let times = table.times.clone();
        for &c in &self.children[id] {
            self.record(c, times.iter().copied());
        }
    }

    fn window(
        &mut self,
        id: usize,
        iv: &Interval,
        table: &mut Table,
        mode: Extremum,
    ) -> Result<(), MonitorError> {
        let c = self.children[id][0];
        let child = self.child(c);
        // Empty windows only arise from clipping unbounded intervals.
        let empty_value = match mode {
            Extremum::Min => f64::INFINITY,
            Extremum::Max => ABSENT,
        };
        let mut rows = Vec::new();
        let mut ranges = Vec::new();
        for i in 0..table.times.len() {
            match iv.window(table.times[i], Some(self.sig.t_hi()))? {
                Some((lo, hi)) => {
                    rows.push(i);
                    ranges.push((child.pos(lo), child.pos(hi)));
                }
                None => table.row_mut(i).fill(empty_value),
            }
        }
        for level in 0..self.width {
            let col = child.column(level);
            let ext = if self.cfg.naive {
                naive_ranges(&col, &ranges, mode)
            } else {
                sliding_ranges(&col, &ranges, mode)
            };
            for (&i, v) in rows.iter().zip(ext) {
                table.vals[i * self.width + level] = v;
            }
        }
        if self.reads.is_some() {
            let times: Vec<i64> = ranges
                .iter()
                .flat_map(|&(lo, hi)| child.times[lo..=hi].to_vec())
                .collect();
            self.record(c, times);
        }
        Ok(())
    }

    fn until(&mut self, id: usize, iv: &Interval, table: &mut Table) -> Result<(), MonitorError> {
        let (lc, rc) = (self.children[id][0], self.children[id][1]);
        let (a, b) = (
            iv.a as usize,
            iv.b.expect("until intervals are bounded") as usize,
        );
        let (left, right) = (self.child(lc), self.child(rc));
        let mut lbuf = vec![0.0; b + 1];
        let mut rbuf = vec![0.0; b + 1];
        let mut lreads = Vec::new();
        let mut rreads = Vec::new();
        for i in 0..table.times.len() {
            let t = table.times[i];
            let lrows: Vec<usize> = (0..=b as i64).map(|k| left.pos(t + k)).collect();
            // Right entries before offset `a` are never read.
            let rrows: Vec<Option<usize>> = (0..=b)
                .map(|k| (k >= a).then(|| right.pos(t + k as i64)))
                .collect();
            for level in 0..self.width {
                for k in 0..=b {
                    lbuf[k] = left.row(lrows[k])[level];
                    rbuf[k] = rrows[k].map_or(ABSENT, |r| right.row(r)[level]);
                }
                let best = if self.cfg.naive {
                    until_naive(&lbuf, &rbuf, a)
                } else {
                    until_prefix_min(&lbuf, &rbuf, a)
                };
                table.row_mut(i)[level] = if best < 0.0 { ABSENT } else { best };
            }
            if self.reads.is_some() {
                lreads.extend((0..=b as i64).map(|k| t + k));
                rreads.extend((a as i64..=b as i64).map(|k| t + k));
            }
        }
        self.record(lc, lreads);
        self.record(rc, rreads);
        Ok(())
    }
}

/// Which conjunct limits the root at one `Δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub dt: u64,
    pub label: String,
    /// `None` when the root has no entry at this level.
    pub dx: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Explanation {
    pub evaluation: Evaluation,
    /// Labeled top-level conjuncts in formula order.
    pub subformulas: Vec<(String, Envelope)>,
    pub binding: Vec<Binding>,
}

impl Explanation {
    pub fn root(&self) -> &Envelope {
        &self.evaluation.root
    }
}

/// Evaluates `root` and reports the envelope of every top-level conjunct
/// together with the binding conjunct per `Δt`. Labels default to `c1..ck`.
pub fn explain(
    root: &Formula,
    sig: &Signal,
    t: i64,
    cfg: &MonitorConfig,
    labels: Option<&[String]>,
) -> Result<Explanation, MonitorError> {
    let evaluation = evaluate(root, sig, t, cfg)?;
    let ids: Vec<usize> = match root {
        Formula::And(_) => evaluation.children(0).to_vec(),
        _ => vec![0],
    };
    let labels: Vec<String> = match labels {
        Some(ls) if ls.len() != ids.len() => {
            return Err(MonitorError::Config(format!(
                "{} labels given for {} conjuncts",
                ls.len(),
                ids.len()
            )))
        }
        Some(ls) => ls.to_vec(),
        None => (1..=ids.len()).map(|i| format!("c{i}")).collect(),
    };
    let subformulas: Vec<(String, Envelope)> = labels
        .iter()
        .zip(&ids)
        .map(|(l, &id)| (l.clone(), evaluation.envelope(id, t).expect("root time")))
        .collect();
    let binding = (0..=evaluation.dt_max_effective as usize)
        .map(|dt| {
            let root_dx = evaluation.root.get(dt);
            let pick = match root_dx {
                Some(_) => subformulas
                    .iter()
                    .enumerate()
                    .filter_map(|(i, (_, e))| e.get(dt).map(|v| (i, v)))
                    .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
                        Some((_, best)) if best <= v => acc,
                        _ => Some((i, v)),
                    })
                    .map(|(i, _)| i),
                None => subformulas.iter().position(|(_, e)| e.get(dt).is_none()),
            };
            Binding {
                dt: dt as u64,
                label: labels[pick.unwrap_or(0)].clone(),
                dx: root_dx,
            }
        })
        .collect();
    Ok(Explanation {
        evaluation,
        subformulas,
        binding,
    })
}
