//! Seeded random instance families for property tests and cross-checks.
//!
//! All generated numbers are multiples of a dyadic quantum, so margins of the
//! oracle-friendly family land exactly on a 0.25 grid where possible.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::envelope::Envelope;
use crate::predicate::Norm;
use crate::signal::{PaddingPolicy, Signal};
use crate::spec::{Formula, Halfspace, Interval, Orientation, PredicateFunction, Region};

/// Which predicates a generated formula may contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomFamily {
    /// Linear and box predicates with dyadic coefficients.
    LinearBox,
    /// Linear predicates plus convex signed-distance regions.
    Convex,
}

#[derive(Debug, Clone, Copy)]
pub struct FormulaShape {
    pub n: usize,
    pub family: AtomFamily,
    pub max_depth: usize,
    pub max_atoms: usize,
    /// Upper bound for interval endpoints.
    pub max_bound: u64,
    /// Probability that a `G`/`F` interval is unbounded.
    pub unbounded_prob: f64,
}

/// A signal, a formula and where to monitor it.
#[derive(Debug, Clone)]
pub struct Instance {
    pub signal: Signal,
    pub formula: Formula,
    pub t: i64,
    pub dt_max: u64,
    pub norm: Norm,
}

fn quantized(rng: &mut impl Rng, lo: i64, hi: i64, quantum: f64) -> f64 {
    rng.gen_range(lo..=hi) as f64 * quantum
}

/// Signal of `len` rows with entries `k·quantum`, `|k| <= k_max`.
pub fn random_signal(
    rng: &mut impl Rng,
    n: usize,
    len: usize,
    t_lo: i64,
    quantum: f64,
    k_max: i64,
) -> Signal {
    let rows = (0..len)
        .map(|_| {
            (0..n)
                .map(|_| quantized(rng, -k_max, k_max, quantum))
                .collect()
        })
        .collect();
    Signal::from_rows(t_lo, rows).expect("finite rows")
}

fn nonzero_coeff(rng: &mut impl Rng) -> f64 {
    *[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
        .choose(rng)
        .expect("non-empty")
}

fn random_linear(rng: &mut impl Rng, n: usize) -> PredicateFunction {
    let mut coeffs = vec![0.0; n];
    let k = rng.gen_range(1..=n);
    let mut dims: Vec<usize> = (0..n).collect();
    dims.shuffle(rng);
    for &d in &dims[..k] {
        coeffs[d] = nonzero_coeff(rng);
    }
    PredicateFunction::linear(coeffs, quantized(rng, -6, 6, 0.25)).expect("nonzero")
}

/// Axis-aligned box with dyadic corners over `dims`.
pub fn random_box(rng: &mut impl Rng, dims: usize, quantum: f64, k_max: i64) -> Region {
    let mut lo = Vec::with_capacity(dims);
    let mut hi = Vec::with_capacity(dims);
    for _ in 0..dims {
        let a = rng.gen_range(-k_max..k_max);
        let b = rng.gen_range(a + 1..=k_max);
        lo.push(a as f64 * quantum);
        hi.push(b as f64 * quantum);
    }
    Region::Box { lo, hi }
}

/// Box, ball, halfspace or polytope over `dims` coordinates in roughly
/// `[-scale, scale]`.
pub fn random_convex_region(rng: &mut impl Rng, dims: usize, scale: f64) -> Region {
    let q = scale / 8.0;
    match rng.gen_range(0..4) {
        0 => random_box(rng, dims, q, 8),
        1 => Region::Ball {
            center: (0..dims).map(|_| quantized(rng, -6, 6, q)).collect(),
            radius: quantized(rng, 1, 6, q),
        },
        2 => Region::Halfspace(random_halfspace(rng, dims, q)),
        _ => {
            // Intersection of a box with a cutting halfspace through its center.
            let Region::Box { lo, hi } = random_box(rng, dims, q, 8) else {
                unreachable!()
            };
            let mut hs = Vec::new();
            for k in 0..dims {
                let mut e = vec![0.0; dims];
                e[k] = 1.0;
                hs.push(Halfspace {
                    normal: e.clone(),
                    offset: hi[k],
                });
                e[k] = -1.0;
                hs.push(Halfspace {
                    normal: e,
                    offset: -lo[k],
                });
            }
            let normal: Vec<f64> = (0..dims).map(|_| nonzero_coeff(rng)).collect();
            let offset: f64 = normal
                .iter()
                .zip(lo.iter().zip(&hi))
                .map(|(a, (l, h))| a * 0.5 * (l + h))
                .sum();
            hs.push(Halfspace { normal, offset });
            Region::ConvexPolytope(hs)
        }
    }
}

fn random_halfspace(rng: &mut impl Rng, dims: usize, q: f64) -> Halfspace {
    Halfspace {
        normal: (0..dims).map(|_| nonzero_coeff(rng)).collect(),
        offset: quantized(rng, -6, 6, q),
    }
}

/// Union of two or three boxes and balls.
pub fn random_union_region(rng: &mut impl Rng, dims: usize, scale: f64) -> Region {
    let q = scale / 8.0;
    let k = rng.gen_range(2..=3);
    let members = (0..k)
        .map(|_| {
            if rng.gen_bool(0.5) {
                random_box(rng, dims, q, 8)
            } else {
                Region::Ball {
                    center: (0..dims).map(|_| quantized(rng, -6, 6, q)).collect(),
                    radius: quantized(rng, 1, 4, q),
                }
            }
        })
        .collect();
    Region::UnionOfConvex(members)
}

fn random_dims(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    let mut dims: Vec<usize> = (0..n).collect();
    dims.shuffle(rng);
    dims.truncate(k);
    dims
}

fn random_atom(rng: &mut impl Rng, shape: &FormulaShape) -> Formula {
    let n = shape.n;
    let orientation = if rng.gen_bool(0.5) {
        Orientation::Avoid
    } else {
        Orientation::Reach
    };
    let pred = match shape.family {
        AtomFamily::LinearBox => {
            if rng.gen_bool(0.5) {
                random_linear(rng, n)
            } else {
                let k = rng.gen_range(1..=n);
                let dims = random_dims(rng, n, k);
                PredicateFunction::signed_distance(random_box(rng, k, 0.25, 8), dims, orientation)
                    .expect("valid box")
            }
        }
        AtomFamily::Convex => {
            if rng.gen_bool(0.3) {
                random_linear(rng, n)
            } else {
                let k = rng.gen_range(1..=n);
                let dims = random_dims(rng, n, k);
                PredicateFunction::signed_distance(
                    random_convex_region(rng, k, 2.0),
                    dims,
                    orientation,
                )
                .expect("valid region")
            }
        }
    };
    Formula::Predicate(pred)
}

fn random_interval(rng: &mut impl Rng, shape: &FormulaShape, allow_unbounded: bool) -> Interval {
    let a = rng.gen_range(0..=shape.max_bound);
    if allow_unbounded && rng.gen_bool(shape.unbounded_prob) {
        return Interval::unbounded(a);
    }
    let b = rng.gen_range(a..=shape.max_bound);
    Interval::new(a, b).expect("ordered")
}

/// Random positive-normal-form formula. Every node kind can appear; `True`
/// only shows up as an operand.
pub fn random_formula(rng: &mut impl Rng, shape: &FormulaShape) -> Formula {
    let mut atoms = shape.max_atoms.max(1);
    gen_node(rng, shape, shape.max_depth, &mut atoms, true)
}

fn gen_node(
    rng: &mut impl Rng,
    shape: &FormulaShape,
    depth: usize,
    atoms: &mut usize,
    root: bool,
) -> Formula {
    if depth == 0 || *atoms <= 1 && rng.gen_bool(0.5) {
        if !root && rng.gen_bool(0.08) {
            return Formula::True;
        }
        *atoms = atoms.saturating_sub(1);
        return random_atom(rng, shape);
    }
    let binary_ok = *atoms >= 2;
    let pick = if binary_ok {
        rng.gen_range(0..5)
    } else {
        rng.gen_range(0..2)
    };
    match pick {
        0 => Formula::always(
            random_interval(rng, shape, true),
            gen_node(rng, shape, depth - 1, atoms, false),
        ),
        1 => Formula::eventually(
            random_interval(rng, shape, true),
            gen_node(rng, shape, depth - 1, atoms, false),
        ),
        2 => {
            let iv = random_interval(rng, shape, false);
            let left = gen_node(rng, shape, depth - 1, atoms, false);
            let right = gen_node(rng, shape, depth - 1, atoms, false);
            Formula::until(iv, left, right)
        }
        3 => Formula::and(vec![
            gen_node(rng, shape, depth - 1, atoms, false),
            gen_node(rng, shape, depth - 1, atoms, false),
        ]),
        _ => Formula::or(vec![
            gen_node(rng, shape, depth - 1, atoms, false),
            gen_node(rng, shape, depth - 1, atoms, false),
        ]),
    }
}

/// Instance small enough for the brute-force oracle: `n <= 2`, at most ten
/// rows, `dt_max <= 2`, dyadic values, max norm and clamp padding.
pub fn oracle_instance(rng: &mut impl Rng) -> Instance {
    let n = rng.gen_range(1..=2);
    let len = rng.gen_range(4..=10);
    let t_lo = rng.gen_range(-2..=2);
    let signal = random_signal(rng, n, len, t_lo, 0.25, 8).with_padding(PaddingPolicy::Clamp);
    let shape = FormulaShape {
        n,
        family: AtomFamily::LinearBox,
        max_depth: 3,
        max_atoms: if n == 1 { 3 } else { 2 },
        max_bound: 3,
        unbounded_prob: 0.15,
    };
    let formula = random_formula(rng, &shape);
    let t = rng.gen_range(signal.t_lo()..=signal.t_hi());
    Instance {
        signal,
        formula,
        t,
        dt_max: rng.gen_range(0..=2),
        norm: Norm::Linf,
    }
}

/// Euclidean instance over linear and convex signed-distance predicates.
pub fn convex_instance(rng: &mut impl Rng) -> Instance {
    let n = rng.gen_range(1..=3);
    let len = rng.gen_range(4..=24);
    let signal = random_signal(rng, n, len, 0, 0.125, 24).with_padding(PaddingPolicy::Clamp);
    let shape = FormulaShape {
        n,
        family: AtomFamily::Convex,
        max_depth: 3,
        max_atoms: 4,
        max_bound: 6,
        unbounded_prob: 0.15,
    };
    let formula = random_formula(rng, &shape);
    let t = rng.gen_range(signal.t_lo()..=signal.t_hi());
    Instance {
        signal,
        formula,
        t,
        dt_max: rng.gen_range(0..=3),
        norm: Norm::L2,
    }
}

/// Non-increasing envelope of length `0..=max_len` with entries on a
/// `quantum` grid, possibly starting with `∞` entries.
pub fn random_grid_envelope(
    rng: &mut impl Rng,
    max_len: usize,
    quantum: f64,
    k_max: i64,
) -> Envelope {
    let len = rng.gen_range(0..=max_len);
    let mut k = k_max;
    let mut out = Vec::with_capacity(len);
    let mut infinite = rng.gen_bool(0.15);
    for _ in 0..len {
        if infinite && rng.gen_bool(0.6) {
            out.push(f64::INFINITY);
            continue;
        }
        infinite = false;
        k = rng.gen_range(0..=k);
        out.push(k as f64 * quantum);
    }
    Envelope::new(out).expect("non-increasing")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn family_covers_every_node_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..100 {
            let inst = oracle_instance(&mut rng);
            for node in inst.formula.preorder() {
                seen.insert(node.kind_name());
            }
        }
        assert_eq!(seen.len(), 7, "{seen:?}");
    }

    #[test]
    fn envelopes_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let e = random_grid_envelope(&mut rng, 7, 0.25, 12);
            assert!(e.is_monotone());
        }
    }
}
