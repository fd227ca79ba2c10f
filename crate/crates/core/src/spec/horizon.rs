//! Top-down required-time analysis.
//!
//! Node ids are preorder positions (see [`Formula::preorder`]).

use std::collections::BTreeSet;

use super::formula::{Formula, Interval};
use super::SpecError;

/// Evaluation times each node's envelope is needed at when the root is
/// evaluated at `t`. Unbounded windows are cut at `t_hi`; without a domain
/// they fail with `UnboundedHorizon`.
pub fn required_times(
    root: &Formula,
    t: i64,
    t_hi: Option<i64>,
) -> Result<Vec<BTreeSet<i64>>, SpecError> {
    let mut out = Vec::new();
    visit(root, BTreeSet::from([t]), t_hi, &mut out)?;
    Ok(out)
}

fn visit(
    node: &Formula,
    times: BTreeSet<i64>,
    t_hi: Option<i64>,
    out: &mut Vec<BTreeSet<i64>>,
) -> Result<(), SpecError> {
    let id = out.len();
    out.push(BTreeSet::new());
    match node {
        Formula::True | Formula::Predicate(_) => {}
        Formula::And(cs) | Formula::Or(cs) => {
            for c in cs {
                visit(c, times.clone(), t_hi, out)?;
            }
        }
        Formula::Always(iv, c) | Formula::Eventually(iv, c) => {
            let child = minkowski(&times, iv, t_hi)?;
            visit(c, child, t_hi, out)?;
        }
        Formula::Until(iv, l, r) => {
            let left = minkowski(&times, &Interval { a: 0, b: iv.b }, t_hi)?;
            let right = minkowski(&times, iv, t_hi)?;
            visit(l, left, t_hi, out)?;
            visit(r, right, t_hi, out)?;
        }
    }
    out[id] = times;
    Ok(())
}

/// `⋃_{t' ∈ times} t' ⊕ iv`, merging overlapping windows before expansion.
fn minkowski(
    times: &BTreeSet<i64>,
    iv: &Interval,
    t_hi: Option<i64>,
) -> Result<BTreeSet<i64>, SpecError> {
    let mut ranges: Vec<(i64, i64)> = Vec::new();
    for &t in times {
        let Some((lo, hi)) = iv.window(t, t_hi)? else {
            continue;
        };
        match ranges.last_mut() {
            Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
            _ => ranges.push((lo, hi)),
        }
    }
    Ok(ranges.into_iter().flat_map(|(lo, hi)| lo..=hi).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec;

    fn range(lo: i64, hi: i64) -> BTreeSet<i64> {
        (lo..=hi).collect()
    }

    #[test]
    fn nested_always_eventually() {
        let f = parse_spec("G[0,10] F[2,5] (x1 >= 0)", 1).unwrap();
        let r = required_times(&f, 0, None).unwrap();
        assert_eq!(r[0], range(0, 0));
        assert_eq!(r[1], range(0, 10));
        assert_eq!(r[2], range(2, 15));
    }

    #[test]
    fn leaf_alone() {
        let f = parse_spec("x1 >= 0", 1).unwrap();
        assert_eq!(required_times(&f, 7, None).unwrap(), vec![range(7, 7)]);
    }

    #[test]
    fn climb_until_windows() {
        let f = parse_spec("G[1349,1349] ((1600 - x3 > 0) U[0,300] (x3 - 1800 > 0))", 3).unwrap();
        let r = required_times(&f, 0, None).unwrap();
        assert_eq!(r[1], range(1349, 1349));
        assert_eq!(r[2], range(1349, 1649));
        assert_eq!(r[3], range(1349, 1649));
    }

    #[test]
    fn until_left_starts_at_zero_offset() {
        let f = parse_spec("(x1 >= 0 U[3,5] x1 >= 1)", 1).unwrap();
        let r = required_times(&f, 10, None).unwrap();
        assert_eq!(r[1], range(10, 15));
        assert_eq!(r[2], range(13, 15));
    }

    #[test]
    fn unbounded_clipped_or_rejected() {
        let f = parse_spec("G[581,inf] (x1 >= 0)", 1).unwrap();
        assert_eq!(
            required_times(&f, 0, None),
            Err(SpecError::UnboundedHorizon { a: 581 })
        );
        let r = required_times(&f, 0, Some(1847)).unwrap();
        assert_eq!(r[1], range(581, 1847));
        let empty = required_times(&f, 1500, Some(1847)).unwrap();
        assert!(empty[1].is_empty());
    }

    #[test]
    fn disjoint_windows_stay_disjoint() {
        let f = parse_spec("F[0,20] G[0,20] G[0,0] G[10,11] (x1 >= 0)", 1).unwrap();
        let r = required_times(&f, 0, None).unwrap();
        assert_eq!(r[4], range(10, 51));
        let g = parse_spec("(x1 >= 0 && F[0,1] G[20,21] x1 >= 0)", 1).unwrap();
        let r = required_times(&g, 0, None).unwrap();
        assert_eq!(r[4], range(20, 22));
    }
}
