use std::fmt;
use std::sync::Arc;

use super::geometry::Region;
use super::SpecError;

/// Time interval `[a; b]` with `b` possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    pub a: u64,
    /// `None` encodes `+∞`.
    pub b: Option<u64>,
}

impl Interval {
    pub fn new(a: u64, b: u64) -> Result<Self, SpecError> {
        if a > b {
            return Err(SpecError::InvalidInterval { a, b });
        }
        Ok(Interval { a, b: Some(b) })
    }

    pub fn unbounded(a: u64) -> Self {
        Interval { a, b: None }
    }

    pub fn singleton(c: u64) -> Self {
        Interval { a: c, b: Some(c) }
    }

    pub fn is_bounded(&self) -> bool {
        self.b.is_some()
    }

    /// Absolute window `t ⊕ [a; b]`; unbounded intervals are cut at `t_hi`.
    /// `Ok(None)` means the clipped window is empty.
    pub fn window(&self, t: i64, t_hi: Option<i64>) -> Result<Option<(i64, i64)>, SpecError> {
        let lo = t + self.a as i64;
        let hi = match (self.b, t_hi) {
            (Some(b), _) => t + b as i64,
            (None, Some(t_hi)) => t_hi,
            (None, None) => return Err(SpecError::UnboundedHorizon { a: self.a }),
        };
        Ok((lo <= hi).then_some((lo, hi)))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.b {
            Some(b) => write!(f, "[{},{}]", self.a, b),
            None => write!(f, "[{},inf]", self.a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Satisfied outside the region: `h = sd(z, S)`.
    Avoid,
    /// Satisfied inside the region: `h = -sd(z, S)`.
    Reach,
}

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PredicateKind {
    /// `h(z) = coeffs · z + offset`, with `coeffs` of full state length.
    Linear { coeffs: Vec<f64>, offset: f64 },
    SignedDistance {
        region: Region,
        dims: Vec<usize>,
        orientation: Orientation,
    },
    /// Opaque predicate function with a caller-asserted Lipschitz constant.
    Lipschitz {
        name: String,
        eval: Evaluator,
        constant: f64,
    },
}

impl fmt::Debug for PredicateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateKind::Linear { coeffs, offset } => f
                .debug_struct("Linear")
                .field("coeffs", coeffs)
                .field("offset", offset)
                .finish(),
            PredicateKind::SignedDistance {
                region,
                dims,
                orientation,
            } => f
                .debug_struct("SignedDistance")
                .field("region", region)
                .field("dims", dims)
                .field("orientation", orientation)
                .finish(),
            PredicateKind::Lipschitz { name, constant, .. } => f
                .debug_struct("Lipschitz")
                .field("name", name)
                .field("constant", constant)
                .finish_non_exhaustive(),
        }
    }
}

impl PartialEq for PredicateKind {
    fn eq(&self, other: &Self) -> bool {
        use PredicateKind::*;
        match (self, other) {
            (
                Linear {
                    coeffs: a,
                    offset: b,
                },
                Linear {
                    coeffs: c,
                    offset: d,
                },
            ) => a == c && b == d,
            (
                SignedDistance {
                    region: r1,
                    dims: d1,
                    orientation: o1,
                },
                SignedDistance {
                    region: r2,
                    dims: d2,
                    orientation: o2,
                },
            ) => r1 == r2 && d1 == d2 && o1 == o2,
            (
                Lipschitz {
                    name: n1,
                    eval: e1,
                    constant: c1,
                },
                Lipschitz {
                    name: n2,
                    eval: e2,
                    constant: c2,
                },
            ) => n1 == n2 && c1 == c2 && Arc::ptr_eq(e1, e2),
            _ => false,
        }
    }
}

/// A predicate function `h^μ`; the predicate holds iff `h^μ(z) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateFunction {
    kind: PredicateKind,
    support: Vec<usize>,
}

impl PredicateFunction {
    pub fn linear(coeffs: Vec<f64>, offset: f64) -> Result<Self, SpecError> {
        if coeffs.iter().any(|c| !c.is_finite()) || !offset.is_finite() {
            return Err(SpecError::InvalidPredicate(
                "coefficients must be finite".into(),
            ));
        }
        let support: Vec<usize> = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, _)| i)
            .collect();
        if support.is_empty() {
            return Err(SpecError::InvalidPredicate(
                "linear predicate needs at least one nonzero coefficient".into(),
            ));
        }
        Ok(PredicateFunction {
            kind: PredicateKind::Linear { coeffs, offset },
            support,
        })
    }

    pub fn signed_distance(
        region: Region,
        dims: Vec<usize>,
        orientation: Orientation,
    ) -> Result<Self, SpecError> {
        region.validate().map_err(SpecError::InvalidPredicate)?;
        if dims.len() != region.dim() {
            return Err(SpecError::InvalidPredicate(format!(
                "region has {} dimensions but {} state dimensions were selected",
                region.dim(),
                dims.len()
            )));
        }
        let mut support = dims.clone();
        support.sort_unstable();
        support.dedup();
        if support.len() != dims.len() {
            return Err(SpecError::InvalidPredicate(
                "region dimensions repeat".into(),
            ));
        }
        if orientation == Orientation::Reach && !region.is_convex() {
            return Err(SpecError::InvalidPredicate(
                "unions of convex regions are only supported with sd_out (avoid)".into(),
            ));
        }
        Ok(PredicateFunction {
            kind: PredicateKind::SignedDistance {
                region,
                dims,
                orientation,
            },
            support,
        })
    }

    /// `support` lists the state dimensions `eval` actually reads.
    pub fn lipschitz(
        name: impl Into<String>,
        support: Vec<usize>,
        constant: f64,
        eval: Evaluator,
    ) -> Result<Self, SpecError> {
        if !(constant.is_finite() && constant > 0.0) {
            return Err(SpecError::InvalidPredicate(
                "Lipschitz constant must be positive".into(),
            ));
        }
        let mut support = support;
        support.sort_unstable();
        support.dedup();
        if support.is_empty() {
            return Err(SpecError::InvalidPredicate(
                "support must be non-empty".into(),
            ));
        }
        Ok(PredicateFunction {
            kind: PredicateKind::Lipschitz {
                name: name.into(),
                eval,
                constant,
            },
            support,
        })
    }

    pub fn kind(&self) -> &PredicateKind {
        &self.kind
    }

    /// Sorted state dimensions the function reads.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Smallest state dimension count this predicate can be evaluated on.
    pub fn min_dim(&self) -> usize {
        match &self.kind {
            PredicateKind::Linear { coeffs, .. } => coeffs.len(),
            _ => self.support.last().map_or(0, |d| d + 1),
        }
    }

    /// `h^μ(z)`.
    #[inline]
    pub fn evaluate(&self, z: &[f64]) -> f64 {
        match &self.kind {
            PredicateKind::Linear { coeffs, offset } => {
                let mut acc = *offset;
                for &i in &self.support {
                    acc += coeffs[i] * z[i];
                }
                acc
            }
            PredicateKind::SignedDistance {
                region,
                dims,
                orientation,
            } => {
                let sd = region.signed_distance(z, dims);
                match orientation {
                    Orientation::Avoid => sd,
                    Orientation::Reach => -sd,
                }
            }
            PredicateKind::Lipschitz { eval, .. } => eval(z),
        }
    }
}

/// STL formula in positive normal form.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Predicate(PredicateFunction),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Always(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn pred(p: PredicateFunction) -> Self {
        Formula::Predicate(p)
    }

    pub fn and(children: Vec<Formula>) -> Self {
        assert!(
            children.len() >= 2,
            "conjunction needs at least two operands"
        );
        Formula::And(children)
    }

    pub fn or(children: Vec<Formula>) -> Self {
        assert!(
            children.len() >= 2,
            "disjunction needs at least two operands"
        );
        Formula::Or(children)
    }

    pub fn always(iv: Interval, child: Formula) -> Self {
        Formula::Always(iv, Box::new(child))
    }

    pub fn eventually(iv: Interval, child: Formula) -> Self {
        Formula::Eventually(iv, Box::new(child))
    }

    pub fn until(iv: Interval, left: Formula, right: Formula) -> Self {
        assert!(iv.is_bounded(), "until requires a bounded interval");
        Formula::Until(iv, Box::new(left), Box::new(right))
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::True | Formula::Predicate(_) => vec![],
            Formula::And(cs) | Formula::Or(cs) => cs.iter().collect(),
            Formula::Always(_, c) | Formula::Eventually(_, c) => vec![c],
            Formula::Until(_, l, r) => vec![l, r],
        }
    }

    /// Nodes in preorder; a node's position is its id everywhere in the crate.
    pub fn preorder(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            out.push(f);
            for c in f.children().into_iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Formula::True => "true",
            Formula::Predicate(_) => "predicate",
            Formula::And(_) => "and",
            Formula::Or(_) => "or",
            Formula::Always(..) => "always",
            Formula::Eventually(..) => "eventually",
            Formula::Until(..) => "until",
        }
    }

    pub fn predicates(&self) -> Vec<&PredicateFunction> {
        self.preorder()
            .into_iter()
            .filter_map(|f| match f {
                Formula::Predicate(p) => Some(p),
                _ => None,
            })
            .collect()
    }

    /// Smallest signal dimension the formula can be evaluated on.
    pub fn min_dim(&self) -> usize {
        self.predicates()
            .iter()
            .map(|p| p.min_dim())
            .max()
            .unwrap_or(0)
    }

    /// Top-level conjuncts (the formula itself when it is not a conjunction).
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(cs) => cs.iter().collect(),
            other => vec![other],
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Predicate(p) => write!(f, "{p}"),
            Formula::And(cs) => join(f, cs, " && ", |c| {
                matches!(c, Formula::And(_) | Formula::Or(_))
            }),
            Formula::Or(cs) => join(f, cs, " || ", |c| matches!(c, Formula::Or(_))),
            Formula::Always(iv, c) => {
                write!(f, "G{iv} ")?;
                unary_operand(f, c)
            }
            Formula::Eventually(iv, c) => {
                write!(f, "F{iv} ")?;
                unary_operand(f, c)
            }
            Formula::Until(iv, l, r) => write!(f, "({l} U{iv} {r})"),
        }
    }
}

fn join(
    f: &mut fmt::Formatter<'_>,
    cs: &[Formula],
    sep: &str,
    needs_parens: impl Fn(&Formula) -> bool,
) -> fmt::Result {
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        if needs_parens(c) {
            write!(f, "({c})")?;
        } else {
            write!(f, "{c}")?;
        }
    }
    Ok(())
}

fn unary_operand(f: &mut fmt::Formatter<'_>, c: &Formula) -> fmt::Result {
    match c {
        Formula::Always(..) | Formula::Eventually(..) | Formula::Until(..) | Formula::True => {
            write!(f, "{c}")
        }
        _ => write!(f, "({c})"),
    }
}

fn write_vec(f: &mut fmt::Formatter<'_>, v: &[f64]) -> fmt::Result {
    f.write_str("[")?;
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{x}")?;
    }
    f.write_str("]")
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Box { lo, hi } => {
                f.write_str("box(")?;
                for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "[{l},{h}]")?;
                }
                f.write_str(")")
            }
            Region::Ball { center, radius } => {
                f.write_str("ball(")?;
                write_vec(f, center)?;
                write!(f, "; {radius})")
            }
            Region::Halfspace(h) => {
                f.write_str("halfspace(")?;
                write_vec(f, &h.normal)?;
                write!(f, "; {})", h.offset)
            }
            Region::ConvexPolytope(hs) => {
                f.write_str("poly(")?;
                for (i, h) in hs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", Region::Halfspace(h.clone()))?;
                }
                f.write_str(")")
            }
            Region::UnionOfConvex(ms) => {
                f.write_str("union(")?;
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{m}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for PredicateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PredicateKind::Linear { coeffs, offset } => {
                let mut first = true;
                for (i, &c) in coeffs.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let var = format!("x{}", i + 1);
                    if first {
                        if c == 1.0 {
                            write!(f, "{var}")?;
                        } else if c == -1.0 {
                            write!(f, "-{var}")?;
                        } else {
                            write!(f, "{c}*{var}")?;
                        }
                        first = false;
                    } else {
                        let sign = if c < 0.0 { '-' } else { '+' };
                        let a = c.abs();
                        if a == 1.0 {
                            write!(f, " {sign} {var}")?;
                        } else {
                            write!(f, " {sign} {a}*{var}")?;
                        }
                    }
                }
                if *offset != 0.0 {
                    let sign = if *offset < 0.0 { '-' } else { '+' };
                    write!(f, " {sign} {}", offset.abs())?;
                }
                f.write_str(" >= 0")
            }
            PredicateKind::SignedDistance {
                region,
                dims,
                orientation,
            } => {
                let name = match orientation {
                    Orientation::Avoid => "sd_out",
                    Orientation::Reach => "sd_in",
                };
                write!(f, "{name}({region}")?;
                let default: Vec<usize> = (0..dims.len()).collect();
                if *dims != default {
                    f.write_str(" @ ")?;
                    for (i, d) in dims.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "x{}", d + 1)?;
                    }
                }
                f.write_str(") >= 0")
            }
            PredicateKind::Lipschitz { name, constant, .. } => {
                write!(f, "lipschitz({name}; {constant}) >= 0")
            }
        }
    }
}
