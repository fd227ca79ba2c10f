//! Regions of state space and their signed distance functions.
//!
//! Region coordinates live in a local space of `dim()` coordinates; callers
//! pass the full state vector plus the list of state dimensions the region
//! constrains, so no per-call allocation is needed for the common shapes.
//!
//! Sign convention: negative strictly inside, positive strictly outside,
//! zero on the boundary.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    /// Outward normal; the halfspace is `{ y | normal · y <= offset }`.
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    fn norm(&self) -> f64 {
        self.normal.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn norm_l1(&self) -> f64 {
        self.normal.iter().map(|v| v.abs()).sum()
    }

    #[inline]
    fn excess(&self, z: &[f64], dims: &[usize]) -> f64 {
        let mut acc = -self.offset;
        for (k, &d) in dims.iter().enumerate() {
            acc += self.normal[k] * z[d];
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Halfspace(Halfspace),
    ConvexPolytope(Vec<Halfspace>),
    UnionOfConvex(Vec<Region>),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
            Region::Halfspace(h) => h.normal.len(),
            Region::ConvexPolytope(hs) => hs.first().map(|h| h.normal.len()).unwrap_or(0),
            Region::UnionOfConvex(members) => members.first().map(Region::dim).unwrap_or(0),
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, Region::UnionOfConvex(_))
    }

    /// Checks the structural invariants; returns a message on failure.
    pub fn validate(&self) -> Result<(), String> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Region::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err("box needs one [lo,hi] pair per dimension".into());
                }
                if !finite(lo) || !finite(hi) {
                    return Err("box bounds must be finite".into());
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err("box requires lo <= hi in every dimension".into());
                }
            }
            Region::Ball { center, radius } => {
                if center.is_empty() || !finite(center) {
                    return Err("ball center must be a non-empty finite vector".into());
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err("ball radius must be positive".into());
                }
            }
            Region::Halfspace(h) => validate_halfspace(h)?,
            Region::ConvexPolytope(hs) => {
                if hs.is_empty() {
                    return Err("polytope needs at least one halfspace".into());
                }
                let d = hs[0].normal.len();
                for h in hs {
                    validate_halfspace(h)?;
                    if h.normal.len() != d {
                        return Err("polytope halfspaces disagree on dimension".into());
                    }
                }
            }
            Region::UnionOfConvex(members) => {
                if members.is_empty() {
                    return Err("union needs at least one member".into());
                }
                let d = members[0].dim();
                for m in members {
                    if !m.is_convex() {
                        return Err("union members must be convex".into());
                    }
                    m.validate()?;
                    if m.dim() != d {
                        return Err("union members disagree on dimension".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Euclidean signed distance of the point `(z[dims[0]], z[dims[1]], ...)`.
    ///
    /// For unions this is the minimum over members: exact outside the union,
    /// an under-estimate of the depth inside it.
    pub fn signed_distance(&self, z: &[f64], dims: &[usize]) -> f64 {
        match self {
            Region::Box { lo, hi } => {
                let mut outside = 0.0;
                let mut depth = f64::INFINITY;
                for (k, &d) in dims.iter().enumerate() {
                    let v = z[d];
                    let gap = if v < lo[k] {
                        lo[k] - v
                    } else if v > hi[k] {
                        v - hi[k]
                    } else {
                        0.0
                    };
                    outside += gap * gap;
                    depth = depth.min((v - lo[k]).min(hi[k] - v));
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    -depth
                }
            }
            Region::Ball { center, radius } => {
                let mut acc = 0.0;
                for (k, &d) in dims.iter().enumerate() {
                    let diff = z[d] - center[k];
                    acc += diff * diff;
                }
                acc.sqrt() - radius
            }
            Region::Halfspace(h) => h.excess(z, dims) / h.norm(),
            Region::ConvexPolytope(hs) => polytope_signed_distance(hs, z, dims),
            Region::UnionOfConvex(members) => members
                .iter()
                .map(|m| m.signed_distance(z, dims))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Signed distance measured in the max-norm, where it has a closed form
    /// (boxes, halfspaces, and unions of those).
    pub fn chebyshev_signed_distance(&self, z: &[f64], dims: &[usize]) -> Option<f64> {
        match self {
            Region::Box { lo, hi } => {
                let mut outside: f64 = 0.0;
                let mut depth = f64::INFINITY;
                for (k, &d) in dims.iter().enumerate() {
                    let v = z[d];
                    let gap = if v < lo[k] {
                        lo[k] - v
                    } else if v > hi[k] {
                        v - hi[k]
                    } else {
                        0.0
                    };
                    outside = outside.max(gap);
                    depth = depth.min((v - lo[k]).min(hi[k] - v));
                }
                Some(if outside > 0.0 { outside } else { -depth })
            }
            Region::Halfspace(h) => Some(h.excess(z, dims) / h.norm_l1()),
            Region::UnionOfConvex(members) => {
                let mut best = f64::INFINITY;
                for m in members {
                    best = best.min(m.chebyshev_signed_distance(z, dims)?);
                }
                Some(best)
            }
            Region::Ball { .. } | Region::ConvexPolytope(_) => None,
        }
    }

    pub fn supports_chebyshev(&self) -> bool {
        match self {
            Region::Box { .. } | Region::Halfspace(_) => true,
            Region::UnionOfConvex(ms) => ms.iter().all(Region::supports_chebyshev),
            Region::Ball { .. } | Region::ConvexPolytope(_) => false,
        }
    }

    /// Closed membership test.
    pub fn contains(&self, z: &[f64], dims: &[usize]) -> bool {
        match self {
            Region::Box { lo, hi } => dims
                .iter()
                .enumerate()
                .all(|(k, &d)| z[d] >= lo[k] && z[d] <= hi[k]),
            Region::Ball { center, radius } => {
                let acc: f64 = dims
                    .iter()
                    .enumerate()
                    .map(|(k, &d)| (z[d] - center[k]).powi(2))
                    .sum();
                acc <= radius * radius
            }
            Region::Halfspace(h) => h.excess(z, dims) <= 0.0,
            Region::ConvexPolytope(hs) => hs.iter().all(|h| h.excess(z, dims) <= 0.0),
            Region::UnionOfConvex(ms) => ms.iter().any(|m| m.contains(z, dims)),
        }
    }
}

fn validate_halfspace(h: &Halfspace) -> Result<(), String> {
    if h.normal.is_empty() || h.normal.iter().any(|v| !v.is_finite()) || !h.offset.is_finite() {
        return Err("halfspace normal and offset must be finite".into());
    }
    if h.norm() == 0.0 {
        return Err("halfspace normal must be nonzero".into());
    }
    Ok(())
}

fn polytope_signed_distance(hs: &[Halfspace], z: &[f64], dims: &[usize]) -> f64 {
    // Largest normalized constraint excess: negative inside (the depth), and
    // a lower bound on the distance outside.
    let mut worst = f64::NEG_INFINITY;
    for h in hs {
        worst = worst.max(h.excess(z, dims) / h.norm());
    }
    if worst <= 0.0 {
        return worst;
    }
    let local: Vec<f64> = dims.iter().map(|&d| z[d]).collect();
    project_outside_distance(hs, &local).unwrap_or(worst)
}

/// Euclidean distance from an exterior point to a polytope, by enumerating
/// active sets of up to `dim` faces and keeping the nearest feasible
/// projection onto their affine hull.
fn project_outside_distance(hs: &[Halfspace], z: &[f64]) -> Option<f64> {
    let k = z.len();
    let m = hs.len();
    let zv = DVector::from_column_slice(z);
    let tol = 1e-9 * (1.0 + z.iter().map(|v| v.abs()).fold(0.0, f64::max));
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = Vec::with_capacity(k);

    fn visit(
        start: usize,
        m: usize,
        k: usize,
        subset: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if !subset.is_empty() {
            f(subset);
        }
        if subset.len() == k {
            return;
        }
        for i in start..m {
            subset.push(i);
            visit(i + 1, m, k, subset, f);
            subset.pop();
        }
    }

    let mut consider = |active: &[usize]| {
        let rows = active.len();
        if k <= SMALL {
            if let Some(y) = small_projection(hs, active, z) {
                let feasible = hs.iter().all(|h| {
                    let v: f64 =
                        h.normal.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - h.offset;
                    v <= tol * (1.0 + h.norm())
                });
                if feasible {
                    let d = z
                        .iter()
                        .zip(&y)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    best = Some(best.map_or(d, |b: f64| b.min(d)));
                }
            }
            return;
        }
        let n_mat = DMatrix::from_fn(rows, k, |r, c| hs[active[r]].normal[c]);
        let d_vec = DVector::from_fn(rows, |r, _| hs[active[r]].offset);
        let gram = &n_mat * n_mat.transpose();
        // Dependent normals make the Gram matrix singular; those active sets
        // are covered by a smaller independent subset.
        let Some(chol) = gram.cholesky() else {
            return;
        };
        let residual = &n_mat * &zv - &d_vec;
        let lambda = chol.solve(&residual);
        let y = &zv - n_mat.transpose() * lambda;
        let feasible = hs.iter().all(|h| {
            let v: f64 = h
                .normal
                .iter()
                .zip(y.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                - h.offset;
            v <= tol * (1.0 + h.norm())
        });
        if feasible {
            let d = (&zv - &y).norm();
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    };
    visit(0, m, k, &mut subset, &mut consider);
    best
}

const SMALL: usize = 3;

/// Projection of `z` onto the affine hull of the `active` faces, for states of
/// at most [`SMALL`] coordinates, without heap allocation. `None` when the
/// active normals are (numerically) dependent.
fn small_projection(hs: &[Halfspace], active: &[usize], z: &[f64]) -> Option<[f64; SMALL]> {
    let (r, k) = (active.len(), z.len());
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // Cholesky factor of the Gram matrix N Nᵀ.
    let mut l = [[0.0f64; SMALL]; SMALL];
    for i in 0..r {
        for j in 0..=i {
            let v = (0..j).fold(dot(&hs[active[i]].normal, &hs[active[j]].normal), |v, m| {
                v - l[i][m] * l[j][m]
            });
            if i == j {
                let scale = dot(&hs[active[i]].normal, &hs[active[i]].normal);
                if v <= 1e-12 * scale {
                    return None;
                }
                l[i][i] = v.sqrt();
            } else {
                l[i][j] = v / l[j][j];
            }
        }
    }
    // Solve N Nᵀ λ = N z - d.
    let mut lambda = [0.0f64; SMALL];
    for i in 0..r {
        let h = &hs[active[i]];
        let mut v = dot(&h.normal, z) - h.offset;
        for m in 0..i {
            v -= l[i][m] * lambda[m];
        }
        lambda[i] = v / l[i][i];
    }
    for i in (0..r).rev() {
        let mut v = lambda[i];
        for m in i + 1..r {
            v -= l[m][i] * lambda[m];
        }
        lambda[i] = v / l[i][i];
    }
    let mut y = [0.0f64; SMALL];
    for c in 0..k {
        y[c] = z[c]
            - (0..r)
                .map(|i| hs[active[i]].normal[c] * lambda[i])
                .sum::<f64>();
    }
    Some(y)
}
