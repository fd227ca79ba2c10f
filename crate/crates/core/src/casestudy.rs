//! Synthetic stand-ins for the two case studies: a jet flight path with a
//! three-conjunct mission specification, and a vehicle/pedestrian encounter.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use crate::signal::Signal;
use crate::spec::{Formula, Interval, PredicateFunction};

/// A generated signal with the specification and settings to monitor it.
#[derive(Debug, Clone)]
pub struct CaseStudy {
    pub name: &'static str,
    pub signal: Signal,
    pub spec: String,
    pub t: i64,
    pub dt_max: u64,
    pub labels: Vec<String>,
}

pub const F16_BUFFER: i64 = 50;
pub const F16_HORIZON: i64 = 1847;

/// Altitude profile: level flight, a slow climb through 1520 ft at `t=1349`,
/// then a steep climb that levels off at 2271 ft.
fn f16_altitude(t: i64) -> f64 {
    if t <= 1299 {
        1470.0
    } else if t <= 1400 {
        1520.0 + (t - 1349) as f64
    } else {
        (1571.0 + 10.0 * (t - 1400) as f64).min(2271.0)
    }
}

/// Jet flying east at 2 units per step with a gentle north weave.
///
/// The corridor conjunct binds for large `Δt` (its margin shrinks by two per
/// level), the climb conjunct for small `Δt` (margin `80 - Δt`).
pub fn f16like() -> CaseStudy {
    let rows: Vec<Vec<f64>> = (-F16_BUFFER..=F16_HORIZON + F16_BUFFER)
        .map(|t| {
            let east = 2.0 * t as f64;
            let north = 150.0 * (2.0 * PI * t as f64 / 600.0).sin();
            vec![east, north, f16_altitude(t)]
        })
        .collect();
    let signal = Signal::from_rows(-F16_BUFFER, rows).expect("finite rows");
    let spec = "\
# no-fly zone, threat corridor cleared by t=581, climb through 1600/1800 ft
G[0,1847] (sd_out(box([2000,3000], [600,1500], [0,3000])) > 0)
  && G[581,1847] (sd_out(box([800,1052], [-500,500], [0,5000])) > 0)
  && G[1349,1349] ((1600 - x3 > 0) && ((x3 - 1000 > 0) U[0,300] (x3 - 1800 > 0)))
"
    .to_string();
    CaseStudy {
        name: "f16like",
        signal,
        spec,
        t: 0,
        dt_max: 50,
        labels: vec!["avoid".into(), "threat".into(), "climb".into()],
    }
}

pub const ROBOTAXI_BUFFER: i64 = 20;
pub const ROBOTAXI_HORIZON: i64 = 90;
pub const ROBOTAXI_D_MIN: f64 = 1.0;
/// Lipschitz constant of `‖(v - p)‖ - d_min` on the four-dimensional state
/// `(v, p)` under the Euclidean norm.
pub const ROBOTAXI_LIPSCHITZ: f64 = SQRT_2;

pub fn robotaxi_vehicle(t: i64) -> [f64; 2] {
    [-30.0 + 0.6 * t as f64, 0.0]
}

pub fn robotaxi_pedestrian(t: i64) -> [f64; 2] {
    [10.0, -12.0 + 0.15 * t as f64]
}

/// Fixed pedestrian position of the simplified variant.
pub const ROBOTAXI_FIXED_PEDESTRIAN: [f64; 2] = [10.0, -3.0];

fn robotaxi_times() -> std::ops::RangeInclusive<i64> {
    -ROBOTAXI_BUFFER..=ROBOTAXI_HORIZON + ROBOTAXI_BUFFER
}

/// Relative position `vehicle - pedestrian` against a unit ball at the origin.
pub fn robotaxi() -> CaseStudy {
    let rows = robotaxi_times()
        .map(|t| {
            let (v, p) = (robotaxi_vehicle(t), robotaxi_pedestrian(t));
            vec![v[0] - p[0], v[1] - p[1]]
        })
        .collect();
    CaseStudy {
        name: "robotaxi",
        signal: Signal::from_rows(-ROBOTAXI_BUFFER, rows).expect("finite rows"),
        spec: "# keep d_min = 1 between vehicle and pedestrian\n\
               G[0,90] (sd_out(ball([0, 0]; 1)) >= 0)\n"
            .to_string(),
        t: 0,
        dt_max: 20,
        labels: vec!["distance".into()],
    }
}

/// Vehicle-only signal and a fixed pedestrian to avoid.
pub fn robotaxi_fixed_pedestrian() -> CaseStudy {
    let rows = robotaxi_times()
        .map(|t| robotaxi_vehicle(t).to_vec())
        .collect();
    let [px, py] = ROBOTAXI_FIXED_PEDESTRIAN;
    CaseStudy {
        name: "robotaxi-fixed",
        signal: Signal::from_rows(-ROBOTAXI_BUFFER, rows).expect("finite rows"),
        spec: format!(
            "# fixed pedestrian at ({px}, {py}), d_min = 1\n\
             G[0,90] (sd_out(ball([{px}, {py}]; 1)) >= 0)\n"
        ),
        t: 0,
        dt_max: 20,
        labels: vec!["distance".into()],
    }
}

/// Both agents side by side: columns `(vx, vy, px, py)`.
pub fn robotaxi_agents() -> Signal {
    let rows = robotaxi_times()
        .map(|t| {
            let (v, p) = (robotaxi_vehicle(t), robotaxi_pedestrian(t));
            vec![v[0], v[1], p[0], p[1]]
        })
        .collect();
    Signal::from_rows(-ROBOTAXI_BUFFER, rows).expect("finite rows")
}

/// `G[0,90] (‖v - p‖ - d_min >= 0)` as a Lipschitz black box over the
/// four-dimensional agent signal.
pub fn robotaxi_agents_formula() -> Formula {
    let eval = Arc::new(|z: &[f64]| (z[0] - z[2]).hypot(z[1] - z[3]) - ROBOTAXI_D_MIN);
    let pred =
        PredicateFunction::lipschitz("pair_distance", vec![0, 1, 2, 3], ROBOTAXI_LIPSCHITZ, eval)
            .expect("positive constant");
    Formula::always(
        Interval::new(0, ROBOTAXI_HORIZON as u64).expect("ordered"),
        Formula::Predicate(pred),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec;

    #[test]
    fn f16_shape() {
        let c = f16like();
        assert_eq!(c.signal.t_lo(), -50);
        assert_eq!(c.signal.t_hi(), 1897);
        assert_eq!(c.signal.dim(), 3);
        assert!(c.spec.contains("U[0,300]"));
        assert!(c.spec.contains("1600") && c.spec.contains("1800"));
        let f = parse_spec(&c.spec, 3).unwrap();
        assert_eq!(f.conjuncts().len(), 3);
        assert_eq!(f16_altitude(1299), 1470.0);
        assert_eq!(f16_altitude(1349), 1520.0);
        assert_eq!(f16_altitude(1470), 2271.0);
        assert_eq!(f16_altitude(1800), 2271.0);
    }

    #[test]
    fn robotaxi_shapes() {
        let c = robotaxi();
        assert!(c.spec.contains("G[0,90]"));
        assert!(c.spec.contains("ball([0, 0]; 1)"));
        assert!(parse_spec(&c.spec, 2).is_ok());
        let fixed = robotaxi_fixed_pedestrian();
        assert_eq!(fixed.signal.dim(), 2);
        assert!(parse_spec(&fixed.spec, 2).is_ok());
        assert_eq!(robotaxi_agents().dim(), 4);
        assert_eq!(robotaxi_agents().len(), c.signal.len());
    }
}
