//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines always show.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strobust::casestudy;
use strobust::envelope::{
    env_max, env_min, pareto_strict, raster_maximal_points, Envelope, PerturbationLevel,
};
use strobust::instances::{
    convex_instance, oracle_instance, random_convex_region, random_grid_envelope, random_signal,
    random_union_region, Instance,
};
use strobust::monitor::{
    monitor, sliding_extremum, sliding_extremum_naive, until_naive, until_prefix_min, Extremum,
};
use strobust::oracle::{
    brute_force_str, certified_predicate_envelope, classical_spatial, first_undominated,
    qualitative, DxGrid, OracleError,
};
use strobust::predicate::{
    predicate_envelope, predicate_envelope_full_shell, shell_offsets, MonitorConfig,
};
use strobust::signal::{PaddingPolicy, Signal};
use strobust::spec::{parse_spec, Formula, Orientation, PredicateFunction};

type Outcome = Result<String, String>;

const BIN: &str = env!("CARGO_BIN_EXE_strobust");
const GRID: DxGrid = DxGrid {
    step: 0.25,
    cap: 8.0,
};

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// 100 in-budget oracle instances; draws that exceed the oracle's joint
/// displacement budget are redrawn.
fn oracle_family() -> (Vec<(Instance, Vec<PerturbationLevel>)>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut out = Vec::new();
    let mut redrawn = 0;
    while out.len() < 100 {
        let inst = oracle_instance(&mut rng);
        match brute_force_str(&inst.formula, &inst.signal, inst.t, inst.dt_max, GRID) {
            Ok(points) => out.push((inst, points)),
            Err(OracleError::BudgetExceeded(_)) => redrawn += 1,
            Err(e) => panic!("oracle failed on `{}`: {e}", inst.formula),
        }
    }
    (out, redrawn)
}

fn cfg_for(inst: &Instance) -> MonitorConfig {
    MonitorConfig::default()
        .with_dt_max(inst.dt_max)
        .with_norm(inst.norm)
}

fn criterion_01(family: &[(Instance, Vec<PerturbationLevel>)], oracle_time: Duration) -> Outcome {
    let start = Instant::now();
    let mut kinds = BTreeSet::new();
    let (mut checked, mut nonempty) = (0, 0);
    for (inst, points) in family {
        inst.formula.preorder().iter().for_each(|n| {
            kinds.insert(n.kind_name());
        });
        let env = monitor(&inst.formula, &inst.signal, inst.t, &cfg_for(inst))
            .map_err(|e| e.to_string())?;
        checked += pareto_strict(&env).len();
        nonempty += !env.is_empty() as usize;
        if let Some(p) = first_undominated(&env, points, &GRID) {
            return Err(format!(
                "`{}` at t={}: envelope {env} point {p} not dominated by oracle {points:?}",
                inst.formula, inst.t
            ));
        }
    }
    let total = oracle_time + start.elapsed();
    check(kinds.len() == 7, || {
        format!("node kinds covered: {kinds:?}")
    })?;
    check(total < Duration::from_secs(60), || {
        format!("took {total:?}")
    })?;
    Ok(format!(
        "100 instances ({nonempty} non-empty, {checked} Pareto points), 7 node kinds, {:.2} s",
        total.as_secs_f64()
    ))
}

fn criterion_02(family: &[(Instance, Vec<PerturbationLevel>)]) -> Outcome {
    let mut satisfied = 0;
    for (inst, _) in family {
        let env = monitor(&inst.formula, &inst.signal, inst.t, &cfg_for(inst))
            .map_err(|e| e.to_string())?;
        let q = qualitative(&inst.formula, &inst.signal, inst.t).map_err(|e| e.to_string())?;
        check(q == !env.is_violated(), || {
            format!(
                "`{}` at t={}: qualitative {q}, envelope {env}",
                inst.formula, inst.t
            )
        })?;
        satisfied += q as usize;
    }
    Ok(format!("100 instances, {satisfied} satisfied"))
}

fn criterion_03() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut positive = 0;
    for _ in 0..100 {
        let inst = convex_instance(&mut rng);
        let env = monitor(&inst.formula, &inst.signal, inst.t, &cfg_for(&inst))
            .map_err(|e| e.to_string())?;
        let rho =
            classical_spatial(&inst.formula, &inst.signal, inst.t).map_err(|e| e.to_string())?;
        let ok = match env.get(0) {
            Some(v) if rho >= 0.0 => v == rho || (v - rho).abs() <= 1e-9,
            None => rho < 0.0,
            Some(_) => false,
        };
        check(ok, || {
            format!(
                "`{}` at t={}: envelope {env}, classical {rho}",
                inst.formula, inst.t
            )
        })?;
        positive += (rho >= 0.0) as usize;
    }
    Ok(format!(
        "100 specs, {positive} with non-negative robustness"
    ))
}

fn random_entries(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| match rng.gen_range(0..12) {
            0 => f64::NEG_INFINITY,
            1 => f64::INFINITY,
            _ => rng.gen_range(-16..=16) as f64 * 0.25,
        })
        .collect()
}

fn criterion_04() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    for i in 0..200 {
        let b = rng.gen_range(0..=12);
        let a = rng.gen_range(0..=b);
        let left = random_entries(&mut rng, b + 1);
        let right = random_entries(&mut rng, b + 1);
        let (fast, slow) = (
            until_prefix_min(&left, &right, a),
            until_naive(&left, &right, a),
        );
        check(fast.to_bits() == slow.to_bits(), || {
            format!("instance {i}: a={a} b={b} {left:?} {right:?}: {fast} vs {slow}")
        })?;
    }
    Ok("200 instances".into())
}

fn criterion_05() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    for i in 0..200 {
        let len = rng.gen_range(1..=500);
        let b = rng.gen_range(0..len.min(51));
        let a = rng.gen_range(0..=b);
        let values = random_entries(&mut rng, len);
        for mode in [Extremum::Min, Extremum::Max] {
            let fast = sliding_extremum(&values, a, b, mode).map_err(|e| e.to_string())?;
            let slow = sliding_extremum_naive(&values, a, b, mode).map_err(|e| e.to_string())?;
            let same = fast.len() == slow.len()
                && fast
                    .iter()
                    .zip(&slow)
                    .all(|(x, y)| x.to_bits() == y.to_bits());
            check(same, || {
                format!("instance {i} ({mode:?}, len {len}, [{a},{b}]) differs")
            })?;
        }
    }
    Ok("200 sequences, min and max".into())
}

/// Grid points `(k·step, dt)` with `k·step <= min(cap, e[dt])`.
fn raster(e: &Envelope, step: f64, cap: f64) -> BTreeSet<(u64, u64)> {
    let mut out = BTreeSet::new();
    for (dt, &v) in e.dx().iter().enumerate() {
        let top = v.min(cap);
        let mut k = 0u64;
        while k as f64 * step <= top {
            out.insert((k, dt as u64));
            k += 1;
        }
    }
    out
}

fn to_levels(pts: &BTreeSet<(u64, u64)>, step: f64) -> Vec<PerturbationLevel> {
    pts.iter()
        .map(|&(k, dt)| PerturbationLevel::new(k as f64 * step, dt))
        .collect()
}

fn criterion_06() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let (step, cap) = (0.25, 5.0);
    for i in 0..500 {
        let e1 = random_grid_envelope(&mut rng, 7, step, 16);
        let e2 = random_grid_envelope(&mut rng, 7, step, 16);
        let (r1, r2) = (raster(&e1, step, cap), raster(&e2, step, cap));
        let inter: BTreeSet<_> = r1.intersection(&r2).copied().collect();
        let union: BTreeSet<_> = r1.union(&r2).copied().collect();
        let lo = env_min(&e1, &e2);
        let hi = env_max(&e1, &e2);
        let ok = raster(&lo, step, cap) == inter
            && raster(&hi, step, cap) == union
            && raster_maximal_points(&to_levels(&inter, step))
                == raster_maximal_points(&to_levels(&raster(&lo, step, cap), step))
            && raster_maximal_points(&to_levels(&union, step))
                == raster_maximal_points(&to_levels(&raster(&hi, step, cap), step));
        check(ok, || format!("pair {i}: {e1} {e2} -> min {lo}, max {hi}"))?;
        if lo.dx().iter().all(|v| v.is_finite()) {
            check(
                pareto_strict(&lo) == raster_maximal_points(&to_levels(&inter, step)),
                || format!("pair {i}: Pareto points of {lo} differ from the raster"),
            )?;
        }
    }
    Ok("500 pairs".into())
}

fn criterion_07() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let dt_max = 2;
    let cfg = MonitorConfig::default().with_dt_max(dt_max);
    let (mut worst, mut nonempty) = (0.0f64, 0);
    for i in 0..100 {
        let convex = i < 50;
        let region = if convex {
            random_convex_region(&mut rng, 2, 2.0)
        } else {
            random_union_region(&mut rng, 2, 2.0)
        };
        let orientation = if convex && rng.gen_bool(0.5) {
            Orientation::Reach
        } else {
            Orientation::Avoid
        };
        let p = PredicateFunction::signed_distance(region, vec![0, 1], orientation)
            .map_err(|e| e.to_string())?;
        let sig = random_signal(&mut rng, 2, 5, 0, 0.125, 24).with_padding(PaddingPolicy::Clamp);
        let t = 2;
        let fast = predicate_envelope(&p, &sig, t, &cfg)
            .map_err(|e| e.to_string())?
            .envelope;
        let cert =
            certified_predicate_envelope(&p, &sig, t, dt_max, 1e-9).map_err(|e| e.to_string())?;
        nonempty += !fast.is_empty() as usize;
        let ok = if convex {
            fast.len() == cert.len()
                && fast.dx().iter().zip(cert.dx()).all(|(a, b)| {
                    worst = worst.max((a - b).abs());
                    (a - b).abs() <= 1e-6
                })
        } else {
            fast.len() <= cert.len() && fast.dx().iter().zip(cert.dx()).all(|(a, b)| *a <= b + 1e-6)
        };
        check(ok, || {
            format!("region {i} `{p}`: fast {fast}, certificate {cert}")
        })?;
    }
    Ok(format!(
        "50 convex + 50 unions, {nonempty} non-empty, max convex gap {worst:.1e}"
    ))
}

fn criterion_08() -> Outcome {
    for s in 1..=3usize {
        for level in 0..=4u64 {
            let l = level as i64;
            let got: Vec<Vec<i64>> = shell_offsets(level, s).collect();
            let unique: BTreeSet<Vec<i64>> = got.iter().cloned().collect();
            check(unique.len() == got.len(), || {
                format!("duplicate offsets at s={s}, level={level}")
            })?;
            let mut expect = BTreeSet::new();
            let mut cube = vec![Vec::new()];
            for _ in 0..s {
                cube = cube
                    .into_iter()
                    .flat_map(|p: Vec<i64>| {
                        (-l..=l).map(move |v| {
                            let mut p = p.clone();
                            p.push(v);
                            p
                        })
                    })
                    .collect();
            }
            for o in cube {
                if o.iter().any(|v| v.abs() == l) {
                    expect.insert(o);
                }
            }
            check(unique == expect, || {
                format!("shell mismatch at s={s}, level={level}")
            })?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let specs = [
        "x2 - 0.5 >= 0",
        "x1 + 2*x3 >= 0",
        "sd_out(box([-1,1]) @ x3) >= 0",
        "sd_in(ball([0,0]; 2.5) @ x1, x2) >= 0",
        "sd_out(poly(halfspace([1,0]; 1), halfspace([-1,0]; 1), halfspace([0,1]; 1), halfspace([1,-1]; 0.5)) @ x2, x3) >= 0",
    ];
    let mut checked = 0;
    for text in specs {
        let Formula::Predicate(p) = parse_spec(text, 3).map_err(|e| e.to_string())? else {
            return Err(format!("`{text}` is not a predicate"));
        };
        for _ in 0..10 {
            let sig = random_signal(&mut rng, 3, 12, 0, 0.25, 12);
            for decompose in [true, false] {
                let cfg = MonitorConfig {
                    decompose,
                    ..MonitorConfig::default().with_dt_max(4)
                };
                for t in 4..8 {
                    let a = predicate_envelope(&p, &sig, t, &cfg).map_err(|e| e.to_string())?;
                    let b = predicate_envelope_full_shell(&p, &sig, t, &cfg)
                        .map_err(|e| e.to_string())?;
                    check(a.envelope == b.envelope, || {
                        format!(
                            "`{text}` at t={t}: support {} vs full {}",
                            a.envelope, b.envelope
                        )
                    })?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!(
        "shells s<=3, level<=4 exact; {checked} support comparisons"
    ))
}

fn run(args: &[&str]) -> Result<(std::process::Output, Duration), String> {
    let start = Instant::now();
    let out = Command::new(BIN)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out, start.elapsed()))
}

fn ok_run(args: &[&str]) -> Result<Duration, String> {
    let (out, took) = run(args)?;
    check(out.status.success(), || {
        format!(
            "`strobust {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    Ok(took)
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn f16_explain(dir: &Path, out: &str, jobs: &str) -> Result<Duration, String> {
    let (signal, spec, out) = (dir.join("signal.csv"), dir.join("spec.stl"), dir.join(out));
    ok_run(&[
        "--jobs",
        jobs,
        "explain",
        "--signal",
        p(&signal),
        "--spec",
        p(&spec),
        "--t",
        "0",
        "--dtmax",
        "50",
        "--labels",
        "avoid,threat,climb",
        "--out",
        p(&out),
    ])
}

fn criterion_09(work: &Path) -> Outcome {
    let dir = work.join("f16");
    ok_run(&["generate", "f16like", "--out", p(&dir)])?;
    let took = f16_explain(&dir, "jobs1", "1")?;
    check(took < Duration::from_secs(300), || {
        format!("explain took {took:?}")
    })?;
    let out = dir.join("jobs1");
    let root = Envelope::load_csv(out.join("root.csv")).map_err(|e| e.to_string())?;
    let mut min: Option<Envelope> = None;
    for label in ["avoid", "threat", "climb"] {
        let e = Envelope::load_csv(out.join(format!("{label}.csv"))).map_err(|e| e.to_string())?;
        min = Some(match min {
            None => e,
            Some(m) => env_min(&m, &e),
        });
    }
    let min = min.expect("three conjuncts");
    check(root == min, || {
        format!("root {root} differs from conjunct minimum {min}")
    })?;
    check(root.len() == 51, || {
        format!("root has {} entries", root.len())
    })?;
    let binding = std::fs::read_to_string(out.join("binding.csv")).map_err(|e| e.to_string())?;
    let labels: BTreeSet<&str> = binding
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1))
        .collect();
    check(binding.lines().count() == 52, || {
        "binding report needs 51 rows".into()
    })?;
    check(
        labels
            .iter()
            .all(|l| ["avoid", "threat", "climb"].contains(l)),
        || format!("labels {labels:?}"),
    )?;
    let report = std::fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
    check(
        ["\"avoid\"", "\"threat\"", "\"climb\""]
            .iter()
            .all(|l| report.contains(l)),
        || "report lacks conjunct envelopes".into(),
    )?;
    Ok(format!(
        "explain {:.2} s, binding {:?}, root = min of 3 conjuncts",
        took.as_secs_f64(),
        labels
    ))
}

fn robotaxi_monitor(dir: &Path, out: &str, jobs: &str) -> Result<Duration, String> {
    let (signal, spec, out) = (dir.join("signal.csv"), dir.join("spec.stl"), dir.join(out));
    ok_run(&[
        "--jobs",
        jobs,
        "monitor",
        "--signal",
        p(&signal),
        "--spec",
        p(&spec),
        "--t",
        "0",
        "--dtmax",
        "20",
        "--out",
        p(&out),
    ])
}

fn criterion_10(work: &Path) -> Outcome {
    let dir = work.join("robotaxi");
    let fixed = work.join("robotaxi-fixed");
    ok_run(&["generate", "robotaxi", "--out", p(&dir)])?;
    ok_run(&[
        "generate",
        "robotaxi",
        "--fixed-pedestrian",
        "--out",
        p(&fixed),
    ])?;
    robotaxi_monitor(&dir, "jobs1", "1")?;
    let env = Envelope::load_csv(dir.join("jobs1/root.csv")).map_err(|e| e.to_string())?;
    check(!env.is_empty() && env.is_monotone(), || {
        format!("envelope {env}")
    })?;
    let took = robotaxi_monitor(&fixed, "jobs1", "1")?;
    check(took < Duration::from_secs(1), || {
        format!("fixed-pedestrian run took {took:?}")
    })?;
    let fixed_env = Envelope::load_csv(fixed.join("jobs1/root.csv")).map_err(|e| e.to_string())?;
    check(!fixed_env.is_empty(), || {
        "fixed-pedestrian envelope is empty".into()
    })?;

    // The Lipschitz bound over both agents never exceeds the relative run.
    let agents = Signal::load_csv(dir.join("agents.csv")).map_err(|e| e.to_string())?;
    let cfg = MonitorConfig::default().with_dt_max(5);
    let four = monitor(&casestudy::robotaxi_agents_formula(), &agents, 0, &cfg)
        .map_err(|e| e.to_string())?;
    let rel = casestudy::robotaxi();
    let two_formula = parse_spec(&rel.spec, 2).map_err(|e| e.to_string())?;
    let two = monitor(&two_formula, &rel.signal, 0, &cfg).map_err(|e| e.to_string())?;
    check(
        four.len() <= two.len() && four.dx().iter().zip(two.dx()).all(|(a, b)| a <= b),
        || format!("4-D Lipschitz {four} exceeds relative {two}"),
    )?;
    Ok(format!(
        "envelope {} entries, Δx(0) = {:.3}; fixed pedestrian {:.3} s",
        env.len(),
        env.get(0).unwrap_or(f64::NAN),
        took.as_secs_f64()
    ))
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|it| it.filter_map(|e| e.ok().map(|e| e.path())).collect())
        .unwrap_or_default();
    v.sort();
    v
}

fn criterion_11(work: &Path) -> Outcome {
    f16_explain(&work.join("f16"), "jobs8", "8")?;
    robotaxi_monitor(&work.join("robotaxi"), "jobs8", "8")?;
    robotaxi_monitor(&work.join("robotaxi-fixed"), "jobs8", "8")?;
    let mut compared = 0;
    for case in ["f16", "robotaxi", "robotaxi-fixed"] {
        let (one, eight) = (work.join(case).join("jobs1"), work.join(case).join("jobs8"));
        let (a, b) = (files(&one), files(&eight));
        check(!a.is_empty() && a.len() == b.len(), || {
            format!("{case}: file lists differ")
        })?;
        for (x, y) in a.iter().zip(&b) {
            let same =
                x.file_name() == y.file_name() && std::fs::read(x).ok() == std::fs::read(y).ok();
            check(same, || {
                format!("{} differs between --jobs 1 and --jobs 8", x.display())
            })?;
            compared += 1;
        }
    }
    Ok(format!("{compared} files byte-identical"))
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let t0 = Instant::now();
    let (family, redrawn) = oracle_family();
    let oracle_time = t0.elapsed();
    eprintln!("oracle family: 100 instances ({redrawn} over-budget draws redrawn)");

    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        (
            "criterion 01 oracle dominance",
            Box::new(|| criterion_01(&family, oracle_time)),
        ),
        ("criterion 02 soundness", Box::new(|| criterion_02(&family))),
        (
            "criterion 03 zero-shift cross-check",
            Box::new(criterion_03),
        ),
        ("criterion 04 until equivalence", Box::new(criterion_04)),
        (
            "criterion 05 sliding-window equivalence",
            Box::new(criterion_05),
        ),
        ("criterion 06 envelope algebra", Box::new(criterion_06)),
        ("criterion 07 predicate certificate", Box::new(criterion_07)),
        ("criterion 08 shells and support", Box::new(criterion_08)),
        (
            "criterion 09 f16like explain",
            Box::new(|| criterion_09(work.path())),
        ),
        (
            "criterion 10 robotaxi",
            Box::new(|| criterion_10(work.path())),
        ),
        (
            "criterion 11 determinism",
            Box::new(|| criterion_11(work.path())),
        ),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!(
                "PASS {name}: {detail} [{:.2} s]",
                started.elapsed().as_secs_f64()
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "FAIL {name}: {why} [{:.2} s]",
                    started.elapsed().as_secs_f64()
                );
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
