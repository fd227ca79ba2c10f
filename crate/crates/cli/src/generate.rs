use std::path::Path;

use anyhow::{Context, Result};
use serde_json::json;

use strobust::casestudy::{self, CaseStudy};

fn write_case(dir: &Path, case: &CaseStudy, extra: serde_json::Value) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    case.signal.save_csv(dir.join("signal.csv"))?;
    std::fs::write(dir.join("spec.stl"), &case.spec)?;
    let mut meta = json!({
        "name": case.name,
        "signal": "signal.csv",
        "spec": "spec.stl",
        "t": case.t,
        "dt_max": case.dt_max,
        "labels": case.labels,
        "dim": case.signal.dim(),
        "t_lo": case.signal.t_lo(),
        "t_hi": case.signal.t_hi(),
    });
    if let (Some(m), Some(e)) = (meta.as_object_mut(), extra.as_object()) {
        m.extend(e.clone());
    }
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    std::fs::write(dir.join("case.json"), text)?;
    Ok(())
}

pub fn f16like(dir: &Path) -> Result<()> {
    write_case(dir, &casestudy::f16like(), json!({}))
}

pub fn robotaxi(dir: &Path, fixed_pedestrian: bool) -> Result<()> {
    if fixed_pedestrian {
        let [px, py] = casestudy::ROBOTAXI_FIXED_PEDESTRIAN;
        return write_case(
            dir,
            &casestudy::robotaxi_fixed_pedestrian(),
            json!({ "pedestrian": [px, py], "d_min": casestudy::ROBOTAXI_D_MIN }),
        );
    }
    write_case(
        dir,
        &casestudy::robotaxi(),
        json!({
            "d_min": casestudy::ROBOTAXI_D_MIN,
            "agents": "agents.csv",
            "agents_columns": ["vx", "vy", "px", "py"],
            "lipschitz_constant": casestudy::ROBOTAXI_LIPSCHITZ,
        }),
    )?;
    casestudy::robotaxi_agents().save_csv(dir.join("agents.csv"))?;
    Ok(())
}
