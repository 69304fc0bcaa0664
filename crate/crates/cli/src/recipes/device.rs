use anyhow::{Context, Result};
use ctfsyn::device::{
    calibrate as run_calibration, extract_write_threshold, levels_and_learning_rate, CtfDevice, PulseSpec,
};
use serde_json::json;

use super::{num, Outputs};
use crate::config::ExperimentConfig;

fn device(cfg: &ExperimentConfig) -> Result<CtfDevice> {
    Ok(CtfDevice::new(cfg.device)?)
}

/// `fig2a_trajectories.csv`: pulse_index, v_g, t_p, v_t, g_norm.  Program from
/// the bottom of the window, then erase from the top.
pub fn fig2a(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let d = device(cfg)?;
    let p = &cfg.pulses;
    let w = d.window();
    let mut rows = Vec::new();
    for (v_g, t_p, start) in [(p.program_v, p.program_t_p, w.v_t_min), (p.erase_v, p.erase_t_p, w.v_t_max)] {
        let traj = d.vt_trajectory(&d.state_at(start)?, &PulseSpec::new(v_g, t_p, p.n_pulses))?;
        rows.extend(traj.iter().enumerate().map(|(i, &v)| vec![i.to_string(), num(v_g), num(t_p), num(v), num(w.g_norm(v))]));
    }
    out.csv("fig2a_trajectories.csv", &["pulse_index", "v_g", "t_p", "v_t", "g_norm"], rows)?;
    let traverse = |v_g, t_p| d.pulses_to_traverse(v_g, t_p, 10 * p.n_pulses);
    out.json(
        "fig2a_summary.json",
        &json!({
            "program_pulses_to_traverse": traverse(p.program_v, p.program_t_p)?,
            "erase_pulses_to_traverse": traverse(p.erase_v, p.erase_t_p)?,
        }),
    )
}

/// `fig2b_ranges.csv`: branch, v_g, t_p, range_V; `fig2b_thresholds.json`.
pub fn fig2b(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let d = device(cfg)?;
    let p = &cfg.pulses;
    let w = d.window();
    let sweep = |volts: &[f64], t_p: f64, start: f64| -> Result<Vec<(f64, f64)>> {
        volts.iter().map(|&v| Ok((v, d.write_range(start, &PulseSpec::new(v, t_p, p.n_pulses))?))).collect()
    };
    let prog = sweep(&p.program_sweep, p.program_t_p, w.v_t_min)?;
    let erase = sweep(&p.erase_sweep, p.erase_t_p, w.v_t_max)?;
    let rows = prog
        .iter()
        .map(|&(v, r)| ("program", v, p.program_t_p, r))
        .chain(erase.iter().map(|&(v, r)| ("erase", v, p.erase_t_p, r)))
        .map(|(b, v, t, r)| vec![b.to_string(), num(v), num(t), num(r)]);
    out.csv("fig2b_ranges.csv", &["branch", "v_g", "t_p", "range_V"], rows)?;
    let th_p = extract_write_threshold(&prog).context("program threshold")?;
    let th_e = extract_write_threshold(&erase).context("erase threshold")?;
    out.json("fig2b_thresholds.json", &json!({ "program_threshold_V": th_p, "erase_threshold_V": th_e }))
}

/// `fig2c_levels.csv`: branch, v_g, t_p, n_levels, learning_rate.
pub fn fig2c(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let d = device(cfg)?;
    let p = &cfg.pulses;
    let w = d.window();
    let mut rows = Vec::new();
    for (branch, v_g, widths, start) in
        [("program", p.program_v, &p.program_widths, w.v_t_min), ("erase", p.erase_v, &p.erase_widths, w.v_t_max)]
    {
        for &t_p in widths {
            let n = ((p.level_time / t_p) as usize).min(p.max_level_pulses);
            let traj = d.vt_trajectory(&d.state_at(start)?, &PulseSpec::new(v_g, t_p, n))?;
            let l = levels_and_learning_rate(&traj, w).with_context(|| format!("{branch} at t_p = {t_p} s"))?;
            rows.push(vec![branch.to_string(), num(v_g), num(t_p), l.n_levels.to_string(), num(l.rate)]);
        }
    }
    out.csv("fig2c_levels.csv", &["branch", "v_g", "t_p", "n_levels", "learning_rate"], rows)
}

/// `fig3b_gate_current.csv`: branch, v_g, v_t, i_gate_A across the window;
/// `fig3b_summary.json` with the mid-window values.
pub fn fig3b(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let d = device(cfg)?;
    let p = &cfg.pulses;
    let w = d.window();
    let n = p.gate_current_points.max(2);
    let mut rows = Vec::new();
    for (branch, v_g) in [("program", p.program_v), ("erase", p.erase_v)] {
        for k in 0..n {
            let v_t = w.v_t_min + w.range() * k as f64 / (n - 1) as f64;
            rows.push(vec![branch.to_string(), num(v_g), num(v_t), num(d.gate_current(v_g, v_t))]);
        }
    }
    out.csv("fig3b_gate_current.csv", &["branch", "v_g", "v_t", "i_gate_A"], rows)?;
    let mid = 0.5 * (w.v_t_min + w.v_t_max);
    let c = &cfg.calibrate;
    let (i_p, i_e) = (d.gate_current(p.program_v, mid).abs(), d.gate_current(p.erase_v, mid).abs());
    out.json(
        "fig3b_summary.json",
        &json!({
            "v_t_mid": mid,
            "program_current_A": i_p,
            "erase_current_A": i_e,
            "program_target_A": c.i_program,
            "erase_target_A": c.i_erase,
            "program_ratio": i_p / c.i_program,
            "erase_ratio": i_e / c.i_erase,
        }),
    )
}

/// `calibration.json` (constants and residual rows) and `calibration_residuals.csv`.
/// Fails with the residual table when the required targets are not met.
pub fn calibrate(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let report = run_calibration(cfg.device, &cfg.calibrate)?;
    out.csv(
        "calibration_residuals.csv",
        &["target", "wanted", "achieved", "residual", "required", "pass"],
        report.rows.iter().map(|r| {
            vec![r.name.clone(), num(r.target), num(r.achieved), num(r.residual), r.required.to_string(), r.pass.to_string()]
        }),
    )?;
    out.json("calibration.json", &report)
}
