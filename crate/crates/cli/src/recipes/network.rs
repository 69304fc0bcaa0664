use anyhow::{Context, Result};
use ctfsyn::circuit::{dc_solve, iv_sweep, write_energy, MosfetMode, MosfetModel, Substrate};
use ctfsyn::device::CtfDevice;
use ctfsyn::seed;
use ctfsyn::snn::{noise_robustness, run_seeds, IrisData, RuleSpec};
use ctfsyn::waveform::{dt_grid, render, stdp_curve};
use serde_json::json;

use super::{num, Outputs};
use crate::config::ExperimentConfig;

/// `fig4_stdp.csv`: dt_s, v_peak_V, dg_norm; `fig4_waveforms.csv`: waveform, t_s, v_V.
pub fn fig4(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let d = CtfDevice::new(cfg.device)?;
    let s = &cfg.stdp;
    let pts = stdp_curve(&d, &s.drive, &dt_grid(s.dt_min, s.dt_max, s.n_points))?;
    out.csv("fig4_stdp.csv", &["dt_s", "v_peak_V", "dg_norm"], pts.iter().map(|p| vec![num(p.dt), num(p.v_peak), num(p.dg_norm)]))?;
    let (pre, post) = s.drive.render()?;
    let rows = [("pre", &pre), ("post", &post)]
        .into_iter()
        .flat_map(|(name, w)| w.samples().map(move |(t, v)| vec![name.to_string(), num(t), num(v)]))
        .collect::<Vec<_>>();
    out.csv("fig4_waveforms.csv", &["waveform", "t_s", "v_V"], rows)
}

/// `fig6_iv.csv`: topology, v_d_V, i_d_A; `fig6_read.csv`: v_t_V, v_d_V, i_d_A
/// for the selector cell in read mode; `fig6_energy.json`.
pub fn fig6(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let c = &cfg.circuit;
    let mut rows = Vec::new();
    for stack in c.topologies() {
        let name = stack.topology.name();
        let pts = iv_sweep(&stack, c.v_start, c.v_stop, c.v_step, c.sweep_v_g).with_context(|| format!("{name} sweep"))?;
        rows.extend(pts.into_iter().map(|(v, i)| vec![name.to_string(), num(v), num(i)]));
    }
    out.csv("fig6_iv.csv", &["topology", "v_d_V", "i_d_A"], rows)?;

    let mut read = Vec::new();
    for &v_t in &c.read_v_ts {
        let mosfet = MosfetModel { v_t, mode: MosfetMode::VtDependent, ..c.mosfet };
        let stack = c.stack_of(true, Substrate::Soi).with_mosfet(mosfet);
        let pts = iv_sweep(&stack, c.v_start, c.v_stop, c.v_step, c.read_v_g)?;
        read.extend(pts.into_iter().map(|(v, i)| vec![num(v_t), num(v), num(i)]));
    }
    out.csv("fig6_read.csv", &["v_t_V", "v_d_V", "i_d_A"], read)?;

    let post = render(&c.post, c.dt_sample)?;
    let energies = c
        .topologies()
        .iter()
        .map(|s| {
            let e = write_energy(s, &post, c.write_v_g, &c.essential)?;
            Ok(json!({
                "topology": s.topology.name(),
                "e_parasitic_J": e.e_parasitic,
                "e_essential_J": e.e_essential,
                "e_total_J": e.e_total,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let bare = c.stack_of(false, Substrate::Bulk);
    let sel = c.stack_of(true, Substrate::Soi);
    let mut ratio = f64::INFINITY;
    let n = ((c.v_stop - c.v_start) / c.v_step).round() as i64;
    for k in 0..=n {
        let v = c.v_start + k as f64 * c.v_step;
        if v.abs() >= 6.0 || v == 0.0 {
            continue;
        }
        let a = dc_solve(&bare, v, c.sweep_v_g, None)?.i_d.abs();
        let b = dc_solve(&sel, v, c.sweep_v_g, None)?.i_d.abs();
        ratio = ratio.min(a / b);
    }
    out.json(
        "fig6_energy.json",
        &json!({
            "write_v_g": c.write_v_g,
            "topologies": energies,
            "min_leakage_ratio_1F0D_bulk_over_1F2D_soi": ratio,
        }),
    )
}

fn rule_spec(cfg: &ExperimentConfig, name: &str) -> RuleSpec {
    match name {
        "ideal" => RuleSpec::Ideal(cfg.snn.ideal),
        "behavioral" => RuleSpec::Behavioral(cfg.plasticity),
        _ => RuleSpec::Ctf { device: cfg.device, drive: cfg.snn.drive },
    }
}

/// `fig7_accuracy.csv`: rule, epoch, seed, accuracy (epoch 0 is untrained);
/// `fig7_summary.json`.
pub fn fig7(cfg: &ExperimentConfig, master: u64, out: &mut Outputs) -> Result<()> {
    let s = &cfg.snn;
    let data = if s.iris_path.is_empty() { IrisData::embedded() } else { IrisData::load(s.iris_path.as_ref())? };
    let seeds: Vec<u64> = (0..s.seeds as u64).map(|k| seed::child(master, "fig7", k)).collect();
    let noise_seeds: Vec<u64> = (0..s.noise_seeds as u64).map(|k| seed::child(master, "fig7-noise", k)).collect();
    let mut rows = Vec::new();
    let mut summary = serde_json::Map::new();
    for name in &s.rules {
        let runs = run_seeds(&s.net, &rule_spec(cfg, name), &data, &seeds)?;
        let mut deltas = Vec::new();
        for r in &runs {
            rows.push(vec![name.clone(), "0".into(), r.seed.to_string(), num(r.initial)]);
            for (e, a) in r.trace.iter().enumerate() {
                rows.push(vec![name.clone(), (e + 1).to_string(), r.seed.to_string(), num(*a)]);
            }
            deltas.push(noise_robustness(&r.network, &r.test, s.noise_sigma, &noise_seeds)?.mean_abs_delta);
        }
        let mean = |xs: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = xs.collect();
            if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 }
        };
        summary.insert(
            name.clone(),
            json!({
                "mean_initial_accuracy": mean(&mut runs.iter().map(|r| r.initial)),
                "mean_final_accuracy": mean(&mut runs.iter().map(|r| r.final_accuracy())),
                "final_accuracy": runs.iter().map(|r| r.final_accuracy()).collect::<Vec<_>>(),
                "noise_sigma_over_range": s.noise_sigma,
                "noise_mean_abs_delta": mean(&mut deltas.iter().copied()),
            }),
        );
    }
    out.csv("fig7_accuracy.csv", &["rule", "epoch", "seed", "accuracy"], rows)?;
    out.json("fig7_summary.json", &json!({ "seeds": seeds, "epochs": s.net.epochs, "rules": summary }))
}
