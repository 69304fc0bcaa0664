//! One line per acceptance criterion; exits nonzero if any fails.
//! Run with `cargo test -p ctfsyn --test acceptance`.

use std::time::Instant;

use ctfsyn::circuit::{
    dc_solve, essential_write_energy, iv_sweep_solutions, tolerance, write_energy, CellTopology, CircuitStack,
    EssentialWrite, MosfetMode, MosfetModel, Substrate,
};
use ctfsyn::device::{extract_write_threshold, levels_and_learning_rate, CtfDevice, PulseSpec};
use ctfsyn::plasticity::{delta_g, fit, generate, update, Branch, FitOptions, PlasticityParams};
use ctfsyn::snn::{noise_robustness, run_seed, run_seeds, IrisData, IdealRule, RuleSpec, SeedRun, SnnConfig};
use ctfsyn::waveform::{dt_grid, render, stdp_curve, vpeak_curve, StdpDrive, WaveformTemplate};

/// Ideal-synapse mean final accuracy over seeds 0..20 with the default
/// network, recorded on the first run and kept as a regression value.
const FROZEN_IDEAL_BASELINE: f64 = 0.877;

type Check = Result<String, String>;

fn pass_if(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac1(d: &CtfDevice) -> Check {
    let t = Instant::now();
    let p = d.pulses_to_traverse(12.5, 1e-3, 5000).map_err(|e| e.to_string())?;
    let e = d.pulses_to_traverse(-14.5, 20e-3, 5000).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let ok = |n: Option<usize>| n.is_some_and(|n| (800..=1200).contains(&n));
    pass_if(ok(p) && ok(e) && secs < 10.0, format!("program {p:?} pulses, erase {e:?} pulses, {secs:.2} s"))
}

fn ac2(d: &CtfDevice) -> Check {
    let w = d.window();
    let sweep = |volts: &[f64], t_p: f64, start: f64| -> Result<f64, String> {
        let pts: Vec<(f64, f64)> = volts
            .iter()
            .map(|&v| d.write_range(start, &PulseSpec::new(v, t_p, 1000)).map(|r| (v, r)).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        extract_write_threshold(&pts).map_err(|e| e.to_string())
    };
    let p = sweep(&[10.5, 11.0, 11.5, 12.0, 12.5], 1e-3, w.v_t_min)?;
    let e = sweep(&[-12.5, -13.0, -13.5, -14.0, -14.5], 20e-3, w.v_t_max)?;
    pass_if((p - 9.8).abs() <= 0.5 && (e + 11.5).abs() <= 0.5, format!("program {p:.4} V, erase {e:.4} V"))
}

fn ac3(d: &CtfDevice) -> Check {
    let w = d.window();
    let mut best = 0usize;
    let mut monotone = true;
    for (v_g, widths, start) in [
        (12.5, [1e-3, 0.5e-3, 0.25e-3, 0.125e-3, 0.0625e-3], w.v_t_min),
        (-14.5, [20e-3, 10e-3, 5e-3, 2.5e-3, 1.25e-3], w.v_t_max),
    ] {
        let mut prev = 0;
        for t_p in widths {
            let n = ((30.0 / t_p) as usize).min(60_000);
            let traj = d.vt_trajectory(&d.state_at(start).map_err(|e| e.to_string())?, &PulseSpec::new(v_g, t_p, n)).map_err(|e| e.to_string())?;
            let l = levels_and_learning_rate(&traj, w).map_err(|e| e.to_string())?;
            monotone &= l.n_levels >= prev;
            prev = l.n_levels;
            if l.rate < 0.01 {
                best = best.max(l.n_levels);
            }
        }
    }
    pass_if(best >= 10_000 && monotone, format!("max levels at <1% rate: {best}, monotone across widths: {monotone}"))
}

fn ac4() -> Check {
    let lo = essential_write_energy(12.5, 0.47e-9, 1e-3, 1e6).map_err(|e| e.to_string())? * 1e18;
    let hi = essential_write_energy(-14.5, 2.34e-9, 20e-3, 1e6).map_err(|e| e.to_string())? * 1e18;
    let ok = ((lo - 5.64) / 5.64).abs() <= 0.1 && ((hi - 646.80) / 646.80).abs() <= 0.1;
    pass_if(ok, format!("{lo:.3} aJ vs 5.64, {hi:.2} aJ vs 646.80"))
}

fn ac5(d: &CtfDevice) -> Check {
    let h = 1e-4;
    let pre = render(&WaveformTemplate::gate(), h).map_err(|e| e.to_string())?;
    let post = render(&WaveformTemplate::drain(), h).map_err(|e| e.to_string())?;
    let c = vpeak_curve(&pre, &post, &[-h, h]);
    let exact = c[0].1 == 12.5 && c[1].1 == -14.5;
    let pts = stdp_curve(d, &StdpDrive::default(), &dt_grid(-20e-3, 20e-3, 41)).map_err(|e| e.to_string())?;
    let signs = pts.iter().all(|p| p.dt == 0.0 || (p.dg_norm * p.dt.signum() > 0.0));
    let mut ltd: Vec<_> = pts.iter().filter(|p| p.dt < 0.0).collect();
    ltd.reverse();
    let ltp: Vec<_> = pts.iter().filter(|p| p.dt > 0.0).collect();
    let shrinks = |b: &[&ctfsyn::waveform::StdpPoint]| b.windows(2).all(|w| w[1].dg_norm.abs() <= w[0].dg_norm.abs());
    pass_if(
        exact && signs && shrinks(&ltd) && shrinks(&ltp) && pts.len() == 41,
        format!("v_peak(-h) = {}, v_peak(+h) = {}, sign pattern {signs}, branch monotone {}", c[0].1, c[1].1, shrinks(&ltd) && shrinks(&ltp)),
    )
}

fn ac6() -> Check {
    let e = |r: ctfsyn::error::Result<f64>| r.map_err(|e| e.to_string());
    let bare = CircuitStack::new(CellTopology::new(false, Substrate::Bulk));
    let sel = CircuitStack::new(CellTopology::new(true, Substrate::Soi));
    let mut ratio = f64::INFINITY;
    for k in -599..=599 {
        if k == 0 {
            continue;
        }
        let v = k as f64 * 0.01;
        let a = e(dc_solve(&bare, v, 0.0, None).map(|s| s.i_d.abs()))?;
        let b = e(dc_solve(&sel, v, 0.0, None).map(|s| s.i_d.abs()))?;
        ratio = ratio.min(a / b);
    }
    let wave = render(&WaveformTemplate::drain(), 1e-4).map_err(|e| e.to_string())?;
    let energy = write_energy(&sel, &wave, 9.8, &EssentialWrite::default()).map_err(|e| e.to_string())?.e_total;
    let mut ordered = true;
    for v_d in [-6.5, -7.0, -8.0] {
        let mut prev = f64::INFINITY;
        for v_t in [-1.3, -1.05, -0.8, -0.55, -0.3] {
            let m = MosfetModel { v_t, mode: MosfetMode::VtDependent, ..MosfetModel::default() };
            let i = e(dc_solve(&sel.with_mosfet(m), v_d, 0.2, None).map(|s| s.i_d.abs()))?;
            ordered &= i < prev;
            prev = i;
        }
    }
    pass_if(
        ratio >= 1e6 && energy <= 3e-15 && ordered,
        format!("min leakage ratio {ratio:.3e}, 1F2D-SOI write {:.3} fJ, read ordered by V_T {ordered}", energy * 1e15),
    )
}

fn ac7() -> Check {
    let p = PlasticityParams::default();
    let endpoints = delta_g(&p, 0.0, 0.0, Branch::Ltp) == 0.07 && delta_g(&p, 1.0, 0.0, Branch::Ltd) == -0.14;
    let truth = PlasticityParams { dg_max_ltp: 0.05, dg_max_ltd: -0.09, tau_ltp: 0.8, tau_ltd: 1.6, a1: 5.0, a2: 3.5, ..p };
    let g: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let r = fit(&generate(&truth, &g, &[-2.0, -1.2, -0.6, -0.2, 0.1, 0.4, 0.9, 1.5, 2.5]), &FitOptions::default()).map_err(|e| e.to_string())?;
    let q = r.params;
    let worst = [
        (q.dg_max_ltp, truth.dg_max_ltp),
        (q.dg_max_ltd, truth.dg_max_ltd),
        (q.tau_ltp, truth.tau_ltp),
        (q.tau_ltd, truth.tau_ltd),
        (q.a1, truth.a1),
        (q.a2, truth.a2),
    ]
    .iter()
    .map(|(a, b)| ((a - b) / b).abs())
    .fold(0.0, f64::max);
    pass_if(endpoints && worst < 0.01, format!("endpoints exact {endpoints}, worst parameter error {:.2e}", worst))
}

fn mean_final(runs: &[SeedRun]) -> f64 {
    runs.iter().map(|r| r.final_accuracy()).sum::<f64>() / runs.len() as f64
}

fn ac8() -> Check {
    let t = Instant::now();
    let data = IrisData::embedded();
    let cfg = SnnConfig::default();
    let seeds: Vec<u64> = (0..20).collect();
    let ideal = run_seeds(&cfg, &RuleSpec::Ideal(IdealRule::default()), &data, &seeds).map_err(|e| e.to_string())?;
    let ctf = run_seeds(&cfg, &RuleSpec::ctf_default(), &data, &seeds).map_err(|e| e.to_string())?;
    let (a_ideal, a_ctf) = (mean_final(&ideal), mean_final(&ctf));
    let noise_seeds: Vec<u64> = (1000..1020).collect();
    let mut noise = 0.0f64;
    for r in &ctf {
        let rep = noise_robustness(&r.network, &r.test, 0.001, &noise_seeds).map_err(|e| e.to_string())?;
        noise = noise.max(rep.mean_abs_delta);
    }
    let secs = t.elapsed().as_secs_f64();
    let ok = (a_ctf - a_ideal).abs() <= 0.03
        && a_ideal >= 0.85
        && (a_ideal - FROZEN_IDEAL_BASELINE).abs() < 0.005
        && noise <= 0.01
        && secs < 180.0;
    pass_if(
        ok,
        format!("ideal {a_ideal:.3} (frozen {FROZEN_IDEAL_BASELINE}), ctf {a_ctf:.3}, worst noise shift {noise:.4}, {secs:.1} s"),
    )
}

/// Charge conservation against a fixed-step RK4 replay, Newton residuals on the
/// golden sweeps, soft-bound fixed points, and seeded determinism.
fn ac9(d: &CtfDevice) -> Check {
    let mut fails = Vec::new();
    for (v_g, t_p, v_t) in [(12.5, 1e-3, -1.3), (-14.5, 20e-3, -0.3), (11.0, 2e-3, -0.8)] {
        let q0 = d.charge_of_v_t(v_t);
        let h = t_p / 4000.0;
        let mut q = q0;
        for _ in 0..4000 {
            let k1 = d.charge_rate(v_g, q);
            let k2 = d.charge_rate(v_g, q + 0.5 * h * k1);
            let k3 = d.charge_rate(v_g, q + 0.5 * h * k2);
            let k4 = d.charge_rate(v_g, q + h * k3);
            q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let got = d.integrate_charge(q0, v_g, t_p).map_err(|e| e.to_string())?;
        if ((got - q0) / (q - q0) - 1.0).abs() > 1e-4 {
            fails.push(format!("charge at {v_g} V"));
        }
    }
    for t in CellTopology::all() {
        let sols = iv_sweep_solutions(&CircuitStack::new(t), -8.0, 8.0, 0.01, 0.0).map_err(|e| e.to_string())?;
        if sols.iter().any(|s| s.residual > tolerance(s.max_branch_current()) || s.iterations >= 50) {
            fails.push(format!("residual on {}", t.name()));
        }
    }
    let p = PlasticityParams::default();
    let (mut up, mut down) = (0.5, 0.5);
    for _ in 0..20_000 {
        up = update(&p, up, 0.0, Branch::Ltp);
        down = update(&p, down, 0.0, Branch::Ltd);
    }
    let up_fixed = (update(&p, up, 0.0, Branch::Ltp) - up).abs() < 1e-5 && up <= 1.0;
    let down_fixed = (update(&p, down, 0.0, Branch::Ltd) - down).abs() < 1e-5 && down >= 0.0;
    if !(up_fixed && down_fixed) {
        fails.push(format!("soft bounds ({up}, {down})"));
    }
    let data = IrisData::embedded();
    let cfg = SnnConfig { epochs: 3, ..SnnConfig::default() };
    let a = run_seed(&cfg, &RuleSpec::ctf_default(), &data, 5).map_err(|e| e.to_string())?;
    let b = run_seed(&cfg, &RuleSpec::ctf_default(), &data, 5).map_err(|e| e.to_string())?;
    if a.trace != b.trace || a.network.weights() != b.network.weights() {
        fails.push("determinism".into());
    }
    pass_if(fails.is_empty(), if fails.is_empty() { "charge, residual, soft-bound and determinism checks hold".into() } else { fails.join(", ") })
}

fn main() {
    let d = CtfDevice::default();
    let checks: [(&str, Box<dyn Fn() -> Check>); 9] = [
        ("AC1 window traversal", Box::new(|| ac1(&d))),
        ("AC2 write thresholds", Box::new(|| ac2(&d))),
        ("AC3 level count", Box::new(|| ac3(&d))),
        ("AC4 essential energy", Box::new(ac4)),
        ("AC5 STDP curve", Box::new(|| ac5(&d))),
        ("AC6 selector circuit", Box::new(ac6)),
        ("AC7 behavioral model", Box::new(ac7)),
        ("AC8 SNN accuracy", Box::new(ac8)),
        ("AC9 invariant suite", Box::new(|| ac9(&d))),
    ];
    let mut failed = 0;
    for (name, f) in checks.iter() {
        match f() {
            Ok(detail) => println!("{name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("{name}: FAIL ({detail})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
