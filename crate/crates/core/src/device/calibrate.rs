use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use super::{extract_write_threshold, CtfDevice, DeviceParams, FnParams, PulseSpec};
use crate::error::{ensure, Error, Result};

/// What the calibrated device has to reproduce.  Counts and thresholds are
/// matched within an absolute tolerance, gate currents within a factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub program_pulse: (f64, f64),
    pub erase_pulse: (f64, f64),
    pub traversal_pulses: f64,
    pub traversal_tol: f64,
    pub program_sweep: Vec<f64>,
    pub erase_sweep: Vec<f64>,
    pub v_th_program: f64,
    pub v_th_erase: f64,
    pub v_th_tol: f64,
    pub i_program: f64,
    pub i_erase: f64,
    pub current_factor: f64,
    /// Whether the gate-current rows must pass for calibration to succeed.
    pub gate_currents_required: bool,
    pub max_iterations: u64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            program_pulse: (12.5, 1e-3),
            erase_pulse: (-14.5, 20e-3),
            traversal_pulses: 1000.0,
            traversal_tol: 200.0,
            program_sweep: vec![10.5, 11.0, 11.5, 12.0, 12.5],
            erase_sweep: vec![-12.5, -13.0, -13.5, -14.0, -14.5],
            v_th_program: 9.8,
            v_th_erase: -11.5,
            v_th_tol: 0.5,
            i_program: 0.47e-9,
            i_erase: 2.34e-9,
            current_factor: 2.0,
            gate_currents_required: false,
            max_iterations: 400,
        }
    }
}

impl CalibrationTargets {
    pub fn validate(&self) -> Result<()> {
        ensure(self.program_pulse.0 > 0.0 && self.program_pulse.1 > 0.0, "program_pulse", || {
            format!("needs v_g > 0 and t_p > 0, got {:?}", self.program_pulse)
        })?;
        ensure(self.erase_pulse.0 < 0.0 && self.erase_pulse.1 > 0.0, "erase_pulse", || {
            format!("needs v_g < 0 and t_p > 0, got {:?}", self.erase_pulse)
        })?;
        ensure(self.traversal_pulses >= 1.0, "traversal_pulses", || format!("must be >= 1, got {}", self.traversal_pulses))?;
        for (name, v) in [("traversal_tol", self.traversal_tol), ("v_th_tol", self.v_th_tol)] {
            ensure(v > 0.0, name, || format!("must be > 0, got {v}"))?;
        }
        ensure(self.current_factor > 1.0, "current_factor", || format!("must be > 1, got {}", self.current_factor))?;
        ensure(self.program_sweep.len() >= 2, "program_sweep", || "needs at least 2 voltages".into())?;
        ensure(self.erase_sweep.len() >= 2, "erase_sweep", || "needs at least 2 voltages".into())
    }

    fn pulse_budget(&self) -> usize {
        (self.traversal_pulses + 3.0 * self.traversal_tol).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub name: String,
    pub target: f64,
    pub achieved: f64,
    /// Deviation in units of the tolerance; |residual| <= 1 passes.
    pub residual: f64,
    pub required: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub fn_params: FnParams,
    pub rows: Vec<CalibrationRow>,
    pub evaluations: u64,
}

impl CalibrationReport {
    pub fn converged(&self) -> bool {
        self.rows.iter().all(|r| r.pass || !r.required)
    }

    pub fn table(&self) -> String {
        let mut s = String::from("target                 wanted        achieved      residual  required  pass\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<22} {:<13.6e} {:<13.6e} {:>+8.3}  {:<8}  {}\n",
                r.name, r.target, r.achieved, r.residual, r.required, r.pass
            ));
        }
        s
    }
}

fn row(name: &str, target: f64, achieved: f64, residual: f64, required: bool) -> CalibrationRow {
    CalibrationRow { name: name.into(), target, achieved, residual, required, pass: residual.abs() <= 1.0 }
}

/// Measure every calibration quantity on `device`.
pub fn evaluate_targets(device: &CtfDevice, t: &CalibrationTargets) -> Result<Vec<CalibrationRow>> {
    t.validate()?;
    let w = device.window();
    let budget = t.pulse_budget();
    let count = |(v_g, t_p): (f64, f64)| -> Result<f64> {
        Ok(device.pulses_to_traverse(v_g, t_p, budget)?.map_or(f64::INFINITY, |n| n as f64))
    };
    let threshold = |volts: &[f64], t_p: f64, start: f64| -> Result<f64> {
        let pts = volts
            .iter()
            .map(|&v| Ok((v, device.write_range(start, &PulseSpec::new(v, t_p, t.traversal_pulses as usize))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(extract_write_threshold(&pts).unwrap_or(f64::NAN))
    };
    let n_p = count(t.program_pulse)?;
    let n_e = count(t.erase_pulse)?;
    let th_p = threshold(&t.program_sweep, t.program_pulse.1, w.v_t_min)?;
    let th_e = threshold(&t.erase_sweep, t.erase_pulse.1, w.v_t_max)?;
    let mid = 0.5 * (w.v_t_min + w.v_t_max);
    let i_p = device.gate_current(t.program_pulse.0, mid).abs();
    let i_e = device.gate_current(t.erase_pulse.0, mid).abs();
    let log_ratio = |i: f64, target: f64| (i / target).ln() / t.current_factor.ln();
    let nan_to_inf = |r: f64| if r.is_nan() { f64::INFINITY } else { r };
    Ok(vec![
        row("program_traversal", t.traversal_pulses, n_p, (n_p - t.traversal_pulses) / t.traversal_tol, true),
        row("erase_traversal", t.traversal_pulses, n_e, (n_e - t.traversal_pulses) / t.traversal_tol, true),
        row("program_threshold_V", t.v_th_program, th_p, nan_to_inf((th_p - t.v_th_program) / t.v_th_tol), true),
        row("erase_threshold_V", t.v_th_erase, th_e, nan_to_inf((th_e - t.v_th_erase) / t.v_th_tol), true),
        row("program_gate_current_A", t.i_program, i_p, nan_to_inf(log_ratio(i_p, t.i_program)), t.gate_currents_required),
        row("erase_gate_current_A", t.i_erase, i_e, nan_to_inf(log_ratio(i_e, t.i_erase)), t.gate_currents_required),
    ])
}

const SCALE: f64 = 1e10;

fn encode(p: &FnParams) -> Vec<f64> {
    vec![p.a_tox.ln(), p.b_tox / SCALE, p.a_box.ln(), p.b_box / SCALE]
}

fn decode(x: &[f64]) -> FnParams {
    FnParams { a_tox: x[0].exp(), b_tox: x[1] * SCALE, a_box: x[2].exp(), b_box: x[3] * SCALE }
}

struct Objective<'a> {
    base: DeviceParams,
    targets: &'a CalibrationTargets,
}

impl Objective<'_> {
    fn rows(&self, fn_params: FnParams) -> Result<Vec<CalibrationRow>> {
        let device = CtfDevice::new(DeviceParams { fn_params, ..self.base })?;
        evaluate_targets(&device, self.targets)
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let Ok(rows) = self.rows(decode(x)) else { return Ok(1e12) };
        let cost = rows.iter().filter(|r| r.required).map(|r| r.residual.min(1e6).powi(2)).sum::<f64>();
        Ok(if cost.is_finite() { cost } else { 1e12 })
    }
}

/// Tune the four FN constants of `base` until every required target passes.
/// Starts from `base.fn_params` and returns at once if it already qualifies.
pub fn calibrate(base: DeviceParams, targets: &CalibrationTargets) -> Result<CalibrationReport> {
    targets.validate()?;
    let obj = Objective { base, targets };
    let start = CalibrationReport { fn_params: base.fn_params, rows: obj.rows(base.fn_params)?, evaluations: 1 };
    if start.converged() {
        return Ok(start);
    }
    let x0 = encode(&base.fn_params);
    let steps = [0.7, 0.05, 0.7, 0.05];
    let mut simplex = vec![x0.clone()];
    for (k, s) in steps.iter().enumerate() {
        let mut v = x0.clone();
        v[k] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .map_err(|e| Error::Calibration(e.to_string()))?;
    let res = Executor::new(Objective { base, targets }, solver)
        .configure(|s| s.max_iters(targets.max_iterations))
        .run()
        .map_err(|e| Error::Calibration(e.to_string()))?;
    let state = res.state();
    let best = decode(state.best_param.as_ref().ok_or_else(|| Error::Calibration("no candidate evaluated".into()))?);
    let evaluations = state.counts.get("cost_count").copied().unwrap_or(0) + 1;
    let report = CalibrationReport { fn_params: best, rows: obj.rows(best)?, evaluations };
    if report.converged() {
        Ok(report)
    } else {
        Err(Error::Calibration(format!("targets not met after {} evaluations\n{}", report.evaluations, report.table())))
    }
}
