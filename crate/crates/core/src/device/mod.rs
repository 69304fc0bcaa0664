//! Charge-trap-flash gate stack: electrostatics, Fowler-Nordheim charge
//! transport and the threshold-voltage / conductance bookkeeping built on it.

mod analysis;
mod calibrate;
mod integrate;
mod stack;

use serde::{Deserialize, Serialize};

pub use analysis::{
    conductance, electron_statistics, extract_write_threshold, inject_vt_noise, levels_and_learning_rate,
    Conductance, ConductanceMap, ElectronStatistics, Levels,
};
pub use calibrate::{calibrate, evaluate_targets, CalibrationReport, CalibrationRow, CalibrationTargets};
pub use integrate::{integrate, Tolerance};
pub use stack::{fn_current_density, solve_stack_fields, StackFields, StackGeometry, EPS0};

use crate::error::{ensure, Error, Result};

/// Fowler-Nordheim prefactors (A/V²) and exponents (V/m) for both oxides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FnParams {
    pub a_tox: f64,
    pub b_tox: f64,
    pub a_box: f64,
    pub b_box: f64,
}

impl Default for FnParams {
    /// Constants calibrated against the default stack and window.
    fn default() -> Self {
        Self { a_tox: 4.3335e-17, b_tox: 1.10852e10, a_box: 271.587, b_box: 3.17909e10 }
    }
}

impl FnParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a_tox", self.a_tox), ("b_tox", self.b_tox), ("a_box", self.a_box), ("b_box", self.b_box)] {
            ensure(v.is_finite() && v > 0.0, name, || format!("must be > 0, got {v}"))?;
        }
        Ok(())
    }
}

/// Threshold-voltage operating window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub v_t_min: f64,
    pub v_t_max: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self { v_t_min: -1.3, v_t_max: -0.3 }
    }
}

impl Window {
    pub fn range(&self) -> f64 {
        self.v_t_max - self.v_t_min
    }

    pub fn contains(&self, v_t: f64) -> bool {
        (self.v_t_min..=self.v_t_max).contains(&v_t)
    }

    pub fn clamp(&self, v_t: f64) -> f64 {
        v_t.clamp(self.v_t_min, self.v_t_max)
    }

    /// Normalized conductance of a threshold voltage: 1 at `v_t_min`, 0 at `v_t_max`.
    pub fn g_norm(&self, v_t: f64) -> f64 {
        (self.v_t_max - v_t) / self.range()
    }

    pub fn v_t_of_g_norm(&self, g: f64) -> f64 {
        self.v_t_max - g * self.range()
    }
}

/// Stored charge of one device and the threshold voltage it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapState {
    /// Areal trapped charge, C/m²; stored electrons make it negative.
    pub q_trap: f64,
    pub v_t: f64,
    pub v_t_min: f64,
    pub v_t_max: f64,
}

impl TrapState {
    pub fn window(&self) -> Window {
        Window { v_t_min: self.v_t_min, v_t_max: self.v_t_max }
    }

    pub fn g_norm(&self) -> f64 {
        self.window().g_norm(self.v_t)
    }
}

/// A train of identical rectangular gate pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub v_g: f64,
    pub t_p: f64,
    pub n_pulses: usize,
}

impl PulseSpec {
    pub fn new(v_g: f64, t_p: f64, n_pulses: usize) -> Self {
        Self { v_g, t_p, n_pulses }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.v_g.is_finite(), "v_g", || format!("must be finite, got {}", self.v_g))?;
        ensure(self.t_p.is_finite() && self.t_p >= 0.0, "t_p", || format!("must be >= 0, got {}", self.t_p))
    }
}

/// A calibrated CTF device: stack, tunneling constants and V_T bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct CtfDevice {
    geom: StackGeometry,
    fn_params: FnParams,
    /// Threshold voltage with no trapped charge.
    v_t_neutral: f64,
    window: Window,
    rtol: f64,
    s_gate: f64,
    s_channel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub geom: StackGeometry,
    pub fn_params: FnParams,
    pub v_t_neutral: f64,
    pub window: Window,
    pub rtol: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            geom: StackGeometry::default(),
            fn_params: FnParams::default(),
            v_t_neutral: 1.43685,
            window: Window::default(),
            rtol: 1e-6,
        }
    }
}

impl Default for CtfDevice {
    fn default() -> Self {
        Self::new(DeviceParams::default()).expect("default device parameters are valid")
    }
}

impl CtfDevice {
    pub fn new(p: DeviceParams) -> Result<Self> {
        p.geom.validate()?;
        p.fn_params.validate()?;
        ensure(p.v_t_neutral.is_finite(), "v_t_neutral", || "must be finite".into())?;
        ensure(p.window.v_t_max > p.window.v_t_min, "window", || {
            format!("v_t_max ({}) must exceed v_t_min ({})", p.window.v_t_max, p.window.v_t_min)
        })?;
        ensure(p.rtol > 0.0 && p.rtol < 1e-2, "rtol", || format!("must lie in (0, 1e-2), got {}", p.rtol))?;
        let (s_gate, s_channel) = p.geom.elastances();
        Ok(Self {
            geom: p.geom,
            fn_params: p.fn_params,
            v_t_neutral: p.v_t_neutral,
            window: p.window,
            rtol: p.rtol,
            s_gate,
            s_channel,
        })
    }

    pub fn params(&self) -> DeviceParams {
        DeviceParams {
            geom: self.geom,
            fn_params: self.fn_params,
            v_t_neutral: self.v_t_neutral,
            window: self.window,
            rtol: self.rtol,
        }
    }

    pub fn geometry(&self) -> &StackGeometry {
        &self.geom
    }

    pub fn fn_params(&self) -> &FnParams {
        &self.fn_params
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn v_t_of_charge(&self, q: f64) -> f64 {
        self.v_t_neutral - q * self.s_gate
    }

    pub fn charge_of_v_t(&self, v_t: f64) -> f64 {
        (self.v_t_neutral - v_t) / self.s_gate
    }

    /// Charge needed to move V_T by one volt, C/m².
    pub fn charge_per_volt(&self) -> f64 {
        1.0 / self.s_gate
    }

    pub fn state_at(&self, v_t: f64) -> Result<TrapState> {
        if !self.window.contains(v_t) {
            return Err(Error::OutOfWindow { v_t, min: self.window.v_t_min, max: self.window.v_t_max });
        }
        Ok(self.make_state(self.charge_of_v_t(v_t), v_t))
    }

    fn make_state(&self, q_trap: f64, v_t: f64) -> TrapState {
        TrapState { q_trap, v_t, v_t_min: self.window.v_t_min, v_t_max: self.window.v_t_max }
    }

    pub fn fields(&self, v_g: f64, q_trap: f64) -> StackFields {
        let d_above = (v_g - q_trap * self.s_channel) / (self.s_gate + self.s_channel);
        StackFields {
            e_tox: (d_above + q_trap) / (EPS0 * self.geom.eps_tox),
            e_box: d_above / (EPS0 * self.geom.eps_box),
        }
    }

    /// Tunnel-oxide and blocking-oxide current densities (A/m²) at a bias point.
    pub fn currents(&self, v_g: f64, q_trap: f64) -> (f64, f64) {
        let e = self.fields(v_g, q_trap);
        let p = &self.fn_params;
        (fn_current_density(e.e_tox, p.a_tox, p.b_tox), fn_current_density(e.e_box, p.a_box, p.b_box))
    }

    /// dq/dt: electrons arriving through the tunnel oxide make the sheet more
    /// negative, electrons leaving through the blocking oxide undo that.
    #[inline]
    pub fn charge_rate(&self, v_g: f64, q_trap: f64) -> f64 {
        let (j_tox, j_box) = self.currents(v_g, q_trap);
        j_box - j_tox
    }

    /// Gate current (A) through the tunnel oxide of the full device area.
    pub fn gate_current(&self, v_g: f64, v_t: f64) -> f64 {
        self.currents(v_g, self.charge_of_v_t(v_t)).0 * self.geom.area
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance { rtol: self.rtol, atol: self.rtol * 1e-6 * self.charge_per_volt() }
    }

    /// Charge after holding `v_g` for `t` seconds, without any window guard.
    pub fn integrate_charge(&self, q0: f64, v_g: f64, t: f64) -> Result<f64> {
        if t == 0.0 || (v_g == 0.0 && q0 == 0.0) {
            return Ok(q0);
        }
        integrate(|q| self.charge_rate(v_g, q), q0, t, self.tolerance())
    }

    fn guard(&self, q: f64) -> TrapState {
        let v_t = self.v_t_of_charge(q);
        if self.window.contains(v_t) {
            self.make_state(q, v_t)
        } else {
            log::debug!("v_t = {v_t:.6} V left the window; clamped");
            let v_t = self.window.clamp(v_t);
            self.make_state(self.charge_of_v_t(v_t), v_t)
        }
    }

    /// One rectangular pulse of height `v_g` and width `t_p`.
    pub fn apply_pulse(&self, state: &TrapState, v_g: f64, t_p: f64) -> Result<TrapState> {
        PulseSpec::new(v_g, t_p, 1).validate()?;
        if t_p == 0.0 {
            return Ok(*state);
        }
        let q = self.integrate_charge(state.q_trap, v_g, t_p)?;
        Ok(self.guard(q))
    }

    /// Drive the gate with a stepwise-constant sequence of `(voltage, duration)`
    /// segments.  Segments with `|v| < v_floor` are skipped: their tunneling
    /// current is negligible next to the write voltages.
    pub fn apply_segments<I>(&self, state: &TrapState, segments: I, v_floor: f64) -> Result<TrapState>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut s = *state;
        for (v, dt) in segments {
            if v.abs() < v_floor || dt <= 0.0 {
                continue;
            }
            s = self.guard(self.integrate_charge(s.q_trap, v, dt)?);
        }
        Ok(s)
    }

    /// V_T after each of `pulse.n_pulses` pulses, starting with the initial value.
    pub fn vt_trajectory(&self, state0: &TrapState, pulse: &PulseSpec) -> Result<Vec<f64>> {
        pulse.validate()?;
        let mut out = Vec::with_capacity(pulse.n_pulses + 1);
        let mut s = *state0;
        out.push(s.v_t);
        for _ in 0..pulse.n_pulses {
            s = self.apply_pulse(&s, pulse.v_g, pulse.t_p)?;
            out.push(s.v_t);
        }
        Ok(out)
    }

    /// Directed V_T shift after a pulse train, clipped to `[0, Range]`: how far
    /// the train moves the device in the direction its polarity writes.
    pub fn write_range(&self, v_t_start: f64, pulse: &PulseSpec) -> Result<f64> {
        let traj = self.vt_trajectory(&self.state_at(v_t_start)?, pulse)?;
        let shift = (traj[traj.len() - 1] - v_t_start) * pulse.v_g.signum();
        Ok(shift.clamp(0.0, self.window.range()))
    }

    /// Number of identical pulses needed to drive V_T from one window edge to
    /// the other, or `None` if `max_pulses` is not enough.
    pub fn pulses_to_traverse(&self, v_g: f64, t_p: f64, max_pulses: usize) -> Result<Option<usize>> {
        let (start, target) =
            if v_g > 0.0 { (self.window.v_t_min, self.window.v_t_max) } else { (self.window.v_t_max, self.window.v_t_min) };
        let mut s = self.state_at(start)?;
        for n in 1..=max_pulses {
            s = self.apply_pulse(&s, v_g, t_p)?;
            if s.v_t == target {
                return Ok(Some(n));
            }
        }
        Ok(None)
    }

    /// Fixed point of repeated pulses at `v_g` (J_in = J_out), ignoring the window.
    pub fn saturation_v_t(&self, v_g: f64) -> Option<f64> {
        // The rate is monotone in q for fixed v_g, so bisection on its sign suffices.
        let cpv = self.charge_per_volt();
        let (mut lo, mut hi) = (self.charge_of_v_t(self.window.v_t_max + 20.0), self.charge_of_v_t(self.window.v_t_min - 20.0));
        let (rlo, rhi) = (self.charge_rate(v_g, lo), self.charge_rate(v_g, hi));
        if rlo.signum() == rhi.signum() {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.charge_rate(v_g, mid).signum() == rlo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo).abs() < 1e-12 * cpv {
                break;
            }
        }
        Some(self.v_t_of_charge(0.5 * (lo + hi)))
    }
}

#[cfg(test)]
mod tests;
