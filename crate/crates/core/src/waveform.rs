//! Neuron spike waveforms, their superposition across the gate stack and the
//! STDP curve obtained by driving a device with the superposed trace.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::CtfDevice;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    SpikeThenTail,
    TailThenSpike,
}

/// Rectangular spike of height `v_pos` plus a linear tail that reaches `v_neg`
/// next to the spike and relaxes to zero away from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformTemplate {
    pub v_pos: f64,
    pub v_neg: f64,
    pub t_spike: f64,
    pub t_tail: f64,
    pub shape: Shape,
}

impl WaveformTemplate {
    /// Pre-neuron waveform applied to the gate.
    pub fn gate() -> Self {
        Self { v_pos: 9.8, v_neg: -3.0, t_spike: 1e-3, t_tail: 20e-3, shape: Shape::SpikeThenTail }
    }

    /// Post-neuron waveform applied to the drain.
    pub fn drain() -> Self {
        Self { v_pos: 11.5, v_neg: -2.7, t_spike: 1e-3, t_tail: 20e-3, shape: Shape::SpikeThenTail }
    }

    pub fn duration(&self) -> f64 {
        self.t_spike + self.t_tail
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.v_pos.is_finite() && self.v_neg.is_finite(), "v_pos/v_neg", || "must be finite".into())?;
        ensure(self.v_pos.signum() != self.v_neg.signum() && self.v_pos != 0.0 && self.v_neg != 0.0, "v_neg", || {
            format!("spike ({}) and tail ({}) must have opposite signs", self.v_pos, self.v_neg)
        })?;
        ensure(self.t_spike > 0.0, "t_spike", || format!("must be > 0, got {}", self.t_spike))?;
        ensure(self.t_tail > 0.0, "t_tail", || format!("must be > 0, got {}", self.t_tail))
    }
}

/// A waveform sampled on a uniform grid starting at `t0`.  Between samples it
/// is piecewise linear; it is zero outside `[t0, t0 + (n-1)·dt]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Waveform {
    pub fn zero(dt: f64) -> Self {
        Self { t0: 0.0, dt, values: vec![0.0] }
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.values.len().saturating_sub(1)) as f64
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(k, &v)| (self.t0 + k as f64 * self.dt, v))
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let x = (t - self.t0) / self.dt;
        let last = (self.values.len() - 1) as f64;
        if !(0.0..=last).contains(&x) {
            return 0.0;
        }
        let k = x.floor();
        let i = k as usize;
        if k == last {
            return self.values[i];
        }
        let f = x - k;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `(voltage, duration)` pairs for holding each sample until the next one.
    pub fn held_segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.values.len().saturating_sub(1);
        self.values[..n].iter().map(move |&v| (v, self.dt))
    }
}

fn steps(t: f64, dt: f64, name: &str) -> Result<usize> {
    let n = (t / dt).round();
    ensure((t / dt - n).abs() < 1e-6 && n >= 1.0, name, || {
        format!("{t} s is not a positive multiple of the sample step {dt} s")
    })?;
    Ok(n as usize)
}

/// Sample a template.  Each sample holds the value of the interval it opens,
/// so the first tail sample after the spike is exactly `v_neg`.
pub fn render(template: &WaveformTemplate, dt_sample: f64) -> Result<Waveform> {
    template.validate()?;
    ensure(dt_sample.is_finite() && dt_sample > 0.0, "dt_sample", || format!("must be > 0, got {dt_sample}"))?;
    let ns = steps(template.t_spike, dt_sample, "t_spike")?;
    let nt = steps(template.t_tail, dt_sample, "t_tail")?;
    let mut values = Vec::with_capacity(ns + nt + 1);
    match template.shape {
        Shape::SpikeThenTail => {
            values.extend(std::iter::repeat(template.v_pos).take(ns));
            values.extend((0..nt).map(|k| template.v_neg * (1.0 - k as f64 / nt as f64)));
        }
        Shape::TailThenSpike => {
            values.extend((0..nt).map(|k| template.v_neg * (k + 1) as f64 / nt as f64));
            values.extend(std::iter::repeat(template.v_pos).take(ns));
        }
    }
    values.push(0.0);
    Ok(Waveform { t0: 0.0, dt: dt_sample, values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Superposed {
    pub trace: Waveform,
    pub v_peak: f64,
}

/// Signed extremum of largest magnitude; on a tie the earlier sample wins.
pub fn signed_peak(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |best, &v| if v.abs() > best.abs() { v } else { best })
}

/// Effective gate-to-channel voltage `v_pre(t) - v_post(t - dt)`.  Both
/// waveforms must share a sample step; when `dt` is a whole number of steps the
/// result is exact sample arithmetic, otherwise `v_post` is interpolated.
pub fn superpose(pre: &Waveform, post: &Waveform, dt: f64) -> Superposed {
    let h = pre.dt;
    let shift = (dt + post.t0 - pre.t0) / h;
    let m = shift.round();
    let values: Vec<f64>;
    let t0;
    if (shift - m).abs() < 1e-9 && (post.dt - h).abs() <= 1e-12 * h {
        let m = m as i64;
        let n_pre = pre.values.len() as i64;
        let n_post = post.values.len() as i64;
        let lo = m.min(0);
        let hi = (n_pre - 1).max(m + n_post - 1);
        let at = |v: &[f64], i: i64| if (0..v.len() as i64).contains(&i) { v[i as usize] } else { 0.0 };
        values = (lo..=hi).map(|k| at(&pre.values, k) - at(&post.values, k - m)).collect();
        t0 = pre.t0 + lo as f64 * h;
    } else {
        let lo = shift.floor().min(0.0) as i64;
        let hi = ((pre.values.len() - 1) as f64).max((shift + post.duration() / h).ceil()) as i64;
        values = (lo..=hi)
            .map(|k| {
                let t = pre.t0 + k as f64 * h;
                pre.value_at(t) - post.value_at(t - dt)
            })
            .collect();
        t0 = pre.t0 + lo as f64 * h;
    }
    let v_peak = signed_peak(&values);
    Superposed { trace: Waveform { t0, dt: h, values }, v_peak }
}

pub fn vpeak_curve(pre: &Waveform, post: &Waveform, dt_grid: &[f64]) -> Vec<(f64, f64)> {
    dt_grid.iter().map(|&dt| (dt, superpose(pre, post, dt).v_peak)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdpPoint {
    pub dt: f64,
    pub v_peak: f64,
    pub dg_norm: f64,
}

/// Settings for driving a device with superposed traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdpDrive {
    pub gate: WaveformTemplate,
    pub drain: WaveformTemplate,
    pub dt_sample: f64,
    /// Samples below this magnitude are not integrated.
    pub v_floor: f64,
}

impl Default for StdpDrive {
    fn default() -> Self {
        Self { gate: WaveformTemplate::gate(), drain: WaveformTemplate::drain(), dt_sample: 1e-4, v_floor: 6.0 }
    }
}

impl StdpDrive {
    pub fn render(&self) -> Result<(Waveform, Waveform)> {
        ensure(self.v_floor >= 0.0, "v_floor", || format!("must be >= 0, got {}", self.v_floor))?;
        Ok((render(&self.gate, self.dt_sample)?, render(&self.drain, self.dt_sample)?))
    }
}

/// Normalized conductance change for one pre/post pairing at offset `dt`,
/// starting from Ḡ = 0 for `dt >= 0` and Ḡ = 1 for `dt < 0`.
pub fn stdp_point(device: &CtfDevice, pre: &Waveform, post: &Waveform, dt: f64, v_floor: f64) -> Result<StdpPoint> {
    stdp_update(device, pre, post, dt, v_floor, if dt >= 0.0 { 0.0 } else { 1.0 })
}

/// Same as [`stdp_point`] but starting from normalized conductance `g_start`.
pub fn stdp_update(device: &CtfDevice, pre: &Waveform, post: &Waveform, dt: f64, v_floor: f64, g_start: f64) -> Result<StdpPoint> {
    let s = superpose(pre, post, dt);
    let s0 = device.state_at(device.window().v_t_of_g_norm(g_start))?;
    let s1 = device.apply_segments(&s0, s.trace.held_segments(), v_floor)?;
    Ok(StdpPoint { dt, v_peak: s.v_peak, dg_norm: s1.g_norm() - s0.g_norm() })
}

pub fn stdp_curve(device: &CtfDevice, drive: &StdpDrive, dt_grid: &[f64]) -> Result<Vec<StdpPoint>> {
    let (pre, post) = drive.render()?;
    dt_grid.par_iter().map(|&dt| stdp_point(device, &pre, &post, dt, drive.v_floor)).collect()
}

/// `n` evenly spaced offsets from `lo` to `hi` inclusive.
pub fn dt_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
