use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CtfDevice, TrapState, Window};
use crate::error::{ensure, Error, Result};

/// Least-squares line through `(v_g, range)` points, extrapolated to zero range.
pub fn extract_write_threshold(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::SingularFit(format!("need at least 2 points, got {}", points.len())));
    }
    if let Some(&(v, r)) = points.iter().find(|(v, r)| !v.is_finite() || !r.is_finite() || *r < 0.0) {
        return Err(Error::invalid("range", format!("point ({v}, {r}) is not a finite, non-negative range")));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::SingularFit("all gate voltages are equal".into()));
    }
    let slope = sxy / sxx;
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::SingularFit("range does not vary with gate voltage".into()));
    }
    let intercept = mx - my / slope;
    let min_abs_vg = points.iter().map(|p| p.0.abs()).fold(f64::INFINITY, f64::min);
    if !(intercept.abs() < min_abs_vg) || intercept.signum() != points[0].0.signum() {
        return Err(Error::NonPhysicalIntercept { intercept, min_abs_vg });
    }
    Ok(intercept)
}

/// Linear read mapping `G = K (V_GS,read - V_T)` with the read reference pinned to
/// the top of the window, so the most-programmed state reads as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductanceMap {
    pub k: f64,
    pub v_gs_read: f64,
    pub window: Window,
}

impl ConductanceMap {
    pub fn new(k: f64, window: Window) -> Result<Self> {
        let m = Self { k, v_gs_read: window.v_t_max, window };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.k.is_finite() && self.k > 0.0, "k", || format!("must be > 0, got {}", self.k))?;
        ensure(self.v_gs_read == self.window.v_t_max, "v_gs_read", || {
            format!("must equal v_t_max ({}) so that G(v_t_max) = 0", self.window.v_t_max)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conductance {
    /// Absolute conductance, S.
    pub g: f64,
    /// Conductance normalized to the window, in [0, 1].
    pub g_norm: f64,
}

pub fn conductance(map: &ConductanceMap, v_t: f64) -> Result<Conductance> {
    map.validate()?;
    let w = map.window;
    if !w.contains(v_t) {
        return Err(Error::OutOfWindow { v_t, min: w.v_t_min, max: w.v_t_max });
    }
    Ok(Conductance { g: map.k * (map.v_gs_read - v_t), g_norm: w.g_norm(v_t) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    /// Pulses needed to cross the window.
    pub n_levels: usize,
    /// Largest single-pulse |ΔḠ|.
    pub rate: f64,
}

/// Level count and learning rate of a trajectory that starts on one window
/// edge and reaches the opposite one.
pub fn levels_and_learning_rate(traj: &[f64], window: Window) -> Result<Levels> {
    let eps = 1e-9 * window.range();
    let first = *traj.first().ok_or_else(|| Error::IncompleteTrajectory("empty trajectory".into()))?;
    let far = if (first - window.v_t_min).abs() <= eps {
        window.v_t_max
    } else if (first - window.v_t_max).abs() <= eps {
        window.v_t_min
    } else {
        return Err(Error::IncompleteTrajectory(format!("starts at {first} V, not on a window edge")));
    };
    let n_levels = traj
        .iter()
        .position(|v| (v - far).abs() <= eps)
        .ok_or_else(|| Error::IncompleteTrajectory(format!("never reaches {far} V in {} pulses", traj.len() - 1)))?;
    let rate = traj[..=n_levels]
        .windows(2)
        .map(|w| (window.g_norm(w[1]) - window.g_norm(w[0])).abs())
        .fold(0.0, f64::max);
    Ok(Levels { n_levels, rate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectronStatistics {
    pub n: u64,
    pub cv: f64,
}

/// Electrons stored in a square cell of side `feature_size` (m) for a V_T
/// shift `delta_v_t` (V), at `density_per_volt` electrons per cm² per volt.
pub fn electron_statistics(feature_size: f64, delta_v_t: f64, density_per_volt: f64) -> Result<ElectronStatistics> {
    for (name, v) in [("feature_size", feature_size), ("delta_v_t", delta_v_t), ("density_per_volt", density_per_volt)] {
        ensure(v.is_finite() && v > 0.0, name, || format!("must be > 0, got {v}"))?;
    }
    let side_cm = feature_size * 100.0;
    let raw = density_per_volt * side_cm * side_cm * delta_v_t;
    if raw < 1.0 {
        return Err(Error::SubSingleElectron { n: raw });
    }
    let n = raw.round() as u64;
    Ok(ElectronStatistics { n, cv: 1.0 / (n as f64).sqrt() })
}

/// Perturb V_T by Gaussian noise of standard deviation `sigma_over_range · Range`,
/// then clamp to the window.
pub fn inject_vt_noise<R: Rng + ?Sized>(
    device: &CtfDevice,
    state: &TrapState,
    sigma_over_range: f64,
    rng: &mut R,
) -> Result<TrapState> {
    ensure(sigma_over_range.is_finite() && sigma_over_range >= 0.0, "sigma_over_range", || {
        format!("must be >= 0, got {sigma_over_range}")
    })?;
    if sigma_over_range == 0.0 {
        return Ok(*state);
    }
    let w = state.window();
    let normal = Normal::new(0.0, sigma_over_range * w.range()).expect("finite positive sigma");
    let v_t = w.clamp(state.v_t + normal.sample(rng));
    Ok(TrapState { q_trap: device.charge_of_v_t(v_t), v_t, ..*state })
}
