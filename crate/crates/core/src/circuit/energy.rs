use serde::{Deserialize, Serialize};

use super::{dc_solve, CircuitStack, DcSolution};
use crate::error::{ensure, Result};
use crate::waveform::Waveform;

/// Tunnelling energy of one write, `|v| |i_gate| t_p / area_ratio`.
pub fn essential_write_energy(v: f64, i_gate: f64, t_p: f64, area_ratio: f64) -> Result<f64> {
    ensure(t_p.is_finite() && t_p > 0.0, "t_p", || format!("must be > 0, got {t_p}"))?;
    ensure(area_ratio.is_finite() && area_ratio > 0.0, "area_ratio", || format!("must be > 0, got {area_ratio}"))?;
    ensure(v.is_finite() && i_gate.is_finite(), "v/i_gate", || "must be finite".into())?;
    Ok(v.abs() * i_gate.abs() / area_ratio * t_p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssentialWrite {
    pub v: f64,
    pub i_gate: f64,
    pub t_p: f64,
    pub area_ratio: f64,
}

impl Default for EssentialWrite {
    /// The costlier of the two write polarities.
    fn default() -> Self {
        Self { v: -14.5, i_gate: 2.34e-9, t_p: 20e-3, area_ratio: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WriteEnergy {
    pub e_parasitic: f64,
    pub e_essential: f64,
    pub e_total: f64,
}

/// Energy drawn from the drain line while `post` plays, one DC solve per sample,
/// plus the essential tunnelling energy.
pub fn write_energy(stack: &CircuitStack, post: &Waveform, v_g: f64, essential: &EssentialWrite) -> Result<WriteEnergy> {
    let e_essential = essential_write_energy(essential.v, essential.i_gate, essential.t_p, essential.area_ratio)?;
    let mut prev: Option<DcSolution> = None;
    let mut e_parasitic = 0.0;
    for (v, h) in post.held_segments() {
        let s = dc_solve(stack, v, v_g, prev.as_ref())?;
        e_parasitic += (v * s.i_d).abs() * h;
        prev = Some(s);
    }
    Ok(WriteEnergy { e_parasitic, e_essential, e_total: e_parasitic + e_essential })
}
