use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Tunnel oxide / nitride trap layer / blocking oxide stack of a CTF cell.
///
/// Thicknesses are in metres, permittivities are relative, `area` is the gate
/// area in m² and `charge_centroid` is the position of the trapped charge sheet
/// measured from the tunnel-oxide interface as a fraction of `d_ctl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackGeometry {
    pub d_tox: f64,
    pub d_ctl: f64,
    pub d_box: f64,
    pub eps_tox: f64,
    pub eps_ctl: f64,
    pub eps_box: f64,
    pub area: f64,
    pub charge_centroid: f64,
}

impl Default for StackGeometry {
    fn default() -> Self {
        Self {
            d_tox: 4e-9,
            d_ctl: 6e-9,
            d_box: 12e-9,
            eps_tox: 3.9,
            eps_ctl: 7.5,
            eps_box: 9.0,
            area: 100e-6 * 100e-6,
            charge_centroid: 0.5,
        }
    }
}

impl StackGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, d) in [("d_tox", self.d_tox), ("d_ctl", self.d_ctl), ("d_box", self.d_box)] {
            ensure(d.is_finite() && d > 0.0, name, || format!("thickness must be > 0, got {d}"))?;
        }
        for (name, e) in [("eps_tox", self.eps_tox), ("eps_ctl", self.eps_ctl), ("eps_box", self.eps_box)] {
            ensure(e.is_finite() && e >= 1.0, name, || format!("relative permittivity must be >= 1, got {e}"))?;
        }
        ensure(self.area.is_finite() && self.area > 0.0, "area", || format!("must be > 0, got {}", self.area))?;
        ensure((0.0..=1.0).contains(&self.charge_centroid), "charge_centroid", || {
            format!("must lie in [0, 1], got {}", self.charge_centroid)
        })
    }

    /// Areal elastance (V·m²/C) between the charge sheet and the gate, and
    /// between the charge sheet and the channel.
    pub fn elastances(&self) -> (f64, f64) {
        let c = self.charge_centroid;
        let to_gate = (self.d_box / self.eps_box + (1.0 - c) * self.d_ctl / self.eps_ctl) / EPS0;
        let to_channel = (c * self.d_ctl / self.eps_ctl + self.d_tox / self.eps_tox) / EPS0;
        (to_gate, to_channel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackFields {
    /// Field in the tunnel oxide, V/m, positive when pointing from gate towards channel.
    pub e_tox: f64,
    /// Field in the blocking oxide, same sign convention.
    pub e_box: f64,
}

/// Series-capacitor electrostatics with a charge sheet of areal density
/// `q_trap` inside the nitride.  Flat-band offsets are zero, so the layer
/// voltages sum to `v_g`.
pub fn solve_stack_fields(geom: &StackGeometry, v_g: f64, q_trap: f64) -> StackFields {
    let (s_gate, s_channel) = geom.elastances();
    // Displacement above the sheet; the one below differs by the sheet charge.
    let d_above = (v_g - q_trap * s_channel) / (s_gate + s_channel);
    let d_below = d_above + q_trap;
    StackFields { e_tox: d_below / (EPS0 * geom.eps_tox), e_box: d_above / (EPS0 * geom.eps_box) }
}

/// Fowler-Nordheim current density `a·E²·exp(-b/|E|)`, carrying the sign of `e`.
#[inline]
pub fn fn_current_density(e: f64, a: f64, b: f64) -> f64 {
    if e == 0.0 {
        return 0.0;
    }
    let m = e.abs();
    (a * m * m * (-b / m).exp()).copysign(e)
}
