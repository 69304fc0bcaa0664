//! Quasi-static compact-model solver for the flash cell with its optional
//! back-to-back diode selector (1F2D) on bulk or SOI substrates.

mod dd;
mod energy;
mod solve;


use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use dd::{exp_lim, expm1_lim, Dd};

pub use energy::{essential_write_energy, write_energy, EssentialWrite, WriteEnergy};
pub use solve::{dc_solve, iv_sweep, iv_sweep_solutions, tolerance, two_diode_current, BranchCurrents, DcSolution};

/// Thermal voltage at 300 K, V.
pub const THERMAL_VOLTAGE: f64 = 0.02585;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeModel {
    pub i_s: f64,
    pub n_ideality: f64,
    /// Reverse breakdown voltage (negative); `None` for a plain junction.
    pub v_bv: Option<f64>,
    /// Breakdown current at `v_bv`.
    pub i_bv: f64,
    /// Series resistance, Ω.  Only honoured where the diode sits alone on a branch.
    pub r_s: f64,
}

impl DiodeModel {
    pub fn standard() -> Self {
        Self { i_s: 1e-15, n_ideality: 1.0, v_bv: None, i_bv: 0.0, r_s: 0.0 }
    }

    pub fn zener() -> Self {
        Self { i_s: 1e-15, n_ideality: 1.0, v_bv: Some(-6.0), i_bv: 1e-10, r_s: 0.0 }
    }

    /// Drain-to-body junction of a bulk device.
    pub fn body() -> Self {
        Self { i_s: 1e-14, n_ideality: 1.0, v_bv: None, i_bv: 0.0, r_s: 100.0 }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.i_s.is_finite() && self.i_s > 0.0, "i_s", || format!("must be > 0, got {}", self.i_s))?;
        ensure((1.0..=2.0).contains(&self.n_ideality), "n_ideality", || {
            format!("must lie in [1, 2], got {}", self.n_ideality)
        })?;
        ensure(self.r_s.is_finite() && self.r_s >= 0.0, "r_s", || format!("must be >= 0, got {}", self.r_s))?;
        if let Some(v_bv) = self.v_bv {
            ensure(v_bv.is_finite() && v_bv < 0.0, "v_bv", || format!("must be < 0, got {v_bv}"))?;
            ensure(self.i_bv.is_finite() && self.i_bv > 0.0, "i_bv", || format!("must be > 0, got {}", self.i_bv))?;
        }
        Ok(())
    }

    fn nvt(&self) -> f64 {
        self.n_ideality * THERMAL_VOLTAGE
    }

    /// Current and small-signal conductance at a double-double junction voltage.
    pub(crate) fn eval(&self, v: Dd) -> (f64, f64) {
        let nvt = self.nvt();
        let (f, df) = expm1_lim(v.div_f64(nvt));
        let mut i = self.i_s * f;
        let mut g = self.i_s * df / nvt;
        if let Some(v_bv) = self.v_bv {
            let arg = |v: Dd| v.add_f64(-v_bv).neg().div_f64(nvt);
            let (e, de) = exp_lim(arg(v));
            let (e0, _) = exp_lim(arg(Dd::ZERO));
            i -= self.i_bv * (e - e0);
            g += self.i_bv * de / nvt;
        }
        (i, g)
    }
}

/// Junction current at `v` (anode minus cathode), without series resistance.
pub fn diode_current(model: &DiodeModel, v: f64) -> f64 {
    model.eval(Dd::new(v)).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MosfetMode {
    /// Channel fully on regardless of the applied gate bias.
    OnWorstCase,
    VtDependent,
}

/// Linear-region flash transistor, `I = K (V_G - V_T) V_DS`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosfetModel {
    pub k: f64,
    pub v_t: f64,
    pub mode: MosfetMode,
    /// Overdrive assumed by [`MosfetMode::OnWorstCase`].
    pub overdrive_on: f64,
    /// Off-state channel conductance, S.
    pub g_off: f64,
}

impl Default for MosfetModel {
    fn default() -> Self {
        Self { k: 1e-4, v_t: -0.8, mode: MosfetMode::OnWorstCase, overdrive_on: 10.0, g_off: 1e-12 }
    }
}

impl MosfetModel {
    pub fn validate(&self) -> Result<()> {
        ensure(self.k.is_finite() && self.k > 0.0, "k", || format!("must be > 0, got {}", self.k))?;
        ensure(self.v_t.is_finite(), "v_t", || "must be finite".into())?;
        ensure(self.overdrive_on.is_finite() && self.overdrive_on > 0.0, "overdrive_on", || {
            format!("must be > 0, got {}", self.overdrive_on)
        })?;
        ensure(self.g_off.is_finite() && self.g_off >= 0.0, "g_off", || format!("must be >= 0, got {}", self.g_off))
    }

    /// Drain-source conductance at gate bias `v_g`.
    pub fn conductance(&self, v_g: f64) -> f64 {
        match self.mode {
            MosfetMode::OnWorstCase => self.k * self.overdrive_on + self.g_off,
            MosfetMode::VtDependent => self.k * (v_g - self.v_t).max(0.0) + self.g_off,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Substrate {
    Bulk,
    Soi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellTopology {
    pub has_2d: bool,
    pub substrate: Substrate,
    /// Drain-body junction; consulted only on bulk.
    pub body_diode: Option<DiodeModel>,
}

impl CellTopology {
    pub fn new(has_2d: bool, substrate: Substrate) -> Self {
        let body_diode = (substrate == Substrate::Bulk).then(DiodeModel::body);
        Self { has_2d, substrate, body_diode }
    }

    pub fn all() -> [CellTopology; 4] {
        [
            Self::new(false, Substrate::Bulk),
            Self::new(false, Substrate::Soi),
            Self::new(true, Substrate::Bulk),
            Self::new(true, Substrate::Soi),
        ]
    }

    pub fn name(&self) -> &'static str {
        match (self.has_2d, self.substrate) {
            (false, Substrate::Bulk) => "1F0D-bulk",
            (false, Substrate::Soi) => "1F0D-SOI",
            (true, Substrate::Bulk) => "1F2D-bulk",
            (true, Substrate::Soi) => "1F2D-SOI",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.substrate, &self.body_diode) {
            (Substrate::Soi, Some(_)) => Err(crate::error::Error::invalid("body_diode", "an SOI cell has no body junction")),
            (Substrate::Bulk, None) => Err(crate::error::Error::invalid("body_diode", "a bulk cell needs a body junction")),
            (_, Some(d)) => d.validate(),
            _ => Ok(()),
        }
    }
}

/// Flash transistor, selector diodes and cell topology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitStack {
    pub mosfet: MosfetModel,
    pub sd: DiodeModel,
    pub zd: DiodeModel,
    pub topology: CellTopology,
}

impl CircuitStack {
    pub fn new(topology: CellTopology) -> Self {
        Self { mosfet: MosfetModel::default(), sd: DiodeModel::standard(), zd: DiodeModel::zener(), topology }
    }

    pub fn with_mosfet(mut self, mosfet: MosfetModel) -> Self {
        self.mosfet = mosfet;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.mosfet.validate()?;
        self.sd.validate()?;
        self.zd.validate()?;
        ensure(self.sd.v_bv.is_none(), "sd.v_bv", || "the standard diode has no breakdown".into())?;
        ensure(self.zd.v_bv.is_some(), "zd.v_bv", || "the Zener diode needs a breakdown voltage".into())?;
        self.topology.validate()
    }
}
