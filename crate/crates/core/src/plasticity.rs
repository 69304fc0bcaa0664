//! Behavioral STDP model with exponential timing and soft-bound weight
//! dependence, plus multi-start least-squares fitting of its constants.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, Dyn, OMatrix, OVector, U3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Ltp,
    Ltd,
}

impl Branch {
    /// Causal pairs potentiate; at coincidence the sign of the change decides.
    pub fn of(dt: f64, dg: f64) -> Branch {
        if dt > 0.0 || (dt == 0.0 && dg >= 0.0) {
            Branch::Ltp
        } else {
            Branch::Ltd
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasticityParams {
    pub g_min: f64,
    pub g_max: f64,
    pub dg_max_ltp: f64,
    pub dg_max_ltd: f64,
    pub tau_ltp: f64,
    pub tau_ltd: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Default for PlasticityParams {
    fn default() -> Self {
        Self { g_min: 0.0, g_max: 1.0, dg_max_ltp: 0.07, dg_max_ltd: -0.14, tau_ltp: 1.05, tau_ltd: 1.24, a1: 8.0, a2: 8.46 }
    }
}

impl PlasticityParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.g_max > self.g_min, "g_max", || format!("must exceed g_min ({} <= {})", self.g_max, self.g_min))?;
        ensure(self.dg_max_ltp > 0.0, "dg_max_ltp", || format!("must be > 0, got {}", self.dg_max_ltp))?;
        ensure(self.dg_max_ltd < 0.0, "dg_max_ltd", || format!("must be < 0, got {}", self.dg_max_ltd))?;
        ensure(self.tau_ltp > 0.0, "tau_ltp", || format!("must be > 0, got {}", self.tau_ltp))?;
        ensure(self.tau_ltd > 0.0, "tau_ltd", || format!("must be > 0, got {}", self.tau_ltd))?;
        ensure(self.a1 >= 0.0, "a1", || format!("must be >= 0, got {}", self.a1))?;
        ensure(self.a2 >= 0.0, "a2", || format!("must be >= 0, got {}", self.a2))
    }

    pub fn clamp(&self, g: f64) -> f64 {
        g.clamp(self.g_min, self.g_max)
    }

    fn span(&self) -> f64 {
        self.g_max - self.g_min
    }
}

/// `(v - max) / (max - min)` over the given peaks.
pub fn vpeak_normalize(v_peaks: &[f64]) -> Result<Vec<f64>> {
    ensure(!v_peaks.is_empty(), "v_peaks", || "empty".into())?;
    let max = v_peaks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v_peaks.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > min) {
        return Err(Error::Degenerate(format!("all peaks equal {max} V")));
    }
    Ok(v_peaks.iter().map(|v| (v - max) / (max - min)).collect())
}

/// Spike offset implied by a normalized peak: `-τ_LTP·v` for LTP, `τ_LTD·v` for LTD.
pub fn dt_from_vpeak(params: &PlasticityParams, v_norm: f64, branch: Branch) -> Result<f64> {
    ensure((-1.0..=0.0).contains(&v_norm), "v_norm", || format!("must lie in [-1, 0], got {v_norm}"))?;
    Ok(match branch {
        Branch::Ltp => -params.tau_ltp * v_norm,
        Branch::Ltd => params.tau_ltd * v_norm,
    })
}

/// Update predicted for a synapse at `g_i` by a pairing at offset `dt` on `branch`.
pub fn delta_g(params: &PlasticityParams, g_i: f64, dt: f64, branch: Branch) -> f64 {
    let g = params.clamp(g_i);
    match branch {
        Branch::Ltp => {
            params.dg_max_ltp * (-dt.abs() / params.tau_ltp).exp() * (-params.a1 * (g - params.g_min) / params.span()).exp()
        }
        Branch::Ltd => {
            params.dg_max_ltd * (-dt.abs() / params.tau_ltd).exp() * (-params.a2 * (params.g_max - g) / params.span()).exp()
        }
    }
}

/// `g_i + ΔG`, clamped to the conductance bounds.
pub fn update(params: &PlasticityParams, g_i: f64, dt: f64, branch: Branch) -> f64 {
    params.clamp(g_i + delta_g(params, g_i, dt, branch))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasticitySample {
    pub g_i: f64,
    pub dt: f64,
    pub dg_observed: f64,
}

impl PlasticitySample {
    pub fn branch(&self) -> Branch {
        Branch::of(self.dt, self.dg_observed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub g_min: f64,
    pub g_max: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { g_min: 0.0, g_max: 1.0, starts: 16, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: PlasticityParams,
    pub rmse: f64,
}

/// One branch in log-parameters `(ln|ΔG_max|, ln τ, ln a)`, which keeps every
/// constant on the right side of its bound.
#[derive(Clone)]
struct BranchProblem<'a> {
    xs: &'a [(f64, f64, f64)],
    sign: f64,
    p: OVector<f64, U3>,
}

impl BranchProblem<'_> {
    fn model(&self, w: f64, dt: f64) -> (f64, [f64; 3]) {
        let (m, tau, a) = (self.p[0].exp(), self.p[1].exp(), self.p[2].exp());
        let y = self.sign * m * (-dt.abs() / tau - a * w).exp();
        (y, [y, y * dt.abs() / tau, -y * a * w])
    }
}

impl LeastSquaresProblem<f64, Dyn, U3> for BranchProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U3>;
    type ParameterStorage = Owned<f64, U3>;

    fn set_params(&mut self, x: &OVector<f64, U3>) {
        self.p.copy_from(x);
    }

    fn params(&self) -> OVector<f64, U3> {
        self.p
    }

    fn residuals(&self) -> Option<OVector<f64, Dyn>> {
        let r = self.xs.iter().map(|&(w, dt, y)| self.model(w, dt).0 - y);
        let v = OVector::<f64, Dyn>::from_iterator(self.xs.len(), r);
        v.iter().all(|x| x.is_finite()).then_some(v)
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U3>> {
        let mut j = OMatrix::<f64, Dyn, U3>::zeros(self.xs.len());
        for (i, &(w, dt, _)) in self.xs.iter().enumerate() {
            let d = self.model(w, dt).1;
            for k in 0..3 {
                j[(i, k)] = d[k];
            }
        }
        j.iter().all(|x| x.is_finite()).then_some(j)
    }
}

fn sse(p: &BranchProblem) -> f64 {
    p.residuals().map_or(f64::INFINITY, |r| r.norm_squared())
}

/// Log-linear least squares for a starting point: `ln|y| = ln m - |dt|/τ - a w`.
fn log_linear_guess(xs: &[(f64, f64, f64)]) -> [f64; 3] {
    let pts: Vec<_> = xs.iter().filter(|x| x.2 != 0.0).collect();
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for &&(w, dt, y) in &pts {
        let row = nalgebra::Vector3::new(1.0, -dt.abs(), -w);
        ata += row * row.transpose();
        atb += row * y.abs().ln();
    }
    let fallback = [0.05f64.ln(), 0.0, 1.0f64.ln()];
    match ata.try_inverse() {
        Some(inv) => {
            let c = inv * atb;
            let tau = if c[1] > 1e-6 { (1.0 / c[1]).ln() } else { fallback[1] };
            let a = if c[2] > 1e-6 { c[2].ln() } else { fallback[2] };
            [c[0], tau, a]
        }
        None => fallback,
    }
}

fn fit_branch(xs: &[(f64, f64, f64)], sign: f64, starts: usize, master: u64, tag: &str) -> [f64; 3] {
    let guess = log_linear_guess(xs);
    let best = (0..starts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = seed::stream(master, tag, k as u64);
            let p0 = if k == 0 {
                guess
            } else {
                std::array::from_fn(|i| guess[i] + rng.gen_range(-1.5..1.5))
            };
            let problem = BranchProblem { xs, sign, p: OVector::<f64, U3>::from_column_slice(&p0) };
            let (solved, _) = LevenbergMarquardt::new().with_patience(400).minimize(problem);
            (sse(&solved), [solved.p[0], solved.p[1], solved.p[2]])
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one start");
    best.1
}

/// Least-squares fit of the six free constants; `g_min`/`g_max` are fixed by `opts`.
pub fn fit(samples: &[PlasticitySample], opts: &FitOptions) -> Result<FitResult> {
    ensure(opts.g_max > opts.g_min, "g_max", || "must exceed g_min".into())?;
    if samples.len() < 8 {
        return Err(Error::Degenerate(format!("need at least 8 samples, got {}", samples.len())));
    }
    if let Some(s) = samples.iter().find(|s| !(s.g_i.is_finite() && s.dt.is_finite() && s.dg_observed.is_finite())) {
        return Err(Error::Data(format!("non-finite sample {s:?}")));
    }
    if let Some(s) = samples.iter().find(|s| s.g_i < opts.g_min || s.g_i > opts.g_max) {
        return Err(Error::Data(format!("g_i {} outside [{}, {}]", s.g_i, opts.g_min, opts.g_max)));
    }
    let mut gs: Vec<f64> = samples.iter().map(|s| s.g_i).collect();
    gs.sort_by(f64::total_cmp);
    gs.dedup();
    if gs.len() < 3 {
        return Err(Error::Degenerate(format!("need at least 3 distinct g_i, got {}", gs.len())));
    }
    let span = opts.g_max - opts.g_min;
    let ltp: Vec<_> = samples
        .iter()
        .filter(|s| s.branch() == Branch::Ltp)
        .map(|s| ((s.g_i - opts.g_min) / span, s.dt, s.dg_observed))
        .collect();
    let ltd: Vec<_> = samples
        .iter()
        .filter(|s| s.branch() == Branch::Ltd)
        .map(|s| ((opts.g_max - s.g_i) / span, s.dt, s.dg_observed))
        .collect();
    if ltp.len() < 3 || ltd.len() < 3 {
        return Err(Error::Degenerate(format!("need both branches, got {} LTP and {} LTD samples", ltp.len(), ltd.len())));
    }
    let p = fit_branch(&ltp, 1.0, opts.starts, opts.seed, "fit-ltp");
    let d = fit_branch(&ltd, -1.0, opts.starts, opts.seed, "fit-ltd");
    let params = PlasticityParams {
        g_min: opts.g_min,
        g_max: opts.g_max,
        dg_max_ltp: p[0].exp(),
        tau_ltp: p[1].exp(),
        a1: p[2].exp(),
        dg_max_ltd: -d[0].exp(),
        tau_ltd: d[1].exp(),
        a2: d[2].exp(),
    };
    params.validate()?;
    Ok(FitResult { params, rmse: rmse(&params, samples) })
}

pub fn rmse(params: &PlasticityParams, samples: &[PlasticitySample]) -> f64 {
    let s: f64 = samples.iter().map(|s| (delta_g(params, s.g_i, s.dt, s.branch()) - s.dg_observed).powi(2)).sum();
    (s / samples.len() as f64).sqrt()
}

/// Noiseless samples from `params` on a `g_i × dt` grid.
pub fn generate(params: &PlasticityParams, g_grid: &[f64], dt_grid: &[f64]) -> Vec<PlasticitySample> {
    let mut out = Vec::with_capacity(g_grid.len() * dt_grid.len());
    for &g_i in g_grid {
        for &dt in dt_grid {
            let branch = if dt >= 0.0 { Branch::Ltp } else { Branch::Ltd };
            out.push(PlasticitySample { g_i, dt, dg_observed: delta_g(params, g_i, dt, branch) });
        }
    }
    out
}
