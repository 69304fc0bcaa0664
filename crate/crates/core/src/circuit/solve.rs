use serde::{Deserialize, Serialize};

use super::dd::Dd;
use super::{CircuitStack, DiodeModel};
use crate::error::{ensure, Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const MAX_HALVINGS: usize = 60;
const REL_TOL: f64 = 1e-15;
const CURRENT_FLOOR: f64 = 1e-12;

/// Largest acceptable KCL mismatch for a solution carrying `current`.
pub fn tolerance(current: f64) -> f64 {
    REL_TOL * current.abs().max(CURRENT_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchCurrents {
    pub channel: f64,
    pub sd: Option<f64>,
    pub zd: Option<f64>,
    pub body: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcSolution {
    pub v_d: f64,
    pub v_g: f64,
    /// Flash source node.
    pub v_x: f64,
    /// Node between the two selector diodes.
    pub v_y: Option<f64>,
    /// Drain terminal current: series path plus body junction.
    pub i_d: f64,
    pub currents: BranchCurrents,
    /// Largest KCL mismatch, A.
    pub residual: f64,
    pub iterations: usize,
    a_s: Dd,
    a_z: Dd,
    v_j: Dd,
}

impl DcSolution {
    pub fn max_branch_current(&self) -> f64 {
        let c = &self.currents;
        [Some(c.channel), c.sd, c.zd, c.body].into_iter().flatten().fold(0.0, |m, i: f64| m.max(i.abs()))
    }
}

struct Eval<const N: usize> {
    f: [f64; N],
    j: [[f64; N]; N],
    /// Every KCL mismatch of the network, not just the Newton equations.
    residual: f64,
    scale: f64,
}

fn newton_step<const N: usize>(j: &[[f64; N]; N], f: &[f64; N]) -> Option<[f64; N]> {
    let mut out = [0.0; N];
    match N {
        1 => out[0] = -f[0] / j[0][0],
        2 => {
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            out[0] = -(f[0] * j[1][1] - f[1] * j[0][1]) / det;
            out[1] = -(j[0][0] * f[1] - j[1][0] * f[0]) / det;
        }
        _ => unreachable!("networks here have at most two unknowns"),
    }
    out.iter().all(|x| x.is_finite()).then_some(out)
}

/// Damped Newton: full step, halved until the KCL mismatch drops.
fn newton<const N: usize, F>(x0: [Dd; N], eval: F) -> Result<([Dd; N], Eval<N>, usize)>
where
    F: Fn(&[Dd; N]) -> Eval<N>,
{
    let mut x = x0;
    let mut e = eval(&x);
    for it in 0..MAX_ITERATIONS {
        if e.residual <= tolerance(e.scale) {
            return Ok((x, e, it));
        }
        let step = newton_step(&e.j, &e.f)
            .ok_or(Error::NonConvergence { iterations: it, residual: e.residual })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let xn: [Dd; N] = std::array::from_fn(|k| x[k].add_f64(lambda * step[k]));
            let en = eval(&xn);
            if en.residual.is_finite() && en.residual < e.residual {
                x = xn;
                e = en;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence { iterations: it, residual: e.residual });
        }
    }
    Err(Error::NonConvergence { iterations: MAX_ITERATIONS, residual: e.residual })
}

/// Selector in series with the channel: unknowns are the SD voltage (anode at
/// the midpoint, cathode at the flash source) and the ZD voltage (midpoint to
/// ground).
fn solve_selector(stack: &CircuitStack, v_d: f64, g: f64, guess: [Dd; 2]) -> Result<([Dd; 2], Eval<2>, usize, f64)> {
    let (sd, zd) = (stack.sd, stack.zd);
    let vd = Dd::new(v_d);
    let currents = move |x: &[Dd; 2]| {
        let (i_sd, g_sd) = sd.eval(x[0]);
        let (i_zd, g_zd) = zd.eval(x[1]);
        let v_m = vd.sub(x[1]).add(x[0]);
        (i_sd, g_sd, i_zd, g_zd, v_m.mul_f64(g).value())
    };
    let eval = |x: &[Dd; 2]| {
        let (i_sd, g_sd, i_zd, g_zd, i_m) = currents(x);
        let f = [i_zd + i_sd, i_zd - i_m];
        let residual = f[0].abs().max(f[1].abs()).max((-i_sd - i_m).abs());
        Eval { f, j: [[g_sd, g_zd], [-g, g_zd + g]], residual, scale: i_sd.abs().max(i_zd.abs()).max(i_m.abs()) }
    };
    let (x, e, it) = newton(guess, eval)?;
    let i_m = currents(&x).4;
    Ok((x, e, it, i_m))
}

fn solve_body(d: &DiodeModel, v_d: f64, guess: Dd) -> Result<(Dd, f64, f64, usize)> {
    if d.r_s == 0.0 {
        return Ok((Dd::new(v_d), d.eval(Dd::new(v_d)).0, 0.0, 0));
    }
    let vd = Dd::new(v_d);
    let eval = |x: &[Dd; 1]| {
        let (i, g) = d.eval(x[0]);
        let i_r = vd.sub(x[0]).div_f64(d.r_s).value();
        let f = [i - i_r];
        Eval { f, j: [[g + 1.0 / d.r_s]], residual: f[0].abs(), scale: i.abs().max(i_r.abs()) }
    };
    let (x, e, it) = newton([guess], eval)?;
    Ok((x[0], d.eval(x[0]).0, e.residual, it))
}

fn cold_guess(stack: &CircuitStack, v_d: f64) -> (Dd, Dd, Dd) {
    let (a_s, a_z) = if v_d >= 0.0 { (-v_d, 0.0) } else { (0.0, v_d.max(stack.zd.v_bv.unwrap_or(v_d))) };
    (Dd::new(a_s), Dd::new(a_z), Dd::new(v_d.min(0.7)))
}

/// DC operating point at drain bias `v_d` and gate bias `v_g`.  A previous
/// solution, when given, seeds Newton (sweep continuation).
pub fn dc_solve(stack: &CircuitStack, v_d: f64, v_g: f64, guess: Option<&DcSolution>) -> Result<DcSolution> {
    stack.validate()?;
    ensure(v_d.is_finite() && v_g.is_finite(), "v_d/v_g", || "bias must be finite".into())?;
    let (a_s0, a_z0, v_j0) = match guess {
        _ if v_d == 0.0 => cold_guess(stack, v_d),
        Some(s) => (s.a_s, s.a_z, s.v_j),
        None => cold_guess(stack, v_d),
    };
    let g = stack.mosfet.conductance(v_g);
    let mut residual = 0.0;
    let mut iterations = 0;
    let (channel, v_x, v_y, sd, zd, a_s, a_z) = if stack.topology.has_2d {
        let (x, e, it, i_m) = solve_selector(stack, v_d, g, [a_s0, a_z0])?;
        residual = e.residual;
        iterations = it;
        let v_x = x[1].sub(x[0]).value();
        (i_m, v_x, Some(x[1].value()), Some(-stack.sd.eval(x[0]).0), Some(stack.zd.eval(x[1]).0), x[0], x[1])
    } else {
        (g * v_d, 0.0, None, None, None, a_s0, a_z0)
    };
    let (body, v_j) = match &stack.topology.body_diode {
        Some(d) => {
            let (v_j, i_b, r, it) = solve_body(d, v_d, v_j0)?;
            residual = f64::max(residual, r);
            iterations = iterations.max(it);
            (Some(i_b), v_j)
        }
        None => (None, v_j0),
    };
    Ok(DcSolution {
        v_d,
        v_g,
        v_x,
        v_y,
        i_d: channel + body.unwrap_or(0.0),
        currents: BranchCurrents { channel, sd, zd, body },
        residual,
        iterations,
        a_s,
        a_z,
        v_j,
    })
}

fn sweep_points(v_start: f64, v_stop: f64, step: f64) -> Result<Vec<f64>> {
    ensure(step.is_finite() && step > 0.0, "step", || format!("must be > 0, got {step}"))?;
    ensure(v_start.is_finite() && v_stop.is_finite(), "v_d range", || "must be finite".into())?;
    let n = ((v_stop - v_start).abs() / step).round() as usize;
    let dir = if v_stop >= v_start { 1.0 } else { -1.0 };
    Ok((0..=n).map(|k| v_start + dir * k as f64 * step).collect())
}

/// Continuation-ordered sweep from `v_start` to `v_stop`.
pub fn iv_sweep_solutions(stack: &CircuitStack, v_start: f64, v_stop: f64, step: f64, v_g: f64) -> Result<Vec<DcSolution>> {
    let mut out: Vec<DcSolution> = Vec::new();
    for v in sweep_points(v_start, v_stop, step)? {
        let s = dc_solve(stack, v, v_g, out.last())?;
        out.push(s);
    }
    Ok(out)
}

pub fn iv_sweep(stack: &CircuitStack, v_start: f64, v_stop: f64, step: f64, v_g: f64) -> Result<Vec<(f64, f64)>> {
    Ok(iv_sweep_solutions(stack, v_start, v_stop, step, v_g)?.into_iter().map(|s| (s.v_d, s.i_d)).collect())
}

/// Current through the bare selector (SD and ZD back to back) at bias `v`,
/// with its KCL residual.
pub fn two_diode_current(sd: &DiodeModel, zd: &DiodeModel, v: f64) -> Result<(f64, f64)> {
    sd.validate()?;
    zd.validate()?;
    let vv = Dd::new(v);
    let eval = |x: &[Dd; 1]| {
        let (i_zd, g_zd) = zd.eval(x[0]);
        let (i_sd, g_sd) = sd.eval(x[0].sub(vv));
        let f = [i_zd + i_sd];
        Eval { f, j: [[g_zd + g_sd]], residual: f[0].abs(), scale: i_zd.abs().max(i_sd.abs()) }
    };
    let a0 = if v >= 0.0 { 0.0 } else { v.max(zd.v_bv.unwrap_or(v)) };
    let (x, e, _) = newton([Dd::new(a0)], eval)?;
    Ok((zd.eval(x[0]).0, e.residual))
}
