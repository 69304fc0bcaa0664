//! Embedded Dormand-Prince 5(4) for the scalar, autonomous charge equation.

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th-order and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Relative tolerance on the accumulated change of the state.
    pub rtol: f64,
    /// Absolute floor on the per-step error, in state units.
    pub atol: f64,
}

/// Integrate `dy/dt = f(y)` from `y0` over `duration`.  The error is controlled
/// on the increment `y - y0`, so a tiny change riding on a large offset is still
/// resolved to `rtol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, y0: f64, duration: f64, tol: Tolerance) -> Result<f64> {
    if duration <= 0.0 {
        return Ok(y0);
    }
    let mut dy = 0.0_f64;
    let mut t = 0.0_f64;
    let mut h = duration;
    let h_min = duration * 1e-14;
    let mut k1 = f(y0);
    for _ in 0..MAX_STEPS {
        if t >= duration {
            return Ok(y0 + dy);
        }
        if t + h > duration {
            h = duration - t;
        }
        let y = y0 + dy;
        let k2 = f(y + h * A21 * k1);
        let k3 = f(y + h * (A31 * k1 + A32 * k2));
        let k4 = f(y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let step = h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(y + step);
        let err = (h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)).abs();
        let scale = tol.atol + tol.rtol * (dy + step).abs().max(dy.abs());
        let ratio = err / scale;
        if !ratio.is_finite() {
            return Err(Error::Integration(format!("non-finite derivative at t = {t:e} s")));
        }
        if ratio <= 1.0 {
            t += h;
            dy += step;
            k1 = k7;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < h_min && t < duration {
            return Err(Error::Integration(format!(
                "step size underflow at t = {t:e} of {duration:e} s (h = {h:e})"
            )));
        }
    }
    Err(Error::Integration(format!("exceeded {MAX_STEPS} steps over {duration:e} s")))
}
