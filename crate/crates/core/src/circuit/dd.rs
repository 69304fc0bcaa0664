//! Double-double arithmetic, just enough to carry junction voltages past f64
//! resolution so exponential branch currents can be balanced to ~1e-16.

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, o.hi);
        let (t1, t2) = two_sum(self.lo, o.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }

    pub fn add_f64(self, x: f64) -> Dd {
        self.add(Dd::new(x))
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul_f64(self, m: f64) -> Dd {
        let p = self.hi * m;
        let e = self.hi.mul_add(m, -p) + self.lo * m;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div_f64(self, d: f64) -> Dd {
        let q = self.hi / d;
        let r = (-q).mul_add(d, self.hi) + self.lo;
        let (hi, lo) = quick_two_sum(q, r / d);
        Dd { hi, lo }
    }
}

/// Exponent ceiling; above it exponentials continue linearly.
pub const EXP_CAP: f64 = 40.0;

/// `exp(x)` with linear continuation past [`EXP_CAP`], and its derivative.
pub fn exp_lim(x: Dd) -> (f64, f64) {
    if x.hi <= EXP_CAP {
        let e = x.hi.exp();
        (e + e * x.lo, e)
    } else {
        let e = EXP_CAP.exp();
        (e * (1.0 + (x.hi - EXP_CAP) + x.lo), e)
    }
}

/// `exp(x) - 1` with the same continuation, accurate near zero.
pub fn expm1_lim(x: Dd) -> (f64, f64) {
    if x.hi <= EXP_CAP {
        let e = x.hi.exp();
        (x.hi.exp_m1() + e * x.lo, e)
    } else {
        let (v, d) = exp_lim(x);
        (v - 1.0, d)
    }
}
