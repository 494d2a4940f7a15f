//! Shared test support: a double-double arithmetic oracle for the closed
//! forms, independent of the library's f64 implementations, plus fixture
//! builders.

#![allow(dead_code)]

use std::ops::{Add, Div, Mul, Sub};

use snn_stability::{
    ActivationKind, InitPolicy, ModelSpec, ModelState, SignPattern, TeacherDistribution,
    TeacherSpec,
};

/// Unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2, about 106 bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// e to double-double precision.
    pub const E: Dd = Dd {
        hi: std::f64::consts::E,
        lo: 1.4456468917292502e-16,
    };

    pub fn from(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn int(v: u64) -> Dd {
        Dd::from(v as f64)
    }

    pub fn ratio(p: u64, q: u64) -> Dd {
        Dd::int(p) / Dd::int(q)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        // one Newton step on the f64 root
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let r = (self.hi - p - e + self.lo) / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, r);
        Dd { hi, lo }
    }

    pub fn powi(self, k: u32) -> Dd {
        (0..k).fold(Dd::ONE, |acc, _| acc * self)
    }

    pub fn max(self, other: Dd) -> Dd {
        if self.to_f64() >= other.to_f64() {
            self
        } else {
            other
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + Dd { hi: -o.hi, lo: -o.lo }
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

/// Activation suprema (B_φ, B_φ', B_φ'') in closed form.
pub fn activation_bounds(kind: ActivationKind) -> (Dd, Dd, Dd) {
    let three = Dd::int(3);
    match kind {
        // tanh'' peaks at 4/(3√3)
        ActivationKind::Tanh => (Dd::ONE, Dd::ONE, Dd::int(4) / (three * three.sqrt())),
        // σ'' peaks at 1/(6√3)
        ActivationKind::Sigmoid => (Dd::ONE, Dd::ratio(1, 4), Dd::ONE / (Dd::int(6) * three.sqrt())),
    }
}

/// Constants recomputed from their definitions.
#[derive(Debug, Clone, Copy)]
pub struct OracleConstants {
    pub b: Dd,
    pub b1: Dd,
    pub b2: Dd,
    pub c_x: Dd,
    pub c_y: Dd,
    pub c_0: Dd,
    pub m: Dd,
}

impl OracleConstants {
    pub fn new(kind: ActivationKind, c_x: f64, c_y: f64, c_0: f64, m: u64) -> Self {
        let (b, b1, b2) = activation_bounds(kind);
        OracleConstants {
            b,
            b1,
            b2,
            c_x: Dd::from(c_x),
            c_y: Dd::from(c_y),
            c_0: Dd::from(c_0),
            m: Dd::int(m),
        }
    }

    pub fn rho(&self) -> Dd {
        self.c_x * self.c_x * (self.b1 * self.b1 + self.b2 * self.b + self.b2 * self.c_y / self.m.sqrt())
    }

    pub fn b_prime(&self) -> Dd {
        self.c_x * self.c_x * self.b2 * (self.c_x * self.b1 + (Dd::int(2) * self.c_0).sqrt())
    }

    pub fn b_tilde(&self) -> Dd {
        self.c_x * self.c_x * self.b2 * (self.b1 * self.c_x + self.c_0)
    }

    /// 2ηeT√(2c_0ρ(ρηT + 2))/n.
    pub fn gd_uniform_stability(&self, n: u64, eta: Dd, t: u64) -> Dd {
        let rho = self.rho();
        let t = Dd::int(t);
        Dd::int(2) * eta * Dd::E * t * (Dd::int(2) * self.c_0 * rho * (rho * eta * t + Dd::int(2))).sqrt()
            / Dd::int(n)
    }

    /// 32c_0η²T²c_x⁴B''²(2/n·√(ρ(ρηT+2))·B'c_x(1+ηρ)ηeT + 1)².
    pub fn m_bound(&self, n: u64, eta: Dd, t: u64) -> Dd {
        let rho = self.rho();
        let tt = Dd::int(t);
        let inner = Dd::int(2) / Dd::int(n)
            * (rho * (rho * eta * tt + Dd::int(2))).sqrt()
            * self.b1
            * self.c_x
            * (Dd::ONE + eta * rho)
            * eta
            * Dd::E
            * tt
            + Dd::ONE;
        Dd::int(32) * self.c_0 * eta * eta * tt * tt * self.c_x.powi(4) * self.b2 * self.b2 * inner * inner
    }

    /// 64c_0b′²(Tη)³.
    pub fn crude_threshold(&self, eta: Dd, t: u64) -> Dd {
        let b = self.b_prime();
        Dd::int(64) * self.c_0 * b * b * (Dd::int(t) * eta).powi(3)
    }

    /// (4e²η²ρ²t/n² + 4eηρ/n)·Σ.
    pub fn gd_generalization(&self, n: u64, eta: Dd, t: u64, sum: Dd) -> (Dd, Dd) {
        let rho = self.rho();
        let n = Dd::int(n);
        let first = Dd::int(4) * Dd::E * Dd::E * eta * eta * rho * rho * Dd::int(t) / (n * n) * sum;
        let second = Dd::int(4) * Dd::E * eta * rho / n * sum;
        (first, second)
    }

    /// 8e²ρ(1+t/n)η²/n·Σ.
    pub fn sgd_stability(&self, n: u64, eta: Dd, t: u64, sum: Dd) -> Dd {
        let n_ = Dd::int(n);
        Dd::int(8) * Dd::E * Dd::E * self.rho() * (Dd::ONE + Dd::int(t) / n_) * eta * eta / n_ * sum
    }

    /// 4e²ρ²(1+t/n)η²/n·Σ + 4eρη√((1+t/n)L_t/n·Σ).
    pub fn sgd_generalization(&self, n: u64, eta: Dd, t: u64, sum: Dd, risk_t: Dd) -> Dd {
        let rho = self.rho();
        let n_ = Dd::int(n);
        let g = Dd::ONE + Dd::int(t) / n_;
        Dd::int(4) * Dd::E * Dd::E * rho * rho * g * eta * eta / n_ * sum
            + Dd::int(4) * Dd::E * rho * eta * (g * risk_t / n_ * sum).sqrt()
    }

    /// (8e²ρ²η³T²/n² + 8eη²Tρ/n)Σ + 2dist².
    pub fn r_t(&self, n: u64, eta: Dd, t: u64, sum: Dd, dist: Dd) -> Dd {
        let rho = self.rho();
        let n = Dd::int(n);
        let tt = Dd::int(t);
        (Dd::int(8) * Dd::E * Dd::E * rho * rho * eta.powi(3) * tt * tt / (n * n)
            + Dd::int(8) * Dd::E * eta * eta * tt * rho / n)
            * sum
            + Dd::int(2) * dist * dist
    }

    /// max{2√(Tηc_0), dist}.
    pub fn r_t_prime(&self, eta: Dd, t: u64, dist: Dd) -> Dd {
        (Dd::int(2) * (Dd::int(t) * eta * self.c_0).sqrt()).max(dist)
    }

    /// 4TL(W*) + 2(1/η + 4b′TR′_T/√m)dist².
    pub fn sgd_risk_sum(&self, eta: Dd, t: u64, l_ref: Dd, dist: Dd) -> Dd {
        let tt = Dd::int(t);
        Dd::int(4) * tt * l_ref
            + Dd::int(2)
                * (Dd::ONE / eta + Dd::int(4) * self.b_prime() * tt * self.r_t_prime(eta, t, dist) / self.m.sqrt())
                * dist
                * dist
    }

    /// 16η²T²(b′R′_T)²(1 + 2ηρ)².
    pub fn sgd_m_bound(&self, eta: Dd, t: u64, dist: Dd) -> Dd {
        let tt = Dd::int(t);
        let br = self.b_prime() * self.r_t_prime(eta, t, dist);
        let g = Dd::ONE + Dd::int(2) * eta * self.rho();
        Dd::int(16) * eta * eta * tt * tt * br * br * g * g
    }
}

/// |a − b| ≤ 5·10⁻⁷·|b|: agreement to six significant digits.
pub fn six_digits(a: f64, b: f64) -> bool {
    (a - b).abs() <= 5e-7 * b.abs().max(f64::MIN_POSITIVE)
}

pub fn teacher(d: usize, noise_std: f64) -> TeacherDistribution {
    TeacherSpec {
        d,
        noise_std,
        ..TeacherSpec::default()
    }
    .build()
    .expect("teacher")
}

pub fn student(d: usize, m: usize, activation: ActivationKind, init: InitPolicy) -> ModelState {
    ModelSpec {
        m,
        activation,
        signs: SignPattern::Alternating,
        init,
    }
    .build(d)
    .expect("student")
}

/// Central difference of `f` at `x` along coordinate `idx`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], idx: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    p[idx] = x[idx] + h;
    let up = f(&p);
    p[idx] = x[idx] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

pub fn rel_err(exact: f64, approx: f64) -> f64 {
    (exact - approx).abs() / exact.abs().max(1.0)
}
