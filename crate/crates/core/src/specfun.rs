//! Elliptic special functions and branch-controlled complex elementary
//! functions.
//!
//! Everything here works with the *parameter* convention `m = k^2`, where
//! `k` is the elliptic modulus. `jacobi_sn` accepts complex arguments and
//! is evaluated by a descending Landen transformation, which stays
//! branch-safe off the real axis (the AGM back-recurrence does not).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Landen descent stops once the squared modulus drops below this.
const LANDEN_FLOOR: f64 = 1e-16;

/// Complete elliptic integrals and the nome for one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticParams {
    /// Parameter m = k^2, 0 <= m < 1.
    pub m: f64,
    /// Complete elliptic integral K(m).
    pub k_complete: f64,
    /// Complementary integral K'(m) = K(1 - m).
    pub k_complement: f64,
    /// Nome q = exp(-pi K'/K).
    pub nome: f64,
}

impl EllipticParams {
    pub fn new(m: f64) -> Result<Self> {
        let k_complete = elliptic_k(m)?;
        let k_complement = if m == 0.0 {
            f64::INFINITY
        } else {
            elliptic_k(1.0 - m)?
        };
        let nome = (-std::f64::consts::PI * k_complement / k_complete).exp();
        Ok(Self {
            m,
            k_complete,
            k_complement,
            nome,
        })
    }
}

/// A branch cut for complex powers and logarithms: arguments are reduced to
/// the half-open interval `[base_angle, base_angle + 2*pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchCut {
    pub base_angle: f64,
}

impl BranchCut {
    /// Cut along the negative real axis, arguments in [-pi, pi).
    pub const PRINCIPAL: BranchCut = BranchCut {
        base_angle: -std::f64::consts::PI,
    };

    /// Cut along the positive real axis, arguments in [0, 2*pi).
    pub const POSITIVE_AXIS: BranchCut = BranchCut { base_angle: 0.0 };

    pub fn new(base_angle: f64) -> Self {
        Self { base_angle }
    }

    /// Reduce an angle to [base_angle, base_angle + 2*pi). Angles within
    /// 1e-13 of the cut ray collapse to `base_angle` so boundary nodes that
    /// land on the cut behave deterministically.
    pub fn reduce(&self, angle: f64) -> f64 {
        let mut r = (angle - self.base_angle) % TAU;
        if r < 0.0 {
            r += TAU;
        }
        if r < 1e-13 || r > TAU - 1e-13 {
            r = 0.0;
        }
        self.base_angle + r
    }

    /// Argument of `w` reduced to this cut's interval.
    pub fn arg(&self, w: C64) -> f64 {
        self.reduce(w.im.atan2(w.re))
    }

    /// log w with the imaginary part in this cut's interval.
    pub fn log(&self, w: C64) -> C64 {
        C64::new(w.norm().ln(), self.arg(w))
    }
}

/// Complete elliptic integral of the first kind, K(m), by the
/// arithmetic-geometric mean.
pub fn elliptic_k(m: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Domain(format!(
            "elliptic_k requires 0 <= m < 1, got {m}"
        )));
    }
    let mut a = 1.0f64;
    let mut b = (1.0 - m).sqrt();
    for _ in 0..64 {
        if (a - b).abs() <= 2.0 * f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    Ok(std::f64::consts::FRAC_PI_2 / a)
}

/// Invert the nome relation: find m with exp(-pi K'(m)/K(m)) = q.
///
/// Uses the theta-constant formula m = (theta2(q)/theta3(q))^4, which is
/// exact and fast for 0 <= q < 1.
pub fn nome_to_parameter(q: f64) -> Result<EllipticParams> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!(
            "nome_to_parameter requires 0 <= q < 1, got {q}"
        )));
    }
    if q == 0.0 {
        return EllipticParams::new(0.0);
    }
    // theta2 = 2 q^{1/4} sum q^{n(n+1)}, theta3 = 1 + 2 sum q^{n^2}
    let mut t2 = 0.0f64;
    let mut t3 = 0.0f64;
    for n in 0..200u32 {
        let e2 = q.powi((n * (n + 1)) as i32);
        let e3 = q.powi(((n + 1) * (n + 1)) as i32);
        t2 += e2;
        t3 += e3;
        if e2 < 1e-18 && e3 < 1e-18 {
            break;
        }
    }
    let theta2 = 2.0 * q.powf(0.25) * t2;
    let theta3 = 1.0 + 2.0 * t3;
    let ratio = theta2 / theta3;
    let m = ratio.powi(4);
    EllipticParams::new(m)
}

/// Jacobi sn, cn, dn at complex argument `u` for parameter `m`.
///
/// Descending Landen transformation with threshold `m < 1e-16`, then the
/// closed-form sine limit; ascent by the Gauss transformation
///   sn(u,k) = (1+k1) s / (1 + k1 s^2),
///   cn(u,k) = c d / (1 + k1 s^2),
///   dn(u,k) = (1 - k1 s^2) / (1 + k1 s^2),
/// with s,c,d at the descended level.
pub fn jacobi_scd(u: C64, m: f64) -> Result<(C64, C64, C64)> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Domain(format!(
            "jacobi_scd requires 0 <= m < 1, got {m}"
        )));
    }
    if !u.re.is_finite() || !u.im.is_finite() {
        return Err(Error::Domain("jacobi_scd requires finite u".into()));
    }
    let mut ks = Vec::new();
    let mut k = m.sqrt();
    while k * k >= LANDEN_FLOOR {
        let kp = (1.0 - k * k).sqrt();
        k = (1.0 - kp) / (1.0 + kp);
        ks.push(k);
    }
    let mut v = u;
    for &kj in &ks {
        v /= 1.0 + kj;
    }
    let (mut s, mut c) = (v.sin(), v.cos());
    let mut d = C64::new(1.0, 0.0);
    for &kj in ks.iter().rev() {
        let s2 = s * s;
        let den = 1.0 + kj * s2;
        if den.norm() < 1e-14 {
            return Err(Error::Singularity(format!(
                "jacobi sn/cn/dn pole near u = {u} (m = {m})"
            )));
        }
        let sn = (1.0 + kj) * s / den;
        let cn = c * d / den;
        let dn = (1.0 - kj * s2) / den;
        s = sn;
        c = cn;
        d = dn;
    }
    Ok((s, c, d))
}

/// Jacobi sn for complex argument.
pub fn jacobi_sn(u: C64, m: f64) -> Result<C64> {
    jacobi_scd(u, m).map(|(s, _, _)| s)
}

/// w^k with the argument of `w` reduced to the given branch cut.
///
/// w = 0 returns 0 when Re k > 0 and is a singularity otherwise.
pub fn complex_pow(w: C64, k: C64, cut: BranchCut) -> Result<C64> {
    if w == C64::new(0.0, 0.0) {
        return if k.re > 0.0 {
            Ok(C64::new(0.0, 0.0))
        } else {
            Err(Error::Singularity(
                "0^k with Re k <= 0 is undefined".into(),
            ))
        };
    }
    Ok((k * cut.log(w)).exp())
}

/// Principal branch of arcsin; real part lies in [-pi/2, pi/2].
pub fn complex_asin(z: C64) -> C64 {
    let mut a = z.asin();
    // one Newton polish; the log-formula asin loses a couple of digits for
    // large |z| through cancellation
    let c = a.cos();
    if c.norm() > 0.1 {
        a -= (a.sin() - z) / c;
    }
    a
}
