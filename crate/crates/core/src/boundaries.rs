//! Time-uniform Gaussian boundaries `gamma_{alpha,m}(n)`.
//!
//! A `(1 - alpha)` Gaussian boundary starting at `m` bounds the running mean
//! of i.i.d. standard normals uniformly over `n >= m`. Two families are
//! provided: the stitched law-of-the-iterated-logarithm boundary, of order
//! `sqrt(log log n / n)`, and Robbins' normal-mixture boundary, of order
//! `sqrt(log n / n)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{normal_pdf, normal_sf};

pub const DEFAULT_ETA: f64 = 2.0;
pub const DEFAULT_S: f64 = 1.4;

const G_INV_BRACKET: f64 = 40.0;
const G_INV_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Lil,
    Gm,
}

impl BoundaryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryKind::Lil => "lil",
            BoundaryKind::Gm => "gm",
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lil" => Ok(BoundaryKind::Lil),
            "gm" => Ok(BoundaryKind::Gm),
            _ => Err(format!("unknown boundary `{s}` (expected lil | gm)")),
        }
    }
}

/// Level, cold start and stitching parameters of a boundary.
///
/// `eta` and `s` only affect the LIL family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    pub alpha: f64,
    pub m: u64,
    pub eta: f64,
    pub s: f64,
    pub kind: BoundaryKind,
}

impl BoundaryParams {
    pub fn new(kind: BoundaryKind, alpha: f64, m: u64) -> Result<Self> {
        Self::with_stitching(kind, alpha, m, DEFAULT_ETA, DEFAULT_S)
    }

    pub fn with_stitching(kind: BoundaryKind, alpha: f64, m: u64, eta: f64, s: f64) -> Result<Self> {
        let p = BoundaryParams {
            alpha,
            m,
            eta,
            s,
            kind,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_kind(mut self, kind: BoundaryKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(domain("alpha", self.alpha, "alpha in (0, 1)"));
        }
        if self.m < 1 {
            return Err(domain("m", self.m as f64, "m >= 1"));
        }
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(domain("eta", self.eta, "eta > 1"));
        }
        if !(self.s > 1.0 && self.s.is_finite()) {
            return Err(domain("s", self.s, "s > 1"));
        }
        Ok(())
    }

    fn check_n(&self, n: u64) -> Result<()> {
        if n < self.m {
            Err(Error::BeforeColdStart { n, m: self.m })
        } else {
            Ok(())
        }
    }

    /// `(eta^{1/4} + eta^{-1/4})`.
    pub fn stitch_constant(&self) -> f64 {
        let q = self.eta.powf(0.25);
        q + 1.0 / q
    }

    /// `log( zeta(s) / (alpha (log eta)^s) )`.
    pub fn lil_level_term(&self) -> Result<f64> {
        Ok((zeta(self.s)? / (self.alpha * self.eta.ln().powf(self.s))).ln())
    }

    /// `s log log(max{eta n / m, e})`, which is zero until `eta n / m` exceeds `e`.
    pub fn lil_time_term(&self, n: u64) -> f64 {
        let ratio = (self.eta * n as f64 / self.m as f64).max(std::f64::consts::E);
        self.s * ratio.ln().ln()
    }
}

/// Boundary with its `n`-independent constants precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Boundary {
    params: BoundaryParams,
    /// LIL: `log(zeta(s)/(alpha (log eta)^s))`; GM: `{g^{-1}(alpha)}^2`.
    level: f64,
}

impl Boundary {
    pub fn new(params: BoundaryParams) -> Result<Self> {
        params.validate()?;
        let level = match params.kind {
            BoundaryKind::Lil => params.lil_level_term()?,
            BoundaryKind::Gm => g_inv(params.alpha)?.powi(2),
        };
        Ok(Boundary { params, level })
    }

    pub fn params(&self) -> &BoundaryParams {
        &self.params
    }

    pub fn value(&self, n: u64) -> Result<f64> {
        let p = &self.params;
        p.check_n(n)?;
        let nf = n as f64;
        Ok(match p.kind {
            BoundaryKind::Lil => {
                p.stitch_constant() / (2.0 * nf).sqrt() * (p.lil_time_term(n) + self.level).sqrt()
            }
            BoundaryKind::Gm => ((self.level + (nf / p.m as f64).ln()) / nf).sqrt(),
        })
    }
}

/// Evaluates the boundary family selected by `p.kind`.
pub fn gamma(n: u64, p: &BoundaryParams) -> Result<f64> {
    Boundary::new(*p)?.value(n)
}

/// Stitched LIL boundary, regardless of `p.kind`.
pub fn gamma_lil(n: u64, p: &BoundaryParams) -> Result<f64> {
    gamma(n, &p.with_kind(BoundaryKind::Lil))
}

/// Robbins' normal-mixture boundary, regardless of `p.kind`.
pub fn gamma_gm(n: u64, p: &BoundaryParams) -> Result<f64> {
    gamma(n, &p.with_kind(BoundaryKind::Gm))
}

/// `g(a) = 2 {1 - Phi(a) + a phi(a)}` for `a >= 0`.
pub fn g(a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(domain("a", a, "a >= 0"));
    }
    Ok(2.0 * (normal_sf(a) + a * normal_pdf(a)))
}

/// Inverse of [`g`] on `(0, 1)` by bisection on `[0, 40]`.
pub fn g_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain("p", p, "p in (0, 1)"));
    }
    let (mut lo, mut hi) = (0.0f64, G_INV_BRACKET);
    while hi - lo > G_INV_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Riemann zeta function for real `s > 1`.
///
/// Direct sum of the first terms plus an Euler-Maclaurin tail with ten
/// Bernoulli corrections.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) || s.is_nan() {
        return Err(domain("s", s, "s > 1"));
    }
    if s > 60.0 {
        // 2^{-60} is below the f64 resolution of 1.
        return Ok(1.0 + 2f64.powf(-s) + 3f64.powf(-s));
    }
    // B_{2j} / (2j)!
    const CORRECTIONS: [f64; 10] = [
        1.0 / 6.0 / 2.0,
        -1.0 / 30.0 / 24.0,
        1.0 / 42.0 / 720.0,
        -1.0 / 30.0 / 40_320.0,
        5.0 / 66.0 / 3_628_800.0,
        -691.0 / 2730.0 / 479_001_600.0,
        7.0 / 6.0 / 87_178_291_200.0,
        -3617.0 / 510.0 / 20_922_789_888_000.0,
        43_867.0 / 798.0 / 6_402_373_705_728_000.0,
        -174_611.0 / 330.0 / 2_432_902_008_176_640_000.0,
    ];
    const N: u32 = 16;
    let nf = N as f64;
    let mut sum: f64 = (1..N).rev().map(|k| (k as f64).powf(-s)).sum();
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    let mut rising = s;
    let mut power = nf.powf(-s - 1.0);
    for (j, c) in CORRECTIONS.iter().enumerate() {
        sum += c * rising * power;
        let k = 2.0 * (j as f64 + 1.0);
        rising *= (s + k - 1.0) * (s + k);
        power /= nf * nf;
    }
    Ok(sum)
}
