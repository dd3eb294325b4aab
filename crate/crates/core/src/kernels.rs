//! Symmetric degree-two kernels with closed-form population targets.
//!
//! Four kernels are provided: the sample variance kernel `(x - y)^2 / 2`, the
//! Gini mean difference `|x - y|`, the off-diagonal spatial Kendall's tau
//! kernel on bivariate points, and the paired two-sample squared-MMD kernel
//! with a unit-bandwidth Gaussian base kernel.
//!
//! Every kernel is implemented so that `h(a, b)` and `h(b, a)` are computed by
//! the same floating-point operations and therefore agree bit for bit.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A single observation fed to a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Point {
    Scalar(f64),
    Vec2(f64, f64),
    /// Paired two-sample observation `(x, y)` with `x ~ P`, `y ~ Q`.
    Pair(f64, f64),
}

impl Point {
    pub fn variant_name(&self) -> &'static str {
        match self {
            Point::Scalar(_) => "scalar",
            Point::Vec2(..) => "vec2",
            Point::Pair(..) => "pair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelId {
    Variance,
    Gmd,
    SpatialKendall,
    MmdGauss,
}

impl KernelId {
    pub const ALL: [KernelId; 4] = [
        KernelId::Variance,
        KernelId::Gmd,
        KernelId::SpatialKendall,
        KernelId::MmdGauss,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            KernelId::Variance => "variance",
            KernelId::Gmd => "gmd",
            KernelId::SpatialKendall => "spatial-kendall",
            KernelId::MmdGauss => "mmd-gauss",
        }
    }

    /// Name of the point variant this kernel consumes.
    pub fn expected_variant(&self) -> &'static str {
        match self {
            KernelId::Variance | KernelId::Gmd => "scalar",
            KernelId::SpatialKendall => "vec2",
            KernelId::MmdGauss => "pair",
        }
    }

    /// Whether the kernel is degenerate (canonical) under the reference null,
    /// which selects the SAGE path instead of the jackknife interval.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, KernelId::MmdGauss)
    }

    pub fn accepts(&self, p: &Point) -> bool {
        matches!(
            (self, p),
            (KernelId::Variance | KernelId::Gmd, Point::Scalar(_))
                | (KernelId::SpatialKendall, Point::Vec2(..))
                | (KernelId::MmdGauss, Point::Pair(..))
        )
    }

    pub fn check(&self, p: &Point) -> Result<()> {
        if self.accepts(p) {
            Ok(())
        } else {
            Err(Error::PointMismatch {
                kernel: *self,
                expected: self.expected_variant(),
                got: p.variant_name(),
            })
        }
    }

    /// Evaluates `h(a, b)`.
    pub fn eval(&self, a: &Point, b: &Point) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.eval_unchecked(a, b))
    }

    /// Evaluates `h(a, b)` for points already known to match the kernel.
    ///
    /// Mismatched variants return NaN.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &Point, b: &Point) -> f64 {
        match (self, a, b) {
            (KernelId::Variance, Point::Scalar(x), Point::Scalar(y)) => {
                let d = x - y;
                0.5 * d * d
            }
            (KernelId::Gmd, Point::Scalar(x), Point::Scalar(y)) => (x - y).abs(),
            (KernelId::SpatialKendall, Point::Vec2(x1, x2), Point::Vec2(y1, y2)) => {
                spatial_kendall(*x1, *x2, *y1, *y2)
            }
            (KernelId::MmdGauss, Point::Pair(x, y), Point::Pair(xp, yp)) => {
                // The cross terms are added before subtracting so that
                // swapping the arguments only permutes a commutative sum.
                let same = gauss(*x, *xp) + gauss(*y, *yp);
                let cross = gauss(*x, *yp) + gauss(*xp, *y);
                same - cross
            }
            _ => f64::NAN,
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        KernelId::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!("unknown kernel `{s}` (expected variance | gmd | spatial-kendall | mmd-gauss)")
            })
    }
}

#[inline]
fn gauss(u: f64, w: f64) -> f64 {
    let d = u - w;
    (-0.5 * d * d).exp()
}

#[inline]
fn spatial_kendall(x1: f64, x2: f64, y1: f64, y2: f64) -> f64 {
    if x1 == y1 && x2 == y2 {
        return 0.0;
    }
    let d1 = x1 - y1;
    let d2 = x2 - y2;
    (d1 * d2) / (d1 * d1 + d2 * d2)
}

/// Scale mixer `W` of the elliptical family `X = sqrt(W) A Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mixer {
    /// `W = 1`: bivariate normal.
    Gaussian,
    /// `W = 10 / V` with `V ~ chi^2_10`: bivariate t with 10 degrees of freedom.
    T10,
    /// `W ~ Exp(1)`: bivariate symmetric Laplace.
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    Gaussian { mean: f64, var: f64 },
    /// Student's t with 10 degrees of freedom.
    T10,
    /// Unit-variance Laplace with density `exp(-sqrt(2)|x|) / sqrt(2)`.
    Laplace,
    /// Bivariate elliptical law with shape matrix `[[1, rho], [rho, 1]]`.
    Elliptical { rho: f64, mixer: Mixer },
}

/// Data-generating law for simulations and closed-form targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistParams {
    pub family: Family,
    /// Mean shift of the second sample; only the MMD kernel consults it.
    #[serde(default)]
    pub shift: f64,
}

impl DistParams {
    pub fn new(family: Family) -> Self {
        DistParams { family, shift: 0.0 }
    }

    pub fn standard_gaussian() -> Self {
        Self::new(Family::Gaussian {
            mean: 0.0,
            var: 1.0,
        })
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            Family::Gaussian { mean, var } => {
                if !mean.is_finite() {
                    return Err(domain("mean", mean, "a finite value"));
                }
                if !(var > 0.0 && var.is_finite()) {
                    return Err(domain("var", var, "a positive finite variance"));
                }
            }
            Family::Elliptical { rho, .. } => {
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(domain("rho", rho, "rho in [-1, 1]"));
                }
            }
            Family::T10 | Family::Laplace => {}
        }
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return Err(domain("shift", self.shift, "a finite shift >= 0"));
        }
        Ok(())
    }

    pub fn is_bivariate(&self) -> bool {
        matches!(self.family, Family::Elliptical { .. })
    }
}

/// Population target `theta = E h(X1, X2)` when a closed form is known.
pub fn true_theta(id: KernelId, d: &DistParams) -> Option<f64> {
    match (id, d.family) {
        (KernelId::Variance, Family::Gaussian { var, .. }) => Some(var),
        (KernelId::Variance, Family::T10) => Some(10.0 / 8.0),
        (KernelId::Variance, Family::Laplace) => Some(1.0),
        (KernelId::Gmd, Family::Gaussian { var, .. }) => Some(2.0 * (var / PI).sqrt()),
        // Laplace with scale b = 1/sqrt(2): E|X - Y| = 3b/2.
        (KernelId::Gmd, Family::Laplace) => Some(1.5 / 2f64.sqrt()),
        (KernelId::SpatialKendall, Family::Elliptical { rho, .. }) => {
            if rho == 0.0 {
                Some(0.0)
            } else {
                Some((1.0 - (1.0 - rho * rho).sqrt()) / (2.0 * rho))
            }
        }
        (KernelId::MmdGauss, Family::Elliptical { .. }) => None,
        (KernelId::MmdGauss, _) if d.shift == 0.0 => Some(0.0),
        (KernelId::MmdGauss, Family::Gaussian { var, .. }) => {
            // X - X' ~ N(0, 2v) and X - Y' ~ N(-shift, 2v).
            let spread = 1.0 + 2.0 * var;
            Some(2.0 / spread.sqrt() * (1.0 - (-d.shift * d.shift / (2.0 * spread)).exp()))
        }
        _ => None,
    }
}

/// Variance of the first Hoeffding projection when a closed form is known.
pub fn true_sigma2(id: KernelId, d: &DistParams) -> Option<f64> {
    match (id, d.family) {
        // Var{(X - mu)^2} / 4 from the fourth central moment.
        (KernelId::Variance, Family::Gaussian { var, .. }) => Some(var * var / 2.0),
        (KernelId::Variance, Family::Laplace) => Some((6.0 - 1.0) / 4.0),
        (KernelId::Variance, Family::T10) => Some((6.25 - 1.5625) / 4.0),
        (KernelId::Gmd, Family::Gaussian { var, .. }) => {
            Some(var * (1.0 / 3.0 + (2.0 * 3f64.sqrt() - 4.0) / PI))
        }
        (KernelId::MmdGauss, Family::Elliptical { .. }) => None,
        (KernelId::MmdGauss, _) if d.shift == 0.0 => Some(0.0),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        let k = KernelId::Variance;
        assert_eq!(k.eval(&Point::Scalar(1.0), &Point::Scalar(3.0)).unwrap(), 2.0);
        let x = Point::Scalar(-0.731);
        assert_eq!(KernelId::Gmd.eval(&x, &x).unwrap(), 0.0);
        let z = Point::Pair(0.0, 0.0);
        assert_eq!(KernelId::MmdGauss.eval(&z, &z).unwrap(), 0.0);
        let h = KernelId::SpatialKendall
            .eval(&Point::Vec2(0.0, 0.0), &Point::Vec2(1.0, 1.0))
            .unwrap();
        assert_eq!(h, 0.5);
    }

    #[test]
    fn spatial_kendall_diagonal_is_zero() {
        let p = Point::Vec2(0.3, -2.0);
        assert_eq!(KernelId::SpatialKendall.eval(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_variant_is_rejected() {
        let err = KernelId::Gmd
            .eval(&Point::Scalar(1.0), &Point::Pair(1.0, 2.0))
            .unwrap_err();
        assert!(matches!(err, Error::PointMismatch { got: "pair", .. }));
        assert!(KernelId::SpatialKendall
            .eval(&Point::Scalar(1.0), &Point::Scalar(1.0))
            .is_err());
    }

    #[test]
    fn kernel_ids_round_trip_through_strings() {
        for k in KernelId::ALL {
            assert_eq!(k.as_str().parse::<KernelId>().unwrap(), k);
        }
        assert!("energy".parse::<KernelId>().is_err());
    }

    #[test]
    fn closed_forms() {
        let g = DistParams::standard_gaussian();
        let theta = true_theta(KernelId::Gmd, &g).unwrap();
        assert!((theta - 1.128_379_167_095_512_6).abs() < 1e-14);
        assert_eq!(true_sigma2(KernelId::Variance, &g), Some(0.5));
        let s = true_sigma2(KernelId::Gmd, &g).unwrap();
        let want = 1.0 / 3.0 + (2.0 * 3f64.sqrt() - 4.0) / std::f64::consts::PI;
        assert!((s - want).abs() < 1e-15 && (s - 0.162_751_58).abs() < 1e-8, "{s}");
        let ell = DistParams::new(Family::Elliptical {
            rho: 0.6,
            mixer: Mixer::Laplace,
        });
        let tau = true_theta(KernelId::SpatialKendall, &ell).unwrap();
        assert!((tau - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(true_theta(KernelId::MmdGauss, &g), Some(0.0));
        assert_eq!(true_sigma2(KernelId::MmdGauss, &g), Some(0.0));
        assert_eq!(true_theta(KernelId::Gmd, &DistParams::new(Family::T10)), None);
        assert_eq!(true_theta(KernelId::SpatialKendall, &g), None);
        assert_eq!(true_sigma2(KernelId::SpatialKendall, &ell), None);
    }

    #[test]
    fn validation() {
        assert!(DistParams::new(Family::Gaussian { mean: 0.0, var: 0.0 })
            .validate()
            .is_err());
        assert!(DistParams::new(Family::Elliptical {
            rho: 1.2,
            mixer: Mixer::Gaussian
        })
        .validate()
        .is_err());
        assert!(DistParams::standard_gaussian()
            .with_shift(-0.1)
            .validate()
            .is_err());
    }
}
