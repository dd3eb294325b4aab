//! Confidence sequences, sequential tests and fixed-time baselines.
//!
//! * Nondegenerate kernels: `[U_n -/+ 2 sigma_n gamma_{alpha,m}(n)]` with the
//!   jackknife `sigma_n`.
//! * Degenerate kernels: `[U_n - Upsilon_{alpha,m}(n), inf)` with the plug-in
//!   SAGE boundary.
//! * Baselines: the pointwise normal interval and the weighted chi-square
//!   critical value, both of which lose their level under continuous
//!   monitoring.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::accumulator::UStatState;
use crate::boundaries::{Boundary, BoundaryKind, BoundaryParams};
use crate::error::{domain, Error, Result};
use crate::spectral::{sage_upper, SpectrumEstimate};
use crate::special::normal_quantile;

/// Default number of Monte Carlo draws for the weighted chi-square quantile.
pub const DEFAULT_CLASSICAL_DRAWS: usize = 100_000;
pub const MIN_CLASSICAL_DRAWS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "AsympCS-LIL")]
    AsympCsLil,
    #[serde(rename = "AsympCS-GM")]
    AsympCsGm,
    #[serde(rename = "SAGE-LIL")]
    SageLil,
    #[serde(rename = "SAGE-GM")]
    SageGm,
    #[serde(rename = "Classical-CI")]
    ClassicalCi,
    #[serde(rename = "Classical-Test")]
    ClassicalTest,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::AsympCsLil,
        Method::AsympCsGm,
        Method::SageLil,
        Method::SageGm,
        Method::ClassicalCi,
        Method::ClassicalTest,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::AsympCsLil => "AsympCS-LIL",
            Method::AsympCsGm => "AsympCS-GM",
            Method::SageLil => "SAGE-LIL",
            Method::SageGm => "SAGE-GM",
            Method::ClassicalCi => "Classical-CI",
            Method::ClassicalTest => "Classical-Test",
        }
    }

    pub fn asymp_cs(kind: BoundaryKind) -> Method {
        match kind {
            BoundaryKind::Lil => Method::AsympCsLil,
            BoundaryKind::Gm => Method::AsympCsGm,
        }
    }

    pub fn sage(kind: BoundaryKind) -> Method {
        match kind {
            BoundaryKind::Lil => Method::SageLil,
            BoundaryKind::Gm => Method::SageGm,
        }
    }

    /// Boundary family behind an anytime-valid method.
    pub fn boundary_kind(&self) -> Option<BoundaryKind> {
        match self {
            Method::AsympCsLil | Method::SageLil => Some(BoundaryKind::Lil),
            Method::AsympCsGm | Method::SageGm => Some(BoundaryKind::Gm),
            Method::ClassicalCi | Method::ClassicalTest => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Method::SageLil | Method::SageGm | Method::ClassicalTest)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Interval (or one-sided bound) reported at time `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsRecord {
    pub n: u64,
    pub method: Method,
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    /// Jackknife standard deviation; only set on nondegenerate records.
    pub sigma_hat: Option<f64>,
    /// `gamma(n)`, `Upsilon(n)`, the normal quantile or the chi-square
    /// critical value, depending on the method.
    pub boundary_value: f64,
}

impl CsRecord {
    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }

    pub fn half_width(&self) -> f64 {
        if self.hi.is_finite() {
            0.5 * (self.hi - self.lo)
        } else {
            self.center - self.lo
        }
    }

    pub const CSV_HEADER: &'static str = "n,method,center,lo,hi,sigma_hat,boundary_value";

    /// One CSV row in the shortest round-trip decimal form; an absent
    /// `sigma_hat` is an empty field.
    pub fn to_csv_row(&self) -> String {
        let sigma = self.sigma_hat.map(|s| s.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.n, self.method, self.center, self.lo, self.hi, sigma, self.boundary_value
        )
    }

    pub fn from_csv_row(row: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = row.trim().split(',').collect();
        if f.len() != 7 {
            return Err(format!("expected 7 fields, got {}", f.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number `{s}`: {e}"));
        Ok(CsRecord {
            n: f[0].parse().map_err(|e| format!("bad n `{}`: {e}", f[0]))?,
            method: f[1].parse()?,
            center: num(f[2])?,
            lo: num(f[3])?,
            hi: num(f[4])?,
            sigma_hat: if f[5].is_empty() { None } else { Some(num(f[5])?) },
            boundary_value: num(f[6])?,
        })
    }
}

fn n_of(state: &UStatState) -> u64 {
    state.n() as u64
}

/// Two-sided asymptotic confidence sequence for a nondegenerate kernel.
///
/// Returns `None` during the cold start (`n < m`).
pub fn nondegenerate_cs(state: &UStatState, p: &BoundaryParams) -> Result<Option<CsRecord>> {
    nondegenerate_cs_with(state, &Boundary::new(*p)?)
}

/// [`nondegenerate_cs`] with a prebuilt boundary.
pub fn nondegenerate_cs_with(state: &UStatState, boundary: &Boundary) -> Result<Option<CsRecord>> {
    let n = n_of(state);
    if n < boundary.params().m.max(2) {
        return Ok(None);
    }
    let u = state.ustat()?;
    let sigma = state.jackknife_sigma2()?.sqrt();
    nondegenerate_record(n, u, sigma, boundary).map(Some)
}

/// Interval `[u -/+ 2 sigma gamma(n)]` from precomputed `U_n` and `sigma_n`.
pub fn nondegenerate_record(n: u64, u: f64, sigma: f64, boundary: &Boundary) -> Result<CsRecord> {
    let gamma = boundary.value(n)?;
    let half = 2.0 * sigma * gamma;
    Ok(CsRecord {
        n,
        method: Method::asymp_cs(boundary.params().kind),
        center: u,
        lo: u - half,
        hi: u + half,
        sigma_hat: Some(sigma),
        boundary_value: gamma,
    })
}

/// One-sided confidence sequence `[U_n - Upsilon(n), inf)` for a degenerate kernel.
pub fn degenerate_cs(state: &UStatState, p: &BoundaryParams, est: &SpectrumEstimate) -> Result<Option<CsRecord>> {
    let n = n_of(state);
    if n < p.m.max(2) {
        return Ok(None);
    }
    let u = state.ustat()?;
    let upsilon = sage_upper(n, est, p)?;
    Ok(Some(CsRecord {
        n,
        method: Method::sage(p.kind),
        center: u,
        lo: u - upsilon,
        hi: f64::INFINITY,
        sigma_hat: None,
        boundary_value: upsilon,
    }))
}

/// Pointwise normal-theory interval `U_n -/+ 2 sigma_n z_{1-alpha/2} / sqrt(n)`.
pub fn classical_ci(state: &UStatState, alpha: f64) -> Result<CsRecord> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain("alpha", alpha, "alpha in (0, 1)"));
    }
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    classical_ci_with(state, z)
}

/// [`classical_ci`] with the normal quantile supplied.
pub fn classical_ci_with(state: &UStatState, z: f64) -> Result<CsRecord> {
    let u = state.ustat()?;
    let sigma = state.jackknife_sigma2()?.sqrt();
    Ok(classical_ci_record(n_of(state), u, sigma, z))
}

/// Pointwise interval from precomputed `U_n`, `sigma_n` and normal quantile `z`.
pub fn classical_ci_record(n: u64, u: f64, sigma: f64, z: f64) -> CsRecord {
    let half = 2.0 * sigma * z / (n as f64).sqrt();
    CsRecord {
        n,
        method: Method::ClassicalCi,
        center: u,
        lo: u - half,
        hi: u + half,
        sigma_hat: Some(sigma),
        boundary_value: z,
    }
}

/// `(1/n)` times the empirical `(1 - alpha)` quantile of
/// `sum_l lambda_l (chi^2_1 - 1)` over `draws` Monte Carlo samples.
pub fn classical_critical_value<R: Rng + ?Sized>(
    n: u64,
    eigenvalues: &[f64],
    alpha: f64,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::TooFewPoints(0));
    }
    Ok(weighted_chisq_quantile(eigenvalues, alpha, draws, rng)? / n as f64)
}

/// Empirical `(1 - alpha)` quantile of `sum_l lambda_l (chi^2_1 - 1)`.
pub fn weighted_chisq_quantile<R: Rng + ?Sized>(
    eigenvalues: &[f64],
    alpha: f64,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    if draws < MIN_CLASSICAL_DRAWS {
        return Err(Error::Config(format!(
            "classical test needs at least {MIN_CLASSICAL_DRAWS} draws, got {draws}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain("alpha", alpha, "alpha in (0, 1)"));
    }
    let mut sample: Vec<f64> = (0..draws)
        .map(|_| {
            eigenvalues
                .iter()
                .map(|&l| {
                    let z: f64 = rng.sample(StandardNormal);
                    l * (z * z - 1.0)
                })
                .sum()
        })
        .collect();
    // Order statistic ceil((1 - alpha) * draws), 1-based.
    let rank = (((1.0 - alpha) * draws as f64) - 1e-9).ceil() as usize;
    let idx = rank.clamp(1, draws) - 1;
    let (_, q, _) = sample.select_nth_unstable_by(idx, f64::total_cmp);
    Ok(*q)
}

/// Classical fixed-time test of a degenerate kernel at the current `n`.
///
/// The record is `[U_n - c_n, inf)` with `c_n` the chi-square critical value,
/// so `theta0` is rejected exactly when `U_n - theta0 > c_n`.
pub fn classical_degenerate_test<R: Rng + ?Sized>(
    state: &UStatState,
    est: &SpectrumEstimate,
    alpha: f64,
    draws: usize,
    rng: &mut R,
) -> Result<CsRecord> {
    let n = n_of(state);
    let crit = classical_critical_value(n, &est.eigenvalues, alpha, draws, rng)?;
    classical_test_record(state, crit)
}

/// Builds a `Classical-Test` record from an already computed critical value.
pub fn classical_test_record(state: &UStatState, critical: f64) -> Result<CsRecord> {
    let u = state.ustat()?;
    Ok(CsRecord {
        n: n_of(state),
        method: Method::ClassicalTest,
        center: u,
        lo: u - critical,
        hi: f64::INFINITY,
        sigma_hat: None,
        boundary_value: critical,
    })
}

/// Outcome of monitoring `theta0` along a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestDecision {
    /// Last time observed.
    pub n: u64,
    pub reject: bool,
    pub first_rejection_n: Option<u64>,
}

/// Streaming form of the sequential test `phi_n = 1{theta0 not in C_n}`.
/// Once rejected, the decision stays rejected.
#[derive(Debug, Clone, Copy)]
pub struct SequentialTest {
    theta0: f64,
    decision: TestDecision,
}

impl SequentialTest {
    pub fn new(theta0: f64) -> Self {
        SequentialTest {
            theta0,
            decision: TestDecision {
                n: 0,
                reject: false,
                first_rejection_n: None,
            },
        }
    }

    /// Feeds the next record; returns true if this record triggered the rejection.
    pub fn observe(&mut self, rec: &CsRecord) -> bool {
        self.decision.n = rec.n;
        if !self.decision.reject && !rec.contains(self.theta0) {
            self.decision.reject = true;
            self.decision.first_rejection_n = Some(rec.n);
            return true;
        }
        false
    }

    pub fn decision(&self) -> TestDecision {
        self.decision
    }
}

/// Runs the sequential test over the records of one monotone run.
pub fn sequential_test<'a, I>(records: I, theta0: f64) -> TestDecision
where
    I: IntoIterator<Item = &'a CsRecord>,
{
    let mut t = SequentialTest::new(theta0);
    for r in records {
        t.observe(r);
    }
    t.decision()
}
