//! Spectral calibration for degenerate U-statistics.
//!
//! The centered Gram matrix `K(i, j) = h(X_i, X_j) - U_n`, scaled by `1/n`,
//! estimates the signed eigenvalues of the kernel's integral operator. The
//! leading eigenvalues (by magnitude) are combined with a significance-budget
//! allocation `beta` into the aggregates that parameterize the SAGE upper
//! boundary and its lower-tail mirror:
//!
//! ```text
//! Lambda      = n^{-1} sum_i h(X_i, X_i) - U_n
//! Lambda+     = sum_{l <= L, lambda_l > 0} lambda_l
//! Lambda+_b   = sum_{l <= L, lambda_l > 0} lambda_l log(1 / beta_l)
//! Lambda+_b,g = sum_{l <= L, lambda_l > 0} lambda_l {g^{-1}(alpha beta_l)}^2
//! ```
//!
//! with the minus-side sums running over negative eigenvalues.

mod lanczos;

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::accumulator::UStatState;
use crate::boundaries::{g_inv, zeta, BoundaryKind, BoundaryParams};
use crate::error::{domain, Error, Result};

pub use lanczos::dense_eigenvalues;
use lanczos::{lanczos_top, top_by_magnitude, Lanczos};

/// Default truncation exponent: `L_n = floor(n^{1/4})`.
pub const DEFAULT_TRUNC_EXPONENT: f64 = 0.25;
/// Default ratio of the geometric grid on which the spectrum is refreshed.
pub const DEFAULT_GRID_RATIO: f64 = 1.05;
/// Matrices up to this order are always decomposed densely.
pub const DENSE_LIMIT: usize = 400;

/// Allocation of the significance budget across eigen-directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightScheme {
    /// `beta_l = l^{-b} / zeta(b)`.
    Polynomial { b: f64 },
    /// `beta_l = (1 - e^{-c}) e^{-c (l - 1)}`.
    Exponential { c: f64 },
    /// `beta_l = max(lambda_l, 0) / Lambda+` from the estimated spectrum.
    DataDriven,
}

impl WeightScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightScheme::Polynomial { b } if !(b > 1.0 && b.is_finite()) => {
                Err(domain("b", b, "b > 1"))
            }
            WeightScheme::Exponential { c } if !(c > 0.0 && c.is_finite()) => {
                Err(domain("c", c, "c > 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Polynomial { .. } => "polynomial",
            WeightScheme::Exponential { .. } => "exponential",
            WeightScheme::DataDriven => "data-driven",
        }
    }

    /// Decay parameter (`b` or `c`); `None` for the data-driven scheme.
    pub fn param(&self) -> Option<f64> {
        match *self {
            WeightScheme::Polynomial { b } => Some(b),
            WeightScheme::Exponential { c } => Some(c),
            WeightScheme::DataDriven => None,
        }
    }

    /// Closed-form weight of the `l`-th direction (1-based) for the
    /// deterministic schemes.
    fn deterministic(&self, l: usize, zeta_b: f64) -> f64 {
        match *self {
            WeightScheme::Polynomial { b } => (l as f64).powf(-b) / zeta_b,
            WeightScheme::Exponential { c } => -(-c).exp_m1() * (-c * (l as f64 - 1.0)).exp(),
            WeightScheme::DataDriven => unreachable!("data-driven weights are not closed-form"),
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightScheme::Polynomial { b } => write!(f, "poly:{b}"),
            WeightScheme::Exponential { c } => write!(f, "exp:{c}"),
            WeightScheme::DataDriven => f.write_str("data"),
        }
    }
}

impl FromStr for WeightScheme {
    type Err = String;

    /// Parses `poly:<b>`, `exp:<c>` or `data`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || format!("invalid weight scheme `{s}` (expected poly:<b> | exp:<c> | data)");
        let scheme = match s.split_once(':') {
            None if s == "data" => WeightScheme::DataDriven,
            Some(("poly", v)) => WeightScheme::Polynomial {
                b: v.parse().map_err(|_| bad())?,
            },
            Some(("exp", v)) => WeightScheme::Exponential {
                c: v.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        scheme.validate().map_err(|e| e.to_string())?;
        Ok(scheme)
    }
}

/// Weights `beta_l` for the given (already truncated) eigenvalues.
pub fn allocate_weights(scheme: WeightScheme, eigenvalues: &[f64]) -> Result<Vec<f64>> {
    scheme.validate()?;
    match scheme {
        WeightScheme::DataDriven => {
            let total: f64 = eigenvalues.iter().filter(|&&l| l > 0.0).sum();
            if !(total > 0.0) {
                return Err(Error::NoPositiveEigenvalue);
            }
            Ok(eigenvalues.iter().map(|&l| l.max(0.0) / total).collect())
        }
        _ => {
            let zeta_b = match scheme {
                WeightScheme::Polynomial { b } => zeta(b)?,
                _ => 1.0,
            };
            Ok((1..=eigenvalues.len())
                .map(|l| scheme.deterministic(l, zeta_b))
                .collect())
        }
    }
}

/// Mirror of the data-driven allocation for the negative part of the spectrum.
fn negative_side_weights(eigenvalues: &[f64]) -> Vec<f64> {
    let total: f64 = eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    if total > 0.0 {
        eigenvalues.iter().map(|&l| (-l).max(0.0) / total).collect()
    } else {
        vec![0.0; eigenvalues.len()]
    }
}

/// One-sided spectral sums entering a SAGE boundary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SideAggregates {
    /// `sum lambda_l`
    pub total: f64,
    /// `sum lambda_l log(1 / beta_l)`
    pub log_weighted: f64,
    /// `sum lambda_l {g^{-1}(alpha beta_l)}^2`
    pub g_weighted: f64,
}

fn side_aggregates(
    eigenvalues: &[f64],
    weights: &[f64],
    alpha: f64,
    keep: impl Fn(f64) -> bool,
) -> Result<SideAggregates> {
    let mut agg = SideAggregates::default();
    for (&l, &b) in eigenvalues.iter().zip(weights) {
        if !keep(l) {
            continue;
        }
        if !(b > 0.0) {
            return Err(domain("beta", b, "a positive weight for every used eigenvalue"));
        }
        agg.total += l;
        agg.log_weighted += l * (1.0 / b).ln();
        agg.g_weighted += l * g_inv(alpha * b)?.powi(2);
    }
    Ok(agg)
}

/// Truncated spectrum and derived aggregates at one monitoring time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Retained eigenvalues, sorted by decreasing magnitude.
    pub eigenvalues: Vec<f64>,
    /// Budget weights for the positive side, one per retained eigenvalue.
    pub weights: Vec<f64>,
    /// Budget weights for the negative side. Equal to `weights` for the
    /// deterministic schemes.
    pub weights_minus: Vec<f64>,
    /// Trace estimate `Lambda`.
    pub lambda_total: f64,
    pub plus: SideAggregates,
    pub minus: SideAggregates,
    pub alpha: f64,
    pub scheme: WeightScheme,
    /// Set when data-driven weights were requested without any positive
    /// eigenvalue and `poly:2` was used instead.
    pub fallback_weights: bool,
    /// Stream length the estimate was taken at.
    pub n: usize,
    /// Order of the (possibly subsampled) Gram matrix that was decomposed.
    pub n_used: usize,
}

impl SpectrumEstimate {
    /// Builds an estimate from already-truncated eigenvalues and a trace value.
    pub fn from_eigenvalues(
        mut eigenvalues: Vec<f64>,
        lambda_total: f64,
        scheme: WeightScheme,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain("alpha", alpha, "alpha in (0, 1)"));
        }
        let order = top_by_magnitude(&eigenvalues, eigenvalues.len());
        eigenvalues = order.iter().map(|&i| eigenvalues[i]).collect();

        let (weights, fallback) = match allocate_weights(scheme, &eigenvalues) {
            Ok(w) => (w, false),
            Err(Error::NoPositiveEigenvalue) => (
                allocate_weights(WeightScheme::Polynomial { b: 2.0 }, &eigenvalues)?,
                true,
            ),
            Err(e) => return Err(e),
        };
        let weights_minus = match scheme {
            WeightScheme::DataDriven => negative_side_weights(&eigenvalues),
            _ => weights.clone(),
        };
        let plus = side_aggregates(&eigenvalues, &weights, alpha, |l| l > 0.0)?;
        let minus = side_aggregates(&eigenvalues, &weights_minus, alpha, |l| l < 0.0)?;
        let len = eigenvalues.len();
        Ok(SpectrumEstimate {
            eigenvalues,
            weights,
            weights_minus,
            lambda_total,
            plus,
            minus,
            alpha,
            scheme,
            fallback_weights: fallback,
            n: len,
            n_used: len,
        })
    }

    /// Same eigenvalues under a different allocation or level.
    pub fn reweighted(&self, scheme: WeightScheme, alpha: f64) -> Result<Self> {
        let mut est = Self::from_eigenvalues(self.eigenvalues.clone(), self.lambda_total, scheme, alpha)?;
        est.n = self.n;
        est.n_used = self.n_used;
        Ok(est)
    }

    pub fn truncation(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// How the leading eigenvalues are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    /// Dense up to [`DENSE_LIMIT`], Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub scheme: WeightScheme,
    pub alpha: f64,
    /// Truncation exponent `a`: `L = max(1, floor(N^a))`.
    pub trunc_exponent: f64,
    /// When set, only the first `ceil(n^w)` observations enter the Gram matrix.
    pub subsample_exponent: Option<f64>,
    pub method: EigenMethod,
}

impl SpectrumConfig {
    pub fn new(scheme: WeightScheme, alpha: f64) -> Self {
        SpectrumConfig {
            scheme,
            alpha,
            trunc_exponent: DEFAULT_TRUNC_EXPONENT,
            subsample_exponent: None,
            method: EigenMethod::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(domain("alpha", self.alpha, "alpha in (0, 1)"));
        }
        if !(self.trunc_exponent > 0.0 && self.trunc_exponent < 0.5) {
            return Err(domain("trunc_exponent", self.trunc_exponent, "a in (0, 1/2)"));
        }
        if let Some(w) = self.subsample_exponent {
            if !(w > 0.0 && w < 1.0) {
                return Err(domain("subsample_exponent", w, "w in (0, 1)"));
            }
        }
        Ok(())
    }

    /// Order of the Gram matrix used at stream length `n`.
    pub fn gram_order(&self, n: usize) -> usize {
        match self.subsample_exponent {
            Some(w) => ((n as f64).powf(w) - 1e-9).ceil().clamp(2.0, n as f64) as usize,
            None => n,
        }
    }

    /// Truncation number for a Gram matrix of order `order`.
    pub fn truncation(&self, order: usize) -> usize {
        let l = ((order as f64).powf(self.trunc_exponent) + 1e-9).floor() as usize;
        l.clamp(1, order)
    }
}

fn require_two(state: &UStatState) -> Result<usize> {
    match state.n() {
        n if n >= 2 => Ok(n),
        n => Err(Error::TooFewPoints(n)),
    }
}

/// `(h(X_i, X_j) - U_n) * scale` over the first `order` points, mirrored from
/// the lower triangle so the matrix is exactly symmetric.
fn scaled_centered_block(state: &UStatState, order: usize, scale: f64) -> Result<DMatrix<f64>> {
    let u = state.ustat()?;
    let mut k = DMatrix::zeros(order, order);
    for j in 0..order {
        for i in j..order {
            let v = (state.kernel_value(i, j) - u) * scale;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Centered Gram matrix `h(X_i, X_j) - U_n`, diagonal included.
pub fn centered_gram(state: &UStatState) -> Result<DMatrix<f64>> {
    let n = require_two(state)?;
    scaled_centered_block(state, n, 1.0)
}

/// Trace estimate `Lambda = n^{-1} sum_i h(X_i, X_i) - U_n`.
pub fn trace_estimate(state: &UStatState) -> Result<f64> {
    let n = require_two(state)?;
    Ok(state.diag_sum() / n as f64 - state.ustat()?)
}

/// The `count` eigenvalues of largest magnitude, sorted by decreasing magnitude.
pub fn top_eigenvalues(a: &DMatrix<f64>, count: usize, method: EigenMethod) -> Result<Vec<f64>> {
    let n = a.nrows();
    let count = count.min(n);
    let lanczos = match method {
        EigenMethod::Dense => false,
        EigenMethod::Lanczos => true,
        EigenMethod::Auto => n > DENSE_LIMIT && 4 * count < n,
    };
    if lanczos {
        if let Lanczos::Converged(vals) = lanczos_top(a, count) {
            return Ok(vals);
        }
    }
    let all = dense_eigenvalues(a)?;
    Ok(top_by_magnitude(&all, count).into_iter().map(|i| all[i]).collect())
}

/// Eigenvalue estimate of the scaled centered Gram matrix with aggregates.
pub fn estimate_spectrum(state: &UStatState, cfg: &SpectrumConfig) -> Result<SpectrumEstimate> {
    cfg.validate()?;
    let n = require_two(state)?;
    let order = cfg.gram_order(n);
    let block = scaled_centered_block(state, order, 1.0 / order as f64)?;
    let eigenvalues = top_eigenvalues(&block, cfg.truncation(order), cfg.method)?;
    let lambda_total = trace_estimate(state)?;
    let mut est = SpectrumEstimate::from_eigenvalues(eigenvalues, lambda_total, cfg.scheme, cfg.alpha)?;
    est.n = n;
    est.n_used = order;
    if est.plus.total <= 0.0 {
        warn!("no positive eigenvalue retained at n = {n}; SAGE upper boundary reduces to -Lambda/n");
    }
    if est.fallback_weights {
        warn!("data-driven weights undefined at n = {n}; using poly:2");
    }
    Ok(est)
}

fn check_sage(n: u64, est: &SpectrumEstimate, p: &BoundaryParams) -> Result<()> {
    p.validate()?;
    if n < p.m {
        return Err(Error::BeforeColdStart { n, m: p.m });
    }
    if p.kind == BoundaryKind::Gm && est.alpha != p.alpha {
        return Err(Error::AlphaMismatch {
            estimate: est.alpha,
            boundary: p.alpha,
        });
    }
    Ok(())
}

fn sage(n: u64, side: &SideAggregates, lambda_total: f64, p: &BoundaryParams) -> Result<f64> {
    let nf = n as f64;
    Ok(match p.kind {
        BoundaryKind::Lil => {
            let c = p.stitch_constant().powi(2) / (2.0 * nf);
            let t = p.lil_time_term(n) + p.lil_level_term()?;
            c * (t * side.total + side.log_weighted) - lambda_total / nf
        }
        BoundaryKind::Gm => {
            (side.total * (nf / p.m as f64).ln() + side.g_weighted - lambda_total) / nf
        }
    })
}

/// Plug-in SAGE upper boundary `Upsilon_{alpha,m}(n)`.
pub fn sage_upper(n: u64, est: &SpectrumEstimate, p: &BoundaryParams) -> Result<f64> {
    check_sage(n, est, p)?;
    sage(n, &est.plus, est.lambda_total, p)
}

/// Lower-tail counterpart built from the negative part of the spectrum.
pub fn sage_lower(n: u64, est: &SpectrumEstimate, p: &BoundaryParams) -> Result<f64> {
    check_sage(n, est, p)?;
    sage(n, &est.minus, est.lambda_total, p)
}

/// Geometric monitoring grid `{m, ceil(m r), ceil(m r^2), ...}` on which the
/// spectrum is refreshed.
#[derive(Debug, Clone)]
pub struct GeometricGrid {
    m: u64,
    ratio: f64,
    k: i32,
    next: u64,
}

impl GeometricGrid {
    pub fn new(m: u64, ratio: f64) -> Result<Self> {
        if !(ratio > 1.0 && ratio.is_finite()) {
            return Err(domain("grid ratio", ratio, "ratio > 1"));
        }
        Ok(GeometricGrid { m, ratio, k: 0, next: m })
    }

    fn point(&self, k: i32) -> u64 {
        (self.m as f64 * self.ratio.powi(k) - 1e-9).ceil() as u64
    }

    /// True when `n` reaches the next grid point; advances past `n`.
    pub fn due(&mut self, n: u64) -> bool {
        if n < self.next {
            return false;
        }
        while self.next <= n {
            self.k += 1;
            self.next = self.point(self.k).max(self.next + 1);
        }
        true
    }

    /// Grid points up to and including `n_max`.
    pub fn points_until(m: u64, ratio: f64, n_max: u64) -> Result<Vec<u64>> {
        let mut grid = GeometricGrid::new(m, ratio)?;
        Ok((m..=n_max).filter(|&n| grid.due(n)).collect())
    }
}
