//! Seeded Monte Carlo experiments: coverage and width curves, cold-start
//! sensitivity, size and power of the degenerate tests, and the sensitivity
//! of the SAGE width to the weight allocation.
//!
//! Every replication owns an independent generator derived from the
//! experiment seed and its index, replications run in parallel, and the
//! per-replication results are reduced in index order, so results do not
//! depend on the number of threads.

mod oracle;
pub mod output;
mod sampling;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use oracle::{chaos_boundary_crossing, gaussian_boundary_crossing, mc_crossing_oracle, CrossingProcess};
pub use sampling::{replication_rng, sample, sample_elliptical, sample_for_kernel, sample_paired_mmd};

use crate::accumulator::UStatState;
use crate::boundaries::{Boundary, BoundaryKind, BoundaryParams, DEFAULT_ETA, DEFAULT_S};
use crate::error::{Error, Result};
use crate::kernels::{true_theta, DistParams, KernelId};
use crate::sequences::{
    classical_ci_record, classical_test_record, degenerate_cs, nondegenerate_record, weighted_chisq_quantile,
    Method, DEFAULT_CLASSICAL_DRAWS,
};
use crate::special::normal_quantile;
use crate::spectral::{
    estimate_spectrum, sage_upper, EigenMethod, GeometricGrid, SpectrumConfig, SpectrumEstimate, WeightScheme,
    DEFAULT_GRID_RATIO, DEFAULT_TRUNC_EXPONENT,
};

/// Stream offset of the generators that draw the chi-square critical values.
const CLASSICAL_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Cumulative miscoverage and mean half-width of nondegenerate methods.
    Coverage,
    /// Size and power of the degenerate sequential tests over `delta_grid`.
    Power,
    /// Coverage for every cold start in `m_grid`.
    Coldstart,
    /// SAGE width under polynomial, exponential and data-driven weights.
    Weights,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Coverage => "coverage",
            ExperimentKind::Power => "power",
            ExperimentKind::Coldstart => "coldstart",
            ExperimentKind::Weights => "weights",
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}
fn default_weight_scheme() -> WeightScheme {
    WeightScheme::DataDriven
}
fn default_trunc_exponent() -> f64 {
    DEFAULT_TRUNC_EXPONENT
}
fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_s() -> f64 {
    DEFAULT_S
}
fn default_grid_ratio() -> f64 {
    DEFAULT_GRID_RATIO
}
fn default_classical_draws() -> usize {
    DEFAULT_CLASSICAL_DRAWS
}
fn default_b_grid() -> Vec<f64> {
    vec![2.0, 8.0, 14.0, 20.0]
}
fn default_c_grid() -> Vec<f64> {
    vec![2.0, 4.5, 7.0]
}

/// Experiment description; the JSON form rejects unknown keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub kernel: KernelId,
    pub dist: DistParams,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub m: u64,
    pub n_max: u64,
    pub reps: usize,
    /// Empty means the default set for the experiment kind.
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default = "default_weight_scheme")]
    pub weight_scheme: WeightScheme,
    #[serde(default = "default_trunc_exponent")]
    pub trunc_exponent: f64,
    #[serde(default)]
    pub subsample_exponent: Option<f64>,
    #[serde(default)]
    pub delta_grid: Vec<f64>,
    #[serde(default)]
    pub m_grid: Vec<u64>,
    #[serde(default = "default_b_grid")]
    pub b_grid: Vec<f64>,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_grid_ratio")]
    pub grid_ratio: f64,
    #[serde(default = "default_classical_draws")]
    pub classical_draws: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Bare configuration with defaults for every optional field.
    pub fn new(experiment: ExperimentKind, kernel: KernelId, dist: DistParams, m: u64, n_max: u64, reps: usize) -> Self {
        ExperimentConfig {
            experiment,
            kernel,
            dist,
            alpha: default_alpha(),
            m,
            n_max,
            reps,
            methods: Vec::new(),
            weight_scheme: default_weight_scheme(),
            trunc_exponent: default_trunc_exponent(),
            subsample_exponent: None,
            delta_grid: Vec::new(),
            m_grid: Vec::new(),
            b_grid: default_b_grid(),
            c_grid: default_c_grid(),
            theta0: 0.0,
            eta: default_eta(),
            s: default_s(),
            grid_ratio: default_grid_ratio(),
            classical_draws: default_classical_draws(),
            seed: 0,
        }
    }

    /// GMD on standard Gaussian data, `m = 400` to `n = 5000`.
    pub fn gmd_coverage(reps: usize, seed: u64) -> Self {
        let mut c = Self::new(
            ExperimentKind::Coverage,
            KernelId::Gmd,
            DistParams::standard_gaussian(),
            400,
            5000,
            reps,
        );
        c.seed = seed;
        c
    }

    /// GMD cold-start study over `m in {50, 100, 200}` to `n = 10^4`.
    pub fn gmd_coldstart(reps: usize, seed: u64) -> Self {
        let mut c = Self::new(
            ExperimentKind::Coldstart,
            KernelId::Gmd,
            DistParams::standard_gaussian(),
            50,
            10_000,
            reps,
        );
        c.m_grid = vec![50, 100, 200];
        c.seed = seed;
        c
    }

    /// Gaussian-kernel MMD, `m = 400` to `n = 2000`, shifts `{0, 0.05, ..., 0.45}`.
    pub fn mmd_power(reps: usize, seed: u64) -> Self {
        let mut c = Self::new(
            ExperimentKind::Power,
            KernelId::MmdGauss,
            DistParams::standard_gaussian(),
            400,
            2000,
            reps,
        );
        c.delta_grid = (0..10).map(|i| i as f64 * 0.05).collect();
        c.seed = seed;
        c
    }

    /// SAGE-LIL width on the MMD null under the default `b` and `c` sweeps.
    pub fn mmd_weights(reps: usize, seed: u64) -> Self {
        let mut c = Self::new(
            ExperimentKind::Weights,
            KernelId::MmdGauss,
            DistParams::standard_gaussian(),
            400,
            2000,
            reps,
        );
        c.seed = seed;
        c
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Methods evaluated by this experiment.
    pub fn effective_methods(&self) -> Vec<Method> {
        if !self.methods.is_empty() {
            let mut m = self.methods.clone();
            m.sort();
            m.dedup();
            return m;
        }
        match self.experiment {
            ExperimentKind::Coverage => vec![Method::AsympCsLil, Method::AsympCsGm, Method::ClassicalCi],
            ExperimentKind::Coldstart => vec![Method::AsympCsLil],
            ExperimentKind::Power => vec![Method::SageLil, Method::SageGm, Method::ClassicalTest],
            ExperimentKind::Weights => vec![Method::SageLil],
        }
    }

    /// Cold starts covered by the experiment.
    pub fn cold_starts(&self) -> Vec<u64> {
        if self.experiment == ExperimentKind::Coldstart && !self.m_grid.is_empty() {
            self.m_grid.clone()
        } else {
            vec![self.m]
        }
    }

    fn boundary_params(&self, kind: BoundaryKind, m: u64) -> Result<BoundaryParams> {
        BoundaryParams::with_stitching(kind, self.alpha, m, self.eta, self.s)
    }

    fn spectrum_config(&self, scheme: WeightScheme) -> SpectrumConfig {
        SpectrumConfig {
            scheme,
            alpha: self.alpha,
            trunc_exponent: self.trunc_exponent,
            subsample_exponent: self.subsample_exponent,
            method: EigenMethod::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        if self.reps == 0 {
            return cfg_err("reps must be >= 1".into());
        }
        self.dist.validate()?;
        for &m in &self.cold_starts() {
            if m < 2 {
                return cfg_err(format!("m must be >= 2, got {m}"));
            }
            if self.n_max <= m {
                return cfg_err(format!("n_max = {} must exceed m = {m}", self.n_max));
            }
            for kind in [BoundaryKind::Lil, BoundaryKind::Gm] {
                self.boundary_params(kind, m)?;
            }
        }
        if !(self.grid_ratio > 1.0 && self.grid_ratio.is_finite()) {
            return cfg_err(format!("grid_ratio must exceed 1, got {}", self.grid_ratio));
        }
        if let Some(d) = self.delta_grid.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return cfg_err(format!("delta_grid values must be >= 0, got {d}"));
        }
        if !self.theta0.is_finite() {
            return cfg_err("theta0 must be finite".into());
        }
        let methods = self.effective_methods();
        let degenerate = matches!(self.experiment, ExperimentKind::Power | ExperimentKind::Weights);
        if let Some(bad) = methods.iter().find(|m| m.is_degenerate() != degenerate) {
            return cfg_err(format!("method {bad} does not apply to a {} experiment", self.experiment.as_str()));
        }
        if degenerate {
            if self.kernel != KernelId::MmdGauss {
                return cfg_err(format!("{} experiments need the mmd-gauss kernel", self.experiment.as_str()));
            }
            if self.dist.is_bivariate() {
                return cfg_err("the MMD experiments need a univariate family".into());
            }
            self.spectrum_config(self.weight_scheme).validate()?;
            if methods.contains(&Method::ClassicalTest) && self.classical_draws < crate::sequences::MIN_CLASSICAL_DRAWS {
                return cfg_err(format!(
                    "classical_draws must be >= {}, got {}",
                    crate::sequences::MIN_CLASSICAL_DRAWS,
                    self.classical_draws
                ));
            }
        } else if true_theta(self.kernel, &self.dist).is_none() {
            return cfg_err(format!(
                "no closed-form target for kernel {} under {:?}",
                self.kernel, self.dist.family
            ));
        }
        if self.experiment == ExperimentKind::Power && self.delta_grid.is_empty() {
            return cfg_err("power experiments need a non-empty delta_grid".into());
        }
        if self.experiment == ExperimentKind::Weights {
            for &b in &self.b_grid {
                WeightScheme::Polynomial { b }.validate()?;
            }
            for &c in &self.c_grid {
                WeightScheme::Exponential { c }.validate()?;
            }
        }
        Ok(())
    }
}

/// Coverage curve of one method and cold start over `n = n_start..=n_start + len - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageCurve {
    pub m: u64,
    pub method: Method,
    pub n_start: u64,
    /// Fraction of replications that failed to cover at some time `<= n`.
    pub cum_miscoverage: Vec<f64>,
    pub mean_halfwidth: Vec<f64>,
}

/// Fraction of replications that rejected `theta0` by time `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionCurve {
    pub delta: f64,
    pub method: Method,
    pub n_start: u64,
    pub cum_rejection: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerPoint {
    pub delta: f64,
    pub method: Method,
    /// Rejection rate by `n_max`.
    pub power: f64,
}

/// Mean SAGE width of one weight scheme on the spectrum-refresh grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityCurve {
    pub method: Method,
    pub scheme: WeightScheme,
    pub ns: Vec<u64>,
    pub width: Vec<f64>,
}

impl SensitivityCurve {
    pub fn width_at(&self, n: u64) -> Option<f64> {
        self.ns.iter().position(|&k| k == n).map(|i| self.width[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub coverage: Vec<CoverageCurve>,
    pub rejection: Vec<RejectionCurve>,
    pub power: Vec<PowerPoint>,
    pub sensitivity: Vec<SensitivityCurve>,
    pub wall_time_secs: f64,
}

impl ExperimentResult {
    fn empty(config: &ExperimentConfig) -> Self {
        ExperimentResult {
            config: config.clone(),
            coverage: Vec::new(),
            rejection: Vec::new(),
            power: Vec::new(),
            sensitivity: Vec::new(),
            wall_time_secs: 0.0,
        }
    }

    pub fn coverage_curve(&self, method: Method, m: u64) -> Option<&CoverageCurve> {
        self.coverage.iter().find(|c| c.method == method && c.m == m)
    }

    pub fn rejection_curve(&self, method: Method, delta: f64) -> Option<&RejectionCurve> {
        self.rejection.iter().find(|c| c.method == method && c.delta == delta)
    }

    pub fn power_at(&self, method: Method, delta: f64) -> Option<f64> {
        self.power
            .iter()
            .find(|p| p.method == method && p.delta == delta)
            .map(|p| p.power)
    }

    pub fn sensitivity_curve(&self, method: Method, scheme: WeightScheme) -> Option<&SensitivityCurve> {
        self.sensitivity
            .iter()
            .find(|c| c.method == method && c.scheme == scheme)
    }

    /// Checks that cumulative curves are nondecreasing and rates lie in `[0, 1]`.
    pub fn check_invariants(&self) -> Result<()> {
        let monotone = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]) && v.iter().all(|x| (0.0..=1.0).contains(x));
        for c in &self.coverage {
            if !monotone(&c.cum_miscoverage) {
                return Err(Error::Numeric(format!("miscoverage of {} (m = {}) is not monotone", c.method, c.m)));
            }
        }
        for c in &self.rejection {
            if !monotone(&c.cum_rejection) {
                return Err(Error::Numeric(format!("rejection curve of {} is not monotone", c.method)));
            }
        }
        if let Some(p) = self.power.iter().find(|p| !(0.0..=1.0).contains(&p.power)) {
            return Err(Error::Numeric(format!("power {} outside [0, 1]", p.power)));
        }
        Ok(())
    }

    /// One-line digest: terminal miscoverage, power or width per method.
    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        for c in &self.coverage {
            let last = c.cum_miscoverage.last().copied().unwrap_or(0.0);
            parts.push(format!("{} m={} miscoverage={last}", c.method, c.m));
        }
        for p in &self.power {
            parts.push(format!("{} delta={} power={}", p.method, p.delta, p.power));
        }
        for c in &self.sensitivity {
            if let Some(w) = c.width.last() {
                parts.push(format!("{} {} width={w}", c.method, c.scheme));
            }
        }
        format!(
            "{} ({} reps, n_max={}): {}",
            self.config.experiment.as_str(),
            self.config.reps,
            self.config.n_max,
            parts.join("; ")
        )
    }
}

/// Runs the experiment named by `config.experiment`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    match config.experiment {
        ExperimentKind::Coverage => run_coverage(config),
        ExperimentKind::Coldstart => run_coldstart(config),
        ExperimentKind::Power => run_power(config),
        ExperimentKind::Weights => run_weight_sensitivity(config),
    }
}

fn timed(config: &ExperimentConfig, body: impl FnOnce(&mut ExperimentResult) -> Result<()>) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let mut result = ExperimentResult::empty(config);
    body(&mut result)?;
    result.wall_time_secs = start.elapsed().as_secs_f64();
    result.check_invariants()?;
    Ok(result)
}

/// Index of the first failure (relative to `n_start`) turned into a
/// cumulative rate over `len` times.
fn cumulative_rate(first: impl Iterator<Item = Option<usize>>, len: usize, reps: usize) -> Vec<f64> {
    let mut hist = vec![0usize; len];
    for i in first.flatten() {
        hist[i] += 1;
    }
    let mut acc = 0usize;
    hist.iter()
        .map(|h| {
            acc += h;
            acc as f64 / reps as f64
        })
        .collect()
}

struct CoverageRep {
    first_miss: Vec<Option<usize>>,
    halfwidth: Vec<Vec<f64>>,
}

fn coverage_rep(config: &ExperimentConfig, m: u64, methods: &[Method], theta: f64, rep: usize) -> Result<CoverageRep> {
    let mut rng = replication_rng(config.seed, rep as u64);
    let mut state = UStatState::new(config.kernel);
    let boundaries = methods
        .iter()
        .map(|method| match method.boundary_kind() {
            Some(kind) => Boundary::new(config.boundary_params(kind, m)?).map(Some),
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let z = normal_quantile(1.0 - config.alpha / 2.0)?;
    let len = (config.n_max - m + 1) as usize;
    let mut out = CoverageRep {
        first_miss: vec![None; methods.len()],
        halfwidth: vec![Vec::with_capacity(len); methods.len()],
    };
    for n in 1..=config.n_max {
        state.push(sample_for_kernel(config.kernel, &config.dist, &mut rng)?)?;
        if n < m {
            continue;
        }
        let u = state.ustat()?;
        let sigma = state.jackknife_sigma2()?.sqrt();
        for (k, (method, boundary)) in methods.iter().zip(&boundaries).enumerate() {
            let rec = match (method, boundary) {
                (Method::ClassicalCi, _) => classical_ci_record(n, u, sigma, z),
                (_, Some(b)) => nondegenerate_record(n, u, sigma, b)?,
                _ => return Err(Error::Config(format!("method {method} is not a coverage method"))),
            };
            if out.first_miss[k].is_none() && !rec.contains(theta) {
                out.first_miss[k] = Some((n - m) as usize);
            }
            out.halfwidth[k].push(rec.half_width());
        }
    }
    Ok(out)
}

fn coverage_curves(config: &ExperimentConfig, m: u64) -> Result<Vec<CoverageCurve>> {
    let theta = true_theta(config.kernel, &config.dist)
        .ok_or_else(|| Error::Config(format!("no closed-form target for kernel {}", config.kernel)))?;
    let methods = config.effective_methods();
    let reps: Vec<CoverageRep> = (0..config.reps)
        .into_par_iter()
        .map(|r| coverage_rep(config, m, &methods, theta, r))
        .collect::<Result<_>>()?;
    let len = (config.n_max - m + 1) as usize;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let mut width = vec![0.0; len];
            for rep in &reps {
                for (w, h) in width.iter_mut().zip(&rep.halfwidth[k]) {
                    *w += h;
                }
            }
            width.iter_mut().for_each(|w| *w /= config.reps as f64);
            CoverageCurve {
                m,
                method,
                n_start: m,
                cum_miscoverage: cumulative_rate(reps.iter().map(|r| r.first_miss[k]), len, config.reps),
                mean_halfwidth: width,
            }
        })
        .collect())
}

/// Cumulative miscoverage and mean half-width of the nondegenerate methods.
pub fn run_coverage(config: &ExperimentConfig) -> Result<ExperimentResult> {
    timed(config, |res| {
        res.coverage = coverage_curves(config, config.m)?;
        Ok(())
    })
}

/// [`run_coverage`] once per cold start in `m_grid`.
pub fn run_coldstart(config: &ExperimentConfig) -> Result<ExperimentResult> {
    timed(config, |res| {
        for m in config.cold_starts() {
            res.coverage.extend(coverage_curves(config, m)?);
        }
        Ok(())
    })
}

fn spectral_state(kernel: KernelId, subsample: Option<f64>) -> UStatState {
    // The cache only pays off when the full Gram matrix is decomposed.
    if subsample.is_none() {
        UStatState::with_gram_cache(kernel)
    } else {
        UStatState::new(kernel)
    }
}

fn power_rep(config: &ExperimentConfig, delta: f64, methods: &[Method], rep: usize) -> Result<Vec<Option<usize>>> {
    let mut rng = replication_rng(config.seed, rep as u64);
    let mut crit_rng = replication_rng(config.seed, CLASSICAL_STREAM | rep as u64);
    let spec_cfg = config.spectrum_config(config.weight_scheme);
    let params = methods
        .iter()
        .map(|method| method.boundary_kind().map(|k| config.boundary_params(k, config.m)).transpose())
        .collect::<Result<Vec<_>>>()?;
    let classical = methods.contains(&Method::ClassicalTest);
    let mut state = spectral_state(config.kernel, config.subsample_exponent);
    let mut grid = GeometricGrid::new(config.m, config.grid_ratio)?;
    let mut est: Option<SpectrumEstimate> = None;
    let mut chi_quantile = 0.0;
    let mut first = vec![None; methods.len()];

    for n in 1..=config.n_max {
        state.push(sample_paired_mmd(&config.dist, delta, &mut rng)?)?;
        if n < config.m {
            continue;
        }
        if grid.due(n) {
            let e = estimate_spectrum(&state, &spec_cfg)?;
            if classical {
                chi_quantile =
                    weighted_chisq_quantile(&e.eigenvalues, config.alpha, config.classical_draws, &mut crit_rng)?;
            }
            est = Some(e);
        }
        let e = est.as_ref().expect("spectrum is estimated at n = m");
        for (k, (method, p)) in methods.iter().zip(&params).enumerate() {
            if first[k].is_some() {
                continue;
            }
            let rec = match (method, p) {
                (Method::ClassicalTest, _) => classical_test_record(&state, chi_quantile / n as f64)?,
                (_, Some(p)) => degenerate_cs(&state, p, e)?.expect("n >= m"),
                _ => return Err(Error::Config(format!("method {method} is not a test"))),
            };
            if !rec.contains(config.theta0) {
                first[k] = Some((n - config.m) as usize);
            }
        }
        if first.iter().all(Option::is_some) {
            break;
        }
    }
    Ok(first)
}

/// Cumulative rejection curves for every shift and power at `n_max`.
///
/// Replication `r` reuses the same underlying draws at every shift.
pub fn run_power(config: &ExperimentConfig) -> Result<ExperimentResult> {
    timed(config, |res| {
        let methods = config.effective_methods();
        let len = (config.n_max - config.m + 1) as usize;
        for &delta in &config.delta_grid {
            let reps: Vec<Vec<Option<usize>>> = (0..config.reps)
                .into_par_iter()
                .map(|r| power_rep(config, delta, &methods, r))
                .collect::<Result<_>>()?;
            for (k, &method) in methods.iter().enumerate() {
                let curve = cumulative_rate(reps.iter().map(|r| r[k]), len, config.reps);
                res.power.push(PowerPoint {
                    delta,
                    method,
                    power: *curve.last().expect("len >= 1"),
                });
                res.rejection.push(RejectionCurve {
                    delta,
                    method,
                    n_start: config.m,
                    cum_rejection: curve,
                });
            }
        }
        Ok(())
    })
}

/// Schemes swept by the weight-sensitivity experiment.
pub fn swept_schemes(config: &ExperimentConfig) -> Vec<WeightScheme> {
    let mut s: Vec<WeightScheme> = config.b_grid.iter().map(|&b| WeightScheme::Polynomial { b }).collect();
    s.extend(config.c_grid.iter().map(|&c| WeightScheme::Exponential { c }));
    s.push(WeightScheme::DataDriven);
    s
}

/// Times at which widths are reported: the refresh grid plus `n_max`.
fn sensitivity_times(config: &ExperimentConfig) -> Result<Vec<u64>> {
    let mut ns = GeometricGrid::points_until(config.m, config.grid_ratio, config.n_max)?;
    if ns.last() != Some(&config.n_max) {
        ns.push(config.n_max);
    }
    Ok(ns)
}

fn sensitivity_rep(
    config: &ExperimentConfig,
    schemes: &[WeightScheme],
    params: &[BoundaryParams],
    ns: &[u64],
    rep: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = replication_rng(config.seed, rep as u64);
    let spec_cfg = config.spectrum_config(WeightScheme::DataDriven);
    let mut state = spectral_state(config.kernel, config.subsample_exponent);
    let mut widths = vec![Vec::with_capacity(ns.len()); params.len() * schemes.len()];
    let mut next = ns.iter().peekable();
    for n in 1..=config.n_max {
        state.push(sample_paired_mmd(&config.dist, config.dist.shift, &mut rng)?)?;
        if next.peek() != Some(&&n) {
            continue;
        }
        next.next();
        let base = estimate_spectrum(&state, &spec_cfg)?;
        for (i, p) in params.iter().enumerate() {
            for (j, &scheme) in schemes.iter().enumerate() {
                let est = base.reweighted(scheme, config.alpha)?;
                widths[i * schemes.len() + j].push(sage_upper(n, &est, p)?);
            }
        }
    }
    Ok(widths)
}

/// Mean SAGE width for every swept weight scheme on the configured stream.
pub fn run_weight_sensitivity(config: &ExperimentConfig) -> Result<ExperimentResult> {
    timed(config, |res| {
        let methods = config.effective_methods();
        let schemes = swept_schemes(config);
        let ns = sensitivity_times(config)?;
        let params = methods
            .iter()
            .map(|m| config.boundary_params(m.boundary_kind().expect("SAGE method"), config.m))
            .collect::<Result<Vec<_>>>()?;
        let reps: Vec<Vec<Vec<f64>>> = (0..config.reps)
            .into_par_iter()
            .map(|r| sensitivity_rep(config, &schemes, &params, &ns, r))
            .collect::<Result<_>>()?;
        for (i, &method) in methods.iter().enumerate() {
            for (j, &scheme) in schemes.iter().enumerate() {
                let idx = i * schemes.len() + j;
                let mut width = vec![0.0; ns.len()];
                for rep in &reps {
                    for (w, x) in width.iter_mut().zip(&rep[idx]) {
                        *w += x;
                    }
                }
                width.iter_mut().for_each(|w| *w /= config.reps as f64);
                res.sensitivity.push(SensitivityCurve {
                    method,
                    scheme,
                    ns: ns.clone(),
                    width,
                });
            }
        }
        Ok(())
    })
}
