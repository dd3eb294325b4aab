use rand_chacha::ChaCha8Rng;

use ustat_cs::boundaries::{Boundary, BoundaryParams};
use ustat_cs::kernels::{KernelId, Point};
use ustat_cs::sequences::{
    classical_ci_with, classical_test_record, degenerate_cs, nondegenerate_cs_with, weighted_chisq_quantile,
    CsRecord, Method,
};
use ustat_cs::simharness::replication_rng;
use ustat_cs::special::normal_quantile;
use ustat_cs::spectral::{estimate_spectrum, GeometricGrid, SpectrumConfig, SpectrumEstimate};
use ustat_cs::UStatState;

pub struct MonitorConfig {
    pub kernel: KernelId,
    pub methods: Vec<Method>,
    pub params: BoundaryParams,
    pub spectrum: SpectrumConfig,
    pub grid_ratio: f64,
    pub draws: usize,
    pub seed: u64,
}

enum Emitter {
    Asymp(Boundary),
    Sage(BoundaryParams),
    Ci(f64),
    Test,
}

/// Streaming driver: push points, get the records due at the new `n`.
pub struct Monitor {
    state: UStatState,
    m: u64,
    emitters: Vec<(Method, Emitter)>,
    spectrum: SpectrumConfig,
    grid: GeometricGrid,
    est: Option<SpectrumEstimate>,
    chi_quantile: f64,
    draws: usize,
    rng: ChaCha8Rng,
    alpha: f64,
}

impl Monitor {
    pub fn new(cfg: MonitorConfig) -> ustat_cs::Result<Self> {
        let mut emitters = Vec::new();
        for &method in &cfg.methods {
            let e = match method {
                Method::AsympCsLil | Method::AsympCsGm => {
                    Emitter::Asymp(Boundary::new(cfg.params.with_kind(method.boundary_kind().unwrap()))?)
                }
                Method::SageLil | Method::SageGm => Emitter::Sage(cfg.params.with_kind(method.boundary_kind().unwrap())),
                Method::ClassicalCi => Emitter::Ci(normal_quantile(1.0 - cfg.params.alpha / 2.0)?),
                Method::ClassicalTest => Emitter::Test,
            };
            emitters.push((method, e));
        }
        let needs_spectrum = cfg.methods.iter().any(Method::is_degenerate);
        let state = if needs_spectrum {
            UStatState::with_gram_cache(cfg.kernel)
        } else {
            UStatState::new(cfg.kernel)
        };
        Ok(Monitor {
            state,
            m: cfg.params.m.max(2),
            emitters,
            spectrum: cfg.spectrum,
            grid: GeometricGrid::new(cfg.params.m.max(2), cfg.grid_ratio)?,
            est: None,
            chi_quantile: 0.0,
            draws: cfg.draws,
            rng: replication_rng(cfg.seed, 0),
            alpha: cfg.params.alpha,
        })
    }

    pub fn push(&mut self, p: Point) -> ustat_cs::Result<Vec<CsRecord>> {
        self.state.push(p)?;
        let n = self.state.n() as u64;
        if n < self.m {
            return Ok(Vec::new());
        }
        let wants_spectrum = self.emitters.iter().any(|(m, _)| m.is_degenerate());
        if wants_spectrum && (self.grid.due(n) || self.est.is_none()) {
            let est = estimate_spectrum(&self.state, &self.spectrum)?;
            if self.emitters.iter().any(|(m, _)| *m == Method::ClassicalTest) {
                self.chi_quantile = weighted_chisq_quantile(&est.eigenvalues, self.alpha, self.draws, &mut self.rng)?;
            }
            self.est = Some(est);
        }
        let mut out = Vec::with_capacity(self.emitters.len());
        for (_, e) in &self.emitters {
            let rec = match e {
                Emitter::Asymp(b) => nondegenerate_cs_with(&self.state, b)?,
                Emitter::Sage(p) => degenerate_cs(&self.state, p, self.est.as_ref().expect("spectrum"))?,
                Emitter::Ci(z) => Some(classical_ci_with(&self.state, *z)?),
                Emitter::Test => Some(classical_test_record(&self.state, self.chi_quantile / n as f64)?),
            };
            out.extend(rec);
        }
        Ok(out)
    }
}
