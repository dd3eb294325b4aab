//! Monte Carlo crossing frequencies of the limiting processes.
//!
//! The Gaussian mean process `n^{-1} sum_{i<=n} Z_i` checks Gaussian
//! boundaries directly. For the degenerate regime, independent Brownian
//! motions observed at integer times are partial sums of i.i.d. normals, so
//! the quadratic chaos `n^{-2} sum_l lambda_l (W_l(n)^2 - n)` can be
//! simulated exactly on the monitoring grid for a finite spectrum.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::sampling::replication_rng;
use crate::boundaries::{Boundary, BoundaryParams};
use crate::error::{Error, Result};
use crate::spectral::{sage_upper, SpectrumEstimate, WeightScheme};

#[derive(Debug, Clone, PartialEq)]
pub enum CrossingProcess {
    /// Two-sided: crossing when `|n^{-1} S_n| > boundary(n)`.
    GaussianMean,
    /// One-sided: crossing when the chaos exceeds `boundary(n)`.
    Chaos { eigenvalues: Vec<f64> },
}

fn crosses<R: Rng>(process: &CrossingProcess, m: u64, bound: &[f64], rng: &mut R) -> bool {
    let horizon = m + bound.len() as u64 - 1;
    match process {
        CrossingProcess::GaussianMean => {
            let mut s = 0.0;
            for n in 1..=horizon {
                let z: f64 = rng.sample(StandardNormal);
                s += z;
                if n >= m && (s / n as f64).abs() > bound[(n - m) as usize] {
                    return true;
                }
            }
            false
        }
        CrossingProcess::Chaos { eigenvalues } => {
            let mut w = vec![0.0; eigenvalues.len()];
            for n in 1..=horizon {
                for wl in w.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *wl += z;
                }
                if n >= m {
                    let nf = n as f64;
                    let chaos: f64 = eigenvalues
                        .iter()
                        .zip(&w)
                        .map(|(l, wl)| l * (wl * wl - nf))
                        .sum::<f64>()
                        / (nf * nf);
                    if chaos > bound[(n - m) as usize] {
                        return true;
                    }
                }
            }
            false
        }
    }
}

/// Fraction of `reps` simulated paths that cross `boundary` at some
/// `n` in `[m, horizon]`.
pub fn mc_crossing_oracle<F>(
    process: &CrossingProcess,
    boundary: F,
    m: u64,
    horizon: u64,
    reps: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(u64) -> Result<f64>,
{
    if m < 1 || horizon < m {
        return Err(Error::Config(format!("need 1 <= m <= horizon, got m = {m}, horizon = {horizon}")));
    }
    if reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    let bound = (m..=horizon).map(&boundary).collect::<Result<Vec<f64>>>()?;
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r as u64);
            usize::from(crosses(process, m, &bound, &mut rng))
        })
        .sum();
    Ok(hits as f64 / reps as f64)
}

/// Crossing frequency of a Gaussian boundary by the Gaussian mean process.
pub fn gaussian_boundary_crossing(p: &BoundaryParams, horizon: u64, reps: usize, seed: u64) -> Result<f64> {
    let b = Boundary::new(*p)?;
    mc_crossing_oracle(&CrossingProcess::GaussianMean, |n| b.value(n), p.m, horizon, reps, seed)
}

/// Crossing frequency of the SAGE boundary built from a known finite spectrum
/// (with `Lambda = sum lambda_l`) by the corresponding chaos process.
pub fn chaos_boundary_crossing(
    eigenvalues: &[f64],
    scheme: WeightScheme,
    p: &BoundaryParams,
    horizon: u64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    let total: f64 = eigenvalues.iter().sum();
    let est = SpectrumEstimate::from_eigenvalues(eigenvalues.to_vec(), total, scheme, p.alpha)?;
    mc_crossing_oracle(
        &CrossingProcess::Chaos {
            eigenvalues: eigenvalues.to_vec(),
        },
        |n| sage_upper(n, &est, p),
        p.m,
        horizon,
        reps,
        seed,
    )
}
