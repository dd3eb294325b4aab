use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Open01, StandardNormal};

use crate::error::{domain, Result};
use crate::kernels::{DistParams, Family, KernelId, Mixer, Point};

/// Independent generator for replication (or stream) `stream` of experiment `seed`.
///
/// ChaCha keeps a separate 64-bit stream id next to the seed, so replication
/// `r` draws the same numbers no matter which thread runs it or in what order.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const LAPLACE_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn chi2_10() -> ChiSquared<f64> {
    ChiSquared::new(10.0).expect("10 degrees of freedom is valid")
}

fn t10<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let v = chi2_10().sample(rng);
    z / (v / 10.0).sqrt()
}

/// Unit-variance Laplace by inversion of its CDF.
fn laplace<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    if u < 0.5 {
        LAPLACE_SCALE * (2.0 * u).ln()
    } else {
        -LAPLACE_SCALE * (2.0 * (1.0 - u)).ln()
    }
}

fn scalar<R: Rng + ?Sized>(family: &Family, rng: &mut R) -> Result<f64> {
    Ok(match *family {
        Family::Gaussian { mean, var } => {
            let z: f64 = rng.sample(StandardNormal);
            mean + var.sqrt() * z
        }
        Family::T10 => t10(rng),
        Family::Laplace => laplace(rng),
        Family::Elliptical { rho, .. } => {
            return Err(domain("rho", rho, "a univariate family for scalar draws"))
        }
    })
}

/// One draw from `dist`: a scalar for univariate families, a 2-vector for
/// the elliptical family.
pub fn sample<R: Rng + ?Sized>(dist: &DistParams, rng: &mut R) -> Result<Point> {
    match dist.family {
        Family::Elliptical { rho, mixer } => sample_elliptical(rho, mixer, rng),
        ref f => Ok(Point::Scalar(scalar(f, rng)?)),
    }
}

/// `X = sqrt(W) A Z` with `A A^T = [[1, rho], [rho, 1]]` (Cholesky factor).
pub fn sample_elliptical<R: Rng + ?Sized>(rho: f64, mixer: Mixer, rng: &mut R) -> Result<Point> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(domain("rho", rho, "rho in [-1, 1]"));
    }
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let w = match mixer {
        Mixer::Gaussian => 1.0,
        Mixer::T10 => 10.0 / chi2_10().sample(rng),
        Mixer::Laplace => rng.sample::<f64, _>(Exp1),
    };
    let s = w.sqrt();
    let x1 = z1;
    let x2 = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
    Ok(Point::Vec2(s * x1, s * x2))
}

/// Paired two-sample draw `(X, Y + delta)` with `X, Y` i.i.d. from `dist`.
pub fn sample_paired_mmd<R: Rng + ?Sized>(dist: &DistParams, delta: f64, rng: &mut R) -> Result<Point> {
    if !(delta >= 0.0) {
        return Err(domain("delta", delta, "delta >= 0"));
    }
    let x = scalar(&dist.family, rng)?;
    let y = scalar(&dist.family, rng)?;
    Ok(Point::Pair(x, y + delta))
}

/// Draws the point variant `kernel` consumes; MMD pairs use `dist.shift`.
pub fn sample_for_kernel<R: Rng + ?Sized>(kernel: KernelId, dist: &DistParams, rng: &mut R) -> Result<Point> {
    match kernel {
        KernelId::MmdGauss => sample_paired_mmd(dist, dist.shift, rng),
        _ => {
            let p = sample(dist, rng)?;
            kernel.check(&p)?;
            Ok(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        (mean, var, m4 / (var * var))
    }

    fn draws(family: Family, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = replication_rng(seed, 0);
        (0..n)
            .map(|_| match sample(&DistParams::new(family), &mut rng).unwrap() {
                Point::Scalar(x) => x,
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn gaussian_mean() {
        let (mean, var, _) = moments(&draws(Family::Gaussian { mean: 0.0, var: 1.0 }, 1_000_000, 3));
        assert!(mean.abs() < 4.0 / 1000.0, "{mean}");
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn laplace_has_unit_variance() {
        let (_, var, kurt) = moments(&draws(Family::Laplace, 1_000_000, 4));
        assert!((var - 1.0).abs() < 0.01, "{var}");
        assert!((kurt - 6.0).abs() < 0.3, "{kurt}");
    }

    #[test]
    fn t10_variance() {
        let (_, var, _) = moments(&draws(Family::T10, 1_000_000, 5));
        assert!((var / 1.25 - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn elliptical_correlation_and_tails() {
        let mut rng = replication_rng(6, 0);
        let n = 1_000_000;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            if let Point::Vec2(a, b) = sample_elliptical(0.6, Mixer::Gaussian, &mut rng).unwrap() {
                xs.push(a);
                ys.push(b);
            }
        }
        let (mx, vx, _) = moments(&xs);
        let (my, vy, _) = moments(&ys);
        let cov = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n as f64;
        assert!((cov / (vx * vy).sqrt() - 0.6).abs() < 0.01);

        let mut rng = replication_rng(7, 0);
        let lap: Vec<f64> = (0..200_000)
            .map(|_| match sample_elliptical(0.6, Mixer::Laplace, &mut rng).unwrap() {
                Point::Vec2(a, _) => a,
                _ => unreachable!(),
            })
            .collect();
        assert!(moments(&lap).2 > 3.5);
        assert!(sample_elliptical(1.5, Mixer::Gaussian, &mut rng).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..5).map(|_| replication_rng(9, 1).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut r1 = replication_rng(9, 1);
        let mut r2 = replication_rng(9, 2);
        assert_ne!(r1.random::<u64>(), r2.random::<u64>());
    }

    #[test]
    fn paired_draws() {
        let mut rng = replication_rng(1, 0);
        let d = DistParams::standard_gaussian();
        assert!(sample_paired_mmd(&d, -1.0, &mut rng).is_err());
        assert!(matches!(sample_for_kernel(KernelId::MmdGauss, &d, &mut rng).unwrap(), Point::Pair(..)));
        assert!(sample_for_kernel(KernelId::SpatialKendall, &d, &mut rng).is_err());
    }
}
