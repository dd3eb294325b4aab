//! Streaming state of a degree-two U-statistic.
//!
//! Every observation is retained. A push evaluates the kernel against all
//! previous points, so the cost per observation is `O(n)` and the pair sum,
//! the per-point row sums `r_i = sum_{j != i} h(X_i, X_j)` and the diagonal sum
//! `sum_i h(X_i, X_i)` stay current. `U_n` and the jackknife variance are read
//! off these sums.

use crate::error::{Error, Result};
use crate::kernels::{KernelId, Point};

/// Number of pushes between full recomputations of the running sums.
pub const REFRESH_INTERVAL: usize = 4096;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Sums recomputed from scratch by [`batch_ustat`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSums {
    pub pair_sum: f64,
    pub row_sums: Vec<f64>,
    pub diag_sum: f64,
}

#[derive(Debug, Clone)]
pub struct UStatState {
    kernel: KernelId,
    points: Vec<Point>,
    pair_sum: CompensatedSum,
    row_sums: Vec<CompensatedSum>,
    diag_sum: CompensatedSum,
    since_refresh: usize,
    /// Packed lower triangle (diagonal included) of kernel values, when cached.
    gram: Option<Vec<f64>>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

impl UStatState {
    pub fn new(kernel: KernelId) -> Self {
        UStatState {
            kernel,
            points: Vec::new(),
            pair_sum: CompensatedSum::default(),
            row_sums: Vec::new(),
            diag_sum: CompensatedSum::default(),
            since_refresh: 0,
            gram: None,
        }
    }

    /// A state that also stores every kernel value it evaluates, so that the
    /// Gram matrix can be read back without re-evaluating the kernel.
    /// Memory grows as `n^2 / 2` doubles.
    pub fn with_gram_cache(kernel: KernelId) -> Self {
        UStatState {
            gram: Some(Vec::new()),
            ..Self::new(kernel)
        }
    }

    pub fn kernel(&self) -> KernelId {
        self.kernel
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn pair_sum(&self) -> f64 {
        self.pair_sum.value()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row_sums[i].value()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.row_sums.iter().map(CompensatedSum::value).collect()
    }

    pub fn diag_sum(&self) -> f64 {
        self.diag_sum.value()
    }

    pub fn has_gram_cache(&self) -> bool {
        self.gram.is_some()
    }

    /// Adds one observation. Costs `n` kernel evaluations.
    pub fn push(&mut self, x: Point) -> Result<()> {
        self.kernel.check(&x)?;
        let kernel = self.kernel;
        let mut new_row = CompensatedSum::default();
        if let Some(gram) = self.gram.as_mut() {
            gram.reserve(self.points.len() + 1);
        }
        for (j, p) in self.points.iter().enumerate() {
            let h = kernel.eval_unchecked(&x, p);
            self.row_sums[j].add(h);
            new_row.add(h);
            if let Some(gram) = self.gram.as_mut() {
                gram.push(h);
            }
        }
        let diag = kernel.eval_unchecked(&x, &x);
        if let Some(gram) = self.gram.as_mut() {
            gram.push(diag);
        }
        self.diag_sum.add(diag);
        self.pair_sum.add(new_row.value());
        self.row_sums.push(new_row);
        self.points.push(x);

        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_INTERVAL {
            self.refresh();
        }
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = Point>>(&mut self, xs: I) -> Result<()> {
        for x in xs {
            self.push(x)?;
        }
        Ok(())
    }

    /// Recomputes every running sum from the retained points (or the cached
    /// kernel values) to discard accumulated rounding drift.
    pub fn refresh(&mut self) {
        let n = self.points.len();
        let mut rows = vec![CompensatedSum::default(); n];
        let mut diag = CompensatedSum::default();
        for i in 0..n {
            for j in 0..i {
                let h = self.kernel_value(i, j);
                rows[i].add(h);
                rows[j].add(h);
            }
            diag.add(self.kernel_value(i, i));
        }
        self.pair_sum = half_total(&rows);
        self.row_sums = rows;
        self.diag_sum = diag;
        self.since_refresh = 0;
    }

    /// `h(X_i, X_j)`, from the cache when present.
    #[inline]
    pub fn kernel_value(&self, i: usize, j: usize) -> f64 {
        match &self.gram {
            Some(g) => g[packed(i, j)],
            None => self.kernel.eval_unchecked(&self.points[i], &self.points[j]),
        }
    }

    fn require_two(&self) -> Result<usize> {
        match self.points.len() {
            n if n >= 2 => Ok(n),
            n => Err(Error::TooFewPoints(n)),
        }
    }

    /// `U_n = 2 S / (n (n - 1))` with `S` the sum over unordered pairs.
    pub fn ustat(&self) -> Result<f64> {
        let n = self.require_two()? as f64;
        Ok(2.0 * self.pair_sum.value() / (n * (n - 1.0)))
    }

    /// Leave-one-out means `q_i = r_i / (n - 1)`.
    pub fn loo_means(&self) -> Result<Vec<f64>> {
        let n = self.require_two()?;
        let denom = (n - 1) as f64;
        Ok(self.row_sums.iter().map(|r| r.value() / denom).collect())
    }

    /// Jackknife estimate of the first-projection variance,
    /// `(1/n) sum_i q_i^2 - U_n^2`.
    ///
    /// Computed as the empirical variance of the `q_i` (their mean is `U_n`),
    /// which is the same quantity and cannot round below zero.
    pub fn jackknife_sigma2(&self) -> Result<f64> {
        let q = self.loo_means()?;
        let n = q.len() as f64;
        let mean = q.iter().copied().collect::<CompensatedSum>().value() / n;
        let ss = q
            .iter()
            .map(|&qi| (qi - mean) * (qi - mean))
            .collect::<CompensatedSum>()
            .value();
        Ok(ss / n)
    }
}

fn half_total(rows: &[CompensatedSum]) -> CompensatedSum {
    let total: CompensatedSum = rows.iter().map(CompensatedSum::value).collect();
    let mut half = CompensatedSum::default();
    half.add(0.5 * total.sum);
    half.add(0.5 * total.comp);
    half
}

/// Recomputes the pair sum, row sums and diagonal sum with a double loop.
pub fn batch_ustat(points: &[Point], kernel: KernelId) -> Result<BatchSums> {
    for p in points {
        kernel.check(p)?;
    }
    let n = points.len();
    let mut rows = vec![CompensatedSum::default(); n];
    let mut pair = CompensatedSum::default();
    let mut diag = CompensatedSum::default();
    for i in 0..n {
        for j in (i + 1)..n {
            let h = kernel.eval_unchecked(&points[i], &points[j]);
            rows[i].add(h);
            rows[j].add(h);
            pair.add(h);
        }
        diag.add(kernel.eval_unchecked(&points[i], &points[i]));
    }
    Ok(BatchSums {
        pair_sum: pair.value(),
        row_sums: rows.iter().map(CompensatedSum::value).collect(),
        diag_sum: diag.value(),
    })
}
