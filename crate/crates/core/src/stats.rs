//! Small statistics toolkit: running means, binomial proportions and
//! Kolmogorov-Smirnov tests.

use alloc::vec::Vec;
use core::f64::consts::PI;

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self) -> Option<MeanEstimate> {
        if self.n == 0 {
            return None;
        }
        let std_err = if self.n > 1 {
            let var = self.m2 / (self.n - 1) as f64;
            libm::sqrt(var / self.n as f64)
        } else {
            f64::NAN
        };
        Some(MeanEstimate {
            mean: self.mean,
            std_err,
            n: self.n,
        })
    }
}

impl Extend<f64> for MeanAccumulator {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.push(x);
        }
    }
}

/// Mean of a correlated series with a batch-means standard error: the
/// series is cut into `batches` contiguous blocks and the spread of the block
/// means gives the error. Trailing samples that do not fill a block are used
/// in the mean only.
pub fn batch_means(samples: &[f64], batches: usize) -> Option<MeanEstimate> {
    if batches < 2 || samples.len() < batches {
        return None;
    }
    let size = samples.len() / batches;
    let mut blocks = MeanAccumulator::default();
    for chunk in samples.chunks_exact(size).take(batches) {
        blocks.push(chunk.iter().sum::<f64>() / size as f64);
    }
    let block_est = blocks.estimate()?;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Some(MeanEstimate {
        mean,
        std_err: block_est.std_err,
        n: samples.len() as u64,
    })
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: u64,
}

impl MeanEstimate {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        let mut acc = MeanAccumulator::default();
        acc.extend(samples.iter().copied());
        acc.estimate()
    }

    /// Distance from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_err
    }
}

/// Binomial frequency `successes / trials` with its plug-in standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub value: f64,
    pub std_err: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Option<Self> {
        if trials == 0 || successes > trials {
            return None;
        }
        let value = successes as f64 / trials as f64;
        Some(Self {
            successes,
            trials,
            value,
            std_err: libm::sqrt(value * (1.0 - value) / trials as f64),
        })
    }

    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        // A zero plug-in error (all or nothing observed) falls back to the
        // error implied by the target.
        let se = if self.std_err > 0.0 {
            self.std_err
        } else {
            libm::sqrt(target * (1.0 - target) / self.trials as f64)
        };
        libm::fabs(self.value - target) <= k * se
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > z)`.
pub fn kolmogorov_survival(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 1.18 {
        // Jacobi theta inversion converges fast for small z.
        let mut cdf = 0.0;
        let w = PI * PI / (8.0 * z * z);
        for k in 1..=8 {
            let j = (2 * k - 1) as f64;
            cdf += libm::exp(-j * j * w);
        }
        let cdf = libm::sqrt(2.0 * PI) / z * cdf;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=20 {
            let k = k as f64;
            let term = libm::exp(-2.0 * k * k * z * z);
            if (k as u32) % 2 == 1 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value of a KS statistic for effective sample size `n_eff`,
/// with Stephens' finite-sample correction.
pub fn ks_p_value(statistic: f64, n_eff: f64) -> f64 {
    let sqrt_n = libm::sqrt(n_eff);
    kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n_eff: f64,
}

impl KsTest {
    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// One-sample KS test of `samples` against a continuous `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Option<KsTest> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Some(KsTest {
        statistic,
        p_value: ks_p_value(statistic, n),
        n_eff: n,
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Option<KsTest> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut statistic: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        statistic = statistic.max(libm::fabs(i as f64 / na - j as f64 / nb));
    }
    let n_eff = na * nb / (na + nb);
    Some(KsTest {
        statistic,
        p_value: ks_p_value(statistic, n_eff),
        n_eff,
    })
}

/// Equal-width histogram over `[lo, hi)`; values outside are dropped.
pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = alloc::vec![0u64; bins];
    if bins == 0 || !(hi > lo) {
        return counts;
    }
    let width = (hi - lo) / bins as f64;
    for &x in samples {
        if x >= lo && x < hi {
            let k = ((x - lo) / width) as usize;
            counts[k.min(bins - 1)] += 1;
        }
    }
    counts
}
