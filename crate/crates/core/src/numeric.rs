//! Small numerical utilities: compensated summation, stable log-sum-exp,
//! and exact binomial coefficients.

/// Neumaier's improved Kahan summation.
///
/// Keeps a running compensation term so that sums of many small terms (long
/// rate products, partial masses) do not lose low-order bits. The final value
/// is `total()`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.total()
}

/// `ln(exp(a) + exp(b))` without overflow or underflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Binomial coefficient as f64, exact for all values below 2^53.
///
/// The interleaved multiply/divide keeps every intermediate an integer
/// (each partial product is itself a binomial coefficient).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 1..=k {
        acc = acc * (n - k + i) as f64 / i as f64;
    }
    acc.round()
}

/// Worker count for chunked parallel reductions.
///
/// Defaults to the machine's available parallelism, capped by the
/// `RGLAB_THREADS` environment variable when set. The chunked reductions
/// combine per-chunk results in index order, so the outcome is bitwise
/// identical for every worker count.
pub fn worker_count() -> usize {
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    match std::env::var("RGLAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        Some(cap) if cap >= 1 => hw.min(cap),
        _ => hw,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_lost_bits() {
        // Naive summation of 1 + 1e-16 * 10^7 collapses to ~2.0 with visible
        // error; compensation keeps it at full precision.
        let mut acc = NeumaierSum::new();
        acc.add(1.0);
        for _ in 0..10_000_000 {
            acc.add(1e-16);
        }
        let exact = 1.0 + 1e-9;
        assert!((acc.total() - exact).abs() < 1e-15);
    }

    #[test]
    fn log_add_exp_matches_direct_in_safe_range() {
        let cases: [(f64, f64); 4] = [(0.0, 0.0), (-3.0, 1.5), (10.0, -40.0), (2.0, 2.0)];
        for (a, b) in cases {
            let direct = (a.exp() + b.exp()).ln();
            assert!((log_add_exp(a, b) - direct).abs() <= 1e-14 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn log_add_exp_survives_extremes() {
        // exp(800) overflows f64; the stable form must not.
        let v = log_add_exp(800.0, 800.0);
        assert!((v - (800.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(0, 0), 1.0);
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(10, 3), 120.0);
        assert_eq!(binomial(5, 6), 0.0);
        assert_eq!(binomial(30, 15), 155117520.0);
    }
}
