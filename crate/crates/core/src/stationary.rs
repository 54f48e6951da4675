//! Stationary candidate of the growth-with-reset process.
//!
//! Setting the time derivative of the master equation to zero and solving the
//! one-step recurrence λ_n Q_n = μ_{n−1} Q_{n−1} gives the candidate
//!
//! ```text
//! Q_n = Q_0 · Π_{k=1..n} μ_{k−1} / λ_k
//!     = (Q_0 λ_0 / γ_n) · Z_n,      Z_n = r_n · Π_{k=0..n} 1/(1 + r_k),
//! ```
//!
//! with r_n = γ_n / μ_n. The weights Z_n telescope:
//!
//! ```text
//! Σ_{n=0..N} Z_n = 1 − Z_N / r_N = 1 − exp(−Σ_{n=0..N} ln(1 + r_n)),
//! ```
//!
//! so the reset-weight total S_0 = Σ Z_n is at most 1, and equals 1 exactly
//! when Σ ln(1 + r_n) diverges. The deficit 1 − S_0 is the candidate's
//! probability flux to infinity per unit of Q_0 λ_0: the recurrence telescopes
//! to the exact finite-N identity μ_N Q_N = λ_0 Q_0 (1 − Σ_{n≤N} Z_n), whose
//! limit λ_0 Q_0 (1 − S_0) is the mass current escaping through the "boundary
//! at infinity". A strictly positive limit means the candidate solves the
//! interior equations but not the balance at state 0, and the process admits
//! no stationary law.
//!
//! Everything here works in log space with compensated accumulation, so
//! ratios, weights, and partial sums stay accurate over millions of states.

use serde::{Deserialize, Serialize};

use crate::error::{RateError, StationaryError};
use crate::numeric::{self, NeumaierSum};
use crate::rates::{RateSequence, RDecay, TailClass};

/// Default threshold on the partial log sum Σ ln(1 + r_n) above which the
/// remaining product is below f64 resolution and S_0 is reported as exactly
/// one: e^(−40) ≈ 4e−18 is smaller than one ulp of 1.
pub const DEFAULT_TAIL_LOG_THRESHOLD: f64 = 40.0;

/// Hard cap on automatic summation extensions.
const EXTENSION_CAP: usize = 2_000_000;

/// Verdict on whether S_0 = Σ Z_n equals one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum S0Classification {
    /// Σ ln(1 + r_n) diverges (analytically, or numerically past threshold).
    ExactlyOne,
    /// The log sum converges: S_0 < 1 strictly.
    StrictlyBelowOne,
    /// No tail information (table rates below the numeric threshold).
    Undetermined,
}

/// Result of summing the reset weights Z_n up to a finite index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S0Result {
    /// Σ_{n=0..N} Z_n, evaluated as −expm1(−Σ ln(1 + r_n)).
    pub partial_value: f64,
    /// The largest index N included in the partial sum.
    pub n_used: usize,
    /// Σ_{n=0..N} ln(1 + r_n), the quantity that decides divergence.
    pub tail_log_sum: f64,
    pub classification: S0Classification,
    /// Enclosure for the true S_0: [partial, 1]. The partial sum is
    /// monotone increasing in N and 1 is the universal upper bound.
    pub bracket: (f64, f64),
}

/// Whether the candidate has finite total mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalizability {
    Yes,
    No,
    Undetermined,
}

/// A normalized stationary candidate over states 0..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    /// Ground-state weight after normalization.
    pub q0: f64,
    /// Q_0..Q_N, normalized so the full sum (including the tail estimate)
    /// is one.
    pub values: Vec<f64>,
    /// The reset-weight analysis the normalization used.
    pub s0: S0Result,
    /// Estimated boundary flux λ_0 Q_0 (1 − S_0) of the normalized candidate.
    pub boundary: BoundaryEstimate,
    /// Always `Yes` for a successfully normalized result; kept explicit so
    /// reports can carry the verdict.
    pub normalizable: Normalizability,
    /// Σ_{n=0..N} Q_n after normalization (below one by the tail mass).
    pub normalization_sum: f64,
}

/// Boundary flux estimate with an honest half-width.
///
/// The half-width is zero when the classification pins the limit (exactly-one
/// gives flux zero; strictly-below-one admits a tail-corrected evaluation).
/// For undetermined tails the value is the midpoint of the bracket induced by
/// S_0 ∈ [partial, 1] and the half-width spans it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub value: f64,
    pub half_width: f64,
}

/// The stationary candidate normalized over a finite truncation window,
/// with no tail estimate: Σ_{n=0..N} Q_n = 1 exactly. This is the natural
/// fixed point of the truncated evolution, and the self-consistent parameter
/// pair for the mass-conserving modification is (R = Q_0, S_0 = s_partial).
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedCandidate {
    pub q: Vec<f64>,
    pub q0: f64,
    /// Partial reset-weight sum Σ_{n=0..N} Z_n for the same window.
    pub s_partial: f64,
}

/// Iterates the stationary recurrence Q_n = Q_{n−1} μ_{n−1} / λ_n,
/// returning Q_0..Q_{n_max}.
///
/// The iteration runs on logarithms, so rapidly growing candidates are
/// detected (overflow error) rather than silently saturating, and decaying
/// ones underflow gracefully to subnormals/zero.
pub fn q_iterate(
    seq: &RateSequence,
    q0: f64,
    n_max: usize,
) -> Result<Vec<f64>, StationaryError> {
    if !(q0 > 0.0 && q0.is_finite()) {
        return Err(StationaryError::NotNormalizable(format!(
            "ground-state weight must be positive, got {q0}"
        )));
    }
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(q0);
    let mut ln_q = NeumaierSum::new();
    ln_q.add(q0.ln());
    for n in 1..=n_max {
        ln_q.add(seq.ln_mu_at(n - 1)?);
        ln_q.add(-seq.ln_lambda_at(n)?);
        let v = ln_q.total();
        if v > 709.0 {
            return Err(StationaryError::Overflow { index: n });
        }
        out.push(v.exp());
    }
    Ok(out)
}

/// Closed-form product evaluation of a single Q_n:
/// Q_n = Q_0 λ_0 exp(−ln μ_n − Σ_{k=0..n} ln(1 + r_k)).
///
/// Equivalent to [`q_iterate`] (the γ_n in the ratio form cancels), but
/// expressed through the reset weights; useful as an independent check and
/// for single far indices without materializing the whole prefix.
pub fn q_product_form(seq: &RateSequence, q0: f64, n: usize) -> Result<f64, StationaryError> {
    let ln_lambda0 = seq.ln_lambda_at(0)?;
    let mut log_sum = NeumaierSum::new();
    for k in 0..=n {
        log_sum.add(ln_r(seq, k)?.exp().ln_1p());
    }
    let ln_q = q0.ln() + ln_lambda0 - seq.ln_mu_at(n)? - log_sum.total();
    if ln_q > 709.0 {
        return Err(StationaryError::Overflow { index: n });
    }
    Ok(ln_q.exp())
}

/// Reset weight Z_n = r_n Π_{k=0..n} 1/(1 + r_k).
pub fn z_at(seq: &RateSequence, n: usize) -> Result<f64, StationaryError> {
    let ln_rn = ln_r(seq, n)?;
    let mut log_sum = NeumaierSum::new();
    for k in 0..=n {
        log_sum.add(ln_r(seq, k)?.exp().ln_1p());
    }
    Ok((ln_rn - log_sum.total()).exp())
}

fn ln_r(seq: &RateSequence, n: usize) -> Result<f64, RateError> {
    Ok(seq.ln_gamma_at(n)? - seq.ln_mu_at(n)?)
}

/// Σ_{n=0..n_max} ln(1 + r_n) with compensated, deterministically chunked
/// (optionally parallel) accumulation.
fn log_weight_sum(seq: &RateSequence, n_max: usize) -> Result<f64, StationaryError> {
    const CHUNK: usize = 65_536;
    let total_terms = n_max + 1;
    let workers = numeric::worker_count();
    if total_terms < 4 * CHUNK || workers < 2 {
        let mut acc = NeumaierSum::new();
        for n in 0..=n_max {
            acc.add(ln_r(seq, n)?.exp().ln_1p());
        }
        return Ok(acc.total());
    }

    // Fixed chunk boundaries; per-chunk sums combined in index order, so the
    // result is bitwise independent of the worker count.
    let n_chunks = total_terms.div_ceil(CHUNK);
    let chunk_sum = |c: usize| -> Result<f64, StationaryError> {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(total_terms);
        let mut acc = NeumaierSum::new();
        for n in start..end {
            acc.add(ln_r(seq, n)?.exp().ln_1p());
        }
        Ok(acc.total())
    };
    let mut per_worker: Vec<Vec<(usize, Result<f64, StationaryError>)>> =
        vec![Vec::new(); workers];
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (w, out) in per_worker.iter_mut().enumerate() {
            let chunk_sum = &chunk_sum;
            handles.push(scope.spawn(move || {
                let mut c = w;
                while c < n_chunks {
                    out.push((c, chunk_sum(c)));
                    c += workers;
                }
            }));
        }
        for h in handles {
            h.join().expect("summation worker panicked");
        }
    });
    let mut chunk_sums = vec![0.0f64; n_chunks];
    for slot in per_worker {
        for (c, r) in slot {
            chunk_sums[c] = r?;
        }
    }
    let mut acc = NeumaierSum::new();
    for v in chunk_sums {
        acc.add(v);
    }
    Ok(acc.total())
}

/// Computes the partial reset-weight sum S_0^(N) and classifies the limit.
///
/// Classification: exactly-one when the partial log sum exceeds
/// `tail_threshold` (the residual product is below f64 resolution) or when
/// [`RateSequence::classify_r_tail`] proves divergence; strictly-below-one
/// when the tail is summable; undetermined otherwise.
pub fn s0_compute(
    seq: &RateSequence,
    n_max: usize,
    tail_threshold: f64,
) -> Result<S0Result, StationaryError> {
    let log_sum = log_weight_sum(seq, n_max)?;
    let partial = -(-log_sum).exp_m1();
    let classification = if log_sum > tail_threshold
        || matches!(
            seq.classify_r_tail(),
            TailClass::NotVanishing | TailClass::HarmonicOrSlower
        ) {
        S0Classification::ExactlyOne
    } else if seq.classify_r_tail() == TailClass::SummableLog {
        S0Classification::StrictlyBelowOne
    } else {
        S0Classification::Undetermined
    };
    Ok(S0Result {
        partial_value: partial,
        n_used: n_max,
        tail_log_sum: log_sum,
        classification,
        bracket: (partial, 1.0),
    })
}

/// Estimate of the remaining log sum Σ_{n>N} ln(1 + r_n) for summable tails.
///
/// Power-like decay r_n ~ c n^(−s) uses the doubling trick: the block sum
/// over (N, 2N] approximates the full remainder times (1 − 2^(1−s)).
/// Geometric decay extends the sum directly until terms fall below 1e−18.
fn remainder_log_sum(seq: &RateSequence, n: usize) -> Result<Option<f64>, StationaryError> {
    match seq.r_decay() {
        Some(RDecay::PowerLike { s }) => {
            let mut block = NeumaierSum::new();
            for k in (n + 1)..=(2 * n + 1) {
                block.add(ln_r(seq, k)?.exp().ln_1p());
            }
            Ok(Some(block.total() / -(2f64.powf(1.0 - s) - 1.0)))
        }
        Some(RDecay::ExpLike { beta }) => {
            let mut acc = NeumaierSum::new();
            let mut k = n + 1;
            loop {
                let term = ln_r(seq, k)?.exp().ln_1p();
                acc.add(term);
                if term < 1e-18 || k > n + EXTENSION_CAP {
                    // Close the remaining geometric tail analytically.
                    acc.add(term * beta / (1.0 - beta));
                    break;
                }
                k += 1;
            }
            Ok(Some(acc.total()))
        }
        None => Ok(None),
    }
}

/// Best available deficit 1 − S_0 consistent with the classification:
/// zero for exactly-one, tail-corrected exp(−Σ ln(1+r)) for
/// strictly-below-one, `None` when undetermined.
pub(crate) fn s0_deficit(
    seq: &RateSequence,
    s0: &S0Result,
) -> Result<Option<f64>, StationaryError> {
    match s0.classification {
        S0Classification::ExactlyOne => Ok(Some(0.0)),
        S0Classification::StrictlyBelowOne => {
            match remainder_log_sum(seq, s0.n_used)? {
                Some(rem) => Ok(Some((-(s0.tail_log_sum + rem)).exp())),
                None => Ok(None),
            }
        }
        S0Classification::Undetermined => Ok(None),
    }
}

/// Exact finite-index boundary flux μ_n Q_n = λ_0 Q_0 exp(−Σ_{k≤n} ln(1+r_k)).
///
/// This is the probability current the candidate pushes past state n; it
/// decreases monotonically to λ_0 Q_0 (1 − S_0).
pub fn boundary_flux(seq: &RateSequence, q0: f64, n: usize) -> Result<f64, StationaryError> {
    let mut log_sum = NeumaierSum::new();
    for k in 0..=n {
        log_sum.add(ln_r(seq, k)?.exp().ln_1p());
    }
    Ok(q0 * seq.ln_lambda_at(0)?.exp() * (-log_sum.total()).exp())
}

/// Limiting boundary flux λ_0 Q_0 (1 − S_0) for a candidate with ground
/// weight `q0`.
pub fn boundary_limit(
    seq: &RateSequence,
    q0: f64,
    s0: &S0Result,
) -> Result<BoundaryEstimate, StationaryError> {
    let lambda0 = seq.lambda_at(0)?;
    match s0_deficit(seq, s0)? {
        Some(deficit) => Ok(BoundaryEstimate {
            value: lambda0 * q0 * deficit,
            half_width: 0.0,
        }),
        None => {
            // S_0 is only bracketed by [partial, 1]; report the midpoint.
            let max_deficit = 1.0 - s0.partial_value;
            Ok(BoundaryEstimate {
                value: lambda0 * q0 * max_deficit / 2.0,
                half_width: lambda0 * q0 * max_deficit / 2.0,
            })
        }
    }
}

/// Decides whether Σ Q_n converges, from the family asymptotics.
///
/// When S_0 < 1 strictly, μ_n Q_n has a positive limit, so Σ Q_n < ∞ iff
/// Σ 1/μ_n < ∞. Otherwise the one-step ratio Q_{n+1}/Q_n = μ_n/λ_{n+1}
/// decides: a limit below one is summable, above one is not, and at exactly
/// one the polynomial correction exponent p = deg μ + lim n·r_n settles it
/// (p > 1 summable, p < 1 not).
fn normalizability_verdict(
    seq: &RateSequence,
    classification: S0Classification,
) -> (Normalizability, String) {
    let Some((g, m)) = seq.family_asymptotics() else {
        return (
            Normalizability::Undetermined,
            "table rates carry no asymptotics".into(),
        );
    };

    if classification == S0Classification::StrictlyBelowOne {
        // μ_n Q_n → positive constant: total mass finite iff Σ 1/μ_n is.
        let summable = if m.base > 1.0 {
            true
        } else if m.base < 1.0 {
            false
        } else {
            m.deg > 1.0
        };
        return if summable {
            (
                Normalizability::Yes,
                "positive boundary flux with summable 1/mu".into(),
            )
        } else {
            (
                Normalizability::No,
                "positive boundary flux but divergent sum of 1/mu".into(),
            )
        };
    }

    // Ratio test on Q_{n+1}/Q_n = mu_n / lambda_{n+1} = 1/((1 + r_{n+1}) g_n)
    // where g_n = mu_{n+1}/mu_n. The limit of r_n follows from the asymptotics.
    let base_ratio = g.base / m.base;
    let r_limit = if base_ratio > 1.0 {
        f64::INFINITY
    } else if base_ratio < 1.0 {
        0.0
    } else {
        let d = g.deg - m.deg;
        if d > 0.0 {
            f64::INFINITY
        } else if d < 0.0 {
            0.0
        } else {
            g.coef / m.coef
        }
    };
    let mu_growth = m.base; // μ_{n+1}/μ_n → base (polynomial factor → 1)
    let ratio_limit = if r_limit.is_infinite() {
        0.0
    } else {
        1.0 / (mu_growth * (1.0 + r_limit))
    };

    if ratio_limit < 1.0 - 1e-12 {
        return (
            Normalizability::Yes,
            format!("candidate ratio limit {ratio_limit:.6} < 1"),
        );
    }
    if ratio_limit > 1.0 + 1e-12 {
        return (
            Normalizability::No,
            format!("candidate ratio limit {ratio_limit:.6} > 1"),
        );
    }

    // Ratio limit one: Q_n decays like n^(−p) with p = deg μ + lim n r_n.
    let n_r_limit = {
        let d = g.deg - m.deg;
        if base_ratio != 1.0 || d > -1.0 {
            f64::INFINITY
        } else if d < -1.0 {
            0.0
        } else {
            g.coef / m.coef
        }
    };
    let p = m.deg + n_r_limit;
    if p > 1.0 + 1e-12 {
        (
            Normalizability::Yes,
            format!("borderline ratio, decay exponent {p:.6} > 1"),
        )
    } else if p < 1.0 - 1e-12 {
        (
            Normalizability::No,
            format!("borderline ratio, decay exponent {p:.6} <= 1"),
        )
    } else {
        (
            Normalizability::Undetermined,
            "borderline ratio with decay exponent exactly 1".into(),
        )
    }
}

/// Normalizes the stationary candidate over 0..=n_max.
///
/// The tail mass Σ_{n>N} Q_n is closed exactly where the structure allows:
/// for constant γ the interior recurrence telescopes to
/// Σ_{n>N} γ Q_n = μ_N Q_N − λ_0 Q_0 (1 − S_0), evaluated without
/// cancellation as λ_0 Q_0 e^(−L_N) (1 − e^(−R)) with R the remaining log
/// sum; for a geometric candidate ratio the tail is the geometric series.
/// Otherwise the sum is extended until the increment falls below 1e−12
/// relative, and the reported `normalization_sum` discloses the truncation.
pub fn normalize(
    seq: &RateSequence,
    n_max: usize,
    s0: &S0Result,
) -> Result<StationaryResult, StationaryError> {
    let (verdict, detail) = normalizability_verdict(seq, s0.classification);
    match verdict {
        Normalizability::Yes => {}
        Normalizability::No => return Err(StationaryError::NotNormalizable(detail)),
        Normalizability::Undetermined => return Err(StationaryError::Undetermined(detail)),
    }

    let unscaled = q_iterate(seq, 1.0, n_max)?;
    let mut partial = NeumaierSum::new();
    for &q in &unscaled {
        partial.add(q);
    }
    let head = partial.total();

    let lambda0 = seq.lambda_at(0)?;
    let tail = if let Some(g) = seq.gamma_family().constant_value() {
        // Exact telescoped tail for constant reset rate:
        // Σ_{n>N} g Q_n = μ_N Q_N − λ_0 Q_0 (1 − S_0)
        //              = λ_0 Q_0 e^(−L_N) (1 − e^(−R)),
        // evaluated in the factored form to avoid cancellation.
        let log_n = log_weight_sum(seq, n_max)?;
        let remaining = match s0.classification {
            S0Classification::ExactlyOne => f64::INFINITY,
            _ => remainder_log_sum(seq, n_max)?.unwrap_or(f64::INFINITY),
        };
        (lambda0 / g) * (-log_n).exp() * -(-remaining).exp_m1()
    } else if let Some(ratio) = geometric_ratio(seq).filter(|q| *q < 1.0) {
        // Exact geometric tail when the one-step ratio is n-independent.
        unscaled[n_max] * ratio / (1.0 - ratio)
    } else {
        // Generic fallback: extend until increments are negligible relative
        // to the accumulated sum.
        let mut total = partial;
        let mut ln_q = NeumaierSum::new();
        ln_q.add(unscaled[n_max].ln());
        let mut n = n_max;
        loop {
            n += 1;
            ln_q.add(seq.ln_mu_at(n - 1)?);
            ln_q.add(-seq.ln_lambda_at(n)?);
            let q = ln_q.total().exp();
            total.add(q);
            if q < 1e-12 * total.total() {
                break;
            }
            if n > n_max + EXTENSION_CAP {
                return Err(StationaryError::Undetermined(
                    "partial sum did not converge within the extension cap".into(),
                ));
            }
        }
        total.total() - head
    };

    let q0 = 1.0 / (head + tail);
    let values: Vec<f64> = unscaled.iter().map(|&q| q * q0).collect();
    let boundary = boundary_limit(seq, q0, s0)?;
    Ok(StationaryResult {
        q0,
        values,
        s0: s0.clone(),
        boundary,
        normalizable: Normalizability::Yes,
        normalization_sum: head * q0,
    })
}

/// Exact one-step candidate ratio μ_n/λ_{n+1} when it is n-independent
/// (both families constant, or both exponential with a common base).
fn geometric_ratio(seq: &RateSequence) -> Option<f64> {
    let (g, m) = seq.family_asymptotics()?;
    let both_constant = g.base == 1.0 && g.deg == 0.0 && m.base == 1.0 && m.deg == 0.0;
    let both_exponential = g.deg == 0.0 && m.deg == 0.0 && g.base == m.base;
    if both_constant || both_exponential {
        Some(m.coef / (m.base * (g.coef + m.coef)))
    } else {
        None
    }
}

/// Normalizes the candidate over the truncation window alone:
/// Σ_{n=0..N} Q_n = 1 with no tail estimate. See [`TruncatedCandidate`].
pub fn truncated_candidate(
    seq: &RateSequence,
    n_max: usize,
) -> Result<TruncatedCandidate, StationaryError> {
    let unscaled = q_iterate(seq, 1.0, n_max)?;
    let mut sum = NeumaierSum::new();
    for &q in &unscaled {
        sum.add(q);
    }
    let total = sum.total();
    let q = unscaled.iter().map(|&v| v / total).collect();
    let log_sum = log_weight_sum(seq, n_max)?;
    Ok(TruncatedCandidate {
        q,
        q0: 1.0 / total,
        s_partial: -(-log_sum).exp_m1(),
    })
}
