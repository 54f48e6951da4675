//! Adversarial initial data: relaxation that pauses on command.
//!
//! For the two closed-form families the stationary points of the deviation
//! Δ_n(t) are roots of an explicit degree-n polynomial whose coefficients are
//! linear in the initial deviations. Running that linearly backwards turns
//! prescription into construction: pick n target times beyond any horizon M,
//! expand the monic polynomial with those roots, solve the triangular system
//! for Δ_0(0)..Δ_n(0), and scale the whole profile by a small ε > 0 until
//!
//! 1. every component P_k(0) = Q_k + Δ_k(0) lies in [0, 1], and
//! 2. the window mass Σ_{k≤n} P_k(0) stays ≤ 1, the remainder being parked
//!    at state n+1.
//!
//! Scaling by ε multiplies the stationary-point polynomial by ε and moves no
//! root, so feasibility costs nothing. The result: a legitimate probability
//! distribution whose distance to equilibrium at state n has exactly n
//! stationary points, the last one later than M — for any n and any M.
//!
//! [`verify`] re-derives everything from the produced initial data alone:
//! it rebuilds the polynomial, re-extracts roots, checks the probability
//! constraints, and independently counts sign changes of the numerically
//! differentiated deviation.

use crate::error::AdversarialError;
use crate::poly::{self, RealPolynomial};
use crate::rates::RateSequence;
use crate::stationary;
use crate::transient::{ConstantGrowthTransient, LinearGrowthTransient};

/// Default root-stretch factor applied when verification fails.
const DEFAULT_STRETCH: f64 = 1.25;
/// Stretch retries before giving up.
const MAX_STRETCH_ROUNDS: usize = 10;
/// Absolute slack on probability checks.
const PROB_TOL: f64 = 1e-12;

/// Request for adversarial initial data.
#[derive(Debug, Clone)]
pub struct AdversarialSpec {
    /// Number of stationary points to plant (state index watched is also n).
    pub n: usize,
    /// Horizon: the last stationary point must land beyond this time.
    pub m_time: f64,
    /// Perturbation scale; chosen automatically when `None`.
    pub epsilon: Option<f64>,
    /// Root-stretch factor for verification retries; default 1.25.
    pub stretch: Option<f64>,
}

/// Constructed initial data plus its verification certificate.
#[derive(Debug, Clone)]
pub struct AdversarialResult {
    /// P_0(0)..P_{n+1}(0); states beyond n+1 carry no mass.
    pub initial_p: Vec<f64>,
    /// Δ_0(0)..Δ_n(0) — the deviations that drive Δ_n.
    pub initial_deltas: Vec<f64>,
    /// The planted stationary times, ascending.
    pub predicted_points: Vec<f64>,
    /// The horizon the construction was asked to beat.
    pub m_time: f64,
    /// The perturbation scale actually used.
    pub epsilon: f64,
    pub certificate: Certificate,
}

/// Independent re-verification of an [`AdversarialResult`].
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Components of P(0) in [0, 1] and total mass 1.
    pub probability_ok: bool,
    /// P_k(0) − Q_k reproduces the stored deviations on the window.
    pub deltas_consistent: bool,
    /// Re-extracted root count (with multiplicity) equals n.
    pub root_count_ok: bool,
    /// Re-extracted roots match the predicted points.
    pub points_match: bool,
    /// Latest stationary point exceeds the horizon M.
    pub latest_exceeds_m: bool,
    /// Finite-difference sign changes of Δ_n along a time grid count n.
    pub sign_changes_ok: bool,
    /// No sign change occurs after the last predicted point.
    pub monotone_after_last: bool,
    /// Zero deviation profile (nothing to verify).
    pub degenerate: bool,
    /// Human-readable description of every failed check.
    pub failures: Vec<String>,
}

impl Certificate {
    pub fn pass(&self) -> bool {
        self.probability_ok
            && self.deltas_consistent
            && self.root_count_ok
            && self.points_match
            && self.latest_exceeds_m
            && self.sign_changes_ok
            && self.monotone_after_last
            && !self.degenerate
    }

    /// Converts a failed certificate into an error naming the failed checks.
    pub fn ensure(&self) -> Result<(), AdversarialError> {
        if self.pass() {
            Ok(())
        } else {
            Err(AdversarialError::VerificationFailed(
                self.failures.join("; "),
            ))
        }
    }
}

/// Solves the constant-rate back-substitution: given the monomial
/// coefficients of the target stationary-point polynomial, returns the
/// initial deviations producing it. The map is linear in the target.
pub fn solve_deltas_constant(target: &[f64], mu: f64, lambda: f64) -> Vec<f64> {
    let n = target.len() - 1;
    // Coefficient of x^k is (μ Δ_{n−k−1} − λ Δ_{n−k})/k! for k < n and
    // −λ Δ_0/n! for k = n; invert top-down.
    let mut fact = vec![1.0f64; n + 1];
    for k in 1..=n {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut deltas = vec![0.0f64; n + 1];
    deltas[0] = -target[n] * fact[n] / lambda;
    for k in (0..n).rev() {
        deltas[n - k] = (mu * deltas[n - k - 1] - target[k] * fact[k]) / lambda;
    }
    deltas
}

/// Solves the linear-growth back-substitution: modal coefficients C_k from
/// the monomial coefficients of the target polynomial in y = e^(−σt).
pub fn solve_modal_linear(target: &[f64], lambda0: f64, sigma: f64) -> Vec<f64> {
    target
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            -m / (crate::numeric::binomial(target.len() - 1, k) * (lambda0 + k as f64 * sigma))
        })
        .collect()
}

/// Plants n stationary points beyond `m_time` for constant rates.
/// The rate pair must be (constant, constant).
pub fn construct_constant(
    spec: &AdversarialSpec,
    seq: &RateSequence,
) -> Result<AdversarialResult, AdversarialError> {
    validate_spec(spec)?;
    let (Some(_), Some(mu)) = (
        seq.gamma_family().constant_value(),
        seq.mu_family().constant_value(),
    ) else {
        return Err(AdversarialError::InvalidSpec(
            "constant construction requires constant reset and growth rates".into(),
        ));
    };
    let lambda = seq.lambda_at(0)?;
    let n = spec.n;
    let q = window_candidate(seq, n)?;
    let stretch = spec.stretch.unwrap_or(DEFAULT_STRETCH);

    let mut last_failures = Vec::new();
    for round in 0..=MAX_STRETCH_ROUNDS {
        let factor = stretch.powi(round as i32);
        // Evenly spread roots in x = μt with the largest at 1.2·μ·M·factor.
        let x_max = 1.2 * mu * spec.m_time * factor;
        let x_roots: Vec<f64> = (1..=n).map(|i| x_max * i as f64 / n as f64).collect();
        let target = RealPolynomial::from_roots(&x_roots);
        let unit_deltas = solve_deltas_constant(target.coeffs(), mu, lambda);
        let epsilon = choose_epsilon(&unit_deltas, &q, spec.epsilon)?;
        let deltas: Vec<f64> = unit_deltas.iter().map(|d| d * epsilon).collect();
        let initial_p = assemble_distribution(&deltas, &q);
        let predicted: Vec<f64> = x_roots.iter().map(|x| x / mu).collect();
        let result = AdversarialResult {
            initial_p,
            initial_deltas: deltas,
            predicted_points: predicted,
            m_time: spec.m_time,
            epsilon,
            certificate: Certificate::empty(),
        };
        let certificate = verify(&result, seq)?;
        if certificate.pass() {
            return Ok(AdversarialResult {
                certificate,
                ..result
            });
        }
        last_failures = certificate.failures;
    }
    Err(AdversarialError::VerificationFailed(format!(
        "after {MAX_STRETCH_ROUNDS} stretch rounds: {}",
        last_failures.join("; ")
    )))
}

/// Plants n stationary points beyond `m_time` for linear growth
/// μ_n = σ(n+1) with constant reset.
pub fn construct_linear(
    spec: &AdversarialSpec,
    seq: &RateSequence,
) -> Result<AdversarialResult, AdversarialError> {
    validate_spec(spec)?;
    let (Some(gamma), Some(sigma)) = (
        seq.gamma_family().constant_value(),
        seq.mu_family().unit_offset_slope(),
    ) else {
        return Err(AdversarialError::InvalidSpec(
            "linear construction requires constant reset and unit-offset linear growth".into(),
        ));
    };
    let lambda0 = gamma + sigma;
    let n = spec.n;
    let q = window_candidate(seq, n)?;
    let stretch = spec.stretch.unwrap_or(DEFAULT_STRETCH);

    let mut last_failures = Vec::new();
    for round in 0..=MAX_STRETCH_ROUNDS {
        let factor = stretch.powi(round as i32);
        // Geometric ladder of times from t_hi = 1.2·M·factor down toward
        // t_lo ≈ 0.105/σ (y = 0.9); roots live in y = e^(−σt) ∈ (0, 1).
        let t_hi = 1.2 * spec.m_time * factor;
        let t_lo = -(0.9f64.ln()) / sigma;
        let times: Vec<f64> = if n == 1 {
            vec![t_hi]
        } else {
            (0..n)
                .map(|i| t_lo * (t_hi / t_lo).powf(i as f64 / (n - 1) as f64))
                .collect()
        };
        let y_roots: Vec<f64> = times.iter().map(|t| (-sigma * t).exp()).collect();
        let target = RealPolynomial::from_roots(&y_roots);
        let unit_c = solve_modal_linear(target.coeffs(), lambda0, sigma);
        let unit_tr = LinearGrowthTransient::from_modal_coeffs(gamma, sigma, unit_c)
            .map_err(AdversarialError::Transient)?;
        let unit_deltas = unit_tr.initial_deltas();
        let epsilon = choose_epsilon(&unit_deltas, &q, spec.epsilon)?;
        let deltas: Vec<f64> = unit_deltas.iter().map(|d| d * epsilon).collect();
        let initial_p = assemble_distribution(&deltas, &q);
        let mut predicted = times.clone();
        predicted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let result = AdversarialResult {
            initial_p,
            initial_deltas: deltas,
            predicted_points: predicted,
            m_time: spec.m_time,
            epsilon,
            certificate: Certificate::empty(),
        };
        let certificate = verify(&result, seq)?;
        if certificate.pass() {
            return Ok(AdversarialResult {
                certificate,
                ..result
            });
        }
        last_failures = certificate.failures;
    }
    Err(AdversarialError::VerificationFailed(format!(
        "after {MAX_STRETCH_ROUNDS} stretch rounds: {}",
        last_failures.join("; ")
    )))
}

fn validate_spec(spec: &AdversarialSpec) -> Result<(), AdversarialError> {
    if spec.n == 0 {
        return Err(AdversarialError::InvalidSpec(
            "need at least one stationary point".into(),
        ));
    }
    if !(spec.m_time > 0.0 && spec.m_time.is_finite()) {
        return Err(AdversarialError::InvalidSpec(format!(
            "horizon must be positive, got {}",
            spec.m_time
        )));
    }
    if let Some(e) = spec.epsilon {
        if !(e > 0.0 && e.is_finite()) {
            return Err(AdversarialError::InvalidSpec(format!(
                "epsilon must be positive, got {e}"
            )));
        }
    }
    if let Some(s) = spec.stretch {
        if !(s > 1.0 && s.is_finite()) {
            return Err(AdversarialError::InvalidSpec(format!(
                "stretch must exceed 1, got {s}"
            )));
        }
    }
    Ok(())
}

/// Normalized candidate Q_0..Q_{n+1} (window plus the parking state).
fn window_candidate(seq: &RateSequence, n: usize) -> Result<Vec<f64>, AdversarialError> {
    let window = (n + 1).max(64);
    let s0 = stationary::s0_compute(seq, window, stationary::DEFAULT_TAIL_LOG_THRESHOLD)?;
    let res = stationary::normalize(seq, window, &s0)?;
    Ok(res.values[..=n + 1].to_vec())
}

/// Largest ε keeping −Q_k ≤ εΔ̂_k ≤ 1 − Q_k componentwise and
/// Σ (εΔ̂_k + Q_k) ≤ 1, then halved for margin (or the user's ε when it
/// already fits; otherwise it is halved until feasible).
fn choose_epsilon(
    unit_deltas: &[f64],
    q: &[f64],
    requested: Option<f64>,
) -> Result<f64, AdversarialError> {
    let mut bound = f64::INFINITY;
    for (k, &d) in unit_deltas.iter().enumerate() {
        if d > 0.0 {
            bound = bound.min((1.0 - q[k]) / d);
        } else if d < 0.0 {
            bound = bound.min(q[k] / -d);
        }
    }
    let sum_d: f64 = crate::numeric::sum(unit_deltas);
    let sum_q: f64 = crate::numeric::sum(&q[..unit_deltas.len()]);
    if sum_d > 0.0 {
        bound = bound.min((1.0 - sum_q) / sum_d);
    }
    if !(bound > 0.0) {
        return Err(AdversarialError::FeasibilityUnderflow);
    }
    let mut eps = match requested {
        Some(e) => e.min(bound / 2.0),
        None => (bound / 2.0).min(1.0),
    };
    // Paranoid halving: guarantee strict feasibility in floating point.
    for _ in 0..200 {
        if is_feasible(unit_deltas, q, eps) {
            return Ok(eps);
        }
        eps /= 2.0;
        if eps < 1e-300 {
            break;
        }
    }
    Err(AdversarialError::FeasibilityUnderflow)
}

fn is_feasible(unit_deltas: &[f64], q: &[f64], eps: f64) -> bool {
    let mut sum = crate::numeric::NeumaierSum::new();
    for (k, &d) in unit_deltas.iter().enumerate() {
        let p = q[k] + eps * d;
        if !(0.0..=1.0).contains(&p) {
            return false;
        }
        sum.add(p);
    }
    (0.0..=1.0).contains(&sum.total())
}

/// P_k(0) = Q_k + Δ_k on the window, remainder parked at state n+1.
fn assemble_distribution(deltas: &[f64], q: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = deltas.iter().zip(q).map(|(d, q)| q + d).collect();
    let used: f64 = crate::numeric::sum(&p);
    p.push(1.0 - used);
    p
}

/// Re-verifies a constructed result from its initial data alone.
///
/// Detects the family from the rate sequence, rebuilds the stationary-point
/// polynomial of Δ_n, re-extracts its roots, and cross-checks the count
/// against finite-difference sign changes of the closed-form deviation.
pub fn verify(
    result: &AdversarialResult,
    seq: &RateSequence,
) -> Result<Certificate, AdversarialError> {
    let n = result.initial_deltas.len() - 1;
    let q = window_candidate(seq, n)?;
    let mut failures = Vec::new();

    // Probability constraints.
    let mut mass = crate::numeric::NeumaierSum::new();
    let mut probability_ok = true;
    for (k, &p) in result.initial_p.iter().enumerate() {
        if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&p) {
            probability_ok = false;
            failures.push(format!("component {k} out of [0,1]: {p}"));
        }
        mass.add(p);
    }
    if (mass.total() - 1.0).abs() > PROB_TOL {
        probability_ok = false;
        failures.push(format!("total mass {} != 1", mass.total()));
    }

    // Stored deviations must equal P − Q on the window.
    let mut deltas_consistent = true;
    for k in 0..=n {
        let expected = result.initial_p[k] - q[k];
        if (result.initial_deltas[k] - expected).abs() > PROB_TOL {
            deltas_consistent = false;
            failures.push(format!(
                "delta {k} inconsistent: stored {}, P−Q gives {expected}",
                result.initial_deltas[k]
            ));
        }
    }

    // Rebuild the polynomial and re-extract stationary times.
    let family = detect_family(seq)?;
    let (sp_poly, computed_points, delta_at): (
        RealPolynomial,
        Vec<f64>,
        Box<dyn Fn(f64) -> f64>,
    ) = match family {
        Family::Constant { mu, lambda } => {
            let gamma = lambda - mu;
            let tr = ConstantGrowthTransient::new(gamma, mu, result.initial_deltas.clone())
                .map_err(AdversarialError::Transient)?;
            let p = tr.stationary_point_poly(n).map_err(AdversarialError::Transient)?;
            if p.is_zero() {
                return Ok(Certificate::degenerate());
            }
            let roots = poly::real_roots(&p, 0.0, f64::INFINITY, poly::DEFAULT_ROOT_TOL)?;
            let times: Vec<f64> = roots
                .iter()
                .flat_map(|r| std::iter::repeat(r.value / mu).take(r.multiplicity))
                .collect();
            let trc = tr.clone();
            (p, times, Box::new(move |t| trc.delta(n, t).unwrap()))
        }
        Family::Linear { gamma, sigma } => {
            let tr = LinearGrowthTransient::from_initial_deltas(
                gamma,
                sigma,
                &result.initial_deltas,
            )
            .map_err(AdversarialError::Transient)?;
            let p = tr.stationary_point_poly(n).map_err(AdversarialError::Transient)?;
            if p.is_zero() {
                return Ok(Certificate::degenerate());
            }
            let roots = poly::real_roots(&p, 0.0, 1.0, poly::DEFAULT_ROOT_TOL)?;
            let mut times: Vec<f64> = roots
                .iter()
                .flat_map(|r| std::iter::repeat(tr.time_from_y(r.value)).take(r.multiplicity))
                .collect();
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let trc = tr.clone();
            (p, times, Box::new(move |t| trc.delta(n, t).unwrap()))
        }
    };
    let _ = sp_poly;

    let root_count_ok = computed_points.len() == n;
    if !root_count_ok {
        failures.push(format!(
            "expected {n} stationary points, recovered {}",
            computed_points.len()
        ));
    }

    let mut points_match = computed_points.len() == result.predicted_points.len();
    if points_match {
        for (a, b) in computed_points.iter().zip(&result.predicted_points) {
            if (a - b).abs() > 1e-6 * b.abs().max(1.0) {
                points_match = false;
                failures.push(format!("recovered point {a} does not match predicted {b}"));
                break;
            }
        }
    } else {
        failures.push("recovered point count differs from prediction".into());
    }

    let latest = computed_points.last().copied().unwrap_or(0.0);
    let latest_exceeds_m = latest > result.m_time;
    if !latest_exceeds_m {
        failures.push(format!(
            "latest stationary point {latest} does not exceed horizon {}",
            result.m_time
        ));
    }

    // Independent cross-check: count finite-difference sign changes of Δ_n.
    let t_max = result
        .predicted_points
        .last()
        .copied()
        .unwrap_or(result.m_time);
    let (flips, last_flip) = count_sign_changes(&*delta_at, family, t_max);
    let sign_changes_ok = flips == n;
    if !sign_changes_ok {
        failures.push(format!(
            "finite-difference sign changes: expected {n}, observed {flips}"
        ));
    }
    let monotone_after_last = last_flip <= t_max * 1.02;
    if !monotone_after_last {
        failures.push(format!(
            "sign change at t = {last_flip} beyond the last predicted point {t_max}"
        ));
    }

    Ok(Certificate {
        probability_ok,
        deltas_consistent,
        root_count_ok,
        points_match,
        latest_exceeds_m,
        sign_changes_ok,
        monotone_after_last,
        degenerate: false,
        failures,
    })
}

#[derive(Debug, Clone, Copy)]
enum Family {
    Constant { mu: f64, lambda: f64 },
    Linear { gamma: f64, sigma: f64 },
}

fn detect_family(seq: &RateSequence) -> Result<Family, AdversarialError> {
    if let (Some(g), Some(m)) = (
        seq.gamma_family().constant_value(),
        seq.mu_family().constant_value(),
    ) {
        return Ok(Family::Constant {
            mu: m,
            lambda: g + m,
        });
    }
    if let (Some(g), Some(s)) = (
        seq.gamma_family().constant_value(),
        seq.mu_family().unit_offset_slope(),
    ) {
        return Ok(Family::Linear { gamma: g, sigma: s });
    }
    Err(AdversarialError::InvalidSpec(
        "verification supports constant or unit-offset linear growth with constant reset".into(),
    ))
}

/// Counts sign flips of the finite difference of Δ_n over a grid covering
/// (0, 2·t_max]; differences below 1e−12 of the local deviation scale are
/// treated as zero. Returns (flips, t of the last flip).
fn count_sign_changes(delta: &dyn Fn(f64) -> f64, family: Family, t_max: f64) -> (usize, f64) {
    let grid: Vec<f64> = match family {
        Family::Constant { .. } => {
            let lo = t_max * 1e-4;
            let hi = 2.0 * t_max;
            let n_pts = 8192;
            (0..=n_pts)
                .map(|i| lo + (hi - lo) * i as f64 / n_pts as f64)
                .collect()
        }
        Family::Linear { sigma, .. } => {
            // Geometric grid: roots in y are geometric, so times are evenly
            // spread in log t.
            let lo = (0.05 / sigma).min(t_max * 1e-3);
            let hi = 2.0 * t_max;
            let n_pts = 16384;
            (0..=n_pts)
                .map(|i| lo * (hi / lo).powf(i as f64 / n_pts as f64))
                .collect()
        }
    };
    let values: Vec<f64> = grid.iter().map(|&t| delta(t)).collect();
    let mut flips = 0usize;
    let mut last_flip = 0.0f64;
    let mut prev_sign = 0i8;
    for i in 0..grid.len() - 1 {
        let d = values[i + 1] - values[i];
        let scale = values[i].abs().max(values[i + 1].abs());
        let sign = if d.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            0
        } else if d > 0.0 {
            1
        } else {
            -1
        };
        if sign != 0 {
            if prev_sign != 0 && sign != prev_sign {
                flips += 1;
                last_flip = 0.5 * (grid[i] + grid[i + 1]);
            }
            prev_sign = sign;
        }
    }
    (flips, last_flip)
}

impl Certificate {
    fn empty() -> Self {
        Self {
            probability_ok: false,
            deltas_consistent: false,
            root_count_ok: false,
            points_match: false,
            latest_exceeds_m: false,
            sign_changes_ok: false,
            monotone_after_last: false,
            degenerate: false,
            failures: vec!["not yet verified".into()],
        }
    }

    fn degenerate() -> Self {
        Self {
            degenerate: true,
            failures: vec!["zero deviation profile".into()],
            ..Self::empty()
        }
    }
}
