//! Closed-form transients and their stationary points.
//!
//! Write P_n(t) = Q_n + Δ_n(t) for the deviation from the stationary law.
//! When the relaxation at state 0 is made exact (the constant-reset
//! modification, or simply the regime where state 0 has equilibrated), the
//! deviations obey the pure transport hierarchy
//!
//! ```text
//! Δ̇_n = −λ_n Δ_n + μ_{n−1} Δ_{n−1},
//! ```
//!
//! which is solvable in closed form for two rate families.
//!
//! **Constant growth** (γ, μ constant, λ = γ + μ): the hierarchy integrates
//! to Δ_n(t) = e^(−λt) f_n(μt) with the polynomial
//! f_n(x) = Σ_{k=0..n} Δ_{n−k}(0) x^k / k!. Stationary points of Δ_n solve
//! another degree-n polynomial equation in x = μt with coefficients
//! μ Δ_{n−k−1}(0) − λ Δ_{n−k}(0) on x^k/k!.
//!
//! **Linear growth** (γ constant, μ_n = σ(n+1), λ_n = γ + σ(n+1)): the modes
//! e^(−λ_k t) have coefficients α_k^n = C(n, k) (a product identity over the
//! rate family), and with the binomial transform
//! C_k = Σ_j (−1)^(k−j) C(k, j) Δ_j(0) the deviation becomes
//!
//! ```text
//! Δ_n(t) = e^(−λ_0 t) Σ_{k=0..n} C_k C(n, k) y^k,   y = e^(−σt) ∈ (0, 1),
//! ```
//!
//! whose stationary points solve Σ_k C_k C(n, k) (λ_0 + kσ) y^k = 0 — a
//! polynomial in y, so at most n stationary times, realized with equality by
//! suitable initial data (see [`crate::adversarial`]).
//!
//! The general modal expansion Δ_n(t) = Σ_k c_k α_k^n e^(−λ_k t) requires all
//! λ_k pairwise distinct; [`alpha_coeff`], [`c_from_initial`], and
//! [`initial_from_c`] implement it for any rate sequence satisfying that.

use crate::error::TransientError;
use crate::numeric::{binomial, NeumaierSum};
use crate::poly::{real_roots, RealPolynomial, Root, DEFAULT_ROOT_TOL};
use crate::rates::RateSequence;

/// Relative gap below which two total rates count as coinciding.
const LAMBDA_GAP_TOL: f64 = 1e-12;

/// Relative size below which a stationary-point-polynomial coefficient (or a
/// division remainder) counts as a rounding artifact of a degenerate boundary
/// root; see `positive_stationary_times` on the two transient types.
pub const BOUNDARY_DEFLATION_TOL: f64 = 1e-12;

/// Closed-form transient for constant rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantGrowthTransient {
    gamma: f64,
    mu: f64,
    initial_deltas: Vec<f64>,
}

impl ConstantGrowthTransient {
    /// `initial_deltas[n]` = Δ_n(0). Rates must be positive.
    pub fn new(gamma: f64, mu: f64, initial_deltas: Vec<f64>) -> Result<Self, TransientError> {
        if !(gamma > 0.0 && gamma.is_finite() && mu > 0.0 && mu.is_finite()) {
            return Err(TransientError::InvalidInput(format!(
                "rates must be positive, got gamma = {gamma}, mu = {mu}"
            )));
        }
        if initial_deltas.is_empty() {
            return Err(TransientError::InvalidInput(
                "need at least one initial deviation".into(),
            ));
        }
        Ok(Self {
            gamma,
            mu,
            initial_deltas,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.gamma + self.mu
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn order(&self) -> usize {
        self.initial_deltas.len() - 1
    }

    pub fn initial_deltas(&self) -> &[f64] {
        &self.initial_deltas
    }

    /// The polynomial f_n with f_n(μt) = e^(λt) Δ_n(t):
    /// coefficient of x^k is Δ_{n−k}(0)/k!.
    pub fn f_poly(&self, n: usize) -> Result<RealPolynomial, TransientError> {
        self.check_order(n)?;
        let mut coeffs = Vec::with_capacity(n + 1);
        let mut inv_fact = 1.0;
        for k in 0..=n {
            if k > 0 {
                inv_fact /= k as f64;
            }
            coeffs.push(self.initial_deltas[n - k] * inv_fact);
        }
        Ok(RealPolynomial::new(coeffs))
    }

    /// Δ_n(t) = e^(−λt) f_n(μt).
    pub fn delta(&self, n: usize, t: f64) -> Result<f64, TransientError> {
        let f = self.f_poly(n)?;
        Ok((-self.lambda() * t).exp() * f.eval(self.mu * t))
    }

    /// Polynomial in x = μt whose positive roots are the stationary times of
    /// Δ_n: coefficient of x^k is (μ Δ_{n−k−1}(0) − λ Δ_{n−k}(0))/k!, with
    /// the k = n term −λ Δ_0(0)/n!.
    pub fn stationary_point_poly(&self, n: usize) -> Result<RealPolynomial, TransientError> {
        self.check_order(n)?;
        let lambda = self.lambda();
        let mut coeffs = Vec::with_capacity(n + 1);
        let mut inv_fact = 1.0;
        for k in 0..=n {
            if k > 0 {
                inv_fact /= k as f64;
            }
            let fed = if k < n {
                self.mu * self.initial_deltas[n - k - 1]
            } else {
                0.0
            };
            coeffs.push((fed - lambda * self.initial_deltas[n - k]) * inv_fact);
        }
        Ok(RealPolynomial::new(coeffs))
    }

    /// Stationary times of Δ_n in (0, ∞), sorted, with multiplicities
    /// (`value` is the time).
    ///
    /// Initial data satisfying the stationary recurrence up to some level
    /// make t = 0 itself a stationary point of high order; rounding smears
    /// that boundary root into a cluster of spurious tiny positive roots.
    /// Low-order coefficients verified to sit at rounding scale (below
    /// [`BOUNDARY_DEFLATION_TOL`] of the largest coefficient) are therefore
    /// stripped first, which removes exactly the boundary factor x^k —
    /// equivalently, a root indistinguishable from t = 0 at working
    /// precision is reported as not positive.
    pub fn positive_stationary_times(&self, n: usize) -> Result<Vec<Root>, TransientError> {
        let p = self.stationary_point_poly(n)?;
        let coeffs = p.coeffs();
        let scale = coeffs.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        if scale == 0.0 {
            return Ok(Vec::new()); // Δ_n is frozen; no isolated stationary point
        }
        let cut = coeffs
            .iter()
            .position(|&c| c.abs() > BOUNDARY_DEFLATION_TOL * scale)
            .unwrap_or(coeffs.len() - 1);
        let deflated = RealPolynomial::new(coeffs[cut..].to_vec());
        let mut roots = real_roots(&deflated, 0.0, f64::INFINITY, DEFAULT_ROOT_TOL)?;
        for r in &mut roots {
            r.value /= self.mu; // x = μt back to time
        }
        Ok(roots)
    }

    fn check_order(&self, n: usize) -> Result<(), TransientError> {
        if n >= self.initial_deltas.len() {
            return Err(TransientError::IndexBeyondOrder {
                index: n,
                order: self.initial_deltas.len() - 1,
            });
        }
        Ok(())
    }
}

/// Closed-form transient for linear growth μ_n = σ(n+1) with constant reset.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrowthTransient {
    gamma: f64,
    sigma: f64,
    /// Transformed modal coefficients C_k.
    c: Vec<f64>,
}

impl LinearGrowthTransient {
    /// Builds the expansion from initial deviations Δ_0(0)..Δ_n(0) via the
    /// alternating binomial transform C_k = Σ_j (−1)^(k−j) C(k,j) Δ_j(0).
    pub fn from_initial_deltas(
        gamma: f64,
        sigma: f64,
        initial_deltas: &[f64],
    ) -> Result<Self, TransientError> {
        Self::check_rates(gamma, sigma)?;
        if initial_deltas.is_empty() {
            return Err(TransientError::InvalidInput(
                "need at least one initial deviation".into(),
            ));
        }
        let mut c = Vec::with_capacity(initial_deltas.len());
        for k in 0..initial_deltas.len() {
            let mut acc = NeumaierSum::new();
            for (j, &d) in initial_deltas.iter().take(k + 1).enumerate() {
                let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
                acc.add(sign * binomial(k, j) * d);
            }
            c.push(acc.total());
        }
        Ok(Self { gamma, sigma, c })
    }

    /// Builds the expansion directly from modal coefficients C_0..C_n.
    pub fn from_modal_coeffs(gamma: f64, sigma: f64, c: Vec<f64>) -> Result<Self, TransientError> {
        Self::check_rates(gamma, sigma)?;
        if c.is_empty() {
            return Err(TransientError::InvalidInput(
                "need at least one modal coefficient".into(),
            ));
        }
        Ok(Self { gamma, sigma, c })
    }

    fn check_rates(gamma: f64, sigma: f64) -> Result<(), TransientError> {
        if !(gamma > 0.0 && gamma.is_finite() && sigma > 0.0 && sigma.is_finite()) {
            Err(TransientError::InvalidInput(format!(
                "rates must be positive, got gamma = {gamma}, sigma = {sigma}"
            )))
        } else {
            Ok(())
        }
    }

    /// λ_0 = γ + σ, the slowest relaxation rate.
    pub fn lambda0(&self) -> f64 {
        self.gamma + self.sigma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn modal_coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Inverse binomial transform: Δ_j(0) = Σ_{k≤j} C(j,k) C_k.
    pub fn initial_deltas(&self) -> Vec<f64> {
        (0..self.c.len())
            .map(|j| {
                let mut acc = NeumaierSum::new();
                for (k, &ck) in self.c.iter().take(j + 1).enumerate() {
                    acc.add(binomial(j, k) * ck);
                }
                acc.total()
            })
            .collect()
    }

    /// Δ_n(t) = e^(−λ_0 t) Σ_k C_k C(n,k) y^k with y = e^(−σt).
    pub fn delta(&self, n: usize, t: f64) -> Result<f64, TransientError> {
        self.check_order(n)?;
        let y = (-self.sigma * t).exp();
        let mut acc = 0.0;
        for k in (0..=n).rev() {
            acc = acc * y + self.c[k] * binomial(n, k);
        }
        Ok((-self.lambda0() * t).exp() * acc)
    }

    /// Polynomial in y = e^(−σt) whose roots inside (0, 1) are the
    /// stationary times of Δ_n: coefficient of y^k is
    /// −C_k C(n,k) (λ_0 + kσ).
    pub fn stationary_point_poly(&self, n: usize) -> Result<RealPolynomial, TransientError> {
        self.check_order(n)?;
        let lambda0 = self.lambda0();
        let coeffs = (0..=n)
            .map(|k| -self.c[k] * binomial(n, k) * (lambda0 + k as f64 * self.sigma))
            .collect();
        Ok(RealPolynomial::new(coeffs))
    }

    /// Converts a root y ∈ (0, 1) of the stationary-point polynomial to the
    /// stationary time t = −ln(y)/σ.
    pub fn time_from_y(&self, y: f64) -> f64 {
        -y.ln() / self.sigma
    }

    /// Stationary times of Δ_n in (0, ∞), sorted, with multiplicities
    /// (`value` is the time).
    ///
    /// Positive times correspond to y = e^(−σt) inside (0, 1). Both interval
    /// ends are degenerate boundaries: a multiple root at y = 1 (a flat start
    /// at t = 0, produced by data satisfying the stationary recurrence up to
    /// some level) and at y = 0 (modes entering only above some index) get
    /// smeared by rounding into clusters of spurious interior roots. Factors
    /// of y and of (y − 1) whose presence is verified at rounding scale
    /// ([`BOUNDARY_DEFLATION_TOL`] of the largest coefficient) are divided
    /// out before counting.
    pub fn positive_stationary_times(&self, n: usize) -> Result<Vec<Root>, TransientError> {
        let p = self.stationary_point_poly(n)?;
        let mut coeffs = p.coeffs().to_vec();
        let scale = coeffs.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        if scale == 0.0 {
            return Ok(Vec::new()); // Δ_n is frozen; no isolated stationary point
        }
        let cut = coeffs
            .iter()
            .position(|&c| c.abs() > BOUNDARY_DEFLATION_TOL * scale)
            .unwrap_or(coeffs.len() - 1);
        coeffs.drain(..cut);
        while coeffs.len() > 1 {
            // Synthetic division by (y − 1): quotient coefficient of y^k is
            // the partial sum of the inputs above k; the full sum is the
            // remainder p(1).
            let d = coeffs.len() - 1;
            let mut quotient = vec![0.0f64; d];
            let mut acc = coeffs[d];
            for k in (0..d).rev() {
                quotient[k] = acc;
                acc += coeffs[k];
            }
            if acc.abs() > BOUNDARY_DEFLATION_TOL * scale {
                break;
            }
            coeffs = quotient;
        }
        let roots = real_roots(&RealPolynomial::new(coeffs), 0.0, 1.0, DEFAULT_ROOT_TOL)?;
        let mut times: Vec<Root> = roots
            .into_iter()
            .map(|r| Root {
                value: self.time_from_y(r.value),
                multiplicity: r.multiplicity,
            })
            .collect();
        times.sort_by(|a, b| a.value.total_cmp(&b.value));
        Ok(times)
    }

    fn check_order(&self, n: usize) -> Result<(), TransientError> {
        if n >= self.c.len() {
            return Err(TransientError::IndexBeyondOrder {
                index: n,
                order: self.c.len() - 1,
            });
        }
        Ok(())
    }
}

/// Modal weight α_k^n = Π_{m=k..n−1} μ_m / (λ_{m+1} − λ_k) for a general
/// rate sequence with pairwise-distinct total rates (α_n^n = 1).
///
/// Errors with [`TransientError::RepeatedLambda`] when a denominator gap
/// falls below tolerance. For the linear family the product telescopes to
/// the binomial coefficient C(n, k) — exactly when the rates are integers,
/// and to a few ulps per factor otherwise (the reset rate cancels from each
/// denominator on paper but not in floating point).
pub fn alpha_coeff(seq: &RateSequence, n: usize, k: usize) -> Result<f64, TransientError> {
    if k > n {
        return Ok(0.0);
    }
    let lambda_k = seq.lambda_at(k)?;
    let mut acc = 1.0f64;
    for m in k..n {
        let mu_m = seq.mu_at(m)?;
        let lambda_m1 = seq.lambda_at(m + 1)?;
        let gap = lambda_m1 - lambda_k;
        if gap.abs() <= LAMBDA_GAP_TOL * lambda_m1.abs().max(lambda_k.abs()) {
            return Err(TransientError::RepeatedLambda { i: m + 1, j: k });
        }
        acc = acc * mu_m / gap;
    }
    Ok(acc)
}

/// Modal coefficients c_k from initial deviations for a general rate
/// sequence: the triangular system Δ_j(0) = Σ_{k≤j} c_k α_k^j inverted in
/// closed form, c_k = Σ_{j≤k} Δ_j(0) Π_{i=j..k−1} μ_i/(λ_i − λ_k).
pub fn c_from_initial(seq: &RateSequence, deltas: &[f64]) -> Result<Vec<f64>, TransientError> {
    let n = deltas.len();
    let mut c = Vec::with_capacity(n);
    for k in 0..n {
        let lambda_k = seq.lambda_at(k)?;
        // w_j = Π_{i=j..k−1} μ_i / (λ_i − λ_k), built backward from w_k = 1.
        let mut acc = NeumaierSum::new();
        let mut w = 1.0f64;
        acc.add(deltas[k]);
        for j in (0..k).rev() {
            let mu_j = seq.mu_at(j)?;
            let lambda_j = seq.lambda_at(j)?;
            let gap = lambda_j - lambda_k;
            if gap.abs() <= LAMBDA_GAP_TOL * lambda_j.abs().max(lambda_k.abs()) {
                return Err(TransientError::RepeatedLambda { i: j, j: k });
            }
            w = w * mu_j / gap;
            acc.add(w * deltas[j]);
        }
        c.push(acc.total());
    }
    Ok(c)
}

/// Initial deviations from modal coefficients: Δ_n(0) = Σ_{k≤n} c_k α_k^n,
/// with the α table built by the one-step recurrence
/// α_k^{n} = α_k^{n−1} μ_{n−1} / (λ_n − λ_k).
pub fn initial_from_c(seq: &RateSequence, c: &[f64]) -> Result<Vec<f64>, TransientError> {
    let n = c.len();
    let mut alpha = vec![0.0f64; n]; // alpha[k] = α_k^{row}
    let mut out = Vec::with_capacity(n);
    for row in 0..n {
        alpha[row] = 1.0;
        if row > 0 {
            let mu_prev = seq.mu_at(row - 1)?;
            let lambda_row = seq.lambda_at(row)?;
            for (k, a) in alpha.iter_mut().enumerate().take(row) {
                let gap = lambda_row - seq.lambda_at(k)?;
                if gap.abs() <= LAMBDA_GAP_TOL * lambda_row.abs() {
                    return Err(TransientError::RepeatedLambda { i: row, j: k });
                }
                *a = *a * mu_prev / gap;
            }
        }
        let mut acc = NeumaierSum::new();
        for k in 0..=row {
            acc.add(c[k] * alpha[k]);
        }
        out.push(acc.total());
    }
    Ok(out)
}
