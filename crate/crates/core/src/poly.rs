//! Real polynomials and real-root isolation on an interval.
//!
//! The transient analysis reduces "how many stationary points does Δ_n(t)
//! have" to counting real roots of a fixed polynomial — in the original time
//! variable for constant growth, or in y = e^(−σt) ∈ (0, 1) for linear
//! growth. The polynomials involved can have coefficients and roots spanning
//! many orders of magnitude, so the finder combines
//!
//! 1. a variable rescaling x = s·u with s = (|a_0|/|a_d|)^(1/d), which moves
//!    the geometric mean of the root magnitudes to ~1,
//! 2. companion-matrix eigenvalues of the rescaled monic polynomial,
//! 3. Newton polishing of near-real eigenvalues against the original
//!    coefficients, accepted only if the residual clears a backward-error
//!    style bound, and
//! 4. a sign-change scan (linear and geometric grids) that catches any
//!    odd-multiplicity root the eigensolver misplaced.
//!
//! Clustered acceptances are merged; the reported multiplicity of a root is
//! the number of companion eigenvalues in its cluster, so a double root that
//! splits into a conjugate pair still reports multiplicity two.

use nalgebra::DMatrix;

use crate::error::PolyError;

/// Default residual acceptance tolerance for [`real_roots`]: a candidate x
/// is a root when |p(x)| ≤ tol · Σ |a_k| |x|^k.
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

/// A polynomial with real coefficients, stored lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

/// A real root with the multiplicity attributed to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: f64,
    pub multiplicity: usize,
}

impl RealPolynomial {
    /// Builds a polynomial from ascending coefficients, trimming exact
    /// trailing zeros. The all-zero input yields the degenerate polynomial
    /// (degree `None`).
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[f64]) -> Self {
        let mut coeffs = vec![1.0];
        for &r in roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (k, &c) in coeffs.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= r * c;
            }
            coeffs = next;
        }
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree after trimming; `None` for the identically-zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.is_zero() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Horner evaluation of the derivative.
    pub fn eval_derivative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * x + k as f64 * c;
        }
        acc
    }

    /// Scale Σ |a_k| |x|^k used in the residual acceptance test.
    fn residual_scale(&self, x: f64) -> f64 {
        let ax = x.abs();
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * ax + c.abs();
        }
        acc.max(f64::MIN_POSITIVE)
    }
}

/// Finds the real roots of `p` in the open interval `(lo, hi)`.
///
/// Multiple roots are reported once with their multiplicity. Errors only on
/// the degenerate (identically zero) polynomial; constants report no roots.
pub fn real_roots(
    p: &RealPolynomial,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Vec<Root>, PolyError> {
    if p.is_zero() {
        return Err(PolyError::Degenerate);
    }
    let mut coeffs = p.coeffs.clone();
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }

    // Roots at the origin: factor them out, report if inside the interval.
    let mut zero_mult = 0usize;
    while coeffs.len() > 1 && coeffs[0] == 0.0 {
        coeffs.remove(0);
        zero_mult += 1;
    }
    let work = RealPolynomial {
        coeffs: coeffs.clone(),
    };
    let d = coeffs.len() - 1;

    let mut accepted: Vec<f64> = Vec::new(); // polished root positions
    let mut eig_real: Vec<f64> = Vec::new(); // all eigenvalue real parts (for multiplicity)

    if d >= 1 {
        let candidates = companion_candidates(&coeffs, &mut eig_real);
        for x0 in candidates {
            if let Some(x) = polish(&work, x0, tol) {
                accepted.push(x);
            }
        }
        for x in scan_roots(&work, lo, hi) {
            accepted.push(x);
        }
    }

    // Cluster acceptances; multiplicity = eigenvalues attracted to the cluster.
    accepted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut roots: Vec<Root> = Vec::new();
    let mut i = 0;
    while i < accepted.len() {
        let anchor = accepted[i];
        let radius = 1e-7 * anchor.abs().max(1.0);
        let mut j = i + 1;
        let mut best = anchor;
        let mut best_res = work.eval(anchor).abs();
        while j < accepted.len() && (accepted[j] - anchor).abs() <= radius {
            let res = work.eval(accepted[j]).abs();
            if res < best_res {
                best_res = res;
                best = accepted[j];
            }
            j += 1;
        }
        let mult = eig_real
            .iter()
            .filter(|&&e| (e - best).abs() <= 1e-5 * best.abs().max(1.0))
            .count()
            .max(1);
        roots.push(Root {
            value: best,
            multiplicity: mult,
        });
        i = j;
    }

    if zero_mult > 0 && lo < 0.0 && 0.0 < hi {
        roots.push(Root {
            value: 0.0,
            multiplicity: zero_mult,
        });
    }

    // Open-interval semantics at floating-point resolution: a polished root
    // a few ulps inside the boundary is indistinguishable from one sitting on
    // it, so exclude an ulp-scale band around each finite endpoint. The band
    // is relative to the endpoint itself, leaving room near zero for the
    // genuinely tiny roots the transformed transient polynomials produce.
    let lo_cut = if lo.is_finite() {
        lo + 4.0 * f64::EPSILON * lo.abs()
    } else {
        lo
    };
    let hi_cut = if hi.is_finite() {
        hi - 4.0 * f64::EPSILON * hi.abs()
    } else {
        hi
    };
    roots.retain(|r| r.value > lo_cut && r.value < hi_cut);
    roots.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(roots)
}

/// Real parts of near-real companion eigenvalues of the rescaled polynomial,
/// mapped back to the original variable. Also records *all* eigenvalue real
/// parts (rescaled) for multiplicity attribution.
fn companion_candidates(coeffs: &[f64], eig_real_out: &mut Vec<f64>) -> Vec<f64> {
    let d = coeffs.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    if d == 1 {
        let root = -coeffs[0] / coeffs[1];
        eig_real_out.push(root);
        return vec![root];
    }
    if d == 2 {
        // Stable quadratic formula.
        let (c, b, a) = (coeffs[0], coeffs[1], coeffs[2]);
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        let q = -0.5 * (b + b.signum() * sq);
        let (r1, r2) = if q == 0.0 {
            (0.0, 0.0)
        } else {
            (q / a, c / q)
        };
        eig_real_out.extend_from_slice(&[r1, r2]);
        return vec![r1, r2];
    }

    // Rescale x = s·u so the geometric-mean root magnitude is near one.
    let a0 = coeffs[0].abs();
    let ad = coeffs[d].abs();
    let s = if a0 > 0.0 {
        (a0 / ad).powf(1.0 / d as f64).clamp(1e-100, 1e100)
    } else {
        1.0
    };
    let mut b: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| c * s.powi(k as i32))
        .collect();
    let bmax = b.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    for v in &mut b {
        *v /= bmax;
    }

    let lead = b[d];
    let mut companion = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        companion[(i, d - 1)] = -b[i] / lead;
    }
    let eigs = companion.complex_eigenvalues();

    let mut candidates = Vec::new();
    for e in eigs.iter() {
        let re = e.re * s;
        eig_real_out.push(re);
        // Generous imaginary gate: fake candidates die at the residual check,
        // while genuinely multiple roots (split into conjugate pairs by
        // rounding) must get through.
        if e.im.abs() <= 1e-3 * (1.0 + e.re.abs()) {
            candidates.push(re);
        }
    }
    candidates
}

/// Newton-polishes a candidate against the original coefficients; returns
/// the root when the final residual clears the acceptance bound.
fn polish(p: &RealPolynomial, x0: f64, tol: f64) -> Option<f64> {
    let mut x = x0;
    let mut last_step = f64::INFINITY;
    for _ in 0..60 {
        let f = p.eval(x);
        if f == 0.0 {
            break;
        }
        let fp = p.eval_derivative(x);
        if fp == 0.0 || !fp.is_finite() {
            break;
        }
        let step = f / fp;
        x -= step;
        if !x.is_finite() {
            return None;
        }
        let width = step.abs();
        if width <= 1e-15 * x.abs().max(1.0) && last_step <= 1e-12 * x.abs().max(1.0) {
            break;
        }
        last_step = width;
    }
    let res = p.eval(x).abs();
    (res <= tol * p.residual_scale(x)).then_some(x)
}

/// Sign-change scan over (lo, hi): linear grid plus a geometric grid on each
/// side of the origin (roots of the transformed transient polynomials can sit
/// many decades apart). Each bracket is closed by bisection.
fn scan_roots(p: &RealPolynomial, lo: f64, hi: f64) -> Vec<f64> {
    let d = p.coeffs.len() - 1;
    let lead = p.coeffs[d];
    // Cauchy bound on root magnitudes.
    let bound = 1.0
        + p.coeffs[..d]
            .iter()
            .fold(0.0f64, |m, &c| m.max((c / lead).abs()));
    let left = lo.max(-bound);
    let right = hi.min(bound);
    if !(left < right) {
        return Vec::new();
    }

    let mut grid: Vec<f64> = Vec::new();
    let n_lin = 2048;
    for i in 0..=n_lin {
        grid.push(left + (right - left) * i as f64 / n_lin as f64);
    }
    // Geometric refinement toward zero, where linear spacing is too coarse.
    let decades_per_point = 1.0 / 60.0;
    if right > 0.0 {
        let top = right.min(bound);
        let bottom = (top * 1e-18).max(f64::MIN_POSITIVE);
        let mut x = top;
        while x > bottom {
            if x > lo && x < hi {
                grid.push(x);
            }
            x *= 10f64.powf(-decades_per_point);
        }
    }
    if left < 0.0 {
        let top = (-left).min(bound);
        let bottom = (top * 1e-18).max(f64::MIN_POSITIVE);
        let mut x = top;
        while x > bottom {
            if -x > lo && -x < hi {
                grid.push(-x);
            }
            x *= 10f64.powf(-decades_per_point);
        }
    }
    grid.retain(|x| x.is_finite());
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (p.eval(a), p.eval(b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa.signum() * fb.signum() < 0.0 {
            roots.push(bisect(p, a, b, fa));
        }
    }
    roots
}

fn bisect(p: &RealPolynomial, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let mut sa = fa.signum();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = p.eval(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == sa {
            a = mid;
            sa = fm.signum();
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}
