//! Acceptance gate: one test per release criterion, each printing a
//! `[acceptance]` line on success. Tolerances are pinned here and nowhere
//! else; a failing criterion means the library does not ship.

use std::f64::consts::{E, PI};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use rglab_core::adversarial::{
    construct_constant, construct_linear, solve_deltas_constant, verify, AdversarialSpec,
};
use rglab_core::evolution::{
    integrate, integrate_sampled, mass_flux_report, rhs, ModelVariant, TruncatedState,
};
use rglab_core::poly::{real_roots, RealPolynomial, DEFAULT_ROOT_TOL};
use rglab_core::rates::{ExtensionPolicy, RateFamily, RateSequence};
use rglab_core::stationary::{
    normalize, q_iterate, s0_compute, truncated_candidate, z_at, S0Classification,
    DEFAULT_TAIL_LOG_THRESHOLD,
};
use rglab_core::transient::{ConstantGrowthTransient, LinearGrowthTransient};
use rglab_core::StationaryError;

fn seq(gamma: RateFamily, mu: RateFamily) -> RateSequence {
    RateSequence::new(gamma, mu).unwrap()
}

fn constant(v: f64) -> RateFamily {
    RateFamily::Constant { value: v }
}

/// γ = 1, μ_n = (n+1)²: the paper's fast-growth example with S_0 < 1.
fn fast_growth() -> RateSequence {
    seq(constant(1.0), RateFamily::Power { c: 1.0, s: 2.0 })
}

/// γ = σ = b = 1: linear growth with the closed-form stationary law.
fn unit_linear() -> RateSequence {
    seq(constant(1.0), RateFamily::Linear { sigma: 1.0, b: 1.0 })
}

/// S_0 for the fast-growth rates: 1 − π/sinh(π), from the classical
/// product Π (1 + 1/m²) = sinh(π)/π.
fn s0_fast_growth_exact() -> f64 {
    1.0 - PI / PI.sinh()
}

fn pass(criterion: &str, label: &str, started: Instant) {
    println!(
        "[acceptance] criterion {criterion} ({label}): PASS ({:.1} ms)",
        started.elapsed().as_secs_f64() * 1e3
    );
}

/// Criterion 1 — the telescoping identity Σ_{n≤N} Z_n = 1 − Z_N/r_N holds
/// to 1e−12 relative for 200 random positive rate tables and N = 1..50,
/// in under a second.
#[test]
fn criterion_01_telescoping_partial_sums() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    for _ in 0..200 {
        let gamma: Vec<f64> = (0..51).map(|_| rng.random_range(0.1..=5.0)).collect();
        let mu: Vec<f64> = (0..51).map(|_| rng.random_range(0.1..=5.0)).collect();
        let s = seq(
            RateFamily::Table {
                values: gamma,
                extension: ExtensionPolicy::HoldLast,
            },
            RateFamily::Table {
                values: mu,
                extension: ExtensionPolicy::HoldLast,
            },
        );
        let mut partial = 0.0f64;
        for n in 0..=50usize {
            let z = z_at(&s, n).unwrap();
            partial += z;
            if n == 0 {
                continue; // identity asserted for N = 1..50
            }
            let rhs = 1.0 - z / s.r_at(n).unwrap();
            assert!(
                (partial - rhs).abs() <= 1e-12 * rhs.abs().max(partial.abs()),
                "N = {n}: partial {partial} vs telescoped {rhs}"
            );
        }
    }
    assert!(
        started.elapsed().as_secs_f64() < 1.0,
        "runtime budget exceeded: {:?}",
        started.elapsed()
    );
    pass("01", "telescoping partial sums", started);
}

/// Criterion 2 — fast growth γ = 1, μ_n = (n+1)²: the partial S_0 at
/// N = 10^5 is within 1e−5 of 1 − π/sinh(π) and classified strictly
/// below one, in under a second.
#[test]
fn criterion_02_fast_growth_partial_sum_value() {
    let started = Instant::now();
    let s = fast_growth();
    let res = s0_compute(&s, 100_000, DEFAULT_TAIL_LOG_THRESHOLD).unwrap();
    assert_eq!(res.classification, S0Classification::StrictlyBelowOne);
    let exact = s0_fast_growth_exact();
    assert!(
        (res.partial_value - exact).abs() < 1e-5,
        "partial {} vs exact {exact}",
        res.partial_value
    );
    assert!(
        started.elapsed().as_secs_f64() < 1.0,
        "runtime budget exceeded: {:?}",
        started.elapsed()
    );
    pass("02", "fast-growth S0 value", started);
}

/// Criterion 3 — γ = σ = b = 1: the normalized stationary law is
/// Q_n = 1/((n+1)(n+2)) with Q_0 = 1/2, to 1e−12 relative through
/// n = 10³, classified S_0 = 1 exactly; under a second.
#[test]
fn criterion_03_linear_growth_closed_form() {
    let started = Instant::now();
    let s = unit_linear();
    let s0 = s0_compute(&s, 1000, DEFAULT_TAIL_LOG_THRESHOLD).unwrap();
    assert_eq!(s0.classification, S0Classification::ExactlyOne);
    let res = normalize(&s, 1000, &s0).unwrap();
    assert!((res.q0 - 0.5).abs() <= 1e-12);
    for (n, &q) in res.values.iter().enumerate() {
        let want = 1.0 / ((n as f64 + 1.0) * (n as f64 + 2.0));
        assert!(
            (q - want).abs() <= 1e-12 * want,
            "n = {n}: {q} vs {want}"
        );
    }
    assert!(
        started.elapsed().as_secs_f64() < 1.0,
        "runtime budget exceeded: {:?}",
        started.elapsed()
    );
    pass("03", "linear-growth closed form", started);
}

/// Criterion 4 — γ_n = μ_n = e^(−n): the candidate grows like (e/2)^n,
/// normalization must refuse, and the unscaled iteration must match the
/// closed form to 1e−10 relative through n = 50.
#[test]
fn criterion_04_non_normalizable_detection() {
    let started = Instant::now();
    let decaying = RateFamily::Exponential {
        c: 1.0,
        a: (-1.0f64).exp(),
    };
    let s = seq(decaying.clone(), decaying);
    let s0 = s0_compute(&s, 1000, DEFAULT_TAIL_LOG_THRESHOLD).unwrap();
    // r_n ≡ 1 keeps Σ ln(1 + r_n) divergent, so S_0 = 1 — yet the candidate
    // still is not summable; normalization must detect that independently.
    assert_eq!(s0.classification, S0Classification::ExactlyOne);
    match normalize(&s, 100, &s0) {
        Err(StationaryError::NotNormalizable(_)) => {}
        other => panic!("expected NotNormalizable, got {other:?}"),
    }
    let q = q_iterate(&s, 1.0, 50).unwrap();
    for (n, &v) in q.iter().enumerate() {
        let want = (E / 2.0).powi(n as i32);
        assert!(
            (v - want).abs() <= 1e-10 * want,
            "n = {n}: {v} vs {want}"
        );
    }
    pass("04", "non-normalizable detection", started);
}

/// Criterion 5 — fast growth, original dynamics: at the normalized
/// candidate (window N = 10^4) the ground row of the right-hand side is
/// −λ_0 Q_0 (1 − S_0), strictly negative, to 1e−3 relative (the window
/// truncation itself contributes ≈ 1e−4).
#[test]
fn criterion_05_original_model_ground_row_deficit() {
    let started = Instant::now();
    let s = fast_growth();
    let n_max = 10_000;
    let s0 = s0_compute(&s, n_max, DEFAULT_TAIL_LOG_THRESHOLD).unwrap();
    let res = normalize(&s, n_max, &s0).unwrap();
    let state = TruncatedState::from_distribution(res.values.clone()).unwrap();
    let dot = rhs(&state, &ModelVariant::Original, &s).unwrap();
    let lambda0 = 2.0;
    let expected = -lambda0 * res.q0 * (1.0 - s0_fast_growth_exact());
    assert!(dot[0] < 0.0, "ground row must be negative, got {}", dot[0]);
    assert!(
        (dot[0] - expected).abs() <= 1e-3 * expected.abs(),
        "ground row {} vs boundary-flux prediction {expected}",
        dot[0]
    );
    pass("05", "original-model ground-row deficit", started);
}

/// Criterion 6 — fast growth, modified dynamics with the window-consistent
/// pair (R = Q_0, S_0 = partial sum): the candidate is a fixed point (all
/// probability rows below 1e−8 at N = 10^4) and integration over t ∈ [0, 5]
/// holds max |P_n − Q_n| < 1e−6.
#[test]
fn criterion_06_modified_model_stationarity() {
    let started = Instant::now();
    let s = fast_growth();

    // Fixed-point check on a large window.
    let n_max = 10_000;
    let tc = truncated_candidate(&s, n_max).unwrap();
    let variant = ModelVariant::Modified {
        r: tc.q0,
        s0: tc.s_partial,
    };
    let state = TruncatedState::from_distribution(tc.q.clone()).unwrap();
    let dot = rhs(&state, &variant, &s).unwrap();
    let worst = dot[..=n_max]
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    assert!(worst < 1e-8, "largest rhs component {worst}");

    // Time evolution on a window the explicit stepper's stability bound can
    // afford (h ≤ 2.5/λ_max with λ_max ≈ N²); the fixed-point property is
    // window-consistent at every N, so the check is not weakened.
    let n_evolve = 150;
    let tc = truncated_candidate(&s, n_evolve).unwrap();
    let variant = ModelVariant::Modified {
        r: tc.q0,
        s0: tc.s_partial,
    };
    let state = TruncatedState::from_distribution(tc.q.clone()).unwrap();
    let traj = integrate(&state, &variant, &s, 5.0, 1e-10).unwrap();
    let mut drift = 0.0f64;
    for st in &traj.states {
        for (p, q) in st.p.iter().zip(&tc.q) {
            drift = drift.max((p - q).abs());
        }
    }
    assert!(drift < 1e-6, "max |P - Q| = {drift}");
    pass("06", "modified-model stationarity", started);
}

/// Criterion 7 — constant rates γ = μ = 1 from a point mass at zero,
/// N = 200, t ∈ [0, 20]: window mass plus boundary leak stays within 1e−9
/// of one throughout, and the final state matches the stationary law to
/// 1e−6; under five seconds.
#[test]
fn criterion_07_mass_ledger_constant_rates() {
    let started = Instant::now();
    let s = seq(constant(1.0), constant(1.0));
    let n_max = 200;
    let state0 = TruncatedState::point_mass_at_zero(n_max);
    let traj = integrate(&state0, &ModelVariant::Original, &s, 20.0, 1e-10).unwrap();
    for st in &traj.states {
        let ledger = st.mass() + st.leak;
        assert!(
            (ledger - 1.0).abs() < 1e-9,
            "t = {}: mass + leak = {ledger}",
            st.t
        );
    }
    let s0 = s0_compute(&s, n_max, DEFAULT_TAIL_LOG_THRESHOLD).unwrap();
    let q = normalize(&s, n_max, &s0).unwrap().values;
    let last = traj.states.last().unwrap();
    let worst = last
        .p
        .iter()
        .zip(&q)
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    assert!(worst < 1e-6, "final max |P - Q| = {worst}");
    assert!(
        started.elapsed().as_secs_f64() < 5.0,
        "runtime budget exceeded: {:?}",
        started.elapsed()
    );
    pass("07", "mass ledger, constant rates", started);
}

/// Criterion 8 — the closed-form transients match the integrator to 1e−8
/// over t ∈ [0, 10] from random feasible initial data on states 0..=10,
/// for both growth families. The integrated model is the constant-reset
/// variant with S_0 = 1, whose deviation system is exactly the homogeneous
/// hierarchy the closed forms solve.
#[test]
fn criterion_08_closed_form_matches_integrator() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed_0008);
    let n_window = 64;
    let n_top = 10usize;
    let samples: Vec<f64> = (1..=20).map(|k| k as f64 * 0.5).collect();

    for family in ["constant", "linear"] {
        let s = match family {
            "constant" => seq(constant(1.0), constant(1.0)),
            _ => unit_linear(),
        };
        let s0 = s0_compute(&s, n_window, DEFAULT_TAIL_LOG_THRESHOLD).unwrap();
        let q = normalize(&s, n_window, &s0).unwrap().values;

        // Random feasible start: P_k = Q_k (1 + u_k/4), |u| ≤ 1, keeps every
        // component inside (0, 1).
        let mut deltas = Vec::with_capacity(n_top + 1);
        let mut p0 = q.clone();
        for k in 0..=n_top {
            let d = q[k] * 0.25 * (rng.random::<f64>() * 2.0 - 1.0);
            deltas.push(d);
            p0[k] += d;
        }
        let state0 = TruncatedState::from_distribution(p0).unwrap();
        let traj = integrate_sampled(
            &state0,
            &ModelVariant::ConstantReset { s0: 1.0 },
            &s,
            10.0,
            1e-11,
            &samples,
        )
        .unwrap();

        for &t in &samples {
            // The stepper clips a step to land on each sample, so the stored
            // time can differ from it by an ulp; compare at the stored time.
            let st = traj
                .states
                .iter()
                .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
                .unwrap();
            assert!((st.t - t).abs() < 1e-9, "sample t = {t} missing");
            for n in 0..=n_top {
                let measured = st.p[n] - q[n];
                let predicted = match family {
                    "constant" => ConstantGrowthTransient::new(1.0, 1.0, deltas.clone())
                        .unwrap()
                        .delta(n, st.t)
                        .unwrap(),
                    _ => LinearGrowthTransient::from_initial_deltas(1.0, 1.0, &deltas)
                        .unwrap()
                        .delta(n, st.t)
                        .unwrap(),
                };
                assert!(
                    (measured - predicted).abs() < 1e-8,
                    "{family}, n = {n}, t = {t}: integrated {measured} vs closed form {predicted}"
                );
            }
        }
    }
    pass("08", "closed form vs integrator", started);
}

/// Criterion 9 — a point mass at zero yields exactly one positive
/// stationary point of Δ_n for every n = 1..10 in both families.
///
/// For this start the deviations satisfy the stationary recurrence above
/// the ground state, so dΔ_n/dt vanishes to order n−1 at t = 0 — a
/// degenerate boundary stationary point that is *not* at a positive time.
/// Rounding in the stationary weights splits that multiple boundary root
/// into a tiny cluster just inside the domain, so the test deflates the
/// boundary factor after verifying it is present at rounding scale: x^(n−1)
/// at x = 0 for the constant family, (y−1)^(n−1) at y = 1 for the linear
/// one. What remains must have exactly one root at a positive time.
#[test]
fn criterion_09_point_mass_start_single_stationary_point() {
    let started = Instant::now();

    // Constant rates γ = μ = 1: the polynomial reduces to
    // x^(n−1)/(n−1)! − x^n/n!, with the unique positive root x = n.
    let s = seq(constant(1.0), constant(1.0));
    let s0 = s0_compute(&s, 64, DEFAULT_TAIL_LOG_THRESHOLD).unwrap();
    let q = normalize(&s, 64, &s0).unwrap().values;
    let deltas: Vec<f64> = (0..=10)
        .map(|k| if k == 0 { 1.0 - q[0] } else { -q[k] })
        .collect();
    let tr = ConstantGrowthTransient::new(1.0, 1.0, deltas).unwrap();
    for n in 1..=10usize {
        let p = tr.stationary_point_poly(n).unwrap();
        let coeffs = p.coeffs();
        let scale = coeffs.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        for (k, &c) in coeffs[..n - 1].iter().enumerate() {
            assert!(
                c.abs() <= 1e-12 * scale,
                "constant family, n = {n}: coefficient {k} is {c}, not boundary noise"
            );
        }
        let deflated = RealPolynomial::new(coeffs[n - 1..].to_vec());
        let roots = real_roots(&deflated, 0.0, f64::INFINITY, DEFAULT_ROOT_TOL).unwrap();
        let count: usize = roots.iter().map(|r| r.multiplicity).sum();
        assert_eq!(count, 1, "constant family, n = {n}: roots {roots:?}");
        assert!(
            (roots[0].value - n as f64).abs() <= 1e-9 * n as f64,
            "constant family, n = {n}: root {}",
            roots[0].value
        );
    }

    // Linear growth γ = σ = 1 (Waring law): deflate the boundary factor,
    // verifying each synthetic-division remainder, then count what is left.
    let s = unit_linear();
    let s0 = s0_compute(&s, 64, DEFAULT_TAIL_LOG_THRESHOLD).unwrap();
    let q = normalize(&s, 64, &s0).unwrap().values;
    let deltas: Vec<f64> = (0..=10)
        .map(|k| if k == 0 { 1.0 - q[0] } else { -q[k] })
        .collect();
    let tr = LinearGrowthTransient::from_initial_deltas(1.0, 1.0, &deltas).unwrap();
    for n in 1..=10usize {
        let p = tr.stationary_point_poly(n).unwrap();
        let scale = p.coeffs().iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        let mut coeffs = p.coeffs().to_vec();
        for _ in 0..n - 1 {
            // Divide by (y − 1): quotient coefficients are the partial sums
            // from the top; the value at y = 1 is the remainder.
            let d = coeffs.len() - 1;
            let mut quotient = vec![0.0f64; d];
            let mut acc = coeffs[d];
            for k in (0..d).rev() {
                quotient[k] = acc;
                acc += coeffs[k];
            }
            assert!(
                acc.abs() <= 1e-12 * scale,
                "linear family, n = {n}: deflation remainder {acc}"
            );
            coeffs = quotient;
        }
        let deflated = RealPolynomial::new(coeffs);
        let roots = real_roots(&deflated, 0.0, 1.0, DEFAULT_ROOT_TOL).unwrap();
        let count: usize = roots.iter().map(|r| r.multiplicity).sum();
        assert_eq!(count, 1, "linear family, n = {n}: roots {roots:?}");
        // The surviving root is y = 1/(n+1), i.e. the stationary time
        // t = ln(n+1).
        let want = 1.0 / (n as f64 + 1.0);
        assert!(
            (roots[0].value - want).abs() <= 1e-9 * want,
            "linear family, n = {n}: root {}",
            roots[0].value
        );
    }
    pass("09", "point-mass start, single stationary point", started);
}

/// Criterion 10 — adversarial constructions: for (n, M) in
/// {(2,5), (3,10), (5,20)} and both families, the constructor returns a
/// valid probability distribution whose watched deviation has exactly n
/// positive stationary points, the last beyond M; the hand-solved
/// back-substitution case is reproduced exactly. Under five seconds.
#[test]
fn criterion_10_adversarial_constructions() {
    let started = Instant::now();

    // Hand-solved oracle: target (x−6)(x−8), μ = 1, λ = 2.
    assert_eq!(
        solve_deltas_constant(&[48.0, -14.0, 1.0], 1.0, 2.0),
        vec![-1.0, 6.5, -20.75]
    );

    let cases = [(2usize, 5.0f64), (3, 10.0), (5, 20.0)];
    let const_seq = seq(constant(1.0), constant(1.0));
    let linear_seq = unit_linear();
    for &(n, m_time) in &cases {
        let spec = AdversarialSpec {
            n,
            m_time,
            epsilon: None,
            stretch: None,
        };
        for family in ["constant", "linear"] {
            let (res, s) = match family {
                "constant" => (construct_constant(&spec, &const_seq), &const_seq),
                _ => (construct_linear(&spec, &linear_seq), &linear_seq),
            };
            let res = res.unwrap_or_else(|e| panic!("{family} (n={n}, M={m_time}): {e}"));
            assert!(
                res.certificate.pass(),
                "{family} (n={n}, M={m_time}): {:?}",
                res.certificate.failures
            );
            assert_eq!(res.predicted_points.len(), n);
            assert!(*res.predicted_points.last().unwrap() > m_time);
            let mass: f64 = res.initial_p.iter().sum();
            assert!((mass - 1.0).abs() <= 1e-12);
            assert!(res
                .initial_p
                .iter()
                .all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
            // Independent re-verification from the initial data alone.
            let cert = verify(&res, s).unwrap();
            assert!(cert.pass(), "{family} re-verify: {:?}", cert.failures);
        }
    }
    assert!(
        started.elapsed().as_secs_f64() < 5.0,
        "runtime budget exceeded: {:?}",
        started.elapsed()
    );
    pass("10", "adversarial constructions", started);
}

/// Criterion 11 — modified dynamics under fast growth from a point mass:
/// the mass-derivative identity holds pointwise along the trajectory
/// (finite-difference residual at integration-tolerance scale) while the
/// total window mass drifts monotonically upward by a visible amount —
/// probability is only conserved close to stationarity.
#[test]
fn criterion_11_conservation_identity_drift() {
    let started = Instant::now();
    let s = fast_growth();
    let n_max = 100;
    let tc = truncated_candidate(&s, n_max).unwrap();
    let variant = ModelVariant::Modified {
        r: tc.q0,
        s0: tc.s_partial,
    };
    let state0 = TruncatedState::point_mass_at_zero(n_max);
    let traj = integrate(&state0, &variant, &s, 0.3, 1e-9).unwrap();
    let rows = mass_flux_report(&traj, &variant, &s).unwrap();

    // Identity residual: numeric d(mass)/dt versus the exact expression
    // R λ_0 (1 − S_0) Σ P_n − μ_N P_N, differenced on the adaptive grid.
    for row in &rows[1..rows.len() - 1] {
        assert!(
            row.residual.abs() < 1e-6,
            "t = {}: identity residual {}",
            row.t,
            row.residual
        );
        assert!(row.identity_rhs > 0.0, "drift rate must be positive");
    }

    // Monotone, visible drift: the model manufactures probability away
    // from stationarity.
    for pair in traj.states.windows(2) {
        assert!(
            pair[1].mass() > pair[0].mass(),
            "mass not monotone between t = {} and t = {}",
            pair[0].t,
            pair[1].t
        );
    }
    let gained = traj.states.last().unwrap().mass() - 1.0;
    assert!(gained > 0.01, "total drift {gained} too small to be visible");
    pass("11", "conservation-identity drift", started);
}
