//! Browser demo panels for the growth-with-reset laboratory.
//!
//! Three exported operations back the single-page demo in `www/`: the
//! stationary law of a rate config, the closed-form deviation of a point
//! mass from that law, and an adversarially paused trajectory. Each takes
//! the same JSON rate config the command-line tool reads
//! (`{"gamma": {...}, "mu": {...}}`) and returns a JSON string wrapped in
//! an `{"ok": ...}` envelope, so the page never unwinds across the
//! JS/wasm boundary: failures come back as `{"ok": false, "error": ...}`.

use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

use rglab_core::adversarial::{construct_constant, construct_linear, AdversarialSpec};
use rglab_core::rates::{RateFamily, RateSequence};
use rglab_core::stationary::{normalize, s0_compute, DEFAULT_TAIL_LOG_THRESHOLD};
use rglab_core::transient::{ConstantGrowthTransient, LinearGrowthTransient};

/// Largest truncation window a panel accepts; protects the browser tab
/// from multi-second synchronous calls.
const MAX_WINDOW: usize = 200_000;

/// Curve resolution for the time-dependent panels.
const CURVE_SAMPLES: usize = 257;

/// Most states the deviation panel draws at once.
const MAX_TRACKED_STATE: usize = 12;

/// Most stationary points the adversarial panel plants.
const MAX_PLANTED_POINTS: usize = 8;

/// Longest prefix of the stationary law shipped back for plotting.
const PLOT_PREFIX: usize = 257;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatesConfig {
    gamma: RateFamily,
    mu: RateFamily,
}

fn parse_rates(rates_json: &str) -> Result<RateSequence, String> {
    let cfg: RatesConfig =
        serde_json::from_str(rates_json).map_err(|e| format!("invalid rate config: {e}"))?;
    RateSequence::new(cfg.gamma, cfg.mu).map_err(|e| e.to_string())
}

/// Wraps a panel computation in the `{"ok": ...}` envelope.
fn envelope(result: Result<Value, String>) -> String {
    let value = match result {
        Ok(Value::Object(mut map)) => {
            map.insert("ok".into(), Value::Bool(true));
            Value::Object(map)
        }
        Ok(other) => json!({ "ok": true, "value": other }),
        Err(e) => json!({ "ok": false, "error": e }),
    };
    value.to_string()
}

/// The two rate shapes with closed-form transients, as the demo needs them.
enum ClosedFamily {
    Constant { gamma: f64, mu: f64 },
    Linear { gamma: f64, sigma: f64 },
}

fn closed_family(seq: &RateSequence) -> Result<ClosedFamily, String> {
    match (seq.gamma_family(), seq.mu_family()) {
        (RateFamily::Constant { value: g }, RateFamily::Constant { value: m }) => {
            Ok(ClosedFamily::Constant { gamma: *g, mu: *m })
        }
        (RateFamily::Constant { value: g }, RateFamily::Linear { sigma, b })
            if (*b - 1.0).abs() <= 1e-12 =>
        {
            Ok(ClosedFamily::Linear {
                gamma: *g,
                sigma: *sigma,
            })
        }
        _ => Err(
            "closed forms need a constant reset rate with constant growth or linear growth \
             μ_n = σ(n+1)"
                .into(),
        ),
    }
}

/// Point-mass-at-zero deviations δ_{k0} − Q_k for k = 0..=n.
fn point_mass_deltas(seq: &RateSequence, n: usize) -> Result<Vec<f64>, String> {
    let s0 = s0_compute(seq, n, DEFAULT_TAIL_LOG_THRESHOLD).map_err(|e| e.to_string())?;
    let q = normalize(seq, n, &s0).map_err(|e| e.to_string())?.values;
    Ok((0..=n)
        .map(|k| if k == 0 { 1.0 - q[k] } else { -q[k] })
        .collect())
}

fn uniform_times(tmax: f64) -> Vec<f64> {
    (0..CURVE_SAMPLES)
        .map(|i| tmax * i as f64 / (CURVE_SAMPLES - 1) as f64)
        .collect()
}

/// Stationary law of a rate config over a truncation window.
///
/// Returns the reset-weight sum's partial value and verdict, the ground
/// probability, the boundary estimate, and the first stretch of the law
/// for plotting.
#[wasm_bindgen]
pub fn stationary_panel(rates_json: &str, nmax: usize) -> String {
    envelope((|| {
        let seq = parse_rates(rates_json)?;
        let window = nmax.clamp(2, MAX_WINDOW);
        let s0 = s0_compute(&seq, window, DEFAULT_TAIL_LOG_THRESHOLD)
            .map_err(|e| e.to_string())?;
        let res = normalize(&seq, window, &s0).map_err(|e| e.to_string())?;
        let prefix: Vec<f64> = res.values.iter().copied().take(PLOT_PREFIX).collect();
        Ok(json!({
            "nmax": window,
            "q0": res.q0,
            "q": prefix,
            "window_states": res.values.len(),
            "window_sum": res.normalization_sum,
            "s0": {
                "partial": res.s0.partial_value,
                "classification": res.s0.classification,
                "bracket": res.s0.bracket,
            },
            "boundary": { "value": res.boundary.value, "half_width": res.boundary.half_width },
            "normalizable": res.normalizable,
        }))
    })())
}

/// Deviation of a point mass at the ground state from the stationary law,
/// tracked on states 0..=n, with the watched state's interior pauses.
#[wasm_bindgen]
pub fn transient_panel(rates_json: &str, n: usize, tmax: f64) -> String {
    envelope((|| {
        if n > MAX_TRACKED_STATE {
            return Err(format!("panel tracks at most {MAX_TRACKED_STATE} states"));
        }
        if !(tmax > 0.0 && tmax.is_finite() && tmax <= 1e4) {
            return Err(format!("tmax must lie in (0, 1e4], got {tmax}"));
        }
        let seq = parse_rates(rates_json)?;
        let family = closed_family(&seq)?;
        let deltas = point_mass_deltas(&seq, n)?;
        let times = uniform_times(tmax);

        let (curves, points) = match family {
            ClosedFamily::Constant { gamma, mu } => {
                let tr = ConstantGrowthTransient::new(gamma, mu, deltas)
                    .map_err(|e| e.to_string())?;
                let mut curves = Vec::with_capacity(n + 1);
                for state in 0..=n {
                    let row: Result<Vec<f64>, _> =
                        times.iter().map(|&t| tr.delta(state, t)).collect();
                    curves.push(row.map_err(|e| e.to_string())?);
                }
                (curves, tr.positive_stationary_times(n).map_err(|e| e.to_string())?)
            }
            ClosedFamily::Linear { gamma, sigma } => {
                let tr = LinearGrowthTransient::from_initial_deltas(gamma, sigma, &deltas)
                    .map_err(|e| e.to_string())?;
                let mut curves = Vec::with_capacity(n + 1);
                for state in 0..=n {
                    let row: Result<Vec<f64>, _> =
                        times.iter().map(|&t| tr.delta(state, t)).collect();
                    curves.push(row.map_err(|e| e.to_string())?);
                }
                (curves, tr.positive_stationary_times(n).map_err(|e| e.to_string())?)
            }
        };
        Ok(json!({
            "n": n,
            "times": times,
            "deltas": curves,
            "points": points.iter().map(|r| r.value).collect::<Vec<_>>(),
            "count": points.iter().map(|r| r.multiplicity).sum::<usize>(),
        }))
    })())
}

/// Initial data built so the watched state's deviation pauses n times,
/// the last pause later than M, plus the curve that exhibits it.
#[wasm_bindgen]
pub fn adversarial_panel(rates_json: &str, n: usize, m: f64) -> String {
    envelope((|| {
        if n == 0 || n > MAX_PLANTED_POINTS {
            return Err(format!("n must lie in 1..={MAX_PLANTED_POINTS}"));
        }
        if !(m > 0.0 && m.is_finite() && m <= 1e4) {
            return Err(format!("M must lie in (0, 1e4], got {m}"));
        }
        let seq = parse_rates(rates_json)?;
        let family = closed_family(&seq)?;
        let spec = AdversarialSpec {
            n,
            m_time: m,
            epsilon: None,
            stretch: None,
        };
        let res = match family {
            ClosedFamily::Constant { .. } => construct_constant(&spec, &seq),
            ClosedFamily::Linear { .. } => construct_linear(&spec, &seq),
        }
        .map_err(|e| e.to_string())?;

        // Sample the watched deviation past the last planted pause so the
        // page can draw every level crossing it certified.
        let last = res
            .predicted_points
            .last()
            .copied()
            .unwrap_or(res.m_time);
        let times = uniform_times(1.25 * last);
        let curve: Vec<f64> = match family {
            ClosedFamily::Constant { gamma, mu } => {
                let tr = ConstantGrowthTransient::new(gamma, mu, res.initial_deltas.clone())
                    .map_err(|e| e.to_string())?;
                times
                    .iter()
                    .map(|&t| tr.delta(n, t))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?
            }
            ClosedFamily::Linear { gamma, sigma } => {
                let tr =
                    LinearGrowthTransient::from_initial_deltas(gamma, sigma, &res.initial_deltas)
                        .map_err(|e| e.to_string())?;
                times
                    .iter()
                    .map(|&t| tr.delta(n, t))
                    .collect::<Result<_, _>>()
                    .map_err(|e| e.to_string())?
            }
        };

        let initial_p: Vec<f64> = res.initial_p.iter().copied().take(PLOT_PREFIX).collect();
        Ok(json!({
            "n": n,
            "M": m,
            "points": res.predicted_points,
            "epsilon": res.epsilon,
            "pass": res.certificate.pass(),
            "failures": res.certificate.failures,
            "initial_p": initial_p,
            "initial_states": res.initial_p.len(),
            "times": times,
            "delta": curve,
        }))
    })())
}
