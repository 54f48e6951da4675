//! Rate sequences for the growth-with-reset process.
//!
//! A process instance is described by two positive sequences indexed by the
//! state n = 0, 1, 2, …: the reset rates γ_n (jump back to state 0) and the
//! growth rates μ_n (step to state n+1). The total exit rate is
//! λ_n = γ_n + μ_n and the reset-to-growth ratio is r_n = γ_n / μ_n.
//!
//! Closed-form families are evaluated lazily — nothing is tabulated — and all
//! derived quantities that would underflow in linear arithmetic (for example
//! r_n for a pair of exponentially decaying families at large n) are computed
//! through logarithms of the family values.
//!
//! The long-run behaviour of r_n decides whether the reset keeps the process
//! tight: [`RateSequence::classify_r_tail`] reports whether Σ ln(1 + r_n)
//! diverges (ratio not vanishing, or vanishing no faster than 1/n) or
//! converges (summable decay). Table families carry no asymptotic
//! information and classify as unknown.

use serde::{Deserialize, Serialize};

use crate::error::RateError;

/// What a table family does when evaluated past its last entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionPolicy {
    /// Evaluation past the end is an error.
    Error,
    /// The final value repeats forever.
    HoldLast,
}

/// A one-parameter family of positive rates, evaluated at any state index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateFamily {
    /// value > 0, independent of n.
    Constant { value: f64 },
    /// sigma · (n + b) with sigma > 0, b > 0.
    Linear { sigma: f64, b: f64 },
    /// c · (n + 1)^s with c > 0 (s may be any real, including negative).
    Power { c: f64, s: f64 },
    /// c · a^n with c > 0, a > 0.
    Exponential { c: f64, a: f64 },
    /// Explicit positive values with an extension policy past the end.
    Table {
        values: Vec<f64>,
        extension: ExtensionPolicy,
    },
}

/// Asymptotic shape of a closed-form family: `coef · base^n · n^deg`
/// as n → ∞ (base 1 and deg 0 denote absent factors).
#[derive(Debug, Clone, Copy)]
pub(crate) struct FamilyAsym {
    pub base: f64,
    pub deg: f64,
    pub coef: f64,
}

impl RateFamily {
    /// Checks the positivity constraints on the family parameters.
    pub fn validate(&self) -> Result<(), RateError> {
        let fail = |msg: String| Err(RateError::InvalidParameter(msg));
        match self {
            RateFamily::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return fail(format!("constant value must be positive, got {value}"));
                }
            }
            RateFamily::Linear { sigma, b } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return fail(format!("linear slope must be positive, got {sigma}"));
                }
                if !(*b > 0.0 && b.is_finite()) {
                    return fail(format!("linear offset must be positive, got {b}"));
                }
            }
            RateFamily::Power { c, s } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return fail(format!("power prefactor must be positive, got {c}"));
                }
                if !s.is_finite() {
                    return fail(format!("power exponent must be finite, got {s}"));
                }
            }
            RateFamily::Exponential { c, a } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return fail(format!("exponential prefactor must be positive, got {c}"));
                }
                if !(*a > 0.0 && a.is_finite()) {
                    return fail(format!("exponential base must be positive, got {a}"));
                }
            }
            RateFamily::Table { values, .. } => {
                if values.is_empty() {
                    return Err(RateError::EmptyTable);
                }
                for (i, v) in values.iter().enumerate() {
                    if !(*v > 0.0 && v.is_finite()) {
                        return fail(format!("table entry {i} must be positive, got {v}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Rate value at state n. May underflow to zero (or overflow) for extreme
    /// indices of exponential families; log-space internals avoid that.
    pub fn value_at(&self, n: usize) -> Result<f64, RateError> {
        match self {
            RateFamily::Constant { value } => Ok(*value),
            RateFamily::Linear { sigma, b } => Ok(sigma * (n as f64 + b)),
            RateFamily::Power { c, s } => Ok(c * (n as f64 + 1.0).powf(*s)),
            RateFamily::Exponential { c, a } => Ok(c * a.powf(n as f64)),
            RateFamily::Table { values, extension } => match values.get(n) {
                Some(v) => Ok(*v),
                None => match extension {
                    ExtensionPolicy::HoldLast => Ok(*values.last().expect("non-empty")),
                    ExtensionPolicy::Error => Err(RateError::IndexOutOfRange {
                        index: n,
                        len: values.len(),
                    }),
                },
            },
        }
    }

    /// Natural logarithm of the rate at state n, computed without forming the
    /// rate itself (safe far past f64 underflow of the linear value).
    pub(crate) fn ln_at(&self, n: usize) -> Result<f64, RateError> {
        match self {
            RateFamily::Constant { value } => Ok(value.ln()),
            RateFamily::Linear { sigma, b } => Ok(sigma.ln() + (n as f64 + b).ln()),
            RateFamily::Power { c, s } => Ok(c.ln() + s * (n as f64 + 1.0).ln()),
            RateFamily::Exponential { c, a } => Ok(c.ln() + n as f64 * a.ln()),
            RateFamily::Table { .. } => Ok(self.value_at(n)?.ln()),
        }
    }

    /// Asymptotic descriptor; `None` for tables.
    pub(crate) fn asymptotics(&self) -> Option<FamilyAsym> {
        match self {
            RateFamily::Constant { value } => Some(FamilyAsym {
                base: 1.0,
                deg: 0.0,
                coef: *value,
            }),
            RateFamily::Linear { sigma, .. } => Some(FamilyAsym {
                base: 1.0,
                deg: 1.0,
                coef: *sigma,
            }),
            RateFamily::Power { c, s } => Some(FamilyAsym {
                base: 1.0,
                deg: *s,
                coef: *c,
            }),
            RateFamily::Exponential { c, a } => Some(FamilyAsym {
                base: *a,
                deg: 0.0,
                coef: *c,
            }),
            RateFamily::Table { .. } => None,
        }
    }

    /// The constant value when the family is constant.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            RateFamily::Constant { value } => Some(*value),
            _ => None,
        }
    }

    /// The slope when the family is linear with unit offset (σ·(n+1)).
    pub fn unit_offset_slope(&self) -> Option<f64> {
        match self {
            RateFamily::Linear { sigma, b } if *b == 1.0 => Some(*sigma),
            _ => None,
        }
    }
}

/// Long-run classification of the ratio r_n = γ_n / μ_n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailClass {
    /// r_n does not tend to zero (bounded below or divergent):
    /// Σ ln(1 + r_n) diverges.
    NotVanishing,
    /// r_n → 0 no faster than 1/n: the log sum still diverges.
    HarmonicOrSlower,
    /// Σ ln(1 + r_n) < ∞ (r_n decays faster than 1/n).
    SummableLog,
    /// No asymptotic information (table families).
    Unknown,
}

/// How r_n decays when its log sum converges; drives tail-remainder
/// estimation for partial sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RDecay {
    /// r_n ~ coef · n^(−s) with s > 1.
    PowerLike { s: f64 },
    /// r_(n+1) / r_n → beta with beta < 1.
    ExpLike { beta: f64 },
}

/// A validated (γ, μ) pair.
///
/// Deserializes from the JSON shape
/// `{"gamma": {"kind": …}, "mu": {"kind": …}}`; construction rejects any
/// non-positive parameter, so every evaluated rate is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateSequenceConfig")]
pub struct RateSequence {
    gamma: RateFamily,
    mu: RateFamily,
}

/// Raw deserialization target; converted through validation.
#[derive(Deserialize)]
struct RateSequenceConfig {
    gamma: RateFamily,
    mu: RateFamily,
}

impl TryFrom<RateSequenceConfig> for RateSequence {
    type Error = RateError;
    fn try_from(cfg: RateSequenceConfig) -> Result<Self, RateError> {
        RateSequence::new(cfg.gamma, cfg.mu)
    }
}

impl RateSequence {
    pub fn new(gamma: RateFamily, mu: RateFamily) -> Result<Self, RateError> {
        gamma.validate()?;
        mu.validate()?;
        Ok(Self { gamma, mu })
    }

    pub fn gamma_family(&self) -> &RateFamily {
        &self.gamma
    }

    pub fn mu_family(&self) -> &RateFamily {
        &self.mu
    }

    /// Reset rate γ_n.
    pub fn gamma_at(&self, n: usize) -> Result<f64, RateError> {
        self.gamma.value_at(n)
    }

    /// Growth rate μ_n.
    pub fn mu_at(&self, n: usize) -> Result<f64, RateError> {
        self.mu.value_at(n)
    }

    /// Total exit rate λ_n = γ_n + μ_n.
    pub fn lambda_at(&self, n: usize) -> Result<f64, RateError> {
        Ok(self.gamma.value_at(n)? + self.mu.value_at(n)?)
    }

    /// Ratio r_n = γ_n / μ_n, formed in log space so that pairs of tiny
    /// (or huge) rates still produce the correct finite ratio.
    pub fn r_at(&self, n: usize) -> Result<f64, RateError> {
        Ok((self.gamma.ln_at(n)? - self.mu.ln_at(n)?).exp())
    }

    pub(crate) fn ln_gamma_at(&self, n: usize) -> Result<f64, RateError> {
        self.gamma.ln_at(n)
    }

    pub(crate) fn ln_mu_at(&self, n: usize) -> Result<f64, RateError> {
        self.mu.ln_at(n)
    }

    /// ln λ_n via stable log-sum-exp of the member logs.
    pub(crate) fn ln_lambda_at(&self, n: usize) -> Result<f64, RateError> {
        Ok(crate::numeric::log_add_exp(
            self.gamma.ln_at(n)?,
            self.mu.ln_at(n)?,
        ))
    }

    /// Classifies the tail of r_n from the closed-form family shapes.
    ///
    /// Exponential factors dominate: if the base ratio exceeds 1 the ratio
    /// diverges, below 1 it decays geometrically. With equal bases the
    /// polynomial degrees decide: degree difference ≥ 0 keeps the ratio away
    /// from zero, a difference in [−1, 0) gives harmonic-or-slower decay, and
    /// below −1 the log sum converges. Tables classify as unknown.
    pub fn classify_r_tail(&self) -> TailClass {
        let (g, m) = match (self.gamma.asymptotics(), self.mu.asymptotics()) {
            (Some(g), Some(m)) => (g, m),
            _ => return TailClass::Unknown,
        };
        let base = g.base / m.base;
        if base > 1.0 {
            return TailClass::NotVanishing;
        }
        if base < 1.0 {
            return TailClass::SummableLog;
        }
        let deg = g.deg - m.deg;
        if deg >= 0.0 {
            TailClass::NotVanishing
        } else if deg >= -1.0 {
            TailClass::HarmonicOrSlower
        } else {
            TailClass::SummableLog
        }
    }

    /// Decay model for r_n when the tail is summable; `None` when the
    /// class is not [`TailClass::SummableLog`] or no closed form exists.
    pub(crate) fn r_decay(&self) -> Option<RDecay> {
        if self.classify_r_tail() != TailClass::SummableLog {
            return None;
        }
        let g = self.gamma.asymptotics()?;
        let m = self.mu.asymptotics()?;
        let base = g.base / m.base;
        if base < 1.0 {
            Some(RDecay::ExpLike { beta: base })
        } else {
            Some(RDecay::PowerLike {
                s: m.deg - g.deg, // decay exponent, > 1 here
            })
        }
    }

    /// Asymptotics of both families, for normalizability analysis.
    pub(crate) fn family_asymptotics(&self) -> Option<(FamilyAsym, FamilyAsym)> {
        Some((self.gamma.asymptotics()?, self.mu.asymptotics()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(gamma: RateFamily, mu: RateFamily) -> RateSequence {
        RateSequence::new(gamma, mu).expect("valid families")
    }

    fn constant(v: f64) -> RateFamily {
        RateFamily::Constant { value: v }
    }

    #[test]
    fn family_evaluation_examples() {
        let s = seq(constant(1.0), RateFamily::Power { c: 1.0, s: 2.0 });
        assert_eq!(s.gamma_at(7).unwrap(), 1.0);
        assert_eq!(s.mu_at(2).unwrap(), 9.0);
        assert_eq!(s.lambda_at(2).unwrap(), 10.0);
        assert!((s.r_at(3).unwrap() - 1.0 / 16.0).abs() < 1e-16);

        let e = RateFamily::Exponential {
            c: 1.0,
            a: (-1.0f64).exp(),
        };
        assert!((e.value_at(2).unwrap() - (-2.0f64).exp()).abs() < 1e-18);

        let lin = RateFamily::Linear { sigma: 2.0, b: 0.5 };
        assert_eq!(lin.value_at(3).unwrap(), 7.0);
    }

    #[test]
    fn table_extension_policies() {
        let hold = RateFamily::Table {
            values: vec![1.0, 2.0, 3.0],
            extension: ExtensionPolicy::HoldLast,
        };
        assert_eq!(hold.value_at(1).unwrap(), 2.0);
        assert_eq!(hold.value_at(10).unwrap(), 3.0);

        let strict = RateFamily::Table {
            values: vec![1.0, 2.0, 3.0],
            extension: ExtensionPolicy::Error,
        };
        assert_eq!(
            strict.value_at(3),
            Err(RateError::IndexOutOfRange { index: 3, len: 3 })
        );
    }

    #[test]
    fn construction_rejects_non_positive_parameters() {
        let bad = [
            constant(0.0),
            constant(-1.0),
            RateFamily::Linear { sigma: 0.0, b: 1.0 },
            RateFamily::Linear {
                sigma: 1.0,
                b: -1.0,
            },
            RateFamily::Power { c: 0.0, s: 2.0 },
            RateFamily::Exponential { c: 1.0, a: 0.0 },
            RateFamily::Exponential { c: -2.0, a: 0.5 },
            RateFamily::Table {
                values: vec![1.0, 0.0],
                extension: ExtensionPolicy::HoldLast,
            },
            RateFamily::Table {
                values: vec![],
                extension: ExtensionPolicy::Error,
            },
        ];
        for fam in bad {
            assert!(
                RateSequence::new(fam.clone(), constant(1.0)).is_err(),
                "family {fam:?} should be rejected"
            );
        }
    }

    #[test]
    fn rate_identities_hold_across_families() {
        // λ = γ + μ and r·μ = γ to a few ulps, sampled over every family kind.
        let families = [
            constant(0.7),
            RateFamily::Linear { sigma: 1.5, b: 2.0 },
            RateFamily::Power { c: 0.3, s: -1.2 },
            RateFamily::Exponential { c: 2.0, a: 1.1 },
            RateFamily::Table {
                values: vec![0.5, 1.5, 2.5, 0.25],
                extension: ExtensionPolicy::HoldLast,
            },
        ];
        for g in &families {
            for m in &families {
                let s = seq(g.clone(), m.clone());
                for n in [0usize, 1, 5, 33] {
                    let gamma = s.gamma_at(n).unwrap();
                    let mu = s.mu_at(n).unwrap();
                    let lambda = s.lambda_at(n).unwrap();
                    let r = s.r_at(n).unwrap();
                    assert_eq!(lambda, gamma + mu);
                    assert!((r * mu - gamma).abs() <= 4.0 * f64::EPSILON * gamma);
                    assert!(gamma > 0.0 && mu > 0.0 && lambda > 0.0 && r > 0.0);
                }
            }
        }
    }

    #[test]
    fn ratio_survives_underflowing_rates() {
        // γ_n = μ_n = e^(−n): the raw values underflow near n = 745, but the
        // ratio is identically 1 and must stay 1.
        let f = RateFamily::Exponential {
            c: 1.0,
            a: (-1.0f64).exp(),
        };
        let s = seq(f.clone(), f);
        for n in [0usize, 10, 700, 800, 5000] {
            assert_eq!(s.r_at(n).unwrap(), 1.0, "r at n = {n}");
        }
    }

    #[test]
    fn tail_classification_examples() {
        // Constant ratio: never vanishes.
        let s = seq(constant(1.0), constant(2.0));
        assert_eq!(s.classify_r_tail(), TailClass::NotVanishing);

        // r_n ~ 1/(n+1): harmonic.
        let s = seq(constant(1.0), RateFamily::Linear { sigma: 1.0, b: 1.0 });
        assert_eq!(s.classify_r_tail(), TailClass::HarmonicOrSlower);

        // r_n ~ (n+1)^−2: summable.
        let s = seq(constant(1.0), RateFamily::Power { c: 1.0, s: 2.0 });
        assert_eq!(s.classify_r_tail(), TailClass::SummableLog);

        // Equal exponentials: ratio constant 1.
        let e = RateFamily::Exponential {
            c: 1.0,
            a: (-1.0f64).exp(),
        };
        let s = seq(e.clone(), e);
        assert_eq!(s.classify_r_tail(), TailClass::NotVanishing);

        // γ decays geometrically against constant μ: summable.
        let s = seq(
            RateFamily::Exponential { c: 3.0, a: 0.5 },
            constant(1.0),
        );
        assert_eq!(s.classify_r_tail(), TailClass::SummableLog);

        // Tables carry no tail information.
        let s = seq(
            RateFamily::Table {
                values: vec![1.0],
                extension: ExtensionPolicy::HoldLast,
            },
            constant(1.0),
        );
        assert_eq!(s.classify_r_tail(), TailClass::Unknown);
    }

    #[test]
    fn classification_matches_numerical_behaviour() {
        // Summable class: partial log sums form a Cauchy sequence.
        let s = seq(constant(1.0), RateFamily::Power { c: 1.0, s: 2.0 });
        let partial = |n_max: usize| -> f64 {
            (0..=n_max).map(|n| s.r_at(n).unwrap().ln_1p()).sum()
        };
        assert!(partial(20_000) - partial(10_000) < 1e-3);

        // Harmonic class: the same increment stays bounded away from zero.
        let s = seq(constant(1.0), RateFamily::Linear { sigma: 1.0, b: 1.0 });
        let partial = |n_max: usize| -> f64 {
            (0..=n_max).map(|n| s.r_at(n).unwrap().ln_1p()).sum()
        };
        assert!(partial(20_000) - partial(10_000) > 0.5);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let text = r#"{
            "gamma": {"kind": "constant", "value": 1.0},
            "mu": {"kind": "power", "c": 1.0, "s": 2.0}
        }"#;
        let s: RateSequence = serde_json::from_str(text).unwrap();
        assert_eq!(s.mu_at(2).unwrap(), 9.0);

        let bad = r#"{
            "gamma": {"kind": "constant", "value": -1.0},
            "mu": {"kind": "constant", "value": 1.0}
        }"#;
        assert!(serde_json::from_str::<RateSequence>(bad).is_err());

        let table = r#"{
            "gamma": {"kind": "table", "values": [0.5, 2.0], "extension": "hold-last"},
            "mu": {"kind": "linear", "sigma": 1.0, "b": 1.0}
        }"#;
        let s: RateSequence = serde_json::from_str(table).unwrap();
        assert_eq!(s.gamma_at(9).unwrap(), 2.0);
    }
}
