//! Curves `P(t)` defining the pattern `{x, x − t, x − P(t)}`.
//!
//! Only an explicit whitelist of non-flat families is accepted: monomials of
//! degree at least two, polynomials without constant or linear term, and
//! power-log terms `t^α |log t|^β` with `α ∉ {0, 1}`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum Curve {
    #[serde(rename = "monomial")]
    Monomial { d: u32 },
    #[serde(rename = "poly")]
    Polynomial {
        #[serde(with = "exponent_keys")]
        coeffs: BTreeMap<u32, f64>,
    },
    #[serde(rename = "powerlog")]
    PowerLog { alpha: f64, beta: f64 },
}

/// JSON object keys are strings; exponents are parsed from them explicitly
/// because internally tagged enums do not coerce map keys.
mod exponent_keys {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<u32, f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, f64>, D::Error> {
        BTreeMap::<String, f64>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<u32>()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("exponent '{k}' is not a nonnegative integer")))
            })
            .collect()
    }
}

impl Default for Curve {
    fn default() -> Self {
        Curve::Monomial { d: 2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CurveViolation {
    DegreeTooLow(u32),
    NonzeroConstant(f64),
    NonzeroLinear(f64),
    NoNonzeroCoefficient,
    ExcludedExponent(f64),
    NonFinite(&'static str),
}

impl fmt::Display for CurveViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveViolation::DegreeTooLow(d) => write!(f, "monomial degree {d} < 2"),
            CurveViolation::NonzeroConstant(a) => write!(f, "nonzero constant coefficient ({a})"),
            CurveViolation::NonzeroLinear(a) => write!(f, "nonzero linear coefficient ({a})"),
            CurveViolation::NoNonzeroCoefficient => write!(f, "no nonzero coefficient"),
            CurveViolation::ExcludedExponent(a) => write!(f, "α ∈ {{0,1}} excluded (α = {a})"),
            CurveViolation::NonFinite(what) => write!(f, "non-finite {what}"),
        }
    }
}

impl Curve {
    pub fn parabola() -> Self {
        Curve::Monomial { d: 2 }
    }

    pub fn polynomial(coeffs: impl IntoIterator<Item = (u32, f64)>) -> Self {
        Curve::Polynomial {
            coeffs: coeffs.into_iter().collect(),
        }
    }

    /// Empty iff the descriptor belongs to the whitelist.
    pub fn validate(&self) -> Vec<CurveViolation> {
        let mut out = Vec::new();
        match self {
            Curve::Monomial { d } => {
                if *d < 2 {
                    out.push(CurveViolation::DegreeTooLow(*d));
                }
            }
            Curve::Polynomial { coeffs } => {
                if coeffs.values().any(|a| !a.is_finite()) {
                    out.push(CurveViolation::NonFinite("coefficient"));
                }
                if let Some(&a) = coeffs.get(&0).filter(|a| **a != 0.0) {
                    out.push(CurveViolation::NonzeroConstant(a));
                }
                if let Some(&a) = coeffs.get(&1).filter(|a| **a != 0.0) {
                    out.push(CurveViolation::NonzeroLinear(a));
                }
                if coeffs.values().all(|a| *a == 0.0) {
                    out.push(CurveViolation::NoNonzeroCoefficient);
                }
            }
            Curve::PowerLog { alpha, beta } => {
                if !alpha.is_finite() || !beta.is_finite() {
                    out.push(CurveViolation::NonFinite("exponent"));
                }
                if *alpha == 0.0 || *alpha == 1.0 {
                    out.push(CurveViolation::ExcludedExponent(*alpha));
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v.iter().map(ToString::to_string).collect()))
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("curve evaluated at t = {t} <= 0")));
        }
        let value = match self {
            Curve::Monomial { d } => t.powi(*d as i32),
            Curve::Polynomial { coeffs } => coeffs.iter().map(|(&j, &a)| a * t.powi(j as i32)).sum(),
            Curve::PowerLog { alpha, beta } => t.powf(*alpha) * t.ln().abs().powf(*beta),
        };
        if !value.is_finite() {
            return Err(Error::Domain(format!("curve value at t = {t} is not finite")));
        }
        Ok(value)
    }

    /// `‖P‖`, the `ℓ¹` sum of the coefficients; `None` for power-log curves.
    pub fn norm(&self) -> Option<f64> {
        match self {
            Curve::Monomial { .. } => Some(1.0),
            Curve::Polynomial { coeffs } => Some(coeffs.values().map(|a| a.abs()).sum()),
            Curve::PowerLog { .. } => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("curve serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Curve::Monomial { d } => write!(f, "t^{d}"),
            Curve::Polynomial { coeffs } => {
                let terms: Vec<String> = coeffs.iter().map(|(j, a)| format!("{a}·t^{j}")).collect();
                write!(f, "{}", terms.join(" + "))
            }
            Curve::PowerLog { alpha, beta } => write!(f, "t^{alpha}·|log t|^{beta}"),
        }
    }
}

/// Accepts JSON descriptors or the shorthands `monomial:2`, `poly:2=3,5=1`
/// and `powerlog:1.5,1`.
impl FromStr for Curve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return Curve::from_json(s);
        }
        let bad = || Error::Validation(vec![format!("cannot parse curve '{s}'")]);
        let (family, rest) = s.split_once(':').ok_or_else(bad)?;
        match family {
            "monomial" => Ok(Curve::Monomial {
                d: rest.parse().map_err(|_| bad())?,
            }),
            "poly" => {
                let mut coeffs = BTreeMap::new();
                for term in rest.split(',') {
                    let (j, a) = term.split_once('=').ok_or_else(bad)?;
                    coeffs.insert(j.trim().parse().map_err(|_| bad())?, a.trim().parse().map_err(|_| bad())?);
                }
                Ok(Curve::Polynomial { coeffs })
            }
            "powerlog" => {
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                Ok(Curve::PowerLog {
                    alpha: a.trim().parse().map_err(|_| bad())?,
                    beta: b.trim().parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluation_examples() {
        assert_eq!(Curve::parabola().eval(0.5).unwrap(), 0.25);
        let p = Curve::polynomial([(2, 3.0), (5, 1.0)]);
        assert_eq!(p.eval(1.0).unwrap(), 4.0);
        assert_eq!(p.norm(), Some(4.0));
        let pl = Curve::PowerLog { alpha: 1.5, beta: 1.0 };
        let t = (-1.0f64).exp();
        assert!((pl.eval(t).unwrap() - (-1.5f64).exp()).abs() < 1e-15);
        assert_eq!(pl.norm(), None);
    }

    #[test]
    fn nonpositive_arguments_are_rejected() {
        for c in [Curve::parabola(), Curve::PowerLog { alpha: 2.0, beta: 0.0 }] {
            assert!(matches!(c.eval(0.0), Err(Error::Domain(_))));
            assert!(matches!(c.eval(-0.5), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn validation_examples() {
        assert!(Curve::parabola().validate().is_empty());
        let v = Curve::polynomial([(1, 1.0), (2, 1.0)]).validate();
        assert_eq!(v, vec![CurveViolation::NonzeroLinear(1.0)]);
        assert!(v[0].to_string().contains("nonzero linear coefficient"));
        let v = Curve::PowerLog { alpha: 1.0, beta: 2.0 }.validate();
        assert!(v[0].to_string().contains("α ∈ {0,1} excluded"));
        assert!(!Curve::Monomial { d: 1 }.validate().is_empty());
        assert!(!Curve::polynomial([(0, 0.5), (3, 1.0)]).validate().is_empty());
        assert!(!Curve::polynomial([(3, 0.0)]).validate().is_empty());
    }

    #[test]
    fn json_forms() {
        let c = Curve::from_json(r#"{"family":"monomial","d":2}"#).unwrap();
        assert_eq!(c, Curve::parabola());
        let c = Curve::from_json(r#"{"family":"poly","coeffs":{"2":3.0,"5":1.0}}"#).unwrap();
        assert_eq!(c, Curve::polynomial([(2, 3.0), (5, 1.0)]));
        let c = Curve::from_json(r#"{"family":"powerlog","alpha":1.5,"beta":1.0}"#).unwrap();
        assert_eq!(c, Curve::PowerLog { alpha: 1.5, beta: 1.0 });
        assert_eq!(Curve::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn shorthand_forms() {
        assert_eq!("monomial:3".parse::<Curve>().unwrap(), Curve::Monomial { d: 3 });
        assert_eq!(
            "poly:2=3,5=1".parse::<Curve>().unwrap(),
            Curve::polynomial([(2, 3.0), (5, 1.0)])
        );
        assert_eq!(
            "powerlog:1.5,1".parse::<Curve>().unwrap(),
            Curve::PowerLog { alpha: 1.5, beta: 1.0 }
        );
        assert!("cubic".parse::<Curve>().is_err());
    }

    fn horner(coeffs: &[f64], t: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, a| acc * t + a)
    }

    proptest! {
        #[test]
        fn polynomial_matches_horner(
            c in prop::collection::vec(0.0f64..5.0, 1..6),
            t in 1e-3f64..=1.0,
        ) {
            let mut dense = vec![0.0, 0.0];
            dense.extend_from_slice(&c);
            let p = Curve::polynomial(c.iter().enumerate().map(|(i, &a)| (i as u32 + 2, a)));
            let expected = horner(&dense, t);
            let got = p.eval(t).unwrap();
            prop_assert!((got - expected).abs() <= 1e-14 * expected.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn norm_ignores_storage_order(c in prop::collection::btree_map(2u32..9, -3.0f64..3.0, 1..6)) {
            let forward = Curve::polynomial(c.iter().map(|(&j, &a)| (j, a)));
            let backward = Curve::polynomial(c.iter().rev().map(|(&j, &a)| (j, a)));
            prop_assert_eq!(forward.norm(), backward.norm());
            prop_assert_eq!(forward.norm(), Some(c.values().map(|a| a.abs()).sum::<f64>()));
        }
    }
}
