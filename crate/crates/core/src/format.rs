//! On-disk JSON formats: instance files, solution records and outcome records.
//!
//! Exact numbers are written as `"numerator/denominator"` strings. Report
//! numbers are wrapped in [`Number`], which records the arithmetic mode:
//! `{"exact": "3/4"}` or `{"float": "0.75"}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::items::ItemSet;
use crate::lp::{Assignment, FractionalSolution};
use crate::mechanism::{default_params, MechanismConfig, Outcome};
use crate::scalar::{format_rational, parse_rational, Arithmetic, Rational, Scalar};
use crate::valuations::{KeepRate, Valuation, ValuationKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Number {
    Exact(String),
    Float(String),
}

impl Number {
    pub fn of<T: Scalar>(value: &T) -> Number {
        match T::MODE {
            Arithmetic::Exact => Number::Exact(value.encode()),
            Arithmetic::Float => Number::Float(value.encode()),
        }
    }

    pub fn exact(value: &Rational) -> Number {
        Number::Exact(format_rational(value))
    }

    pub fn as_str(&self) -> &str {
        match self {
            Number::Exact(s) | Number::Float(s) => s,
        }
    }
}

impl std::fmt::Display for Number {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub bundle: ItemSet,
    pub value: String,
}

/// Serialized valuation: a kind tag plus kind-specific payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ValuationSpec {
    Explicit { table: Vec<TableEntry> },
    Additive { weights: Vec<String> },
    UnitDemand { weights: Vec<String> },
    Xos { clauses: Vec<Vec<String>> },
    Coverage {
        element_weights: Vec<String>,
        covers: Vec<Vec<usize>>,
    },
}

fn parse_all(values: &[String]) -> Result<Vec<Rational>> {
    values.iter().map(|s| parse_rational(s)).collect()
}

fn format_all(values: &[Rational]) -> Vec<String> {
    values.iter().map(format_rational).collect()
}

impl ValuationSpec {
    pub fn from_valuation(v: &Valuation<Rational>) -> ValuationSpec {
        match v.kind() {
            ValuationKind::Explicit(table) => ValuationSpec::Explicit {
                table: table
                    .iter()
                    .enumerate()
                    .filter_map(|(bits, value)| {
                        value.as_ref().map(|value| TableEntry {
                            bundle: ItemSet::from_bits(bits as u64),
                            value: format_rational(value),
                        })
                    })
                    .collect(),
            },
            ValuationKind::Additive(w) => ValuationSpec::Additive { weights: format_all(w) },
            ValuationKind::UnitDemand(w) => ValuationSpec::UnitDemand { weights: format_all(w) },
            ValuationKind::Xos(clauses) => ValuationSpec::Xos {
                clauses: clauses.iter().map(|c| format_all(c)).collect(),
            },
            ValuationKind::Coverage {
                element_weights,
                covers,
            } => ValuationSpec::Coverage {
                element_weights: format_all(element_weights),
                covers: covers.clone(),
            },
        }
    }

    pub fn to_valuation(&self, m: usize) -> Result<Valuation<Rational>> {
        let kind = match self {
            ValuationSpec::Explicit { table } => {
                let cap = crate::caps::Caps::default().subsets;
                if m > cap {
                    return Err(Error::capacity("explicit table items", m as u128, cap as u128));
                }
                let mut slots: Vec<Option<Rational>> = vec![None; 1 << m];
                for entry in table {
                    if !entry.bundle.within(m) {
                        return Err(Error::MalformedValuation(format!(
                            "table bundle {} outside {m} items",
                            entry.bundle
                        )));
                    }
                    let slot = &mut slots[entry.bundle.bits() as usize];
                    if slot.is_some() {
                        return Err(Error::MalformedValuation(format!(
                            "duplicate table entry for {}",
                            entry.bundle
                        )));
                    }
                    *slot = Some(parse_rational(&entry.value)?);
                }
                ValuationKind::Explicit(slots)
            }
            ValuationSpec::Additive { weights } => ValuationKind::Additive(parse_all(weights)?),
            ValuationSpec::UnitDemand { weights } => ValuationKind::UnitDemand(parse_all(weights)?),
            ValuationSpec::Xos { clauses } => {
                ValuationKind::Xos(clauses.iter().map(|c| parse_all(c)).collect::<Result<_>>()?)
            }
            ValuationSpec::Coverage {
                element_weights,
                covers,
            } => ValuationKind::Coverage {
                element_weights: parse_all(element_weights)?,
                covers: covers.clone(),
            },
        };
        Valuation::new(m, kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Free-form parameters; `c` and `p` here act as per-instance defaults.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub m: usize,
    pub bidders: Vec<ValuationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

impl InstanceFile {
    pub fn from_instance(instance: &Instance<Rational>, metadata: Option<Metadata>) -> Self {
        InstanceFile {
            schema_version: SCHEMA_VERSION,
            m: instance.items(),
            bidders: instance.valuations().iter().map(ValuationSpec::from_valuation).collect(),
            metadata,
        }
    }

    pub fn to_instance(&self) -> Result<Instance<Rational>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let bidders = self
            .bidders
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                spec.to_valuation(self.m).map_err(|e| match e {
                    Error::MalformedValuation(msg) => Error::MalformedValuation(format!("bidder {i}: {msg}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Instance::new(self.m, bidders)
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.metadata.as_ref()?.params.get(key).map(String::as_str)
    }

    /// Mechanism configuration for this file. Explicit `c`/`p` win over the
    /// metadata parameters, which win over [`default_params`].
    pub fn config(&self, c: Option<&Rational>, p: Option<&Rational>) -> Result<MechanismConfig> {
        let from_meta = |key: &str| self.param(key).map(parse_rational).transpose();
        let meta_c = from_meta("c")?;
        let meta_p = from_meta("p")?;
        let rate = match c.cloned().or(meta_c) {
            Some(c) => KeepRate::from_rational(&c)?,
            None => default_params(self.m)?.0,
        };
        let p = p.cloned().or(meta_p).unwrap_or_else(|| crate::scalar::rational(1, 20));
        MechanismConfig::new(rate, p)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionEntry {
    pub bidder: usize,
    pub bundle: ItemSet,
    pub x: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub arithmetic: Arithmetic,
    pub objective: String,
    pub entries: Vec<SolutionEntry>,
}

impl SolutionRecord {
    pub fn of<T: Scalar>(sol: &FractionalSolution<T>) -> Self {
        SolutionRecord {
            arithmetic: T::MODE,
            objective: sol.objective().encode(),
            entries: sol
                .entries()
                .iter()
                .map(|e| SolutionEntry {
                    bidder: e.bidder,
                    bundle: e.bundle,
                    x: e.x.encode(),
                })
                .collect(),
        }
    }

    /// Reads back an exact record.
    pub fn to_exact(&self) -> Result<FractionalSolution<Rational>> {
        if self.arithmetic != Arithmetic::Exact {
            return Err(Error::Parse("only exact solution records convert back exactly".into()));
        }
        let entries = self
            .entries
            .iter()
            .map(|e| {
                Ok(Assignment {
                    bidder: e.bidder,
                    bundle: e.bundle,
                    x: parse_rational(&e.x)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FractionalSolution::new(entries, parse_rational(&self.objective)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub seed: u64,
    pub halted: bool,
    pub tentative: Vec<ItemSet>,
    pub bundles: Vec<ItemSet>,
    pub q: Vec<Number>,
    pub welfare: Number,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payments: Option<Vec<Number>>,
}

impl OutcomeRecord {
    pub fn of<T: Scalar>(seed: u64, outcome: &Outcome<T>, welfare: &T) -> Self {
        OutcomeRecord {
            seed,
            halted: outcome.halted,
            tentative: outcome.tentative.clone(),
            bundles: outcome.bundles.clone(),
            q: outcome.q.iter().map(Number::of).collect(),
            welfare: Number::of(welfare),
            payments: outcome
                .payments
                .as_ref()
                .map(|p| p.charges.iter().map(Number::of).collect()),
        }
    }
}
