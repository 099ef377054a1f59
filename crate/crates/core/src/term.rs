//! Monomial feature terms and dynamic interaction candidates.
//!
//! When a term enters the model, its product with every selected term
//! (itself included) becomes a new candidate. Repeating this on later
//! rejections reaches higher powers and higher-order products without ever
//! enumerating the interaction space.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{CandidateGenerator, Generated};
use crate::error::{RaiError, Result};
use crate::kernel::Standardized;

/// A monomial in the marginal features: sorted `(feature index, power)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureTerm {
    factors: Vec<(usize, u32)>,
}

impl FeatureTerm {
    pub fn marginal(index: usize) -> Self {
        Self {
            factors: vec![(index, 1)],
        }
    }

    /// Build from arbitrary `(index, power)` pairs; repeated indices add
    /// their powers, zero powers are ignored. Returns `None` for the empty
    /// monomial.
    pub fn from_factors(pairs: impl IntoIterator<Item = (usize, u32)>) -> Option<Self> {
        let mut factors: Vec<(usize, u32)> = Vec::new();
        for (i, k) in pairs {
            if k == 0 {
                continue;
            }
            match factors.iter_mut().find(|(j, _)| *j == i) {
                Some(f) => f.1 += k,
                None => factors.push((i, k)),
            }
        }
        if factors.is_empty() {
            return None;
        }
        factors.sort_unstable();
        Some(Self { factors })
    }

    pub fn factors(&self) -> &[(usize, u32)] {
        &self.factors
    }

    pub fn order(&self) -> u32 {
        self.factors.iter().map(|(_, k)| k).sum()
    }

    pub fn is_marginal(&self) -> bool {
        self.factors.len() == 1 && self.factors[0].1 == 1
    }

    pub fn marginal_index(&self) -> Option<usize> {
        self.is_marginal().then(|| self.factors[0].0)
    }

    pub fn product(&self, other: &Self) -> Self {
        Self::from_factors(self.factors.iter().chain(&other.factors).copied())
            .expect("product of non-empty monomials is non-empty")
    }

    /// True when `self` divides `other` as a monomial.
    pub fn divides(&self, other: &Self) -> bool {
        self.factors
            .iter()
            .all(|&(i, k)| other.factors.iter().any(|&(j, m)| j == i && m >= k))
    }

    /// Canonical key, e.g. `"2:1,3:2"`.
    pub fn key(&self) -> String {
        self.factors
            .iter()
            .map(|(i, k)| format!("{i}:{k}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Display with feature names, e.g. `X3*X4^2`.
    pub fn display_with(&self, names: &[String]) -> String {
        self.factors
            .iter()
            .map(|&(i, k)| {
                let name = names
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| format!("X{}", i + 1));
                if k == 1 {
                    name
                } else {
                    format!("{name}^{k}")
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }
}

impl fmt::Display for FeatureTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&[]))
    }
}

/// Products of `newly_added` with every selected term, minus anything already
/// selected, already streamed, or above `max_order`.
pub fn generate_candidates(
    selected: &[FeatureTerm],
    newly_added: &FeatureTerm,
    max_order: Option<u32>,
    streamed: &HashSet<FeatureTerm>,
) -> Vec<FeatureTerm> {
    debug_assert!(selected.contains(newly_added));
    let mut out: Vec<FeatureTerm> = Vec::new();
    for t in selected {
        let cand = newly_added.product(t);
        if max_order.is_some_and(|m| cand.order() > m) {
            continue;
        }
        if selected.contains(&cand) || streamed.contains(&cand) || out.contains(&cand) {
            continue;
        }
        out.push(cand);
    }
    out
}

/// Raw (uncentered) monomial values: elementwise product of the raw
/// marginal columns raised to their powers.
pub fn raw_values(term: &FeatureTerm, raw_columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = raw_columns.first().map_or(0, |c| c.len());
    let mut values = vec![1.0; n];
    for &(i, k) in term.factors() {
        let col = raw_columns.get(i).ok_or(RaiError::IndexOutOfRange {
            index: i,
            p: raw_columns.len(),
        })?;
        for (v, x) in values.iter_mut().zip(col) {
            *v *= x.powi(k as i32);
        }
    }
    Ok(values)
}

/// The monomial's raw values, centered and unit-normalized.
pub fn realize(term: &FeatureTerm, raw_columns: &[Vec<f64>]) -> Result<Standardized> {
    let values = raw_values(term, raw_columns)?;
    Standardized::from_raw(&values).ok_or_else(|| RaiError::ConstantInteraction(term.to_string()))
}

/// Candidate generator that streams products of selected terms.
#[derive(Debug, Clone)]
pub struct InteractionGenerator<'a> {
    raw_columns: &'a [Vec<f64>],
    max_order: Option<u32>,
}

impl<'a> InteractionGenerator<'a> {
    pub fn new(raw_columns: &'a [Vec<f64>], max_order: Option<u32>) -> Self {
        Self {
            raw_columns,
            max_order,
        }
    }
}

impl CandidateGenerator for InteractionGenerator<'_> {
    fn on_rejection(
        &mut self,
        selected: &[FeatureTerm],
        added: &FeatureTerm,
        streamed: &HashSet<FeatureTerm>,
    ) -> Vec<Generated> {
        generate_candidates(selected, added, self.max_order, streamed)
            .into_iter()
            .map(|term| {
                let column = realize(&term, self.raw_columns).ok();
                Generated { term, column }
            })
            .collect()
    }
}
