//! Exact references used to check selection quality on small problems:
//! forward stepwise, exhaustive best subset, the submodularity ratio of R²,
//! and the approximation bound that ties them together.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{RaiError, Result};
use crate::kernel::{dot, norm, Dataset, ModelState, COLLINEARITY_TOL};

/// Default cap on the number of subsets any enumeration may visit.
pub const DEFAULT_ENUM_BUDGET: u64 = 2_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn check_budget(needed: u128, budget: u64) -> Result<()> {
    if needed > budget as u128 {
        Err(RaiError::BudgetExceeded { needed, budget })
    } else {
        Ok(())
    }
}

/// R² gain of adding `x` to `state`, `⟨r, x⊥⟩² / ‖x⊥‖²`; `None` if collinear.
fn single_gain(state: &ModelState, x: &[f64]) -> Option<f64> {
    let adj = state.adjust(x);
    let a = norm(&adj);
    if a <= state.tolerance() {
        return None;
    }
    let c = dot(state.residual(), &adj) / a;
    Some(c * c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepwiseStop {
    Size(usize),
    Aic,
}

/// Greedy forward path with R² and AIC after every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwisePath {
    pub order: Vec<usize>,
    /// `r_squared[i]` is R² of the first `i` features (`r_squared[0] = 0`).
    pub r_squared: Vec<f64>,
    /// AIC of each prefix, same indexing.
    pub aic: Vec<f64>,
}

impl StepwisePath {
    /// Prefix length minimizing AIC (earliest on ties).
    pub fn aic_size(&self) -> usize {
        let mut best = 0;
        for (i, a) in self.aic.iter().enumerate() {
            if *a < self.aic[best] {
                best = i;
            }
        }
        best
    }
}

/// AIC from a standardized-scale residual sum of squares.
fn aic_from(dataset: &Dataset, unexplained: f64, size: usize) -> f64 {
    let n = dataset.n() as f64;
    let scale = dataset.standardized_response().scale;
    let ess = scale * scale * unexplained;
    if ess <= 0.0 {
        return f64::NEG_INFINITY;
    }
    n * (ess / n).ln() + 2.0 * (size as f64 + 1.0)
}

/// Forward stepwise for at most `max_steps` steps; stops early when no
/// candidate has a positive adjusted norm.
pub fn stepwise_path(dataset: &Dataset, max_steps: usize) -> StepwisePath {
    let mut state = ModelState::empty(dataset);
    let mut in_model = vec![false; dataset.p()];
    let mut path = StepwisePath {
        order: Vec::new(),
        r_squared: vec![0.0],
        aic: vec![aic_from(dataset, 1.0, 0)],
    };
    while path.order.len() < max_steps {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..dataset.p()).filter(|&j| !in_model[j]) {
            if let Some(g) = single_gain(&state, dataset.column(j)) {
                if best.is_none_or(|(_, b)| g > b) {
                    best = Some((j, g));
                }
            }
        }
        let Some((j, _)) = best else { break };
        if state.add_feature(dataset, j).is_err() {
            break;
        }
        in_model[j] = true;
        path.order.push(j);
        path.r_squared.push(state.r_squared());
        let unexplained = dot(state.residual(), state.residual());
        path.aic.push(aic_from(dataset, unexplained, state.size()));
    }
    path
}

/// Forward stepwise selection: greedy argmax of the R² gain, lowest index on ties.
pub fn forward_stepwise(dataset: &Dataset, stop: StepwiseStop) -> Result<Vec<usize>> {
    match stop {
        StepwiseStop::Size(k) => {
            let path = stepwise_path(dataset, k);
            if path.order.len() < k {
                return Err(RaiError::SingularStep);
            }
            Ok(path.order)
        }
        StepwiseStop::Aic => {
            let max_steps = dataset.p().min(dataset.n().saturating_sub(2));
            let path = stepwise_path(dataset, max_steps);
            let k = path.aic_size();
            Ok(path.order[..k].to_vec())
        }
    }
}

/// `n·ln(ESS/n) + 2(|S| + 1)` with ESS on the raw response scale.
pub fn aic(dataset: &Dataset, subset: &[usize]) -> Result<f64> {
    let mut state = ModelState::empty(dataset);
    for &j in subset {
        if j >= dataset.p() {
            return Err(RaiError::IndexOutOfRange {
                index: j,
                p: dataset.p(),
            });
        }
        state
            .add_feature(dataset, j)
            .map_err(|_| RaiError::SingularSubset)?;
    }
    let unexplained = dot(state.residual(), state.residual());
    Ok(aic_from(dataset, unexplained, subset.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSubset {
    pub subset: Vec<usize>,
    pub r_squared: f64,
    pub singular_skipped: u64,
}

/// Exhaustive maximizer of R² over size-`k` subsets (lexicographically
/// smallest on ties). Singular subsets are skipped.
pub fn brute_force_subset(dataset: &Dataset, k: usize, budget: u64) -> Result<BestSubset> {
    let p = dataset.p();
    if k > p {
        return Err(RaiError::InvalidConfig(format!(
            "subset size {k} exceeds p = {p}"
        )));
    }
    check_budget(binomial(p, k), budget)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut singular = 0;
    for subset in (0..p).combinations(k) {
        let mut state = ModelState::empty(dataset);
        if subset
            .iter()
            .any(|&j| state.add_feature(dataset, j).is_err())
        {
            singular += 1;
            continue;
        }
        let r2 = state.r_squared();
        if best.as_ref().is_none_or(|(_, b)| r2 > *b) {
            best = Some((subset, r2));
        }
    }
    let (subset, r_squared) = best.ok_or(RaiError::AllSubsetsSingular)?;
    Ok(BestSubset {
        subset,
        r_squared: r_squared.clamp(0.0, 1.0),
        singular_skipped: singular,
    })
}

/// Solve `C z = b` for symmetric positive definite `C` (row-major, m×m) by
/// Cholesky. `None` when `C` is not numerically positive definite.
fn cholesky_solve(c: &[f64], b: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = c[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if s <= 1e-12 {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    let mut z = b.to_vec();
    for i in 0..m {
        for k in 0..i {
            z[i] -= l[i * m + k] * z[k];
        }
        z[i] /= l[i * m + i];
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            z[i] -= l[k * m + i] * z[k];
        }
        z[i] /= l[i * m + i];
    }
    Some(z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmodularityRatio {
    /// `+∞` when no set disjoint from `S` exists.
    pub gamma: f64,
    /// Minimizing set (lexicographically first among ties).
    pub argmin: Vec<usize>,
    pub evaluated: u64,
    /// Sets whose adjusted correlation matrix was singular.
    pub singular_skipped: u64,
    /// Sets with zero correlation to the response (ratio 0/0).
    pub uninformative_skipped: u64,
}

/// Partial correlations of the response with the `S`-adjusted, renormalized
/// columns in `t`, and their correlation matrix (row-major).
pub fn adjusted_correlations(
    dataset: &Dataset,
    subset: &[usize],
    t: &[usize],
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let mut state = ModelState::empty(dataset);
    for &j in subset {
        state
            .add_feature(dataset, j)
            .map_err(|_| RaiError::SingularSubset)?;
    }
    let mut cols = Vec::with_capacity(t.len());
    for &j in t {
        let mut a = state.adjust(dataset.column(j));
        let an = norm(&a);
        if an <= COLLINEARITY_TOL {
            return Ok(None);
        }
        a.iter_mut().for_each(|v| *v /= an);
        cols.push(a);
    }
    let b = cols.iter().map(|a| dot(dataset.response(), a)).collect();
    let m = cols.len();
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            c[i * m + j] = dot(&cols[i], &cols[j]);
        }
    }
    Ok(Some((b, c)))
}

/// `min over T (T ∩ S = ∅, 1 ≤ |T| ≤ k)` of `b'b / b'C⁻¹b`, where `b` are the
/// response's correlations with the `S`-adjusted `T` columns and `C` their
/// correlation matrix.
pub fn submodularity_ratio(
    dataset: &Dataset,
    subset: &[usize],
    k: usize,
    budget: u64,
) -> Result<SubmodularityRatio> {
    let p = dataset.p();
    let outside: Vec<usize> = (0..p).filter(|j| !subset.contains(j)).collect();
    let kmax = k.min(outside.len());
    let needed: u128 = (1..=kmax).map(|t| binomial(outside.len(), t)).sum();
    check_budget(needed, budget)?;

    let mut state = ModelState::empty(dataset);
    for &j in subset {
        state
            .add_feature(dataset, j)
            .map_err(|_| RaiError::SingularSubset)?;
    }
    // S-adjusted, renormalized outside columns; None when collinear with S
    let adjusted: Vec<Option<Vec<f64>>> = outside
        .iter()
        .map(|&j| {
            let mut a = state.adjust(dataset.column(j));
            let an = norm(&a);
            (an > COLLINEARITY_TOL).then(|| {
                a.iter_mut().for_each(|v| *v /= an);
                a
            })
        })
        .collect();
    let b: Vec<f64> = adjusted
        .iter()
        .map(|a| a.as_ref().map_or(0.0, |a| dot(dataset.response(), a)))
        .collect();
    let q = outside.len();
    let mut gram = vec![0.0; q * q];
    for i in 0..q {
        for j in i..q {
            if let (Some(a), Some(c)) = (&adjusted[i], &adjusted[j]) {
                let v = dot(a, c);
                gram[i * q + j] = v;
                gram[j * q + i] = v;
            }
        }
    }

    let mut out = SubmodularityRatio {
        gamma: f64::INFINITY,
        argmin: Vec::new(),
        evaluated: 0,
        singular_skipped: 0,
        uninformative_skipped: 0,
    };
    if q == 0 {
        return Ok(out);
    }
    for size in 1..=kmax {
        for t in (0..q).combinations(size) {
            if t.iter().any(|&i| adjusted[i].is_none()) {
                out.singular_skipped += 1;
                continue;
            }
            let bt: Vec<f64> = t.iter().map(|&i| b[i]).collect();
            let num = dot(&bt, &bt);
            if num <= 1e-300 {
                out.uninformative_skipped += 1;
                continue;
            }
            let mut ct = vec![0.0; size * size];
            for (r, &i) in t.iter().enumerate() {
                for (c, &j) in t.iter().enumerate() {
                    ct[r * size + c] = gram[i * q + j];
                }
            }
            let Some(z) = cholesky_solve(&ct, &bt, size) else {
                out.singular_skipped += 1;
                continue;
            };
            let den = dot(&bt, &z);
            out.evaluated += 1;
            let ratio = num / den;
            if ratio < out.gamma {
                out.gamma = ratio;
                out.argmin = t.iter().map(|&i| outside[i]).collect();
            }
        }
    }
    if out.evaluated == 0 {
        return Err(RaiError::AllSubsetsSingular);
    }
    Ok(out)
}

/// R² of the response regressed on the `S`-adjusted `T` columns.
pub fn projected_r_squared(dataset: &Dataset, subset: &[usize], t: &[usize]) -> Result<f64> {
    let mut base = ModelState::empty(dataset);
    for &j in subset {
        base.add_feature(dataset, j)
            .map_err(|_| RaiError::SingularSubset)?;
    }
    let adjusted: Vec<Vec<f64>> = t.iter().map(|&j| base.adjust(dataset.column(j))).collect();
    let mut proj = ModelState::empty(dataset);
    for (i, a) in adjusted.iter().enumerate() {
        proj.add_column(i, a)
            .map_err(|_| RaiError::SingularSubset)?;
    }
    Ok(proj.r_squared())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// R² of the best size-`k` subset.
    pub r2_opt: f64,
    /// Size of the selected model.
    pub l: usize,
    /// Reference size.
    pub k: usize,
    /// Submodularity ratio of the selected set at size `k`.
    pub gamma: f64,
    /// First pass with a rejection.
    pub s_f: u32,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RaiError::InvalidConfig(m.to_string()));
        if self.l < 1 || self.k < 1 {
            return bad("l and k must be at least 1");
        }
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if self.s_f < 1 {
            return bad("first rejection pass must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.r2_opt) {
            return bad("r2_opt must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub c1: f64,
    pub c2: f64,
    pub additive: f64,
    pub multiplicative: f64,
    pub bound: f64,
}

/// `max{c₁R²* − Σ_{j=1..l} e^{−(j−1)γ/k}·2^{j−(l+s_f)}, c₂R²*}` with
/// `c_i = 1 − e^{−lγ/(ik)}`.
pub fn theorem_bound(b: &BoundInputs) -> Result<BoundValue> {
    b.validate()?;
    let (l, k) = (b.l as f64, b.k as f64);
    let c = |i: f64| 1.0 - (-l * b.gamma / (i * k)).exp();
    let c1 = c(1.0);
    let c2 = c(2.0);
    let slack: f64 = (1..=b.l)
        .map(|j| {
            let decay = if j == 1 {
                1.0
            } else {
                (-((j - 1) as f64) * b.gamma / k).exp()
            };
            decay * 2f64.powi(j as i32 - (b.l as i32 + b.s_f as i32))
        })
        .sum();
    let additive = c1 * b.r2_opt - slack;
    let multiplicative = c2 * b.r2_opt;
    Ok(BoundValue {
        c1,
        c2,
        additive,
        multiplicative,
        bound: additive.max(multiplicative),
    })
}
