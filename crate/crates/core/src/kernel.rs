//! Standardized data and the linear-algebra primitives used by every
//! selection routine.
//!
//! All columns and the response are centered and scaled to unit Euclidean
//! norm, so R² of a subset is the squared norm of the response projected
//! onto the subset's span, and the R² gain of a single feature is the
//! squared partial correlation times the unexplained fraction.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{RaiError, Result};

/// Adjusted norms at or below this are treated as collinear with the model.
pub const COLLINEARITY_TOL: f64 = 1e-8;

/// Stand-in for an infinite t-statistic (perfect partial fit).
pub const T_SENTINEL: f64 = f64::MAX;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y -= a * x`
pub(crate) fn axpy_sub(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi -= a * xi;
    }
}

/// A centered, unit-norm column together with the constants that map it back
/// to the raw scale: `raw = mean + scale * values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub values: Vec<f64>,
    pub mean: f64,
    pub scale: f64,
}

impl Standardized {
    /// Center and normalize `raw`. Returns `None` when the column is constant.
    pub fn from_raw(raw: &[f64]) -> Option<Self> {
        let n = raw.len();
        if n == 0 {
            return None;
        }
        let mut mean = raw.iter().sum::<f64>() / n as f64;
        let mut values: Vec<f64> = raw.iter().map(|x| x - mean).collect();
        // second pass removes the rounding left in the first mean
        let drift = values.iter().sum::<f64>() / n as f64;
        if drift != 0.0 {
            values.iter_mut().for_each(|v| *v -= drift);
            mean += drift;
        }
        let scale = norm(&values);
        let max_abs = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(scale > 1e-12 * (1.0 + max_abs) * (n as f64).sqrt()) {
            return None;
        }
        values.iter_mut().for_each(|v| *v /= scale);
        Some(Self {
            values,
            mean,
            scale,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Map a standardized-scale vector back to the raw scale.
    pub fn to_raw(&self, standardized: &[f64]) -> Vec<f64> {
        standardized
            .iter()
            .map(|v| self.mean + self.scale * v)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub source_index: usize,
    pub name: String,
}

/// Standardized design and response. Immutable once built.
#[derive(Debug, Clone)]
pub struct Dataset {
    n: usize,
    columns: Vec<Standardized>,
    raw_columns: Vec<Vec<f64>>,
    response: Standardized,
    raw_response: Vec<f64>,
    names: Vec<String>,
    source_index: Vec<usize>,
    dropped: Vec<DroppedColumn>,
}

/// Standardize raw columns (each of length n) and a raw response, naming the
/// features `X1..Xp`.
pub fn standardize(raw_columns: &[Vec<f64>], raw_response: &[f64]) -> Result<Dataset> {
    let names = (1..=raw_columns.len()).map(|i| format!("X{i}")).collect();
    Dataset::from_columns(raw_columns, raw_response, names)
}

impl Dataset {
    pub fn from_columns(
        raw_columns: &[Vec<f64>],
        raw_response: &[f64],
        names: Vec<String>,
    ) -> Result<Self> {
        let n = raw_response.len();
        if n < 3 {
            return Err(RaiError::TooFewObservations(n));
        }
        if names.len() != raw_columns.len() {
            return Err(RaiError::LengthMismatch(names.len(), raw_columns.len()));
        }
        if let Some(row) = raw_response.iter().position(|v| !v.is_finite()) {
            return Err(RaiError::NonFinite {
                what: "response".into(),
                row,
            });
        }
        for (j, col) in raw_columns.iter().enumerate() {
            if col.len() != n {
                return Err(RaiError::RaggedInput {
                    column: j,
                    got: col.len(),
                    expected: n,
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(RaiError::NonFinite {
                    what: names[j].clone(),
                    row,
                });
            }
        }
        let response = Standardized::from_raw(raw_response).ok_or(RaiError::ConstantResponse)?;

        let mut columns = Vec::with_capacity(raw_columns.len());
        let mut kept_raw = Vec::with_capacity(raw_columns.len());
        let mut kept_names = Vec::with_capacity(raw_columns.len());
        let mut source_index = Vec::with_capacity(raw_columns.len());
        let mut dropped = Vec::new();
        for (j, (col, name)) in raw_columns.iter().zip(names).enumerate() {
            match Standardized::from_raw(col) {
                Some(s) => {
                    columns.push(s);
                    kept_raw.push(col.clone());
                    kept_names.push(name);
                    source_index.push(j);
                }
                None => {
                    warn!("dropping constant column {name}");
                    dropped.push(DroppedColumn {
                        source_index: j,
                        name,
                    });
                }
            }
        }
        if columns.is_empty() {
            return Err(RaiError::AllColumnsConstant);
        }
        Ok(Self {
            n,
            columns,
            raw_columns: kept_raw,
            response,
            raw_response: raw_response.to_vec(),
            names: kept_names,
            source_index,
            dropped,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j].values
    }

    pub fn standardized_column(&self, j: usize) -> &Standardized {
        &self.columns[j]
    }

    pub fn raw_column(&self, j: usize) -> &[f64] {
        &self.raw_columns[j]
    }

    pub fn raw_columns(&self) -> &[Vec<f64>] {
        &self.raw_columns
    }

    pub fn response(&self) -> &[f64] {
        &self.response.values
    }

    pub fn standardized_response(&self) -> &Standardized {
        &self.response
    }

    pub fn raw_response(&self) -> &[f64] {
        &self.raw_response
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn raw_means(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.mean).collect()
    }

    pub fn raw_scales(&self) -> Vec<f64> {
        self.columns.iter().map(|c| c.scale).collect()
    }

    /// Position of feature `j` in the caller's original column list.
    pub fn source_index(&self, j: usize) -> usize {
        self.source_index[j]
    }

    /// Feature index for an original column position, if it survived.
    pub fn feature_for_source(&self, source: usize) -> Option<usize> {
        self.source_index.iter().position(|&s| s == source)
    }

    pub fn dropped(&self) -> &[DroppedColumn] {
        &self.dropped
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j < self.p() {
            Ok(())
        } else {
            Err(RaiError::IndexOutOfRange {
                index: j,
                p: self.p(),
            })
        }
    }
}

/// Why a candidate column cannot be tested against the current model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Untestable {
    Collinear,
    InsufficientDf,
}

/// Test statistics for one candidate column against a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub adjusted_norm: f64,
    pub partial_correlation: f64,
    pub t: f64,
}

/// Current least-squares fit of the standardized response on a selected set.
#[derive(Debug, Clone)]
pub struct ModelState {
    n: usize,
    selected: Vec<usize>,
    basis: Vec<Vec<f64>>,
    residual: Vec<f64>,
    r_squared: f64,
    tol: f64,
}

impl ModelState {
    /// Empty model for a centered, unit-norm response.
    pub fn new(response: &[f64]) -> Self {
        let residual = response.to_vec();
        let r_squared = 1.0 - dot(&residual, &residual);
        Self {
            n: response.len(),
            selected: Vec::new(),
            basis: Vec::new(),
            residual,
            r_squared,
            tol: COLLINEARITY_TOL,
        }
    }

    pub fn empty(dataset: &Dataset) -> Self {
        Self::new(dataset.response())
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn size(&self) -> usize {
        self.selected.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn r_squared(&self) -> f64 {
        self.r_squared
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Residual degrees of freedom for testing one more feature.
    pub fn test_df(&self) -> Option<usize> {
        self.n
            .checked_sub(self.selected.len() + 2)
            .filter(|&d| d >= 1)
    }

    /// `x` with its projection onto the selected span removed (not renormalized).
    pub fn adjust(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for q in &self.basis {
            let c = dot(q, &v);
            axpy_sub(&mut v, c, q);
        }
        v
    }

    pub fn adjusted_column(&self, dataset: &Dataset, j: usize) -> Result<Vec<f64>> {
        dataset.check_index(j)?;
        Ok(self.adjust(dataset.column(j)))
    }

    /// Adjusted norm, partial correlation and t-statistic of a candidate.
    pub fn score_column(&self, x: &[f64]) -> std::result::Result<Score, Untestable> {
        let adjusted = self.adjust(x);
        let adjusted_norm = norm(&adjusted);
        if adjusted_norm <= self.tol {
            return Err(Untestable::Collinear);
        }
        let df = self.test_df().ok_or(Untestable::InsufficientDf)?;
        let rho = self.rho(&adjusted, adjusted_norm);
        Ok(Score {
            adjusted_norm,
            partial_correlation: rho,
            t: t_from_rho(rho, df),
        })
    }

    fn rho(&self, adjusted: &[f64], adjusted_norm: f64) -> f64 {
        let r_norm = norm(&self.residual);
        if r_norm == 0.0 {
            return 0.0;
        }
        (dot(&self.residual, adjusted) / (r_norm * adjusted_norm)).clamp(-1.0, 1.0)
    }

    pub fn partial_correlation(&self, dataset: &Dataset, j: usize) -> Result<f64> {
        let adjusted = self.adjusted_column(dataset, j)?;
        let adjusted_norm = norm(&adjusted);
        if adjusted_norm <= self.tol {
            return Err(RaiError::CollinearFeature(j));
        }
        Ok(self.rho(&adjusted, adjusted_norm))
    }

    pub fn t_statistic(&self, dataset: &Dataset, j: usize) -> Result<f64> {
        dataset.check_index(j)?;
        self.score_column(dataset.column(j))
            .map(|s| s.t)
            .map_err(|e| match e {
                Untestable::Collinear => RaiError::CollinearFeature(j),
                Untestable::InsufficientDf => RaiError::InsufficientDf {
                    n: self.n,
                    size: self.selected.len(),
                },
            })
    }

    /// Append column `x` under identifier `id`. Returns the R² gain.
    pub fn add_column(&mut self, id: usize, x: &[f64]) -> Result<f64> {
        // modified Gram-Schmidt plus one reorthogonalization sweep
        let mut v = self.adjust(x);
        for q in &self.basis {
            let c = dot(q, &v);
            axpy_sub(&mut v, c, q);
        }
        let v_norm = norm(&v);
        if v_norm <= self.tol {
            return Err(RaiError::CollinearFeature(id));
        }
        v.iter_mut().for_each(|e| *e /= v_norm);
        let c = dot(&v, &self.residual);
        axpy_sub(&mut self.residual, c, &v);
        self.basis.push(v);
        self.selected.push(id);
        let before = self.r_squared;
        self.r_squared = 1.0 - dot(&self.residual, &self.residual);
        Ok(self.r_squared - before)
    }

    pub fn add_feature(&mut self, dataset: &Dataset, j: usize) -> Result<f64> {
        dataset.check_index(j)?;
        self.add_column(j, dataset.column(j))
    }

    /// Fitted values on the standardized scale, given the response the
    /// model was built from.
    pub fn fitted(&self, response: &[f64]) -> Vec<f64> {
        response
            .iter()
            .zip(&self.residual)
            .map(|(y, r)| y - r)
            .collect()
    }
}

/// t = ρ·√df / √(1 − ρ²), with a signed sentinel for a perfect partial fit.
pub fn t_from_rho(rho: f64, df: usize) -> f64 {
    let unexplained = 1.0 - rho * rho;
    if unexplained <= 8.0 * f64::EPSILON {
        return if rho < 0.0 { -T_SENTINEL } else { T_SENTINEL };
    }
    rho * (df as f64).sqrt() / unexplained.sqrt()
}

fn checked_subset(dataset: &Dataset, subset: &[usize]) -> Result<()> {
    subset.iter().try_for_each(|&j| dataset.check_index(j))
}

/// R² of the standardized response on `subset`, by fresh orthogonalization.
pub fn r_squared_of(dataset: &Dataset, subset: &[usize]) -> Result<f64> {
    checked_subset(dataset, subset)?;
    let mut state = ModelState::empty(dataset);
    for &j in subset {
        state
            .add_feature(dataset, j)
            .map_err(|_| RaiError::SingularSubset)?;
    }
    Ok(state.r_squared().clamp(0.0, 1.0))
}

/// R²(S ∪ A) − R²(S).
pub fn gain(dataset: &Dataset, subset: &[usize], added: &[usize]) -> Result<f64> {
    let mut union = subset.to_vec();
    for &a in added {
        if !union.contains(&a) {
            union.push(a);
        }
    }
    Ok(r_squared_of(dataset, &union)? - r_squared_of(dataset, subset)?)
}

/// Column-major matrix.
type Columns = Vec<Vec<f64>>;

/// Thin QR of the given columns by modified Gram-Schmidt with
/// reorthogonalization: returns orthonormal `q` and upper-triangular `r`
/// stored column-wise (`r[j][i]` for i ≤ j).
pub(crate) fn thin_qr(columns: &[&[f64]], tol: f64) -> Result<(Columns, Columns)> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
    let mut r = Vec::with_capacity(columns.len());
    for x in columns {
        let mut v = x.to_vec();
        let mut coeffs = vec![0.0; q.len() + 1];
        for _sweep in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &v);
                coeffs[i] += c;
                axpy_sub(&mut v, c, qi);
            }
        }
        let v_norm = norm(&v);
        if v_norm <= tol {
            return Err(RaiError::SingularSubset);
        }
        v.iter_mut().for_each(|e| *e /= v_norm);
        coeffs[q.len()] = v_norm;
        q.push(v);
        r.push(coeffs);
    }
    Ok((q, r))
}

/// Least-squares coefficients of `y` on `columns` (no intercept).
pub(crate) fn least_squares(columns: &[&[f64]], y: &[f64], tol: f64) -> Result<Vec<f64>> {
    let (q, r) = thin_qr(columns, tol)?;
    let qty: Vec<f64> = q.iter().map(|qi| dot(qi, y)).collect();
    let k = columns.len();
    let mut b = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = qty[i];
        for j in i + 1..k {
            acc -= r[j][i] * b[j];
        }
        b[i] = acc / r[i][i];
    }
    Ok(b)
}

/// A linear model on the raw scale: `ŷ = intercept + Σ coefficients[k]·x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, raw_columns: &[&[f64]]) -> Result<Vec<f64>> {
        if raw_columns.len() != self.coefficients.len() {
            return Err(RaiError::LengthMismatch(
                raw_columns.len(),
                self.coefficients.len(),
            ));
        }
        let n = raw_columns.first().map_or(0, |c| c.len());
        let mut out = vec![self.intercept; n];
        for (col, b) in raw_columns.iter().zip(&self.coefficients) {
            if col.len() != n {
                return Err(RaiError::LengthMismatch(col.len(), n));
            }
            for (o, x) in out.iter_mut().zip(col.iter()) {
                *o += b * x;
            }
        }
        Ok(out)
    }

    pub fn predict_intercept_only(&self, n: usize) -> Vec<f64> {
        vec![self.intercept; n]
    }
}

/// Fit the standardized response on standardized columns and express the
/// result on the raw scale.
pub fn fit_raw_scale(response: &Standardized, columns: &[&Standardized]) -> Result<LinearFit> {
    let views: Vec<&[f64]> = columns.iter().map(|c| c.values.as_slice()).collect();
    let std_coefs = if views.is_empty() {
        Vec::new()
    } else {
        least_squares(&views, &response.values, COLLINEARITY_TOL)?
    };
    let coefficients: Vec<f64> = std_coefs
        .iter()
        .zip(columns)
        .map(|(b, c)| response.scale * b / c.scale)
        .collect();
    let intercept = response.mean
        - coefficients
            .iter()
            .zip(columns)
            .map(|(b, c)| b * c.mean)
            .sum::<f64>();
    Ok(LinearFit {
        intercept,
        coefficients,
    })
}

/// Raw-scale OLS coefficients and intercept for `subset`.
pub fn coefficients(dataset: &Dataset, subset: &[usize]) -> Result<LinearFit> {
    checked_subset(dataset, subset)?;
    let cols: Vec<&Standardized> = subset
        .iter()
        .map(|&j| dataset.standardized_column(j))
        .collect();
    fit_raw_scale(dataset.standardized_response(), &cols)
}
