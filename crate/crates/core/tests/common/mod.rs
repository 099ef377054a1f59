#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use rai_core::{standardize, Dataset};

/// OLS with intercept solved through the normal equations.
pub struct Ols {
    /// Intercept first, then one coefficient per column.
    pub coef: Vec<f64>,
    pub t: Vec<f64>,
    pub rss: f64,
    pub tss: f64,
    pub fitted: Vec<f64>,
}

impl Ols {
    pub fn r_squared(&self) -> f64 {
        1.0 - self.rss / self.tss
    }
}

pub fn ols(columns: &[&[f64]], y: &[f64]) -> Option<Ols> {
    let n = y.len();
    let k = columns.len() + 1;
    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * &x;
    let inv = xtx.clone().try_inverse()?;
    let beta = &inv * (x.transpose() * &yv);
    let fitted = &x * &beta;
    let resid = &yv - &fitted;
    let rss = resid.dot(&resid);
    let ybar = y.iter().sum::<f64>() / n as f64;
    let tss = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>();
    let sigma2 = rss / (n - k) as f64;
    let t = (0..k)
        .map(|j| beta[j] / (sigma2 * inv[(j, j)]).sqrt())
        .collect();
    Some(Ols {
        coef: beta.iter().copied().collect(),
        t,
        rss,
        tss,
        fitted: fitted.iter().copied().collect(),
    })
}

/// R² of `y` on the dataset columns in `subset` by the normal equations.
pub fn r2_normal_equations(ds: &Dataset, subset: &[usize]) -> f64 {
    let cols: Vec<&[f64]> = subset.iter().map(|&j| ds.raw_column(j)).collect();
    ols(&cols, ds.raw_response())
        .expect("nonsingular")
        .r_squared()
}

/// `1 − ‖(I − H)y‖²` with `H` built explicitly from the standardized columns.
pub fn r2_projector(ds: &Dataset, subset: &[usize]) -> f64 {
    let n = ds.n();
    let y = DVector::from_column_slice(ds.response());
    if subset.is_empty() {
        return 1.0 - y.dot(&y);
    }
    let x = DMatrix::from_fn(n, subset.len(), |i, j| ds.column(subset[j])[i]);
    let h = &x * (x.transpose() * &x).try_inverse().expect("nonsingular") * x.transpose();
    let r = (DMatrix::<f64>::identity(n, n) - h) * &y;
    1.0 - r.dot(&r)
}

/// Random design: `p` columns sharing a common factor with loading `rho`,
/// response from a few of them plus noise.
pub fn random_instance(seed: u64, n: usize, p: usize, rho: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cols, y) = random_raw(&mut rng, n, p, rho);
    standardize(&cols, &y).expect("random instance is non-degenerate")
}

pub fn random_raw(rng: &mut ChaCha8Rng, n: usize, p: usize, rho: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let common: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| {
            let shift: f64 = rng.random_range(-3.0..3.0);
            let scale: f64 = rng.random_range(0.5..4.0);
            common
                .iter()
                .map(|c| {
                    let z: f64 = rng.sample(StandardNormal);
                    shift + scale * (rho * c + z)
                })
                .collect()
        })
        .collect();
    let active = p.min(3);
    let noise = Normal::new(0.0, rng.random_range(0.3..2.0)).unwrap();
    let betas: Vec<f64> = (0..active).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = (0..n)
        .map(|i| {
            let signal: f64 = betas.iter().enumerate().map(|(j, b)| b * cols[j][i]).sum();
            signal + noise.sample(rng)
        })
        .collect();
    (cols, y)
}

/// Exactly orthogonal, centered design from a Sylvester–Hadamard matrix
/// (n a power of two, p < n) and a random response.
pub fn orthogonal_instance(seed: u64, n: usize, p: usize) -> Dataset {
    assert!(n.is_power_of_two() && p < n);
    let h = |i: usize, j: usize| {
        if (i & j).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    };
    let cols: Vec<Vec<f64>> = (1..=p).map(|j| (0..n).map(|i| h(i, j)).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let z: f64 = rng.sample(StandardNormal);
            z + 0.8 * cols[0][i] - 0.5 * cols[p / 2][i]
        })
        .collect();
    standardize(&cols, &y).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
