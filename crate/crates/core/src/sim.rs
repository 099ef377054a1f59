//! Simulation harness: polynomial-truth designs, a global-null design, risk
//! against the true mean, and replicated experiments with persisted results.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{run_rai, RaiConfig};
use crate::error::{RaiError, Result};
use crate::kernel::{fit_raw_scale, standardize, Dataset, ModelState, Standardized};
use crate::oracle::{forward_stepwise, StepwiseStop};
use crate::term::{raw_values as term_values, realize, FeatureTerm};
use crate::wealth::MfdrCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// `β₁X₁X₂ + β₂X₃X₄² + β₃X₅X₆³ + β₄X₇X₈X₉X₁₀`
    PaperInteractions,
    /// `β₁X₁X₂`
    SingleInteraction,
    GlobalNull,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::PaperInteractions => "paper_interactions",
            Scenario::SingleInteraction => "single_interaction",
            Scenario::GlobalNull => "global_null",
        }
    }

    /// True mean terms (0-based feature indices).
    pub fn true_terms(&self) -> Vec<FeatureTerm> {
        let t = |f: &[(usize, u32)]| FeatureTerm::from_factors(f.iter().copied()).unwrap();
        match self {
            Scenario::PaperInteractions => vec![
                t(&[(0, 1), (1, 1)]),
                t(&[(2, 1), (3, 2)]),
                t(&[(4, 1), (5, 3)]),
                t(&[(6, 1), (7, 1), (8, 1), (9, 1)]),
            ],
            Scenario::SingleInteraction => vec![t(&[(0, 1), (1, 1)])],
            Scenario::GlobalNull => Vec::new(),
        }
    }

    fn min_p(&self) -> usize {
        match self {
            Scenario::PaperInteractions => 10,
            Scenario::SingleInteraction => 2,
            Scenario::GlobalNull => 1,
        }
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "paper_interactions" => Ok(Scenario::PaperInteractions),
            "single_interaction" => Ok(Scenario::SingleInteraction),
            "global_null" => Ok(Scenario::GlobalNull),
            other => Err(format!("unknown scenario '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rai,
    RaiInteractions,
    StepwiseAic,
    MeanModel,
    TrueModel,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rai => "rai",
            Method::RaiInteractions => "rai_interactions",
            Method::StepwiseAic => "stepwise_aic",
            Method::MeanModel => "mean_model",
            Method::TrueModel => "true_model",
        }
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rai" => Ok(Method::Rai),
            "rai_interactions" => Ok(Method::RaiInteractions),
            "stepwise_aic" => Ok(Method::StepwiseAic),
            "mean_model" => Ok(Method::MeanModel),
            "true_model" => Ok(Method::TrueModel),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub scenario: Scenario,
    pub target_r2: f64,
    pub replications: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn new(scenario: Scenario, n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            scenario,
            target_r2: 0.83,
            replications: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RaiError::InvalidConfig(m));
        if !(self.target_r2 > 0.0 && self.target_r2 < 1.0) {
            return bad(format!("target R² {} outside (0, 1)", self.target_r2));
        }
        if self.replications < 1 {
            return bad("need at least one replication".into());
        }
        if self.n < 3 {
            return bad(format!("n = {} is below 3", self.n));
        }
        if self.p < self.scenario.min_p() {
            return bad(format!(
                "{} needs p >= {}",
                self.scenario.name(),
                self.scenario.min_p()
            ));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Raw design for replication `rep`: column means `τ_j ~ N(0, 4)`, entries
/// `N(τ_j, 1)`. Returned column-major.
pub fn gen_design(spec: &SimSpec, rep: usize) -> Vec<Vec<f64>> {
    let mut rng = spec.rng(2 * rep as u64);
    let tau_dist = Normal::new(0.0, 2.0).expect("valid normal");
    let taus: Vec<f64> = (0..spec.p).map(|_| tau_dist.sample(&mut rng)).collect();
    taus.iter()
        .map(|&tau| {
            let d = Normal::new(tau, 1.0).expect("valid normal");
            (0..spec.n).map(|_| d.sample(&mut rng)).collect()
        })
        .collect()
}

/// Coefficients giving every term the same centered norm contribution and a
/// signal-to-total variance ratio of `target_r2` under unit noise variance.
pub fn calibrate_beta(
    raw_columns: &[Vec<f64>],
    terms: &[FeatureTerm],
    target_r2: f64,
) -> Result<Vec<f64>> {
    if terms.is_empty() {
        return Ok(Vec::new());
    }
    let n = raw_columns.first().map_or(0, |c| c.len());
    let mut direction = vec![0.0; n];
    let mut norms = Vec::with_capacity(terms.len());
    for term in terms {
        let s = realize(term, raw_columns)
            .map_err(|_| RaiError::DegenerateTerms(format!("{term} is constant")))?;
        for (d, v) in direction.iter_mut().zip(&s.values) {
            *d += v;
        }
        norms.push(s.scale);
    }
    let dir_norm2: f64 = direction.iter().map(|d| d * d).sum();
    if dir_norm2 <= 0.0 {
        return Err(RaiError::DegenerateTerms("terms cancel exactly".into()));
    }
    // Var(μ) = c²‖Σu‖²/(n−1) must equal R²/(1−R²)
    let signal_var = target_r2 / (1.0 - target_r2);
    let c = (signal_var * (n as f64 - 1.0) / dir_norm2).sqrt();
    Ok(norms.iter().map(|s| c / s).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    pub terms: Vec<FeatureTerm>,
}

/// `y = μ + ε`, `ε ~ N(0, I)`, with the scenario's calibrated mean.
pub fn gen_response(raw_columns: &[Vec<f64>], spec: &SimSpec, rep: usize) -> Result<Truth> {
    let n = spec.n;
    let terms = spec.scenario.true_terms();
    let beta = calibrate_beta(raw_columns, &terms, spec.target_r2)?;
    let mut mu = vec![0.0; n];
    for (term, b) in terms.iter().zip(&beta) {
        let v = term_values(term, raw_columns)?;
        for (m, x) in mu.iter_mut().zip(&v) {
            *m += b * x;
        }
    }
    let mut rng = spec.rng(2 * rep as u64 + 1);
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let y = mu.iter().map(|m| m + noise.sample(&mut rng)).collect();
    Ok(Truth { y, mu, beta, terms })
}

/// `Σ (μᵢ − ŷᵢ)²`
pub fn risk(mu: &[f64], yhat: &[f64]) -> Result<f64> {
    if mu.len() != yhat.len() {
        return Err(RaiError::LengthMismatch(mu.len(), yhat.len()));
    }
    Ok(mu.iter().zip(yhat).map(|(m, y)| (m - y).powi(2)).sum())
}

/// OLS of the raw response on the raw term columns (with intercept): sample
/// R² and each term's t-statistic.
pub fn true_model_fit(
    raw_columns: &[Vec<f64>],
    y: &[f64],
    terms: &[FeatureTerm],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let response = Standardized::from_raw(y).ok_or(RaiError::ConstantResponse)?;
    let cols: Vec<Standardized> = terms
        .iter()
        .map(|t| realize(t, raw_columns))
        .collect::<Result<_>>()?;
    let mut full = ModelState::new(&response.values);
    for (i, c) in cols.iter().enumerate() {
        full.add_column(i, &c.values)
            .map_err(|_| RaiError::DegenerateTerms("true terms are collinear".into()))?;
    }
    let mut t_stats = Vec::with_capacity(cols.len());
    for i in 0..cols.len() {
        let mut others = ModelState::new(&response.values);
        for (j, c) in cols.iter().enumerate().filter(|(j, _)| *j != i) {
            others.add_column(j, &c.values)?;
        }
        let score = others
            .score_column(&cols[i].values)
            .map_err(|_| RaiError::DegenerateTerms("true terms are collinear".into()))?;
        t_stats.push(score.t);
    }
    let refs: Vec<&Standardized> = cols.iter().collect();
    let fit = fit_raw_scale(&response, &refs)?;
    let raw_terms: Vec<Vec<f64>> = terms
        .iter()
        .map(|t| term_values(t, raw_columns))
        .collect::<Result<_>>()?;
    let views: Vec<&[f64]> = raw_terms.iter().map(|v| v.as_slice()).collect();
    let fitted = if views.is_empty() {
        fit.predict_intercept_only(y.len())
    } else {
        fit.predict(&views)?
    };
    Ok((full.r_squared(), t_stats, fitted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub risk: f64,
    pub model_size: usize,
    pub selected: Vec<String>,
    /// True terms present in the selected model.
    pub true_terms_recovered: usize,
    /// Every true term and every marginal feature it involves selected.
    pub all_recovered: bool,
    /// Selected terms that neither equal nor divide a true term.
    pub false_selections: usize,
    pub passes: u32,
    pub wealth_spent: f64,
    /// Sample R² and term t-statistics of the OLS fit on the true terms.
    pub true_r_squared: f64,
    pub true_term_t: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl ReplicationRecord {
    fn failed(rep: usize, e: &RaiError) -> Self {
        Self {
            rep,
            risk: f64::NAN,
            model_size: 0,
            selected: Vec::new(),
            true_terms_recovered: 0,
            all_recovered: false,
            false_selections: 0,
            passes: 0,
            wealth_spent: 0.0,
            true_r_squared: f64::NAN,
            true_term_t: Vec::new(),
            wall_ms: None,
            error: Some(e.to_string()),
        }
    }
}

fn recovery(selected: &[FeatureTerm], truth: &[FeatureTerm]) -> (usize, bool, usize) {
    let recovered = truth.iter().filter(|t| selected.contains(t)).count();
    let all = truth.iter().all(|t| {
        selected.contains(t)
            && t.factors()
                .iter()
                .all(|&(i, _)| selected.contains(&FeatureTerm::marginal(i)))
    });
    let false_sel = selected
        .iter()
        .filter(|s| !truth.iter().any(|t| s.divides(t)))
        .count();
    (recovered, all, false_sel)
}

/// Run one method on one replication.
pub fn run_replication(spec: &SimSpec, method: Method, rep: usize) -> Result<ReplicationRecord> {
    let x = gen_design(spec, rep);
    let truth = gen_response(&x, spec, rep)?;
    let dataset = standardize(&x, &truth.y)?;
    let (true_r_squared, true_term_t, true_fitted) = true_model_fit(&x, &truth.y, &truth.terms)?;

    let mut passes = 0;
    let mut wealth_spent = 0.0;
    let (selected, yhat): (Vec<FeatureTerm>, Vec<f64>) = match method {
        Method::Rai | Method::RaiInteractions => {
            let config = RaiConfig::default().with_interactions(method == Method::RaiInteractions);
            let out = run_rai(&dataset, &config)?;
            passes = out.trace.passes_traversed;
            wealth_spent = out.trace.total_spent();
            let terms = source_terms(&dataset, &out.terms);
            (terms, out.fitted_values(&dataset))
        }
        Method::StepwiseAic => {
            let subset = forward_stepwise(&dataset, StepwiseStop::Aic)?;
            let terms: Vec<FeatureTerm> =
                subset.iter().map(|&j| FeatureTerm::marginal(j)).collect();
            let fitted = stepwise_fitted(&dataset, &subset);
            (source_terms(&dataset, &terms), fitted)
        }
        Method::MeanModel => {
            let ybar = dataset.standardized_response().mean;
            (Vec::new(), vec![ybar; spec.n])
        }
        Method::TrueModel => (truth.terms.clone(), true_fitted),
    };
    let (true_terms_recovered, all_recovered, false_selections) = recovery(&selected, &truth.terms);
    let names: Vec<String> = (1..=spec.p).map(|i| format!("X{i}")).collect();
    Ok(ReplicationRecord {
        rep,
        risk: risk(&truth.mu, &yhat)?,
        model_size: selected.len(),
        selected: selected.iter().map(|t| t.display_with(&names)).collect(),
        true_terms_recovered,
        all_recovered,
        false_selections,
        passes,
        wealth_spent,
        true_r_squared,
        true_term_t,
        wall_ms: None,
        error: None,
    })
}

fn stepwise_fitted(dataset: &Dataset, subset: &[usize]) -> Vec<f64> {
    let mut state = ModelState::empty(dataset);
    for &j in subset {
        // the path only contains independent columns
        let _ = state.add_feature(dataset, j);
    }
    let y = dataset.standardized_response();
    y.to_raw(&state.fitted(&y.values))
}

/// Re-index terms from dataset features to original design columns.
fn source_terms(dataset: &Dataset, terms: &[FeatureTerm]) -> Vec<FeatureTerm> {
    terms
        .iter()
        .map(|t| {
            FeatureTerm::from_factors(
                t.factors()
                    .iter()
                    .map(|&(i, k)| (dataset.source_index(i), k)),
            )
            .expect("non-empty term")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec_hash: String,
    pub seed: u64,
    pub method: Method,
    pub code_version: String,
    pub spec: SimSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub replications: usize,
    pub failed: usize,
    pub risk: Option<Quartiles>,
    pub model_size: Option<Quartiles>,
    pub passes: Option<Quartiles>,
    pub wealth_spent: Option<Quartiles>,
    pub recovery_rate: f64,
    pub mfdr_estimate: f64,
    pub mfdr_counts: MfdrCounts,
}

impl Summary {
    pub fn from_records(records: &[ReplicationRecord]) -> Self {
        let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let col =
            |f: fn(&ReplicationRecord) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
        let counts: MfdrCounts = ok
            .iter()
            .map(|r| MfdrCounts::single(r.false_selections as u64, r.model_size as u64))
            .sum();
        let recovered = ok.iter().filter(|r| r.all_recovered).count();
        Self {
            replications: records.len(),
            failed: records.len() - ok.len(),
            risk: Quartiles::of(&col(|r| r.risk)),
            model_size: Quartiles::of(&col(|r| r.model_size as f64)),
            passes: Quartiles::of(&col(|r| r.passes as f64)),
            wealth_spent: Quartiles::of(&col(|r| r.wealth_spent)),
            recovery_rate: if ok.is_empty() {
                0.0
            } else {
                recovered as f64 / ok.len() as f64
            },
            mfdr_estimate: counts.mfdr_estimate(),
            mfdr_counts: counts,
        }
    }

    /// Flat `metric<TAB>value` table.
    pub fn to_table(&self) -> String {
        let mut s = String::from("metric\tvalue\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(s, "{k}\t{v}");
        };
        row("replications", self.replications.to_string());
        row("failed", self.failed.to_string());
        for (name, q) in [
            ("risk", &self.risk),
            ("model_size", &self.model_size),
            ("passes", &self.passes),
            ("wealth_spent", &self.wealth_spent),
        ] {
            if let Some(q) = q {
                row(&format!("{name}_mean"), format!("{}", q.mean));
                row(&format!("{name}_q1"), format!("{}", q.q1));
                row(&format!("{name}_median"), format!("{}", q.median));
                row(&format!("{name}_q3"), format!("{}", q.q3));
            }
        }
        row("recovery_rate", format!("{}", self.recovery_rate));
        row(
            "false_rejections",
            self.mfdr_counts.false_rejections.to_string(),
        );
        row("rejections", self.mfdr_counts.rejections.to_string());
        row("mfdr_estimate", format!("{}", self.mfdr_estimate));
        s
    }
}

/// One line of a persisted results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultLine {
    Manifest(Manifest),
    Replication(ReplicationRecord),
    Summary(Summary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub manifest: Manifest,
    pub records: Vec<ReplicationRecord>,
    pub summary: Summary,
}

impl ExperimentResults {
    /// Line-delimited JSON: manifest, one line per replication, summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: ResultLine| {
            out.push_str(&serde_json::to_string(&line).expect("results serialize"));
            out.push('\n');
        };
        push(ResultLine::Manifest(self.manifest.clone()));
        for r in &self.records {
            push(ResultLine::Replication(r.clone()));
        }
        push(ResultLine::Summary(self.summary.clone()));
        out
    }

    pub fn from_jsonl(text: &str) -> std::result::Result<Self, String> {
        let mut manifest = None;
        let mut records = Vec::new();
        let mut summary = None;
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            match serde_json::from_str::<ResultLine>(line)
                .map_err(|e| format!("line {}: {e}", i + 1))?
            {
                ResultLine::Manifest(m) => manifest = Some(m),
                ResultLine::Replication(r) => records.push(r),
                ResultLine::Summary(s) => summary = Some(s),
            }
        }
        Ok(Self {
            manifest: manifest.ok_or("missing manifest line")?,
            records,
            summary: summary.ok_or("missing summary line")?,
        })
    }
}

pub fn spec_hash(spec: &SimSpec, method: Method) -> String {
    let payload = serde_json::to_string(&(spec, method)).expect("spec serializes");
    Sha256::digest(payload.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Run every replication (in parallel) and aggregate. Wall times are only
/// recorded when `timing` is set, so that untimed results are reproducible
/// byte for byte.
pub fn run_experiment(spec: &SimSpec, method: Method, timing: bool) -> Result<ExperimentResults> {
    spec.validate()?;
    let records: Vec<ReplicationRecord> = (0..spec.replications)
        .into_par_iter()
        .map(|rep| {
            let start = Instant::now();
            let mut rec = run_replication(spec, method, rep)
                .unwrap_or_else(|e| ReplicationRecord::failed(rep, &e));
            if timing {
                rec.wall_ms = Some(start.elapsed().as_secs_f64() * 1e3);
            }
            rec
        })
        .collect();
    let summary = Summary::from_records(&records);
    Ok(ExperimentResults {
        manifest: Manifest {
            spec_hash: spec_hash(spec, method),
            seed: spec.seed,
            method,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            spec: spec.clone(),
        },
        records,
        summary,
    })
}
