//! Reports written by `select` and `diagnose`: a text rendering for people
//! and a JSON sidecar with the same content for programs.

use std::fmt::Write as _;

use rai_core::engine::Decision;
use rai_core::oracle::BoundValue;
use rai_core::{Dataset, RaiConfig, RaiOutcome, Termination};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub file: String,
    pub rows: usize,
    pub response: String,
    /// Feature columns offered to the search.
    pub features: Vec<String>,
    pub dropped_constant: Vec<String>,
    pub skipped_non_numeric: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    /// e.g. `cement*age^2`
    pub name: String,
    /// (column name, power)
    pub factors: Vec<(String, u32)>,
    /// Raw-scale coefficient.
    pub coefficient: f64,
    /// Pass in which the term was accepted and its |t| at that test.
    pub pass: u32,
    pub abs_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthSummary {
    pub initial: f64,
    pub spent: f64,
    pub earned: f64,
    #[serde(rename = "final")]
    pub final_wealth: f64,
    pub tests: usize,
    pub rejections: usize,
    pub skipped_passes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub input: InputSummary,
    pub config: RaiConfig,
    pub intercept: f64,
    pub terms: Vec<TermReport>,
    pub r_squared: f64,
    pub passes: u32,
    pub max_passes: u32,
    pub first_rejection_pass: Option<u32>,
    pub termination: Termination,
    pub wealth: WealthSummary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_ms: Option<f64>,
}

impl RunReport {
    pub fn build(
        input: InputSummary,
        config: &RaiConfig,
        dataset: &Dataset,
        outcome: &RaiOutcome,
    ) -> rai_core::Result<Self> {
        let fit = outcome.fit(dataset)?;
        let names = dataset.names();
        let trace = &outcome.trace;
        let terms = outcome
            .terms
            .iter()
            .zip(&fit.coefficients)
            .map(|(term, &coefficient)| {
                let test = trace
                    .tests()
                    .find(|t| t.decision == Decision::Rejected && t.term == *term)
                    .expect("selected terms have a rejecting test");
                TermReport {
                    name: term.display_with(names),
                    factors: term
                        .factors()
                        .iter()
                        .map(|&(i, k)| (names[i].clone(), k))
                        .collect(),
                    coefficient,
                    pass: test.pass,
                    abs_t: test.abs_t.unwrap_or(f64::NAN),
                }
            })
            .collect();
        let rejections = trace.rejections();
        Ok(Self {
            input,
            config: config.clone(),
            intercept: fit.intercept,
            terms,
            r_squared: outcome.r_squared(),
            passes: trace.passes_traversed,
            max_passes: trace.max_passes,
            first_rejection_pass: trace.first_rejection_pass,
            termination: trace.termination,
            wealth: WealthSummary {
                initial: trace.initial_wealth,
                spent: trace.total_spent(),
                earned: trace.payout * rejections as f64,
                final_wealth: trace.final_wealth,
                tests: trace.tests().filter(|t| t.test_id.is_some()).count(),
                rejections,
                skipped_passes: trace.skips().map(|s| s.to_pass - s.from_pass - 1).sum(),
            },
            elapsed_ms: None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let i = &self.input;
        let _ = writeln!(s, "rai select");
        let _ = writeln!(s, "input          {}", i.file);
        let _ = writeln!(s, "rows           {}", i.rows);
        let _ = writeln!(s, "response       {}", i.response);
        let _ = writeln!(s, "features       {}", i.features.len());
        if !i.dropped_constant.is_empty() {
            let _ = writeln!(
                s,
                "dropped        {} (constant)",
                i.dropped_constant.join(", ")
            );
        }
        if !i.skipped_non_numeric.is_empty() {
            let _ = writeln!(
                s,
                "skipped        {} (non-numeric)",
                i.skipped_non_numeric.join(", ")
            );
        }
        let c = &self.config;
        let _ = writeln!(
            s,
            "config         wealth={} payout={} max_passes={} interactions={} max_order={} seed={}",
            c.initial_wealth,
            c.payout,
            c.max_passes.map_or("auto".into(), |v| v.to_string()),
            c.interactions,
            c.max_interaction_order
                .map_or("none".into(), |v| v.to_string()),
            c.seed
        );
        let _ = writeln!(s);
        let plural = if self.terms.len() == 1 { "" } else { "s" };
        let _ = writeln!(s, "model ({} term{plural})", self.terms.len());
        let width = self
            .terms
            .iter()
            .map(|t| t.name.len())
            .max()
            .unwrap_or(0)
            .max(11);
        let _ = writeln!(
            s,
            "  {:<width$}  {:>24}  {:>4}  {:>10}",
            "term", "coefficient", "pass", "|t|"
        );
        let _ = writeln!(s, "  {:<width$}  {:>24}", "(intercept)", self.intercept);
        for t in &self.terms {
            // f64::MAX marks an exact fit
            let abs_t = if t.abs_t == f64::MAX {
                "exact".to_string()
            } else {
                format!("{:.3}", t.abs_t)
            };
            let _ = writeln!(
                s,
                "  {:<width$}  {:>24}  {:>4}  {:>10}",
                t.name, t.coefficient, t.pass, abs_t
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "r_squared      {}", self.r_squared);
        let _ = writeln!(s, "passes         {} of {}", self.passes, self.max_passes);
        let _ = writeln!(
            s,
            "first_reject   {}",
            self.first_rejection_pass
                .map_or("none".into(), |p| p.to_string())
        );
        let _ = writeln!(s, "termination    {}", self.termination);
        let w = &self.wealth;
        let _ = writeln!(
            s,
            "wealth         initial={} spent={} earned={} final={}",
            w.initial, w.spent, w.earned, w.final_wealth
        );
        let _ = writeln!(
            s,
            "tests          {} ({} rejected, {} passes skipped)",
            w.tests, w.rejections, w.skipped_passes
        );
        if let Some(ms) = self.elapsed_ms {
            let _ = writeln!(s, "elapsed_ms     {ms:.3}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub feature: String,
    pub r_squared: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub features: Vec<String>,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Submodularity ratio γ(S_l, k); `None` when every feature is selected
    /// (no disjoint set exists and γ is infinite).
    pub gamma: Option<f64>,
    pub gamma_argmin: Vec<String>,
    pub value: BoundValue,
    /// `"additive"` or `"multiplicative"`
    pub dominant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub input: InputSummary,
    pub k: usize,
    /// Forward stepwise steps, in order, with the null model's AIC first.
    pub null_aic: f64,
    pub stepwise: Vec<StepRow>,
    pub aic_size: usize,
    pub best_subset: SubsetReport,
    pub selected: SubsetReport,
    pub first_rejection_pass: Option<u32>,
    /// `None` for an empty model, where the bound is 0.
    pub bound: Option<BoundReport>,
    /// R²(S_l) − bound
    pub slack: f64,
    pub holds: bool,
}

impl DiagnoseReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let i = &self.input;
        let _ = writeln!(s, "rai diagnose");
        let _ = writeln!(s, "input          {}", i.file);
        let _ = writeln!(s, "rows           {}", i.rows);
        let _ = writeln!(s, "response       {}", i.response);
        let _ = writeln!(s, "features       {}", i.features.len());
        let _ = writeln!(s, "k              {}", self.k);
        let _ = writeln!(s);
        let _ = writeln!(s, "forward stepwise");
        let width = self
            .stepwise
            .iter()
            .map(|r| r.feature.len())
            .max()
            .unwrap_or(0)
            .max(7);
        let _ = writeln!(
            s,
            "  {:>4}  {:<width$}  {:>20}  {:>20}",
            "step", "feature", "r_squared", "aic"
        );
        let _ = writeln!(
            s,
            "  {:>4}  {:<width$}  {:>20}  {:>20}",
            0, "-", 0.0, self.null_aic
        );
        for (k, r) in self.stepwise.iter().enumerate() {
            let _ = writeln!(
                s,
                "  {:>4}  {:<width$}  {:>20}  {:>20}",
                k + 1,
                r.feature,
                r.r_squared,
                r.aic
            );
        }
        let _ = writeln!(s, "  aic chooses {} features", self.aic_size);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "best subset    {{{}}} r_squared={}",
            self.best_subset.features.join(", "),
            self.best_subset.r_squared
        );
        let _ = writeln!(
            s,
            "rai selected   {{{}}} r_squared={} l={} first_reject={}",
            self.selected.features.join(", "),
            self.selected.r_squared,
            self.selected.features.len(),
            self.first_rejection_pass
                .map_or("none".into(), |p| p.to_string())
        );
        match &self.bound {
            None => {
                let _ = writeln!(s, "bound          0 (empty model)");
            }
            Some(b) => {
                let _ = writeln!(
                    s,
                    "gamma          {} (argmin {{{}}})",
                    b.gamma.map_or("inf".into(), |g| g.to_string()),
                    b.gamma_argmin.join(", ")
                );
                let v = &b.value;
                let _ = writeln!(s, "c1, c2         {} {}", v.c1, v.c2);
                let _ = writeln!(s, "additive       {}", v.additive);
                let _ = writeln!(s, "multiplicative {}", v.multiplicative);
                let _ = writeln!(s, "bound          {} ({} branch)", v.bound, b.dominant);
            }
        }
        let _ = writeln!(
            s,
            "inequality     R²(S_l) >= bound {} (slack {})",
            if self.holds { "holds" } else { "VIOLATED" },
            self.slack
        );
        s
    }
}
