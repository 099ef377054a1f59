//! The revisiting alpha-investing selection loop.
//!
//! Candidates are streamed pass after pass. Pass `s` tests every remaining
//! candidate at `tlvl = √n·2^{−s/2}`, charging `2Φ(−tlvl)` per test. A
//! rejection adds the feature, earns the payout, updates the residual and
//! (optionally) streams new interaction candidates; the pass then continues
//! over the remaining stream at the same level. Selection ends when the
//! wealth cannot cover the next test, when the pass bound is reached, or
//! when no candidates remain.

use std::borrow::Cow;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{RaiError, Result};
use crate::kernel::{
    fit_raw_scale, Dataset, LinearFit, ModelState, Score, Standardized, Untestable,
    COLLINEARITY_TOL,
};
use crate::term::{FeatureTerm, InteractionGenerator};
use crate::wealth::{
    pass_parameters, PassLevel, WealthLedger, DEFAULT_INITIAL_WEALTH, DEFAULT_PAYOUT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaiConfig {
    pub initial_wealth: f64,
    pub payout: f64,
    /// `None` means `⌈log₂ n⌉ + 2`.
    pub max_passes: Option<u32>,
    pub collinearity_tol: f64,
    pub interactions: bool,
    /// `None` means unbounded.
    pub max_interaction_order: Option<u32>,
    pub seed: u64,
    /// Jump over passes that provably reject nothing (still paying for them).
    pub skip_passes: bool,
}

impl Default for RaiConfig {
    fn default() -> Self {
        Self {
            initial_wealth: DEFAULT_INITIAL_WEALTH,
            payout: DEFAULT_PAYOUT,
            max_passes: None,
            collinearity_tol: COLLINEARITY_TOL,
            interactions: false,
            max_interaction_order: None,
            seed: 0,
            skip_passes: true,
        }
    }
}

pub fn default_max_passes(n: usize) -> u32 {
    (n.max(1) as f64).log2().ceil() as u32 + 2
}

impl RaiConfig {
    pub fn with_interactions(mut self, on: bool) -> Self {
        self.interactions = on;
        self
    }

    pub fn with_skipping(mut self, on: bool) -> Self {
        self.skip_passes = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RaiError::InvalidConfig(m.to_string()));
        if !(self.initial_wealth > 0.0 && self.initial_wealth.is_finite()) {
            return bad("initial wealth must be positive");
        }
        if !(self.payout > 0.0 && self.payout.is_finite()) {
            return bad("payout must be positive");
        }
        if self.max_passes == Some(0) {
            return bad("max passes must be at least 1");
        }
        if self.max_interaction_order == Some(0) {
            return bad("max interaction order must be at least 1");
        }
        if !(self.collinearity_tol >= 0.0) {
            return bad("collinearity tolerance must be non-negative");
        }
        Ok(())
    }

    pub fn max_passes_for(&self, n: usize) -> u32 {
        self.max_passes.unwrap_or_else(|| default_max_passes(n))
    }
}

/// Outcome of one candidate test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Rejected,
    NotRejected,
    /// Adjusted norm at or below the collinearity tolerance; no alpha spent.
    RemovedCollinear,
    /// No residual degrees of freedom left to test it; no alpha spent.
    RemovedNoDf,
    /// Wealth could not cover the test; nothing charged.
    HaltedWealth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test_id: Option<u64>,
    pub pass: u32,
    pub term: FeatureTerm,
    pub abs_t: Option<f64>,
    pub tlvl: f64,
    pub alpha_charged: f64,
    pub wealth_before: f64,
    pub wealth_after: f64,
    pub decision: Decision,
    /// Model size and R² just before the test.
    pub model_size: usize,
    pub r_squared_before: f64,
    /// R² gain realized when the term entered the model.
    pub r_squared_gain: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassCharge {
    pub pass: u32,
    pub alpha: f64,
    pub tests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub from_pass: u32,
    pub to_pass: u32,
    pub charges: Vec<PassCharge>,
    pub total_charged: f64,
    pub wealth_before: f64,
    pub wealth_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Test(TestRecord),
    Skip(SkipRecord),
    /// A dynamically generated term; `streamed` is false when it realized to
    /// a constant column and was discarded.
    Generated {
        term: FeatureTerm,
        streamed: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    WealthExhausted,
    MaxPasses,
    StreamExhausted,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::WealthExhausted => "wealth exhausted",
            Termination::MaxPasses => "max passes",
            Termination::StreamExhausted => "stream exhausted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub n: usize,
    pub initial_wealth: f64,
    pub payout: f64,
    pub max_passes: u32,
    pub events: Vec<TraceEvent>,
    pub termination: Termination,
    /// Highest pass entered, counting skipped passes as traversed.
    pub passes_traversed: u32,
    pub first_rejection_pass: Option<u32>,
    pub final_wealth: f64,
}

impl SelectionTrace {
    pub fn tests(&self) -> impl Iterator<Item = &TestRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Test(t) => Some(t),
            _ => None,
        })
    }

    pub fn skips(&self) -> impl Iterator<Item = &SkipRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Skip(s) => Some(s),
            _ => None,
        })
    }

    pub fn rejections(&self) -> usize {
        self.tests()
            .filter(|t| t.decision == Decision::Rejected)
            .count()
    }

    pub fn total_spent(&self) -> f64 {
        self.tests().map(|t| t.alpha_charged).sum::<f64>()
            + self.skips().map(|s| s.total_charged).sum::<f64>()
    }

    /// Replays the recorded wealth trajectory and returns the final wealth,
    /// or the index of the first event whose endpoints disagree.
    pub fn replay_wealth(&self) -> std::result::Result<f64, usize> {
        let mut w = self.initial_wealth;
        for (i, e) in self.events.iter().enumerate() {
            match e {
                TraceEvent::Test(t) => {
                    if t.wealth_before != w {
                        return Err(i);
                    }
                    if t.test_id.is_some() {
                        w -= t.alpha_charged;
                        if t.decision == Decision::Rejected {
                            w += self.payout;
                        }
                    }
                    if t.wealth_after != w {
                        return Err(i);
                    }
                }
                TraceEvent::Skip(s) => {
                    if s.wealth_before != w {
                        return Err(i);
                    }
                    for c in &s.charges {
                        for _ in 0..c.tests {
                            w -= c.alpha;
                        }
                    }
                    if s.wealth_after != w {
                        return Err(i);
                    }
                }
                TraceEvent::Generated { .. } => {}
            }
        }
        Ok(w)
    }
}

/// A term proposed by a [`CandidateGenerator`]; `column` is `None` when it
/// could not be realized (constant on this sample).
#[derive(Debug, Clone)]
pub struct Generated {
    pub term: FeatureTerm,
    pub column: Option<Standardized>,
}

/// Hook consulted after every rejection to stream new candidates.
pub trait CandidateGenerator {
    fn on_rejection(
        &mut self,
        selected: &[FeatureTerm],
        added: &FeatureTerm,
        streamed: &HashSet<FeatureTerm>,
    ) -> Vec<Generated>;
}

/// Candidate queue with permanent de-duplication by term.
#[derive(Debug, Clone, Default)]
pub struct FeatureStream {
    queue: Vec<usize>,
    streamed: HashSet<FeatureTerm>,
}

impl FeatureStream {
    /// Queue `id` for `term` unless the term was streamed before.
    pub fn push(&mut self, id: usize, term: &FeatureTerm) -> bool {
        if self.streamed.insert(term.clone()) {
            self.queue.push(id);
            true
        } else {
            false
        }
    }

    /// Mark a term as seen without queueing it.
    pub fn retire(&mut self, term: &FeatureTerm) {
        self.streamed.insert(term.clone());
    }

    pub fn remove_at(&mut self, pos: usize) -> usize {
        self.queue.remove(pos)
    }

    pub fn get(&self, pos: usize) -> Option<usize> {
        self.queue.get(pos).copied()
    }

    pub fn ids(&self) -> &[usize] {
        &self.queue
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn streamed(&self) -> &HashSet<FeatureTerm> {
        &self.streamed
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub decision: Decision,
    /// Whether alpha was charged for this test.
    pub charged: bool,
    pub score: Option<Score>,
    /// R² gain when the candidate was added.
    pub gain: Option<f64>,
}

/// Test one candidate column: affordability gate, testability check, spend,
/// then the strict threshold comparison. A rejection earns the payout and
/// adds the column to `state` under `id`.
pub fn test_candidate(
    state: &mut ModelState,
    ledger: &mut WealthLedger,
    id: usize,
    column: &[f64],
    level: &PassLevel,
    test_id: u64,
) -> TestOutcome {
    let halted = TestOutcome {
        decision: Decision::HaltedWealth,
        charged: false,
        score: None,
        gain: None,
    };
    if !ledger.can_afford(level.alpha) {
        return halted;
    }
    let score = match state.score_column(column) {
        Ok(s) => s,
        Err(reason) => {
            return TestOutcome {
                decision: match reason {
                    Untestable::Collinear => Decision::RemovedCollinear,
                    Untestable::InsufficientDf => Decision::RemovedNoDf,
                },
                charged: false,
                score: None,
                gain: None,
            }
        }
    };
    if ledger.spend(level.alpha, test_id, level.pass).is_err() {
        return halted;
    }
    if score.t.abs() <= level.tlvl {
        return TestOutcome {
            decision: Decision::NotRejected,
            charged: true,
            score: Some(score),
            gain: None,
        };
    }
    match state.add_column(id, column) {
        Ok(gain) => {
            ledger.earn(test_id);
            TestOutcome {
                decision: Decision::Rejected,
                charged: true,
                score: Some(score),
                gain: Some(gain),
            }
        }
        // Only reachable when the reorthogonalized norm drops below the
        // tolerance that the single-sweep check just cleared.
        Err(_) => TestOutcome {
            decision: Decision::RemovedCollinear,
            charged: true,
            score: Some(score),
            gain: None,
        },
    }
}

/// First pass after `after` whose threshold `abs_t` strictly exceeds.
pub fn first_clearing_pass(n: usize, abs_t: f64, after: u32) -> Option<u32> {
    if !(abs_t > 0.0) {
        return None;
    }
    let guess = (2.0 * ((n as f64).sqrt() / abs_t).log2()).floor() + 1.0;
    let mut s = if guess.is_finite() {
        (guess.max(after as f64 + 1.0)).min(u32::MAX as f64 - 2.0) as u32
    } else {
        after + 1
    };
    while s > after + 1 && abs_t > pass_parameters(n, s - 1).tlvl {
        s -= 1;
    }
    while abs_t <= pass_parameters(n, s).tlvl {
        s += 1;
    }
    Some(s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SkipOutcome {
    /// Resume testing at this pass (may exceed the pass bound).
    Resume(u32),
    /// Wealth ran out while paying for a skipped pass.
    Exhausted { pass: u32 },
}

/// After a rejection-free pass `current`, jump to the first pass at which
/// some known |t| clears the threshold, charging the ledger for every test
/// the skipped passes would have run. Charging stops at `max_passes`.
pub fn skip_passes(
    known_abs_t: &[f64],
    ledger: &mut WealthLedger,
    current: u32,
    n: usize,
    max_passes: u32,
    next_test_id: &mut u64,
) -> Result<(SkipOutcome, Vec<PassCharge>)> {
    if known_abs_t.iter().all(|&t| t == 0.0) {
        return Err(RaiError::NoFinitePass);
    }
    let target = known_abs_t
        .iter()
        .filter_map(|&t| first_clearing_pass(n, t, current))
        .min()
        .ok_or(RaiError::NoFinitePass)?;
    let mut charges = Vec::new();
    let last_charged = target.saturating_sub(1).min(max_passes);
    for pass in current + 1..=last_charged {
        let level = pass_parameters(n, pass);
        let mut tests = 0;
        for _ in known_abs_t {
            if !ledger.can_afford(level.alpha) {
                charges.push(PassCharge {
                    pass,
                    alpha: level.alpha,
                    tests,
                });
                return Ok((SkipOutcome::Exhausted { pass }, charges));
            }
            ledger
                .spend(level.alpha, *next_test_id, pass)
                .expect("affordability checked");
            *next_test_id += 1;
            tests += 1;
        }
        charges.push(PassCharge {
            pass,
            alpha: level.alpha,
            tests,
        });
    }
    Ok((SkipOutcome::Resume(target), charges))
}

struct Candidate<'a> {
    term: FeatureTerm,
    column: Cow<'a, Standardized>,
}

/// Final model and audit trail of one selection run.
#[derive(Debug, Clone)]
pub struct RaiOutcome {
    pub state: ModelState,
    pub trace: SelectionTrace,
    pub ledger: WealthLedger,
    /// Selected terms in order of entry.
    pub terms: Vec<FeatureTerm>,
    /// Standardized columns of the selected terms, same order.
    pub columns: Vec<Standardized>,
}

impl RaiOutcome {
    pub fn r_squared(&self) -> f64 {
        self.state.r_squared()
    }

    pub fn size(&self) -> usize {
        self.terms.len()
    }

    /// Raw-scale coefficients (one per selected term, applied to the raw
    /// monomial values) and intercept.
    pub fn fit(&self, dataset: &Dataset) -> Result<LinearFit> {
        let cols: Vec<&Standardized> = self.columns.iter().collect();
        fit_raw_scale(dataset.standardized_response(), &cols)
    }

    /// In-sample fitted values on the raw response scale.
    pub fn fitted_values(&self, dataset: &Dataset) -> Vec<f64> {
        let y = dataset.standardized_response();
        y.to_raw(&self.state.fitted(&y.values))
    }
}

/// Run selection, building an interaction generator when the config asks for one.
pub fn run_rai(dataset: &Dataset, config: &RaiConfig) -> Result<RaiOutcome> {
    if config.interactions {
        let mut generator =
            InteractionGenerator::new(dataset.raw_columns(), config.max_interaction_order);
        run_rai_with(dataset, config, Some(&mut generator))
    } else {
        run_rai_with(dataset, config, None)
    }
}

pub fn run_rai_with(
    dataset: &Dataset,
    config: &RaiConfig,
    mut generator: Option<&mut dyn CandidateGenerator>,
) -> Result<RaiOutcome> {
    config.validate()?;
    let n = dataset.n();
    let max_passes = config.max_passes_for(n);

    let mut pool: Vec<Candidate<'_>> = (0..dataset.p())
        .map(|j| Candidate {
            term: FeatureTerm::marginal(j),
            column: Cow::Borrowed(dataset.standardized_column(j)),
        })
        .collect();
    let mut stream = FeatureStream::default();
    for (id, c) in pool.iter().enumerate() {
        stream.push(id, &c.term);
    }
    let mut known_t = vec![f64::NAN; pool.len()];

    let mut state = ModelState::empty(dataset).with_tolerance(config.collinearity_tol);
    let mut ledger = WealthLedger::new(config.initial_wealth, config.payout);
    let mut selected_terms: Vec<FeatureTerm> = Vec::new();
    let mut events = Vec::new();
    let mut next_test_id: u64 = 0;
    let mut first_rejection_pass = None;
    let mut passes_traversed = 0;
    let mut pass: u32 = 1;

    let termination = 'passes: loop {
        if stream.is_empty() {
            break Termination::StreamExhausted;
        }
        if pass > max_passes {
            break Termination::MaxPasses;
        }
        passes_traversed = pass;
        let level = pass_parameters(n, pass);
        let mut rejections = 0usize;
        let mut pos = 0;
        while let Some(id) = stream.get(pos) {
            let wealth_before = ledger.wealth();
            let model_size = state.size();
            let r_squared_before = state.r_squared();
            let outcome = test_candidate(
                &mut state,
                &mut ledger,
                id,
                &pool[id].column.values,
                &level,
                next_test_id,
            );
            let charged = outcome.charged;
            events.push(TraceEvent::Test(TestRecord {
                test_id: charged.then_some(next_test_id),
                pass,
                term: pool[id].term.clone(),
                abs_t: outcome.score.map(|s| s.t.abs()),
                tlvl: level.tlvl,
                alpha_charged: if charged { level.alpha } else { 0.0 },
                wealth_before,
                wealth_after: ledger.wealth(),
                decision: outcome.decision,
                model_size,
                r_squared_before,
                r_squared_gain: outcome.gain,
            }));
            if charged {
                next_test_id += 1;
            }
            match outcome.decision {
                Decision::HaltedWealth => break 'passes Termination::WealthExhausted,
                Decision::RemovedCollinear | Decision::RemovedNoDf => {
                    stream.remove_at(pos);
                }
                Decision::NotRejected => {
                    known_t[id] = outcome.score.map_or(0.0, |s| s.t.abs());
                    pos += 1;
                }
                Decision::Rejected => {
                    stream.remove_at(pos);
                    rejections += 1;
                    first_rejection_pass.get_or_insert(pass);
                    let added = pool[id].term.clone();
                    selected_terms.push(added.clone());
                    if let Some(g) = generator.as_deref_mut() {
                        for gen in g.on_rejection(&selected_terms, &added, stream.streamed()) {
                            let streamed = match gen.column {
                                Some(column) if !stream.streamed().contains(&gen.term) => {
                                    let id = pool.len();
                                    stream.push(id, &gen.term);
                                    pool.push(Candidate {
                                        term: gen.term.clone(),
                                        column: Cow::Owned(column),
                                    });
                                    known_t.push(f64::NAN);
                                    true
                                }
                                Some(_) => continue,
                                None => {
                                    stream.retire(&gen.term);
                                    false
                                }
                            };
                            events.push(TraceEvent::Generated {
                                term: gen.term,
                                streamed,
                            });
                        }
                    }
                }
            }
        }

        if stream.is_empty() {
            break Termination::StreamExhausted;
        }
        if rejections == 0 && config.skip_passes {
            let known: Vec<f64> = stream.ids().iter().map(|&id| known_t[id]).collect();
            let wealth_before = ledger.wealth();
            match skip_passes(&known, &mut ledger, pass, n, max_passes, &mut next_test_id) {
                Err(_) => break Termination::StreamExhausted,
                Ok((outcome, charges)) => {
                    let next = match outcome {
                        SkipOutcome::Resume(p) => p,
                        SkipOutcome::Exhausted { pass } => pass,
                    };
                    if !charges.is_empty() {
                        let total_charged = charges.iter().map(|c| c.alpha * c.tests as f64).sum();
                        passes_traversed = charges.last().map_or(pass, |c| c.pass);
                        events.push(TraceEvent::Skip(SkipRecord {
                            from_pass: pass,
                            to_pass: next,
                            charges,
                            total_charged,
                            wealth_before,
                            wealth_after: ledger.wealth(),
                        }));
                    }
                    match outcome {
                        SkipOutcome::Resume(p) => pass = p,
                        SkipOutcome::Exhausted { .. } => break Termination::WealthExhausted,
                    }
                }
            }
        } else {
            pass += 1;
        }
    };

    let columns = state
        .selected()
        .iter()
        .map(|&id| pool[id].column.clone().into_owned())
        .collect();
    let trace = SelectionTrace {
        n,
        initial_wealth: config.initial_wealth,
        payout: config.payout,
        max_passes,
        events,
        termination,
        passes_traversed,
        first_rejection_pass,
        final_wealth: ledger.wealth(),
    };
    Ok(RaiOutcome {
        state,
        trace,
        ledger,
        terms: selected_terms,
        columns,
    })
}
