//! Alpha-investing bookkeeping.
//!
//! Every test spends alpha from the ledger before its outcome is known; a
//! rejection pays back the fixed return `payout`. Under this rule the total
//! alpha ever spent is bounded by `initial_wealth + payout * rejections`.

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{RaiError, Result};

pub const DEFAULT_INITIAL_WEALTH: f64 = 0.25;
pub const DEFAULT_PAYOUT: f64 = 0.05;

/// Smallest alpha ever charged; far-tail levels below this are clamped.
pub const MIN_ALPHA: f64 = 1e-300;

/// Upper tail of the standard normal, `1 − Φ(x)`.
pub fn normal_upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// t-threshold and per-test alpha for one testing pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassLevel {
    pub pass: u32,
    pub tlvl: f64,
    pub alpha: f64,
}

/// `tlvl = √n·2^{−s/2}`, `alpha = 2Φ(−tlvl)`.
pub fn pass_parameters(n: usize, pass: u32) -> PassLevel {
    debug_assert!(n >= 1 && pass >= 1);
    let tlvl = (n as f64).sqrt() * 2f64.powf(-(pass as f64) / 2.0);
    let alpha = (2.0 * normal_upper_tail(tlvl)).max(MIN_ALPHA);
    PassLevel { pass, tlvl, alpha }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEvent {
    pub test_id: u64,
    pub pass: u32,
    pub alpha: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthLedger {
    wealth: f64,
    payout: f64,
    initial_wealth: f64,
    events: Vec<LedgerEvent>,
    rejections: usize,
}

impl Default for WealthLedger {
    fn default() -> Self {
        Self::new(DEFAULT_INITIAL_WEALTH, DEFAULT_PAYOUT)
    }
}

impl WealthLedger {
    pub fn new(initial_wealth: f64, payout: f64) -> Self {
        Self {
            wealth: initial_wealth,
            payout,
            initial_wealth,
            events: Vec::new(),
            rejections: 0,
        }
    }

    pub fn wealth(&self) -> f64 {
        self.wealth
    }

    pub fn payout(&self) -> f64 {
        self.payout
    }

    pub fn initial_wealth(&self) -> f64 {
        self.initial_wealth
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn rejections(&self) -> usize {
        self.rejections
    }

    pub fn can_afford(&self, alpha: f64) -> bool {
        self.wealth >= alpha
    }

    pub fn total_spent(&self) -> f64 {
        self.events.iter().map(|e| e.alpha).sum()
    }

    /// Charge `alpha` for test `test_id` in pass `pass`.
    pub fn spend(&mut self, alpha: f64, test_id: u64, pass: u32) -> Result<()> {
        if !self.can_afford(alpha) {
            return Err(RaiError::InsufficientWealth {
                wealth: self.wealth,
                alpha,
            });
        }
        self.wealth -= alpha;
        self.events.push(LedgerEvent {
            test_id,
            pass,
            alpha,
            rejected: false,
        });
        Ok(())
    }

    /// Credit the payout for a rejection of the most recently charged test.
    pub fn earn(&mut self, test_id: u64) {
        let last = self
            .events
            .last_mut()
            .expect("earn called before any spend");
        debug_assert_eq!(last.test_id, test_id, "earn must follow its own spend");
        debug_assert!(!last.rejected);
        last.rejected = true;
        self.wealth += self.payout;
        self.rejections += 1;
    }

    /// Recompute the wealth by applying the event list in order.
    pub fn replay(&self) -> f64 {
        self.events.iter().fold(self.initial_wealth, |w, e| {
            let w = w - e.alpha;
            if e.rejected {
                w + self.payout
            } else {
                w
            }
        })
    }
}

/// Aggregated false and total rejection counts over simulation replications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MfdrCounts {
    pub false_rejections: u64,
    pub rejections: u64,
    pub replications: u64,
}

impl MfdrCounts {
    pub fn single(false_rejections: u64, rejections: u64) -> Self {
        debug_assert!(false_rejections <= rejections);
        Self {
            false_rejections,
            rejections,
            replications: 1,
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            false_rejections: self.false_rejections + other.false_rejections,
            rejections: self.rejections + other.rejections,
            replications: self.replications + other.replications,
        }
    }

    /// Plug-in estimate `mean(V) / (mean(R) + 1)`.
    pub fn mfdr_estimate(&self) -> f64 {
        if self.replications == 0 {
            return 0.0;
        }
        let reps = self.replications as f64;
        (self.false_rejections as f64 / reps) / (self.rejections as f64 / reps + 1.0)
    }
}

impl std::iter::Sum for MfdrCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Self::merge)
    }
}
