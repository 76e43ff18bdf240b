//! Session risk memory: a per-session accumulator over gate risk.
//!
//! Each turn updates, in this order:
//!
//! 1. drift: cosine distance of the action vector to the prior centroid
//! 2. centroid EMA update
//! 3. warmup baseline EMA (first `warmup_K` turns only, then frozen)
//! 4. adjusted risk: gate risk minus the baseline, floored at zero
//! 5. per-turn risk: weighted drift + weighted adjusted risk
//! 6. accumulated risk EMA
//! 7. block decision: accumulated risk >= tau, sticky once raised
//!
//! Drift is computed against the centroid *before* the update so it
//! measures deviation from the established trajectory. The baseline is a
//! session-specific DC offset: roles with naturally risky vocabulary
//! establish a higher norm during warmup, and only escalation above that
//! norm accumulates.
//!
//! All computations are closed-form double-precision arithmetic; replaying
//! the same inputs reproduces bit-identical state. State size is fixed and
//! independent of session length.

use crate::semantics::{ActionVector, DIM};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tunable parameters. Defaults are the calibrated operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrmConfig {
    /// Centroid EMA update rate, in (0, 1).
    pub alpha: f64,
    /// Warmup baseline EMA rate, in (0, 1).
    pub beta: f64,
    /// Number of warmup turns before the baseline freezes (>= 1).
    #[serde(rename = "warmup_K")]
    pub warmup_k: u32,
    /// Accumulated-risk decay, in (0, 1).
    pub lambda: f64,
    /// Weight of the drift term (>= 0).
    pub w_delta: f64,
    /// Weight of the adjusted gate-risk term (>= 0).
    pub w_g: f64,
    /// Session risk threshold, in (0, 1].
    pub tau: f64,
}

impl Default for SrmConfig {
    fn default() -> Self {
        Self {
            alpha: 0.35,
            beta: 0.40,
            warmup_k: 3,
            lambda: 0.75,
            w_delta: 0.00,
            w_g: 1.00,
            tau: 0.20,
        }
    }
}

impl SrmConfig {
    pub fn validate(&self) -> Result<(), SrmError> {
        let open_unit = |name: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(SrmError::InvalidConfig(format!(
                    "{name} must be in (0, 1), got {x}"
                )))
            }
        };
        open_unit("alpha", self.alpha)?;
        open_unit("beta", self.beta)?;
        open_unit("lambda", self.lambda)?;
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(SrmError::InvalidConfig(format!(
                "tau must be in (0, 1], got {}",
                self.tau
            )));
        }
        for (name, w) in [("w_delta", self.w_delta), ("w_g", self.w_g)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(SrmError::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {w}"
                )));
            }
        }
        if self.warmup_k < 1 {
            return Err(SrmError::InvalidConfig("warmup_K must be >= 1".to_string()));
        }
        Ok(())
    }

    pub fn from_json_str(json: &str) -> Result<Self, SrmError> {
        let config: SrmConfig =
            serde_json::from_str(json).map_err(|e| SrmError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SrmError {
    #[error("invalid srm config: {0}")]
    InvalidConfig(String),
    #[error("gate risk {0} outside [0, 1]")]
    GateRiskOutOfRange(f64),
}

/// Per-session accumulator state. Fixed size, independent of session length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrmState {
    #[serde(with = "centroid_serde")]
    pub centroid: [f64; DIM],
    pub baseline: f64,
    pub baseline_frozen: bool,
    pub risk: f64,
    pub turn: u32,
    pub flagged: bool,
}

mod centroid_serde {
    use super::DIM;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; DIM], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; DIM], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        let len = v.len();
        v.try_into()
            .map_err(|_| D::Error::custom(format!("expected {DIM} components, got {len}")))
    }
}

/// Everything observable about one turn of the accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrmTurnRecord {
    pub turn: u32,
    pub drift: f64,
    pub raw_gate_risk: f64,
    pub adjusted_risk: f64,
    pub turn_risk: f64,
    pub accumulated_risk: f64,
    pub srm_block: bool,
}

/// Fresh session state: zero centroid, zero baseline, zero risk, no flag.
pub fn srm_init(config: &SrmConfig) -> Result<SrmState, SrmError> {
    config.validate()?;
    Ok(SrmState {
        centroid: [0.0; DIM],
        baseline: 0.0,
        baseline_frozen: false,
        risk: 0.0,
        turn: 0,
        flagged: false,
    })
}

/// Cosine distance `1 - cos(v, c)`, with the convention that a zero vector
/// on either side yields 0 (no drift evidence).
pub fn cosine_drift(v: &ActionVector, centroid: &[f64; DIM]) -> f64 {
    let norm_v = v.norm();
    let norm_c = centroid.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_v == 0.0 || norm_c == 0.0 {
        return 0.0;
    }
    let cos = (v.dot(centroid) / (norm_v * norm_c)).clamp(-1.0, 1.0);
    1.0 - cos
}

/// Advance one turn. Pure transition: the input state is unchanged and the
/// same inputs always produce the same outputs.
pub fn srm_step(
    state: &SrmState,
    v: &ActionVector,
    gate_risk: f64,
    config: &SrmConfig,
) -> Result<(SrmState, SrmTurnRecord), SrmError> {
    if !(0.0..=1.0).contains(&gate_risk) || gate_risk.is_nan() {
        return Err(SrmError::GateRiskOutOfRange(gate_risk));
    }

    let turn = state.turn + 1;

    // 1. Drift against the prior centroid, before the update.
    let drift = cosine_drift(v, &state.centroid);

    // 2. Centroid EMA.
    let mut centroid = [0.0; DIM];
    for (dim, slot) in centroid.iter_mut().enumerate() {
        *slot = config.alpha * v.get(dim) + (1.0 - config.alpha) * state.centroid[dim];
    }

    // 3. Baseline EMA during warmup; frozen afterwards.
    let in_warmup = turn <= config.warmup_k;
    let baseline = if in_warmup {
        config.beta * gate_risk + (1.0 - config.beta) * state.baseline
    } else {
        state.baseline
    };
    let baseline_frozen = state.baseline_frozen || turn >= config.warmup_k;

    // 4. Adjusted risk against the running baseline in warmup, the frozen
    //    baseline afterwards.
    let adjusted_risk = (gate_risk - baseline).max(0.0);

    // 5. Per-turn risk.
    let turn_risk = config.w_delta * drift + config.w_g * adjusted_risk;

    // 6. Accumulated risk EMA.
    let risk = config.lambda * state.risk + (1.0 - config.lambda) * turn_risk;

    // 7. Sticky decision.
    let srm_block = risk >= config.tau;
    let flagged = state.flagged || srm_block;

    let next = SrmState {
        centroid,
        baseline,
        baseline_frozen,
        risk,
        turn,
        flagged,
    };
    let record = SrmTurnRecord {
        turn,
        drift,
        raw_gate_risk: gate_risk,
        adjusted_risk,
        turn_risk,
        accumulated_risk: risk,
        srm_block,
    };
    Ok((next, record))
}

/// Session-level decision over a full turn sequence: blocked if any turn
/// crossed the threshold, with the first crossing turn.
pub fn session_verdict(records: &[SrmTurnRecord]) -> (bool, Option<u32>) {
    let first = records.iter().find(|r| r.srm_block).map(|r| r.turn);
    (first.is_some(), first)
}
