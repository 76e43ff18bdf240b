//! Per-session state ownership and verdict combination.
//!
//! The manager owns one accumulator per open session and runs the
//! per-turn pipeline: parse, embed, gate evaluate, raw risk, accumulator
//! step. The gate verdict is computed from unmodified gate logic whatever
//! the accumulator says; the final verdict is the disjunction of both
//! layers.
//!
//! Thread safety: the store is a single mutex, so concurrent calls from
//! any number of threads are serialized and safe. Turns within one
//! session must be submitted in order by the caller; the store does not
//! reorder them. Without a session (stateless entry point) the gate
//! alone decides, which is the degraded mode when no session context
//! exists.

use crate::gate::{GateProvider, GateScores, ReferenceGate, RoleProfileSet, Verdict};
use crate::semantics::{embed, parse_action, Lexicon, SyntaxError};
use crate::srm::{
    session_verdict, srm_init, srm_step, SrmConfig, SrmError, SrmState, SrmTurnRecord,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;
use thiserror::Error;

/// Which layer produced a BLOCK, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockSource {
    None,
    Stateless,
    Srm,
    Both,
}

/// Everything decided about one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedVerdict {
    pub turn: u32,
    pub gate: GateScores,
    /// Absent when evaluated without session context.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub srm: Option<SrmTurnRecord>,
    #[serde(rename = "final")]
    pub final_verdict: Verdict,
    pub block_source: BlockSource,
}

/// Closing summary of a session, consistent with the accumulator records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub flagged: bool,
    pub first_block_turn: Option<u32>,
    pub turn_count: u32,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session {0:?} is already open")]
    DuplicateSession(String),
    #[error("unknown role {0:?}")]
    UnknownRole(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session {0:?} was halted by a terminal block")]
    SessionHalted(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Srm(#[from] SrmError),
}

struct SessionEntry {
    role: String,
    srm: SrmState,
    records: Vec<SrmTurnRecord>,
    history: Vec<CombinedVerdict>,
    halted: bool,
}

/// Options controlling per-session behavior. Both are off by default:
/// no verdict history (keeps per-session memory constant) and no
/// terminal blocking (benchmark mode needs full trajectories).
#[derive(Debug, Clone, Copy, Default)]
pub struct SessionOptions {
    /// Keep the full [`CombinedVerdict`] history for trace export.
    pub record_history: bool,
    /// Deployment mode: a blocked turn halts the session and further
    /// turns are rejected.
    pub halt_on_block: bool,
}

/// Owner of all open sessions for one (lexicon, profiles, config) triple.
pub struct SessionManager {
    lexicon: Lexicon,
    profiles: RoleProfileSet,
    config: SrmConfig,
    gate: Box<dyn GateProvider + Send + Sync>,
    options: SessionOptions,
    sessions: Mutex<HashMap<String, SessionEntry>>,
}

impl SessionManager {
    pub fn new(lexicon: Lexicon, profiles: RoleProfileSet, config: SrmConfig) -> Self {
        Self::with_gate(lexicon, profiles, config, Box::new(ReferenceGate))
    }

    pub fn with_gate(
        lexicon: Lexicon,
        profiles: RoleProfileSet,
        config: SrmConfig,
        gate: Box<dyn GateProvider + Send + Sync>,
    ) -> Self {
        Self {
            lexicon,
            profiles,
            config,
            gate,
            options: SessionOptions::default(),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    /// The manager built from the bundled calibration artifacts.
    pub fn bundled() -> Self {
        Self::new(
            Lexicon::bundled().clone(),
            RoleProfileSet::bundled().clone(),
            SrmConfig::default(),
        )
    }

    pub fn with_options(mut self, options: SessionOptions) -> Self {
        self.options = options;
        self
    }

    pub fn config(&self) -> &SrmConfig {
        &self.config
    }

    pub fn profiles(&self) -> &RoleProfileSet {
        &self.profiles
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Open a session for a known role. Session ids must be unique among
    /// open sessions.
    pub fn open_session(&self, id: &str, role: &str) -> Result<(), SessionError> {
        if self.profiles.get(role).is_none() {
            return Err(SessionError::UnknownRole(role.to_string()));
        }
        let mut sessions = self.sessions.lock().expect("session store poisoned");
        if sessions.contains_key(id) {
            return Err(SessionError::DuplicateSession(id.to_string()));
        }
        sessions.insert(
            id.to_string(),
            SessionEntry {
                role: role.to_string(),
                srm: srm_init(&self.config)?,
                records: Vec::new(),
                history: Vec::new(),
                halted: false,
            },
        );
        Ok(())
    }

    /// Evaluate the next turn of an open session.
    pub fn evaluate_turn(
        &self,
        id: &str,
        action_text: &str,
    ) -> Result<CombinedVerdict, SessionError> {
        let mut sessions = self.sessions.lock().expect("session store poisoned");
        let entry = sessions
            .get_mut(id)
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))?;
        if entry.halted {
            return Err(SessionError::SessionHalted(id.to_string()));
        }

        let profile = self
            .profiles
            .get(&entry.role)
            .ok_or_else(|| SessionError::UnknownRole(entry.role.clone()))?;

        let action = parse_action(action_text)?;
        let vector = embed(&action, &self.lexicon);
        let scores = self.gate.evaluate(&vector, profile);
        let gate_risk = crate::gate::raw_gate_risk(&scores);
        let (next, record) = srm_step(&entry.srm, &vector, gate_risk, &self.config)?;
        entry.srm = next;

        let verdict = combine(&scores, Some(&record));
        entry.records.push(record);
        if self.options.record_history {
            entry.history.push(verdict.clone());
        }
        if self.options.halt_on_block && verdict.final_verdict == Verdict::Block {
            entry.halted = true;
        }
        Ok(verdict)
    }

    /// Gate-only evaluation with no session context. Nothing is recorded
    /// and repeated calls with the same inputs return identical results.
    pub fn evaluate_stateless(
        &self,
        role: &str,
        action_text: &str,
    ) -> Result<CombinedVerdict, SessionError> {
        let profile = self
            .profiles
            .get(role)
            .ok_or_else(|| SessionError::UnknownRole(role.to_string()))?;
        let action = parse_action(action_text)?;
        let vector = embed(&action, &self.lexicon);
        let scores = self.gate.evaluate(&vector, profile);
        Ok(combine(&scores, None))
    }

    /// Close a session and summarize it.
    pub fn close_session(&self, id: &str) -> Result<SessionSummary, SessionError> {
        let mut sessions = self.sessions.lock().expect("session store poisoned");
        let entry = sessions
            .remove(id)
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))?;
        let (flagged, first_block_turn) = session_verdict(&entry.records);
        Ok(SessionSummary {
            flagged,
            first_block_turn,
            turn_count: entry.srm.turn,
        })
    }

    /// Recorded history of an open session (empty unless history recording
    /// was enabled).
    pub fn session_history(&self, id: &str) -> Result<Vec<CombinedVerdict>, SessionError> {
        let sessions = self.sessions.lock().expect("session store poisoned");
        let entry = sessions
            .get(id)
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))?;
        Ok(entry.history.clone())
    }

    pub fn open_session_count(&self) -> usize {
        self.sessions.lock().expect("session store poisoned").len()
    }
}

fn combine(scores: &GateScores, srm: Option<&SrmTurnRecord>) -> CombinedVerdict {
    let stateless_block = scores.verdict == Verdict::Block;
    let srm_block = srm.map(|r| r.srm_block).unwrap_or(false);
    let block_source = match (stateless_block, srm_block) {
        (false, false) => BlockSource::None,
        (true, false) => BlockSource::Stateless,
        (false, true) => BlockSource::Srm,
        (true, true) => BlockSource::Both,
    };
    CombinedVerdict {
        turn: srm.map(|r| r.turn).unwrap_or(0),
        gate: *scores,
        srm: srm.cloned(),
        final_verdict: if stateless_block || srm_block {
            Verdict::Block
        } else {
            Verdict::Allow
        },
        block_source,
    }
}
