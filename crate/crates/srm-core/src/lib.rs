//! Deterministic temporal authorization for agent action streams.
//!
//! A stateless gate scores every structured action against a role
//! profile and vetoes overt violations. On top of it, a per-session
//! accumulator (session risk memory) tracks a behavioral centroid and an
//! exponentially smoothed, baseline-subtracted risk signal, flagging
//! sessions whose risk escalates across turns even when every single
//! action passes the gate. The crate also ships a seeded benchmark
//! generator and an evaluation harness for the whole pipeline.
//!
//! Module map:
//!
//! - [`semantics`]: action grammar, tokenizer, lexicon, 21-d embedding
//! - [`gate`]: role profiles and the stateless four-layer reference gate
//! - [`srm`]: the per-session risk accumulator
//! - [`session`]: session store combining both layers per turn
//! - [`bench`]: deterministic benchmark generation and validation
//! - [`eval`]: detection metrics, trajectory export, latency measurement

#![forbid(unsafe_code)]

pub mod bench;
pub mod eval;
pub mod gate;
pub mod semantics;
pub mod session;
pub mod srm;

pub use bench::{generate_benchmark, validate_benchmark, BenchmarkSet, CalibrationFailure};
pub use eval::{compute_metrics, latency_bench, run_benchmark, trajectory_csv, trajectory_export};
pub use gate::{
    evaluate_action, raw_gate_risk, GateProvider, GateScores, ReferenceGate, RoleProfileSet,
    Verdict,
};
pub use semantics::{
    embed, parse_action, tokenize, Action, ActionVector, Lexicon, DIM, DIMENSIONS,
};
pub use session::{CombinedVerdict, SessionManager, SessionOptions};
pub use srm::{
    cosine_drift, session_verdict, srm_init, srm_step, SrmConfig, SrmState, SrmTurnRecord,
};
