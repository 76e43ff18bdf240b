//! Benchmark evaluation: per-session detection results, aggregate
//! metrics, risk-trajectory export and latency measurement.
//!
//! Three detector views are reported side by side:
//!
//! - `stateless`: the per-action gate alone (session blocked if any turn
//!   draws a gate BLOCK),
//! - `srm`: the temporal mechanism alone (session blocked if accumulated
//!   risk ever reaches tau),
//! - `combined`: the disjunction of the two.
//!
//! One evaluation pass produces all three, since the temporal layer is
//! additive and never changes gate scores.

use crate::bench::{AttackCategory, BenchmarkSet, SessionLabel};
use crate::gate::{
    evaluate_action, raw_gate_risk, GateScores, RoleProfile, RoleProfileSet, Verdict,
};
use crate::semantics::{embed, parse_action, Action, Lexicon, SyntaxError};
use crate::srm::{srm_init, srm_step, SrmConfig, SrmError, SrmTurnRecord};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("calibration mismatch: benchmark was generated against {expected}, loaded {found}")]
    CalibrationMismatch { expected: String, found: String },
    #[error("unknown role {0:?}")]
    UnknownRole(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Srm(#[from] SrmError),
}

/// Detection outcome of one session under all three detector views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub id: String,
    pub label: SessionLabel,
    pub category: Option<AttackCategory>,
    pub stateless_detect_turn: Option<u32>,
    pub srm_detect_turn: Option<u32>,
    pub combined_detect_turn: Option<u32>,
    pub stateless_blocked: bool,
    pub srm_blocked: bool,
    pub combined_blocked: bool,
    /// Accumulated risk after each turn, full session length.
    pub risk_trajectory: Vec<f64>,
}

/// Gate scores and accumulator records for one turn sequence under one
/// role profile.
pub fn evaluate_session_turns(
    turns: &[String],
    profile: &RoleProfile,
    lexicon: &Lexicon,
    config: &SrmConfig,
) -> Result<(Vec<GateScores>, Vec<SrmTurnRecord>), EvalError> {
    let mut state = srm_init(config)?;
    let mut scores = Vec::with_capacity(turns.len());
    let mut records = Vec::with_capacity(turns.len());
    for turn in turns {
        let action = parse_action(turn)?;
        let vector = embed(&action, lexicon);
        let gate = evaluate_action(&vector, profile);
        let (next, record) = srm_step(&state, &vector, raw_gate_risk(&gate), config)?;
        state = next;
        scores.push(gate);
        records.push(record);
    }
    Ok((scores, records))
}

/// Evaluate every session of a benchmark turn by turn. Results come back
/// sorted by session id, so aggregation order never depends on input
/// order or parallelism.
pub fn run_benchmark(
    set: &BenchmarkSet,
    config: &SrmConfig,
    profiles: &RoleProfileSet,
    lexicon: &Lexicon,
) -> Result<Vec<SessionResult>, EvalError> {
    if set.calibration.lexicon != lexicon.version {
        return Err(EvalError::CalibrationMismatch {
            expected: set.calibration.lexicon.clone(),
            found: lexicon.version.clone(),
        });
    }
    if set.calibration.profiles != profiles.version() {
        return Err(EvalError::CalibrationMismatch {
            expected: set.calibration.profiles.clone(),
            found: profiles.version().to_string(),
        });
    }

    let mut results = Vec::with_capacity(set.sessions.len());
    for session in &set.sessions {
        let profile = profiles
            .get(&session.role)
            .ok_or_else(|| EvalError::UnknownRole(session.role.clone()))?;
        let (scores, records) = evaluate_session_turns(&session.turns, profile, lexicon, config)?;

        let stateless_detect_turn = scores
            .iter()
            .position(|s| s.verdict == Verdict::Block)
            .map(|i| (i + 1) as u32);
        let srm_detect_turn = records.iter().find(|r| r.srm_block).map(|r| r.turn);
        let combined_detect_turn = match (stateless_detect_turn, srm_detect_turn) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };

        results.push(SessionResult {
            id: session.id.clone(),
            label: session.label,
            category: session.category,
            stateless_detect_turn,
            srm_detect_turn,
            combined_detect_turn,
            stateless_blocked: stateless_detect_turn.is_some(),
            srm_blocked: srm_detect_turn.is_some(),
            combined_blocked: combined_detect_turn.is_some(),
            risk_trajectory: records.iter().map(|r| r.accumulated_risk).collect(),
        });
    }
    results.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(results)
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positives: u32,
    pub false_positives: u32,
    pub true_negatives: u32,
    pub false_negatives: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub detection_rate: f64,
    pub fpr: f64,
    pub precision: f64,
    pub f1: f64,
    pub avg_detection_turn: Option<f64>,
    pub confusion: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: AttackCategory,
    pub n: u32,
    pub avg_stateless_turn: Option<f64>,
    pub avg_srm_turn: Option<f64>,
    pub earlier_detects: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub stateless: SystemMetrics,
    pub srm: SystemMetrics,
    pub combined: SystemMetrics,
    /// Average stateless detection turn minus average srm detection turn
    /// over attack sessions detected by both mechanisms.
    pub early_detection_gain: Option<f64>,
    /// Attack sessions where the srm crossing strictly precedes the
    /// stateless block.
    pub earlier_detect_total: u32,
    /// Summed turns gained over those sessions.
    pub cumulative_gain_turns: f64,
    pub per_category: Vec<CategoryRow>,
}

fn ratio(num: u32, den: u32) -> f64 {
    if den == 0 {
        0.0
    } else {
        f64::from(num) / f64::from(den)
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn system_metrics(
    results: &[SessionResult],
    detect: impl Fn(&SessionResult) -> Option<u32>,
) -> SystemMetrics {
    let mut confusion = ConfusionCounts {
        true_positives: 0,
        false_positives: 0,
        true_negatives: 0,
        false_negatives: 0,
    };
    let mut detect_turns = Vec::new();
    for r in results {
        let detected = detect(r);
        match (r.label, detected) {
            (SessionLabel::Attack, Some(turn)) => {
                confusion.true_positives += 1;
                detect_turns.push(f64::from(turn));
            }
            (SessionLabel::Attack, None) => confusion.false_negatives += 1,
            (SessionLabel::Benign, Some(_)) => confusion.false_positives += 1,
            (SessionLabel::Benign, None) => confusion.true_negatives += 1,
        }
    }
    let detection_rate = ratio(
        confusion.true_positives,
        confusion.true_positives + confusion.false_negatives,
    );
    let fpr = ratio(
        confusion.false_positives,
        confusion.false_positives + confusion.true_negatives,
    );
    let precision = ratio(
        confusion.true_positives,
        confusion.true_positives + confusion.false_positives,
    );
    let f1 = if precision + detection_rate == 0.0 {
        0.0
    } else {
        2.0 * precision * detection_rate / (precision + detection_rate)
    };
    SystemMetrics {
        detection_rate,
        fpr,
        precision,
        f1,
        avg_detection_turn: mean(&detect_turns),
        confusion,
    }
}

/// Aggregate a result list into the full metrics report.
pub fn compute_metrics(results: &[SessionResult]) -> MetricsReport {
    let stateless = system_metrics(results, |r| r.stateless_detect_turn);
    let srm = system_metrics(results, |r| r.srm_detect_turn);
    let combined = system_metrics(results, |r| r.combined_detect_turn);

    let both: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| r.label == SessionLabel::Attack)
        .filter_map(|r| match (r.stateless_detect_turn, r.srm_detect_turn) {
            (Some(s), Some(m)) => Some((f64::from(s), f64::from(m))),
            _ => None,
        })
        .collect();
    let early_detection_gain = if both.is_empty() {
        None
    } else {
        let avg_s = both.iter().map(|(s, _)| s).sum::<f64>() / both.len() as f64;
        let avg_m = both.iter().map(|(_, m)| m).sum::<f64>() / both.len() as f64;
        Some(avg_s - avg_m)
    };

    let mut earlier_detect_total = 0;
    let mut cumulative_gain_turns = 0.0;
    for r in results.iter().filter(|r| r.label == SessionLabel::Attack) {
        if let (Some(s), Some(m)) = (r.stateless_detect_turn, r.srm_detect_turn) {
            if m < s {
                earlier_detect_total += 1;
                cumulative_gain_turns += f64::from(s - m);
            }
        }
    }

    let per_category = [AttackCategory::A, AttackCategory::B, AttackCategory::C]
        .into_iter()
        .map(|category| {
            let rows: Vec<&SessionResult> = results
                .iter()
                .filter(|r| r.category == Some(category))
                .collect();
            let stateless_turns: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.stateless_detect_turn)
                .map(f64::from)
                .collect();
            let srm_turns: Vec<f64> = rows
                .iter()
                .filter_map(|r| r.srm_detect_turn)
                .map(f64::from)
                .collect();
            let earlier_detects = rows
                .iter()
                .filter(|r| match (r.stateless_detect_turn, r.srm_detect_turn) {
                    (Some(s), Some(m)) => m < s,
                    _ => false,
                })
                .count() as u32;
            CategoryRow {
                category,
                n: rows.len() as u32,
                avg_stateless_turn: mean(&stateless_turns),
                avg_srm_turn: mean(&srm_turns),
                earlier_detects,
            }
        })
        .collect();

    MetricsReport {
        stateless,
        srm,
        combined,
        early_detection_gain,
        earlier_detect_total,
        cumulative_gain_turns,
        per_category,
    }
}

// ---------------------------------------------------------------------------
// Trajectory export
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub turn: u32,
    pub benign_mean: f64,
    pub benign_std: f64,
    pub attack_mean: f64,
    pub attack_std: f64,
    pub tau: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// Per-turn aggregate of the risk trajectories, split by label. Sessions
/// shorter than a given turn are excluded from that turn's aggregate.
pub fn trajectory_export(results: &[SessionResult], tau: f64) -> Vec<TrajectoryRow> {
    let max_turns = results
        .iter()
        .map(|r| r.risk_trajectory.len())
        .max()
        .unwrap_or(0);
    (1..=max_turns)
        .map(|turn| {
            let collect = |label: SessionLabel| -> Vec<f64> {
                results
                    .iter()
                    .filter(|r| r.label == label)
                    .filter_map(|r| r.risk_trajectory.get(turn - 1).copied())
                    .collect()
            };
            let (benign_mean, benign_std) = mean_std(&collect(SessionLabel::Benign));
            let (attack_mean, attack_std) = mean_std(&collect(SessionLabel::Attack));
            TrajectoryRow {
                turn: turn as u32,
                benign_mean,
                benign_std,
                attack_mean,
                attack_std,
                tau,
            }
        })
        .collect()
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from("turn,benign_mean,benign_std,attack_mean,attack_std,tau\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.turn, r.benign_mean, r.benign_std, r.attack_mean, r.attack_std, r.tau
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Latency
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub median_us: f64,
    pub p95_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub repetitions: usize,
    pub turns_per_repetition: usize,
    /// Accumulator step alone.
    pub srm_step: LatencyStats,
    /// Embedding lookup plus accumulator step: the full added cost of the
    /// temporal layer on top of the gate.
    pub embed_plus_step: LatencyStats,
    pub turn2_median_us: f64,
    pub turn50_median_us: f64,
}

fn median_us(samples: &mut [f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite latency samples"));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

fn percentile_us(samples: &mut [f64], p: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite latency samples"));
    let rank = ((samples.len() as f64) * p).ceil() as usize;
    samples[rank.clamp(1, samples.len()) - 1]
}

const LATENCY_TURNS: usize = 50;

/// Measure the per-turn overhead of the temporal layer over a synthetic
/// 50-turn session, repeated `repetitions` times on a monotonic clock.
pub fn latency_bench(repetitions: usize) -> LatencySummary {
    let lexicon = Lexicon::bundled();
    let profiles = RoleProfileSet::bundled();
    let profile = profiles.get("data analyst").expect("bundled role");
    let config = SrmConfig::default();

    let turn_texts = [
        "db_query(table=atlas, filter=active)",
        "report_generate(source=atlas, format=summary)",
        "dataset_stats(table=atlas, mode=weekly)",
        "schema_inspect(table=atlas)",
        "db_query(table=customers, fields=pii, dest=export)",
    ];
    let actions: Vec<Action> = (0..LATENCY_TURNS)
        .map(|i| parse_action(turn_texts[i % turn_texts.len()]).expect("latency turns parse"))
        .collect();

    let mut step_samples = Vec::with_capacity(repetitions * LATENCY_TURNS);
    let mut total_samples = Vec::with_capacity(repetitions * LATENCY_TURNS);
    let mut turn2 = Vec::with_capacity(repetitions);
    let mut turn50 = Vec::with_capacity(repetitions);

    for _ in 0..repetitions {
        let mut state = srm_init(&config).expect("default config");
        for (i, action) in actions.iter().enumerate() {
            let start = Instant::now();
            let vector = embed(action, lexicon);
            let embedded = Instant::now();
            let gate = evaluate_action(&vector, profile);
            let risk = raw_gate_risk(&gate);
            let step_start = Instant::now();
            let (next, _) = srm_step(&state, &vector, risk, &config).expect("valid risk");
            let stepped = Instant::now();
            state = next;

            let step_us = stepped.duration_since(step_start).as_secs_f64() * 1e6;
            let embed_us = embedded.duration_since(start).as_secs_f64() * 1e6;
            let total = step_us + embed_us;
            step_samples.push(step_us);
            total_samples.push(total);
            if i + 1 == 2 {
                turn2.push(total);
            }
            if i + 1 == LATENCY_TURNS {
                turn50.push(total);
            }
        }
    }

    LatencySummary {
        repetitions,
        turns_per_repetition: LATENCY_TURNS,
        srm_step: LatencyStats {
            median_us: median_us(&mut step_samples.clone()),
            p95_us: percentile_us(&mut step_samples, 0.95),
        },
        embed_plus_step: LatencyStats {
            median_us: median_us(&mut total_samples.clone()),
            p95_us: percentile_us(&mut total_samples, 0.95),
        },
        turn2_median_us: median_us(&mut turn2),
        turn50_median_us: median_us(&mut turn50),
    }
}
