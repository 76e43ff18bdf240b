//! Acceptance suite: every release gate for the bundled benchmark and
//! the accumulator contracts, one test per criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use srm_core::bench::{
    generate_benchmark, validate_benchmark, AttackCategory, BenchmarkSet, SessionLabel,
};
use srm_core::eval::{
    compute_metrics, latency_bench, run_benchmark, trajectory_export, MetricsReport, SessionResult,
    TrajectoryRow,
};
use srm_core::gate::RoleProfileSet;
use srm_core::semantics::{ActionVector, Lexicon, DIM};
use srm_core::session::SessionManager;
use srm_core::srm::{srm_init, srm_step, SrmConfig};

struct Bundle {
    set: BenchmarkSet,
    results: Vec<SessionResult>,
    metrics: MetricsReport,
    trajectory: Vec<TrajectoryRow>,
    elapsed: Duration,
}

fn bundle() -> &'static Bundle {
    static BUNDLE: OnceLock<Bundle> = OnceLock::new();
    BUNDLE.get_or_init(|| {
        let start = Instant::now();
        let set = generate_benchmark(42).expect("bundled seed calibrates");
        let config = SrmConfig::default();
        let results = run_benchmark(&set, &config, RoleProfileSet::bundled(), Lexicon::bundled())
            .expect("bundled run succeeds");
        let metrics = compute_metrics(&results);
        let trajectory = trajectory_export(&results, config.tau);
        let elapsed = start.elapsed();
        Bundle {
            set,
            results,
            metrics,
            trajectory,
            elapsed,
        }
    })
}

fn check(name: &str, ok: bool, detail: &str) {
    println!(
        "acceptance {name}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{name} failed: {detail}");
}

#[test]
fn criterion_1_headline_metrics() {
    let b = bundle();
    let sl = &b.metrics.stateless;
    let srm = &b.metrics.srm;
    let ok = sl.detection_rate == 1.0
        && (sl.fpr - 0.05).abs() < 1e-12
        && (sl.precision - 0.9524).abs() <= 1e-4
        && (sl.f1 - 0.9756).abs() <= 1e-4
        && srm.detection_rate == 1.0
        && srm.fpr == 0.0
        && srm.precision == 1.0
        && srm.f1 == 1.0
        && b.elapsed < Duration::from_secs(5);
    check(
        "1 (headline metrics)",
        ok,
        &format!(
            "stateless recall={} fpr={} precision={:.6} f1={:.6}; srm recall={} fpr={} precision={} f1={}; runtime={:?}",
            sl.detection_rate, sl.fpr, sl.precision, sl.f1,
            srm.detection_rate, srm.fpr, srm.precision, srm.f1,
            b.elapsed
        ),
    );
}

#[test]
fn criterion_2_detection_turn_profile() {
    let b = bundle();
    let sl_avg = b.metrics.stateless.avg_detection_turn.unwrap_or(f64::NAN);
    let srm_avg = b.metrics.srm.avg_detection_turn.unwrap_or(f64::NAN);
    let ok = (sl_avg - 4.05).abs() <= 0.75 && (srm_avg - 4.45).abs() <= 0.75 && srm_avg > sl_avg;
    check(
        "2 (detection-turn profile)",
        ok,
        &format!("stateless avg={sl_avg} (4.05±0.75), srm avg={srm_avg} (4.45±0.75), srm later"),
    );
}

#[test]
fn criterion_3_early_detection_structure() {
    let b = bundle();
    let m = &b.metrics;
    let cat = |c: AttackCategory| {
        m.per_category
            .iter()
            .find(|row| row.category == c)
            .expect("category row")
    };
    let a = cat(AttackCategory::A).earlier_detects;
    let bb = cat(AttackCategory::B).earlier_detects;
    let c = cat(AttackCategory::C).earlier_detects;
    let ok = m.earlier_detect_total >= 3
        && m.cumulative_gain_turns >= 1.0
        && a + bb == m.earlier_detect_total
        && c == 0;
    check(
        "3 (early-detection structure)",
        ok,
        &format!(
            "earlier detects total={} (A={a}, B={bb}, C={c}), cumulative gain={} turns",
            m.earlier_detect_total, m.cumulative_gain_turns
        ),
    );
}

#[test]
fn criterion_4_trajectory_separation() {
    let b = bundle();
    let rows = &b.trajectory;
    let tau = 0.20;
    let all_benign_separated = rows.iter().all(|r| r.benign_mean + r.benign_std < tau);
    let warmup_near_zero = rows.iter().take(3).all(|r| r.benign_mean <= 0.02);
    let n = rows.len();
    let final_two_above =
        n >= 2 && rows[n - 1].attack_mean >= tau && rows[n - 2].attack_mean >= tau;
    let ok = n == 7 && all_benign_separated && warmup_near_zero && final_two_above;
    check(
        "4 (trajectory separation)",
        ok,
        &format!(
            "benign mean+std max={:.4} (<{tau}), benign warmup means={:?}, attack means turns 6..7=[{:.4}, {:.4}]",
            rows.iter().map(|r| r.benign_mean + r.benign_std).fold(0.0, f64::max),
            rows.iter().take(3).map(|r| (r.benign_mean * 1e4).round() / 1e4).collect::<Vec<_>>(),
            rows[n - 2].attack_mean,
            rows[n - 1].attack_mean
        ),
    );
}

#[test]
fn criterion_5_latency() {
    let summary = latency_bench(1000);
    let ok = summary.embed_plus_step.median_us < 250.0 && summary.srm_step.median_us < 250.0;
    check(
        "5 (latency)",
        ok,
        &format!(
            "median embed+step={:.3}us (p95={:.3}us), step alone={:.3}us, over {} reps",
            summary.embed_plus_step.median_us,
            summary.embed_plus_step.p95_us,
            summary.srm_step.median_us,
            summary.repetitions
        ),
    );
}

/// Closed-form evaluation of the baseline and risk recurrences, written
/// as explicit geometric sums so it shares no code path with `srm_step`.
fn closed_form_risk(gate_risks: &[f64], config: &SrmConfig) -> Vec<f64> {
    let k = config.warmup_k as usize;
    let baseline_at = |t: usize| -> f64 {
        // b_t = beta * sum_{j=1..t} (1-beta)^(t-j) g_j, frozen at t = K.
        let t = t.min(k);
        (1..=t)
            .map(|j| config.beta * (1.0 - config.beta).powi((t - j) as i32) * gate_risks[j - 1])
            .sum()
    };
    (1..=gate_risks.len())
        .map(|t| {
            (1..=t)
                .map(|s| {
                    let adjusted = (gate_risks[s - 1] - baseline_at(s)).max(0.0);
                    let turn_risk = config.w_g * adjusted;
                    (1.0 - config.lambda) * config.lambda.powi((t - s) as i32) * turn_risk
                })
                .sum()
        })
        .collect()
}

#[test]
fn criterion_6_recurrence_oracle() {
    let config = SrmConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let v = {
        let mut v = ActionVector::zero();
        v.0[0] = 1.0;
        v
    };
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let len = rng.random_range(1..=50);
        let gate_risks: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let expected = closed_form_risk(&gate_risks, &config);

        let mut state = srm_init(&config).unwrap();
        for (t, &g) in gate_risks.iter().enumerate() {
            let (next, record) = srm_step(&state, &v, g, &config).unwrap();
            state = next;
            let diff = (record.accumulated_risk - expected[t]).abs();
            worst = worst.max(diff);
        }
    }
    check(
        "6 (recurrence oracle)",
        worst <= 1e-12,
        &format!("10000 random sequences, worst |step - closed form| = {worst:.3e}"),
    );
}

#[test]
fn criterion_7_property_suite() {
    let mut failures = Vec::new();

    // Steady state: constant per-turn risk r from turn 1 gives
    // |R_t - r| = r * lambda^t. A constant risk stream is produced with
    // warmup_K = 1 and w_g = 2: feeding g = r/1.2 yields an adjusted risk
    // of 0.6 * g every turn, so the per-turn risk is exactly r.
    for r in [0.1, 0.3, 0.9] {
        let config = SrmConfig {
            warmup_k: 1,
            w_g: 2.0,
            ..SrmConfig::default()
        };
        let g = r / 1.2;
        let v = {
            let mut v = ActionVector::zero();
            v.0[3] = 1.0;
            v
        };
        let mut state = srm_init(&config).unwrap();
        for t in 1..=50 {
            let (next, record) = srm_step(&state, &v, g, &config).unwrap();
            state = next;
            let bound = r * config.lambda.powi(t) + 1e-12;
            if (record.accumulated_risk - r).abs() > bound {
                failures.push(format!(
                    "steady-state r={r} t={t}: |{} - {r}| > {bound}",
                    record.accumulated_risk
                ));
            }
        }
    }

    // Boundedness: never negative, never above the running max turn risk.
    let config = SrmConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let mut state = srm_init(&config).unwrap();
        let mut max_turn_risk: f64 = 0.0;
        for _ in 0..rng.random_range(1..=40) {
            let mut v = ActionVector::zero();
            v.0[rng.random_range(0..DIM)] = rng.random::<f64>() * 3.0;
            let g = rng.random::<f64>();
            let (next, record) = srm_step(&state, &v, g, &config).unwrap();
            state = next;
            max_turn_risk = max_turn_risk.max(record.turn_risk);
            if !(0.0..=max_turn_risk + 1e-12).contains(&record.accumulated_risk) {
                failures.push(format!(
                    "boundedness: R={} outside [0, {max_turn_risk}]",
                    record.accumulated_risk
                ));
            }
        }
    }

    // Baseline freeze under adversarial post-warmup inputs.
    {
        let v = {
            let mut v = ActionVector::zero();
            v.0[0] = 1.0;
            v
        };
        let mut state = srm_init(&config).unwrap();
        for g in [0.1, 0.25, 0.4] {
            state = srm_step(&state, &v, g, &config).unwrap().0;
        }
        let frozen = state.baseline;
        for g in [1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.9] {
            state = srm_step(&state, &v, g, &config).unwrap().0;
            if state.baseline != frozen {
                failures.push(format!(
                    "baseline moved after freeze: {} != {frozen}",
                    state.baseline
                ));
            }
        }
    }

    // Sticky flag monotonicity over random streams.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let mut state = srm_init(&config).unwrap();
        let mut was_flagged = false;
        for _ in 0..40 {
            let mut v = ActionVector::zero();
            v.0[rng.random_range(0..DIM)] = 1.0;
            let g = rng.random::<f64>();
            state = srm_step(&state, &v, g, &config).unwrap().0;
            if was_flagged && !state.flagged {
                failures.push("flag cleared after being raised".to_string());
            }
            was_flagged = state.flagged;
        }
    }

    // Bit-identical replay of every bundled session.
    {
        let b = bundle();
        let rerun = run_benchmark(
            &b.set,
            &SrmConfig::default(),
            RoleProfileSet::bundled(),
            Lexicon::bundled(),
        )
        .unwrap();
        if rerun != b.results {
            failures.push("replaying the bundled benchmark changed results".to_string());
        }
    }

    // Interleaving isolation: concurrent sessions see the same verdicts
    // as isolated ones.
    {
        let b = bundle();
        let pick = |label: SessionLabel, idx: usize| {
            b.set
                .sessions
                .iter()
                .filter(|s| s.label == label)
                .nth(idx)
                .unwrap()
        };
        let s1 = pick(SessionLabel::Attack, 0);
        let s2 = pick(SessionLabel::Benign, 5);

        let isolated = |session: &srm_core::bench::Session| {
            let m = SessionManager::bundled();
            m.open_session(&session.id, &session.role).unwrap();
            session
                .turns
                .iter()
                .map(|t| m.evaluate_turn(&session.id, t).unwrap())
                .collect::<Vec<_>>()
        };
        let alone1 = isolated(s1);
        let alone2 = isolated(s2);

        let m = SessionManager::bundled();
        m.open_session(&s1.id, &s1.role).unwrap();
        m.open_session(&s2.id, &s2.role).unwrap();
        let mut mixed1 = Vec::new();
        let mut mixed2 = Vec::new();
        for i in 0..s1.turns.len().max(s2.turns.len()) {
            if let Some(t) = s2.turns.get(i) {
                mixed2.push(m.evaluate_turn(&s2.id, t).unwrap());
            }
            if let Some(t) = s1.turns.get(i) {
                mixed1.push(m.evaluate_turn(&s1.id, t).unwrap());
            }
        }
        if mixed1 != alone1 || mixed2 != alone2 {
            failures.push("session interleaving changed verdict sequences".to_string());
        }
    }

    // Drift invariance: with w_delta = 0, changing the vectors alone
    // cannot move the risk trace.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let gate_risks: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
        let run = |vector_seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(vector_seed);
            let mut state = srm_init(&config).unwrap();
            let mut trace = Vec::new();
            for &g in &gate_risks {
                let mut v = ActionVector::zero();
                v.0[rng.random_range(0..DIM)] = 1.0 + rng.random::<f64>();
                let (next, record) = srm_step(&state, &v, g, &config).unwrap();
                state = next;
                trace.push(record.accumulated_risk);
            }
            trace
        };
        if run(1) != run(2) {
            failures.push("risk trace depends on vectors although w_delta = 0".to_string());
        }
    }

    check(
        "7 (property suite)",
        failures.is_empty(),
        &if failures.is_empty() {
            "steady state, boundedness, baseline freeze, sticky flag, replay, isolation, drift invariance".to_string()
        } else {
            failures.join("; ")
        },
    );
}

#[test]
fn criterion_8_benchmark_structure() {
    let b = bundle();
    let violations = validate_benchmark(&b.set);
    let benign = b.set.benign_count();
    let a = b.set.category_count(AttackCategory::A);
    let bb = b.set.category_count(AttackCategory::B);
    let c = b.set.category_count(AttackCategory::C);
    let warmup_clean = b
        .results
        .iter()
        .filter(|r| r.label == SessionLabel::Attack)
        .all(|r| r.stateless_detect_turn.map(|t| t > 3).unwrap_or(false));
    let ok =
        violations.is_empty() && benign == 40 && a == 16 && bb == 11 && c == 13 && warmup_clean;
    check(
        "8 (benchmark structure)",
        ok,
        &format!(
            "violations={}, composition benign/A/B/C = {benign}/{a}/{bb}/{c}, all attack warmups pass stateless",
            violations.len()
        ),
    );
}
