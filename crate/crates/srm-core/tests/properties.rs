//! Property tests for the action grammar, the embedding and the risk
//! accumulator over randomized inputs.

use proptest::prelude::*;
use srm_core::semantics::{embed, parse_action, tokenize, ActionVector, Lexicon, DIM};
use srm_core::srm::{srm_init, srm_step, SrmConfig};

fn identifier() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,10}".prop_map(|s| s)
}

fn bare_value() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9_.-]{0,12}"
}

fn quoted_value() -> impl Strategy<Value = String> {
    // Anything without a double quote survives the quoting round-trip.
    "[ -!#-~]{0,16}"
}

prop_compose! {
    fn action_source()(
        name in identifier(),
        keys in proptest::collection::btree_set(identifier(), 0..5),
        values in proptest::collection::vec(
            prop_oneof![bare_value(), quoted_value()],
            5,
        ),
        pad in "[ \t]{0,3}",
    ) -> String {
        let args = keys
            .iter()
            .zip(&values)
            .map(|(k, v)| {
                let bare = !v.is_empty()
                    && v.chars().all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c));
                if bare {
                    format!("{k}={v}")
                } else {
                    format!("{k}=\"{v}\"")
                }
            })
            .collect::<Vec<_>>()
            .join(", ");
        if args.is_empty() {
            format!("{pad}{name}{pad}")
        } else {
            format!("{pad}{name}({args}){pad}")
        }
    }
}

proptest! {
    #[test]
    fn parse_serialize_round_trip(source in action_source()) {
        let action = parse_action(&source).expect("generated source parses");
        let reparsed = parse_action(&action.to_canonical_string()).expect("canonical parses");
        prop_assert_eq!(&action, &reparsed);
    }

    #[test]
    fn embedding_is_additive_over_tokens(source in action_source()) {
        let lexicon = Lexicon::bundled();
        let action = parse_action(&source).unwrap();
        let embedded = embed(&action, lexicon);

        let mut expected = [0.0f64; DIM];
        for token in tokenize(&action) {
            for &(dim, weight) in lexicon.lookup(&token) {
                expected[dim] += weight;
            }
        }
        prop_assert_eq!(embedded.components(), &expected);
        prop_assert!(expected.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn accumulator_is_bounded_and_sticky(
        gate_risks in proptest::collection::vec(0.0f64..=1.0, 1..60),
        alpha in 0.05f64..0.95,
        beta in 0.05f64..0.95,
        lambda in 0.05f64..0.95,
        tau in 0.05f64..=1.0,
        warmup_k in 1u32..6,
    ) {
        let config = SrmConfig {
            alpha,
            beta,
            warmup_k,
            lambda,
            w_delta: 0.0,
            w_g: 1.0,
            tau,
        };
        let mut v = ActionVector::zero();
        v.0[2] = 1.0;

        let mut state = srm_init(&config).unwrap();
        let mut max_turn_risk = 0.0f64;
        let mut flagged_before = false;
        let mut frozen_baseline = None;
        for &g in &gate_risks {
            let (next, record) = srm_step(&state, &v, g, &config).unwrap();
            state = next;
            max_turn_risk = max_turn_risk.max(record.turn_risk);

            prop_assert!(record.accumulated_risk >= 0.0);
            prop_assert!(record.accumulated_risk <= max_turn_risk + 1e-12);
            prop_assert!(record.drift >= 0.0 && record.drift <= 2.0);
            prop_assert!(record.adjusted_risk >= 0.0);

            if flagged_before {
                prop_assert!(state.flagged, "flag must be sticky");
            }
            flagged_before = state.flagged;

            if state.turn >= warmup_k {
                match frozen_baseline {
                    None => frozen_baseline = Some(state.baseline),
                    Some(b) => prop_assert_eq!(state.baseline, b, "baseline frozen after warmup"),
                }
            }
        }

        // Replaying the identical stream reproduces the final state bit
        // for bit.
        let mut replay = srm_init(&config).unwrap();
        for &g in &gate_risks {
            replay = srm_step(&replay, &v, g, &config).unwrap().0;
        }
        prop_assert_eq!(replay, state);
    }
}
