mod common;

use proptest::prelude::*;
use rwsim::applications::{
    sd_error_exact, CollisionFinder, FunctionFamily, ToyTwoRegular, TruthTable,
};
use rwsim::engine::RunConfig;
use rwsim::mbqc::{
    build_brickwork, mbqc_run_rewind, teleported_output, BrickworkSpec, MeasurementPattern,
};
use rwsim::mitigation::{mitigate, mitigate_postselect, mitigation_round, p_max, FlaggedState};
use rwsim::rng::from_seed;
use rwsim::statevector::SnapshotRegistry;
use rwsim::{parse_circuit, serialize_circuit, stabilizer, statevector};

use common::{max_dist_diff, random_clifford, random_general, to_f64_dist};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn successful_round_doubles_odds(p in 1e-6f64..0.999, seed in any::<u64>()) {
        let mut fs = FlaggedState::from_probability(p).unwrap();
        let before = fs.odds();
        let mut registry = SnapshotRegistry::new();
        let outcomes = mitigation_round(&mut fs, 6, &mut registry, &mut from_seed(seed)).unwrap();
        if outcomes.last() == Some(&0) {
            prop_assert!((fs.odds() / (2.0 * before) - 1.0).abs() < 1e-10);
            prop_assert!((fs.nontarget_probability() - fs.p.unwrap()).abs() < 1e-12);
        } else {
            prop_assert!(outcomes.iter().all(|&z| z == 1));
        }
    }

    #[test]
    fn mitigation_traces_obey_counters(frac in 0.0f64..1.0, n in 1usize..6, seed in any::<u64>()) {
        let p = p_max(n as u32) * frac;
        let fs = FlaggedState::from_probability(p).unwrap();
        let mut registry = SnapshotRegistry::new();
        let (out, trace) = mitigate(fs, n, &mut registry, &mut from_seed(seed)).unwrap();
        prop_assert!(trace.check(n).is_ok(), "{:?}", trace.check(n));
        if trace.is_success() {
            prop_assert_eq!(trace.levels_completed(), 2 * n + 3);
            prop_assert!(out.odds() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn coin_shrinks_nontarget_weight_by_q(p in 0.01f64..0.99, q in 0.05f64..0.95, m in 0usize..8) {
        let out = mitigate_postselect(FlaggedState::from_probability(p).unwrap(), q, m).unwrap();
        let w = p * q.powi(m as i32);
        prop_assert!((out.nontarget_probability() - w / (w + 1.0 - p)).abs() < 1e-12);
    }

    #[test]
    fn circuit_text_round_trips(seed in any::<u64>(), clifford in any::<bool>()) {
        let mut rng = from_seed(seed);
        let c = if clifford {
            random_clifford(6, 20, 5, 2, &mut rng)
        } else {
            random_general(5, 15, 2, &mut rng)
        };
        let text = serialize_circuit(&c);
        let back = parse_circuit(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(serialize_circuit(&back), text);
    }

    #[test]
    fn stabilizer_matches_statevector(seed in any::<u64>()) {
        let c = random_clifford(6, 30, 5, 3, &mut from_seed(seed));
        let sv = statevector::exact_distribution(&c, &RunConfig::default()).unwrap();
        let stab = stabilizer::exact_distribution(&c, stabilizer::DEFAULT_DEPTH_LIMIT).unwrap();
        prop_assert!(max_dist_diff(&sv, &to_f64_dist(&stab)) < 1e-12);
        let total: f64 = sv.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sd_relations_hold(n in 1u32..4, m in 1u32..3, seed in any::<u64>()) {
        let mut rng = from_seed(seed);
        let c0 = TruthTable::random(n, m, &mut rng).unwrap();
        let c1 = TruthTable::random(n, m, &mut rng).unwrap();
        let e = sd_error_exact(&c0, &c1).unwrap();
        prop_assert!(e.check().is_ok(), "{:?}", e.check());
    }

    #[test]
    fn truth_table_text_round_trips(n in 1u32..5, m in 1u32..4, seed in any::<u64>()) {
        let t = TruthTable::random(n, m, &mut from_seed(seed)).unwrap();
        prop_assert_eq!(TruthTable::parse(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn toy_collisions_always_verify(bits in 1usize..5, seed in any::<u64>()) {
        let toy = ToyTwoRegular { image_bits: bits };
        let finder = CollisionFinder::new(&toy).unwrap();
        let mut rng = from_seed(seed);
        for _ in 0..8 {
            if let Some((x, y)) = finder.find(&mut rng, true).unwrap() {
                prop_assert!(x != y && toy.eval(x) == toy.eval(y));
            }
        }
    }

    #[test]
    fn all_zero_mbqc_runs_teleport(angles in prop::collection::vec(-3.2f64..3.2, 8), seed in any::<u64>()) {
        let spec = BrickworkSpec::new(2, 5).unwrap();
        let pattern = MeasurementPattern::from_angles(spec, angles).unwrap();
        let run = mbqc_run_rewind(build_brickwork(&spec).unwrap(), &pattern, 6, &mut from_seed(seed)).unwrap();
        if run.all_zero {
            let target = teleported_output(&pattern).unwrap();
            prop_assert!(run.output.fidelity(&target) > 1.0 - 1e-9);
        }
    }
}
