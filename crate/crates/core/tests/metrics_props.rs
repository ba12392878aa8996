use proptest::prelude::*;
use sensorpen::metrics::*;
use sensorpen::parse::{ActivityParse, RPeakParse};
use sensorpen::sensor::{Environment, GroundTruth, Motion};

fn activity_parse() -> impl Strategy<Value = ActivityParse> {
    let m = prop_oneof![Just(None), Just(Some(Motion::Stationary)), Just(Some(Motion::Walking))];
    let e = prop_oneof![Just(None), Just(Some(Environment::Indoors)), Just(Some(Environment::Outdoors))];
    let summary = prop::option::of(prop_oneof![
        Just("The user is walking indoors.".to_string()),
        Just("Near the north gate of the campus library.".to_string()),
        Just("Inside a supermarket on the ground floor.".to_string()),
    ]);
    (m, e, summary).prop_map(|(motion, environment, summary)| ActivityParse {
        failed: motion.is_none() || environment.is_none(),
        motion,
        environment,
        summary,
    })
}

fn truth() -> impl Strategy<Value = GroundTruth> {
    (
        prop_oneof![Just(Motion::Stationary), Just(Motion::Walking)],
        prop_oneof![Just(Environment::Indoors), Just(Environment::Outdoors)],
        prop::option::of(Just("Campus library, north gate.".to_string())),
        prop::option::of(any::<bool>()),
    )
        .prop_map(|(motion, environment, location_text, ssid_informative)| GroundTruth { motion, environment, location_text, ssid_informative })
}

fn activity_instances() -> impl Strategy<Value = Vec<ActivityInstance>> {
    prop::collection::vec((activity_parse(), truth(), prop::option::of(any::<bool>())), 1..40).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (parse, truth, location_correct))| ActivityInstance { instance_id: format!("a{i:03}"), parse, truth, location_correct })
            .collect()
    })
}

fn ecg_instances() -> impl Strategy<Value = Vec<EcgInstance>> {
    prop::collection::vec((any::<bool>(), 0usize..20, 0usize..20, prop_oneof![Just(2.5), Just(5.0), Just(10.0)]), 1..40).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (hallucinated, found, truth_peaks, window_s))| EcgInstance {
                instance_id: format!("q{i:03}"),
                parse: RPeakParse { peaks: if hallucinated { vec![] } else { (0..found).map(|p| p as f64).collect() }, hallucinated },
                window_s,
                truth_peaks,
            })
            .collect()
    })
}

fn in_unit(x: Option<f64>) -> bool {
    x.map_or(true, |v| (0.0..=1.0).contains(&v))
}

proptest! {
    #[test]
    fn failure_and_valid_rates_sum_to_one(parses in prop::collection::vec(activity_parse(), 1..500)) {
        let f = failure_rate(&parses).unwrap();
        let v = valid_rate(&parses).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f + v, 1.0);
    }

    #[test]
    fn accuracy_is_capped_by_valid_rate(pairs in prop::collection::vec((activity_parse(), truth()), 1..100)) {
        let (parses, truths): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        for sub in [Subtask::Motion, Subtask::Environment] {
            let a = accuracy(&parses, &truths, sub).unwrap();
            prop_assert!(a >= 0.0 && a <= valid_rate(&parses).unwrap() + 1e-12);
        }
    }

    #[test]
    fn activity_report_ranges_and_order(instances in activity_instances(), seed in any::<u64>()) {
        let r = activity_report(instances.clone()).unwrap();
        for x in [r.failure_rate, r.motion_accuracy, r.environment_accuracy, r.location_precision, r.location_recall, r.chrf] {
            prop_assert!(in_unit(x));
        }
        let mut shuffled = instances;
        let n = shuffled.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(activity_report(shuffled).unwrap(), r);
    }

    #[test]
    fn ecg_report_ranges_and_order(instances in ecg_instances()) {
        let r = ecg_report(TaskKind::Ecg, instances.clone()).unwrap();
        prop_assert!(in_unit(r.hallucination_rate));
        prop_assert!(r.mae_bpm.is_none_or(|m| m >= 0.0));
        let mut reversed = instances;
        reversed.reverse();
        prop_assert_eq!(ecg_report(TaskKind::Ecg, reversed).unwrap(), r);
    }

    #[test]
    fn chrf_range(a in "\\PC{0,40}", b in "\\PC{0,40}") {
        for whitespace in [false, true] {
            let cfg = ChrfConfig { whitespace, ..ChrfConfig::default() };
            let s = chrf_with(&a, &b, &cfg);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(chrf_with(&a, &a, &cfg), 1.0);
        }
    }
}

#[test]
fn beta_two_weights_recall() {
    let (short, long) = ("library", "the campus library north gate");
    let f2 = |h, r| chrf_with(h, r, &ChrfConfig::default());
    let f1 = |h, r| chrf_with(h, r, &ChrfConfig { beta: 1.0, ..ChrfConfig::default() });
    assert_ne!(f2(short, long), f2(long, short));
    assert!((f1(short, long) - f1(long, short)).abs() < 1e-12);
}
