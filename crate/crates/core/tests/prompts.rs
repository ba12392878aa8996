use proptest::prelude::*;
use sensorpen::llm::sha256_hex;
use sensorpen::prompt::*;
use std::collections::{BTreeMap, HashSet};
use std::path::Path;

fn fixture(scheme: PromptScheme) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("prompts").join(format!("{scheme}.txt"));
    std::fs::read_to_string(path).unwrap()
}

fn body_of(raw: &str) -> String {
    let kept: String = raw.split_inclusive('\n').filter(|l| !l.starts_with("#% ")).collect();
    kept.strip_suffix('\n').unwrap().to_string()
}

fn activity_fields(step: &str) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("DATA_STEP".to_string(), step.to_string()),
        ("DATA_SATELLITE_COUNT".to_string(), "16".to_string()),
        ("DATA_SATELLITE_SNR".to_string(), "35.46".to_string()),
        ("DATA_WIFI_COUNT".to_string(), "1".to_string()),
        ("DATA_WIFI_LIST".to_string(), "['link-B33']".to_string()),
    ])
}

#[test]
fn builtins_match_files_on_disk() {
    let digests: BTreeMap<String, String> =
        serde_json::from_str(include_str!("fixtures/prompt_digests.json")).unwrap();
    assert_eq!(digests.len(), 10);
    for scheme in PromptScheme::all() {
        let raw = fixture(scheme);
        assert_eq!(sha256_hex(raw.as_bytes()), digests[&format!("{scheme}.txt")], "{scheme} changed");
        assert_eq!(builtin_template(scheme).body, body_of(&raw), "{scheme}");
    }
}

#[test]
fn only_reconstructions_carry_headers() {
    for scheme in PromptScheme::all() {
        let has_header = fixture(scheme).lines().any(|l| l.starts_with("#% "));
        assert_eq!(has_header, ["ecg/one_shot", "ecg/procedure_2ex"].contains(&scheme.to_string().as_str()), "{scheme}");
    }
}

#[test]
fn template_phrases() {
    let t = |s: &str| builtin_template(s.parse().unwrap()).body;
    assert!(t("activity/expert").contains("High satellite count and carrier-to-noise density indicates an outdoor setting"));
    assert!(t("ecg/procedure").contains("Initial Observation: Begin by observing the rough overall range"));
    assert!(t("ecg/description").contains("The QRS complex, a recurring feature in ECG data"));
    assert!(t("ecg/procedure_1ex").contains("R-peaks: [1181, 1183, 1208, 1154, 1166, 1183]."));
    assert!(t("ecg/procedure_2ex").contains("R-peaks: [1164, 1160, 1175, 1231, 1179, 1222]."));
    assert!(!t("ecg/one_shot").contains("Reasoning:\nFollowing"));
    for s in PromptScheme::of_task(Task::Ecg) {
        assert!(t(&s.to_string()).contains("Do not write codes."), "{s}");
    }
}

#[test]
fn step_substitution_example() {
    let t = builtin_template("activity/plain".parse().unwrap());
    let p = render(&t, &activity_fields("5.2"), vec![]).unwrap();
    assert!(p.text.contains("Step count: 5.2/min."));
    assert!(p.text.contains("Satellites detected: 16. Carrier-to-noise: 35.46dB."));
    let mut missing = activity_fields("5.2");
    missing.remove("DATA_WIFI_LIST");
    assert_eq!(render(&t, &missing, vec![]), Err(PromptError::MissingPlaceholder("DATA_WIFI_LIST".into())));
}

#[test]
fn ecg_digits_are_bracketed() {
    let t = builtin_template("ecg/description".parse().unwrap());
    assert!(render_ecg(&t, &[968, 977]).unwrap().text.ends_with("ECG data: [968, 977]"));
}

#[test]
fn ten_second_query_estimate_brackets_the_reported_size() {
    let values: Vec<i64> = include_str!("fixtures/worked_example_query.txt")
        .trim()
        .trim_matches(|c| c == '[' || c == ']')
        .split(", ")
        .map(|v| v.parse().unwrap())
        .collect();
    let twice: Vec<i64> = values.iter().chain(&values).copied().collect();
    assert_eq!(twice.len(), 720);
    for scheme in ["ecg/description", "ecg/procedure"] {
        let p = render_ecg(&builtin_template(scheme.parse().unwrap()), &twice).unwrap();
        let est = estimate_tokens(&p.text);
        assert!((3500..=7000).contains(&est), "{scheme}: {est}");
    }
}

fn masked(body: &str) -> Vec<(usize, String)> {
    // literal segments between placeholders, with their order
    let mut out = Vec::new();
    let mut rest = body;
    let mut k = 0;
    while let Some(start) = rest.find("$DATA") {
        out.push((k, rest[..start].to_string()));
        let end = rest[start + 1..].find('$').unwrap() + start + 2;
        rest = &rest[end..];
        k += 1;
    }
    out.push((k, rest.to_string()));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rendering_touches_only_placeholders(step in "[0-9.]{1,6}", list in "[a-zA-Z' ,\\[\\]_-]{0,40}") {
        for scheme in PromptScheme::of_task(Task::Activity) {
            let t = builtin_template(scheme);
            let mut f = activity_fields(&step);
            f.insert("DATA_WIFI_LIST".into(), list.clone());
            let text = render(&t, &f, vec![]).unwrap().text;
            prop_assert!(!text.contains("$DATA"));
            // every literal segment appears in order in the output
            let mut at = 0;
            for (_, seg) in masked(&t.body) {
                let found = text[at..].find(&seg);
                prop_assert!(found.is_some());
                at += found.unwrap() + seg.len();
            }
        }
    }

    #[test]
    fn rendering_is_injective(a in "[0-9a-z ]{0,8}", b in "[0-9a-z ]{0,8}") {
        let t = builtin_template("activity/expert".parse().unwrap());
        let ra = render(&t, &activity_fields(&a), vec![]).unwrap();
        let rb = render(&t, &activity_fields(&b), vec![]).unwrap();
        prop_assert_eq!(a == b, ra.text == rb.text);
        prop_assert_eq!(a == b, ra.fingerprint == rb.fingerprint);
    }

    #[test]
    fn estimate_is_monotone(s in ".{0,200}", extra in ".{0,50}") {
        let longer = format!("{s}{extra}");
        prop_assert!(estimate_tokens(&longer) >= estimate_tokens(&s));
    }
}

#[test]
fn no_fingerprint_collisions_over_a_random_corpus() {
    let t = builtin_template("ecg/procedure".parse().unwrap());
    let mut seen = HashSet::new();
    let mut texts = HashSet::new();
    let mut x: u64 = 0x2545F4914F6CDD1D;
    for _ in 0..2000 {
        let values: Vec<i64> = (0..8)
            .map(|_| {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                (x % 400) as i64 + 900
            })
            .collect();
        let p = render_ecg(&t, &values).unwrap();
        assert_eq!(seen.insert(p.fingerprint), texts.insert(p.text));
    }
}
