use sensorpen::metrics::{chrf, chrf_with, ChrfConfig};
use serde::Deserialize;

#[derive(Deserialize)]
struct Pair {
    hypothesis: String,
    reference: String,
    chrf_whitespace: f64,
    chrf_no_whitespace: f64,
    chrf_reversed_whitespace: f64,
}

#[derive(Deserialize)]
struct Oracle {
    char_order: usize,
    beta: f64,
    pairs: Vec<Pair>,
}

fn oracle() -> Oracle {
    serde_json::from_str(include_str!("fixtures/oracles/chrf.json")).unwrap()
}

#[test]
fn chrf_matches_reference_implementation() {
    let o = oracle();
    assert_eq!(o.pairs.len(), 10);
    let ws = ChrfConfig { max_n: o.char_order, beta: o.beta, whitespace: true };
    let nows = ChrfConfig { whitespace: false, ..ws };
    for p in &o.pairs {
        let got = chrf_with(&p.hypothesis, &p.reference, &ws);
        assert!((got - p.chrf_whitespace).abs() < 1e-6, "{}: {got} vs {}", p.hypothesis, p.chrf_whitespace);
        let got = chrf_with(&p.hypothesis, &p.reference, &nows);
        assert!((got - p.chrf_no_whitespace).abs() < 1e-6, "{}: {got} vs {}", p.hypothesis, p.chrf_no_whitespace);
        assert_eq!(chrf(&p.hypothesis, &p.reference), got, "default drops whitespace");
        let got = chrf_with(&p.reference, &p.hypothesis, &ws);
        assert!((got - p.chrf_reversed_whitespace).abs() < 1e-6, "{}: {got} vs {}", p.reference, p.chrf_reversed_whitespace);
    }
}
