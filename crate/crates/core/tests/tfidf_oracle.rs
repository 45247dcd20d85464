use std::collections::BTreeMap;

use elicit_core::analytics::tfidf_top_terms;
use elicit_core::knowledge::{retrieve, Chunk, KnowledgeKind};
use elicit_core::transcript::{Script, Speaker};

const TOL: f64 = 1e-9;

fn doc(id: &str, text: &str) -> Script {
    Script::new(id, "", "", [(Speaker::Interviewer, text)]).unwrap()
}

fn idf(n: f64, df: f64) -> f64 {
    ((1.0 + n) / (1.0 + df)).ln() + 1.0
}

fn as_map(corpus: &[Script], target: &str) -> BTreeMap<String, f64> {
    tfidf_top_terms(corpus, target, 100)
        .unwrap()
        .into_iter()
        .map(|t| (t.term, t.score))
        .collect()
}

fn assert_scores(got: &BTreeMap<String, f64>, want: &[(&str, f64)]) {
    assert_eq!(got.len(), want.len(), "{got:?}");
    for (term, w) in want {
        let g = got[*term];
        assert!((g - w).abs() < TOL, "{term}: {g} vs {w}");
    }
}

#[test]
fn single_document() {
    // Kept tokens: calendar calendar meeting rooms (4). With N = 1 every
    // idf is ln(2/2) + 1 = 1, so the score is the relative frequency.
    let corpus = [doc("a", "The calendar, the calendar and the meeting rooms.")];
    assert_scores(
        &as_map(&corpus, "a"),
        &[("calendar", 0.5), ("meeting", 0.25), ("rooms", 0.25)],
    );
}

#[test]
fn three_documents() {
    let corpus = [
        doc("d1", "menu delivery menu tracking"),
        doc("d2", "delivery rent tenants"),
        doc("d3", "tracking metrics tracking privacy"),
    ];
    // df: menu 1, delivery 2, tracking 2, rent 1, tenants 1, metrics 1, privacy 1
    assert_scores(
        &as_map(&corpus, "d1"),
        &[
            ("menu", 2.0 / 4.0 * idf(3.0, 1.0)),
            ("delivery", 1.0 / 4.0 * idf(3.0, 2.0)),
            ("tracking", 1.0 / 4.0 * idf(3.0, 2.0)),
        ],
    );
    assert_scores(
        &as_map(&corpus, "d2"),
        &[
            ("delivery", 1.0 / 3.0 * idf(3.0, 2.0)),
            ("rent", 1.0 / 3.0 * idf(3.0, 1.0)),
            ("tenants", 1.0 / 3.0 * idf(3.0, 1.0)),
        ],
    );
    assert_scores(
        &as_map(&corpus, "d3"),
        &[
            ("tracking", 2.0 / 4.0 * idf(3.0, 2.0)),
            ("metrics", 1.0 / 4.0 * idf(3.0, 1.0)),
            ("privacy", 1.0 / 4.0 * idf(3.0, 1.0)),
        ],
    );
    // Ranking: highest score first, alphabetical among equals.
    let top: Vec<String> = tfidf_top_terms(&corpus, "d2", 2)
        .unwrap()
        .into_iter()
        .map(|t| t.term)
        .collect();
    assert_eq!(top, ["rent", "tenants"]);
}

fn chunk(id: &str, text: &str) -> Chunk {
    Chunk {
        doc_id: id.into(),
        kind: KnowledgeKind::Guidelines,
        ordinal: 0,
        text: text.into(),
        token_estimate: 10,
    }
}

#[test]
fn retrieval_cosine_matches_closed_form() {
    let chunks = [
        chunk("a", "greeting rapport greeting"),
        chunk("b", "closing summary"),
        chunk("c", "greeting summary"),
    ];
    // N = 3; df: greeting 2, rapport 1, closing 1, summary 2.
    let (i1, i2) = (idf(3.0, 1.0), idf(3.0, 2.0));
    // Query "greeting": the vector has one term, so cosine is the
    // greeting share of each chunk's norm.
    let a = [2.0 / 3.0 * i2, 1.0 / 3.0 * i1];
    let c = [0.5 * i2, 0.5 * i2];
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let want_a = a[0] / norm(&a);
    let want_c = c[0] / norm(&c);

    let ranked = retrieve("greeting", &chunks, 3);
    let by_id: BTreeMap<&str, f64> = ranked.iter().map(|s| (s.chunk.doc_id.as_str(), s.score)).collect();
    assert!((by_id["a"] - want_a).abs() < TOL);
    assert!((by_id["c"] - want_c).abs() < TOL);
    assert_eq!(by_id["b"], 0.0);
    assert_eq!(ranked[0].chunk.doc_id, "a");
    assert_eq!(ranked[2].chunk.doc_id, "b");
}
