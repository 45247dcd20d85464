use std::collections::BTreeSet;

use elicit_core::analytics::tfidf::is_stopword;
use elicit_core::quality::{
    coherence, focus, light_stem, non_redundancy, HeuristicGrammar, MetricWeights, QualityScorer,
};
use elicit_core::transcript::{Script, Speaker};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

/// Distinct lowercase words whose stems are also distinct and not stopwords.
fn distinct_words(min: usize, max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::btree_set("[a-z]{4,9}", min..max)
        .prop_map(|set| {
            let mut stems = BTreeSet::new();
            set.into_iter()
                .filter(|w| !is_stopword(w) && stems.insert(light_stem(w)))
                .collect::<Vec<_>>()
        })
        .prop_filter("enough words", move |v| v.len() >= min)
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Order of `0..n` that moves every element and never puts two consecutive
/// integers next to each other.
fn no_overlap_derangement(n: usize) -> Option<Vec<usize>> {
    fn go(n: usize, acc: &mut Vec<usize>, used: &mut [bool]) -> bool {
        if acc.len() == n {
            return true;
        }
        for v in 0..n {
            let pos = acc.len();
            if used[v] || v == pos {
                continue;
            }
            if let Some(&prev) = acc.last() {
                if prev.abs_diff(v) <= 1 {
                    continue;
                }
            }
            used[v] = true;
            acc.push(v);
            if go(n, acc, used) {
                return true;
            }
            acc.pop();
            used[v] = false;
        }
        false
    }
    let mut acc = Vec::new();
    go(n, &mut acc, &mut vec![false; n]).then_some(acc)
}

proptest! {
    #[test]
    fn scores_stay_in_unit_interval(text in "\\PC{0,300}") {
        let g = HeuristicGrammar;
        let s = QualityScorer::new(&g, MetricWeights::default()).score_text(&text);
        for c in s.components() {
            prop_assert!(in_unit(c), "{c} out of range for {text:?}");
        }
        prop_assert!(in_unit(s.composite));
    }

    #[test]
    fn composite_is_component_mean(text in "[A-Za-z ,.?!()\"]{0,200}") {
        let g = HeuristicGrammar;
        let s = QualityScorer::new(&g, MetricWeights::default()).score_text(&text);
        let mean = s.components().iter().sum::<f64>() / 4.0;
        prop_assert!((s.composite - mean).abs() < TOL);
    }

    #[test]
    fn duplicating_sentence_lowers_non_redundancy(words in distinct_words(3, 15)) {
        let sentence = format!("{}.", words.join(" "));
        let doubled = format!("{sentence} {sentence}");
        prop_assert!(non_redundancy(&doubled) < non_redundancy(&sentence));
    }

    #[test]
    fn chained_overlap_beats_derangement(words in distinct_words(6, 14)) {
        // unit i shares exactly one word with unit i + 1
        let units: Vec<String> = words.windows(2).map(|w| format!("{} {}.", w[0], w[1])).collect();
        let order = no_overlap_derangement(units.len()).expect("n >= 4 has one");
        let shuffled: Vec<&str> = order.iter().map(|&i| units[i].as_str()).collect();
        prop_assert!(coherence(&units) > coherence(&shuffled));
        prop_assert!(focus(&units.join(" ")) > focus(&shuffled.join(" ")));
    }

    #[test]
    fn report_summaries_recompute(turns in prop::collection::vec((any::<bool>(), "[A-Za-z ,.?]{1,80}"), 1..30)) {
        let turns: Vec<(Speaker, String)> = turns
            .into_iter()
            .map(|(i, t)| (if i { Speaker::Interviewer } else { Speaker::Stakeholder }, format!("x {t}")))
            .collect();
        let script = Script::new("p", "", "", turns).unwrap();
        let g = HeuristicGrammar;
        let report = QualityScorer::new(&g, MetricWeights::default()).score_script(&script).unwrap();
        for who in [None, Some(Speaker::Interviewer), Some(Speaker::Stakeholder)] {
            let v: Vec<f64> = report
                .turns
                .iter()
                .filter(|t| who.map_or(true, |s| t.speaker == s))
                .map(|t| t.score.composite)
                .collect();
            let summary = match who {
                None => Some(report.all),
                Some(Speaker::Interviewer) => report.interviewer,
                Some(Speaker::Stakeholder) => report.stakeholder,
            };
            if v.is_empty() {
                prop_assert!(summary.is_none());
                continue;
            }
            let summary = summary.unwrap();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
            prop_assert_eq!(summary.n, v.len());
            prop_assert!((summary.mean - mean).abs() < TOL);
            prop_assert!((summary.std - std).abs() < TOL);
        }
    }
}

#[test]
fn derangement_helper() {
    for n in 4..=13 {
        let d = no_overlap_derangement(n).unwrap();
        assert!(d.iter().enumerate().all(|(i, &v)| i != v));
        assert!(d.windows(2).all(|w| w[0].abs_diff(w[1]) > 1));
    }
}
