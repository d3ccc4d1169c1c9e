use std::collections::BTreeMap;

use adaptest::matcher::{
    ahp_weights, fuzzy_match, levenshtein, numeric_similarity, object_similarity,
    string_similarity, NumericMetric, PairwiseMatrix, SimilarityConfig,
};
use adaptest::model::{ObjType, ObjectView};
use adaptest::repo::{AttrKey, Attributes, ObjectDescriptor};
use proptest::prelude::*;

/// Textbook recursion, no memoisation.
fn naive(a: &[char], b: &[char]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            if x == y {
                naive(ra, rb)
            } else {
                1 + naive(ra, b).min(naive(a, rb)).min(naive(ra, rb))
            }
        }
    }
}

fn view(id: &str, name: &str, t: ObjType) -> ObjectView {
    ObjectView {
        id: id.into(),
        name: name.into(),
        obj_type: t,
        parent_id: None,
        parent_name: None,
        text: String::new(),
        position: (10, 10),
        size: (100, 20),
        required: false,
        options: vec![],
        value: String::new(),
        enabled: true,
        blocked: false,
    }
}

fn descriptor(name: &str, t: ObjType) -> ObjectDescriptor {
    ObjectDescriptor::new(
        name,
        Attributes {
            name: Some(name.into()),
            obj_type: Some(t),
            ..Default::default()
        },
    )
}

#[test]
fn spec_string_examples() {
    assert_eq!(levenshtein("kitten", "sitting"), 3);
    assert_eq!(levenshtein("", "abc"), 3);
    assert!((string_similarity("kitten", "sitting", true) - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
    assert!(
        (string_similarity("CitiesDropDown", "CitiesList", true) - (1.0 - 8.0 / 14.0)).abs()
            < 1e-12
    );
    assert_eq!(string_similarity("", "", true), 1.0);
    assert_eq!(string_similarity("OK", "ok", true), 1.0);
    assert!(string_similarity("OK", "ok", false) < 1.0);
}

#[test]
fn cities_rebind_example() {
    let mut old = view("cities", "CitiesDropDown", ObjType::Listbox);
    old.parent_name = Some("OrderPanel".into());
    old.text = "Choose a city".into();
    let all = [
        AttrKey::Name,
        AttrKey::ObjType,
        AttrKey::ParentName,
        AttrKey::Text,
        AttrKey::Position,
        AttrKey::Size,
    ];
    let d = ObjectDescriptor::new("CitiesDropDown", Attributes::of_object(&old, &all));
    let mut renamed = old.clone();
    renamed.id = "a".into();
    renamed.name = "CitiesList".into();
    let cands = vec![renamed, view("b", "SubmitButton", ObjType::Button)];
    let cfg = SimilarityConfig::default();
    let m = fuzzy_match(&d, &cands, (800, 600), &cfg);
    let best = m.best.expect("rebinds");
    assert_eq!(best.candidate, "a");
    // every attribute but the name scores 1
    let expected = 0.35 * (6.0 / 14.0) + 0.20 + 0.15 + 0.15 + 0.10 + 0.05;
    assert!((best.overall - expected).abs() < 1e-12);
    assert!(best.overall > cfg.threshold);
    assert_eq!(m.ranking.len(), 2);
    assert_eq!(m.ranking[1].rank, 2);
}

#[test]
fn weighted_mean_example() {
    let mut d = descriptor("Go", ObjType::Listbox);
    d.weights = Some(BTreeMap::from([
        (AttrKey::Name, 0.5),
        (AttrKey::ObjType, 0.5),
    ]));
    let r = object_similarity(
        &d,
        &view("c", "Go", ObjType::Combobox),
        (800, 600),
        &SimilarityConfig::default(),
    );
    assert!((r.overall - 0.75).abs() < 1e-12);
}

#[test]
fn nothing_above_threshold() {
    let d = descriptor("PromoField", ObjType::Textfield);
    let cands = vec![view("x", "LogoutLink", ObjType::Link)];
    assert!(
        fuzzy_match(&d, &cands, (800, 600), &SimilarityConfig::default())
            .best
            .is_none()
    );
    assert!(
        fuzzy_match(&d, &[], (800, 600), &SimilarityConfig::default())
            .best
            .is_none()
    );
}

#[test]
fn two_by_two_ahp() {
    let w = ahp_weights(&PairwiseMatrix::unlabelled(vec![
        vec![1.0, 3.0],
        vec![1.0 / 3.0, 1.0],
    ]))
    .unwrap();
    assert!((w.weights[0] - 0.75).abs() < 1e-12);
    assert!(w.cr.abs() < 1e-12);
    let id = ahp_weights(&PairwiseMatrix::unlabelled(vec![vec![1.0; 3]; 3])).unwrap();
    assert!(id.weights.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-12));
}

#[test]
fn numeric_examples() {
    let s = numeric_similarity(
        &[0.0, 0.0],
        &[0.0, 0.0],
        NumericMetric::Euclidean,
        &[800.0, 600.0],
    )
    .unwrap();
    assert_eq!(s, 1.0);
    let s = numeric_similarity(
        &[0.0, 0.0],
        &[800.0, 600.0],
        NumericMetric::Euclidean,
        &[800.0, 600.0],
    )
    .unwrap();
    assert_eq!(s, 0.0);
    let s = numeric_similarity(
        &[3.0, 4.0],
        &[0.0, 0.0],
        NumericMetric::Euclidean,
        &[10.0, 10.0],
    )
    .unwrap();
    assert!((s - 0.5).abs() < 1e-12);
    assert!(numeric_similarity(&[1.0], &[1.0, 2.0], NumericMetric::Cosine, &[1.0]).is_err());
}

#[test]
fn cyclic_matrix_is_flagged() {
    let m = PairwiseMatrix::unlabelled(vec![
        vec![1.0, 9.0, 1.0],
        vec![1.0 / 9.0, 1.0, 9.0],
        vec![1.0, 1.0 / 9.0, 1.0],
    ]);
    let w = ahp_weights(&m).unwrap();
    assert!(w.cr > 0.1);
    assert!(!w.consistent);
}

#[test]
fn non_reciprocal_matrix_is_rejected() {
    let m = PairwiseMatrix::unlabelled(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
    assert!(ahp_weights(&m).is_err());
}

fn small_string() -> impl Strategy<Value = String> {
    "[abc]{0,6}"
}

proptest! {
    #[test]
    fn levenshtein_agrees_with_naive(a in small_string(), b in small_string()) {
        let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        prop_assert_eq!(levenshtein(&a, &b), naive(&ca, &cb));
    }

    #[test]
    fn levenshtein_is_a_metric(a in "[a-d]{0,8}", b in "[a-d]{0,8}", c in "[a-d]{0,8}") {
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
    }

    #[test]
    fn string_similarity_in_unit_range(a in "\\PC{0,12}", b in "\\PC{0,12}") {
        let s = string_similarity(&a, &b, true);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, string_similarity(&b, &a, true));
    }

    #[test]
    fn scaling_weights_keeps_scores(k in 0.01f64..100.0, name in "[A-Za-z]{1,10}", other in "[A-Za-z]{1,10}") {
        let d = descriptor(&name, ObjType::Textfield);
        let c = view("x", &other, ObjType::Listbox);
        let base = SimilarityConfig::default();
        let mut scaled = base.clone();
        for w in scaled.weights.values_mut() {
            *w *= k;
        }
        let a = object_similarity(&d, &c, (800, 600), &base).overall;
        let b = object_similarity(&d, &c, (800, 600), &scaled).overall;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn closer_name_never_scores_lower(target in "[a-c]{2,8}", noise in "[a-c]{0,4}", cut in 0usize..8) {
        // a candidate whose name is a better string match ranks no lower
        let d = descriptor(&target, ObjType::Button);
        let cfg = SimilarityConfig::default();
        let exact = object_similarity(&d, &view("e", &target, ObjType::Button), (800, 600), &cfg).overall;
        let mut mangled = target.clone();
        mangled.truncate(cut.min(mangled.len()));
        mangled.push_str(&noise);
        let worse = object_similarity(&d, &view("m", &mangled, ObjType::Button), (800, 600), &cfg).overall;
        prop_assert!(exact >= worse);
        let ns = string_similarity(&target, &mangled, true);
        // with only name and type specified, the score is an affine map of the name score
        prop_assert!((worse - (0.35 * ns + 0.20) / 0.55).abs() < 1e-9);
    }

    #[test]
    fn consistent_matrices_recover_their_vector(v in prop::collection::vec(0.1f64..10.0, 1..=6)) {
        let n = v.len();
        let entries: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| v[i] / v[j]).collect()).collect();
        let w = ahp_weights(&PairwiseMatrix::unlabelled(entries)).unwrap();
        let total: f64 = v.iter().sum();
        for (got, want) in w.weights.iter().zip(&v) {
            prop_assert!((got - want / total).abs() < 1e-9);
        }
        prop_assert!(w.cr.abs() <= 1e-9);
        prop_assert!(w.consistent);
    }

    #[test]
    fn ahp_weights_drive_similarity(v in prop::collection::vec(0.1f64..10.0, 2)) {
        let entries = vec![vec![1.0, v[0] / v[1]], vec![v[1] / v[0], 1.0]];
        let doc = serde_json::json!({"ahp_matrix": entries, "ahp_criteria": ["name", "obj_type"]});
        let cfg: SimilarityConfig = serde_json::from_value(doc).unwrap();
        let w: BTreeMap<AttrKey, f64> = cfg.weights.clone();
        prop_assert!((w[&AttrKey::Name] - v[0] / (v[0] + v[1])).abs() < 1e-9);
        prop_assert!(cfg.ahp.as_ref().unwrap().consistent);
    }
}
