mod common;

use adaptest::dsl::{
    parse, parse_unchecked, serialize, validate, IssueKind, Severity, Step, TestScript, Verb,
};
use adaptest::model::{ObjType, ObjectView};
use adaptest::repo::{
    load_repository, resolve_exact, AttrKey, Attributes, ObjectDescriptor, Repository,
};
use proptest::prelude::*;

use common::corpus::{clean_corpus, inject, DEFECTS};

#[test]
fn fixture_repositories_are_canonical() {
    for f in [
        "signup_repository.json",
        "store_repository.json",
        "portal_repository.json",
    ] {
        let text = std::fs::read_to_string(common::fixture(f)).unwrap();
        assert_eq!(load_repository(&text).unwrap().to_json(), text, "{f}");
    }
}

#[test]
fn fixture_scripts_round_trip_and_validate() {
    for (suite, repo, model) in [
        ("signup_suite", "signup_repository.json", "signup_v1.json"),
        ("store_suite", "store_repository.json", "store.json"),
        ("portal_suite", "portal_repository.json", "portal.json"),
    ] {
        let repo = common::repo(repo);
        let model = common::model(model);
        for s in common::suite(suite) {
            let text = serialize(&s);
            assert_eq!(parse(&text).unwrap(), s);
            assert_eq!(serialize(&parse(&text).unwrap()), text);
            assert_eq!(validate(&s, &repo, Some(&model)), vec![], "{}", s.id);
        }
    }
}

#[test]
fn signup_script_is_six_steps() {
    let s = common::suite("signup_suite")
        .into_iter()
        .find(|s| s.id == "signup-basic")
        .unwrap();
    assert_eq!(s.steps.len(), 6);
}

#[test]
fn whitespace_and_comments_do_not_matter() {
    let a = parse("test \"t\"\nclick \"SubmitButton\"\n").unwrap();
    let b = parse("  test   \"t\"  # header\n\n\tclick    \"SubmitButton\"   \n# done\n").unwrap();
    assert_eq!(serialize(&a), serialize(&b));
}

#[test]
fn validator_examples() {
    let repo = common::repo("signup_repository.json");
    let model = common::model("signup_v1.json");
    let typo = parse("test \"t\"\nclick \"SubmitButon\"\n").unwrap();
    let issues = validate(&typo, &repo, Some(&model));
    assert_eq!(issues.len(), 1);
    assert_eq!(issues[0].kind, IssueKind::UnknownObject);
    assert_eq!(issues[0].severity, Severity::Error);

    let wrong = parse("test \"t\"\nenter \"SubmitButton\" \"x\"\n").unwrap();
    assert_eq!(
        validate(&wrong, &repo, None)[0].kind,
        IssueKind::InvalidVerbForType
    );

    let screen = parse("test \"t\"\nassert_screen \"nowhere\"\n").unwrap();
    assert_eq!(
        validate(&screen, &repo, Some(&model))[0].kind,
        IssueKind::UnknownScreen
    );
    assert_eq!(validate(&screen, &repo, None), vec![]);
}

#[test]
fn arity_error_points_at_the_line() {
    let errs = parse("test \"t\"\nopen \"signup\"\nenter \"NameField\"\n").unwrap_err();
    assert_eq!(errs[0].line, 3);
    // lenient parsing defers the problem to the validator
    let s = parse_unchecked("test \"t\"\nenter \"NameField\"\n").unwrap();
    let issues = validate(&s, &common::repo("signup_repository.json"), None);
    assert_eq!(issues[0].kind, IssueKind::MissingParameter);
}

#[test]
fn injected_defects_are_found_exactly() {
    let model = common::model("store.json");
    let (corpus, repo) = clean_corpus(&model);
    assert_eq!(corpus.len(), 20);
    for (i, s) in corpus.iter().enumerate() {
        assert_eq!(validate(s, &repo, Some(&model)), vec![], "{}", s.id);
        let kind = DEFECTS[i % DEFECTS.len()];
        let broken = inject(s, kind, &repo);
        let kinds: Vec<IssueKind> = validate(&broken, &repo, Some(&model))
            .iter()
            .map(|x| x.kind)
            .collect();
        assert_eq!(kinds, vec![kind], "{}", s.id);
    }
}

fn token() -> impl Strategy<Value = String> {
    "[ -~\\t\\n\"\\\\é]{0,12}"
}

fn step() -> impl Strategy<Value = Step> {
    (prop::sample::select(Verb::ALL.to_vec()), token(), token()).prop_map(|(verb, obj, arg)| {
        let object = verb.takes_object().then_some(obj.as_str());
        let arg = match verb {
            Verb::Wait => (arg.len() * 7).to_string(),
            Verb::Check => if arg.len() % 2 == 0 { "on" } else { "off" }.to_string(),
            _ => arg,
        };
        let args: Vec<&str> = (0..verb.arity()).map(|_| arg.as_str()).collect();
        Step::new(verb, object, &args)
    })
}

fn obj_type() -> impl Strategy<Value = ObjType> {
    prop::sample::select(vec![
        ObjType::Button,
        ObjType::Textfield,
        ObjType::PasswordField,
        ObjType::Listbox,
        ObjType::Combobox,
        ObjType::Checkbox,
        ObjType::Label,
        ObjType::Link,
    ])
}

fn attributes() -> impl Strategy<Value = Attributes> {
    (
        prop::option::of("[A-Za-z]{1,8}"),
        prop::option::of(obj_type()),
        prop::option::of("[A-Za-z]{1,8}"),
        prop::option::of("\\PC{0,8}"),
        prop::option::of((-50i64..2000, -50i64..2000)),
        prop::option::of((1u32..500, 1u32..500)),
    )
        .prop_map(
            |(name, obj_type, parent_name, text, position, size)| Attributes {
                name,
                obj_type,
                parent_name,
                text,
                position,
                size,
            },
        )
        .prop_filter("non-empty", |a| !a.is_empty())
}

fn object_view() -> impl Strategy<Value = ObjectView> {
    (
        "[A-Za-z]{1,8}",
        obj_type(),
        prop::option::of("[A-Za-z]{1,8}"),
        "\\PC{0,8}",
        (0i64..100, 0i64..100),
    )
        .prop_map(|(name, obj_type, parent_name, text, position)| ObjectView {
            id: name.to_lowercase(),
            name,
            obj_type,
            parent_id: None,
            parent_name,
            text,
            position,
            size: (10, 10),
            required: false,
            options: vec![],
            value: String::new(),
            enabled: true,
            blocked: false,
        })
}

proptest! {
    #[test]
    fn scripts_round_trip(name in token(), steps in prop::collection::vec(step(), 1..12)) {
        let s = TestScript::new(name, steps);
        let text = serialize(&s);
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(serialize(&back), text);
    }

    #[test]
    fn repositories_round_trip(entries in prop::collection::btree_map("[A-Za-z][A-Za-z0-9.]{0,10}", attributes(), 0..8)) {
        let repo = Repository::from_entries(
            "r1".into(),
            entries.into_iter().map(|(k, a)| (k.clone(), ObjectDescriptor::new(k, a))),
        )
        .unwrap();
        let text = repo.to_json();
        let back = load_repository(&text).unwrap();
        prop_assert_eq!(&back, &repo);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn dropping_attributes_keeps_matches(obj in object_view(), drop in prop::collection::vec(any::<bool>(), 6)) {
        let full = Attributes::of_object(&obj, &AttrKey::ALL);
        prop_assert!(full.matches(&obj));
        let keep: Vec<AttrKey> = AttrKey::ALL.iter().zip(&drop).filter(|(_, d)| !**d).map(|(k, _)| *k).collect();
        prop_assume!(!keep.is_empty());
        let sparse = Attributes::of_object(&obj, &keep);
        prop_assert!(sparse.matches(&obj));
    }

    #[test]
    fn exact_resolution_needs_every_attribute(objs in prop::collection::vec(object_view(), 1..6), want in attributes()) {
        let view = adaptest::model::ScreenView {
            screen_id: "s".into(),
            title: "S".into(),
            dimensions: (800, 600),
            loading: false,
            logged_in: false,
            popup: None,
            objects: objs.clone(),
        };
        let d = ObjectDescriptor::new("x", want.clone());
        let hits: Vec<&ObjectView> = objs.iter().filter(|o| want.matches(o)).collect();
        match resolve_exact(&view, &d) {
            Ok(Some(o)) => prop_assert!(hits.len() == 1 && hits[0] == &o),
            Ok(None) => prop_assert!(hits.is_empty()),
            Err(_) => prop_assert!(hits.len() > 1),
        }
    }
}
