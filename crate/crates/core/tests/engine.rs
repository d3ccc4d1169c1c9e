mod common;

use adaptest::dsl::parse;
use adaptest::engine::{
    execute_suite, exit_code, render_report, review, EngineConfig, LegacyMode, ReportError,
    ReportFormat, ReviewError, RunReport, ScriptStatus, StepStatus, FIXED_TIMESTAMP,
};
use adaptest::model::{apply_mutation, AppModel, MutationOp};
use adaptest::recovery::{Decision, EventDecision, KnowledgeBase, RecoveryDetail, Strategy};
use adaptest::repo::Repository;

fn run(
    scripts: &[adaptest::dsl::TestScript],
    model: &AppModel,
    repo: &Repository,
    config: &EngineConfig,
    kb: &KnowledgeBase,
) -> RunReport {
    execute_suite(
        "suite",
        scripts,
        model,
        repo,
        config,
        kb,
        7,
        FIXED_TIMESTAMP.into(),
    )
}

fn signup_v2() -> RunReport {
    run(
        &common::suite("signup_suite"),
        &common::model("signup_v2.json"),
        &common::repo("signup_repository.json"),
        &EngineConfig::default(),
        &KnowledgeBase::builtin(),
    )
}

fn gift_renamed() -> AppModel {
    let op = MutationOp::RenameObject {
        screen: "home".into(),
        target: "gift".into(),
        new_name: "GiftWrapBox".into(),
        new_id: None,
    };
    apply_mutation(&common::model("store.json"), &op).unwrap()
}

#[test]
fn clean_suite_passes() {
    let r = run(
        &common::suite("signup_suite"),
        &common::model("signup_v1.json"),
        &common::repo("signup_repository.json"),
        &EngineConfig::default(),
        &KnowledgeBase::builtin(),
    );
    assert_eq!((r.summary.scripts.total, r.summary.scripts.passed), (3, 3));
    assert_eq!(r.summary.events, 0);
    assert!(r.pending_keys.is_empty());
    assert_eq!(exit_code(&r), 0);
}

#[test]
fn one_recovered_script_of_four() {
    let r = run(
        &common::suite("store_suite"),
        &gift_renamed(),
        &common::repo("store_repository.json"),
        &EngineConfig::default(),
        &KnowledgeBase::builtin(),
    );
    assert_eq!(r.summary.scripts.total, 4);
    assert_eq!(
        (
            r.summary.scripts.passed,
            r.summary.scripts.recovered,
            r.summary.scripts.failed
        ),
        (3, 1, 0)
    );
    let rec = r
        .scripts
        .iter()
        .find(|s| s.status == ScriptStatus::Recovered)
        .unwrap();
    assert_eq!(rec.script_id, "gift-order");
    assert_eq!(r.pending_keys.len(), 1);
    assert!(r.pending_keys[0].starts_with("gift-order:"));
    assert!(r.pending_keys[0].contains(":fuzzy_rebind:"));
    assert_eq!(exit_code(&r), 3);
}

#[test]
fn report_round_trips_and_renders() {
    let r = signup_v2();
    let json = render_report(&r, ReportFormat::Json).unwrap();
    assert_eq!(RunReport::load(&json).unwrap(), r);
    let text = render_report(&r, ReportFormat::Text).unwrap();
    for k in &r.pending_keys {
        assert!(text.contains(k.as_str()));
    }
    assert!(text.contains("fill_required_field"));

    let mut bad = r.clone();
    bad.summary.steps.passed += 1;
    assert!(matches!(
        render_report(&bad, ReportFormat::Json),
        Err(ReportError::Inconsistent { .. })
    ));
    assert!(RunReport::load("{").is_err());
}

#[test]
fn empty_suite_is_a_pass() {
    let r = run(
        &[],
        &common::model("store.json"),
        &common::repo("store_repository.json"),
        &EngineConfig::default(),
        &KnowledgeBase::builtin(),
    );
    assert_eq!(r.summary.scripts.total, 0);
    assert_eq!(exit_code(&r), 0);
    render_report(&r, ReportFormat::Text).unwrap();
}

#[test]
fn runs_are_reproducible() {
    let a = render_report(&signup_v2(), ReportFormat::Json).unwrap();
    let b = render_report(&signup_v2(), ReportFormat::Json).unwrap();
    assert_eq!(a, b);
    let model = common::model("portal.json");
    let scripts = common::suite("portal_suite");
    let repo = common::repo("portal_repository.json");
    let config = EngineConfig {
        credentials: Some(adaptest::recovery::Credentials {
            username: "alex".into(),
            password: "s3cret".into(),
        }),
        ..EngineConfig::default()
    };
    for seed in 0..10 {
        let x = execute_suite(
            "p",
            &scripts,
            &model,
            &repo,
            &config,
            &KnowledgeBase::builtin(),
            seed,
            FIXED_TIMESTAMP.into(),
        );
        let y = execute_suite(
            "p",
            &scripts,
            &model,
            &repo,
            &config,
            &KnowledgeBase::builtin(),
            seed,
            FIXED_TIMESTAMP.into(),
        );
        assert_eq!(x, y);
    }
}

#[test]
fn legacy_run_has_no_events() {
    for legacy_mode in [LegacyMode::Abort, LegacyMode::Continue] {
        let config = EngineConfig {
            adaptive: false,
            legacy_mode,
            ..EngineConfig::default()
        };
        let r = run(
            &common::suite("signup_suite"),
            &common::model("signup_v2.json"),
            &common::repo("signup_repository.json"),
            &config,
            &KnowledgeBase::builtin(),
        );
        assert_eq!(r.summary.events, 0);
        assert_eq!(r.summary.scripts.failed, 3);
        assert_eq!(exit_code(&r), 1);
        let skipped = r.summary.steps.skipped;
        match legacy_mode {
            LegacyMode::Abort => assert!(skipped > 0),
            LegacyMode::Continue => assert_eq!(skipped, 0),
        }
    }
}

#[test]
fn blocked_scripts_do_not_run() {
    let script = parse("test \"typo\"\nopen \"signup\"\nclick \"SubmitButon\"\n").unwrap();
    let model = common::model("signup_v1.json");
    let repo = common::repo("signup_repository.json");
    let r = run(
        std::slice::from_ref(&script),
        &model,
        &repo,
        &EngineConfig::default(),
        &KnowledgeBase::builtin(),
    );
    assert_eq!(r.scripts[0].status, ScriptStatus::Failed);
    assert!(!r.scripts[0].validation.is_empty());
    assert_eq!(r.summary.events, 0);

    let config = EngineConfig {
        validate_before_run: false,
        ..EngineConfig::default()
    };
    let r = run(&[script], &model, &repo, &config, &KnowledgeBase::builtin());
    assert_eq!(r.scripts[0].steps[0].status, StepStatus::Passed);
    assert_eq!(r.scripts[0].steps[1].status, StepStatus::Failed);
}

#[test]
fn accepted_fill_is_remembered() {
    let r = signup_v2();
    assert_eq!(r.pending_keys.len(), 3);
    let decisions: Vec<(String, Decision)> = r
        .pending_keys
        .iter()
        .map(|k| (k.clone(), Decision::Accepted))
        .collect();
    let scripts = common::suite("signup_suite");
    let repo = common::repo("signup_repository.json");
    let out = review(
        &r,
        &decisions,
        &KnowledgeBase::builtin(),
        &repo,
        &scripts,
        None,
    )
    .unwrap();
    assert!(out.patches.is_empty());
    assert!(out.applied.is_none());

    let again = run(
        &scripts,
        &common::model("signup_v2.json"),
        &repo,
        &EngineConfig::default(),
        &out.kb,
    );
    assert_eq!(again.summary.scripts.recovered, 3);
    assert!(again.pending_keys.is_empty());
    assert!(again
        .scripts
        .iter()
        .flat_map(|s| s.events())
        .all(|e| e.decision == EventDecision::Accepted));
    assert_eq!(exit_code(&again), 0);
}

#[test]
fn rejected_fill_fails_fast() {
    let r = signup_v2();
    let scripts = common::suite("signup_suite");
    let repo = common::repo("signup_repository.json");
    let decisions = vec![(r.pending_keys[0].clone(), Decision::Rejected)];
    let out = review(
        &r,
        &decisions,
        &KnowledgeBase::builtin(),
        &repo,
        &scripts,
        None,
    )
    .unwrap();
    let again = run(
        &scripts,
        &common::model("signup_v2.json"),
        &repo,
        &EngineConfig::default(),
        &out.kb,
    );
    assert_eq!(again.summary.scripts.failed, 1);
    let ev = again
        .scripts
        .iter()
        .flat_map(|s| s.events())
        .find(|e| e.decision_key == r.pending_keys[0])
        .unwrap();
    assert!(ev.skipped);
    assert_eq!(ev.decision, EventDecision::Rejected);
    assert_eq!(exit_code(&again), 1);
}

#[test]
fn review_without_decisions_changes_nothing() {
    let r = signup_v2();
    let kb = KnowledgeBase::builtin();
    let out = review(
        &r,
        &[],
        &kb,
        &common::repo("signup_repository.json"),
        &common::suite("signup_suite"),
        None,
    )
    .unwrap();
    assert_eq!(out.kb, kb);
    assert!(out.patches.is_empty());
}

#[test]
fn review_rejects_bad_decision_lists() {
    let r = signup_v2();
    let kb = KnowledgeBase::builtin();
    let repo = common::repo("signup_repository.json");
    let scripts = common::suite("signup_suite");
    let unknown = vec![("nope:0:x:0".to_string(), Decision::Accepted)];
    assert!(matches!(
        review(&r, &unknown, &kb, &repo, &scripts, None),
        Err(ReviewError::UnknownKey(_))
    ));
    let k = r.pending_keys[0].clone();
    let conflict = vec![(k.clone(), Decision::Accepted), (k, Decision::Rejected)];
    assert!(matches!(
        review(&r, &conflict, &kb, &repo, &scripts, None),
        Err(ReviewError::Conflict(_))
    ));
}

#[test]
fn accepted_rebind_patches_the_repository() {
    let model = gift_renamed();
    let scripts = common::suite("store_suite");
    let repo = common::repo("store_repository.json");
    let r = run(
        &scripts,
        &model,
        &repo,
        &EngineConfig::default(),
        &KnowledgeBase::builtin(),
    );
    let ev = r
        .scripts
        .iter()
        .flat_map(|s| s.events())
        .find(|e| e.strategy == Strategy::FuzzyRebind)
        .unwrap();
    let RecoveryDetail::FuzzyRebind {
        logical_name,
        candidate,
        ..
    } = &ev.detail
    else {
        panic!()
    };
    assert_eq!(
        (logical_name.as_str(), candidate.as_str()),
        ("GiftBox", "gift")
    );

    let decisions = vec![(ev.decision_key.clone(), Decision::Accepted)];
    let out = review(
        &r,
        &decisions,
        &KnowledgeBase::builtin(),
        &repo,
        &scripts,
        Some(&model),
    )
    .unwrap();
    assert_eq!(out.patches.len(), 1);
    let applied = out.applied.unwrap();
    assert_eq!(
        applied
            .repo
            .get("GiftBox")
            .unwrap()
            .attributes
            .name
            .as_deref(),
        Some("GiftWrapBox")
    );
    assert_ne!(applied.repo.version, repo.version);

    let again = run(
        &applied.scripts,
        &model,
        &applied.repo,
        &EngineConfig::default(),
        &KnowledgeBase::builtin(),
    );
    assert_eq!(again.summary.events, 0);
    assert_eq!(again.summary.scripts.passed, 4);
}
