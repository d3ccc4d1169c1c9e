#![allow(dead_code)]

pub mod corpus;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use adaptest::dsl::TestScript;
use adaptest::engine::load_suite;
use adaptest::engine::{execute_suite, EngineConfig, RunReport, FIXED_TIMESTAMP};
use adaptest::maintainer::{
    apply_patches, diff_models, propose_patches, DiffConfig, PatchApplication, ProposalContext,
    ScriptPatch,
};
use adaptest::model::{load_model, AppModel};
use adaptest::recovery::KnowledgeBase;
use adaptest::repo::{load_repository, Repository};
use adaptest::testgen::{builtin_heuristics, InteractionLogRecord};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn model(name: &str) -> AppModel {
    load_model(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

pub fn shared(name: &str) -> Arc<AppModel> {
    Arc::new(model(name))
}

pub fn repo(name: &str) -> Repository {
    load_repository(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

pub fn suite(dir: &str) -> Vec<TestScript> {
    load_suite(&fixture(dir))
        .unwrap()
        .into_iter()
        .map(|f| f.script)
        .collect()
}

/// diff, propose, accept everything, then run the patched suite on `new`.
pub fn maintain(
    old: &AppModel,
    new: &AppModel,
    scripts: &[TestScript],
    repo: &Repository,
) -> (Vec<ScriptPatch>, PatchApplication, RunReport) {
    let diff = diff_models(old, new, &DiffConfig::default());
    let heuristics = builtin_heuristics();
    let ctx = ProposalContext {
        old,
        new,
        scripts,
        repo,
        heuristics: &heuristics,
    };
    let patches = propose_patches(&diff, &ctx);
    let keys: BTreeSet<String> = patches.iter().map(|p| p.key.clone()).collect();
    let applied = apply_patches(&patches, &keys, scripts, repo, new).expect("patches apply");
    let report = execute_suite(
        "maintained",
        &applied.scripts,
        new,
        &applied.repo,
        &EngineConfig::default(),
        &KnowledgeBase::builtin(),
        0,
        FIXED_TIMESTAMP.into(),
    );
    (patches, applied, report)
}

/// (screen, object name) of every enabled, visible input on a reachable screen.
pub fn reachable_inputs(model: &AppModel) -> BTreeSet<(String, String)> {
    let reachable = model.reachable_screens();
    model
        .screens
        .iter()
        .filter(|s| reachable.contains(&s.id))
        .flat_map(|s| {
            s.objects
                .iter()
                .filter(|o| o.obj_type.is_input() && o.enabled && o.visible)
                .map(|o| (s.id.clone(), o.name.clone()))
        })
        .collect()
}

type Path3 = &'static [(&'static str, &'static str, &'static str)];

/// The dominant login path.
pub const DOMINANT: Path3 = &[
    ("login", "", "open"),
    ("login", "UsernameField", "enter"),
    ("login", "PasswordField", "enter"),
    ("login", "SignInButton", "click"),
    ("home", "AccountLink", "click"),
];

const OTHERS: [Path3; 3] = [
    &[
        ("login", "", "open"),
        ("login", "UsernameField", "enter"),
        ("login", "SignInButton", "click"),
    ],
    &[
        ("login", "", "open"),
        ("login", "UsernameField", "enter"),
        ("login", "PasswordField", "enter"),
        ("login", "SignInButton", "click"),
        ("home", "ReportsLink", "click"),
    ],
    &[("login", "", "open"), ("login", "PasswordField", "enter")],
];

/// Ten sessions, seven following [`DOMINANT`], three on distinct other
/// paths, in shuffled record order.
pub fn dominant_log(seed: u64) -> Vec<InteractionLogRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths: Vec<Path3> = vec![DOMINANT; 7];
    paths.extend(OTHERS);
    paths.shuffle(&mut rng);
    let mut out = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        for (seq, (screen, object, action)) in path.iter().enumerate() {
            let value = (*action == "enter").then(|| format!("v{}", rng.gen_range(0..1000)));
            out.push(InteractionLogRecord {
                session_id: format!("s{i:02}"),
                seq: seq as u64,
                screen: screen.to_string(),
                object: object.to_string(),
                action: action.to_string(),
                value,
            });
        }
    }
    out.shuffle(&mut rng);
    out
}
