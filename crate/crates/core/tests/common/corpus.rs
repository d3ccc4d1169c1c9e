//! A clean script corpus built from the crawler, and defect injection.

use adaptest::dsl::{parse_unchecked, IssueKind, Step, TestScript, Verb};
use adaptest::model::{AppModel, ObjType};
use adaptest::repo::Repository;
use adaptest::testgen::{builtin_heuristics, crawl_generate, GenerationConfig};

/// Twenty scripts: every crawled script, and a copy without optional inputs.
pub fn clean_corpus(model: &AppModel) -> (Vec<TestScript>, Repository) {
    let out = crawl_generate(model, &GenerationConfig::default(), &builtin_heuristics());
    let repo = out.repository.clone();
    let mut scripts = Vec::new();
    for s in &out.scripts {
        scripts.push(s.clone());
        let steps: Vec<Step> = s
            .steps
            .iter()
            .filter(|st| {
                !matches!(
                    st.object_ref.as_deref(),
                    Some("AgeField" | "GiftBox" | "CommentBox")
                )
            })
            .cloned()
            .collect();
        let mut lean = TestScript::new(format!("{}-lean", s.name), steps);
        lean.reindex();
        scripts.push(lean);
    }
    (scripts, repo)
}

pub const DEFECTS: [IssueKind; 3] = [
    IssueKind::UnknownObject,
    IssueKind::MissingParameter,
    IssueKind::InvalidVerbForType,
];

/// Reparses the script after damaging one step the way `kind` describes.
pub fn inject(script: &TestScript, kind: IssueKind, repo: &Repository) -> TestScript {
    let mut s = script.clone();
    match kind {
        IssueKind::UnknownObject => {
            let st = s
                .steps
                .iter_mut()
                .find(|st| st.object_ref.is_some())
                .unwrap();
            let name = st.object_ref.as_mut().unwrap();
            // drop one doubled or trailing letter
            let mut chars: Vec<char> = name.chars().collect();
            let at = chars
                .windows(2)
                .position(|w| w[0] == w[1])
                .unwrap_or(chars.len() - 1);
            chars.remove(at);
            *name = chars.into_iter().collect();
            assert!(!repo.contains(name));
        }
        IssueKind::MissingParameter => {
            let st = s
                .steps
                .iter_mut()
                .find(|st| st.verb == Verb::Enter)
                .unwrap();
            st.args.clear();
        }
        IssueKind::InvalidVerbForType => {
            let st = s
                .steps
                .iter_mut()
                .find(|st| {
                    st.verb == Verb::Click
                        && repo
                            .get(st.object_ref.as_deref().unwrap())
                            .unwrap()
                            .attributes
                            .obj_type
                            == Some(ObjType::Button)
                })
                .unwrap();
            st.verb = Verb::Enter;
            st.args = vec!["oops".into()];
        }
        other => panic!("no injector for {other:?}"),
    }
    parse_unchecked(&s.to_text()).unwrap()
}
