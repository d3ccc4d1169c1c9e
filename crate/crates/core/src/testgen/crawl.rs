use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::heuristics::{heuristic_value_of, ValueHeuristic};
use super::GenerationConfig;
use crate::dsl::{Step, TestScript, Verb};
use crate::model::{ActionVerb, AppModel, ObjType, Screen, Transition, UiObject};
use crate::repo::{Attributes, ObjectDescriptor, Repository};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlOutput {
    pub scripts: Vec<TestScript>,
    /// Probes entering invalid values, expected to stay on the same screen.
    pub negative_scripts: Vec<TestScript>,
    /// Descriptors for every object the scripts reference.
    pub repository: Repository,
    pub truncated: bool,
}

/// The identifying descriptor generated suites use: name, type and parent name.
pub fn derive_descriptor(screen: &Screen, obj: &UiObject) -> Attributes {
    Attributes {
        name: Some(obj.name.clone()),
        obj_type: Some(obj.obj_type),
        parent_name: screen.parent_name(obj).map(str::to_string),
        ..Default::default()
    }
}

/// Logical names for every object: the object name, qualified by screen id
/// when the same name identifies differently-described objects.
fn logical_names(model: &AppModel) -> BTreeMap<(String, String), (String, Attributes)> {
    let mut by_name: BTreeMap<&str, Vec<Attributes>> = BTreeMap::new();
    for s in &model.screens {
        for o in &s.objects {
            let d = derive_descriptor(s, o);
            let list = by_name.entry(o.name.as_str()).or_default();
            if !list.contains(&d) {
                list.push(d);
            }
        }
    }
    let mut out = BTreeMap::new();
    for s in &model.screens {
        for o in &s.objects {
            let logical = if by_name[o.name.as_str()].len() == 1 {
                o.name.clone()
            } else {
                format!("{}.{}", s.id, o.name)
            };
            out.insert(
                (s.id.clone(), o.id.clone()),
                (logical, derive_descriptor(s, o)),
            );
        }
    }
    out
}

fn fill_verb(t: ObjType) -> Option<ActionVerb> {
    match t {
        ObjType::Textfield | ObjType::PasswordField => Some(ActionVerb::Enter),
        ObjType::Listbox | ObjType::Combobox => Some(ActionVerb::Select),
        ObjType::Checkbox => Some(ActionVerb::Check),
        _ => None,
    }
}

/// Input objects to fill on a screen: visible, enabled, and not themselves
/// navigation triggers for the verb a fill would use.
fn fillable(screen: &Screen) -> Vec<&UiObject> {
    screen
        .objects
        .iter()
        .filter(|o| o.visible && o.enabled)
        .filter(|o| {
            fill_verb(o.obj_type).is_some_and(|v| {
                !screen
                    .transitions
                    .iter()
                    .any(|t| t.trigger.object == o.id && t.trigger.action == v)
            })
        })
        .collect()
}

struct Builder<'a> {
    model: &'a AppModel,
    heuristics: &'a [ValueHeuristic],
    names: BTreeMap<(String, String), (String, Attributes)>,
    used: BTreeSet<(String, String)>,
}

impl Builder<'_> {
    fn logical(&mut self, screen: &str, obj: &str) -> String {
        let key = (screen.to_string(), obj.to_string());
        self.used.insert(key.clone());
        self.names[&key].0.clone()
    }

    fn fill_step(&mut self, screen: &Screen, o: &UiObject, value: Option<&str>) -> Step {
        let logical = self.logical(&screen.id, &o.id);
        let hv = heuristic_value_of(o, self.heuristics).expect("fillable objects take input");
        let value = value.unwrap_or(&hv.valid);
        let verb = match fill_verb(o.obj_type).expect("fillable") {
            ActionVerb::Enter => Verb::Enter,
            ActionVerb::Select => Verb::Select,
            _ => Verb::Check,
        };
        Step::new(verb, Some(&logical), &[value])
    }

    fn trigger_step(&mut self, screen: &Screen, t: &Transition) -> Step {
        let o = screen.object(&t.trigger.object).expect("validated trigger");
        let logical = self.logical(&screen.id, &o.id);
        let hv = heuristic_value_of(o, self.heuristics);
        let value = hv.map(|h| h.valid).unwrap_or_default();
        match t.trigger.action {
            ActionVerb::Enter => Step::new(Verb::Enter, Some(&logical), &[&value]),
            ActionVerb::Select => Step::new(Verb::Select, Some(&logical), &[&value]),
            ActionVerb::Check => Step::new(Verb::Check, Some(&logical), &["on"]),
            _ => Step::new(Verb::Click, Some(&logical), &[]),
        }
    }

    /// Steps for one path. `overrides` replaces the value of particular
    /// (screen, object) fills; `stop_after` ends the script right after the
    /// trigger on that path position, asserting the screen did not change.
    fn script(
        &mut self,
        name: String,
        path: &[(String, usize)],
        overrides: &BTreeMap<(String, String), String>,
        stop_after: Option<usize>,
    ) -> TestScript {
        let model = self.model;
        let mut steps = vec![Step::new(Verb::Open, None, &[&model.start_screen])];
        let mut screen_id = model.start_screen.clone();
        for pos in 0..=path.len() {
            let screen = model.screen(&screen_id).expect("path screens exist");
            for o in fillable(screen) {
                let ov = overrides
                    .get(&(screen.id.clone(), o.id.clone()))
                    .map(String::as_str);
                steps.push(self.fill_step(screen, o, ov));
            }
            let Some((_, t_idx)) = path.get(pos) else {
                break;
            };
            let t = &screen.transitions[*t_idx];
            steps.push(self.trigger_step(screen, t));
            if stop_after == Some(pos) {
                steps.push(Step::new(Verb::AssertScreen, None, &[&screen.id]));
                return TestScript::new(name, steps);
            }
            screen_id = t.target.clone();
        }
        steps.push(Step::new(Verb::AssertScreen, None, &[&screen_id]));
        TestScript::new(name, steps)
    }
}

/// Maximal simple transition paths from the start screen, breadth-first.
/// Each path element is (source screen, transition index on that screen).
fn enumerate_paths(model: &AppModel, max_depth: usize) -> Vec<Vec<(String, usize)>> {
    let mut out = Vec::new();
    let mut queue = VecDeque::from([(
        model.start_screen.clone(),
        Vec::new(),
        vec![model.start_screen.clone()],
    )]);
    while let Some((screen_id, path, visited)) = queue.pop_front() {
        let screen = model.screen(&screen_id).expect("path screens exist");
        let mut extended = false;
        if path.len() < max_depth {
            for (i, t) in screen.transitions.iter().enumerate() {
                if visited.contains(&t.target) {
                    continue;
                }
                let mut p: Vec<(String, usize)> = path.clone();
                p.push((screen_id.clone(), i));
                let mut v = visited.clone();
                v.push(t.target.clone());
                queue.push_back((t.target.clone(), p, v));
                extended = true;
            }
        }
        if !extended {
            out.push(path);
        }
    }
    out
}

/// Generates one script per maximal transition path (plus one per extra
/// select option), filling every input with heuristic values and asserting
/// the final screen.
pub fn crawl_generate(
    model: &AppModel,
    config: &GenerationConfig,
    heuristics: &[ValueHeuristic],
) -> CrawlOutput {
    let mut b = Builder {
        model,
        heuristics,
        names: logical_names(model),
        used: BTreeSet::new(),
    };
    let mut scripts = Vec::new();
    let mut negative_scripts = Vec::new();
    let mut truncated = false;
    let mut probed = BTreeSet::new();

    'paths: for (p_no, path) in enumerate_paths(model, config.max_depth).iter().enumerate() {
        let base = format!("crawl-{:03}", p_no + 1);
        // screens along the path, in order
        let mut screens = vec![model.start_screen.clone()];
        for (s, t) in path {
            screens.push(
                model.screen(s).expect("exists").transitions[*t]
                    .target
                    .clone(),
            );
        }

        let mut variants = vec![(base.clone(), BTreeMap::new())];
        for s_id in &screens {
            let screen = model.screen(s_id).expect("exists");
            for o in fillable(screen)
                .into_iter()
                .filter(|o| o.obj_type.has_options())
            {
                for opt in o.options.iter().take(config.options_per_select).skip(1) {
                    let ov = BTreeMap::from([((s_id.clone(), o.id.clone()), opt.clone())]);
                    variants.push((format!("{base}-{}-{}", o.name, slug(opt)), ov));
                }
            }
        }
        for (name, ov) in variants {
            if scripts.len() == config.max_scripts {
                truncated = true;
                break 'paths;
            }
            scripts.push(b.script(name, path, &ov, None));
        }

        for (pos, s_id) in screens.iter().enumerate().take(path.len()) {
            let screen = model.screen(s_id).expect("exists");
            for o in fillable(screen) {
                let Some(probe) = heuristic_value_of(o, heuristics).and_then(|h| h.invalid_probe)
                else {
                    continue;
                };
                if !probed.insert((s_id.clone(), o.id.clone())) {
                    continue;
                }
                let ov = BTreeMap::from([((s_id.clone(), o.id.clone()), probe)]);
                let name = format!("{base}-negative-{}", o.name);
                negative_scripts.push(b.script(name, path, &ov, Some(pos)));
            }
        }
    }

    let mut repository = Repository::new("1");
    for key in &b.used {
        let (logical, attrs) = &b.names[key];
        repository
            .insert(ObjectDescriptor::new(logical.clone(), attrs.clone()))
            .expect("derived descriptors are non-empty");
    }
    CrawlOutput {
        scripts,
        negative_scripts,
        repository,
        truncated,
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_model;
    use crate::testgen::builtin_heuristics;

    const SHOP: &str = r#"{
        "version": "v1", "start_screen": "product",
        "screens": [
          {"id": "product", "title": "Product", "dimensions": [800, 600], "objects": [
             {"id": "size", "name": "SizeBox", "obj_type": "listbox", "position": [10, 10], "size": [100, 20], "options": ["Small", "Medium", "Large"]},
             {"id": "add", "name": "AddToCart", "obj_type": "button", "position": [10, 50], "size": [100, 20]}],
           "transitions": [{"trigger": {"object": "add", "action": "click"}, "target": "cart", "guards": ["size"]}]},
          {"id": "cart", "title": "Cart", "dimensions": [800, 600], "objects": [
             {"id": "email", "name": "EmailField", "obj_type": "textfield", "position": [10, 10], "size": [100, 20]}]}
        ]
    }"#;

    #[test]
    fn one_script_per_option() {
        let m = load_model(SHOP).unwrap();
        let out = crawl_generate(&m, &GenerationConfig::default(), &builtin_heuristics());
        assert_eq!(out.scripts.len(), 3);
        assert!(!out.truncated);
        let select_args: Vec<&str> = out
            .scripts
            .iter()
            .map(|s| {
                s.steps
                    .iter()
                    .find(|st| st.verb == Verb::Select)
                    .unwrap()
                    .args[0]
                    .as_str()
            })
            .collect();
        assert_eq!(select_args, ["Small", "Medium", "Large"]);
        // scripts differ only in the select step
        let strip = |s: &TestScript| {
            s.steps
                .iter()
                .filter(|st| st.verb != Verb::Select)
                .cloned()
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&out.scripts[0]), strip(&out.scripts[2]));
        assert_eq!(out.repository.len(), 3);
        assert_eq!(out.negative_scripts.len(), 0);
    }

    #[test]
    fn truncation_marker() {
        let m = load_model(SHOP).unwrap();
        let cfg = GenerationConfig {
            max_scripts: 1,
            ..Default::default()
        };
        let out = crawl_generate(&m, &cfg, &builtin_heuristics());
        assert_eq!(out.scripts.len(), 1);
        assert!(out.truncated);
    }

    #[test]
    fn no_transitions_exercises_start_screen() {
        let m = load_model(
            r#"{"version": "v1", "start_screen": "s", "screens": [{"id": "s", "title": "S", "dimensions": [10, 10],
               "objects": [{"id": "c", "name": "Comment", "obj_type": "textfield", "position": [0, 0], "size": [5, 5]}]}]}"#,
        )
        .unwrap();
        let out = crawl_generate(&m, &GenerationConfig::default(), &builtin_heuristics());
        assert_eq!(out.scripts.len(), 1);
        assert_eq!(
            out.scripts[0].to_text(),
            "test \"crawl-001\"\nopen \"s\"\nenter \"Comment\" \"test value\"\nassert_screen \"s\"\n"
        );
    }
}
