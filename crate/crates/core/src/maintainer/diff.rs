use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::matcher::{object_similarity, ranking_order, SimilarityConfig};
use crate::model::{AppModel, ObjType, ObjectView, Screen, UiObject};
use crate::repo::{Attributes, ObjectDescriptor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffConfig {
    /// Minimum similarity for pairing objects whose ids differ.
    pub threshold: f64,
    pub similarity: SimilarityConfig,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            threshold: 0.6,
            similarity: SimilarityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub screen: String,
    pub id: String,
    pub name: String,
    pub obj_type: ObjType,
}

impl ObjectSummary {
    fn of(screen: &Screen, o: &UiObject) -> Self {
        ObjectSummary {
            screen: screen.id.clone(),
            id: o.id.clone(),
            name: o.name.clone(),
            obj_type: o.obj_type,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangedAttr {
    Name,
    ObjType,
    Parent,
    Text,
    Position,
    Size,
    Options,
    Required,
    Enabled,
    Visible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchedBy {
    Id,
    Similarity,
}

/// An old object paired with its counterpart in the new version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub old: ObjectSummary,
    pub new: ObjectSummary,
    pub score: f64,
    pub matched_by: MatchedBy,
    pub changed: Vec<ChangedAttr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options_added: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options_removed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiff {
    pub old_version: String,
    pub new_version: String,
    pub renamed: Vec<DiffEntry>,
    /// Paired objects with the same name but other differences.
    pub modified: Vec<DiffEntry>,
    pub deleted: Vec<ObjectSummary>,
    pub added: Vec<ObjectSummary>,
    /// Id-stable objects with no differences.
    pub unchanged: Vec<ObjectSummary>,
}

impl ModelDiff {
    pub fn is_empty(&self) -> bool {
        self.renamed.is_empty()
            && self.modified.is_empty()
            && self.deleted.is_empty()
            && self.added.is_empty()
    }
}

pub(crate) fn object_view(screen: &Screen, o: &UiObject) -> ObjectView {
    ObjectView {
        id: o.id.clone(),
        name: o.name.clone(),
        obj_type: o.obj_type,
        parent_id: o.parent_id.clone(),
        parent_name: screen.parent_name(o).map(str::to_string),
        text: o.text.clone(),
        position: o.position,
        size: o.size,
        required: o.required,
        options: o.options.clone(),
        value: String::new(),
        enabled: o.enabled,
        blocked: false,
    }
}

/// Descriptor naming every attribute of `o`, used to score counterparts.
fn full_descriptor(screen: &Screen, o: &UiObject) -> ObjectDescriptor {
    ObjectDescriptor::new(
        o.id.clone(),
        Attributes {
            name: Some(o.name.clone()),
            obj_type: Some(o.obj_type),
            parent_name: Some(screen.parent_name(o).unwrap_or("").to_string()),
            text: Some(o.text.clone()),
            position: Some(o.position),
            size: Some(o.size),
        },
    )
}

fn changes(os: &Screen, o: &UiObject, ns: &Screen, n: &UiObject) -> Vec<ChangedAttr> {
    let mut c = Vec::new();
    let mut check = |differs: bool, a: ChangedAttr| {
        if differs {
            c.push(a)
        }
    };
    check(o.name != n.name, ChangedAttr::Name);
    check(o.obj_type != n.obj_type, ChangedAttr::ObjType);
    check(os.parent_name(o) != ns.parent_name(n), ChangedAttr::Parent);
    check(o.text != n.text, ChangedAttr::Text);
    check(o.position != n.position, ChangedAttr::Position);
    check(o.size != n.size, ChangedAttr::Size);
    check(o.options != n.options, ChangedAttr::Options);
    check(o.required != n.required, ChangedAttr::Required);
    check(o.enabled != n.enabled, ChangedAttr::Enabled);
    check(o.visible != n.visible, ChangedAttr::Visible);
    c
}

fn entry(
    os: &Screen,
    o: &UiObject,
    ns: &Screen,
    n: &UiObject,
    score: f64,
    matched_by: MatchedBy,
) -> DiffEntry {
    DiffEntry {
        old: ObjectSummary::of(os, o),
        new: ObjectSummary::of(ns, n),
        score,
        matched_by,
        changed: changes(os, o, ns, n),
        options_added: n
            .options
            .iter()
            .filter(|x| !o.options.contains(x))
            .cloned()
            .collect(),
        options_removed: o
            .options
            .iter()
            .filter(|x| !n.options.contains(x))
            .cloned()
            .collect(),
    }
}

/// Classifies every object of both versions. Screens pair by id; within a
/// screen objects pair by id first, then greedily by descending similarity.
pub fn diff_models(old: &AppModel, new: &AppModel, config: &DiffConfig) -> ModelDiff {
    let mut diff = ModelDiff {
        old_version: old.version.clone(),
        new_version: new.version.clone(),
        renamed: vec![],
        modified: vec![],
        deleted: vec![],
        added: vec![],
        unchanged: vec![],
    };
    let place = |diff: &mut ModelDiff, e: DiffEntry| {
        if e.changed.is_empty() {
            diff.unchanged.push(e.new);
        } else if e.changed.contains(&ChangedAttr::Name) {
            diff.renamed.push(e);
        } else {
            diff.modified.push(e);
        }
    };

    for os in &old.screens {
        let Some(ns) = new.screen(&os.id) else {
            diff.deleted
                .extend(os.objects.iter().map(|o| ObjectSummary::of(os, o)));
            continue;
        };
        let mut old_left = Vec::new();
        for o in &os.objects {
            match ns.object(&o.id) {
                Some(n) => {
                    let score = object_similarity(
                        &full_descriptor(os, o),
                        &object_view(ns, n),
                        ns.dimensions,
                        &config.similarity,
                    )
                    .overall;
                    place(&mut diff, entry(os, o, ns, n, score, MatchedBy::Id));
                }
                None => old_left.push(o),
            }
        }
        let new_left: Vec<&UiObject> = ns
            .objects
            .iter()
            .filter(|n| os.object(&n.id).is_none())
            .collect();

        let mut pairs = Vec::new();
        for (i, o) in old_left.iter().enumerate() {
            let desc = full_descriptor(os, o);
            for (j, n) in new_left.iter().enumerate() {
                let r = object_similarity(
                    &desc,
                    &object_view(ns, n),
                    ns.dimensions,
                    &config.similarity,
                );
                if r.overall >= config.threshold {
                    pairs.push((i, j, r));
                }
            }
        }
        pairs.sort_by(|a, b| match ranking_order(&a.2, &b.2) {
            Ordering::Equal => old_left[a.0].id.cmp(&old_left[b.0].id),
            o => o,
        });
        let (mut used_old, mut used_new) = (BTreeSet::new(), BTreeSet::new());
        for (i, j, r) in pairs {
            if used_old.contains(&i) || used_new.contains(&j) {
                continue;
            }
            used_old.insert(i);
            used_new.insert(j);
            place(
                &mut diff,
                entry(
                    os,
                    old_left[i],
                    ns,
                    new_left[j],
                    r.overall,
                    MatchedBy::Similarity,
                ),
            );
        }
        for (i, o) in old_left.iter().enumerate() {
            if !used_old.contains(&i) {
                diff.deleted.push(ObjectSummary::of(os, o));
            }
        }
        for (j, n) in new_left.iter().enumerate() {
            if !used_new.contains(&j) {
                diff.added.push(ObjectSummary::of(ns, n));
            }
        }
    }
    for ns in new.screens.iter().filter(|s| old.screen(&s.id).is_none()) {
        diff.added
            .extend(ns.objects.iter().map(|n| ObjectSummary::of(ns, n)));
    }
    diff
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_mutation, load_model, MutationOp};

    fn model() -> AppModel {
        load_model(
            r#"{"version": "v1", "start_screen": "home", "screens": [{"id": "home", "title": "Home",
            "dimensions": [800, 600], "objects": [
              {"id": "cities", "name": "CitiesDropDown", "obj_type": "listbox", "position": [10, 10], "size": [120, 20], "options": ["Melbourne", "Sydney"]},
              {"id": "go", "name": "GoButton", "obj_type": "button", "text": "Go", "position": [10, 50], "size": [60, 20]}
            ]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn identity_is_empty() {
        let m = model();
        let d = diff_models(&m, &m, &DiffConfig::default());
        assert!(d.is_empty());
        assert_eq!(d.unchanged.len(), 2);
    }

    #[test]
    fn rename_with_new_id_pairs_by_similarity() {
        let m = model();
        let op = MutationOp::RenameObject {
            screen: "home".into(),
            target: "cities".into(),
            new_name: "CitiesList".into(),
            new_id: Some("cities_list".into()),
        };
        let m2 = apply_mutation(&m, &op).unwrap();
        let d = diff_models(&m, &m2, &DiffConfig::default());
        assert_eq!(d.renamed.len(), 1);
        assert_eq!(d.renamed[0].matched_by, MatchedBy::Similarity);
        assert!(d.renamed[0].score >= 0.6);
        assert!(d.deleted.is_empty() && d.added.is_empty());
    }

    #[test]
    fn added_option_is_a_modification() {
        let m = model();
        let op = MutationOp::AddSelectOption {
            screen: "home".into(),
            target: "cities".into(),
            option: "Perth".into(),
        };
        let d = diff_models(
            &m,
            &apply_mutation(&m, &op).unwrap(),
            &DiffConfig::default(),
        );
        assert_eq!(d.modified.len(), 1);
        assert_eq!(d.modified[0].options_added, vec!["Perth".to_string()]);
    }
}
