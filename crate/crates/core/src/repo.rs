//! Object repository: logical object names used by scripts, mapped to the
//! attribute sets that identify concrete UI objects.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::model::{bump_version, ObjType, ObjectView, ScreenView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKey {
    Name,
    ObjType,
    ParentName,
    Text,
    Position,
    Size,
}

impl AttrKey {
    pub const ALL: [AttrKey; 6] = [
        AttrKey::Name,
        AttrKey::ObjType,
        AttrKey::ParentName,
        AttrKey::Text,
        AttrKey::Position,
        AttrKey::Size,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttrKey::Name => "name",
            AttrKey::ObjType => "obj_type",
            AttrKey::ParentName => "parent_name",
            AttrKey::Text => "text",
            AttrKey::Position => "position",
            AttrKey::Size => "size",
        }
    }
}

impl fmt::Display for AttrKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Expected attribute values; `None` fields are unspecified.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obj_type: Option<ObjType>,
    /// Name (not id) of the parent object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<(i64, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<(u32, u32)>,
}

impl Attributes {
    pub fn keys(&self) -> Vec<AttrKey> {
        AttrKey::ALL.into_iter().filter(|k| self.has(*k)).collect()
    }

    pub fn has(&self, key: AttrKey) -> bool {
        match key {
            AttrKey::Name => self.name.is_some(),
            AttrKey::ObjType => self.obj_type.is_some(),
            AttrKey::ParentName => self.parent_name.is_some(),
            AttrKey::Text => self.text.is_some(),
            AttrKey::Position => self.position.is_some(),
            AttrKey::Size => self.size.is_some(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.keys().is_empty()
    }

    /// Every specified attribute equals the object's; unspecified ones match anything.
    pub fn matches(&self, obj: &ObjectView) -> bool {
        self.name.as_ref().is_none_or(|n| n == &obj.name)
            && self.obj_type.is_none_or(|t| t == obj.obj_type)
            && self
                .parent_name
                .as_ref()
                .is_none_or(|p| obj.parent_name.as_ref() == Some(p))
            && self.text.as_ref().is_none_or(|t| t == &obj.text)
            && self.position.is_none_or(|p| p == obj.position)
            && self.size.is_none_or(|s| s == obj.size)
    }

    /// Fields set in `patch` replace the corresponding fields here.
    pub fn overlay(&self, patch: &Attributes) -> Attributes {
        Attributes {
            name: patch.name.clone().or_else(|| self.name.clone()),
            obj_type: patch.obj_type.or(self.obj_type),
            parent_name: patch
                .parent_name
                .clone()
                .or_else(|| self.parent_name.clone()),
            text: patch.text.clone().or_else(|| self.text.clone()),
            position: patch.position.or(self.position),
            size: patch.size.or(self.size),
        }
    }

    /// The object's actual values for the given keys.
    pub fn of_object(obj: &ObjectView, keys: &[AttrKey]) -> Attributes {
        let mut a = Attributes::default();
        for k in keys {
            match k {
                AttrKey::Name => a.name = Some(obj.name.clone()),
                AttrKey::ObjType => a.obj_type = Some(obj.obj_type),
                AttrKey::ParentName => a.parent_name = obj.parent_name.clone(),
                AttrKey::Text => a.text = Some(obj.text.clone()),
                AttrKey::Position => a.position = Some(obj.position),
                AttrKey::Size => a.size = Some(obj.size),
            }
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectDescriptor {
    #[serde(skip)]
    pub logical_name: String,
    pub attributes: Attributes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<AttrKey, f64>>,
}

impl ObjectDescriptor {
    pub fn new(logical_name: impl Into<String>, attributes: Attributes) -> Self {
        ObjectDescriptor {
            logical_name: logical_name.into(),
            attributes,
            weights: None,
        }
    }

    fn check(&self) -> Result<(), RepoError> {
        if self.logical_name.is_empty() {
            return Err(RepoError::EmptyName);
        }
        if self.attributes.is_empty() {
            return Err(RepoError::EmptyAttributes(self.logical_name.clone()));
        }
        for (k, w) in self.weights.iter().flatten() {
            if !self.attributes.has(*k) {
                return Err(RepoError::WeightWithoutAttribute {
                    logical_name: self.logical_name.clone(),
                    key: *k,
                });
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(RepoError::BadWeight {
                    logical_name: self.logical_name.clone(),
                    key: *k,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RepoError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate logical name `{0}`")]
    DuplicateName(String),
    #[error("logical names must be non-empty")]
    EmptyName,
    #[error("`{0}` has an empty attribute set")]
    EmptyAttributes(String),
    #[error("`{logical_name}` weights attribute `{key}` it does not specify")]
    WeightWithoutAttribute { logical_name: String, key: AttrKey },
    #[error("`{logical_name}` has a negative or non-finite weight for `{key}`")]
    BadWeight { logical_name: String, key: AttrKey },
    #[error("unknown logical name `{0}`")]
    UnknownName(String),
    #[error("`{logical_name}` matches {} objects exactly: {}", candidates.len(), candidates.join(", "))]
    Ambiguous {
        logical_name: String,
        candidates: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repository {
    pub version: String,
    entries: BTreeMap<String, ObjectDescriptor>,
}

/// Map entries in document order, duplicates kept so they can be reported.
struct EntryList(Vec<(String, ObjectDescriptor)>);

impl<'de> Deserialize<'de> for EntryList {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntryVisitor;
        impl<'de> Visitor<'de> for EntryVisitor {
            type Value = EntryList;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of logical names to descriptors")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<EntryList, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, ObjectDescriptor>()? {
                    out.push((k, v));
                }
                Ok(EntryList(out))
            }
        }
        deserializer.deserialize_map(EntryVisitor)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RepoFile {
    version: String,
    objects: EntryList,
}

#[derive(Serialize)]
struct RepoFileOut<'a> {
    version: &'a str,
    objects: &'a BTreeMap<String, ObjectDescriptor>,
}

pub fn load_repository(document: &str) -> Result<Repository, RepoError> {
    let file: RepoFile = serde_json::from_str(document).map_err(|e| RepoError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Repository::from_entries(file.version, file.objects.0)
}

impl Repository {
    pub fn new(version: impl Into<String>) -> Self {
        Repository {
            version: version.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        version: String,
        entries: impl IntoIterator<Item = (String, ObjectDescriptor)>,
    ) -> Result<Repository, RepoError> {
        let mut repo = Repository::new(version);
        for (name, mut d) in entries {
            d.logical_name = name.clone();
            d.check()?;
            if repo.entries.insert(name.clone(), d).is_some() {
                return Err(RepoError::DuplicateName(name));
            }
        }
        Ok(repo)
    }

    pub fn get(&self, logical_name: &str) -> Option<&ObjectDescriptor> {
        self.entries.get(logical_name)
    }

    pub fn contains(&self, logical_name: &str) -> bool {
        self.entries.contains_key(logical_name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObjectDescriptor> {
        self.entries.values()
    }

    /// Inserts or replaces an entry without touching the version.
    pub fn insert(&mut self, descriptor: ObjectDescriptor) -> Result<(), RepoError> {
        descriptor.check()?;
        self.entries
            .insert(descriptor.logical_name.clone(), descriptor);
        Ok(())
    }

    pub fn remove(&mut self, logical_name: &str) -> Option<ObjectDescriptor> {
        self.entries.remove(logical_name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&RepoFileOut {
            version: &self.version,
            objects: &self.entries,
        })
        .expect("repository serializes");
        s.push('\n');
        s
    }
}

impl Serialize for Repository {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: serde_json::Value =
            serde_json::from_str(&self.to_json()).map_err(serde::ser::Error::custom)?;
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Repository {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        load_repository(&v.to_string()).map_err(serde::de::Error::custom)
    }
}

/// Strict identification: the unique visible object matching every specified
/// attribute exactly.
pub fn resolve_exact(
    view: &ScreenView,
    descriptor: &ObjectDescriptor,
) -> Result<Option<ObjectView>, RepoError> {
    let hits: Vec<&ObjectView> = view
        .objects
        .iter()
        .filter(|o| descriptor.attributes.matches(o))
        .collect();
    match hits.as_slice() {
        [] => Ok(None),
        [one] => Ok(Some((*one).clone())),
        many => Err(RepoError::Ambiguous {
            logical_name: descriptor.logical_name.clone(),
            candidates: many.iter().map(|o| o.id.clone()).collect(),
        }),
    }
}

/// Returns a copy with `new_attributes` overlaid on the entry and a bumped version.
pub fn apply_repo_patch(
    repo: &Repository,
    logical_name: &str,
    new_attributes: &Attributes,
) -> Result<Repository, RepoError> {
    let mut out = repo.clone();
    let entry = out
        .entries
        .get_mut(logical_name)
        .ok_or_else(|| RepoError::UnknownName(logical_name.to_string()))?;
    entry.attributes = entry.attributes.overlay(new_attributes);
    out.version = bump_version(&repo.version);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_model, start_session, AppModel};
    use std::sync::Arc;

    fn view() -> ScreenView {
        let m: AppModel = load_model(
            r#"{"version": "v1", "start_screen": "s", "screens": [{"id": "s", "title": "S", "dimensions": [800, 600],
            "objects": [
              {"id": "p", "name": "Form", "obj_type": "label", "position": [0, 0], "size": [800, 600]},
              {"id": "submit", "name": "submit", "obj_type": "button", "parent_id": "p", "text": "Submit", "position": [10, 10], "size": [80, 20]},
              {"id": "b1", "name": "dup", "obj_type": "button", "position": [10, 40], "size": [80, 20]},
              {"id": "b2", "name": "dup", "obj_type": "button", "position": [10, 40], "size": [80, 20]}
            ]}]}"#,
        )
        .unwrap();
        start_session(Arc::new(m), 0).observe()
    }

    fn descriptor(name: &str, t: Option<ObjType>) -> ObjectDescriptor {
        ObjectDescriptor::new(
            "X",
            Attributes {
                name: Some(name.into()),
                obj_type: t,
                ..Default::default()
            },
        )
    }

    #[test]
    fn loads_single_entry() {
        let r = load_repository(
            r#"{"version": "1", "objects": {"OKButton": {"attributes": {"name": "ok", "obj_type": "button"}}}}"#,
        )
        .unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.get("OKButton").unwrap().logical_name, "OKButton");
    }

    #[test]
    fn duplicate_names_rejected() {
        let doc = r#"{"version": "1", "objects": {
            "OKButton": {"attributes": {"name": "ok"}},
            "OKButton": {"attributes": {"name": "ok2"}}}}"#;
        assert_eq!(
            load_repository(doc),
            Err(RepoError::DuplicateName("OKButton".into()))
        );
    }

    #[test]
    fn empty_attributes_and_stray_weights_rejected() {
        let doc = r#"{"version": "1", "objects": {"A": {"attributes": {}}}}"#;
        assert!(matches!(
            load_repository(doc),
            Err(RepoError::EmptyAttributes(_))
        ));
        let doc = r#"{"version": "1", "objects": {"A": {"attributes": {"name": "a"}, "weights": {"text": 1.0}}}}"#;
        assert!(matches!(
            load_repository(doc),
            Err(RepoError::WeightWithoutAttribute { .. })
        ));
    }

    #[test]
    fn exact_resolution() {
        let v = view();
        let d = descriptor("submit", Some(ObjType::Button));
        assert_eq!(resolve_exact(&v, &d).unwrap().unwrap().id, "submit");
        let parent = ObjectDescriptor::new(
            "X",
            Attributes {
                parent_name: Some("Form".into()),
                ..Default::default()
            },
        );
        assert_eq!(resolve_exact(&v, &parent).unwrap().unwrap().id, "submit");
        assert_eq!(
            resolve_exact(&v, &descriptor("Submit", None)).unwrap(),
            None
        );
        assert!(matches!(
            resolve_exact(&v, &descriptor("dup", None)),
            Err(RepoError::Ambiguous { .. })
        ));
    }

    #[test]
    fn patching() {
        let r = load_repository(
            r#"{"version": "3", "objects": {"CitiesDropDown": {"attributes": {"name": "CitiesDropDown", "obj_type": "listbox"}}}}"#,
        )
        .unwrap();
        let patch = Attributes {
            name: Some("CitiesList".into()),
            ..Default::default()
        };
        let p = apply_repo_patch(&r, "CitiesDropDown", &patch).unwrap();
        let entry = p.get("CitiesDropDown").unwrap();
        assert_eq!(entry.attributes.name.as_deref(), Some("CitiesList"));
        assert_eq!(entry.attributes.obj_type, Some(ObjType::Listbox));
        assert_eq!(p.version, "4");
        assert_eq!(
            r.get("CitiesDropDown").unwrap().attributes.name.as_deref(),
            Some("CitiesDropDown")
        );

        assert_eq!(
            apply_repo_patch(&r, "Nope", &patch),
            Err(RepoError::UnknownName("Nope".into()))
        );
        let same = apply_repo_patch(&r, "CitiesDropDown", &Attributes::default()).unwrap();
        assert_eq!(same.get("CitiesDropDown"), r.get("CitiesDropDown"));
        assert_eq!(same.version, "4");
    }

    #[test]
    fn json_round_trip() {
        let mut r = Repository::new("1");
        let mut d = descriptor("a", Some(ObjType::Listbox));
        d.weights = Some(BTreeMap::from([(AttrKey::Name, 2.0)]));
        r.insert(d).unwrap();
        let text = r.to_json();
        let back = load_repository(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), text);
    }
}
