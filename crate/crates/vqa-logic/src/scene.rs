//! Scene graphs and their conversion into ground background facts.
//!
//! A scene graph lists objects with attribute tables and directed relations
//! between them. Ingestion turns each object into an `object(id)` fact, each
//! attribute into `attribute(id, type, value)`, and each relation triple into
//! `relation(subject, object, name)`, read as "subject stands in the relation
//! to object" (`relation(0, 1, left)`: object 0 is left of object 1).
//!
//! CLEVR scene files use a top-level `scenes` array whose `relationships` map
//! stores, per relation name and per object, the list of objects standing in
//! that relation to it: `j` in `relationships[r][i]` yields `relation(j, i, r)`.
//! A single-scene document of the same shape is accepted as a minimal fixture
//! format. Pixel and 3D coordinate fields are ignored.

use crate::logic::{is_valid_word, unify, Atom, Constant, Predicate, Term};
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// One scene object: its id and an open attribute table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectRecord {
    pub id: usize,
    pub attributes: BTreeMap<String, String>,
}

/// A directed relation triple: `subject` stands in `name` to `object`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SceneRelation {
    pub subject: usize,
    pub object: usize,
    pub name: String,
}

/// The structured form of one scene.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SceneGraph {
    pub objects: Vec<ObjectRecord>,
    pub relations: Vec<SceneRelation>,
}

impl SceneGraph {
    /// Attribute value of an object, if the object and type exist.
    pub fn attribute(&self, id: usize, kind: &str) -> Option<&str> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .and_then(|o| o.attributes.get(kind))
            .map(String::as_str)
    }
}

/// A scene loaded from a dataset file, keyed by its image index.
#[derive(Clone, Debug)]
pub struct SceneEntry {
    pub image_index: usize,
    pub scene: SceneGraph,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum MalformedScene {
    #[error("duplicate object id {0}")]
    DuplicateId(usize),
    #[error("object {object} is missing the `{attr}` attribute")]
    MissingAttribute { object: usize, attr: String },
    #[error("relation `{name}` mentions object {id}, which is not in the scene")]
    RelationOutOfRange { name: String, id: usize },
    #[error("`{0}` is not a lowercase word")]
    InvalidWord(String),
}

/// Errors from reading a scenes document.
#[derive(Debug, Error)]
pub enum SceneFormatError {
    #[error("invalid scenes JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Scene(#[from] MalformedScene),
}

/// The background knowledge for one scene: ground facts over `object/1`,
/// `attribute/3`, and `relation/3`, indexed for pattern lookup.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FactBase {
    universe: BTreeSet<u64>,
    /// id -> attribute type -> value; functional per (id, type).
    attributes: BTreeMap<u64, BTreeMap<String, String>>,
    /// (type, value) -> ids carrying it.
    by_type_value: BTreeMap<(String, String), BTreeSet<u64>>,
    /// (subject, object, name) triples.
    relations: BTreeSet<(u64, u64, String)>,
}

/// `facts_of` was asked about a predicate that is not stored as facts.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("`{0}` is not a stored fact predicate")]
pub struct UnknownPredicate(pub String);

impl FactBase {
    pub fn universe(&self) -> &BTreeSet<u64> {
        &self.universe
    }

    pub fn object_count(&self) -> usize {
        self.universe.len()
    }

    pub fn contains_object(&self, id: u64) -> bool {
        self.universe.contains(&id)
    }

    pub fn attribute_value(&self, id: u64, kind: &str) -> Option<&str> {
        self.attributes
            .get(&id)
            .and_then(|attrs| attrs.get(kind))
            .map(String::as_str)
    }

    /// Ids whose `kind` attribute equals `value`, ascending.
    pub fn objects_with(&self, kind: &str, value: &str) -> impl Iterator<Item = u64> + '_ {
        self.by_type_value
            .get(&(kind.to_string(), value.to_string()))
            .into_iter()
            .flat_map(|ids| ids.iter().copied())
    }

    /// Every stored fact in canonical order: object facts by id, attribute
    /// facts by (id, type), relation facts by (subject, object, name).
    pub fn all_facts(&self) -> Vec<Atom> {
        let mut facts = Vec::new();
        for &id in &self.universe {
            facts.push(Atom::object(Term::int(id)));
        }
        for (&id, attrs) in &self.attributes {
            for (kind, value) in attrs {
                facts.push(Atom::attribute(
                    Term::int(id),
                    Term::word(kind),
                    Term::word(value),
                ));
            }
        }
        for (subject, object, name) in &self.relations {
            facts.push(Atom::relation(
                Term::int(*subject),
                Term::int(*object),
                Term::word(name),
            ));
        }
        facts
    }

    /// The stored facts unifiable with `pattern`, in deterministic id-sorted
    /// order. The pattern's predicate must be `attribute`, `relation`, or
    /// `object`.
    pub fn facts_of(&self, pattern: &Atom) -> Result<Vec<Atom>, UnknownPredicate> {
        let pred = match pattern {
            Atom::App { pred, .. } => *pred,
            Atom::Count { .. } => return Err(UnknownPredicate("count".into())),
        };
        let candidates: Vec<Atom> = match pred {
            Predicate::Object => self
                .universe
                .iter()
                .map(|&id| Atom::object(Term::int(id)))
                .collect(),
            Predicate::Attribute => {
                // Narrow by the id slot when it is ground; unification below
                // settles the rest.
                let ids: Vec<u64> = match pattern.terms().first().and_then(|t| t.as_const()) {
                    Some(Constant::Int(id)) => {
                        self.universe.iter().copied().filter(|i| i == id).collect()
                    }
                    Some(Constant::Word(_)) => Vec::new(),
                    None => self.universe.iter().copied().collect(),
                };
                ids.into_iter()
                    .flat_map(|id| {
                        self.attributes.get(&id).into_iter().flat_map(move |attrs| {
                            attrs.iter().map(move |(kind, value)| {
                                Atom::attribute(Term::int(id), Term::word(kind), Term::word(value))
                            })
                        })
                    })
                    .collect()
            }
            Predicate::Relation => self
                .relations
                .iter()
                .map(|(s, o, n)| Atom::relation(Term::int(*s), Term::int(*o), Term::word(n)))
                .collect(),
            other => return Err(UnknownPredicate(other.to_string())),
        };
        Ok(candidates
            .into_iter()
            .filter(|fact| unify(pattern, fact).is_some())
            .collect())
    }
}

/// Convert a scene graph into its background knowledge.
pub fn ingest_scene(scene: &SceneGraph) -> Result<FactBase, MalformedScene> {
    let mut fb = FactBase::default();
    for object in &scene.objects {
        let id = object.id as u64;
        if !fb.universe.insert(id) {
            return Err(MalformedScene::DuplicateId(object.id));
        }
        for (kind, value) in &object.attributes {
            for word in [kind, value] {
                if !is_valid_word(word) {
                    return Err(MalformedScene::InvalidWord(word.clone()));
                }
            }
            fb.attributes
                .entry(id)
                .or_default()
                .insert(kind.clone(), value.clone());
            fb.by_type_value
                .entry((kind.clone(), value.clone()))
                .or_default()
                .insert(id);
        }
    }
    for relation in &scene.relations {
        if !is_valid_word(&relation.name) {
            return Err(MalformedScene::InvalidWord(relation.name.clone()));
        }
        for id in [relation.subject, relation.object] {
            if !fb.universe.contains(&(id as u64)) {
                return Err(MalformedScene::RelationOutOfRange {
                    name: relation.name.clone(),
                    id,
                });
            }
        }
        fb.relations.insert((
            relation.subject as u64,
            relation.object as u64,
            relation.name.clone(),
        ));
    }
    Ok(fb)
}

// --- dataset JSON ------------------------------------------------------

#[derive(Deserialize)]
struct ScenesFile {
    scenes: Vec<JsonScene>,
}

#[derive(Deserialize)]
struct JsonScene {
    #[serde(default)]
    image_index: Option<usize>,
    objects: Vec<JsonObject>,
    #[serde(default)]
    relationships: BTreeMap<String, Vec<Vec<usize>>>,
}

#[derive(Deserialize)]
struct JsonObject {
    size: Option<String>,
    color: Option<String>,
    material: Option<String>,
    shape: Option<String>,
}

/// Parse a scenes document: either the CLEVR form (top-level `scenes` array)
/// or a single scene of the same shape.
pub fn scenes_from_json(text: &str) -> Result<Vec<SceneEntry>, SceneFormatError> {
    let scenes = match serde_json::from_str::<ScenesFile>(text) {
        Ok(file) => file.scenes,
        Err(_) => vec![serde_json::from_str::<JsonScene>(text)?],
    };
    scenes
        .into_iter()
        .enumerate()
        .map(|(position, scene)| {
            let image_index = scene.image_index.unwrap_or(position);
            Ok(SceneEntry {
                image_index,
                scene: convert_scene(scene)?,
            })
        })
        .collect()
}

fn convert_scene(json: JsonScene) -> Result<SceneGraph, MalformedScene> {
    let mut objects = Vec::with_capacity(json.objects.len());
    for (id, object) in json.objects.into_iter().enumerate() {
        let mut attributes = BTreeMap::new();
        for (kind, value) in [
            ("size", object.size),
            ("color", object.color),
            ("material", object.material),
            ("shape", object.shape),
        ] {
            let value = value.ok_or_else(|| MalformedScene::MissingAttribute {
                object: id,
                attr: kind.to_string(),
            })?;
            attributes.insert(kind.to_string(), value);
        }
        objects.push(ObjectRecord { id, attributes });
    }

    let mut relations = Vec::new();
    for (name, per_object) in json.relationships {
        for (object, subjects) in per_object.into_iter().enumerate() {
            if object >= objects.len() {
                return Err(MalformedScene::RelationOutOfRange { name, id: object });
            }
            for subject in subjects {
                if subject >= objects.len() {
                    return Err(MalformedScene::RelationOutOfRange { name, id: subject });
                }
                relations.push(SceneRelation {
                    subject,
                    object,
                    name: name.clone(),
                });
            }
        }
    }
    Ok(SceneGraph { objects, relations })
}
