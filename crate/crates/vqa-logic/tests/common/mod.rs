//! Shared generators for the integration suites: random coherent scenes and
//! random questions drawn from the compiler's operation grammar.

// Each test binary uses its own subset of these helpers.
#![allow(dead_code)]

use rand::prelude::*;
use vqa_logic::compile::{FunctionalProgram, ProgramNode, QuestionFamily};
use vqa_logic::harness::oracle::oracle_execute;
use vqa_logic::infer::Answer;
use vqa_logic::scene::{ObjectRecord, SceneGraph, SceneRelation};

pub const SIZES: [&str; 2] = ["small", "large"];
pub const COLORS: [&str; 8] = [
    "gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow",
];
pub const MATERIALS: [&str; 2] = ["rubber", "metal"];
pub const SHAPES: [&str; 3] = ["cube", "sphere", "cylinder"];
pub const RELATIONS: [&str; 4] = ["left", "right", "behind", "front"];
pub const ATTR_KINDS: [&str; 4] = ["size", "color", "material", "shape"];

fn vocab(kind: usize) -> &'static [&'static str] {
    match kind {
        0 => &SIZES,
        1 => &COLORS,
        2 => &MATERIALS,
        _ => &SHAPES,
    }
}

/// Attribute tuples plus virtual coordinates; the four spatial relations are
/// derived from the coordinates, so they are always mutually consistent.
#[derive(Clone, Debug)]
pub struct SceneSpec {
    /// Per object: size, color, material, shape.
    pub attrs: Vec<[String; 4]>,
    pub xs: Vec<i64>,
    pub ys: Vec<i64>,
}

impl SceneSpec {
    pub fn random(rng: &mut impl Rng, objects: usize) -> Self {
        let attrs = (0..objects).map(|_| random_attrs(rng)).collect();
        let mut xs: Vec<i64> = (0..objects as i64).collect();
        let mut ys: Vec<i64> = (0..objects as i64).collect();
        xs.shuffle(rng);
        ys.shuffle(rng);
        SceneSpec { attrs, xs, ys }
    }

    /// Append one object with fresh coordinates; every existing relation pair
    /// is untouched, so the new fact base strictly extends the old one.
    pub fn push_random_object(&mut self, rng: &mut impl Rng) {
        self.attrs.push(random_attrs(rng));
        self.xs.push(self.xs.len() as i64);
        self.ys.push(self.ys.len() as i64);
    }

    pub fn build(&self) -> SceneGraph {
        let objects = self
            .attrs
            .iter()
            .enumerate()
            .map(|(id, [size, color, material, shape])| ObjectRecord {
                id,
                attributes: [
                    ("size", size),
                    ("color", color),
                    ("material", material),
                    ("shape", shape),
                ]
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            })
            .collect();

        let mut relations = Vec::new();
        let n = self.attrs.len();
        for subject in 0..n {
            for object in 0..n {
                if subject == object {
                    continue;
                }
                let mut relate = |name: &str| {
                    relations.push(SceneRelation {
                        subject,
                        object,
                        name: name.to_string(),
                    })
                };
                if self.xs[subject] < self.xs[object] {
                    relate("left");
                }
                if self.xs[subject] > self.xs[object] {
                    relate("right");
                }
                if self.ys[subject] > self.ys[object] {
                    relate("behind");
                }
                if self.ys[subject] < self.ys[object] {
                    relate("front");
                }
            }
        }
        SceneGraph { objects, relations }
    }
}

fn random_attrs(rng: &mut impl Rng) -> [String; 4] {
    [
        SIZES.choose(rng).unwrap().to_string(),
        COLORS.choose(rng).unwrap().to_string(),
        MATERIALS.choose(rng).unwrap().to_string(),
        SHAPES.choose(rng).unwrap().to_string(),
    ]
}

struct ProgramBuilder<'a, R: Rng> {
    rng: &'a mut R,
    /// When present, filter values are drawn mostly from this scene's actual
    /// attribute values, which keeps `unique` nodes satisfiable often enough
    /// for rejection sampling.
    bias: Option<&'a SceneGraph>,
    nodes: Vec<ProgramNode>,
}

impl<R: Rng> ProgramBuilder<'_, R> {
    fn push(&mut self, function: &str, inputs: Vec<usize>, values: Vec<String>) -> usize {
        self.nodes.push(ProgramNode {
            function: function.to_string(),
            inputs,
            value_inputs: values,
        });
        self.nodes.len() - 1
    }

    fn attr_value(&mut self, kind: usize) -> String {
        if let Some(scene) = self.bias {
            if !scene.objects.is_empty() && self.rng.gen_bool(0.85) {
                let object = scene.objects.choose(self.rng).expect("scene is non-empty");
                if let Some(value) = object.attributes.get(ATTR_KINDS[kind]) {
                    return value.clone();
                }
            }
        }
        vocab(kind).choose(self.rng).unwrap().to_string()
    }

    fn filter_chain(&mut self) -> usize {
        let mut node = self.push("scene", vec![], vec![]);
        for _ in 0..self.rng.gen_range(0..=2) {
            let kind = self.rng.gen_range(0..4);
            let value = self.attr_value(kind);
            node = self.push(
                &format!("filter_{}", ATTR_KINDS[kind]),
                vec![node],
                vec![value],
            );
        }
        node
    }

    fn object_set(&mut self, depth: u32) -> usize {
        let roll = if depth == 0 {
            0
        } else {
            self.rng.gen_range(0..100)
        };
        match roll {
            0..=54 => self.filter_chain(),
            55..=69 => {
                let anchor = self.unique_object(depth - 1);
                let relation = RELATIONS.choose(self.rng).unwrap().to_string();
                self.push("relate", vec![anchor], vec![relation])
            }
            70..=79 => {
                let anchor = self.unique_object(depth - 1);
                let kind = ATTR_KINDS[self.rng.gen_range(0..4)];
                self.push(&format!("same_{kind}"), vec![anchor], vec![])
            }
            80..=89 => {
                let left = self.object_set(depth - 1);
                let right = self.object_set(depth - 1);
                self.push("union", vec![left, right], vec![])
            }
            _ => {
                let left = self.object_set(depth - 1);
                let right = self.object_set(depth - 1);
                self.push("intersect", vec![left, right], vec![])
            }
        }
    }

    fn unique_object(&mut self, depth: u32) -> usize {
        let set = self.object_set(depth);
        self.push("unique", vec![set], vec![])
    }

    fn counted_set(&mut self, depth: u32) -> usize {
        let set = self.object_set(depth);
        self.push("count", vec![set], vec![])
    }
}

/// One random program of the requested family, drawn from the compiler's
/// operation grammar. It is shape-valid by construction; whether `unique`
/// nodes hit singletons on a given scene is up to the oracle.
pub fn random_program(
    rng: &mut impl Rng,
    bias: Option<&SceneGraph>,
    family: QuestionFamily,
) -> FunctionalProgram {
    let mut builder = ProgramBuilder {
        rng,
        bias,
        nodes: Vec::new(),
    };
    match family {
        QuestionFamily::Count => {
            let set = builder.object_set(2);
            builder.push("count", vec![set], vec![]);
        }
        QuestionFamily::Exist => {
            let set = builder.object_set(2);
            builder.push("exist", vec![set], vec![]);
        }
        QuestionFamily::CompareNumber => {
            let left = builder.counted_set(1);
            let right = builder.counted_set(1);
            let op = ["equal_integer", "greater_than", "less_than"]
                .choose(builder.rng)
                .unwrap()
                .to_string();
            builder.push(&op, vec![left, right], vec![]);
        }
        QuestionFamily::CompareAttribute => {
            let left = builder.unique_object(1);
            let right = builder.unique_object(1);
            let kind = ATTR_KINDS[builder.rng.gen_range(0..4)];
            builder.push(&format!("equal_{kind}"), vec![left, right], vec![]);
        }
        QuestionFamily::QueryAttribute => {
            let object = builder.unique_object(1);
            let kind = ATTR_KINDS[builder.rng.gen_range(0..4)];
            builder.push(&format!("query_{kind}"), vec![object], vec![]);
        }
    }
    FunctionalProgram::new(builder.nodes).expect("generated programs are well-formed")
}

/// Rejection-sample a question the oracle can actually answer on `scene`
/// (all `unique` nodes must hit singletons, as the dataset guarantees).
pub fn sample_valid_question(
    rng: &mut impl Rng,
    scene: &SceneGraph,
    family: QuestionFamily,
    attempts: usize,
) -> Option<(FunctionalProgram, Answer)> {
    for _ in 0..attempts {
        let program = random_program(rng, Some(scene), family);
        if let Ok(answer) = oracle_execute(scene, &program) {
            return Some((program, answer));
        }
    }
    None
}

/// A random scene and a valid question of the given family over it.
pub fn scene_and_question(
    rng: &mut impl Rng,
    objects: usize,
    family: QuestionFamily,
) -> (SceneGraph, FunctionalProgram, Answer) {
    loop {
        let scene = SceneSpec::random(rng, objects).build();
        if let Some((program, answer)) = sample_valid_question(rng, &scene, family, 80) {
            return (scene, program, answer);
        }
    }
}

/// Render scenes in the dataset file format (top-level `scenes`, with the
/// per-object `relationships` lists rebuilt from the relation triples).
pub fn scenes_to_json(scenes: &[SceneGraph]) -> serde_json::Value {
    let rendered: Vec<serde_json::Value> = scenes
        .iter()
        .enumerate()
        .map(|(image_index, scene)| {
            let objects: Vec<serde_json::Value> = scene
                .objects
                .iter()
                .map(|o| serde_json::to_value(&o.attributes).unwrap())
                .collect();
            let mut relationships: serde_json::Map<String, serde_json::Value> =
                serde_json::Map::new();
            for name in RELATIONS {
                let mut per_object: Vec<Vec<usize>> = vec![Vec::new(); scene.objects.len()];
                for relation in &scene.relations {
                    if relation.name == name {
                        per_object[relation.object].push(relation.subject);
                    }
                }
                relationships.insert(name.to_string(), serde_json::json!(per_object));
            }
            serde_json::json!({
                "image_index": image_index,
                "objects": objects,
                "relationships": relationships,
            })
        })
        .collect();
    serde_json::json!({ "scenes": rendered })
}

/// Render questions in the dataset file format (top-level `questions`).
pub fn questions_to_json(questions: &[(usize, FunctionalProgram, Answer)]) -> serde_json::Value {
    let rendered: Vec<serde_json::Value> = questions
        .iter()
        .map(|(image_index, program, answer)| {
            serde_json::json!({
                "image_index": image_index,
                "program": program.nodes(),
                "answer": answer.to_string(),
            })
        })
        .collect();
    serde_json::json!({ "questions": rendered })
}
