//! Closed label vocabularies for activities, objects and interactions.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

const CHARADES_ACTIVITIES: &str = include_str!("../assets/vocab/charades_activities.txt");
const AG_OBJECTS: &str = include_str!("../assets/vocab/ag_objects.txt");
const AG_INTERACTIONS: &str = include_str!("../assets/vocab/ag_interactions.txt");

/// An ordered label set. Ids are positions in the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    kind: &'static str,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new<I, S>(kind: &'static str, names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (id, name) in names.iter().enumerate() {
            if index.insert(name.clone(), id).is_some() {
                return Err(Error::DuplicateLabel { set: kind, label: name.clone() });
            }
        }
        Ok(Self { kind, names, index })
    }

    fn parse(kind: &'static str, text: &str) -> Result<Self> {
        Self::new(kind, label_lines(text))
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    /// Resolve a name, failing with `UnknownLabel` outside the vocabulary.
    pub fn resolve(&self, name: &str) -> Result<usize> {
        self.id(name).ok_or_else(|| Error::UnknownLabel(name.to_owned()))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains_id(&self, id: usize) -> bool {
        id < self.names.len()
    }
}

fn label_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.trim().is_empty())
}

/// The three closed label sets: activities V, objects O and interactions R.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub activities: LabelSet,
    pub objects: LabelSet,
    pub interactions: LabelSet,
}

impl Vocabulary {
    pub fn from_lists<A, O, R>(activities: A, objects: O, interactions: R) -> Result<Self>
    where
        A: IntoIterator,
        A::Item: Into<String>,
        O: IntoIterator,
        O::Item: Into<String>,
        R: IntoIterator,
        R::Item: Into<String>,
    {
        Ok(Self {
            activities: LabelSet::new("activity", activities)?,
            objects: LabelSet::new("object", objects)?,
            interactions: LabelSet::new("interaction", interactions)?,
        })
    }

    /// The bundled Charades activities (157), Action Genome objects (35)
    /// and interactions (25).
    pub fn canonical() -> Self {
        Self {
            activities: LabelSet::parse("activity", CHARADES_ACTIVITIES).expect("bundled vocabulary"),
            objects: LabelSet::parse("object", AG_OBJECTS).expect("bundled vocabulary"),
            interactions: LabelSet::parse("interaction", AG_INTERACTIONS).expect("bundled vocabulary"),
        }
    }

    pub fn num_activities(&self) -> usize {
        self.activities.len()
    }
}

/// Load a vocabulary from three text files, one label per line.
pub fn load_vocabulary(
    activities_path: impl AsRef<Path>,
    objects_path: impl AsRef<Path>,
    interactions_path: impl AsRef<Path>,
) -> Result<Vocabulary> {
    Ok(Vocabulary {
        activities: load_set("activity", activities_path.as_ref())?,
        objects: load_set("object", objects_path.as_ref())?,
        interactions: load_set("interaction", interactions_path.as_ref())?,
    })
}

fn load_set(kind: &'static str, path: &Path) -> Result<LabelSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let set = LabelSet::parse(kind, &text)?;
    if set.is_empty() {
        return Err(Error::EmptyVocabulary(path.to_owned()));
    }
    Ok(set)
}
