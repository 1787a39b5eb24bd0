//! Prompt templates for current-action description and subsequent-action
//! inference, and parsing of model completions.

use std::collections::HashMap;

use crate::context::ContextTriple;
use crate::error::{Error, Result};
use crate::vocab::{LabelSet, Vocabulary};

/// Bumped whenever either template asset changes; part of every cache key.
pub const TEMPLATE_VERSION: &str = "v1";

pub const DESCRIPTION_TEMPLATE: &str = include_str!("../assets/templates/current_description.v1.txt");
pub const SUBSEQUENT_TEMPLATE: &str = include_str!("../assets/templates/subsequent_action.v1.txt");

pub const DESCRIPTION_FILL_POINT: &str = "Video Caption: ";
pub const SUBSEQUENT_FILL_POINT: &str = "The person then proceeds to ";

/// Markers at which a completion is cut: few-shot echo continuations.
pub const STOP_MARKERS: [&str; 3] = ["\n\n", "\nSubject:", "\nDescription:"];

/// Placeholder used when a candidate set is empty.
pub const EMPTY_LIST: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptKind {
    CurrentDescription,
    SubsequentAction,
}

impl PromptKind {
    pub fn fill_point(self) -> &'static str {
        match self {
            PromptKind::CurrentDescription => DESCRIPTION_FILL_POINT,
            PromptKind::SubsequentAction => SUBSEQUENT_FILL_POINT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PromptText {
    pub text: String,
    pub kind: PromptKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptionPair {
    pub current: String,
    pub subsequent: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(String),
}

/// A text template with `{name}` slots, substituted in a single pass so that
/// substituted values are never re-scanned for placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    segments: Vec<Segment>,
}

impl Template {
    pub fn parse(source: &str) -> Self {
        let mut segments = Vec::new();
        let mut literal = String::new();
        let mut rest = source;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            let slot = after
                .find('}')
                .map(|close| &after[..close])
                .filter(|name| !name.is_empty() && name.bytes().all(|b| b.is_ascii_lowercase() || b == b'_'));
            literal.push_str(&rest[..open]);
            match slot {
                Some(name) => {
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Slot(name.to_owned()));
                    rest = &after[name.len() + 1..];
                }
                None => {
                    literal.push('{');
                    rest = after;
                }
            }
        }
        literal.push_str(rest);
        if !literal.is_empty() {
            segments.push(Segment::Literal(literal));
        }
        Self { segments }
    }

    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(n) => Some(n.as_str()),
            Segment::Literal(_) => None,
        })
    }

    /// Panics if a slot has no value; templates are fixed at compile time.
    pub fn render(&self, values: &HashMap<&str, &str>) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(l) => out.push_str(l),
                Segment::Slot(n) => out.push_str(values.get(n.as_str()).unwrap_or_else(|| panic!("no value for slot {n}"))),
            }
        }
        out
    }
}

fn join_names(set: &LabelSet, ids: &[usize]) -> String {
    if ids.is_empty() {
        return EMPTY_LIST.to_owned();
    }
    ids.iter().map(|&id| set.name(id).unwrap_or("?")).collect::<Vec<_>>().join(", ")
}

fn single_line(s: &str) -> String {
    s.replace("\r\n", " ").replace(['\n', '\r'], " ")
}

pub fn render_description_prompt(triple: &ContextTriple, vocab: &Vocabulary) -> Result<PromptText> {
    if triple.verbs.is_empty() {
        return Err(Error::EmptyContext("no activity verbs"));
    }
    let activities = join_names(&vocab.activities, &triple.verbs);
    let objects = join_names(&vocab.objects, &triple.objects);
    let interactions = join_names(&vocab.interactions, &triple.interactions);
    let values = HashMap::from([
        ("activities", activities.as_str()),
        ("objects", objects.as_str()),
        ("interactions", interactions.as_str()),
    ]);
    Ok(PromptText { text: Template::parse(DESCRIPTION_TEMPLATE).render(&values), kind: PromptKind::CurrentDescription })
}

pub fn render_subsequent_prompt(current_description: &str) -> Result<PromptText> {
    let description = single_line(current_description);
    if description.trim().is_empty() {
        return Err(Error::EmptyContext("empty current description"));
    }
    let values = HashMap::from([("description", description.as_str())]);
    Ok(PromptText { text: Template::parse(SUBSEQUENT_TEMPLATE).render(&values), kind: PromptKind::SubsequentAction })
}

/// Cut a raw completion at the first stop marker, flatten it to one line and
/// trim it. Subsequent-action completions that echo the lead-in phrase have
/// it removed, leaving only the completing clause.
pub fn parse_generation(raw: &str, kind: PromptKind) -> Result<String> {
    let cut = STOP_MARKERS.iter().filter_map(|m| raw.find(m)).min().unwrap_or(raw.len());
    let mut text = single_line(&raw[..cut]).trim().to_owned();
    if kind == PromptKind::SubsequentAction {
        let lead = SUBSEQUENT_FILL_POINT.trim_end();
        while let Some(rest) = text.strip_prefix(lead) {
            text = rest.trim().to_owned();
        }
    }
    if text.is_empty() {
        return Err(Error::EmptyGeneration);
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_lists(
            ["Holding some food", "Putting something on a table"],
            ["bread", "plate", "table"],
            ["in front of", "holding", "looking at"],
        )
        .unwrap()
    }

    #[test]
    fn templates_end_at_fill_points() {
        let t = ContextTriple { interactions: vec![0], objects: vec![0], verbs: vec![0] };
        let p = render_description_prompt(&t, &vocab()).unwrap();
        assert!(p.text.ends_with("\nVideo Caption: "));
        let s = render_subsequent_prompt("x").unwrap();
        assert!(s.text.ends_with("\nThe person then proceeds to "));
        assert!(s.text.contains("\nDescription: x\n"));
    }

    #[test]
    fn description_lines() {
        let v = vocab();
        let t = ContextTriple { interactions: vec![0, 1, 2], objects: vec![0, 1, 2], verbs: vec![0, 1] };
        let p = render_description_prompt(&t, &v).unwrap().text;
        assert!(p.contains("\nObjects: bread, plate, table\n"));
        assert!(p.contains("\nActivities: Holding some food, Putting something on a table\n"));

        let empty = ContextTriple { interactions: vec![], objects: vec![], verbs: vec![1] };
        let p = render_description_prompt(&empty, &v).unwrap().text;
        assert!(p.contains("\nObjects: none\nInteractions: none\nVideo Caption: "));

        let single = ContextTriple { interactions: vec![1], objects: vec![2], verbs: vec![0] };
        let p = render_description_prompt(&single, &v).unwrap().text;
        let tail: Vec<&str> = p.lines().rev().take(4).collect();
        assert_eq!(tail, ["Video Caption: ", "Interactions: holding", "Objects: table", "Activities: Holding some food"]);
    }

    #[test]
    fn empty_inputs_rejected() {
        let t = ContextTriple { interactions: vec![0], objects: vec![0], verbs: vec![] };
        assert!(matches!(render_description_prompt(&t, &vocab()), Err(Error::EmptyContext(_))));
        assert!(matches!(render_subsequent_prompt(""), Err(Error::EmptyContext(_))));
        assert!(matches!(render_subsequent_prompt(" \n "), Err(Error::EmptyContext(_))));
    }

    #[test]
    fn subsequent_flattens_newlines() {
        let p = render_subsequent_prompt("A man picks up bread.\nHe eats it.").unwrap().text;
        assert!(p.contains("Description: A man picks up bread. He eats it.\n"));
    }

    #[test]
    fn parse_examples() {
        let k = PromptKind::SubsequentAction;
        assert_eq!(parse_generation("make a sandwich.\n\nDescription: ...", k).unwrap(), "make a sandwich.");
        assert_eq!(parse_generation("   hello  ", k).unwrap(), "hello");
        assert_eq!(parse_generation("line1\nline2\n\nSubject: person", PromptKind::CurrentDescription).unwrap(), "line1 line2");
        assert_eq!(parse_generation("The person then proceeds to eat.", k).unwrap(), "eat.");
        assert!(matches!(parse_generation("\n\nSubject: person", k), Err(Error::EmptyGeneration)));
        assert!(matches!(parse_generation("   ", k), Err(Error::EmptyGeneration)));
    }

    #[test]
    fn template_parser_keeps_stray_braces() {
        let t = Template::parse("a {x} {not a slot} {}{y}");
        assert_eq!(t.slots().collect::<Vec<_>>(), ["x", "y"]);
        let out = t.render(&HashMap::from([("x", "{y}"), ("y", "2")]));
        assert_eq!(out, "a {y} {not a slot} {}2");
        assert_eq!(Template::parse(DESCRIPTION_TEMPLATE).slots().collect::<Vec<_>>(), ["activities", "objects", "interactions"]);
        assert_eq!(Template::parse(SUBSEQUENT_TEMPLATE).slots().collect::<Vec<_>>(), ["description"]);
    }

    proptest! {
        #[test]
        fn parse_is_idempotent(raw in "[ a-zA-Z.:\n]{0,60}", sub in any::<bool>()) {
            let kind = if sub { PromptKind::SubsequentAction } else { PromptKind::CurrentDescription };
            if let Ok(once) = parse_generation(&raw, kind) {
                prop_assert_eq!(parse_generation(&once, kind).unwrap(), once);
            }
        }

        #[test]
        fn subsequent_rendering_is_injective(a in "[a-z ,.]{1,20}", b in "[a-z ,.]{1,20}") {
            prop_assume!(a != b && !a.trim().is_empty() && !b.trim().is_empty());
            prop_assert_ne!(render_subsequent_prompt(&a).unwrap(), render_subsequent_prompt(&b).unwrap());
        }

        #[test]
        fn description_rendering_is_injective(
            a in proptest::collection::vec(0usize..3, 0..3),
            b in proptest::collection::vec(0usize..3, 0..3),
        ) {
            let v = vocab();
            let dedup = |mut x: Vec<usize>| { let mut seen = vec![]; x.retain(|i| { let n = !seen.contains(i); seen.push(*i); n }); x };
            let (a, b) = (dedup(a), dedup(b));
            prop_assume!(a != b);
            let ta = ContextTriple { interactions: vec![0], objects: a, verbs: vec![0] };
            let tb = ContextTriple { interactions: vec![0], objects: b, verbs: vec![0] };
            prop_assert_ne!(render_description_prompt(&ta, &v).unwrap(), render_description_prompt(&tb, &v).unwrap());
        }
    }
}
