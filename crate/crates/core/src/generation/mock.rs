use rand::seq::IndexedRandom;
use rand::Rng;

use super::{GenerationBackend, GenerationRequest};
use crate::error::Result;
use crate::prompt::{PromptKind, EMPTY_LIST};
use crate::util::seeded_rng;

const OPENERS: [&str; 4] = ["A person", "Someone", "The person", "A man"];
const NEXT_ACTIONS: [&str; 6] =
    ["clean up", "walk away", "sit down", "look around the room", "make a sandwich", "leave the room"];

/// Deterministic offline stand-in for a language model. The completion is a
/// function of `(prompt text, seed)` only and reuses the prompt's activity,
/// object and interaction names, so downstream parsing and text embedding
/// see realistically structured sentences.
#[derive(Debug, Clone, Default)]
pub struct MockGenerator;

impl MockGenerator {
    pub fn new() -> Self {
        Self
    }
}

/// The value of the last `key` line in the prompt (the query block).
fn last_field<'a>(prompt: &'a str, key: &str) -> Option<&'a str> {
    prompt.lines().rev().find_map(|l| l.strip_prefix(key)).map(str::trim)
}

fn names(field: Option<&str>) -> Vec<String> {
    match field {
        None | Some("") | Some(EMPTY_LIST) => Vec::new(),
        Some(f) => f.split(", ").map(lower_first).collect(),
    }
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn and_join(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn truncate_tokens(text: String, max_tokens: u32) -> String {
    let max = max_tokens as usize;
    if text.split_whitespace().count() <= max {
        return text;
    }
    text.split_whitespace().take(max).collect::<Vec<_>>().join(" ")
}

impl GenerationBackend for MockGenerator {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, req: &GenerationRequest) -> Result<String> {
        let seed = req.seed.unwrap_or(0);
        let prompt = &req.prompt.text;
        let mut rng = seeded_rng([b"mock-generation".as_slice(), prompt.as_bytes(), &seed.to_le_bytes()]);
        let text = match req.prompt.kind {
            PromptKind::CurrentDescription => {
                let verbs = names(last_field(prompt, "Activities:"));
                let objects = names(last_field(prompt, "Objects:"));
                let interactions = names(last_field(prompt, "Interactions:"));
                let opener = OPENERS.choose(&mut rng).expect("non-empty");
                let mut s = format!(" {opener} is seen {}.", verbs.join(", then "));
                if !objects.is_empty() {
                    s.push_str(&format!(" There is {} nearby", and_join(&objects)));
                    if !interactions.is_empty() {
                        s.push_str(&format!(", and the person is {} it", and_join(&interactions)));
                    }
                    s.push('.');
                }
                if rng.random_bool(0.3) {
                    s.push_str("\n\nSubject: person\nActivities: ");
                }
                s
            }
            PromptKind::SubsequentAction => {
                let description = last_field(prompt, "Description:").unwrap_or("");
                let description = description.trim_end_matches('.');
                let next = NEXT_ACTIONS.choose(&mut rng).expect("non-empty");
                let mut s = format!("{next} after this: {}.", lower_first(description));
                if rng.random_bool(0.3) {
                    s.push_str("\n\nDescription: The person");
                }
                s
            }
        };
        Ok(truncate_tokens(text, req.max_tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::render_subsequent_prompt;

    #[test]
    fn same_prompt_and_seed_same_text() {
        let req = GenerationRequest::new(render_subsequent_prompt("A man is picking up bread.").unwrap()).with_seed(Some(1));
        let g = MockGenerator::new();
        assert_eq!(g.complete(&req).unwrap(), g.complete(&req).unwrap());
        assert!(g.complete(&req).unwrap().contains("a man is picking up bread"));
    }

    #[test]
    fn seed_changes_completion_somewhere() {
        let g = MockGenerator::new();
        let prompt = render_subsequent_prompt("A man is picking up bread.").unwrap();
        let outs: std::collections::HashSet<String> =
            (0..20).map(|s| g.complete(&GenerationRequest::new(prompt.clone()).with_seed(Some(s))).unwrap()).collect();
        assert!(outs.len() > 1);
    }

    #[test]
    fn respects_max_tokens() {
        let mut req = GenerationRequest::new(render_subsequent_prompt("one two three four five six").unwrap());
        req.max_tokens = 3;
        assert_eq!(MockGenerator::new().complete(&req).unwrap().split_whitespace().count(), 3);
    }
}
