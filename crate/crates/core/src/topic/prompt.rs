//! LLM prompt construction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use super::{RunConfig, TextField, TopicError};
use crate::corpus::{Corpus, Study};

/// Opening words of the instruction; the study records follow them.
pub const INSTRUCTION_PREFIX: &str = "Analyze this";

const RESPONSE_FORMAT: &str = r#"Respond with one JSON object inside a ```json fenced code block, shaped like this:
{"topics": [{"label": "short topic label", "description": "one or two sentences", "subtopics": [{"label": "short subtopic label", "description": "one sentence", "study_ids": ["id", "..."]}], "study_ids": ["id", "..."]}]}
Assign every study id to exactly one topic by listing it in that topic's "study_ids". Listing study ids under subtopics is optional. Use the ids exactly as given."#;

#[derive(Serialize)]
struct Record<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    title: Option<&'a str>,
    #[serde(rename = "abstract", skip_serializing_if = "Option::is_none")]
    abstract_text: Option<&'a str>,
}

fn truncate_chars(text: &str, max: usize) -> &str {
    match text.char_indices().nth(max) {
        Some((byte, _)) => &text[..byte],
        None => text,
    }
}

fn serialize_records(studies: &[Study], config: &RunConfig, abstract_cap: Option<usize>) -> String {
    let mut out = String::new();
    for s in studies {
        let record = Record {
            id: &s.id,
            title: config
                .text_fields
                .contains(&TextField::Title)
                .then_some(s.title.as_str()),
            abstract_text: config.text_fields.contains(&TextField::Abstract).then(|| {
                match abstract_cap {
                    Some(cap) => truncate_chars(&s.abstract_text, cap),
                    None => s.abstract_text.as_str(),
                }
            }),
        };
        // Serializing borrowed strings into a String cannot fail.
        out.push_str(&serde_json::to_string(&record).unwrap_or_default());
        out.push('\n');
    }
    out
}

/// Builds the topic-extraction prompt: the instruction with the configured
/// ranges, the study records in its `dataset` slot, then the reply format.
///
/// Records are one JSON object per line. When they exceed the character
/// budget, abstracts are cut to `abstract_cap` characters; if that is
/// still too large the caller must chunk the corpus.
pub fn build_topic_prompt(corpus: &Corpus, config: &RunConfig) -> Result<String, TopicError> {
    config.validate()?;
    let mut records = serialize_records(&corpus.studies, config, None);
    let mut size = records.chars().count();
    if size > config.prompt_budget {
        records = serialize_records(&corpus.studies, config, Some(config.abstract_cap));
        size = records.chars().count();
        if size > config.prompt_budget {
            return Err(TopicError::PromptTooLarge {
                size,
                budget: config.prompt_budget,
            });
        }
    }
    let fields: Vec<&str> = config
        .text_fields
        .iter()
        .map(|f| match f {
            TextField::Title => "titles",
            TextField::Abstract => "abstracts",
        })
        .collect();
    Ok(format!(
        "{INSTRUCTION_PREFIX}\n<dataset>\n{records}</dataset>\nresearch studies and identify {}-{} main topics and {}-{} subtopics for each.\n\
         Base the topics on the study {}.\n\n{RESPONSE_FORMAT}\n",
        config.topic_range.min,
        config.topic_range.max,
        config.subtopic_range.min,
        config.subtopic_range.max,
        fields.join(" and "),
    ))
}
