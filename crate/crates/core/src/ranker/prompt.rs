//! Listwise prompt templates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ranking::ItemList;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptStyle {
    #[serde(rename = "rankgpt")]
    RankGpt,
    #[serde(rename = "rankvicuna")]
    RankVicuna,
    #[serde(rename = "mathsort")]
    MathSort,
    #[serde(rename = "wordsort")]
    WordSort,
    #[serde(rename = "sentence-sort")]
    SentenceSort,
}

impl PromptStyle {
    pub const ALL: [PromptStyle; 5] = [
        PromptStyle::RankGpt,
        PromptStyle::RankVicuna,
        PromptStyle::MathSort,
        PromptStyle::WordSort,
        PromptStyle::SentenceSort,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptStyle::RankGpt => "rankgpt",
            PromptStyle::RankVicuna => "rankvicuna",
            PromptStyle::MathSort => "mathsort",
            PromptStyle::WordSort => "wordsort",
            PromptStyle::SentenceSort => "sentence-sort",
        }
    }

    /// Styles whose outputs name items by `[k]` identifiers.
    pub fn uses_identifiers(self) -> bool {
        matches!(self, PromptStyle::RankGpt | PromptStyle::RankVicuna)
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptStyle::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown prompt style {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

const RANKGPT_SYSTEM: &str =
    "You are RankGPT, an intelligent assistant that can rank passages based on their relevancy to the query.";

const SORT_SUFFIX: &str = "Only respond with the results; do not say any word or explain.";

fn numbered_passages(items: &ItemList) -> String {
    items
        .texts()
        .enumerate()
        .map(|(i, text)| format!("[{}] {}", i + 1, text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Render the chat messages presenting `items` in their given order.
pub fn render(style: PromptStyle, items: &ItemList, query: Option<&str>) -> Vec<ChatMessage> {
    let num = items.len();
    let query = query.unwrap_or("");
    match style {
        PromptStyle::RankVicuna => vec![ChatMessage::user(format!(
            "I will provide you with {num} passages, each indicated by a numerical identifier []. \
             Rank the passages based on their relevance to the search query: {query}.\n\n\
             {passages}\n\n\
             Search Query: {query}.\n\
             Rank the {num} passages above based on their relevance to the search query. \
             All the passages should be included and listed using identifiers, in descending order of relevance. \
             The output format should be [] > [], e.g., [4] > [2]. \
             Only respond with the ranking results, do not say any word or explain.",
            passages = numbered_passages(items),
        ))],
        PromptStyle::RankGpt => vec![
            ChatMessage::system(RANKGPT_SYSTEM),
            ChatMessage::user(format!(
                "I will provide you with {num} passages, each indicated by number identifier []. \n\
                 Rank the passages based on their relevance to query: {query}.\n\n\
                 {passages}\n\n\
                 Search Query: {query}. \n\
                 Rank the {num} passages above based on their relevance to the search query. \
                 The passages should be listed in descending order using identifiers. \
                 The most relevant passages should be listed first. \
                 The output format should be [] > [], e.g., [1] > [2]. \
                 Only response the ranking results, do not say any word or explain.",
                passages = numbered_passages(items),
            )),
        ],
        PromptStyle::MathSort => vec![ChatMessage::user(format!(
            "Sort the following expressions from smallest to largest: {}. \
             The output format should be a comma-separated list containing the exact expressions; \
             do not reduce them. {SORT_SUFFIX}",
            items.texts().collect::<Vec<_>>().join(", ")
        ))],
        PromptStyle::WordSort => vec![ChatMessage::user(format!(
            "Order these words alphabetically: {}. \
             The output format should be a comma-separated list containing the exact words. {SORT_SUFFIX}",
            items.texts().collect::<Vec<_>>().join(", ")
        ))],
        PromptStyle::SentenceSort => vec![ChatMessage::user(format!(
            "Order the scrambled sentences logically:\n{}\n\
             The output format should have each sentence on a new line. {SORT_SUFFIX}",
            items.texts().map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n")
        ))],
    }
}

/// Total characters across all rendered messages.
pub fn rendered_chars(messages: &[ChatMessage]) -> usize {
    messages.iter().map(|m| m.content.chars().count()).sum()
}

/// `[a] > [b] > …` for a ranking of presented positions (0-based input).
pub fn render_identifier_chain(order: &[usize]) -> String {
    order
        .iter()
        .map(|i| format!("[{}]", i + 1))
        .collect::<Vec<_>>()
        .join(" > ")
}
