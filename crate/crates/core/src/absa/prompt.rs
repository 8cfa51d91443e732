use serde::Serialize;
use thiserror::Error;

use crate::sha256_hex;

const INTRO: &str = include_str!("prompt/intro.txt");
const QUESTION: &str = include_str!("prompt/question.txt");
const OUTPUT: &str = include_str!("prompt/output.txt");
const TEXT_PREFIX: &str = "The review content is: ";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("review text is empty")]
    EmptyReview,
}

/// The four prompt segments, in send order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptBundle {
    pub intro: &'static str,
    pub question: &'static str,
    pub text: String,
    pub output: &'static str,
}

impl PromptBundle {
    pub fn render(&self) -> String {
        let mut s = String::with_capacity(self.intro.len() + self.question.len() + self.text.len() + self.output.len());
        s.push_str(self.intro);
        s.push_str(self.question);
        s.push_str(&self.text);
        s.push_str(self.output);
        s
    }

    /// SHA-256 of the rendered prompt; part of the response cache key.
    pub fn hash(&self) -> String {
        sha256_hex(self.render())
    }
}

pub fn build_prompt(review_text: &str) -> Result<PromptBundle, PromptError> {
    if review_text.trim().is_empty() {
        return Err(PromptError::EmptyReview);
    }
    // plain concatenation, so braces in the review are never re-expanded
    let mut text = String::with_capacity(TEXT_PREFIX.len() + review_text.len() + 1);
    text.push_str(TEXT_PREFIX);
    text.push_str(review_text);
    text.push('\n');
    Ok(PromptBundle {
        intro: INTRO,
        question: QUESTION,
        text,
        output: OUTPUT,
    })
}
