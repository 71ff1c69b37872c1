//! Prompt assembly for query generation and validation.
//!
//! Requests follow the chat-completions interchange shape (role-tagged
//! messages in, text out) so any conforming endpoint works. Generation
//! prompts carry four parts in order: task description, the three
//! query-construction steps, question-answer examples, and the target
//! shop. Transport, retries, and rate limiting live in the companion
//! crate; this module only builds deterministic request values.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::shop::Shop;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: ChatRole::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: ChatRole::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: ChatRole::Assistant, content: content.into() }
    }
}

/// A chat completion request. Temperature defaults to zero: generation
/// must be as repeatable as the endpoint allows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        Self { messages, temperature: 0.0, max_output_tokens: 512 }
    }
}

/// Timeout and retry controls for one logical completion call: a 30 s
/// per-attempt timeout, then a random wait drawn from a seeded interval,
/// retried up to three times by default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub per_attempt_timeout: Duration,
    pub max_retries: u32,
    pub wait_min: Duration,
    pub wait_max: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            per_attempt_timeout: Duration::from_secs(30),
            max_retries: 3,
            wait_min: Duration::from_millis(500),
            wait_max: Duration::from_millis(2000),
        }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.per_attempt_timeout.is_zero() || self.wait_min > self.wait_max {
            return Err(PromptError::InvalidRetryPolicy);
        }
        Ok(())
    }

    /// Hard upper bound on how long one logical call may block.
    pub fn worst_case_duration(&self) -> Duration {
        let attempts = u32::from(self.max_retries) + 1;
        (self.per_attempt_timeout + self.wait_max) * attempts
    }
}

/// A question-answer example pair embedded in a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaExample {
    pub question: String,
    pub answer: String,
}

/// Prompt template for query generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub task_description: String,
    /// Exactly three steps, in order: name-based, services/products-based,
    /// location-based.
    pub cot_steps: Vec<String>,
    pub qa_examples: Vec<QaExample>,
    /// BCP-47-ish tag, e.g. "en" or "zh".
    pub language: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptError {
    /// `cot_steps` must have exactly three entries.
    WrongStepCount(usize),
    EmptyExamples,
    EmptyQuery,
    InvalidRetryPolicy,
}

impl core::fmt::Display for PromptError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PromptError::WrongStepCount(n) => {
                write!(f, "template must have exactly 3 generation steps, got {n}")
            }
            PromptError::EmptyExamples => write!(f, "template has no examples"),
            PromptError::EmptyQuery => write!(f, "query text is empty"),
            PromptError::InvalidRetryPolicy => write!(f, "invalid retry policy"),
        }
    }
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), PromptError> {
        if self.cot_steps.len() != 3 {
            return Err(PromptError::WrongStepCount(self.cot_steps.len()));
        }
        if self.qa_examples.is_empty() {
            return Err(PromptError::EmptyExamples);
        }
        Ok(())
    }
}

/// Assembles the generation request: task description, the three steps,
/// QA examples, then the target shop name and type verbatim.
/// Deterministic for fixed inputs.
pub fn assemble_generation_prompt(
    shop: &Shop,
    template: &PromptTemplate,
) -> Result<ChatRequest, PromptError> {
    template.validate()?;
    let mut user = String::new();
    for (i, step) in template.cot_steps.iter().enumerate() {
        user += &alloc::format!("Step {}: {}\n", i + 1, step);
    }
    user.push('\n');
    for ex in &template.qa_examples {
        user += &alloc::format!("Q: {}\nA: {}\n", ex.question, ex.answer);
    }
    user.push('\n');
    user += &alloc::format!(
        "Target shop: {}\nShop type: {}\nCity: {}\n",
        shop.name,
        shop.shop_type,
        shop.city
    );
    user += "Answer with a numbered list under the section labels [name], [service], [location].\n";
    Ok(ChatRequest::new(alloc::vec![
        ChatMessage::system(template.task_description.clone()),
        ChatMessage::user(user),
    ]))
}

/// A labeled keep/drop example for the validation prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationExample {
    pub shop_name: String,
    pub shop_type: String,
    pub query: String,
    pub keep: bool,
    pub note: String,
}

/// Assembles the few-shot rethink request asking whether `query_text` is
/// a reasonable user query for the shop. Both keep and drop examples are
/// embedded; the judge is instructed to answer with a leading KEEP or
/// DROP token.
pub fn assemble_validation_prompt(
    shop: &Shop,
    query_text: &str,
    examples: &[ValidationExample],
) -> Result<ChatRequest, PromptError> {
    if query_text.trim().is_empty() {
        return Err(PromptError::EmptyQuery);
    }
    if examples.is_empty() {
        return Err(PromptError::EmptyExamples);
    }
    let mut user = String::from(
        "Judge whether each query is something a general user would type to find the shop. \
         Answer KEEP or DROP first, then a short reason.\n\n",
    );
    for ex in examples {
        user += &alloc::format!(
            "Shop: {} ({})\nQuery: {}\nAnswer: {} - {}\n\n",
            ex.shop_name,
            ex.shop_type,
            ex.query,
            if ex.keep { "KEEP" } else { "DROP" },
            ex.note
        );
    }
    user += &alloc::format!(
        "Shop: {} ({})\nQuery: {}\nAnswer:",
        shop.name,
        shop.shop_type,
        query_text
    );
    Ok(ChatRequest::new(alloc::vec![
        ChatMessage::system("You review search test queries for an e-commerce platform.".to_string()),
        ChatMessage::user(user),
    ]))
}

/// English generation template used by desk-scale fixtures.
pub fn builtin_template_en() -> PromptTemplate {
    PromptTemplate {
        task_description: "You imitate how general users type search queries to find a given \
            shop on an e-commerce app. Generate several short queries that all target the shop."
            .to_string(),
        cot_steps: alloc::vec![
            "Build queries from the shop name: the full name, memorable parts of it, and initials."
                .to_string(),
            "Build queries from the services or products the shop offers.".to_string(),
            "Build queries the way users search vaguely by geographic location.".to_string(),
        ],
        qa_examples: alloc::vec![
            QaExample {
                question: "Shop: Ma's burgers (burger restaurant), Shanghai".to_string(),
                answer: "[name]\n1. Ma's burgers\n2. Ma's\n[service]\n1. hamburgers\n[location]\n1. burgers downtown"
                    .to_string(),
            },
            QaExample {
                question: "Shop: Chen's hardware (hardware store), Beijing".to_string(),
                answer: "[name]\n1. Chen's hardware\n2. Chen's\n[service]\n1. hardware store\n[location]\n1. hardware store nearby"
                    .to_string(),
            },
        ],
        language: "en".to_string(),
    }
}

/// Chinese generation template mirroring the four-part structure.
pub fn builtin_template_zh() -> PromptTemplate {
    PromptTemplate {
        task_description:
            "\u{4f60}\u{6a21}\u{4eff}\u{666e}\u{901a}\u{7528}\u{6237}\u{5728}\u{7535}\u{5546}\u{5e94}\u{7528}\u{4e2d}\u{641c}\u{7d22}\u{6307}\u{5b9a}\u{5546}\u{6237}\u{65f6}\u{8f93}\u{5165}\u{7684}\u{67e5}\u{8be2}\u{8bcd}\u{ff0c}\u{4e3a}\u{76ee}\u{6807}\u{5546}\u{6237}\u{751f}\u{6210}\u{591a}\u{6761}\u{7b80}\u{77ed}\u{67e5}\u{8be2}\u{3002}"
                .to_string(),
        cot_steps: alloc::vec![
            "\u{6839}\u{636e}\u{5546}\u{6237}\u{540d}\u{79f0}\u{6784}\u{9020}\u{67e5}\u{8be2}\u{ff1a}\u{5168}\u{540d}\u{3001}\u{540d}\u{79f0}\u{4e2d}\u{7684}\u{5173}\u{952e}\u{5b57}\u{3001}\u{9996}\u{5b57}\u{6bcd}\u{3002}".to_string(),
            "\u{6839}\u{636e}\u{5546}\u{6237}\u{63d0}\u{4f9b}\u{7684}\u{5546}\u{54c1}\u{6216}\u{670d}\u{52a1}\u{6784}\u{9020}\u{67e5}\u{8be2}\u{3002}".to_string(),
            "\u{6309}\u{7167}\u{7528}\u{6237}\u{6a21}\u{7cca}\u{5730}\u{7406}\u{4f4d}\u{7f6e}\u{641c}\u{7d22}\u{7684}\u{65b9}\u{5f0f}\u{6784}\u{9020}\u{67e5}\u{8be2}\u{3002}".to_string(),
        ],
        qa_examples: alloc::vec![QaExample {
            question: "\u{5546}\u{6237}\u{ff1a}\u{8001}\u{5473}\u{9053}\u{706b}\u{9505}\u{ff08}\u{5317}\u{4eac}\u{706b}\u{9505}\u{ff09}\u{ff0c}\u{5317}\u{4eac}".to_string(),
            answer: "[name]\n1. \u{8001}\u{5473}\u{9053}\u{706b}\u{9505}\n2. \u{8001}\u{5473}\u{9053}\n[service]\n1. \u{706b}\u{9505}\n[location]\n1. \u{706b}\u{9505} \u{5317}\u{4eac}".to_string(),
        }],
        language: "zh".to_string(),
    }
}

/// Keep/drop examples mirroring the two published failure shapes: a
/// generic role query for a concrete shop, and a shop-name fragment
/// misread as a location.
pub fn builtin_validation_examples_en() -> Vec<ValidationExample> {
    alloc::vec![
        ValidationExample {
            shop_name: "Chen's hardware".to_string(),
            shop_type: "hardware store".to_string(),
            query: "Chen's".to_string(),
            keep: true,
            note: "users shorten shop names".to_string(),
        },
        ValidationExample {
            shop_name: "Silver Scissors".to_string(),
            shop_type: "hairdressing salon".to_string(),
            query: "a barber".to_string(),
            keep: false,
            note: "names a person, not a search for the shop".to_string(),
        },
        ValidationExample {
            shop_name: "A supermarket".to_string(),
            shop_type: "supermarket".to_string(),
            query: "supermarket near A".to_string(),
            keep: false,
            note: "confuses the shop name with a location".to_string(),
        },
    ]
}
