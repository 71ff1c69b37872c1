//! LLM-backed query generation: prompt, call, parse, bind to target.

use thiserror::Error;

use recallcheck_core::prompt::{assemble_generation_prompt, PromptError, PromptTemplate};
use recallcheck_core::query::{group_from_parsed, parse_llm_output, ParseOutputError, QueryGroup};
use recallcheck_core::shop::Shop;

use crate::gateway::{Gateway, GatewayError, Transport};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("prompt assembly failed: {0}")]
    Prompt(PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("completion for shop `{shop_id}` yielded no queries")]
    EmptyOutput { shop_id: String },
}

/// Generates a query group for one shop through the chat gateway. The
/// group may come back ineligible (< 2 queries) after dedup; the caller
/// decides what to do with it.
pub fn generate_llm<T: Transport>(
    shop: &Shop,
    template: &PromptTemplate,
    gateway: &Gateway<T>,
) -> Result<QueryGroup, GenerateError> {
    let request = assemble_generation_prompt(shop, template).map_err(GenerateError::Prompt)?;
    let (reply, _attempts) = gateway.complete(&request)?;
    let parsed = parse_llm_output(&reply).map_err(|e| match e {
        ParseOutputError::EmptyOutput => GenerateError::EmptyOutput { shop_id: shop.id.clone() },
    })?;
    Ok(group_from_parsed(shop, &parsed))
}
