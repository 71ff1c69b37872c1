//! LLM-backed rethink validation of generated queries.

use recallcheck_core::prompt::{assemble_validation_prompt, ValidationExample};
use recallcheck_core::query::TestQuery;
use recallcheck_core::shop::Shop;
use recallcheck_core::validation::{map_judge_reply, Judge, ValidationVerdict, Verdict};

use crate::gateway::{Gateway, Transport};

/// Judges one query through the chat gateway. Transport failure maps to
/// an unclear verdict (hence a drop under the cautious policy) rather
/// than aborting the run: one flaky judgment should not kill a run.
pub fn validate_llm<T: Transport>(
    shop: &Shop,
    query: &TestQuery,
    examples: &[ValidationExample],
    gateway: &Gateway<T>,
) -> ValidationVerdict {
    let key = query.dedup_key();
    let request = match assemble_validation_prompt(shop, &query.text, examples) {
        Ok(r) => r,
        Err(e) => {
            return ValidationVerdict {
                query_key: key,
                verdict: Verdict::Unclear,
                rationale: format!("validation prompt error: {e}"),
                judge: Judge::Llm,
            }
        }
    };
    match gateway.complete(&request) {
        Ok((reply, _)) => ValidationVerdict {
            query_key: key,
            verdict: map_judge_reply(&reply),
            rationale: reply.trim().to_string(),
            judge: Judge::Llm,
        },
        Err(e) => ValidationVerdict {
            query_key: key,
            verdict: Verdict::Unclear,
            rationale: format!("judge unavailable: {e}"),
            judge: Judge::Llm,
        },
    }
}
