//! Token postings over the catalog.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::shop::{Catalog, Shop};
use crate::sim::{FaultSpec, SimConfig, SimError};
use crate::text::tokenize;

/// Inverted index over normalized name and type tokens. Postings are
/// sorted by shop position, so iteration is deterministic.
#[derive(Debug, Clone)]
pub struct SimIndex {
    shops: Vec<Shop>,
    postings: BTreeMap<String, Vec<usize>>,
    /// All name tokens of indexed shops; used to decide whether a
    /// location phrase merely states a shop name.
    name_tokens: BTreeSet<String>,
}

impl SimIndex {
    /// Builds the index and validates fault selectors against the
    /// catalog: a selector that cannot match anything is an injection
    /// error, not a silent no-op.
    pub fn build(catalog: &Catalog, config: &SimConfig) -> Result<Self, SimError> {
        let mut postings: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut name_tokens = BTreeSet::new();
        let shops = catalog.shops.clone();
        for (pos, shop) in shops.iter().enumerate() {
            let mut tokens: Vec<String> = tokenize(&shop.name);
            for t in &tokens {
                name_tokens.insert(t.clone());
            }
            tokens.extend(tokenize(&shop.shop_type));
            tokens.sort_unstable();
            tokens.dedup();
            for t in tokens {
                postings.entry(t).or_default().push(pos);
            }
        }
        let index = Self { shops, postings, name_tokens };
        for fault in &config.faults {
            index.validate_fault(fault)?;
        }
        Ok(index)
    }

    fn validate_fault(&self, fault: &FaultSpec) -> Result<(), SimError> {
        match (&fault.selector.shop_id, &fault.selector.query_pattern) {
            (Some(id), None) => {
                if self.shops.iter().any(|s| &s.id == id) {
                    Ok(())
                } else {
                    Err(SimError::FaultSelectorUnmatched(id.clone()))
                }
            }
            (None, Some(pattern)) => {
                // A query pattern is satisfiable only if some of its
                // tokens exist in the catalog at all.
                if tokenize(pattern).iter().any(|t| self.postings.contains_key(t)) {
                    Ok(())
                } else {
                    Err(SimError::FaultSelectorUnmatched(pattern.clone()))
                }
            }
            _ => Err(SimError::InvalidSelector),
        }
    }

    pub fn shops(&self) -> &[Shop] {
        &self.shops
    }

    pub fn shop(&self, pos: usize) -> &Shop {
        &self.shops[pos]
    }

    pub fn postings(&self, token: &str) -> &[usize] {
        self.postings.get(token).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Document frequency of a token; 0 for unseen tokens.
    pub fn doc_freq(&self, token: &str) -> usize {
        self.postings(token).len()
    }

    pub fn is_name_token(&self, token: &str) -> bool {
        self.name_tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.shops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shops.is_empty()
    }
}
