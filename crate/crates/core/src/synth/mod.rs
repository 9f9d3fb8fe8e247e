//! Seeded generators for documents and token sequences with planted
//! redundancy, plus brute-force reference implementations used to check the
//! optimized kernels.

mod documents;
mod oracle;
mod tokens;

use serde::{Deserialize, Serialize};

pub use documents::{gen_document, random_page_spec, DocTruth, PageCorpusConfig, Rect, SynthDocSpec, TextBlock};
pub use oracle::{oracle_aggregate, oracle_assign, oracle_dts, oracle_identify, oracle_max_similarities};
pub use tokens::{gen_tokens, TokenCorpusConfig, TokenTruth, SynthTokenSpec};

/// Corpus description read by `docslim synth`. Any combination of explicit
/// and randomly generated items may be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    #[serde(default)]
    pub pages: Vec<SynthDocSpec>,
    #[serde(default)]
    pub random_pages: Option<PageCorpusConfig>,
    #[serde(default)]
    pub tokens: Vec<SynthTokenSpec>,
    #[serde(default)]
    pub random_tokens: Option<TokenCorpusConfig>,
}

impl CorpusSpec {
    /// Every page spec, explicit ones first.
    pub fn page_specs(&self) -> crate::Result<Vec<SynthDocSpec>> {
        let mut out = self.pages.clone();
        if let Some(cfg) = &self.random_pages {
            cfg.validate()?;
            for i in 0..cfg.count {
                out.push(random_page_spec(cfg, cfg.seed.wrapping_add(i as u64)));
            }
        }
        Ok(out)
    }

    pub fn token_specs(&self) -> Vec<SynthTokenSpec> {
        let mut out = self.tokens.clone();
        if let Some(cfg) = &self.random_tokens {
            out.extend((0..cfg.count).map(|i| cfg.spec(i)));
        }
        out
    }
}
