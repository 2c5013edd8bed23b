//! Parse templates: the query shape with names and literals blanked out.

use serde::Serialize;
use xxhash_rust::xxh64::xxh64;

use super::ast::SqlAst;
use super::render::{render_with, Mode};

/// Seed of the template digest. Changing it changes every split manifest.
pub const TEMPLATE_SEED: u64 = 0x7465_6d70_6c61_7465;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ParseTemplate {
    pub canonical_form: String,
    pub digest: u64,
}

impl ParseTemplate {
    pub fn from_canonical(canonical_form: String) -> ParseTemplate {
        let digest = xxh64(canonical_form.as_bytes(), TEMPLATE_SEED);
        ParseTemplate { canonical_form, digest }
    }

    pub fn digest_hex(&self) -> String {
        format!("{:016x}", self.digest)
    }
}

/// Tables become `TAB`, columns `COL`, literals and LIMIT counts `VAL`.
/// Aliases are dropped. Keywords, operators, aggregates and `*` stay.
pub fn prune_to_template(ast: &SqlAst) -> ParseTemplate {
    ParseTemplate::from_canonical(render_with(ast, Mode::Template))
}
