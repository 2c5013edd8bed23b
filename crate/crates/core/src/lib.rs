//! Non-neural core of a conversational text-to-SQL pipeline: SQL parsing and
//! templating, schema and content stores, dataset ingestion, exact-set and
//! execution evaluation, query-plan and schema-linking rerankers, and
//! generalization splits.

pub mod dialogue;
pub mod eval;
pub mod linking;
pub mod par;
pub mod query_plan;
pub mod rerank;
pub mod schema;
pub mod splits;
pub mod sql;
