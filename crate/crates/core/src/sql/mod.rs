//! Parsing, binding, normalization, rendering and templating of queries in
//! the Spider SQL subset.

mod ast;
mod bind;
mod lexer;
mod normalize;
mod parser;
mod prefix;
mod render;
mod template;

pub use ast::*;
pub use normalize::{having_without_grouping, normalize};
pub use prefix::{prefix_feasible, PrefixMode};
pub use render::render;
pub use template::{prune_to_template, ParseTemplate, TEMPLATE_SEED};

use crate::query_plan::{Clause, QueryPlan};
use crate::schema::DatabaseSchema;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unresolved identifier `{ident}`")]
    Bind { ident: String },
}

impl SqlError {
    pub fn is_parse(&self) -> bool {
        matches!(self, SqlError::Parse { .. })
    }
}

/// Parses one statement and binds every table and column against `schema`.
pub fn parse_sql(text: &str, schema: &DatabaseSchema) -> Result<SqlAst, SqlError> {
    let mut ast = parse_unbound(text)?;
    bind::bind(&mut ast, schema)?;
    Ok(ast)
}

/// Parses without a schema. Column refs keep an empty `table`.
pub fn parse_unbound(text: &str) -> Result<SqlAst, SqlError> {
    let toks = lexer::tokenize(text)?;
    parser::parse_tokens(&toks, text.len())
}

/// Which of the eight plan clauses occur anywhere in the query, nested
/// queries and set-operation operands included.
pub fn clause_flags(ast: &SqlAst) -> QueryPlan {
    let mut plan = QueryPlan::default();
    ast.walk(&mut |q| {
        if q.where_.is_some() {
            plan.set(Clause::Where, true);
        }
        if let Some((kind, _)) = &q.set_op {
            plan.set(
                match kind {
                    SetOpKind::Except => Clause::Except,
                    SetOpKind::Union => Clause::Union,
                    SetOpKind::Intersect => Clause::Intersect,
                },
                true,
            );
        }
        if !q.group_by.is_empty() {
            plan.set(Clause::GroupBy, true);
        }
        if q.having.is_some() {
            plan.set(Clause::Having, true);
        }
        if q.order_by.is_some() {
            plan.set(Clause::OrderBy, true);
        }
        if q.limit.is_some() {
            plan.set(Clause::Limit, true);
        }
    });
    plan
}
