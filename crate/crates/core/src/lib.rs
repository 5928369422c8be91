//! Applied pi-calculus with active substitutions: terms, rewriting, extended
//! processes, normal forms, a labelled transition system, and bounded
//! equivalence checking.

pub mod equiv;
pub mod error;
pub mod gen;
pub mod lts;
pub mod normal;
pub mod process;
pub mod query;
pub mod rewrite;
pub mod selftest;
pub mod syntax;
pub mod term;

pub use error::{Error, Result};
