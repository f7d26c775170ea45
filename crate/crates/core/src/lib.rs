//! A mediator that integrates heterogeneous tabular and XML sources into
//! a single RDF view and answers queries over it.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`descriptors`] parses the data-source and integrated-schema files.
//! 2. [`schema_check`] reports structural contradictions in the schema.
//! 3. [`sql`] and [`sql_to_rdql`] turn a SQL query over the integrated
//!    schema into RDQL; RDQL can also be submitted directly ([`rdql`]).
//! 4. [`extraction`] fetches only the source tables the query needs via
//!    the [`wrappers`] and materializes the integrated tables as triples.
//! 5. [`rdql`] evaluates the query against the [`triple_store`].
//!
//! [`mediator`] strings the stages together.

pub mod descriptors;
pub mod extraction;
pub mod mediator;
pub mod rdql;
pub mod schema_check;
pub mod sql;
pub mod sql_to_rdql;
pub mod triple_store;
pub mod value;
pub mod wrappers;

pub use descriptors::{parse_project, FieldRef, Project, TableKey};
pub use mediator::{Answer, Mediator, MediatorError, QueryLang};

pub use value::{Dtype, Literal};
