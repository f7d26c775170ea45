//! The query pipeline: parse, convert, fetch lazily, materialize, evaluate.

use std::collections::BTreeSet;
use std::str::FromStr;

use thiserror::Error;

use crate::descriptors::{DescriptorError, Project, TableKey};
use crate::extraction::{
    build_triples, materialize_integrated_table, required_tables, ExtractionError,
    IntegratedData, SequentialFetch, TableSource,
};
use crate::rdql::{evaluate_with_stats, parse_rdql, EvalStats, RdqlError, RdqlQuery, ResultSet};
use crate::sql::{parse_sql, SqlError};
use crate::sql_to_rdql::{convert, Conversion};
use crate::triple_store::TripleStore;
use crate::wrappers::AccessLog;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MediatorError {
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error(transparent)]
    Rdql(#[from] RdqlError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryLang {
    Sql,
    Rdql,
}

impl FromStr for QueryLang {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sql" => Ok(QueryLang::Sql),
            "rdql" => Ok(QueryLang::Rdql),
            _ => Err(format!("unknown query language `{s}`")),
        }
    }
}

/// Everything one query produced.
#[derive(Debug, Clone)]
pub struct Answer {
    pub rdql: RdqlQuery,
    pub results: ResultSet,
    pub store: TripleStore,
    /// Source tables fetched, in fetch order.
    pub access_log: Vec<TableKey>,
    pub warnings: Vec<String>,
    pub stats: EvalStats,
}

pub struct Mediator<'p> {
    project: &'p Project,
    fetch: Box<dyn TableSource + 'p>,
    parallel_tables: bool,
}

impl<'p> Mediator<'p> {
    pub fn new(project: &'p Project) -> Mediator<'p> {
        Mediator {
            project,
            fetch: Box::new(SequentialFetch),
            parallel_tables: false,
        }
    }

    /// Replaces how source tables are fetched.
    pub fn with_fetch(mut self, fetch: impl TableSource + 'p) -> Self {
        self.fetch = Box::new(fetch);
        self
    }

    /// Materializes distinct integrated tables on separate threads.
    pub fn parallel_tables(mut self, on: bool) -> Self {
        self.parallel_tables = on;
        self
    }

    pub fn project(&self) -> &Project {
        self.project
    }

    pub fn convert_sql(&self, sql: &str) -> Result<Conversion, MediatorError> {
        let q = parse_sql(sql, &self.project.schema)?;
        Ok(convert(&q, &self.project.schema))
    }

    pub fn parse(&self, text: &str, lang: QueryLang) -> Result<RdqlQuery, MediatorError> {
        match lang {
            QueryLang::Sql => Ok(self.convert_sql(text)?.ast),
            QueryLang::Rdql => Ok(parse_rdql(text)?),
        }
    }

    /// Materializes the named integrated tables.
    pub fn materialize(
        &self,
        tables: &BTreeSet<String>,
        log: &AccessLog,
    ) -> Result<(IntegratedData, Vec<String>), MediatorError> {
        let fetch: &dyn TableSource = self.fetch.as_ref();
        let results: Vec<_> = if self.parallel_tables {
            std::thread::scope(|scope| {
                let handles: Vec<_> = tables
                    .iter()
                    .map(|name| {
                        scope.spawn(move || {
                            materialize_integrated_table(self.project, name, fetch, log)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("materialization thread panicked"))
                    .collect()
            })
        } else {
            tables
                .iter()
                .map(|name| materialize_integrated_table(self.project, name, fetch, log))
                .collect()
        };
        let mut data = IntegratedData::default();
        let mut warnings = Vec::new();
        for (name, result) in tables.iter().zip(results) {
            let m = result?;
            warnings.extend(m.warnings);
            data.tables.insert(name.clone(), m.table);
        }
        Ok((data, warnings))
    }

    pub fn answer_rdql(&self, query: RdqlQuery) -> Result<Answer, MediatorError> {
        let tables = required_tables(&query, &self.project.schema)?;
        let log = AccessLog::new();
        let (data, warnings) = self.materialize(&tables, &log)?;
        let store = build_triples(&data);
        let (results, stats) = evaluate_with_stats(&query, &store);
        Ok(Answer {
            rdql: query,
            results,
            store,
            access_log: log.entries(),
            warnings,
            stats,
        })
    }

    pub fn answer(&self, text: &str, lang: QueryLang) -> Result<Answer, MediatorError> {
        let query = self.parse(text, lang)?;
        self.answer_rdql(query)
    }
}
