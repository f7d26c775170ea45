//! Commands behind the `medquery` binary. Each returns an [`Outcome`] so
//! tests can check output and exit status without spawning a process.

use std::path::PathBuf;
use std::time::Instant;

use medquery_core::descriptors::{escape_xml, serialize_schema, FieldRef, Relation};
use medquery_core::extraction::{build_triples, plan_table, ParallelFetch};
use medquery_core::rdql::ResultSet;
use medquery_core::schema_check::check_schema;
use medquery_core::sql_to_rdql::BASE_IRI;
use medquery_core::triple_store::{Iri, Triple};
use medquery_core::wrappers::{AccessLog, Cell};
use medquery_core::{parse_project, Mediator, Project, QueryLang};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogLevel {
    Quiet,
    Info,
    Debug,
}

impl std::str::FromStr for LogLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quiet" => Ok(LogLevel::Quiet),
            "info" => Ok(LogLevel::Info),
            "debug" => Ok(LogLevel::Debug),
            _ => Err(format!("unknown log level `{s}` (quiet, info, debug)")),
        }
    }
}

impl LogLevel {
    pub fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Quiet => log::LevelFilter::Off,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectConfig {
    pub sources: PathBuf,
    pub schema: PathBuf,
    pub log_level: LogLevel,
}

/// What a command printed and how it exits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Outcome {
        Outcome {
            stdout,
            ..Outcome::default()
        }
    }

    fn fail(code: i32, message: impl std::fmt::Display) -> Outcome {
        Outcome {
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
            code,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaFormat {
    Dot,
    Xml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutFormat {
    Table,
    Xml,
    Ntriples,
}

fn load(config: &ProjectConfig) -> Result<Project, Outcome> {
    parse_project(&config.sources, &config.schema).map_err(|e| Outcome::fail(EXIT_USAGE, e))
}

/// Loads the project and insists on a clean satisfiability report.
fn load_checked(config: &ProjectConfig) -> Result<Project, Outcome> {
    let project = load(config)?;
    let report = check_schema(&project);
    if report.is_accepted() {
        Ok(project)
    } else {
        Err(Outcome {
            stdout: String::new(),
            stderr: report.render_text(),
            code: EXIT_DOMAIN,
        })
    }
}

pub fn cmd_validate(config: &ProjectConfig) -> Outcome {
    let project = match load(config) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let report = check_schema(&project);
    Outcome {
        stdout: report.render_text(),
        stderr: String::new(),
        code: if report.is_accepted() { EXIT_OK } else { EXIT_DOMAIN },
    }
}

pub fn cmd_show_schema(config: &ProjectConfig, format: SchemaFormat) -> Outcome {
    let project = match load_checked(config) {
        Ok(p) => p,
        Err(o) => return o,
    };
    Outcome::ok(match format {
        SchemaFormat::Dot => render_dot(&project),
        SchemaFormat::Xml => serialize_schema(&project.schema),
    })
}

/// Integrated tables with a field mapped to any of `refs`, in schema order.
fn tables_touching<'a>(project: &'a Project, refs: &[&FieldRef]) -> Vec<&'a str> {
    project
        .schema
        .tables
        .iter()
        .filter(|t| t.fields.iter().any(|f| refs.contains(&&f.mapping)))
        .map(|t| t.name.as_str())
        .collect()
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// One node per integrated table and one edge per relation, drawn between
/// the first integrated table touching each side.
pub fn render_dot(project: &Project) -> String {
    let schema = &project.schema;
    let mut out = format!("graph {} {{\n  node [shape=record];\n", dot_id(&schema.name));
    for table in &schema.tables {
        let fields: Vec<String> = table
            .fields
            .iter()
            .map(|f| format!("{}: {}\\l", f.name, f.dtype))
            .collect();
        out.push_str(&format!(
            "  {} [label=\"{{{}|{}}}\"];\n",
            dot_id(&table.name),
            table.name,
            fields.concat()
        ));
    }
    for relation in &schema.relations {
        let (a, b, label) = match relation {
            Relation::Equality { lhs, rhs } => (
                lhs.iter().collect::<Vec<_>>(),
                rhs.iter().collect::<Vec<_>>(),
                "=",
            ),
            Relation::Derived {
                target,
                op,
                operands,
            } => (vec![target], operands.iter().collect(), op.as_str()),
        };
        let (Some(from), Some(to)) = (
            tables_touching(project, &a).first().copied(),
            tables_touching(project, &b).first().copied(),
        ) else {
            continue;
        };
        out.push_str(&format!(
            "  {} -- {} [label={}];\n",
            dot_id(from),
            dot_id(to),
            dot_id(label)
        ));
    }
    out.push_str("}\n");
    out
}

pub fn cmd_convert(config: &ProjectConfig, sql: &str) -> Outcome {
    let project = match load(config) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let converted = Mediator::new(&project).convert_sql(sql);
    match converted {
        Ok(c) => Outcome::ok(format!("{}\n", c.text)),
        Err(e) => Outcome::fail(EXIT_DOMAIN, e),
    }
}

pub fn cmd_query(config: &ProjectConfig, query: &str, lang: QueryLang, out: OutFormat) -> Outcome {
    let project = match load_checked(config) {
        Ok(p) => p,
        Err(o) => return o,
    };
    let started = Instant::now();
    let mediator = Mediator::new(&project)
        .with_fetch(ParallelFetch)
        .parallel_tables(true);
    let answer = match mediator.answer(query, lang) {
        Ok(a) => a,
        Err(e) => return Outcome::fail(EXIT_DOMAIN, e),
    };
    let elapsed = started.elapsed().as_millis();
    let stdout = match out {
        OutFormat::Table => render_table(&answer.results),
        OutFormat::Xml => render_xml(&answer.results),
        OutFormat::Ntriples => render_ntriples(&answer.results),
    };
    Outcome {
        stdout,
        stderr: format!("# extraction+query time: {elapsed} ms\n"),
        code: EXIT_OK,
    }
}

pub fn render_table(rs: &ResultSet) -> String {
    let mut out = rs.columns.join("|");
    out.push('\n');
    for row in &rs.rows {
        let cells: Vec<&str> = row.iter().map(|t| t.plain()).collect();
        out.push_str(&cells.join("|"));
        out.push('\n');
    }
    out
}

pub fn render_xml(rs: &ResultSet) -> String {
    let mut out = String::from("<results>\n");
    for row in &rs.rows {
        out.push_str("  <row>");
        for (name, term) in rs.columns.iter().zip(row) {
            out.push_str(&format!(
                "<col name=\"{}\">{}</col>",
                escape_xml(name),
                escape_xml(term.plain())
            ));
        }
        out.push_str("</row>\n");
    }
    out.push_str("</results>\n");
    out
}

/// Result rows as triples: one subject per row, one predicate per column.
pub fn render_ntriples(rs: &ResultSet) -> String {
    let predicates: Vec<Iri> = rs
        .columns
        .iter()
        .map(|c| Iri::new(&format!("{BASE_IRI}result#{c}")).expect("variables form valid IRIs"))
        .collect();
    let mut out = String::new();
    for (n, row) in rs.rows.iter().enumerate() {
        let subject = Iri::new(&format!("{BASE_IRI}result/row/{n}")).expect("valid IRI");
        for (predicate, term) in predicates.iter().zip(row) {
            let triple = Triple::new(subject.clone(), predicate.clone(), term.clone());
            out.push_str(&format!("{triple}\n"));
        }
    }
    out
}

/// Materializes one integrated table and dumps it.
pub fn cmd_extract(config: &ProjectConfig, table: &str, out: OutFormat) -> Outcome {
    let project = match load_checked(config) {
        Ok(p) => p,
        Err(o) => return o,
    };
    if let Err(e) = plan_table(&project, table) {
        return Outcome::fail(EXIT_DOMAIN, e);
    }
    let log = AccessLog::new();
    let mediator = Mediator::new(&project).with_fetch(ParallelFetch);
    let tables = std::collections::BTreeSet::from([table.to_string()]);
    let (data, _warnings) = match mediator.materialize(&tables, &log) {
        Ok(d) => d,
        Err(e) => return Outcome::fail(EXIT_DOMAIN, e),
    };
    let stdout = match out {
        OutFormat::Ntriples => build_triples(&data).export_ntriples(),
        OutFormat::Table => {
            let t = &data.tables[table];
            let names: Vec<&str> = t.fields.iter().map(|f| f.name.as_str()).collect();
            let mut text = format!("{}\n", names.join("|"));
            for row in &t.rows {
                let cells: Vec<&str> = row
                    .cells
                    .iter()
                    .map(|c| match c {
                        Cell::Value(v) => v.lexical(),
                        Cell::Missing => "",
                    })
                    .collect();
                text.push_str(&cells.join("|"));
                text.push('\n');
            }
            text
        }
        OutFormat::Xml => return Outcome::fail(EXIT_USAGE, "extract supports --out ntriples or table"),
    };
    Outcome::ok(stdout)
}
