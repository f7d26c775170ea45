//! Wrappers: uniform, typed tabular snapshots of every kind of source.
//!
//! Tabular sources are pipe-delimited text files with a header line.
//! XML sources are bound record-by-record through an element mapping,
//! optionally after piping the document through an external transform.
//! Views are single-table selections evaluated over another table of the
//! same source.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;

use thiserror::Error;

use crate::descriptors::{
    Binding, Project, SourceFieldDef, SourceKind, SourceTableDef, TableKey, XmlBinding,
};
use crate::sql::{parse_statement, ColumnRef, Condition, Operand, SqlError};
use crate::value::{compare_literals, Literal};

/// Views may be defined over views, up to this depth.
const MAX_VIEW_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WrapperError {
    #[error("I/O error on {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}:{line}: {message}", path.display())]
    MalformedFile {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("type coercion failed in {table} row {row}, field {field}: `{lexical}` is not a valid {dtype}")]
    TypeCoercion {
        table: TableKey,
        row: usize,
        field: String,
        lexical: String,
        dtype: crate::value::Dtype,
    },
    #[error("unknown table {0}")]
    UnknownTable(TableKey),
    #[error("declared field `{field}` of {table} is not provided by its source")]
    MissingColumn { table: TableKey, field: String },
    #[error("transform `{command}` failed: {message}")]
    Transform { command: String, message: String },
    #[error("view {table}: {source}")]
    View {
        table: TableKey,
        #[source]
        source: SqlError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cell {
    Missing,
    Value(Literal),
}

impl Cell {
    pub fn value(&self) -> Option<&Literal> {
        match self {
            Cell::Missing => None,
            Cell::Value(lit) => Some(lit),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Row {
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub fields: Vec<SourceFieldDef>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn column(&self, field: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == field)
    }
}

/// Records every table fetch, in call order.
#[derive(Debug, Default)]
pub struct AccessLog {
    entries: Mutex<Vec<TableKey>>,
}

impl AccessLog {
    pub fn new() -> AccessLog {
        AccessLog::default()
    }

    pub fn record(&self, key: TableKey) {
        self.entries.lock().expect("access log poisoned").push(key);
    }

    pub fn entries(&self) -> Vec<TableKey> {
        self.entries.lock().expect("access log poisoned").clone()
    }
}

/// Reads one declared source table.
pub fn fetch_table(
    project: &Project,
    source: &str,
    table: &str,
    log: &AccessLog,
) -> Result<Table, WrapperError> {
    fetch_at_depth(project, &TableKey::new(source, table), log, 0)
}

fn fetch_at_depth(
    project: &Project,
    key: &TableKey,
    log: &AccessLog,
    depth: usize,
) -> Result<Table, WrapperError> {
    let descriptor = project
        .source(&key.source)
        .ok_or_else(|| WrapperError::UnknownTable(key.clone()))?;
    let def = descriptor
        .table(&key.table)
        .ok_or_else(|| WrapperError::UnknownTable(key.clone()))?;
    log.record(key.clone());
    log::debug!("fetching {key}");
    let location = resolve_location(project, &descriptor.location)?;
    match &def.binding {
        Binding::File { path } => {
            let path = location.join(path);
            let text = read(&path)?;
            parse_tabular(key, def, &path, &text)
        }
        Binding::Xml(binding) => {
            debug_assert_eq!(descriptor.kind, SourceKind::Xml);
            let mut text = read(&location)?;
            if let Some(command) = &binding.transform {
                text = run_transform(command, &text, project.base_dir.as_path())?;
            }
            bind_xml(key, def, binding, &location, &text)
        }
        Binding::View { query } => {
            if depth >= MAX_VIEW_DEPTH {
                return Err(WrapperError::View {
                    table: key.clone(),
                    source: SqlError::Unsupported("views nested too deeply".into()),
                });
            }
            let result = view_at_depth(project, &key.source, query, log, depth + 1).map_err(
                |e| match e {
                    WrapperError::View { source, .. } => WrapperError::View {
                        table: key.clone(),
                        source,
                    },
                    other => other,
                },
            )?;
            conform_view(key, def, result)
        }
    }
}

fn resolve_location(project: &Project, location: &str) -> Result<PathBuf, WrapperError> {
    let local = location.strip_prefix("file://").unwrap_or(location);
    if local.contains("://") {
        return Err(WrapperError::Io {
            path: PathBuf::from(location),
            message: "only local file locations are supported".into(),
        });
    }
    Ok(project.base_dir.join(local))
}

fn read(path: &Path) -> Result<String, WrapperError> {
    std::fs::read_to_string(path).map_err(|e| WrapperError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn coerce(key: &TableKey, row: usize, field: &SourceFieldDef, raw: &str) -> Result<Cell, WrapperError> {
    if raw.is_empty() {
        return Ok(Cell::Missing);
    }
    Literal::parse(raw, field.dtype)
        .map(Cell::Value)
        .map_err(|e| WrapperError::TypeCoercion {
            table: key.clone(),
            row,
            field: field.name.clone(),
            lexical: e.lexical,
            dtype: field.dtype,
        })
}

fn parse_tabular(
    key: &TableKey,
    def: &SourceTableDef,
    path: &Path,
    text: &str,
) -> Result<Table, WrapperError> {
    let mut lines = text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or_else(|| WrapperError::MalformedFile {
        path: path.to_path_buf(),
        line: 1,
        message: "missing header line".into(),
    })?;
    let header: Vec<&str> = header.split('|').map(str::trim).collect();
    let columns = def
        .fields
        .iter()
        .map(|f| {
            header
                .iter()
                .position(|h| *h == f.name)
                .ok_or_else(|| WrapperError::MissingColumn {
                    table: key.clone(),
                    field: f.name.clone(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    for (row_no, (line_idx, line)) in lines.enumerate() {
        let raw: Vec<&str> = line.split('|').collect();
        if raw.len() != header.len() {
            return Err(WrapperError::MalformedFile {
                path: path.to_path_buf(),
                line: line_idx + 1,
                message: format!("expected {} cells, found {}", header.len(), raw.len()),
            });
        }
        let cells = def
            .fields
            .iter()
            .zip(&columns)
            .map(|(f, &c)| coerce(key, row_no + 1, f, raw[c]))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row { cells });
    }
    Ok(Table {
        name: def.name.clone(),
        fields: def.fields.clone(),
        rows,
    })
}

fn run_transform(command: &str, input: &str, cwd: &Path) -> Result<String, WrapperError> {
    let fail = |message: String| WrapperError::Transform {
        command: command.to_string(),
        message,
    };
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .current_dir(if cwd.as_os_str().is_empty() { Path::new(".") } else { cwd })
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| fail(e.to_string()))?;
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let input = input.to_string();
    let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
    let output = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
    // A transform may exit without reading all of its input.
    let _ = writer.join();
    if !output.status.success() {
        return Err(fail(format!(
            "exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    String::from_utf8(output.stdout).map_err(|e| fail(e.to_string()))
}

fn bind_xml(
    key: &TableKey,
    def: &SourceTableDef,
    binding: &XmlBinding,
    path: &Path,
    text: &str,
) -> Result<Table, WrapperError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| WrapperError::MalformedFile {
        path: path.to_path_buf(),
        line: e.pos().row as usize,
        message: e.to_string(),
    })?;
    let elements: Vec<&str> = def
        .fields
        .iter()
        .map(|f| {
            binding
                .fields
                .iter()
                .find(|(field, _)| *field == f.name)
                .map_or(f.name.as_str(), |(_, element)| element.as_str())
        })
        .collect();
    let mut rows = Vec::new();
    for (i, record) in doc
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == binding.record)
        .enumerate()
    {
        let cells = def
            .fields
            .iter()
            .zip(&elements)
            .map(|(f, element)| {
                let text: String = record
                    .children()
                    .find(|c| c.is_element() && c.tag_name().name() == *element)
                    .map(|c| {
                        c.descendants()
                            .filter(|d| d.is_text())
                            .filter_map(|d| d.text())
                            .collect()
                    })
                    .unwrap_or_default();
                coerce(key, i + 1, f, text.trim())
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row { cells });
    }
    Ok(Table {
        name: def.name.clone(),
        fields: def.fields.clone(),
        rows,
    })
}

/// Evaluates a single-table `SELECT ... [WHERE ...]` over a table of
/// `source`. Result columns are the projected fields, in SELECT order.
pub fn evaluate_view(
    project: &Project,
    source: &str,
    view_def: &str,
    log: &AccessLog,
) -> Result<Table, WrapperError> {
    view_at_depth(project, source, view_def, log, 1)
}

fn view_at_depth(
    project: &Project,
    source: &str,
    view_def: &str,
    log: &AccessLog,
    depth: usize,
) -> Result<Table, WrapperError> {
    let view_err = |e: SqlError| WrapperError::View {
        table: TableKey::new(source, "<view>"),
        source: e,
    };
    let stmt = parse_statement(view_def).map_err(view_err)?;
    if stmt.from.len() != 1 || stmt.has_join_syntax {
        return Err(view_err(SqlError::Unsupported("join in view".into())));
    }
    let base_name = &stmt.from[0];
    let base_key = TableKey::new(source, base_name);
    if project.source_table(&base_key).is_none() {
        return Err(view_err(SqlError::UnknownTable(base_name.clone())));
    }
    let column = |c: &ColumnRef| -> Result<usize, SqlError> {
        if let Some(t) = &c.table {
            if t != base_name {
                return Err(SqlError::UnknownTable(t.clone()));
            }
        }
        project
            .source_table(&base_key)
            .and_then(|def| def.fields.iter().position(|f| f.name == c.field))
            .ok_or_else(|| SqlError::UnknownField(format!("{base_name}.{}", c.field)))
    };
    let projection = stmt
        .select
        .iter()
        .map(&column)
        .collect::<Result<Vec<_>, _>>()
        .map_err(view_err)?;
    let filters = stmt
        .filters
        .iter()
        .map(|c| {
            Ok::<_, SqlError>((
                column(&c.lhs)?,
                c,
                match &c.rhs {
                    Operand::Field(f) => Some(column(f)?),
                    Operand::Literal(_) => None,
                },
            ))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(view_err)?;

    let base = fetch_at_depth(project, &base_key, log, depth)?;
    let keep = |row: &Row| {
        filters.iter().all(|(lhs, cond, rhs_col): &(usize, &Condition<ColumnRef>, Option<usize>)| {
            let Some(left) = row.cells[*lhs].value() else {
                return false;
            };
            let right = match (rhs_col, &cond.rhs) {
                (Some(c), _) => row.cells[*c].value(),
                (None, Operand::Literal(lit)) => Some(lit),
                (None, Operand::Field(_)) => unreachable!("field operands have a column"),
            };
            right.is_some_and(|right| compare_literals(cond.op, left, right) == Some(true))
        })
    };
    let rows = base
        .rows
        .iter()
        .filter(|r| keep(r))
        .map(|r| Row {
            cells: projection.iter().map(|&c| r.cells[c].clone()).collect(),
        })
        .collect();
    Ok(Table {
        name: base.name.clone(),
        fields: projection.iter().map(|&c| base.fields[c].clone()).collect(),
        rows,
    })
}

/// Reorders and retypes a view result to the view table's declared fields.
fn conform_view(key: &TableKey, def: &SourceTableDef, result: Table) -> Result<Table, WrapperError> {
    let columns = def
        .fields
        .iter()
        .map(|f| {
            result.column(&f.name).ok_or_else(|| WrapperError::MissingColumn {
                table: key.clone(),
                field: f.name.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(result.rows.len());
    for (i, row) in result.rows.iter().enumerate() {
        let cells = def
            .fields
            .iter()
            .zip(&columns)
            .map(|(f, &c)| match &row.cells[c] {
                Cell::Missing => Ok(Cell::Missing),
                Cell::Value(v) => v.coerce(f.dtype).map(Cell::Value).map_err(|e| {
                    WrapperError::TypeCoercion {
                        table: key.clone(),
                        row: i + 1,
                        field: f.name.clone(),
                        lexical: e.lexical,
                        dtype: f.dtype,
                    }
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row { cells });
    }
    Ok(Table {
        name: def.name.clone(),
        fields: def.fields.clone(),
        rows,
    })
}
