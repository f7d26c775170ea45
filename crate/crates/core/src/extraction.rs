//! Data extraction and integration.
//!
//! For each integrated table a query needs, the first field's source table
//! is the *master*: every master row yields exactly one integrated row.
//! Fields mapped into the master table are copied directly; fields mapped
//! elsewhere are looked up by following equality relations from the master
//! table to the foreign table, hop by hop. The materialized tables are then
//! emitted as triples.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::descriptors::{DerivedOp, FieldRef, Project, Relation, TableKey};
use crate::rdql::{PatternTerm, RdqlQuery};
use crate::sql_to_rdql::{property_iri, BASE_IRI};
use crate::triple_store::{Iri, Triple, TripleStore};
use crate::value::{Fixed, Literal};
use crate::wrappers::{fetch_table, AccessLog, Cell, Row, Table, WrapperError};

/// Derivations nest at most this deep; deeper chains mean a cycle slipped
/// past the schema check.
const MAX_DERIVATION_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractionError {
    #[error("malformed property IRI <{0}>")]
    MalformedPropertyIri(String),
    #[error("unknown integrated table `{0}`")]
    UnknownTable(String),
    #[error("no relation path from master table {master} to {target} for field {table}.{field}")]
    NoRelationPath {
        table: String,
        field: String,
        master: Box<TableKey>,
        target: Box<TableKey>,
    },
    #[error("cannot compute {table}.{field}: {message}")]
    Derivation {
        table: String,
        field: String,
        message: String,
    },
    #[error("value `{lexical}` for {table}.{field} does not fit the integrated type {dtype}")]
    Coercion {
        table: String,
        field: String,
        lexical: String,
        dtype: crate::value::Dtype,
    },
    #[error(transparent)]
    Wrapper(#[from] WrapperError),
}

/// Materialized integrated tables, keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntegratedData {
    pub tables: BTreeMap<String, Table>,
}

/// Integrated tables mentioned by the query's property IRIs. A variable
/// predicate could match any table, so it requires all of them.
pub fn required_tables(
    query: &RdqlQuery,
    schema: &crate::descriptors::IntegratedSchema,
) -> Result<BTreeSet<String>, ExtractionError> {
    let mut out = BTreeSet::new();
    for pattern in &query.patterns {
        match &pattern.p {
            PatternTerm::Iri(iri) => {
                let table = table_of_property(iri.as_str())?;
                if schema.table(table).is_none() {
                    return Err(ExtractionError::UnknownTable(table.to_string()));
                }
                out.insert(table.to_string());
            }
            PatternTerm::Var(_) => {
                out.extend(schema.tables.iter().map(|t| t.name.clone()));
            }
            PatternTerm::Literal(lit) => {
                return Err(ExtractionError::MalformedPropertyIri(lit.lexical().to_string()))
            }
        }
    }
    Ok(out)
}

/// Splits `http://integratedDB/T#F` into its table name.
fn table_of_property(iri: &str) -> Result<&str, ExtractionError> {
    let malformed = || ExtractionError::MalformedPropertyIri(iri.to_string());
    let local = iri.strip_prefix(BASE_IRI).ok_or_else(malformed)?;
    let (table, field) = local.split_once('#').ok_or_else(malformed)?;
    let ident = crate::descriptors::is_identifier;
    if ident(table) && ident(field) {
        Ok(table)
    } else {
        Err(malformed())
    }
}

/// How the wrappers are driven while materializing. Implementations may
/// fetch in any order or concurrently; results are keyed by table.
pub trait TableSource: Sync {
    fn fetch_all(
        &self,
        project: &Project,
        keys: &[TableKey],
        log: &AccessLog,
    ) -> Result<HashMap<TableKey, Table>, WrapperError>;
}

/// Fetches one table after another, in the order given.
#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialFetch;

impl TableSource for SequentialFetch {
    fn fetch_all(
        &self,
        project: &Project,
        keys: &[TableKey],
        log: &AccessLog,
    ) -> Result<HashMap<TableKey, Table>, WrapperError> {
        keys.iter()
            .map(|k| Ok((k.clone(), fetch_table(project, &k.source, &k.table, log)?)))
            .collect()
    }
}

/// Fetches every table on its own thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParallelFetch;

impl TableSource for ParallelFetch {
    fn fetch_all(
        &self,
        project: &Project,
        keys: &[TableKey],
        log: &AccessLog,
    ) -> Result<HashMap<TableKey, Table>, WrapperError> {
        std::thread::scope(|scope| {
            let handles: Vec<_> = keys
                .iter()
                .map(|k| {
                    scope.spawn(move || {
                        fetch_table(project, &k.source, &k.table, log).map(|t| (k.clone(), t))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("wrapper thread panicked"))
                .collect()
        })
    }
}

/// One hop along an equality relation: rows of `to` whose `to_fields`
/// equal the current row's `from_fields`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Hop {
    to: TableKey,
    from_fields: Vec<String>,
    to_fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum ValueSource {
    /// A field of a source table reachable from the master table.
    Field { table: TableKey, field: String },
    Derived {
        op: DerivedOp,
        operands: Vec<ValueSource>,
    },
}

/// Where every field of one integrated table comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TablePlan {
    pub name: String,
    pub master: TableKey,
    /// Hops from the master to each linked table.
    paths: BTreeMap<TableKey, Vec<Hop>>,
    fields: Vec<ValueSource>,
}

impl TablePlan {
    /// Every source table materialization will read: the master plus each
    /// table on a relation path.
    pub fn source_tables(&self) -> Vec<TableKey> {
        let mut out = vec![self.master.clone()];
        for hops in self.paths.values() {
            for hop in hops {
                if !out.contains(&hop.to) {
                    out.push(hop.to.clone());
                }
            }
        }
        out
    }
}

type Edge = (TableKey, TableKey, Vec<(String, String)>);

/// Equality relations usable as hops: each side confined to one table and
/// the two tables distinct.
fn equality_edges(project: &Project) -> Vec<Edge> {
    let mut edges = Vec::new();
    for relation in &project.schema.relations {
        let Relation::Equality { lhs, rhs } = relation else {
            continue;
        };
        if lhs.is_empty() || lhs.len() != rhs.len() {
            continue;
        }
        let single_table = |refs: &[FieldRef]| {
            let key = refs[0].table_key();
            refs.iter().all(|r| r.table_key() == key).then_some(key)
        };
        let (Some(a), Some(b)) = (single_table(lhs), single_table(rhs)) else {
            continue;
        };
        if a == b {
            continue;
        }
        let pairs = lhs
            .iter()
            .zip(rhs)
            .map(|(l, r)| (l.field.clone(), r.field.clone()))
            .collect();
        edges.push((a, b, pairs));
    }
    edges
}

/// Shortest relation chains from `master` to every reachable table,
/// breadth-first with ties broken by relation order.
fn relation_paths(project: &Project, master: &TableKey) -> HashMap<TableKey, Vec<Hop>> {
    let edges = equality_edges(project);
    let mut paths: HashMap<TableKey, Vec<Hop>> = HashMap::new();
    paths.insert(master.clone(), Vec::new());
    let mut queue = VecDeque::from([master.clone()]);
    while let Some(at) = queue.pop_front() {
        for (a, b, pairs) in &edges {
            let hop = if *a == at {
                Hop {
                    to: b.clone(),
                    from_fields: pairs.iter().map(|(l, _)| l.clone()).collect(),
                    to_fields: pairs.iter().map(|(_, r)| r.clone()).collect(),
                }
            } else if *b == at {
                Hop {
                    to: a.clone(),
                    from_fields: pairs.iter().map(|(_, r)| r.clone()).collect(),
                    to_fields: pairs.iter().map(|(l, _)| l.clone()).collect(),
                }
            } else {
                continue;
            };
            if paths.contains_key(&hop.to) {
                continue;
            }
            let mut path = paths[&at].clone();
            queue.push_back(hop.to.clone());
            path.push(hop.clone());
            paths.insert(hop.to, path);
        }
    }
    paths
}

/// Works out where each field of `table_name` comes from, without touching
/// any source.
pub fn plan_table(project: &Project, table_name: &str) -> Result<TablePlan, ExtractionError> {
    let def = project
        .schema
        .table(table_name)
        .ok_or_else(|| ExtractionError::UnknownTable(table_name.to_string()))?;
    let master = def.fields[0].mapping.table_key();
    let reachable = relation_paths(project, &master);
    let mut paths = BTreeMap::new();

    fn source_for(
        project: &Project,
        r: &FieldRef,
        depth: usize,
        reachable: &HashMap<TableKey, Vec<Hop>>,
        paths: &mut BTreeMap<TableKey, Vec<Hop>>,
        fail: &dyn Fn(&FieldRef, String) -> ExtractionError,
    ) -> Result<ValueSource, ExtractionError> {
        if depth > MAX_DERIVATION_DEPTH {
            return Err(fail(r, "derivation nests too deeply (cycle?)".into()));
        }
        let derived = project.schema.relations.iter().find_map(|rel| match rel {
            Relation::Derived {
                target,
                op,
                operands,
            } if target == r => Some((*op, operands)),
            _ => None,
        });
        if let Some((op, operands)) = derived {
            let operands = operands
                .iter()
                .map(|o| source_for(project, o, depth + 1, reachable, paths, fail))
                .collect::<Result<_, _>>()?;
            return Ok(ValueSource::Derived { op, operands });
        }
        let table = r.table_key();
        let path = reachable
            .get(&table)
            .ok_or_else(|| fail(r, String::new()))?;
        if !path.is_empty() {
            paths.insert(table.clone(), path.clone());
        }
        Ok(ValueSource::Field {
            table,
            field: r.field.clone(),
        })
    }

    let mut fields = Vec::with_capacity(def.fields.len());
    for field in &def.fields {
        let fail = |r: &FieldRef, message: String| {
            if message.is_empty() {
                ExtractionError::NoRelationPath {
                    table: table_name.to_string(),
                    field: field.name.clone(),
                    master: Box::new(master.clone()),
                    target: Box::new(r.table_key()),
                }
            } else {
                ExtractionError::Derivation {
                    table: table_name.to_string(),
                    field: field.name.clone(),
                    message,
                }
            }
        };
        fields.push(source_for(
            project,
            &field.mapping,
            0,
            &reachable,
            &mut paths,
            &fail,
        )?);
    }
    Ok(TablePlan {
        name: table_name.to_string(),
        master,
        paths,
        fields,
    })
}

/// A materialized integrated table plus any ambiguity warnings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Materialized {
    pub table: Table,
    pub warnings: Vec<String>,
}

/// Key lookup over one hop's target table: join key -> (first row, count).
type HopIndex = HashMap<Vec<(u8, String)>, (usize, usize)>;

fn row_key(table: &Table, row: &Row, fields: &[String]) -> Option<Vec<(u8, String)>> {
    fields
        .iter()
        .map(|f| {
            let col = table.column(f)?;
            row.cells[col].value().map(Literal::join_key)
        })
        .collect()
}

/// Builds the integrated table `table_name` from its source tables.
pub fn materialize_integrated_table(
    project: &Project,
    table_name: &str,
    wrappers: &dyn TableSource,
    log: &AccessLog,
) -> Result<Materialized, ExtractionError> {
    let plan = plan_table(project, table_name)?;
    let def = project.schema.table(table_name).expect("planned table exists");
    let keys = plan.source_tables();
    let sources = wrappers.fetch_all(project, &keys, log)?;

    let mut indexes: HashMap<(TableKey, usize), HopIndex> = HashMap::new();
    for hops in plan.paths.values() {
        for (i, hop) in hops.iter().enumerate() {
            let slot = (hop.to.clone(), i);
            if indexes.contains_key(&slot) {
                continue;
            }
            let target = &sources[&hop.to];
            let mut index = HopIndex::new();
            for (r, row) in target.rows.iter().enumerate() {
                if let Some(key) = row_key(target, row, &hop.to_fields) {
                    index.entry(key).or_insert((r, 0)).1 += 1;
                }
            }
            indexes.insert(slot, index);
        }
    }

    let master = &sources[&plan.master];
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(master.rows.len());
    for m in 0..master.rows.len() {
        // Row of each linked table that this master row joins to.
        let mut linked: HashMap<&TableKey, Option<usize>> = HashMap::new();
        for (target, hops) in &plan.paths {
            let mut current = (&plan.master, Some(m));
            for (i, hop) in hops.iter().enumerate() {
                let next = current.1.and_then(|r| {
                    let from = &sources[current.0];
                    let key = row_key(from, &from.rows[r], &hop.from_fields)?;
                    let &(first, count) = indexes[&(hop.to.clone(), i)].get(&key)?;
                    if count > 1 {
                        warnings.push(format!(
                            "{table_name} row {m}: {count} rows of {} match, using the first",
                            hop.to
                        ));
                    }
                    Some(first)
                });
                current = (&hop.to, next);
            }
            linked.insert(target, current.1);
        }

        let mut cells = Vec::with_capacity(def.fields.len());
        for (field, source) in def.fields.iter().zip(&plan.fields) {
            let value = evaluate_source(source, &plan, &sources, m, &linked).map_err(|message| {
                ExtractionError::Derivation {
                    table: table_name.to_string(),
                    field: field.name.clone(),
                    message,
                }
            })?;
            cells.push(match value {
                None => Cell::Missing,
                Some(v) => Cell::Value(v.coerce(field.dtype).map_err(|e| {
                    ExtractionError::Coercion {
                        table: table_name.to_string(),
                        field: field.name.clone(),
                        lexical: e.lexical,
                        dtype: field.dtype,
                    }
                })?),
            });
        }
        rows.push(Row { cells });
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Materialized {
        table: Table {
            name: def.name.clone(),
            fields: def
                .fields
                .iter()
                .map(|f| crate::descriptors::SourceFieldDef {
                    name: f.name.clone(),
                    dtype: f.dtype,
                })
                .collect(),
            rows,
        },
        warnings,
    })
}

fn evaluate_source(
    source: &ValueSource,
    plan: &TablePlan,
    sources: &HashMap<TableKey, Table>,
    master_row: usize,
    linked: &HashMap<&TableKey, Option<usize>>,
) -> Result<Option<Literal>, String> {
    match source {
        ValueSource::Field { table, field } => {
            let row = if *table == plan.master {
                Some(master_row)
            } else {
                linked[table]
            };
            let Some(row) = row else {
                return Ok(None);
            };
            let t = &sources[table];
            let col = t
                .column(field)
                .ok_or_else(|| format!("{table} has no field `{field}`"))?;
            Ok(t.rows[row].cells[col].value().cloned())
        }
        ValueSource::Derived { op, operands } => {
            let mut values = Vec::with_capacity(operands.len());
            for operand in operands {
                match evaluate_source(operand, plan, sources, master_row, linked)? {
                    Some(v) => values.push(v),
                    None => return Ok(None),
                }
            }
            match op {
                DerivedOp::Concat => Ok(Some(Literal::string(
                    values.iter().map(Literal::lexical).collect::<String>(),
                ))),
                DerivedOp::Add => {
                    let mut sum = Fixed::zero();
                    for v in &values {
                        let n = Fixed::from_literal(v)
                            .filter(|_| v.dtype().is_numeric())
                            .ok_or_else(|| format!("`{v}` is not numeric"))?;
                        sum = sum.checked_add(n).ok_or("numeric overflow")?;
                    }
                    Ok(Some(sum.to_decimal()))
                }
            }
        }
    }
}

/// Subject IRI of row `n` of integrated table `table`.
pub fn row_iri(table: &str, n: usize) -> Iri {
    Iri::new(&format!("{BASE_IRI}{table}/row/{n}")).expect("identifiers form valid IRIs")
}

/// One triple per non-missing cell.
pub fn build_triples(data: &IntegratedData) -> TripleStore {
    let mut store = TripleStore::new();
    for (name, table) in &data.tables {
        let predicates: Vec<Iri> = table
            .fields
            .iter()
            .map(|f| property_iri(name, &f.name))
            .collect();
        for (n, row) in table.rows.iter().enumerate() {
            let subject = row_iri(name, n);
            for (cell, predicate) in row.cells.iter().zip(&predicates) {
                if let Cell::Value(v) = cell {
                    store.insert(Triple::new(subject.clone(), predicate.clone(), v.clone()));
                }
            }
        }
    }
    store
}
