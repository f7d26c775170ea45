//! Random projects, random queries and brute-force oracles shared by the
//! integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Mutex;
use std::time::Duration;

use medquery_core::descriptors::{escape_xml, parse_project_str};
use medquery_core::extraction::{IntegratedData, TableSource};
use medquery_core::rdql::{parse_rdql, FilterOperand, PatternTerm, RdqlQuery, ResultSet};
use medquery_core::schema_check::check_schema;
use medquery_core::sql::{Operand, SqlQuery};
use medquery_core::triple_store::{Iri, Term, Triple, TripleStore};
use medquery_core::value::Comparator;
use medquery_core::wrappers::{fetch_table, AccessLog, Cell, Table, WrapperError};
use medquery_core::{Dtype, Literal, Project, TableKey};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub const OPS: [Comparator; 6] = [
    Comparator::Eq,
    Comparator::Ne,
    Comparator::Lt,
    Comparator::Le,
    Comparator::Gt,
    Comparator::Ge,
];

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Random projects

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub integrated_tables: std::ops::RangeInclusive<usize>,
    pub max_rows: usize,
    pub max_relations: usize,
    pub derived: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            integrated_tables: 1..=3,
            max_rows: 20,
            max_relations: 3,
            derived: true,
        }
    }
}

#[derive(Debug, Clone)]
struct GenTable {
    source: String,
    name: String,
    xml: bool,
    fields: Vec<(String, Dtype)>,
    rows: Vec<Vec<Option<String>>>,
}

pub struct GenProject {
    pub dir: tempfile::TempDir,
    pub project: Project,
    pub sources_xml: String,
    pub schema_xml: String,
}

const TABLE_NAMES: [&str; 3] = ["PERSON", "GRADE", "COURSE"];
const STRINGS: [&str; 5] = ["a", "b", "c", "a b", "\u{fc}ber"];

pub fn random_dtype(rng: &mut StdRng) -> Dtype {
    *Dtype::ALL.choose(rng).unwrap()
}

/// A lexical value of `dtype`, not necessarily canonical.
pub fn random_lexical(rng: &mut StdRng, dtype: Dtype) -> String {
    match dtype {
        Dtype::Integer => rng.gen_range(-3..7).to_string(),
        Dtype::Decimal => {
            let frac = ["0", "5", "25", "50"].choose(rng).unwrap();
            format!("{}.{frac}", rng.gen_range(-2..5))
        }
        Dtype::String => STRINGS.choose(rng).unwrap().to_string(),
        Dtype::Boolean => ["true", "false", "TRUE"].choose(rng).unwrap().to_string(),
    }
}

fn random_source_table(rng: &mut StdRng, i: usize, max_rows: usize) -> GenTable {
    let xml = rng.gen_bool(0.25);
    let mut fields = vec![("K".to_string(), Dtype::Integer)];
    for j in 1..=rng.gen_range(1..=3) {
        fields.push((format!("V{j}"), random_dtype(rng)));
    }
    let rows = (0..rng.gen_range(0..=max_rows))
        .map(|_| {
            fields
                .iter()
                .map(|(name, dtype)| {
                    if rng.gen_bool(0.1) {
                        None
                    } else if name == "K" {
                        Some(rng.gen_range(0..5).to_string())
                    } else {
                        Some(random_lexical(rng, *dtype))
                    }
                })
                .collect()
        })
        .collect();
    GenTable {
        source: if xml { format!("x{i}") } else { ["alpha", "beta"][i % 2].to_string() },
        name: format!("S{i}"),
        xml,
        fields,
        rows,
    }
}

fn ref_xml(tag: &str, t: &GenTable, field: &str) -> String {
    format!(
        r#"<{tag} source="{}" table="{}" field="{field}"/>"#,
        t.source, t.name
    )
}

/// Writes a random project into a fresh directory and parses it. Every
/// generated project passes the schema check.
pub fn random_project(rng: &mut StdRng, opts: &GenOptions) -> GenProject {
    let n_sources = rng.gen_range(2..=5);
    let tables: Vec<GenTable> = (0..n_sources)
        .map(|i| random_source_table(rng, i, opts.max_rows))
        .collect();

    // Relations, plus the equality edges they induce between tables.
    let mut relations = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut derived_targets: HashMap<(usize, String), (&'static str, Dtype)> = HashMap::new();
    for _ in 0..rng.gen_range(0..=opts.max_relations) {
        let a = rng.gen_range(0..n_sources);
        let b = (a + rng.gen_range(1..n_sources)) % n_sources;
        let (ta, tb) = (&tables[a], &tables[b]);
        let derive = opts.derived && derived_targets.is_empty() && rng.gen_bool(0.2);
        if derive {
            let numeric = |t: &GenTable, d: Dtype| {
                t.fields
                    .iter()
                    .filter(|(n, dt)| n != "K" && *dt == d)
                    .map(|(n, _)| n.clone())
                    .collect::<Vec<_>>()
            };
            let string_targets = numeric(ta, Dtype::String);
            let int_targets = numeric(ta, Dtype::Integer);
            // Operands stay in the target's table so every derivation is
            // computable wherever the target is.
            if let Some(target) = int_targets.choose(rng) {
                let others: Vec<String> =
                    int_targets.iter().filter(|f| *f != target).cloned().collect();
                let second = others.choose(rng).cloned().unwrap_or_else(|| "K".into());
                relations.push(format!(
                    r#"<relation kind="derived" op="add">{}{}{}</relation>"#,
                    ref_xml("target", ta, target),
                    ref_xml("operand", ta, "K"),
                    ref_xml("operand", ta, &second)
                ));
                derived_targets.insert((a, target.clone()), ("add", Dtype::Integer));
            } else if let Some(target) = string_targets.choose(rng) {
                let (second, _) = ta.fields.iter().find(|(f, _)| f != target).unwrap();
                relations.push(format!(
                    r#"<relation kind="derived" op="concat">{}{}{}</relation>"#,
                    ref_xml("target", ta, target),
                    ref_xml("operand", ta, second),
                    ref_xml("operand", ta, "K")
                ));
                derived_targets.insert((a, target.clone()), ("concat", Dtype::String));
            }
            continue;
        }
        let mut pairs = vec![("K".to_string(), "K".to_string())];
        if rng.gen_bool(0.3) {
            // a second pair of same-typed non-key fields, or a different first pair
            let candidates: Vec<(String, String)> = ta
                .fields
                .iter()
                .skip(1)
                .flat_map(|(fa, da)| {
                    tb.fields
                        .iter()
                        .skip(1)
                        .filter(move |(_, db)| db == da)
                        .map(move |(fb, _)| (fa.clone(), fb.clone()))
                })
                .collect();
            if let Some(pair) = candidates.choose(rng) {
                if rng.gen_bool(0.5) {
                    pairs.push(pair.clone());
                } else {
                    pairs[0] = pair.clone();
                }
            }
        }
        let lhs: String = pairs.iter().map(|(f, _)| ref_xml("ref", ta, f)).collect();
        let rhs: String = pairs.iter().map(|(_, f)| ref_xml("ref", tb, f)).collect();
        relations.push(format!(
            r#"<relation kind="equality"><lhs>{lhs}</lhs><rhs>{rhs}</rhs></relation>"#
        ));
        edges.push((a, b));
    }

    let reachable = |from: usize| -> Vec<usize> {
        let mut seen = vec![from];
        let mut i = 0;
        while i < seen.len() {
            let at = seen[i];
            for &(a, b) in &edges {
                for (x, y) in [(a, b), (b, a)] {
                    if x == at && !seen.contains(&y) {
                        seen.push(y);
                    }
                }
            }
            i += 1;
        }
        seen
    };

    let n_integrated = rng.gen_range(opts.integrated_tables.clone());
    let mut schema = String::from(r#"<schema name="generated">"#);
    for name in TABLE_NAMES.iter().take(n_integrated) {
        let master = rng.gen_range(0..n_sources);
        let reach = reachable(master);
        let mut used = HashSet::new();
        write!(schema, r#"<table name="{name}">"#).unwrap();
        for j in 0..rng.gen_range(1..=4) {
            let t = if j == 0 { master } else { *reach.choose(rng).unwrap() };
            let (field, src_dtype) = tables[t].fields.choose(rng).unwrap().clone();
            let mut fname = field.clone();
            let mut k = 2;
            while !used.insert(fname.clone()) {
                fname = format!("{field}_{k}");
                k += 1;
            }
            let dtype = match derived_targets.get(&(t, field.clone())) {
                Some(&(_, d)) => d,
                None if src_dtype == Dtype::Integer && rng.gen_bool(0.2) => Dtype::Decimal,
                None if rng.gen_bool(0.1) => Dtype::String,
                None => src_dtype,
            };
            write!(
                schema,
                r#"<field name="{fname}" type="{dtype}" source="{}" sourcetable="{}" sourcefield="{field}"/>"#,
                tables[t].source, tables[t].name
            )
            .unwrap();
        }
        schema.push_str("</table>");
    }
    schema.push_str(&relations.concat());
    schema.push_str("</schema>");

    let dir = tempfile::tempdir().unwrap();
    let mut sources = String::from("<datasources>");
    let mut tabular: HashMap<&str, Vec<&GenTable>> = HashMap::new();
    for t in &tables {
        if t.xml {
            let file = format!("{}.xml", t.name);
            let mut doc = String::from("<records>");
            for row in &t.rows {
                doc.push_str("<rec>");
                for ((f, _), v) in t.fields.iter().zip(row) {
                    if let Some(v) = v {
                        write!(doc, "<{}>{}</{}>", f.to_lowercase(), escape_xml(v), f.to_lowercase())
                            .unwrap();
                    }
                }
                doc.push_str("</rec>");
            }
            doc.push_str("</records>");
            std::fs::write(dir.path().join(&file), doc).unwrap();
            write!(
                sources,
                r#"<datasource name="{}" kind="xml" location="{file}"><table name="{}">{}<xmlbinding record="rec">{}</xmlbinding></table></datasource>"#,
                t.source,
                t.name,
                field_defs(t),
                t.fields
                    .iter()
                    .map(|(f, _)| format!(r#"<map field="{f}" element="{}"/>"#, f.to_lowercase()))
                    .collect::<String>()
            )
            .unwrap();
        } else {
            let mut text = t.fields.iter().map(|(f, _)| f.as_str()).collect::<Vec<_>>().join("|");
            text.push('\n');
            for row in &t.rows {
                let cells: Vec<&str> = row.iter().map(|c| c.as_deref().unwrap_or("")).collect();
                text.push_str(&cells.join("|"));
                text.push('\n');
            }
            std::fs::write(dir.path().join(format!("{}.txt", t.name)), text).unwrap();
            tabular.entry(t.source.as_str()).or_default().push(t);
        }
    }
    let mut names: Vec<_> = tabular.keys().copied().collect();
    names.sort();
    for source in names {
        write!(sources, r#"<datasource name="{source}" kind="tabular" location=".">"#).unwrap();
        for t in &tabular[source] {
            write!(
                sources,
                r#"<table name="{}">{}<file path="{}.txt"/></table>"#,
                t.name,
                field_defs(t),
                t.name
            )
            .unwrap();
        }
        sources.push_str("</datasource>");
    }
    sources.push_str("</datasources>");

    let project = parse_project_str(&sources, &schema, dir.path().to_path_buf())
        .unwrap_or_else(|e| panic!("{e}\n{sources}\n{schema}"));
    let report = check_schema(&project);
    assert!(report.is_accepted(), "{}\n{schema}", report.render_text());
    GenProject {
        dir,
        project,
        sources_xml: sources,
        schema_xml: schema,
    }
}

fn field_defs(t: &GenTable) -> String {
    t.fields
        .iter()
        .map(|(f, d)| format!(r#"<field name="{f}" type="{d}"/>"#))
        .collect()
}

// ---------------------------------------------------------------------------
// Random SQL

pub fn sql_literal(rng: &mut StdRng, dtype: Dtype) -> String {
    match dtype {
        Dtype::String => format!("'{}'", STRINGS.choose(rng).unwrap()),
        Dtype::Boolean => ["TRUE", "FALSE"].choose(rng).unwrap().to_string(),
        d => random_lexical(rng, d),
    }
}

/// A random query in the supported subset over `project`'s schema.
pub fn random_sql(rng: &mut StdRng, project: &Project) -> String {
    let schema = &project.schema;
    let k = rng.gen_range(1..=schema.tables.len().min(3));
    let mut tables: Vec<_> = schema.tables.iter().collect();
    tables.shuffle(rng);
    tables.truncate(k);
    let field_of = |rng: &mut StdRng, t: usize| {
        let f = tables[t].fields.choose(rng).unwrap();
        (format!("{}.{}", tables[t].name, f.name), f.dtype)
    };

    let mut select = vec![field_of(rng, 0).0];
    for _ in 0..rng.gen_range(0..=2) {
        let t = rng.gen_range(0..k);
        select.push(field_of(rng, t).0);
    }

    let mut joins = Vec::new();
    for i in 1..k {
        let mut pick = || {
            let (a, da) = field_of(rng, i);
            let j = rng.gen_range(0..i);
            let (b, db) = field_of(rng, j);
            (a, b, da == db)
        };
        let mut cond = pick();
        for _ in 0..4 {
            if cond.2 {
                break;
            }
            cond = pick();
        }
        joins.push(format!("{} = {}", cond.0, cond.1));
    }

    let mut filters = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let t = rng.gen_range(0..k);
        let (lhs, dtype) = field_of(rng, t);
        let op = OPS.choose(rng).unwrap();
        let rhs = if rng.gen_bool(0.25) {
            let t = rng.gen_range(0..k);
            field_of(rng, t).0
        } else if rng.gen_bool(0.85) {
            sql_literal(rng, dtype)
        } else {
            let d = random_dtype(rng);
            sql_literal(rng, d)
        };
        if rng.gen_bool(0.1) && !rhs.contains('.') || rhs.starts_with('\'') && rng.gen_bool(0.2) {
            // literal on the left
            filters.push(format!("{rhs} {} {lhs}", op.flip()));
        } else {
            filters.push(format!("{lhs} {op} {rhs}"));
        }
    }

    let names: Vec<&str> = tables.iter().map(|t| t.name.as_str()).collect();
    let mut sql = format!("SELECT {} ", select.join(", "));
    match rng.gen_range(0..3) {
        0 => {
            write!(sql, "FROM {}", names.join(", ")).unwrap();
            if !joins.is_empty() {
                write!(sql, " ON {}", joins.join(" AND ")).unwrap();
            }
        }
        1 => {
            write!(sql, "FROM {}", names[0]).unwrap();
            for (name, cond) in names[1..].iter().zip(&joins) {
                write!(sql, " JOIN {name} ON {cond}").unwrap();
            }
        }
        _ => {
            write!(sql, "FROM {}", names.join(", ")).unwrap();
            filters.splice(0..0, joins);
        }
    }
    if !filters.is_empty() {
        write!(sql, " WHERE {}", filters.join(" AND ")).unwrap();
    }
    sql
}

// ---------------------------------------------------------------------------
// Oracles

/// Exact value of a numeric lexical form as (numerator, decimal scale).
fn rational(lexical: &str) -> (i128, u32) {
    let (int, frac) = lexical.split_once('.').unwrap_or((lexical, ""));
    let digits = format!("{int}{frac}");
    (digits.parse().unwrap(), frac.len() as u32)
}

fn cmp_numeric(a: &str, b: &str) -> Ordering {
    let ((na, sa), (nb, sb)) = (rational(a), rational(b));
    let scale = sa.max(sb);
    (na * 10i128.pow(scale - sa)).cmp(&(nb * 10i128.pow(scale - sb)))
}

fn holds(op: Comparator, ord: Ordering) -> bool {
    match op {
        Comparator::Eq => ord == Ordering::Equal,
        Comparator::Ne => ord != Ordering::Equal,
        Comparator::Lt => ord == Ordering::Less,
        Comparator::Le => ord != Ordering::Greater,
        Comparator::Gt => ord == Ordering::Greater,
        Comparator::Ge => ord != Ordering::Less,
    }
}

/// Filter semantics: numbers by value, strings by codepoint, booleans and
/// IRIs by identity only, anything else false.
pub fn oracle_compare(op: Comparator, a: &Term, b: &Term) -> bool {
    let identity_only = matches!(op, Comparator::Eq | Comparator::Ne);
    match (a, b) {
        (Term::Iri(x), Term::Iri(y)) => identity_only && holds(op, x.as_str().cmp(y.as_str())),
        (Term::Literal(x), Term::Literal(y)) => {
            let numeric = |d: Dtype| matches!(d, Dtype::Integer | Dtype::Decimal);
            match (x.dtype(), y.dtype()) {
                (dx, dy) if numeric(dx) && numeric(dy) => {
                    holds(op, cmp_numeric(x.lexical(), y.lexical()))
                }
                (Dtype::String, Dtype::String) => holds(op, x.lexical().cmp(y.lexical())),
                (Dtype::Boolean, Dtype::Boolean) => {
                    identity_only && holds(op, x.lexical().cmp(y.lexical()))
                }
                _ => false,
            }
        }
        _ => false,
    }
}

/// Nested-loop join over the materialized tables, then filter and project.
/// A row combination survives only if every field the query mentions is
/// present.
pub fn relational_oracle(q: &SqlQuery, data: &IntegratedData) -> Vec<Vec<Term>> {
    let tables: Vec<&Table> = q.from.iter().map(|t| &data.tables[t]).collect();
    let position = |table: &str| q.from.iter().position(|t| t == table).unwrap();
    let mentioned = q.fields();
    let mut out = Vec::new();
    let mut combo = vec![0usize; tables.len()];
    if tables.iter().any(|t| t.rows.is_empty()) {
        return out;
    }
    loop {
        let cell = |table: &str, field: &str| -> Option<Term> {
            let t = position(table);
            let col = tables[t].column(field).unwrap();
            match &tables[t].rows[combo[t]].cells[col] {
                Cell::Value(v) => Some(Term::Literal(v.clone())),
                Cell::Missing => None,
            }
        };
        let present = mentioned.iter().all(|f| cell(&f.table, &f.field).is_some());
        let conds_hold = || {
            q.join_conds.iter().chain(&q.filters).all(|c| {
                let lhs = cell(&c.lhs.table, &c.lhs.field).unwrap();
                let rhs = match &c.rhs {
                    Operand::Field(f) => cell(&f.table, &f.field).unwrap(),
                    Operand::Literal(l) => Term::Literal(l.clone()),
                };
                oracle_compare(c.op, &lhs, &rhs)
            })
        };
        if present && conds_hold() {
            out.push(
                q.select
                    .iter()
                    .map(|f| cell(&f.table, &f.field).unwrap())
                    .collect(),
            );
        }
        // next combination
        let mut i = tables.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            combo[i] += 1;
            if combo[i] < tables[i].rows.len() {
                break;
            }
            combo[i] = 0;
        }
    }
}

/// Sorts rows by the N-Triples rendering of their terms.
pub fn canonical(mut rows: Vec<Vec<Term>>) -> Vec<Vec<Term>> {
    rows.sort_by_cached_key(|r| r.iter().map(ToString::to_string).collect::<Vec<_>>());
    rows
}

pub fn render_results(rs: &ResultSet) -> String {
    let mut out = rs.columns.join("|");
    out.push('\n');
    for row in &rs.rows {
        out.push_str(&row.iter().map(ToString::to_string).collect::<Vec<_>>().join("|"));
        out.push('\n');
    }
    out
}

/// Source tables reachable from an integrated table through its mappings
/// and any relation touching an already reachable table.
pub fn reachable_sources(project: &Project, table: &str) -> BTreeSet<TableKey> {
    let def = project.schema.table(table).unwrap();
    let mut out: BTreeSet<TableKey> = def.fields.iter().map(|f| f.mapping.table_key()).collect();
    loop {
        let before = out.len();
        for relation in &project.schema.relations {
            let keys: Vec<TableKey> = relation.refs().iter().map(|r| r.table_key()).collect();
            if keys.iter().any(|k| out.contains(k)) {
                out.extend(keys);
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

// ---------------------------------------------------------------------------
// Fetch interleaving

/// Fetches in a random order on separate threads with random delays.
pub struct ShuffledFetch {
    rng: Mutex<StdRng>,
}

impl ShuffledFetch {
    pub fn new(seed: u64) -> ShuffledFetch {
        ShuffledFetch {
            rng: Mutex::new(rng(seed)),
        }
    }
}

impl TableSource for ShuffledFetch {
    fn fetch_all(
        &self,
        project: &Project,
        keys: &[TableKey],
        log: &AccessLog,
    ) -> Result<HashMap<TableKey, Table>, WrapperError> {
        let mut order: Vec<(TableKey, u64)> = {
            let mut rng = self.rng.lock().unwrap();
            keys.iter().map(|k| (k.clone(), rng.gen_range(0..1500))).collect()
        };
        order.shuffle(&mut *self.rng.lock().unwrap());
        std::thread::scope(|scope| {
            let handles: Vec<_> = order
                .iter()
                .map(|(k, micros)| {
                    scope.spawn(move || {
                        std::thread::sleep(Duration::from_micros(*micros));
                        fetch_table(project, &k.source, &k.table, log).map(|t| (k.clone(), t))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    }
}

pub fn lit(lexical: &str, dtype: Dtype) -> Literal {
    Literal::parse(lexical, dtype).unwrap()
}

// ---------------------------------------------------------------------------
// Random RDQL

pub fn random_store(rng: &mut StdRng, max: usize) -> Vec<Triple> {
    let subjects: Vec<Iri> = (0..6)
        .map(|i| Iri::new(&format!("http://example.org/s{i}")).unwrap())
        .collect();
    let predicates: Vec<Iri> = (0..3)
        .map(|i| Iri::new(&format!("http://example.org/p{i}")).unwrap())
        .collect();
    let objects = object_pool(&subjects);
    (0..rng.gen_range(0..=max))
        .map(|_| {
            Triple::new(
                subjects.choose(rng).unwrap().clone(),
                predicates.choose(rng).unwrap().clone(),
                objects.choose(rng).unwrap().clone(),
            )
        })
        .collect()
}

pub fn object_pool(subjects: &[Iri]) -> Vec<Term> {
    let mut objects: Vec<Term> = subjects.iter().cloned().map(Term::Iri).collect();
    for (lex, d) in [
        ("1", Dtype::Integer),
        ("2", Dtype::Integer),
        ("3", Dtype::Integer),
        ("2.0", Dtype::Decimal),
        ("2.5", Dtype::Decimal),
        ("a", Dtype::String),
        ("b", Dtype::String),
        ("true", Dtype::Boolean),
    ] {
        objects.push(Term::Literal(lit(lex, d)));
    }
    objects
}

pub fn random_rdql(rng: &mut StdRng, store: &TripleStore) -> String {
    let vars = ["a", "b", "c", "d"];
    let terms: Vec<Triple> = store.iter().collect();
    let pick_var = |rng: &mut StdRng| format!("?{}", vars.choose(rng).unwrap());
    let mut patterns = Vec::new();
    if !terms.is_empty() && rng.gen_bool(0.5) {
        // Abstract a connected handful of stored triples, so the query has
        // at least one solution before filtering.
        let mut witness = vec![terms.choose(rng).unwrap().clone()];
        for _ in 1..rng.gen_range(1..=5) {
            let prev = witness.choose(rng).unwrap().clone();
            let start = match &prev.object {
                Term::Iri(o) if rng.gen_bool(0.5) => Term::Iri(o.clone()),
                _ => Term::Iri(prev.subject.clone()),
            };
            let next = store.match_pattern(Some(&start), None, None);
            witness.push(match next.choose(rng) {
                Some(t) if rng.gen_bool(0.8) => t.clone(),
                _ => terms.choose(rng).unwrap().clone(),
            });
        }
        let mut assigned: HashMap<Term, String> = HashMap::new();
        let mut next_var = 0;
        let mut abstract_term = |rng: &mut StdRng, t: Term| -> String {
            if let Some(v) = assigned.get(&t) {
                return format!("?{v}");
            }
            if next_var < vars.len() && rng.gen_bool(0.6) {
                assigned.insert(t, vars[next_var].to_string());
                next_var += 1;
                format!("?{}", vars[next_var - 1])
            } else {
                t.to_string()
            }
        };
        for t in witness {
            let s = abstract_term(rng, Term::Iri(t.subject));
            let p = abstract_term(rng, Term::Iri(t.predicate));
            let o = abstract_term(rng, t.object);
            patterns.push(format!("({s} {p} {o})"));
        }
        if !patterns.iter().any(|p| p.contains('?')) {
            patterns.push("(?a ?b ?c)".to_string());
        }
    } else {
        for _ in 0..rng.gen_range(1..=5) {
            let sample = terms.choose(rng).cloned();
            let constant = |rng: &mut StdRng, pos: usize| -> String {
                match &sample {
                    Some(t) if rng.gen_bool(0.9) => match pos {
                        0 => t.subject.to_string(),
                        1 => t.predicate.to_string(),
                        _ => t.object.to_string(),
                    },
                    _ => "<http://example.org/unused>".to_string(),
                }
            };
            let s = if patterns.is_empty() || rng.gen_bool(0.7) {
                pick_var(rng)
            } else {
                constant(rng, 0)
            };
            let p = if rng.gen_bool(0.3) { pick_var(rng) } else { constant(rng, 1) };
            let o = if rng.gen_bool(0.6) { pick_var(rng) } else { constant(rng, 2) };
            patterns.push(format!("({s} {p} {o})"));
        }
    }
    let text = format!("SELECT * WHERE {}", patterns.join(", "));
    let q = parse_rdql(&text).unwrap();
    let bound: Vec<String> = q.pattern_vars().into_iter().map(str::to_string).collect();
    let mut select: Vec<&String> = bound.iter().filter(|_| rng.gen_bool(0.6)).collect();
    if select.is_empty() {
        select.push(&bound[0]);
    }
    let mut filters = Vec::new();
    let n_filters = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=3) };
    for _ in 0..n_filters {
        let op = OPS.choose(rng).unwrap();
        let lhs = bound.choose(rng).unwrap();
        let rhs = if rng.gen_bool(0.3) {
            format!("?{}", bound.choose(rng).unwrap())
        } else {
            ["2", "2.0", "2.5", "-1", "\"a\"", "\"b\"", "\"true\"^^<http://www.w3.org/2001/XMLSchema#boolean>"]
                .choose(rng)
                .unwrap()
                .to_string()
        };
        filters.push(format!("?{lhs} {op} {rhs}"));
    }
    let select: Vec<String> = select.iter().map(|v| format!("?{v}")).collect();
    let mut out = format!("SELECT {} WHERE {}", select.join(", "), patterns.join(", "));
    if !filters.is_empty() {
        out.push_str(" AND ");
        out.push_str(&filters.join(" && "));
    }
    out
}

/// Every assignment of store terms to the query's variables.
pub fn enumeration_oracle(q: &RdqlQuery, store: &TripleStore) -> Vec<Vec<Term>> {
    let vars: Vec<String> = q.pattern_vars().into_iter().map(str::to_string).collect();
    let mut domain: BTreeSet<Term> = BTreeSet::new();
    for t in store.iter() {
        domain.insert(Term::Iri(t.subject));
        domain.insert(Term::Iri(t.predicate));
        domain.insert(t.object);
    }
    let domain: Vec<Term> = domain.into_iter().collect();
    let mut out = Vec::new();
    if domain.is_empty() {
        return out;
    }
    let mut idx = vec![0usize; vars.len()];
    loop {
        let binding: HashMap<&str, &Term> = vars
            .iter()
            .zip(&idx)
            .map(|(v, &i)| (v.as_str(), &domain[i]))
            .collect();
        let resolve = |t: &PatternTerm| -> Term {
            match t {
                PatternTerm::Var(v) => binding[v.as_str()].clone(),
                PatternTerm::Iri(i) => Term::Iri(i.clone()),
                PatternTerm::Literal(l) => Term::Literal(l.clone()),
            }
        };
        let matches = q.patterns.iter().all(|p| {
            let (s, pr, o) = (resolve(&p.s), resolve(&p.p), resolve(&p.o));
            match (s, pr) {
                (Term::Iri(s), Term::Iri(pr)) => store.contains(&Triple::new(s, pr, o)),
                _ => false,
            }
        });
        let filtered = matches
            && q.filter.iter().all(|atom| {
                let lhs = binding[atom.lhs.as_str()];
                let rhs = match &atom.rhs {
                    FilterOperand::Var(v) => binding[v.as_str()].clone(),
                    FilterOperand::Literal(l) => Term::Literal(l.clone()),
                };
                oracle_compare(atom.op, lhs, &rhs)
            });
        if filtered {
            out.push(q.select.iter().map(|v| binding[v.as_str()].clone()).collect());
        }
        let mut i = vars.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < domain.len() {
                break;
            }
            idx[i] = 0;
        }
    }
}
