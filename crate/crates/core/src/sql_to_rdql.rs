//! Rewrites a validated SQL query into RDQL over the integrated RDF view.
//!
//! Every FROM table gets a subject variable `?tbl_k`, every mentioned
//! field becomes one triple pattern `(?tbl_k <http://integratedDB/T#F> ?v)`,
//! equi-joins are expressed by sharing the object variable between both
//! sides, and the remaining conditions become the AND clause.

use std::collections::{HashMap, HashSet};

use crate::descriptors::IntegratedSchema;
use crate::rdql::{FilterAtom, FilterOperand, PatternTerm, RdqlQuery, TriplePattern};
use crate::sql::{Operand, QualifiedField, SqlQuery};
use crate::triple_store::Iri;
use crate::value::{Comparator, Dtype};

pub const BASE_IRI: &str = "http://integratedDB/";

/// Predicate IRI of an integrated field.
pub fn property_iri(table: &str, field: &str) -> Iri {
    Iri::new(&format!("{BASE_IRI}{table}#{field}")).expect("identifiers form valid IRIs")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversion {
    pub text: String,
    pub ast: RdqlQuery,
}

/// Variable assignment for one query; a pure function of the AST.
#[derive(Debug, Clone, Default)]
pub struct VarAllocator {
    table_vars: HashMap<String, String>,
    field_vars: HashMap<QualifiedField, String>,
    used: HashSet<String>,
    next_fld: usize,
}

impl VarAllocator {
    fn fresh_field_var(&mut self) -> String {
        loop {
            let name = format!("fld_{}", self.next_fld);
            self.next_fld += 1;
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }

    pub fn table_var(&self, table: &str) -> &str {
        &self.table_vars[table]
    }

    pub fn field_var(&self, field: &QualifiedField) -> &str {
        &self.field_vars[field]
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut at = x;
        while self.parent[at] != root {
            let next = self.parent[at];
            self.parent[at] = root;
            at = next;
        }
        root
    }
}

/// Converts `q` (already validated against `schema`) to RDQL.
pub fn convert(q: &SqlQuery, schema: &IntegratedSchema) -> Conversion {
    let dtype = |f: &QualifiedField| -> Dtype {
        schema
            .table(&f.table)
            .and_then(|t| t.field(&f.field))
            .map(|d| d.dtype)
            .expect("query was validated against the schema")
    };
    let mut alloc = VarAllocator::default();

    // Step 1: one subject variable per FROM entry.
    for (k, table) in q.from.iter().enumerate() {
        let var = format!("tbl_{k}");
        alloc.used.insert(var.clone());
        alloc.table_vars.insert(table.clone(), var);
    }

    // Step 2: selected fields are named after the field, qualified with the
    // table when two selected fields of different tables share a name.
    let mut tables_by_name: HashMap<&str, HashSet<&str>> = HashMap::new();
    for f in &q.select {
        tables_by_name.entry(&f.field).or_default().insert(&f.table);
    }
    for f in &q.select {
        if alloc.field_vars.contains_key(f) {
            continue;
        }
        let collides = tables_by_name[f.field.as_str()].len() > 1
            || alloc.table_vars.values().any(|v| *v == f.field);
        let var = if collides {
            format!("{}_{}", f.table, f.field)
        } else {
            f.field.clone()
        };
        alloc.used.insert(var.clone());
        alloc.field_vars.insert(f.clone(), var);
    }

    // Step 3: equi-joins between same-typed fields share one variable.
    let fields = q.fields();
    let index: HashMap<&QualifiedField, usize> =
        fields.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    let mut groups = UnionFind {
        parent: (0..fields.len()).collect(),
    };
    let mut group_selected: Vec<Option<String>> = fields
        .iter()
        .map(|f| alloc.field_vars.get(*f).cloned())
        .collect();
    let mut residual_joins = Vec::new();
    for cond in &q.join_conds {
        let (a, b) = cond.as_equijoin().expect("join conditions are equi-joins");
        let (ra, rb) = (groups.find(index[a]), groups.find(index[b]));
        if ra == rb {
            continue;
        }
        let both_selected = group_selected[ra].is_some() && group_selected[rb].is_some();
        if dtype(a) != dtype(b) || both_selected {
            residual_joins.push((a, b));
            continue;
        }
        groups.parent[rb] = ra;
        group_selected[ra] = group_selected[ra].take().or(group_selected[rb].take());
    }
    let mut group_vars: HashMap<usize, String> = HashMap::new();
    for (i, f) in fields.iter().enumerate() {
        if alloc.field_vars.contains_key(*f) {
            continue;
        }
        let root = groups.find(i);
        let var = match &group_selected[root] {
            Some(var) => var.clone(),
            None => match group_vars.get(&root) {
                Some(var) => var.clone(),
                None => {
                    let var = alloc.fresh_field_var();
                    group_vars.insert(root, var.clone());
                    var
                }
            },
        };
        alloc.field_vars.insert((*f).clone(), var);
    }

    let patterns = fields
        .iter()
        .map(|f| {
            TriplePattern::new(
                PatternTerm::var(alloc.table_var(&f.table)),
                PatternTerm::Iri(property_iri(&f.table, &f.field)),
                PatternTerm::var(alloc.field_var(f)),
            )
        })
        .collect();

    // Step 4: the remaining conditions.
    let mut filter: Vec<FilterAtom> = residual_joins
        .into_iter()
        .map(|(a, b)| FilterAtom {
            lhs: alloc.field_var(a).to_string(),
            op: Comparator::Eq,
            rhs: FilterOperand::Var(alloc.field_var(b).to_string()),
        })
        .collect();
    for cond in &q.filters {
        filter.push(FilterAtom {
            lhs: alloc.field_var(&cond.lhs).to_string(),
            op: cond.op,
            rhs: match &cond.rhs {
                Operand::Field(f) => FilterOperand::Var(alloc.field_var(f).to_string()),
                Operand::Literal(lit) => FilterOperand::Literal(lit.clone()),
            },
        });
    }

    let ast = RdqlQuery {
        select: q.select.iter().map(|f| alloc.field_var(f).to_string()).collect(),
        patterns,
        filter,
    };
    Conversion {
        text: ast.to_string(),
        ast,
    }
}
