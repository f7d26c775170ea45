//! Structural satisfiability checks over an integrated schema.
//!
//! The checks are decidable and cover every contradiction the relation
//! language can express: dangling references, incompatible types,
//! mismatched arities and cyclic derivations. Source tables nothing points
//! at are reported as warnings.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::descriptors::{
    escape_xml, resolve_field_ref, DerivedOp, FieldRef, Project, Relation, TableKey,
};
use crate::value::Dtype;

/// Upper bound on reported derivation cycles; enumeration is exponential in
/// the worst case.
const MAX_REPORTED_CYCLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FindingCode {
    UnresolvedRef,
    TypeMismatch,
    ArityMismatch,
    CyclicDerivation,
    UnmappedTable,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::UnresolvedRef => "UNRESOLVED_REF",
            FindingCode::TypeMismatch => "TYPE_MISMATCH",
            FindingCode::ArityMismatch => "ARITY_MISMATCH",
            FindingCode::CyclicDerivation => "CYCLIC_DERIVATION",
            FindingCode::UnmappedTable => "UNMAPPED_TABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}: {}",
            self.severity.as_str(),
            self.code.as_str(),
            self.location,
            self.message
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SatisfiabilityReport {
    pub findings: Vec<Finding>,
}

impl SatisfiabilityReport {
    pub fn error_count(&self) -> usize {
        self.count(Severity::Error)
    }

    pub fn warning_count(&self) -> usize {
        self.count(Severity::Warning)
    }

    fn count(&self, severity: Severity) -> usize {
        self.findings.iter().filter(|f| f.severity == severity).count()
    }

    /// True when the schema has no error-severity findings.
    pub fn is_accepted(&self) -> bool {
        self.error_count() == 0
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    /// One finding per line followed by a summary line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for finding in &self.findings {
            out.push_str(&finding.to_string());
            out.push('\n');
        }
        out.push_str(&format!(
            "{} errors, {} warnings\n",
            self.error_count(),
            self.warning_count()
        ));
        out
    }

    pub fn render_xml(&self) -> String {
        let mut out = String::from("<report>\n");
        for f in &self.findings {
            out.push_str(&format!(
                "  <finding severity=\"{}\" code=\"{}\" location=\"{}\" message=\"{}\"/>\n",
                f.severity.as_str(),
                f.code.as_str(),
                escape_xml(&f.location),
                escape_xml(&f.message)
            ));
        }
        out.push_str("</report>\n");
        out
    }
}

/// Runs every structural check; problems become findings, never errors.
pub fn check_schema(project: &Project) -> SatisfiabilityReport {
    let mut report = SatisfiabilityReport::default();
    let relations = &project.schema.relations;
    let dtype_of = |r: &FieldRef| resolve_field_ref(project, r).ok().map(|f| f.dtype);
    let error = |code, location: String, message: String| Finding {
        severity: Severity::Error,
        code,
        location,
        message,
    };

    // (a) references
    for (i, relation) in relations.iter().enumerate() {
        for (path, r) in ref_paths(relation) {
            if let Err(e) = resolve_field_ref(project, r) {
                report.findings.push(error(
                    FindingCode::UnresolvedRef,
                    format!("relation[{}]/{path}", i + 1),
                    e.to_string(),
                ));
            }
        }
    }

    // (b) types
    for (i, relation) in relations.iter().enumerate() {
        let loc = format!("relation[{}]", i + 1);
        match relation {
            Relation::Equality { lhs, rhs } => {
                for (j, (l, r)) in lhs.iter().zip(rhs).enumerate() {
                    if let (Some(lt), Some(rt)) = (dtype_of(l), dtype_of(r)) {
                        if lt != rt {
                            report.findings.push(error(
                                FindingCode::TypeMismatch,
                                format!("{loc}/pair[{}]", j + 1),
                                format!("{l} is {lt} but {r} is {rt}"),
                            ));
                        }
                    }
                }
            }
            Relation::Derived {
                target,
                op,
                operands,
            } => {
                let target_type = dtype_of(target);
                match op {
                    DerivedOp::Add => {
                        if let Some(t) = target_type.filter(|t| !t.is_numeric()) {
                            report.findings.push(error(
                                FindingCode::TypeMismatch,
                                format!("{loc}/target"),
                                format!("add target {target} is {t}, expected a numeric type"),
                            ));
                        }
                        for (j, operand) in operands.iter().enumerate() {
                            if let Some(t) = dtype_of(operand).filter(|t| !t.is_numeric()) {
                                report.findings.push(error(
                                    FindingCode::TypeMismatch,
                                    format!("{loc}/operand[{}]", j + 1),
                                    format!("add operand {operand} is {t}, expected a numeric type"),
                                ));
                            }
                        }
                    }
                    DerivedOp::Concat => {
                        if let Some(t) = target_type.filter(|t| *t != Dtype::String) {
                            report.findings.push(error(
                                FindingCode::TypeMismatch,
                                format!("{loc}/target"),
                                format!("concat target {target} is {t}, expected string"),
                            ));
                        }
                    }
                }
            }
        }
    }

    // (c) arity
    for (i, relation) in relations.iter().enumerate() {
        let loc = format!("relation[{}]", i + 1);
        match relation {
            Relation::Equality { lhs, rhs } if lhs.len() != rhs.len() || lhs.is_empty() => {
                report.findings.push(error(
                    FindingCode::ArityMismatch,
                    loc,
                    format!(
                        "equality pairs {} field(s) with {} field(s)",
                        lhs.len(),
                        rhs.len()
                    ),
                ));
            }
            Relation::Derived { operands, op, .. } if operands.len() < 2 => {
                report.findings.push(error(
                    FindingCode::ArityMismatch,
                    loc,
                    format!("{} needs at least 2 operands, found {}", op.as_str(), operands.len()),
                ));
            }
            _ => {}
        }
    }

    // (d) derivation cycles
    for cycle in derivation_cycles(relations) {
        let path = cycle
            .nodes
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" -> ");
        report.findings.push(error(
            FindingCode::CyclicDerivation,
            format!("relation[{}]", cycle.first_relation + 1),
            format!("derivation cycle {path}"),
        ));
    }

    // (e) source tables nothing refers to
    let mut referenced: BTreeSet<TableKey> = BTreeSet::new();
    for table in &project.schema.tables {
        for field in &table.fields {
            referenced.insert(field.mapping.table_key());
        }
    }
    for relation in relations {
        for r in relation.refs() {
            referenced.insert(r.table_key());
        }
    }
    for source in &project.sources {
        for table in &source.tables {
            let key = TableKey::new(&source.name, &table.name);
            if !referenced.contains(&key) {
                report.findings.push(Finding {
                    severity: Severity::Warning,
                    code: FindingCode::UnmappedTable,
                    location: format!("datasource[{}]/table[{}]", source.name, table.name),
                    message: format!("source table {key} is not used by any mapping or relation"),
                });
            }
        }
    }

    report
}

fn ref_paths(relation: &Relation) -> Vec<(String, &FieldRef)> {
    match relation {
        Relation::Equality { lhs, rhs } => lhs
            .iter()
            .enumerate()
            .map(|(j, r)| (format!("lhs/ref[{}]", j + 1), r))
            .chain(
                rhs.iter()
                    .enumerate()
                    .map(|(j, r)| (format!("rhs/ref[{}]", j + 1), r)),
            )
            .collect(),
        Relation::Derived {
            target, operands, ..
        } => std::iter::once(("target".to_string(), target))
            .chain(
                operands
                    .iter()
                    .enumerate()
                    .map(|(j, r)| (format!("operand[{}]", j + 1), r)),
            )
            .collect(),
    }
}

/// An elementary cycle in the derivation graph, closed (first node repeated
/// at the end).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationCycle {
    pub nodes: Vec<FieldRef>,
    /// Index of the relation contributing the cycle's first edge.
    pub first_relation: usize,
}

/// Enumerates the elementary cycles of the graph with an edge from every
/// derived target to each of its operands. Each cycle is reported once,
/// rotated to start at its earliest node in document order; adding
/// relations can only add cycles.
pub fn derivation_cycles(relations: &[Relation]) -> Vec<DerivationCycle> {
    let mut ids: HashMap<&FieldRef, usize> = HashMap::new();
    let mut nodes: Vec<&FieldRef> = Vec::new();
    for relation in relations {
        if let Relation::Derived { .. } = relation {
            for r in relation.refs() {
                ids.entry(r).or_insert_with(|| {
                    nodes.push(r);
                    nodes.len() - 1
                });
            }
        }
    }
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes.len()];
    for (i, relation) in relations.iter().enumerate() {
        if let Relation::Derived {
            target, operands, ..
        } = relation
        {
            let t = ids[target];
            for operand in operands {
                let o = ids[operand];
                if !edges[t].iter().any(|&(n, _)| n == o) {
                    edges[t].push((o, i));
                }
            }
        }
    }

    let mut cycles = Vec::new();
    for start in 0..nodes.len() {
        let mut path = vec![start];
        let mut rels = Vec::new();
        let mut on_path = vec![false; nodes.len()];
        on_path[start] = true;
        collect_cycles(
            start,
            start,
            &edges,
            &mut path,
            &mut rels,
            &mut on_path,
            &mut |path, rels| {
                let mut closed: Vec<FieldRef> = path.iter().map(|&n| nodes[n].clone()).collect();
                closed.push(nodes[start].clone());
                cycles.push(DerivationCycle {
                    nodes: closed,
                    first_relation: rels[0],
                });
            },
        );
        if cycles.len() >= MAX_REPORTED_CYCLES {
            cycles.truncate(MAX_REPORTED_CYCLES);
            break;
        }
    }
    cycles
}

fn collect_cycles(
    start: usize,
    at: usize,
    edges: &[Vec<(usize, usize)>],
    path: &mut Vec<usize>,
    rels: &mut Vec<usize>,
    on_path: &mut [bool],
    emit: &mut dyn FnMut(&[usize], &[usize]),
) {
    for &(next, rel) in &edges[at] {
        if next == start {
            rels.push(rel);
            emit(path, rels);
            rels.pop();
        } else if next > start && !on_path[next] {
            on_path[next] = true;
            path.push(next);
            rels.push(rel);
            collect_cycles(start, next, edges, path, rels, on_path, emit);
            rels.pop();
            path.pop();
            on_path[next] = false;
        }
    }
}
