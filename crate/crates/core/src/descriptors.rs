//! Data-source and integrated-schema descriptor files.
//!
//! Both descriptors are small XML documents. The data-source descriptor
//! lists every wrapper-backed source with its tables and how each table is
//! read; the integrated-schema descriptor declares the virtual tables users
//! query, where each of their fields comes from, and the relations that
//! tie source fields together.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use roxmltree::{Document, Node};
use thiserror::Error;

use crate::value::Dtype;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptorError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("malformed XML at line {line}: {message}")]
    MalformedXml { line: u32, message: String },
    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },
    #[error("unresolved field reference {0}: {1}")]
    UnresolvedFieldRef(FieldRef, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceKind {
    Tabular,
    Xml,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Tabular => "tabular",
            SourceKind::Xml => "xml",
        }
    }
}

/// Stored for fidelity; no wrapper ever transmits them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credentials {
    pub user: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSourceDescriptor {
    pub name: String,
    pub kind: SourceKind,
    pub location: String,
    pub credentials: Option<Credentials>,
    pub tables: Vec<SourceTableDef>,
}

impl DataSourceDescriptor {
    pub fn table(&self, name: &str) -> Option<&SourceTableDef> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceTableDef {
    pub name: String,
    pub fields: Vec<SourceFieldDef>,
    pub binding: Binding,
}

impl SourceTableDef {
    pub fn field(&self, name: &str) -> Option<&SourceFieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Binding {
    File { path: String },
    View { query: String },
    Xml(XmlBinding),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlBinding {
    /// Element name; every occurrence yields one row.
    pub record: String,
    /// (field name, child element name) in declaration order.
    pub fields: Vec<(String, String)>,
    /// Shell command fed the source document on stdin; its stdout replaces
    /// the document before binding.
    pub transform: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFieldDef {
    pub name: String,
    pub dtype: Dtype,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldRef {
    pub source: String,
    pub table: String,
    pub field: String,
}

impl FieldRef {
    pub fn new(source: &str, table: &str, field: &str) -> FieldRef {
        FieldRef {
            source: source.to_string(),
            table: table.to_string(),
            field: field.to_string(),
        }
    }

    /// The (source, table) pair this field lives in.
    pub fn table_key(&self) -> TableKey {
        TableKey {
            source: self.source.clone(),
            table: self.table.clone(),
        }
    }
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.source, self.table, self.field)
    }
}

/// A source table, named by its data source and table name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TableKey {
    pub source: String,
    pub table: String,
}

impl TableKey {
    pub fn new(source: &str, table: &str) -> TableKey {
        TableKey {
            source: source.to_string(),
            table: table.to_string(),
        }
    }
}

impl fmt::Display for TableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.source, self.table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerivedOp {
    Add,
    Concat,
}

impl DerivedOp {
    pub fn as_str(self) -> &'static str {
        match self {
            DerivedOp::Add => "add",
            DerivedOp::Concat => "concat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relation {
    /// `lhs[i] = rhs[i]` for every i.
    Equality { lhs: Vec<FieldRef>, rhs: Vec<FieldRef> },
    /// `target = op(operands...)`.
    Derived {
        target: FieldRef,
        op: DerivedOp,
        operands: Vec<FieldRef>,
    },
}

impl Relation {
    /// Every field reference in document order.
    pub fn refs(&self) -> Vec<&FieldRef> {
        match self {
            Relation::Equality { lhs, rhs } => lhs.iter().chain(rhs).collect(),
            Relation::Derived {
                target, operands, ..
            } => std::iter::once(target).chain(operands).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegratedSchema {
    pub name: String,
    pub tables: Vec<IntegratedTableDef>,
    pub relations: Vec<Relation>,
}

impl IntegratedSchema {
    pub fn table(&self, name: &str) -> Option<&IntegratedTableDef> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegratedTableDef {
    pub name: String,
    /// The first field is the extraction master.
    pub fields: Vec<IntegratedFieldDef>,
}

impl IntegratedTableDef {
    pub fn field(&self, name: &str) -> Option<&IntegratedFieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegratedFieldDef {
    pub name: String,
    pub dtype: Dtype,
    pub mapping: FieldRef,
}

/// A parsed pair of descriptors. Relative paths inside the source
/// descriptor resolve against `base_dir`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Project {
    pub sources: Vec<DataSourceDescriptor>,
    pub schema: IntegratedSchema,
    pub base_dir: PathBuf,
}

impl Project {
    pub fn source(&self, name: &str) -> Option<&DataSourceDescriptor> {
        self.sources.iter().find(|s| s.name == name)
    }

    pub fn source_table(&self, key: &TableKey) -> Option<&SourceTableDef> {
        self.source(&key.source).and_then(|s| s.table(&key.table))
    }
}

/// Reads and cross-validates both descriptor files.
pub fn parse_project(source_desc: &Path, schema_desc: &Path) -> Result<Project, DescriptorError> {
    let read = |path: &Path| {
        std::fs::read_to_string(path).map_err(|_| DescriptorError::FileNotFound(path.to_path_buf()))
    };
    let sources_text = read(source_desc)?;
    let schema_text = read(schema_desc)?;
    let base_dir = source_desc
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    parse_project_str(&sources_text, &schema_text, base_dir)
}

/// Same as [`parse_project`] over in-memory documents.
pub fn parse_project_str(
    sources_xml: &str,
    schema_xml: &str,
    base_dir: PathBuf,
) -> Result<Project, DescriptorError> {
    let sources = parse_sources(sources_xml)?;
    let schema = parse_schema(schema_xml)?;
    let project = Project {
        sources,
        schema,
        base_dir,
    };
    for table in &project.schema.tables {
        for field in &table.fields {
            resolve_field_ref(&project, &field.mapping)?;
        }
    }
    Ok(project)
}

/// Looks up the source field a reference names.
pub fn resolve_field_ref<'p>(
    project: &'p Project,
    r: &FieldRef,
) -> Result<&'p SourceFieldDef, DescriptorError> {
    let unresolved = |why: String| DescriptorError::UnresolvedFieldRef(r.clone(), why);
    let source = project
        .source(&r.source)
        .ok_or_else(|| unresolved(format!("no data source `{}`", r.source)))?;
    let table = source
        .table(&r.table)
        .ok_or_else(|| unresolved(format!("no table `{}` in source `{}`", r.table, r.source)))?;
    table.field(&r.field).ok_or_else(|| {
        unresolved(format!(
            "no field `{}` in table `{}.{}`",
            r.field, r.source, r.table
        ))
    })
}

// ---------------------------------------------------------------------------
// Parsing

struct Ctx<'a, 'input> {
    doc: &'a Document<'input>,
}

impl<'a, 'input> Ctx<'a, 'input> {
    fn line(&self, node: Node) -> u32 {
        self.doc.text_pos_at(node.range().start).row
    }

    fn err(&self, node: Node, message: impl Into<String>) -> DescriptorError {
        DescriptorError::MalformedXml {
            line: self.line(node),
            message: message.into(),
        }
    }

    fn attr<'n>(&self, node: Node<'n, 'input>, name: &str) -> Result<&'n str, DescriptorError> {
        node.attribute(name).ok_or_else(|| {
            self.err(
                node,
                format!("<{}> is missing attribute `{name}`", node.tag_name().name()),
            )
        })
    }

    fn ident<'n>(&self, node: Node<'n, 'input>, name: &str) -> Result<&'n str, DescriptorError> {
        let value = self.attr(node, name)?;
        if is_identifier(value) {
            Ok(value)
        } else {
            Err(self.err(node, format!("`{value}` is not a valid identifier")))
        }
    }

    fn dtype(&self, node: Node) -> Result<Dtype, DescriptorError> {
        self.attr(node, "type")?
            .parse()
            .map_err(|e: crate::value::UnknownDtype| self.err(node, e.to_string()))
    }

    fn field_ref(&self, node: Node) -> Result<FieldRef, DescriptorError> {
        Ok(FieldRef::new(
            self.ident(node, "source")?,
            self.ident(node, "table")?,
            self.ident(node, "field")?,
        ))
    }

    /// Element children, rejecting stray text.
    fn children<'n>(&self, node: Node<'n, 'input>) -> Result<Vec<Node<'n, 'input>>, DescriptorError> {
        let mut out = Vec::new();
        for child in node.children() {
            if child.is_element() {
                out.push(child);
            } else if child.is_text() && !child.text().unwrap_or("").trim().is_empty() {
                return Err(self.err(child, "unexpected text content"));
            }
        }
        Ok(out)
    }

    fn expect_tag(&self, node: Node, tag: &str) -> Result<(), DescriptorError> {
        if node.tag_name().name() == tag {
            Ok(())
        } else {
            Err(self.err(
                node,
                format!("expected <{tag}>, found <{}>", node.tag_name().name()),
            ))
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn load(text: &str) -> Result<Document<'_>, DescriptorError> {
    Document::parse(text).map_err(|e| DescriptorError::MalformedXml {
        line: e.pos().row,
        message: e.to_string(),
    })
}

fn check_unique<'a>(
    kind: &'static str,
    names: impl IntoIterator<Item = &'a str>,
) -> Result<(), DescriptorError> {
    let mut seen = HashSet::new();
    for name in names {
        if !seen.insert(name) {
            return Err(DescriptorError::DuplicateName {
                kind,
                name: name.to_string(),
            });
        }
    }
    Ok(())
}

pub fn parse_sources(text: &str) -> Result<Vec<DataSourceDescriptor>, DescriptorError> {
    let doc = load(text)?;
    let cx = Ctx { doc: &doc };
    let root = doc.root_element();
    cx.expect_tag(root, "datasources")?;
    let mut sources = Vec::new();
    for node in cx.children(root)? {
        cx.expect_tag(node, "datasource")?;
        sources.push(parse_source(&cx, node)?);
    }
    check_unique("data source", sources.iter().map(|s| s.name.as_str()))?;
    Ok(sources)
}

fn parse_source(cx: &Ctx, node: Node) -> Result<DataSourceDescriptor, DescriptorError> {
    let name = cx.ident(node, "name")?.to_string();
    let kind = match cx.attr(node, "kind")? {
        "tabular" => SourceKind::Tabular,
        "xml" => SourceKind::Xml,
        other => return Err(cx.err(node, format!("unknown source kind `{other}`"))),
    };
    let location = cx.attr(node, "location")?.to_string();
    let mut credentials = None;
    let mut tables = Vec::new();
    for child in cx.children(node)? {
        match child.tag_name().name() {
            "credentials" if credentials.is_none() => {
                credentials = Some(Credentials {
                    user: cx.attr(child, "user")?.to_string(),
                    password: cx.attr(child, "password")?.to_string(),
                });
            }
            "credentials" => return Err(cx.err(child, "duplicate <credentials>")),
            "table" => tables.push(parse_source_table(cx, child, kind)?),
            other => return Err(cx.err(child, format!("unexpected <{other}> in <datasource>"))),
        }
    }
    check_unique("table", tables.iter().map(|t| t.name.as_str()))?;
    Ok(DataSourceDescriptor {
        name,
        kind,
        location,
        credentials,
        tables,
    })
}

fn parse_source_table(
    cx: &Ctx,
    node: Node,
    kind: SourceKind,
) -> Result<SourceTableDef, DescriptorError> {
    let name = cx.ident(node, "name")?.to_string();
    let mut fields = Vec::new();
    let mut binding = None;
    for child in cx.children(node)? {
        let tag = child.tag_name().name();
        if tag == "field" {
            fields.push(SourceFieldDef {
                name: cx.ident(child, "name")?.to_string(),
                dtype: cx.dtype(child)?,
            });
            continue;
        }
        let parsed = match tag {
            "file" => Binding::File {
                path: cx.attr(child, "path")?.to_string(),
            },
            "view" => Binding::View {
                query: child.text().unwrap_or("").trim().to_string(),
            },
            "xmlbinding" => Binding::Xml(parse_xml_binding(cx, child)?),
            other => return Err(cx.err(child, format!("unexpected <{other}> in <table>"))),
        };
        if binding.is_some() {
            return Err(cx.err(child, format!("table `{name}` has more than one binding")));
        }
        let allowed = matches!(
            (kind, &parsed),
            (SourceKind::Tabular, Binding::File { .. } | Binding::View { .. })
                | (SourceKind::Xml, Binding::Xml(_))
        );
        if !allowed {
            return Err(cx.err(
                child,
                format!("<{tag}> is not allowed in a {} source", kind.as_str()),
            ));
        }
        binding = Some(parsed);
    }
    let binding = binding.ok_or_else(|| cx.err(node, format!("table `{name}` has no binding")))?;
    check_unique("field", fields.iter().map(|f| f.name.as_str()))?;
    if let Binding::Xml(xml) = &binding {
        for (field, _) in &xml.fields {
            if !fields.iter().any(|f| &f.name == field) {
                return Err(cx.err(node, format!("xml binding maps undeclared field `{field}`")));
            }
        }
    }
    Ok(SourceTableDef {
        name,
        fields,
        binding,
    })
}

fn parse_xml_binding(cx: &Ctx, node: Node) -> Result<XmlBinding, DescriptorError> {
    let record = cx.attr(node, "record")?.to_string();
    let transform = node.attribute("transform").map(str::to_string);
    let mut fields = Vec::new();
    for child in cx.children(node)? {
        cx.expect_tag(child, "map")?;
        fields.push((
            cx.ident(child, "field")?.to_string(),
            cx.attr(child, "element")?.to_string(),
        ));
    }
    check_unique("mapped field", fields.iter().map(|(f, _)| f.as_str()))?;
    Ok(XmlBinding {
        record,
        fields,
        transform,
    })
}

pub fn parse_schema(text: &str) -> Result<IntegratedSchema, DescriptorError> {
    let doc = load(text)?;
    let cx = Ctx { doc: &doc };
    let root = doc.root_element();
    cx.expect_tag(root, "schema")?;
    let name = cx.ident(root, "name")?.to_string();
    let mut tables = Vec::new();
    let mut relations = Vec::new();
    for node in cx.children(root)? {
        match node.tag_name().name() {
            "table" => tables.push(parse_integrated_table(&cx, node)?),
            "relation" => relations.push(parse_relation(&cx, node)?),
            other => return Err(cx.err(node, format!("unexpected <{other}> in <schema>"))),
        }
    }
    check_unique("integrated table", tables.iter().map(|t| t.name.as_str()))?;
    Ok(IntegratedSchema {
        name,
        tables,
        relations,
    })
}

fn parse_integrated_table(cx: &Ctx, node: Node) -> Result<IntegratedTableDef, DescriptorError> {
    let name = cx.ident(node, "name")?.to_string();
    let mut fields = Vec::new();
    for child in cx.children(node)? {
        cx.expect_tag(child, "field")?;
        fields.push(IntegratedFieldDef {
            name: cx.ident(child, "name")?.to_string(),
            dtype: cx.dtype(child)?,
            mapping: FieldRef::new(
                cx.ident(child, "source")?,
                cx.ident(child, "sourcetable")?,
                cx.ident(child, "sourcefield")?,
            ),
        });
    }
    if fields.is_empty() {
        return Err(cx.err(node, format!("integrated table `{name}` has no fields")));
    }
    check_unique("field", fields.iter().map(|f| f.name.as_str()))?;
    Ok(IntegratedTableDef { name, fields })
}

fn parse_relation(cx: &Ctx, node: Node) -> Result<Relation, DescriptorError> {
    let refs_in = |parent: Node, tag: &str| -> Result<Vec<FieldRef>, DescriptorError> {
        cx.expect_tag(parent, tag)?;
        cx.children(parent)?
            .into_iter()
            .map(|r| {
                cx.expect_tag(r, "ref")?;
                cx.field_ref(r)
            })
            .collect()
    };
    match cx.attr(node, "kind")? {
        "equality" => {
            let children = cx.children(node)?;
            let [lhs, rhs] = children.as_slice() else {
                return Err(cx.err(node, "equality relation needs <lhs> and <rhs>"));
            };
            Ok(Relation::Equality {
                lhs: refs_in(*lhs, "lhs")?,
                rhs: refs_in(*rhs, "rhs")?,
            })
        }
        "derived" => {
            let op = match cx.attr(node, "op")? {
                "add" => DerivedOp::Add,
                "concat" => DerivedOp::Concat,
                other => return Err(cx.err(node, format!("unknown derived op `{other}`"))),
            };
            let mut target = None;
            let mut operands = Vec::new();
            for child in cx.children(node)? {
                match child.tag_name().name() {
                    "target" if target.is_none() => target = Some(cx.field_ref(child)?),
                    "operand" => operands.push(cx.field_ref(child)?),
                    other => {
                        return Err(cx.err(child, format!("unexpected <{other}> in derived relation")))
                    }
                }
            }
            let target = target.ok_or_else(|| cx.err(node, "derived relation has no <target>"))?;
            Ok(Relation::Derived {
                target,
                op,
                operands,
            })
        }
        other => Err(cx.err(node, format!("unknown relation kind `{other}`"))),
    }
}

// ---------------------------------------------------------------------------
// Serialization

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn ref_attrs(r: &FieldRef) -> String {
    format!(
        "source=\"{}\" table=\"{}\" field=\"{}\"",
        escape_xml(&r.source),
        escape_xml(&r.table),
        escape_xml(&r.field)
    )
}

/// Writes a data-source descriptor document.
pub fn serialize_sources(sources: &[DataSourceDescriptor]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<datasources>\n");
    for source in sources {
        out.push_str(&format!(
            "  <datasource name=\"{}\" kind=\"{}\" location=\"{}\">\n",
            escape_xml(&source.name),
            source.kind.as_str(),
            escape_xml(&source.location)
        ));
        if let Some(c) = &source.credentials {
            out.push_str(&format!(
                "    <credentials user=\"{}\" password=\"{}\"/>\n",
                escape_xml(&c.user),
                escape_xml(&c.password)
            ));
        }
        for table in &source.tables {
            out.push_str(&format!("    <table name=\"{}\">\n", escape_xml(&table.name)));
            for field in &table.fields {
                out.push_str(&format!(
                    "      <field name=\"{}\" type=\"{}\"/>\n",
                    escape_xml(&field.name),
                    field.dtype
                ));
            }
            match &table.binding {
                Binding::File { path } => {
                    out.push_str(&format!("      <file path=\"{}\"/>\n", escape_xml(path)))
                }
                Binding::View { query } => {
                    out.push_str(&format!("      <view>{}</view>\n", escape_xml(query)))
                }
                Binding::Xml(xml) => {
                    out.push_str(&format!("      <xmlbinding record=\"{}\"", escape_xml(&xml.record)));
                    if let Some(t) = &xml.transform {
                        out.push_str(&format!(" transform=\"{}\"", escape_xml(t)));
                    }
                    out.push_str(">\n");
                    for (field, element) in &xml.fields {
                        out.push_str(&format!(
                            "        <map field=\"{}\" element=\"{}\"/>\n",
                            escape_xml(field),
                            escape_xml(element)
                        ));
                    }
                    out.push_str("      </xmlbinding>\n");
                }
            }
            out.push_str("    </table>\n");
        }
        out.push_str("  </datasource>\n");
    }
    out.push_str("</datasources>\n");
    out
}

/// Writes an integrated-schema descriptor document.
pub fn serialize_schema(schema: &IntegratedSchema) -> String {
    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<schema name=\"{}\">\n",
        escape_xml(&schema.name)
    );
    for table in &schema.tables {
        out.push_str(&format!("  <table name=\"{}\">\n", escape_xml(&table.name)));
        for field in &table.fields {
            out.push_str(&format!(
                "    <field name=\"{}\" type=\"{}\" source=\"{}\" sourcetable=\"{}\" sourcefield=\"{}\"/>\n",
                escape_xml(&field.name),
                field.dtype,
                escape_xml(&field.mapping.source),
                escape_xml(&field.mapping.table),
                escape_xml(&field.mapping.field)
            ));
        }
        out.push_str("  </table>\n");
    }
    for relation in &schema.relations {
        match relation {
            Relation::Equality { lhs, rhs } => {
                out.push_str("  <relation kind=\"equality\">\n");
                for (tag, side) in [("lhs", lhs), ("rhs", rhs)] {
                    out.push_str(&format!("    <{tag}>\n"));
                    for r in side {
                        out.push_str(&format!("      <ref {}/>\n", ref_attrs(r)));
                    }
                    out.push_str(&format!("    </{tag}>\n"));
                }
            }
            Relation::Derived {
                target,
                op,
                operands,
            } => {
                out.push_str(&format!("  <relation kind=\"derived\" op=\"{}\">\n", op.as_str()));
                out.push_str(&format!("    <target {}/>\n", ref_attrs(target)));
                for r in operands {
                    out.push_str(&format!("    <operand {}/>\n", ref_attrs(r)));
                }
            }
        }
        out.push_str("  </relation>\n");
    }
    out.push_str("</schema>\n");
    out
}
