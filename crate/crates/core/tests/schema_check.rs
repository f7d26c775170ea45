mod common;

use common::*;
use medquery_core::descriptors::parse_project_str;
use medquery_core::schema_check::{check_schema, Severity};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::Rng;

const FIELDS: usize = 6;

fn field_ref(rng: &mut StdRng, tag: &str) -> String {
    let field = if rng.gen_bool(0.08) {
        "NOPE".to_string()
    } else {
        format!("F{}", rng.gen_range(0..FIELDS))
    };
    format!(r#"<{tag} source="s" table="T" field="{field}"/>"#)
}

fn random_relation(rng: &mut StdRng) -> String {
    if rng.gen_bool(0.5) {
        let lhs: String = (0..rng.gen_range(0..=2)).map(|_| field_ref(rng, "ref")).collect();
        let rhs: String = (0..rng.gen_range(0..=2)).map(|_| field_ref(rng, "ref")).collect();
        format!(r#"<relation kind="equality"><lhs>{lhs}</lhs><rhs>{rhs}</rhs></relation>"#)
    } else {
        let op = if rng.gen_bool(0.5) { "add" } else { "concat" };
        let target = field_ref(rng, "target");
        let operands: String = (0..rng.gen_range(1..=3)).map(|_| field_ref(rng, "operand")).collect();
        format!(r#"<relation kind="derived" op="{op}">{target}{operands}</relation>"#)
    }
}

fn project(rng: &mut StdRng, relations: &[String]) -> medquery_core::Project {
    let fields: String = (0..FIELDS)
        .map(|i| format!(r#"<field name="F{i}" type="{}"/>"#, random_dtype(rng)))
        .collect();
    let sources = format!(
        r#"<datasources><datasource name="s" kind="tabular" location="."><table name="T">{fields}<file path="t.txt"/></table><table name="U"><field name="X" type="integer"/><file path="u.txt"/></table></datasource></datasources>"#
    );
    let schema = format!(
        r#"<schema name="g"><table name="T"><field name="F0" type="string" source="s" sourcetable="T" sourcefield="F0"/></table>{}</schema>"#,
        relations.concat()
    );
    parse_project_str(&sources, &schema, ".".into()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn report_is_deterministic(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let relations: Vec<String> = (0..rng.gen_range(0..6)).map(|_| random_relation(&mut rng)).collect();
        let p = project(&mut rng, &relations);
        let a = check_schema(&p);
        prop_assert_eq!(a.render_text(), check_schema(&p).render_text());
        prop_assert_eq!(a.render_xml(), check_schema(&p.clone()).render_xml());
    }

    #[test]
    fn adding_a_relation_keeps_every_error(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mut relations: Vec<String> = (0..rng.gen_range(0..6)).map(|_| random_relation(&mut rng)).collect();
        let state = rng.clone();
        let before = check_schema(&project(&mut rng, &relations));
        relations.push(random_relation(&mut rng));
        let mut rng = state;
        let after = check_schema(&project(&mut rng, &relations));
        for finding in before.findings.iter().filter(|f| f.severity == Severity::Error) {
            prop_assert!(after.findings.contains(finding), "lost {}", finding);
        }
    }
}
