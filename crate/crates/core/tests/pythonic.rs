use karel_core::dsl::{parse, AstLimits};
use karel_core::pythonic::{
    apply_rules, convert_py_to_dsl, extract_candidates, parse_restricted_python, repair, CandidatePath, PyError,
    PyStmt, RepairRule,
};

const RESPONSE: &str = include_str!("fixtures/doorkey_response.txt");

const DOORKEY_FINAL: &str = "DEF run m( WHILE c( noMarkersPresent c) w( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) w) pickMarker turnLeft WHILE c( noMarkersPresent c) w( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) w) putMarker m)";

const DOORKEY_CONVERTED: &str = "DEF run m( WHILE c( not c( markersPresent c) c) w( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) w) pickMarker turnLeft WHILE c( not c( markersPresent c) c) w( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) w) putMarker m)";

const DOORKEY_PY: &str = "def run():
    while not markersPresent():
        if frontIsClear():
            move()
        else:
            turnLeft()

    pickMarker()

    turnLeft()

    while not markersPresent():
        if frontIsClear():
            move()
        else:
            turnLeft()

    putMarker()
";

const DOORKEY_RAW_DSL: &str = "DEF run m(
    WHILE not c( markersPresent c) w(
        IF frontIsClear i(
            move i)
        ELSE e(
            turnLeft e) w)
    pickMarker m
    turnLeft m
    WHILE not c( markersPresent c) w(
        IF frontIsClear i(
            move i)
        ELSE e(
            turnLeft e) w)
    putMarker m)";

#[test]
fn doorkey_python_structure() {
    let py = parse_restricted_python(DOORKEY_PY).unwrap();
    assert_eq!(py.body.len(), 5);
    let whiles = py.body.iter().filter(|s| matches!(s, PyStmt::While(..))).count();
    assert_eq!(whiles, 2);
    for s in &py.body {
        if let PyStmt::While(_, body) = s {
            assert!(matches!(body.as_slice(), [PyStmt::If(_, _, Some(_))]));
        }
    }
}

#[test]
fn doorkey_conversion_golden() {
    let py = parse_restricted_python(DOORKEY_PY).unwrap();
    assert_eq!(convert_py_to_dsl(&py).unwrap(), DOORKEY_CONVERTED);
}

#[test]
fn doorkey_post_processing_golden() {
    assert_eq!(repair(DOORKEY_CONVERTED).unwrap().text, DOORKEY_FINAL);
    assert_eq!(repair(DOORKEY_RAW_DSL).unwrap().text, DOORKEY_FINAL);
}

#[test]
fn doorkey_response_end_to_end() {
    let e = extract_candidates("doorkey-0", RESPONSE, &AstLimits::default());
    assert_eq!(e.candidates.len(), 1);
    assert_eq!(e.candidates[0].text, DOORKEY_FINAL);
    assert_eq!(e.candidates[0].provenance.path, CandidatePath::Python);
    let m = e.candidates[0].program.metrics();
    assert_eq!((m.token_length, m.depth, m.root_statements), (41, 2, 5));
}

#[test]
fn table_rows_single_rule() {
    let cases = [
        (RepairRule::BracketsRemoval, "DEF run m( move() m)", "DEF run m( move m)"),
        (RepairRule::BracketsSeparation, "DEF run m(move m)", "DEF run m( move m)"),
        (
            RepairRule::BracketsAddition,
            "DEF run m( WHILE frontIsClear w( move w) )m",
            "DEF run m( WHILE c( frontIsClear c) w( move w) )m",
        ),
        (RepairRule::BracketsRepairment, "DEF run m( move )", "DEF run m( move m)"),
        (
            RepairRule::IfToIfElse,
            "DEF run m( IF c( frontIsClear c) i( move i) ELSE e( turnLeft e) )m",
            "DEF run m( IFELSE c( frontIsClear c) i( move i) ELSE e( turnLeft e) )m",
        ),
    ];
    for (rule, before, after) in cases {
        assert_eq!(rule.apply_text(before), after, "{rule}");
    }
}

#[test]
fn table_rows_chained() {
    assert_eq!(apply_rules("DEF run m( move() m m)").0, "DEF run m( move m)");
    let (text, fired) = apply_rules("DEF run m( WHILE c( True c) w( move w) )");
    assert_eq!(text, "DEF run m( REPEAT r=19 r( move r) m)");
    assert!(fired.contains(&RepairRule::IllegalSymbols));
    assert_eq!(
        repair("DEF run m( WHILE c( True c) w( move w) )").unwrap().text,
        "DEF run m( REPEAT R=19 r( move r) m)"
    );
}

#[test]
fn every_table_row_repairs_to_a_program() {
    for before in [
        "DEF run m( move() m)",
        "DEF run m(move m)",
        "DEF run m( WHILE frontIsClear w( move w) )m",
        "DEF run m( move )",
        "DEF run m( IF c( frontIsClear c) i( move i) ELSE e( turnLeft e) )m",
        "DEF run m( move() m m)",
        "DEF run m( WHILE c( True c) w( move w) )",
    ] {
        let out = repair(before).unwrap();
        assert_eq!(parse(&out.text).unwrap(), out.program);
    }
}

#[test]
fn python_whitelist() {
    assert!(matches!(
        parse_restricted_python("def run():\n    x = 1"),
        Err(PyError::WhitelistViolation { ref construct, .. }) if construct == "variable definition"
    ));
    let py = parse_restricted_python("def run():\n    while True:\n        move()").unwrap();
    let dsl = convert_py_to_dsl(&py).unwrap();
    assert_eq!(repair(&dsl).unwrap().text, "DEF run m( REPEAT R=19 r( move r) m)");
    let py = parse_restricted_python("def run():\n    if frontIsClear():\n        move()").unwrap();
    assert_eq!(
        convert_py_to_dsl(&py).unwrap(),
        "DEF run m( IF c( frontIsClear c) i( move i) m)"
    );
    let py = parse_restricted_python("def run():\n    for i in range(3):\n        move()").unwrap();
    assert_eq!(convert_py_to_dsl(&py).unwrap(), "DEF run m( REPEAT R=3 r( move r) m)");
}

#[test]
fn provenance_lines_are_json() {
    let e = extract_candidates("doorkey-0", RESPONSE, &AstLimits::default());
    let lines = e.provenance_jsonl();
    let first = lines.lines().next().unwrap();
    assert!(first.starts_with("{\"response_id\":\"doorkey-0\",\"block\":0,\"path\":\"python\""));
    assert!(first.contains("brackets_addition") || first.contains("rules_fired\":[]"));
}
