use karel_core::dsl::{parse, AstLimits, Program};
use karel_core::mutation::{neighbor, random_program, ProductionTable};
use karel_core::pythonic::{fold_negated_markers, repair};
use karel_core::search::search_rng;
use karel_core::*;
use proptest::prelude::*;

fn program(seed: u64) -> Program {
    random_program(&ProductionTable::default(), &mut search_rng(seed), &AstLimits::default())
}

/// Token-level damage of the kinds the repair rules undo exactly.
fn damage(text: &str, mask: u64) -> String {
    let toks: Vec<&str> = text.split(' ').collect();
    let mut out = String::new();
    for (i, t) in toks.iter().enumerate() {
        let bit = (mask >> (i % 64)) & 1 == 1;
        out.push_str(t);
        if bit && Action::from_name(t).is_some() {
            out.push_str("()");
        }
        let fuse = bit && t.ends_with('(') && i + 1 < toks.len();
        if !fuse && i + 1 < toks.len() {
            out.push(' ');
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let p = program(seed);
        prop_assert_eq!(parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn random_programs_respect_limits(seed in any::<u64>()) {
        prop_assert!(program(seed).check_limits(&AstLimits::default()).is_ok());
    }

    #[test]
    fn neighbors_stay_in_space(seed in any::<u64>(), steps in 1usize..20) {
        let table = ProductionTable::default();
        let limits = AstLimits::default();
        let mut rng = search_rng(seed);
        let mut p = random_program(&table, &mut rng, &limits);
        for _ in 0..steps {
            p = neighbor(&p, &table, &mut rng, &limits);
            prop_assert!(p.check_limits(&limits).is_ok());
            prop_assert_eq!(parse(&p.to_string()).unwrap(), p.clone());
        }
    }

    #[test]
    fn returns_within_declared_range(seed in any::<u64>(), task in 0usize..12) {
        let task = TaskId::ALL[task];
        let v = generate_variant(task, seed);
        let (lo, hi) = task.reward_range();
        let r = episode_return(&program(seed), &mut v.env(), EpisodeLimits::default()).0;
        prop_assert!((lo..=hi).contains(&r), "{} returned {}", task, r);
    }

    #[test]
    fn repair_is_idempotent_and_undoes_damage(seed in any::<u64>(), mask in any::<u64>()) {
        let mut p = program(seed);
        let damaged = damage(&p.to_string(), mask);
        let once = repair(&damaged).unwrap();
        fold_negated_markers(&mut p);
        prop_assert_eq!(&once.program, &p);
        let twice = repair(&once.text).unwrap();
        prop_assert_eq!(twice.text, once.text);
    }

    #[test]
    fn repair_never_panics(text in "[a-zA-Z()=0-9 ]{0,80}") {
        if let Ok(out) = repair(&text) {
            prop_assert_eq!(repair(&out.text).unwrap().text, out.text);
        }
    }
}

#[test]
fn damage_helper_applies() {
    assert_eq!(damage("DEF run m( move m)", u64::MAX), "DEF run m(move() m)");
}
