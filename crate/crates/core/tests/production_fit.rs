use karel_core::mutation::{ProductionTable, Symbol};
use karel_core::search::search_rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const DRAWS: usize = 100_000;

fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    let n = observed.iter().sum::<u64>() as f64;
    let mut stat = 0.0;
    let mut cells = 0;
    for (&o, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            assert_eq!(o, 0);
            continue;
        }
        let e = n * p;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dist = ChiSquared::new((cells - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn draws_match_table_at_99_percent() {
    let table = ProductionTable::default();
    table.validate().unwrap();
    for (i, sym) in [
        Symbol::Statement,
        Symbol::Condition,
        Symbol::Action,
        Symbol::Boolean,
        Symbol::Number,
    ]
    .into_iter()
    .enumerate()
    {
        let mut rng = search_rng(1000 + i as u64);
        let row = table.row(sym);
        let mut counts = vec![0u64; row.len()];
        for _ in 0..DRAWS {
            counts[table.draw_index(sym, &mut rng)] += 1;
        }
        let p = chi_square_p(&counts, row);
        assert!(p > 0.01, "{sym:?}: p = {p}, counts {counts:?}");
    }
}

#[test]
fn typed_draws_follow_rows() {
    let table = ProductionTable::default();
    let mut rng = search_rng(7);
    let mut counts = [0u64; 5];
    for _ in 0..DRAWS {
        let a = table.draw_action(&mut rng);
        counts[karel_core::Action::ALL.iter().position(|&x| x == a).unwrap()] += 1;
    }
    assert!(chi_square_p(&counts, &table.action) > 0.01);
    let mut counts = [0u64; 20];
    for _ in 0..DRAWS {
        counts[table.draw_number(&mut rng) as usize] += 1;
    }
    assert!(chi_square_p(&counts, &table.number) > 0.01);
}

#[test]
fn skewed_counts_are_detected() {
    let probs = [0.5, 0.5];
    assert!(chi_square_p(&[52_000, 48_000], &probs) < 0.01);
}
