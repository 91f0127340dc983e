use std::collections::BTreeSet;
use std::sync::Arc;

use lakefuse_core::align::{assign_integration_ids, AlignConfig, IntegrationMapping};
use lakefuse_core::{Cell, Table};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

const NAMES: [&str; 6] = ["city", "City", "rate", "count", "col_1", "name"];

fn random_set(seed: u64) -> Vec<Arc<Table>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=5);
    (0..n)
        .map(|ti| {
            let k = rng.random_range(1..=4);
            let mut names: Vec<&str> = NAMES.to_vec();
            names.shuffle(&mut rng);
            let cols: Vec<String> = names[..k].iter().map(|s| s.to_string()).collect();
            let rows = (0..rng.random_range(0..6))
                .map(|_| {
                    (0..k)
                        .map(|_| {
                            if rng.random_bool(0.2) {
                                Cell::Missing
                            } else {
                                Cell::value(format!("v{}", rng.random_range(0..5)))
                            }
                        })
                        .collect()
                })
                .collect();
            Arc::new(Table::new(format!("t{ti}"), cols, rows).unwrap())
        })
        .collect()
}

fn check_invariants(tables: &[Arc<Table>], m: &IntegrationMapping) -> Result<(), TestCaseError> {
    let total: usize = tables.iter().map(|t| t.num_columns()).sum();
    let assigned: usize = (0..m.len()).map(|i| m.members(i).len()).sum();
    prop_assert_eq!(assigned, total);
    for t in tables {
        for c in t.columns() {
            prop_assert!(m.id_of(t.id(), c).is_some());
        }
    }
    for i in 0..m.len() {
        let owners: BTreeSet<_> = m.members(i).iter().map(|c| &c.table_id).collect();
        prop_assert_eq!(owners.len(), m.members(i).len());
    }
    let ids: Vec<String> = (0..m.len()).map(|i| format!("I{i}")).collect();
    prop_assert_eq!(m.ids(), ids.as_slice());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn total_separated_and_order_free(seed in any::<u64>(), tau in 0.05f64..0.9) {
        let tables = random_set(seed);
        let cfg = AlignConfig { tau, ..Default::default() };
        let m = assign_integration_ids(&tables, &cfg).mapping;
        check_invariants(&tables, &m)?;
        let mut shuffled = tables.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1));
        let m2 = assign_integration_ids(&shuffled, &cfg).mapping;
        prop_assert_eq!(m.partition(), m2.partition());
    }

    #[test]
    fn tau_above_one_matches_nothing(seed in any::<u64>()) {
        let tables = random_set(seed);
        let cfg = AlignConfig { tau: 1.0 + 1e-9, ..Default::default() };
        let m = assign_integration_ids(&tables, &cfg).mapping;
        let total: usize = tables.iter().map(|t| t.num_columns()).sum();
        prop_assert_eq!(m.len(), total);
    }

    #[test]
    fn mapping_json_round_trips(seed in any::<u64>()) {
        let tables = random_set(seed);
        let m = assign_integration_ids(&tables, &AlignConfig::default()).mapping;
        let back: IntegrationMapping = serde_json::from_str(&m.to_json_string()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.restrict_to(&tables).unwrap(), m);
    }
}
