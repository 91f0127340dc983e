use std::collections::BTreeSet;
use std::sync::Arc;

use lakefuse_core::integrate::checks::{covers_inputs, is_maximal, is_sound};
use lakefuse_core::integrate::{
    fd_oracle, full_disjunction, outer_join_integrate, subsumption_filter, FdConfig, IntegratedTable,
};
use lakefuse_core::synth::{random_fd_instance, FdInstanceParams};
use lakefuse_core::{Cell, Exec, IntegrationMapping, Table};
use proptest::prelude::*;

fn fd(tables: &[Arc<Table>], m: &IntegrationMapping) -> IntegratedTable {
    full_disjunction(tables, m, &FdConfig::default()).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn engine_matches_oracle(seed in any::<u64>()) {
        let inst = random_fd_instance(seed, &FdInstanceParams::default());
        let got = fd(&inst.tables, &inst.mapping);
        let want = fd_oracle(&inst.tables, &inst.mapping).unwrap();
        prop_assert_eq!(got.cell_set(), want.cell_set());
    }

    #[test]
    fn order_does_not_matter(seed in any::<u64>()) {
        let p = FdInstanceParams { min_tables: 3, max_tables: 3, ..Default::default() };
        let inst = random_fd_instance(seed, &p);
        let base = fd(&inst.tables, &inst.mapping).cell_set();
        for perm in permutations(3) {
            let t: Vec<_> = perm.iter().map(|&i| inst.tables[i].clone()).collect();
            prop_assert_eq!(&fd(&t, &inst.mapping).cell_set(), &base);
        }
    }

    #[test]
    fn two_tables_match_outer_join(seed in any::<u64>()) {
        let p = FdInstanceParams { min_tables: 2, max_tables: 2, protect_shared: true, ..Default::default() };
        let inst = random_fd_instance(seed, &p);
        let oj = outer_join_integrate(&inst.tables, &inst.mapping, &[]).unwrap();
        let filtered: BTreeSet<Vec<Cell>> =
            subsumption_filter(oj.rows, Exec::Sequential).into_iter().map(|r| r.cells).collect();
        prop_assert_eq!(fd(&inst.tables, &inst.mapping).cell_set(), filtered);
    }

    #[test]
    fn output_is_maximal_sound_and_complete(seed in any::<u64>()) {
        let inst = random_fd_instance(seed, &FdInstanceParams::default());
        let out = fd(&inst.tables, &inst.mapping);
        prop_assert!(is_maximal(&out));
        prop_assert!(is_sound(&inst.tables, &out).unwrap());
        prop_assert!(covers_inputs(&inst.tables, &out).unwrap());
    }

    #[test]
    fn sequential_equals_parallel(seed in any::<u64>()) {
        let inst = random_fd_instance(seed, &FdInstanceParams::default());
        let s = full_disjunction(&inst.tables, &inst.mapping, &FdConfig { exec: Exec::Sequential, ..Default::default() }).unwrap();
        let p = full_disjunction(&inst.tables, &inst.mapping, &FdConfig { exec: Exec::Parallel, ..Default::default() }).unwrap();
        prop_assert_eq!(s, p);
    }
}

fn table(id: &str, cols: &[&str], rows: &[&[Option<&str>]]) -> Arc<Table> {
    Arc::new(Table::from_literals(id, cols, rows).unwrap())
}

#[test]
fn null_on_a_shared_id_breaks_the_two_table_coincidence() {
    // The outer join needs every shared ID to match; the full disjunction
    // only needs one agreeing ID.
    let a = table("a", &["k", "j", "x"], &[&[Some("1"), None, Some("7")]]);
    let b = table("b", &["k", "j", "z"], &[&[Some("1"), Some("2"), Some("3")]]);
    let set = [a, b];
    let m = IntegrationMapping::by_column_name(&set).unwrap();
    let oj = outer_join_integrate(&set, &m, &[]).unwrap();
    let filtered = subsumption_filter(oj.rows, Exec::Sequential);
    assert_eq!(filtered.len(), 2);
    let full = fd(&set, &m);
    assert_eq!(full.num_rows(), 1);
    assert_eq!(full.rows[0].values(), vec![Some("1"), Some("2"), Some("7"), Some("3")]);
}

#[test]
fn disjoint_schemas_are_an_outer_union() {
    let a = table("a", &["x"], &[&[Some("1")], &[Some("2")]]);
    let b = table("b", &["y"], &[&[Some("3")], &[Some("4")], &[Some("5")]]);
    let set = [a, b];
    let m = IntegrationMapping::by_column_name(&set).unwrap();
    let out = fd(&set, &m);
    assert_eq!(out.num_rows(), 5);
    assert_eq!(out.cell_set(), fd_oracle(&set, &m).unwrap().cell_set());
    for r in &out.rows {
        assert_eq!(r.cells.iter().filter(|c| **c == Cell::Produced).count(), 1);
    }
}
