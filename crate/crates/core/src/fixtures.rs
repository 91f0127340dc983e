//! Small hand-built integration sets used by tests, benches and demos.
//!
//! `example1` is a COVID vaccination scenario: `T1` is the query, `T2` is
//! unionable with it and `T3` joins on City. `example4` is a vaccine/country/
//! agency triangle in which the Johnson & Johnson vaccine reaches its agency
//! only through the country bridge.

use std::path::Path;
use std::sync::Arc;

use crate::error::Result;
use crate::table::Table;

fn build(id: &str, cols: &[&str], rows: &[&[&str]]) -> Table {
    let rows: Vec<Vec<Option<&str>>> = rows.iter().map(|r| r.iter().map(|c| Some(*c)).collect()).collect();
    let refs: Vec<&[Option<&str>]> = rows.iter().map(Vec::as_slice).collect();
    Table::from_literals(id, cols, &refs).expect("fixture tables are well formed")
}

pub fn example1() -> Vec<Arc<Table>> {
    vec![
        Arc::new(build(
            "T1",
            &["City", "VaccinationRate"],
            &[&["Boston", "62"], &["Toronto", "83"], &["Chicago", "70"], &["Seattle", "78"]],
        )),
        Arc::new(build(
            "T2",
            &["City", "VaccinationRate"],
            &[&["Boston", "62"], &["Montreal", "80"], &["Vancouver", "81"], &["Chicago", "70"]],
        )),
        Arc::new(build(
            "T3",
            &["City", "Cases", "DeathRate"],
            &[
                &["Boston", "1200", "1.1"],
                &["Toronto", "950", "0.9"],
                &["Seattle", "700", "1.3"],
                &["New York", "3000", "2.0"],
            ],
        )),
    ]
}

pub const JNJ: &str = "Johnson & Johnson";
pub const JNJ_SHORT: &str = "J&J";

pub fn example4() -> Vec<Arc<Table>> {
    vec![
        Arc::new(build(
            "T4",
            &["Vaccine", "Country"],
            &[&["Pfizer-BioNTech", "Germany"], &["Moderna", "USA"], &[JNJ, "USA"]],
        )),
        Arc::new(build("T5", &["Country", "Agency"], &[&["Germany", "PEI"], &["USA", "FDA"]])),
        Arc::new(build(
            "T6",
            &["Vaccine", "Agency"],
            &[&["Pfizer-BioNTech", "PEI"], &["Moderna", "FDA"], &[JNJ_SHORT, "FDA"]],
        )),
    ]
}

/// Join order for the outer-join baseline on [`example4`].
pub fn example4_order() -> Vec<String> {
    ["T6", "T4", "T5"].map(String::from).to_vec()
}

/// Write tables as `<id>.csv` files under `dir`.
pub fn write_tables(dir: impl AsRef<Path>, tables: &[Arc<Table>]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    for t in tables {
        t.save(dir.join(format!("{}.csv", t.id())))?;
    }
    Ok(())
}
