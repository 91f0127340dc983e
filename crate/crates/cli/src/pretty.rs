//! Plain-text renderings for `--pretty`.

use lakefuse_core::align::IntegrationMapping;
use lakefuse_core::analyze::{AnalysisOutput, AnalysisResult};
use lakefuse_core::discovery::DiscoveryResult;

pub fn grid(columns: &[String], rows: &[Vec<Option<String>>]) -> String {
    let cell = |c: &Option<String>| c.clone().unwrap_or_else(|| "-".into());
    let mut widths: Vec<usize> = columns.iter().map(|c| c.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell(c).chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(columns.to_vec());
    out += &line(widths.iter().map(|w| "-".repeat(*w)).collect());
    for r in rows {
        out += &line(r.iter().map(cell).collect());
    }
    out
}

pub fn discovery(result: &DiscoveryResult, hint: Option<&str>) -> String {
    let rows: Vec<Vec<Option<String>>> = result
        .results
        .iter()
        .enumerate()
        .map(|(i, r)| vec![Some((i + 1).to_string()), Some(r.table_id.clone()), Some(format!("{:.4}", r.score))])
        .collect();
    let mut out = grid(&["rank".into(), "table".into(), "score".into()], &rows);
    if let Some(h) = hint {
        out += &format!("{h}\n");
    }
    out
}

pub fn mapping(m: &IntegrationMapping) -> String {
    m.groups()
        .map(|(id, members)| {
            let cols: Vec<String> = members.iter().map(|c| format!("{}.{}", c.table_id, c.column)).collect();
            format!("{id}: {}\n", cols.join(", "))
        })
        .collect()
}

pub fn analysis(r: &AnalysisResult) -> String {
    match &r.output {
        AnalysisOutput::Aggregate(a) => {
            let mut cols = a.group_by.clone();
            cols.push(a.measure.clone());
            let rows: Vec<Vec<Option<String>>> = a
                .rows
                .iter()
                .map(|row| {
                    let mut v = row.key.clone();
                    v.push(row.value.map(|x| x.to_string()));
                    v
                })
                .collect();
            grid(&cols, &rows)
        }
        AnalysisOutput::Correlate(c) => format!("pearson({}, {}) = {} over {} pairs\n", c.x, c.y, c.coefficient, c.pairs),
        AnalysisOutput::Resolve { clusters } => clusters
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let rows: Vec<String> = c.iter().map(usize::to_string).collect();
                format!("entity {}: rows {}\n", i + 1, rows.join(", "))
            })
            .collect(),
    }
}
