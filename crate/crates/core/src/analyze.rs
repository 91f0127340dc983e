//! Aggregation, correlation and entity resolution over integrated tables.
//!
//! Cells are text; numeric operations parse them lazily and treat anything
//! unparseable as null.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::table::{normalize_value, Cell, Table};

pub const DEFAULT_ER_THRESHOLD: f64 = 0.85;

/// Parse a decimal with optional trailing `%` and `,` thousands separators.
pub fn parse_number(raw: &str) -> Option<f64> {
    let s = raw.trim();
    let s = s.strip_suffix('%').unwrap_or(s).trim_end();
    let cleaned: String = s.chars().filter(|&c| c != ',').collect();
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn numeric(c: &Cell) -> Option<f64> {
    c.as_str().and_then(parse_number)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFn {
    Min,
    Max,
    Mean,
    Sum,
    Count,
}

impl std::str::FromStr for AggFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidParameter(format!("aggregate function `{s}`")))
    }
}

fn default_threshold() -> f64 {
    DEFAULT_ER_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnalysisSpec {
    Aggregate {
        measure: String,
        function: AggFn,
        #[serde(default)]
        group_by: Vec<String>,
    },
    Correlate {
        x: String,
        y: String,
    },
    Resolve {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub key: Vec<Option<String>>,
    /// `None` when the group has no numeric value.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub group_by: Vec<String>,
    pub measure: String,
    pub function: AggFn,
    pub rows: Vec<AggregateRow>,
}

impl AggregateResult {
    fn extreme(&self, better: impl Fn(f64, f64) -> bool) -> Option<&AggregateRow> {
        let mut best: Option<&AggregateRow> = None;
        for r in &self.rows {
            if let Some(v) = r.value {
                if best.and_then(|b| b.value).is_none_or(|b| better(v, b)) {
                    best = Some(r);
                }
            }
        }
        best
    }

    /// Group with the smallest value; the first such group on ties.
    pub fn argmin(&self) -> Option<&AggregateRow> {
        self.extreme(|v, b| v < b)
    }

    pub fn argmax(&self) -> Option<&AggregateRow> {
        self.extreme(|v, b| v > b)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header = self.group_by.clone();
        header.push(format!("{}({})", serde_json::to_value(self.function).expect("enum").as_str().unwrap_or(""), self.measure));
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec: Vec<String> = r.key.iter().map(|k| k.clone().unwrap_or_default()).collect();
            rec.push(r.value.map(|v| v.to_string()).unwrap_or_default());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// Aggregate `measure`, optionally per group. Nulls of either kind are
/// skipped; `count` counts non-null cells, the other functions need at least
/// one numeric cell in the whole column.
pub fn aggregate(t: &Table, measure: &str, function: AggFn, group_by: &[String]) -> Result<AggregateResult> {
    let mi = t.column_index(measure)?;
    let gi: Vec<usize> = group_by.iter().map(|g| t.column_index(g)).collect::<Result<_>>()?;
    if function != AggFn::Count && !t.column_cells(mi).any(|c| numeric(c).is_some()) {
        return Err(Error::NonNumeric(measure.to_string()));
    }
    let mut groups: BTreeMap<Vec<Option<String>>, Vec<&Cell>> = BTreeMap::new();
    for row in t.rows() {
        let key = gi.iter().map(|&g| row[g].as_str().map(str::to_string)).collect();
        groups.entry(key).or_default().push(&row[mi]);
    }
    if groups.is_empty() && gi.is_empty() {
        groups.insert(Vec::new(), Vec::new());
    }
    let rows = groups
        .into_iter()
        .map(|(key, cells)| {
            let value = if function == AggFn::Count {
                Some(cells.iter().filter(|c| !c.is_null()).count() as f64)
            } else {
                let nums: Vec<f64> = cells.iter().filter_map(|c| numeric(c)).collect();
                if nums.is_empty() {
                    None
                } else {
                    Some(match function {
                        AggFn::Min => nums.iter().copied().fold(f64::INFINITY, f64::min),
                        AggFn::Max => nums.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        AggFn::Sum => nums.iter().sum(),
                        AggFn::Mean => nums.iter().sum::<f64>() / nums.len() as f64,
                        AggFn::Count => unreachable!(),
                    })
                }
            };
            AggregateRow { key, value }
        })
        .collect();
    Ok(AggregateResult {
        group_by: group_by.to_vec(),
        measure: measure.to_string(),
        function,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub x: String,
    pub y: String,
    pub coefficient: f64,
    /// Complete pairs used.
    pub pairs: usize,
}

/// Pearson correlation over rows where both columns are numeric.
pub fn pearson(t: &Table, x: &str, y: &str) -> Result<f64> {
    Ok(correlate(t, x, y)?.coefficient)
}

pub fn correlate(t: &Table, x: &str, y: &str) -> Result<Correlation> {
    let xi = t.column_index(x)?;
    let yi = t.column_index(y)?;
    let pairs: Vec<(f64, f64)> = t
        .rows()
        .iter()
        .filter_map(|r| Some((numeric(&r[xi])?, numeric(&r[yi])?)))
        .collect();
    let n = pairs.len();
    if n < 2 {
        return Err(Error::TooFewPairs(n));
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance(x.to_string()));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance(y.to_string()));
    }
    Ok(Correlation {
        x: x.to_string(),
        y: y.to_string(),
        coefficient: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        pairs: n,
    })
}

/// Mean per-position similarity over positions where both rows are non-null,
/// and the number of such positions.
pub fn row_similarity(a: &[Cell], b: &[Cell]) -> (f64, usize) {
    let mut total = 0.0;
    let mut shared = 0;
    for (x, y) in a.iter().zip(b) {
        if let (Some(x), Some(y)) = (x.as_str(), y.as_str()) {
            let (x, y) = (normalize_value(x), normalize_value(y));
            total += if x == y { 1.0 } else { strsim::jaro_winkler(&x, &y) };
            shared += 1;
        }
    }
    if shared == 0 {
        (0.0, 0)
    } else {
        (total / shared as f64, shared)
    }
}

/// Link rows sharing at least one non-null position whose similarity reaches
/// `threshold`; return connected components ordered by their smallest row.
pub fn resolve_entities(t: &Table, threshold: f64, exec: Exec) -> Vec<Vec<usize>> {
    let rows = t.rows();
    let n = rows.len();
    let links = exec.map_range(n, |i| {
        (i + 1..n)
            .filter(|&j| {
                let (s, shared) = row_similarity(&rows[i], &rows[j]);
                shared > 0 && s >= threshold
            })
            .collect::<Vec<_>>()
    });
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, js) in links.into_iter().enumerate() {
        for j in js {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        clusters.entry(r).or_default().push(i);
    }
    clusters.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnalysisOutput {
    Aggregate(AggregateResult),
    Correlate(Correlation),
    Resolve { clusters: Vec<Vec<usize>> },
}

/// An analysis output together with the spec that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub spec: AnalysisSpec,
    pub output: AnalysisOutput,
}

pub fn run_analysis(t: &Table, spec: &AnalysisSpec, exec: Exec) -> Result<AnalysisResult> {
    let output = match spec {
        AnalysisSpec::Aggregate {
            measure,
            function,
            group_by,
        } => AnalysisOutput::Aggregate(aggregate(t, measure, *function, group_by)?),
        AnalysisSpec::Correlate { x, y } => AnalysisOutput::Correlate(correlate(t, x, y)?),
        AnalysisSpec::Resolve { threshold } => {
            if !(0.0..=1.0).contains(threshold) {
                return Err(Error::InvalidParameter(format!("threshold {threshold} outside [0, 1]")));
            }
            AnalysisOutput::Resolve {
                clusters: resolve_entities(t, *threshold, exec),
            }
        }
    };
    Ok(AnalysisResult {
        spec: spec.clone(),
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn numbers(cols: &[&str], rows: &[Vec<Option<String>>]) -> Table {
        let rows: Vec<Vec<Option<&str>>> = rows.iter().map(|r| r.iter().map(|c| c.as_deref()).collect()).collect();
        let refs: Vec<&[Option<&str>]> = rows.iter().map(Vec::as_slice).collect();
        Table::from_literals("t", cols, &refs).unwrap()
    }

    fn col(vals: &[Option<&str>]) -> Table {
        numbers(&["v"], &vals.iter().map(|v| vec![v.map(str::to_string)]).collect::<Vec<_>>())
    }

    #[test]
    fn parses_numbers() {
        assert_eq!(parse_number(" 62% "), Some(62.0));
        assert_eq!(parse_number("1,234.5"), Some(1234.5));
        assert_eq!(parse_number("abc"), None);
        assert_eq!(parse_number("inf"), None);
    }

    #[test]
    fn min_skips_nulls() {
        let t = col(&[Some("3"), Some("1"), None, Some("2")]);
        let r = aggregate(&t, "v", AggFn::Min, &[]).unwrap();
        assert_eq!(r.rows[0].value, Some(1.0));
        let c = aggregate(&t, "v", AggFn::Count, &[]).unwrap();
        assert_eq!(c.rows[0].value, Some(3.0));
    }

    #[test]
    fn all_null_measure_is_an_error() {
        let t = col(&[None, None]);
        assert!(matches!(aggregate(&t, "v", AggFn::Mean, &[]), Err(Error::NonNumeric(_))));
    }

    #[test]
    fn grouped_with_null_group() {
        let t = Table::from_literals(
            "t",
            &["g", "v"],
            &[&[Some("a"), Some("1")], &[Some("a"), Some("3")], &[Some("b"), None], &[None, Some("5")]],
        )
        .unwrap();
        let r = aggregate(&t, "v", AggFn::Mean, &["g".into()]).unwrap();
        let got: Vec<_> = r.rows.iter().map(|r| (r.key[0].clone(), r.value)).collect();
        assert_eq!(got, vec![(None, Some(5.0)), (Some("a".into()), Some(2.0)), (Some("b".into()), None)]);
        assert_eq!(r.argmin().unwrap().key[0].as_deref(), Some("a"));
        assert_eq!(r.argmax().unwrap().key[0], None);
    }

    fn xy(points: &[(Option<f64>, Option<f64>)]) -> Table {
        let rows: Vec<Vec<Option<String>>> = points
            .iter()
            .map(|(x, y)| vec![x.map(|v| v.to_string()), y.map(|v| v.to_string())])
            .collect();
        numbers(&["x", "y"], &rows)
    }

    #[test]
    fn pearson_cases() {
        let lin = xy(&(1..=5).map(|i| (Some(i as f64), Some(2.0 * i as f64 + 1.0))).collect::<Vec<_>>());
        assert!((pearson(&lin, "x", "y").unwrap() - 1.0).abs() < 1e-9);
        let neg = xy(&(1..=5).map(|i| (Some(i as f64), Some(-(i as f64)))).collect::<Vec<_>>());
        assert!((pearson(&neg, "x", "y").unwrap() + 1.0).abs() < 1e-9);
        let t = xy(&[(Some(1.0), Some(2.0)), (Some(2.0), Some(1.0)), (Some(3.0), Some(4.0)), (None, Some(5.0))]);
        // Means 2 and 7/3; Sxy = 2, Sxx = 2, Syy = 14/3.
        let expected = 2.0 / (2.0f64.sqrt() * (14.0f64 / 3.0).sqrt());
        assert!((pearson(&t, "x", "y").unwrap() - expected).abs() < 1e-9);
        assert!((expected - (3.0f64 / 7.0).sqrt()).abs() < 1e-12);
        let few = xy(&[(Some(1.0), Some(2.0)), (None, Some(1.0))]);
        assert!(matches!(pearson(&few, "x", "y"), Err(Error::TooFewPairs(1))));
        let flat = xy(&[(Some(1.0), Some(2.0)), (Some(1.0), Some(3.0))]);
        assert!(matches!(pearson(&flat, "x", "y"), Err(Error::ZeroVariance(c)) if c == "x"));
    }

    proptest! {
        #[test]
        fn pearson_symmetric_and_affine_invariant(
            pts in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
            a in 0.1f64..10.0, b in -50.0f64..50.0, c in 0.1f64..10.0, d in -50.0f64..50.0,
        ) {
            let t = xy(&pts.iter().map(|&(x, y)| (Some(x), Some(y))).collect::<Vec<_>>());
            let Ok(r) = pearson(&t, "x", "y") else { return Ok(()) };
            prop_assert!((r - pearson(&t, "y", "x").unwrap()).abs() < 1e-9);
            let moved = xy(&pts.iter().map(|&(x, y)| (Some(a * x + b), Some(c * y + d))).collect::<Vec<_>>());
            prop_assert!((r - pearson(&moved, "x", "y").unwrap()).abs() < 1e-9);
        }

        #[test]
        fn count_is_non_null_cells(cells in proptest::collection::vec(proptest::option::of("[a-z0-9]{1,3}"), 0..20)) {
            let t = col(&cells.iter().map(|c| c.as_deref()).collect::<Vec<_>>());
            let r = aggregate(&t, "v", AggFn::Count, &[]).unwrap();
            let expected = cells.iter().flatten().count() as f64;
            prop_assert_eq!(r.rows[0].value, Some(expected));
        }
    }

    #[test]
    fn resolve_cases() {
        let dup = col(&[Some("Boston"), Some("boston"), Some("Zurich")]);
        assert_eq!(resolve_entities(&dup, 0.85, Exec::Sequential), vec![vec![0, 1], vec![2]]);
        let distinct = col(&[Some("aaa"), Some("zzz"), Some("qqq")]);
        assert_eq!(resolve_entities(&distinct, 0.85, Exec::Sequential).len(), 3);
    }

    #[test]
    fn resolve_extremes() {
        let t = Table::from_literals(
            "t",
            &["a", "b"],
            &[&[Some("x"), None], &[Some("y"), Some("p")], &[None, Some("p")], &[None, Some("q")], &[Some("x"), Some("q")]],
        )
        .unwrap();
        // tau = 0: components of "shares a non-null position": {0,1,4,...} all connected.
        assert_eq!(resolve_entities(&t, 0.0, Exec::Sequential), vec![vec![0, 1, 2, 3, 4]]);
        // tau = 1: exact agreement on every shared position.
        assert_eq!(resolve_entities(&t, 1.0, Exec::Sequential), vec![vec![0, 3, 4], vec![1, 2]]);
    }

    #[test]
    fn spec_json_round_trip() {
        let s: AnalysisSpec = serde_json::from_str(r#"{"kind":"resolve"}"#).unwrap();
        assert_eq!(s, AnalysisSpec::Resolve { threshold: 0.85 });
        let s: AnalysisSpec =
            serde_json::from_str(r#"{"kind":"aggregate","measure":"I1","function":"min","group_by":["I0"]}"#).unwrap();
        let back: AnalysisSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
