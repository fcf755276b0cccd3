//! Human-readable and JSON summaries of run records.

use serde_json::{json, Value};

use crate::run::RunRecord;

/// Six significant digits.
pub fn fmt6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.5e}")
    } else {
        "nan".into()
    }
}

fn num6(v: f64) -> Value {
    if v.is_finite() {
        json!(fmt6(v).parse::<f64>().unwrap_or(v))
    } else {
        Value::Null
    }
}

fn opt6(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), fmt6)
}

const COLUMNS: [&str; 10] = [
    "name",
    "axis",
    "value",
    "status",
    "initial_cost",
    "final_cost",
    "final_distance",
    "distance_to_identity",
    "t_enter",
    "max_defect",
];

fn sorted(records: &[RunRecord]) -> Vec<&RunRecord> {
    let mut v: Vec<&RunRecord> = records.iter().collect();
    v.sort_by(|a, b| {
        a.name
            .cmp(&b.name)
            .then_with(|| a.axis.cmp(&b.axis))
            .then_with(|| a.value.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.value.unwrap_or(f64::NEG_INFINITY)))
    });
    v
}

/// Returns `(table, json)`, sorted by experiment name then axis value.
pub fn emit_summary(records: &[RunRecord]) -> (String, String) {
    let rows: Vec<[String; 10]> = sorted(records)
        .into_iter()
        .map(|r| {
            [
                r.name.clone(),
                r.axis.clone().unwrap_or_else(|| "-".into()),
                opt6(r.value),
                if r.ok() { "ok".into() } else { "failed".into() },
                fmt6(r.initial_cost),
                fmt6(r.final_cost),
                fmt6(r.final_distance),
                opt6(r.final_distance_to_identity),
                r.t_enter.map_or_else(|| "never".into(), fmt6),
                fmt6(r.max_defect),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut table = line(COLUMNS.to_vec());
    for row in &rows {
        table.push_str(&line(row.iter().map(|s| s.as_str()).collect()));
    }

    let items: Vec<Value> = sorted(records)
        .into_iter()
        .map(|r| {
            json!({
                "name": r.name,
                "axis": r.axis,
                "value": r.value.map(num6),
                "status": r.status,
                "initial_cost": num6(r.initial_cost),
                "final_cost": num6(r.final_cost),
                "final_distance": num6(r.final_distance),
                "final_distance_to_identity": r.final_distance_to_identity.map(num6),
                "t_enter": r.t_enter.map_or(json!("never"), num6),
                "samples": r.samples,
                "max_defect": num6(r.max_defect),
                "csv": r.csv,
            })
        })
        .collect();
    let json = serde_json::to_string_pretty(&Value::Array(items)).expect("summary values serialize") + "\n";
    (table, json)
}
