use serde::{Deserialize, Serialize};
use sparkperf_core::features::FeatureSetKind;
use sparkperf_core::regressors::ModelFamily;
use sparkperf_core::scenarios::ScenarioFamily;

/// One table cell: a mean MAPE, a failure marker, or absent (filtered out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellEntry {
    Mape(f64),
    Marker(String),
}

impl CellEntry {
    pub const ERROR: &'static str = "ERR";

    fn render(&self) -> String {
        match self {
            CellEntry::Mape(v) => format!("{v:.2}"),
            CellEntry::Marker(m) => m.clone(),
        }
    }
}

/// The cross-model comparison: one row per scenario case, one column per
/// (encoding, family) cell — gray box first, then black box, then the
/// analytic model — with mean MAPE percentages as values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub workload_id: String,
    pub family: ScenarioFamily,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub case_id: String,
    /// One entry per column; `None` when the cell was filtered out.
    pub values: Vec<Option<CellEntry>>,
}

/// The fixed column label for a cell, e.g. `gray:DT` or `Ernest`.
pub fn column_label(feature_set: FeatureSetKind, family: ModelFamily) -> String {
    match feature_set {
        FeatureSetKind::Ernest => "Ernest".to_string(),
        FeatureSetKind::GrayBox => format!("gray:{}", family.short_label()),
        FeatureSetKind::BlackBox => format!("black:{}", family.short_label()),
    }
}

/// Column order mirroring the published layout: gray box, black box, Ernest.
pub fn column_order(
    feature_sets: &[FeatureSetKind],
    families: &[ModelFamily],
    include_ernest: bool,
) -> Vec<(FeatureSetKind, ModelFamily)> {
    let mut columns = Vec::new();
    for fs in [FeatureSetKind::GrayBox, FeatureSetKind::BlackBox]
        .into_iter()
        .filter(|fs| feature_sets.contains(fs))
    {
        for &family in families {
            columns.push((fs, family));
        }
    }
    if include_ernest {
        columns.push((FeatureSetKind::Ernest, ModelFamily::Ernest));
    }
    columns
}

impl ComparisonTable {
    /// Plain-text rendering with aligned columns.
    pub fn render_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        let mut header = vec!["case".to_string()];
        header.extend(self.columns.iter().cloned());
        grid.push(header);
        for row in &self.rows {
            let mut cells = vec![row.case_id.clone()];
            cells.extend(
                row.values
                    .iter()
                    .map(|v| v.as_ref().map_or_else(|| "-".to_string(), CellEntry::render)),
            );
            grid.push(cells);
        }
        let ncols = grid[0].len();
        let widths: Vec<usize> = (0..ncols)
            .map(|c| grid.iter().map(|row| row[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            for (c, cell) in row.iter().enumerate() {
                if c == 0 {
                    out.push_str(&format!("{cell:<width$}", width = widths[0]));
                } else {
                    out.push_str(&format!("  {cell:>width$}", width = widths[c]));
                }
            }
            out.push('\n');
        }
        out
    }

    /// CSV rendering: empty for absent cells, `ERR` for failed ones.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("case");
        for col in &self.columns {
            out.push(',');
            out.push_str(col);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.case_id);
            for value in &row.values {
                out.push(',');
                if let Some(v) = value {
                    out.push_str(&v.render());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("table serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
