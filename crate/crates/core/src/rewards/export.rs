use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};

use super::coverage::TransportPlan;

/// A plan matrix read back from TSV, with its axis labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanMatrix {
    pub doc_tokens: Vec<String>,
    pub sum_tokens: Vec<String>,
    pub values: Array2<f64>,
}

/// Files produced by [`export_plan`].
#[derive(Clone, Debug)]
pub struct ExportedPlan {
    pub tsv: PathBuf,
    pub heatmap: Option<PathBuf>,
}

/// Renders the plan as TSV: a header of summary tokens, then one row per
/// document token. Values use the shortest round-tripping decimal form.
pub fn plan_to_tsv(plan: &TransportPlan) -> String {
    let mut out = String::from("doc\\summary");
    for t in &plan.sum_tokens {
        out.push('\t');
        out.push_str(t);
    }
    out.push('\n');
    for (i, t) in plan.doc_tokens.iter().enumerate() {
        out.push_str(t);
        for v in plan.plan.row(i) {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

/// Parses the TSV written by [`plan_to_tsv`].
pub fn read_plan_tsv(path: impl AsRef<Path>) -> Result<PlanMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
    let sum_tokens: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
    let mut doc_tokens = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines.enumerate() {
        let mut cells = line.split('\t');
        doc_tokens.push(cells.next().unwrap_or_default().to_string());
        let row: Vec<f64> = cells
            .map(|c| c.parse::<f64>().map_err(|e| parse_err(n + 2, format!("bad value {c:?}: {e}"))))
            .collect::<Result<_>>()?;
        if row.len() != sum_tokens.len() {
            return Err(parse_err(n + 2, format!("expected {} values, found {}", sum_tokens.len(), row.len())));
        }
        values.extend(row);
    }
    let values = Array2::from_shape_vec((doc_tokens.len(), sum_tokens.len()), values)
        .map_err(|e| parse_err(0, e.to_string()))?;
    Ok(PlanMatrix { doc_tokens, sum_tokens, values })
}

/// Writes `<stem>.tsv` and, if requested, a `<stem>.png` heatmap into `dir`.
pub fn export_plan(plan: &TransportPlan, dir: impl AsRef<Path>, stem: &str, heatmap: bool) -> Result<ExportedPlan> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tsv = dir.join(format!("{stem}.tsv"));
    fs::write(&tsv, plan_to_tsv(plan)).map_err(|e| Error::io(&tsv, e))?;
    let heatmap = if heatmap {
        let png = dir.join(format!("{stem}.png"));
        write_heatmap(&plan.plan, &png)?;
        Some(png)
    } else {
        None
    };
    Ok(ExportedPlan { tsv, heatmap })
}

const CELL: u32 = 16;

/// Greyscale heatmap, one `CELL`-pixel square per entry, darker is more mass.
pub fn write_heatmap(values: &Array2<f64>, path: &Path) -> Result<()> {
    let (rows, cols) = values.dim();
    let max = values.iter().copied().fold(0.0, f64::max);
    let img = image::GrayImage::from_fn((cols.max(1) as u32) * CELL, (rows.max(1) as u32) * CELL, |x, y| {
        let (i, j) = ((y / CELL) as usize, (x / CELL) as usize);
        let v = if i < rows && j < cols && max > 0.0 { values[[i, j]] / max } else { 0.0 };
        image::Luma([(255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8])
    });
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Image(e.to_string()))
}
