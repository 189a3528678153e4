use std::fmt::Write as _;
use std::path::Path;

use crate::error::{LabError, Result};

pub const PLOT_HEADER: &str = "series,x,y";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Schema {
    SharpConstant,
    Audit,
    Sweep,
}

fn schema_of(header: &str) -> Option<Schema> {
    if header == "N,s,two_star,S_star" {
        Some(Schema::SharpConstant)
    } else if header == crate::audits::CSV_HEADER {
        Some(Schema::Audit)
    } else if header.starts_with("epsilon,S_eps,ball_fraction") {
        Some(Schema::Sweep)
    } else {
        None
    }
}

/// Turns report CSVs of one schema into long-format `(series, x, y)` rows.
pub fn emit_plotdata(reports: &[(String, String)]) -> Result<String> {
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    let mut seen: Option<Schema> = None;
    for (name, text) in reports {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let schema = schema_of(header)
            .ok_or_else(|| LabError::Format(format!("{name}: unrecognized report header `{header}`")))?;
        if seen.is_some_and(|s| s != schema) {
            return Err(LabError::Format(format!("{name}: reports of different kinds cannot be mixed")));
        }
        seen = Some(schema);
        for (row, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || LabError::Format(format!("{name}: malformed row {}", row + 2));
            match schema {
                Schema::SharpConstant => {
                    if cols.len() != 4 {
                        return Err(bad());
                    }
                    let _ = writeln!(out, "S_star_N{},{},{}", cols[0], cols[1], cols[3]);
                }
                Schema::Audit => {
                    if cols.len() != 9 {
                        return Err(bad());
                    }
                    for (i, series) in [(6, "ratio_refined"), (7, "ratio_chain1"), (8, "ratio_chain2")] {
                        let _ = writeln!(out, "{series},{row},{}", cols[i]);
                    }
                }
                Schema::Sweep => {
                    if cols.len() < 3 {
                        return Err(bad());
                    }
                    let _ = writeln!(out, "S_eps,{},{}", cols[0], cols[1]);
                    let _ = writeln!(out, "ball_fraction,{},{}", cols[0], cols[2]);
                }
            }
        }
    }
    Ok(out)
}

pub fn emit_plotdata_files(paths: &[&Path]) -> Result<String> {
    let reports = paths
        .iter()
        .map(|p| {
            std::fs::read_to_string(p)
                .map(|t| (p.display().to_string(), t))
                .map_err(|e| LabError::io(*p, e))
        })
        .collect::<Result<Vec<_>>>()?;
    emit_plotdata(&reports)
}
