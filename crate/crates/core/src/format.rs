//! On-disk formats: relation text files, cell-relation text files with a
//! grid header, trajectory CSV, bundle directories with a manifest, and
//! measure CSV. Floats are written in Rust's shortest round-trip form, so
//! write-then-parse is bit-exact.

use crate::error::{Error, Result};
use crate::limits::LimitSetReport;
use crate::measures::{DiscreteMeasure, RecurrenceReport, StrictInvarianceReport, SubinvarianceReport};
use crate::relation::Relation;
use crate::semigroup::{CellRelation, ConstructionMode};
use crate::space::{Grid, SpaceDescriptor};
use crate::trajectory::{Provenance, SolutionBundle, Trajectory};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

// ---------------------------------------------------------------------------
// relation text format

/// Canonical text form: `states N` then one `i -> j` line per edge, sorted.
pub fn write_relation(r: &Relation) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "states {}", r.state_count());
    for &(i, j) in r.edges() {
        let _ = writeln!(out, "{i} -> {j}");
    }
    out
}

/// Parse the relation text format; `#` starts a comment, blank lines are
/// skipped.
pub fn parse_relation(text: &str) -> Result<Relation> {
    let mut states: Option<usize> = None;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("states") {
            let n: usize = rest.trim().parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad state count: {rest:?}"),
            })?;
            states = Some(n);
        } else {
            edges.push(parse_edge(line, lineno + 1)?);
        }
    }
    let n = states.ok_or(Error::Parse {
        line: 0,
        message: "missing 'states N' line".into(),
    })?;
    Relation::new(n, &edges)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => line[..pos].trim(),
        None => line.trim(),
    }
}

fn parse_edge(line: &str, lineno: usize) -> Result<(usize, usize)> {
    let mut parts = line.split("->");
    let bad = || Error::Parse {
        line: lineno,
        message: format!("expected 'i -> j', got {line:?}"),
    };
    let i = parts.next().ok_or_else(bad)?.trim();
    let j = parts.next().ok_or_else(bad)?.trim();
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((i.parse().map_err(|_| bad())?, j.parse().map_err(|_| bad())?))
}

// ---------------------------------------------------------------------------
// cell relation text format: the relation body prefixed by a grid header

fn space_to_header(space: &SpaceDescriptor) -> String {
    match space {
        SpaceDescriptor::Box { bounds } => format!("box {}", bounds_to_str(bounds)),
        SpaceDescriptor::Torus { bounds } => format!("torus {}", bounds_to_str(bounds)),
        SpaceDescriptor::Finite { labels } => format!("finite {}", labels.join(",")),
    }
}

fn bounds_to_str(bounds: &[(f64, f64)]) -> String {
    bounds
        .iter()
        .map(|(lo, hi)| format!("{lo},{hi}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_bounds(text: &str, lineno: usize) -> Result<Vec<(f64, f64)>> {
    text.split(';')
        .map(|pair| {
            let mut it = pair.split(',');
            let bad = || Error::Parse {
                line: lineno,
                message: format!("bad bounds {pair:?}"),
            };
            let lo: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let hi: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            Ok((lo, hi))
        })
        .collect()
}

pub fn write_cell_relation(v: &CellRelation) -> String {
    let grid = v.grid();
    let mode = match v.mode {
        ConstructionMode::FromField => "field",
        ConstructionMode::FromBundle => "bundle",
        ConstructionMode::Imported => "imported",
    };
    let res = grid
        .resolution()
        .iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let mut out = format!(
        "grid {} res {} dt {} mode {} inflation {}\n",
        space_to_header(grid.space()),
        res,
        v.dt(),
        mode,
        v.inflation
    );
    out.push_str(&write_relation(&v.to_relation()));
    out
}

pub fn parse_cell_relation(text: &str) -> Result<CellRelation> {
    let mut lines = text.lines();
    let header = loop {
        match lines.next() {
            Some(raw) => {
                let line = strip_comment(raw);
                if !line.is_empty() {
                    break line.to_string();
                }
            }
            None => {
                return Err(Error::Parse {
                    line: 0,
                    message: "missing grid header".into(),
                })
            }
        }
    };
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&"grid") {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected 'grid ...' header, got {header:?}"),
        });
    }
    let bad = |msg: &str| Error::Parse {
        line: 1,
        message: msg.to_string(),
    };
    let kind = *tokens.get(1).ok_or_else(|| bad("missing space kind"))?;
    let payload = *tokens.get(2).ok_or_else(|| bad("missing space payload"))?;
    let space = match kind {
        "box" => SpaceDescriptor::boxed(parse_bounds(payload, 1)?)?,
        "torus" => SpaceDescriptor::torus(parse_bounds(payload, 1)?)?,
        "finite" => SpaceDescriptor::finite(payload.split(',').map(str::to_string).collect())?,
        other => return Err(bad(&format!("unknown space kind {other:?}"))),
    };
    let mut res = Vec::new();
    let mut dt = None;
    let mut mode = ConstructionMode::Imported;
    let mut inflation = 0usize;
    let mut it = tokens[3..].iter();
    while let Some(&key) = it.next() {
        let value = *it.next().ok_or_else(|| bad(&format!("missing value after {key:?}")))?;
        match key {
            "res" => {
                res = value
                    .split(',')
                    .map(|t| t.parse::<usize>().map_err(|_| bad("bad resolution")))
                    .collect::<Result<_>>()?;
            }
            "dt" => dt = Some(value.parse::<f64>().map_err(|_| bad("bad dt"))?),
            "mode" => {
                mode = match value {
                    "field" => ConstructionMode::FromField,
                    "bundle" => ConstructionMode::FromBundle,
                    "imported" => ConstructionMode::Imported,
                    other => return Err(bad(&format!("unknown mode {other:?}"))),
                }
            }
            "inflation" => inflation = value.parse().map_err(|_| bad("bad inflation"))?,
            other => return Err(bad(&format!("unknown header key {other:?}"))),
        }
    }
    let grid = Arc::new(Grid::new(space, res)?);
    let body: String = text
        .lines()
        .skip_while(|l| !strip_comment(l).starts_with("grid"))
        .skip(1)
        .collect::<Vec<_>>()
        .join("\n");
    let relation = parse_relation(&body)?;
    if relation.state_count() != grid.cell_count() {
        return Err(Error::Parse {
            line: 2,
            message: format!(
                "state count {} does not match grid cell count {}",
                relation.state_count(),
                grid.cell_count()
            ),
        });
    }
    CellRelation::from_edges(
        grid,
        dt.ok_or_else(|| bad("missing dt"))?,
        relation.edges().to_vec(),
        mode,
        inflation,
    )
}

// ---------------------------------------------------------------------------
// trajectory CSV and bundle directories

/// CSV with header `t,x1,...,xn`, one row per grid time, time ascending.
pub fn write_trajectory_csv(t: &Trajectory) -> String {
    let dim = t.samples()[0].len();
    let mut out = String::from("t");
    for d in 1..=dim {
        let _ = write!(out, ",x{d}");
    }
    out.push('\n');
    for (k, sample) in t.samples().iter().enumerate() {
        let time = (t.start_index() + k as i64) as f64 * t.dt();
        let _ = write!(out, "{time}");
        for x in sample {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

/// Parse a trajectory CSV; the step and start index are recovered from the
/// time column.
pub fn parse_trajectory_csv(
    text: &str,
    space: Arc<SpaceDescriptor>,
    dt: f64,
) -> Result<Trajectory> {
    let mut samples = Vec::new();
    let mut start_index: Option<i64> = None;
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue; // header
        }
        let mut fields = line.split(',');
        let bad = |msg: &str| Error::Parse {
            line: lineno + 1,
            message: msg.to_string(),
        };
        let t: f64 = fields
            .next()
            .ok_or_else(|| bad("missing time"))?
            .trim()
            .parse()
            .map_err(|_| bad("bad time"))?;
        let point: Vec<f64> = fields
            .map(|f| f.trim().parse::<f64>().map_err(|_| bad("bad coordinate")))
            .collect::<Result<_>>()?;
        if start_index.is_none() {
            let k = (t / dt).round();
            if (t / dt - k).abs() > 1e-9 {
                return Err(Error::GridAlignment { value: t, step: dt });
            }
            start_index = Some(k as i64);
        }
        samples.push(point);
    }
    Trajectory::new(
        space,
        dt,
        start_index.ok_or(Error::Parse {
            line: 0,
            message: "no data rows".into(),
        })?,
        samples,
    )
}

#[derive(Serialize, Deserialize)]
struct MemberEntry {
    file: String,
    start_index: i64,
    left_truncated: bool,
    right_truncated: bool,
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    dt: f64,
    space: SpaceDescriptor,
    provenance: Provenance,
    members: Vec<MemberEntry>,
}

/// Write a bundle as a directory: `manifest.json` plus one CSV per member.
pub fn write_bundle_dir(bundle: &SolutionBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (i, m) in bundle.members().iter().enumerate() {
        let file = format!("member_{i:04}.csv");
        std::fs::write(dir.join(&file), write_trajectory_csv(m))?;
        entries.push(MemberEntry {
            file,
            start_index: m.start_index(),
            left_truncated: m.left_truncated,
            right_truncated: m.right_truncated,
        });
    }
    let manifest = BundleManifest {
        dt: bundle.dt(),
        space: bundle.space().as_ref().clone(),
        provenance: bundle.provenance.clone(),
        members: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn read_bundle_dir(dir: &Path) -> Result<SolutionBundle> {
    let manifest_text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: BundleManifest = serde_json::from_str(&manifest_text).map_err(|e| Error::Parse {
        line: 0,
        message: format!("manifest: {e}"),
    })?;
    let space = Arc::new(manifest.space);
    let mut members = Vec::new();
    for entry in &manifest.members {
        let text = std::fs::read_to_string(dir.join(&entry.file))?;
        let t = parse_trajectory_csv(&text, space.clone(), manifest.dt)?
            .with_flags(entry.left_truncated, entry.right_truncated);
        members.push(t);
    }
    SolutionBundle::new(space, manifest.dt, members, manifest.provenance)
}

// ---------------------------------------------------------------------------
// measures and reports

/// CSV with header `cell,weight`.
pub fn write_measure_csv(mu: &DiscreteMeasure) -> String {
    let mut out = String::from("cell,weight\n");
    for (cell, w) in mu.weights().iter().enumerate() {
        let _ = writeln!(out, "{cell},{w}");
    }
    out
}

pub fn parse_measure_csv(text: &str, grid: Arc<Grid>) -> Result<DiscreteMeasure> {
    let mut weights = vec![0.0f64; grid.cell_count()];
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: lineno + 1,
            message: msg.to_string(),
        };
        let mut fields = line.split(',');
        let cell: usize = fields
            .next()
            .ok_or_else(|| bad("missing cell"))?
            .trim()
            .parse()
            .map_err(|_| bad("bad cell"))?;
        let w: f64 = fields
            .next()
            .ok_or_else(|| bad("missing weight"))?
            .trim()
            .parse()
            .map_err(|_| bad("bad weight"))?;
        if cell >= weights.len() {
            return Err(bad("cell out of range"));
        }
        weights[cell] = w;
    }
    DiscreteMeasure::new(grid, weights)
}

/// Limit-set report as JSON with keys `base_cell`, `omega`, `alpha`,
/// `period`, `stabilized`, `weak_invariant`, `inflation`.
pub fn limit_report_json(report: &LimitSetReport) -> serde_json::Value {
    serde_json::json!({
        "base_cell": report.base_cell,
        "omega": report.omega.to_indices(),
        "alpha": report.alpha.to_indices(),
        "period": report.period,
        "stabilized": report.stabilized,
        "weak_invariant": report.weak_invariant,
        "inflation": report.inflation,
        "stabilization_steps": report.stabilization_steps,
        "core_restricted": report.core_restricted,
    })
}

/// Measure verification report as JSON with keys `max_violation`,
/// `pairs_tested`, `worst_pair`, `recurrence`, `strict_violations`.
pub fn measure_report_json(
    sub: &SubinvarianceReport,
    strict: Option<&StrictInvarianceReport>,
    recurrence: Option<&RecurrenceReport>,
) -> serde_json::Value {
    serde_json::json!({
        "max_violation": sub.max_violation,
        "pairs_tested": sub.pairs_tested,
        "worst_pair": sub.worst_pair,
        "recurrence": recurrence,
        "strict_violations": strict.map(|s| s.violations.clone()),
    })
}
