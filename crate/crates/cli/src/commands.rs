//! Subcommand implementations. Each run writes its artifacts plus a
//! manifest embedding the config text, the effective seed and a config
//! hash, and reports whether every verdict it computed passed.

use crate::config::{RunConfig, RunManifest, SystemSpec};
use crate::plot;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::Arc;
use ydyn_core::error::{Error, Result};
use ydyn_core::format;
use ydyn_core::limits::{
    default_step_budget, omega_limit_grid, recurrent_cells, strong_invariance_grid,
};
use ydyn_core::measures::{
    check_strict_invariance, check_subinvariance, default_test_family, dyadic_intervals,
    krylov_bogoliubov_relation, poincare_check, recurrent_set_full_measure, DiscreteMeasure,
    RecurrenceVerdict,
};
use ydyn_core::semigroup::{
    build_cell_relation_from_bundle, build_cell_relation_from_field, check_semigroup, CellRelation,
};
use ydyn_core::space::CellSet;
use ydyn_core::trajectory::{check_axioms, AxiomCheckConfig};

pub struct Outcome {
    pub all_pass: bool,
    pub artifacts: Vec<String>,
}

fn write_manifest(
    out_dir: &Path,
    subcommand: &str,
    cfg: &RunConfig,
    threads: usize,
    artifacts: &[String],
) -> Result<()> {
    let digest = Sha256::digest(cfg.text.as_bytes());
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: subcommand.to_string(),
        config_sha256: format!("{digest:x}"),
        seed: cfg.seed,
        threads,
        config_text: cfg.text.clone(),
        artifacts: artifacts.to_vec(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out_dir.join("manifest.json"), json)?;
    Ok(())
}

fn relation_dt(cfg: &RunConfig) -> Result<f64> {
    match cfg.ini.get_f64("analysis", "relation_dt")? {
        Some(dt) => Ok(dt),
        None => cfg.dt(),
    }
}

/// Build the cell relation declared by the config: from the box field, from
/// a simulated bundle, or imported from a relation file.
fn build_relation(cfg: &RunConfig) -> Result<CellRelation> {
    let system = cfg.system()?;
    let source = cfg.ini.get("analysis", "relation_source").map(str::to_string);
    let source = source.unwrap_or_else(|| {
        match &system {
            SystemSpec::Inclusion(_) => "field",
            SystemSpec::Piecewise(_) => "bundle",
            SystemSpec::RelationFile(_) => "file",
        }
        .to_string()
    });
    match source.as_str() {
        "field" => match system {
            SystemSpec::Inclusion(field) => build_cell_relation_from_field(
                &field,
                cfg.grid()?,
                relation_dt(cfg)?,
                cfg.inflation()?,
            ),
            _ => Err(Error::InvalidDescriptor(
                "relation_source = field needs a box-valued system".into(),
            )),
        },
        "bundle" => {
            let grid = cfg.grid()?;
            let bundle = cfg.build_bundle(&grid)?;
            build_cell_relation_from_bundle(&bundle, grid, relation_dt(cfg)?)
        }
        "file" => match system {
            SystemSpec::RelationFile(path) => {
                let text = std::fs::read_to_string(&path)?;
                // accept either a plain relation or a cell relation with header
                if text.trim_start().starts_with("grid") {
                    format::parse_cell_relation(&text)
                } else {
                    Ok(CellRelation::from_relation(&format::parse_relation(&text)?))
                }
            }
            _ => Err(Error::InvalidDescriptor(
                "relation_source = file needs [system] relation = <path>".into(),
            )),
        },
        other => Err(Error::InvalidDescriptor(format!(
            "unknown relation_source {other:?}"
        ))),
    }
}

/// Steps corresponding to the `[analysis] ts` model times at the relation
/// step; times must be integer multiples of it.
fn analysis_steps(cfg: &RunConfig, dt: f64) -> Result<Vec<i64>> {
    let spec = cfg.ini.get("analysis", "ts").unwrap_or("1.0");
    spec.split(',')
        .map(|tok| {
            let t: f64 = tok.trim().parse().map_err(|_| {
                Error::InvalidDescriptor(format!("bad analysis time {tok:?}"))
            })?;
            let steps = t / dt;
            if (steps - steps.round()).abs() > 1e-9 {
                return Err(Error::GridAlignment { value: t, step: dt });
            }
            Ok(steps.round() as i64)
        })
        .collect()
}

fn base_cells(cfg: &RunConfig, v: &CellRelation) -> Result<Vec<usize>> {
    match cfg.ini.get("analysis", "base_cells") {
        Some("seeds") | None => {
            let grid = v.grid();
            let mut cells: Vec<usize> = cfg
                .seed_points(grid)?
                .iter()
                .map(|p| grid.locate(p))
                .collect::<Result<_>>()?;
            cells.sort_unstable();
            cells.dedup();
            Ok(cells)
        }
        Some(spec) => spec
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidDescriptor(format!("bad base cell {t:?}")))
            })
            .collect(),
    }
}

/// The measure declared in `[measure]`: `uniform`, `line_uniform` (uniform
/// on the cells crossing the last-axis zero level), `kb` (averaged
/// occupation from `kb_cell` over `kb_t` steps), or `file`.
fn build_measure(cfg: &RunConfig, v: &CellRelation) -> Result<DiscreteMeasure> {
    let grid = v.grid().clone();
    match cfg.ini.get("measure", "kind").unwrap_or("uniform") {
        "uniform" => Ok(DiscreteMeasure::uniform(grid)),
        "line_uniform" => {
            if grid.space().bounds().is_none() {
                return Err(Error::InvalidDescriptor(
                    "line_uniform needs a geometric space".into(),
                ));
            }
            // the cells containing the zero level of the last axis, located
            // through the grid so the half-open convention is consistent
            let axis = grid.dim() - 1;
            let mut cells = CellSet::empty(grid.clone());
            for c in 0..grid.cell_count() {
                if grid.unravel(c)[axis] == 0 {
                    let mut p = grid.cell_center(c);
                    p[axis] = 0.0;
                    cells.insert(grid.locate(&p)?);
                }
            }
            DiscreteMeasure::uniform_on(&cells)
        }
        "kb" => {
            let t_steps = cfg.ini.get_usize("measure", "kb_t")?.unwrap_or(1000);
            let cell = cfg
                .ini
                .get_usize("measure", "kb_cell")?
                .unwrap_or(0);
            krylov_bogoliubov_relation(v, cell, t_steps)
        }
        "file" => {
            let path = cfg.base_dir.join(cfg.ini.require("measure", "file")?);
            format::parse_measure_csv(&std::fs::read_to_string(path)?, grid)
        }
        other => Err(Error::InvalidDescriptor(format!("unknown measure kind {other:?}"))),
    }
}

pub fn simulate(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let grid = cfg.grid()?;
    let bundle = cfg.build_bundle(&grid)?;
    format::write_bundle_dir(&bundle, &out_dir.join("bundle"))?;
    let artifacts = vec!["bundle".to_string()];
    write_manifest(out_dir, "simulate", cfg, threads, &artifacts)?;
    Ok(Outcome {
        all_pass: true,
        artifacts,
    })
}

pub fn reach(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let v = build_relation(cfg)?;
    std::fs::write(out_dir.join("cell_relation.txt"), format::write_cell_relation(&v))?;
    let initial = CellSet::from_cells(v.grid().clone(), &base_cells(cfg, &v)?);
    let (_, t_plus) = cfg.horizons()?;
    let k_max = ((t_plus / v.dt()).round() as i64).max(1);
    let mut steps = Vec::new();
    let mut current = initial.clone();
    for _ in 0..=k_max {
        steps.push(current.to_indices());
        current = v.reach_set(&current, 1)?;
    }
    let tube = serde_json::json!({
        "dt": v.dt(),
        "initial": initial.to_indices(),
        "steps": steps,
    });
    std::fs::write(
        out_dir.join("reach_tube.json"),
        serde_json::to_string_pretty(&tube).expect("tube serializes"),
    )?;
    let report = check_semigroup(&v, &initial, 2, 3)?;
    std::fs::write(
        out_dir.join("semigroup_check.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let artifacts = vec![
        "cell_relation.txt".into(),
        "reach_tube.json".into(),
        "semigroup_check.json".into(),
    ];
    write_manifest(out_dir, "reach", cfg, threads, &artifacts)?;
    Ok(Outcome {
        all_pass: report.holds,
        artifacts,
    })
}

pub fn invariance(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let v = build_relation(cfg)?;
    let full = CellSet::full(v.grid().clone());
    let kernel = v.viability_kernel(&full)?;
    let idempotent = v.viability_kernel(&kernel)? == kernel;
    let strongly_invariant = strong_invariance_grid(&v, &kernel)?;
    let report = serde_json::json!({
        "kernel": kernel.to_indices(),
        "kernel_size": kernel.count(),
        "cells": v.grid().cell_count(),
        "idempotent": idempotent,
        "kernel_strongly_invariant": strongly_invariant,
    });
    std::fs::write(
        out_dir.join("invariance.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    std::fs::write(out_dir.join("cell_relation.txt"), format::write_cell_relation(&v))?;
    let artifacts = vec!["invariance.json".into(), "cell_relation.txt".into()];
    write_manifest(out_dir, "invariance", cfg, threads, &artifacts)?;
    Ok(Outcome {
        all_pass: idempotent,
        artifacts,
    })
}

pub fn limits(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let v = build_relation(cfg)?;
    let budget = cfg
        .ini
        .get_usize("analysis", "n_max")?
        .unwrap_or_else(|| default_step_budget(&v));
    let inflation = cfg.inflation()?;
    let mut all_pass = true;
    let mut artifacts = Vec::new();
    for cell in base_cells(cfg, &v)? {
        let report = omega_limit_grid(&v, cell, budget, inflation)?;
        all_pass &= report.stabilized && report.weak_invariant;
        let name = format!("limit_{cell:05}.json");
        std::fs::write(
            out_dir.join(&name),
            serde_json::to_string_pretty(&format::limit_report_json(&report))
                .expect("report serializes"),
        )?;
        artifacts.push(name);
    }
    write_manifest(out_dir, "limits", cfg, threads, &artifacts)?;
    Ok(Outcome { all_pass, artifacts })
}

pub fn measure(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let v = build_relation(cfg)?;
    let mu = build_measure(cfg, &v)?;
    std::fs::write(out_dir.join("measure.csv"), format::write_measure_csv(&mu))?;
    let random_sets = cfg.ini.get_usize("analysis", "random_sets")?.unwrap_or(100);
    let family = default_test_family(v.grid(), random_sets, cfg.seed);
    let ts = analysis_steps(cfg, v.dt())?;
    let tol = cfg.tolerance()?;
    let sub = check_subinvariance(&mu, &v, &family, &ts, tol)?;
    let strict = check_strict_invariance(&mu, &v, &family, &ts, tol)?;
    std::fs::write(
        out_dir.join("measure_report.json"),
        serde_json::to_string_pretty(&format::measure_report_json(&sub, Some(&strict), None))
            .expect("report serializes"),
    )?;
    let artifacts = vec!["measure.csv".into(), "measure_report.json".into()];
    write_manifest(out_dir, "measure", cfg, threads, &artifacts)?;
    Ok(Outcome {
        all_pass: sub.pass,
        artifacts,
    })
}

pub fn recurrence(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let v = build_relation(cfg)?;
    let mu = build_measure(cfg, &v)?;
    let tol = cfg.tolerance()?;
    let budget = cfg
        .ini
        .get_usize("analysis", "n_max")?
        .unwrap_or_else(|| (default_step_budget(&v)).max(1024));
    let mut all_pass = true;
    let mut recurrence_entries = Vec::new();
    for (idx, b) in dyadic_intervals(v.grid()).into_iter().enumerate() {
        let report = poincare_check(&mu, &v, &b, budget, tol)?;
        // inconclusive runs are reported, not failed
        all_pass &= report.verdict != RecurrenceVerdict::Fail;
        recurrence_entries.push(serde_json::json!({
            "set_index": idx,
            "verdict": report.verdict,
            "defect": report.defect,
            "stabilized": report.stabilized,
        }));
    }
    let rec = recurrent_cells(&v, budget)?;
    let full_measure = recurrent_set_full_measure(&mu, &rec, cfg.inflation()?, tol)?;
    all_pass &= full_measure;
    // strict-invariance section, informational
    let family = default_test_family(v.grid(), 20, cfg.seed);
    let ts = analysis_steps(cfg, v.dt())?;
    let strict = check_strict_invariance(&mu, &v, &family, &ts, tol)?;
    let report = serde_json::json!({
        "recurrence": recurrence_entries,
        "recurrent_cells": rec.to_indices(),
        "recurrent_full_measure": full_measure,
        "strict_violations": strict.violations,
        "strict_max_violation": strict.max_violation,
    });
    std::fs::write(
        out_dir.join("recurrence_report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let artifacts = vec!["recurrence_report.json".into()];
    write_manifest(out_dir, "recurrence", cfg, threads, &artifacts)?;
    Ok(Outcome { all_pass, artifacts })
}

pub fn check(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let grid = cfg.grid()?;
    let bundle = cfg.build_bundle(&grid)?;
    let default_cap = match cfg.system()? {
        SystemSpec::Inclusion(f) => f.speed_bound(),
        SystemSpec::Piecewise(f) => f.speed_bound,
        SystemSpec::RelationFile(_) => {
            return Err(Error::InvalidDescriptor(
                "axiom diagnostics need a simulable system".into(),
            ))
        }
    };
    let cap = cfg
        .ini
        .get_f64("analysis", "lipschitz_cap")?
        .unwrap_or(default_cap);
    let (t_minus, t_plus) = cfg.horizons()?;
    let report = check_axioms(
        &bundle,
        &grid,
        &AxiomCheckConfig {
            window: (t_minus, t_plus),
            tol: cfg.tolerance()?,
            lipschitz_cap: cap,
            seed: cfg.seed,
            spot_checks: 200,
        },
    )?;
    std::fs::write(
        out_dir.join("axiom_report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let artifacts = vec!["axiom_report.json".into()];
    write_manifest(out_dir, "check", cfg, threads, &artifacts)?;
    Ok(Outcome {
        all_pass: report.overall,
        artifacts,
    })
}

/// Render an artifact (bundle directory, measure CSV, limit report or reach
/// tube) to SVG next to it or into `out_dir`.
pub fn plot_artifact(artifact: &Path, out_dir: &Path, proj: Option<&[usize]>) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let svg;
    let stem;
    if artifact.is_dir() {
        let bundle = format::read_bundle_dir(artifact)?;
        svg = plot::plot_bundle(&bundle, proj)?;
        stem = "bundle".to_string();
    } else {
        let name = artifact
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("artifact")
            .to_string();
        stem = name
            .trim_end_matches(".json")
            .trim_end_matches(".csv")
            .to_string();
        let text = std::fs::read_to_string(artifact)?;
        let grid = grid_for_artifact(artifact)?;
        if name.ends_with(".csv") {
            let mu = format::parse_measure_csv(&text, grid.clone())?;
            svg = plot::plot_measure(&grid, mu.weights())?;
        } else {
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
                line: 0,
                message: format!("artifact: {e}"),
            })?;
            if let Some(omega) = value.get("omega") {
                let omega = cells_from_json(omega)?;
                let alpha = value
                    .get("alpha")
                    .map(cells_from_json)
                    .transpose()?
                    .unwrap_or_default();
                svg = plot::plot_cells(&grid, &[(&alpha, "#9ecae1"), (&omega, "#d62728")])?;
            } else if let Some(steps) = value.get("steps").and_then(|s| s.as_array()) {
                let mut layers_data: Vec<Vec<usize>> = Vec::new();
                for step in steps {
                    layers_data.push(cells_from_json(step)?);
                }
                let layers: Vec<(&[usize], &str)> = layers_data
                    .iter()
                    .map(|cells| (cells.as_slice(), "#2ca02c"))
                    .collect();
                svg = plot::plot_cells(&grid, &layers)?;
            } else {
                return Err(Error::InvalidDescriptor(format!(
                    "cannot plot {name:?}: not a bundle, measure, limit report or reach tube"
                )));
            }
        }
    }
    let out_name = format!("{stem}.svg");
    std::fs::write(out_dir.join(&out_name), svg)?;
    Ok(Outcome {
        all_pass: true,
        artifacts: vec![out_name],
    })
}

fn cells_from_json(value: &serde_json::Value) -> Result<Vec<usize>> {
    value
        .as_array()
        .ok_or_else(|| Error::InvalidDescriptor("expected an array of cells".into()))?
        .iter()
        .map(|v| {
            v.as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| Error::InvalidDescriptor("expected a cell index".into()))
        })
        .collect()
}

/// Cell-set and measure artifacts carry no grid of their own; recover it
/// from the run manifest sitting next to them.
fn grid_for_artifact(artifact: &Path) -> Result<Arc<ydyn_core::space::Grid>> {
    let dir = artifact.parent().unwrap_or(Path::new("."));
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::InvalidDescriptor(format!(
            "no manifest.json next to {} to recover the grid from",
            artifact.display()
        )));
    }
    let cfg = RunConfig::load(&manifest_path, None)?;
    cfg.grid()
}
