//! Sectioned key=value config files, run manifests, and construction of
//! spaces, grids, fields and bundles from a parsed config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use ydyn_core::error::{Error, Result};
use ydyn_core::solvers::{
    sample_inclusion, simulate_filippov, BoxHull, PiecewiseField, SelectionLaw, SelectionPolicy,
    SetValuedField,
};
use ydyn_core::space::{Grid, Point, SpaceDescriptor};
use ydyn_core::trajectory::SolutionBundle;

/// Parsed `[section] key = value` file. Section and key lookups are
/// case-sensitive. `#` starts a comment anywhere; `;` only at the start of
/// a line, since it separates dimensions inside values.
#[derive(Clone, Debug, Default)]
pub struct Ini {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Ini> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("");
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(Error::Parse {
                    line: lineno + 1,
                    message: format!("unterminated section header {line:?}"),
                })?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
            } else if let Some(eq) = line.find('=') {
                let key = line[..eq].trim().to_string();
                let value = line[eq + 1..].trim().to_string();
                sections.entry(current.clone()).or_default().insert(key, value);
            } else {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected 'key = value', got {line:?}"),
                });
            }
        }
        Ok(Ini { sections })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key).ok_or_else(|| Error::InvalidDescriptor(format!(
            "missing [{section}] {key}"
        )))
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.get(section, key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::InvalidDescriptor(format!(
                    "[{section}] {key} = {v:?} is not a number"
                )))
            })
            .transpose()
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.get(section, key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| Error::InvalidDescriptor(format!(
                    "[{section}] {key} = {v:?} is not a nonnegative integer"
                )))
            })
            .transpose()
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        self.get(section, key)
            .map(|v| {
                v.parse::<u64>().map_err(|_| Error::InvalidDescriptor(format!(
                    "[{section}] {key} = {v:?} is not a nonnegative integer"
                )))
            })
            .transpose()
    }
}

fn strip_comment(line: &str) -> &str {
    let trimmed = line.trim_start();
    if trimmed.starts_with(';') {
        return "";
    }
    match line.find('#') {
        Some(cut) => &line[..cut],
        None => line,
    }
}

/// Resolved run configuration: the raw text (for hashing and manifests),
/// the parsed sections, and the directory the config was loaded from
/// (relative paths resolve against it).
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub text: String,
    pub ini: Ini,
    pub base_dir: PathBuf,
    pub seed: u64,
}

/// A manifest written next to every run's artifacts. Re-running from a
/// manifest reproduces the artifacts byte for byte: the full config text
/// and the effective seed are embedded.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub config_text: String,
    pub artifacts: Vec<String>,
}

impl RunConfig {
    /// Load from a config file, or from a run manifest (detected by JSON
    /// content), in which case the embedded config and seed are used.
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        if text.trim_start().starts_with('{') {
            let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
                line: 0,
                message: format!("manifest: {e}"),
            })?;
            let ini = Ini::parse(&manifest.config_text)?;
            let seed = seed_override.unwrap_or(manifest.seed);
            return Ok(RunConfig {
                text: manifest.config_text,
                ini,
                base_dir,
                seed,
            });
        }
        let ini = Ini::parse(&text)?;
        let seed = match seed_override {
            Some(s) => s,
            None => ini.get_u64("solver", "seed")?.unwrap_or(0),
        };
        Ok(RunConfig {
            text,
            ini,
            base_dir,
            seed,
        })
    }

    pub fn space(&self) -> Result<SpaceDescriptor> {
        let kind = self.ini.require("space", "kind")?;
        match kind {
            "box" => SpaceDescriptor::boxed(parse_bounds(self.ini.require("space", "bounds")?)?),
            "torus" => SpaceDescriptor::torus(parse_bounds(self.ini.require("space", "bounds")?)?),
            "finite" => SpaceDescriptor::finite(
                self.ini
                    .require("space", "labels")?
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .collect(),
            ),
            other => Err(Error::InvalidDescriptor(format!("unknown space kind {other:?}"))),
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        let space = self.space()?;
        let resolution = match self.ini.get("grid", "resolution") {
            Some(v) => v
                .split(',')
                .map(|t| {
                    t.trim().parse::<usize>().map_err(|_| {
                        Error::InvalidDescriptor(format!("bad resolution entry {t:?}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            None => vec![],
        };
        Ok(Arc::new(Grid::new(space, resolution)?))
    }

    pub fn dt(&self) -> Result<f64> {
        self.ini
            .get_f64("solver", "dt")?
            .ok_or_else(|| Error::InvalidDescriptor("missing [solver] dt".into()))
    }

    pub fn horizons(&self) -> Result<(f64, f64)> {
        let t_minus = self.ini.get_f64("solver", "t_minus")?.unwrap_or(0.0);
        let t_plus = self.ini.get_f64("solver", "t_plus")?.unwrap_or(1.0);
        Ok((t_minus, t_plus))
    }

    pub fn policy(&self) -> Result<SelectionPolicy> {
        let law = match self.ini.get("solver", "policy").unwrap_or("extreme") {
            "extreme" => SelectionLaw::ExtremeVelocity,
            "corner" => SelectionLaw::UniformCorner,
            "uniform" => SelectionLaw::UniformInBox,
            other => {
                return Err(Error::InvalidDescriptor(format!(
                    "unknown selection policy {other:?}"
                )))
            }
        };
        let dwell = self.ini.get_usize("solver", "dwell")?.unwrap_or(5);
        SelectionPolicy::new(self.seed, dwell, law)
    }

    /// Seed points: `centers` (all cell centers), `line` (surface-row points
    /// at x cell centers, planar systems), explicit `x;y;...` lists, or
    /// combinations joined with `+`.
    pub fn seed_points(&self, grid: &Arc<Grid>) -> Result<Vec<Point>> {
        let spec = self.ini.get("solver", "seeds").unwrap_or("centers");
        let mut out = Vec::new();
        for token in spec.split('+') {
            let token = token.trim();
            match token {
                "centers" => {
                    for c in 0..grid.cell_count() {
                        out.push(grid.cell_center(c));
                    }
                }
                "line" => {
                    if grid.dim() != 2 {
                        return Err(Error::InvalidDescriptor(
                            "'line' seeds need a two-dimensional grid".into(),
                        ));
                    }
                    for ix in 0..grid.resolution()[0] {
                        let x = grid.cell_center(grid.ravel(&[ix, 0]))[0];
                        out.push(vec![x, 0.0]);
                    }
                }
                explicit => {
                    for point_text in explicit.split(';') {
                        let point: Vec<f64> = point_text
                            .split(',')
                            .map(|t| {
                                t.trim().parse::<f64>().map_err(|_| {
                                    Error::InvalidDescriptor(format!("bad seed point {point_text:?}"))
                                })
                            })
                            .collect::<Result<_>>()?;
                        out.push(point);
                    }
                }
            }
        }
        Ok(out)
    }

    /// The declared system, as a set-valued or piecewise field (one of the
    /// two is present) or a relation file path.
    pub fn system(&self) -> Result<SystemSpec> {
        if let Some(path) = self.ini.get("system", "relation") {
            return Ok(SystemSpec::RelationFile(self.base_dir.join(path)));
        }
        if let Some(path) = self.ini.get("system", "field_table") {
            let grid = self.grid()?;
            let field = parse_field_table(&std::fs::read_to_string(self.base_dir.join(path))?, grid)?;
            return Ok(SystemSpec::Inclusion(field));
        }
        match self.ini.require("system", "builtin")? {
            "interval_rotation" => Ok(SystemSpec::Inclusion(SetValuedField::interval_rotation())),
            "filippov_absorb" => {
                let space = Arc::new(self.space()?);
                Ok(SystemSpec::Piecewise(PiecewiseField::filippov_absorb(space)))
            }
            other => Err(Error::InvalidDescriptor(format!("unknown builtin {other:?}"))),
        }
    }

    /// Simulate the declared system into a bundle.
    pub fn build_bundle(&self, grid: &Arc<Grid>) -> Result<SolutionBundle> {
        let dt = self.dt()?;
        let (t_minus, t_plus) = self.horizons()?;
        let seeds = self.seed_points(grid)?;
        match self.system()? {
            SystemSpec::Inclusion(field) => {
                let n = self.ini.get_usize("solver", "n_per_seed")?.unwrap_or(1);
                let policy = self.policy()?;
                sample_inclusion(&field, &seeds, t_minus, t_plus, dt, n, &policy)
            }
            SystemSpec::Piecewise(field) => {
                let mut members = Vec::new();
                for s in &seeds {
                    members.push(simulate_filippov(&field, s, t_minus, t_plus, dt)?);
                }
                SolutionBundle::new(
                    Arc::new(self.space()?),
                    dt,
                    members,
                    ydyn_core::trajectory::Provenance::new("filippov", self.seed, (t_minus, t_plus)),
                )
            }
            SystemSpec::RelationFile(path) => Err(Error::InvalidDescriptor(format!(
                "cannot simulate a relation file ({})",
                path.display()
            ))),
        }
    }

    pub fn tolerance(&self) -> Result<f64> {
        Ok(self.ini.get_f64("analysis", "tolerance")?.unwrap_or(1e-9))
    }

    pub fn inflation(&self) -> Result<usize> {
        Ok(self.ini.get_usize("analysis", "inflation")?.unwrap_or(1))
    }
}

pub enum SystemSpec {
    Inclusion(SetValuedField),
    Piecewise(PiecewiseField),
    RelationFile(PathBuf),
}

fn parse_bounds(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(';')
        .map(|pair| {
            let bad = || Error::InvalidDescriptor(format!("bad bounds {pair:?}"));
            let mut it = pair.split(',');
            let lo: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let hi: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            Ok((lo, hi))
        })
        .collect()
}

/// Field table: one `cell_index lo1 hi1 ... lon hin` line per cell.
fn parse_field_table(text: &str, grid: Arc<Grid>) -> Result<SetValuedField> {
    let dim = grid.dim();
    let mut boxes: Vec<Option<BoxHull>> = vec![None; grid.cell_count()];
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            line: lineno + 1,
            message: msg,
        };
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number {t:?}"))))
            .collect::<Result<_>>()?;
        if fields.len() != 1 + 2 * dim {
            return Err(bad(format!(
                "expected cell index and {} bounds, got {} fields",
                2 * dim,
                fields.len()
            )));
        }
        let cell = fields[0] as usize;
        if cell >= boxes.len() {
            return Err(bad(format!("cell {cell} out of range")));
        }
        let hull: BoxHull = (0..dim).map(|d| (fields[1 + 2 * d], fields[2 + 2 * d])).collect();
        boxes[cell] = Some(hull);
    }
    SetValuedField::from_table(grid, boxes)
}
