//! Experiment configuration files.
//!
//! The format is flat `key = value` pairs, one per line; `#` starts a
//! comment and blank lines are ignored. There is no nesting. The grid
//! keys `family`, `dim`, `n`, `m`, and `method` may repeat — each
//! repetition adds one grid point, and the run covers the full cross
//! product in nested order (family outermost, method innermost), each
//! axis in file order. The remaining keys are scalars and may appear at
//! most once:
//!
//! * `task` — `bound` (default) or `tv_mc`;
//! * `reps` — Monte Carlo replicates for `tv_mc` (default 10000);
//! * `seed` — base seed (default 0); cell `i` of the grid runs on the
//!   derived stream `i + 1`;
//! * `output` — CSV path (the `--output` flag overrides it);
//! * `top_mass`, `sparsity`, `rank` — family shape attributes.
//!
//! Unknown keys are rejected. A file that sets no grid keys at all
//! describes the empty grid (a header-only CSV).

use std::path::Path;

use crate::setup::FamilyOptions;
use amp_core::{AmpError, Result};

/// What to compute in each grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// The method's certified error bound (exact value for `method = exact`).
    Bound,
    /// Monte Carlo estimate of the true statistic-law total variation.
    TvMc,
}

/// A parsed experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub families: Vec<String>,
    pub dims: Vec<usize>,
    pub ns: Vec<usize>,
    pub ms: Vec<usize>,
    pub methods: Vec<String>,
    pub task: Task,
    pub reps: usize,
    pub seed: u64,
    pub output: Option<String>,
    pub opts: FamilyOptions,
}

/// One grid cell, in deterministic run order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub family: String,
    pub dim: usize,
    pub n: usize,
    pub m: usize,
    pub method: String,
}

fn bad_line(line_no: usize, msg: impl std::fmt::Display) -> AmpError {
    AmpError::validation(format!("config line {line_no}: {msg}"))
}

fn parse_scalar<T: std::str::FromStr>(line_no: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| bad_line(line_no, format!("cannot parse '{value}' as a value for {key}")))
}

/// Parse a configuration from text.
pub fn parse_str(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig {
        families: Vec::new(),
        dims: Vec::new(),
        ns: Vec::new(),
        ms: Vec::new(),
        methods: Vec::new(),
        task: Task::Bound,
        reps: 10_000,
        seed: 0,
        output: None,
        opts: FamilyOptions::default(),
    };
    let mut seen_scalar: Vec<&str> = Vec::new();
    let scalar = |line_no: usize, key: &'static str, seen: &mut Vec<&str>| -> Result<()> {
        if seen.contains(&key) {
            return Err(bad_line(
                line_no,
                format!("{key} may appear only once (only grid keys repeat)"),
            ));
        }
        seen.push(key);
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad_line(line_no, "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(bad_line(line_no, format!("{key} has no value")));
        }
        match key {
            "family" => cfg.families.push(value.to_string()),
            "dim" => cfg.dims.push(parse_scalar(line_no, key, value)?),
            "n" => cfg.ns.push(parse_scalar(line_no, key, value)?),
            "m" => cfg.ms.push(parse_scalar(line_no, key, value)?),
            "method" => cfg.methods.push(value.to_string()),
            "task" => {
                scalar(line_no, "task", &mut seen_scalar)?;
                cfg.task = match value {
                    "bound" => Task::Bound,
                    "tv_mc" => Task::TvMc,
                    other => {
                        return Err(bad_line(
                            line_no,
                            format!("unknown task '{other}' (bound or tv_mc)"),
                        ))
                    }
                };
            }
            "reps" => {
                scalar(line_no, "reps", &mut seen_scalar)?;
                cfg.reps = parse_scalar(line_no, key, value)?;
            }
            "seed" => {
                scalar(line_no, "seed", &mut seen_scalar)?;
                cfg.seed = parse_scalar(line_no, key, value)?;
            }
            "output" => {
                scalar(line_no, "output", &mut seen_scalar)?;
                cfg.output = Some(value.to_string());
            }
            "top_mass" => {
                scalar(line_no, "top_mass", &mut seen_scalar)?;
                cfg.opts.top_mass = parse_scalar(line_no, key, value)?;
            }
            "sparsity" => {
                scalar(line_no, "sparsity", &mut seen_scalar)?;
                cfg.opts.sparsity = parse_scalar(line_no, key, value)?;
            }
            "rank" => {
                scalar(line_no, "rank", &mut seen_scalar)?;
                cfg.opts.rank = Some(parse_scalar(line_no, key, value)?);
            }
            other => {
                return Err(bad_line(
                    line_no,
                    format!(
                        "unknown key '{other}' (grid keys: family, dim, n, m, method; \
                         scalar keys: task, reps, seed, output, top_mass, sparsity, rank)"
                    ),
                ))
            }
        }
    }
    Ok(cfg)
}

/// Parse a configuration file.
pub fn parse_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AmpError::validation(format!("cannot read {}: {e}", path.display())))?;
    parse_str(&text)
}

impl ExperimentConfig {
    /// Expand the grid into cells in run order. All four of `family`,
    /// `n`, `m`, and `method` must be present once any grid key is set;
    /// `dim` alone defaults to 1. No grid keys at all is the empty grid.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let any = !self.families.is_empty()
            || !self.dims.is_empty()
            || !self.ns.is_empty()
            || !self.ms.is_empty()
            || !self.methods.is_empty();
        if !any {
            return Ok(Vec::new());
        }
        let mut missing = Vec::new();
        for (name, empty) in [
            ("family", self.families.is_empty()),
            ("n", self.ns.is_empty()),
            ("m", self.ms.is_empty()),
            ("method", self.methods.is_empty()),
        ] {
            if empty {
                missing.push(name);
            }
        }
        if !missing.is_empty() {
            return Err(AmpError::validation(format!(
                "config sets a partial grid; missing key(s): {}",
                missing.join(", ")
            )));
        }
        let dims = if self.dims.is_empty() {
            vec![1]
        } else {
            self.dims.clone()
        };
        let mut cells = Vec::new();
        for family in &self.families {
            for &dim in &dims {
                for &n in &self.ns {
                    for &m in &self.ms {
                        for method in &self.methods {
                            cells.push(Cell {
                                family: family.clone(),
                                dim,
                                n,
                                m,
                                method: method.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}
