//! The `reachkit` command line: `solve`, `query`, `export` and `verify`.
//!
//! Each command has a library entry point (`cmd_*`) returning a report, so
//! the commands can be driven from tests without spawning processes.

use std::ffi::OsString;
use std::fmt;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Run, RunConfig};
use crate::error::{Error, Result};
use crate::export::{write_csv_slice, write_vtk};
use crate::grid::{Relation, ValueField};
use crate::oracle::{boundary_band, brute_classify, check_guard, steps_for};
use crate::solver::{extract_set, solve_with, QueryKind, SetQuery, SolveOptions, SolveOutcome};

/// Environment variable capping the worker count (0 = all cores).
pub const THREADS_ENV: &str = "REACHKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "reachkit", version, about = "Reachable, viable and invariant sets on Cartesian grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the value function described by a config file.
    Solve { config: PathBuf },
    /// Interpolate a solved field at a state and report set membership.
    Query {
        field: PathBuf,
        /// State components, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        state: Vec<f64>,
        #[arg(long)]
        horizon: f64,
    },
    /// Write a field as VTK or as a 2-D CSV slice.
    Export {
        field: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long)]
        axis: Option<usize>,
        #[arg(long)]
        index: Option<usize>,
        /// Output file (default: next to the field).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compare the solver with exhaustive enumeration on sampled nodes.
    Verify {
        config: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Vtk,
    #[value(name = "csv_slice")]
    CsvSlice,
}

/// Worker count from `REACHKIT_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::usage(format!("{THREADS_ENV} must be a worker count, got {v:?}"))),
        Err(e) => Err(Error::usage(format!("{THREADS_ENV}: {e}"))),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn base_dir(config: &Path) -> &Path {
    match config.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn load_run(config: &Path) -> Result<(RunConfig, Run<f64>)> {
    let cfg = RunConfig::load(config)?;
    let run = cfg.build::<f64>(base_dir(config))?;
    Ok((cfg, run))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

fn write_atomically(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    ensure_parent(path)?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field_path: PathBuf,
    pub manifest_path: PathBuf,
    pub config_hash: String,
    pub recursions: usize,
    pub clamped_lookups: u64,
    pub elapsed: Duration,
    pub digest: String,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "field {}", self.field_path.display())?;
        writeln!(f, "manifest {}", self.manifest_path.display())?;
        writeln!(f, "recursions {}", self.recursions)?;
        writeln!(f, "clamped_lookups {}", self.clamped_lookups)?;
        writeln!(f, "wall_time_s {:.3}", self.elapsed.as_secs_f64())?;
        write!(f, "digest {}", self.digest)
    }
}

fn manifest_text(cfg: &RunConfig, outcome: &SolveOutcome<f64>, threads: Option<usize>) -> String {
    let mut s = String::new();
    let threads = threads.map_or_else(|| "default".to_string(), |n| n.to_string());
    s.push_str("reachkit manifest v1\n");
    s.push_str(&format!("config_hash {}\n", cfg.hash()));
    s.push_str(&format!("system {}\n", cfg.system.name));
    s.push_str(&format!("kind {}\n", cfg.query.kind));
    s.push_str(&format!("horizon {:?}\n", cfg.query.horizon));
    s.push_str(&format!("dt {:?}\n", cfg.dt));
    s.push_str(&format!("recursions {}\n", outcome.step_sums.len()));
    s.push_str(&format!("threads {threads}\n"));
    s.push_str(&format!("clamped_lookups {}\n", outcome.clamped_lookups));
    s.push_str(&format!("wall_time_s {:.6}\n", outcome.elapsed.as_secs_f64()));
    s.push_str(&format!("digest {}\n", outcome.digest()));
    for (i, sum) in outcome.step_sums.iter().enumerate() {
        s.push_str(&format!("step_sum {} {:?}\n", i + 1, sum));
    }
    s
}

/// Solves the config and writes `<output>.field` and `<output>.manifest`.
pub fn cmd_solve(config: &Path, threads: Option<usize>) -> Result<SolveReport> {
    let (cfg, run) = load_run(config)?;
    let solve_cfg = run.solve_config();
    let outcome = solve_with(&solve_cfg, &SolveOptions { threads })?;
    let mut field = outcome.field.clone();
    field.set_kind(Some(run.query.kind));
    let field_path = with_suffix(&run.output, ".field");
    let manifest_path = with_suffix(&run.output, ".manifest");
    ensure_parent(&field_path)?;
    field.save(&field_path)?;
    let manifest = manifest_text(&cfg, &outcome, threads);
    write_atomically(&manifest_path, |w| Ok(w.write_all(manifest.as_bytes())?))?;
    Ok(SolveReport {
        field_path,
        manifest_path,
        config_hash: cfg.hash(),
        recursions: solve_cfg.recursions,
        clamped_lookups: outcome.clamped_lookups,
        elapsed: outcome.elapsed,
        digest: outcome.digest(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryReport {
    pub value: f64,
    pub horizon: f64,
    pub kind: QueryKind,
    pub member: bool,
}

impl fmt::Display for QueryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "value {:?}", self.value)?;
        writeln!(f, "kind {}", self.kind)?;
        writeln!(f, "horizon {:?}", self.horizon)?;
        write!(f, "member {}", self.member)
    }
}

/// Interpolated value at `state` and membership in the field's set at `horizon`.
pub fn cmd_query(field_path: &Path, state: &[f64], horizon: f64) -> Result<QueryReport> {
    let field = ValueField::<f64>::load(field_path)?;
    let limit = field.horizon();
    if !(horizon >= 0.0 && horizon < limit) {
        return Err(Error::usage(format!(
            "horizon {horizon} must satisfy 0 <= T < k*dt = {limit}; the field is only valid below its computed horizon"
        )));
    }
    let kind = field.kind().ok_or_else(|| {
        Error::usage("field records no query kind; solve it from a config to query membership")
    })?;
    let value = field.interpolate(state)?;
    let member = match kind.relation() {
        Relation::AtMost => value <= horizon,
        Relation::AtLeast => value >= horizon,
    };
    Ok(QueryReport {
        value,
        horizon,
        kind,
        member,
    })
}

/// Writes the export and returns its path.
pub fn cmd_export(
    field_path: &Path,
    format: ExportFormat,
    axis: Option<usize>,
    index: Option<usize>,
    output: Option<&Path>,
) -> Result<PathBuf> {
    let field = ValueField::<f64>::load(field_path)?;
    let slice = match (axis, index) {
        (Some(a), Some(i)) => Some((a, i)),
        (None, None) => None,
        _ => return Err(Error::usage("--axis and --index must be given together")),
    };
    let out = match (output, format, slice) {
        (Some(p), _, _) => p.to_path_buf(),
        (None, ExportFormat::Vtk, _) => field_path.with_extension("vtk"),
        (None, ExportFormat::CsvSlice, None) => field_path.with_extension("csv"),
        (None, ExportFormat::CsvSlice, Some((a, i))) => {
            field_path.with_extension(format!("axis{a}_{i}.csv"))
        }
    };
    match format {
        ExportFormat::Vtk => {
            if slice.is_some() {
                return Err(Error::usage("--axis/--index apply to csv_slice only"));
            }
            write_atomically(&out, |w| write_vtk(&field, w))?;
        }
        ExportFormat::CsvSlice => write_atomically(&out, |w| write_csv_slice(&field, slice, w))?,
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyRow {
    pub node: usize,
    pub solver: bool,
    pub oracle: bool,
    /// Node lies within one cell of the solver's set boundary.
    pub near_boundary: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
    pub csv_path: Option<PathBuf>,
}

impl VerifyReport {
    pub fn sampled(&self) -> usize {
        self.rows.len()
    }

    pub fn agreeing(&self) -> usize {
        self.rows.iter().filter(|r| r.solver == r.oracle).count()
    }

    /// `(agreeing, total)` over nodes outside the boundary band.
    pub fn off_boundary(&self) -> (usize, usize) {
        let off: Vec<_> = self.rows.iter().filter(|r| !r.near_boundary).collect();
        (off.iter().filter(|r| r.solver == r.oracle).count(), off.len())
    }

    /// Off-boundary agreement as a fraction (1 when nothing is off-boundary).
    pub fn off_boundary_rate(&self) -> f64 {
        let (a, n) = self.off_boundary();
        if n == 0 {
            1.0
        } else {
            a as f64 / n as f64
        }
    }

    pub fn summary(&self) -> String {
        let n = self.sampled();
        if n == 0 {
            return "0 sampled".to_string();
        }
        let a = self.agreeing();
        let (oa, on) = self.off_boundary();
        format!(
            "{n} sampled, {a} agree ({:.2}%), off-boundary {oa}/{on} agree ({:.2}%)",
            100.0 * a as f64 / n as f64,
            100.0 * self.off_boundary_rate()
        )
    }

    fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "node,solver,oracle,agree")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.node, r.solver, r.oracle, r.solver == r.oracle)?;
        }
        Ok(())
    }
}

/// Solver labels against exhaustive enumeration on `samples` distinct
/// nodes drawn with `seed`. Viable and invariant labels are checked as
/// complements of the corresponding reach labels on the complement target.
pub fn verify_run(run: &Run<f64>, samples: usize, seed: u64, threads: Option<usize>) -> Result<Vec<VerifyRow>> {
    let solve_cfg = run.solve_config();
    let controls: usize = run.controls.iter().product();
    check_guard(controls, steps_for(run.query.horizon, run.dt))?;
    let grid = &run.grid;
    if samples > grid.len() {
        return Err(Error::usage(format!(
            "cannot sample {samples} distinct nodes from a grid of {}",
            grid.len()
        )));
    }
    let work = || -> Result<Vec<VerifyRow>> {
        let outcome = solve_with(&solve_cfg, &SolveOptions { threads: None })?;
        let query = SetQuery {
            kind: run.query.kind,
            horizon: run.query.horizon,
        };
        let mask = extract_set(&outcome.field, &query, &run.target)?;
        let band = boundary_band(grid, &mask)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes = rand::seq::index::sample(&mut rng, grid.len(), samples).into_vec();
        nodes.sort_unstable();
        let (reach_kind, negate) = match run.query.kind {
            QueryKind::MaxReach => (QueryKind::MaxReach, false),
            QueryKind::MinReach => (QueryKind::MinReach, false),
            QueryKind::Viable => (QueryKind::MinReach, true),
            QueryKind::Invariant => (QueryKind::MaxReach, true),
        };
        nodes
            .par_iter()
            .map(|&node| {
                let mut x = vec![0.0; grid.dim()];
                grid.coordinate_into(node, &mut x);
                let hit = brute_classify(
                    &run.system,
                    &solve_cfg.target,
                    &x,
                    run.query.horizon,
                    run.dt,
                    &run.controls,
                    reach_kind,
                )?;
                Ok(VerifyRow {
                    node,
                    solver: mask[node],
                    oracle: hit != negate,
                    near_boundary: band[node],
                })
            })
            .collect()
    };
    match threads {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::usage(format!("cannot start {n} workers: {e}")))?
            .install(work),
    }
}

/// Runs [`verify_run`] and writes `<output>.verify.csv`.
pub fn cmd_verify(config: &Path, samples: usize, seed: u64, threads: Option<usize>) -> Result<VerifyReport> {
    let (_, run) = load_run(config)?;
    let rows = verify_run(&run, samples, seed, threads)?;
    let csv_path = with_suffix(&run.output, ".verify.csv");
    let report = VerifyReport {
        rows,
        csv_path: Some(csv_path.clone()),
    };
    write_atomically(&csv_path, |w| report.write_csv(w))?;
    Ok(report)
}

/// Executes a parsed command, printing its report to `out`.
pub fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Solve { config } => {
            let report = cmd_solve(&config, threads)?;
            writeln!(out, "{report}")?;
        }
        Command::Query {
            field,
            state,
            horizon,
        } => {
            let report = cmd_query(&field, &state, horizon)?;
            writeln!(out, "{report}")?;
        }
        Command::Export {
            field,
            format,
            axis,
            index,
            output,
        } => {
            let path = cmd_export(&field, format, axis, index, output.as_deref())?;
            writeln!(out, "wrote {}", path.display())?;
        }
        Command::Verify {
            config,
            samples,
            seed,
        } => {
            let report = cmd_verify(&config, samples, seed, threads)?;
            if let Some(p) = &report.csv_path {
                writeln!(out, "csv {}", p.display())?;
            }
            writeln!(out, "{}", report.summary())?;
        }
    }
    Ok(())
}

/// Process entry point; returns the exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("reachkit: {e}");
            e.exit_code()
        }
    }
}
