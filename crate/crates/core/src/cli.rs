//! Command-line front end. Every subcommand writes its reports below
//! `--out-dir` and returns whether the invariants it asserts hold; the
//! binary maps that to the exit code.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimates::{ladder_check, run_ladder, verify_conservation, EstimateId, EstimateReport, Ladder, KERNEL_BOUND_CEILINGS};
use crate::fields::io::{fmt_f64, load_field, read_particles_csv, save_field, write_particles_csv};
use crate::fields::{Lattice, MeridianPoint, RelativeVorticityField};
use crate::harness::{epsilon_study_table, weak_residual, StudyConfig, WeakTestFunction, SCHEMA_VERSION};
use crate::initdata::{make_initial, regularize, BumpProfile, Composition, CutoffMode, DataFamily, MollifierSpec};
use crate::kernel::{angular_kernel, KernelConfig};
use crate::transport::{simulate, Integrator, MonitorRow, RemeshEvent, SimConfig, TrajectoryRecord};

#[derive(Debug, Parser)]
#[command(name = "axiflow", version, about = "Axisymmetric swirl-free Euler: particle runs, kernel tables and estimate audits")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomised sampling.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Directory receiving reports and run output.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the particle method from a JSON run configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample a data family, optionally regularised at scale `eps`.
    MakeData {
        #[arg(long)]
        family: String,
        /// JSON object overriding family parameters.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        /// Lattice spacing.
        #[arg(long, default_value_t = 0.05)]
        h: f64,
        /// Output file; `.csv` writes particles, anything else a grid.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print `F`, `dF_dr`, `dF_dz` for one pair of rings.
    KernelTable {
        #[arg(long)]
        r_x: f64,
        #[arg(long)]
        r_y: f64,
        #[arg(long)]
        dz: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Use adaptive quadrature instead of the elliptic closed form.
        #[arg(long)]
        quadrature: bool,
    },
    /// Run an estimate over a refinement ladder.
    Verify {
        /// Estimate id, or `all`.
        #[arg(long)]
        estimate: String,
        #[arg(long)]
        family: String,
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        p: f64,
        #[arg(long = "R")]
        radius: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 0.1)]
        base_h: f64,
        /// Allowed relative variation between the two finest levels.
        #[arg(long, default_value_t = 0.1)]
        tolerance: f64,
    },
    /// Weak-form residuals of a run written by `simulate`.
    WeakResidual {
        /// Run directory containing `manifest.json`.
        #[arg(long)]
        run: PathBuf,
        /// JSON list of test functions (default: the built-in five).
        #[arg(long)]
        tests: Option<PathBuf>,
        #[arg(long, default_value_t = 48)]
        resolution: usize,
    },
    /// Epsilon study on regularised data.
    Converge {
        #[arg(long, default_value = "near_sheet")]
        family: String,
        #[arg(long)]
        params: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1")]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.25,1,2")]
        radii: Vec<f64>,
        /// JSON study configuration; replaces the lattice and run flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        h: f64,
        /// Radial extent of the data lattice.
        #[arg(long, default_value_t = 20.0)]
        r_max: f64,
        #[arg(long, default_value_t = 0.2)]
        t_end: f64,
        #[arg(long, default_value_t = 0.02)]
        dt: f64,
        #[arg(long, default_value_t = 0.05)]
        probe_h: f64,
    },
}

/// Initial data of a run: a field file or a sampled family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    File {
        path: PathBuf,
    },
    Family {
        family: String,
        #[serde(default)]
        params: Option<serde_json::Value>,
        h: f64,
        #[serde(default)]
        eps: Option<f64>,
        /// Nodes with `|q| <= floor` are not seeded.
        #[serde(default)]
        floor: f64,
    },
}

/// The `simulate` configuration: a `SimConfig` plus the initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub initial: InitialSpec,
    #[serde(flatten)]
    pub sim: SimConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config: RunConfig,
    pub times: Vec<f64>,
    pub snapshots: Vec<String>,
    pub monitors: Vec<MonitorRow>,
    pub remesh_events: Vec<RemeshEvent>,
    /// `max_t ||q(t)||_{L^1} / ||q(0)||_{L^1} - 1`.
    pub l1_drift: f64,
}

fn family(name: &str, params: Option<&str>) -> Result<DataFamily> {
    DataFamily::with_params(name, params)
}

/// Sample `family` on its default extent with spacing `h`, regularised at
/// scale `eps` if given.
pub fn make_data(fam: &DataFamily, h: f64, eps: Option<f64>) -> Result<crate::fields::GridField> {
    let (r_max, z_min, z_max) = fam.default_extent();
    let g = make_initial(fam, &Lattice::new(r_max, z_min, z_max, h)?)?;
    match eps {
        Some(e) => regularize(&g, &MollifierSpec::standard(e)?, Composition::MollifyThenCutoff),
        None => Ok(g),
    }
}

fn initial_field(spec: &InitialSpec, base: &Path) -> Result<RelativeVorticityField> {
    match spec {
        InitialSpec::File { path } => {
            let p = if path.is_relative() { base.join(path) } else { path.clone() };
            Ok(load_field(&p)?.to_particles().into())
        }
        InitialSpec::Family { family: name, params, h, eps, floor } => {
            let params = params.as_ref().map(|v| v.to_string());
            let fam = family(name, params.as_deref())?;
            Ok(make_data(&fam, *h, *eps)?.to_particles_above(*floor).into())
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn out_path(out_dir: &Path, p: &Path) -> PathBuf {
    if p.is_relative() {
        out_dir.join(p)
    } else {
        p.to_path_buf()
    }
}

/// Run `simulate` from a configuration file into `out_dir`.
pub fn run_simulate(config: &Path, out_dir: &Path) -> Result<bool> {
    let cfg: RunConfig = serde_json::from_str(&fs::read_to_string(config)?)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let initial = initial_field(&cfg.initial, base)?;
    let record = simulate(&initial, &cfg.sim)?;
    fs::create_dir_all(out_dir)?;
    let mut names = Vec::with_capacity(record.snapshots.len());
    for (k, s) in record.snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:05}.csv");
        write_particles_csv(s, fs::File::create(out_dir.join(&name))?)?;
        names.push(name);
    }
    write_monitor_csv(&record, &out_dir.join("monitors.csv"))?;
    let conservation = verify_conservation(&record, 1.0)?;
    let drift = conservation.empirical_c - 1.0;
    let budget = if record.remesh_events.is_empty() { 1e-12 } else { 1e-6 };
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config: cfg,
        times: record.times.clone(),
        snapshots: names,
        monitors: record.monitors.clone(),
        remesh_events: record.remesh_events.clone(),
        l1_drift: drift,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    let ok = drift.abs() <= budget;
    println!("steps {} snapshots {} L1 drift {:e} (budget {:e})", record.config.steps(), record.len(), drift, budget);
    Ok(ok)
}

fn write_monitor_csv(record: &TrajectoryRecord, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["step".to_string(), "time".into(), "particles".into(), "strength".into(), "impulse".into(), "divergence_residual".into()];
    header.extend(record.config.monitor_norms.iter().map(|n| format!("norm_p{}", n.p)));
    w.write_record(&header)?;
    for m in &record.monitors {
        let mut row = vec![m.step.to_string(), fmt_f64(m.time), m.particles.to_string(), fmt_f64(m.strength), fmt_f64(m.impulse)];
        row.push(m.divergence_residual.map(fmt_f64).unwrap_or_default());
        row.extend(m.norms.iter().map(|&v| fmt_f64(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuild a trajectory from a run directory.
pub fn load_run(dir: &Path) -> Result<(Manifest, TrajectoryRecord)> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let snapshots = manifest
        .snapshots
        .iter()
        .map(|name| read_particles_csv(fs::File::open(dir.join(name))?))
        .collect::<Result<Vec<_>>>()?;
    let record = TrajectoryRecord {
        config: manifest.config.sim.clone(),
        times: manifest.times.clone(),
        snapshots,
        monitors: manifest.monitors.clone(),
        remesh_events: manifest.remesh_events.clone(),
    };
    Ok((manifest, record))
}

fn run_weak_residual(run: &Path, tests: Option<&Path>, resolution: usize, out_dir: &Path) -> Result<bool> {
    let (_, record) = load_run(run)?;
    let tests = match tests {
        Some(p) => serde_json::from_str::<Vec<WeakTestFunction>>(&fs::read_to_string(p)?)?,
        None => WeakTestFunction::builtin(record.t_end()),
    };
    let rep = weak_residual(&record, &tests, resolution)?;
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("residual.json"), &rep)?;
    let mut w = csv::Writer::from_path(out_dir.join("residual.csv"))?;
    w.write_record(["label", "residual"])?;
    for (l, r) in rep.labels.iter().zip(&rep.residuals) {
        w.write_record([l.clone(), fmt_f64(*r)])?;
        println!("{l:>8} {r:e}");
    }
    w.flush()?;
    Ok(rep.residuals.iter().all(|r| r.is_finite()))
}

/// Judge one estimate's ladder: kernel bounds against their ceilings, all
/// others by the variation between the two finest levels.
pub fn ladder_passes(reports: &[EstimateReport], tolerance: f64) -> Result<Vec<(String, bool)>> {
    let mut ids: Vec<String> = reports.iter().map(|r| r.estimate_id.clone()).collect();
    ids.dedup();
    ids.sort();
    ids.dedup();
    let mut out = Vec::new();
    for id in ids {
        let group: Vec<EstimateReport> = reports.iter().filter(|r| r.estimate_id == id).cloned().collect();
        let ok = match KERNEL_BOUND_CEILINGS.iter().find(|(k, _)| *k == id) {
            Some(&(_, ceiling)) => group.iter().all(|r| r.empirical_c <= ceiling),
            None => {
                let v = ladder_check(&group, tolerance)?;
                v.constants.iter().all(|c| c.is_finite()) && v.finest_variation < tolerance
            }
        };
        out.push((id, ok));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn run_verify(estimate: &str, fam: &DataFamily, p: f64, radius: f64, levels: usize, base_h: f64, tolerance: f64, seed: u64, out_dir: &Path) -> Result<bool> {
    let ids: Vec<EstimateId> = if estimate == "all" { EstimateId::ALL.to_vec() } else { vec![estimate.parse()?] };
    let ladder = Ladder { base_h, levels, seed, ..Ladder::default() };
    fs::create_dir_all(out_dir)?;
    let mut summary = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    summary.write_record(["estimate_id", "data_label", "level", "lhs", "rhs_norm", "empirical_C"])?;
    let mut all_ok = true;
    for id in ids {
        let reports = run_ladder(id, fam, p, radius, &ladder)?;
        for r in &reports {
            let name = format!("{}_{}_L{}.json", r.estimate_id, r.data_label, r.refinement_level);
            write_json(&out_dir.join(name), &VersionedReport { schema_version: SCHEMA_VERSION, report: r })?;
            summary.write_record([
                r.estimate_id.clone(),
                r.data_label.clone(),
                r.refinement_level.to_string(),
                fmt_f64(r.lhs),
                fmt_f64(r.rhs_norm),
                fmt_f64(r.empirical_c),
            ])?;
        }
        for (name, ok) in ladder_passes(&reports, tolerance)? {
            let cs: Vec<String> = reports.iter().filter(|r| r.estimate_id == name).map(|r| format!("{:.6}", r.empirical_c)).collect();
            println!("{} {name}: [{}]", if ok { "ok  " } else { "FAIL" }, cs.join(", "));
            all_ok &= ok;
        }
    }
    summary.flush()?;
    Ok(all_ok)
}

#[derive(Serialize)]
struct VersionedReport<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a EstimateReport,
}

/// The default study configuration used by `converge`.
pub fn default_study(fam: &DataFamily, h: f64, r_max: f64, t_end: f64, dt: f64, radii: Vec<f64>, probe_h: f64) -> Result<StudyConfig> {
    let (_, z_min, z_max) = fam.default_extent();
    let mut sim = SimConfig::new(dt, t_end, Integrator::Rk2, KernelConfig::with_delta(h));
    sim.snapshot_every = 1;
    Ok(StudyConfig {
        lattice: Lattice::new(r_max, z_min, z_max, h)?,
        sim,
        profile: BumpProfile::Standard,
        cutoff_mode: CutoffMode::Grow,
        composition: Composition::MollifyThenCutoff,
        floor: 1e-12,
        radii,
        probe_h,
    })
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        // a pool may already exist when called more than once in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out_dir = cli.out_dir.as_path();
    match &cli.command {
        Command::Simulate { config } => run_simulate(config, out_dir),
        Command::MakeData { family: name, params, eps, h, out } => {
            let fam = family(name, params.as_deref())?;
            let g = make_data(&fam, *h, *eps)?;
            let path = out_path(out_dir, out);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let field: RelativeVorticityField = if path.extension().is_some_and(|e| e == "csv") { g.to_particles_above(0.0).into() } else { g.into() };
            save_field(&field, &path)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::KernelTable { r_x, r_y, dz, delta, tol, quadrature } => {
            let cfg = KernelConfig { quad_tol: *tol, use_elliptic: !quadrature, blob_delta: *delta, ..KernelConfig::default() };
            let v = angular_kernel(&MeridianPoint::new(*r_x, *dz)?, &MeridianPoint::new(*r_y, 0.0)?, &cfg)?;
            println!("F {}", fmt_f64(v.f));
            println!("dF_dr {}", fmt_f64(v.df_dr));
            println!("dF_dz {}", fmt_f64(v.df_dz));
            Ok(v.f.is_finite() && v.df_dr.is_finite() && v.df_dz.is_finite())
        }
        Command::Verify { estimate, family: name, params, p, radius, levels, base_h, tolerance } => {
            let fam = family(name, params.as_deref())?;
            run_verify(estimate, &fam, *p, *radius, *levels, *base_h, *tolerance, cli.seed, out_dir)
        }
        Command::WeakResidual { run, tests, resolution } => run_weak_residual(run, tests.as_deref(), *resolution, out_dir),
        Command::Converge { family: name, params, eps, radii, config, h, r_max, t_end, dt, probe_h } => {
            let fam = family(name, params.as_deref())?;
            let cfg = match config {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
                None => default_study(&fam, *h, *r_max, *t_end, *dt, radii.clone(), *probe_h)?,
            };
            let rep = epsilon_study_table(&fam, eps, &cfg)?;
            fs::create_dir_all(out_dir)?;
            write_json(&out_dir.join("convergence.json"), &rep)?;
            let mut w = csv::Writer::from_path(out_dir.join("convergence.csv"))?;
            w.write_record(["R", "eps_a", "eps_b", "difference"])?;
            for (r, d) in rep.radii.iter().zip(&rep.differences) {
                for (k, v) in d.iter().enumerate() {
                    w.write_record([fmt_f64(*r), fmt_f64(rep.eps[k]), fmt_f64(rep.eps[k + 1]), fmt_f64(*v)])?;
                }
            }
            w.flush()?;
            println!("{}", rep.table());
            Ok(rep.is_cauchy())
        }
    }
}

