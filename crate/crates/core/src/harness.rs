//! Configuration, run orchestration, persistence and the command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::besov::{self, ConstantRow, DyadicPartition};
use crate::dynamics::{self, EnergyRow, SimConfig, Simulation, SystemState};
use crate::error::{Error, Result};
use crate::measures;
use crate::stochastic::{self, BtildeEstimate, ComponentPattern};
use crate::torus::RealField;

pub fn parse_config_str(text: &str) -> Result<SimConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: SimConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            field: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        field: "<file>".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config_str(&text)
}

/// Sorted-key JSON of the full configuration.
pub fn canonical_json(cfg: &SimConfig) -> String {
    let v: Value = serde_json::to_value(cfg).expect("config serializes");
    serde_json::to_string(&v).expect("value serializes")
}

/// Hex SHA-256 of the canonical configuration bytes.
pub fn config_hash(cfg: &SimConfig) -> String {
    let digest = Sha256::digest(canonical_json(cfg).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub config: SimConfig,
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub start_unix: u64,
    pub end_unix: u64,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Time series with a fixed schema; every row is tagged with the config hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub hash: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RunRecord {
    pub fn new(hash: &str, columns: &[&str]) -> Self {
        RunRecord {
            hash: hash.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::ShapeMismatch(format!(
                "row has {} values, schema has {}",
                row.len(),
                self.columns.len()
            )));
        }
        if let (Some(last), Some(t)) = (self.rows.last(), row.first()) {
            if *t < last[0] {
                return Err(Error::param("t", "rows must have nondecreasing t"));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("config_hash,");
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&self.hash);
            for v in r {
                s.push_str(&format!(",{v:.17e}"));
            }
            s.push('\n');
        }
        s
    }
}

pub const CHECKPOINT_MAGIC: &str = "SIGMA-LATTICE-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn encode(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{:016x}", v.to_bits()))
        .collect()
}

fn decode(s: &str) -> Result<Vec<f64>> {
    if s.len() % 16 != 0 {
        return Err(Error::Checkpoint(
            "field payload length not a multiple of 16".into(),
        ));
    }
    (0..s.len() / 16)
        .map(|i| {
            u64::from_str_radix(&s[16 * i..16 * i + 16], 16)
                .map(f64::from_bits)
                .map_err(|e| Error::Checkpoint(format!("bad hex payload: {e}")))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    magic: String,
    version: u32,
    config_hash: String,
    step: u64,
    t_bits: String,
    level: i32,
    btilde: [String; 2],
    btilde_samples: usize,
    phi: Vec<String>,
    z: Vec<String>,
    s: Vec<String>,
    x: Option<Vec<String>>,
    records: Vec<RecordFile>,
}

#[derive(Serialize, Deserialize)]
struct RecordFile {
    hash: String,
    columns: Vec<String>,
    rows: Vec<String>,
}

/// Everything needed to continue a run bit-identically.
pub struct Checkpoint {
    pub config_hash: String,
    pub state: SystemState,
    pub level: i32,
    pub btilde: BtildeEstimate,
    pub records: Vec<RunRecord>,
}

pub fn save_checkpoint(
    path: &Path,
    sim: &Simulation,
    hash: &str,
    records: &[RunRecord],
) -> Result<()> {
    let enc = |f: &[RealField]| f.iter().map(|x| encode(x.values())).collect::<Vec<_>>();
    let file = CheckpointFile {
        magic: CHECKPOINT_MAGIC.into(),
        version: CHECKPOINT_VERSION,
        config_hash: hash.into(),
        step: sim.state.step,
        t_bits: encode(&[sim.state.t]),
        level: sim.ctx.level,
        btilde: [encode(&[sim.btilde.value]), encode(&[sim.btilde.stderr])],
        btilde_samples: sim.btilde.samples,
        phi: enc(&sim.state.phi),
        z: enc(&sim.state.z),
        s: enc(&sim.state.s),
        x: sim.state.x.as_deref().map(enc),
        records: records
            .iter()
            .map(|r| RecordFile {
                hash: r.hash.clone(),
                columns: r.columns.clone(),
                rows: r.rows.iter().map(|row| encode(row)).collect(),
            })
            .collect(),
    };
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_string(&file)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, cfg: &SimConfig) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
    if file.magic != CHECKPOINT_MAGIC || file.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(
            "not a checkpoint of this format version".into(),
        ));
    }
    let hash = config_hash(cfg);
    if file.config_hash != hash {
        return Err(Error::Checkpoint(format!(
            "config hash mismatch: checkpoint {}, config {hash}",
            file.config_hash
        )));
    }
    let grid = cfg.grid()?;
    let dec = |v: &[String]| -> Result<Vec<RealField>> {
        v.iter()
            .map(|s| RealField::new(&grid, decode(s)?))
            .collect()
    };
    let one = |s: &str| -> Result<f64> {
        decode(s)?
            .first()
            .copied()
            .ok_or_else(|| Error::Checkpoint("empty scalar".into()))
    };
    let state = SystemState {
        step: file.step,
        t: one(&file.t_bits)?,
        phi: dec(&file.phi)?,
        z: dec(&file.z)?,
        s: dec(&file.s)?,
        x: file.x.as_deref().map(dec).transpose()?,
    };
    if state.phi.len() != cfg.n {
        return Err(Error::Checkpoint(
            "component count differs from config".into(),
        ));
    }
    Ok(Checkpoint {
        config_hash: hash,
        state,
        level: file.level,
        btilde: BtildeEstimate {
            value: one(&file.btilde[0])?,
            stderr: one(&file.btilde[1])?,
            samples: file.btilde_samples,
        },
        records: file
            .records
            .into_iter()
            .map(|r| {
                Ok(RunRecord {
                    hash: r.hash,
                    columns: r.columns,
                    rows: r.rows.iter().map(|row| decode(row)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?,
    })
}

/// Cap the global worker pool from `SIGMA_N_THREADS`.
pub fn init_thread_pool() {
    if let Some(n) = std::env::var("SIGMA_N_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "sigma",
    version,
    about = "Spectral lattice simulator for the stochastic O(N) sigma model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the configured seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Coupled (Φ, Z) run with per-stride diagnostics
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint written by an earlier run
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many total steps, leaving a checkpoint
        #[arg(long)]
        max_steps: Option<u64>,
    },
    /// Q statistics of the tree objects
    Trees {
        #[command(flatten)]
        common: Common,
        /// Number of snapshots entering the time integrals
        #[arg(long, default_value_t = 200)]
        snapshots: usize,
    },
    /// Rate study over a list of N
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Energy bookkeeping of the remainder equation
    EnergyAudit {
        #[command(flatten)]
        common: Common,
    },
    /// Measured constants of the operator inequalities
    BesovSelftest {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
        sizes: Vec<usize>,
    },
    /// Grid and partition summary
    GridInfo {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<SimConfig> {
    let path = common.config.as_ref().ok_or_else(|| Error::Config {
        field: "--config".into(),
        message: "a configuration file is required".into(),
    })?;
    let mut cfg = parse_config(path)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_out(dir: &Path, name: &str, body: &str, outputs: &mut Vec<String>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, body)?;
    outputs.push(path.display().to_string());
    Ok(())
}

fn finish(
    dir: &Path,
    command: &str,
    cfg: &SimConfig,
    start: u64,
    mut outputs: Vec<String>,
) -> Result<()> {
    let man = ExperimentManifest {
        command: command.into(),
        config: cfg.clone(),
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        code_version: env!("CARGO_PKG_VERSION").into(),
        start_unix: start,
        end_unix: unix_now(),
        outputs: outputs.clone(),
        warnings: cfg.warnings(),
    };
    let body = serde_json::to_string_pretty(&man)?;
    write_out(dir, "manifest.json", &body, &mut outputs)
}

pub const SIMULATE_COLUMNS: [&str; 6] = [
    "t",
    "step",
    "coupling_gap",
    "phi_L2_mean",
    "obs_mean",
    "obs_besov",
];

/// Outcome of [`run_simulate`]: the records and whether the run completed.
pub struct SimulateOutcome {
    pub records: Vec<RunRecord>,
    pub completed: bool,
}

/// Drive a coupled run, optionally from a checkpoint and optionally halting early.
pub fn run_simulate(
    cfg: &SimConfig,
    out: &Path,
    resume: Option<&Path>,
    max_steps: Option<u64>,
) -> Result<SimulateOutcome> {
    let hash = config_hash(cfg);
    let track_x = cfg.energy_audit_every > 0;
    let (mut sim, mut records) = match resume {
        Some(p) => {
            let ck = load_checkpoint(p, cfg)?;
            (
                Simulation::from_state(cfg, ck.state, ck.level, ck.btilde, track_x)?,
                ck.records,
            )
        }
        None => (
            Simulation::new(cfg, track_x)?,
            vec![
                RunRecord::new(&hash, &SIMULATE_COLUMNS),
                RunRecord::new(&hash, &EnergyRow::COLUMNS),
            ],
        ),
    };
    let part = sim.ctx.partition.clone();
    let burn = cfg.burn_steps();
    let ckpt_path = out.join("checkpoint.json");
    if cfg.checkpoint_every > 0 || max_steps.is_some() {
        fs::create_dir_all(out)?;
    }
    while !sim.done() {
        if let Some(limit) = max_steps {
            if sim.state.step >= limit {
                save_checkpoint(&ckpt_path, &sim, &hash, &records)?;
                return Ok(SimulateOutcome {
                    records,
                    completed: false,
                });
            }
        }
        let step = sim.state.step;
        let audit = track_x && step >= burn && (step - burn) % cfg.energy_audit_every as u64 == 0;
        if step == burn && sim.state.x.is_none() {
            sim.enter_sampling()?;
        }
        if audit {
            let row = sim.step_audited()?;
            records[1].push(row.values().to_vec())?;
        } else {
            sim.step()?;
        }
        let s = sim.state.step;
        if s > burn && (s - burn) % cfg.sample_every as u64 == 0 {
            let o = measures::observable_field(&sim.state.phi, sim.ctx.a)?;
            let phi_l2 = sim
                .state
                .phi
                .iter()
                .map(|f| crate::torus::inner(f, f).unwrap())
                .sum::<f64>()
                / cfg.n as f64;
            records[0].push(vec![
                sim.state.t,
                s as f64,
                dynamics::coupling_gap(&sim.state),
                phi_l2,
                o.mean(),
                measures::observable_besov(&o, cfg.kappa, &part)?,
            ])?;
        }
        if cfg.checkpoint_every > 0 && s % cfg.checkpoint_every as u64 == 0 {
            save_checkpoint(&ckpt_path, &sim, &hash, &records)?;
        }
    }
    Ok(SimulateOutcome {
        records,
        completed: true,
    })
}

fn cmd_simulate(common: &Common, resume: Option<&Path>, max_steps: Option<u64>) -> Result<()> {
    let start = unix_now();
    let cfg = load(common)?;
    let outcome = run_simulate(&cfg, &common.out, resume, max_steps)?;
    let mut outputs = Vec::new();
    if !outcome.completed {
        outputs.push(common.out.join("checkpoint.json").display().to_string());
        return finish(&common.out, "simulate", &cfg, start, outputs);
    }
    write_out(
        &common.out,
        "simulate.csv",
        &outcome.records[0].to_csv(),
        &mut outputs,
    )?;
    if cfg.energy_audit_every > 0 {
        write_out(
            &common.out,
            "energy.csv",
            &outcome.records[1].to_csv(),
            &mut outputs,
        )?;
    }
    finish(&common.out, "simulate", &cfg, start, outputs)
}

fn cmd_trees(common: &Common, snapshots: usize) -> Result<()> {
    let start = unix_now();
    let cfg = load(common)?;
    let grid = cfg.grid()?;
    let bt = dynamics::btilde_for(&cfg, &grid)?;
    let stride = cfg.sample_every;
    let q = stochastic::q_stats_run(
        &grid,
        cfg.n,
        cfg.m,
        cfg.dt,
        cfg.kappa,
        bt.value,
        cfg.seed,
        snapshots,
        stride,
        ComponentPattern::Independent,
    )?;
    let body = serde_json::to_string_pretty(&json!({
        "config_hash": config_hash(&cfg),
        "N": cfg.n,
        "a_lat": stochastic::wick_a(&grid, cfg.m)?,
        "btilde": bt.value,
        "btilde_stderr": bt.stderr,
        "Q0": q.q0,
        "Q1": q.q1,
        "Q2": q.q2,
    }))?;
    let mut outputs = Vec::new();
    write_out(&common.out, "trees.json", &body, &mut outputs)?;
    finish(&common.out, "trees", &cfg, start, outputs)
}

fn cmd_convergence(common: &Common, n_list: &[usize], samples: usize) -> Result<()> {
    let start = unix_now();
    let cfg = load(common)?;
    let summary = measures::convergence_study(&cfg, n_list, samples)?;
    let hash = config_hash(&cfg);
    let mut csv = format!("config_hash,{}\n", measures::ConvergenceRow::CSV_HEADER);
    for r in &summary.rows {
        csv.push_str(&format!("{hash},{}\n", r.csv_line()));
    }
    let mut outputs = Vec::new();
    write_out(&common.out, "convergence.csv", &csv, &mut outputs)?;
    let mut v = serde_json::to_value(&summary)?;
    v["config_hash"] = json!(hash);
    write_out(
        &common.out,
        "convergence.json",
        &serde_json::to_string_pretty(&v)?,
        &mut outputs,
    )?;
    finish(&common.out, "convergence", &cfg, start, outputs)
}

fn cmd_energy(common: &Common) -> Result<()> {
    let start = unix_now();
    let cfg = load(common)?;
    let every = cfg.energy_audit_every.max(1) as u64;
    let mut sim = Simulation::new(&cfg, true)?;
    sim.burn_in()?;
    let hash = config_hash(&cfg);
    let mut rec = RunRecord::new(&hash, &EnergyRow::COLUMNS);
    let (mut max_a, mut max_gap) = (0.0f64, 0.0f64);
    while !sim.done() {
        if (sim.state.step - cfg.burn_steps()) % every == 0 {
            let row = sim.step_audited()?;
            max_a = max_a.max(row.residual_a);
            max_gap = max_gap.max((row.residual_b - row.residual_a).abs());
            rec.push(row.values().to_vec())?;
        } else {
            sim.step()?;
        }
    }
    let mut outputs = Vec::new();
    write_out(&common.out, "energy.csv", &rec.to_csv(), &mut outputs)?;
    let body = serde_json::to_string_pretty(&json!({
        "config_hash": hash,
        "level": sim.ctx.level,
        "contraction_factor": sim.contraction,
        "max_residual_a": max_a,
        "max_abs_residual_b_minus_a": max_gap,
    }))?;
    write_out(&common.out, "energy.json", &body, &mut outputs)?;
    finish(&common.out, "energy-audit", &cfg, start, outputs)
}

fn cmd_selftest(out: &Path, samples: usize, seed: u64, sizes: &[usize]) -> Result<()> {
    let mut csv = format!("{}\n", ConstantRow::CSV_HEADER);
    for &m in sizes {
        for row in besov::measure_operator_constants(m, samples, seed)? {
            csv.push_str(&row.csv_line());
            csv.push('\n');
        }
    }
    let mut outputs = Vec::new();
    write_out(out, "constants.csv", &csv, &mut outputs)?;
    Ok(())
}

fn cmd_grid_info(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let grid = cfg.grid()?;
    let part = DyadicPartition::new(&grid);
    let body = serde_json::to_string_pretty(&json!({
        "d": grid.dim(),
        "M": grid.points(),
        "side": grid.side(),
        "spacing": grid.spacing(),
        "sites": grid.n_sites(),
        "k_max": grid.k_max2().sqrt(),
        "j_max": part.j_max(),
        "blocks": part.n_blocks(),
        "a_lat": stochastic::wick_a(&grid, cfg.m)?,
        "config_hash": config_hash(&cfg),
    }))?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{body}")?;
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate {
            common,
            resume,
            max_steps,
        } => cmd_simulate(common, resume.as_deref(), *max_steps),
        Command::Trees { common, snapshots } => cmd_trees(common, *snapshots),
        Command::Convergence {
            common,
            n_list,
            samples,
        } => cmd_convergence(common, n_list, *samples),
        Command::EnergyAudit { common } => cmd_energy(common),
        Command::BesovSelftest {
            out,
            samples,
            seed,
            sizes,
        } => cmd_selftest(out, *samples, *seed, sizes),
        Command::GridInfo { common } => cmd_grid_info(common),
    }
}

/// Parse `argv`, run, and map the outcome to an exit code: 0 on success,
/// 2 on usage errors, 1 with an error JSON on stderr otherwise.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    init_thread_pool();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let body = json!({"error": e.kind(), "message": e.to_string()});
            eprintln!("{body}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg =
            parse_config_str(r#"{"d":1,"M":16,"N":8,"m":5,"lambda":1,"dt":0.01,"T_sample":50}"#)
                .unwrap();
        assert_eq!(cfg.kappa, 0.1);
        assert_eq!(cfg.c_l, 1.0);
        assert_eq!(cfg.seed, 0);
        assert!((cfg.side - 2.0 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn bad_fields_are_named() {
        let e =
            parse_config_str(r#"{"d":1,"M":12,"N":8,"m":5,"lambda":1,"dt":0.01,"T_sample":50}"#)
                .unwrap_err();
        assert!(
            matches!(e, Error::Config { ref field, .. } if field == "M"),
            "{e}"
        );
        let e = parse_config_str(
            r#"{"d":1,"M":16,"N":8,"m":5,"lambda":1,"dt":0.01,"T_sample":50,"zz":1}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("zz"));
        let e =
            parse_config_str(r#"{"d":1,"M":16,"N":"x","m":5,"lambda":1,"dt":0.01,"T_sample":50}"#)
                .unwrap_err();
        assert!(
            matches!(e, Error::Config { ref field, .. } if field == "N"),
            "{e}"
        );
    }

    #[test]
    fn canonical_round_trip_keeps_hash() {
        let cfg =
            parse_config_str(r#"{"T_sample":50,"d":1,"M":16,"N":8,"m":5,"lambda":1,"dt":0.01}"#)
                .unwrap();
        let again = parse_config_str(&canonical_json(&cfg)).unwrap();
        assert_eq!(config_hash(&cfg), config_hash(&again));
        assert_eq!(cfg, again);
    }

    #[test]
    fn hex_codec_is_exact() {
        let v = vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300];
        let back = decode(&encode(&v)).unwrap();
        assert!(v.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run_command(["sigma", "grid-info", "--bogus"]), 2);
        assert_eq!(run_command(["sigma", "frobnicate"]), 2);
    }
}
