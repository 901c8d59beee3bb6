//! `caosim` command line: run, resume, diagnose, norms, mms.
//!
//! Exit codes: 0 success, 1 usage, 2 configuration, 3 numerical failure, 4 I/O.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use caosim::checkpoint;
use caosim::config::{parse_config, RunConfig};
use caosim::diagnostics::{blowup_monitor, h1_budget, instantaneous_budget, BudgetReport};
use caosim::interface::{drag, relative_velocity};
use caosim::mms::{run_ladder, Ladder, MmsCase};
use caosim::norms::{boundary_space_norm, maxreg_norm, triebel_lizorkin_norm, NormSpec};
use caosim::presets::{forcing, initial_state};
use caosim::stepper::{project_state, run_steps, steps_for, Forcing};
use caosim::{Error, HorizontalGrid, State, VerticalGrid};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "caosim", version, about = "Coupled atmosphere–ocean primitive equations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate a configuration; writes config.txt, budgets.csv, snapshots and checkpoint.caos.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continue a run directory from its checkpoint to a new end time.
    Resume {
        dir: PathBuf,
        #[arg(long)]
        t_end: f64,
    },
    /// Recompute ledgers from the stored snapshots and print them as CSV.
    Diagnose {
        dir: PathBuf,
        /// Exponents of the blow-up monitor.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
    },
    /// Norm table of the stored snapshot path, one row per spec `s,p,q,mu`.
    Norms {
        dir: PathBuf,
        #[arg(long = "spec", value_parser = parse_spec)]
        specs: Vec<NormSpec>,
    },
    /// Manufactured-solution convergence ladders.
    Mms {
        /// linear-ocean, linear-atmosphere, nonlinear or all.
        #[arg(long, default_value = "all")]
        case: String,
        /// vertical, horizontal, temporal-be, temporal-cn or all.
        #[arg(long, default_value = "all")]
        ladder: String,
        /// Number of error rows per ladder.
        #[arg(long, default_value_t = 3)]
        refine: usize,
    },
}

enum Failure {
    Usage(String),
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Config(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            Error::Io(_) | Error::Format(_) => Failure::Io(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

type Out<T> = Result<T, Failure>;

fn parse_spec(s: &str) -> Result<NormSpec, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != 4 {
        return Err("expected s,p,q,mu".into());
    }
    NormSpec::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn snapshot_name(step: u64) -> String {
    format!("snap_{step:08}.caos")
}

fn grids(cfg: &RunConfig) -> Out<(std::sync::Arc<HorizontalGrid>, std::sync::Arc<VerticalGrid>, std::sync::Arc<VerticalGrid>)> {
    Ok((
        HorizontalGrid::new(cfg.nx, cfg.ny).map_err(|e| Failure::Config(e.to_string()))?,
        VerticalGrid::atmosphere(cfg.nz_a, cfg.p_s).map_err(|e| Failure::Config(e.to_string()))?,
        VerticalGrid::ocean(cfg.nz_o).map_err(|e| Failure::Config(e.to_string()))?,
    ))
}

fn read_config(path: &Path) -> Out<RunConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn forcing_for(cfg: &RunConfig, s: &State) -> Forcing {
    forcing(s.va.hgrid(), s.va.vgrid(), s.vo.vgrid(), &cfg.forcing)
}

/// Atomic replace, so an interrupted write never leaves a torn checkpoint.
fn write_checkpoint(dir: &Path, state: &State, step: u64) -> Out<()> {
    let tmp = dir.join("checkpoint.caos.tmp");
    let dst = dir.join("checkpoint.caos");
    fs::write(&tmp, checkpoint::to_bytes(state, step)).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &dst).map_err(io_err(&dst))
}

/// Steps from `start` to the configured end, appending ledgers and writing a
/// snapshot plus checkpoint at the output cadence.
fn integrate(cfg: &RunConfig, dir: &Path, state: State, start: u64, csv: &mut BufWriter<File>) -> Out<State> {
    let step_cfg = cfg.step_config();
    let f = forcing_for(cfg, &state);
    let end = steps_for(cfg.t_end, cfg.dt);
    let csv_path = dir.join("budgets.csv");
    let mut pending: Option<Failure> = None;
    let result = run_steps(state, start, end, &step_cfg, &f, &mut |n, s, reports| {
        let mut emit = || -> Out<()> {
            for r in reports {
                writeln!(csv, "{}", r.csv_row()).map_err(io_err(&csv_path))?;
            }
            if n % cfg.output_every == 0 || n == end {
                csv.flush().map_err(io_err(&csv_path))?;
                let p = dir.join(snapshot_name(n));
                checkpoint::save(&p, s, n).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
                write_checkpoint(dir, s, n)?;
            }
            Ok(())
        };
        emit().map_err(|e| {
            let msg = e.message().to_string();
            pending = Some(e);
            Error::Parameter(msg)
        })
    });
    csv.flush().map_err(io_err(&csv_path))?;
    match (result, pending) {
        (_, Some(f)) => Err(f),
        (Ok(s), None) => Ok(s),
        (Err(e), None) => Err(e.into()),
    }
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Out<()> {
    let mut cfg = read_config(config)?;
    if let Some(o) = out {
        cfg.out_dir = o.to_string_lossy().into_owned();
    }
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let cfg_path = dir.join("config.txt");
    fs::write(&cfg_path, cfg.emit()).map_err(io_err(&cfg_path))?;

    let (h, a, o) = grids(&cfg)?;
    let s0 = project_state(&initial_state(&h, &a, &o, &cfg.init));
    let p0 = dir.join(snapshot_name(0));
    checkpoint::save(&p0, &s0, 0).map_err(|e| Failure::Io(format!("{}: {e}", p0.display())))?;
    write_checkpoint(&dir, &s0, 0)?;

    let csv_path = dir.join("budgets.csv");
    let mut csv = BufWriter::new(File::create(&csv_path).map_err(io_err(&csv_path))?);
    writeln!(csv, "{}", BudgetReport::CSV_HEADER).map_err(io_err(&csv_path))?;
    let end = integrate(&cfg, &dir, s0, 0, &mut csv)?;
    eprintln!("t = {:.6}, E = {:.6e}, output in {}", end.t, end.energy(), dir.display());
    Ok(())
}

/// Budgets written after the checkpoint are dropped, so a resumed ledger
/// matches the uninterrupted one row for row.
fn truncate_budgets(path: &Path, t_max: f64) -> Out<()> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut keep = String::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let t = line.split(',').next().and_then(|x| x.parse::<f64>().ok());
        if i == 0 || t.is_some_and(|t| t <= t_max) {
            keep.push_str(&line);
            keep.push('\n');
        }
    }
    fs::write(path, keep).map_err(io_err(path))
}

fn cmd_resume(dir: &Path, t_end: f64) -> Out<()> {
    let cfg_path = dir.join("config.txt");
    let mut cfg = read_config(&cfg_path)?;
    cfg.out_dir = dir.to_string_lossy().into_owned();
    let cp_path = dir.join("checkpoint.caos");
    let cp = checkpoint::load(&cp_path).map_err(|e| Failure::from(e).with_path(&cp_path))?;
    if !(t_end.is_finite() && t_end >= cp.state.t) {
        return Err(Failure::Usage(format!("--t-end {t_end} precedes the checkpoint time {}", cp.state.t)));
    }
    cfg.t_end = t_end;
    fs::write(&cfg_path, cfg.emit()).map_err(io_err(&cfg_path))?;
    let csv_path = dir.join("budgets.csv");
    truncate_budgets(&csv_path, cp.state.t)?;
    let file = fs::OpenOptions::new().append(true).open(&csv_path).map_err(io_err(&csv_path))?;
    let mut csv = BufWriter::new(file);
    let end = integrate(&cfg, dir, cp.state, cp.step, &mut csv)?;
    eprintln!("t = {:.6}, E = {:.6e}", end.t, end.energy());
    Ok(())
}

impl Failure {
    fn with_path(self, p: &Path) -> Self {
        match self {
            Failure::Io(m) => Failure::Io(format!("{}: {m}", p.display())),
            other => other,
        }
    }
}

fn load_snapshots(dir: &Path) -> Out<Vec<(u64, State)>> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("snap_") && n.ends_with(".caos"))
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Failure::Io(format!("{}: no snapshots", dir.display())));
    }
    names
        .iter()
        .map(|p| {
            let cp = checkpoint::load(p).map_err(|e| Failure::from(e).with_path(p))?;
            Ok((cp.step, cp.state))
        })
        .collect()
}

fn cmd_diagnose(dir: &Path, p: f64, q: f64) -> Out<()> {
    let cfg = read_config(&dir.join("config.txt"))?;
    let snaps = load_snapshots(dir)?;
    let states: Vec<State> = snaps.iter().map(|(_, s)| s.clone()).collect();
    let f = forcing_for(&cfg, &states[0]);
    let monitor = blowup_monitor(&states, p, q)?;
    let h1 = h1_budget(&states);
    let mut out = std::io::stdout().lock();
    let w = |e: std::io::Error| Failure::Io(format!("stdout: {e}"));
    writeln!(out, "step,{},constraint,sup_H1sq,lap_integral,monitor", BudgetReport::CSV_HEADER).map_err(w)?;
    for (i, (n, s)) in snaps.iter().enumerate() {
        let r = instantaneous_budget(s, cfg.lambda, Some((&f.fa, &f.fo)))?;
        writeln!(
            out,
            "{n},{},{:e},{:e},{:e},{:e}",
            r.csv_row(),
            r.constraint,
            h1.sup_h1_squared[i],
            h1.lap_integral[i],
            monitor.running_a[i] + monitor.running_o[i]
        )
        .map_err(w)?;
    }
    Ok(())
}

fn cmd_norms(dir: &Path, specs: Vec<NormSpec>) -> Out<()> {
    let snaps = load_snapshots(dir)?;
    let path: Vec<&State> = snaps.iter().map(|(_, s)| s).filter(|s| s.t > 0.0).collect();
    if path.len() < 3 {
        return Err(Failure::Numerical("need at least three snapshots after t = 0".into()));
    }
    let dt = path[0].t;
    if path.iter().enumerate().any(|(i, s)| (s.t - (i + 1) as f64 * dt).abs() > 1e-9 * (1.0 + s.t)) {
        return Err(Failure::Numerical("snapshot times are not uniformly spaced".into()));
    }
    let drag_path = path
        .iter()
        .map(|s| relative_velocity(s).map(|v| drag(&v)))
        .collect::<Result<Vec<_>, _>>()?;
    let va: Vec<_> = path.iter().map(|s| s.va.clone()).collect();
    let vo: Vec<_> = path.iter().map(|s| s.vo.clone()).collect();
    let specs = if specs.is_empty() {
        vec![NormSpec::boundary(2.0, 2.0, 1.0)?, NormSpec::boundary(4.0, 2.0, 1.0)?]
    } else {
        specs
    };
    println!("{:>8} {:>6} {:>6} {:>6} {:>14} {:>14} {:>14} {:>14}", "s", "p", "q", "mu", "F(drag)", "B-part", "E1(v_a)", "E1(v_o)");
    for sp in specs {
        let tl = triebel_lizorkin_norm(&drag_path, dt, &sp)?;
        let bp = boundary_space_norm(&drag_path, dt, sp.p, sp.q, sp.mu)
            .map(|(_, b)| format!("{b:14.6e}"))
            .unwrap_or_else(|_| format!("{:>14}", "-"));
        let ea = maxreg_norm(&va, dt, sp.p, sp.q, sp.mu)?;
        let eo = maxreg_norm(&vo, dt, sp.p, sp.q, sp.mu)?;
        println!("{:>8.4} {:>6} {:>6} {:>6} {tl:14.6e} {bp} {ea:14.6e} {eo:14.6e}", sp.s, sp.p, sp.q, sp.mu);
    }
    Ok(())
}

fn cmd_mms(case: &str, ladder: &str, refine: usize) -> Out<()> {
    let cases: Vec<MmsCase> = if case == "all" {
        MmsCase::ALL.to_vec()
    } else {
        vec![MmsCase::parse(case).ok_or_else(|| Failure::Usage(format!("unknown case {case}")))?]
    };
    let ladders: Vec<Ladder> = if ladder == "all" {
        Ladder::ALL.to_vec()
    } else {
        vec![Ladder::ALL
            .into_iter()
            .find(|l| l.name() == ladder)
            .ok_or_else(|| Failure::Usage(format!("unknown ladder {ladder}")))?]
    };
    if refine == 0 {
        return Err(Failure::Usage("--refine must be at least 1".into()));
    }
    for c in cases {
        for l in &ladders {
            let r = run_ladder(c, *l, refine)?;
            println!("{} / {}", c.name(), l.name());
            println!("  {:>10} {:>14} {:>8} {:>7}", l.unit(), "error", "ratio", "order");
            for row in &r.rows {
                let ratio = row.ratio.map_or("-".to_string(), |x| format!("{x:.3}"));
                let order = row.order.map_or("-".to_string(), |x| format!("{x:.3}"));
                println!("  {:>10} {:>14.6e} {ratio:>8} {order:>7}", row.resolution, row.error);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Run { config, out } => cmd_run(&config, out),
        Cmd::Resume { dir, t_end } => cmd_resume(&dir, t_end),
        Cmd::Diagnose { dir, p, q } => cmd_diagnose(&dir, p, q),
        Cmd::Norms { dir, specs } => cmd_norms(&dir, specs),
        Cmd::Mms { case, ladder, refine } => cmd_mms(&case, &ladder, refine),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
