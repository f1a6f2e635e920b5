use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use cgdiam::conjfill::{full_diameter_word, FillConfig};
use cgdiam::group::{Family, GenSet, GroupSpec};
use cgdiam::harness::{
    bfs_diameter, run_experiment, sweep, sweep_csv, verify_certificate, Certificate, ExperimentConfig,
    ExtensionCertificate, Status, DIAMETER_CAP,
};
use cgdiam::primeselect::{prime_rows_csv, verify_prime_lemma};
use cgdiam::reduction::{small_degree_element, PipelineConfig};
use cgdiam::spectrum::{spectrum_report, DEFAULT_KAPPA_MIX};
use cgdiam::transversal::{Embedding, ExtendConfig, Extender, Mode, Strategy};
use cgdiam::{Error, Field, Mat};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "cgdiam", version, about = "Word certificates and diameter experiments for classical groups over finite fields")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct GroupArgs {
    /// group-spec JSON
    #[arg(long)]
    group: PathBuf,
    /// genset JSON: explicit matrices or a preset; defaults to the group file's
    /// "genset" entry, then to the standard generators
    #[arg(long)]
    gens: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Prime-bundle tables
    Primes {
        #[command(subcommand)]
        cmd: PrimesCmd,
    },
    /// Word for an element extending a subspace embedding
    Extend {
        #[command(flatten)]
        g: GroupArgs,
        /// JSON with "domain" and "images" vector lists
        #[arg(long)]
        embedding: PathBuf,
        /// extend an isometry of totally singular subspaces
        #[arg(long)]
        singular: bool,
        #[arg(long, default_value = "auto")]
        strategy: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Degree-reduction pipeline
    Reduce {
        #[command(flatten)]
        g: GroupArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certificate for a target as a product of conjugates of a small-degree element
    Fill {
        #[command(flatten)]
        g: GroupArgs,
        /// target matrix JSON
        #[arg(long)]
        target: PathBuf,
        /// pipeline report supplying the element; runs the pipeline when absent
        #[arg(long)]
        element: Option<PathBuf>,
        #[arg(long, default_value_t = 8.0)]
        kappa: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cayley-graph spectrum, gap bound and lazy-walk mixing time
    Spectrum {
        #[command(flatten)]
        g: GroupArgs,
        #[arg(long, default_value_t = 500)]
        walk_kmax: usize,
        #[arg(long, default_value_t = DEFAULT_KAPPA_MIX)]
        kappa_mix: f64,
    },
    /// Exact diameter by breadth-first search
    Diameter {
        #[command(flatten)]
        g: GroupArgs,
        #[arg(long, default_value_t = DIAMETER_CAP)]
        cap: usize,
    },
    /// Replay and re-check a certificate
    Verify {
        #[command(flatten)]
        g: GroupArgs,
        #[arg(long)]
        cert: PathBuf,
    },
    /// Pipeline runs over a range of n, as CSV
    Sweep {
        /// SL, Sp, SU or Omega
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, default_value_t = 1)]
        e: u32,
        /// inclusive range lo..hi
        #[arg(long)]
        n: String,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Experiment from a config file (reduce, fill, spectrum)
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PrimesCmd {
    /// Sigma <= p_r^2 for every prefix of the coprime primes
    Verify {
        #[arg(long)]
        p0: u64,
        #[arg(long)]
        q0: u64,
        #[arg(long, default_value_t = 10_000)]
        max: u64,
        #[arg(long, default_value_t = f64::INFINITY)]
        c2: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_typed<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load(g: &GroupArgs) -> anyhow::Result<(GroupSpec, GenSet)> {
    let raw = read_json(&g.group)?;
    let group = GroupSpec::from_json(&raw)?;
    let gens = match &g.gens {
        Some(p) => read_json(p)?,
        None => raw.get("genset").cloned().unwrap_or_else(|| serde_json::json!({ "preset": "standard" })),
    };
    let gs = GenSet::from_json(&gens, &group)?;
    Ok((group, gs))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn emit_json(out: Option<&Path>, v: &impl serde::Serialize) -> anyhow::Result<()> {
    emit(out, &serde_json::to_string_pretty(v)?)
}

fn parse_enum<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> anyhow::Result<T> {
    serde_json::from_value(Value::String(s.into())).with_context(|| format!("unknown {what} {s:?}"))
}

fn status(green: bool, fallback: bool) -> Status {
    match (green, fallback) {
        (false, _) => Status::Failed,
        (true, true) => Status::Fallback,
        (true, false) => Status::Green,
    }
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    match cli.cmd {
        Cmd::Primes { cmd: PrimesCmd::Verify { p0, q0, max, c2, csv } } => {
            let rows = verify_prime_lemma(p0, q0, max, c2)?;
            let violations = rows.iter().filter(|r| !r.sigma_le_pr2).count();
            let table = prime_rows_csv(&rows);
            match csv {
                Some(p) => std::fs::write(&p, &table)?,
                None => emit(None, table.trim_end())?,
            }
            let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
            eprintln!("{} prefixes, {violations} violations, max p_r^2/(ln M)^3 = {worst:.4}", rows.len());
            Ok(status(violations == 0, false))
        }
        Cmd::Extend { g, embedding, singular, strategy, out } => {
            let (group, gs) = load(&g)?;
            let mode = if singular { Mode::Singular } else { Mode::Linear };
            let strategy: Strategy = parse_enum("strategy", &strategy)?;
            let x = Embedding::from_json(group.space(), &read_json(&embedding)?)?;
            let mut ext = Extender::new(&group, &gs, ExtendConfig { strategy, ..Default::default() });
            let e = ext.extend(&x, mode)?;
            let cert = Certificate::Extension(ExtensionCertificate {
                embedding: x.to_json(group.space()),
                mode,
                length: e.length.to_string(),
                bound: e.bound.to_string(),
                program: e.program,
            });
            let t = verify_certificate(&cert, &group, &gs)?;
            emit_json(out.as_deref(), &cert)?;
            Ok(status(t.passed, false))
        }
        Cmd::Reduce { g, config, out } => {
            let (group, gs) = load(&g)?;
            let cfg: PipelineConfig = match config {
                Some(p) => read_typed(&p)?,
                None => PipelineConfig::default(),
            };
            let r = small_degree_element(&group, &gs, &cfg)?;
            let cert = Certificate::Pipeline(r);
            let t = verify_certificate(&cert, &group, &gs)?;
            let Certificate::Pipeline(r) = &cert else { unreachable!() };
            for c in r.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAILED {}: {}", c.name, c.detail);
            }
            emit_json(out.as_deref(), &cert)?;
            Ok(status(t.passed && r.all_green(), r.fallback.is_some()))
        }
        Cmd::Fill { g, target, element, kappa, out } => {
            let (group, gs) = load(&g)?;
            let target = Mat::from_json(group.field(), &read_json(&target)?)?;
            let report = match element {
                Some(p) => match read_typed::<Certificate>(&p)? {
                    Certificate::Pipeline(r) => r,
                    _ => bail!("--element must be a pipeline report"),
                },
                None => small_degree_element(&group, &gs, &PipelineConfig::default())?,
            };
            let a = Mat::from_json(group.field(), &report.final_matrix)?;
            let cfg = FillConfig { kappa, ..Default::default() };
            let c = full_diameter_word(&gs, &a, &report.program, &target, &cfg)?;
            let within = c.within_bound;
            let cert = Certificate::Fill(c);
            let t = verify_certificate(&cert, &group, &gs)?;
            emit_json(out.as_deref(), &cert)?;
            Ok(status(t.passed && within, report.fallback.is_some()))
        }
        Cmd::Spectrum { g, walk_kmax, kappa_mix } => {
            let (_, gs) = load(&g)?;
            let r = spectrum_report(&gs, walk_kmax, kappa_mix)?;
            emit_json(None, &r)?;
            Ok(status(r.gap_bound_holds && r.empirical_mixing.is_some(), false))
        }
        Cmd::Diameter { g, cap } => {
            let (group, gs) = load(&g)?;
            emit_json(None, &bfs_diameter(Some(&group), &gs, cap)?)?;
            Ok(Status::Green)
        }
        Cmd::Verify { g, cert } => {
            let (group, gs) = load(&g)?;
            let cert: Certificate = read_typed(&cert)?;
            let t = verify_certificate(&cert, &group, &gs)?;
            emit_json(None, &t)?;
            if let Some(f) = &t.first_failure {
                eprintln!("verification failed at {f}");
            }
            Ok(status(t.passed, false))
        }
        Cmd::Sweep { family, p, e, n, step, config, out } => {
            let family: Family = parse_enum("family", &family)?;
            let field = Field::new(p, e, None)?;
            let (lo, hi) = n.split_once("..").context("--n takes lo..hi")?;
            let ns: Vec<usize> = (lo.trim().parse::<usize>()?..=hi.trim().parse::<usize>()?).step_by(step.max(1)).collect();
            let cfg: PipelineConfig = match config {
                Some(p) => read_typed(&p)?,
                None => PipelineConfig::default(),
            };
            let rows = sweep(family, &ns, &field, &cfg);
            emit(out.as_deref(), &sweep_csv(&rows))?;
            let green = rows.iter().all(|r| r.green || r.fallback);
            Ok(status(green, rows.iter().any(|r| r.fallback)))
        }
        Cmd::Run { config, out } => {
            let cfg: ExperimentConfig = read_typed(&config)?;
            let r = run_experiment(&cfg)?;
            emit_json(out.as_deref(), &r)?;
            Ok(r.status)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(s) => ExitCode::from(s.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let hypothesis = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(|e| e.is_hypothesis_failure()));
            ExitCode::from(if hypothesis { 2 } else { 1 })
        }
    }
}
