//! Exact diameters of small groups, certificate files and their verification, and
//! experiment orchestration.

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::conjfill::{conjugator_bound, full_diameter_word, FillCertificate, FillConfig};
use crate::error::{Error, Result};
use crate::group::{Closure, Family, GenSet, GroupSpec};
use crate::matfq::Mat;
use crate::reduction::{small_degree_element, verify_pipeline_report, Check, PipelineConfig, PipelineReport};
use crate::spectrum::{spectrum_report, SpectrumReport, DEFAULT_KAPPA_MIX};
use crate::transversal::{Embedding, Mode};
use crate::word::WordProgram;
use crate::Field;

pub const DIAMETER_CAP: usize = 1_000_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiameterReport {
    pub order: usize,
    pub diameter: u32,
    /// elements at each distance from the identity
    pub histogram: Vec<usize>,
}

/// Exact diameter by one breadth-first search from the identity; Cayley graphs are
/// vertex-transitive, so its eccentricity is the diameter. With a group given, a closure
/// smaller than the group's order is an error.
pub fn bfs_diameter(group: Option<&GroupSpec>, gs: &GenSet, cap: usize) -> Result<DiameterReport> {
    let cl = Closure::build(gs, cap)?;
    if let Some(order) = group.and_then(|g| g.order()) {
        if BigUint::from(cl.len()) != order {
            return Err(Error::Precondition(format!("generators close to {} elements, group has {order}", cl.len())));
        }
    }
    Ok(DiameterReport { order: cl.len(), diameter: cl.diameter(), histogram: cl.histogram() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtensionCertificate {
    pub embedding: Value,
    pub mode: Mode,
    pub program: WordProgram,
    pub length: String,
    /// q^{nt}
    pub bound: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WordCertificate {
    pub program: WordProgram,
    pub matrix: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum Certificate {
    Pipeline(PipelineReport),
    Fill(FillCertificate),
    Extension(ExtensionCertificate),
    Word(WordCertificate),
}

impl Certificate {
    pub fn program(&self) -> &WordProgram {
        match self {
            Certificate::Pipeline(r) => &r.program,
            Certificate::Fill(c) => &c.program,
            Certificate::Extension(c) => &c.program,
            Certificate::Word(c) => &c.program,
        }
    }

    pub fn program_mut(&mut self) -> &mut WordProgram {
        match self {
            Certificate::Pipeline(r) => &mut r.program,
            Certificate::Fill(c) => &mut c.program,
            Certificate::Extension(c) => &mut c.program,
            Certificate::Word(c) => &mut c.program,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Transcript {
    pub checks: Vec<Check>,
    pub passed: bool,
    pub first_failure: Option<String>,
}

impl Transcript {
    fn new(checks: Vec<Check>) -> Transcript {
        let first_failure = checks.iter().find(|c| !c.passed).map(|c| c.name.clone());
        Transcript { passed: first_failure.is_none(), checks, first_failure }
    }
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

/// Replays every word in the certificate and re-checks its recorded claims. A
/// certificate for another generating set is rejected before any replay.
pub fn verify_certificate(cert: &Certificate, group: &GroupSpec, gs: &GenSet) -> Result<Transcript> {
    gs.check_id(&cert.program().genset)?;
    cert.program().validate(gs.len())?;
    let field = group.field();
    let checks = match cert {
        Certificate::Pipeline(r) => verify_pipeline_report(group, gs, r)?,
        Certificate::Fill(c) => {
            let target = Mat::from_json(field, &c.target)?;
            let a = Mat::from_json(field, &c.a)?;
            let replay = c.program.evaluate(gs.gens())?;
            let mut prod = Mat::identity(field, gs.n());
            for w in &c.conjugators {
                let m = gs.eval(w)?;
                prod = prod.mul(&m.mul(&a).mul(&m.inverse()?));
            }
            let length = c.program.length();
            let q = gs.field().q();
            let bound = (BigUint::from(2u32) * conjugator_bound(q, gs.n(), a.degree())
                + c.d.parse::<BigUint>().map_err(|e| Error::Parse(e.to_string()))?)
                * BigUint::from(c.budget);
            vec![
                check("replay", replay == target, ""),
                check("conjugate product", prod == target, format!("m = {}", c.conjugators.len())),
                check("degree of A", a.degree() == c.a_degree, ""),
                check("length", length.to_string() == c.length, length.to_string()),
                check("conjugate budget", c.conjugators.len() <= c.budget, ""),
                check("bound", bound.to_string() == c.bound && (length <= bound) == c.within_bound, c.bound.clone()),
            ]
        }
        Certificate::Extension(c) => {
            let x = Embedding::from_json(group.space(), &c.embedding)?;
            let m = c.program.evaluate(gs.gens())?;
            let length = c.program.length();
            let bound = crate::transversal::vertex_bound(field.q(), gs.n(), x.t());
            vec![
                check("replay", x.extended_by(&m), "word extends the embedding"),
                check("membership", group.contains(&m), ""),
                check("length", length.to_string() == c.length, length.to_string()),
                check("bound", bound.to_string() == c.bound && length <= bound, c.bound.clone()),
            ]
        }
        Certificate::Word(c) => {
            let m = c.program.evaluate(gs.gens())?;
            vec![check("replay", m == Mat::from_json(field, &c.matrix)?, "")]
        }
    };
    Ok(Transcript::new(checks))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FillTargets {
    pub config: FillConfig,
    /// explicit target matrices
    pub targets: Vec<Value>,
    /// seeded random products of the generators, each of this many letters
    pub random: usize,
    pub random_length: usize,
}

impl Default for FillTargets {
    fn default() -> Self {
        FillTargets { config: FillConfig::default(), targets: Vec::new(), random: 0, random_length: 20 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumConfig {
    pub walk_kmax: usize,
    pub kappa_mix: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { walk_kmax: 500, kappa_mix: DEFAULT_KAPPA_MIX }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub group: Value,
    pub genset: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reduce: Option<PipelineConfig>,
    #[serde(default)]
    pub fill: Option<FillTargets>,
    #[serde(default)]
    pub spectrum: Option<SpectrumConfig>,
    /// exact BFS diameter when the closure fits under this many elements
    #[serde(default)]
    pub diameter_cap: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Green,
    Fallback,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Green => 0,
            Status::Fallback => 2,
            Status::Failed => 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub version: String,
    pub diameter: Option<DiameterReport>,
    pub pipeline: Option<PipelineReport>,
    pub fill: Vec<FillCertificate>,
    pub spectrum: Option<SpectrumReport>,
    pub verification: Vec<Transcript>,
    pub status: Status,
}

/// Runs reduce → fill → spectrum as configured, verifying every emitted certificate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let group = GroupSpec::from_json(&cfg.group).map_err(|e| e.at("group"))?;
    let gs = GenSet::from_json(&cfg.genset, &group).map_err(|e| e.at("genset"))?;
    let diameter = match cfg.diameter_cap {
        Some(cap) => Some(bfs_diameter(None, &gs, cap).map_err(|e| e.at("diameter"))?),
        None => None,
    };
    let mut verification = Vec::new();
    let pipeline = match &cfg.reduce {
        Some(pc) => {
            let mut pc = pc.clone();
            pc.seed ^= cfg.seed;
            let r = small_degree_element(&group, &gs, &pc).map_err(|e| e.at("reduce"))?;
            verification.push(verify_certificate(&Certificate::Pipeline(r.clone()), &group, &gs)?);
            Some(r)
        }
        None => None,
    };
    let mut fill = Vec::new();
    if let Some(ft) = &cfg.fill {
        let r = pipeline.as_ref().ok_or_else(|| Error::Precondition("fill needs the reduce stage".into()))?;
        let a = Mat::from_json(group.field(), &r.final_matrix)?;
        let mut targets: Vec<Mat> =
            ft.targets.iter().map(|t| Mat::from_json(group.field(), t)).collect::<Result<_>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..ft.random {
            let mut g = Mat::identity(group.field(), group.n);
            for _ in 0..ft.random_length {
                let (_, m) = &gs.alphabet()[rng.gen_range(0..gs.alphabet().len())];
                g = g.mul(m);
            }
            targets.push(g);
        }
        for g in &targets {
            let c = full_diameter_word(&gs, &a, &r.program, g, &ft.config).map_err(|e| e.at("fill"))?;
            verification.push(verify_certificate(&Certificate::Fill(c.clone()), &group, &gs)?);
            fill.push(c);
        }
    }
    let spectrum = match &cfg.spectrum {
        Some(sc) => Some(spectrum_report(&gs, sc.walk_kmax, sc.kappa_mix).map_err(|e| e.at("spectrum"))?),
        None => None,
    };
    let green = verification.iter().all(|t| t.passed)
        && pipeline.as_ref().is_none_or(|r| r.all_green())
        && spectrum.as_ref().is_none_or(|s| s.gap_bound_holds);
    let status = if !green {
        Status::Failed
    } else if pipeline.as_ref().is_some_and(|r| r.fallback.is_some()) {
        Status::Fallback
    } else {
        Status::Green
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        diameter,
        pipeline,
        fill,
        spectrum,
        verification,
        status,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: Family,
    pub n: usize,
    pub q: u32,
    pub t: Option<usize>,
    pub bundle: String,
    pub block_degree: Option<usize>,
    pub stages: usize,
    pub final_degree: Option<usize>,
    pub final_log2_length: Option<f64>,
    pub stop_reason: String,
    pub green: bool,
    pub fallback: bool,
}

fn sweep_one(family: Family, n: usize, field: &Field, cfg: &PipelineConfig) -> SweepRow {
    let mut row = SweepRow {
        family,
        n,
        q: field.q(),
        t: None,
        bundle: String::new(),
        block_degree: None,
        stages: 0,
        final_degree: None,
        final_log2_length: None,
        stop_reason: String::new(),
        green: false,
        fallback: false,
    };
    let run = || -> Result<PipelineReport> {
        let group = GroupSpec::standard(family, n, field)?;
        let gs = crate::group::standard_gens(&group)?;
        small_degree_element(&group, &gs, cfg)
    };
    match run() {
        Ok(r) => {
            row.t = Some(r.constants.t);
            if let Some(b) = &r.bundle {
                row.bundle = b.used.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ");
                row.block_degree = Some(b.block_degree);
            }
            row.stages = r.stages.len();
            row.final_degree = Some(r.final_degree);
            row.final_log2_length = r.final_stage().map(|s| s.log2_length);
            row.stop_reason = r.stop_reason.clone();
            row.green = r.all_green();
            row.fallback = r.fallback.is_some();
        }
        Err(e) => {
            row.fallback = e.is_hypothesis_failure();
            row.stop_reason = format!("error: {e}");
        }
    }
    row
}

/// One pipeline run per n, in parallel; rows come back in the order of `ns`.
pub fn sweep(family: Family, ns: &[usize], field: &Field, cfg: &PipelineConfig) -> Vec<SweepRow> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(ns.len().max(1));
    let mut rows: Vec<Option<SweepRow>> = vec![None; ns.len()];
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    ns.iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, &n)| (i, sweep_one(family, n, field, cfg)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, row) in h.join().expect("sweep worker panicked") {
                rows[i] = Some(row);
            }
        }
    });
    rows.into_iter().map(|r| r.unwrap()).collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    use std::fmt::Write;
    let mut s =
        String::from("family,n,q,t,bundle,block_degree,stages,final_degree,final_log2_length,stop_reason,green,fallback\n");
    let opt = |x: Option<usize>| x.map_or(String::new(), |v| v.to_string());
    for r in rows {
        let _ = writeln!(
            s,
            "{:?},{},{},{},{},{},{},{},{},\"{}\",{},{}",
            r.family,
            r.n,
            r.q,
            opt(r.t),
            r.bundle,
            opt(r.block_degree),
            r.stages,
            opt(r.final_degree),
            r.final_log2_length.map_or(String::new(), |v| format!("{v:.3}")),
            r.stop_reason.replace('"', "'"),
            r.green,
            r.fallback
        );
    }
    s
}
