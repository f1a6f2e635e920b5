//! Iterated degree reduction: a P(r)-block placed by a short word, powered down, then
//! repeatedly re-planted on a subspace moved off itself and commuted back.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::subspaces::{find_w_formed, find_w_linear, RadicalBranch};
use crate::error::{Error, Result};
use crate::group::{Closure, Family, GenSet, GroupSpec};
use crate::matfq::{combine, Mat, Vector};
use crate::pmatrix::{build_pblock, pblock_degree, power_step, ReductionStep};
use crate::primeselect::choose_r;
use crate::transversal::{Embedding, ExtendConfig, Extender, Extension, Mode, Strategy};
use crate::word::WordProgram;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineFamily {
    Linear,
    Formed,
}

impl PipelineFamily {
    pub fn of(family: Family) -> PipelineFamily {
        match family {
            Family::SL => PipelineFamily::Linear,
            _ => PipelineFamily::Formed,
        }
    }

    pub fn default_c(self) -> f64 {
        match self {
            PipelineFamily::Linear => 0.4,
            PipelineFamily::Formed => 0.04,
        }
    }

    /// Degree at which the loop stops: 2cL³ (linear) or 56 + 32cL³ (formed).
    pub fn threshold(self, c: f64, log_term: f64) -> f64 {
        let cube = c * log_term.powi(3);
        match self {
            PipelineFamily::Linear => 2.0 * cube,
            PipelineFamily::Formed => 56.0 + 32.0 * cube,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// defaults to 0.4 (linear) or 0.04 (formed)
    pub c: Option<f64>,
    pub c1: f64,
    /// defaults to the family threshold
    pub stop_threshold: Option<f64>,
    /// defaults to ⌈log₂ n⌉
    pub iteration_cap: Option<usize>,
    /// seeded retries per extension when a power step misses its degree bound
    pub attempts: usize,
    pub seed: u64,
    /// element cap for the exact closure used when the preconditions fail
    pub fallback_cap: usize,
    pub extend: ExtendConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            c: None,
            c1: 1.0,
            stop_threshold: None,
            iteration_cap: None,
            attempts: 16,
            seed: 0,
            fallback_cap: 1_000_000,
            extend: ExtendConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConstants {
    pub family: PipelineFamily,
    pub c: f64,
    pub c1: f64,
    /// ln n + ln q
    pub log_term: f64,
    /// ⌊c L³⌋
    pub t: usize,
    pub stop_threshold: f64,
    pub iteration_cap: usize,
    /// cL³ < n (linear) or 2cL³ < (n-2)/5 (formed)
    pub precondition: bool,
}

impl PipelineConstants {
    pub fn new(group: &GroupSpec, cfg: &PipelineConfig) -> PipelineConstants {
        let family = PipelineFamily::of(group.family);
        let n = group.n;
        let c = cfg.c.unwrap_or(family.default_c());
        let log_term = (n as f64).ln() + (group.field().q() as f64).ln();
        let cube = c * log_term.powi(3);
        let precondition = match family {
            PipelineFamily::Linear => cube < n as f64,
            PipelineFamily::Formed => 2.0 * cube < (n as f64 - 2.0) / 5.0,
        };
        PipelineConstants {
            family,
            c,
            c1: cfg.c1,
            log_term,
            t: cube.floor() as usize,
            stop_threshold: cfg.stop_threshold.unwrap_or(family.threshold(c, log_term)),
            iteration_cap: cfg.iteration_cap.unwrap_or((n as f64).log2().ceil() as usize),
            precondition,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleInfo {
    /// least prefix with M > n⁴
    pub chosen: Vec<u64>,
    /// longest prefix whose block fits in t
    pub used: Vec<u64>,
    pub block_degree: usize,
    pub ln_m_used: f64,
    pub m_used_exceeds_n4: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub label: String,
    pub node: usize,
    pub degree: usize,
    pub length: String,
    pub log2_length: f64,
    pub log2_bound: Option<f64>,
    pub matrix: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtensionRecord {
    pub label: String,
    pub t: usize,
    pub strategy: Strategy,
    pub states: usize,
    pub length: String,
    pub log2_bound: f64,
    pub within_bound: bool,
    pub guaranteed: bool,
    pub attempt: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub j: usize,
    pub input_degree: usize,
    pub w_dim: usize,
    pub branch: Option<RadicalBranch>,
    pub commutator_degree: usize,
    pub output_degree: usize,
    pub exponent: String,
    pub commutator_order: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fallback {
    pub reason: String,
    pub group_order: usize,
    pub diameter: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub group: Value,
    pub genset: String,
    pub constants: PipelineConstants,
    pub bundle: Option<BundleInfo>,
    pub fallback: Option<Fallback>,
    pub stages: Vec<StageRecord>,
    pub steps: Vec<ReductionStep>,
    pub iterations: Vec<IterationRecord>,
    pub extensions: Vec<ExtensionRecord>,
    pub stop_reason: String,
    pub final_degree: usize,
    pub final_matrix: Value,
    pub program: WordProgram,
    pub checks: Vec<Check>,
}

impl PipelineReport {
    pub fn all_green(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn final_stage(&self) -> Option<&StageRecord> {
        self.stages.last()
    }
}

pub(crate) fn log2_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits < 1000 {
        x.to_f64().unwrap().log2()
    } else {
        let shift = bits - 64;
        (x >> shift).to_f64().unwrap().log2() + shift as f64
    }
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

/// Images of a basis under a square block acting on its coordinates.
fn block_images(field: &crate::gf::Field, n: usize, basis: &[Vector], block: &Mat) -> Vec<Vector> {
    (0..basis.len()).map(|i| combine(field, n, &block.col(i), basis)).collect()
}

struct Run<'a> {
    group: &'a GroupSpec,
    gs: &'a GenSet,
    cfg: &'a PipelineConfig,
    extender: Extender<'a>,
    mode: Mode,
    program: WordProgram,
    stages: Vec<StageRecord>,
    extensions: Vec<ExtensionRecord>,
    steps: Vec<ReductionStep>,
}

impl<'a> Run<'a> {
    fn record(&mut self, label: &str, node: usize, m: &Mat, log2_bound: Option<f64>) {
        let len = self.program.length_of(node);
        self.stages.push(StageRecord {
            label: label.into(),
            node,
            degree: m.degree(),
            log2_length: log2_big(&len),
            length: len.to_string(),
            log2_bound,
            matrix: m.to_json(),
        });
    }

    /// Extends X, retrying with fresh seeds until the power step of the resulting
    /// element (through `post`) is accepted.
    fn extend_and_reduce(
        &mut self,
        label: &str,
        x: &Embedding,
        primes: &[u64],
        post: impl Fn(&mut WordProgram, usize, &Mat) -> Result<(usize, Mat)>,
        accept: impl Fn(&ReductionStep) -> bool,
    ) -> Result<(Extension, usize, usize, Mat, ReductionStep, Mat)> {
        let q = self.group.field().q();
        let mut last = None;
        for attempt in 0..self.cfg.attempts.max(1) {
            let seed = self.cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(attempt as u64);
            let ext = self.extender.extend_seeded(x, self.mode, Some(seed)).map_err(|e| e.at(label))?;
            let node = self.program.graft(&ext.program);
            let (c_node, c) = post(&mut self.program, node, &ext.matrix)?;
            let (step, b) = power_step(&c, primes).map_err(|e| e.at(label))?;
            let holds = accept(&step);
            self.extensions.push(ExtensionRecord {
                label: label.into(),
                t: x.t(),
                strategy: ext.strategy,
                states: ext.states,
                length: ext.length.to_string(),
                log2_bound: (self.group.n * x.t()) as f64 * (q as f64).log2(),
                within_bound: ext.within_bound(),
                guaranteed: ext.guaranteed,
                attempt,
            });
            if holds {
                return Ok((ext, node, c_node, c, step, b));
            }
            let retry = ext.strategy == Strategy::Constructive;
            last = Some(step);
            if !retry {
                break;
            }
        }
        let step = last.unwrap();
        Err(Error::HypothesisFailure(format!(
            "degree {} -> {} via prime {} (counts {:?}, F_q-eigenvalues only 1: {})",
            step.input_degree, step.output_degree, step.prime, step.counts, step.rational_eigenvalues_one
        ))
        .at(label))
    }
}

/// Non-identity element of small degree with a word certificate. Falls back to an
/// exact closure of the group when n is too small for the pipeline's preconditions, or
/// when a hypothesis fails on a group small enough to enumerate.
pub fn small_degree_element(group: &GroupSpec, gs: &GenSet, cfg: &PipelineConfig) -> Result<PipelineReport> {
    gs.check_members(group)?;
    match run_pipeline(group, gs, cfg) {
        Err(e) if e.is_hypothesis_failure() && enumerable(group, cfg.fallback_cap) => {
            let consts = PipelineConstants::new(group, cfg);
            fallback(group, gs, consts, cfg.fallback_cap, e.to_string()).map_err(|_| e)
        }
        r => r,
    }
}

fn enumerable(group: &GroupSpec, cap: usize) -> bool {
    group.order().is_some_and(|o| o <= BigUint::from(cap))
}

fn run_pipeline(group: &GroupSpec, gs: &GenSet, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let consts = PipelineConstants::new(group, cfg);
    if consts.t == 0 {
        let reason = format!("c L^3 = {:.3} rounds to t = 0", consts.c * consts.log_term.powi(3));
        return fallback(group, gs, consts, cfg.fallback_cap, reason);
    }
    if !consts.precondition {
        let reason = format!("size preconditions fail for n = {}", group.n);
        return fallback(group, gs, consts, cfg.fallback_cap, reason);
    }
    let field = group.field().clone();
    let (n, q) = (group.n, field.q());
    let chosen = choose_r(n as u64, q as u64, field.p() as u64, cfg.c1)?;
    let mut used: Vec<u64> = Vec::new();
    for &l in &chosen.primes {
        let mut next = used.clone();
        next.push(l);
        if pblock_degree(&next, &field)? > consts.t {
            break;
        }
        used = next;
    }
    if used.is_empty() {
        let reason = format!("the smallest bundle prime {} needs a block above t = {}", chosen.primes[0], consts.t);
        return fallback(group, gs, consts, cfg.fallback_cap, reason.clone())
            .map_err(|e| Error::HypothesisFailure(format!("{reason}; exact fallback failed: {e}")));
    }
    let b = pblock_degree(&used, &field)?;
    let used_bundle = crate::primeselect::bundle_make(field.p() as u64, q as u64, &used)?;
    let bundle = BundleInfo {
        chosen: chosen.primes.clone(),
        used: used.clone(),
        block_degree: b,
        ln_m_used: used_bundle.ln_m(),
        m_used_exceeds_n4: used_bundle.m_exceeds((n as u128).pow(4)),
    };
    let mode = if consts.family == PipelineFamily::Linear { Mode::Linear } else { Mode::Singular };
    let mut run = Run {
        group,
        gs,
        cfg,
        extender: Extender::new(group, gs, cfg.extend.clone()),
        mode,
        program: WordProgram::new(&gs.id),
        stages: Vec::new(),
        extensions: Vec::new(),
        steps: Vec::new(),
    };
    let log2q = (q as f64).log2();
    let t = consts.t;

    // A₀: the padded block on a fresh t-dimensional W
    let w0: Vec<Vector> = match consts.family {
        PipelineFamily::Linear => (0..t).map(|i| crate::matfq::unit_vec(n, i)).collect(),
        PipelineFamily::Formed => {
            let ts = group.space().max_totally_singular().map_err(|e| e.at("initial W"))?;
            if ts.dim() < t {
                return Err(Error::Precondition(format!("maximal totally singular subspace has dim {} < t", ts.dim())));
            }
            ts.basis()[..t].to_vec()
        }
    };
    let block0 = build_pblock(&used, t, &field)?;
    let x0 = Embedding::new(w0.clone(), block_images(&field, n, &w0, &block0))?;
    let (_, a0_node, _, a0, step, a1) =
        run.extend_and_reduce("A0", &x0, &used, |_, node, m| Ok((node, m.clone())), ReductionStep::holds)?;
    run.record("A0", a0_node, &a0, Some((n * t) as f64 * log2q));
    let mut a_node = run.program.power(a0_node, step.exponent);
    run.steps.push(step);
    let mut a = a1;
    run.record("A1", a_node, &a, Some((2 * n * t + n + 2) as f64 * log2q));

    let mut iterations = Vec::new();
    let mut checks = Vec::new();
    let stop_reason;
    let mut j = 1;
    loop {
        let k = a.degree();
        if (k as f64) <= consts.stop_threshold {
            stop_reason = format!("degree {k} <= threshold {:.2}", consts.stop_threshold);
            break;
        }
        if j > consts.iteration_cap {
            stop_reason = format!("iteration cap {} reached", consts.iteration_cap);
            break;
        }
        let label = format!("M{j}");
        let (w, branch) = match consts.family {
            PipelineFamily::Linear => {
                if 2 * b > k || 2 * b >= n {
                    stop_reason = format!("block of degree {b} does not fit twice into degree {k}");
                    break;
                }
                (find_w_linear(&a, b).map_err(|e| e.at(format!("W{j}")))?, None)
            }
            PipelineFamily::Formed => {
                let out = find_w_formed(group.space(), &a).map_err(|e| e.at(format!("W{j}")))?;
                if out.w.dim() < b {
                    stop_reason = format!("W{j} has dim {} < block degree {b}", out.w.dim());
                    break;
                }
                (out.w, Some(out.branch))
            }
        };
        let wb: Vec<Vector> = w.basis()[..b].to_vec();
        let aw: Vec<Vector> = wb.iter().map(|v| a.apply(v)).collect();
        let block = build_pblock(&used, b, &field)?;
        let mut domain = wb.clone();
        domain.extend(aw.iter().cloned());
        let mut images = block_images(&field, n, &wb, &block);
        images.extend(aw);
        let x = Embedding::new(domain, images)?;
        let a_inv = a.inverse()?;
        let prev_node = a_node;
        // M A⁻¹ M⁻¹ A agrees with M on W, since M fixes AW
        let post = |p: &mut WordProgram, m_node: usize, m: &Mat| {
            let inv = p.inverse(prev_node);
            let c_node = p.commutator(m_node, inv);
            let c = Mat::commutator(m, &a_inv)?;
            if !wb.iter().all(|v| c.apply(v) == m.apply(v)) {
                return Err(Error::Internal("commutator differs from M on W".into()));
            }
            Ok((c_node, c))
        };
        // the loop needs deg(A_{j+1}) <= deg(A_j)/2; the quarter bound on C is only recorded
        let accept = |s: &ReductionStep| s.output_degree > 0 && 2 * s.output_degree <= k && s.rational_eigenvalues_one;
        let (ext, m_node, c_node, c, step, next) = run.extend_and_reduce(&label, &x, &used, post, accept)?;
        run.record(&label, m_node, &ext.matrix, Some((2 * n * b) as f64 * log2q));
        run.record(&format!("C{j}"), c_node, &c, None);
        let order = step.order;
        let exponent = step.exponent;
        iterations.push(IterationRecord {
            j,
            input_degree: k,
            w_dim: w.dim(),
            branch,
            commutator_degree: c.degree(),
            output_degree: next.degree(),
            exponent: exponent.to_string(),
            commutator_order: order.to_string(),
        });
        run.steps.push(step);
        a_node = run.program.power(c_node, exponent);
        a = next;
        j += 1;
        run.record(
            &format!("A{j}"),
            a_node,
            &a,
            Some((2 * n * t) as f64 * log2q + (j * (n + 2)) as f64 * log2q),
        );
    }
    run.program.set_root(a_node);

    // ledger checks
    let gens = run.gs.gens();
    let mut replay_fail = Vec::new();
    for s in &run.stages {
        let m = run.program.evaluate_node(s.node, gens)?;
        if m.to_json() != s.matrix {
            replay_fail.push(s.label.clone());
        }
    }
    checks.push(check("stage words replay", replay_fail.is_empty(), format!("mismatches: {replay_fail:?}")));
    let fin = run.program.evaluate(gens)?;
    checks.push(check("final word replays", fin == a, ""));
    checks.push(check("final element non-identity", !a.is_identity(), format!("degree {}", a.degree())));
    checks.push(check("final element in group", group.contains(&a), ""));
    checks.push(check(
        "final degree within threshold",
        (a.degree() as f64) <= consts.stop_threshold,
        format!("{} vs {:.2} ({stop_reason})", a.degree(), consts.stop_threshold),
    ));
    let deg_ok = iterations
        .iter()
        .all(|it| it.commutator_degree <= 2 * it.input_degree && 2 * it.output_degree <= it.input_degree);
    checks.push(check(
        "degree ledger",
        deg_ok && run.steps.first().is_some_and(|s| s.holds()),
        format!("{:?}", run.steps.iter().map(|s| s.output_degree).collect::<Vec<_>>()),
    ));
    let eig_ok = run.stages.iter().filter(|s| s.label.starts_with('A') && s.label != "A0").all(|s| {
        Mat::from_json(&field, &s.matrix).map(|m| m.only_unit_rational_eigenvalue()).unwrap_or(false)
    });
    checks.push(check("eigenvalue discipline", eig_ok, "every A_j (j >= 1) has F_q-eigenvalues 1 only"));
    let qn = BigUint::from(q).pow(n as u32);
    let order_ok = run.steps.iter().all(|s| s.exponent < s.order && BigUint::from(s.order) < qn);
    let length_ok = run.stages.iter().all(|s| s.log2_bound.is_none_or(|bd| s.log2_length <= bd + 1e-9));
    checks.push(check("length ledger", order_ok && length_ok, "exponent < order < q^n and each stage within its bound"));
    checks.push(check("extensions within q^{nt}", run.extensions.iter().all(|e| e.within_bound), ""));

    Ok(PipelineReport {
        group: group.to_json(),
        genset: gs.id.clone(),
        constants: consts,
        bundle: Some(bundle),
        fallback: None,
        stages: run.stages,
        steps: run.steps,
        iterations,
        extensions: run.extensions,
        stop_reason,
        final_degree: a.degree(),
        final_matrix: a.to_json(),
        program: run.program,
        checks,
    })
}

fn fallback(
    group: &GroupSpec,
    gs: &GenSet,
    consts: PipelineConstants,
    cap: usize,
    reason: String,
) -> Result<PipelineReport> {
    if group.order().is_some_and(|o| o > BigUint::from(cap)) {
        return Err(Error::Precondition(format!("{reason}, and the group is too large for an exact closure")));
    }
    let cl = Closure::build(gs, cap).map_err(|e| e.at("fallback closure"))?;
    let best = (1..cl.len())
        .min_by_key(|&i| (cl.elements[i].degree(), cl.dist[i], i))
        .ok_or_else(|| Error::Precondition("the generating set spans the trivial group".into()))?;
    let a = cl.elements[best].clone();
    let program = WordProgram::from_word(&cl.word_to(best));
    let fin = program.evaluate(gs.gens())?;
    let checks = vec![
        check("final word replays", fin == a, ""),
        check("final element non-identity", !a.is_identity(), format!("degree {}", a.degree())),
    ];
    let node = program.root();
    let len = program.length();
    Ok(PipelineReport {
        group: group.to_json(),
        genset: gs.id.clone(),
        stages: vec![StageRecord {
            label: "fallback".into(),
            node,
            degree: a.degree(),
            log2_length: log2_big(&len),
            length: len.to_string(),
            log2_bound: None,
            matrix: a.to_json(),
        }],
        constants: consts,
        bundle: None,
        fallback: Some(Fallback { reason: reason.clone(), group_order: cl.len(), diameter: cl.diameter() }),
        steps: Vec::new(),
        iterations: Vec::new(),
        extensions: Vec::new(),
        stop_reason: reason,
        final_degree: a.degree(),
        final_matrix: a.to_json(),
        program,
        checks,
    })
}

/// Replays a report's word against the generating set and re-checks its stage ledger.
pub fn verify_pipeline_report(group: &GroupSpec, gs: &GenSet, report: &PipelineReport) -> Result<Vec<Check>> {
    gs.check_id(&report.program.genset)?;
    report.program.validate(gs.len())?;
    let field = group.field();
    let mut out = Vec::new();
    for s in &report.stages {
        let m = report.program.evaluate_node(s.node, gs.gens())?;
        let expect = Mat::from_json(field, &s.matrix)?;
        out.push(check(&format!("stage {} replays", s.label), m == expect, ""));
        out.push(check(&format!("stage {} degree", s.label), m.degree() == s.degree, ""));
        let len = report.program.length_of(s.node).to_string();
        out.push(check(&format!("stage {} length", s.label), len == s.length, len.clone()));
    }
    let fin = report.program.evaluate(gs.gens())?;
    let expect = Mat::from_json(field, &report.final_matrix)?;
    out.push(check("final word replays", fin == expect, ""));
    out.push(check("final element non-identity", !fin.is_identity(), ""));
    out.push(check("final degree", fin.degree() == report.final_degree, ""));
    Ok(out)
}
