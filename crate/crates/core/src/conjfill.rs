//! Conjugators by orbit search, and short certificates for arbitrary elements as
//! products of conjugates of one small-degree element.

use std::collections::HashMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::group::GenSet;
use crate::matfq::Mat;
use crate::word::{Letter, Word, WordProgram};

/// q^{2nk}
pub fn conjugator_bound(q: u32, n: usize, k: usize) -> BigUint {
    BigUint::from(q).pow((2 * n * k) as u32)
}

/// The conjugacy class of A under ⟨S⟩, each member with a conjugator word M
/// (member = M A M⁻¹), in breadth-first order from A.
#[derive(Clone, Debug)]
pub struct ConjugacyClass {
    pub members: Vec<Mat>,
    index: HashMap<Mat, usize>,
    parent: Vec<Option<(usize, Letter)>>,
    genset: String,
}

impl ConjugacyClass {
    /// Breadth-first over C -> L C L⁻¹; stops early once `target` is found.
    fn search(gs: &GenSet, a: &Mat, target: Option<&Mat>, cap: usize) -> Result<ConjugacyClass> {
        let mut cl = ConjugacyClass {
            members: vec![a.clone()],
            index: HashMap::from([(a.clone(), 0)]),
            parent: vec![None],
            genset: gs.id.clone(),
        };
        let mut head = 0;
        while head < cl.members.len() {
            if target.is_some_and(|t| cl.index.contains_key(t)) {
                break;
            }
            for (l, m) in gs.alphabet() {
                let next = m.mul(&cl.members[head]).mul(gs.letter_matrix(l.inverse()));
                if cl.index.contains_key(&next) {
                    continue;
                }
                if cl.members.len() >= cap {
                    return Err(Error::FrontierCap(cap));
                }
                cl.index.insert(next.clone(), cl.members.len());
                cl.members.push(next);
                cl.parent.push(Some((head, *l)));
            }
            head += 1;
        }
        Ok(cl)
    }

    pub fn enumerate(gs: &GenSet, a: &Mat, cap: usize) -> Result<ConjugacyClass> {
        Self::search(gs, a, None, cap)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn position(&self, c: &Mat) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Conjugator word for member i. Each step prepends a letter, so the walk to the
    /// root already reads left to right.
    pub fn conjugator(&self, mut i: usize) -> Word {
        let mut letters = Vec::new();
        while let Some((p, l)) = self.parent[i] {
            letters.push(l);
            i = p;
        }
        Word::new(&self.genset, letters)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Conjugator {
    pub word: Word,
    pub matrix: Value,
    pub states: usize,
    /// q^{2nk} as a decimal string
    pub bound: String,
    pub within_bound: bool,
}

/// M with M A M⁻¹ = B, by breadth-first search over the conjugates of A.
pub fn conjugating_word(gs: &GenSet, a: &Mat, b: &Mat, cap: usize) -> Result<(Word, Mat, Conjugator)> {
    let cl = ConjugacyClass::search(gs, a, Some(b), cap)?;
    let i = cl.position(b).ok_or(Error::OrbitExhausted(cl.len()))?;
    let word = cl.conjugator(i);
    let m = gs.eval(&word)?;
    if m.mul(a).mul(&m.inverse()?) != *b {
        return Err(Error::Verification { stage: "conjugator".into(), detail: "M A M^-1 != B".into() });
    }
    let bound = conjugator_bound(gs.field().q(), gs.n(), a.degree());
    let cert = Conjugator {
        within_bound: BigUint::from(word.len()) <= bound,
        bound: bound.to_string(),
        matrix: m.to_json(),
        states: cl.len(),
        word: word.clone(),
    };
    Ok((word, m, cert))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FillConfig {
    /// constant in the O(n/k) conjugate count
    pub kappa: f64,
    /// cap on class members and on product states
    pub state_cap: usize,
}

impl Default for FillConfig {
    fn default() -> Self {
        FillConfig { kappa: 8.0, state_cap: 1_000_000 }
    }
}

/// ⌈κ n / k⌉
pub fn conjugate_budget(kappa: f64, n: usize, k: usize) -> usize {
    (kappa * n as f64 / k as f64).ceil() as usize
}

/// A non-scalar A of positive degree: the guard for it being non-central.
pub fn check_noncentral(a: &Mat) -> Result<()> {
    if a.degree() == 0 || a.is_scalar() {
        return Err(Error::Precondition("A must be non-scalar of positive degree".into()));
    }
    Ok(())
}

/// Conjugator words M_1..M_m with Π M_i A M_i⁻¹ = g and m minimal, m ≤ budget.
pub fn express_by_conjugates(gs: &GenSet, a: &Mat, g: &Mat, budget: usize, cap: usize) -> Result<Vec<Word>> {
    check_noncentral(a)?;
    let cl = ConjugacyClass::enumerate(gs, a, cap)?;
    let id = Mat::identity(gs.field(), gs.n());
    // products of j class members, breadth-first in j
    let mut seen: HashMap<Mat, (usize, usize)> = HashMap::new();
    let mut layer = vec![id.clone()];
    let mut nodes: Vec<(Mat, Option<(usize, usize)>)> = vec![(id.clone(), None)];
    seen.insert(id, (0, 0));
    let mut ids = vec![0usize];
    let mut m = 0;
    while !seen.contains_key(g) {
        if layer.is_empty() {
            return Err(Error::OrbitExhausted(nodes.len()));
        }
        m += 1;
        let mut next_layer = Vec::new();
        let mut next_ids = Vec::new();
        for (p, &pid) in layer.iter().zip(&ids) {
            for (ci, c) in cl.members.iter().enumerate() {
                let prod = p.mul(c);
                if seen.contains_key(&prod) {
                    continue;
                }
                if nodes.len() >= cap {
                    return Err(Error::FrontierCap(cap));
                }
                seen.insert(prod.clone(), (nodes.len(), m));
                nodes.push((prod.clone(), Some((pid, ci))));
                next_ids.push(nodes.len() - 1);
                next_layer.push(prod);
            }
        }
        layer = next_layer;
        ids = next_ids;
    }
    let (mut i, m) = seen[g];
    if m > budget {
        return Err(Error::BudgetExhausted(format!("needs {m} conjugates, budget {budget}")));
    }
    let mut factors = Vec::with_capacity(m);
    while let Some((p, ci)) = nodes[i].1 {
        factors.push(cl.conjugator(ci));
        i = p;
    }
    factors.reverse();
    Ok(factors)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FillCertificate {
    pub target: Value,
    /// the small-degree element being conjugated
    pub a: Value,
    pub program: WordProgram,
    pub conjugators: Vec<Word>,
    pub m: usize,
    pub budget: usize,
    pub a_degree: usize,
    /// length of A's own word
    pub d: String,
    pub length: String,
    /// (2q^{2nk} + d) ⌈κn/k⌉
    pub bound: String,
    pub within_bound: bool,
}

/// Certificate for g: each conjugate M_i A M_i⁻¹ spelled with A's word.
pub fn full_diameter_word(
    gs: &GenSet,
    a: &Mat,
    a_word: &WordProgram,
    g: &Mat,
    cfg: &FillConfig,
) -> Result<FillCertificate> {
    gs.check_id(&a_word.genset)?;
    if a_word.evaluate(gs.gens())? != *a {
        return Err(Error::Verification { stage: "fill".into(), detail: "A's word does not replay".into() });
    }
    let (n, k, q) = (gs.n(), a.degree(), gs.field().q());
    check_noncentral(a)?;
    let budget = conjugate_budget(cfg.kappa, n, k);
    let conjugators = express_by_conjugates(gs, a, g, budget, cfg.state_cap)?;
    let mut p = WordProgram::new(&gs.id);
    let a_node = p.graft(a_word);
    let parts: Vec<usize> = conjugators
        .iter()
        .map(|w| {
            let m = p.letters(w.letters.clone());
            p.conjugate(m, a_node)
        })
        .collect();
    let root = p.concat(&parts);
    p.set_root(root);
    if p.evaluate(gs.gens())? != *g {
        return Err(Error::Verification { stage: "fill".into(), detail: "certificate does not replay".into() });
    }
    let d = a_word.length();
    let bound = (BigUint::from(2u32) * conjugator_bound(q, n, k) + &d) * BigUint::from(budget);
    let length = p.length();
    Ok(FillCertificate {
        target: g.to_json(),
        a: a.to_json(),
        m: conjugators.len(),
        conjugators,
        budget,
        a_degree: k,
        d: d.to_string(),
        within_bound: length <= bound,
        length: length.to_string(),
        bound: bound.to_string(),
        program: p,
    })
}
