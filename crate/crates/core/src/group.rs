//! Classical matrix groups, generating sets and exhaustive Cayley-graph BFS.

use std::collections::HashMap;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::formspace::{FormKind, FormedSpace};
use crate::gf::{Fe, Field, FieldDesc};
use crate::matfq::Mat;
use crate::word::{Letter, Word, WordProgram};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    SL,
    Sp,
    SU,
    Omega,
}

impl Family {
    pub fn form_kind(self) -> FormKind {
        match self {
            Family::SL => FormKind::Linear,
            Family::Sp => FormKind::Symplectic,
            Family::SU => FormKind::Unitary,
            Family::Omega => FormKind::Orthogonal,
        }
    }

    pub fn is_formed(self) -> bool {
        self != Family::SL
    }
}

/// One of SL_n(q), Sp_n(q), SU_n(q) (realised over F_{q²}) or the determinant-1
/// isometries of a quadratic form standing in for Ω_n(q).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    pub family: Family,
    pub n: usize,
    /// Field of the matrix entries: F_{q²} for SU.
    field: Field,
    space: FormedSpace,
}

#[derive(Serialize, Deserialize)]
struct GroupSpecJson {
    family: Family,
    n: usize,
    field: FieldDesc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    form: Option<Value>,
}

impl GroupSpec {
    /// Standard reference form for the family. For SU, `field` is the fixed field F_q.
    pub fn standard(family: Family, n: usize, field: &Field) -> Result<GroupSpec> {
        let (entries, space) = match family {
            Family::SL => (field.clone(), FormedSpace::linear(field, n)),
            Family::Sp => (field.clone(), FormedSpace::symplectic(field, n)?),
            Family::Omega => (field.clone(), FormedSpace::orthogonal_split(field, n)?),
            Family::SU => {
                let big = Field::new(field.p(), 2 * field.e(), None)?;
                let s = FormedSpace::unitary(&big, n)?;
                (big, s)
            }
        };
        if n == 0 {
            return Err(Error::Dimension("n must be positive".into()));
        }
        Ok(GroupSpec { family, n, field: entries, space })
    }

    pub fn with_space(family: Family, space: FormedSpace) -> Result<GroupSpec> {
        if space.kind() != family.form_kind() {
            return Err(Error::InvalidForm(format!("{family:?} needs a {:?} form", family.form_kind())));
        }
        Ok(GroupSpec { family, n: space.n(), field: space.field().clone(), space })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn space(&self) -> &FormedSpace {
        &self.space
    }

    /// q of the group's name: the σ-fixed field order for SU.
    pub fn q(&self) -> u32 {
        match self.family {
            Family::SU => self.field.fixed_order().unwrap_or(self.field.q()),
            _ => self.field.q(),
        }
    }

    pub fn contains(&self, a: &Mat) -> bool {
        if a.field() != &self.field || a.rows() != self.n || a.cols() != self.n {
            return false;
        }
        match self.family {
            Family::SL => a.det() == Fe::ONE,
            Family::Sp => self.space.is_isometry(a),
            Family::SU | Family::Omega => self.space.is_isometry(a) && a.det() == Fe::ONE,
        }
    }

    /// Exact order for SL, Sp and SU.
    pub fn order(&self) -> Option<BigUint> {
        let q = BigUint::from(self.q());
        let n = self.n as u32;
        let pw = |e: u32| q.pow(e);
        match self.family {
            Family::SL => Some((2..=n).fold(pw(n * (n - 1) / 2), |acc, i| acc * (pw(i) - 1u32))),
            Family::Sp => {
                let m = n / 2;
                Some((1..=m).fold(pw(m * m), |acc, i| acc * (pw(2 * i) - 1u32)))
            }
            Family::SU => Some((2..=n).fold(pw(n * (n - 1) / 2), |acc, i| {
                if i % 2 == 0 {
                    acc * (pw(i) - 1u32)
                } else {
                    acc * (pw(i) + 1u32)
                }
            })),
            Family::Omega => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let desc = match self.family {
            Family::SU => FieldDesc { p: self.field.p(), e: self.field.e() / 2, modulus: None },
            _ => self.field.desc(),
        };
        let mut v = json!({"family": self.family, "n": self.n, "field": desc});
        if self.family.is_formed() {
            v["form"] = self.space.to_json();
        }
        v
    }

    pub fn from_json(v: &Value) -> Result<GroupSpec> {
        let raw: GroupSpecJson = serde_json::from_value(v.clone())?;
        match raw.form {
            Some(form) if raw.family.is_formed() => {
                let space = FormedSpace::from_json(&form)?;
                if space.n() != raw.n {
                    return Err(Error::Parse("form dimension disagrees with n".into()));
                }
                GroupSpec::with_space(raw.family, space)
            }
            _ => GroupSpec::standard(raw.family, raw.n, &Field::from_desc(&raw.field)?),
        }
    }
}

/// A generating set; words index `gens` and may invert any letter.
#[derive(Clone, Debug)]
pub struct GenSet {
    pub id: String,
    gens: Vec<Mat>,
    inverses: Vec<Mat>,
    alphabet: Vec<(Letter, Mat)>,
}

impl GenSet {
    pub fn new(id: &str, gens: Vec<Mat>) -> Result<GenSet> {
        let first = gens.first().ok_or_else(|| Error::Precondition("empty generating set".into()))?;
        let (f, n) = (first.field().clone(), first.n());
        let mut inverses = Vec::with_capacity(gens.len());
        for g in &gens {
            if g.field() != &f {
                return Err(Error::MixedFields);
            }
            if !g.is_square() || g.n() != n {
                return Err(Error::Dimension("generators must be square of equal size".into()));
            }
            inverses.push(g.inverse()?);
        }
        // symmetric closure, one letter per distinct matrix
        let mut alphabet: Vec<(Letter, Mat)> = Vec::new();
        for (i, g) in gens.iter().enumerate() {
            for (m, inv) in [(g, false), (&inverses[i], true)] {
                if !alphabet.iter().any(|(_, a)| a == m) {
                    alphabet.push((Letter::new(i as u32, inv), m.clone()));
                }
            }
        }
        Ok(GenSet { id: id.to_string(), gens, inverses, alphabet })
    }

    /// Id derived from the matrices: FNV-1a over the entries.
    pub fn fingerprint(gens: &[Mat]) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for g in gens {
            for b in [g.n() as u64].into_iter().chain(g.entries().iter().map(|a| a.value() as u64)) {
                h ^= b;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        format!("gs-{h:016x}")
    }

    pub fn gens(&self) -> &[Mat] {
        &self.gens
    }
    pub fn field(&self) -> &Field {
        self.gens[0].field()
    }
    pub fn n(&self) -> usize {
        self.gens[0].n()
    }
    pub fn len(&self) -> usize {
        self.gens.len()
    }
    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    /// Distinct matrices of S ∪ S⁻¹ with a letter naming each.
    pub fn alphabet(&self) -> &[(Letter, Mat)] {
        &self.alphabet
    }

    pub fn letter_matrix(&self, l: Letter) -> &Mat {
        if l.inverted {
            &self.inverses[l.gen as usize]
        } else {
            &self.gens[l.gen as usize]
        }
    }

    pub fn eval(&self, w: &Word) -> Result<Mat> {
        self.check_id(&w.genset)?;
        let mut acc = Mat::identity(self.field(), self.n());
        for &l in &w.letters {
            if l.gen as usize >= self.gens.len() {
                return Err(Error::IndexOutOfRange { index: l.gen as usize, len: self.gens.len() });
            }
            acc = acc.mul(self.letter_matrix(l));
        }
        Ok(acc)
    }

    pub fn eval_program(&self, p: &WordProgram) -> Result<Mat> {
        self.check_id(&p.genset)?;
        p.evaluate(&self.gens)
    }

    pub fn check_id(&self, id: &str) -> Result<()> {
        if id != self.id {
            return Err(Error::GensetMismatch { expected: self.id.clone(), found: id.to_string() });
        }
        Ok(())
    }

    pub fn check_members(&self, g: &GroupSpec) -> Result<()> {
        for (i, m) in self.gens.iter().enumerate() {
            if !g.contains(m) {
                return Err(Error::Precondition(format!("generator {i} is not in {:?}_{}", g.family, g.n)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "field": self.field().desc(),
            "gens": self.gens.iter().map(|g| g.to_json()).collect::<Vec<_>>(),
        })
    }

    /// Either explicit `{"id", "gens"}` or `{"preset": "standard" | "random-k", "seed"}`.
    pub fn from_json(v: &Value, group: &GroupSpec) -> Result<GenSet> {
        if let Some(p) = v.get("preset").and_then(|p| p.as_str()) {
            let seed = v.get("seed").and_then(|s| s.as_u64()).unwrap_or(0);
            return preset(group, p, seed);
        }
        let gens = v
            .get("gens")
            .and_then(|g| g.as_array())
            .ok_or_else(|| Error::Parse("genset needs gens or preset".into()))?
            .iter()
            .map(|m| Mat::from_json(group.field(), m))
            .collect::<Result<Vec<_>>>()?;
        let id = match v.get("id").and_then(|i| i.as_str()) {
            Some(id) => id.to_string(),
            None => GenSet::fingerprint(&gens),
        };
        let gs = GenSet::new(&id, gens)?;
        gs.check_members(group)?;
        Ok(gs)
    }
}

/// Named presets: "standard", or "random-k" for k pseudo-random elements.
pub fn preset(group: &GroupSpec, name: &str, seed: u64) -> Result<GenSet> {
    if name == "standard" {
        return standard_gens(group);
    }
    if let Some(k) = name.strip_prefix("random-").and_then(|k| k.parse::<usize>().ok()) {
        return random_gens(group, k, seed);
    }
    Err(Error::Parse(format!("unknown genset preset {name:?}")))
}

fn elementary(f: &Field, n: usize, entries: &[(usize, usize, Fe)]) -> Mat {
    let mut m = Mat::identity(f, n);
    for &(i, j, a) in entries {
        m.set(i, j, f.add(m.get(i, j), a));
    }
    m
}

/// e_i -> e_{i+1} cyclically, with one sign flipped when its determinant is -1.
fn cycle_matrix(f: &Field, n: usize) -> Mat {
    let mut m = Mat::zeros(f, n, n);
    for i in 0..n {
        m.set((i + 1) % n, i, Fe::ONE);
    }
    if m.det() != Fe::ONE {
        m.set(0, n - 1, f.neg(Fe::ONE));
    }
    m
}

/// SL: the transvection I + E_12 (and I + ωE_12 over non-prime fields) with the n-cycle.
/// Sp: root elements and the pair cycle on a basis e_1..e_m, f_1..f_m.
/// SU and Ω: the seeded random preset.
pub fn standard_gens(group: &GroupSpec) -> Result<GenSet> {
    let f = group.field().clone();
    let n = group.n;
    let mut gens = Vec::new();
    match group.family {
        Family::SL => {
            if n == 1 {
                gens.push(Mat::identity(&f, 1));
            } else {
                gens.push(elementary(&f, n, &[(0, 1, Fe::ONE)]));
                gens.push(cycle_matrix(&f, n));
                if f.e() > 1 {
                    gens.push(elementary(&f, n, &[(0, 1, f.gen())]));
                }
            }
        }
        Family::Sp => {
            let m = n / 2;
            let neg = f.neg(Fe::ONE);
            gens.push(elementary(&f, n, &[(0, m, Fe::ONE)]));
            let mut w = Mat::identity(&f, n);
            w.set(0, 0, Fe::ZERO);
            w.set(m, m, Fe::ZERO);
            w.set(m, 0, neg);
            w.set(0, m, Fe::ONE);
            gens.push(w);
            if m >= 2 {
                gens.push(elementary(&f, n, &[(0, 1, Fe::ONE), (m + 1, m, neg)]));
                let mut c = Mat::zeros(&f, n, n);
                for i in 0..m {
                    c.set((i + 1) % m, i, Fe::ONE);
                    c.set(m + (i + 1) % m, m + i, Fe::ONE);
                }
                gens.push(c);
            }
            if f.e() > 1 {
                gens.push(elementary(&f, n, &[(0, m, f.gen())]));
            }
        }
        Family::SU | Family::Omega => return random_gens(group, 6, 0).map(|g| GenSet { id: "standard".into(), ..g }),
    }
    let gs = GenSet::new("standard", gens)?;
    debug_assert!(gs.check_members(group).is_ok());
    Ok(gs)
}

/// k seeded random elements; for Ω each is a commutator of two random isometries.
pub fn random_gens(group: &GroupSpec, k: usize, seed: u64) -> Result<GenSet> {
    let space = group.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || rand::Rng::gen::<u64>(&mut rng);
    let mut gens = Vec::with_capacity(k);
    for _ in 0..k {
        let g = match group.family {
            Family::SL | Family::Sp | Family::SU => space.random_isometry(draw(), true)?,
            Family::Omega => {
                let a = space.random_isometry(draw(), false)?;
                let b = space.random_isometry(draw(), false)?;
                Mat::commutator(&a, &b)?
            }
        };
        gens.push(g);
    }
    let gs = GenSet::new(&format!("random-{k}-seed{seed}"), gens)?;
    gs.check_members(group)?;
    Ok(gs)
}

/// Breadth-first closure of ⟨S⟩ from the identity, appending letters on the right.
#[derive(Clone, Debug)]
pub struct Closure {
    pub elements: Vec<Mat>,
    pub index: HashMap<Mat, usize>,
    pub dist: Vec<u32>,
    parent: Vec<Option<(usize, Letter)>>,
    genset: String,
}

impl Closure {
    pub fn build(gs: &GenSet, cap: usize) -> Result<Closure> {
        let id = Mat::identity(gs.field(), gs.n());
        let mut c = Closure {
            elements: vec![id.clone()],
            index: HashMap::from([(id, 0)]),
            dist: vec![0],
            parent: vec![None],
            genset: gs.id.clone(),
        };
        let mut head = 0;
        while head < c.elements.len() {
            for (l, m) in gs.alphabet() {
                let next = c.elements[head].mul(m);
                if c.index.contains_key(&next) {
                    continue;
                }
                if c.elements.len() >= cap {
                    return Err(Error::FrontierCap(cap));
                }
                c.index.insert(next.clone(), c.elements.len());
                c.elements.push(next);
                c.dist.push(c.dist[head] + 1);
                c.parent.push(Some((head, *l)));
            }
            head += 1;
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn diameter(&self) -> u32 {
        self.dist.iter().copied().max().unwrap_or(0)
    }

    /// Number of elements at each distance from the identity.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.diameter() as usize + 1];
        for &d in &self.dist {
            h[d as usize] += 1;
        }
        h
    }

    /// A shortest word for element i.
    pub fn word_to(&self, mut i: usize) -> Word {
        let mut letters = Vec::new();
        while let Some((p, l)) = self.parent[i] {
            letters.push(l);
            i = p;
        }
        letters.reverse();
        Word::new(&self.genset, letters)
    }

    pub fn word_for(&self, g: &Mat) -> Option<Word> {
        self.index.get(g).map(|&i| self.word_to(i))
    }
}
