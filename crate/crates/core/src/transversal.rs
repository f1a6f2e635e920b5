//! Extending embeddings of subspaces by words in a generating set.
//!
//! Searches run over the Schreier graph whose vertices are embeddings g·X₀ of a fixed
//! domain, so the state count is bounded by q^{nt} rather than |G|. Where that is out
//! of reach and the generators are the standard ones, the group element is built
//! directly and written as a word by [`WordSolver`].

use std::collections::{HashMap, VecDeque};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::formspace::{search_span, ExtendOpts, FormKind, FormedSpace, Subspace};
use crate::gf::Fe;
use crate::group::{Family, GenSet, GroupSpec};
use crate::matfq::{rank_of, vec_from_json, vec_to_json, Mat, Vector};
use crate::word::{Letter, Word, WordProgram};
use crate::wordsolve::WordSolver;

/// Images of a basis w_1..w_t.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub domain: Vec<Vector>,
    pub images: Vec<Vector>,
}

impl Embedding {
    pub fn new(domain: Vec<Vector>, images: Vec<Vector>) -> Result<Embedding> {
        if domain.len() != images.len() {
            return Err(Error::Dimension("embedding needs one image per basis vector".into()));
        }
        Ok(Embedding { domain, images })
    }

    pub fn identity(domain: Vec<Vector>) -> Embedding {
        Embedding { images: domain.clone(), domain }
    }

    pub fn t(&self) -> usize {
        self.domain.len()
    }

    pub fn image_under(&self, g: &Mat) -> Embedding {
        Embedding { domain: self.domain.clone(), images: self.images.iter().map(|v| g.apply(v)).collect() }
    }

    /// g w_i = X(w_i) for every basis vector.
    pub fn extended_by(&self, g: &Mat) -> bool {
        self.domain.iter().zip(&self.images).all(|(w, x)| g.apply(w) == *x)
    }

    fn check(&self, space: &FormedSpace, mode: Mode) -> Result<()> {
        let (f, n) = (space.field(), space.n());
        if self.domain.iter().chain(&self.images).any(|v| v.len() != n) {
            return Err(Error::Dimension("embedding vectors have the wrong length".into()));
        }
        if rank_of(f, n, &self.domain) != self.t() {
            return Err(Error::Precondition("domain basis is dependent".into()));
        }
        if rank_of(f, n, &self.images) != self.t() {
            return Err(Error::Precondition("images are dependent".into()));
        }
        if mode == Mode::Singular {
            if !space.has_form() {
                return Err(Error::NoForm);
            }
            if !space.is_totally_singular_vecs(&self.domain) {
                return Err(Error::Precondition("domain is not totally singular".into()));
            }
            if !space.is_totally_singular_vecs(&self.images) {
                return Err(Error::NotIsometric("images span a non-singular subspace".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self, space: &FormedSpace) -> Value {
        let f = space.field();
        json!({
            "domain": self.domain.iter().map(|v| vec_to_json(f, v)).collect::<Vec<_>>(),
            "images": self.images.iter().map(|v| vec_to_json(f, v)).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(space: &FormedSpace, v: &Value) -> Result<Embedding> {
        let read = |key: &str| -> Result<Vec<Vector>> {
            v.get(key)
                .and_then(|a| a.as_array())
                .ok_or_else(|| Error::Parse(format!("embedding needs '{key}'")))?
                .iter()
                .map(|x| vec_from_json(space.field(), x))
                .collect()
        };
        Embedding::new(read("domain")?, read("images")?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Linear,
    Singular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Breadth-first from X₀ while q^{nt} is small, otherwise meet-in-the-middle, with
    /// the constructive route once q^{nt} exceeds the frontier cap.
    Auto,
    Bfs,
    Bidirectional,
    Constructive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtendConfig {
    pub frontier_cap: usize,
    pub mitm_threshold: usize,
    pub strategy: Strategy,
}

impl Default for ExtendConfig {
    fn default() -> Self {
        ExtendConfig { frontier_cap: 10_000_000, mitm_threshold: 100_000, strategy: Strategy::Auto }
    }
}

#[derive(Clone, Debug)]
pub struct Extension {
    pub program: WordProgram,
    pub matrix: Mat,
    pub length: BigUint,
    /// q^{nt}
    pub bound: BigUint,
    pub states: usize,
    pub strategy: Strategy,
    /// t ≤ (n-2)/5 in singular mode; always true in linear mode
    pub guaranteed: bool,
}

impl Extension {
    pub fn within_bound(&self) -> bool {
        self.length <= self.bound
    }
}

/// q^{nt} over the entry field.
pub fn vertex_bound(q: u32, n: usize, t: usize) -> BigUint {
    BigUint::from(q).pow((n * t) as u32)
}

pub fn singular_guarantee(n: usize, t: usize) -> bool {
    5 * t + 2 <= n
}

/// Extends embeddings for one group and generating set, reusing constructive state
/// across queries.
pub struct Extender<'a> {
    group: &'a GroupSpec,
    gs: &'a GenSet,
    cfg: ExtendConfig,
    solver: Option<WordSolver>,
}

impl<'a> Extender<'a> {
    pub fn new(group: &'a GroupSpec, gs: &'a GenSet, cfg: ExtendConfig) -> Extender<'a> {
        Extender { group, gs, cfg, solver: None }
    }

    pub fn config(&self) -> &ExtendConfig {
        &self.cfg
    }

    fn constructive_available(&self) -> bool {
        WordSolver::new(self.group, self.gs).is_ok()
    }

    pub fn extend(&mut self, x: &Embedding, mode: Mode) -> Result<Extension> {
        self.extend_seeded(x, mode, None)
    }

    /// As [`Extender::extend`]; on the constructive route the seed randomises the
    /// extending element off the domain. Searches ignore it.
    pub fn extend_seeded(&mut self, x: &Embedding, mode: Mode, seed: Option<u64>) -> Result<Extension> {
        let space = self.group.space();
        x.check(space, mode)?;
        let (n, t) = (self.group.n, x.t());
        if mode == Mode::Linear && self.group.family == Family::SL && t >= n {
            return Err(Error::Precondition(format!("linear extension needs t < n, got t = {t}")));
        }
        let bound = vertex_bound(self.group.field().q(), n, t);
        let guaranteed = mode == Mode::Linear || singular_guarantee(n, t);
        let cap = BigUint::from(self.cfg.frontier_cap);
        let strategy = match self.cfg.strategy {
            Strategy::Auto => {
                if bound <= BigUint::from(self.cfg.mitm_threshold) {
                    Strategy::Bfs
                } else if bound > cap && self.constructive_available() {
                    Strategy::Constructive
                } else {
                    Strategy::Bidirectional
                }
            }
            s => s,
        };
        let id = Mat::identity(self.group.field(), n);
        if x.domain == x.images {
            return Ok(Extension {
                program: WordProgram::new(&self.gs.id),
                matrix: id,
                length: BigUint::from(0u32),
                bound,
                states: 1,
                strategy,
                guaranteed,
            });
        }
        let (program, states) = match strategy {
            Strategy::Constructive => (self.constructive(x, seed)?, 0),
            Strategy::Bidirectional => {
                let (w, s) = bidirectional(self.gs, x, self.cfg.frontier_cap)?;
                (WordProgram::from_word(&w), s)
            }
            _ => {
                let (w, s) = schreier_bfs(self.gs, x, self.cfg.frontier_cap)?;
                (WordProgram::from_word(&w), s)
            }
        };
        let matrix = self.gs.eval_program(&program)?;
        if !x.extended_by(&matrix) {
            return Err(Error::Verification { stage: "extend".into(), detail: "word does not replay to X".into() });
        }
        if mode == Mode::Singular && !self.group.contains(&matrix) {
            return Err(Error::Verification { stage: "extend".into(), detail: "word leaves the group".into() });
        }
        Ok(Extension { length: program.length(), program, matrix, bound, states, strategy, guaranteed })
    }

    fn constructive(&mut self, x: &Embedding, seed: Option<u64>) -> Result<WordProgram> {
        if self.solver.is_none() {
            self.solver = Some(WordSolver::new(self.group, self.gs)?);
        }
        let special = self.group.family != Family::Sp;
        let g = self
            .group
            .space()
            .extend_isometry(&x.domain, &x.images, ExtendOpts { seed, special })?;
        let solver = self.solver.as_mut().unwrap();
        let node = solver.solve(&g)?;
        let mut p = solver.program().clone();
        p.set_root(node);
        Ok(p)
    }
}

/// Extension with the default configuration.
pub fn schreier_extend(group: &GroupSpec, gs: &GenSet, x: &Embedding, mode: Mode) -> Result<Extension> {
    Extender::new(group, gs, ExtendConfig::default()).extend(x, mode)
}

type State = Box<[Fe]>;

fn pack(vs: &[Vector]) -> State {
    vs.iter().flatten().copied().collect()
}

fn act(m: &Mat, s: &[Fe], n: usize) -> State {
    s.chunks(n).flat_map(|v| m.apply(v)).collect()
}

/// Search tree over embedding states: parent index and the letter applied on the left.
struct Tree {
    states: Vec<State>,
    parent: Vec<(u32, u32)>,
    index: HashMap<State, u32>,
}

impl Tree {
    fn new(root: State) -> Tree {
        let mut index = HashMap::new();
        index.insert(root.clone(), 0);
        Tree { states: vec![root], parent: vec![(u32::MAX, 0)], index }
    }

    fn push(&mut self, s: State, parent: u32, letter: u32) -> Option<u32> {
        if self.index.contains_key(&s) {
            return None;
        }
        let i = self.states.len() as u32;
        self.index.insert(s.clone(), i);
        self.states.push(s);
        self.parent.push((parent, letter));
        Some(i)
    }

    /// Letters from `i` back to the root, nearest first.
    fn path(&self, mut i: u32) -> Vec<u32> {
        let mut out = Vec::new();
        while self.parent[i as usize].0 != u32::MAX {
            let (p, l) = self.parent[i as usize];
            out.push(l);
            i = p;
        }
        out
    }
}

/// Plain breadth-first search from X₀ = id|_W; returns a word g with g|_W = X.
pub fn schreier_bfs(gs: &GenSet, x: &Embedding, cap: usize) -> Result<(Word, usize)> {
    let n = gs.n();
    let target = pack(&x.images);
    let alphabet = gs.alphabet();
    let mut tree = Tree::new(pack(&x.domain));
    if tree.states[0] == target {
        return Ok((Word::empty(&gs.id), 1));
    }
    let mut queue = VecDeque::from([0u32]);
    while let Some(i) = queue.pop_front() {
        for (li, (_, m)) in alphabet.iter().enumerate() {
            let s = act(m, &tree.states[i as usize], n);
            let hit = s == target;
            if let Some(j) = tree.push(s, i, li as u32) {
                if hit {
                    // path lists the last-applied letter first, which is the leftmost factor
                    let letters = tree.path(j).into_iter().map(|l| alphabet[l as usize].0).collect();
                    return Ok((Word::new(&gs.id, letters), tree.states.len()));
                }
                if tree.states.len() > cap {
                    return Err(Error::FrontierCap(cap));
                }
                queue.push_back(j);
            }
        }
    }
    Err(Error::OrbitExhausted(tree.states.len()))
}

/// Meet-in-the-middle: a forward tree from X₀ under letters and a backward tree from X
/// under inverse letters, expanded level by level on the smaller frontier.
pub fn bidirectional(gs: &GenSet, x: &Embedding, cap: usize) -> Result<(Word, usize)> {
    let n = gs.n();
    let alphabet = gs.alphabet();
    let inverses: Vec<Mat> = alphabet.iter().map(|(l, _)| gs.letter_matrix(l.inverse()).clone()).collect();
    let mut fwd = Tree::new(pack(&x.domain));
    let mut bwd = Tree::new(pack(&x.images));
    if fwd.states[0] == bwd.states[0] {
        return Ok((Word::empty(&gs.id), 1));
    }
    let mut ff = vec![0u32];
    let mut bf = vec![0u32];
    let join = |fwd: &Tree, bwd: &Tree, fi: u32, bi: u32| -> Word {
        // X = m_1..m_j u and u = l_k..l_1 X₀
        let mut letters: Vec<Letter> = bwd.path(bi).into_iter().rev().map(|l| alphabet[l as usize].0).collect();
        letters.extend(fwd.path(fi).into_iter().map(|l| alphabet[l as usize].0));
        Word::new(&gs.id, letters)
    };
    loop {
        if ff.is_empty() || bf.is_empty() {
            return Err(Error::OrbitExhausted(fwd.states.len() + bwd.states.len()));
        }
        let forward = ff.len() <= bf.len();
        let (tree, other, frontier, mats): (&mut Tree, &Tree, &mut Vec<u32>, Vec<&Mat>) = if forward {
            (&mut fwd, &bwd, &mut ff, alphabet.iter().map(|(_, m)| m).collect())
        } else {
            (&mut bwd, &fwd, &mut bf, inverses.iter().collect())
        };
        let mut next = Vec::new();
        for &i in frontier.iter() {
            for (li, m) in mats.iter().enumerate() {
                let s = act(m, &tree.states[i as usize], n);
                let meet = other.index.get(&s).copied();
                if let Some(j) = tree.push(s, i, li as u32) {
                    if let Some(o) = meet {
                        let total = tree.states.len() + other.states.len();
                        let w = if forward { join(tree, other, j, o) } else { join(other, tree, o, j) };
                        return Ok((w, total));
                    }
                    next.push(j);
                }
            }
            if tree.states.len() + other.states.len() > cap {
                return Err(Error::FrontierCap(cap));
            }
        }
        *frontier = next;
    }
}

/// An element of G′ restricting to X on W, built as a commutator.
#[derive(Clone, Debug)]
pub struct GprimeWitness {
    pub g: Mat,
    pub a: Mat,
    pub b: Mat,
    pub w_prime: Vec<Vector>,
}

/// W′ totally singular, perpendicular to W + X(W) and meeting it trivially; A maps
/// W onto W′, B maps W ⊕ W′ onto X(W) ⊕ W′ fixing W′, and g = B A⁻¹ B⁻¹ A.
pub fn gprime_witness(space: &FormedSpace, x: &Embedding) -> Result<GprimeWitness> {
    if space.kind() == FormKind::Linear {
        return Err(Error::NoForm);
    }
    x.check(space, Mode::Singular)?;
    let (f, n, t) = (space.field(), space.n(), x.t());
    if !singular_guarantee(n, t) {
        return Err(Error::Precondition(format!("t = {t} exceeds (n-2)/5 for n = {n}")));
    }
    let u: Vec<Vector> = x.domain.iter().chain(&x.images).cloned().collect();
    let mut span = Subspace::span(f, n, &u);
    let mut w_prime: Vec<Vector> = Vec::new();
    for _ in 0..t {
        let perp: Vec<Vector> = u.iter().chain(&w_prime).cloned().collect();
        let within = space.perp_of(&perp)?;
        let v = search_span(f, n, within.basis(), None, |v| space.is_singular(v) && !span.contains(v))
            .ok_or_else(|| Error::Internal("no singular vector for W′".into()))?;
        span = span.add_vectors(std::slice::from_ref(&v));
        w_prime.push(v);
    }
    let opts = ExtendOpts::default();
    let a = space.extend_isometry(&x.domain, &w_prime, opts)?;
    let dom: Vec<Vector> = x.domain.iter().chain(&w_prime).cloned().collect();
    let img: Vec<Vector> = x.images.iter().chain(&w_prime).cloned().collect();
    let b = space.extend_isometry(&dom, &img, opts)?;
    let ai = a.inverse()?;
    let g = b.mul(&ai).mul(&b.inverse()?).mul(&a);
    if !x.extended_by(&g) {
        return Err(Error::Internal("commutator does not restrict to X".into()));
    }
    Ok(GprimeWitness { g, a, b, w_prime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::Field;
    use crate::group::{preset, standard_gens};
    use crate::matfq::unit_vec;

    fn f(p: u32) -> Field {
        Field::new(p, 1, None).unwrap()
    }

    fn v(field: &Field, xs: &[u16]) -> Vector {
        let _ = field;
        xs.iter().map(|&x| Fe(x)).collect()
    }

    fn sl2_involutions() -> (GroupSpec, GenSet) {
        let fl = f(2);
        let g = GroupSpec::standard(Family::SL, 2, &fl).unwrap();
        let gs = GenSet::new(
            "inv",
            vec![Mat::from_ints(&fl, &[vec![1, 1], vec![0, 1]]), Mat::from_ints(&fl, &[vec![0, 1], vec![1, 0]])],
        )
        .unwrap();
        (g, gs)
    }

    #[test]
    fn identity_gives_empty_word() {
        let (g, gs) = sl2_involutions();
        let x = Embedding::identity(vec![unit_vec(2, 0)]);
        let e = schreier_extend(&g, &gs, &x, Mode::Linear).unwrap();
        assert_eq!(e.length, BigUint::from(0u32));
    }

    #[test]
    fn sl2_swap_e1() {
        let (g, gs) = sl2_involutions();
        let fl = g.field().clone();
        let x = Embedding::new(vec![unit_vec(2, 0)], vec![unit_vec(2, 1)]).unwrap();
        let e = schreier_extend(&g, &gs, &x, Mode::Linear).unwrap();
        assert!(e.length <= BigUint::from(4u32));
        assert_eq!(e.length, BigUint::from(1u32));
        assert_eq!(e.matrix.apply(&v(&fl, &[1, 0])), v(&fl, &[0, 1]));
    }

    #[test]
    fn bfs_and_mitm_agree_on_reachability() {
        let fl = f(3);
        let g = GroupSpec::standard(Family::SL, 3, &fl).unwrap();
        let gs = standard_gens(&g).unwrap();
        let dom = vec![unit_vec(3, 0), unit_vec(3, 1)];
        for seed in 0..6 {
            let r = g.space().random_isometry(seed, true).unwrap();
            let x = Embedding::new(dom.clone(), dom.iter().map(|w| r.apply(w)).collect()).unwrap();
            let (w1, _) = schreier_bfs(&gs, &x, 1 << 20).unwrap();
            let (w2, _) = bidirectional(&gs, &x, 1 << 20).unwrap();
            assert!(x.extended_by(&gs.eval(&w1).unwrap()));
            assert!(x.extended_by(&gs.eval(&w2).unwrap()));
            // both are shortest in the Schreier graph
            assert_eq!(w1.len(), w2.len());
        }
    }

    #[test]
    fn sp2_singular_mode() {
        let fl = f(3);
        let g = GroupSpec::standard(Family::Sp, 2, &fl).unwrap();
        let gs = standard_gens(&g).unwrap();
        let x = Embedding::new(vec![unit_vec(2, 0)], vec![v(&fl, &[1, 1])]).unwrap();
        let e = schreier_extend(&g, &gs, &x, Mode::Singular).unwrap();
        assert!(g.space().is_isometry(&e.matrix));
        assert!(e.within_bound());
        assert!(!e.guaranteed);
    }

    #[test]
    fn exhausted_orbit_reports() {
        // a generating set for a subgroup fixing e_1
        let fl = f(2);
        let g = GroupSpec::standard(Family::SL, 2, &fl).unwrap();
        let gs = GenSet::new("b", vec![Mat::from_ints(&fl, &[vec![1, 1], vec![0, 1]])]).unwrap();
        let x = Embedding::new(vec![unit_vec(2, 0)], vec![unit_vec(2, 1)]).unwrap();
        assert!(matches!(schreier_extend(&g, &gs, &x, Mode::Linear), Err(Error::OrbitExhausted(_))));
        let cfg = ExtendConfig { strategy: Strategy::Bidirectional, ..Default::default() };
        assert!(matches!(Extender::new(&g, &gs, cfg).extend(&x, Mode::Linear), Err(Error::OrbitExhausted(_))));
    }

    #[test]
    fn singular_mode_checks_domain() {
        let fl = f(3);
        let g = GroupSpec::standard(Family::Sp, 4, &fl).unwrap();
        let gs = standard_gens(&g).unwrap();
        let x = Embedding::identity(vec![unit_vec(4, 0), unit_vec(4, 2)]);
        assert!(matches!(schreier_extend(&g, &gs, &x, Mode::Singular), Err(Error::Precondition(_))));
    }

    #[test]
    fn constructive_route_replays() {
        let fl = f(2);
        for (fam, n, t) in [(Family::SL, 12, 5), (Family::Sp, 12, 3)] {
            let g = GroupSpec::standard(fam, n, &fl).unwrap();
            let gs = standard_gens(&g).unwrap();
            let r = g.space().random_isometry(3, true).unwrap();
            let dom: Vec<Vector> = if fam == Family::Sp {
                g.space().max_totally_singular().unwrap().basis()[..t].to_vec()
            } else {
                (0..t).map(|i| unit_vec(n, i)).collect()
            };
            let x = Embedding::new(dom.clone(), dom.iter().map(|w| r.apply(w)).collect()).unwrap();
            let mode = if fam == Family::Sp { Mode::Singular } else { Mode::Linear };
            let e = schreier_extend(&g, &gs, &x, mode).unwrap();
            assert_eq!(e.strategy, Strategy::Constructive);
            assert!(x.extended_by(&e.matrix) && g.contains(&e.matrix));
            assert!(e.within_bound());
        }
    }

    #[test]
    fn random_presets_extend() {
        let fl = f(2);
        let g = GroupSpec::standard(Family::SL, 3, &fl).unwrap();
        let gs = preset(&g, "random-2", 7).unwrap();
        let x = Embedding::new(vec![unit_vec(3, 0)], vec![v(&fl, &[1, 1, 1])]).unwrap();
        match schreier_extend(&g, &gs, &x, Mode::Linear) {
            Ok(e) => assert!(x.extended_by(&e.matrix)),
            Err(e) => assert!(matches!(e, Error::OrbitExhausted(_))),
        }
    }

    #[test]
    fn witness_in_symplectic_8() {
        let fl = f(3);
        let sp = FormedSpace::symplectic(&fl, 8).unwrap();
        let r = sp.random_isometry(11, false).unwrap();
        let w = vec![unit_vec(8, 0)];
        let x = Embedding::new(w.clone(), vec![r.apply(&w[0])]).unwrap();
        let wit = gprime_witness(&sp, &x).unwrap();
        assert!(x.extended_by(&wit.g));
        assert!(sp.is_isometry(&wit.g) && sp.is_isometry(&wit.a) && sp.is_isometry(&wit.b));
        let comm = wit.b.mul(&wit.a.inverse().unwrap()).mul(&wit.b.inverse().unwrap()).mul(&wit.a);
        assert_eq!(comm, wit.g);
        let id = gprime_witness(&sp, &Embedding::identity(w.clone())).unwrap();
        assert!(Embedding::identity(w).extended_by(&id.g));
        let two = Embedding::identity(vec![unit_vec(8, 0), unit_vec(8, 1)]);
        assert!(matches!(gprime_witness(&sp, &two), Err(Error::Precondition(_))));
    }
}
