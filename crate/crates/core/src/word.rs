//! Words in a generating set and straight-line programs over them.
//!
//! A [`Word`] is a flat list of letters. A [`WordProgram`] is a DAG whose nodes are
//! letter runs, concatenations, inverses and powers; its expanded length is exact but
//! it can be exponentially shorter to store, which matters once powers like A^l with
//! l near q^n appear.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matfq::Mat;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(from = "(u32, bool)", into = "(u32, bool)")]
pub struct Letter {
    pub gen: u32,
    pub inverted: bool,
}

impl Letter {
    pub fn new(gen: u32, inverted: bool) -> Letter {
        Letter { gen, inverted }
    }

    pub fn inverse(self) -> Letter {
        Letter { gen: self.gen, inverted: !self.inverted }
    }
}

impl From<(u32, bool)> for Letter {
    fn from((gen, inverted): (u32, bool)) -> Self {
        Letter { gen, inverted }
    }
}

impl From<Letter> for (u32, bool) {
    fn from(l: Letter) -> Self {
        (l.gen, l.inverted)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub genset: String,
    pub letters: Vec<Letter>,
}

impl Word {
    pub fn empty(genset: &str) -> Word {
        Word { genset: genset.to_string(), letters: Vec::new() }
    }

    pub fn new(genset: &str, letters: Vec<Letter>) -> Word {
        Word { genset: genset.to_string(), letters }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn concat(&self, o: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&o.letters);
        Word { genset: self.genset.clone(), letters }
    }

    pub fn inverse(&self) -> Word {
        Word { genset: self.genset.clone(), letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    pub fn eval(&self, gens: &[Mat]) -> Result<Mat> {
        eval_letters(&self.letters, gens, &mut InverseCache::default())
    }
}

/// Lazily computed generator inverses.
#[derive(Default)]
pub(crate) struct InverseCache(HashMap<u32, Mat>);

impl InverseCache {
    fn get(&mut self, gens: &[Mat], l: Letter) -> Result<Mat> {
        let g = gens.get(l.gen as usize).ok_or(Error::IndexOutOfRange { index: l.gen as usize, len: gens.len() })?;
        if !l.inverted {
            return Ok(g.clone());
        }
        if let Some(m) = self.0.get(&l.gen) {
            return Ok(m.clone());
        }
        let inv = g.inverse()?;
        self.0.insert(l.gen, inv.clone());
        Ok(inv)
    }
}

fn eval_letters(letters: &[Letter], gens: &[Mat], cache: &mut InverseCache) -> Result<Mat> {
    let first = gens.first().ok_or_else(|| Error::Precondition("empty generating set".into()))?;
    let mut acc = Mat::identity(first.field(), first.n());
    for &l in letters {
        let m = cache.get(gens, l)?;
        acc.check_same_field(&m)?;
        if m.n() != acc.n() {
            return Err(Error::Dimension("generators of different sizes".into()));
        }
        acc = acc.mul(&m);
    }
    Ok(acc)
}

/// Ordered product of the letters with inversion flags applied.
pub fn eval_word(w: &Word, gens: &[Mat]) -> Result<Mat> {
    w.eval(gens)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Letters(Vec<Letter>),
    Concat(Vec<usize>),
    Inverse(usize),
    Power(usize, #[serde(with = "crate::arith::decimal")] u128),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordProgram {
    pub genset: String,
    nodes: Vec<Node>,
    root: usize,
}

impl WordProgram {
    /// A program holding only the empty word.
    pub fn new(genset: &str) -> WordProgram {
        WordProgram { genset: genset.to_string(), nodes: vec![Node::Letters(Vec::new())], root: 0 }
    }

    pub fn from_word(w: &Word) -> WordProgram {
        let mut p = WordProgram::new(&w.genset);
        p.root = p.letters(w.letters.clone());
        p
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn set_root(&mut self, r: usize) {
        assert!(r < self.nodes.len());
        self.root = r;
    }

    /// Node index of the empty word.
    pub fn identity(&self) -> usize {
        0
    }

    fn push(&mut self, n: Node) -> usize {
        let len = self.nodes.len();
        match &n {
            Node::Concat(cs) => assert!(cs.iter().all(|&c| c < len)),
            Node::Inverse(c) | Node::Power(c, _) => assert!(*c < len),
            Node::Letters(_) => {}
        }
        self.nodes.push(n);
        len
    }

    pub fn letters(&mut self, ls: Vec<Letter>) -> usize {
        self.push(Node::Letters(ls))
    }

    pub fn letter(&mut self, l: Letter) -> usize {
        self.push(Node::Letters(vec![l]))
    }

    pub fn concat(&mut self, parts: &[usize]) -> usize {
        let parts: Vec<usize> = parts.iter().copied().filter(|&p| p != 0).collect();
        match parts.len() {
            0 => 0,
            1 => parts[0],
            _ => self.push(Node::Concat(parts)),
        }
    }

    pub fn inverse(&mut self, a: usize) -> usize {
        if a == 0 {
            return 0;
        }
        if let Node::Inverse(b) = self.nodes[a] {
            return b;
        }
        self.push(Node::Inverse(a))
    }

    pub fn power(&mut self, a: usize, e: u128) -> usize {
        match e {
            0 => 0,
            1 => a,
            _ if a == 0 => 0,
            _ => self.push(Node::Power(a, e)),
        }
    }

    /// a b a^-1 b^-1
    pub fn commutator(&mut self, a: usize, b: usize) -> usize {
        let ai = self.inverse(a);
        let bi = self.inverse(b);
        self.concat(&[a, b, ai, bi])
    }

    /// a b a^-1
    pub fn conjugate(&mut self, a: usize, b: usize) -> usize {
        let ai = self.inverse(a);
        self.concat(&[a, b, ai])
    }

    /// Appends another program's nodes and returns the index of its root.
    pub fn graft(&mut self, other: &WordProgram) -> usize {
        let off = self.nodes.len() - 1;
        let remap = |i: usize| if i == 0 { 0 } else { i + off };
        for n in other.nodes.iter().skip(1) {
            let m = match n {
                Node::Letters(ls) => Node::Letters(ls.clone()),
                Node::Concat(cs) => Node::Concat(cs.iter().map(|&c| remap(c)).collect()),
                Node::Inverse(c) => Node::Inverse(remap(*c)),
                Node::Power(c, e) => Node::Power(remap(*c), *e),
            };
            self.nodes.push(m);
        }
        remap(other.root)
    }

    /// Checks node ordering and letter indices.
    pub fn validate(&self, num_gens: usize) -> Result<()> {
        if !matches!(self.nodes.first(), Some(Node::Letters(ls)) if ls.is_empty()) {
            return Err(Error::Parse("program must start with the empty word node".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            let ok = match n {
                Node::Letters(ls) => {
                    if let Some(l) = ls.iter().find(|l| l.gen as usize >= num_gens) {
                        return Err(Error::IndexOutOfRange { index: l.gen as usize, len: num_gens });
                    }
                    true
                }
                Node::Concat(cs) => cs.iter().all(|&c| c < i),
                Node::Inverse(c) | Node::Power(c, _) => *c < i,
            };
            if !ok {
                return Err(Error::Parse(format!("node {i} refers forward")));
            }
        }
        if self.root >= self.nodes.len() {
            return Err(Error::Parse("root out of range".into()));
        }
        Ok(())
    }

    /// Expanded lengths of every node.
    pub fn lengths(&self) -> Vec<BigUint> {
        let mut out: Vec<BigUint> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let l = match n {
                Node::Letters(ls) => BigUint::from(ls.len()),
                Node::Concat(cs) => cs.iter().map(|&c| &out[c]).sum(),
                Node::Inverse(c) => out[*c].clone(),
                Node::Power(c, e) => &out[*c] * BigUint::from(*e),
            };
            out.push(l);
        }
        out
    }

    pub fn length_of(&self, node: usize) -> BigUint {
        self.lengths().swap_remove(node)
    }

    pub fn length(&self) -> BigUint {
        self.length_of(self.root)
    }

    /// Matrices of every node, by memoised evaluation.
    pub fn evaluate_all(&self, gens: &[Mat]) -> Result<Vec<Mat>> {
        self.validate(gens.len())?;
        let first = gens.first().ok_or_else(|| Error::Precondition("empty generating set".into()))?;
        let id = Mat::identity(first.field(), first.n());
        let mut cache = InverseCache::default();
        let mut out: Vec<Mat> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let m = match n {
                Node::Letters(ls) => eval_letters(ls, gens, &mut cache)?,
                Node::Concat(cs) => cs.iter().fold(id.clone(), |acc, &c| acc.mul(&out[c])),
                Node::Inverse(c) => out[*c].inverse()?,
                Node::Power(c, e) => out[*c].pow(*e),
            };
            out.push(m);
        }
        Ok(out)
    }

    /// Matrix of the root, evaluating only the nodes it depends on.
    pub fn evaluate(&self, gens: &[Mat]) -> Result<Mat> {
        self.evaluate_node(self.root, gens)
    }

    pub fn evaluate_node(&self, node: usize, gens: &[Mat]) -> Result<Mat> {
        self.validate(gens.len())?;
        if node >= self.nodes.len() {
            return Err(Error::Parse("node out of range".into()));
        }
        let mut live = vec![false; self.nodes.len()];
        live[node] = true;
        for i in (0..=node).rev() {
            if !live[i] {
                continue;
            }
            match &self.nodes[i] {
                Node::Concat(cs) => cs.iter().for_each(|&c| live[c] = true),
                Node::Inverse(c) | Node::Power(c, _) => live[*c] = true,
                Node::Letters(_) => {}
            }
        }
        let first = gens.first().ok_or_else(|| Error::Precondition("empty generating set".into()))?;
        let id = Mat::identity(first.field(), first.n());
        let mut cache = InverseCache::default();
        let mut out: Vec<Option<Mat>> = vec![None; node + 1];
        for i in 0..=node {
            if !live[i] {
                continue;
            }
            let get = |c: usize| out[c].as_ref().expect("dependency evaluated");
            let m = match &self.nodes[i] {
                Node::Letters(ls) => eval_letters(ls, gens, &mut cache)?,
                Node::Concat(cs) => cs.iter().fold(id.clone(), |acc, &c| acc.mul(get(c))),
                Node::Inverse(c) => get(*c).inverse()?,
                Node::Power(c, e) => get(*c).pow(*e),
            };
            out[i] = Some(m);
        }
        Ok(out.swap_remove(node).unwrap())
    }

    /// Expands a node into a flat word when its length is at most `cap`.
    pub fn flatten_node(&self, node: usize, cap: usize) -> Option<Word> {
        let len = self.length_of(node).to_usize()?;
        if len > cap {
            return None;
        }
        let mut letters = Vec::with_capacity(len);
        self.expand(node, false, &mut letters);
        Some(Word { genset: self.genset.clone(), letters })
    }

    pub fn flatten(&self, cap: usize) -> Option<Word> {
        self.flatten_node(self.root, cap)
    }

    fn expand(&self, node: usize, inv: bool, out: &mut Vec<Letter>) {
        match &self.nodes[node] {
            Node::Letters(ls) => {
                if inv {
                    out.extend(ls.iter().rev().map(|l| l.inverse()));
                } else {
                    out.extend_from_slice(ls);
                }
            }
            Node::Concat(cs) => {
                if inv {
                    for &c in cs.iter().rev() {
                        self.expand(c, true, out);
                    }
                } else {
                    for &c in cs {
                        self.expand(c, false, out);
                    }
                }
            }
            Node::Inverse(c) => self.expand(*c, !inv, out),
            Node::Power(c, e) => {
                for _ in 0..*e {
                    self.expand(*c, inv, out);
                }
            }
        }
    }

    pub fn is_empty_word(&self) -> bool {
        self.length().is_zero()
    }

    pub fn length_is_one(&self) -> bool {
        self.length().is_one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::Field;

    fn gens() -> Vec<Mat> {
        let f = Field::prime(3).unwrap();
        vec![Mat::from_ints(&f, &[vec![1, 1], vec![0, 1]]), Mat::from_ints(&f, &[vec![0, 1], vec![2, 0]])]
    }

    #[test]
    fn word_eval_basics() {
        let g = gens();
        let id = Mat::identity(g[0].field(), 2);
        assert_eq!(Word::empty("s").eval(&g).unwrap(), id);
        let w = Word::new("s", vec![Letter::new(0, false), Letter::new(0, true)]);
        assert_eq!(w.eval(&g).unwrap(), id);
        let w = Word::new("s", vec![Letter::new(0, false), Letter::new(1, false)]);
        assert_eq!(w.eval(&g).unwrap(), g[0].mul(&g[1]));
        let bad = Word::new("s", vec![Letter::new(5, false)]);
        assert!(matches!(bad.eval(&g), Err(Error::IndexOutOfRange { index: 5, len: 2 })));
        let w2 = Word::new("s", vec![Letter::new(1, true), Letter::new(0, false)]);
        assert_eq!(w.concat(&w2).eval(&g).unwrap(), w.eval(&g).unwrap().mul(&w2.eval(&g).unwrap()));
        assert!(w.concat(&w.inverse()).eval(&g).unwrap().is_identity());
    }

    #[test]
    fn word_json_shape() {
        let w = Word::new("std", vec![Letter::new(0, false), Letter::new(1, true)]);
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, r#"{"genset":"std","letters":[[0,false],[1,true]]}"#);
        assert_eq!(serde_json::from_str::<Word>(&s).unwrap(), w);
    }

    #[test]
    fn program_matches_flat_word() {
        let g = gens();
        let mut p = WordProgram::new("s");
        let a = p.letters(vec![Letter::new(0, false), Letter::new(1, false)]);
        let b = p.letter(Letter::new(1, true));
        let c = p.commutator(a, b);
        let d = p.power(c, 5);
        let e = p.inverse(d);
        let r = p.concat(&[e, a]);
        p.set_root(r);
        let flat = p.flatten(1000).unwrap();
        assert_eq!(BigUint::from(flat.len()), p.length());
        assert_eq!(flat.eval(&g).unwrap(), p.evaluate(&g).unwrap());
        assert_eq!(p.length(), BigUint::from(5u32 * 6 + 2));
        assert!(p.flatten(10).is_none());
        let s = serde_json::to_string(&p).unwrap();
        let back: WordProgram = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn graft_preserves_meaning() {
        let g = gens();
        let mut p = WordProgram::new("s");
        let a = p.letter(Letter::new(0, false));
        let sq = p.power(a, 2);
        p.set_root(sq);
        let mut q = WordProgram::new("s");
        let b = q.letter(Letter::new(1, false));
        let r = q.graft(&p);
        let root = q.concat(&[b, r]);
        q.set_root(root);
        assert_eq!(q.evaluate(&g).unwrap(), g[1].mul(&g[0]).mul(&g[0]));
    }

    #[test]
    fn validation_rejects_bad_programs() {
        let s = r#"{"genset":"s","nodes":[{"letters":[]},{"inverse":2},{"letters":[[0,false]]}],"root":1}"#;
        let p: WordProgram = serde_json::from_str(s).unwrap();
        assert!(p.validate(2).is_err());
        let s = r#"{"genset":"s","nodes":[{"letters":[]},{"letters":[[3,false]]}],"root":1}"#;
        let p: WordProgram = serde_json::from_str(s).unwrap();
        assert!(p.evaluate(&gens()).is_err());
    }
}
