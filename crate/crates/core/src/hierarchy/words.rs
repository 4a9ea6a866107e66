//! Measurement-operator words and integer operator polynomials.
//!
//! Bob's projectors are written over a reduced alphabet: the last outcome of
//! every input is eliminated through `M(y, nb−1) = I − Σ_{b<nb−1} M(y, b)`, so
//! the only relations left are idempotence and orthogonality.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scenario::BellScenario;

/// Quantum (noncommuting) or classical (commuting) measurement operators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Quantum,
    Classical,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Quantum => "quantum",
            Variant::Classical => "classical",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quantum" => Ok(Variant::Quantum),
            "classical" => Ok(Variant::Classical),
            _ => Err(format!("unknown variant {s:?}")),
        }
    }
}

/// The projector `M(y, b)` with `b < nb − 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub y: u8,
    pub b: u8,
}

impl Letter {
    pub fn new(y: usize, b: usize) -> Self {
        Letter {
            y: y as u8,
            b: b as u8,
        }
    }
}

/// A reduced product of projectors, read left to right as an operator product.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(pub Vec<Letter>);

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("e");
        }
        let parts: Vec<String> = self.0.iter().map(|l| format!("{}{}", l.y, l.b)).collect();
        f.write_str(&parts.join("."))
    }
}

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn letter(y: usize, b: usize) -> Self {
        Word(vec![Letter::new(y, b)])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The adjoint, which for a product of projectors is the reversed word.
    pub fn adjoint(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    /// Applies idempotence and orthogonality; `None` is the zero operator.
    pub fn reduce(letters: impl IntoIterator<Item = Letter>) -> Option<Word> {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            match out.last() {
                Some(top) if top.y == l.y && top.b == l.b => {}
                Some(top) if top.y == l.y => return None,
                _ => out.push(l),
            }
        }
        Some(Word(out))
    }

    /// `self · other`, reduced.
    pub fn times(&self, other: &Word) -> Option<Word> {
        Word::reduce(self.0.iter().chain(other.0.iter()).copied())
    }

    /// Representative of the moment `tr(ψ w)` under the variant's identifications.
    ///
    /// Moments are real, so a word and its adjoint share a value. Classical
    /// words additionally commute, which leaves only the set of letters.
    pub fn canonical(&self, variant: Variant) -> Option<Word> {
        match variant {
            Variant::Quantum => {
                let r = self.adjoint();
                Some(if r < *self { r } else { self.clone() })
            }
            Variant::Classical => {
                let mut v = self.0.clone();
                v.sort();
                v.dedup();
                if v.windows(2).any(|p| p[0].y == p[1].y) {
                    return None;
                }
                Some(Word(v))
            }
        }
    }

    /// All reduced nonzero words of length at most `max_len`, shortest first.
    pub fn enumerate(s: &BellScenario, max_len: usize) -> Vec<Word> {
        let letters: Vec<Letter> = (0..s.ny)
            .flat_map(|y| (0..s.nb - 1).map(move |b| Letter::new(y, b)))
            .collect();
        let mut out = vec![Word::identity()];
        let mut frontier = vec![Word::identity()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for &l in &letters {
                    if w.0.last().is_some_and(|t| t.y == l.y) {
                        continue;
                    }
                    let mut v = w.0.clone();
                    v.push(l);
                    next.push(Word(v));
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }
}

/// A noncommutative polynomial with integer coefficients over reduced words.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Polynomial(pub BTreeMap<Word, i64>);

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial(BTreeMap::new())
    }

    pub fn one() -> Self {
        Polynomial::from_word(Word::identity(), 1)
    }

    pub fn from_word(w: Word, c: i64) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(w, c);
        p
    }

    /// `M(y, b)` for any outcome, expanding the eliminated last outcome.
    pub fn projector(s: &BellScenario, y: usize, b: usize) -> Self {
        if b + 1 < s.nb {
            return Polynomial::from_word(Word::letter(y, b), 1);
        }
        let mut p = Polynomial::one();
        for bb in 0..s.nb - 1 {
            p.add_term(Word::letter(y, bb), -1);
        }
        p
    }

    pub fn add_term(&mut self, w: Word, c: i64) {
        if c == 0 {
            return;
        }
        match self.0.entry(w) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (w, c) in &other.0 {
            out.add_term(w.clone(), *c);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (u, cu) in &self.0 {
            for (v, cv) in &other.0 {
                if let Some(w) = u.times(v) {
                    out.add_term(w, cu * cv);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Polynomial {
        Polynomial(self.0.iter().map(|(w, c)| (w.adjoint(), *c)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.keys().map(Word::len).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, i64)> {
        self.0.iter().map(|(w, c)| (w, *c))
    }
}
