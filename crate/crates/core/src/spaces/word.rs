// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Reduced words in the free group `F_d`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// A generator or inverse generator. Generator `i` has code `2i`, its inverse
/// `2i + 1`, so inversion flips the low bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter(pub u16);

impl Letter {
    #[inline]
    pub fn generator(i: usize) -> Letter {
        Letter((2 * i) as u16)
    }

    #[inline]
    pub fn inverse(self) -> Letter {
        Letter(self.0 ^ 1)
    }

    /// Index of the underlying generator.
    #[inline]
    pub fn index(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn is_inverse(self) -> bool {
        self.0 & 1 == 1
    }

    /// Every letter of `F_rank`, generators and inverses interleaved.
    pub fn all(rank: usize) -> impl Iterator<Item = Letter> {
        (0..2 * rank as u16).map(Letter)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = self.index();
        if i < 26 {
            let base = if self.is_inverse() { b'A' } else { b'a' };
            write!(f, "{}", (base + i as u8) as char)
        } else if self.is_inverse() {
            write!(f, "[{}']", i)
        } else {
            write!(f, "[{}]", i)
        }
    }
}

/// A freely reduced word. The empty word is the identity and, read as a
/// vertex of the Cayley tree, the basepoint.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupWord {
    letters: Vec<Letter>,
}

impl GroupWord {
    pub fn identity() -> GroupWord {
        GroupWord { letters: Vec::new() }
    }

    pub fn letter(l: Letter) -> GroupWord {
        GroupWord { letters: vec![l] }
    }

    pub fn generator(i: usize) -> GroupWord {
        GroupWord::letter(Letter::generator(i))
    }

    /// Freely reduces an arbitrary letter sequence.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> GroupWord {
        let mut w = GroupWord::identity();
        for l in letters {
            w.push(l);
        }
        w
    }

    /// Parses `a`..`z` (generators), `A`..`Z` (inverses), `[k]` and `[k']`
    /// for generators past the alphabet, and `1` or the empty string for the
    /// identity. Whitespace is ignored.
    pub fn parse(s: &str) -> Result<GroupWord> {
        let mut out = Vec::new();
        let mut chars = s.chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                c if c.is_whitespace() => {}
                '1' if out.is_empty() && chars.peek().is_none() => {}
                'a'..='z' => out.push(Letter::generator(c as usize - 'a' as usize)),
                'A'..='Z' => out.push(Letter::generator(c as usize - 'A' as usize).inverse()),
                '[' => {
                    let mut digits = String::new();
                    let mut inverse = false;
                    loop {
                        match chars.next() {
                            Some(']') => break,
                            Some('\'') => inverse = true,
                            Some(d) if d.is_ascii_digit() && !inverse => digits.push(d),
                            _ => return Err(Error::Input(format!("malformed letter in word {s:?}"))),
                        }
                    }
                    let i: usize = digits
                        .parse()
                        .map_err(|_| Error::Input(format!("malformed letter index in word {s:?}")))?;
                    if i >= u16::MAX as usize / 2 {
                        return Err(Error::Input(format!("generator index {i} too large")));
                    }
                    let l = Letter::generator(i);
                    out.push(if inverse { l.inverse() } else { l });
                }
                _ => return Err(Error::Input(format!("unexpected character {c:?} in word {s:?}"))),
            }
        }
        Ok(GroupWord::from_letters(out))
    }

    #[inline]
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn first(&self) -> Option<Letter> {
        self.letters.first().copied()
    }

    pub fn last(&self) -> Option<Letter> {
        self.letters.last().copied()
    }

    /// Largest generator index used, plus one.
    pub fn rank_hint(&self) -> usize {
        self.letters.iter().map(|l| l.index() + 1).max().unwrap_or(0)
    }

    /// Right multiplication by one letter, in place.
    #[inline]
    pub fn push(&mut self, l: Letter) {
        if self.letters.last() == Some(&l.inverse()) {
            self.letters.pop();
        } else {
            self.letters.push(l);
        }
    }

    /// Right multiplication by a reduced word, in place.
    pub fn mul_assign(&mut self, v: &GroupWord) {
        let c = cancellation(&self.letters, &v.letters);
        self.letters.truncate(self.letters.len() - c);
        self.letters.extend_from_slice(&v.letters[c..]);
    }

    pub fn concat(&self, v: &GroupWord) -> GroupWord {
        let c = cancellation(&self.letters, &v.letters);
        let mut letters = Vec::with_capacity(self.len() + v.len() - 2 * c);
        letters.extend_from_slice(&self.letters[..self.len() - c]);
        letters.extend_from_slice(&v.letters[c..]);
        GroupWord { letters }
    }

    pub fn inverse(&self) -> GroupWord {
        GroupWord { letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    /// Length of the longest common prefix.
    #[inline]
    pub fn common_prefix_len(&self, other: &GroupWord) -> usize {
        common_prefix(&self.letters, &other.letters)
    }

    /// `g = h c h⁻¹` with `c` cyclically reduced; returns `(h, c)`.
    pub fn cyclic_decomposition(&self) -> (GroupWord, GroupWord) {
        let n = self.letters.len();
        let mut k = 0;
        while 2 * k + 1 < n && self.letters[n - 1 - k] == self.letters[k].inverse() {
            k += 1;
        }
        let h = GroupWord { letters: self.letters[..k].to_vec() };
        let c = GroupWord { letters: self.letters[k..n - k].to_vec() };
        (h, c)
    }
}

#[inline]
fn cancellation(u: &[Letter], v: &[Letter]) -> usize {
    let m = u.len().min(v.len());
    let mut c = 0;
    while c < m && u[u.len() - 1 - c] == v[c].inverse() {
        c += 1;
    }
    c
}

#[inline]
fn common_prefix(u: &[Letter], v: &[Letter]) -> usize {
    u.iter().zip(v.iter()).take_while(|(a, b)| a == b).count()
}

/// Free reduction of the concatenation `uv`.
pub fn concat_reduce(u: &GroupWord, v: &GroupWord) -> GroupWord {
    u.concat(v)
}

pub fn invert_word(w: &GroupWord) -> GroupWord {
    w.inverse()
}

/// Word metric `|u⁻¹v|`, computed through the common prefix.
#[inline]
pub fn tree_dist(u: &GroupWord, v: &GroupWord) -> usize {
    u.len() + v.len() - 2 * u.common_prefix_len(v)
}

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for l in &self.letters {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for GroupWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GroupWord::parse(s)
    }
}

impl Serialize for GroupWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroupWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        GroupWord::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl super::Group for GroupWord {
    type Key = GroupWord;

    fn identity() -> Self {
        GroupWord::identity()
    }

    fn compose(&self, other: &Self) -> Self {
        self.concat(other)
    }

    fn inverse(&self) -> Self {
        GroupWord::inverse(self)
    }

    fn key(&self) -> GroupWord {
        self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> GroupWord {
        GroupWord::parse(s).unwrap()
    }

    /// Independent oracle: repeatedly scan for an adjacent cancelling pair.
    fn naive_reduce(mut letters: Vec<Letter>) -> Vec<Letter> {
        loop {
            let pos = letters.windows(2).position(|p| p[1] == p[0].inverse());
            match pos {
                Some(i) => {
                    letters.drain(i..i + 2);
                }
                None => return letters,
            }
        }
    }

    fn arb_word(rank: u16, max_len: usize) -> impl Strategy<Value = GroupWord> {
        prop::collection::vec(0..2 * rank, 0..max_len)
            .prop_map(|v| GroupWord::from_letters(v.into_iter().map(Letter)))
    }

    #[test]
    fn letter_pairing() {
        for l in Letter::all(5) {
            assert_eq!(l.inverse().inverse(), l);
            assert_ne!(l.inverse(), l);
        }
    }

    #[test]
    fn small_products() {
        assert!(concat_reduce(&w("a"), &w("A")).is_identity());
        assert_eq!(concat_reduce(&w("ab"), &w("Bc")), w("ac"));
        assert_eq!(invert_word(&w("ab")), w("BA"));
        assert!(invert_word(&GroupWord::identity()).is_identity());
    }

    #[test]
    fn distances() {
        assert_eq!(tree_dist(&GroupWord::identity(), &w("ab")), 2);
        assert_eq!(tree_dist(&w("a"), &w("b")), 2);
        assert_eq!(tree_dist(&w("aab"), &w("aab")), 0);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["1", "a", "aBc", "zZ", "[30][31']a"] {
            let word = w(s);
            assert_eq!(w(&word.to_string()), word);
        }
        assert_eq!(w("aA"), GroupWord::identity());
        assert_eq!(w(""), GroupWord::identity());
        assert_eq!(w("[30]").letters()[0], Letter::generator(30));
        assert!(GroupWord::parse("a?").is_err());
        assert!(GroupWord::parse("[3").is_err());
    }

    #[test]
    fn cyclic_decomposition_splits_conjugate() {
        let (h, c) = w("abcBA").cyclic_decomposition();
        assert_eq!(h, w("ab"));
        assert_eq!(c, w("c"));
        let (h, c) = w("abab").cyclic_decomposition();
        assert!(h.is_identity());
        assert_eq!(c, w("abab"));
    }

    #[test]
    fn random_pairs_match_naive_reduction() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let lu: Vec<Letter> = (0..rng.gen_range(0..12)).map(|_| Letter(rng.gen_range(0..6))).collect();
            let lv: Vec<Letter> = (0..rng.gen_range(0..12)).map(|_| Letter(rng.gen_range(0..6))).collect();
            let u = GroupWord::from_letters(lu.clone());
            let v = GroupWord::from_letters(lv.clone());
            let expected = naive_reduce(lu.into_iter().chain(lv).collect());
            let got = concat_reduce(&u, &v);
            assert_eq!(got.letters(), &expected[..]);
            assert!(got.len() <= u.len() + v.len());
        }
    }

    proptest! {
        #[test]
        fn reduced_and_inverse(u in arb_word(3, 20), v in arb_word(3, 20)) {
            let p = concat_reduce(&u, &v);
            prop_assert!(p.letters().windows(2).all(|q| q[1] != q[0].inverse()));
            prop_assert!(concat_reduce(&u, &invert_word(&u)).is_identity());
            prop_assert_eq!(concat_reduce(&u, &GroupWord::identity()), u.clone());
            let mut inplace = u.clone();
            inplace.mul_assign(&v);
            prop_assert_eq!(inplace, p);
        }

        #[test]
        fn distance_is_length_of_quotient(u in arb_word(2, 15), v in arb_word(2, 15)) {
            prop_assert_eq!(tree_dist(&u, &v), concat_reduce(&invert_word(&u), &v).len());
            prop_assert_eq!(tree_dist(&u, &v), tree_dist(&v, &u));
        }
    }
}
