//! Undirected independence structures and conditional independence triplets.
//!
//! A [`Structure`] stores one adjacency bitset per node, so copies are a
//! single allocation and separation queries run on word masks.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A conditional independence query `(x ; y | z)` in canonical form:
/// `x < y`, `z` sorted and disjoint from `{x, y}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    x: usize,
    y: usize,
    z: Vec<usize>,
}

impl Triplet {
    pub fn new(x: usize, y: usize, z: impl IntoIterator<Item = usize>) -> Result<Self> {
        if x == y {
            return Err(Error::InvalidTriplet(format!("x and y are both {x}")));
        }
        let mut z: Vec<usize> = z.into_iter().collect();
        z.sort_unstable();
        if z.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidTriplet(format!(
                "conditioning set {z:?} has repeated variables"
            )));
        }
        if z.binary_search(&x).is_ok() || z.binary_search(&y).is_ok() {
            return Err(Error::InvalidTriplet(format!(
                "conditioning set {z:?} overlaps {{{x}, {y}}}"
            )));
        }
        let (x, y) = if x < y { (x, y) } else { (y, x) };
        Ok(Triplet { x, y, z })
    }

    pub fn x(&self) -> usize {
        self.x
    }

    pub fn y(&self) -> usize {
        self.y
    }

    pub fn z(&self) -> &[usize] {
        &self.z
    }

    /// Number of variables involved, `2 + |z|`.
    pub fn dimension(&self) -> usize {
        2 + self.z.len()
    }

    /// Largest variable index mentioned by the triplet.
    pub fn max_index(&self) -> usize {
        self.z.last().copied().unwrap_or(0).max(self.y)
    }

    pub fn check_within(&self, n: usize) -> Result<()> {
        if self.max_index() >= n {
            return Err(Error::InvalidTriplet(format!(
                "{self} mentions variable {} but there are only {n}",
                self.max_index()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} |", self.x, self.y)?;
        for v in &self.z {
            write!(f, " {v}")?;
        }
        Ok(())
    }
}

impl FromStr for Triplet {
    type Err = Error;

    /// Parses `x y | z1 z2 ...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidTriplet(format!("cannot parse {s:?}"));
        let (pair, cond) = s.split_once('|').ok_or_else(bad)?;
        let pair: Vec<usize> = pair
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if pair.len() != 2 {
            return Err(bad());
        }
        let z = cond
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad()))
            .collect::<Result<Vec<usize>>>()?;
        Triplet::new(pair[0], pair[1], z)
    }
}

/// An undirected graph without self-loops over nodes `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Structure {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl Structure {
    /// The empty graph over `n` nodes.
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Structure {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Structure::new(n);
        for x in 0..n {
            for y in x + 1..n {
                g.set_edge(x, y, true);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Structure::new(n);
        for (u, v) in edges {
            g.check_pair(u, v)?;
            g.set_edge(u, v, true);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check_pair(&self, x: usize, y: usize) -> Result<()> {
        if x == y {
            return Err(Error::InvalidArgument(format!("self-loop on node {x}")));
        }
        if x >= self.n || y >= self.n {
            return Err(Error::InvalidArgument(format!(
                "pair ({x}, {y}) outside a graph of {} nodes",
                self.n
            )));
        }
        Ok(())
    }

    #[inline]
    fn row(&self, x: usize) -> &[u64] {
        &self.bits[x * self.words..(x + 1) * self.words]
    }

    #[inline]
    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        self.bits[x * self.words + y / 64] >> (y % 64) & 1 == 1
    }

    /// Sets or clears the edge `(x, y)` in place. Panics on a self-loop.
    pub fn set_edge(&mut self, x: usize, y: usize, present: bool) {
        assert_ne!(x, y, "self-loops are not allowed");
        for (a, b) in [(x, y), (y, x)] {
            let word = &mut self.bits[a * self.words + b / 64];
            if present {
                *word |= 1 << (b % 64);
            } else {
                *word &= !(1 << (b % 64));
            }
        }
    }

    pub(crate) fn flip_in_place(&mut self, x: usize, y: usize) {
        let present = self.has_edge(x, y);
        self.set_edge(x, y, !present);
    }

    /// Returns a copy with the edge `(x, y)` toggled.
    pub fn edge_flip(&self, x: usize, y: usize) -> Result<Structure> {
        self.check_pair(x, y)?;
        let mut g = self.clone();
        g.flip_in_place(x, y);
        Ok(g)
    }

    /// Neighbors of `x` in ascending order. By Corollary 2 of Pearl's
    /// characterization this is the Markov boundary of `x`.
    pub fn boundary(&self, x: usize) -> Vec<usize> {
        self.neighbors(x).collect()
    }

    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(x).iter().enumerate().flat_map(|(i, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * 64 + bit)
            })
        })
    }

    pub fn degree(&self, x: usize) -> usize {
        self.row(x).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum::<usize>() / 2
    }

    /// Edges as `(u, v)` pairs with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|u| self.neighbors(u).filter(move |&v| v > u).map(move |v| (u, v)))
            .collect()
    }

    /// Vertex separation: true iff every path between `t.x()` and `t.y()`
    /// passes through a node of `t.z()`.
    pub fn separated(&self, t: &Triplet) -> bool {
        debug_assert!(t.max_index() < self.n);
        let mut blocked = vec![0u64; self.words];
        for &v in t.z() {
            blocked[v / 64] |= 1 << (v % 64);
        }
        let (x, y) = (t.x(), t.y());
        let mut seen = blocked;
        seen[x / 64] |= 1 << (x % 64);
        let mut stack = vec![x];
        while let Some(u) = stack.pop() {
            for (i, &adj) in self.row(u).iter().enumerate() {
                let mut fresh = adj & !seen[i];
                seen[i] |= fresh;
                while fresh != 0 {
                    let v = i * 64 + fresh.trailing_zeros() as usize;
                    if v == y {
                        return false;
                    }
                    fresh &= fresh - 1;
                    stack.push(v);
                }
            }
        }
        true
    }

    /// Serializes as `n` followed by one `u v` line per edge, `u < v`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing node count"))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::parse(1, format!("bad node count {header:?}")))?;
        let mut g = Structure::new(n);
        for (line, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let [u, v] = parts[..] else {
                return Err(Error::parse(line, "expected `u v`"));
            };
            let u: usize = u.parse().map_err(|_| Error::parse(line, "bad node index"))?;
            let v: usize = v.parse().map_err(|_| Error::parse(line, "bad node index"))?;
            if u >= v {
                return Err(Error::parse(line, "edges must be written with u < v"));
            }
            g.check_pair(u, v).map_err(|e| Error::parse(line, e.to_string()))?;
            g.set_edge(u, v, true);
        }
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Structure::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
