//! Addressing on rooted Cayley trees.
//!
//! Vertices are digit strings. In half-tree mode every vertex has `k`
//! successors. In full-tree mode the root has `k + 1`, so it has the full
//! degree of the Cayley tree. Within a level, vertices are ordered
//! lexicographically, and that order defines "left of" and "right of" a path.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest volume `|V_n|` that will be enumerated.
pub const ENUMERATION_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Half,
    Full,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(Mode::Half),
            "full" => Ok(Mode::Full),
            other => Err(Error::Config(format!("unknown tree mode `{other}` (half|full)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Half => "half",
            Mode::Full => "full",
        })
    }
}

/// A vertex, given by its digits from the root; the empty string is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VertexAddr {
    digits: Vec<u32>,
}

impl VertexAddr {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn new(digits: Vec<u32>) -> Self {
        Self { digits }
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn child(&self, d: u32) -> Self {
        let mut digits = self.digits.clone();
        digits.push(d);
        Self { digits }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.digits.is_empty() {
            None
        } else {
            Some(Self::new(self.digits[..self.digits.len() - 1].to_vec()))
        }
    }

    /// Whether every digit is a valid successor index on a tree of order `k`.
    pub fn is_valid(&self, k: usize, mode: Mode) -> bool {
        self.digits
            .iter()
            .enumerate()
            .all(|(i, &d)| (d as usize) < branching(k, mode, i))
    }
}

impl fmt::Display for VertexAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for VertexAddr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::root());
        }
        s.split('/')
            .map(|p| {
                p.parse::<u32>()
                    .map_err(|_| Error::Config(format!("bad vertex address `{s}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

/// Successor count of a vertex at `depth`.
pub fn branching(k: usize, mode: Mode, depth: usize) -> usize {
    match mode {
        Mode::Full if depth == 0 => k + 1,
        _ => k,
    }
}

/// Direct successors of `x`, in digit order.
pub fn successors(x: &VertexAddr, k: usize, mode: Mode) -> Vec<VertexAddr> {
    (0..branching(k, mode, x.depth()) as u32).map(|d| x.child(d)).collect()
}

/// Number of vertices at distance `n` from the root.
pub fn level_size(k: usize, mode: Mode, n: usize) -> Option<usize> {
    if n == 0 {
        return Some(1);
    }
    let tail = k.checked_pow((n - 1) as u32)?;
    branching(k, mode, 0).checked_mul(tail)
}

/// All vertices at distance `n`, in lexicographic order.
pub fn level(k: usize, n: usize, mode: Mode) -> Result<Vec<VertexAddr>> {
    let size = level_size(k, mode, n)
        .filter(|&s| s <= ENUMERATION_CAP)
        .ok_or_else(|| Error::Resource(format!("level {n} of the order-{k} tree exceeds {ENUMERATION_CAP} vertices")))?;
    let shape = TreeShape::new(k, n, mode)?;
    Ok((0..size).map(|p| shape.addr(n, p)).collect())
}

/// Size and layout of a depth-limited tree; vertices are indexed level by level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeShape {
    pub k: usize,
    pub depth: usize,
    pub mode: Mode,
}

impl TreeShape {
    pub fn new(k: usize, depth: usize, mode: Mode) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("tree order k must be at least 1".into()));
        }
        let shape = Self { k, depth, mode };
        let mut total: usize = 0;
        for m in 0..=depth {
            total = level_size(k, mode, m)
                .and_then(|s| total.checked_add(s))
                .filter(|&t| t <= ENUMERATION_CAP)
                .ok_or_else(|| {
                    Error::Resource(format!(
                        "volume of depth {depth} on the order-{k} tree exceeds {ENUMERATION_CAP} vertices"
                    ))
                })?;
        }
        Ok(shape)
    }

    pub fn level_size(&self, m: usize) -> usize {
        level_size(self.k, self.mode, m).expect("checked at construction")
    }

    /// Index of the first vertex of level `m`.
    pub fn level_offset(&self, m: usize) -> usize {
        (0..m).map(|j| self.level_size(j)).sum()
    }

    pub fn len(&self) -> usize {
        self.level_offset(self.depth + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn branching(&self, m: usize) -> usize {
        branching(self.k, self.mode, m)
    }

    /// Position within level of the `c`-th successor of the vertex at position `p` on level `m`.
    pub fn child_pos(&self, m: usize, p: usize, c: usize) -> usize {
        debug_assert!(c < self.branching(m));
        p * self.branching(m) + c
    }

    /// Global index of `x`, or `None` if it is not in this tree.
    pub fn index_of(&self, x: &VertexAddr) -> Option<usize> {
        if x.depth() > self.depth || !x.is_valid(self.k, self.mode) {
            return None;
        }
        let mut pos = 0;
        for (m, &d) in x.digits().iter().enumerate() {
            pos = self.child_pos(m, pos, d as usize);
        }
        Some(self.level_offset(x.depth()) + pos)
    }

    /// Address of the vertex at position `p` on level `m`.
    pub fn addr(&self, m: usize, mut p: usize) -> VertexAddr {
        let mut digits = vec![0u32; m];
        for j in (0..m).rev() {
            let b = self.branching(j);
            digits[j] = (p % b) as u32;
            p /= b;
        }
        VertexAddr::new(digits)
    }

    /// `(level, position)` pairs of every vertex, in index order.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.depth).flat_map(move |m| (0..self.level_size(m)).map(move |p| (m, p)))
    }

    pub fn truncate(&self, depth: usize) -> Self {
        Self {
            depth: depth.min(self.depth),
            ..*self
        }
    }
}

/// A prefix of an infinite path from the root of the half-tree, with its
/// base-k encoding `r = Σ d_n k^{-n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    digits: Vec<u32>,
    r: f64,
    k: usize,
}

impl Path {
    /// Base-k digits of `r` up to `depth`. Terminating expansions are preferred
    /// (1/2 -> 1000... in base 2) and `r = 1` maps to the all-(k-1) path.
    pub fn from_r(r: f64, k: usize, depth: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!("path parameter r must lie in [0,1], got {r}")));
        }
        if k < 2 {
            return Err(Error::Config("paths need k >= 2".into()));
        }
        let kf = k as f64;
        let digits = if r == 1.0 {
            vec![(k - 1) as u32; depth]
        } else {
            let mut x = r;
            (0..depth)
                .map(|_| {
                    x *= kf;
                    let d = (x.floor() as usize).min(k - 1);
                    x -= d as f64;
                    d as u32
                })
                .collect()
        };
        Ok(Self { digits, r, k })
    }

    pub fn from_digits(digits: Vec<u32>, k: usize) -> Result<Self> {
        if digits.iter().any(|&d| d as usize >= k) {
            return Err(Error::Config(format!("path digit out of range for k = {k}")));
        }
        let r = r_from_digits(&digits, k);
        Ok(Self { digits, r, k })
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    /// The path vertex `x_m`.
    pub fn vertex(&self, m: usize) -> VertexAddr {
        VertexAddr::new(self.digits[..m].to_vec())
    }
}

pub fn r_from_digits(digits: &[u32], k: usize) -> f64 {
    let kf = k as f64;
    digits.iter().rev().fold(0.0, |acc, &d| (acc + d as f64) / kf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    On,
    Right,
}

/// Position of `x` relative to the path prefix of the same length.
pub fn compare_to_path(x: &VertexAddr, p: &Path) -> Result<Side> {
    if x.depth() > p.depth() {
        return Err(Error::Contract(format!(
            "vertex at depth {} is deeper than the path prefix ({})",
            x.depth(),
            p.depth()
        )));
    }
    Ok(match x.digits().cmp(&p.digits()[..x.depth()]) {
        Ordering::Less => Side::Left,
        Ordering::Equal => Side::On,
        Ordering::Greater => Side::Right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn addr(s: &str) -> VertexAddr {
        s.parse().unwrap()
    }

    #[test]
    fn successor_sets() {
        assert_eq!(successors(&VertexAddr::root(), 2, Mode::Half), vec![addr("0"), addr("1")]);
        assert_eq!(
            successors(&VertexAddr::root(), 2, Mode::Full),
            vec![addr("0"), addr("1"), addr("2")]
        );
        assert_eq!(
            successors(&addr("0/1"), 3, Mode::Half),
            vec![addr("0/1/0"), addr("0/1/1"), addr("0/1/2")]
        );
        assert_eq!(successors(&addr("2"), 2, Mode::Full).len(), 2);
    }

    #[test]
    fn levels() {
        assert_eq!(level(2, 0, Mode::Half).unwrap(), vec![VertexAddr::root()]);
        assert_eq!(level(2, 3, Mode::Half).unwrap().len(), 8);
        let w = level(3, 2, Mode::Full).unwrap();
        assert_eq!(w.len(), 12);
        assert!(w.windows(2).all(|p| p[0] < p[1]));
        assert!(matches!(level(2, 40, Mode::Half), Err(Error::Resource(_))));
        assert!(matches!(TreeShape::new(3, 20, Mode::Half), Err(Error::Resource(_))));
    }

    #[test]
    fn addresses_print_with_slashes() {
        assert_eq!(VertexAddr::root().to_string(), "");
        assert_eq!(addr("0/1/2").to_string(), "0/1/2");
        assert_eq!(addr("").depth(), 0);
        assert!("0/x".parse::<VertexAddr>().is_err());
    }

    #[test]
    fn shape_indexing_roundtrips() {
        for mode in [Mode::Half, Mode::Full] {
            let shape = TreeShape::new(3, 4, mode).unwrap();
            for (i, (m, p)) in shape.positions().enumerate() {
                let a = shape.addr(m, p);
                assert_eq!(shape.index_of(&a), Some(i));
            }
            assert_eq!(shape.len(), shape.positions().count());
        }
        let half = TreeShape::new(2, 3, Mode::Half).unwrap();
        assert_eq!(half.index_of(&addr("2")), None);
        assert_eq!(half.index_of(&addr("0/0/0/0")), None);
    }

    #[test]
    fn paths_from_r() {
        assert_eq!(Path::from_r(0.0, 3, 5).unwrap().digits(), &[0, 0, 0, 0, 0]);
        assert_eq!(Path::from_r(1.0, 2, 4).unwrap().digits(), &[1, 1, 1, 1]);
        assert_eq!(Path::from_r(0.5, 2, 4).unwrap().digits(), &[1, 0, 0, 0]);
        assert_eq!(Path::from_r(1.0 / 3.0, 3, 3).unwrap().digits(), &[1, 0, 0]);
        assert!(Path::from_r(1.5, 2, 3).is_err());
    }

    #[test]
    fn path_comparison() {
        let p = Path::from_digits(vec![1, 0, 1, 1], 2).unwrap();
        assert_eq!(compare_to_path(&addr("1/0"), &p).unwrap(), Side::On);
        assert_eq!(compare_to_path(&VertexAddr::root(), &p).unwrap(), Side::On);
        assert_eq!(compare_to_path(&addr("0/1/1"), &p).unwrap(), Side::Left);
        assert_eq!(compare_to_path(&addr("1/1"), &p).unwrap(), Side::Right);
        let all_one = Path::from_r(1.0, 2, 5).unwrap();
        for x in level(2, 3, Mode::Half).unwrap() {
            let side = compare_to_path(&x, &all_one).unwrap();
            assert_eq!(side == Side::On, x == all_one.vertex(3));
            assert_ne!(side, Side::Right);
        }
        assert!(compare_to_path(&addr("0/0/0/0/0/0"), &p).is_err());
    }

    proptest! {
        #[test]
        fn level_partitions_around_path(r in 0.0f64..=1.0, k in 2usize..5, n in 0usize..5) {
            let p = Path::from_r(r, k, n).unwrap();
            let w = level(k, n, Mode::Half).unwrap();
            let count = |s: Side| w.iter().filter(|x| compare_to_path(x, &p).unwrap() == s).count();
            prop_assert_eq!(count(Side::On), 1);
            prop_assert_eq!(count(Side::Left) + count(Side::On) + count(Side::Right), w.len());
        }

        #[test]
        fn left_is_inherited_by_successors(r in 0.0f64..=1.0, k in 2usize..4, n in 1usize..4) {
            let p = Path::from_r(r, k, n + 1).unwrap();
            for x in level(k, n, Mode::Half).unwrap() {
                let side = compare_to_path(&x, &p).unwrap();
                if side != Side::On {
                    for y in successors(&x, k, Mode::Half) {
                        prop_assert_eq!(compare_to_path(&y, &p).unwrap(), side);
                    }
                }
            }
        }

        #[test]
        fn encoding_roundtrip(r in 0.0f64..=1.0, k in 2usize..6, depth in 1usize..30) {
            let p = Path::from_r(r, k, depth).unwrap();
            let back = r_from_digits(p.digits(), k);
            prop_assert!(back <= r + 1e-12);
            prop_assert!(r - back <= (k as f64).powi(-(depth as i32)) + 1e-12);
        }
    }
}
