//! Set partitions of {1, ..., D} in canonical form, Bell numbers, and
//! exhaustive enumeration.
//!
//! Canonical form: blocks ordered by their smallest element, items sorted
//! within each block. Equivalently the partition is stored as a restricted
//! growth string: `assignment[i]` is the block id of item `i`, and block ids
//! appear in first-use order. Text form is 1-based, `|`-separated:
//! `1,3|2` puts items 1 and 3 together and item 2 alone.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// Enumeration guard: B(12) = 4 213 597 is the largest we will walk.
pub const MAX_ENUM_DIM: usize = 12;
/// Bell-number guard.
pub const MAX_BELL_DIM: usize = 64;

/// A partition of {0, ..., n-1} (displayed 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    assignment: Vec<usize>,
    n_blocks: usize,
}

impl SetPartition {
    /// Normalizes arbitrary block labels into canonical form.
    pub fn from_assignment(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidData("empty partition".into()));
        }
        let mut map: Vec<(usize, usize)> = Vec::new(); // (raw label, canonical id)
        let mut assignment = Vec::with_capacity(labels.len());
        let mut next = 0usize;
        for &raw in labels {
            match map.iter().find(|(r, _)| *r == raw) {
                Some(&(_, b)) => assignment.push(b),
                None => {
                    map.push((raw, next));
                    assignment.push(next);
                    next += 1;
                }
            }
        }
        Ok(SetPartition {
            assignment,
            n_blocks: next,
        })
    }

    /// Builds from explicit blocks over items 0..n-1; validates disjoint cover.
    pub fn from_blocks(blocks: &[Vec<usize>], n: usize) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        let mut seen = 0usize;
        for (b, blk) in blocks.iter().enumerate() {
            if blk.is_empty() {
                return Err(Error::InvalidData(format!("block {} is empty", b + 1)));
            }
            for &i in blk {
                if i >= n {
                    return Err(Error::InvalidData(format!(
                        "item {} out of range for {} items",
                        i + 1,
                        n
                    )));
                }
                if labels[i] != usize::MAX {
                    return Err(Error::InvalidData(format!(
                        "item {} appears in two blocks",
                        i + 1
                    )));
                }
                labels[i] = b;
                seen += 1;
            }
        }
        if seen != n {
            return Err(Error::InvalidData(format!(
                "blocks cover {} of {} items",
                seen, n
            )));
        }
        SetPartition::from_assignment(&labels)
    }

    pub fn singletons(n: usize) -> Self {
        SetPartition {
            assignment: (0..n).collect(),
            n_blocks: n,
        }
    }

    pub fn one_block(n: usize) -> Self {
        SetPartition {
            assignment: vec![0; n],
            n_blocks: if n == 0 { 0 } else { 1 },
        }
    }

    pub fn n_items(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Block id of an item; ids follow first-appearance order, which under
    /// canonical form is the order of smallest elements.
    #[inline]
    pub fn block_of(&self, item: usize) -> usize {
        self.assignment[item]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Blocks in canonical order, items ascending within each.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_blocks];
        for (i, &b) in self.assignment.iter().enumerate() {
            blocks[b].push(i);
        }
        blocks
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (b, blk) in self.blocks().iter().enumerate() {
            if b > 0 {
                f.write_str("|")?;
            }
            for (k, i) in blk.iter().enumerate() {
                if k > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", i + 1)?;
            }
        }
        Ok(())
    }
}

impl FromStr for SetPartition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut n = 0usize;
        for part in s.split('|') {
            let mut blk = Vec::new();
            for item in part.split(',') {
                let item = item.trim();
                let v: usize = item
                    .parse()
                    .map_err(|_| Error::InvalidData(format!("bad item '{}' in '{}'", item, s)))?;
                if v == 0 {
                    return Err(Error::InvalidData("items are 1-based".into()));
                }
                blk.push(v - 1);
                n = n.max(v);
            }
            blocks.push(blk);
        }
        SetPartition::from_blocks(&blocks, n)
    }
}

/// Exact Bell number B(d) for 1 <= d <= 64, by the Bell triangle.
pub fn bell_number(d: usize) -> Result<BigUint> {
    if d == 0 || d > MAX_BELL_DIM {
        return Err(Error::Refused(format!(
            "Bell number supported for 1..={}, got {}",
            MAX_BELL_DIM, d
        )));
    }
    let mut row = vec![BigUint::from(1u32)];
    for _ in 1..d {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().unwrap().clone());
        for v in &row {
            let prev = next.last().unwrap().clone();
            next.push(prev + v);
        }
        row = next;
    }
    Ok(row.last().unwrap().clone())
}

/// Iterates every partition of {0, ..., d-1} exactly once, in lexicographic
/// restricted-growth-string order: the single block comes first, the
/// all-singletons partition last. Refuses d > 12.
pub fn enumerate_partitions(d: usize) -> Result<PartitionIter> {
    if d == 0 || d > MAX_ENUM_DIM {
        return Err(Error::Refused(format!(
            "enumeration supported for 1..={}, got {}",
            MAX_ENUM_DIM, d
        )));
    }
    Ok(PartitionIter {
        rgs: vec![0; d],
        maxp: vec![0; d],
        fresh: true,
        done: false,
    })
}

pub struct PartitionIter {
    rgs: Vec<usize>,
    // maxp[i] = max(rgs[0..=i])
    maxp: Vec<usize>,
    fresh: bool,
    done: bool,
}

impl Iterator for PartitionIter {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        if self.done {
            return None;
        }
        if self.fresh {
            self.fresh = false;
            return Some(self.current());
        }
        let d = self.rgs.len();
        // find rightmost position that can be incremented
        let mut i = d;
        loop {
            if i == 1 {
                self.done = true;
                return None;
            }
            i -= 1;
            if self.rgs[i] <= self.maxp[i - 1] {
                break;
            }
        }
        self.rgs[i] += 1;
        self.maxp[i] = self.maxp[i - 1].max(self.rgs[i]);
        for j in (i + 1)..d {
            self.rgs[j] = 0;
            self.maxp[j] = self.maxp[j - 1];
        }
        Some(self.current())
    }
}

impl PartitionIter {
    fn current(&self) -> SetPartition {
        SetPartition {
            assignment: self.rgs.clone(),
            n_blocks: self.maxp[self.rgs.len() - 1] + 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bell_numbers_small() {
        let expect: [u64; 10] = [1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975];
        for (i, &e) in expect.iter().enumerate() {
            assert_eq!(bell_number(i + 1).unwrap(), BigUint::from(e));
        }
        assert_eq!(bell_number(20).unwrap(), BigUint::from(51724158235372u64));
        assert!(bell_number(0).is_err());
        assert!(bell_number(65).is_err());
    }

    // independent oracle: B(n) = sum_k S(n, k) over Stirling numbers of the
    // second kind, built from their own recurrence
    #[test]
    fn bell_matches_stirling_column_sums() {
        let n = 64usize;
        let mut s = vec![BigUint::from(0u32); n + 1]; // S(row, k)
        s[0] = BigUint::from(1u32); // S(0,0) = 1
        for row in 1..=n {
            let mut next = vec![BigUint::from(0u32); n + 1];
            for k in 1..=row {
                next[k] = BigUint::from(k) * &s[k] + &s[k - 1];
            }
            s = next;
            let total: BigUint = s.iter().sum();
            assert_eq!(bell_number(row).unwrap(), total, "row {}", row);
        }
    }

    #[test]
    fn enumeration_counts_match_bell() {
        for d in 1..=9 {
            let count = enumerate_partitions(d).unwrap().count();
            assert_eq!(BigUint::from(count), bell_number(d).unwrap(), "d = {}", d);
        }
        assert!(enumerate_partitions(13).is_err());
    }

    #[test]
    fn enumeration_unique_and_canonical() {
        use std::collections::HashSet;
        let mut seen = HashSet::new();
        for p in enumerate_partitions(6).unwrap() {
            // canonical: block ids appear in increasing first-use order
            let mut hi = 0;
            for &b in p.assignment() {
                assert!(b <= hi);
                hi = hi.max(b + 1);
            }
            assert!(seen.insert(p.to_string()), "duplicate {}", p);
        }
        assert_eq!(seen.len(), 203);
    }

    #[test]
    fn display_and_parse_round_trip() {
        let p = SetPartition::from_blocks(&[vec![0, 2], vec![1]], 3).unwrap();
        assert_eq!(p.to_string(), "1,3|2");
        assert_eq!("1,3|2".parse::<SetPartition>().unwrap(), p);
        assert_eq!(p.n_blocks(), 2);
        assert_eq!(p.block_of(0), 0);
        assert_eq!(p.block_of(1), 1);
        assert_eq!(p.block_of(2), 0);

        let q: SetPartition = "2,1|3".parse().unwrap();
        assert_eq!(q.to_string(), "1,2|3");
        assert!("1,3".parse::<SetPartition>().is_err()); // misses item 2
        assert!("1,1|2".parse::<SetPartition>().is_err());
        assert!("0,1".parse::<SetPartition>().is_err());
    }

    #[test]
    fn from_assignment_normalizes_labels() {
        let p = SetPartition::from_assignment(&[2, 0, 2, 1]).unwrap();
        assert_eq!(p.assignment(), &[0, 1, 0, 2]);
        assert_eq!(p.blocks(), vec![vec![0, 2], vec![1], vec![3]]);
    }

    proptest! {
        #[test]
        fn round_trip_arbitrary_assignments(labels in proptest::collection::vec(0usize..5, 1..10)) {
            let p = SetPartition::from_assignment(&labels).unwrap();
            let back: SetPartition = p.to_string().parse().unwrap();
            prop_assert_eq!(&back, &p);
            let q = SetPartition::from_blocks(&p.blocks(), p.n_items()).unwrap();
            prop_assert_eq!(&q, &p);
        }
    }
}
