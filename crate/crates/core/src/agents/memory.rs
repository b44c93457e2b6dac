//! Bounded count memory with randomized eviction.
//!
//! The memory holds at most `capacity` unit counts spread over the sites.
//! Below capacity an observation simply adds to its site. At capacity each
//! inserted unit first evicts one unit from a site drawn in proportion to
//! the current counts, so the total stays exactly at capacity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{MixedStrategy, Site};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundedMemory {
    counts: Vec<u32>,
    capacity: u32,
}

impl BoundedMemory {
    pub fn new(sites: usize, capacity: u32) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidSpec("memory capacity must be at least 1".into()));
        }
        Ok(Self { counts: vec![0; sites], capacity })
    }

    /// Builds a memory from explicit counts, which must fit the capacity.
    pub fn from_counts(counts: Vec<u32>, capacity: u32) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if capacity == 0 || total > capacity as u64 {
            return Err(Error::InvalidSpec(format!(
                "counts total {total} do not fit capacity {capacity}"
            )));
        }
        Ok(Self { counts, capacity })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn is_full(&self) -> bool {
        self.total() >= self.capacity
    }

    /// Inserts `weight` units at `site`, first evicting whatever the
    /// capacity requires. Weights above the capacity are clipped to it.
    pub fn insert<R: Rng + ?Sized>(&mut self, site: Site, weight: u32, rng: &mut R) {
        let weight = weight.min(self.capacity);
        let mut total = self.total();
        let evictions = (total + weight).saturating_sub(self.capacity);
        for _ in 0..evictions {
            let victim = self.draw_unit(total, rng);
            self.counts[victim] -= 1;
            total -= 1;
        }
        self.counts[site] += weight;
    }

    // Picks the site of a uniformly random stored unit; sites at zero are
    // never picked.
    fn draw_unit<R: Rng + ?Sized>(&self, total: u32, rng: &mut R) -> Site {
        let mut target = rng.random_range(0..total);
        for (site, &count) in self.counts.iter().enumerate() {
            if target < count {
                return site;
            }
            target -= count;
        }
        unreachable!("target below total always lands on a site")
    }
}

/// Count increment for one observation: `s + 1` after a loss when
/// significance weighting is on, otherwise 1.
pub fn significance_increment(utility: i8, significance: u32) -> u32 {
    if utility == -1 && significance > 0 {
        significance + 1
    } else {
        1
    }
}

/// One step of the bounded-memory transition for an opponent seen at
/// `observed_site` when the agent's own realized utility was `utility`.
pub fn pfa_transition<R: Rng + ?Sized>(
    memory: &BoundedMemory,
    observed_site: Site,
    utility: i8,
    significance: u32,
    rng: &mut R,
) -> Result<BoundedMemory> {
    if observed_site >= memory.counts.len() {
        return Err(Error::SiteOutOfRange { site: observed_site, n: memory.counts.len() });
    }
    if !(-1..=1).contains(&utility) {
        return Err(Error::InvalidUtility(utility));
    }
    let mut next = memory.clone();
    next.insert(observed_site, significance_increment(utility, significance), rng);
    Ok(next)
}

/// The opponent strategy the counts describe.
pub fn memory_estimate(memory: &BoundedMemory) -> Result<MixedStrategy> {
    let counts: Vec<u64> = memory.counts.iter().map(|&c| c as u64).collect();
    MixedStrategy::from_counts(&counts).ok_or(Error::EmptyMemory)
}
