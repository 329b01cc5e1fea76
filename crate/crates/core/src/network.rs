//! Depth-2 network topologies and independent party sets.
//!
//! Parties are numbered from 1. A source `(p, q)` sends its first arm to
//! party `p` and its second arm to party `q`.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{domain, structural, Error, Result};

/// Largest network handled by [`exact_independent_set`].
pub const EXACT_MIS_LIMIT: usize = 24;

/// Network families with an analytic independent set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Chain,
    Star,
    Tree,
    Cycle,
    Custom,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Chain => "chain",
            Family::Star => "star",
            Family::Tree => "tree",
            Family::Cycle => "cycle",
            Family::Custom => "custom",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(Family::Chain),
            "star" => Ok(Family::Star),
            "tree" => Ok(Family::Tree),
            "cycle" => Ok(Family::Cycle),
            "custom" => Ok(Family::Custom),
            other => structural(format!(
                "unknown family `{other}` (expected chain, star, tree, cycle or custom)"
            )),
        }
    }
}

/// Parties and bipartite sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    family: Family,
    /// Depth and fan-out for trees.
    tree_shape: Option<(usize, usize)>,
    party_count: usize,
    sources: Vec<(usize, usize)>,
}

impl NetworkTopology {
    /// A custom network; checks index ranges and that every party is served.
    pub fn new(party_count: usize, sources: Vec<(usize, usize)>) -> Result<Self> {
        Self::build(Family::Custom, None, party_count, sources)
    }

    fn build(
        family: Family,
        tree_shape: Option<(usize, usize)>,
        party_count: usize,
        sources: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if party_count == 0 {
            return structural("a network needs at least one party");
        }
        let mut served = vec![false; party_count + 1];
        for (j, &(p, q)) in sources.iter().enumerate() {
            if p == 0 || q == 0 || p > party_count || q > party_count {
                return structural(format!(
                    "source {} connects ({p}, {q}) but parties are numbered 1..={party_count}",
                    j + 1
                ));
            }
            if p == q {
                return structural(format!("source {} connects party {p} to itself", j + 1));
            }
            served[p] = true;
            served[q] = true;
        }
        if let Some(lonely) = (1..=party_count).find(|&i| !served[i]) {
            return structural(format!("party {lonely} is not attached to any source"));
        }
        Ok(Self {
            family,
            tree_shape,
            party_count,
            sources,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// `(m, f)` for trees built by [`tree`].
    pub fn tree_shape(&self) -> Option<(usize, usize)> {
        self.tree_shape
    }

    pub fn party_count(&self) -> usize {
        self.party_count
    }

    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self) -> &[(usize, usize)] {
        &self.sources
    }

    /// Indices (0-based) of the sources that reach `party`, in source order.
    pub fn sources_of(&self, party: usize) -> Vec<usize> {
        self.sources
            .iter()
            .enumerate()
            .filter(|(_, &(p, q))| p == party || q == party)
            .map(|(j, _)| j)
            .collect()
    }

    /// Short parameter label, e.g. `y=6` or `m=3;f=2`.
    pub fn params_label(&self) -> String {
        match self.tree_shape {
            Some((m, f)) => format!("m={m};f={f}"),
            None => format!("y={}", self.party_count),
        }
    }

    fn adjacency(&self) -> Vec<u32> {
        let mut adj = vec![0u32; self.party_count];
        for &(p, q) in &self.sources {
            adj[p - 1] |= 1 << (q - 1);
            adj[q - 1] |= 1 << (p - 1);
        }
        adj
    }
}

fn min_size(name: &str, y: usize, min: usize) -> Result<()> {
    if y < min {
        return domain(format!(
            "{name} networks need at least {min} parties, got {y}"
        ));
    }
    Ok(())
}

/// `y` parties in a line.
pub fn chain(y: usize) -> Result<NetworkTopology> {
    min_size("chain", y, 3)?;
    NetworkTopology::build(Family::Chain, None, y, (1..y).map(|i| (i, i + 1)).collect())
}

/// `y - 1` leaves around hub `y`.
pub fn star(y: usize) -> Result<NetworkTopology> {
    min_size("star", y, 3)?;
    NetworkTopology::build(Family::Star, None, y, (1..y).map(|j| (j, y)).collect())
}

/// Complete `f`-ary tree with `m` layers.
pub fn tree(m: usize, f: usize) -> Result<NetworkTopology> {
    if m < 2 || f < 2 {
        return domain(format!(
            "tree networks need m >= 2 and f >= 2, got m={m}, f={f}"
        ));
    }
    let parties = (0..m as u32).try_fold(0usize, |acc, t| {
        f.checked_pow(t).and_then(|x| acc.checked_add(x))
    });
    let parties = match parties {
        Some(p) if p <= 1 << 20 => p,
        _ => return Err(Error::Resource(format!("tree({m}, {f}) is too large"))),
    };
    let sources = (1..parties).map(|i| (i.div_ceil(f), i + 1)).collect();
    NetworkTopology::build(Family::Tree, Some((m, f)), parties, sources)
}

/// `y` parties in a ring.
pub fn cycle(y: usize) -> Result<NetworkTopology> {
    min_size("cycle", y, 3)?;
    let mut sources: Vec<_> = (1..y).map(|i| (i, i + 1)).collect();
    sources.push((y, 1));
    NetworkTopology::build(Family::Cycle, None, y, sources)
}

/// Builds a family member from its size parameters (`y` or `(m, f)`).
pub fn from_family(family: Family, size: &[usize]) -> Result<NetworkTopology> {
    match (family, size) {
        (Family::Chain, &[y]) => chain(y),
        (Family::Star, &[y]) => star(y),
        (Family::Cycle, &[y]) => cycle(y),
        (Family::Tree, &[m, f]) => tree(m, f),
        (Family::Custom, _) => structural("custom networks need an explicit source list"),
        (fam, sz) => structural(format!(
            "{fam} takes {} size parameter(s), got {}",
            if fam == Family::Tree { 2 } else { 1 },
            sz.len()
        )),
    }
}

/// A set of parties no two of which share a source.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndependentSet {
    members: Vec<usize>,
}

impl IndependentSet {
    /// Sorts and deduplicates; independence is checked against a topology by
    /// [`classify_parties`].
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return structural("independent set must be non-empty");
        }
        if members[0] == 0 {
            return structural("parties are numbered from 1");
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, party: usize) -> bool {
        self.members.binary_search(&party).is_ok()
    }
}

impl TryFrom<Vec<usize>> for IndependentSet {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IndependentSet> for Vec<usize> {
    fn from(k: IndependentSet) -> Vec<usize> {
        k.members
    }
}

/// The analytic maximum independent set for family networks. Custom
/// topologies fall back to [`exact_independent_set`].
pub fn canonical_independent_set(topo: &NetworkTopology) -> Result<IndependentSet> {
    let y = topo.party_count;
    let members: Vec<usize> = match topo.family {
        Family::Chain if y % 2 == 1 => (1..=y).step_by(2).collect(),
        Family::Chain => (2..=y).step_by(2).collect(),
        Family::Star => (1..y).collect(),
        Family::Cycle if y % 2 == 1 => (1..=y - 2).step_by(2).collect(),
        Family::Cycle => (2..=y).step_by(2).collect(),
        Family::Tree => {
            let (m, f) = topo.tree_shape.expect("tree topologies carry their shape");
            // layer t (1-based) holds parties first(t)..=last(t)
            let mut out = Vec::new();
            let mut first = 1;
            let mut width = 1;
            for t in 1..=m {
                let keep = if m % 2 == 1 { t % 2 == 1 } else { t % 2 == 0 };
                if keep {
                    out.extend(first..first + width);
                }
                first += width;
                width *= f;
            }
            out
        }
        Family::Custom => return exact_independent_set(topo),
    };
    IndependentSet::new(members)
}

/// Exhaustive maximum independent set. Among maximum sets the one whose
/// sorted member list is lexicographically smallest is returned.
pub fn exact_independent_set(topo: &NetworkTopology) -> Result<IndependentSet> {
    let n = topo.party_count;
    if n > EXACT_MIS_LIMIT {
        return Err(Error::Resource(format!(
            "exact independent-set search is capped at {EXACT_MIS_LIMIT} parties (got {n}); use a family network and its canonical set"
        )));
    }
    let adj = topo.adjacency();
    let mut best = Search {
        adj: &adj,
        n,
        best: 0,
        best_size: 0,
    };
    best.go(0, 0, 0);
    let members = (0..n)
        .filter(|i| best.best >> i & 1 == 1)
        .map(|i| i + 1)
        .collect();
    IndependentSet::new(members)
}

struct Search<'a> {
    adj: &'a [u32],
    n: usize,
    best: u32,
    best_size: u32,
}

impl Search<'_> {
    // Parties are decided in index order, "take" before "skip", and only a
    // strictly larger set replaces the incumbent, so the first maximum set
    // found is the lexicographically smallest.
    fn go(&mut self, i: usize, chosen: u32, blocked: u32) {
        let size = chosen.count_ones();
        if i == self.n {
            if size > self.best_size {
                self.best = chosen;
                self.best_size = size;
            }
            return;
        }
        let free = (i..self.n).filter(|&j| blocked >> j & 1 == 0).count() as u32;
        if size + free <= self.best_size {
            return;
        }
        if blocked >> i & 1 == 0 {
            self.go(i + 1, chosen | 1 << i, blocked | self.adj[i]);
        }
        self.go(i + 1, chosen, blocked);
    }
}

/// Membership of a party in the independent set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartyClass {
    InK,
    NotInK,
}

/// Per-party classes (index 0 is party 1). Fails if `k` is not independent
/// in `topo` or names a party outside it.
pub fn classify_parties(topo: &NetworkTopology, k: &IndependentSet) -> Result<Vec<PartyClass>> {
    if let Some(&bad) = k.members().iter().find(|&&p| p > topo.party_count) {
        return Err(Error::Contract(format!(
            "party {bad} of the independent set is not in the network"
        )));
    }
    for (j, &(p, q)) in topo.sources.iter().enumerate() {
        if k.contains(p) && k.contains(q) {
            return Err(Error::Contract(format!(
                "parties {p} and {q} share source {} and cannot both be independent",
                j + 1
            )));
        }
    }
    Ok((1..=topo.party_count)
        .map(|i| {
            if k.contains(i) {
                PartyClass::InK
            } else {
                PartyClass::NotInK
            }
        })
        .collect())
}
