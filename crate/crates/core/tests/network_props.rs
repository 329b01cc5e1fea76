use proptest::prelude::*;

use cvbell::network::{
    canonical_independent_set, classify_parties, cycle, exact_independent_set, from_family, tree,
    Family, IndependentSet, NetworkTopology, PartyClass,
};

fn families() -> Vec<NetworkTopology> {
    let mut out = Vec::new();
    for y in 3..=9 {
        for f in [Family::Chain, Family::Star, Family::Cycle] {
            out.push(from_family(f, &[y]).unwrap());
        }
    }
    for (m, f) in [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (4, 2), (4, 3)] {
        out.push(tree(m, f).unwrap());
    }
    out
}

/// Maximum independent set size of an acyclic network, by the usual
/// take/skip recursion from party 1.
fn tree_mis(t: &NetworkTopology) -> usize {
    let n = t.party_count();
    let mut adj = vec![Vec::new(); n + 1];
    for &(p, q) in t.sources() {
        adj[p].push(q);
        adj[q].push(p);
    }
    fn go(v: usize, parent: usize, adj: &[Vec<usize>]) -> (usize, usize) {
        let (mut take, mut skip) = (1, 0);
        for &c in &adj[v] {
            if c != parent {
                let (ct, cs) = go(c, v, adj);
                take += cs;
                skip += ct.max(cs);
            }
        }
        (take, skip)
    }
    let (a, b) = go(1, 0, &adj);
    a.max(b)
}

#[test]
fn canonical_set_is_maximum() {
    for t in families() {
        let c = canonical_independent_set(&t).unwrap();
        let best = if t.party_count() <= 24 {
            exact_independent_set(&t).unwrap().k()
        } else {
            // past the exhaustive-search cap; only trees get here
            assert_eq!(t.family(), Family::Tree);
            tree_mis(&t)
        };
        assert_eq!(c.k(), best, "{} {}", t.family(), t.params_label());
        if t.family() == Family::Tree {
            assert_eq!(tree_mis(&t), best);
        }
        classify_parties(&t, &c).unwrap();
    }
}

#[test]
fn tree_counts_follow_the_geometric_sum() {
    for m in 2..=4usize {
        for f in 2..=4usize {
            let t = tree(m, f).unwrap();
            let fm = f.pow(m as u32);
            assert_eq!(t.party_count(), (fm - 1) / (f - 1));
            assert_eq!(t.source_count(), (fm - f) / (f - 1));
        }
    }
}

proptest! {
    /// Any subset accepted as independent never puts two members on one source.
    #[test]
    fn classification_respects_independence(y in 3..=9usize, mask in any::<u16>()) {
        let t = cycle(y).unwrap();
        let members: Vec<usize> = (1..=y).filter(|p| mask & (1 << (p - 1)) != 0).collect();
        prop_assume!(!members.is_empty());
        let k = IndependentSet::new(members).unwrap();
        match classify_parties(&t, &k) {
            Ok(classes) => {
                for &(p, q) in t.sources() {
                    prop_assert!(!(classes[p - 1] == PartyClass::InK && classes[q - 1] == PartyClass::InK));
                }
            }
            Err(_) => {
                prop_assert!(t.sources().iter().any(|&(p, q)| k.contains(p) && k.contains(q)));
            }
        }
    }
}
