use std::collections::BTreeMap;

use serde::Serialize;

use super::NetworkCase;

/// One orientation of a branch; bus fields are positions in `case.buses`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Arc {
    pub branch: usize,
    pub from: usize,
    pub to: usize,
    pub reverse: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexSets {
    /// forward arcs `(e,i,j)`, sorted by branch id
    pub forward: Vec<Arc>,
    /// `reverse[k]` is `forward[k]` turned around
    pub reverse: Vec<Arc>,
    /// bus pairs `(i,j)` in forward orientation of their first branch
    pub pairs: Vec<(usize, usize)>,
    /// `pair_of[k]` indexes `pairs` for `forward[k]`
    pub pair_of: Vec<usize>,
    pub gens_at: Vec<Vec<usize>>,
    pub loads_at: Vec<Vec<usize>>,
    pub shunts_at: Vec<Vec<usize>>,
    pub reference: usize,
    pub storage_bus: Option<usize>,
}

impl IndexSets {
    /// Assumes a validated case.
    pub fn build(case: &NetworkCase) -> Self {
        let pos: BTreeMap<usize, usize> =
            case.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect();
        let mut order: Vec<usize> = (0..case.branches.len()).collect();
        order.sort_by_key(|&k| case.branches[k].id);
        let mut forward = Vec::new();
        let mut reverse = Vec::new();
        let mut pairs = Vec::new();
        let mut pair_of = Vec::new();
        let mut pair_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for k in order {
            let br = &case.branches[k];
            let (i, j) = (pos[&br.from_bus], pos[&br.to_bus]);
            forward.push(Arc {
                branch: k,
                from: i,
                to: j,
                reverse: false,
            });
            reverse.push(Arc {
                branch: k,
                from: j,
                to: i,
                reverse: true,
            });
            let key = (i.min(j), i.max(j));
            let p = *pair_index.entry(key).or_insert_with(|| {
                pairs.push((i, j));
                pairs.len() - 1
            });
            pair_of.push(p);
        }
        let nb = case.buses.len();
        let mut gens_at = vec![Vec::new(); nb];
        for (k, g) in case.generators.iter().enumerate() {
            gens_at[pos[&g.bus]].push(k);
        }
        let mut loads_at = vec![Vec::new(); nb];
        for (k, l) in case.loads.iter().enumerate() {
            loads_at[pos[&l.bus]].push(k);
        }
        let mut shunts_at = vec![Vec::new(); nb];
        for (k, s) in case.shunts.iter().enumerate() {
            shunts_at[pos[&s.bus]].push(k);
        }
        Self {
            forward,
            reverse,
            pairs,
            pair_of,
            gens_at,
            loads_at,
            shunts_at,
            reference: case.reference_position().unwrap_or(0),
            storage_bus: case.storage.as_ref().map(|s| pos[&s.bus]),
        }
    }

    /// Forward then reverse arcs, the ordering used for `E ∪ E_rev` vectors.
    pub fn arcs(&self) -> impl Iterator<Item = &Arc> {
        self.forward.iter().chain(&self.reverse)
    }

    pub fn num_arcs(&self) -> usize {
        2 * self.forward.len()
    }

    /// Pairs expressed with bus ids instead of positions.
    pub fn pair_ids(&self, case: &NetworkCase) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .map(|&(i, j)| (case.buses[i].id, case.buses[j].id))
            .collect()
    }
}
