use crate::graph::NodeId;

/// Precomputed schedule of one flood inside a group scope.
///
/// A member at distance `d` from the origin receives the payload in round
/// `start + d` from its minimum-id neighbor at distance `d - 1`, and
/// forwards it in the following round to every scope neighbor that is not
/// strictly closer to the origin.
#[derive(Debug, PartialEq, Eq)]
pub(crate) struct FloodPlan {
    pub origin: NodeId,
    pub group: u32,
    /// Reached members in BFS order (level by level, ascending id inside a level).
    pub order: Vec<NodeId>,
    /// Parent of `order[i]`; the origin is its own parent.
    pub parent: Vec<NodeId>,
    /// `order[level_start[d]..level_start[d + 1]]` is level `d`.
    pub level_start: Vec<usize>,
    /// Reached members sorted by id, paired with their distance.
    pub by_id: Vec<(NodeId, u32)>,
    pub ecc: u32,
    /// Last round (relative to the start) in which the flood occupies an edge.
    pub last_transit: u32,
    /// Every transmission, duplicates included.
    pub messages: u64,
    /// Whether every scope member was reached.
    pub spans_scope: bool,
}

impl FloodPlan {
    pub fn distance(&self, v: NodeId) -> Option<u32> {
        self.by_id.binary_search_by_key(&v, |&(x, _)| x).ok().map(|i| self.by_id[i].1)
    }

    pub fn level(&self, d: u32) -> (&[NodeId], &[NodeId]) {
        let d = d as usize;
        if d + 1 >= self.level_start.len() {
            return (&[], &[]);
        }
        let r = self.level_start[d]..self.level_start[d + 1];
        (&self.order[r.clone()], &self.parent[r])
    }

    /// BFS over the scope given by `scope_neighbors`. `dist` is scratch of
    /// length n filled with `u32::MAX`; it is restored before returning.
    ///
    /// Levels are expanded in ascending id order, so the first node to
    /// discover `w` is its minimum-id neighbor one level up.
    pub fn build<'a, F>(
        origin: NodeId,
        group: u32,
        scope_size: usize,
        scope_neighbors: F,
        dist: &mut [u32],
    ) -> FloodPlan
    where
        F: Fn(NodeId) -> &'a [NodeId],
    {
        let mut order = vec![origin];
        let mut parent = vec![origin];
        let mut level_start = vec![0usize, 1];
        dist[origin as usize] = 0;
        let mut messages = 0u64;
        let mut level_internal;
        let mut d = 0u32;
        loop {
            let (lo, hi) = (level_start[d as usize], level_start[d as usize + 1]);
            level_internal = false;
            for i in lo..hi {
                let x = order[i];
                for &y in scope_neighbors(x) {
                    let dy = dist[y as usize];
                    if dy == u32::MAX {
                        dist[y as usize] = d + 1;
                        order.push(y);
                        parent.push(x);
                        messages += 1;
                    } else if dy >= d {
                        messages += 1;
                        level_internal |= dy == d;
                    }
                }
            }
            if order.len() == hi {
                break;
            }
            // Sort the new level by id, keeping each node with its parent.
            let mut next: Vec<(NodeId, NodeId)> =
                order[hi..].iter().copied().zip(parent[hi..].iter().copied()).collect();
            next.sort_unstable();
            for (k, (v, p)) in next.into_iter().enumerate() {
                order[hi + k] = v;
                parent[hi + k] = p;
            }
            level_start.push(order.len());
            d += 1;
        }
        let ecc = d;
        let mut by_id: Vec<(NodeId, u32)> = order.iter().map(|&v| (v, dist[v as usize])).collect();
        by_id.sort_unstable();
        for &v in &order {
            dist[v as usize] = u32::MAX;
        }
        FloodPlan {
            origin,
            group,
            spans_scope: order.len() == scope_size,
            order,
            parent,
            level_start,
            by_id,
            ecc,
            last_transit: if level_internal { ecc + 1 } else { ecc },
            messages,
        }
    }

    /// Same schedule as [`FloodPlan::build`] for a scope covering the
    /// whole graph, computed on adjacency bitsets.
    pub fn build_dense(origin: NodeId, group: u32, rows: &DenseRows) -> FloodPlan {
        let w = rows.words;
        let n = rows.n;
        let mut visited = vec![0u64; w];
        let mut closer = vec![0u64; w];
        let mut level_mask = vec![0u64; w];
        let mut next = vec![0u64; w];
        set_bit(&mut visited, origin);
        set_bit(&mut level_mask, origin);
        let mut order = vec![origin];
        let mut parent = vec![origin];
        let mut level_start = vec![0usize, 1];
        let mut messages = 0u64;
        let mut level_internal;
        let mut d = 0u32;
        loop {
            let (lo, hi) = (level_start[d as usize], level_start[d as usize + 1]);
            next.iter_mut().for_each(|x| *x = 0);
            level_internal = false;
            for &x in &order[lo..hi] {
                let row = rows.row(x);
                for k in 0..w {
                    next[k] |= row[k];
                    let far = row[k] & !closer[k];
                    messages += far.count_ones() as u64;
                    level_internal |= row[k] & level_mask[k] != 0;
                }
            }
            for k in 0..w {
                next[k] &= !visited[k];
                visited[k] |= next[k];
                closer[k] |= level_mask[k];
            }
            let before = order.len();
            for (k, &word) in next.iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let v = (k * 64 + bits.trailing_zeros() as usize) as NodeId;
                    bits &= bits - 1;
                    let row = rows.row(v);
                    let p = (0..w)
                        .find_map(|k| {
                            let m = row[k] & level_mask[k];
                            (m != 0).then(|| (k * 64 + m.trailing_zeros() as usize) as NodeId)
                        })
                        .expect("discovered from the previous level");
                    order.push(v);
                    parent.push(p);
                }
            }
            if order.len() == before {
                break;
            }
            std::mem::swap(&mut level_mask, &mut next);
            level_start.push(order.len());
            d += 1;
        }
        let mut by_id: Vec<(NodeId, u32)> = Vec::with_capacity(order.len());
        for dd in 0..level_start.len() - 1 {
            for &v in &order[level_start[dd]..level_start[dd + 1]] {
                by_id.push((v, dd as u32));
            }
        }
        by_id.sort_unstable();
        FloodPlan {
            origin,
            group,
            spans_scope: order.len() == n,
            order,
            parent,
            level_start,
            by_id,
            ecc: d,
            last_transit: if level_internal { d + 1 } else { d },
            messages,
        }
    }
}

fn set_bit(bits: &mut [u64], v: NodeId) {
    bits[v as usize / 64] |= 1 << (v % 64);
}

/// Adjacency rows as bitsets, one row of `words` words per node.
#[derive(Debug)]
pub(crate) struct DenseRows {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl DenseRows {
    pub fn new(n: usize, neighbors: impl Fn(NodeId) -> Vec<NodeId>) -> DenseRows {
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for u in 0..n {
            for w in neighbors(u as NodeId) {
                set_bit(&mut bits[u * words..(u + 1) * words], w);
            }
        }
        DenseRows { n, words, bits }
    }

    /// Worth using when a row is much shorter than an adjacency list.
    pub fn pays_off(n: usize, directed_edges: usize) -> bool {
        n <= 8192 && n.div_ceil(64) * 4 <= directed_edges / n.max(1)
    }

    fn row(&self, v: NodeId) -> &[u64] {
        let v = v as usize;
        &self.bits[v * self.words..(v + 1) * self.words]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_gnp, GnpParams};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn dense_and_list_schedules_agree(n in 1usize..200, p in 0.0f64..0.5, seed in 0u64..1000) {
            let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
            let rows = DenseRows::new(n, |u| g.neighbors(u).to_vec());
            let mut dist = vec![u32::MAX; n];
            for origin in [0, (n / 2) as NodeId, (n - 1) as NodeId] {
                let a = FloodPlan::build(origin, 3, n, |u| g.neighbors(u), &mut dist);
                let b = FloodPlan::build_dense(origin, 3, &rows);
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn cycle_of_eight() {
        let g = crate::graph::Graph::cycle(8);
        let mut dist = vec![u32::MAX; 8];
        let plan = FloodPlan::build(0, 0, 8, |u| g.neighbors(u), &mut dist);
        assert_eq!(plan.ecc, 4);
        assert_eq!(plan.messages, 8);
        assert_eq!(plan.last_transit, 4);
        assert_eq!(plan.level(4), (&[4][..], &[3][..]));
    }
}
