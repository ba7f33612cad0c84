use std::collections::BTreeSet;

use dhc::graph::{Graph, NodeId};
use dhc::verify::{brute_force_hamiltonian, check_certificate, naive_hamiltonian, Certificate};

const N: usize = 6;

fn pairs() -> Vec<(usize, usize)> {
    (0..N).flat_map(|a| (a + 1..N).map(move |b| (a, b))).collect()
}

fn permutations(k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for x in 0..k {
        if !cur.contains(&x) {
            cur.push(x);
            permutations(k, cur, out);
            cur.pop();
        }
    }
}

/// Smallest edge mask over all relabelings.
fn canonical(mask: u32, pairs: &[(usize, usize)], perms: &[Vec<usize>], index: &[[usize; N]; N]) -> u32 {
    perms
        .iter()
        .map(|pi| {
            pairs
                .iter()
                .enumerate()
                .filter(|&(i, _)| mask >> i & 1 == 1)
                .map(|(_, &(a, b))| 1u32 << index[pi[a]][pi[b]])
                .sum()
        })
        .min()
        .unwrap()
}

fn graph(mask: u32, pairs: &[(usize, usize)]) -> Graph {
    let edges =
        pairs.iter().enumerate().filter(|&(i, _)| mask >> i & 1 == 1).map(|(_, &(a, b))| (a as NodeId, b as NodeId));
    Graph::from_edges(N, edges).unwrap()
}

#[test]
fn every_six_node_graph_agrees_with_the_permutation_check() {
    let pairs = pairs();
    let mut index = [[0usize; N]; N];
    for (i, &(a, b)) in pairs.iter().enumerate() {
        index[a][b] = i;
        index[b][a] = i;
    }
    let mut perms = Vec::new();
    permutations(N, &mut Vec::new(), &mut perms);
    assert_eq!(perms.len(), 720);

    let classes: BTreeSet<u32> = (0..1u32 << pairs.len()).map(|m| canonical(m, &pairs, &perms, &index)).collect();
    assert_eq!(classes.len(), 156);

    let mut connected = 0;
    let mut hamiltonian = 0;
    for &m in &classes {
        let g = graph(m, &pairs);
        if !g.is_connected() {
            continue;
        }
        connected += 1;
        let found = brute_force_hamiltonian(&g).unwrap();
        assert_eq!(found.is_some(), naive_hamiltonian(&g), "mask {m:#b}");
        if let Some(order) = found {
            hamiltonian += 1;
            assert_eq!(check_certificate(&g, &Certificate::from_cycle(&order)), Ok(()));
        }
    }
    assert_eq!(connected, 112);
    assert!(hamiltonian > 0 && hamiltonian < connected);
}
