use std::collections::{HashMap, HashSet};

use dhc::dhc::{dhc1, dhc1_colors, dhc2, dhc2_colors, merge_levels, DhcOptions};
use dhc::graph::{generate_gnp, GnpParams, NodeId};
use dhc::rotation::run_dra_with_transcript;
use dhc::runtime::step_budget;
use dhc::upcast::{sample_size, upcast, UpcastOptions};
use dhc::verify::check_certificate;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dra_counts_one_step_per_draw(n in 3usize..60, p in 0.15f64..0.9, seed in 0u64..10_000) {
        let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
        let run = run_dra_with_transcript(&g, seed, 7.0);
        let rep = &run.report;
        prop_assert_eq!(rep.congest.violations, 0);
        prop_assert!(rep.steps <= step_budget(n, 7.0));

        let mut pairs = HashSet::new();
        let mut draws = 0u64;
        for line in run.transcript.as_ref().unwrap() {
            let w: Vec<&str> = line.split(' ').collect();
            if w[3] != "progress" {
                continue;
            }
            draws += 1;
            let (x, y): (NodeId, NodeId) = (w[1].parse().unwrap(), w[2].parse().unwrap());
            prop_assert!(g.has_edge(x, y));
            prop_assert!(pairs.insert((x.min(y), x.max(y))), "edge {}-{} drawn twice", x, y);
        }
        prop_assert_eq!(draws, rep.steps);

        match &run.certificate {
            Some(c) => {
                prop_assert!(rep.success);
                prop_assert_eq!(check_certificate(&g, c), Ok(()));
            }
            None => prop_assert!(!rep.success && rep.failure_reason.is_some()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dhc1_partitions_and_terminals(n in 30usize..200, p in 0.4f64..0.9, seed in 0u64..10_000) {
        let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
        let run = dhc1(&g, seed, &DhcOptions::default());
        let t = &run.trace;
        prop_assert_eq!(t.num_colors, dhc1_colors(n));
        prop_assert_eq!(t.partition_sizes.iter().sum::<u32>() as usize, n);
        for (c, &size) in t.partition_sizes.iter().enumerate() {
            let members = t.colors.iter().filter(|&&x| x == c as u32 + 1).count();
            prop_assert_eq!(members, size as usize);
        }
        for &(u, v) in &t.terminals {
            prop_assert!(g.has_edge(u, v));
            prop_assert_eq!(t.colors[u as usize], t.colors[v as usize]);
        }
        prop_assert_eq!(run.report.congest.violations, 0);
        if let Some(c) = &run.certificate {
            prop_assert!(run.report.success);
            prop_assert_eq!(check_certificate(&g, c), Ok(()));
        }
    }

    #[test]
    fn dhc2_builds_the_smallest_bridge_of_each_pair(n in 60usize..300, p in 0.5f64..0.95, seed in 0u64..10_000) {
        let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
        let opts = DhcOptions { check_levels: true, trace_candidates: true, ..DhcOptions::default() };
        let run = dhc2(&g, seed, 0.5, &opts);
        let t = &run.trace;
        let k = dhc2_colors(n, 0.5);
        prop_assert_eq!(t.num_colors, k);
        prop_assert_eq!(run.report.congest.violations, 0);
        if run.report.success {
            prop_assert_eq!(t.levels.len() as u32, merge_levels(k));
        }
        for lt in &t.levels {
            // Pair of a node at this level: colors halve once per earlier level.
            let pair = |v: NodeId| t.colors[v as usize].div_ceil(1 << (lt.level - 1)).div_ceil(2);
            let mut best = HashMap::new();
            for b in &lt.all_candidates {
                prop_assert!(g.has_edge(b.a, b.b) && g.has_edge(b.sa, b.b2));
                prop_assert_eq!(pair(b.a), pair(b.b));
                let e = best.entry(pair(b.a)).or_insert(*b);
                if b.key() < e.key() {
                    *e = *b;
                }
            }
            prop_assert_eq!(lt.winners.len() as u32, lt.bridged);
            for w in &lt.winners {
                prop_assert_eq!(Some(w), best.get(&pair(w.a)));
            }
            if run.report.success {
                prop_assert_eq!(lt.bridged, lt.pairs);
                prop_assert_eq!(lt.cycles_valid, Some(true));
            }
        }
        if let Some(c) = &run.certificate {
            prop_assert_eq!(check_certificate(&g, c), Ok(()));
        }
    }

    #[test]
    fn upcast_collects_every_sample(n in 20usize..200, p in 0.3f64..0.9, seed in 0u64..10_000) {
        let g = generate_gnp(GnpParams::new(n, p, seed).unwrap());
        let opts = UpcastOptions::default();
        let run = upcast(&g, seed, &opts);
        let t = &run.trace;
        prop_assert_eq!(run.report.congest.violations, 0);
        let most: usize = (0..n as NodeId).map(|v| sample_size(n, g.degree(v), opts.c_prime)).sum();
        if run.report.success {
            prop_assert!(t.sampled_edges <= most);
            prop_assert!(t.records >= t.sampled_edges as u64);
            prop_assert_eq!(t.records, most as u64);
            prop_assert!(t.tree_depth <= g.eccentricity(t.root).unwrap());
            prop_assert_eq!(check_certificate(&g, run.certificate.as_ref().unwrap()), Ok(()));
        }
    }
}
