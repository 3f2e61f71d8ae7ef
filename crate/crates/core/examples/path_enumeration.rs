//! Candidate propagation paths for an observed retweet.

use misinfo::{Edge, PathEnumConfig, SocialGraph};

fn main() {
    let mut g = SocialGraph::new();
    for v in 1..=14 {
        g.add_node(v, vec![]).unwrap();
    }
    for (u, v) in [(1, 2), (1, 3), (1, 6), (2, 6), (2, 5), (3, 7), (6, 14), (5, 14), (7, 14), (14, 9)] {
        g.add_edge(u, v).unwrap();
    }

    let target = Edge::new(6, 14);
    let set = g.enumerate_paths(1, target, &PathEnumConfig::default());
    println!("paths from 1 ending with {target}:");
    for p in &set.paths {
        println!("  {:?} ({} edges)", p.vertices(), p.len());
    }

    // Length bound drops the longer route.
    let short = g.enumerate_paths(1, target, &PathEnumConfig::new(2, 16).unwrap());
    println!("with at most 2 edges: {:?}", short.paths.iter().map(|p| p.vertices().to_vec()).collect::<Vec<_>>());

    let capped = g.enumerate_paths(1, Edge::new(14, 9), &PathEnumConfig::new(8, 2).unwrap());
    println!(
        "edge 14->9: kept {} paths, truncated = {}",
        capped.paths.len(),
        capped.truncated
    );
}
