//! Shared helpers for integration tests: seeded random election generation.
#![allow(dead_code)] // each test target compiles its own copy

use pbtk::model::{Election, Project};
use pbtk::rational::rat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TOY: &str = include_str!("../data/toy.pb");

/// A random approval election: 2..=12 projects with costs 1..=100,
/// 1..=50 voters with non-empty ballots, budget 50..=400.
pub fn random_approval_election(rng: &mut ChaCha8Rng) -> Election {
    let m = rng.gen_range(2..=12);
    let n = rng.gen_range(1..=50);
    let projects: Vec<Project> = (0..m)
        .map(|p| Project {
            id: format!("p{p}"),
            cost: rng.gen_range(1..=100),
            tags: Vec::new(),
            gps: None,
        })
        .collect();
    let voters: Vec<String> = (0..n).map(|v| format!("v{v}")).collect();
    let budget = rng.gen_range(50..=400);

    let mut triples = Vec::new();
    for v in 0..n {
        let mut approved: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.3)).collect();
        if approved.is_empty() {
            approved.push(rng.gen_range(0..m));
        }
        for p in approved {
            triples.push((format!("v{v}"), format!("p{p}"), rat(1)));
        }
    }
    Election::new(projects, voters, budget, triples, None).unwrap()
}

/// A random cardinal election: like the approval generator but each approved
/// project carries an integer score 1..=10.
pub fn random_cardinal_election(rng: &mut ChaCha8Rng) -> Election {
    let m = rng.gen_range(2..=12);
    let n = rng.gen_range(1..=50);
    let projects: Vec<Project> = (0..m)
        .map(|p| Project {
            id: format!("p{p}"),
            cost: rng.gen_range(1..=100),
            tags: Vec::new(),
            gps: None,
        })
        .collect();
    let voters: Vec<String> = (0..n).map(|v| format!("v{v}")).collect();
    let budget = rng.gen_range(50..=400);

    let mut triples = Vec::new();
    for v in 0..n {
        let mut scored: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.3)).collect();
        if scored.is_empty() {
            scored.push(rng.gen_range(0..m));
        }
        for p in scored {
            triples.push((format!("v{v}"), format!("p{p}"), rat(rng.gen_range(1..=10))));
        }
    }
    Election::new(projects, voters, budget, triples, None).unwrap()
}
