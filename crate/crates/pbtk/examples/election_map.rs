//! Build an election map: Jaccard distances between projects' supporter
//! sets, a seeded SMACOF embedding into the plane, and per-project map data
//! comparing Equal Shares with Utilitarian Greedy.

use pbtk::geometry::{export_map, jaccard_matrix, mds_embed, normalize_distances, PositionSource};
use pbtk::model::{build_election, UtilityModel};
use pbtk::pbformat::parse_pb;
use pbtk::rules::{Completion, RuleSpec};

const TOY: &str = include_str!("../tests/data/toy.pb");

fn main() {
    let election = build_election(&parse_pb(TOY, "toy.pb").unwrap(), None).unwrap();

    let distances = jaccard_matrix(&election).unwrap();
    println!("projects: {:?} (excluded: {:?})", distances.labels, distances.excluded);

    let normalized = normalize_distances(&distances);
    let embedding = mds_embed(&normalized, 42, 1000, 1e-9);
    println!(
        "embedding stress {:.6} after {} iterations (degenerate: {})",
        embedding.stress, embedding.iterations, embedding.degenerate
    );

    let es = RuleSpec::equal_shares(UtilityModel::Cost, Completion::Add1U).execute(&election);
    let ug = RuleSpec::utilitarian_greedy(UtilityModel::Cost).execute(&election);
    let map = export_map(&election, &PositionSource::Embedding(&embedding), &es, &ug).unwrap();
    for datum in &map {
        println!(
            "project {:<3} at ({:+.4}, {:+.4})  cost_r {:>6.2}  votes_r {:>5.2}  {:?}",
            datum.project_id,
            datum.position.0,
            datum.position.1,
            datum.cost_radius,
            datum.votes_radius,
            datum.status
        );
    }
}
