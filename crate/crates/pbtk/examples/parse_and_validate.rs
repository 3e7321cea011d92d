//! Parse a `.pb` election file, run the validator, and round-trip it back
//! to text.

use pbtk::pbformat::{parse_pb, serialize, validate};

const TOY: &str = include_str!("../tests/data/toy.pb");

fn main() {
    let file = parse_pb(TOY, "toy.pb").expect("well-formed file");
    println!(
        "{} / {}: {} projects, {} votes, budget {}",
        file.meta_get("unit").unwrap(),
        file.meta_get("instance").unwrap(),
        file.projects.len(),
        file.votes.len(),
        file.budget().unwrap()
    );

    let report = validate(&file);
    println!("valid: {}", report.is_valid());
    for d in &report.diagnostics {
        println!("  [{:?}] {} at {}: {}", d.severity, d.code, d.location, d.message);
    }

    let round_trip = serialize(&file);
    let reparsed = parse_pb(&round_trip, "toy.pb").expect("serializer output parses");
    assert_eq!(reparsed, file, "round trip is the identity");
    println!("round trip: identical");
}
