//! Compare Utilitarian Greedy with Equal Shares + Add1 on the same election:
//! outcomes, per-voter dominance, and the improvement margin.

use pbtk::metrics::dominance_pair;
use pbtk::model::{build_election, UtilityModel};
use pbtk::pbformat::parse_pb;
use pbtk::rational::to_fixed;
use pbtk::rules::{Completion, RuleSpec};

const TOY: &str = include_str!("../tests/data/toy.pb");

fn main() {
    let election = build_election(&parse_pb(TOY, "toy.pb").unwrap(), None).unwrap();

    let es_spec = RuleSpec::equal_shares(UtilityModel::Cost, Completion::Add1);
    let ug_spec = RuleSpec::utilitarian_greedy(UtilityModel::Cost);
    let es = es_spec.execute(&election);
    let ug = ug_spec.execute(&election);

    println!("{}: {:?}", es_spec.id(), es.selected_ids(&election));
    println!("{}: {:?}", ug_spec.id(), ug.selected_ids(&election));

    let pair = dominance_pair(&election, &es.selected, &ug.selected, UtilityModel::Cost);
    println!(
        "voters strictly preferring {}: {}",
        es_spec.id(),
        to_fixed(&pair.dominance_1_over_2, 6)
    );
    println!(
        "voters strictly preferring {}: {}",
        ug_spec.id(),
        to_fixed(&pair.dominance_2_over_1, 6)
    );
    println!("improvement margin: {}", to_fixed(&pair.improvement_margin, 6));
}
