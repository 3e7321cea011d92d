//! Compute fairness and efficiency metrics for a rule outcome: average
//! utility, exclusion ratio, power inequality, Gini index, and funds used.

use pbtk::metrics::{average_utility, exclusion_ratio, funds_used, gini, power_inequality};
use pbtk::model::{build_election, UtilityModel};
use pbtk::pbformat::parse_pb;
use pbtk::rational::to_fixed;
use pbtk::rules::RuleSpec;
use pbtk::Rat;

const TOY: &str = include_str!("../tests/data/toy.pb");

fn main() {
    let election = build_election(&parse_pb(TOY, "toy.pb").unwrap(), None).unwrap();
    let spec = RuleSpec::utilitarian_greedy(UtilityModel::Cost);
    let selected = spec.execute(&election).selected;

    println!("outcome of {}: {:?}", spec.id(), {
        let mut ids: Vec<_> = selected.iter().map(|&p| &election.project(p).id).collect();
        ids.sort();
        ids
    });
    println!(
        "average utility:  {}",
        to_fixed(&average_utility(&election, &selected, UtilityModel::Cost), 6)
    );
    println!(
        "exclusion ratio:  {}",
        to_fixed(&exclusion_ratio(&election, &selected), 6)
    );
    println!(
        "power inequality: {}",
        to_fixed(&power_inequality(&election, &selected).unwrap(), 6)
    );
    let utilities: Vec<Rat> = (0..election.num_voters())
        .map(|v| election.utility(v, selected.iter().copied(), UtilityModel::Cost))
        .collect();
    println!("gini of utility:  {}", to_fixed(&gini(&utilities), 6));
    println!(
        "funds used:       {}",
        to_fixed(&funds_used(&election, &selected), 6)
    );
}
