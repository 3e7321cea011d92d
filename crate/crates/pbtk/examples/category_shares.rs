//! Per-category vote and spending shares: how well an outcome's spending
//! mirrors what voters asked for, tag by tag.

use pbtk::metrics::tag_shares;
use pbtk::model::{build_election, UtilityModel};
use pbtk::pbformat::parse_pb;
use pbtk::rational::to_fixed;
use pbtk::rules::{Completion, RuleSpec};

const TOY: &str = include_str!("../tests/data/toy.pb");

fn main() {
    let election = build_election(&parse_pb(TOY, "toy.pb").unwrap(), None).unwrap();

    for spec in [
        RuleSpec::utilitarian_greedy(UtilityModel::Cost),
        RuleSpec::equal_shares(UtilityModel::Cost, Completion::Add1U),
    ] {
        let selected = spec.execute(&election).selected;
        let shares = tag_shares(&election, &selected);
        println!("{}:", spec.id());
        println!("  {:<12} {:>10} {:>14}", "tag", "vote", "spending");
        let tags: std::collections::BTreeSet<_> = shares
            .vote_shares
            .keys()
            .chain(shares.spending_shares.keys())
            .collect();
        let zero = pbtk::Rat::from_integer(0.into());
        for tag in tags {
            println!(
                "  {:<12} {:>10} {:>14}",
                tag,
                to_fixed(shares.vote_shares.get(tag).unwrap_or(&zero), 6),
                to_fixed(shares.spending_shares.get(tag).unwrap_or(&zero), 6),
            );
        }
        println!("  l2 distance: {:.6}\n", shares.l2);
    }
}
