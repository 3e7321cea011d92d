//! Run the Method of Equal Shares on an election, with and without
//! completions, and print outcomes with funds used.

use pbtk::model::{build_election, UtilityModel};
use pbtk::pbformat::parse_pb;
use pbtk::rational::to_fixed;
use pbtk::rules::{Completion, RuleSpec};

const TOY: &str = include_str!("../tests/data/toy.pb");

fn main() {
    let file = parse_pb(TOY, "toy.pb").unwrap();
    let election = build_election(&file, None).unwrap();

    for completion in [
        Completion::None,
        Completion::Utilitarian,
        Completion::Eps,
        Completion::Add1,
        Completion::Add1U,
    ] {
        let spec = RuleSpec::equal_shares(UtilityModel::Cost, completion);
        let outcome = spec.execute(&election);
        println!(
            "{:<15} selected {:?}  cost {}  funds_used {}",
            spec.id(),
            outcome.selected_ids(&election),
            outcome.total_cost,
            to_fixed(&outcome.funds_used_fraction(&election), 6),
        );
        if let Some(payments) = &outcome.payments {
            let paid: pbtk::Rat = payments.values().sum();
            println!("                payment ledger total {}", to_fixed(&paid, 6));
        }
    }
}
