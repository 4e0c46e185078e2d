//! Return-of-object house case shared by unit tests.

use alloc::string::String;

use crate::augment::{SlotHolderSet, SlotSchema, Template};
use crate::lang::parse_atom;

pub fn schema() -> SlotSchema {
    SlotSchema {
        contract_id: String::from("return_object"),
        roles: [
            "Object",
            "Accessory",
            "OriginalOwner",
            "Creditor",
            "Obligator",
        ]
        .map(String::from)
        .to_vec(),
        goal_template: parse_atom("return_object(\"{Creditor}\",\"{Object}\")").unwrap(),
    }
}

pub fn template_one() -> Template {
    Template {
        id: String::from("t1"),
        contract_id: String::from("return_object"),
        text: String::from(
            "After {OriginalOwner} inherited {Object} from {Creditor}, {Creditor} came across \
             {Obligator} at {Object}, who had erected {Accessory}. {Creditor} requested \
             {Obligator} to leave {Object} and dismantle {Accessory}. In response, {Obligator} \
             asserted that they rented {Object} from {OriginalOwner}, thus claiming rights \
             over {Accessory}. Will {Creditor} be able to reclaim {Object}?",
        ),
        fact_templates: [
            "original_ownership(\"{OriginalOwner}\",\"{Object}\")",
            "transfer(\"{OriginalOwner}\",\"{Creditor}\",\"{Object}\")",
            "occupancy(\"{Obligator}\",\"{Object}\")",
            "existence_of_accessory(\"{Accessory}\",\"{Object}\")",
        ]
        .iter()
        .map(|s| parse_atom(s).unwrap())
        .collect(),
    }
}

pub fn slot_holders_one() -> SlotHolderSet {
    [
        ("Object", "the house"),
        ("Accessory", "garage A"),
        ("OriginalOwner", "sarah"),
        ("Creditor", "john"),
        ("Obligator", "alex"),
    ]
    .into_iter()
    .collect()
}

/// A sibling template of the same contract and fact schema.
pub fn template_two() -> Template {
    Template {
        id: String::from("t2"),
        contract_id: String::from("return_object"),
        text: String::from(
            "{OriginalOwner} owned {Object} and later passed it to {Creditor}. {Obligator} \
             lives in {Object} and built {Accessory} there. {Creditor} wants {Obligator} out \
             of {Object}. Can {Creditor} recover {Object}?",
        ),
        fact_templates: template_one().fact_templates,
    }
}

pub fn slot_holders_two() -> SlotHolderSet {
    [
        ("Object", "the apartment"),
        ("Accessory", "balcony C"),
        ("OriginalOwner", "maria"),
        ("Creditor", "david"),
        ("Obligator", "kevin"),
    ]
    .into_iter()
    .collect()
}
