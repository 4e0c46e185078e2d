use alloc::collections::VecDeque;
use alloc::string::ToString;

use super::*;
use crate::augment::check_slot_set;
use crate::augment::validate_template;
use crate::fixtures::{schema, slot_holders_one, template_one};

fn request(want_templates: usize, want_slot_sets: usize) -> GenerationRequest {
    GenerationRequest {
        schema: schema(),
        seed_templates: alloc::vec![template_one()],
        seed_slot_sets: alloc::vec![slot_holders_one()],
        want_templates,
        want_slot_sets,
    }
}

fn bank() -> ContractBank {
    let s = |v: &[&str]| v.iter().map(|x| String::from(*x)).collect::<Vec<_>>();
    ContractBank {
        fragments: s(&[
            "{OriginalOwner} owned {Object} for years.",
            "{OriginalOwner} sold {Object} to {Creditor}.",
            "{Obligator} moved into {Object}.",
            "{Obligator} built {Accessory} next to {Object}.",
            "{Creditor} asked {Obligator} to leave.",
            "{Obligator} said {OriginalOwner} had allowed it.",
            "{Accessory} still stands.",
            "Nobody objected at first.",
        ]),
        connectors: s(&[" ", " Later, ", " Meanwhile, "]),
        question: String::from("Can {Creditor} recover {Object}?"),
        values: [
            ("Object", s(&["the house", "the apartment", "the cabin"])),
            ("Accessory", s(&["garage A", "balcony C", "shed B"])),
            ("OriginalOwner", s(&["sarah", "maria", "olga"])),
            ("Creditor", s(&["john", "david", "peter"])),
            ("Obligator", s(&["alex", "kevin", "lena"])),
        ]
        .into_iter()
        .map(|(k, v)| (String::from(k), v))
        .collect(),
    }
}

fn offline(seed: u64) -> OfflineBackendConfig {
    OfflineBackendConfig {
        seed,
        banks: [(String::from("return_object"), bank())]
            .into_iter()
            .collect(),
    }
}

#[test]
fn slot_set_prompt_embeds_seed_json() {
    let msgs = build_prompt(&request(0, 3), AssetKind::SlotSets);
    assert_eq!(msgs.len(), 2);
    assert_eq!(msgs[0].role, "system");
    let user = &msgs[1].content;
    assert!(user.contains(
        r#"{"Object":"the house","Accessory":"garage A","OriginalOwner":"sarah","Creditor":"john","Obligator":"alex"}"#
    ));
    assert!(user.contains("Write 3 new slot holder sets"));
    assert!(user.ends_with("Reply with a JSON array only."));
    assert_eq!(msgs, build_prompt(&request(0, 3), AssetKind::SlotSets));
}

#[test]
fn zero_want_prompt_is_well_formed() {
    let msgs = build_prompt(&request(0, 0), AssetKind::Templates);
    assert!(msgs[1].content.contains("Write 0 new templates"));
    assert!(msgs[1].content.contains("{OriginalOwner}"));
}

#[test]
fn fenced_slot_sets_parse() {
    let raw = "Here you go:\n```json\n[\n {\"Object\":\"the cabin\",\"Accessory\":\"shed B\",\"OriginalOwner\":\"olga\",\"Creditor\":\"peter\",\"Obligator\":\"lena\"},\n {\"Object\":\"the barn\",\"Accessory\":\"fence D\",\"OriginalOwner\":\"ana\",\"Creditor\":\"tom\",\"Obligator\":\"ivy\"}\n]\n```";
    let p = parse_generation_output(raw, AssetKind::SlotSets, &schema()).unwrap();
    assert_eq!(p.slot_sets.len(), 2);
    assert!(p.rejects.is_empty());
}

#[test]
fn item_missing_a_role_is_rejected() {
    let raw =
        r#"[{"Object":"the barn","Accessory":"fence D","OriginalOwner":"ana","Creditor":"tom"}]"#;
    let p = parse_generation_output(raw, AssetKind::SlotSets, &schema()).unwrap();
    assert!(p.slot_sets.is_empty());
    assert_eq!(p.rejects[0].reason, "missing role Obligator");

    let raw = r#"["{Creditor} sued {Obligator} over {Object} and {Accessory}."]"#;
    let p = parse_generation_output(raw, AssetKind::Templates, &schema()).unwrap();
    assert_eq!(p.rejects[0].reason, "missing role OriginalOwner");
}

#[test]
fn prose_only_has_no_json() {
    assert_eq!(
        parse_generation_output("Sorry, I cannot", AssetKind::Templates, &schema()),
        Err(GenError::NoJsonFound)
    );
    assert_eq!(
        parse_generation_output("see [note] here", AssetKind::Templates, &schema()),
        Err(GenError::NoJsonFound)
    );
}

#[test]
fn templates_with_unknown_placeholder_are_rejected() {
    let raw = r#"Sure. ["{Creditor} met {Judge}.", {"text": "{OriginalOwner} gave {Object} to {Creditor}; {Obligator} built {Accessory}. Who gets {Object}?"}]"#;
    let p = parse_generation_output(raw, AssetKind::Templates, &schema()).unwrap();
    assert_eq!(p.templates.len(), 1);
    assert_eq!(p.rejects.len(), 1);
    assert_eq!(p.rejects[0].reason, "placeholder {Judge} not in schema");
}

#[test]
fn offline_is_deterministic_and_valid() {
    let a = generate_assets(Backend::Offline(&offline(7)), &request(3, 5)).unwrap();
    let b = generate_assets(Backend::Offline(&offline(7)), &request(3, 5)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.templates.len(), 3);
    assert_eq!(a.slot_sets.len(), 5);
    for t in &a.templates {
        assert!(validate_template(t, &schema()).is_empty());
        for role in &schema().roles {
            assert!(t.text.contains(&alloc::format!("{{{role}}}")));
        }
        assert!(t.text.ends_with("Can {Creditor} recover {Object}?"));
        assert_eq!(t.fact_templates, template_one().fact_templates);
    }
    for s in &a.slot_sets {
        assert!(check_slot_set(s, &schema()).is_ok());
    }
    let c = generate_assets(Backend::Offline(&offline(8)), &request(3, 5)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn offline_slot_sets_draw_from_the_bank() {
    let a = generate_offline(&offline(1), &request(0, 40)).unwrap();
    assert_eq!(a.slot_sets.len(), 40);
    let distinct: alloc::collections::BTreeSet<_> = a.slot_sets.iter().collect();
    assert_eq!(distinct.len(), 40);
    assert!(a
        .slot_sets
        .iter()
        .any(|s| s.get("Object") == Some("the apartment")));
}

#[test]
fn offline_insufficient_banks() {
    let mut cfg = offline(1);
    cfg.banks
        .get_mut("return_object")
        .unwrap()
        .values
        .get_mut("Creditor")
        .unwrap()
        .truncate(1);
    assert!(matches!(
        generate_offline(&cfg, &request(1, 1)),
        Err(GenError::InsufficientBank { .. })
    ));
    let mut cfg = offline(1);
    cfg.banks
        .get_mut("return_object")
        .unwrap()
        .fragments
        .retain(|f| !f.contains("{Accessory}"));
    assert!(matches!(
        generate_offline(&cfg, &request(1, 1)),
        Err(GenError::InsufficientBank { reason, .. }) if reason.contains("Accessory")
    ));
    assert!(generate_offline(&OfflineBackendConfig::default(), &request(1, 1)).is_err());
}

struct Canned {
    replies: VecDeque<String>,
    asked: Vec<Vec<Message>>,
}

impl ChatCompletion for Canned {
    fn complete(&mut self, messages: &[Message]) -> Result<String, BackendError> {
        self.asked.push(messages.to_vec());
        self.replies
            .pop_front()
            .ok_or_else(|| BackendError::Transport(String::from("no more replies")))
    }
}

#[test]
fn llm_drops_invalid_and_retries_shortfall_once() {
    let good = "{OriginalOwner} gave {Object} to {Creditor}; {Obligator} built {Accessory}. Who gets {Object}?";
    let mut c = Canned {
        replies: [
            alloc::format!(r#"["{{Creditor}} met {{Judge}}.", "{good}"]"#),
            String::from("[]"),
        ]
        .into_iter()
        .collect(),
        asked: Vec::new(),
    };
    let out = generate_assets(Backend::Llm(&mut c), &request(2, 0)).unwrap();
    assert_eq!(out.templates.len(), 1);
    assert_eq!(out.templates[0].id, "llm0");
    assert_eq!(
        out.templates[0].fact_templates,
        template_one().fact_templates
    );
    assert_eq!(out.rejects.len(), 1);
    assert_eq!(out.shortfall.get(&AssetKind::Templates), Some(&1));
    assert_eq!(c.asked.len(), 2);
    assert!(c.asked[1][1].content.contains("Write 1 new templates"));
}

#[test]
fn llm_errors_propagate() {
    let mut c = Canned {
        replies: VecDeque::new(),
        asked: Vec::new(),
    };
    assert!(matches!(
        generate_assets(Backend::Llm(&mut c), &request(0, 1)),
        Err(GenError::Backend(BackendError::Transport(_)))
    ));
}

#[test]
fn request_body_and_response() {
    let cfg = LlmBackendConfig::default();
    assert_eq!(cfg.temperature, 0.8);
    let body = cfg.request_body(&[Message::new("user", "hi")]);
    assert_eq!(
        body.to_string(),
        r#"{"messages":[{"content":"hi","role":"user"}],"model":"gpt-3.5-turbo","temperature":0.8}"#
    );
    assert_eq!(
        response_content(r#"{"choices":[{"message":{"role":"assistant","content":"[1]"}}]}"#),
        Ok(String::from("[1]"))
    );
    assert!(matches!(
        response_content("{}"),
        Err(BackendError::Malformed(_))
    ));
    assert_eq!(cfg.backoff_for(0), 500);
    assert_eq!(cfg.backoff_for(2), 2000);
}

#[test]
fn request_needs_seeds() {
    let mut r = request(1, 1);
    r.seed_slot_sets.clear();
    assert!(matches!(r.validate(), Err(GenError::InvalidRequest(_))));
}
