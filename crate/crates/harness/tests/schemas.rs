mod common;

use common::{schema, validate};
use serde_json::{json, Value};
use subgoal_harness::run::{train, RunReport};
use subgoal_harness::{ExperimentConfig, LearnerKind, Mode, TaskKind};

fn assert_valid(schema_name: &str, value: &Value) {
    let errors = validate(&schema(schema_name), value);
    assert!(errors.is_empty(), "{schema_name}: {errors:#?}");
}

#[test]
fn schemas_parse() {
    for name in ["config.schema.json", "report.schema.json", "eval.schema.json"] {
        assert!(schema(name).is_object(), "{name}");
    }
}

#[test]
fn every_default_config_matches_the_schema() {
    for task in [TaskKind::Cmag, TaskKind::Bm, TaskKind::Gridnav] {
        for mode in [Mode::Curriculum, Mode::Flat] {
            for learner in [LearnerKind::Dqn, LearnerKind::Ppo, LearnerKind::Tabular] {
                let Ok(c) = ExperimentConfig::defaults(task, mode, learner, 9) else {
                    assert_eq!(learner, LearnerKind::Tabular);
                    continue;
                };
                assert_valid("config.schema.json", &serde_json::to_value(&c).unwrap());
            }
        }
    }
}

#[test]
fn validator_catches_violations() {
    let s = schema("config.schema.json");
    assert!(!validate(&s, &json!({"task": "bm"})).is_empty());
    assert!(!validate(&s, &json!({"task": "chess", "seed": 1})).is_empty());
    assert!(!validate(&s, &json!({"task": "bm", "seed": 1, "extra": 0})).is_empty());
    assert!(!validate(&s, &json!({"task": "bm", "seed": -1})).is_empty());
    assert!(validate(&s, &json!({"task": "bm", "seed": 1})).is_empty());
}

#[test]
fn run_outputs_match_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let text = common::tiny_config("curriculum", 400, 1);
    let config = subgoal_harness::config::parse_config(&text, "tiny.json".as_ref()).unwrap();
    let out = train(&config, dir.path(), false).unwrap();
    let report: Value = serde_json::to_value(&out.report).unwrap();
    assert_valid("report.schema.json", &report);
    assert_valid("eval.schema.json", &serde_json::to_value(out.report.eval.as_ref().unwrap()).unwrap());
    let back: RunReport = serde_json::from_value(report).unwrap();
    assert_eq!(back, out.report);
}
