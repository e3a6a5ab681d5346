//! Reference runs frozen once and compared on every build. Set
//! `DRONEDIALOG_BLESS=1` to rewrite the transcript files after an
//! intentional behaviour change.

mod common;

use std::collections::BTreeSet;

use dronedialog::controller::ScriptedController;
use dronedialog::engine::{run_episode, EpisodeConfig, EpisodeOutcome, Transcript, FLAG_SUMMARY, FLAG_VOTE_FOR};
use dronedialog::harness::{run_trial, TrialSpec, Variant};

fn reference_episode(environment: &str, variant: Variant, seed: u64) -> EpisodeOutcome {
    let m = common::default_matrix();
    let scenes = m.load_scenes().unwrap();
    let scene = scenes.get(environment, variant).unwrap();
    let config = m.episode.clone().with_seed(seed);
    run_episode(scene, &config, &ScriptedController::default(), &scenes.oracle(m.noise)).unwrap()
}

fn golden_path(name: &str) -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("DRONEDIALOG_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from the frozen reference run");
}

#[test]
fn mountain_bootstrap_score() {
    let out = reference_episode("mountain_landscape", Variant::Clean, 0);
    let first = &out.state.transcript.records[0];
    assert_eq!(first.match_score, Some(1.0));
    assert_eq!(first.caption.as_deref(), Some("a snowy mountain"));
}

#[test]
fn lake_fire_summary_text() {
    let out = reference_episode("lake", Variant::Near, 0);
    let summary = out
        .state
        .transcript
        .records
        .iter()
        .find(|r| r.has_flag(FLAG_SUMMARY))
        .unwrap();
    assert_eq!(
        summary.directive_text,
        "description: I observed burning boat, lighthouse.\n\
         caption: a burning boat and a lighthouse\n\
         validate: burning boat\n\
         validate: lighthouse"
    );
}

#[test]
fn golden_transcripts() {
    for (env, variant, seed) in [
        ("lake", Variant::Near, 0),
        ("mountain_landscape", Variant::Clean, 0),
        ("snowy_road", Variant::Occluded, 4),
    ] {
        let out = reference_episode(env, variant, seed);
        check_golden(
            &format!("{env}_{variant}_{seed}.jsonl"),
            &out.state.transcript.to_jsonl(),
        );
    }
}

#[test]
fn explanation_pairs_recount_from_golden_transcript() {
    for name in [
        "lake_near_0.jsonl",
        "mountain_landscape_clean_0.jsonl",
        "snowy_road_occluded_4.jsonl",
    ] {
        let text = std::fs::read_to_string(golden_path(name)).unwrap();
        let transcript = Transcript::from_jsonl(&text).unwrap();
        let supported: BTreeSet<&str> = transcript
            .records
            .iter()
            .filter(|r| r.has_flag(FLAG_VOTE_FOR))
            .filter_map(|r| r.flag_value("target"))
            .collect();
        let stem = name.trim_end_matches(".jsonl");
        let (rest, seed) = stem.rsplit_once('_').unwrap();
        let (env, variant) = rest.rsplit_once('_').unwrap();
        let variant = match variant {
            "near" => Variant::Near,
            "clean" => Variant::Clean,
            "occluded" => Variant::Occluded,
            other => panic!("{other}"),
        };
        let out = reference_episode(env, variant, seed.parse().unwrap());
        assert_eq!(out.report.explanation_pairs.len(), supported.len(), "{name}");
    }
}

#[test]
fn mountain_detection_rates_over_seeds_zero_to_nine() {
    let m = common::default_matrix();
    let scenes = m.load_scenes().unwrap();
    let oracle = scenes.oracle(m.noise);
    let controller = ScriptedController::default();
    for (variant, baseline, proposed) in [(Variant::Near, 9, 10), (Variant::Far, 0, 6), (Variant::Occluded, 0, 9)] {
        let scene = scenes.get("mountain_landscape", variant).unwrap();
        let (mut b, mut p) = (0, 0);
        for seed in 0..10 {
            let spec = TrialSpec {
                environment: "mountain_landscape".into(),
                variant,
                seed,
            };
            let o = run_trial(&spec, scene, &m.episode, &controller, &oracle);
            assert!(o.violations.is_empty(), "{:?}", o.violations);
            b += u32::from(o.result.baseline_detected);
            p += u32::from(o.result.proposed_detected);
        }
        assert_eq!((b, p), (baseline, proposed), "{variant}");
    }
}

#[test]
fn configs_from_the_matrix_match_engine_defaults() {
    let m = common::default_matrix();
    assert_eq!(m.episode, EpisodeConfig::default());
}
