//! Runs the full two-rollout campaign against the scripted mock teacher,
//! then re-verifies the shards it wrote.
//!
//!     cargo run -p softverify --example mock_campaign

use std::path::PathBuf;

use softverify::jsonl::read_jsonl;
use softverify::orchestrate::campaign::{FIRST_SHARD, SECOND_SHARD};
use softverify::orchestrate::{
    pair_and_verify, run_svg, CampaignConfig, CodebaseRef, EndpointConfig, MockTeacher, Prompts, SecondMode,
    ShellPolicy,
};
use softverify::{IdentityMode, Trajectory};

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tinyrepo");
    let config = CampaignConfig {
        endpoint: EndpointConfig::new("mock:", "mock-teacher"),
        codebases: vec![CodebaseRef { root: root.clone(), commit: "0000000".into(), repo_name: "tinyrepo".into() }],
        catalog_path: None,
        demonstrations_path: None,
        seed: 7,
        workers: 2,
        shell: ShellPolicy::default(),
        prompts: Prompts::default(),
        identity_mode: IdentityMode::WithPath,
        max_functions_per_codebase: None,
    };
    let out = tempfile::tempdir().expect("temp dir");
    // Mixed: each function's second rollout replays, half-replays or ignores the PR.
    let teacher = MockTeacher::new(vec![root]).with_second_mode(SecondMode::Mixed);
    let summary = run_svg(&config, &teacher, out.path()).expect("campaign runs");
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    println!("{} chat requests served", teacher.requests().len());

    let firsts: Vec<Trajectory> = read_jsonl(&out.path().join(FIRST_SHARD)).unwrap();
    let seconds: Vec<Trajectory> = read_jsonl(&out.path().join(SECOND_SHARD)).unwrap();
    let (records, _) = pair_and_verify(&firsts, &seconds, IdentityMode::PathAgnostic).unwrap();
    for r in records {
        println!("{} r={:.2} {:?}", r.trajectory_id, r.r, r.bucket);
    }
}
