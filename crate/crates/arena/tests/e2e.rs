//! Drives the `biomotion` binary through generate, execute, serve and replay
//! with canned model responses.

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Stdio};

use biomotion_core::motion::{golden_script, synthesize, Action, MotionSpec, RenderOptions};
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_biomotion");

fn run(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(BIN)
        .arg("--config")
        .arg(dir.join("arena.toml"))
        .args(["--log", "warn"])
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fenced(action: Action) -> String {
    let small = RenderOptions { width: 96, height: 96, dot_radius: 2 };
    let traj = synthesize(&MotionSpec::basic(action), 0.5, 8.0).unwrap();
    format!("Here is the program.\n\n```python\n{}```\n", golden_script(&traj, &small))
}

fn setup(dir: &Path) {
    let responses = dir.join("responses");
    std::fs::create_dir_all(&responses).unwrap();
    std::fs::write(responses.join("model-walker.txt"), fenced(Action::Walking)).unwrap();
    std::fs::write(responses.join("model-bower.txt"), fenced(Action::Bowing)).unwrap();
    std::fs::write(responses.join("model-refuser.txt"), "Sorry, I cannot help with animations.").unwrap();
    std::fs::write(
        dir.join("roster.toml"),
        r#"
[providers.canned]
kind = "static"
endpoint = ""
response_dir = "responses"

[[models]]
id = "model-walker"
provider = "canned"

[[models]]
id = "model-bower"
provider = "canned"

[[models]]
id = "model-refuser"
provider = "canned"
"#,
    )
    .unwrap();
    std::fs::write(
        dir.join("arena.toml"),
        "[paths]\nroster = \"roster.toml\"\n[server]\nseed = 11\n[sandbox.limits]\nwall_clock_secs = 30.0\n",
    )
    .unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn generate_execute_serve_replay() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    setup(dir);

    let generated = run(dir, &["generate", "--all-models", "--spec", "walking/base", "--spec", "bowing/base"]);
    assert_eq!(generated.lines().count(), 6, "{generated}");
    let executed = run(dir, &["execute"]);
    let outcomes: Vec<(&str, &str)> = executed
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[1], f[3])
        })
        .collect();
    assert_eq!(outcomes.len(), 6);
    for (model, outcome) in &outcomes {
        let want = if *model == "model-refuser" { "extraction_failed" } else { "rendered" };
        assert_eq!(*outcome, want, "{model}");
    }
    assert_eq!(run(dir, &["execute"]), "", "already executed artifacts are skipped");

    let mut server = Command::new(BIN)
        .arg("--config")
        .arg(dir.join("arena.toml"))
        .args(["--log", "warn", "serve", "--bind", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let base = line.trim().strip_prefix("listening on ").expect(&line).to_string();

    let client = reqwest::Client::new();
    for i in 0..20 {
        let body = client.get(format!("{base}/api/battle")).send().await.unwrap().text().await.unwrap();
        assert!(!body.contains("model-"), "model identity leaked: {body}");
        let view: Value = serde_json::from_str(&body).unwrap();
        for a in view["animations"].as_array().unwrap() {
            let media = client.get(format!("{base}{}", a["media_url"].as_str().unwrap())).send().await.unwrap();
            assert_eq!(media.status(), 200);
            assert_eq!(media.headers()["content-type"], "image/gif");
        }
        let vote = ["A", "B", "tie", "A", "both_bad"][i % 5];
        let ack: Value = client
            .post(format!("{base}/api/vote"))
            .json(&json!({"battle_id": view["battle_id"], "vote": vote, "rater_id": "e2e"}))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        let revealed: Vec<&str> = ack["sides"].as_array().unwrap().iter().map(|s| s["model_id"].as_str().unwrap()).collect();
        let mut sorted = revealed.clone();
        sorted.sort();
        assert_eq!(sorted, ["model-bower", "model-walker"]);
    }
    let live = client.get(format!("{base}/api/leaderboard")).send().await.unwrap().text().await.unwrap();
    terminate(server.id());
    assert!(server.wait().unwrap().success());

    let rows: Value = serde_json::from_str(&live).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    let played: u64 = rows.as_array().unwrap().iter().map(|r| r["battles_played"].as_u64().unwrap()).sum();
    assert_eq!(played, 40);
    assert_eq!(run(dir, &["replay"]), live);

    let csv = run(dir, &["report", "winrate"]);
    assert!(csv.starts_with("model,model-bower,model-walker\n"), "{csv}");
    let actions = run(dir, &["report", "actions", "model-walker", "model-bower"]);
    assert_eq!(actions.lines().count(), 1 + Action::ALL.len(), "{actions}");
    let counted: u64 = actions
        .lines()
        .skip(1)
        .flat_map(|l| l.split('\t').skip(2).map(|n| n.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(counted, 20);

    run(dir, &["likert", "--model", "model-walker", "--spec", "walking/base", "--rater", "r", "--score", "4"]);
    run(dir, &["likert", "--model", "model-walker", "--spec", "bowing/base", "--rater", "r", "--score", "2"]);
    let summary: Value = serde_json::from_str(&run(dir, &["report", "likert", "model-walker"])).unwrap();
    assert_eq!(summary["histogram"], json!([0, 1, 0, 1, 0]));
    assert_eq!(summary["mean"], 3.0);
}

/// Graceful stop, as a service manager would send it.
fn terminate(pid: u32) {
    Command::new("kill").arg("-TERM").arg(pid.to_string()).status().unwrap();
}

#[test]
fn golden_and_variants_commands() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    std::fs::write(dir.join("arena.toml"), "").unwrap();
    let out = dir.join("golden");
    let printed = run(
        dir,
        &["golden", "--spec", "walking/base", "--out", out.to_str().unwrap(), "--fps", "10", "--duration", "1"],
    );
    assert!(printed.starts_with("walking/base\t10 frames"), "{printed}");
    let pngs = std::fs::read_dir(out.join("walking_base")).unwrap().count();
    assert_eq!(pngs, 10);
    assert!(std::fs::read(out.join("walking_base.gif")).unwrap().starts_with(b"GIF8"));
    assert!(std::fs::read_to_string(out.join("walking_base.py")).unwrap().contains("matplotlib"));

    let variants: Value = serde_json::from_str(&run(dir, &["variants", "--json"])).unwrap();
    assert_eq!(variants.as_array().unwrap().len(), 90);
    assert_eq!(run(dir, &["variants"]).lines().count(), 90);
}
