mod common;

use std::io::Write;

use biomotion_arena::{leaderboard_json, recover, App};
use biomotion_core::arena::{replay, EloConfig, SimulatedVoters};
use common::options;
use proptest::prelude::*;

fn write_log(path: &std::path::Path, n: usize, seed: u64) -> Vec<u8> {
    let votes = SimulatedVoters::ladder(5, 0.4).simulate(n, seed);
    let mut bytes = Vec::new();
    for v in &votes {
        serde_json::to_writer(&mut bytes, v).unwrap();
        bytes.push(b'\n');
    }
    std::fs::write(path, &bytes).unwrap();
    bytes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// A log cut at any byte recovers the state of its complete lines.
    #[test]
    fn torn_log_recovers_complete_prefix(seed in 0u64..1000, cut_frac in 0.0f64..1.0) {
        let dir = tempfile::tempdir().unwrap();
        let opts = options(dir.path());
        let full = write_log(&opts.vote_log, 60, seed);
        let cut = (full.len() as f64 * cut_frac) as usize;
        std::fs::write(&opts.vote_log, &full[..cut]).unwrap();

        let complete = full[..cut].iter().filter(|&&b| b == b'\n').count();
        let all = SimulatedVoters::ladder(5, 0.4).simulate(60, seed);
        let expected = replay(&all[..complete], &EloConfig::default()).unwrap();

        let rec = recover(&opts.vote_log, &opts.battles, &opts.elo).unwrap();
        prop_assert_eq!(rec.votes.len(), complete);
        prop_assert_eq!(&rec.board, &expected);

        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async {
            let app = App::open(&opts).await.unwrap();
            assert_eq!(leaderboard_json(&app.leaderboard()), leaderboard_json(&expected));
            app.shutdown().await;
        });
        // Opening for writing drops the torn tail.
        let after = std::fs::read(&opts.vote_log).unwrap();
        let keep = full[..cut].iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        prop_assert_eq!(&after[..], &full[..keep]);
    }
}

#[test]
fn pending_battles_skip_those_already_voted() {
    let dir = tempfile::tempdir().unwrap();
    let opts = options(dir.path());
    write_log(&opts.vote_log, 10, 3);
    let voted = SimulatedVoters::ladder(5, 0.4).simulate(12, 3);
    let mut f = std::fs::File::create(&opts.battles).unwrap();
    for mut b in voted {
        b.vote = None;
        b.rater_id.clear();
        writeln!(f, "{}", serde_json::to_string(&b).unwrap()).unwrap();
    }
    f.write_all(b"{\"torn\":").unwrap();
    let rec = recover(&opts.vote_log, &opts.battles, &opts.elo).unwrap();
    assert_eq!(rec.votes.len(), 10);
    assert_eq!(rec.pending.len(), 2);
}

#[test]
fn unordered_log_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let opts = options(dir.path());
    let mut votes = SimulatedVoters::ladder(3, 0.4).simulate(5, 1);
    votes.swap(1, 3);
    let text: String = votes.iter().map(|v| serde_json::to_string(v).unwrap() + "\n").collect();
    std::fs::write(&opts.vote_log, text).unwrap();
    assert!(recover(&opts.vote_log, &opts.battles, &opts.elo).is_err());
}
