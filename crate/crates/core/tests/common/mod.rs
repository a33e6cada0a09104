//! Deterministic synthetic Stack Exchange dumps for integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOPICS: [&[&str]; 5] = [
    &["salary", "raise", "negotiate", "offer", "bonus", "compensation", "budget", "payroll"],
    &["manager", "meeting", "feedback", "review", "promotion", "mentor", "team", "goals"],
    &["resign", "notice", "contract", "lawyer", "termination", "severance", "clause", "letter"],
    &["interview", "resume", "recruiter", "hiring", "candidate", "portfolio", "screening", "referral"],
    &["remote", "commute", "schedule", "office", "hours", "overtime", "vacation", "holiday"],
];
const FILLER: [&str; 12] = [
    "really", "think", "people", "usually", "situation", "company", "always", "probably", "honest", "simply",
    "colleague", "advice",
];

pub struct DumpSpec {
    pub questions: usize,
    pub users: usize,
    pub seed: u64,
    /// Fraction of questions left without an accepted answer.
    pub unaccepted: f64,
}

impl Default for DumpSpec {
    fn default() -> Self {
        Self {
            questions: 120,
            users: 40,
            seed: 7,
            unaccepted: 0.1,
        }
    }
}

fn esc(s: &str) -> String {
    html_escape::encode_double_quoted_attribute(s).into_owned()
}

fn words(rng: &mut ChaCha8Rng, topic: usize, n: usize, focus: f64) -> Vec<&'static str> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(focus) {
                let t = TOPICS[topic];
                t[rng.gen_range(0..t.len())]
            } else {
                FILLER[rng.gen_range(0..FILLER.len())]
            }
        })
        .collect()
}

fn sentences(ws: &[&str]) -> String {
    ws.chunks(9)
        .map(|c| {
            let mut s = c.join(" ");
            s.push('.');
            s
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn ts(base: i64, offset_s: i64) -> String {
    let t = chrono::DateTime::from_timestamp(base + offset_s, 0).unwrap();
    t.format("%Y-%m-%dT%H:%M:%S%.3f").to_string()
}

/// Writes Posts.xml, Users.xml, Comments.xml and Badges.xml into `dir`.
///
/// Accepted answers tend to score higher, be longer and more on topic, and
/// come from a pool of skilled users, so every feature group carries signal.
pub fn write_dump(dir: &Path, spec: &DumpSpec) {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base = 1_400_000_000;
    let skilled = spec.users / 4;

    let mut posts = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<posts>\n");
    let mut comments = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<comments>\n");
    let mut next_id = 1i64;
    let mut comment_id = 1i64;
    let mut user_answers = vec![0u32; spec.users + 1];

    for q in 0..spec.questions {
        let qid = next_id;
        next_id += 1;
        let topic = q % TOPICS.len();
        let asker = rng.gen_range(1..=spec.users as i64);
        let n_answers = rng.gen_range(2..=5);
        let accepted_idx = rng.gen_range(0..n_answers);
        let has_accepted = !rng.gen_bool(spec.unaccepted);
        let answer_ids: Vec<i64> = (0..n_answers).map(|i| qid + 1 + i as i64).collect();
        next_id += n_answers as i64;
        let qbody = format!("<p>{}</p>", sentences(&words(&mut rng, topic, 20, 0.6)));
        let qtime = base + q as i64 * 86_400;
        let accepted_attr = if has_accepted {
            format!(" AcceptedAnswerId=\"{}\"", answer_ids[accepted_idx])
        } else {
            String::new()
        };
        let _ = writeln!(
            posts,
            "  <row Id=\"{qid}\" PostTypeId=\"1\"{accepted_attr} CreationDate=\"{}\" Score=\"{}\" Body=\"{}\" OwnerUserId=\"{asker}\" Title=\"q{qid}\" />",
            ts(qtime, 0),
            rng.gen_range(0..10),
            esc(&qbody)
        );
        for (i, &aid) in answer_ids.iter().enumerate() {
            let good = i == accepted_idx;
            let author = if good && rng.gen_bool(0.7) {
                rng.gen_range(1..=skilled as i64)
            } else {
                rng.gen_range(1..=spec.users as i64)
            };
            let owner = if rng.gen_bool(0.05) {
                String::new()
            } else {
                format!(" OwnerUserId=\"{author}\"")
            };
            if !owner.is_empty() {
                user_answers[author as usize] += 1;
            }
            let len = if good { rng.gen_range(30..70) } else { rng.gen_range(8..40) };
            let focus = if good { 0.6 } else { 0.3 };
            let mut body = format!("<p>{}</p>", sentences(&words(&mut rng, topic, len, focus)));
            if good && rng.gen_bool(0.5) {
                body.push_str("<p>See <a href=\"https://example.com/x\">this guide</a>.</p>");
            }
            if rng.gen_bool(0.3) {
                body.push_str(&format!("<blockquote><p>{}</p></blockquote>", sentences(&words(&mut rng, topic, 6, 0.8))));
            }
            if good && rng.gen_bool(0.4) {
                body.push_str("<p><strong>Short version:</strong> talk to them.</p>");
            }
            let score = if good { rng.gen_range(3..25) } else { rng.gen_range(-2..8) };
            let offset = if good { rng.gen_range(600..20_000) } else { rng.gen_range(600..60_000) };
            let _ = writeln!(
                posts,
                "  <row Id=\"{aid}\" PostTypeId=\"2\" ParentId=\"{qid}\" CreationDate=\"{}\" Score=\"{score}\" Body=\"{}\"{owner} />",
                ts(qtime, offset),
                esc(&body)
            );
            for _ in 0..rng.gen_range(0..3) {
                let who = if rng.gen_bool(0.5) { asker } else { rng.gen_range(1..=spec.users as i64) };
                let _ = writeln!(
                    comments,
                    "  <row Id=\"{comment_id}\" PostId=\"{aid}\" Text=\"{}\" CreationDate=\"{}\" UserId=\"{who}\" />",
                    esc("thanks, that helps"),
                    ts(qtime, offset + 100 + comment_id)
                );
                comment_id += 1;
            }
        }
        if rng.gen_bool(0.3) {
            let who = rng.gen_range(1..=spec.users as i64);
            let _ = writeln!(
                comments,
                "  <row Id=\"{comment_id}\" PostId=\"{qid}\" Text=\"could you clarify?\" CreationDate=\"{}\" UserId=\"{who}\" />",
                ts(qtime, 300)
            );
            comment_id += 1;
        }
    }
    // A tag wiki row, an orphan answer and a comment on a missing post.
    let _ = writeln!(
        posts,
        "  <row Id=\"{next_id}\" PostTypeId=\"5\" CreationDate=\"{}\" Score=\"0\" Body=\"wiki\" />",
        ts(base, 0)
    );
    let _ = writeln!(
        posts,
        "  <row Id=\"{}\" PostTypeId=\"2\" ParentId=\"999999\" CreationDate=\"{}\" Score=\"1\" Body=\"orphan\" OwnerUserId=\"1\" />",
        next_id + 1,
        ts(base, 0)
    );
    let _ = writeln!(
        comments,
        "  <row Id=\"{comment_id}\" PostId=\"888888\" Text=\"lost\" CreationDate=\"{}\" UserId=\"2\" />",
        ts(base, 0)
    );
    posts.push_str("</posts>\n");
    comments.push_str("</comments>\n");

    let mut users = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<users>\n");
    let mut badges = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<badges>\n");
    let mut badge_id = 1;
    for u in 1..=spec.users {
        let rep = if u <= skilled { rng.gen_range(2_000..20_000) } else { rng.gen_range(1..1_500) };
        let rep = if u % 7 == 0 { 101 } else { rep };
        let _ = writeln!(
            users,
            "  <row Id=\"{u}\" Reputation=\"{rep}\" CreationDate=\"{}\" DisplayName=\"user{u}\" Views=\"{}\" UpVotes=\"{}\" DownVotes=\"{}\" />",
            ts(base - 10_000_000, 0),
            rng.gen_range(0..500),
            rng.gen_range(0..300),
            rng.gen_range(0..30)
        );
        let n_badges = if u <= skilled { rng.gen_range(3..10) } else { rng.gen_range(0..3) };
        for _ in 0..n_badges {
            let class = rng.gen_range(1..=3);
            let _ = writeln!(
                badges,
                "  <row Id=\"{badge_id}\" UserId=\"{u}\" Name=\"b\" Date=\"{}\" Class=\"{class}\" TagBased=\"False\" />",
                ts(base, 0)
            );
            badge_id += 1;
        }
    }
    users.push_str("</users>\n");
    badges.push_str("</badges>\n");

    std::fs::write(dir.join("Posts.xml"), posts).unwrap();
    std::fs::write(dir.join("Comments.xml"), comments).unwrap();
    std::fs::write(dir.join("Users.xml"), users).unwrap();
    std::fs::write(dir.join("Badges.xml"), badges).unwrap();
}
