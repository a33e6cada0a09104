use std::collections::{BTreeMap, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Comment, Instance, Post, PostId, PostKind, Thread, User, UserId};

/// Assembled threads, their labelled instances and the user table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub threads: Vec<Thread>,
    pub instances: Vec<Instance>,
    pub users: BTreeMap<UserId, User>,
    pub report: BuildReport,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    /// Question and answer posts seen before any exclusion.
    pub raw_questions: usize,
    pub raw_answers: usize,
    /// Answers whose parent question is absent.
    pub orphan_answers: usize,
    /// Comments whose target post is absent from the kept threads.
    pub dropped_comments: usize,
    pub questions_without_answers: usize,
    pub questions_without_accepted: usize,
    /// Questions whose accepted answer id does not match any of their answers.
    pub accepted_answer_missing: usize,
}

impl Dataset {
    pub fn positives(&self) -> usize {
        self.instances.iter().filter(|i| i.label == 1).count()
    }

    pub fn thread_of(&self, inst: &Instance) -> &Thread {
        &self.threads[inst.thread]
    }

    pub fn answer_of(&self, inst: &Instance) -> &Post {
        &self.threads[inst.thread].answers[inst.answer]
    }
}

/// Assembles threads and labelled instances.
///
/// Threads without answers, without an accepted answer, or whose accepted
/// answer is not among their answers are excluded. Answers are ordered by
/// creation time (post id breaks ties); threads are ordered by question id.
/// User counts and accept rates are derived from the kept threads.
pub fn build_dataset(posts: Vec<Post>, comments: Vec<Comment>, users: Vec<User>) -> Dataset {
    let mut report = BuildReport::default();
    let mut questions: BTreeMap<PostId, Post> = BTreeMap::new();
    let mut answers: Vec<Post> = Vec::new();
    for post in posts {
        match post.kind {
            PostKind::Question => {
                report.raw_questions += 1;
                questions.insert(post.post_id, post);
            }
            PostKind::Answer => {
                report.raw_answers += 1;
                answers.push(post);
            }
        }
    }

    let mut answers_by_q: BTreeMap<PostId, Vec<Post>> = BTreeMap::new();
    for a in answers {
        let parent = a.parent_id.unwrap_or(PostId::MIN);
        if questions.contains_key(&parent) {
            answers_by_q.entry(parent).or_default().push(a);
        } else {
            report.orphan_answers += 1;
        }
    }

    let mut threads = Vec::new();
    for (qid, question) in questions {
        let Some(mut answers) = answers_by_q.remove(&qid) else {
            report.questions_without_answers += 1;
            continue;
        };
        let Some(accepted) = question.accepted_answer_id else {
            report.questions_without_accepted += 1;
            continue;
        };
        if !answers.iter().any(|a| a.post_id == accepted) {
            report.accepted_answer_missing += 1;
            continue;
        }
        answers.sort_by_key(|a| (a.creation_time, a.post_id));
        threads.push(Thread {
            question,
            answers,
            comments_by_answer: BTreeMap::new(),
            comments_on_question: Vec::new(),
        });
    }

    // post id -> (thread index, Some(answer id) | None for the question)
    let mut owner_of: HashMap<PostId, (usize, Option<PostId>)> = HashMap::new();
    for (ti, t) in threads.iter().enumerate() {
        owner_of.insert(t.question.post_id, (ti, None));
        for a in &t.answers {
            owner_of.insert(a.post_id, (ti, Some(a.post_id)));
        }
    }
    let mut comments = comments;
    comments.sort_by_key(|c| (c.creation_time, c.comment_id));
    for c in comments {
        match owner_of.get(&c.post_id) {
            Some(&(ti, None)) => threads[ti].comments_on_question.push(c),
            Some(&(ti, Some(aid))) => threads[ti].comments_by_answer.entry(aid).or_default().push(c),
            None => report.dropped_comments += 1,
        }
    }
    if report.orphan_answers > 0 {
        warn!("{} answers reference a missing question", report.orphan_answers);
    }

    let mut instances = Vec::new();
    for (ti, t) in threads.iter().enumerate() {
        let accepted = t.question.accepted_answer_id;
        for (ai, a) in t.answers.iter().enumerate() {
            instances.push(Instance {
                question_id: t.question.post_id,
                answer_id: a.post_id,
                label: u8::from(Some(a.post_id) == accepted),
                thread: ti,
                answer: ai,
            });
        }
    }

    let mut users = users.into_iter().map(|u| (u.user_id, u)).collect();
    derive_user_stats(&threads, &mut users);
    Dataset {
        threads,
        instances,
        users,
        report,
    }
}

/// Fills `q_count`, `a_count` and `accept_rate` from the assembled threads.
/// Users that do not appear in any thread get zero counts and no rate.
pub fn derive_user_stats(threads: &[Thread], users: &mut BTreeMap<UserId, User>) {
    #[derive(Default)]
    struct Tally {
        questions: u32,
        answers: u32,
        accepted: u32,
    }
    let mut tally: HashMap<UserId, Tally> = HashMap::new();
    for t in threads {
        if let Some(q) = t.question.owner {
            tally.entry(q).or_default().questions += 1;
        }
        for a in &t.answers {
            if let Some(u) = a.owner {
                let e = tally.entry(u).or_default();
                e.answers += 1;
                if Some(a.post_id) == t.question.accepted_answer_id {
                    e.accepted += 1;
                }
            }
        }
    }
    for (id, user) in users.iter_mut() {
        let t = tally.remove(id).unwrap_or_default();
        user.q_count = t.questions;
        user.a_count = t.answers;
        user.accept_rate = (t.answers > 0).then(|| f64::from(t.accepted) / f64::from(t.answers));
    }
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};

    use super::*;

    fn post(id: PostId, kind: PostKind, parent: Option<PostId>, owner: Option<UserId>, secs: i64) -> Post {
        Post {
            post_id: id,
            kind,
            body_html: String::new(),
            body_text: String::new(),
            creation_time: Utc.timestamp_opt(1_000_000 + secs, 0).unwrap(),
            score: 0,
            owner,
            accepted_answer_id: None,
            parent_id: parent,
        }
    }

    fn question(id: PostId, owner: Option<UserId>, accepted: Option<PostId>) -> Post {
        Post {
            accepted_answer_id: accepted,
            ..post(id, PostKind::Question, None, owner, 0)
        }
    }

    fn answer(id: PostId, parent: PostId, owner: Option<UserId>, secs: i64) -> Post {
        post(id, PostKind::Answer, Some(parent), owner, secs)
    }

    #[test]
    fn labels_follow_accepted_answer() {
        let posts = vec![
            question(1, Some(10), Some(3)),
            answer(2, 1, Some(11), 10),
            answer(3, 1, Some(12), 20),
            answer(4, 1, Some(13), 30),
        ];
        let ds = build_dataset(posts, vec![], vec![]);
        let labels: Vec<u8> = ds.instances.iter().map(|i| i.label).collect();
        assert_eq!(labels, vec![0, 1, 0]);
    }

    #[test]
    fn answers_ordered_by_time() {
        let posts = vec![
            question(1, None, Some(2)),
            answer(2, 1, None, 50),
            answer(3, 1, None, 20),
        ];
        let ds = build_dataset(posts, vec![], vec![]);
        let ids: Vec<PostId> = ds.threads[0].answers.iter().map(|a| a.post_id).collect();
        assert_eq!(ids, vec![3, 2]);
        assert_eq!(ds.instances[1].label, 1);
    }

    #[test]
    fn exclusions_and_orphans() {
        let posts = vec![
            question(1, None, None),
            answer(2, 1, None, 5),
            question(5, None, Some(99)),
            answer(6, 5, None, 5),
            question(7, None, Some(8)),
            answer(9, 404, None, 5),
        ];
        let ds = build_dataset(posts, vec![], vec![]);
        assert!(ds.instances.is_empty());
        assert_eq!(ds.report.questions_without_accepted, 1);
        assert_eq!(ds.report.accepted_answer_missing, 1);
        assert_eq!(ds.report.questions_without_answers, 1);
        assert_eq!(ds.report.orphan_answers, 1);
    }

    #[test]
    fn comments_attach_or_drop() {
        let c = |id, post_id| Comment {
            comment_id: id,
            post_id,
            author: Some(3),
            creation_time: Utc.timestamp_opt(2_000_000, 0).unwrap(),
            text: "c".into(),
        };
        let posts = vec![question(1, None, Some(2)), answer(2, 1, None, 5)];
        let ds = build_dataset(posts, vec![c(1, 2), c(2, 1), c(3, 77)], vec![]);
        assert_eq!(ds.threads[0].comments_on(2).len(), 1);
        assert_eq!(ds.threads[0].comments_on_question.len(), 1);
        assert_eq!(ds.report.dropped_comments, 1);
    }

    #[test]
    fn user_stats() {
        let mut posts = vec![question(1, Some(1), Some(2)), answer(2, 1, Some(5), 1)];
        for q in 0..3 {
            let qid = 100 + q * 10;
            posts.push(question(qid, Some(7), Some(qid + 2)));
            posts.push(answer(qid + 1, qid, Some(5), 1));
            posts.push(answer(qid + 2, qid, Some(8), 2));
        }
        let users = [1, 5, 7, 9]
            .into_iter()
            .map(|id| User {
                user_id: id,
                ..User::default()
            })
            .collect();
        let ds = build_dataset(posts, vec![], users);
        let u5 = &ds.users[&5];
        assert_eq!((u5.a_count, u5.accept_rate), (4, Some(0.25)));
        let u7 = &ds.users[&7];
        assert_eq!((u7.q_count, u7.a_count, u7.accept_rate), (3, 0, None));
        assert_eq!(ds.users[&9].accept_rate, None);
    }
}
