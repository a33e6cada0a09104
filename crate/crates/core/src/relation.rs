//! User-relation (UR) features over a directed message-count graph.
//!
//! Every answer is a message from the answerer to the questioner and every
//! comment is a message from the commenter to the owner of the commented
//! post (question comments included). Self-messages and anonymous
//! endpoints are skipped. Counts cover the whole dataset, including the
//! thread being scored.
//!
//! Feature names follow the arrows of the original figure literally, so
//! `aqSendEdge` counts messages questioner -> answerer and `qaSendEdge`
//! counts answerer -> questioner.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use crate::corpus::{Post, Thread, UserId};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UserRelationGraph {
    edges: BTreeMap<(UserId, UserId), u64>,
    out_degree: HashMap<UserId, u64>,
    in_degree: HashMap<UserId, u64>,
}

impl UserRelationGraph {
    pub fn add_message(&mut self, sender: Option<UserId>, receiver: Option<UserId>) {
        let (Some(s), Some(r)) = (sender, receiver) else {
            return;
        };
        if s == r {
            return;
        }
        *self.edges.entry((s, r)).or_insert(0) += 1;
        *self.out_degree.entry(s).or_insert(0) += 1;
        *self.in_degree.entry(r).or_insert(0) += 1;
    }

    pub fn count(&self, sender: UserId, receiver: UserId) -> u64 {
        self.edges.get(&(sender, receiver)).copied().unwrap_or(0)
    }

    pub fn out_degree(&self, user: UserId) -> u64 {
        self.out_degree.get(&user).copied().unwrap_or(0)
    }

    pub fn in_degree(&self, user: UserId) -> u64 {
        self.in_degree.get(&user).copied().unwrap_or(0)
    }

    pub fn total_messages(&self) -> u64 {
        self.edges.values().sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = ((UserId, UserId), u64)> + '_ {
        self.edges.iter().map(|(k, v)| (*k, *v))
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.out_degree.keys().chain(self.in_degree.keys()).copied()
    }

    /// `sender receiver count` lines, sorted by (sender, receiver).
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for ((s, r), c) in &self.edges {
            writeln!(w, "{s} {r} {c}")?;
        }
        Ok(())
    }
}

pub fn build_graph(threads: &[Thread]) -> UserRelationGraph {
    let mut g = UserRelationGraph::default();
    for t in threads {
        let q = t.question.owner;
        for a in &t.answers {
            g.add_message(a.owner, q);
        }
        for c in &t.comments_on_question {
            g.add_message(c.author, q);
        }
        for a in &t.answers {
            for c in t.comments_on(a.post_id) {
                g.add_message(c.author, a.owner);
            }
        }
    }
    g
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RelationFeatures {
    pub aq_send_edge: f64,
    pub qa_send_edge: f64,
    pub q_user_send_edge: f64,
    pub q_user_get_edge: f64,
    pub a_user_send_edge: f64,
    pub a_user_get_edge: f64,
}

impl RelationFeatures {
    pub const NAMES: [&'static str; 6] = [
        "aqSendEdge",
        "qaSendEdge",
        "qUserSendEdge",
        "qUserGetEdge",
        "aUserSendEdge",
        "aUserGetEdge",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.aq_send_edge,
            self.qa_send_edge,
            self.q_user_send_edge,
            self.q_user_get_edge,
            self.a_user_send_edge,
            self.a_user_get_edge,
        ]
    }
}

/// The six edge counts for one (question, answer) pair, or `None` when
/// either author is anonymous.
pub fn extract_relation(thread: &Thread, answer: &Post, graph: &UserRelationGraph) -> Option<RelationFeatures> {
    let q = thread.question.owner?;
    let a = answer.owner?;
    Some(RelationFeatures {
        aq_send_edge: graph.count(q, a) as f64,
        qa_send_edge: graph.count(a, q) as f64,
        q_user_send_edge: graph.out_degree(q) as f64,
        q_user_get_edge: graph.in_degree(q) as f64,
        a_user_send_edge: graph.out_degree(a) as f64,
        a_user_get_edge: graph.in_degree(a) as f64,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::corpus::{Comment, PostKind};

    fn post(id: i64, kind: PostKind, owner: Option<UserId>) -> Post {
        Post {
            post_id: id,
            kind,
            body_html: String::new(),
            body_text: String::new(),
            creation_time: chrono::DateTime::UNIX_EPOCH,
            score: 0,
            owner,
            accepted_answer_id: None,
            parent_id: None,
        }
    }

    fn comment(post_id: i64, author: Option<UserId>) -> Comment {
        Comment {
            comment_id: 1,
            post_id,
            author,
            creation_time: chrono::DateTime::UNIX_EPOCH,
            text: String::new(),
        }
    }

    fn toy() -> Thread {
        let mut comments = BTreeMap::new();
        comments.insert(2, vec![comment(2, Some(3))]);
        Thread {
            question: post(1, PostKind::Question, Some(1)),
            answers: vec![post(2, PostKind::Answer, Some(2))],
            comments_by_answer: comments,
            comments_on_question: vec![],
        }
    }

    #[test]
    fn empty_graph() {
        let g = build_graph(&[]);
        assert_eq!(g.total_messages(), 0);
        assert_eq!(g.out_degree(1), 0);
    }

    #[test]
    fn toy_dataset() {
        let t = toy();
        let g = build_graph(std::slice::from_ref(&t));
        assert_eq!(g.count(2, 1), 1);
        assert_eq!(g.count(3, 2), 1);
        assert_eq!(g.total_messages(), 2);
        assert_eq!((g.out_degree(2), g.in_degree(2), g.in_degree(1), g.out_degree(1)), (1, 1, 1, 0));
        let f = extract_relation(&t, &t.answers[0], &g).unwrap();
        assert_eq!(f.values(), [0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn self_and_anonymous_messages_skipped() {
        let mut t = toy();
        t.answers.push(post(5, PostKind::Answer, Some(1)));
        t.answers.push(post(6, PostKind::Answer, None));
        t.comments_on_question.push(comment(1, Some(1)));
        t.comments_on_question.push(comment(1, Some(4)));
        let g = build_graph(std::slice::from_ref(&t));
        assert_eq!(g.count(1, 1), 0);
        assert_eq!(g.count(4, 1), 1);
        assert_eq!(g.total_messages(), 3);
        assert!(extract_relation(&t, &t.answers[2], &g).is_none());
        assert_eq!(extract_relation(&t, &t.answers[1], &g).unwrap().aq_send_edge, 0.0);
    }

    #[test]
    fn edge_list_export() {
        let g = build_graph(&[toy()]);
        let mut out = Vec::new();
        g.write_edge_list(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "2 1 1\n3 2 1\n");
    }
}
