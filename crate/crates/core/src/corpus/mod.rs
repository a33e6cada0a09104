//! Stack Exchange dump ingestion and the question / answer / comment thread model.

mod dataset;
mod dump;
mod store;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use dataset::{build_dataset, derive_user_stats, BuildReport, Dataset};
pub use dump::{
    apply_badges, parse_badges, parse_comments, parse_posts, parse_timestamp, parse_users,
    BadgeCounts, ParseReport,
};
pub use store::{load_dataset, save_dataset, DatasetSummary, DATASET_FILES};

pub type UserId = i64;
pub type PostId = i64;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub user_id: UserId,
    pub reputation: u64,
    pub gold: u32,
    pub silver: u32,
    pub bronze: u32,
    pub q_count: u32,
    pub a_count: u32,
    pub up_vote_count: u64,
    pub down_vote_count: u64,
    pub view_count: u64,
    /// Fraction of the user's answers that were accepted. `None` when the
    /// user has no answers in the dataset.
    pub accept_rate: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostKind {
    Question,
    Answer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: PostId,
    pub kind: PostKind,
    pub body_html: String,
    pub body_text: String,
    pub creation_time: DateTime<Utc>,
    pub score: i64,
    pub owner: Option<UserId>,
    pub accepted_answer_id: Option<PostId>,
    pub parent_id: Option<PostId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: i64,
    pub post_id: PostId,
    pub author: Option<UserId>,
    pub creation_time: DateTime<Utc>,
    pub text: String,
}

/// One question with its answers (oldest first) and the comments under each post.
#[derive(Clone, Debug, PartialEq)]
pub struct Thread {
    pub question: Post,
    pub answers: Vec<Post>,
    pub comments_by_answer: BTreeMap<PostId, Vec<Comment>>,
    pub comments_on_question: Vec<Comment>,
}

impl Thread {
    pub fn comments_on(&self, answer_id: PostId) -> &[Comment] {
        self.comments_by_answer
            .get(&answer_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn all_comments(&self) -> impl Iterator<Item = &Comment> {
        self.comments_on_question
            .iter()
            .chain(self.comments_by_answer.values().flatten())
    }
}

/// A labelled (question, answer) pair. `thread` and `answer` index into
/// [`Dataset::threads`] and that thread's `answers`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub question_id: PostId,
    pub answer_id: PostId,
    pub label: u8,
    pub thread: usize,
    pub answer: usize,
}
