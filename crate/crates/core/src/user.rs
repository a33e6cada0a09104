//! Answerer (A), questioner (Q) and difference features from the user table.
//!
//! User statistics reflect the dump snapshot, not the state at answer time.

use std::collections::BTreeMap;

use crate::corpus::{Post, Thread, User, UserId};

/// Ten user statistics; `None` marks a missing value (anonymous author,
/// author absent from the user table, or no answers for `accept_rate`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UserFeatureVector(pub [Option<f64>; 10]);

impl UserFeatureVector {
    pub const NAMES: [&'static str; 10] = [
        "reputation",
        "bronze",
        "silver",
        "gold",
        "q_count",
        "a_count",
        "up_vote_count",
        "down_vote_count",
        "view_count",
        "accept_rate",
    ];

    pub fn missing() -> Self {
        Self([None; 10])
    }

    pub fn from_user(u: &User) -> Self {
        Self([
            Some(u.reputation as f64),
            Some(f64::from(u.bronze)),
            Some(f64::from(u.silver)),
            Some(f64::from(u.gold)),
            Some(f64::from(u.q_count)),
            Some(f64::from(u.a_count)),
            Some(u.up_vote_count as f64),
            Some(u.down_vote_count as f64),
            Some(u.view_count as f64),
            u.accept_rate,
        ])
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let i = Self::NAMES.iter().position(|n| *n == name)?;
        self.0[i]
    }

    /// Missingness mask, true where the value is absent.
    pub fn mask(&self) -> [bool; 10] {
        self.0.map(|v| v.is_none())
    }
}

fn lookup(owner: Option<UserId>, users: &BTreeMap<UserId, User>) -> UserFeatureVector {
    owner
        .and_then(|id| users.get(&id))
        .map(UserFeatureVector::from_user)
        .unwrap_or_else(UserFeatureVector::missing)
}

pub fn extract_answerer(answer: &Post, users: &BTreeMap<UserId, User>) -> UserFeatureVector {
    lookup(answer.owner, users)
}

pub fn extract_questioner(thread: &Thread, users: &BTreeMap<UserId, User>) -> UserFeatureVector {
    lookup(thread.question.owner, users)
}

/// Questioner minus answerer, per field; missing if either side is.
pub fn difference_features(q: &UserFeatureVector, a: &UserFeatureVector) -> [Option<f64>; 10] {
    std::array::from_fn(|i| match (q.0[i], a.0[i]) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    })
}
