//! Row-oriented parsers for the `Posts.xml`, `Users.xml`, `Comments.xml` and
//! `Badges.xml` files of a Stack Exchange data dump.

use std::collections::HashMap;
use std::io::{BufReader, Read};

use chrono::{DateTime, NaiveDateTime, Utc};
use log::warn;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::{Comment, Post, PostKind, User, UserId};
use crate::error::{Error, Result};
use crate::text::strip_html;

/// Counters collected while parsing one dump file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows: usize,
    pub emitted: usize,
    /// Rows dropped because a required attribute was absent or unparseable.
    pub skipped_missing: usize,
    /// Rows of a kind the parser ignores (e.g. tag wikis in Posts.xml).
    pub skipped_kind: usize,
    /// Badge rows with an unknown class, counted as bronze.
    pub unknown_badge_class: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BadgeCounts {
    pub gold: u32,
    pub silver: u32,
    pub bronze: u32,
}

/// Records the byte offset of every newline that passes through, so parse
/// errors can be reported by line.
struct NewlineIndex<R> {
    inner: R,
    offset: u64,
    newlines: Vec<u64>,
}

impl<R: Read> Read for NewlineIndex<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        for (i, b) in buf[..n].iter().enumerate() {
            if *b == b'\n' {
                self.newlines.push(self.offset + i as u64);
            }
        }
        self.offset += n as u64;
        Ok(n)
    }
}

impl<R> NewlineIndex<R> {
    fn line_of(&self, pos: u64) -> usize {
        self.newlines.partition_point(|&nl| nl < pos) + 1
    }
}

type Attrs = HashMap<String, String>;

/// Calls `on_row` with the attributes of every `<row>` element.
fn for_each_row<R: Read>(src: R, file: &str, mut on_row: impl FnMut(&Attrs)) -> Result<()> {
    let indexed = NewlineIndex {
        inner: src,
        offset: 0,
        newlines: Vec::new(),
    };
    let mut reader = Reader::from_reader(BufReader::new(indexed));
    let mut buf = Vec::new();
    let mut attrs = Attrs::new();

    let xml_err = |reader: &Reader<BufReader<NewlineIndex<R>>>, pos: u64, message: String| {
        Error::Xml {
            file: file.to_string(),
            line: reader.get_ref().get_ref().line_of(pos),
            message,
        }
    };

    loop {
        match reader.read_event_into(&mut buf) {
            Ok(Event::Empty(e)) | Ok(Event::Start(e)) if e.name().as_ref() == b"row" => {
                attrs.clear();
                if let Err(message) = collect_attrs(&e, &mut attrs) {
                    let pos = reader.buffer_position();
                    return Err(xml_err(&reader, pos, message));
                }
                on_row(&attrs);
            }
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => {
                let pos = reader.error_position();
                return Err(xml_err(&reader, pos, e.to_string()));
            }
        }
        buf.clear();
    }
    Ok(())
}

fn collect_attrs(e: &BytesStart<'_>, out: &mut Attrs) -> std::result::Result<(), String> {
    for attr in e.attributes() {
        let attr = attr.map_err(|e| e.to_string())?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value().map_err(|e| e.to_string())?;
        out.insert(key, value.into_owned());
    }
    Ok(())
}

/// Parses dump timestamps. Values without a zone (the dump convention) are UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
        .ok()
        .map(|n| n.and_utc())
}

fn get<'a>(attrs: &'a Attrs, key: &str) -> Option<&'a str> {
    attrs.get(key).map(String::as_str)
}

fn get_num<T: std::str::FromStr>(attrs: &Attrs, key: &str) -> Option<T> {
    get(attrs, key).and_then(|v| v.trim().parse().ok())
}

pub fn parse_posts<R: Read>(src: R) -> Result<(Vec<Post>, ParseReport)> {
    let mut posts = Vec::new();
    let mut report = ParseReport::default();
    for_each_row(src, "Posts.xml", |a| {
        report.rows += 1;
        let kind = match get(a, "PostTypeId") {
            Some("1") => PostKind::Question,
            Some("2") => PostKind::Answer,
            Some(_) => {
                report.skipped_kind += 1;
                return;
            }
            None => {
                report.skipped_missing += 1;
                return;
            }
        };
        let (Some(post_id), Some(creation_time), Some(score)) = (
            get_num(a, "Id"),
            get(a, "CreationDate").and_then(parse_timestamp),
            get_num(a, "Score"),
        ) else {
            report.skipped_missing += 1;
            return;
        };
        let parent_id = get_num(a, "ParentId");
        if kind == PostKind::Answer && parent_id.is_none() {
            report.skipped_missing += 1;
            return;
        }
        let body_html = get(a, "Body").unwrap_or_default().to_string();
        let body_text = strip_html(&body_html);
        posts.push(Post {
            post_id,
            kind,
            body_text,
            body_html,
            creation_time,
            score,
            owner: get_num(a, "OwnerUserId"),
            accepted_answer_id: match kind {
                PostKind::Question => get_num(a, "AcceptedAnswerId"),
                PostKind::Answer => None,
            },
            parent_id: match kind {
                PostKind::Question => None,
                PostKind::Answer => parent_id,
            },
        });
        report.emitted += 1;
    })?;
    if report.skipped_missing > 0 {
        warn!("Posts.xml: skipped {} rows with missing attributes", report.skipped_missing);
    }
    Ok((posts, report))
}

/// Parses `Users.xml`. Badge counts stay zero until [`apply_badges`];
/// question/answer counts and accept rate are filled by `derive_user_stats`.
pub fn parse_users<R: Read>(src: R) -> Result<(Vec<User>, ParseReport)> {
    let mut users = Vec::new();
    let mut report = ParseReport::default();
    for_each_row(src, "Users.xml", |a| {
        report.rows += 1;
        let (Some(user_id), Some(reputation)) = (get_num(a, "Id"), get_num(a, "Reputation"))
        else {
            report.skipped_missing += 1;
            return;
        };
        users.push(User {
            user_id,
            reputation,
            view_count: get_num(a, "Views").unwrap_or(0),
            up_vote_count: get_num(a, "UpVotes").unwrap_or(0),
            down_vote_count: get_num(a, "DownVotes").unwrap_or(0),
            ..User::default()
        });
        report.emitted += 1;
    })?;
    if report.skipped_missing > 0 {
        warn!("Users.xml: skipped {} rows with missing attributes", report.skipped_missing);
    }
    Ok((users, report))
}

/// Parses `Comments.xml`. Whether the target post exists is checked later,
/// when threads are assembled.
pub fn parse_comments<R: Read>(src: R) -> Result<(Vec<Comment>, ParseReport)> {
    let mut comments = Vec::new();
    let mut report = ParseReport::default();
    for_each_row(src, "Comments.xml", |a| {
        report.rows += 1;
        let (Some(comment_id), Some(post_id), Some(creation_time)) = (
            get_num(a, "Id"),
            get_num(a, "PostId"),
            get(a, "CreationDate").and_then(parse_timestamp),
        ) else {
            report.skipped_missing += 1;
            return;
        };
        comments.push(Comment {
            comment_id,
            post_id,
            author: get_num(a, "UserId"),
            creation_time,
            text: get(a, "Text").unwrap_or_default().to_string(),
        });
        report.emitted += 1;
    })?;
    if report.skipped_missing > 0 {
        warn!("Comments.xml: skipped {} rows with missing attributes", report.skipped_missing);
    }
    Ok((comments, report))
}

/// Aggregates `Badges.xml` into per-user gold/silver/bronze counts.
pub fn parse_badges<R: Read>(src: R) -> Result<(HashMap<UserId, BadgeCounts>, ParseReport)> {
    let mut counts: HashMap<UserId, BadgeCounts> = HashMap::new();
    let mut report = ParseReport::default();
    for_each_row(src, "Badges.xml", |a| {
        report.rows += 1;
        let Some(user_id) = get_num::<UserId>(a, "UserId") else {
            report.skipped_missing += 1;
            return;
        };
        let entry = counts.entry(user_id).or_default();
        match get(a, "Class") {
            Some("1") => entry.gold += 1,
            Some("2") => entry.silver += 1,
            Some("3") => entry.bronze += 1,
            _ => {
                report.unknown_badge_class += 1;
                entry.bronze += 1;
            }
        }
        report.emitted += 1;
    })?;
    if report.unknown_badge_class > 0 {
        warn!(
            "Badges.xml: {} rows with unknown class counted as bronze",
            report.unknown_badge_class
        );
    }
    Ok((counts, report))
}

pub fn apply_badges(users: &mut [User], badges: &HashMap<UserId, BadgeCounts>) {
    for user in users {
        if let Some(b) = badges.get(&user.user_id) {
            user.gold = b.gold;
            user.silver = b.silver;
            user.bronze = b.bronze;
        }
    }
}
