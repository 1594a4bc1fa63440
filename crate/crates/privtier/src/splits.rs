//! `train_split.txt` / `test_split.txt`: sorted video ids, one per LF-terminated line.

use privtier_core::{ClipRecord, Split, SplitAssignment};

use crate::error::{Error, Result};

pub fn split_file_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train_split.txt",
        Split::Test => "test_split.txt",
    }
}

pub fn render_split(assignment: &SplitAssignment) -> String {
    let mut ids = assignment.video_ids.clone();
    ids.sort();
    let mut out = String::new();
    for id in ids {
        out.push_str(&id);
        out.push('\n');
    }
    out
}

/// Train and test assignments derived from each record's group id.
pub fn assignments(records: &[ClipRecord]) -> Result<(SplitAssignment, SplitAssignment)> {
    for r in records {
        let expected = privtier_core::assign_split(r.group_id)?;
        if expected != r.split {
            return Err(privtier_core::Error::Validation {
                video_id: r.video_id.clone(),
                field: "split",
                reason: format!("group {} belongs to {expected}", r.group_id),
            }
            .into());
        }
    }
    let train = SplitAssignment::from_records(records, Split::Train);
    let test = SplitAssignment::from_records(records, Split::Test);
    privtier_core::corpus::check_disjoint(records, &train, &test)?;
    Ok((train, test))
}

/// Reads a split file. Blank lines are ignored; duplicate ids are an error.
pub fn parse_split(text: &str, split: Split) -> Result<SplitAssignment> {
    let mut video_ids = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let id = line.trim_end_matches('\r').trim();
        if id.is_empty() {
            continue;
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::Csv {
                line: i as u64 + 1,
                message: format!("duplicate video id {id:?} in split file"),
            });
        }
        video_ids.push(id.to_string());
    }
    Ok(SplitAssignment {
        split_name: split,
        video_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_sorts_and_terminates() {
        let a = SplitAssignment {
            split_name: Split::Test,
            video_ids: vec!["b".into(), "a".into()],
        };
        assert_eq!(render_split(&a), "a\nb\n");
        assert_eq!(parse_split("a\nb\n", Split::Test).unwrap().video_ids, ["a", "b"]);
        assert!(parse_split("a\na\n", Split::Test).is_err());
    }
}
