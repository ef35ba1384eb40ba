//! Ingestion of multi-behavior interaction logs.
//!
//! Input rows are `(user, item, behavior, timestamp)` tuples from TSV
//! streams. Ingestion deduplicates per `(user, item, behavior)` triple
//! keeping the earliest occurrence, and assigns dense indices to user and
//! item tokens in first-appearance order.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// One surviving interaction record.
///
/// `row` is the position of the surviving occurrence in the input stream,
/// used as a deterministic tie-break wherever timestamps collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    /// Index into [`InteractionLog::behaviors`].
    pub behavior: u32,
    pub timestamp: i64,
    pub row: u64,
}

/// Deduplicated interaction log with dense user/item index spaces.
#[derive(Debug, Clone)]
pub struct InteractionLog {
    records: Vec<Interaction>,
    user_tokens: Vec<String>,
    item_tokens: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
    behaviors: Vec<String>,
}

impl InteractionLog {
    pub fn num_users(&self) -> usize {
        self.user_tokens.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_tokens.len()
    }

    pub fn records(&self) -> &[Interaction] {
        &self.records
    }

    /// Declared behavior labels, in declaration order.
    pub fn behaviors(&self) -> &[String] {
        &self.behaviors
    }

    pub fn behavior_id(&self, label: &str) -> Option<u32> {
        self.behaviors.iter().position(|b| b == label).map(|p| p as u32)
    }

    pub fn user_id(&self, token: &str) -> Option<u32> {
        self.user_index.get(token).copied()
    }

    pub fn item_id(&self, token: &str) -> Option<u32> {
        self.item_index.get(token).copied()
    }

    pub fn user_token(&self, id: u32) -> &str {
        &self.user_tokens[id as usize]
    }

    pub fn item_token(&self, id: u32) -> &str {
        &self.item_tokens[id as usize]
    }

    /// Record count per declared behavior, in declaration order.
    pub fn counts_per_behavior(&self) -> Vec<(String, usize)> {
        let mut counts = vec![0usize; self.behaviors.len()];
        for r in &self.records {
            counts[r.behavior as usize] += 1;
        }
        self.behaviors
            .iter()
            .cloned()
            .zip(counts)
            .collect()
    }

    /// Build a log directly from pre-indexed parts. Used by synthetic data
    /// generators and tests; applies the same dedup rule as file ingestion.
    pub fn from_parts(
        user_tokens: Vec<String>,
        item_tokens: Vec<String>,
        behaviors: Vec<String>,
        raw: Vec<(u32, u32, u32, i64)>,
    ) -> Result<Self> {
        let mut builder = LogBuilder::new(behaviors);
        builder.user_tokens = user_tokens;
        builder.item_tokens = item_tokens;
        for (i, t) in builder.user_tokens.iter().enumerate() {
            builder.user_index.insert(t.clone(), i as u32);
        }
        for (i, t) in builder.item_tokens.iter().enumerate() {
            builder.item_index.insert(t.clone(), i as u32);
        }
        for (row, (u, i, b, ts)) in raw.into_iter().enumerate() {
            if u as usize >= builder.user_tokens.len()
                || i as usize >= builder.item_tokens.len()
                || b as usize >= builder.behaviors.len()
            {
                return Err(Error::DimensionMismatch(format!(
                    "record ({u}, {i}, behavior {b}) outside index spaces"
                )));
            }
            builder.push(u, i, b, ts, row as u64);
        }
        builder.finish()
    }

    /// Copy of this log restricted to the given predicate over records.
    /// Index spaces and behavior set are preserved unchanged.
    pub fn filter_records(&self, keep: impl Fn(&Interaction) -> bool) -> Self {
        Self {
            records: self.records.iter().copied().filter(keep).collect(),
            user_tokens: self.user_tokens.clone(),
            item_tokens: self.item_tokens.clone(),
            user_index: self.user_index.clone(),
            item_index: self.item_index.clone(),
            behaviors: self.behaviors.clone(),
        }
    }

    /// Write `token<TAB>dense_index` sidecar maps for users and items.
    pub fn write_index_sidecars(
        &self,
        mut users_out: impl Write,
        mut items_out: impl Write,
    ) -> Result<()> {
        for (i, t) in self.user_tokens.iter().enumerate() {
            writeln!(users_out, "{t}\t{i}")?;
        }
        for (i, t) in self.item_tokens.iter().enumerate() {
            writeln!(items_out, "{t}\t{i}")?;
        }
        Ok(())
    }
}

struct LogBuilder {
    user_tokens: Vec<String>,
    item_tokens: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
    behaviors: Vec<String>,
    behavior_index: HashMap<String, u32>,
    records: Vec<Interaction>,
    // (user, item, behavior) -> position in `records`
    seen: HashMap<(u32, u32, u32), usize>,
}

impl LogBuilder {
    fn new(behaviors: Vec<String>) -> Self {
        let behavior_index = behaviors
            .iter()
            .enumerate()
            .map(|(i, b)| (b.clone(), i as u32))
            .collect();
        Self {
            user_tokens: Vec::new(),
            item_tokens: Vec::new(),
            user_index: HashMap::new(),
            item_index: HashMap::new(),
            behaviors,
            behavior_index,
            records: Vec::new(),
            seen: HashMap::new(),
        }
    }

    fn intern_user(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.user_index.get(token) {
            return id;
        }
        let id = self.user_tokens.len() as u32;
        self.user_tokens.push(token.to_owned());
        self.user_index.insert(token.to_owned(), id);
        id
    }

    fn intern_item(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.item_index.get(token) {
            return id;
        }
        let id = self.item_tokens.len() as u32;
        self.item_tokens.push(token.to_owned());
        self.item_index.insert(token.to_owned(), id);
        id
    }

    // Earliest timestamp wins; on a timestamp tie the earlier row wins.
    fn push(&mut self, user: u32, item: u32, behavior: u32, timestamp: i64, row: u64) {
        match self.seen.entry((user, item, behavior)) {
            std::collections::hash_map::Entry::Occupied(e) => {
                let rec = &mut self.records[*e.get()];
                if (timestamp, row) < (rec.timestamp, rec.row) {
                    rec.timestamp = timestamp;
                    rec.row = row;
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(self.records.len());
                self.records.push(Interaction {
                    user,
                    item,
                    behavior,
                    timestamp,
                    row,
                });
            }
        }
    }

    fn finish(self) -> Result<InteractionLog> {
        if self.records.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(InteractionLog {
            records: self.records,
            user_tokens: self.user_tokens,
            item_tokens: self.item_tokens,
            user_index: self.user_index,
            item_index: self.item_index,
            behaviors: self.behaviors,
        })
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    line.trim_end_matches(['\r', '\n']).split('\t').collect()
}

fn parse_timestamp(field: &str, line_no: usize) -> Result<i64> {
    field.trim().parse::<i64>().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("timestamp '{field}' is not an integer"),
    })
}

/// Ingest a combined TSV stream with rows `user<TAB>item<TAB>behavior<TAB>timestamp`.
///
/// `behaviors` is the declared label set; rows with labels outside it are
/// rejected. Line numbers in errors are 1-based and count the header when
/// present.
pub fn ingest_tsv(
    reader: impl BufRead,
    behaviors: &[String],
    has_header: bool,
) -> Result<InteractionLog> {
    let mut builder = LogBuilder::new(behaviors.to_vec());
    let mut row: u64 = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if i == 0 && has_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(&line);
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let behavior = match builder.behavior_index.get(fields[2].trim()) {
            Some(&b) => b,
            None => {
                return Err(Error::UnknownBehavior {
                    label: fields[2].trim().to_owned(),
                    line: line_no,
                })
            }
        };
        let ts = parse_timestamp(fields[3], line_no)?;
        let u = builder.intern_user(fields[0].trim());
        let it = builder.intern_item(fields[1].trim());
        builder.push(u, it, behavior, ts, row);
        row += 1;
    }
    builder.finish()
}

/// Ingest one TSV stream per behavior, rows `user<TAB>item<TAB>timestamp`.
///
/// The declared behavior set is the file labels in the given order; streams
/// are consumed in that order, which also fixes the dedup/holdout tie-break
/// ordering across files.
pub fn ingest_behavior_files<R: BufRead>(
    files: Vec<(String, R)>,
    has_header: bool,
) -> Result<InteractionLog> {
    let labels: Vec<String> = files.iter().map(|(l, _)| l.clone()).collect();
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::DuplicateBehavior(l.clone()));
        }
    }
    let mut builder = LogBuilder::new(labels);
    let mut row: u64 = 0;
    for (b, (_, reader)) in files.into_iter().enumerate() {
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if i == 0 && has_header {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields = split_fields(&line);
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let ts = parse_timestamp(fields[2], line_no)?;
            let u = builder.intern_user(fields[0].trim());
            let it = builder.intern_item(fields[1].trim());
            builder.push(u, it, b as u32, ts, row);
            row += 1;
        }
    }
    builder.finish()
}
