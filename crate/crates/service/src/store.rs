//! Storage: string-keyed JSON records in a few named tables plus an
//! append-only event log. All writes go through atomic batches.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use parking_lot::RwLock;
use redb::{Database, ReadableTable, TableDefinition};

use crate::error::ServiceError;
use crate::events::{Event, EventKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Table {
    Meta,
    Knowledge,
    Workers,
    Requests,
    Tasks,
    Truths,
    Rewards,
}

impl Table {
    pub fn name(self) -> &'static str {
        match self {
            Table::Meta => "meta",
            Table::Knowledge => "knowledge",
            Table::Workers => "workers",
            Table::Requests => "requests",
            Table::Tasks => "tasks",
            Table::Truths => "truths",
            Table::Rewards => "rewards",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Put { table: Table, key: String, value: String },
    Delete { table: Table, key: String },
    /// Appended to the log with the next sequence number.
    Event { at: DateTime<Utc>, kind: EventKind },
}

impl Op {
    pub fn put(table: Table, key: impl Into<String>, value: &impl serde::Serialize) -> Result<Self, ServiceError> {
        Ok(Op::Put { table, key: key.into(), value: serde_json::to_string(value)? })
    }
}

pub trait Store: Send + Sync {
    fn get(&self, table: Table, key: &str) -> Result<Option<String>, ServiceError>;
    /// Every record of `table` in key order.
    fn scan(&self, table: Table) -> Result<Vec<(String, String)>, ServiceError>;
    /// Applies all of `ops` or none of them.
    fn commit(&self, ops: Vec<Op>) -> Result<(), ServiceError>;
    /// Events with `seq >= from`.
    fn events(&self, from: u64) -> Result<Vec<Event>, ServiceError>;
}

#[derive(Debug, Default)]
struct MemoryState {
    tables: BTreeMap<(Table, String), String>,
    events: Vec<Event>,
}

/// Volatile store for tests and simulations.
#[derive(Debug, Default)]
pub struct MemoryStore(RwLock<MemoryState>);

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Store for MemoryStore {
    fn get(&self, table: Table, key: &str) -> Result<Option<String>, ServiceError> {
        Ok(self.0.read().tables.get(&(table, key.to_owned())).cloned())
    }

    fn scan(&self, table: Table) -> Result<Vec<(String, String)>, ServiceError> {
        let s = self.0.read();
        Ok(s.tables.range((table, String::new())..).take_while(|((t, _), _)| *t == table).map(|((_, k), v)| (k.clone(), v.clone())).collect())
    }

    fn commit(&self, ops: Vec<Op>) -> Result<(), ServiceError> {
        let mut s = self.0.write();
        for op in ops {
            match op {
                Op::Put { table, key, value } => {
                    s.tables.insert((table, key), value);
                }
                Op::Delete { table, key } => {
                    s.tables.remove(&(table, key));
                }
                Op::Event { at, kind } => {
                    let seq = s.events.len() as u64;
                    s.events.push(Event { seq, at, kind });
                }
            }
        }
        Ok(())
    }

    fn events(&self, from: u64) -> Result<Vec<Event>, ServiceError> {
        Ok(self.0.read().events.iter().skip(from as usize).cloned().collect())
    }
}

const RECORDS: TableDefinition<&str, &str> = TableDefinition::new("records");
const EVENTS: TableDefinition<u64, &str> = TableDefinition::new("events");

fn storage<E: std::fmt::Display>(e: E) -> ServiceError {
    ServiceError::Storage(e.to_string())
}

fn record_key(table: Table, key: &str) -> String {
    format!("{}\u{0}{}", table.name(), key)
}

/// Durable store in a single embedded database file.
pub struct RedbStore {
    db: Database,
}

impl RedbStore {
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let db = Database::create(path).map_err(storage)?;
        let tx = db.begin_write().map_err(storage)?;
        tx.open_table(RECORDS).map_err(storage)?;
        tx.open_table(EVENTS).map_err(storage)?;
        tx.commit().map_err(storage)?;
        Ok(Self { db })
    }
}

impl Store for RedbStore {
    fn get(&self, table: Table, key: &str) -> Result<Option<String>, ServiceError> {
        let tx = self.db.begin_read().map_err(storage)?;
        let t = tx.open_table(RECORDS).map_err(storage)?;
        let v = t.get(record_key(table, key).as_str()).map_err(storage)?;
        Ok(v.map(|v| v.value().to_owned()))
    }

    fn scan(&self, table: Table) -> Result<Vec<(String, String)>, ServiceError> {
        let tx = self.db.begin_read().map_err(storage)?;
        let t = tx.open_table(RECORDS).map_err(storage)?;
        let lo = format!("{}\u{0}", table.name());
        let hi = format!("{}\u{1}", table.name());
        let mut out = Vec::new();
        for item in t.range(lo.as_str()..hi.as_str()).map_err(storage)? {
            let (k, v) = item.map_err(storage)?;
            out.push((k.value()[lo.len()..].to_owned(), v.value().to_owned()));
        }
        Ok(out)
    }

    fn commit(&self, ops: Vec<Op>) -> Result<(), ServiceError> {
        let tx = self.db.begin_write().map_err(storage)?;
        {
            let mut records = tx.open_table(RECORDS).map_err(storage)?;
            let mut events = tx.open_table(EVENTS).map_err(storage)?;
            let mut seq = events.last().map_err(storage)?.map_or(0, |(k, _)| k.value() + 1);
            for op in ops {
                match op {
                    Op::Put { table, key, value } => {
                        records.insert(record_key(table, &key).as_str(), value.as_str()).map_err(storage)?;
                    }
                    Op::Delete { table, key } => {
                        records.remove(record_key(table, &key).as_str()).map_err(storage)?;
                    }
                    Op::Event { at, kind } => {
                        let json = serde_json::to_string(&Event { seq, at, kind })?;
                        events.insert(seq, json.as_str()).map_err(storage)?;
                        seq += 1;
                    }
                }
            }
        }
        tx.commit().map_err(storage)
    }

    fn events(&self, from: u64) -> Result<Vec<Event>, ServiceError> {
        let tx = self.db.begin_read().map_err(storage)?;
        let t = tx.open_table(EVENTS).map_err(storage)?;
        let mut out = Vec::new();
        for item in t.range(from..).map_err(storage)? {
            let (_, v) = item.map_err(storage)?;
            out.push(serde_json::from_str(v.value())?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn exercise(store: &dyn Store) {
        let at = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        store
            .commit(vec![
                Op::Put { table: Table::Tasks, key: "b".into(), value: "2".into() },
                Op::Put { table: Table::Tasks, key: "a".into(), value: "1".into() },
                Op::Put { table: Table::Truths, key: "a".into(), value: "x".into() },
                Op::Event { at, kind: EventKind::KnowledgeUpdated { what: "one".into() } },
                Op::Event { at, kind: EventKind::KnowledgeUpdated { what: "two".into() } },
            ])
            .unwrap();
        assert_eq!(store.get(Table::Tasks, "a").unwrap().as_deref(), Some("1"));
        assert_eq!(store.get(Table::Meta, "a").unwrap(), None);
        assert_eq!(store.scan(Table::Tasks).unwrap(), vec![("a".into(), "1".into()), ("b".into(), "2".into())]);
        store
            .commit(vec![
                Op::Delete { table: Table::Tasks, key: "a".into() },
                Op::Event { at, kind: EventKind::KnowledgeUpdated { what: "three".into() } },
            ])
            .unwrap();
        assert_eq!(store.scan(Table::Tasks).unwrap().len(), 1);
        let ev = store.events(0).unwrap();
        assert_eq!(ev.iter().map(|e| e.seq).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(store.events(2).unwrap().len(), 1);
    }

    #[test]
    fn memory_store() {
        exercise(&MemoryStore::new());
    }

    #[test]
    fn redb_store_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db.redb");
        {
            let s = RedbStore::open(&path).unwrap();
            exercise(&s);
        }
        let s = RedbStore::open(&path).unwrap();
        assert_eq!(s.get(Table::Tasks, "b").unwrap().as_deref(), Some("2"));
        assert_eq!(s.events(0).unwrap().len(), 3);
    }
}
