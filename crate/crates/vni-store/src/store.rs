use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use rusqlite::{params, Connection, OptionalExtension, Transaction, TransactionBehavior};
use slingkube_core::{OwnerRef, Timestamp, Vni, VniRange};

use crate::schema::{DDL, SCHEMA_VERSION};
use crate::types::{AuditOp, AuditRecord, DenyReason, Outcome, VniRecord, VniState};
use crate::{QuarantinePolicy, StoreError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Durability {
    /// fsync on every commit.
    Full,
    /// WAL with fsync at checkpoints only; commits survive process crashes.
    #[default]
    Normal,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StoreConfig {
    pub pool: VniRange,
    pub quarantine: QuarantinePolicy,
    pub durability: Durability,
}

/// Thread-safe handle to the VNI database.
#[derive(Debug)]
pub struct VniStore {
    conn: Mutex<Connection>,
    config: StoreConfig,
}

impl VniStore {
    pub fn open(path: impl AsRef<Path>, config: StoreConfig) -> Result<Self, StoreError> {
        let conn = Connection::open(path)?;
        conn.busy_timeout(Duration::from_secs(10))?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        let sync = match config.durability {
            Durability::Full => "FULL",
            Durability::Normal => "NORMAL",
        };
        conn.pragma_update(None, "synchronous", sync)?;
        Self::init(conn, config)
    }

    /// A private, non-persistent store. Useful for tests and simulation.
    pub fn in_memory(config: StoreConfig) -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?, config)
    }

    fn init(mut conn: Connection, config: StoreConfig) -> Result<Self, StoreError> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.execute_batch(DDL)?;
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let stored: Option<(String, String)> = tx
            .query_row(
                "SELECT (SELECT value FROM meta WHERE key = 'pool_start'),
                        (SELECT value FROM meta WHERE key = 'pool_end')",
                [],
                |r| Ok((r.get::<_, Option<String>>(0)?, r.get::<_, Option<String>>(1)?)),
            )
            .map(|(a, b)| a.zip(b))?;
        let requested = (config.pool.start().0.to_string(), config.pool.end().0.to_string());
        match stored {
            Some(stored) if stored != requested => {
                return Err(StoreError::PoolMismatch {
                    stored: format!("[{}, {}]", stored.0, stored.1),
                    requested: format!("[{}, {}]", requested.0, requested.1),
                });
            }
            Some(_) => {}
            None => {
                tx.execute(
                    "INSERT INTO meta (key, value) VALUES ('pool_start', ?1), ('pool_end', ?2), ('schema_version', ?3)",
                    params![requested.0, requested.1, SCHEMA_VERSION],
                )?;
                tx.execute(
                    "WITH RECURSIVE pool(v) AS (SELECT ?1 UNION ALL SELECT v + 1 FROM pool WHERE v < ?2)
                     INSERT INTO vnis (vni, state) SELECT v, 'free' FROM pool",
                    params![config.pool.start().0, config.pool.end().0],
                )?;
            }
        }
        tx.commit()?;
        Ok(Self {
            conn: Mutex::new(conn),
            config,
        })
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    fn with_tx<T>(
        &self,
        f: impl FnOnce(&Transaction<'_>) -> Result<T, StoreError>,
    ) -> Result<T, StoreError> {
        let mut conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let out = f(&tx);
        // denied requests are logged, so the transaction commits either way
        match out {
            Ok(_) | Err(StoreError::PoolExhausted)
            | Err(StoreError::NotOwner { .. })
            | Err(StoreError::NotAllocated(_))
            | Err(StoreError::UsersRemain { .. }) => tx.commit()?,
            Err(_) => tx.rollback()?,
        }
        out
    }

    /// Returns the VNI held by `owner`, allocating the lowest eligible one if
    /// the owner holds none. Eligible means Free, or Quarantined for strictly
    /// longer than the quarantine duration.
    pub fn acquire(&self, owner: &OwnerRef, now: Timestamp) -> Result<Vni, StoreError> {
        let quarantine = self.config.quarantine.duration();
        self.with_tx(|tx| {
            if let Some(vni) = owned_by(tx, owner)? {
                return Ok(vni);
            }
            let candidate: Option<u16> = tx
                .query_row(
                    "SELECT vni FROM vnis
                     WHERE state = 'free' OR (state = 'quarantined' AND ?1 - released_at > ?2)
                     ORDER BY vni LIMIT 1",
                    params![now.0, quarantine],
                    |r| r.get(0),
                )
                .optional()?;
            let Some(vni) = candidate.map(Vni) else {
                log(tx, now, AuditOp::Acquire, None, owner.as_str(), Outcome::Denied(DenyReason::PoolExhausted))?;
                return Err(StoreError::PoolExhausted);
            };
            tx.execute(
                "UPDATE vnis SET state = 'allocated', owner = ?2, released_at = NULL WHERE vni = ?1",
                params![vni.0, owner.as_str()],
            )?;
            log(tx, now, AuditOp::Acquire, Some(vni), owner.as_str(), Outcome::Ok)?;
            Ok(vni)
        })
    }

    /// Moves `vni` into quarantine. Denied while users remain.
    pub fn release(&self, vni: Vni, owner: &OwnerRef, now: Timestamp) -> Result<(), StoreError> {
        self.with_tx(|tx| {
            let deny = |reason, err| -> Result<(), StoreError> {
                log(tx, now, AuditOp::Release, Some(vni), owner.as_str(), Outcome::Denied(reason))?;
                Err(err)
            };
            match row(tx, vni)? {
                Some((VniState::Allocated, Some(current))) if current == owner.as_str() => {}
                Some((VniState::Allocated, _)) => {
                    return deny(
                        DenyReason::NotOwner,
                        StoreError::NotOwner {
                            vni,
                            owner: owner.clone(),
                        },
                    )
                }
                _ => return deny(DenyReason::NotAllocated, StoreError::NotAllocated(vni)),
            }
            let users = user_count(tx, vni)?;
            if users > 0 {
                return deny(DenyReason::UsersRemain, StoreError::UsersRemain { vni, users });
            }
            tx.execute(
                "UPDATE vnis SET state = 'quarantined', owner = NULL, released_at = ?2 WHERE vni = ?1",
                params![vni.0, now.0],
            )?;
            log(tx, now, AuditOp::Release, Some(vni), owner.as_str(), Outcome::Ok)
        })
    }

    /// Adds `user` to an allocated VNI. Adding an existing user is a no-op.
    pub fn add_user(&self, vni: Vni, user: &str, now: Timestamp) -> Result<(), StoreError> {
        self.with_tx(|tx| {
            if !matches!(row(tx, vni)?, Some((VniState::Allocated, _))) {
                log(tx, now, AuditOp::AddUser, Some(vni), user, Outcome::Denied(DenyReason::NotAllocated))?;
                return Err(StoreError::NotAllocated(vni));
            }
            let inserted = tx.execute(
                "INSERT OR IGNORE INTO vni_users (vni, user) VALUES (?1, ?2)",
                params![vni.0, user],
            )?;
            if inserted == 1 {
                log(tx, now, AuditOp::AddUser, Some(vni), user, Outcome::Ok)?;
            }
            Ok(())
        })
    }

    /// Removes `user` and returns how many users remain. Unknown users are a
    /// no-op.
    pub fn remove_user(&self, vni: Vni, user: &str, now: Timestamp) -> Result<usize, StoreError> {
        self.with_tx(|tx| {
            if !matches!(row(tx, vni)?, Some((VniState::Allocated, _))) {
                log(tx, now, AuditOp::RemoveUser, Some(vni), user, Outcome::Denied(DenyReason::NotAllocated))?;
                return Err(StoreError::NotAllocated(vni));
            }
            let removed = tx.execute(
                "DELETE FROM vni_users WHERE vni = ?1 AND user = ?2",
                params![vni.0, user],
            )?;
            if removed == 1 {
                log(tx, now, AuditOp::RemoveUser, Some(vni), user, Outcome::Ok)?;
            }
            user_count(tx, vni)
        })
    }

    pub fn lookup_owner(&self, owner: &OwnerRef) -> Result<Option<Vni>, StoreError> {
        let conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        owned_by(&conn, owner)
    }

    pub fn record(&self, vni: Vni) -> Result<Option<VniRecord>, StoreError> {
        let conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let found = conn
            .query_row(
                "SELECT vni, state, owner, released_at FROM vnis WHERE vni = ?1",
                [vni.0],
                raw_record,
            )
            .optional()?;
        found.map(|r| finish_record(&conn, r)).transpose()
    }

    /// Every VNI that is not Free, ordered by value.
    pub fn snapshot(&self) -> Result<Vec<VniRecord>, StoreError> {
        let conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let raws = conn
            .prepare("SELECT vni, state, owner, released_at FROM vnis WHERE state <> 'free' ORDER BY vni")?
            .query_map([], raw_record)?
            .collect::<Result<Vec<_>, _>>()?;
        raws.into_iter().map(|r| finish_record(&conn, r)).collect()
    }

    pub fn count_in_state(&self, state: VniState) -> Result<usize, StoreError> {
        let conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let n: i64 = conn.query_row(
            "SELECT COUNT(*) FROM vnis WHERE state = ?1",
            [state.as_sql()],
            |r| r.get(0),
        )?;
        Ok(n as usize)
    }

    /// All audit records with `seq > since_seq`, in order.
    pub fn audit_log(&self, since_seq: u64) -> Result<Vec<AuditRecord>, StoreError> {
        let conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let mut stmt = conn.prepare(
            "SELECT seq, at, op, vni, actor, outcome, reason FROM audit WHERE seq > ?1 ORDER BY seq",
        )?;
        let rows = stmt
            .query_map([since_seq as i64], |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, f64>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, Option<u16>>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, String>(5)?,
                    r.get::<_, Option<String>>(6)?,
                ))
            })?
            .collect::<Result<Vec<_>, _>>()?;
        rows.into_iter()
            .map(|(seq, at, op, vni, actor, outcome, reason)| {
                let outcome = match (outcome.as_str(), reason) {
                    ("ok", _) => Outcome::Ok,
                    ("denied", Some(reason)) => Outcome::Denied(reason.parse()?),
                    _ => return Err(StoreError::Corrupt(format!("bad outcome at seq {seq}"))),
                };
                Ok(AuditRecord {
                    seq: seq as u64,
                    at: Timestamp(at),
                    op: op.parse()?,
                    vni: vni.map(Vni),
                    actor,
                    outcome,
                })
            })
            .collect()
    }
}

type RawRecord = (u16, String, Option<String>, Option<f64>);

fn raw_record(r: &rusqlite::Row<'_>) -> rusqlite::Result<RawRecord> {
    Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?))
}

fn finish_record(conn: &Connection, (vni, state, owner, released_at): RawRecord) -> Result<VniRecord, StoreError> {
    let users = conn
        .prepare("SELECT user FROM vni_users WHERE vni = ?1 ORDER BY user")?
        .query_map([vni], |r| r.get::<_, String>(0))?
        .collect::<Result<BTreeSet<_>, _>>()?;
    Ok(VniRecord {
        vni: Vni(vni),
        state: state.parse()?,
        owner: owner.map(OwnerRef),
        users,
        released_at: released_at.map(Timestamp),
    })
}

fn owned_by(conn: &Connection, owner: &OwnerRef) -> Result<Option<Vni>, StoreError> {
    Ok(conn
        .query_row("SELECT vni FROM vnis WHERE owner = ?1", [owner.as_str()], |r| r.get::<_, u16>(0))
        .optional()?
        .map(Vni))
}

fn row(conn: &Connection, vni: Vni) -> Result<Option<(VniState, Option<String>)>, StoreError> {
    let raw: Option<(String, Option<String>)> = conn
        .query_row("SELECT state, owner FROM vnis WHERE vni = ?1", [vni.0], |r| {
            Ok((r.get(0)?, r.get(1)?))
        })
        .optional()?;
    raw.map(|(state, owner)| Ok((state.parse()?, owner))).transpose()
}

fn user_count(conn: &Connection, vni: Vni) -> Result<usize, StoreError> {
    let n: i64 = conn.query_row("SELECT COUNT(*) FROM vni_users WHERE vni = ?1", [vni.0], |r| r.get(0))?;
    Ok(n as usize)
}

fn log(
    conn: &Connection,
    at: Timestamp,
    op: AuditOp,
    vni: Option<Vni>,
    actor: &str,
    outcome: Outcome,
) -> Result<(), StoreError> {
    let (outcome, reason) = match outcome {
        Outcome::Ok => ("ok", None),
        Outcome::Denied(r) => ("denied", Some(r.to_string())),
    };
    conn.execute(
        "INSERT INTO audit (at, op, vni, actor, outcome, reason) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
        params![at.0, op.as_sql(), vni.map(|v| v.0), actor, outcome, reason],
    )?;
    Ok(())
}
