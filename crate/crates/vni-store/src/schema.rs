//! On-disk schema (SQLite, one file).
//!
//! * `meta(key, value)`: `pool_start`, `pool_end`, `schema_version`.
//! * `vnis(vni, state, owner, released_at)`: one row per pool VNI. `owner`
//!   is UNIQUE, so no owner can hold two VNIs.
//! * `vni_users(vni, user)`: users of allocated VNIs.
//! * `audit(seq, at, op, vni, actor, outcome, reason)`: append-only log.

pub(crate) const SCHEMA_VERSION: &str = "1";

pub(crate) const DDL: &str = "
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS vnis (
    vni         INTEGER PRIMARY KEY,
    state       TEXT NOT NULL CHECK (state IN ('free', 'allocated', 'quarantined')),
    owner       TEXT UNIQUE,
    released_at REAL,
    CHECK ((state = 'allocated') = (owner IS NOT NULL)),
    CHECK (state <> 'quarantined' OR released_at IS NOT NULL)
);
CREATE TABLE IF NOT EXISTS vni_users (
    vni  INTEGER NOT NULL REFERENCES vnis(vni),
    user TEXT NOT NULL,
    PRIMARY KEY (vni, user)
);
CREATE TABLE IF NOT EXISTS audit (
    seq     INTEGER PRIMARY KEY AUTOINCREMENT,
    at      REAL NOT NULL,
    op      TEXT NOT NULL,
    vni     INTEGER,
    actor   TEXT NOT NULL,
    outcome TEXT NOT NULL CHECK (outcome IN ('ok', 'denied')),
    reason  TEXT
);
";
