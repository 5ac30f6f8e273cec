use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const STATE_FILE: &str = "cxi-cni-state.json";
const LOCK_FILE: &str = "cxi-cni.lock";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContainerEntry {
    /// Empty for containers that did not ask for a VNI.
    pub service_ids: Vec<u64>,
    pub netns_inode: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateFile {
    pub containers: BTreeMap<String, ContainerEntry>,
}

/// Exclusive hold on a node's state directory. The lock is released when the
/// guard drops.
pub struct Locked {
    _lock: File,
    path: PathBuf,
    pub state: StateFile,
}

impl StateFile {
    pub fn load(dir: &Path) -> io::Result<StateFile> {
        match fs::read(dir.join(STATE_FILE)) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(io::Error::other),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(StateFile::default()),
            Err(e) => Err(e),
        }
    }

    pub fn lock(dir: &Path) -> io::Result<Locked> {
        fs::create_dir_all(dir)?;
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join(LOCK_FILE))?;
        lock.lock()?;
        Ok(Locked {
            state: StateFile::load(dir)?,
            _lock: lock,
            path: dir.join(STATE_FILE),
        })
    }
}

impl Locked {
    /// Writes through a temp file so readers never see a torn document.
    pub fn save(&self) -> io::Result<()> {
        let tmp = self.path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&self.state).map_err(io::Error::other)?)?;
        fs::rename(tmp, &self.path)
    }
}
