//! On-disk moment-table store.
//!
//! Each table lives in `<sha256 of key>.json` as a checksum line followed by
//! the JSON payload. Writes go through a temp file and an atomic rename while
//! an advisory lock on `.lock` is held.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use ginibre_tau::moments::{MomentKey, MomentStore};
use ginibre_tau::{Error, Result, SkewPair};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const CHECKSUM_PREFIX: &str = "sha256=";

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    pair: SkewPair,
}

#[derive(Debug)]
pub struct DiskStore {
    dir: PathBuf,
    computed: AtomicUsize,
    hits: AtomicUsize,
    warnings: AtomicUsize,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn io_error(context: &str, path: &Path, e: std::io::Error) -> Error {
    Error::Invalid(format!("{context} {}: {e}", path.display()))
}

impl DiskStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_error("cannot create cache directory", &dir, e))?;
        Ok(Self { dir, computed: AtomicUsize::new(0), hits: AtomicUsize::new(0), warnings: AtomicUsize::new(0) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Tables computed by quadrature in this process.
    pub fn computations(&self) -> usize {
        self.computed.load(Ordering::SeqCst)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Corrupt or unreadable entries seen.
    pub fn warnings(&self) -> usize {
        self.warnings.load(Ordering::SeqCst)
    }

    pub fn path_for(&self, key: &MomentKey) -> PathBuf {
        self.dir.join(format!("{}.json", sha256_hex(key.as_str().as_bytes())))
    }

    fn lock(&self) -> Result<File> {
        let path = self.dir.join(".lock");
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(&path).map_err(|e| io_error("cannot open lock", &path, e))?;
        file.lock().map_err(|e| io_error("cannot lock", &path, e))?;
        Ok(file)
    }

    fn read(&self, key: &MomentKey, path: &Path) -> std::result::Result<Option<SkewPair>, String> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.to_string()),
        };
        let (head, payload) = text.split_once('\n').ok_or("missing checksum line")?;
        let sum = head.strip_prefix(CHECKSUM_PREFIX).ok_or("missing checksum line")?;
        if sum != sha256_hex(payload.as_bytes()) {
            return Err("checksum mismatch".into());
        }
        let entry: Entry = serde_json::from_str(payload).map_err(|e| e.to_string())?;
        if entry.key != key.as_str() {
            return Err("key mismatch".into());
        }
        Ok(Some(entry.pair))
    }

    fn write(&self, key: &MomentKey, path: &Path, pair: &SkewPair) -> Result<()> {
        let payload = serde_json::to_string(&Entry { key: key.as_str().to_string(), pair: pair.clone() })
            .map_err(|e| Error::Invalid(format!("cannot encode moment table: {e}")))?;
        let tmp = path.with_extension("tmp");
        let write = || -> std::io::Result<()> {
            let mut f = File::create(&tmp)?;
            writeln!(f, "{CHECKSUM_PREFIX}{}", sha256_hex(payload.as_bytes()))?;
            f.write_all(payload.as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| io_error("cannot write cache entry", path, e))
    }
}

impl MomentStore for DiskStore {
    fn get_or_compute(&self, key: &MomentKey, compute: &mut dyn FnMut() -> Result<SkewPair>) -> Result<SkewPair> {
        let path = self.path_for(key);
        let _guard = self.lock()?;
        match self.read(key, &path) {
            Ok(Some(pair)) => {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return Ok(pair);
            }
            Ok(None) => {}
            Err(why) => {
                self.warnings.fetch_add(1, Ordering::SeqCst);
                log::warn!("cache entry {} unusable ({why}); recomputing", path.display());
            }
        }
        let pair = compute()?;
        self.computed.fetch_add(1, Ordering::SeqCst);
        self.write(key, &path, &pair)?;
        Ok(pair)
    }
}
