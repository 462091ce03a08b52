use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};
use synsum_core::NoteBundle;

use crate::LlmError;

/// Cache key for a record's bundle: hash of the record id, the prompt, the
/// model id and the temperature.
pub fn cache_key(record_id: u64, prompt: &str, model: &str, temperature: f64) -> String {
    let prompt_hash = Sha256::digest(prompt.as_bytes());
    let mut h = Sha256::new();
    h.update(record_id.to_le_bytes());
    h.update(prompt_hash);
    h.update(model.as_bytes());
    h.update([0]);
    h.update(temperature.to_bits().to_le_bytes());
    h.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
}

/// Directory of JSON bundles, one file per key. Writes are serialized.
#[derive(Debug)]
pub struct Cache {
    dir: PathBuf,
    lock: Mutex<()>,
}

impl Cache {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, LlmError> {
        std::fs::create_dir_all(dir.as_ref())?;
        Ok(Cache { dir: dir.as_ref().to_path_buf(), lock: Mutex::new(()) })
    }

    fn path(&self, record_id: u64, key: &str) -> PathBuf {
        self.dir.join(format!("{record_id}-{key}.json"))
    }

    /// A stored bundle, or `None` when absent or unreadable.
    pub fn get(&self, record_id: u64, key: &str) -> Option<NoteBundle> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let text = std::fs::read_to_string(self.path(record_id, key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put(&self, key: &str, bundle: &NoteBundle) -> Result<(), LlmError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let path = self.path(bundle.record_id, key);
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(bundle)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }
}
