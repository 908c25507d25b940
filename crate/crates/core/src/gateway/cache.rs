use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub(crate) fn hash_key(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One file per request hash. Writes land in a temp file in the same
/// directory and are renamed into place, so readers never see partial data.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> io::Result<Option<Vec<u8>>> {
        match fs::read(self.path_for(key)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn put(&self, key: &str, bytes: &[u8]) -> io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path_for(key)).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn len(&self) -> io::Result<usize> {
        Ok(fs::read_dir(&self.dir)?
            .filter_map(Result::ok)
            .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
            .count())
    }

    pub fn is_empty(&self) -> io::Result<bool> {
        self.len().map(|n| n == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let key = hash_key(b"req");
        assert_eq!(key.len(), 64);
        assert!(cache.get(&key).unwrap().is_none());
        cache.put(&key, b"one").unwrap();
        cache.put(&key, b"two").unwrap();
        assert_eq!(cache.get(&key).unwrap().unwrap(), b"two");
        assert_eq!(cache.len().unwrap(), 1);
    }

    #[test]
    fn concurrent_writers_leave_a_complete_file() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        std::thread::scope(|s| {
            for i in 0..8 {
                let cache = cache.clone();
                s.spawn(move || {
                    let body = vec![b'a' + i as u8; 4096];
                    cache.put("k", &body).unwrap();
                });
            }
        });
        let got = cache.get("k").unwrap().unwrap();
        assert_eq!(got.len(), 4096);
        assert!(got.iter().all(|b| *b == got[0]));
    }
}
