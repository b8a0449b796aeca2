use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::thread;
use std::time::Duration;

use sha2::{Digest, Sha256};

/// Replaces `path` atomically: write a sibling temp file, fsync, rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryFailure {
    pub attempts: u32,
    pub message: String,
}

/// Runs `op` until it succeeds, fails permanently, or `max_retries` retries
/// are used up, sleeping `backoff_ms * 2^(attempt-1)` between attempts. The
/// error tuple flags whether a failure is worth retrying.
pub fn with_retries<T>(
    max_retries: u32,
    backoff_ms: u64,
    mut op: impl FnMut() -> Result<T, (bool, String)>,
) -> Result<T, RetryFailure> {
    let mut attempts = 0u32;
    loop {
        attempts += 1;
        match op() {
            Ok(v) => return Ok(v),
            Err((retryable, message)) => {
                if !retryable || attempts > max_retries {
                    return Err(RetryFailure { attempts, message });
                }
                let delay = backoff_ms.saturating_mul(1u64 << (attempts - 1).min(16));
                log::warn!("attempt {attempts} failed ({message}); retrying in {delay} ms");
                thread::sleep(Duration::from_millis(delay));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retries_then_succeeds() {
        let mut calls = 0;
        let r = with_retries(3, 0, || {
            calls += 1;
            if calls < 3 {
                Err((true, "busy".to_string()))
            } else {
                Ok(calls)
            }
        });
        assert_eq!(r, Ok(3));
    }

    #[test]
    fn gives_up_after_max_retries() {
        let mut calls = 0;
        let r: Result<(), _> = with_retries(2, 0, || {
            calls += 1;
            Err((true, "down".to_string()))
        });
        assert_eq!(r.unwrap_err().attempts, 3);
        assert_eq!(calls, 3);
    }

    #[test]
    fn permanent_error_stops_immediately() {
        let r: Result<(), _> = with_retries(5, 0, || Err((false, "bad request".to_string())));
        assert_eq!(r.unwrap_err().attempts, 1);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
    }
}
