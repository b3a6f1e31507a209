//! Hashing and file-moving helpers shared by the directory operations.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use walkdir::WalkDir;

/// Files moved aside by prune and dedup live under this directory name.
pub const QUARANTINE_DIR: &str = ".quarantine";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Regular files directly inside `dir`, sorted by name.
pub fn list_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// Regular files under `dir` (recursively, quarantine excluded), as sorted
/// relative paths.
pub fn walk_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let walker = WalkDir::new(dir).into_iter().filter_entry(|e| e.file_name() != QUARANTINE_DIR);
    for entry in walker {
        let entry = entry.map_err(io::Error::other)?;
        if entry.file_type().is_file() {
            files.push(entry.path().strip_prefix(dir).expect("walk stays under root").to_path_buf());
        }
    }
    files.sort();
    Ok(files)
}

/// Moves `root/rel` to `root/.quarantine/<bucket>/rel`, creating parents.
pub fn quarantine(root: &Path, rel: &Path, bucket: &str) -> io::Result<PathBuf> {
    let dest = root.join(QUARANTINE_DIR).join(bucket).join(rel);
    if let Some(parent) = dest.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::rename(root.join(rel), &dest)?;
    Ok(dest)
}

/// Moves every file in `root/.quarantine/<bucket>` back to its original place.
pub fn restore_quarantine(root: &Path, bucket: &str) -> io::Result<Vec<PathBuf>> {
    let qdir = root.join(QUARANTINE_DIR).join(bucket);
    if !qdir.exists() {
        return Ok(Vec::new());
    }
    let mut restored = Vec::new();
    for rel in walk_files(&qdir)? {
        let dest = root.join(&rel);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::rename(qdir.join(&rel), &dest)?;
        restored.push(rel);
    }
    fs::remove_dir_all(&qdir)?;
    Ok(restored)
}

/// Digest over the sorted (relative path, content hash) listing of a tree,
/// skipping names in `exclude`.
pub fn tree_checksum(dir: &Path, exclude: &[&str]) -> io::Result<String> {
    let mut listing = String::new();
    for rel in walk_files(dir)? {
        if rel.file_name().and_then(|n| n.to_str()).is_some_and(|n| exclude.contains(&n)) {
            continue;
        }
        listing.push_str(&rel.to_string_lossy());
        listing.push('\t');
        listing.push_str(&hash_file(&dir.join(&rel))?);
        listing.push('\n');
    }
    Ok(sha256_hex(listing.as_bytes()))
}

/// Recursively copies `src` into a fresh `dest` (removed first if present).
/// The quarantine directory is not copied.
pub fn copy_tree(src: &Path, dest: &Path) -> io::Result<()> {
    if dest.exists() {
        fs::remove_dir_all(dest)?;
    }
    fs::create_dir_all(dest)?;
    for rel in walk_files(src)? {
        let to = dest.join(&rel);
        if let Some(parent) = to.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::copy(src.join(&rel), to)?;
    }
    Ok(())
}

pub fn file_name_string(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn quarantine_is_reversible() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("a")).unwrap();
        fs::write(dir.path().join("a/x.css"), "x").unwrap();
        fs::write(dir.path().join("keep.html"), "k").unwrap();
        let before = tree_checksum(dir.path(), &[]).unwrap();
        quarantine(dir.path(), Path::new("a/x.css"), "prune").unwrap();
        assert_eq!(walk_files(dir.path()).unwrap(), vec![PathBuf::from("keep.html")]);
        assert_ne!(tree_checksum(dir.path(), &[]).unwrap(), before);
        let restored = restore_quarantine(dir.path(), "prune").unwrap();
        assert_eq!(restored, vec![PathBuf::from("a/x.css")]);
        assert_eq!(tree_checksum(dir.path(), &[]).unwrap(), before);
    }
}
