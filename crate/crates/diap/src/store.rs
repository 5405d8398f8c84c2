// SPDX-License-Identifier: Apache-2.0

//! Local content-addressed store and signed name registry.
//!
//! Blocks are keyed by the SHA-256 digest of their bytes. Every read is
//! re-hashed, so a corrupted backend surfaces as
//! [`StoreError::IntegrityViolation`] instead of returning wrong bytes.
//!
//! The name registry keeps the latest [`IpnsRecord`] per name. Publishes are
//! serialized so sequence numbers for a name only ever increase.
//!
//! On disk ([`FsBackend`]):
//!
//! ```text
//! <root>/blocks/<hex digest>        raw block bytes
//! <root>/names/<multibase key>.json latest record, canonical JSON
//! ```

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use diap_core::{canonical, Cid, IpnsName, IpnsRecord, KeyPair};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found")]
    NotFound,
    #[error("integrity violation: stored bytes do not hash to {0}")]
    IntegrityViolation(Cid),
    #[error("stale sequence {attempted} for {name}: last accepted is {last}")]
    StaleSequence {
        name: String,
        last: u64,
        attempted: u64,
    },
    #[error("record signature does not verify")]
    InvalidSignature,
    #[error("stored record signature is invalid")]
    RecordSignatureInvalid,
    #[error("stored record is malformed: {0}")]
    MalformedRecord(String),
    #[error("storage backend: {0}")]
    Io(#[from] io::Error),
}

/// Raw persistence underneath a [`ContentStore`]. Implementations do not
/// validate anything; the store does.
pub trait Backend: Send + Sync {
    fn read_block(&self, digest: &[u8; 32]) -> io::Result<Option<Vec<u8>>>;
    fn write_block(&self, digest: &[u8; 32], bytes: &[u8]) -> io::Result<()>;
    fn read_name(&self, name: &IpnsName) -> io::Result<Option<Vec<u8>>>;
    fn write_name(&self, name: &IpnsName, bytes: &[u8]) -> io::Result<()>;
}

#[derive(Default)]
pub struct MemoryBackend {
    blocks: RwLock<HashMap<[u8; 32], Vec<u8>>>,
    names: RwLock<HashMap<IpnsName, Vec<u8>>>,
}

impl Backend for MemoryBackend {
    fn read_block(&self, digest: &[u8; 32]) -> io::Result<Option<Vec<u8>>> {
        Ok(self.blocks.read().unwrap().get(digest).cloned())
    }

    fn write_block(&self, digest: &[u8; 32], bytes: &[u8]) -> io::Result<()> {
        self.blocks.write().unwrap().insert(*digest, bytes.to_vec());
        Ok(())
    }

    fn read_name(&self, name: &IpnsName) -> io::Result<Option<Vec<u8>>> {
        Ok(self.names.read().unwrap().get(name).cloned())
    }

    fn write_name(&self, name: &IpnsName, bytes: &[u8]) -> io::Result<()> {
        self.names.write().unwrap().insert(name.clone(), bytes.to_vec());
        Ok(())
    }
}

/// Directory-backed persistence. Writes go through a temporary file and a
/// rename, so readers never see a partial block.
pub struct FsBackend {
    root: PathBuf,
}

impl FsBackend {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("blocks"))?;
        fs::create_dir_all(root.join("names"))?;
        Ok(FsBackend { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn block_path(&self, digest: &[u8; 32]) -> PathBuf {
        self.root.join("blocks").join(hex::encode(digest))
    }

    fn name_path(&self, name: &IpnsName) -> PathBuf {
        self.root
            .join("names")
            .join(format!("{}.json", name.key_payload()))
    }
}

fn read_optional(path: &Path) -> io::Result<Option<Vec<u8>>> {
    match fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

impl Backend for FsBackend {
    fn read_block(&self, digest: &[u8; 32]) -> io::Result<Option<Vec<u8>>> {
        read_optional(&self.block_path(digest))
    }

    fn write_block(&self, digest: &[u8; 32], bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.block_path(digest), bytes)
    }

    fn read_name(&self, name: &IpnsName) -> io::Result<Option<Vec<u8>>> {
        read_optional(&self.name_path(name))
    }

    fn write_name(&self, name: &IpnsName, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.name_path(name), bytes)
    }
}

pub struct ContentStore {
    backend: Box<dyn Backend>,
    publish_lock: Mutex<()>,
}

impl ContentStore {
    pub fn new(backend: impl Backend + 'static) -> Self {
        ContentStore {
            backend: Box::new(backend),
            publish_lock: Mutex::new(()),
        }
    }

    pub fn in_memory() -> Self {
        Self::new(MemoryBackend::default())
    }

    pub fn open_dir(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        Ok(Self::new(FsBackend::open(root)?))
    }

    /// Stores `content` and returns its identifier. Idempotent.
    pub fn put(&self, content: &[u8]) -> Result<Cid, StoreError> {
        let cid = Cid::compute(content);
        match self.backend.read_block(cid.digest())? {
            Some(existing) if existing == content => {}
            _ => self.backend.write_block(cid.digest(), content)?,
        }
        Ok(cid)
    }

    pub fn get(&self, cid: &Cid) -> Result<Vec<u8>, StoreError> {
        let bytes = self
            .backend
            .read_block(cid.digest())?
            .ok_or(StoreError::NotFound)?;
        if !cid.matches(&bytes) {
            return Err(StoreError::IntegrityViolation(*cid));
        }
        Ok(bytes)
    }

    pub fn contains(&self, cid: &Cid) -> Result<bool, StoreError> {
        Ok(self.backend.read_block(cid.digest())?.is_some())
    }

    /// Signs and publishes `cid` under the keypair's name.
    pub fn ipns_publish(
        &self,
        keypair: &KeyPair,
        cid: Cid,
        sequence: u64,
    ) -> Result<IpnsRecord, StoreError> {
        let record = IpnsRecord::sign(keypair, cid, sequence);
        self.ipns_ingest(&record)?;
        Ok(record)
    }

    /// Accepts a record produced elsewhere, after checking its signature
    /// and sequence number.
    pub fn ipns_ingest(&self, record: &IpnsRecord) -> Result<(), StoreError> {
        if !record.verify() {
            return Err(StoreError::InvalidSignature);
        }
        let _guard = self.publish_lock.lock().unwrap();
        if let Some(current) = self.read_record(&record.name)? {
            if record.sequence <= current.sequence {
                return Err(StoreError::StaleSequence {
                    name: record.name.to_string(),
                    last: current.sequence,
                    attempted: record.sequence,
                });
            }
        }
        let bytes = canonical::to_vec(record).expect("record serializes");
        self.backend.write_name(&record.name, &bytes)?;
        Ok(())
    }

    /// The latest record for `name`, signature re-checked.
    pub fn ipns_record(&self, name: &IpnsName) -> Result<IpnsRecord, StoreError> {
        let record = self.read_record(name)?.ok_or(StoreError::NotFound)?;
        if &record.name != name || !record.verify() {
            return Err(StoreError::RecordSignatureInvalid);
        }
        Ok(record)
    }

    pub fn ipns_resolve(&self, name: &IpnsName) -> Result<Cid, StoreError> {
        Ok(self.ipns_record(name)?.value)
    }

    fn read_record(&self, name: &IpnsName) -> Result<Option<IpnsRecord>, StoreError> {
        match self.backend.read_name(name)? {
            None => Ok(None),
            Some(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| StoreError::MalformedRecord(e.to_string())),
        }
    }

    /// Fault injection: flips one bit of a stored block in place,
    /// bypassing the integrity check. Used by tests and the CLI's
    /// `--tamper` flag.
    pub fn corrupt_block(&self, cid: &Cid, byte_index: usize) -> Result<(), StoreError> {
        let mut bytes = self
            .backend
            .read_block(cid.digest())?
            .ok_or(StoreError::NotFound)?;
        if bytes.is_empty() {
            // Nothing to flip; an appended byte breaks the hash just as well.
            bytes.push(0);
        } else {
            let i = byte_index % bytes.len();
            bytes[i] ^= 0x01;
        }
        self.backend.write_block(cid.digest(), &bytes)?;
        Ok(())
    }

    /// Fault injection: flips a bit in the stored signature of `name`.
    pub fn corrupt_record_signature(&self, name: &IpnsName) -> Result<(), StoreError> {
        let mut record = self.read_record(name)?.ok_or(StoreError::NotFound)?;
        record.signature.0[0] ^= 0x01;
        let bytes = canonical::to_vec(&record).expect("record serializes");
        self.backend.write_name(name, &bytes)?;
        Ok(())
    }

    /// Copies a block's raw bytes into `other` without validation.
    pub fn copy_raw_block(&self, cid: &Cid, other: &ContentStore) -> Result<(), StoreError> {
        let bytes = self
            .backend
            .read_block(cid.digest())?
            .ok_or(StoreError::NotFound)?;
        other.backend.write_block(cid.digest(), &bytes)?;
        Ok(())
    }
}
