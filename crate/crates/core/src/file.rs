//! Chunked file transfer with a SHA-256 digest over the whole content.
//!
//! A transfer is one `file_manifest` followed by `chunk_count` `file_chunk`
//! envelopes. Chunks may arrive in any order and more than once; the
//! receiver collects them in a [`FileAssembler`] and only releases the bytes
//! once every index is present and the digest matches.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::id::{is_valid_token, random_token, InvalidId};

pub const DEFAULT_CHUNK_SIZE: u64 = 16384;

/// Name of the digest algorithm carried in manifests.
pub const DIGEST_ALGORITHM: &str = "sha-256";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FileError {
    #[error("missing chunks {0:?}")]
    MissingChunks(Vec<u64>),
    #[error("reassembled content does not match the manifest digest")]
    DigestMismatch,
    #[error("chunk belongs to unknown file {0}")]
    UnknownFileId(FileId),
    #[error("chunk index {index} out of range for {chunk_count} chunks")]
    IndexOutOfRange { index: u64, chunk_count: u64 },
    #[error("chunk size must be at least 1")]
    ZeroChunkSize,
    #[error("inconsistent manifest: {0}")]
    BadManifest(&'static str),
}

/// Random 16-character token naming one transfer.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FileId(String);

impl FileId {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        FileId(random_token(rng))
    }

    pub fn parse(s: &str) -> Result<Self, InvalidId> {
        if is_valid_token(s) {
            Ok(FileId(s.to_owned()))
        } else {
            Err(InvalidId { value: s.to_owned() })
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FileId({})", self.0)
    }
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileManifest {
    pub file_id: FileId,
    pub name: String,
    pub total_bytes: u64,
    pub chunk_size: u64,
    pub chunk_count: u64,
    pub digest: [u8; 32],
}

impl FileManifest {
    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest)
    }

    pub fn validate(&self) -> Result<(), FileError> {
        if self.chunk_size == 0 {
            return Err(FileError::ZeroChunkSize);
        }
        if self.chunk_count != self.total_bytes.div_ceil(self.chunk_size) {
            return Err(FileError::BadManifest("chunk_count != ceil(total_bytes / chunk_size)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileChunk {
    pub file_id: FileId,
    pub index: u64,
    pub data: Vec<u8>,
}

/// Splits `bytes` into chunks of `chunk_size` (the last may be shorter).
pub fn chunk_file(
    bytes: &[u8],
    chunk_size: u64,
    name: &str,
    file_id: FileId,
) -> Result<(FileManifest, Vec<FileChunk>), FileError> {
    if chunk_size == 0 {
        return Err(FileError::ZeroChunkSize);
    }
    let size = usize::try_from(chunk_size).unwrap_or(usize::MAX);
    let chunks: Vec<FileChunk> = bytes
        .chunks(size)
        .enumerate()
        .map(|(i, data)| FileChunk {
            file_id: file_id.clone(),
            index: i as u64,
            data: data.to_vec(),
        })
        .collect();
    let manifest = FileManifest {
        file_id,
        name: name.to_owned(),
        total_bytes: bytes.len() as u64,
        chunk_size,
        chunk_count: chunks.len() as u64,
        digest: sha256(bytes),
    };
    Ok((manifest, chunks))
}

/// Receiving side of one transfer.
#[derive(Debug, Clone)]
pub struct FileAssembler {
    manifest: FileManifest,
    received: BTreeMap<u64, Vec<u8>>,
}

impl FileAssembler {
    pub fn new(manifest: FileManifest) -> Result<Self, FileError> {
        manifest.validate()?;
        Ok(Self {
            manifest,
            received: BTreeMap::new(),
        })
    }

    pub fn manifest(&self) -> &FileManifest {
        &self.manifest
    }

    /// Records a chunk. Duplicates are ignored; the first copy wins.
    pub fn accept(&mut self, chunk: &FileChunk) -> Result<(), FileError> {
        if chunk.file_id != self.manifest.file_id {
            return Err(FileError::UnknownFileId(chunk.file_id.clone()));
        }
        if chunk.index >= self.manifest.chunk_count {
            return Err(FileError::IndexOutOfRange {
                index: chunk.index,
                chunk_count: self.manifest.chunk_count,
            });
        }
        self.received.entry(chunk.index).or_insert_with(|| chunk.data.clone());
        Ok(())
    }

    pub fn received_count(&self) -> u64 {
        self.received.len() as u64
    }

    pub fn is_complete(&self) -> bool {
        self.received_count() == self.manifest.chunk_count
    }

    pub fn missing(&self) -> Vec<u64> {
        (0..self.manifest.chunk_count)
            .filter(|i| !self.received.contains_key(i))
            .collect()
    }

    pub fn finish(&self) -> Result<Vec<u8>, FileError> {
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(FileError::MissingChunks(missing));
        }
        let mut out = Vec::with_capacity(self.manifest.total_bytes as usize);
        for data in self.received.values() {
            out.extend_from_slice(data);
        }
        if out.len() as u64 != self.manifest.total_bytes || sha256(&out) != self.manifest.digest {
            return Err(FileError::DigestMismatch);
        }
        Ok(out)
    }
}

/// Rebuilds the original bytes from chunks in any order, with duplicates.
pub fn reassemble(manifest: &FileManifest, chunks: &[FileChunk]) -> Result<Vec<u8>, FileError> {
    let mut asm = FileAssembler::new(manifest.clone())?;
    for c in chunks {
        asm.accept(c)?;
    }
    asm.finish()
}
