//! Enrollment, authentication and revocation against a file-per-user store.
//!
//! Layout under the store root:
//!
//! ```text
//! <user_id>/record.json   class, epoch and file names
//! <user_id>/template.pgm  proxy template
//! <user_id>/k2.pxks       operator key share
//! <user_id>/.lock         held while the user's files are being changed
//! ```
//!
//! The user's token `token_<user_id>.pxtk` is one JSON header line followed
//! by the `k1` share as a PXKS block. Neither the presented print nor the
//! full key is ever written.

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::matching::{fused_score, MatchScore};
use crate::pipeline::ProxyGenerator;
use crate::rng::{derive_seed, tags};
use crate::transform::io::{decode_share, encode_share, load_share, save_share, write};
use crate::transform::{generate_key, split_key};

const RECORD_FILE: &str = "record.json";
const TEMPLATE_FILE: &str = "template.pgm";
const SHARE_FILE: &str = "k2.pxks";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyTemplate {
    pub image: Image<f32>,
    pub class_index: usize,
    pub created_from_key_epoch: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrollmentRecord {
    pub user_id: String,
    pub template: ProxyTemplate,
    pub k2: Vec<f64>,
    pub class_index: usize,
    pub key_epoch: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserToken {
    pub user_id: String,
    pub class_index: usize,
    pub key_epoch: u32,
    pub k1: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenHeader {
    user_id: String,
    class: usize,
    epoch: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordFile {
    user_id: String,
    class: usize,
    epoch: u32,
    template_epoch: u32,
    template: String,
    k2: String,
}

impl UserToken {
    pub fn file_name(user_id: &str) -> String {
        format!("token_{user_id}.pxtk")
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = TokenHeader {
            user_id: self.user_id.clone(),
            class: self.class_index,
            epoch: self.key_epoch,
        };
        let mut out = serde_json::to_vec(&header).expect("token header is always serializable");
        out.push(b'\n');
        out.extend(encode_share(&self.k1));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let split = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("PXTK", "missing header line"))?;
        let header: TokenHeader = serde_json::from_slice(&bytes[..split])
            .map_err(|e| Error::format("PXTK", e.to_string()))?;
        validate_user_id(&header.user_id)?;
        validate_class(header.class)?;
        Ok(Self {
            user_id: header.user_id,
            class_index: header.class,
            key_epoch: header.epoch,
            k1: decode_share(&bytes[split + 1..])?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write(path.as_ref(), &self.encode())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuthDecision {
    pub accept: bool,
    pub score: MatchScore,
    pub threshold: f64,
}

impl AuthDecision {
    pub fn new(score: MatchScore, threshold: f64) -> Self {
        Self { accept: score.fused >= threshold, score, threshold }
    }
}

/// User ids become directory and file names, so they are restricted to
/// ASCII letters, digits, `-`, `_` and `.` and may not start with a dot.
pub fn validate_user_id(user_id: &str) -> Result<()> {
    let ok = !user_id.is_empty()
        && user_id.len() <= 64
        && !user_id.starts_with('.')
        && user_id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("invalid user id {user_id:?}")))
    }
}

fn validate_class(class_index: usize) -> Result<()> {
    if (1..=5).contains(&class_index) {
        Ok(())
    } else {
        Err(Error::Domain(format!("class index {class_index} outside 1..=5")))
    }
}

/// Key seed for `user_id` at `epoch`, derived from a master seed.
pub fn enrollment_key_seed(master: u64, user_id: &str, epoch: u32) -> u64 {
    let digest = Sha256::digest(user_id.as_bytes());
    let id = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
    derive_seed(master, &[tags::ENROLL_KEYS, id, u64::from(epoch)])
}

/// Exclusive hold on one user's directory; released on drop.
#[derive(Debug)]
pub struct UserLock {
    path: PathBuf,
}

impl Drop for UserLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone)]
pub struct TemplateStore {
    pub root: PathBuf,
}

impl TemplateStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn user_dir(&self, user_id: &str) -> PathBuf {
        self.root.join(user_id)
    }

    pub fn contains(&self, user_id: &str) -> bool {
        self.user_dir(user_id).join(RECORD_FILE).exists()
    }

    pub fn lock(&self, user_id: &str) -> Result<UserLock> {
        validate_user_id(user_id)?;
        let dir = self.user_dir(user_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(UserLock { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::Locked(user_id.into())),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn load(&self, user_id: &str) -> Result<EnrollmentRecord> {
        validate_user_id(user_id)?;
        let dir = self.user_dir(user_id);
        let path = dir.join(RECORD_FILE);
        let text = match fs::read(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => return Err(Error::NotFound(user_id.into())),
            Err(e) => return Err(Error::io(path, e)),
        };
        let meta: RecordFile =
            serde_json::from_slice(&text).map_err(|e| Error::format("record", e.to_string()))?;
        if meta.user_id != user_id {
            return Err(Error::format("record", format!("record names user {:?}", meta.user_id)));
        }
        validate_class(meta.class)?;
        let image = Image::read_pgm(dir.join(&meta.template))?;
        Ok(EnrollmentRecord {
            user_id: meta.user_id,
            template: ProxyTemplate {
                image,
                class_index: meta.class,
                created_from_key_epoch: meta.template_epoch,
            },
            k2: load_share(dir.join(&meta.k2))?,
            class_index: meta.class,
            key_epoch: meta.epoch,
        })
    }

    /// Writes the template and share first and the record last, so a
    /// record on disk always points at complete files.
    fn save(&self, record: &EnrollmentRecord) -> Result<()> {
        let dir = self.user_dir(&record.user_id);
        record.template.image.write_pgm(dir.join(TEMPLATE_FILE))?;
        save_share(&record.k2, dir.join(SHARE_FILE))?;
        let meta = RecordFile {
            user_id: record.user_id.clone(),
            class: record.class_index,
            epoch: record.key_epoch,
            template_epoch: record.template.created_from_key_epoch,
            template: TEMPLATE_FILE.into(),
            k2: SHARE_FILE.into(),
        };
        let json = serde_json::to_string_pretty(&meta).expect("record is always serializable");
        write(&dir.join(RECORD_FILE), format!("{json}\n").as_bytes())
    }
}

fn issue(
    generator: &ProxyGenerator,
    user_id: &str,
    biometric: &Image<f32>,
    class_index: usize,
    key_seed: u64,
    epoch: u32,
) -> Result<(EnrollmentRecord, UserToken)> {
    validate_class(class_index)?;
    let key = generate_key(key_seed, generator.latent_len())?;
    let shares = split_key(&key, derive_seed(key_seed, &[tags::SHARE_SPLIT]));
    let latent = generator.latent(biometric)?;
    // built from the shares, exactly as a later probe will be
    let image = generator.proxy_from_shares(&latent, &shares.k1, &shares.k2, class_index)?.quantized();
    let record = EnrollmentRecord {
        user_id: user_id.into(),
        template: ProxyTemplate { image, class_index, created_from_key_epoch: epoch },
        k2: shares.k2,
        class_index,
        key_epoch: epoch,
    };
    let token = UserToken { user_id: user_id.into(), class_index, key_epoch: epoch, k1: shares.k1 };
    Ok((record, token))
}

pub fn enroll(
    store: &TemplateStore,
    generator: &ProxyGenerator,
    user_id: &str,
    biometric: &Image<f32>,
    class_index: usize,
    key_seed: u64,
) -> Result<(EnrollmentRecord, UserToken)> {
    let _lock = store.lock(user_id)?;
    if store.contains(user_id) {
        return Err(Error::Conflict(user_id.into()));
    }
    let (record, token) = issue(generator, user_id, biometric, class_index, key_seed, 1)?;
    store.save(&record)?;
    Ok((record, token))
}

/// Rebuilds the probe proxy from `probe` and the two shares and scores it
/// against the enrolled template. Never writes to the store.
pub fn authenticate(
    store: &TemplateStore,
    generator: &ProxyGenerator,
    probe: &Image<f32>,
    token: &UserToken,
    threshold: f64,
) -> Result<AuthDecision> {
    let record = store.load(&token.user_id)?;
    if token.key_epoch != record.key_epoch {
        return Err(Error::StaleToken {
            user: token.user_id.clone(),
            token_epoch: token.key_epoch,
            record_epoch: record.key_epoch,
        });
    }
    if token.class_index != record.class_index {
        return Err(Error::Domain(format!(
            "token class {} does not match enrolled class {}",
            token.class_index, record.class_index
        )));
    }
    let latent = generator.latent(probe)?;
    // quantized like the stored template
    let proxy = generator.proxy_from_shares(&latent, &token.k1, &record.k2, token.class_index)?.quantized();
    Ok(AuthDecision::new(fused_score(&record.template.image, &proxy)?, threshold))
}

/// Issues a fresh key, shares and template from a re-presented print.
/// The epoch goes up by one, which invalidates every earlier token.
pub fn revoke(
    store: &TemplateStore,
    generator: &ProxyGenerator,
    user_id: &str,
    biometric: &Image<f32>,
    new_key_seed: u64,
    new_class_index: Option<usize>,
) -> Result<(EnrollmentRecord, UserToken)> {
    let _lock = store.lock(user_id)?;
    let old = store.load(user_id)?;
    let class_index = new_class_index.unwrap_or(old.class_index);
    let epoch = old
        .key_epoch
        .checked_add(1)
        .ok_or_else(|| Error::Domain("key epoch exhausted".into()))?;
    let (record, token) = issue(generator, user_id, biometric, class_index, new_key_seed, epoch)?;
    store.save(&record)?;
    Ok((record, token))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_round_trips() {
        let t = UserToken { user_id: "u1".into(), class_index: 3, key_epoch: 2, k1: vec![0.5, -1.25, 3.0] };
        let bytes = t.encode();
        assert!(bytes.starts_with(br#"{"user_id":"u1","class":3,"epoch":2}"#));
        assert_eq!(UserToken::decode(&bytes).unwrap(), t);
        assert!(UserToken::decode(b"no header").is_err());
        let mut bad = bytes.clone();
        bad.truncate(bad.len() - 1);
        assert!(UserToken::decode(&bad).is_err());
    }

    #[test]
    fn user_ids_are_restricted() {
        for ok in ["u1", "alice.b", "X_9-z"] {
            validate_user_id(ok).unwrap();
        }
        for bad in ["", ".hidden", "a/b", "..", "a b", "é"] {
            assert!(validate_user_id(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn decision_is_inclusive_at_threshold() {
        let s = MatchScore::from_parts(0.6, 0.4);
        assert!(AuthDecision::new(s, s.fused).accept);
        assert!(!AuthDecision::new(s, s.fused + 1e-9).accept);
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let store = TemplateStore::new(dir.path());
        let held = store.lock("u1").unwrap();
        assert!(matches!(store.lock("u1"), Err(Error::Locked(_))));
        store.lock("u2").unwrap();
        drop(held);
        store.lock("u1").unwrap();
    }

    #[test]
    fn missing_user_is_not_found() {
        let dir = tempfile::tempdir().unwrap();
        let store = TemplateStore::new(dir.path());
        assert!(matches!(store.load("ghost"), Err(Error::NotFound(_))));
    }

    #[test]
    fn key_seeds_differ_by_user_and_epoch() {
        let a = enrollment_key_seed(1, "u1", 1);
        assert_eq!(a, enrollment_key_seed(1, "u1", 1));
        assert_ne!(a, enrollment_key_seed(1, "u2", 1));
        assert_ne!(a, enrollment_key_seed(1, "u1", 2));
        assert_ne!(a, enrollment_key_seed(2, "u1", 1));
    }
}
