//! Signed qualification and environment certificates.
//!
//! The HIT app stores certificates in the browser and sends them back with
//! every submission. Tokens are `p808v1|<kind>|<worker>|<issued_at>|<ttl>|<tag>`
//! where `tag` is hex HMAC-SHA256 over `<kind>|<worker>|<issued_at>|<ttl>`,
//! keyed with a client key derived from the experiment secret. A ttl of 0
//! means the certificate never expires.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::model::{CertificateKind, Timestamp};

type HmacSha256 = Hmac<Sha256>;

const TOKEN_PREFIX: &str = "p808v1";

/// Key used to sign and verify certificates of one experiment.
#[derive(Clone, PartialEq, Eq)]
pub struct CertificateKey([u8; 32]);

impl fmt::Debug for CertificateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CertificateKey(..)")
    }
}

impl CertificateKey {
    /// Derives the client key embedded in the HIT app from the experiment secret.
    pub fn derive(secret: &[u8], experiment_id: &str) -> CertificateKey {
        let mut mac = HmacSha256::new_from_slice(secret).expect("hmac accepts any key length");
        mac.update(b"p808/client-key/");
        mac.update(experiment_id.as_bytes());
        CertificateKey(mac.finalize().into_bytes().into())
    }

    pub fn from_bytes(bytes: [u8; 32]) -> CertificateKey {
        CertificateKey(bytes)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    fn mac(&self) -> HmacSha256 {
        HmacSha256::new_from_slice(&self.0).expect("hmac accepts any key length")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub worker_id: String,
    pub issued_at: Timestamp,
    pub ttl_seconds: u64,
    pub signature: String,
}

fn signed_message(kind: CertificateKind, worker_id: &str, issued_at: Timestamp, ttl: u64) -> String {
    format!("{}|{}|{}|{}", kind.as_str(), worker_id, issued_at, ttl)
}

impl Certificate {
    pub fn issue(
        key: &CertificateKey,
        kind: CertificateKind,
        worker_id: &str,
        issued_at: Timestamp,
        ttl_seconds: u64,
    ) -> Certificate {
        let mut mac = key.mac();
        mac.update(signed_message(kind, worker_id, issued_at, ttl_seconds).as_bytes());
        Certificate {
            kind,
            worker_id: worker_id.to_string(),
            issued_at,
            ttl_seconds,
            signature: hex::encode(mac.finalize().into_bytes()),
        }
    }

    pub fn expires_at(&self) -> Option<Timestamp> {
        (self.ttl_seconds > 0).then(|| self.issued_at.plus(self.ttl_seconds))
    }

    pub fn to_token(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}",
            TOKEN_PREFIX,
            self.kind.as_str(),
            self.worker_id,
            self.issued_at,
            self.ttl_seconds,
            self.signature
        )
    }

    pub fn parse(token: &str) -> Option<Certificate> {
        let mut head = token.splitn(3, '|');
        if head.next()? != TOKEN_PREFIX {
            return None;
        }
        let kind = head.next()?.parse().ok()?;
        let rest = head.next()?;
        let mut tail = rest.rsplitn(4, '|');
        let signature = tail.next()?;
        let ttl_seconds = tail.next()?.parse().ok()?;
        let issued_at = Timestamp(tail.next()?.parse().ok()?);
        let worker_id = tail.next()?;
        if worker_id.is_empty() || signature.len() != 64 {
            return None;
        }
        Some(Certificate {
            kind,
            worker_id: worker_id.to_string(),
            issued_at,
            ttl_seconds,
            signature: signature.to_string(),
        })
    }

    fn signature_ok(&self, key: &CertificateKey) -> bool {
        let Ok(tag) = hex::decode(&self.signature) else {
            return false;
        };
        let mut mac = key.mac();
        mac.update(signed_message(self.kind, &self.worker_id, self.issued_at, self.ttl_seconds).as_bytes());
        mac.verify_slice(&tag).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    Malformed,
    BadSignature,
    WorkerMismatch,
    NotYetValid,
    Expired,
}

impl InvalidReason {
    pub fn as_str(self) -> &'static str {
        match self {
            InvalidReason::Malformed => "malformed",
            InvalidReason::BadSignature => "bad signature",
            InvalidReason::WorkerMismatch => "worker mismatch",
            InvalidReason::NotYetValid => "not yet valid",
            InvalidReason::Expired => "expired",
        }
    }

    /// Reasons that indicate tampering rather than staleness.
    pub fn is_integrity_failure(self) -> bool {
        matches!(
            self,
            InvalidReason::Malformed | InvalidReason::BadSignature | InvalidReason::WorkerMismatch
        )
    }
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateCheck {
    pub certificate: Option<Certificate>,
    pub reason: Option<InvalidReason>,
}

impl CertificateCheck {
    pub fn valid(&self) -> bool {
        self.reason.is_none()
    }
}

/// Full check of one token: well formed, signed with `key`, issued to
/// `worker_id`, and live at `now`. Issue times up to `clock_skew` seconds in
/// the future are tolerated.
pub fn verify_certificate(
    token: &str,
    key: &CertificateKey,
    worker_id: &str,
    now: Timestamp,
    clock_skew: u64,
) -> CertificateCheck {
    let Some(cert) = Certificate::parse(token) else {
        return CertificateCheck {
            certificate: None,
            reason: Some(InvalidReason::Malformed),
        };
    };
    let reason = if !cert.signature_ok(key) {
        Some(InvalidReason::BadSignature)
    } else if cert.worker_id != worker_id {
        Some(InvalidReason::WorkerMismatch)
    } else if cert.issued_at > now.plus(clock_skew) {
        Some(InvalidReason::NotYetValid)
    } else if cert.expires_at().is_some_and(|exp| now >= exp) {
        Some(InvalidReason::Expired)
    } else {
        None
    };
    CertificateCheck {
        certificate: Some(cert),
        reason,
    }
}

/// Checks a set of tokens for tampering only; expiry is ignored.
pub fn tokens_intact(tokens: &[String], key: &CertificateKey, worker_id: &str) -> bool {
    tokens.iter().all(|t| {
        let check = verify_certificate(t, key, worker_id, Timestamp(u64::MAX), u64::MAX);
        !check.reason.is_some_and(InvalidReason::is_integrity_failure)
    })
}

/// Tokens of one kind that pass the full check.
pub fn live_certificates<'a>(
    tokens: &'a [String],
    kind: CertificateKind,
    key: &'a CertificateKey,
    worker_id: &'a str,
    now: Timestamp,
    clock_skew: u64,
) -> impl Iterator<Item = Certificate> + 'a {
    tokens.iter().filter_map(move |t| {
        let check = verify_certificate(t, key, worker_id, now, clock_skew);
        match (check.reason, check.certificate) {
            (None, Some(c)) if c.kind == kind => Some(c),
            _ => None,
        }
    })
}

pub fn split_tokens(field: &str) -> Vec<String> {
    field
        .split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(ToString::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> CertificateKey {
        CertificateKey::derive(b"experiment-secret", "exp-1")
    }

    const MIN: u64 = 60;

    #[test]
    fn round_trip_token() {
        let c = Certificate::issue(&key(), CertificateKind::Environment, "A1|weird", Timestamp(1000), 1800);
        let parsed = Certificate::parse(&c.to_token()).unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn environment_certificate_lifetime() {
        let issued = Timestamp(1_700_000_000);
        let token = Certificate::issue(&key(), CertificateKind::Environment, "W1", issued, 1800).to_token();
        assert!(verify_certificate(&token, &key(), "W1", issued.plus(29 * MIN), 0).valid());
        let late = verify_certificate(&token, &key(), "W1", issued.plus(31 * MIN), 0);
        assert_eq!(late.reason, Some(InvalidReason::Expired));
        // expiry instant itself is outside the window
        let edge = verify_certificate(&token, &key(), "W1", issued.plus(30 * MIN), 0);
        assert_eq!(edge.reason, Some(InvalidReason::Expired));
    }

    #[test]
    fn qualification_certificate_never_expires() {
        let issued = Timestamp(1_600_000_000);
        let token = Certificate::issue(&key(), CertificateKind::Qualification, "W1", issued, 0).to_token();
        let sixty_days = 60 * 24 * 3600;
        assert!(verify_certificate(&token, &key(), "W1", issued.plus(sixty_days), 0).valid());
    }

    #[test]
    fn flipped_signature_byte() {
        let token = Certificate::issue(&key(), CertificateKind::Environment, "W1", Timestamp(10), 1800).to_token();
        let mut bytes = token.into_bytes();
        let last = bytes.len() - 1;
        bytes[last] = if bytes[last] == b'0' { b'1' } else { b'0' };
        let token = String::from_utf8(bytes).unwrap();
        let check = verify_certificate(&token, &key(), "W1", Timestamp(20), 0);
        assert_eq!(check.reason, Some(InvalidReason::BadSignature));
        assert_eq!(check.reason.unwrap().as_str(), "bad signature");
    }

    #[test]
    fn tampered_fields_and_other_secrets() {
        let c = Certificate::issue(&key(), CertificateKind::Environment, "W1", Timestamp(10), 1800);
        let mut forged = c.clone();
        forged.issued_at = Timestamp(5000);
        let check = verify_certificate(&forged.to_token(), &key(), "W1", Timestamp(5010), 0);
        assert_eq!(check.reason, Some(InvalidReason::BadSignature));

        let other = CertificateKey::derive(b"another-secret", "exp-1");
        let check = verify_certificate(&c.to_token(), &other, "W1", Timestamp(20), 0);
        assert_eq!(check.reason, Some(InvalidReason::BadSignature));

        let check = verify_certificate(&c.to_token(), &key(), "W2", Timestamp(20), 0);
        assert_eq!(check.reason, Some(InvalidReason::WorkerMismatch));
    }

    #[test]
    fn malformed_tokens() {
        for t in ["", "garbage", "p808v1|environment|W1|10|1800", "p808v1|nope|W1|10|0|00"] {
            let check = verify_certificate(t, &key(), "W1", Timestamp(20), 0);
            assert_eq!(check.reason, Some(InvalidReason::Malformed), "{t}");
        }
    }

    #[test]
    fn future_issue_time_within_skew() {
        let token = Certificate::issue(&key(), CertificateKind::Environment, "W1", Timestamp(1100), 1800).to_token();
        assert!(verify_certificate(&token, &key(), "W1", Timestamp(1000), 300).valid());
        assert_eq!(
            verify_certificate(&token, &key(), "W1", Timestamp(1000), 60).reason,
            Some(InvalidReason::NotYetValid)
        );
    }

    #[test]
    fn integrity_ignores_expiry() {
        let k = key();
        let tokens = alloc::vec![
            Certificate::issue(&k, CertificateKind::Environment, "W1", Timestamp(0), 1800).to_token(),
            Certificate::issue(&k, CertificateKind::Qualification, "W1", Timestamp(0), 0).to_token(),
        ];
        assert!(tokens_intact(&tokens, &k, "W1"));
        assert!(!tokens_intact(&tokens, &k, "W2"));
        let live: Vec<_> =
            live_certificates(&tokens, CertificateKind::Environment, &k, "W1", Timestamp(1_000_000), 0).collect();
        assert!(live.is_empty());
    }
}
