use crate::corpus::MARKERS;
use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
/// The newline separator that closes every sentence.
pub const SEP: TokenId = 1;
pub const LABEL0: TokenId = 2;
pub const LABEL1: TokenId = 3;
/// Ids of `INDICATION:`, `TECHNIQUE:`, `COMPARISON:` in that order.
pub const FIELD_IDS: [TokenId; 3] = [4, 5, 6];
/// Ids below this value never come out of the hash.
pub const RESERVED: TokenId = 8;

pub fn label_token(y: u8) -> TokenId {
    if y == 1 {
        LABEL1
    } else {
        LABEL0
    }
}

/// Hashing vocabulary: surface tokens are hashed into `[RESERVED, size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocabulary {
    size: usize,
}

impl Vocabulary {
    pub fn new(size: usize) -> Result<Self> {
        if size < 16 {
            return Err(Error::Config(format!("vocabulary size {size} must be at least 16")));
        }
        if size > u32::MAX as usize {
            return Err(Error::Config("vocabulary size exceeds u32".into()));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn hash_token(&self, surface: &str) -> TokenId {
        let span = self.size as u64 - RESERVED as u64;
        RESERVED + (fnv1a64(surface.as_bytes()) % span) as TokenId
    }

    /// Lowercased word/punctuation split. Newlines map to [`SEP`] and the
    /// uppercase field markers to their reserved ids.
    pub fn tokenize(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::new();
        let mut rest = text;
        'outer: while let Some(c) = rest.chars().next() {
            for (k, marker) in MARKERS.iter().enumerate() {
                if rest.starts_with(marker) {
                    out.push(FIELD_IDS[k]);
                    rest = &rest[marker.len()..];
                    continue 'outer;
                }
            }
            if c == '\n' {
                out.push(SEP);
                rest = &rest[1..];
            } else if c.is_whitespace() {
                rest = &rest[c.len_utf8()..];
            } else if c.is_alphanumeric() {
                let end = rest
                    .char_indices()
                    .find(|&(_, ch)| !ch.is_alphanumeric())
                    .map_or(rest.len(), |(i, _)| i);
                out.push(self.hash_token(&rest[..end].to_lowercase()));
                rest = &rest[end..];
            } else {
                let n = c.len_utf8();
                out.push(self.hash_token(&rest[..n]));
                rest = &rest[n..];
            }
        }
        out
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_cases() {
        let v = Vocabulary::new(4096).unwrap();
        assert!(v.tokenize("").is_empty());
        let a = v.tokenize("No pneumothorax.");
        assert_eq!(a.len(), 3);
        assert_eq!(a, v.tokenize("No pneumothorax."));
        assert_eq!(a, v.tokenize("no   PNEUMOTHORAX."));
        assert_eq!(v.tokenize("\n"), vec![SEP]);
        assert!(a.iter().all(|&t| t >= RESERVED && (t as usize) < 4096));
        assert_eq!(v.tokenize("INDICATION: cough")[0], FIELD_IDS[0]);
        assert_ne!(v.tokenize("indication: cough")[0], FIELD_IDS[0]);
    }

    #[test]
    fn hash_is_platform_stable() {
        // FNV-1a reference values
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn small_vocab_rejected() {
        assert!(Vocabulary::new(15).is_err());
        let v = Vocabulary::new(16).unwrap();
        assert!(v.tokenize("a b c d e f g").iter().all(|&t| (RESERVED..16).contains(&t)));
    }
}
