use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const N_SPECIALS: u32 = 4;

/// Character-level target inventory. Ids `0..4` are PAD, BOS, EOS, UNK;
/// the remaining ids map one-to-one onto characters.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    chars: Vec<char>,
    index: HashMap<char, u32>,
}

impl Vocab {
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Result<Self> {
        let chars: Vec<char> = chars.into_iter().collect();
        let mut index = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if index.insert(c, i as u32 + N_SPECIALS).is_some() {
                return Err(Error::config("vocab", format!("character {c:?} listed twice")));
            }
        }
        Ok(Vocab { chars, index })
    }

    /// Space, the Devanagari block (U+0900–U+097F), ZWNJ/ZWJ and basic
    /// punctuation.
    pub fn devanagari() -> Self {
        let chars = std::iter::once(' ')
            .chain('\u{0900}'..='\u{097F}')
            .chain(['\u{200C}', '\u{200D}', '.', ',', '?', '!', '-']);
        Vocab::from_chars(chars).expect("inventory has no duplicates")
    }

    pub fn size(&self) -> usize {
        self.chars.len() + N_SPECIALS as usize
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn id(&self, c: char) -> u32 {
        self.index.get(&c).copied().unwrap_or(UNK)
    }

    pub fn char(&self, id: u32) -> Option<char> {
        id.checked_sub(N_SPECIALS)
            .and_then(|i| self.chars.get(i as usize).copied())
    }

    /// `BOS text EOS`.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::with_capacity(text.chars().count() + 2);
        ids.push(BOS);
        ids.extend(text.chars().map(|c| self.id(c)));
        ids.push(EOS);
        ids
    }

    /// Drops special tokens; UNK becomes U+FFFD.
    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .filter_map(|&id| match id {
                PAD | BOS | EOS => None,
                UNK => Some('\u{FFFD}'),
                _ => self.char(id),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn devanagari_inventory() {
        let v = Vocab::devanagari();
        assert!(v.size() <= 200);
        assert_eq!(v.id(' '), N_SPECIALS);
        let ids = v.encode("पन्द्रह घर");
        assert_eq!(ids[0], BOS);
        assert_eq!(*ids.last().unwrap(), EOS);
        assert!(!ids.contains(&UNK));
        assert_eq!(v.decode(&ids), "पन्द्रह घर");
    }

    #[test]
    fn bijective() {
        let v = Vocab::devanagari();
        for id in N_SPECIALS..v.size() as u32 {
            assert_eq!(v.id(v.char(id).unwrap()), id);
        }
        assert_eq!(v.char(v.size() as u32), None);
        assert_eq!(v.id('Q'), UNK);
        assert!(Vocab::from_chars(['a', 'a']).is_err());
    }
}
