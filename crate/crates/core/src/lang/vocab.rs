use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use super::lexer::Token;

/// Integer id of a token text. `0` is reserved for padding.
pub type TokenId = u32;

pub const PAD_ID: TokenId = 0;

/// Key under which the unknown-token id is stored once a vocabulary is frozen.
/// It cannot collide with a lexed token: `<` and `UNK` always lex separately.
pub const UNK_KEY: &str = "<UNK>";

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("cannot access vocabulary file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("vocabulary file {path} is not a JSON object of token -> id: {message}")]
    Format { path: String, message: String },
    #[error("vocabulary key {key:?} has invalid id {id}: ids must be positive integers")]
    InvalidId { key: String, id: String },
    #[error("vocabulary key {key:?} reuses id {id}")]
    DuplicateId { key: String, id: TokenId },
    #[error("vocabulary key {key:?} leaves a gap: ids must cover 1..={max} contiguously")]
    Gap { key: String, max: TokenId },
}

/// Persistent, injective token-text → id map. Ids are handed out
/// sequentially from 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenVocab {
    map: HashMap<String, TokenId>,
    next_id: TokenId,
}

impl TokenVocab {
    pub fn new() -> Self {
        Self { map: HashMap::new(), next_id: 1 }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn next_id(&self) -> TokenId {
        self.next_id
    }

    pub fn get(&self, text: &str) -> Option<TokenId> {
        self.map.get(text).copied()
    }

    pub fn unk_id(&self) -> Option<TokenId> {
        self.get(UNK_KEY)
    }

    pub fn is_frozen(&self) -> bool {
        self.unk_id().is_some()
    }

    /// Allocates the unknown-token id; idempotent.
    pub fn freeze(&mut self) -> TokenId {
        if let Some(id) = self.unk_id() {
            return id;
        }
        self.insert(UNK_KEY)
    }

    fn insert(&mut self, text: &str) -> TokenId {
        let id = self.next_id;
        self.map.insert(text.to_string(), id);
        self.next_id += 1;
        id
    }

    /// Maps token texts to ids. Unseen texts extend the vocabulary unless
    /// `frozen` is set, in which case they map to the UNK id (allocated on
    /// demand if the vocabulary was never frozen).
    pub fn encode(&mut self, tokens: &[Token], frozen: bool) -> Vec<TokenId> {
        let mut ids = Vec::with_capacity(tokens.len());
        for tok in tokens {
            let id = match self.map.get(&tok.text) {
                Some(&id) => id,
                None if frozen => self.freeze(),
                None => self.insert(&tok.text),
            };
            ids.push(id);
        }
        ids
    }

    /// id → text, indexed by id (slot 0 is the padding placeholder).
    pub fn inverse(&self) -> Vec<String> {
        let mut inv = vec![String::new(); self.next_id as usize];
        for (text, &id) in &self.map {
            inv[id as usize] = text.clone();
        }
        inv
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        let inv = self.inverse();
        ids.iter()
            .map(|&id| inv.get(id as usize).cloned().unwrap_or_default())
            .collect()
    }

    /// JSON object text → id, keys ordered by id.
    pub fn to_json(&self) -> String {
        let mut entries: Vec<(&String, &TokenId)> = self.map.iter().collect();
        entries.sort_by_key(|(_, &id)| id);
        let mut out = String::from("{");
        for (i, (text, id)) in entries.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str("\n  ");
            out.push_str(&serde_json::to_string(text).expect("string serialization"));
            out.push_str(": ");
            out.push_str(&id.to_string());
        }
        if !entries.is_empty() {
            out.push('\n');
        }
        out.push_str("}\n");
        out
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, VocabError> {
        // Parse into an ordered list of pairs so duplicate keys are visible.
        let pairs: Vec<(String, serde_json::Value)> = parse_object_pairs(text)
            .map_err(|message| VocabError::Format { path: origin.to_string(), message })?;
        let mut map = HashMap::new();
        let mut by_id: BTreeMap<TokenId, String> = BTreeMap::new();
        for (key, value) in pairs {
            let id = value
                .as_u64()
                .filter(|&v| v >= 1 && v <= TokenId::MAX as u64)
                .ok_or_else(|| VocabError::InvalidId { key: key.clone(), id: value.to_string() })?
                as TokenId;
            if map.contains_key(&key) {
                return Err(VocabError::Format {
                    path: origin.to_string(),
                    message: format!("duplicate key {key:?}"),
                });
            }
            if by_id.contains_key(&id) {
                return Err(VocabError::DuplicateId { key, id });
            }
            by_id.insert(id, key.clone());
            map.insert(key, id);
        }
        let max = by_id.keys().next_back().copied().unwrap_or(0);
        if max as usize != by_id.len() {
            let (_, key) = by_id.iter().last().unwrap();
            return Err(VocabError::Gap { key: key.clone(), max });
        }
        Ok(Self { map, next_id: max + 1 })
    }
}

fn parse_object_pairs(text: &str) -> Result<Vec<(String, serde_json::Value)>, String> {
    use serde::de::{Deserializer, MapAccess, Visitor};
    use std::fmt;

    struct PairsVisitor;
    impl<'de> Visitor<'de> for PairsVisitor {
        type Value = Vec<(String, serde_json::Value)>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a JSON object")
        }
        fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some((k, v)) = access.next_entry::<String, serde_json::Value>()? {
                out.push((k, v));
            }
            Ok(out)
        }
    }

    let mut de = serde_json::Deserializer::from_str(text);
    let pairs = (&mut de).deserialize_map(PairsVisitor).map_err(|e| e.to_string())?;
    de.end().map_err(|e| e.to_string())?;
    Ok(pairs)
}

pub fn save_vocab(vocab: &TokenVocab, path: &Path) -> Result<(), VocabError> {
    fs::write(path, vocab.to_json())
        .map_err(|source| VocabError::Io { path: path.display().to_string(), source })
}

pub fn load_vocab(path: &Path) -> Result<TokenVocab, VocabError> {
    let text = fs::read_to_string(path)
        .map_err(|source| VocabError::Io { path: path.display().to_string(), source })?;
    TokenVocab::from_json(&text, &path.display().to_string())
}
