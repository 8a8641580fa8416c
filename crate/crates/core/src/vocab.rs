use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Token = u32;

pub const PAD: Token = 0;
pub const BOS: Token = 1;
pub const EOS: Token = 2;
/// First id available to ordinary tokens.
pub const FIRST_WORD: Token = 3;

/// Integer vocabulary `[0, size)` with three reserved ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    size: usize,
}

impl Vocab {
    pub fn new(size: usize) -> Result<Self> {
        if size < 4 {
            return Err(Error::Parameter(format!(
                "vocabulary needs at least 4 ids (3 reserved), got {size}"
            )));
        }
        Ok(Self { size })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of non-reserved ids.
    #[inline]
    pub fn n_words(&self) -> usize {
        self.size - FIRST_WORD as usize
    }

    #[inline]
    pub fn contains(&self, token: Token) -> bool {
        (token as usize) < self.size
    }
}

/// A (context, response) pair; the response ends with [`EOS`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sample {
    pub context: Vec<Token>,
    pub response: Vec<Token>,
}

impl Sample {
    pub fn new(context: Vec<Token>, response: Vec<Token>) -> Self {
        Self { context, response }
    }

    /// Response tokens without the trailing EOS.
    pub fn response_body(&self) -> &[Token] {
        strip_eos(&self.response)
    }

    pub fn validate(&self, vocab: &Vocab) -> Result<()> {
        if self.response.is_empty() {
            return Err(Error::Domain("response must not be empty".into()));
        }
        if self.response.last() != Some(&EOS) {
            return Err(Error::Domain("response must end with EOS".into()));
        }
        if let Some(t) = self
            .context
            .iter()
            .chain(&self.response)
            .find(|&&t| !vocab.contains(t))
        {
            return Err(Error::Domain(format!(
                "token {t} outside vocabulary of size {}",
                vocab.size()
            )));
        }
        Ok(())
    }
}

/// Drops everything from the first EOS on.
pub fn strip_eos(tokens: &[Token]) -> &[Token] {
    match tokens.iter().position(|&t| t == EOS) {
        Some(p) => &tokens[..p],
        None => tokens,
    }
}

pub fn format_tokens(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(Token::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_tokens(text: &str) -> Result<Vec<Token>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<Token>()
                .map_err(|e| Error::Parse(format!("bad token '{t}': {e}")))
        })
        .collect()
}
