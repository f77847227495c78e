//! Finite words over a finite alphabet and the prefix order on them.
//!
//! Words address cylinders `f_σ(K)`; symbols are 1-based, matching the
//! dot-separated text form (`"1.2.2"`, with the empty word as `""`).

use std::fmt;

use thiserror::Error;

/// Largest word length any construction may reach.
pub const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("alphabet size must be at least 1")]
    EmptyAlphabet,
    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: u16, right: u16 },
    #[error("symbol {symbol} outside alphabet 1..={alphabet}")]
    SymbolOutOfRange { symbol: u16, alphabet: u16 },
    #[error("cannot take {h} symbols from a word of length {len}")]
    PrefixTooLong { h: usize, len: usize },
    #[error("word length {len} exceeds MAX_DEPTH {max}")]
    TooDeep { len: usize, max: usize },
    #[error("cannot parse word {0:?}")]
    Parse(String),
}

/// A finite word `σ = (σ₁,…,σₙ)` tagged with its alphabet size.
///
/// Ordering is alphabet first, then lexicographic on symbols, so a prefix
/// always sorts before its extensions.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    alphabet: u16,
    symbols: Vec<u16>,
}

impl Word {
    /// The empty word θ.
    pub fn empty(alphabet: u16) -> Result<Self, WordError> {
        if alphabet == 0 {
            return Err(WordError::EmptyAlphabet);
        }
        Ok(Self {
            alphabet,
            symbols: Vec::new(),
        })
    }

    /// Builds a word from 1-based symbols.
    pub fn new(alphabet: u16, symbols: Vec<u16>) -> Result<Self, WordError> {
        if alphabet == 0 {
            return Err(WordError::EmptyAlphabet);
        }
        if symbols.len() > MAX_DEPTH {
            return Err(WordError::TooDeep {
                len: symbols.len(),
                max: MAX_DEPTH,
            });
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s == 0 || s > alphabet) {
            return Err(WordError::SymbolOutOfRange {
                symbol: bad,
                alphabet,
            });
        }
        Ok(Self { alphabet, symbols })
    }

    /// Builds a word from 0-based indices.
    pub fn from_indices(alphabet: u16, indices: &[usize]) -> Result<Self, WordError> {
        let symbols = indices
            .iter()
            .map(|&i| u16::try_from(i + 1).unwrap_or(u16::MAX))
            .collect();
        Self::new(alphabet, symbols)
    }

    /// Parses the dot-separated form; the empty string is θ.
    pub fn parse(alphabet: u16, text: &str) -> Result<Self, WordError> {
        let text = text.trim();
        if text.is_empty() {
            return Self::empty(alphabet);
        }
        let symbols = text
            .split('.')
            .map(|part| {
                part.trim()
                    .parse::<u16>()
                    .map_err(|_| WordError::Parse(text.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(alphabet, symbols)
    }

    pub fn alphabet(&self) -> u16 {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// 1-based symbols.
    pub fn symbols(&self) -> &[u16] {
        &self.symbols
    }

    /// 0-based symbol indices, for indexing parameter arrays.
    pub fn indices(&self) -> impl DoubleEndedIterator<Item = usize> + ExactSizeIterator + '_ {
        self.symbols.iter().map(|&s| usize::from(s) - 1)
    }

    fn check_alphabet(&self, other: &Word) -> Result<(), WordError> {
        if self.alphabet != other.alphabet {
            return Err(WordError::AlphabetMismatch {
                left: self.alphabet,
                right: other.alphabet,
            });
        }
        Ok(())
    }

    /// `self ∗ other`.
    pub fn concat(&self, other: &Word) -> Result<Word, WordError> {
        self.check_alphabet(other)?;
        let mut symbols = Vec::with_capacity(self.len() + other.len());
        symbols.extend_from_slice(&self.symbols);
        symbols.extend_from_slice(&other.symbols);
        Word::new(self.alphabet, symbols)
    }

    /// `σ|_h`, the first `h` symbols.
    pub fn prefix(&self, h: usize) -> Result<Word, WordError> {
        if h > self.len() {
            return Err(WordError::PrefixTooLong { h, len: self.len() });
        }
        Ok(Word {
            alphabet: self.alphabet,
            symbols: self.symbols[..h].to_vec(),
        })
    }

    /// The suffix left after removing the first `h` symbols.
    pub fn drop_prefix(&self, h: usize) -> Result<Word, WordError> {
        if h > self.len() {
            return Err(WordError::PrefixTooLong { h, len: self.len() });
        }
        Ok(Word {
            alphabet: self.alphabet,
            symbols: self.symbols[h..].to_vec(),
        })
    }

    /// `σ⁻`; `None` for θ.
    pub fn parent(&self) -> Option<Word> {
        if self.is_empty() {
            None
        } else {
            Some(Word {
                alphabet: self.alphabet,
                symbols: self.symbols[..self.len() - 1].to_vec(),
            })
        }
    }

    /// `σ ∗ (i)` for a 0-based index `i`.
    pub fn child(&self, index: usize) -> Result<Word, WordError> {
        let mut symbols = self.symbols.clone();
        symbols.push(u16::try_from(index + 1).unwrap_or(u16::MAX));
        Word::new(self.alphabet, symbols)
    }

    /// True iff `self ⪯ other`: `|self| ≤ |other|` and `self = other|_{|self|}`.
    pub fn is_predecessor(&self, other: &Word) -> Result<bool, WordError> {
        self.check_alphabet(other)?;
        Ok(self.len() <= other.len() && other.symbols.starts_with(&self.symbols))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word[{}]({})", self.alphabet, self)
    }
}

/// Checks that `words` is a maximal antichain: pairwise prefix-incomparable,
/// and every infinite sequence has a predecessor in the set.
///
/// Works on a sorted copy by pruned descent: a branch is accepted the moment
/// it reaches a member, so the cost is linear in the total member length.
pub fn verify_maximal_antichain(alphabet: u16, words: &[Word]) -> bool {
    if words.is_empty() || words.iter().any(|w| w.alphabet() != alphabet) {
        return false;
    }
    let mut sorted: Vec<&Word> = words.iter().collect();
    sorted.sort();
    covers(&sorted, 0, alphabet)
}

fn covers(words: &[&Word], depth: usize, alphabet: u16) -> bool {
    let Some(first) = words.first() else {
        return false;
    };
    if first.len() == depth {
        // `first` is the common prefix of the whole slice; anything else
        // in the slice extends or duplicates it.
        return words.len() == 1;
    }
    let mut rest = words;
    for symbol in 1..=alphabet {
        let run = rest
            .iter()
            .take_while(|w| w.symbols()[depth] == symbol)
            .count();
        if !covers(&rest[..run], depth + 1, alphabet) {
            return false;
        }
        rest = &rest[run..];
    }
    rest.is_empty()
}

fn is_antichain(words: &[Word]) -> bool {
    let mut sorted: Vec<&Word> = words.iter().collect();
    sorted.sort();
    // In lexicographic order every descendant of σ directly follows σ or
    // another descendant of σ, so adjacent pairs suffice.
    sorted
        .windows(2)
        .all(|pair| !pair[1].symbols().starts_with(pair[0].symbols()))
}

/// A finite set of pairwise prefix-incomparable words over one alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AntichainSet {
    alphabet: u16,
    members: Vec<Word>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AntichainError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("members are not pairwise prefix-incomparable")]
    Comparable,
}

impl AntichainSet {
    pub fn new(alphabet: u16, members: Vec<Word>) -> Result<Self, AntichainError> {
        if alphabet == 0 {
            return Err(WordError::EmptyAlphabet.into());
        }
        if let Some(w) = members.iter().find(|w| w.alphabet() != alphabet) {
            return Err(WordError::AlphabetMismatch {
                left: alphabet,
                right: w.alphabet(),
            }
            .into());
        }
        if !is_antichain(&members) {
            return Err(AntichainError::Comparable);
        }
        Ok(Self { alphabet, members })
    }

    pub fn alphabet(&self) -> u16 {
        self.alphabet
    }

    pub fn members(&self) -> &[Word] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_maximal(&self) -> bool {
        verify_maximal_antichain(self.alphabet, &self.members)
    }

    pub fn into_members(self) -> Vec<Word> {
        self.members
    }
}
