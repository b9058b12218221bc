//! Signed Pauli strings, the observable language of the whole crate.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{array, Array2};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::mps::OneSiteOperator;

/// One non-identity single-qubit Pauli.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn matrix(self) -> Array2<C64> {
        let o = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            PauliAxis::X => array![[o, one], [one, o]],
            PauliAxis::Y => array![[o, -i], [i, o]],
            PauliAxis::Z => array![[one, o], [o, -one]],
        }
    }

    pub fn letter(self) -> char {
        match self {
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        }
    }

    pub fn from_letter(ch: char) -> Option<Self> {
        match ch.to_ascii_uppercase() {
            'X' => Some(PauliAxis::X),
            'Y' => Some(PauliAxis::Y),
            'Z' => Some(PauliAxis::Z),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PauliParseError {
    #[error("empty token at byte {0}")]
    EmptyToken(usize),
    #[error("unknown Pauli letter '{0}'")]
    UnknownAxis(char),
    #[error("missing site index after '{0}'")]
    MissingSite(char),
    #[error("site {0} listed twice")]
    DuplicateSite(usize),
}

/// Sparse signed Pauli string: a map site → axis plus an overall sign.
///
/// The weight `k` is the number of supported sites. The identity string has
/// empty support and sign +1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliString {
    support: BTreeMap<usize, PauliAxis>,
    sign: i8,
}

impl Default for PauliString {
    fn default() -> Self {
        Self::identity()
    }
}

impl PauliString {
    pub fn identity() -> Self {
        Self { support: BTreeMap::new(), sign: 1 }
    }

    pub fn new(entries: impl IntoIterator<Item = (usize, PauliAxis)>) -> Self {
        let mut support = BTreeMap::new();
        for (site, axis) in entries {
            support.insert(site, axis);
        }
        Self { support, sign: 1 }
    }

    /// `Z^{⊗k}` on `k` consecutive sites starting at `start`.
    pub fn z_block(start: usize, k: usize) -> Self {
        Self::new((start..start + k).map(|s| (s, PauliAxis::Z)))
    }

    pub fn with_sign(mut self, sign: i8) -> Self {
        assert!(sign == 1 || sign == -1);
        self.sign = sign;
        self
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn flip_sign(&mut self) {
        self.sign = -self.sign;
    }

    /// Number of supported (non-identity) sites.
    pub fn weight(&self) -> usize {
        self.support.len()
    }

    pub fn is_identity(&self) -> bool {
        self.support.is_empty()
    }

    pub fn axis_at(&self, site: usize) -> Option<PauliAxis> {
        self.support.get(&site).copied()
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.support.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, PauliAxis)> + '_ {
        self.support.iter().map(|(&s, &a)| (s, a))
    }

    pub fn max_site(&self) -> Option<usize> {
        self.support.keys().next_back().copied()
    }

    /// Replace the axis on `site` (used by Clifford conjugation).
    pub fn set_axis(&mut self, site: usize, axis: PauliAxis) {
        self.support.insert(site, axis);
    }

    /// Per-site operator list for MPS expectation values (sign not included).
    pub fn one_site_operators(&self) -> Vec<OneSiteOperator> {
        self.iter()
            .map(|(site, axis)| OneSiteOperator { site, matrix: axis.matrix() })
            .collect()
    }

    /// Parse strings like `"Z4 X5"`, `"+Z4Z5"`, or `"-Y0X2Z3"`.
    ///
    /// A token is an axis letter followed by a decimal site index; whitespace
    /// between tokens is optional. A leading `+`/`-` fixes the sign.
    pub fn parse(text: &str) -> Result<Self, PauliParseError> {
        let mut sign = 1i8;
        let mut support = BTreeMap::new();
        let mut chars = text.char_indices().peekable();
        // optional sign
        if let Some(&(_, ch)) = chars.peek() {
            if ch == '+' || ch == '-' {
                sign = if ch == '-' { -1 } else { 1 };
                chars.next();
            }
        }
        while let Some((pos, ch)) = chars.next() {
            if ch.is_whitespace() {
                continue;
            }
            let axis = PauliAxis::from_letter(ch).ok_or(PauliParseError::UnknownAxis(ch))?;
            let mut digits = String::new();
            while let Some(&(_, d)) = chars.peek() {
                if d.is_ascii_digit() {
                    digits.push(d);
                    chars.next();
                } else {
                    break;
                }
            }
            if digits.is_empty() {
                return Err(PauliParseError::MissingSite(ch));
            }
            let site: usize = digits.parse().map_err(|_| PauliParseError::EmptyToken(pos))?;
            if support.insert(site, axis).is_some() {
                return Err(PauliParseError::DuplicateSite(site));
            }
        }
        Ok(Self { support, sign })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.sign >= 0 { '+' } else { '-' })?;
        if self.support.is_empty() {
            return write!(f, "I");
        }
        for (&site, &axis) in &self.support {
            write!(f, "{}{}", axis.letter(), site)?;
        }
        Ok(())
    }
}
