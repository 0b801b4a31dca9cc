//! Static real-word label pool and random-string fallback.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use rand::Rng;

static WORDS: &str = include_str!("../data/words.txt");

/// The deduplicated pool in file order.
pub fn word_pool() -> Vec<&'static str> {
    let mut seen = BTreeSet::new();
    WORDS.split_whitespace().filter(|w| seen.insert(*w)).collect()
}

/// A random alphanumeric token, capitalised, `len` characters long.
pub fn random_token<R: Rng + ?Sized>(rng: &mut R, len: usize) -> String {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    const MIXED: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let mut s = String::with_capacity(len);
    for i in 0..len {
        let c = if i == 0 {
            LETTERS[rng.random_range(0..LETTERS.len())].to_ascii_uppercase()
        } else {
            MIXED[rng.random_range(0..MIXED.len())]
        };
        s.push(c as char);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_has_at_least_2000_distinct_words() {
        let pool = word_pool();
        assert!(pool.len() >= 2000, "{}", pool.len());
        assert!(pool.iter().all(|w| w.is_ascii() && w.len() <= 12));
    }
}
