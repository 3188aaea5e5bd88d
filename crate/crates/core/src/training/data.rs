use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NdppError, Result};

/// Basket trim threshold used when nothing else is configured.
pub const DEFAULT_MAX_BASKET: usize = 100;

/// Observed subsets over a catalog `0..m`, with per-item occurrence counts.
#[derive(Clone, Debug, PartialEq)]
pub struct BasketDataset {
    m: usize,
    baskets: Vec<Vec<usize>>,
    mu: Vec<usize>,
    vocab: Option<Vec<String>>,
}

impl BasketDataset {
    /// Validates indices and duplicates and counts occurrences.
    pub fn new(m: usize, baskets: Vec<Vec<usize>>) -> Result<Self> {
        for (n, b) in baskets.iter().enumerate() {
            if b.is_empty() {
                return Err(NdppError::InvalidArgument(format!("basket {n} is empty")));
            }
            if let Some(&bad) = b.iter().find(|&&i| i >= m) {
                return Err(NdppError::InvalidArgument(format!("basket {n}: item {bad} >= M={m}")));
            }
            let mut sorted = b.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(NdppError::InvalidArgument(format!("basket {n} repeats an item")));
            }
        }
        let mu = count_occurrences(m, &baskets);
        Ok(BasketDataset { m, baskets, mu, vocab: None })
    }

    pub fn with_vocab(mut self, vocab: Vec<String>) -> Result<Self> {
        if vocab.len() != self.m {
            return Err(NdppError::Dimension(format!("vocab has {} entries for M={}", vocab.len(), self.m)));
        }
        self.vocab = Some(vocab);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.baskets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.baskets.is_empty()
    }

    pub fn baskets(&self) -> &[Vec<usize>] {
        &self.baskets
    }

    pub fn mu(&self) -> &[usize] {
        &self.mu
    }

    pub fn vocab(&self) -> Option<&[String]> {
        self.vocab.as_deref()
    }

    /// Largest basket size `K′`.
    pub fn max_basket_size(&self) -> usize {
        self.baskets.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Subset of baskets by position, sharing the catalog and vocabulary.
    /// Counts are recomputed from the selected baskets only.
    pub fn subset(&self, idx: &[usize]) -> BasketDataset {
        let baskets: Vec<Vec<usize>> = idx.iter().map(|&i| self.baskets[i].clone()).collect();
        let mu = count_occurrences(self.m, &baskets);
        BasketDataset { m: self.m, baskets, mu, vocab: self.vocab.clone() }
    }

    /// Reads one basket per line of whitespace-separated tokens. Tokens get
    /// dense indices in first-appearance order; repeated tokens within a line
    /// are dropped, and lines with more than `max_basket` distinct items are
    /// skipped entirely.
    pub fn load(path: impl AsRef<Path>, max_basket: usize) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, max_basket)
    }

    pub fn parse(text: &str, max_basket: usize) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut vocab: Vec<String> = Vec::new();
        let mut baskets = Vec::new();
        for line in text.lines() {
            let mut tokens: Vec<&str> = Vec::new();
            for t in line.split_whitespace() {
                if !tokens.contains(&t) {
                    tokens.push(t);
                }
            }
            if tokens.is_empty() || tokens.len() > max_basket {
                continue;
            }
            let basket = tokens
                .into_iter()
                .map(|t| {
                    *index.entry(t).or_insert_with(|| {
                        vocab.push(t.to_string());
                        vocab.len() - 1
                    })
                })
                .collect();
            baskets.push(basket);
        }
        if baskets.is_empty() {
            return Err(NdppError::EmptyDataset);
        }
        Self::new(vocab.len(), baskets)?.with_vocab(vocab)
    }

    /// Reads baskets against a fixed vocabulary (e.g. a trained model's).
    /// Unknown tokens are an error listing every offender.
    pub fn load_with_vocab(path: impl AsRef<Path>, vocab: &[String], max_basket: usize) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let mut unknown = Vec::new();
        let mut baskets = Vec::new();
        for line in text.lines() {
            let mut basket: Vec<usize> = Vec::new();
            for t in line.split_whitespace() {
                match index.get(t) {
                    Some(&i) if !basket.contains(&i) => basket.push(i),
                    Some(_) => {}
                    None => {
                        if !unknown.iter().any(|u: &String| u == t) {
                            unknown.push(t.to_string());
                        }
                    }
                }
            }
            if !basket.is_empty() && basket.len() <= max_basket {
                baskets.push(basket);
            }
        }
        if !unknown.is_empty() {
            return Err(NdppError::UnknownItem(unknown));
        }
        if baskets.is_empty() {
            return Err(NdppError::EmptyDataset);
        }
        Self::new(vocab.len(), baskets)?.with_vocab(vocab.to_vec())
    }

    /// Reads baskets whose tokens are already integer item indices `< m`.
    pub fn load_indexed(path: impl AsRef<Path>, m: usize, max_basket: usize) -> Result<Self> {
        let vocab: Vec<String> = (0..m).map(|i| i.to_string()).collect();
        let mut ds = Self::load_with_vocab(path, &vocab, max_basket)?;
        ds.vocab = None;
        Ok(ds)
    }

    /// Writes the vocabulary, one token per line in index order.
    pub fn save_vocab(&self, path: impl AsRef<Path>) -> Result<()> {
        let vocab = self.vocab.as_ref().ok_or_else(|| NdppError::InvalidArgument("dataset has no vocabulary".into()))?;
        let mut out = vocab.join("\n");
        out.push('\n');
        fs::write(path, out)?;
        Ok(())
    }
}

pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?.lines().map(str::to_string).filter(|s| !s.is_empty()).collect())
}

fn count_occurrences(m: usize, baskets: &[Vec<usize>]) -> Vec<usize> {
    let mut mu = vec![0; m];
    for b in baskets {
        for &i in b {
            mu[i] += 1;
        }
    }
    mu
}

/// Shuffles baskets with `seed` and cuts them into `(train, val, test)`.
/// Each part's counts are recomputed from its own baskets.
pub fn split(
    data: &BasketDataset,
    val_size: usize,
    test_size: usize,
    seed: u64,
) -> Result<(BasketDataset, BasketDataset, BasketDataset)> {
    let n = data.len();
    if val_size + test_size >= n {
        return Err(NdppError::SplitTooLarge { val: val_size, test: test_size, total: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val = data.subset(&order[..val_size]);
    let test = data.subset(&order[val_size..val_size + test_size]);
    let train = data.subset(&order[val_size + test_size..]);
    Ok((train, val, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_small_file() {
        let ds = BasketDataset::parse("a b\nb c\n", 100).unwrap();
        assert_eq!(ds.m(), 3);
        assert_eq!(ds.baskets(), &[vec![0, 1], vec![1, 2]]);
        assert_eq!(ds.mu(), &[1, 2, 1]);
        assert_eq!(ds.vocab().unwrap(), &["a", "b", "c"]);
    }

    #[test]
    fn oversized_basket_dropped() {
        let long: Vec<String> = (0..101).map(|i| format!("x{i}")).collect();
        let text = format!("{}\na b\n", long.join(" "));
        let ds = BasketDataset::parse(&text, 100).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.m(), 2);
        let ds = BasketDataset::parse(&text, 101).unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn duplicates_and_blank_lines() {
        let ds = BasketDataset::parse("a a b\n\n  \nc\n", 100).unwrap();
        assert_eq!(ds.baskets(), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(BasketDataset::parse("", 100), Err(NdppError::EmptyDataset)));
        assert!(matches!(BasketDataset::parse("\n\n", 100), Err(NdppError::EmptyDataset)));
    }

    #[test]
    fn new_validates() {
        assert!(BasketDataset::new(3, vec![vec![0, 3]]).is_err());
        assert!(BasketDataset::new(3, vec![vec![1, 1]]).is_err());
        assert!(BasketDataset::new(3, vec![vec![]]).is_err());
    }

    #[test]
    fn vocab_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.txt");
        fs::write(&path, "b a\nq a z\n").unwrap();
        let vocab: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        match BasketDataset::load_with_vocab(&path, &vocab, 100) {
            Err(NdppError::UnknownItem(u)) => assert_eq!(u, vec!["q", "z"]),
            other => panic!("{other:?}"),
        }
        fs::write(&path, "b a\n1 0 0\n").unwrap();
        assert!(BasketDataset::load_indexed(&path, 2, 100).is_err());
        fs::write(&path, "1 0\n0\n").unwrap();
        let ds = BasketDataset::load_indexed(&path, 2, 100).unwrap();
        assert_eq!(ds.baskets(), &[vec![1, 0], vec![0]]);
        let vpath = dir.path().join("v.txt");
        BasketDataset::parse("x y\n", 10).unwrap().save_vocab(&vpath).unwrap();
        assert_eq!(load_vocab(&vpath).unwrap(), vec!["x", "y"]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let baskets: Vec<Vec<usize>> = (0..100).map(|i| vec![i % 10, 10 + i % 7]).collect();
        let ds = BasketDataset::new(17, baskets).unwrap();
        let (tr, va, te) = split(&ds, 10, 20, 5).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (70, 10, 20));
        let again = split(&ds, 10, 20, 5).unwrap();
        assert_eq!(tr, again.0);
        assert_eq!(te, again.2);
        // μ recount on the training part only.
        let mut mu = vec![0; 17];
        for b in tr.baskets() {
            for &i in b {
                mu[i] += 1;
            }
        }
        assert_eq!(tr.mu(), mu.as_slice());
        assert!(matches!(split(&ds, 50, 50, 0), Err(NdppError::SplitTooLarge { .. })));
    }
}
