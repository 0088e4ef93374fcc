/// Unit-cost edit distance between two symbol sequences.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.len() < b.len() {
        return levenshtein(b, a);
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = diag + usize::from(x != y);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full-matrix recurrence.
    fn oracle(a: &[u32], b: &[u32]) -> usize {
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            d[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let c = usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + c);
            }
        }
        d[a.len()][b.len()]
    }

    #[test]
    fn examples() {
        assert_eq!(levenshtein(&[0, 6, 999], &[0, 6, 999]), 0);
        assert_eq!(levenshtein(&[0, 6, 999], &[0, 7, 999]), 1);
        let k: Vec<u32> = "kitten".bytes().map(u32::from).collect();
        let s: Vec<u32> = "sitting".bytes().map(u32::from).collect();
        assert_eq!(levenshtein(&k, &s), 3);
        assert_eq!(levenshtein::<u32>(&[], &[1, 2]), 2);
    }

    fn seq() -> impl Strategy<Value = Vec<u32>> {
        prop::collection::vec(prop::sample::select(vec![0u32, 6, 7, 13, 999]), 0..12)
    }

    proptest! {
        #[test]
        fn matches_oracle_and_metric_axioms(a in seq(), b in seq(), c in seq()) {
            let ab = levenshtein(&a, &b);
            prop_assert_eq!(ab, oracle(&a, &b));
            prop_assert_eq!(ab, levenshtein(&b, &a));
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(levenshtein(&a, &c) <= ab + levenshtein(&b, &c));
        }
    }
}
