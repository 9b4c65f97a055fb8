//! Levenshtein distance over Unicode scalar values.

/// Edit distance (insertions, deletions, substitutions, all cost 1) between
/// two strings, computed over `char`s so multi-byte text is handled per
/// scalar value. Two-row DP: O(|a|*|b|) time, O(min(|a|,|b|)) space.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    // Keep the DP row as short as the shorter string.
    let (long, short) = if a.len() >= b.len() { (&a, &b) } else { (&b, &a) };
    if short.is_empty() {
        return long.len();
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut curr: Vec<usize> = vec![0; short.len() + 1];
    for (i, &lc) in long.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &sc) in short.iter().enumerate() {
            let sub = prev[j] + usize::from(lc != sc);
            let del = prev[j + 1] + 1;
            let ins = curr[j] + 1;
            curr[j + 1] = sub.min(del).min(ins);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// Edit distance normalized to [0, 1]: `d / max(|a|, |b|)`, with both-empty
/// defined as 0 (identical strings are distance zero however short).
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let la = a.chars().count();
    let lb = b.chars().count();
    let denom = la.max(lb);
    if denom == 0 {
        return 0.0;
    }
    edit_distance(a, b) as f64 / denom as f64
}

/// Reference implementation by exhaustive recursion, for cross-checking the
/// DP. Exponential: callers must keep inputs short (asserted at 10 chars).
pub fn edit_distance_exhaustive(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    assert!(
        a.len() <= 10 && b.len() <= 10,
        "exhaustive oracle is exponential; got lengths {} and {}",
        a.len(),
        b.len()
    );
    rec(&a, &b)
}

fn rec(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let sub = rec(&a[1..], &b[1..]) + usize::from(a[0] != b[0]);
    let del = rec(&a[1..], b) + 1;
    let ins = rec(a, &b[1..]) + 1;
    sub.min(del).min(ins)
}
