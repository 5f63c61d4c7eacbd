//! k-subsets in lexicographic order, with ranking so sweeps can be split
//! into independent chunks.

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// The `rank`-th k-subset of `0..n` in lexicographic order.
pub fn unrank(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let remaining = k - slot - 1;
        let mut v = next;
        loop {
            let count = binomial(n - v - 1, remaining);
            if rank < count {
                break;
            }
            rank -= count;
            v += 1;
        }
        out.push(v);
        next = v + 1;
    }
    out
}

/// Advances `c` to the next k-subset of `0..n`; false when exhausted.
pub fn advance(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Calls `f` on every k-subset with rank in `start..start+count`.
pub fn for_each_in_range<F: FnMut(&[usize])>(
    n: usize,
    k: usize,
    start: u128,
    count: u128,
    mut f: F,
) {
    if count == 0 {
        return;
    }
    let mut c = unrank(n, k, start);
    f(&c);
    for _ in 1..count {
        if !advance(&mut c, n) {
            break;
        }
        f(&c);
    }
}
