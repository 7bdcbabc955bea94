//! Oracles shared by several test targets.

use std::collections::BTreeMap;

/// Every matching of neighbouring seed particles, each matched pair
/// compressed by `1..=r/2` steps, with sign `(-1)^{total steps}`.
pub fn sign_rule_state(r: usize, particles: usize) -> BTreeMap<u64, i64> {
    fn go(k: usize, r: usize, n: usize, bits: u64, sign: i64, out: &mut BTreeMap<u64, i64>) {
        if k >= n {
            *out.entry(bits).or_insert(0) += sign;
            return;
        }
        let p = k * (r + 1);
        go(k + 1, r, n, bits | 1 << p, sign, out);
        if k + 1 < n {
            for step in 1..=r / 2 {
                let s = if step % 2 == 0 { sign } else { -sign };
                let b = bits | 1 << (p + step) | 1 << (p + r + 1 - step);
                go(k + 2, r, n, b, s, out);
            }
        }
    }
    let mut out = BTreeMap::new();
    go(0, r, particles, 0, 1, &mut out);
    out
}
