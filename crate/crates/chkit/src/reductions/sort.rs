//! Sorting networks as MAX/MIN circuit fragments.

use crate::circuit::{Circuit, CircuitBuilder, GateKind, NodeId};

/// Comparator positions of Batcher's odd-even merge sort for `n` lanes: the
/// power-of-two network with out-of-range comparators dropped, which sorts
/// any input length.
fn batcher_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    let mut p = 1;
    while p < n {
        let mut k = p;
        while k >= 1 {
            let mut j = k % p;
            while j + k <= n - 1 {
                let reach = (k - 1).min(n - 1 - j - k);
                for i in 0..=reach {
                    if (i + j) / (2 * p) == (i + j + k) / (2 * p) {
                        pairs.push((i + j, i + j + k));
                    }
                }
                j += 2 * k;
            }
            k /= 2;
        }
        p *= 2;
    }
    pairs
}

/// Circuit with `width` inputs whose outputs are the inputs sorted in
/// descending order, built from MAX/MIN comparator pairs. Width 1 is the
/// identity and emits no gates.
pub fn sorting_network(width: usize) -> Circuit {
    assert!(width >= 1, "sorting network needs at least one lane");
    let mut b = CircuitBuilder::new();
    let mut lane: Vec<NodeId> = (0..width).map(|_| b.input()).collect();
    for (lo, hi) in batcher_pairs(width) {
        let top = b.binary(GateKind::Max, lane[lo], lane[hi]);
        let bot = b.binary(GateKind::Min, lane[lo], lane[hi]);
        lane[lo] = top;
        lane[hi] = bot;
    }
    b.finish(lane)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat, Rat};

    fn sort_with(c: &Circuit, xs: &[Rat]) -> Vec<Rat> {
        c.eval_outputs(xs).unwrap()
    }

    #[test]
    fn width_one_is_the_identity() {
        let c = sorting_network(1);
        assert!(c.gates.is_empty());
        assert_eq!(sort_with(&c, &[rat(2, 7)]), vec![rat(2, 7)]);
    }

    #[test]
    fn width_two_swaps_into_descending_order() {
        let c = sorting_network(2);
        assert_eq!(
            sort_with(&c, &[rat(1, 3), rat(2, 3)]),
            vec![rat(2, 3), rat(1, 3)]
        );
        assert_eq!(
            sort_with(&c, &[rat(2, 3), rat(1, 3)]),
            vec![rat(2, 3), rat(1, 3)]
        );
    }

    #[test]
    fn width_four_sorts_all_permutations() {
        let c = sorting_network(4);
        // Batcher's width-4 network has 5 comparators, 2 gates each.
        assert_eq!(c.gates.len(), 10);
        let vals = [rat(1, 8), rat(2, 8), rat(3, 8), rat(4, 8)];
        let want = vec![rat(4, 8), rat(3, 8), rat(2, 8), rat(1, 8)];
        let mut perm = [0usize, 1, 2, 3];
        permute(&mut perm, 0, &mut |p| {
            let xs: Vec<Rat> = p.iter().map(|&i| vals[i].clone()).collect();
            assert_eq!(sort_with(&c, &xs), want, "input order {p:?}");
        });
    }

    fn permute(p: &mut [usize], k: usize, f: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn zero_one_principle_up_to_width_eight() {
        // A comparator network sorts everything iff it sorts all 0/1 vectors.
        for width in 1..=8usize {
            let c = sorting_network(width);
            assert!(c
                .gates
                .iter()
                .all(|g| matches!(g.kind, GateKind::Max | GateKind::Min)));
            for mask in 0..(1u32 << width) {
                let xs: Vec<Rat> = (0..width)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            Rat::one()
                        } else {
                            Rat::zero()
                        }
                    })
                    .collect();
                let out = sort_with(&c, &xs);
                let ones = xs.iter().filter(|x| !x.is_zero()).count();
                for (i, v) in out.iter().enumerate() {
                    let want = if i < ones { Rat::one() } else { Rat::zero() };
                    assert_eq!(*v, want, "width {width}, mask {mask:b}");
                }
            }
        }
    }
}
