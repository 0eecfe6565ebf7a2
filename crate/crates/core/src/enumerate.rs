use std::ops::ControlFlow;

/// Visits every vector in `{0..card-1}^n` in lexicographic order (last
/// position changes fastest). Stops early when `visit` breaks.
pub(crate) fn for_each_vector<B>(
    card: usize,
    n: usize,
    mut visit: impl FnMut(&[usize]) -> ControlFlow<B>,
) -> Option<B> {
    if card == 0 {
        return None;
    }
    let mut v = vec![0usize; n];
    loop {
        if let ControlFlow::Break(b) = visit(&v) {
            return Some(b);
        }
        let mut i = n;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            v[i] += 1;
            if v[i] < card {
                break;
            }
            v[i] = 0;
        }
    }
}

/// `log2(card^n)`, used for search-space caps.
pub(crate) fn space_bits(card: usize, n: usize) -> f64 {
    n as f64 * (card as f64).log2()
}
