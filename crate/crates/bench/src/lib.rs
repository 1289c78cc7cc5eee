//! Deterministic fixtures shared by the benchmarks under `benches/`.

use lanehrl_core::sim::STATE_DIM;
use lanehrl_core::value::Transition;

/// Minibatch size used by the training-step benchmarks.
pub const BATCH: usize = 64;

/// A bounded, deterministic feature vector; `i` selects the variant.
pub fn state(i: usize) -> [f64; STATE_DIM] {
    let mut s = [0.0; STATE_DIM];
    for (j, x) in s.iter_mut().enumerate() {
        *x = ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5;
    }
    s
}

/// `BATCH` chained transitions with actions from `action`; every 17th one is terminal.
pub fn batch<A: Copy>(action: impl Fn(usize) -> A) -> Vec<Transition<A>> {
    (0..BATCH)
        .map(|i| Transition {
            s: state(i),
            a: action(i),
            r: -(i as f64) * 0.01,
            s_next: state(i + 1),
            terminal: i % 17 == 0,
        })
        .collect()
}
