//! Deterministic summation: compensated accumulation inside fixed blocks of
//! 4096 indices, merged through a binary-counter forest whose tree shape
//! depends only on block indices. Any thread partitioning over whole blocks
//! reproduces the same floating-point result bit for bit.

use num_complex::Complex64;

pub const BLOCK_LEN: u64 = 4096;

/// Neumaier-compensated accumulator, componentwise over re/im.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sre: f64,
    sim: f64,
    cre: f64,
    cim: f64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, v: Complex64) {
        self.sre = neumaier(self.sre, v.re, &mut self.cre);
        self.sim = neumaier(self.sim, v.im, &mut self.cim);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.sre + self.cre, self.sim + self.cim)
    }
}

#[inline]
fn neumaier(s: f64, v: f64, c: &mut f64) -> f64 {
    let t = s + v;
    *c += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
    t
}

/// Binary-counter forest over a stream of block sums. Slot k holds the sum
/// of an aligned run of 2^k blocks; pushing block i performs exactly the
/// carries of incrementing a binary counter, so the addition tree is a
/// function of the block index alone.
#[derive(Debug, Clone, Default)]
pub struct Forest {
    slots: Vec<Option<Complex64>>,
}

impl Forest {
    pub fn new() -> Forest {
        Forest::default()
    }

    pub fn push(&mut self, mut v: Complex64) {
        let mut k = 0;
        loop {
            if k == self.slots.len() {
                self.slots.push(Some(v));
                return;
            }
            match self.slots[k].take() {
                None => {
                    self.slots[k] = Some(v);
                    return;
                }
                Some(prev) => {
                    v = prev + v;
                    k += 1;
                }
            }
        }
    }

    /// Current total, folding occupied slots from low to high.
    pub fn snapshot(&self) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for s in self.slots.iter().flatten() {
            acc += *s;
        }
        acc
    }
}

/// The aligned block grid over [lo, hi): subranges cut at multiples of
/// BLOCK_LEN in absolute index space.
pub fn grid_blocks(lo: u64, hi: u64) -> impl Iterator<Item = (u64, u64)> {
    let first_block = lo / BLOCK_LEN;
    let last_block = hi.div_ceil(BLOCK_LEN);
    (first_block..last_block).map(move |k| {
        let b_lo = (k * BLOCK_LEN).max(lo);
        let b_hi = ((k + 1) * BLOCK_LEN).min(hi);
        (b_lo, b_hi)
    })
}

/// Compensated sum of f(m) over [lo, hi) in index order.
pub fn block_sum<F: Fn(u64) -> Complex64>(lo: u64, hi: u64, f: &F) -> Complex64 {
    let mut k = Kahan::default();
    for m in lo..hi {
        k.add(f(m));
    }
    k.value()
}

/// Per-block sums over [lo, hi), parallel over contiguous runs of whole
/// blocks. The output vector is indexed by grid position and its contents
/// are independent of the thread count.
pub fn parallel_block_sums<F>(lo: u64, hi: u64, threads: usize, f: &F) -> Vec<Complex64>
where
    F: Fn(u64) -> Complex64 + Sync,
{
    let blocks: Vec<(u64, u64)> = grid_blocks(lo, hi).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); blocks.len()];
    let threads = threads.clamp(1, blocks.len().max(1));
    if threads <= 1 {
        for (slot, &(b_lo, b_hi)) in out.iter_mut().zip(&blocks) {
            *slot = block_sum(b_lo, b_hi, f);
        }
        return out;
    }
    let per = blocks.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let mut rest: &mut [Complex64] = &mut out;
        let mut offset = 0usize;
        while !rest.is_empty() {
            let take = per.min(rest.len());
            let (chunk, tail) = rest.split_at_mut(take);
            let my_blocks = &blocks[offset..offset + take];
            scope.spawn(move || {
                for (slot, &(b_lo, b_hi)) in chunk.iter_mut().zip(my_blocks) {
                    *slot = block_sum(b_lo, b_hi, f);
                }
            });
            rest = tail;
            offset += take;
        }
    });
    out
}

/// Sum with intermediate totals at the given absolute end indices.
/// `cuts` must be increasing and lie in [lo, hi]. Returns one total per cut:
/// the deterministic tree sum of f over [lo, cut).
pub fn cut_sums<F>(lo: u64, threads: usize, cuts: &[u64], f: &F) -> Vec<Complex64>
where
    F: Fn(u64) -> Complex64 + Sync,
{
    debug_assert!(cuts.windows(2).all(|w| w[0] < w[1]));
    let hi = *cuts.last().expect("at least one cut");
    debug_assert!(lo <= hi);
    let sums = parallel_block_sums(lo, hi, threads, f);
    let mut forest = Forest::new();
    let mut out = Vec::with_capacity(cuts.len());
    let mut next_cut = 0usize;
    for (i, (b_lo, b_hi)) in grid_blocks(lo, hi).enumerate() {
        // emit any cut inside this block from a partial rescan of it
        while next_cut < cuts.len() && cuts[next_cut] < b_hi {
            let cut = cuts[next_cut];
            let mut partial = forest.clone();
            if cut > b_lo {
                partial.push(block_sum(b_lo, cut, f));
            }
            out.push(partial.snapshot());
            next_cut += 1;
        }
        forest.push(sums[i]);
        while next_cut < cuts.len() && cuts[next_cut] == b_hi {
            out.push(forest.snapshot());
            next_cut += 1;
        }
    }
    // cuts equal to lo (empty range) or trailing duplicates of hi
    while next_cut < cuts.len() {
        out.push(forest.snapshot());
        next_cut += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic_phase(m: u64) -> Complex64 {
        let x = (m as f64).sqrt() * 0.61803398875;
        let (s, c) = (std::f64::consts::TAU * (x - x.floor())).sin_cos();
        Complex64::new(c, s)
    }

    #[test]
    fn thread_counts_agree_bitwise() {
        let lo = 7u64;
        let hi = 100_003u64;
        let base = parallel_block_sums(lo, hi, 1, &harmonic_phase);
        for t in [2, 3, 7, 16] {
            let other = parallel_block_sums(lo, hi, t, &harmonic_phase);
            assert_eq!(base.len(), other.len());
            for (a, b) in base.iter().zip(&other) {
                assert_eq!(a.re.to_bits(), b.re.to_bits(), "threads={t}");
                assert_eq!(a.im.to_bits(), b.im.to_bits(), "threads={t}");
            }
        }
    }

    #[test]
    fn cut_sums_match_fresh_runs() {
        let lo = 1000u64;
        let cuts = [1024, 5000, 65536, 80_000];
        let multi = cut_sums(lo, 3, &cuts, &harmonic_phase);
        for (i, &cut) in cuts.iter().enumerate() {
            let fresh = cut_sums(lo, 1, &[cut], &harmonic_phase);
            assert_eq!(multi[i].re.to_bits(), fresh[0].re.to_bits(), "cut {cut}");
            assert_eq!(multi[i].im.to_bits(), fresh[0].im.to_bits(), "cut {cut}");
        }
    }

    #[test]
    fn compensated_sum_is_accurate() {
        // A 1e16 carrier swallows every +1.0 in a running f64 sum (each one
        // sits below half an ulp), and the closing -1e16 exposes the loss:
        // a naive sum lands at 0. The compensation keeps all 4094 of them,
        // and within one block the result is exact.
        let f = |m: u64| {
            if m == 0 {
                Complex64::new(1e16, 0.0)
            } else if m == 4095 {
                Complex64::new(-1e16, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        };
        let total = cut_sums(0, 1, &[4096], &f)[0];
        assert_eq!(total.re, 4094.0);
    }

    #[test]
    fn forest_matches_plain_sum_of_exact_values() {
        let mut forest = Forest::new();
        for i in 0..1000u64 {
            forest.push(Complex64::new(i as f64, 0.0));
        }
        assert_eq!(forest.snapshot().re, 499_500.0);
    }
}
