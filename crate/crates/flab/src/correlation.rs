//! Empirical multiple correlations: means over m of products
//! source(m + r·n_j)^(k_j), with k = -1 meaning complex conjugation.
//!
//! All entry points run on one batch engine. Queries become sorted symbol
//! sequences and share left-prefix products through a trie, so a batch of
//! thousands of queries costs one source pass plus one complex multiply per
//! distinct prefix per index. Work is split at superblock boundaries (fixed
//! runs of whole 4096-blocks on the absolute grid) and every accumulation
//! shape is a function of absolute indices alone, which makes results
//! bitwise independent of the thread count and identical between batch and
//! single-query calls.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::averaging::{AveragingScheme, ComplexSeries, Sequence, SeriesPoint};
use crate::error::{Error, Result};
use crate::sum::{grid_blocks, Kahan, BLOCK_LEN};

pub const MAX_FACTORS: usize = 8;
pub const MAX_SHIFT: i64 = 64;
pub const MAX_DILATION: u64 = 1_000_000;

const SUPER_LEN: u64 = 32 * BLOCK_LEN;

fn default_dilation() -> u64 {
    1
}

/// Shift pattern n_1..n_s with signs k_j in {-1,+1} and a common dilation r;
/// the evaluated offsets are r·n_j.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationQuery {
    pub shifts: Vec<i64>,
    pub signs: Vec<i32>,
    #[serde(default = "default_dilation")]
    pub r: u64,
}

impl CorrelationQuery {
    pub fn new(shifts: Vec<i64>, signs: Vec<i32>, r: u64) -> Result<CorrelationQuery> {
        let q = CorrelationQuery { shifts, signs, r };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.shifts.len();
        if s == 0 || s > MAX_FACTORS {
            return Err(Error::Query(format!(
                "factor count {s} outside 1..={MAX_FACTORS}"
            )));
        }
        if self.signs.len() != s {
            return Err(Error::Query(format!(
                "{} signs for {s} shifts",
                self.signs.len()
            )));
        }
        if let Some(n) = self.shifts.iter().find(|n| n.unsigned_abs() > MAX_SHIFT as u64) {
            return Err(Error::Query(format!("shift {n} outside |n| <= {MAX_SHIFT}")));
        }
        if let Some(k) = self.signs.iter().find(|k| k.abs() != 1) {
            return Err(Error::Query(format!("sign {k} not in {{-1,+1}}")));
        }
        if self.r == 0 || self.r > MAX_DILATION {
            return Err(Error::Query(format!(
                "dilation {} outside 1..={MAX_DILATION}",
                self.r
            )));
        }
        Ok(())
    }

    pub fn s(&self) -> usize {
        self.shifts.len()
    }

    pub fn with_dilation(&self, r: u64) -> Result<CorrelationQuery> {
        CorrelationQuery::new(self.shifts.clone(), self.signs.clone(), r)
    }

    pub fn conjugated(&self) -> CorrelationQuery {
        CorrelationQuery {
            shifts: self.shifts.clone(),
            signs: self.signs.iter().map(|k| -k).collect(),
            r: self.r,
        }
    }

    /// The symbol sequence the engine evaluates: (offset, conjugate) pairs
    /// in the canonical ascending order.
    fn symbols(&self, src: u8) -> Vec<Symbol> {
        let mut syms: Vec<Symbol> = self
            .shifts
            .iter()
            .zip(&self.signs)
            .map(|(&n, &k)| Symbol { src, offset: self.r as i64 * n, conj: k < 0 })
            .collect();
        syms.sort();
        syms
    }

    /// Short one-field text form for CSV and JSON summaries (no commas).
    pub fn label(&self) -> String {
        let shifts: Vec<String> = self.shifts.iter().map(|n| n.to_string()).collect();
        let signs: Vec<String> = self
            .signs
            .iter()
            .map(|k| if *k > 0 { "+1".into() } else { "-1".into() })
            .collect();
        format!(
            "n=[{}] k=[{}] r={}",
            shifts.join(" "),
            signs.join(" "),
            self.r
        )
    }
}

/// One factor of an engine query: which source, at which absolute offset,
/// conjugated or not. Ordering is the canonical evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Symbol {
    offset: i64,
    src: u8,
    conj: bool,
}

/// A query lowered to engine form: canonical symbols, first averaged index,
/// and the absolute end indices at which sums are reported.
struct EngineQuery {
    symbols: Vec<Symbol>,
    lo: u64,
    cuts: Vec<u64>,
}

fn lower(
    queries: &[(Vec<Symbol>, u64)], // (canonical symbols, max source start)
    checkpoints: &[u64],
) -> Vec<EngineQuery> {
    queries
        .iter()
        .map(|(symbols, start)| {
            let min_off = symbols.iter().map(|s| s.offset).min().unwrap_or(0);
            let lo = start + min_off.min(0).unsigned_abs();
            let cuts = checkpoints.iter().map(|n| lo + n).collect();
            EngineQuery { symbols: symbols.clone(), lo, cuts }
        })
        .collect()
}

/// Mean over m in [lo, lo+N) of the query product, at every checkpoint N.
pub fn empirical_correlation(
    source: &dyn Sequence,
    q: &CorrelationQuery,
    scheme: &AveragingScheme,
    threads: usize,
) -> Result<ComplexSeries> {
    q.validate()?;
    let cps = correlation_checkpoints(scheme)?;
    let eq = lower(&[(q.symbols(0), source.start())], &cps);
    let sums = run_engine(&[source], &eq, threads);
    Ok(series_from(eq[0].lo, &cps, &sums[0]))
}

/// Joint correlation of several sources, one query per source, sharing one
/// index variable m.
pub fn joint_correlation(
    sources: &[&dyn Sequence],
    queries: &[CorrelationQuery],
    scheme: &AveragingScheme,
    threads: usize,
) -> Result<ComplexSeries> {
    if sources.is_empty() || sources.len() > 4 {
        return Err(Error::Query(format!(
            "{} sources outside 1..=4",
            sources.len()
        )));
    }
    if sources.len() != queries.len() {
        return Err(Error::Query(format!(
            "{} queries for {} sources",
            queries.len(),
            sources.len()
        )));
    }
    let mut symbols = Vec::new();
    let mut start = 2u64;
    for (i, (src, q)) in sources.iter().zip(queries).enumerate() {
        q.validate()?;
        symbols.extend(q.symbols(i as u8));
        start = start.max(src.start());
    }
    symbols.sort();
    let cps = correlation_checkpoints(scheme)?;
    let eq = lower(&[(symbols, start)], &cps);
    let sums = run_engine(sources, &eq, threads);
    Ok(series_from(eq[0].lo, &cps, &sums[0]))
}

/// Batch evaluation of many queries against one source in a single pass.
/// Returns the final-checkpoint value per query, in input order; values are
/// bitwise identical to individual empirical_correlation calls.
pub fn correlation_table(
    source: &dyn Sequence,
    queries: &[CorrelationQuery],
    scheme: &AveragingScheme,
    threads: usize,
) -> Result<Vec<(CorrelationQuery, Complex64)>> {
    let cps = correlation_checkpoints(scheme)?;
    let n_final = *cps.last().expect("validated nonempty");
    let lowered: Vec<(Vec<Symbol>, u64)> = queries
        .iter()
        .map(|q| q.validate().map(|()| (q.symbols(0), source.start())))
        .collect::<Result<_>>()?;
    let eq = lower(&lowered, &[n_final]);
    let sums = run_engine(&[source], &eq, threads);
    Ok(queries
        .iter()
        .cloned()
        .zip(sums.iter().map(|s| s[0] / n_final as f64))
        .collect())
}

fn correlation_checkpoints(scheme: &AveragingScheme) -> Result<Vec<u64>> {
    if matches!(scheme, AveragingScheme::Weighted { .. }) {
        return Err(Error::Query(
            "correlations are plain Cesaro means; weighted schemes are not defined here".into(),
        ));
    }
    scheme.checkpoints()
}

fn series_from(lo: u64, cps: &[u64], sums: &[Complex64]) -> ComplexSeries {
    let points = cps
        .iter()
        .zip(sums)
        .map(|(&n, &s)| SeriesPoint { n, value: s / n as f64, samples: n })
        .collect();
    ComplexSeries { n_start: lo, points }
}

/// All canonical queries with up to max_s factors, shifts in
/// [-max_shift, max_shift], both signs, dilation 1. Canonical means the
/// symbol sequence is sorted, so each multiset of (shift, sign) factors
/// appears exactly once. With dedup_conjugates, one representative per
/// {q, conj q} pair is kept; conjugating a query conjugates its value
/// bitwise, so nothing is lost by evaluating representatives.
pub fn enumerate_queries(max_s: usize, max_shift: i64, dedup_conjugates: bool) -> Vec<CorrelationQuery> {
    // symbol ids in canonical order: (shift ascending, +1 before -1)
    let id_to_sym = |id: usize| -> (i64, i32) {
        let shift = (id / 2) as i64 - max_shift;
        let sign = if id % 2 == 0 { 1 } else { -1 };
        (shift, sign)
    };
    let n_ids = 2 * (2 * max_shift as usize + 1);
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    // depth-first over nondecreasing id sequences of length 1..=max_s
    fn rec(
        stack: &mut Vec<usize>,
        first: usize,
        n_ids: usize,
        max_s: usize,
        dedup: bool,
        id_to_sym: &dyn Fn(usize) -> (i64, i32),
        out: &mut Vec<CorrelationQuery>,
    ) {
        if !stack.is_empty() {
            let (shifts, signs): (Vec<i64>, Vec<i32>) =
                stack.iter().map(|&id| id_to_sym(id)).unzip();
            let keep = if dedup {
                // conjugate class representative: the lexicographically
                // smaller of the sorted symbol id sequences
                let mut conj: Vec<usize> = stack.iter().map(|&id| id ^ 1).collect();
                conj.sort_unstable();
                stack.as_slice() <= conj.as_slice()
            } else {
                true
            };
            if keep {
                out.push(CorrelationQuery { shifts, signs, r: 1 });
            }
        }
        if stack.len() == max_s {
            return;
        }
        for id in first..n_ids {
            stack.push(id);
            rec(stack, id, n_ids, max_s, dedup, id_to_sym, out);
            stack.pop();
        }
    }
    rec(&mut stack, 0, n_ids, max_s, dedup_conjugates, &id_to_sym, &mut out);
    out
}

// ---- engine ----

struct Trie {
    children: Vec<Vec<u32>>,
    sym: Vec<Symbol>,
    queries_at: Vec<Vec<u32>>,
    depth: Vec<u8>,
}

impl Trie {
    fn build(queries: &[EngineQuery]) -> Trie {
        let mut t = Trie {
            children: vec![Vec::new()],
            sym: vec![Symbol { offset: 0, src: 0, conj: false }],
            queries_at: vec![Vec::new()],
            depth: vec![0],
        };
        for (qi, q) in queries.iter().enumerate() {
            let mut cur = 0usize;
            for &s in &q.symbols {
                let pos = t.children[cur]
                    .binary_search_by(|&c| t.sym[c as usize].cmp(&s));
                cur = match pos {
                    Ok(i) => t.children[cur][i] as usize,
                    Err(i) => {
                        let node = t.sym.len() as u32;
                        t.sym.push(s);
                        t.children.push(Vec::new());
                        t.queries_at.push(Vec::new());
                        t.depth.push(t.depth[cur] + 1);
                        t.children[cur].insert(i, node);
                        node as usize
                    }
                };
            }
            t.queries_at[cur].push(qi as u32);
        }
        t
    }

    fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0) as usize
    }
}

/// Per-thread evaluation scratch: source windows, one product buffer per
/// trie depth, and per-query compensated accumulators.
struct Evaluator<'a> {
    trie: &'a Trie,
    sources: &'a [&'a dyn Sequence],
    starts: Vec<u64>,
    min_off: Vec<i64>,
    spans: Vec<usize>,
    wbufs: Vec<Vec<Complex64>>,
    prod: Vec<Vec<Complex64>>,
    qacc: Vec<Kahan>,
}

impl<'a> Evaluator<'a> {
    fn new(trie: &'a Trie, sources: &'a [&'a dyn Sequence], n_queries: usize) -> Evaluator<'a> {
        let mut min_off = vec![0i64; sources.len()];
        let mut max_off = vec![0i64; sources.len()];
        for s in &trie.sym[1..] {
            let i = s.src as usize;
            min_off[i] = min_off[i].min(s.offset);
            max_off[i] = max_off[i].max(s.offset);
        }
        let spans: Vec<usize> = min_off
            .iter()
            .zip(&max_off)
            .map(|(lo, hi)| (hi - lo) as usize)
            .collect();
        Evaluator {
            trie,
            sources,
            starts: sources.iter().map(|s| s.start()).collect(),
            min_off,
            spans,
            wbufs: vec![Vec::new(); sources.len()],
            prod: vec![Vec::with_capacity(BLOCK_LEN as usize); trie.max_depth()],
            qacc: vec![Kahan::default(); n_queries],
        }
    }

    /// Per-query sums over one superblock range [r_lo, r_hi), each query
    /// restricted to its [clip.0, clip.1) window. Fixed reduction shape:
    /// per block, eight compensated lanes keyed by m mod 8, folded in lane
    /// order; block values folded in block order.
    fn superblock_values(
        &mut self,
        r_lo: u64,
        r_hi: u64,
        clips: &[(u64, u64)],
        out: &mut [Complex64],
    ) {
        for acc in &mut self.qacc {
            *acc = Kahan::default();
        }
        let blocks: Vec<(u64, u64)> = grid_blocks(r_lo, r_hi).collect();
        for &(b_lo, b_hi) in &blocks {
            self.fill_windows(b_lo, b_hi);
            self.walk(0, b_lo, (b_hi - b_lo) as usize, clips);
        }
        for (o, acc) in out.iter_mut().zip(&self.qacc) {
            *o = acc.value();
        }
    }

    /// Source values for all indices a block's products can touch. Indices
    /// below a source's start belong only to products that the per-query
    /// clips later discard; they are filled with 1 instead of being
    /// evaluated, so sources never see indices outside their domain.
    fn fill_windows(&mut self, b_lo: u64, b_hi: u64) {
        let len = (b_hi - b_lo) as usize;
        for (i, buf) in self.wbufs.iter_mut().enumerate() {
            buf.clear();
            let base = b_lo as i64 + self.min_off[i];
            for j in 0..len + self.spans[i] {
                let n = base + j as i64;
                buf.push(if n >= self.starts[i] as i64 {
                    self.sources[i].value(n as u64)
                } else {
                    Complex64::new(1.0, 0.0)
                });
            }
        }
    }

    fn walk(&mut self, node: usize, b_lo: u64, len: usize, clips: &[(u64, u64)]) {
        let trie = self.trie;
        for &child in &trie.children[node] {
            let child = child as usize;
            let depth = trie.depth[child] as usize - 1;
            let s = trie.sym[child];
            {
                let (parents, rest) = self.prod.split_at_mut(depth);
                let dst = &mut rest[0];
                dst.clear();
                let w_start = (s.offset - self.min_off[s.src as usize]) as usize;
                let w = &self.wbufs[s.src as usize][w_start..w_start + len];
                match (depth, s.conj) {
                    (0, false) => dst.extend_from_slice(w),
                    (0, true) => dst.extend(w.iter().map(|z| z.conj())),
                    (_, false) => {
                        let p = &parents[depth - 1];
                        dst.extend((0..len).map(|i| p[i] * w[i]));
                    }
                    (_, true) => {
                        let p = &parents[depth - 1];
                        dst.extend((0..len).map(|i| p[i] * w[i].conj()));
                    }
                }
            }
            for &q in &trie.queries_at[child] {
                let (c_lo, c_hi) = clips[q as usize];
                let s0 = c_lo.max(b_lo);
                let e0 = c_hi.min(b_lo + len as u64);
                if s0 < e0 {
                    let v = lane_sum(&self.prod[depth], b_lo, s0, e0);
                    self.qacc[q as usize].add(v);
                }
            }
            if !trie.children[child].is_empty() {
                self.walk(child, b_lo, len, clips);
            }
        }
    }
}

/// Compensated sum of prod over absolute indices [s, e), split into eight
/// lanes by m mod 8 so the compensation chains overlap, then folded in
/// lane order. The lane of an index never depends on the slice bounds.
fn lane_sum(prod: &[Complex64], base: u64, s: u64, e: u64) -> Complex64 {
    let mut lanes = [Kahan::default(); 8];
    for m in s..e {
        lanes[(m & 7) as usize].add(prod[(m - base) as usize]);
    }
    let mut total = Complex64::new(0.0, 0.0);
    for l in &lanes {
        total += l.value();
    }
    total
}

/// Shared-pass engine: per-query sums at each cut. Parallel over
/// superblocks; all reduction shapes depend only on absolute indices, so
/// output is bitwise independent of `threads`.
fn run_engine(
    sources: &[&dyn Sequence],
    queries: &[EngineQuery],
    threads: usize,
) -> Vec<Vec<Complex64>> {
    let nq = queries.len();
    if nq == 0 {
        return Vec::new();
    }
    let trie = Trie::build(queries);
    let glo = queries.iter().map(|q| q.lo).min().unwrap();
    let ghi = queries.iter().map(|q| *q.cuts.last().unwrap()).max().unwrap();
    let clips: Vec<(u64, u64)> = queries
        .iter()
        .map(|q| (q.lo, *q.cuts.last().unwrap()))
        .collect();
    let s0 = glo / SUPER_LEN;
    let s1 = ghi.div_ceil(SUPER_LEN);
    let nsb = (s1 - s0) as usize;
    let sb_range = |k: usize| {
        let abs = s0 + k as u64;
        ((abs * SUPER_LEN).max(glo), ((abs + 1) * SUPER_LEN).min(ghi))
    };

    // per-(superblock, query) values, workers owning whole superblocks
    let mut values = vec![Complex64::new(0.0, 0.0); nsb * nq];
    let threads = threads.clamp(1, nsb.max(1));
    if threads <= 1 {
        let mut ev = Evaluator::new(&trie, sources, nq);
        for k in 0..nsb {
            let (r_lo, r_hi) = sb_range(k);
            ev.superblock_values(r_lo, r_hi, &clips, &mut values[k * nq..(k + 1) * nq]);
        }
    } else {
        let per = nsb.div_ceil(threads);
        std::thread::scope(|scope| {
            let mut rest: &mut [Complex64] = &mut values;
            let mut k0 = 0usize;
            while !rest.is_empty() {
                let take = per.min(rest.len() / nq);
                let (chunk, tail) = rest.split_at_mut(take * nq);
                let trie = &trie;
                let clips = &clips;
                scope.spawn(move || {
                    let mut ev = Evaluator::new(trie, sources, nq);
                    for (i, out) in chunk.chunks_mut(nq).enumerate() {
                        let (r_lo, r_hi) = sb_range(k0 + i);
                        ev.superblock_values(r_lo, r_hi, clips, out);
                    }
                });
                rest = tail;
                k0 += take;
            }
        });
    }

    // serial combine: fold superblock values per query in order, emitting
    // cut totals; cuts inside a superblock rescan its prefix with the same
    // reduction shape (grouped by cut position so each prefix runs once)
    let mut ev = Evaluator::new(&trie, sources, nq);
    let mut totals = vec![Kahan::default(); nq];
    let mut next_cut = vec![0usize; nq];
    let mut out: Vec<Vec<Complex64>> = queries
        .iter()
        .map(|q| Vec::with_capacity(q.cuts.len()))
        .collect();
    let mut partial = vec![Complex64::new(0.0, 0.0); nq];
    for k in 0..nsb {
        let (r_lo, r_hi) = sb_range(k);
        let mut groups: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for (qi, q) in queries.iter().enumerate() {
            while next_cut[qi] < q.cuts.len() && q.cuts[next_cut[qi]] <= r_hi {
                let c = q.cuts[next_cut[qi]];
                if c <= r_lo {
                    out[qi].push(totals[qi].value());
                } else {
                    groups.entry(c).or_default().push(qi as u32);
                }
                next_cut[qi] += 1;
            }
        }
        for (&c, members) in &groups {
            let cut_clips: Vec<(u64, u64)> = clips
                .iter()
                .map(|&(lo, hi)| (lo, hi.min(c)))
                .collect();
            ev.superblock_values(r_lo, r_hi, &cut_clips, &mut partial);
            for &qi in members {
                let mut t = totals[qi as usize];
                t.add(partial[qi as usize]);
                out[qi as usize].push(t.value());
            }
        }
        for qi in 0..nq {
            totals[qi].add(values[k * nq + qi]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{FnSeq, PhaseSeq};
    use crate::exact::Kappa;
    use crate::parse::parse_expr;

    fn phase_source(expr: &str) -> PhaseSeq {
        PhaseSeq::new(&parse_expr(expr).unwrap())
    }

    #[test]
    fn query_validation() {
        assert!(CorrelationQuery::new(vec![], vec![], 1).is_err());
        assert!(CorrelationQuery::new(vec![0; 9], vec![1; 9], 1).is_err());
        assert!(CorrelationQuery::new(vec![65], vec![1], 1).is_err());
        assert!(CorrelationQuery::new(vec![1], vec![2], 1).is_err());
        assert!(CorrelationQuery::new(vec![1], vec![1], 0).is_err());
        assert!(CorrelationQuery::new(vec![1, 0], vec![1, -1], 3).is_ok());
    }

    #[test]
    fn identity_query_is_one() {
        let src = phase_source("t^(3/2)");
        let q = CorrelationQuery::new(vec![0, 0], vec![1, -1], 1).unwrap();
        let s = empirical_correlation(&src, &q, &AveragingScheme::full(10_000), 1).unwrap();
        for p in &s.points {
            assert!((p.value - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn second_difference_of_quadratic_is_constant_phase() {
        let src = phase_source("sqrt2*t^2");
        let q = CorrelationQuery::new(vec![2, 1, 1, 0], vec![1, -1, -1, 1], 1).unwrap();
        let s = empirical_correlation(&src, &q, &AveragingScheme::full(20_000), 1).unwrap();
        let two_sqrt2 = Kappa::Sqrt2.as_dd().mul_f64(2.0);
        let frac = two_sqrt2.frac().to_f64();
        let (im, re) = (std::f64::consts::TAU * frac).sin_cos();
        let want = Complex64::new(re, im);
        for p in &s.points {
            assert!((p.value - want).norm() < 1e-9, "at N={}: {}", p.n, p.value);
        }
    }

    #[test]
    fn first_difference_of_three_halves_decays() {
        let src = phase_source("t^(3/2)");
        let q = CorrelationQuery::new(vec![1, 0], vec![1, -1], 1).unwrap();
        let s = empirical_correlation(&src, &q, &AveragingScheme::single(100_000), 1).unwrap();
        assert!(s.final_value().norm() <= 0.05, "{}", s.final_value().norm());
    }

    #[test]
    fn rotation_with_dilation_gives_exact_phase() {
        let src = phase_source("phi*t");
        let q = CorrelationQuery::new(vec![1, 0], vec![1, -1], 3).unwrap();
        let s = empirical_correlation(&src, &q, &AveragingScheme::single(10_000), 1).unwrap();
        let three_phi = Kappa::Phi.as_dd().mul_f64(3.0);
        let frac = three_phi.frac().to_f64();
        let (im, re) = (std::f64::consts::TAU * frac).sin_cos();
        assert!((s.final_value() - Complex64::new(re, im)).norm() < 1e-12);
    }

    #[test]
    fn conjugating_the_query_conjugates_the_value_bitwise() {
        let src = phase_source("t^(3/2)");
        let q = CorrelationQuery::new(vec![2, 1, 0], vec![1, -1, -1], 1).unwrap();
        let a = empirical_correlation(&src, &q, &AveragingScheme::single(50_000), 1).unwrap();
        let b = empirical_correlation(&src, &q.conjugated(), &AveragingScheme::single(50_000), 1)
            .unwrap();
        let (va, vb) = (a.final_value(), b.final_value());
        assert_eq!(va.re.to_bits(), vb.re.to_bits());
        assert_eq!(va.im.to_bits(), (-vb.im).to_bits());
    }

    #[test]
    fn constant_shift_moves_the_value_by_boundary_terms_only() {
        let src = phase_source("t^(3/2)");
        let n = 1_000_000u64;
        let q1 = CorrelationQuery::new(vec![1, 0], vec![1, -1], 1).unwrap();
        let q2 = CorrelationQuery::new(vec![2, 1], vec![1, -1], 1).unwrap();
        let v1 = empirical_correlation(&src, &q1, &AveragingScheme::single(n), 1).unwrap();
        let v2 = empirical_correlation(&src, &q2, &AveragingScheme::single(n), 1).unwrap();
        assert!((v1.final_value() - v2.final_value()).norm() <= 1e-4);
    }

    #[test]
    fn hermitian_pair_conjugates_up_to_boundary() {
        let src = phase_source("t^(3/2)");
        let n = 1_000_000u64;
        let h = 3i64;
        let qa = CorrelationQuery::new(vec![h, 0], vec![1, -1], 1).unwrap();
        let qb = CorrelationQuery::new(vec![0, h], vec![1, -1], 1).unwrap();
        let va = empirical_correlation(&src, &qa, &AveragingScheme::single(n), 1).unwrap();
        let vb = empirical_correlation(&src, &qb, &AveragingScheme::single(n), 1).unwrap();
        let bound = 2.0 * h as f64 / n as f64 + 1e-9;
        assert!((va.final_value().conj() - vb.final_value()).norm() <= bound);
    }

    #[test]
    fn table_matches_individual_calls_bitwise() {
        let src = phase_source("t^(3/2)");
        let queries = enumerate_queries(2, 3, false);
        assert_eq!(queries.len(), 14 + 105);
        let scheme = AveragingScheme::single(20_000);
        let table = correlation_table(&src, &queries, &scheme, 2).unwrap();
        for (q, v) in &table {
            let single = empirical_correlation(&src, q, &scheme, 1).unwrap();
            let sv = single.final_value();
            assert_eq!(v.re.to_bits(), sv.re.to_bits(), "{}", q.label());
            assert_eq!(v.im.to_bits(), sv.im.to_bits(), "{}", q.label());
        }
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let src = phase_source("t^(3/2)");
        let queries = enumerate_queries(2, 2, false);
        let scheme = AveragingScheme::full(300_000);
        let t1 = correlation_table(&src, &queries, &scheme, 1).unwrap();
        for threads in [2, 5, 8] {
            let tn = correlation_table(&src, &queries, &scheme, threads).unwrap();
            for ((_, a), (_, b)) in t1.iter().zip(&tn) {
                assert_eq!(a.re.to_bits(), b.re.to_bits());
                assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn checkpoint_series_matches_single_cut_runs() {
        let src = phase_source("t^(3/2)");
        let q = CorrelationQuery::new(vec![1, 1, 0], vec![1, 1, -1], 1).unwrap();
        let scheme = AveragingScheme::full(10_000);
        let series = empirical_correlation(&src, &q, &scheme, 1).unwrap();
        for p in &series.points {
            let single =
                empirical_correlation(&src, &q, &AveragingScheme::single(p.n), 1).unwrap();
            let sv = single.final_value();
            assert_eq!(p.value.re.to_bits(), sv.re.to_bits(), "N={}", p.n);
            assert_eq!(p.value.im.to_bits(), sv.im.to_bits(), "N={}", p.n);
        }
    }

    #[test]
    fn joint_of_one_source_equals_empirical() {
        let src = phase_source("t^(3/2)");
        let q = CorrelationQuery::new(vec![1, 0], vec![1, -1], 1).unwrap();
        let scheme = AveragingScheme::single(30_000);
        let j = joint_correlation(&[&src], &[q.clone()], &scheme, 1).unwrap();
        let e = empirical_correlation(&src, &q, &scheme, 1).unwrap();
        assert_eq!(j.final_value().re.to_bits(), e.final_value().re.to_bits());
        assert_eq!(j.final_value().im.to_bits(), e.final_value().im.to_bits());
    }

    #[test]
    fn joint_identity_queries_give_one() {
        let a = phase_source("t^(3/2)");
        let b = phase_source("sqrt2*t^(3/2)");
        let q = CorrelationQuery::new(vec![0, 0], vec![1, -1], 1).unwrap();
        let j = joint_correlation(
            &[&a, &b],
            &[q.clone(), q],
            &AveragingScheme::single(10_000),
            1,
        )
        .unwrap();
        assert!((j.final_value() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn negative_shifts_start_late_enough() {
        let src = FnSeq(|n| {
            assert!(n >= 2, "index below source start");
            Complex64::new(1.0, 0.0)
        });
        let q = CorrelationQuery::new(vec![-5, 0], vec![1, -1], 2).unwrap();
        let s = empirical_correlation(&src, &q, &AveragingScheme::single(1000), 1).unwrap();
        assert_eq!(s.n_start, 12);
        assert_eq!(s.final_value(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn enumerate_counts_match_multiset_formulas() {
        // 22 symbols for |n| <= 5: C(22,1)+C(23,2)+C(24,3)+C(25,4) multisets
        let all = enumerate_queries(4, 5, false);
        assert_eq!(all.len(), 22 + 253 + 2024 + 12650);
        let dedup = enumerate_queries(4, 5, true);
        assert_eq!(dedup.len(), (all.len() - 77) / 2 + 77);
        for q in &dedup {
            q.validate().unwrap();
        }
    }
}
