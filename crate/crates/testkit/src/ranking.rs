/// Rank of the true entity for one query, recomputed candidate by candidate.
///
/// `replace_head` picks the corrupted side. With `filtered`, candidates `e`
/// other than the true one for which `known(corrupted triple)` holds are
/// skipped. Returns `(average-tie rank, pessimistic rank)`.
pub fn brute_force_rank<S, K>(
    num_entities: usize,
    query: (usize, usize, usize),
    replace_head: bool,
    filtered: bool,
    score: S,
    known: K,
) -> (f64, f64)
where
    S: Fn(usize, usize, usize) -> f64,
    K: Fn(usize, usize, usize) -> bool,
{
    let (h, r, t) = query;
    let truth = if replace_head { h } else { t };
    let target = score(h, r, t);
    let mut better = 0.0;
    let mut same = 0.0;
    for e in 0..num_entities {
        if e == truth {
            continue;
        }
        let (ch, ct) = if replace_head { (e, t) } else { (h, e) };
        if filtered && known(ch, r, ct) {
            continue;
        }
        let s = score(ch, r, ct);
        if s > target {
            better += 1.0;
        } else if s == target {
            same += 1.0;
        }
    }
    (1.0 + better + same / 2.0, 1.0 + better + same)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMetrics {
    pub mr: f64,
    pub mrr: f64,
    /// Hits@k for each requested k, same order.
    pub hits: Vec<f64>,
}

pub fn aggregate_oracle(ranks: &[f64], ks: &[usize]) -> OracleMetrics {
    let n = ranks.len() as f64;
    let mut sum = 0.0;
    let mut inv = 0.0;
    for &r in ranks {
        sum += r;
        inv += 1.0 / r;
    }
    let mut hits = Vec::new();
    for &k in ks {
        let mut c = 0usize;
        for &r in ranks {
            if r <= k as f64 {
                c += 1;
            }
        }
        hits.push(c as f64 / n);
    }
    OracleMetrics {
        mr: sum / n,
        mrr: inv / n,
        hits,
    }
}
