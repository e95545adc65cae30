pub const RRF_CONSTANT: f64 = 60.0;

/// Positions (0-based) of items ordered by descending score, ties broken by
/// index.
pub fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut rank = vec![0; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

/// Reciprocal rank fusion of a lexical and a dense ranking, each given as
/// the rank of every item. Returns `(item, fused score)` best first, ties
/// broken by lexical rank and then by item index.
pub fn reciprocal_rank_fusion(lexical: &[usize], dense: &[usize], constant: f64) -> Vec<(usize, f64)> {
    let mut fused: Vec<(usize, f64)> = (0..lexical.len())
        .map(|i| {
            let s = 1.0 / (constant + lexical[i] as f64 + 1.0)
                + 1.0 / (constant + dense[i] as f64 + 1.0);
            (i, s)
        })
        .collect();
    fused.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(lexical[a.0].cmp(&lexical[b.0]))
            .then(a.0.cmp(&b.0))
    });
    fused
}
