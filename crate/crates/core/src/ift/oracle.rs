use super::{GenericGraph, IftError, SeedSet, INFINITE_COST};

/// Minimax path cost from the nearest seed, by relaxing every arc until a
/// fixed point. Slow, but has no queue or tie-breaking logic to get wrong.
pub fn minimax_oracle(graph: &GenericGraph, seeds: &SeedSet) -> Result<Vec<u32>, IftError> {
    let n = graph.node_count();
    seeds.validate(n)?;
    let mut cost = vec![INFINITE_COST; n];
    for &(s, _) in seeds.entries() {
        cost[s] = 0;
    }
    loop {
        let mut changed = false;
        for p in 0..n {
            if cost[p] == INFINITE_COST {
                continue;
            }
            for (q, w) in graph.neighbors(p) {
                let through = cost[p].max(w);
                if through < cost[q] {
                    cost[q] = through;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(cost);
        }
    }
}
