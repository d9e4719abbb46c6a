//! Independent assignment oracles the matcher is checked against.

/// Best achievable (cardinality, total cost) over every partial assignment
/// of rows to columns, by dynamic programming over column subsets. Infinite
/// entries are forbidden pairs. Maximizes cardinality first, then minimizes
/// cost — deliberately a different algorithm from the production matcher.
pub fn oracle_assignment(cost: &[Vec<f64>]) -> (usize, f64) {
    let cols = cost.first().map_or(0, Vec::len);
    assert!(cols <= 16, "oracle is exponential in columns");
    let mut dp = vec![f64::INFINITY; 1 << cols];
    dp[0] = 0.0;
    for row in cost {
        let mut next = dp.clone(); // leaving the row unassigned is always allowed
        for (mask, &base) in dp.iter().enumerate() {
            if !base.is_finite() {
                continue;
            }
            for (c, &entry) in row.iter().enumerate() {
                if mask & (1 << c) != 0 || !entry.is_finite() {
                    continue;
                }
                let with = mask | (1 << c);
                let total = base + entry;
                if total < next[with] {
                    next[with] = total;
                }
            }
        }
        dp = next;
    }
    let mut best = (0usize, 0.0f64);
    for (mask, &total) in dp.iter().enumerate() {
        if !total.is_finite() {
            continue;
        }
        let cardinality = (mask as u32).count_ones() as usize;
        if cardinality > best.0 || (cardinality == best.0 && total < best.1) {
            best = (cardinality, total);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_prefers_cardinality_over_cost() {
        // Taking both pairs costs 12; the single cheapest pair costs 1.
        let cost = vec![vec![1.0, 2.0], vec![f64::INFINITY, 10.0]];
        assert_eq!(oracle_assignment(&cost), (2, 11.0));
    }

    #[test]
    fn oracle_handles_fully_forbidden() {
        let cost = vec![vec![f64::INFINITY; 3]; 2];
        assert_eq!(oracle_assignment(&cost), (0, 0.0));
    }
}
