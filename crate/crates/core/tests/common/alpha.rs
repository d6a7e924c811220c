use slant_core::metrics::ReliabilityData;

/// rows = raters, columns = units, `None` = missing.
pub type Grid = Vec<Vec<Option<u8>>>;

pub fn to_data(g: &Grid) -> ReliabilityData {
    ReliabilityData::from_triples(g.iter().enumerate().flat_map(|(r, row)| {
        row.iter().enumerate().filter_map(move |(u, v)| v.map(|v| (r as u64, u as u64, v)))
    }))
}

pub fn columns(g: &Grid) -> Vec<Vec<u8>> {
    let units = g[0].len();
    (0..units).map(|u| g.iter().filter_map(|row| row[u]).collect()).collect()
}

/// Pairwise definition: observed disagreement over ordered within-unit pairs
/// weighted by 1/(m_u - 1), expected disagreement over every ordered pair of
/// pairable values in the pool.
pub fn oracle(g: &Grid) -> Option<f64> {
    let pairable: Vec<Vec<u8>> = columns(g).into_iter().filter(|c| c.len() >= 2).collect();
    let pool: Vec<u8> = pairable.iter().flatten().copied().collect();
    let n = pool.len() as f64;
    if pool.is_empty() {
        return None;
    }
    let mut observed = 0.0;
    for c in &pairable {
        let mut d = 0.0;
        for i in 0..c.len() {
            for j in 0..c.len() {
                if i != j && c[i] != c[j] {
                    d += 1.0;
                }
            }
        }
        observed += d / (c.len() as f64 - 1.0);
    }
    let mut expected = 0.0;
    for i in 0..pool.len() {
        for j in 0..pool.len() {
            if i != j && pool[i] != pool[j] {
                expected += 1.0;
            }
        }
    }
    if expected == 0.0 {
        return None;
    }
    Some(1.0 - (observed / n) / (expected / (n * (n - 1.0))))
}

pub fn disagreement(g: &Grid) -> bool {
    columns(g).iter().any(|c| c.len() >= 2 && c.iter().any(|&v| v != c[0]))
}
