//! Pearson's chi-squared test of independence.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquaredResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Tests independence of rows and columns. All-zero rows and columns are dropped first.
pub fn chi_squared(table: &[Vec<u64>]) -> ChiSquaredResult {
    let cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let col_sum = |c: usize| {
        table
            .iter()
            .map(|r| r.get(c).copied().unwrap_or(0))
            .sum::<u64>()
    };
    let keep_cols: Vec<usize> = (0..cols).filter(|&c| col_sum(c) > 0).collect();
    let rows: Vec<Vec<f64>> = table
        .iter()
        .filter(|r| r.iter().any(|&v| v > 0))
        .map(|r| {
            keep_cols
                .iter()
                .map(|&c| r.get(c).copied().unwrap_or(0) as f64)
                .collect()
        })
        .collect();
    let (nr, nc) = (rows.len(), keep_cols.len());
    if nr < 2 || nc < 2 {
        return ChiSquaredResult {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        };
    }
    let row_tot: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<f64> = (0..nc).map(|c| rows.iter().map(|r| r[c]).sum()).collect();
    let total: f64 = row_tot.iter().sum();
    let mut stat = 0.0;
    for (i, r) in rows.iter().enumerate() {
        for (j, &obs) in r.iter().enumerate() {
            let exp = row_tot[i] * col_tot[j] / total;
            stat += (obs - exp).powi(2) / exp;
        }
    }
    let dof = (nr - 1) * (nc - 1);
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    ChiSquaredResult {
        statistic: stat,
        dof,
        p_value: 1.0 - dist.cdf(stat),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_two_by_two() {
        // Every expected count is 25 and every cell is off by 5, so each contributes 1.
        let r = chi_squared(&[vec![30, 20], vec![20, 30]]);
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert_eq!(r.dof, 1);
        assert!((r.p_value - 0.045500263896).abs() < 1e-6);
    }

    #[test]
    fn degenerate_tables() {
        assert_eq!(chi_squared(&[vec![5, 0], vec![7, 0]]).p_value, 1.0);
        assert_eq!(chi_squared(&[]).dof, 0);
    }
}
