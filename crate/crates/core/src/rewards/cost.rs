use ndarray::{Array2, ArrayView1};

use crate::corpus::EmbeddingTable;

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(&b) / (na * nb)).clamp(-1.0, 1.0)
}

/// `c_ij = 1 - cos(v_i, v_j)` between document and summary supports. A token
/// with a zero embedding has cosine 0 to everything, so cost 1.
pub fn cost_matrix(support_doc: &[usize], support_sum: &[usize], emb: &EmbeddingTable) -> Array2<f64> {
    let mut cost = Array2::zeros((support_doc.len(), support_sum.len()));
    for (i, &a) in support_doc.iter().enumerate() {
        for (j, &b) in support_sum.iter().enumerate() {
            cost[[i, j]] = if a == b {
                0.0
            } else {
                1.0 - cosine(emb.row(a), emb.row(b))
            };
        }
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_matrix(array![
            [0.0, 0.0],
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 2.0],
            [-3.0, 0.0],
            [1.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn identical_orthogonal_and_opposite() {
        let c = cost_matrix(&[2], &[2, 3, 4], &table());
        assert_eq!(c[[0, 0]], 0.0);
        assert!((c[[0, 1]] - 1.0).abs() < 1e-15);
        assert!((c[[0, 2]] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_norm_costs_one() {
        let c = cost_matrix(&[1], &[5], &table());
        assert_eq!(c[[0, 0]], 1.0);
    }

    #[test]
    fn values_stay_in_range() {
        let ids = [2, 3, 4, 5];
        let c = cost_matrix(&ids, &ids, &table());
        assert!(c.iter().all(|&v| (0.0..=2.0).contains(&v)));
    }
}
