use super::{Connectome, DataError, Result, RoiTimeSeries};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Self { rows, cols, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Pearson correlation between every pair of ROI columns.
///
/// The diagonal is exactly 1 and entries are clamped to `[-1, 1]`.
pub fn pearson_fc(ts: &RoiTimeSeries) -> Result<Matrix> {
    let (t_len, k) = (ts.t_len, ts.atlas.k);
    if t_len < 2 {
        return Err(DataError::TooShort(t_len));
    }
    if ts.values.iter().any(|v| !v.is_finite()) {
        return Err(DataError::NonFinite);
    }
    // Columns centered and scaled to unit norm.
    let mut cols = vec![0.0; k * t_len];
    for j in 0..k {
        let col = &mut cols[j * t_len..(j + 1) * t_len];
        for (c, v) in col.iter_mut().zip(ts.column(j)) {
            *c = v;
        }
        let (min, max) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if min == max {
            return Err(DataError::ConstantRoi(j));
        }
        let mean = col.iter().sum::<f64>() / t_len as f64;
        col.iter_mut().for_each(|v| *v -= mean);
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(DataError::ConstantRoi(j));
        }
        col.iter_mut().for_each(|v| *v /= norm);
    }
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        out[i * k + i] = 1.0;
        let ci = &cols[i * t_len..(i + 1) * t_len];
        for j in 0..i {
            let cj = &cols[j * t_len..(j + 1) * t_len];
            let r = ci.iter().zip(cj).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0);
            out[i * k + j] = r;
            out[j * k + i] = r;
        }
    }
    Ok(Matrix::new(k, k, out))
}

/// Strict lower triangle, row-major: `(1,0), (2,0), (2,1), (3,0), ...`.
pub fn vectorize_lower(m: &Matrix) -> Result<Vec<f64>> {
    if m.rows != m.cols {
        return Err(DataError::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let k = m.rows;
    let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for i in 0..k {
        for j in 0..i {
            let (a, b) = (m.get(i, j), m.get(j, i));
            if (a - b).abs() > 1e-9 {
                return Err(DataError::NotSymmetric(i, j));
            }
            out.push(a);
        }
    }
    Ok(out)
}

/// Pearson FC followed by lower-triangle vectorization.
pub fn connectome_from_series(ts: &RoiTimeSeries) -> Result<Connectome> {
    let features = vectorize_lower(&pearson_fc(ts)?)?;
    Connectome::new(ts.subject_id.clone(), ts.atlas.clone(), features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AtlasSpec;
    use proptest::prelude::*;

    fn series(k: usize, cols: &[Vec<f64>]) -> RoiTimeSeries {
        let t = cols[0].len();
        let mut values = vec![0.0; t * k];
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                values[i * k + j] = v;
            }
        }
        RoiTimeSeries::new("s", AtlasSpec::new("test", k).unwrap(), t, values).unwrap()
    }

    /// Textbook formula on raw sums, independent of the centered-norm path.
    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn perfect_and_anti_correlation() {
        let x = vec![1.0, 4.0, 2.0, 8.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let m = pearson_fc(&series(3, &[x.clone(), x.clone(), neg])).unwrap();
        assert!((m.get(1, 0) - 1.0).abs() < 1e-15);
        assert!((m.get(2, 0) + 1.0).abs() < 1e-15);
        assert_eq!(m.get(0, 0), 1.0);
    }

    #[test]
    fn hand_example() {
        let x = vec![1.0, 2.0, 3.0];
        let y = vec![1.0, 2.0, 4.0];
        let oracle = pearson_oracle(&x, &y);
        assert!((oracle - 0.981_980_506_061_965_7).abs() < 1e-12);
        let m = pearson_fc(&series(2, &[x, y])).unwrap();
        assert!((m.get(1, 0) - oracle).abs() < 1e-12);
    }

    #[test]
    fn constant_roi_is_an_error() {
        let err = pearson_fc(&series(3, &[vec![1.0, 2.0], vec![5.0, 5.0], vec![0.0, 1.0]]));
        assert!(matches!(err, Err(DataError::ConstantRoi(1))));
    }

    #[test]
    fn vectorize_small_matrix() {
        let (a, b, c) = (0.1, 0.2, 0.3);
        let m = Matrix::new(3, 3, vec![1.0, a, b, a, 1.0, c, b, c, 1.0]);
        assert_eq!(vectorize_lower(&m).unwrap(), vec![a, b, c]);
        let bad = Matrix::new(2, 3, vec![0.0; 6]);
        assert!(matches!(vectorize_lower(&bad), Err(DataError::NotSquare { .. })));
        let asym = Matrix::new(2, 2, vec![1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(vectorize_lower(&asym), Err(DataError::NotSymmetric(1, 0))));
    }

    #[test]
    fn vectorized_lengths_for_builtin_atlases() {
        for (k, len) in [(116, 6670), (200, 19900), (160, 12720)] {
            let m = Matrix::new(k, k, vec![0.0; k * k]);
            assert_eq!(vectorize_lower(&m).unwrap().len(), len);
        }
    }

    fn random_series() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (2usize..30, 3usize..40).prop_flat_map(|(k, t)| {
            (Just(k), Just(t), proptest::collection::vec(-10.0f64..10.0, k * t))
        })
    }

    proptest! {
        #[test]
        fn vectorized_length_matches_atlas((k, t, values) in random_series()) {
            let atlas = AtlasSpec::new("p", k).unwrap();
            let ts = RoiTimeSeries::new("s", atlas.clone(), t, values).unwrap();
            if let Ok(c) = connectome_from_series(&ts) {
                prop_assert_eq!(c.features.len(), atlas.feature_len());
                prop_assert!(c.features.iter().all(|v| (-1.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn affine_invariance(
            (k, t, values) in random_series(),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
            col in 0usize..30,
        ) {
            let atlas = AtlasSpec::new("p", k).unwrap();
            let ts = RoiTimeSeries::new("s", atlas.clone(), t, values.clone()).unwrap();
            let Ok(base) = pearson_fc(&ts) else { return Ok(()) };
            let col = col % k;
            let mut pos = values.clone();
            let mut neg = values;
            for i in 0..t {
                pos[i * k + col] = scale * pos[i * k + col] + shift;
                neg[i * k + col] = -scale * neg[i * k + col] + shift;
            }
            let pos = pearson_fc(&RoiTimeSeries::new("s", atlas.clone(), t, pos).unwrap()).unwrap();
            let neg = pearson_fc(&RoiTimeSeries::new("s", atlas, t, neg).unwrap()).unwrap();
            for i in 0..k {
                for j in 0..k {
                    let flip = if (i == col) != (j == col) { -1.0 } else { 1.0 };
                    prop_assert!((pos.get(i, j) - base.get(i, j)).abs() < 1e-9);
                    prop_assert!((neg.get(i, j) - flip * base.get(i, j)).abs() < 1e-9);
                }
            }
        }
    }
}
