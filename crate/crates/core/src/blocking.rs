//! Input block structure: which shooting intervals share one input vector.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Partition of `N` shooting intervals into `M` consecutive input blocks.
///
/// `starts` holds `M + 1` entries with `starts[0] = 0` and `starts[M] = N`;
/// block `j` covers intervals `starts[j]..starts[j + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    starts: Vec<usize>,
    lengths: Vec<usize>,
}

impl BlockStructure {
    pub fn from_block_lengths(lengths: &[usize]) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidBlockStructure("no blocks given".into()));
        }
        if let Some(j) = lengths.iter().position(|&n| n == 0) {
            return Err(Error::InvalidBlockStructure(format!("block {j} has zero length")));
        }
        let mut starts = Vec::with_capacity(lengths.len() + 1);
        starts.push(0);
        let mut acc = 0;
        for &n in lengths {
            acc += n;
            starts.push(acc);
        }
        Ok(Self {
            starts,
            lengths: lengths.to_vec(),
        })
    }

    /// Builds the structure from the start-index vector `[I_0, ..., I_M]`.
    pub fn from_block_indices(starts: &[usize]) -> Result<Self> {
        if starts.len() < 2 {
            return Err(Error::InvalidBlockStructure("index vector needs at least two entries".into()));
        }
        if starts[0] != 0 {
            return Err(Error::InvalidBlockStructure(format!(
                "index vector must start at 0, got {}",
                starts[0]
            )));
        }
        let lengths: Vec<usize> = starts
            .windows(2)
            .map(|w| {
                if w[1] > w[0] {
                    Ok(w[1] - w[0])
                } else {
                    Err(Error::InvalidBlockStructure(format!(
                        "index vector must be strictly increasing ({} then {})",
                        w[0], w[1]
                    )))
                }
            })
            .collect::<Result<_>>()?;
        Self::from_block_lengths(&lengths)
    }

    /// One block per interval: blocking disabled.
    pub fn unit(n: usize) -> Result<Self> {
        Self::from_block_lengths(&vec![1; n])
    }

    /// `m` blocks of near-equal length, longer blocks first.
    pub fn uniform(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidBlockStructure(format!("cannot split {n} intervals into {m} blocks")));
        }
        let base = n / m;
        let extra = n % m;
        let lengths: Vec<usize> = (0..m).map(|j| base + usize::from(j < extra)).collect();
        Self::from_block_lengths(&lengths)
    }

    /// Total number of shooting intervals `N`.
    pub fn horizon(&self) -> usize {
        *self.starts.last().unwrap()
    }

    /// Number of input blocks `M`.
    pub fn num_blocks(&self) -> usize {
        self.lengths.len()
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn start(&self, j: usize) -> usize {
        self.starts[j]
    }

    pub fn end(&self, j: usize) -> usize {
        self.starts[j + 1]
    }

    pub fn is_unit(&self) -> bool {
        self.lengths.iter().all(|&n| n == 1)
    }

    /// Block containing interval `k`.
    pub fn block_of(&self, k: usize) -> Result<usize> {
        let horizon = self.horizon();
        if k >= horizon {
            return Err(Error::IndexOutOfRange { index: k, horizon });
        }
        // First start strictly greater than k, minus one.
        Ok(self.starts.partition_point(|&s| s <= k) - 1)
    }

    /// Per-interval block index; cheaper than repeated `block_of` calls.
    pub fn interval_blocks(&self) -> Vec<usize> {
        self.lengths
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| std::iter::repeat_n(j, n))
            .collect()
    }

    /// Explicit `T = T_b (x) I_nu` mapping blocked inputs to per-interval inputs.
    /// Only used on the reference (non-tailored) condensing path and in tests.
    pub fn build_t(&self, nu: usize) -> DMatrix<f64> {
        let n = self.horizon();
        let m = self.num_blocks();
        let mut t = DMatrix::zeros(n * nu, m * nu);
        for (k, j) in self.interval_blocks().into_iter().enumerate() {
            for i in 0..nu {
                t[(k * nu + i, j * nu + i)] = 1.0;
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_structure() -> BlockStructure {
        BlockStructure::from_block_lengths(&[1, 2, 3, 4, 5, 5, 15, 15, 15, 15]).unwrap()
    }

    #[test]
    fn pendulum_structure_indices() {
        let bs = paper_structure();
        assert_eq!(bs.starts(), &[0, 1, 3, 6, 10, 15, 20, 35, 50, 65, 80]);
        assert_eq!(bs.num_blocks(), 10);
        assert_eq!(bs.horizon(), 80);
    }

    #[test]
    fn unit_and_single_blocks() {
        let unit = BlockStructure::from_block_lengths(&[1, 1, 1]).unwrap();
        assert_eq!(unit.starts(), &[0, 1, 2, 3]);
        assert!(unit.is_unit());
        let single = BlockStructure::from_block_lengths(&[80]).unwrap();
        assert_eq!(single.starts(), &[0, 80]);
        assert_eq!(single.num_blocks(), 1);
    }

    #[test]
    fn invalid_lengths_are_rejected() {
        assert!(matches!(
            BlockStructure::from_block_lengths(&[2, 0, 1]),
            Err(Error::InvalidBlockStructure(_))
        ));
        assert!(BlockStructure::from_block_lengths(&[]).is_err());
        assert!(BlockStructure::from_block_indices(&[0, 3, 3]).is_err());
        assert!(BlockStructure::from_block_indices(&[1, 3]).is_err());
    }

    #[test]
    fn membership_lookup() {
        let bs = paper_structure();
        assert_eq!(bs.block_of(0).unwrap(), 0);
        assert_eq!(bs.block_of(34).unwrap(), 6);
        assert_eq!(bs.block_of(35).unwrap(), 7);
        assert_eq!(bs.block_of(79).unwrap(), 9);
        assert!(matches!(bs.block_of(80), Err(Error::IndexOutOfRange { index: 80, .. })));
    }

    #[test]
    fn t_matrix_examples() {
        let unit = BlockStructure::unit(4).unwrap();
        assert_eq!(unit.build_t(1), DMatrix::identity(4, 4));

        let bs = BlockStructure::from_block_lengths(&[2, 1]).unwrap();
        assert_eq!(bs.build_t(1), DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]));

        let bs = BlockStructure::from_block_lengths(&[2]).unwrap();
        let kron = DMatrix::from_element(2, 1, 1.0).kronecker(&DMatrix::<f64>::identity(2, 2));
        assert_eq!(bs.build_t(2), kron);
    }

    #[test]
    fn uniform_split() {
        let bs = BlockStructure::uniform(23, 5).unwrap();
        assert_eq!(bs.lengths(), &[5, 5, 5, 4, 4]);
        assert!(BlockStructure::uniform(3, 4).is_err());
    }

    fn lengths_strategy() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..6, 1..12)
    }

    proptest! {
        #[test]
        fn t_columns_are_orthogonal(lengths in lengths_strategy(), nu in 1usize..4) {
            let bs = BlockStructure::from_block_lengths(&lengths).unwrap();
            let t = bs.build_t(nu);
            let gram = t.transpose() * &t;
            for j in 0..bs.num_blocks() {
                for a in 0..nu {
                    for b in 0..bs.num_blocks() * nu {
                        let expected = if b == j * nu + a { lengths[j] as f64 } else { 0.0 };
                        prop_assert_eq!(gram[(j * nu + a, b)], expected);
                    }
                }
            }
        }

        #[test]
        fn each_row_block_hits_its_own_column_block(lengths in lengths_strategy()) {
            let bs = BlockStructure::from_block_lengths(&lengths).unwrap();
            let t = bs.build_t(2);
            for k in 0..bs.horizon() {
                let j = bs.block_of(k).unwrap();
                prop_assert!(bs.start(j) <= k && k < bs.end(j));
                for col in 0..bs.num_blocks() {
                    let block = t.view((2 * k, 2 * col), (2, 2));
                    if col == j {
                        prop_assert_eq!(block.into_owned(), DMatrix::identity(2, 2));
                    } else {
                        prop_assert_eq!(block.amax(), 0.0);
                    }
                }
            }
        }

        #[test]
        fn lengths_round_trip(lengths in lengths_strategy()) {
            let bs = BlockStructure::from_block_lengths(&lengths).unwrap();
            let again = BlockStructure::from_block_lengths(bs.lengths()).unwrap();
            prop_assert_eq!(&again, &bs);
            prop_assert_eq!(BlockStructure::from_block_indices(bs.starts()).unwrap(), bs);
        }
    }
}
