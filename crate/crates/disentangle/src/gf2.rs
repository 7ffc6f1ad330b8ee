//! Rank computation over GF(2) on bit-packed rows.
//!
//! Rows are little-endian `u64` words: bit `j` of a row lives in word
//! `j / 64` at position `j % 64`. Rank runs in-place on a copy of the rows,
//! so callers keep their data.

/// Number of 64-bit words needed to hold `bits` bits.
pub fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

/// Returns the rank over GF(2) of `rows`. All rows must have the same word
/// count; trailing zero columns are harmless.
///
/// Panics if the rows have unequal widths.
pub fn rank(rows: &[Vec<u64>]) -> usize {
    rank_of(rows.iter().map(|r| r.as_slice()))
}

/// Rank of single-word rows (up to 64 columns).
pub fn rank_words(rows: &[u64]) -> usize {
    let rows: Vec<Vec<u64>> = rows.iter().map(|&r| vec![r]).collect();
    rank(&rows)
}

fn rank_of<'a>(rows: impl Iterator<Item = &'a [u64]>) -> usize {
    // Incremental xor-basis: reduce each row against the pivots found so far;
    // a row that survives nonzero contributes a new pivot.
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut width: Option<usize> = None;
    for row in rows {
        match width {
            None => width = Some(row.len()),
            Some(w) => assert_eq!(w, row.len(), "rows must have equal width"),
        }
        let mut row = row.to_vec();
        for (lead, basis_row) in &basis {
            if bit(&row, *lead) {
                xor_into(&mut row, basis_row);
            }
        }
        if let Some(lead) = leading_bit(&row) {
            basis.push((lead, row));
        }
    }
    basis.len()
}

fn bit(row: &[u64], idx: usize) -> bool {
    row[idx / 64] >> (idx % 64) & 1 == 1
}

fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// Index of the highest set bit, or `None` for an all-zero row.
fn leading_bit(row: &[u64]) -> Option<usize> {
    for (w, &word) in row.iter().enumerate().rev() {
        if word != 0 {
            return Some(w * 64 + 63 - word.leading_zeros() as usize);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_has_full_rank() {
        assert_eq!(rank_words(&[0b001, 0b010, 0b100]), 3);
    }

    #[test]
    fn dependent_rows_collapse() {
        // {11, 01, 10}: third row is the sum of the first two.
        assert_eq!(rank_words(&[0b11, 0b01, 0b10]), 2);
    }

    #[test]
    fn zero_rows_contribute_nothing() {
        assert_eq!(rank_words(&[0, 0, 0]), 0);
        assert_eq!(rank_words(&[]), 0);
    }

    #[test]
    fn multiword_rows() {
        // Bits 0, 64, and their sum across a two-word row.
        let rows = vec![vec![1, 0], vec![0, 1], vec![1, 1]];
        assert_eq!(rank(&rows), 2);
    }

    #[test]
    #[should_panic(expected = "equal width")]
    fn unequal_widths_rejected() {
        rank(&[vec![1], vec![1, 0]]);
    }

    proptest! {
        #[test]
        fn rank_bounded_by_dimensions(rows in proptest::collection::vec(0u64..1 << 16, 0..12)) {
            let r = rank_words(&rows);
            prop_assert!(r <= rows.len());
            prop_assert!(r <= 16);
        }

        #[test]
        fn rank_invariant_under_row_xor(
            rows in proptest::collection::vec(any::<u64>(), 2..10),
            i in 0usize..10,
            j in 0usize..10,
        ) {
            let i = i % rows.len();
            let j = j % rows.len();
            prop_assume!(i != j);
            let mut mutated = rows.clone();
            mutated[i] ^= rows[j];
            prop_assert_eq!(rank_words(&rows), rank_words(&mutated));
        }

        #[test]
        fn duplicating_a_row_preserves_rank(rows in proptest::collection::vec(any::<u64>(), 1..10)) {
            let mut dup = rows.clone();
            dup.push(rows[0]);
            prop_assert_eq!(rank_words(&rows), rank_words(&dup));
        }
    }
}
