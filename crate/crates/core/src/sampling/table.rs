use crate::error::{Error, Result};

/// Ragged index table in CSR form: row `i` occupies
/// `indices[offsets[i]..offsets[i + 1]]`, every entry `< in_len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaggedTable {
    in_len: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl RaggedTable {
    /// Rows must be nonempty, in range and free of duplicates.
    pub fn from_rows(in_len: usize, rows: &[Vec<usize>]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        for row in rows {
            indices.extend_from_slice(row);
            offsets.push(indices.len());
        }
        Self::from_csr(in_len, offsets, indices)
    }

    pub fn from_csr(in_len: usize, offsets: Vec<usize>, indices: Vec<usize>) -> Result<Self> {
        if offsets.first() != Some(&0) || *offsets.last().unwrap() != indices.len() {
            return Err(Error::InvalidInput("row offsets do not span the index array".into()));
        }
        let t = RaggedTable {
            in_len,
            offsets,
            indices,
        };
        for i in 0..t.rows() {
            if t.offsets[i + 1] <= t.offsets[i] {
                return Err(Error::InvalidInput(format!("row {i} is empty")));
            }
            let row = t.row(i);
            if let Some(&bad) = row.iter().find(|&&j| j >= in_len) {
                return Err(Error::InvalidInput(format!("row {i} references {bad} >= {in_len}")));
            }
            for (a, &x) in row.iter().enumerate() {
                if row[a + 1..].contains(&x) {
                    return Err(Error::InvalidInput(format!("row {i} repeats index {x}")));
                }
            }
        }
        Ok(t)
    }

    /// Number of rows (output vertices).
    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Size of the indexed input domain.
    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn max_row_len(&self) -> usize {
        (0..self.rows()).map(|i| self.row_len(i)).max().unwrap_or(0)
    }

    /// Dense `rows × max_row_len` layout. Vacant slots hold 0 and are `false`
    /// in the mask.
    pub fn to_dense(&self) -> (usize, Vec<usize>, Vec<bool>) {
        let width = self.max_row_len();
        let mut table = vec![0; self.rows() * width];
        let mut mask = vec![false; self.rows() * width];
        for i in 0..self.rows() {
            for (j, &v) in self.row(i).iter().enumerate() {
                table[i * width + j] = v;
                mask[i * width + j] = true;
            }
        }
        (width, table, mask)
    }

    pub fn from_dense(in_len: usize, width: usize, table: &[usize], mask: &[bool]) -> Result<Self> {
        if table.len() != mask.len() || (width > 0 && !table.len().is_multiple_of(width)) {
            return Err(Error::InvalidInput("dense table and mask shapes disagree".into()));
        }
        let rows: Vec<Vec<usize>> = table
            .chunks(width.max(1))
            .zip(mask.chunks(width.max(1)))
            .map(|(t, m)| t.iter().zip(m).filter(|(_, &keep)| keep).map(|(&v, _)| v).collect())
            .collect();
        Self::from_rows(in_len, &rows)
    }

    /// Swaps the roles of rows and indices.
    pub fn transpose(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.in_len];
        for i in 0..self.rows() {
            for &j in self.row(i) {
                out[j].push(i);
            }
        }
        out
    }
}
